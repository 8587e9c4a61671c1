// Copyright 2026 The lapda Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lapda/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "lapda/checkpoint.hpp"
#include "lapda/errors.hpp"

namespace lapda {

namespace {

using nlohmann::json;

void write_text(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << content;
}

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json step_to_json(const StepReport& r) {
  json j;
  j["step"] = r.step;
  j["p"] = r.progress;
  j["lambda"] = r.lambda;
  j["l_cls"] = r.loss_cls;
  j["l_dann"] = r.loss_dann;
  j["l_cycle"] = r.loss_cycle;
  j["total"] = r.loss_total;
  j["cycle_skipped"] = r.cycle_skipped;
  if (r.val_accuracy >= 0.0) j["val_acc"] = r.val_accuracy;
  return j;
}

int guard(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

const DomainDataset& pick_split(const Scenario& s, const std::string& split) {
  if (split == "source-train") return s.source_train;
  if (split == "target-train") return s.target_train;
  if (split == "target-val") return s.target_val;
  if (split == "target-test") return s.target_test;
  throw ConfigError("unknown split '" + split +
                    "' (use source-train|target-train|target-val|target-test)");
}

std::string features_csv(Model& model, const Scenario& scenario,
                         const std::string& split) {
  struct Part {
    const DomainDataset* data;
    const char* domain;
  };
  std::vector<Part> parts;
  if (split == "train") {
    parts.push_back({&scenario.source_train, "source"});
    parts.push_back({&scenario.target_train, "target"});
  } else {
    const DomainDataset& d = pick_split(scenario, split);
    parts.push_back({&d, d.is_source() ? "source" : "target"});
  }
  std::ostringstream out;
  out << "domain,label";
  for (std::size_t k = 0; k < model.spec.feature_dim; ++k) {
    out << ",f_" << (k + 1);
  }
  out << "\n";
  for (const Part& part : parts) {
    if (model.spec.input_dim != part.data->x().cols()) {
      throw ShapeError("dump-features: checkpoint expects input width " +
                       std::to_string(model.spec.input_dim) + ", dataset has " +
                       std::to_string(part.data->x().cols()));
    }
    Tape tape;
    NodeId f = embed(tape, model.gen, tape.constant(part.data->x()),
                     /*training=*/false);
    const Tensor& feats = tape.value(f);
    for (std::size_t i = 0; i < feats.rows(); ++i) {
      out << part.domain << ",";
      out << (part.data->has_labels() ? part.data->label(i) : -1);
      for (std::size_t k = 0; k < feats.cols(); ++k) {
        out << "," << json(feats.at(i, k)).dump();
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace

TrainOutcome run_training(const ResolvedConfig& rc) {
  TrainOutcome out;
  out.scenario = build_scenario(rc.scenario);
  out.fit = fit(out.scenario, rc.train);
  out.test_accuracy = evaluate(out.fit.model, out.scenario.target_test.x(),
                               out.scenario.target_test.labels());
  return out;
}

std::string step_report_jsonl(const std::vector<StepReport>& history) {
  std::ostringstream out;
  for (const StepReport& r : history) {
    out << step_to_json(r).dump() << "\n";
  }
  return out.str();
}

std::string summary_json(const ResolvedConfig& rc, const TrainOutcome& out) {
  json j;
  j["scenario"] = rc.items.at("scenario");
  j["config"] = rc.items;
  j["config_hash"] = rc.hash_hex;
  j["best_val_acc"] = out.fit.best_val_accuracy;
  j["test_acc"] = out.test_accuracy;
  json steps = json::array();
  for (const StepReport& r : out.fit.history) steps.push_back(step_to_json(r));
  j["steps"] = std::move(steps);
  return j.dump(2) + "\n";
}

ResolvedConfig load_config(const std::string& config_path,
                           const std::vector<std::string>& overrides) {
  ConfigMap cfg;
  if (!config_path.empty()) cfg = parse_config_file(config_path);
  apply_overrides(cfg, overrides);
  return resolve_config(cfg);
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& out_dir) {
  return guard([&] {
    ResolvedConfig rc = load_config(config_path, overrides);
    TrainOutcome out = run_training(rc);

    json manifest;
    manifest["config"] = rc.items;
    manifest["config_hash"] = rc.hash_hex;
    manifest["created_utc"] = utc_now();
    manifest["outputs"] = {{"steps", "steps.jsonl"},
                           {"summary", "summary.json"},
                           {"checkpoint", "checkpoint.json"}};
    write_text(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    write_text(out_dir + "/steps.jsonl", step_report_jsonl(out.fit.history));
    write_text(out_dir + "/summary.json", summary_json(rc, out));
    save_checkpoint(out.fit.model, out_dir + "/checkpoint.json");

    std::cout << "scenario=" << rc.items.at("scenario")
              << " best_val_acc=" << out.fit.best_val_accuracy
              << " test_acc=" << out.test_accuracy << "\n";
  });
}

int cmd_compare(const std::string& config_path,
                const std::vector<std::string>& overrides,
                const std::string& out_dir) {
  return guard([&] {
    ResolvedConfig rc = load_config(config_path, overrides);

    struct Variant {
      const char* name;
      bool dann;
      bool cycle;
    };
    const Variant variants[] = {{"source-only", false, false},
                                {"adversarial-only", true, false},
                                {"full", true, true}};
    std::ostringstream csv;
    csv << "variant,val_acc,test_acc,steps\n";
    for (const Variant& v : variants) {
      ResolvedConfig vc = rc;
      vc.train.enable_dann = v.dann;
      if (!v.cycle) vc.train.alpha = 0.0;
      TrainOutcome out = run_training(vc);
      csv << v.name << "," << json(out.fit.best_val_accuracy).dump() << ","
          << json(out.test_accuracy).dump() << "," << vc.train.total_steps
          << "\n";
      std::cout << v.name << ": val_acc=" << out.fit.best_val_accuracy
                << " test_acc=" << out.test_accuracy << "\n";
    }
    json manifest;
    manifest["config"] = rc.items;
    manifest["config_hash"] = rc.hash_hex;
    manifest["created_utc"] = utc_now();
    manifest["outputs"] = {{"table", "compare.csv"}};
    write_text(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    write_text(out_dir + "/compare.csv", csv.str());
  });
}

int cmd_dump_features(const std::string& checkpoint_path,
                      const std::string& config_path,
                      const std::vector<std::string>& overrides,
                      const std::string& split, const std::string& out_path) {
  return guard([&] {
    ResolvedConfig rc = load_config(config_path, overrides);
    Model model = load_checkpoint(checkpoint_path);
    Scenario scenario = build_scenario(rc.scenario);
    write_text(out_path, features_csv(model, scenario, split));
  });
}

int cmd_eval(const std::string& checkpoint_path,
             const std::string& config_path,
             const std::vector<std::string>& overrides,
             const std::string& split) {
  return guard([&] {
    ResolvedConfig rc = load_config(config_path, overrides);
    Model model = load_checkpoint(checkpoint_path);
    Scenario scenario = build_scenario(rc.scenario);
    const DomainDataset& d = pick_split(scenario, split);
    double acc = evaluate(model, d.x(), d.labels());
    json j;
    j["split"] = split;
    j["samples"] = d.size();
    j["accuracy"] = acc;
    std::cout << j.dump() << "\n";
  });
}

}  // namespace lapda
