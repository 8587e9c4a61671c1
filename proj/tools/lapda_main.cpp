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

#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lapda/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lapda: domain adaptation via graph label propagation"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs/out", checkpoint_path;
  std::string split = "target-test", features_out = "features.csv";
  std::string seed_override;
  std::vector<std::string> overrides;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--override", overrides, "config override key=value")
        ->take_all();
    cmd->add_option("--seed", seed_override, "shorthand for --override seed=N");
  };

  CLI::App* train = app.add_subcommand("train", "train one model");
  add_common(train);
  train->add_option("--out", out_dir, "output directory");

  CLI::App* compare = app.add_subcommand(
      "compare", "train source-only / adversarial-only / full variants");
  add_common(compare);
  compare->add_option("--out", out_dir, "output directory");

  CLI::App* dump = app.add_subcommand("dump-features",
                                      "export embedded features as CSV");
  add_common(dump);
  dump->add_option("--checkpoint", checkpoint_path, "checkpoint.json path")
      ->required();
  dump->add_option("--split", split,
                   "train|source-train|target-train|target-val|target-test");
  dump->add_option("--out", features_out, "output CSV path");

  CLI::App* evalc = app.add_subcommand("eval", "score a checkpoint");
  add_common(evalc);
  evalc->add_option("--checkpoint", checkpoint_path, "checkpoint.json path")
      ->required();
  evalc->add_option("--split", split, "dataset split to score");

  CLI11_PARSE(app, argc, argv);
  if (!seed_override.empty()) overrides.push_back("seed=" + seed_override);

  if (train->parsed()) return lapda::cmd_train(config_path, overrides, out_dir);
  if (compare->parsed()) {
    return lapda::cmd_compare(config_path, overrides, out_dir);
  }
  if (dump->parsed()) {
    return lapda::cmd_dump_features(checkpoint_path, config_path, overrides,
                                    dump->count("--split") ? split : "train",
                                    features_out);
  }
  return lapda::cmd_eval(checkpoint_path, config_path, overrides, split);
}
