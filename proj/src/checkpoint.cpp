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

#include "lapda/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "lapda/errors.hpp"

namespace lapda {

namespace {

using nlohmann::json;

constexpr int kVersion = 1;

json tensor_to_json(const Tensor& t) {
  return json{{"shape", {t.rows(), t.cols()}}, {"data", t.values()}};
}

Tensor tensor_from_json(const json& j) {
  const auto& shape = j.at("shape");
  std::size_t rows = shape.at(0).get<std::size_t>();
  std::size_t cols = shape.at(1).get<std::size_t>();
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  return Tensor(rows, cols, std::move(data));
}

json bn_to_json(const BatchNormState& s) {
  json j;
  j["initialized"] = s.initialized;
  j["momentum"] = s.momentum;
  if (s.initialized) {
    j["running_mean"] = tensor_to_json(s.running_mean);
    j["running_var"] = tensor_to_json(s.running_var);
  }
  return j;
}

void bn_from_json(const json& j, BatchNormState& s) {
  s.initialized = j.at("initialized").get<bool>();
  s.momentum = j.at("momentum").get<double>();
  if (s.initialized) {
    s.running_mean = tensor_from_json(j.at("running_mean"));
    s.running_var = tensor_from_json(j.at("running_var"));
  }
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  json j;
  j["format"] = "lapda-checkpoint";
  j["version"] = kVersion;
  const ModelSpec& s = model.spec;
  j["spec"] = {{"arch", arch_name(s.arch)},
               {"input_dim", s.input_dim},
               {"hidden", s.hidden},
               {"feature_dim", s.feature_dim},
               {"classes", s.classes},
               {"disc_hidden", s.disc_hidden},
               {"in_c", s.in_c},
               {"in_h", s.in_h},
               {"in_w", s.in_w},
               {"conv_c1", s.conv_c1},
               {"conv_c2", s.conv_c2},
               {"conv_fc", s.conv_fc}};
  json params = json::object();
  Model& m = const_cast<Model&>(model);  // parameter lists are non-const
  for (Parameter* p : m.all_params()) {
    params[p->id] = tensor_to_json(p->value);
  }
  j["params"] = std::move(params);
  if (s.arch == GeneratorArch::kConv2) {
    j["bn1"] = bn_to_json(model.gen.bn1);
    j["bn2"] = bn_to_json(model.gen.bn2);
  }
  std::ofstream out(path);
  if (!out) throw FormatError("checkpoint: cannot write " + path);
  out << j.dump(2) << "\n";
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("checkpoint: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("checkpoint: " + path + " is not valid JSON: " +
                      e.what());
  }
  if (j.value("format", "") != "lapda-checkpoint") {
    throw FormatError("checkpoint: " + path + " has no lapda-checkpoint tag");
  }
  if (j.value("version", 0) != kVersion) {
    throw FormatError("checkpoint: unsupported version in " + path);
  }
  const json& s = j.at("spec");
  ModelSpec spec;
  spec.arch = arch_from_name(s.at("arch").get<std::string>());
  spec.input_dim = s.at("input_dim").get<std::size_t>();
  spec.hidden = s.at("hidden").get<std::size_t>();
  spec.feature_dim = s.at("feature_dim").get<std::size_t>();
  spec.classes = s.at("classes").get<std::size_t>();
  spec.disc_hidden = s.at("disc_hidden").get<std::size_t>();
  spec.in_c = s.at("in_c").get<std::size_t>();
  spec.in_h = s.at("in_h").get<std::size_t>();
  spec.in_w = s.at("in_w").get<std::size_t>();
  spec.conv_c1 = s.at("conv_c1").get<std::size_t>();
  spec.conv_c2 = s.at("conv_c2").get<std::size_t>();
  spec.conv_fc = s.at("conv_fc").get<std::size_t>();

  Model m = make_model(spec);
  const json& params = j.at("params");
  for (Parameter* p : m.all_params()) {
    auto it = params.find(p->id);
    if (it == params.end()) {
      throw FormatError("checkpoint: missing parameter '" + p->id + "'");
    }
    Tensor v = tensor_from_json(*it);
    if (!v.same_shape(p->value)) {
      throw FormatError("checkpoint: parameter '" + p->id + "' has shape " +
                        v.shape_str() + ", expected " + p->value.shape_str());
    }
    p->value = std::move(v);
    p->zero_grad();
  }
  if (spec.arch == GeneratorArch::kConv2) {
    bn_from_json(j.at("bn1"), m.gen.bn1);
    bn_from_json(j.at("bn2"), m.gen.bn2);
  }
  return m;
}

}  // namespace lapda
