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

#ifndef LAPDA_CLI_HPP_
#define LAPDA_CLI_HPP_

#include <string>
#include <vector>

#include "lapda/config.hpp"
#include "lapda/train.hpp"

namespace lapda {

/// Everything one training run produced, kept in memory so tests can audit
/// it (e.g. that the target training split's labels were never read).
struct TrainOutcome {
  Scenario scenario;
  FitResult fit;
  double test_accuracy = -1.0;
};

TrainOutcome run_training(const ResolvedConfig& rc);

std::string step_report_jsonl(const std::vector<StepReport>& history);
std::string summary_json(const ResolvedConfig& rc, const TrainOutcome& out);

// Load + resolve a config file with CLI overrides applied on top.
ResolvedConfig load_config(const std::string& config_path,
                           const std::vector<std::string>& overrides);

// Exit codes: 0 success, 2 configuration error, 1 runtime failure.
int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& out_dir);
int cmd_compare(const std::string& config_path,
                const std::vector<std::string>& overrides,
                const std::string& out_dir);
int cmd_dump_features(const std::string& checkpoint_path,
                      const std::string& config_path,
                      const std::vector<std::string>& overrides,
                      const std::string& split, const std::string& out_path);
int cmd_eval(const std::string& checkpoint_path,
             const std::string& config_path,
             const std::vector<std::string>& overrides,
             const std::string& split);

}  // namespace lapda

#endif  // LAPDA_CLI_HPP_
