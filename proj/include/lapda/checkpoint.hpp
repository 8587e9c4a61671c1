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

#ifndef LAPDA_CHECKPOINT_HPP_
#define LAPDA_CHECKPOINT_HPP_

#include <string>

#include "lapda/model.hpp"

namespace lapda {

// Versioned JSON container: model spec, every parameter (id -> shape ->
// values) and the batch-norm running buffers. Doubles are emitted in
// shortest round-trip form, so save/load is lossless at double precision.
void save_checkpoint(const Model& model, const std::string& path);

Model load_checkpoint(const std::string& path);

}  // namespace lapda

#endif  // LAPDA_CHECKPOINT_HPP_
