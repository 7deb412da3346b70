// Copyright 2026 The PruneKit Authors. All Rights Reserved.
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

#pragma once

#include <functional>

#include "prunekit/network.hpp"
#include "prunekit/pruning.hpp"

namespace prunekit {

/// What a search strategy gets back for one candidate factor vector: the
/// pruned-and-tuned network and its performance drop against the baseline.
struct HarnessOutcome {
  Network net;
  double drop_db = 0.0;
};

/// Evaluation callback consumed by the search strategies. Implementations
/// prune, fine-tune, and measure; mocks may compute the drop in closed form.
using Harness = std::function<HarnessOutcome(const ReducingFactor&)>;

}  // namespace prunekit
