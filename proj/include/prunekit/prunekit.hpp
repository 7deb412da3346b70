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

#include "prunekit/checkpoint.hpp"
#include "prunekit/cli.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/go.hpp"
#include "prunekit/harness.hpp"
#include "prunekit/lwp.hpp"
#include "prunekit/network.hpp"
#include "prunekit/pruning.hpp"
#include "prunekit/sparsity.hpp"
#include "prunekit/sr_harness.hpp"
#include "prunekit/tensor.hpp"
