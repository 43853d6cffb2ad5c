// Copyright 2026 The Safeguard Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "safeguard/common.hpp"
#include "safeguard/demo_store.hpp"
#include "safeguard/embedding.hpp"
#include "safeguard/experiment.hpp"
#include "safeguard/guard_search.hpp"
#include "safeguard/mean_shift.hpp"
#include "safeguard/metrics.hpp"
#include "safeguard/ngram.hpp"
#include "safeguard/scheduler.hpp"
#include "safeguard/text.hpp"
#include "safeguard/validator.hpp"
