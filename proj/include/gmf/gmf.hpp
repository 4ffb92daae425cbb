// Copyright 2026 The gmfsim Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include "gmf/codec.hpp"
#include "gmf/compression.hpp"
#include "gmf/config_json.hpp"
#include "gmf/data.hpp"
#include "gmf/error.hpp"
#include "gmf/fed_protocol.hpp"
#include "gmf/grad_core.hpp"
#include "gmf/harness.hpp"
#include "gmf/metrics_io.hpp"
#include "gmf/model.hpp"
#include "gmf/partition.hpp"
