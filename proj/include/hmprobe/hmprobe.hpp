// Copyright 2026 The hmprobe Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "hmprobe/backend.hpp"
#include "hmprobe/chain.hpp"
#include "hmprobe/config.hpp"
#include "hmprobe/errors.hpp"
#include "hmprobe/infer.hpp"
#include "hmprobe/pipeline.hpp"
#include "hmprobe/probes.hpp"
#include "hmprobe/simulator.hpp"
#include "hmprobe/stats.hpp"
#include "hmprobe/trace.hpp"
#include "hmprobe/types.hpp"
