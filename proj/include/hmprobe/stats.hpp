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

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hmprobe/config.hpp"
#include "hmprobe/errors.hpp"

namespace hmprobe {

// Nearest-rank percentile, `p` in [0, 1]. The median of an even-sized
// sample is its lower middle element, so results are always sample values.
inline Nanos percentile_sorted(std::span<const Nanos> sorted, double p) {
  if (sorted.empty()) throw PreconditionError("percentile of an empty sample");
  auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::ptrdiff_t>(std::ceil(p * n)) - 1;
  rank = std::clamp<std::ptrdiff_t>(rank, 0, static_cast<std::ptrdiff_t>(sorted.size()) - 1);
  return sorted[static_cast<std::size_t>(rank)];
}

inline Nanos percentile(std::vector<Nanos> values, double p) {
  std::sort(values.begin(), values.end());
  return percentile_sorted(values, p);
}

}  // namespace hmprobe
