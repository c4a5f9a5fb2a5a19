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

// Deliberately naive models used as test oracles. They share no code with
// the library.

#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <vector>

namespace hmprobe::testing {

// K-way LRU cache over line addresses; set = (addr >> lo) mod sets.
struct RefCache {
  unsigned lo;
  std::uint64_t sets, ways, line;
  std::map<std::uint64_t, std::list<std::uint64_t>> content;  // MRU first

  bool access(std::uint64_t addr) {
    std::uint64_t tag = addr / line;
    auto& s = content[(addr >> lo) % sets];
    for (auto it = s.begin(); it != s.end(); ++it)
      if (*it == tag) {
        s.erase(it);
        s.push_front(tag);
        return true;
      }
    s.push_front(tag);
    if (s.size() > ways) s.pop_back();
    return false;
  }
};

// Fully associative LRU buffer of `entries` blocks.
struct RefBuffer {
  std::uint64_t entries, block;
  std::list<std::uint64_t> lru;  // MRU first

  bool access(std::uint64_t addr) {
    std::uint64_t b = addr / block;
    for (auto it = lru.begin(); it != lru.end(); ++it)
      if (*it == b) {
        lru.erase(it);
        lru.push_front(b);
        return true;
      }
    lru.push_front(b);
    if (lru.size() > entries) lru.pop_back();
    return false;
  }
};

// Smallest p >= 1 with s[i] == s[i + p] for every valid i.
inline std::size_t brute_force_min_period(const std::vector<bool>& s) {
  for (std::size_t p = 1; p < s.size(); ++p) {
    bool ok = true;
    for (std::size_t i = 0; i + p < s.size() && ok; ++i) ok = s[i] == s[i + p];
    if (ok) return p;
  }
  return s.size();
}

// Number of cycles of the permutation next[].
inline std::size_t count_cycles(const std::vector<std::uint32_t>& next) {
  std::vector<bool> seen(next.size(), false);
  std::size_t cycles = 0;
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (seen[i]) continue;
    ++cycles;
    for (std::size_t j = i; !seen[j]; j = next[j]) seen[j] = true;
  }
  return cycles;
}

}  // namespace hmprobe::testing
