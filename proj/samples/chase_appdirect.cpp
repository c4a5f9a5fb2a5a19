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

// Pointer chase over an App Direct NVM region: a sequential chase shows the
// 256B block pattern, a random chase over a large region shows only media
// reads. Prints the first latencies of each and what they imply.

#include <iostream>

#include "hmprobe/hmprobe.hpp"

int main() {
  using namespace hmprobe;

  SimConfig cfg;
  cfg.mode = MemoryModeKind::AppDirect;

  Simulator seq_sim(cfg);
  auto seq = traverse_read(seq_sim, build_chain(0, 4096, 64, ChainKind::Sequential, 1), 2).tail(0.5);
  std::cout << "sequential:";
  for (std::size_t i = 0; i < 12; ++i) std::cout << ' ' << seq.samples[i].latency_ns;
  auto g = infer_granularity(seq, cfg.line_size_bytes);
  std::cout << " ...\n  period " << g.period << ", access granularity " << g.bytes << " B\n";

  Simulator rnd_sim(cfg);
  auto rnd = traverse_read(rnd_sim, build_chain(0, 4096, 4096, ChainKind::RandomCycle, 1), 2).tail(0.5);
  std::cout << "random:    ";
  for (std::size_t i = 0; i < 12; ++i) std::cout << ' ' << rnd.samples[i].latency_ns;
  try {
    cluster_two_level(rnd);
    std::cout << " ...\n  two latency levels\n";
  } catch (const Unimodal& u) {
    std::cout << " ...\n  single level at " << u.mean_ns() << " ns\n";
  }
}
