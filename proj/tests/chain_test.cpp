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

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "hmprobe/chain.hpp"
#include "hmprobe/simulator.hpp"
#include "reference_models.hpp"

namespace hmprobe {
namespace {

TEST(Chain, SequentialAddresses) {
  auto c = build_chain(0, 3, 64, ChainKind::Sequential, 0);
  EXPECT_EQ(c.addresses, (std::vector<Address>{0, 64, 128}));
}

TEST(Chain, RandomCycleOfFourIsOneCycle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto next = sattolo_cycle(4, seed);
    std::uint32_t slot = 0;
    int hops = 0;
    do {
      slot = next[slot];
      ++hops;
    } while (slot != 0 && hops < 10);
    EXPECT_EQ(hops, 4) << seed;
  }
}

TEST(Chain, Preconditions) {
  EXPECT_THROW(build_chain(0, 1, 64, ChainKind::Sequential, 0), CountTooSmall);
  EXPECT_THROW(build_chain(0, 4, 32, ChainKind::Sequential, 0), BadStride);
  EXPECT_THROW(build_chain(0, 4, 96, ChainKind::RandomCycle, 0), BadStride);
  EXPECT_THROW(build_chain(8, 4, 64, ChainKind::Sequential, 0), BadStride);
}

TEST(ChainOracle, SattoloSingleCycleExhaustive) {
  for (std::uint32_t count = 2; count <= 10; ++count)
    for (std::uint64_t seed = 0; seed < 2000; ++seed)
      ASSERT_EQ(testing::count_cycles(sattolo_cycle(count, seed)), 1u) << count << " " << seed;
}

TEST(ChainOracle, SattoloReachesEveryCycleOfSmallSizes) {
  // (n-1)! single cycles exist; all should appear for n = 4 (6 cycles).
  std::set<std::vector<std::uint32_t>> seen;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) seen.insert(sattolo_cycle(4, seed));
  EXPECT_EQ(seen.size(), 6u);
}

TEST(ChainProperty, RandomChainIsAPermutationOfSlots) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto c = build_chain(4096, 257, 128, ChainKind::RandomCycle, seed);
    std::set<Address> uniq(c.addresses.begin(), c.addresses.end());
    ASSERT_EQ(uniq.size(), 257u);
    for (Address a : c.addresses) {
      EXPECT_EQ(a % 64, 0u);
      EXPECT_GE(a, 4096u);
      EXPECT_LT(a, 4096u + 257 * 128);
    }
    EXPECT_EQ(c.addresses.front(), 4096u);
  }
}

TEST(Chain, TraverseCountsAndOrder) {
  Simulator sim{SimConfig{}};
  auto c = build_chain(0, 4, 64, ChainKind::RandomCycle, 9);
  auto s = traverse_read(sim, c, 2);
  ASSERT_EQ(s.size(), 8u);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s.samples[i].index, i);
    EXPECT_EQ(s.samples[i].address, c.addresses[i % 4]);
    EXPECT_GT(s.samples[i].latency_ns, 0);
  }
}

TEST(ChainProperty, LatencySumEqualsStreamClockAdvance) {
  SimConfig cfg;
  cfg.mode = MemoryModeKind::AppDirect;
  cfg.jitter_ns = 7;
  Simulator sim(cfg);
  sim.idle(2, 1234);
  Nanos before = sim.stream_time(2);
  auto c = build_chain(0, 1000, 192, ChainKind::RandomCycle, 1);
  auto s = traverse_read(sim, c, 3, 2);
  Nanos sum = 0;
  for (auto l : s.latencies()) sum += l;
  EXPECT_EQ(sim.stream_time(2) - before, sum);
}

TEST(Chain, SequentialAppDirectPattern) {
  SimConfig cfg;
  cfg.mode = MemoryModeKind::AppDirect;
  // 1 KiB: the cold pass shows one media read per 256B block, then the
  // whole chain is buffer-resident.
  Simulator small(cfg);
  auto lat = traverse_read(small, build_chain(0, 16, 64, ChainKind::Sequential, 0), 2).latencies();
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(lat[i], i % 4 == 0 ? 350 : 150) << i;
  for (std::size_t i = 16; i < 32; ++i) EXPECT_EQ(lat[i], 150) << i;
  // Far beyond the buffer the pattern repeats in every round.
  Simulator big(cfg);
  auto steady = traverse_read(big, build_chain(0, 4096, 64, ChainKind::Sequential, 0), 2).tail(0.5).latencies();
  for (std::size_t i = 0; i < steady.size(); ++i) ASSERT_EQ(steady[i], i % 4 == 0 ? 350 : 150) << i;
}

TEST(Chain, RandomChainBeyondBufferAlwaysMisses) {
  SimConfig cfg;
  cfg.mode = MemoryModeKind::AppDirect;
  Simulator sim(cfg);
  auto c = build_chain(0, 4096, 256, ChainKind::RandomCycle, 4);
  for (auto l : traverse_read(sim, c, 2).latencies()) EXPECT_EQ(l, 350);
}

TEST(Chain, TailReindexes) {
  LatencySeries s;
  for (int i = 0; i < 10; ++i) s.add(static_cast<Address>(i) * 64, 100 + i, 0);
  auto t = s.tail(0.5);
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t.samples[0].index, 0u);
  EXPECT_EQ(t.samples[0].latency_ns, 105);
}

TEST(Chain, CsvRoundTrip) {
  Simulator sim{SimConfig{}};
  auto s = traverse_read(sim, build_chain(64, 20, 4096, ChainKind::RandomCycle, 2), 2, 3);
  std::stringstream ss;
  write_csv(ss, s);
  EXPECT_EQ(ss.str().find("# backend: hybridmem_sim(MemoryMode)"), 0u);
  EXPECT_NE(ss.str().find("index,address_hex,latency_ns,stream_id\n"), std::string::npos);
  EXPECT_EQ(read_latency_series_csv(ss), s);
}

TEST(Chain, CsvErrorsCarryLineNumbers) {
  std::stringstream ss("index,address_hex,latency_ns,stream_id\n0,0x0,90,0\n1,zz,90,0\n");
  try {
    read_latency_series_csv(ss);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

}  // namespace
}  // namespace hmprobe
