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

#include <cmath>
#include <random>

#include "hmprobe/infer.hpp"
#include "hmprobe/pipeline.hpp"
#include "reference_models.hpp"

namespace hmprobe {
namespace {

LatencySeries series_of(const std::vector<Nanos>& v) {
  LatencySeries s;
  for (std::size_t i = 0; i < v.size(); ++i) s.add(i * 64, v[i], 0);
  return s;
}

std::vector<Nanos> repeat(std::vector<Nanos> unit, int times) {
  std::vector<Nanos> out;
  for (int i = 0; i < times; ++i) out.insert(out.end(), unit.begin(), unit.end());
  return out;
}

SweepResult sweep(SweepAxis axis, std::vector<std::pair<std::uint64_t, Nanos>> pts) {
  SweepResult r;
  r.x_meaning = axis;
  for (auto [x, m] : pts) r.points.push_back({x, m, m, m});
  return r;
}

TEST(ClusterTwoLevel, ThreeLowOneHigh) {
  auto s = cluster_two_level(series_of(repeat({150, 150, 150, 350}, 8)));
  EXPECT_DOUBLE_EQ(s.low_mean_ns, 150);
  EXPECT_DOUBLE_EQ(s.high_mean_ns, 350);
  EXPECT_DOUBLE_EQ(s.high_fraction, 0.25);
  EXPECT_GT(s.threshold_ns, 150);
  EXPECT_LT(s.threshold_ns, 350);
}

TEST(ClusterTwoLevel, SingleLevelIsUnimodal) {
  try {
    cluster_two_level(series_of(std::vector<Nanos>(64, 350)));
    FAIL();
  } catch (const Unimodal& u) {
    EXPECT_DOUBLE_EQ(u.mean_ns(), 350);
  }
}

TEST(ClusterTwoLevel, AlternatingExtremes) {
  auto s = cluster_two_level(series_of(repeat({1, 1000}, 8)));
  EXPECT_DOUBLE_EQ(s.low_mean_ns, 1);
  EXPECT_DOUBLE_EQ(s.high_mean_ns, 1000);
  EXPECT_DOUBLE_EQ(s.high_fraction, 0.5);
}

TEST(ClusterTwoLevel, TooFewSamples) {
  EXPECT_THROW(cluster_two_level(series_of({1, 2, 3})), TooFewSamples);
}

TEST(ClusterTwoLevelProperty, ScaleEquivariant) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Nanos> v;
    std::size_t n = 8 + rng() % 200;
    for (std::size_t i = 0; i < n; ++i) v.push_back(rng() % 2 ? 100 + static_cast<Nanos>(rng() % 20)
                                                              : 400 + static_cast<Nanos>(rng() % 50));
    if (std::all_of(v.begin(), v.end(), [&](Nanos x) { return (x >= 400) == (v[0] >= 400); })) continue;
    Nanos c = 1 + static_cast<Nanos>(rng() % 16);
    auto scaled = v;
    for (auto& x : scaled) x *= c;
    auto a = cluster_two_level(std::span<const Nanos>(v));
    auto b = cluster_two_level(std::span<const Nanos>(scaled));
    double cd = static_cast<double>(c);
    EXPECT_NEAR(b.low_mean_ns, a.low_mean_ns * cd, 1e-6 * cd * a.low_mean_ns);
    EXPECT_NEAR(b.high_mean_ns, a.high_mean_ns * cd, 1e-6 * cd * a.high_mean_ns);
    EXPECT_NEAR(b.threshold_ns, a.threshold_ns * cd, 1e-6 * cd * a.threshold_ns);
    EXPECT_EQ(b.high_fraction, a.high_fraction);
  }
}

std::vector<bool> bits_of(std::initializer_list<int> unit, int times) {
  std::vector<bool> out;
  for (int i = 0; i < times; ++i)
    for (int b : unit) out.push_back(b != 0);
  return out;
}

TEST(DetectPeriod, Examples) {
  EXPECT_EQ(detect_period(bits_of({0, 0, 0, 1}, 8)), 4u);
  EXPECT_EQ(detect_period(bits_of({0, 1}, 8)), 2u);
  EXPECT_EQ(detect_period(bits_of({1, 1, 0, 1, 0}, 6)), 5u);
  EXPECT_THROW(detect_period(bits_of({1}, 16)), NoPeriod);
  EXPECT_THROW(detect_period(bits_of({0, 0, 0, 1}, 2)), NoPeriod);
}

TEST(DetectPeriodOracle, ExhaustiveAgainstBruteForce) {
  // Default: at least four repeats. Relaxed: two repeats, which covers every
  // string whose minimal period fits twice.
  InferenceConstants relaxed;
  relaxed.min_period_repeats = 2;
  std::size_t checked_default = 0, checked_relaxed = 0;
  for (std::size_t n = 4; n <= 16; ++n) {
    for (std::uint32_t v = 1; v + 1 < (1u << n); ++v) {
      std::vector<bool> s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = (v >> i) & 1;
      std::size_t p = testing::brute_force_min_period(s);
      if (p < 2 || 2 * p > n) {
        EXPECT_THROW(detect_period(s, relaxed), NoPeriod) << "n " << n << " v " << v;
        continue;
      }
      ASSERT_EQ(detect_period(s, relaxed), p) << "n " << n << " v " << v;
      ++checked_relaxed;
      if (4 * p <= n) {
        ASSERT_EQ(detect_period(s), p) << "n " << n << " v " << v;
        ++checked_default;
      } else {
        EXPECT_THROW(detect_period(s), NoPeriod) << "n " << n << " v " << v;
      }
    }
  }
  EXPECT_EQ(checked_default, 60u);
  EXPECT_GT(checked_relaxed, 1000u);
}

// Pearson lag correlation written out independently of the library.
double ref_autocorr(const std::vector<bool>& b, std::size_t lag) {
  std::size_t m = b.size() - lag;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < m; ++i) mx += b[i], my += b[i + lag];
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double dx = b[i] - mx, dy = b[i + lag] - my;
    cov += dx * dy, vx += dx * dx, vy += dy * dy;
  }
  return cov / std::sqrt(vx * vy);
}

TEST(DetectPeriod, SeededNoiseHasNoPeriod) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<bool> b(4096);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng() & 1;
    double best = 0;
    for (std::size_t lag = 2; lag <= 128; ++lag) best = std::max(best, ref_autocorr(b, lag));
    ASSERT_LT(best, 0.9);
    EXPECT_THROW(detect_period(b), NoPeriod) << seed;
  }
}

TEST(InferGranularity, FromSimulatorSequentialReads) {
  for (auto [block, period] : {std::pair{128u, 2u}, {256u, 4u}, {512u, 8u}}) {
    SimConfig c;
    c.nvm_block_bytes = block;
    auto g = infer_granularity(pipeline::sequential_read(c, 1), 64);
    EXPECT_EQ(g.bytes, block);
    EXPECT_EQ(g.period, period);
    EXPECT_NEAR(g.stats.high_fraction, 1.0 / period, 1e-12);
  }
}

TEST(InferGranularity, AllHighIsUnimodal) {
  EXPECT_THROW(infer_granularity(series_of(std::vector<Nanos>(64, 350)), 64), Unimodal);
}

TEST(InferKnee, Examples) {
  EXPECT_EQ(infer_knee(sweep(SweepAxis::FootprintBytes,
                             {{1 * GiB, 90}, {8 * GiB, 90}, {16 * GiB, 90}, {32 * GiB, 200}})),
            16 * GiB);
  EXPECT_EQ(infer_knee(sweep(SweepAxis::WorkingSetBytes, {{8 * KiB, 150}, {16 * KiB, 150}, {32 * KiB, 350}})),
            16 * KiB);
  EXPECT_THROW(infer_knee(sweep(SweepAxis::FootprintBytes, {{1, 90}, {2, 90}, {3, 90}})), NoKnee);
  EXPECT_THROW(infer_knee(sweep(SweepAxis::FootprintBytes, {{1, 90}, {2, 200}})), PreconditionError);
}

TEST(InferSetIndexBits, DefaultScan) {
  Simulator sim{SimConfig{}};
  auto scan = set_index_scan(sim, {});
  auto medians = scan.medians();
  auto stats = cluster_two_level(std::span<const Nanos>(medians));
  auto r = infer_set_index_bits(scan, stats, 64);
  ASSERT_EQ(r.bits.size(), 28u);
  EXPECT_EQ(r.bits.front(), 6u);
  EXPECT_EQ(r.bits.back(), 33u);
  EXPECT_TRUE(r.contiguous);
}

TEST(InferSetIndexBits, NarrowIndex) {
  SimConfig c;
  c.set_index_hi_bit = 20;
  c.dram_capacity_bytes = (std::uint64_t{1} << 15) * 64;
  Simulator sim(c);
  SetIndexScanOptions o;
  o.last_bit = 36;
  auto scan = set_index_scan(sim, o);
  auto medians = scan.medians();
  auto r = infer_set_index_bits(scan, cluster_two_level(std::span<const Nanos>(medians)), 64);
  std::vector<unsigned> expected;
  for (unsigned b = 6; b <= 20; ++b) expected.push_back(b);
  EXPECT_EQ(r.bits, expected);
  EXPECT_TRUE(r.contiguous);
}

TEST(InferSetIndexBits, AllHighGivesEmpty) {
  auto scan = sweep(SweepAxis::BitPosition, {{6, 300}, {7, 300}, {8, 300}});
  TwoLevelStats stats{90, 300, 195, 1};
  auto r = infer_set_index_bits(scan, stats, 64);
  EXPECT_TRUE(r.bits.empty());
  EXPECT_FALSE(r.contiguous);
}

TEST(InferAssociativity, Examples) {
  auto one = infer_associativity(sweep(SweepAxis::GroupSize, {{2, 240}, {3, 240}, {4, 240}}), 135);
  EXPECT_EQ(one.ways, 1u);
  EXPECT_FALSE(one.at_least);
  auto two = infer_associativity(sweep(SweepAxis::GroupSize, {{2, 90}, {3, 240}, {4, 240}}), 135);
  EXPECT_EQ(two.ways, 2u);
  std::vector<std::pair<std::uint64_t, Nanos>> low;
  for (std::uint64_t k = 2; k <= 8; ++k) low.push_back({k, 90});
  auto censored = infer_associativity(sweep(SweepAxis::GroupSize, low), 135);
  EXPECT_EQ(censored.ways, 8u);
  EXPECT_TRUE(censored.at_least);
}

TEST(EstimateWriteLatency, DefaultSimulator) {
  auto e = estimate_write_latency(pipeline::write_saturation(SimConfig{}, 1, 2000));
  EXPECT_NEAR(e.span_ns, 1200, 120);
  EXPECT_EQ(e.raw_min_ns, 170);
  EXPECT_LE(e.raw_max_ns, 1370);
  EXPECT_TRUE(e.saturated);
}

TEST(EstimateWriteLatency, UnsaturatedQueue) {
  SimConfig c;
  c.wpq_depth = std::uint64_t{1} << 24;
  auto e = estimate_write_latency(pipeline::write_saturation(c, 1, 1000));
  EXPECT_EQ(e.span_ns, 0);
  EXPECT_EQ(e.p1_ns, 170);
  EXPECT_FALSE(e.saturated);
}

TEST(EstimateWriteLatency, TooFewSamples) {
  EXPECT_THROW(estimate_write_latency(series_of(std::vector<Nanos>(10, 170))), TooFewSamples);
}

TEST(BuildReport, ReadOnlyEvidenceLeavesWriteFieldsNull) {
  ProbeEvidence ev;
  ev.sequential_read = Evidence<LatencySeries>{"sequential_read@s1", pipeline::sequential_read(SimConfig{}, 1)};
  auto rep = build_report(ev);
  EXPECT_EQ(rep.access_granularity_bytes, 256u);
  EXPECT_FALSE(rep.nvm_write_ns.has_value());
  auto j = to_json(rep);
  EXPECT_TRUE(j["nvm_write_ns"].is_null());
  auto unpop = j["unpopulated"].get<std::vector<std::string>>();
  EXPECT_NE(std::find(unpop.begin(), unpop.end(), "nvm_write_ns"), unpop.end());
  EXPECT_EQ(j["evidence"]["access_granularity_bytes"][0], "sequential_read@s1");
}

TEST(BuildReport, ConsistentGeometryHasNoContradiction) {
  SimConfig c;
  ProbeEvidence ev;
  ev.footprint_sweep = Evidence<SweepResult>{"fp", pipeline::footprint(c, 1)};
  ev.associativity_scan = Evidence<SweepResult>{"as", pipeline::associativity(c)};
  ev.set_index_scan = Evidence<SweepResult>{"si", pipeline::set_index(c, 1)};
  auto rep = build_report(ev);
  EXPECT_EQ(rep.cache_capacity_bytes, 16 * GiB);
  EXPECT_EQ(rep.cache_assoc_ways, 1u);
  ASSERT_TRUE(rep.set_index_bits.has_value());
  EXPECT_EQ(rep.set_index_bits->size(), 28u);
  for (const auto& a : rep.assumptions) EXPECT_EQ(a.find("contradiction"), std::string::npos) << a;
}

TEST(BuildReport, InconsistentGeometryIsNoted) {
  SimConfig c;
  ProbeEvidence ev;
  ev.footprint_sweep = Evidence<SweepResult>{"fp", pipeline::footprint(c, 1)};
  ev.associativity_scan = Evidence<SweepResult>{"as", pipeline::associativity(c)};
  auto scan = pipeline::set_index(c, 1);
  scan.points.erase(scan.points.begin() + 20, scan.points.begin() + 25);
  ev.set_index_scan = Evidence<SweepResult>{"si", scan};
  auto rep = build_report(ev);
  bool noted = false;
  for (const auto& a : rep.assumptions) noted = noted || a.find("contradiction") != std::string::npos;
  EXPECT_TRUE(noted);
}

TEST(BuildReport, EveryPopulatedFieldCitesEvidence) {
  auto suite = pipeline::run_suite(SimConfig{});
  auto j = to_json(suite.report);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "assumptions" || it.key() == "evidence" || it.key() == "unpopulated") continue;
    if (it.key() == "cache_assoc_at_least") continue;
    if (!it.value().is_null()) {
      EXPECT_TRUE(j["evidence"].contains(it.key())) << it.key();
    }
  }
}

}  // namespace
}  // namespace hmprobe
