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

#include <filesystem>
#include <random>

#include "hmprobe/pipeline.hpp"

namespace hmprobe {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hmprobe_pipeline_test_" + name);
  fs::remove_all(p);
  return p;
}

struct RandomCase {
  SimConfig cfg;
  unsigned width;
};

RandomCase random_config(std::mt19937_64& rng) {
  RandomCase rc;
  auto& c = rc.cfg;
  c.nvm_block_bytes = std::uint64_t{128} << (rng() % 3);
  c.xpbuffer_capacity_bytes = (8 * KiB) << (rng() % 3);
  rc.width = 20 + static_cast<unsigned>(rng() % 9);
  c.cache_assoc = std::uint64_t{1} << (rng() % 3);
  c.set_index_lo_bit = 6;
  c.set_index_hi_bit = 6 + rc.width - 1;
  c.dram_capacity_bytes = (std::uint64_t{1} << rc.width) * 64 * c.cache_assoc;
  c.nvm_media_write_ns = 600 + static_cast<Nanos>(rng() % 1801);
  c.seed = rng();
  validate(c);
  return rc;
}

void expect_recovers(const InferenceReport& r, const SimConfig& c, unsigned width) {
  EXPECT_EQ(r.access_granularity_bytes, c.nvm_block_bytes);
  EXPECT_EQ(r.buffer_capacity_bytes, c.xpbuffer_capacity_bytes);
  EXPECT_EQ(r.buffer_fully_associative, true);
  EXPECT_EQ(r.cache_capacity_bytes, c.dram_capacity_bytes);
  EXPECT_EQ(r.cache_assoc_ways, c.cache_assoc);
  EXPECT_FALSE(r.cache_assoc_at_least);
  std::vector<unsigned> bits;
  for (unsigned b = c.set_index_lo_bit; b < c.set_index_lo_bit + width; ++b) bits.push_back(b);
  EXPECT_EQ(r.set_index_bits, bits);
  EXPECT_EQ(r.set_index_contiguous, true);
  EXPECT_EQ(r.tag_placement, TagPlacement::TagInLine);
  auto within = [](std::optional<double> got, double want) {
    return got && std::abs(*got - want) <= 0.1 * want;
  };
  EXPECT_TRUE(within(r.dram_read_ns, static_cast<double>(c.dram_read_ns)));
  EXPECT_TRUE(within(r.buffer_hit_read_ns, static_cast<double>(c.nvm_buffer_hit_read_ns)));
  EXPECT_TRUE(within(r.nvm_read_ns, static_cast<double>(c.nvm_media_read_ns)));
  EXPECT_TRUE(within(r.nvm_write_ns, static_cast<double>(c.nvm_media_write_ns)))
      << (r.nvm_write_ns ? *r.nvm_write_ns : -1) << " vs " << c.nvm_media_write_ns;
  for (const auto& a : r.assumptions) EXPECT_EQ(a.find("contradiction"), std::string::npos) << a;
}

TEST(Suite, DefaultConfigRecovered) {
  auto s = pipeline::run_suite(SimConfig{});
  expect_recovers(s.report, SimConfig{}, 28);
}

TEST(SuiteProperty, RoundTripOverRandomConfigs) {
  std::mt19937_64 rng(20260);
  for (int trial = 0; trial < 24; ++trial) {
    auto rc = random_config(rng);
    SCOPED_TRACE(to_json(rc.cfg).dump());
    pipeline::SuiteOptions o;
    o.seed = 1 + static_cast<std::uint64_t>(trial);
    expect_recovers(pipeline::run_suite(rc.cfg, o).report, rc.cfg, rc.width);
  }
}

TEST(Suite, StoredRunReinfersSameReport) {
  auto dir = scratch("reinfer");
  auto s = pipeline::run_suite(SimConfig{});
  pipeline::write_suite(dir, s);
  auto again = build_report(pipeline::load_evidence(dir));
  again.assumptions = s.report.assumptions;
  EXPECT_EQ(pipeline::report_json_text(again), pipeline::report_json_text(s.report));
  for (const char* f : {"manifest.json", "report.json", "trace.csv", "labels.csv", "classifications.csv",
                        "sequential_read.csv", "random_read.csv", "buffer_capacity_stride256.csv",
                        "buffer_capacity_stride4096.csv", "footprint_sweep.csv", "associativity_scan.csv",
                        "set_index_scan.csv", "write_saturation.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  fs::remove_all(dir);
}

TEST(Suite, ManifestCoversEveryOutput) {
  auto dir = scratch("manifest");
  pipeline::write_suite(dir, pipeline::run_suite(SimConfig{}));
  auto m = nlohmann::json::parse(pipeline::read_text(dir / "manifest.json"));
  std::set<std::string> files;
  for (const auto& r : m["runs"]) {
    files.insert(r["file"].get<std::string>());
    EXPECT_EQ(r["config_hash"], config_hash(SimConfig{}));
    EXPECT_TRUE(r.contains("seed"));
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    auto name = e.path().filename().string();
    if (name == "manifest.json") continue;
    EXPECT_TRUE(files.count(name)) << name;
  }
  fs::remove_all(dir);
}

TEST(Suite, RefusesDirectoryOfAnotherConfig) {
  auto dir = scratch("mixed");
  pipeline::write_suite(dir, pipeline::run_suite(SimConfig{}));
  SimConfig other;
  other.nvm_media_write_ns = 900;
  EXPECT_THROW(pipeline::write_suite(dir, pipeline::run_suite(other)), Error);
  fs::remove_all(dir);
}

TEST(Suite, ByteIdenticalAcrossRuns) {
  auto a = scratch("det_a"), b = scratch("det_b");
  pipeline::write_suite(a, pipeline::run_suite(SimConfig{}));
  pipeline::write_suite(b, pipeline::run_suite(SimConfig{}));
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    auto name = e.path().filename();
    EXPECT_EQ(pipeline::read_text(a / name), pipeline::read_text(b / name)) << name;
    ++compared;
  }
  EXPECT_GE(compared, 13u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Suite, ProbeCatalogue) {
  EXPECT_TRUE(pipeline::is_probe_name("set_index_scan"));
  EXPECT_FALSE(pipeline::is_probe_name("nosuch"));
  EXPECT_EQ(pipeline::probe_names().size(), 8u);
  EXPECT_EQ(pipeline::run_id("random_read", 7), "random_read@s7");
}

}  // namespace
}  // namespace hmprobe
