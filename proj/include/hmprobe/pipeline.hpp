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
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmprobe/chain.hpp"
#include "hmprobe/config.hpp"
#include "hmprobe/infer.hpp"
#include "hmprobe/probes.hpp"
#include "hmprobe/simulator.hpp"
#include "hmprobe/trace.hpp"

// The probe suite: which probe runs in which mode with which parameters,
// how results are stored on disk, and how a stored run is read back into
// inference evidence.
namespace hmprobe::pipeline {

inline const std::vector<std::string>& probe_names() {
  static const std::vector<std::string> names{
      "sequential_read", "random_read",        "buffer_capacity", "footprint_sweep",
      "associativity_scan", "set_index_scan", "write_saturation", "trace_workload"};
  return names;
}

inline bool is_probe_name(const std::string& n) {
  const auto& v = probe_names();
  return std::find(v.begin(), v.end(), n) != v.end();
}

inline SimConfig with_mode(SimConfig c, MemoryModeKind m) {
  c.mode = m;
  return c;
}

inline std::string run_id(const std::string& probe, std::uint64_t seed) {
  return probe + "@s" + std::to_string(seed);
}

// ---------------------------------------------------------------------------
// Individual probe runs. Each builds its own simulator in the mode the probe
// needs; the rest of the configuration is shared.

// Sequential 64B-stride chase over 4096 lines, two rounds; the second round
// is returned.
inline LatencySeries sequential_read(const SimConfig& cfg, std::uint64_t seed, std::uint64_t lines = 4096) {
  Simulator sim(with_mode(cfg, MemoryModeKind::AppDirect));
  auto chain = build_chain(0, lines, cfg.line_size_bytes, ChainKind::Sequential, seed, cfg.line_size_bytes);
  auto series = traverse_read(sim, chain, 2).tail(0.5);
  series.metadata.probe = "sequential_read";
  return series;
}

// Page-stride random chase, so no two chain slots share a buffer block.
inline LatencySeries random_read(const SimConfig& cfg, std::uint64_t seed, std::uint64_t slots = 4096,
                                 std::uint64_t stride = 4096) {
  Simulator sim(with_mode(cfg, MemoryModeKind::AppDirect));
  auto chain = build_chain(0, slots, std::max(stride, cfg.line_size_bytes), ChainKind::RandomCycle, seed,
                           cfg.line_size_bytes);
  auto series = traverse_read(sim, chain, 2).tail(0.5);
  series.metadata.probe = "random_read";
  return series;
}

inline std::vector<std::uint64_t> buffer_working_sets(std::uint64_t granule) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t w = std::max<std::uint64_t>(KiB, granule); w <= 256 * KiB; w *= 2) out.push_back(w);
  return out;
}

inline std::vector<std::uint64_t> buffer_strides(std::uint64_t granule) {
  return {granule, std::max<std::uint64_t>(4096, 4 * granule)};
}

inline SweepResult buffer_capacity(const SimConfig& cfg, std::uint64_t granule, std::uint64_t stride) {
  Simulator sim(with_mode(cfg, MemoryModeKind::AppDirect));
  BufferCapacityOptions opt;
  opt.working_sets = buffer_working_sets(granule);
  opt.stride = stride;
  opt.granule = granule;
  opt.iters = 8;
  return buffer_capacity_probe(sim, opt);
}

inline std::vector<std::uint64_t> footprints(const SimConfig& cfg) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t f = 16 * MiB; f <= cfg.nvm_capacity_bytes; f *= 2) out.push_back(f);
  return out;
}

inline SweepResult footprint(const SimConfig& cfg, std::uint64_t seed,
                             std::optional<std::vector<std::uint64_t>> sizes = std::nullopt) {
  Simulator sim(with_mode(cfg, MemoryModeKind::MemoryMode));
  return footprint_sweep(sim, sizes.value_or(footprints(cfg)), 4096, seed);
}

inline SweepResult associativity(const SimConfig& cfg, std::uint64_t max_k = 8) {
  Simulator sim(with_mode(cfg, MemoryModeKind::MemoryMode));
  AssociativityScanOptions opt;
  opt.max_k = max_k;
  opt.iters = 64;
  return associativity_scan(sim, opt);
}

inline SweepResult set_index(const SimConfig& cfg, std::uint64_t ways) {
  Simulator sim(with_mode(cfg, MemoryModeKind::MemoryMode));
  SetIndexScanOptions opt;
  opt.first_bit = 0;
  opt.last_bit = detail::address_bits(cfg.nvm_capacity_bytes) - 1;
  opt.iters = 64;
  opt.ways = ways;
  return set_index_scan(sim, opt);
}

inline LatencySeries write_saturation(const SimConfig& cfg, std::uint64_t seed, std::uint64_t samples = 2000) {
  Simulator sim(with_mode(cfg, MemoryModeKind::AppDirect));
  WriteSaturationOptions opt;
  opt.samples = samples;
  opt.seed = seed;
  return write_saturation_probe(sim, opt);
}

struct TraceWorkload {
  std::vector<DdrCommandRecord> trace;
  std::vector<LabeledAccess> labels;
};

/// MemoryMode reads separated by idle gaps of `gap_ns`, over a small pool of
/// addresses where pool entries pair up in the same cache set (they differ
/// only in the top address bit), so the trace mixes hits and misses.
inline TraceWorkload trace_workload(const SimConfig& cfg, std::uint64_t seed, std::uint64_t accesses = 10000,
                                    Nanos gap_ns = 1000) {
  Simulator sim(with_mode(cfg, MemoryModeKind::MemoryMode));
  const Address top = Address{1} << (detail::address_bits(cfg.nvm_capacity_bytes) - 1);
  std::vector<Address> pool;
  for (Address i = 0; i < 8; ++i) {
    Address a = i * 4096 + i * cfg.line_size_bytes;
    pool.push_back(a);
    if (i % 2 == 0) pool.push_back(a ^ top);
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (std::uint64_t i = 0; i < accesses; ++i) {
    sim.read(0, pool[pick(rng)]);
    sim.idle(0, gap_ns);
  }
  return {sim.trace(), sim.labels()};
}

// ---------------------------------------------------------------------------
// Whole suite.

struct SuiteOptions {
  std::uint64_t seed = 1;
  Nanos trace_window_ns = 1000;
  std::uint64_t trace_accesses = 10000;
  std::uint64_t write_samples = 2000;
};

struct StoredRun {
  std::string id;
  std::string probe;
  std::string file;
  nlohmann::ordered_json params;
};

struct SuiteResult {
  SimConfig config;
  SuiteOptions options;
  ProbeEvidence evidence;
  std::vector<StoredRun> runs;
  std::vector<std::pair<std::string, LatencySeries>> series;  // by file name
  std::vector<std::pair<std::string, SweepResult>> sweeps;
  TraceWorkload trace;
  std::vector<AccessClassification> classifications;
  InferenceReport report;
};

inline std::uint64_t granularity_or_default(const std::optional<Evidence<LatencySeries>>& seq,
                                            std::uint64_t line, std::vector<std::string>* notes) {
  if (seq) {
    try {
      return infer_granularity(seq->data, line).bytes;
    } catch (const Error& e) {
      if (notes) notes->push_back(std::string("granularity fallback to 256B: ") + e.what());
    }
  }
  return 256;
}

inline std::uint64_t ways_or_default(const SweepResult& scan, std::optional<double> hit_ns) {
  auto th = detail::scan_threshold(scan, hit_ns, {});
  if (!th) return 1;
  return infer_associativity(scan, *th).ways;
}

inline SuiteResult run_suite(const SimConfig& cfg, const SuiteOptions& opt = {}) {
  validate(cfg);
  SuiteResult out;
  out.config = cfg;
  out.options = opt;
  auto& ev = out.evidence;
  ev.line_size = cfg.line_size_bytes;
  const auto seed = opt.seed;
  auto add_series = [&](const std::string& probe, LatencySeries s, nlohmann::ordered_json params) {
    StoredRun r{run_id(probe, seed), probe, probe + ".csv", std::move(params)};
    out.series.emplace_back(r.file, s);
    out.runs.push_back(r);
    return Evidence<LatencySeries>{r.id, std::move(s)};
  };
  auto add_sweep = [&](const std::string& probe, const std::string& id, SweepResult s,
                       nlohmann::ordered_json params) {
    StoredRun r{id, probe, id.substr(0, id.find('@')) + ".csv", std::move(params)};
    out.sweeps.emplace_back(r.file, s);
    out.runs.push_back(r);
    return Evidence<SweepResult>{r.id, std::move(s)};
  };

  ev.sequential_read = add_series("sequential_read", sequential_read(cfg, seed), {{"lines", 4096}, {"rounds", 2}});
  ev.random_read = add_series("random_read", random_read(cfg, seed), {{"slots", 4096}, {"stride", 4096}});

  std::vector<std::string> notes;
  auto granule = granularity_or_default(ev.sequential_read, cfg.line_size_bytes, &notes);
  for (auto stride : buffer_strides(granule)) {
    std::string id = run_id("buffer_capacity_stride" + std::to_string(stride), seed);
    ev.buffer_sweeps.push_back(add_sweep("buffer_capacity", id, buffer_capacity(cfg, granule, stride),
                                         {{"stride", stride}, {"granule", granule}, {"iters", 8}}));
  }

  ev.footprint_sweep = add_sweep("footprint_sweep", run_id("footprint_sweep", seed), footprint(cfg, seed),
                                 {{"samples_per_point", 4096}, {"max_slots", 4096}});
  std::optional<double> hit_ns;
  if (!ev.footprint_sweep->data.points.empty())
    hit_ns = static_cast<double>(ev.footprint_sweep->data.points.front().median_ns);

  ev.associativity_scan = add_sweep("associativity_scan", run_id("associativity_scan", seed), associativity(cfg),
                                    {{"max_k", 8}, {"iters", 64}});
  auto ways = ways_or_default(ev.associativity_scan->data, hit_ns);
  ev.set_index_scan = add_sweep("set_index_scan", run_id("set_index_scan", seed), set_index(cfg, ways),
                                {{"ways", ways}, {"iters", 64}});

  ev.write_saturation = add_series("write_saturation", write_saturation(cfg, seed, opt.write_samples),
                                   {{"saturator_streams", 3}, {"samples", opt.write_samples}});

  out.trace = trace_workload(cfg, seed, opt.trace_accesses, opt.trace_window_ns);
  out.classifications = classify_accesses(out.trace.trace, opt.trace_window_ns);
  out.runs.push_back({run_id("trace_workload", seed), "trace_workload", "trace.csv",
                      {{"accesses", opt.trace_accesses}, {"window_ns", opt.trace_window_ns}}});
  try {
    ev.tag_placement = Evidence<TagPlacement>{out.runs.back().id, infer_tag_placement(out.classifications)};
  } catch (const Error& e) {
    notes.push_back(std::string("tag placement unavailable: ") + e.what());
  }

  out.report = build_report(ev);
  out.report.assumptions.insert(out.report.assumptions.end(), notes.begin(), notes.end());
  return out;
}

// ---------------------------------------------------------------------------
// Storage. A run directory holds one CSV per probe run plus manifest.json,
// which records the config, its hash, and each run's seed and parameters.

inline nlohmann::ordered_json manifest_entry(const StoredRun& r, const SimConfig& cfg, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["probe"] = r.probe;
  j["file"] = r.file;
  j["seed"] = seed;
  j["config_hash"] = config_hash(cfg);
  j["params"] = r.params;
  return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  os << text;
  if (!os) throw Error("failed writing " + p.string());
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Adds or replaces manifest entries by run id.
inline void update_manifest(const std::filesystem::path& dir, const SimConfig& cfg,
                            const std::vector<nlohmann::ordered_json>& entries) {
  auto path = dir / "manifest.json";
  nlohmann::ordered_json m;
  if (std::filesystem::exists(path)) {
    m = nlohmann::ordered_json::parse(read_text(path));
    if (m.value("config_hash", std::string()) != config_hash(cfg))
      throw Error(path.string() + " belongs to a different config; use a fresh output directory");
  } else {
    m["config"] = to_json(cfg);
    m["config_hash"] = config_hash(cfg);
    m["runs"] = nlohmann::ordered_json::array();
  }
  for (const auto& e : entries) {
    auto& runs = m["runs"];
    auto it = std::find_if(runs.begin(), runs.end(), [&](const auto& r) { return r["id"] == e["id"]; });
    if (it != runs.end())
      *it = e;
    else
      runs.push_back(e);
  }
  write_text(path, m.dump(2) + "\n");
}

inline void write_labels_csv(std::ostream& os, const std::vector<LabeledAccess>& labels) {
  os << "access_index,labels\n";
  for (const auto& l : labels) os << l.access_index << ',' << l.labels.str() << '\n';
}

inline std::string report_json_text(const InferenceReport& r) { return to_json(r).dump(2) + "\n"; }

inline void write_suite(const std::filesystem::path& dir, const SuiteResult& s) {
  std::filesystem::create_directories(dir);
  for (const auto& [file, series] : s.series) {
    std::ostringstream os;
    write_csv(os, series);
    write_text(dir / file, os.str());
  }
  for (const auto& [file, sweep] : s.sweeps) {
    std::ostringstream os;
    write_csv(os, sweep);
    write_text(dir / file, os.str());
  }
  {
    std::ostringstream os;
    write_trace_csv(os, s.trace.trace);
    write_text(dir / "trace.csv", os.str());
  }
  {
    std::ostringstream os;
    write_classifications_csv(os, s.classifications);
    write_text(dir / "classifications.csv", os.str());
  }
  {
    std::ostringstream os;
    write_labels_csv(os, s.trace.labels);
    write_text(dir / "labels.csv", os.str());
  }
  std::vector<nlohmann::ordered_json> entries;
  for (const auto& r : s.runs) entries.push_back(manifest_entry(r, s.config, s.options.seed));
  const auto seed = s.options.seed;
  const auto none = nlohmann::ordered_json::object();
  entries.push_back(manifest_entry({run_id("trace_labels", seed), "trace_labels", "labels.csv", none}, s.config, seed));
  entries.push_back(manifest_entry({run_id("trace_classifications", seed), "trace_classifications",
                                    "classifications.csv", {{"window_ns", s.options.trace_window_ns}}},
                                   s.config, seed));
  entries.push_back(manifest_entry({run_id("report", seed), "report", "report.json", none}, s.config, seed));
  update_manifest(dir, s.config, entries);
  write_text(dir / "report.json", report_json_text(s.report));
}

/// Rebuilds inference evidence from a run directory's manifest and files.
inline ProbeEvidence load_evidence(const std::filesystem::path& dir) {
  auto mpath = dir / "manifest.json";
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text(mpath));
  } catch (const nlohmann::json::exception& e) {
    throw Error(mpath.string() + ": " + e.what());
  }
  SimConfig cfg = config_from_json(m.at("config"));
  ProbeEvidence ev;
  ev.line_size = cfg.line_size_bytes;
  for (const auto& r : m.at("runs")) {
    std::string probe = r.at("probe"), id = r.at("id"), file = r.at("file");
    auto path = dir / file;
    auto open = [&]() {
      std::ifstream is(path);
      if (!is) throw Error("cannot read " + path.string());
      return is;
    };
    auto with_file = [&](auto&& fn) {
      try {
        auto is = open();
        return fn(is);
      } catch (const ParseError& e) {
        throw Error(path.string() + ": " + e.what());
      }
    };
    if (probe == "sequential_read") {
      ev.sequential_read = Evidence<LatencySeries>{id, with_file([](auto& is) { return read_latency_series_csv(is); })};
    } else if (probe == "random_read") {
      ev.random_read = Evidence<LatencySeries>{id, with_file([](auto& is) { return read_latency_series_csv(is); })};
    } else if (probe == "write_saturation") {
      ev.write_saturation = Evidence<LatencySeries>{id, with_file([](auto& is) { return read_latency_series_csv(is); })};
    } else if (probe == "buffer_capacity") {
      ev.buffer_sweeps.push_back({id, with_file([](auto& is) { return read_sweep_csv(is); })});
    } else if (probe == "footprint_sweep") {
      ev.footprint_sweep = Evidence<SweepResult>{id, with_file([](auto& is) { return read_sweep_csv(is); })};
    } else if (probe == "associativity_scan") {
      ev.associativity_scan = Evidence<SweepResult>{id, with_file([](auto& is) { return read_sweep_csv(is); })};
    } else if (probe == "set_index_scan") {
      ev.set_index_scan = Evidence<SweepResult>{id, with_file([](auto& is) { return read_sweep_csv(is); })};
    } else if (probe == "trace_workload") {
      Nanos window = r.at("params").value("window_ns", Nanos{1000});
      auto trace = with_file([](auto& is) { return parse_trace(is); });
      try {
        ev.tag_placement = Evidence<TagPlacement>{id, infer_tag_placement(classify_accesses(trace, window))};
      } catch (const TooFewAccesses&) {
      }
    }
  }
  return ev;
}

}  // namespace hmprobe::pipeline
