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

// hmprobe command-line front end: run probes against the simulator, run the
// whole suite, analyze DDR command traces, and re-run inference over saved
// runs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hmprobe/hmprobe.hpp"

namespace {

using namespace hmprobe;
namespace fs = std::filesystem;
namespace pl = hmprobe::pipeline;

constexpr int kUsage = 1;
constexpr int kDataError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string file_error(const fs::path& file, const std::string& what) { return file.string() + ": " + what; }

SimConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(file_error(path, "cannot open config file"));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(file_error(path, e.what()));
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(file_error(path, e.what()));
  }
}

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("HMPROBE_OUT"); env && *env) return env;
  throw UsageError("--out is required when HMPROBE_OUT is not set");
}

std::string bytes_str(std::uint64_t b) {
  const char* units[] = {"B", "KiB", "MiB", "GiB", "TiB"};
  int u = 0;
  while (u < 4 && b >= 1024 && b % 1024 == 0) {
    b /= 1024;
    ++u;
  }
  return std::to_string(b) + " " + units[u];
}

std::string ns_str(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(v == static_cast<double>(static_cast<long long>(v)) ? 0 : 1) << v << " ns";
  return os.str();
}

std::string bits_str(const std::vector<unsigned>& bits, bool contiguous) {
  if (bits.empty()) return "none";
  if (contiguous) return std::to_string(bits.front()) + ".." + std::to_string(bits.back());
  std::string s;
  for (auto b : bits) s += (s.empty() ? "" : ",") + std::to_string(b);
  return s + " (not contiguous)";
}

void print_summary(std::ostream& os, const InferenceReport& r) {
  auto cited = [&](const std::string& field) {
    auto it = r.evidence.find(field);
    if (it == r.evidence.end()) return std::string();
    std::string s;
    for (const auto& id : it->second) s += (s.empty() ? "" : ", ") + id;
    return s;
  };
  auto row = [&](const std::string& name, const std::string& field, const std::optional<std::string>& value) {
    os << std::left << std::setw(24) << name << std::setw(22) << value.value_or("unpopulated") << cited(field)
       << '\n';
  };
  auto opt = [](const auto& o, auto fmt) -> std::optional<std::string> {
    if (!o) return std::nullopt;
    return fmt(*o);
  };
  os << std::left << std::setw(24) << "parameter" << std::setw(22) << "inferred" << "evidence\n";
  row("access granularity", "access_granularity_bytes", opt(r.access_granularity_bytes, bytes_str));
  row("buffer capacity", "buffer_capacity_bytes", opt(r.buffer_capacity_bytes, bytes_str));
  row("buffer associativity", "buffer_fully_associative",
      opt(r.buffer_fully_associative, [](bool f) { return std::string(f ? "fully associative" : "set associative"); }));
  row("buffer hit read", "buffer_hit_read_ns", opt(r.buffer_hit_read_ns, ns_str));
  row("NVM media read", "nvm_read_ns", opt(r.nvm_read_ns, ns_str));
  row("NVM media write", "nvm_write_ns", opt(r.nvm_write_ns, ns_str));
  row("DRAM read", "dram_read_ns", opt(r.dram_read_ns, ns_str));
  row("DRAM cache capacity", "cache_capacity_bytes", opt(r.cache_capacity_bytes, bytes_str));
  row("DRAM cache ways", "cache_assoc_ways", opt(r.cache_assoc_ways, [&](std::uint64_t w) {
        return (r.cache_assoc_at_least ? ">= " : "") + std::to_string(w) + (w == 1 ? " (direct-mapped)" : "");
      }));
  std::optional<std::string> bits;
  if (r.set_index_bits) bits = bits_str(*r.set_index_bits, r.set_index_contiguous.value_or(false));
  row("set index bits", "set_index_bits", bits);
  row("tag placement", "tag_placement",
      opt(r.tag_placement, [](TagPlacement t) { return std::string(to_string(t)); }));
  if (!r.assumptions.empty()) {
    os << "\nnotes:\n";
    for (const auto& a : r.assumptions) os << "  - " << a << '\n';
  }
}

template <class Writer>
void write_file(const fs::path& path, Writer&& w) {
  std::ostringstream os;
  w(os);
  pl::write_text(path, os.str());
}

// Hit latency of the DRAM cache: one line read twice.
Nanos measure_hit_latency(const SimConfig& cfg) {
  Simulator sim(pl::with_mode(cfg, MemoryModeKind::MemoryMode));
  sim.read(0, 0);
  return sim.read(0, 0).latency_ns;
}

int cmd_probe(const std::string& config_path, const std::string& probe, std::uint64_t seed,
              const std::string& out_flag) {
  if (!pl::is_probe_name(probe)) {
    std::string list;
    for (const auto& n : pl::probe_names()) list += "\n  " + n;
    throw UsageError("unknown probe \"" + probe + "\"; available probes:" + list);
  }
  auto dir = output_dir(out_flag);
  auto cfg = load_config(config_path);
  fs::create_directories(dir);
  std::vector<pl::StoredRun> runs;
  auto id = pl::run_id(probe, seed);

  auto store_series = [&](const LatencySeries& s, nlohmann::ordered_json params) {
    pl::StoredRun r{id, probe, probe + ".csv", std::move(params)};
    write_file(dir / r.file, [&](std::ostream& os) { write_csv(os, s); });
    runs.push_back(r);
  };
  auto store_sweep = [&](const std::string& run, const SweepResult& s, nlohmann::ordered_json params) {
    pl::StoredRun r{run, probe, run.substr(0, run.find('@')) + ".csv", std::move(params)};
    write_file(dir / r.file, [&](std::ostream& os) { write_csv(os, s); });
    runs.push_back(r);
  };

  if (probe == "sequential_read") {
    store_series(pl::sequential_read(cfg, seed), {{"lines", 4096}, {"rounds", 2}});
  } else if (probe == "random_read") {
    store_series(pl::random_read(cfg, seed), {{"slots", 4096}, {"stride", 4096}});
  } else if (probe == "write_saturation") {
    store_series(pl::write_saturation(cfg, seed), {{"saturator_streams", 3}, {"samples", 2000}});
  } else if (probe == "buffer_capacity") {
    std::vector<std::string> notes;
    auto granule = pl::granularity_or_default(
        Evidence<LatencySeries>{pl::run_id("sequential_read", seed), pl::sequential_read(cfg, seed)},
        cfg.line_size_bytes, &notes);
    for (const auto& n : notes) std::cerr << "note: " << n << '\n';
    for (auto stride : pl::buffer_strides(granule))
      store_sweep(pl::run_id("buffer_capacity_stride" + std::to_string(stride), seed),
                  pl::buffer_capacity(cfg, granule, stride),
                  {{"stride", stride}, {"granule", granule}, {"iters", 8}});
  } else if (probe == "footprint_sweep") {
    store_sweep(id, pl::footprint(cfg, seed), {{"samples_per_point", 4096}, {"max_slots", 4096}});
  } else if (probe == "associativity_scan") {
    store_sweep(id, pl::associativity(cfg), {{"max_k", 8}, {"iters", 64}});
  } else if (probe == "set_index_scan") {
    auto hit = static_cast<double>(measure_hit_latency(cfg));
    auto ways = pl::ways_or_default(pl::associativity(cfg), hit);
    store_sweep(id, pl::set_index(cfg, ways), {{"ways", ways}, {"iters", 64}});
  } else if (probe == "trace_workload") {
    auto wl = pl::trace_workload(cfg, seed);
    write_file(dir / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, wl.trace); });
    write_file(dir / "labels.csv", [&](std::ostream& os) { pl::write_labels_csv(os, wl.labels); });
    runs.push_back({id, probe, "trace.csv", {{"accesses", 10000}, {"window_ns", 1000}}});
    runs.push_back({pl::run_id("trace_labels", seed), "trace_labels", "labels.csv", nlohmann::ordered_json::object()});
  }

  std::vector<nlohmann::ordered_json> entries;
  for (const auto& r : runs) entries.push_back(pl::manifest_entry(r, cfg, seed));
  pl::update_manifest(dir, cfg, entries);
  for (const auto& r : runs) std::cout << "wrote " << (dir / r.file).string() << "  (" << r.id << ")\n";
  return 0;
}

int cmd_suite(const std::string& config_path, std::uint64_t seed, const std::string& out_flag) {
  auto dir = output_dir(out_flag);
  auto cfg = load_config(config_path);
  pl::SuiteOptions opt;
  opt.seed = seed;
  auto result = pl::run_suite(cfg, opt);
  pl::write_suite(dir, result);
  std::cout << "config " << config_path << " (hash " << config_hash(cfg) << "), seed " << seed << "\n\n";
  print_summary(std::cout, result.report);
  std::cout << "\nwrote " << (dir / "report.json").string() << " and " << result.runs.size()
            << " probe outputs to " << dir.string() << '\n';
  return 0;
}

int cmd_analyze_trace(const std::string& in, Nanos window_ns, const std::string& out_flag) {
  fs::path in_path(in);
  std::ifstream is(in_path);
  if (!is) throw Error(file_error(in_path, "cannot open trace file"));
  std::vector<DdrCommandRecord> records;
  try {
    records = parse_trace(is);
  } catch (const ParseError& e) {
    throw Error(file_error(in_path, e.what()));
  }
  auto cs = classify_accesses(records, window_ns);
  fs::path out;
  if (!out_flag.empty())
    out = out_flag;
  else if (const char* env = std::getenv("HMPROBE_OUT"); env && *env)
    out = fs::path(env) / "classifications.csv";
  else
    out = in_path.parent_path() / (in_path.stem().string() + ".classified.csv");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file(out, [&](std::ostream& os) { write_classifications_csv(os, cs); });

  std::size_t hit = 0, miss = 0, ambiguous = 0;
  for (const auto& c : cs) (c.verdict == Verdict::Hit ? hit : c.verdict == Verdict::Miss ? miss : ambiguous)++;
  std::cout << records.size() << " commands, " << cs.size() << " accesses: " << hit << " hit, " << miss
            << " miss, " << ambiguous << " ambiguous\n";
  std::cout << "wrote " << out.string() << '\n';
  try {
    std::cout << "tag placement: " << to_string(infer_tag_placement(cs)) << '\n';
  } catch (const TooFewAccesses& e) {
    throw TooFewAccesses(file_error(in_path, e.what()));
  }
  return 0;
}

int cmd_infer(const std::string& in, const std::string& out_flag) {
  auto report = build_report(pl::load_evidence(in));
  print_summary(std::cout, report);
  if (!out_flag.empty()) {
    pl::write_text(out_flag, pl::report_json_text(report));
    std::cout << "\nwrote " << out_flag << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hmprobe: probe and reverse-engineer a simulated DRAM + NVM hybrid memory"};
  app.require_subcommand(1);

  std::string config, probe, out, in;
  std::uint64_t seed = 1;
  Nanos window_ns = 1000;

  auto* probe_cmd = app.add_subcommand("probe", "run one probe and store its output");
  probe_cmd->add_option("--config", config, "simulator config JSON")->required();
  probe_cmd->add_option("--probe", probe, "probe name")->required();
  probe_cmd->add_option("--seed", seed, "probe seed")->capture_default_str();
  probe_cmd->add_option("--out", out, "output directory (default: $HMPROBE_OUT)");

  auto* suite_cmd = app.add_subcommand("suite", "run every probe, infer, and write report.json");
  suite_cmd->add_option("--config", config, "simulator config JSON")->required();
  suite_cmd->add_option("--seed", seed, "probe seed")->capture_default_str();
  suite_cmd->add_option("--out", out, "output directory (default: $HMPROBE_OUT)");

  auto* trace_cmd = app.add_subcommand("analyze-trace", "classify a DDR command trace");
  trace_cmd->add_option("--in", in, "trace CSV")->required();
  trace_cmd->add_option("--window-ns", window_ns, "grouping window")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  trace_cmd->add_option("--out", out, "classifications CSV");

  auto* infer_cmd = app.add_subcommand("infer", "re-run inference over a stored run directory");
  infer_cmd->add_option("--in", in, "run directory")->required();
  infer_cmd->add_option("--out", out, "write the report JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*probe_cmd) return cmd_probe(config, probe, seed, out);
    if (*suite_cmd) return cmd_suite(config, seed, out);
    if (*trace_cmd) return cmd_analyze_trace(in, window_ns, out);
    if (*infer_cmd) return cmd_infer(in, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}
