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
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmprobe/chain.hpp"
#include "hmprobe/errors.hpp"
#include "hmprobe/probes.hpp"
#include "hmprobe/stats.hpp"
#include "hmprobe/types.hpp"

namespace hmprobe {

// Fixed decision constants. The defaults are what the toolkit ships with.
struct InferenceConstants {
  double knee_factor = 1.5;
  double period_correlation_bar = 0.9;
  double unimodal_separation = 0.1;
  double granularity_fraction_tolerance = 0.05;
  std::size_t max_period_lag = 128;
  std::size_t min_period_repeats = 4;
  std::size_t min_write_samples = 1000;
};

struct TwoLevelStats {
  double low_mean_ns = 0;
  double high_mean_ns = 0;
  double threshold_ns = 0;
  double high_fraction = 0;
};

/// 1-D two-means clustering seeded at (min, max) and iterated to a fixed
/// point. Throws Unimodal (carrying the overall mean) when the final means
/// are closer than 10% of their midpoint.
inline TwoLevelStats cluster_two_level(std::span<const Nanos> samples, const InferenceConstants& k = {}) {
  if (samples.size() < 8)
    throw TooFewSamples("two-level clustering needs >= 8 samples, got " + std::to_string(samples.size()));
  auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  double lo = static_cast<double>(*mn), hi = static_cast<double>(*mx);
  for (int iter = 0; iter < 1000; ++iter) {
    double mid = (lo + hi) / 2;
    double sum_lo = 0, sum_hi = 0;
    std::size_t n_lo = 0, n_hi = 0;
    for (Nanos x : samples) {
      if (static_cast<double>(x) > mid) {
        sum_hi += static_cast<double>(x);
        ++n_hi;
      } else {
        sum_lo += static_cast<double>(x);
        ++n_lo;
      }
    }
    if (n_hi == 0 || n_lo == 0) break;
    double new_lo = sum_lo / static_cast<double>(n_lo);
    double new_hi = sum_hi / static_cast<double>(n_hi);
    if (new_lo == lo && new_hi == hi) break;
    lo = new_lo;
    hi = new_hi;
  }
  double mid = (lo + hi) / 2;
  if (hi - lo < k.unimodal_separation * mid) {
    double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    throw Unimodal("latency series has a single level", mean);
  }
  std::size_t above = 0;
  for (Nanos x : samples)
    if (static_cast<double>(x) > mid) ++above;
  return {lo, hi, mid, static_cast<double>(above) / static_cast<double>(samples.size())};
}

inline TwoLevelStats cluster_two_level(const LatencySeries& series, const InferenceConstants& k = {}) {
  auto lat = series.latencies();
  return cluster_two_level(std::span<const Nanos>(lat), k);
}

namespace detail {

// Pearson correlation of bits[0, n - lag) against bits[lag, n). Two equal
// constant segments count as perfectly correlated; any other constant
// segment as uncorrelated.
inline double lagged_correlation(const std::vector<bool>& bits, std::size_t lag) {
  std::size_t m = bits.size() - lag;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  bool equal = true;
  for (std::size_t i = 0; i < m; ++i) {
    double x = bits[i], y = bits[i + lag];
    sx += x, sy += y, sxx += x * x, syy += y * y, sxy += x * y;
    equal = equal && bits[i] == bits[i + lag];
  }
  double n = static_cast<double>(m);
  double vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
  if (vx <= 0 || vy <= 0) return equal ? 1.0 : 0.0;
  return (sxy - sx * sy / n) / std::sqrt(vx * vy);
}

}  // namespace detail

/// Period of a binary high/low pattern. Evenly spaced single highs give the
/// spacing directly; otherwise the lag in [2, min(128, n/r)] with the
/// highest lagged correlation wins (smallest lag on ties), where r is the
/// number of repeats required (4 by default).
inline std::size_t detect_period(const std::vector<bool>& bits, const InferenceConstants& k = {}) {
  const std::size_t n = bits.size();
  const std::size_t reps = std::max<std::size_t>(k.min_period_repeats, 2);
  if (n < 2 * reps) throw NoPeriod("period detection needs >= " + std::to_string(2 * reps) + " samples");
  std::vector<std::size_t> highs;
  for (std::size_t i = 0; i < n; ++i)
    if (bits[i]) highs.push_back(i);
  if (highs.empty() || highs.size() == n) throw NoPeriod("series is constant after binarization");

  if (highs.size() >= 2) {
    std::size_t spacing = highs[1] - highs[0];
    bool even = spacing >= 2 && highs[0] < spacing && (n - 1 - highs.back()) < spacing;
    for (std::size_t i = 2; even && i < highs.size(); ++i) even = highs[i] - highs[i - 1] == spacing;
    if (even) {
      if (n < reps * spacing)
        throw NoPeriod("fewer than " + std::to_string(reps) + " full periods of " + std::to_string(spacing));
      return spacing;
    }
  }

  std::size_t max_lag = std::min(k.max_period_lag, n / reps);
  double best = -2;
  std::size_t best_lag = 0;
  std::vector<double> corr(max_lag + 1, -2);
  for (std::size_t lag = 2; lag <= max_lag; ++lag) {
    corr[lag] = detail::lagged_correlation(bits, lag);
    best = std::max(best, corr[lag]);
  }
  for (std::size_t lag = 2; lag <= max_lag; ++lag) {
    if (corr[lag] >= best - 1e-9) {
      best_lag = lag;
      break;
    }
  }
  if (best_lag == 0 || best < k.period_correlation_bar)
    throw NoPeriod("no lag reaches the correlation bar (best " + std::to_string(best) + ")");
  return best_lag;
}

inline std::size_t detect_period(const LatencySeries& series, const TwoLevelStats& stats,
                                 const InferenceConstants& k = {}) {
  std::vector<bool> bits;
  bits.reserve(series.size());
  for (const auto& s : series.samples) bits.push_back(static_cast<double>(s.latency_ns) > stats.threshold_ns);
  return detect_period(bits, k);
}

struct GranularityEstimate {
  std::uint64_t bytes = 0;
  std::size_t period = 0;
  TwoLevelStats stats;
};

/// Access granularity from a sequential line-stride read series: the
/// period of its high/low pattern times the line size.
inline GranularityEstimate infer_granularity(const LatencySeries& series, std::uint64_t line_size,
                                             const InferenceConstants& k = {}) {
  auto stats = cluster_two_level(series, k);
  std::size_t period = detect_period(series, stats, k);
  double expected = 1.0 / static_cast<double>(period);
  if (std::abs(stats.high_fraction - expected) > k.granularity_fraction_tolerance)
    throw NoPeriod("high fraction " + std::to_string(stats.high_fraction) + " does not match period " +
                   std::to_string(period));
  return {period * line_size, period, stats};
}

/// Largest x still within knee_factor of the first point's median, before
/// the first point that exceeds it.
inline std::uint64_t infer_knee(const SweepResult& sweep, const InferenceConstants& k = {}) {
  if (sweep.points.size() < 3) throw PreconditionError("knee detection needs >= 3 sweep points");
  for (std::size_t i = 1; i < sweep.points.size(); ++i)
    if (sweep.points[i].x <= sweep.points[i - 1].x) throw PreconditionError("sweep x must be ascending");
  double limit = k.knee_factor * static_cast<double>(sweep.points.front().median_ns);
  for (std::size_t i = 1; i < sweep.points.size(); ++i)
    if (static_cast<double>(sweep.points[i].median_ns) > limit) return sweep.points[i - 1].x;
  throw NoKnee("no sweep point exceeds " + std::to_string(k.knee_factor) + "x the first median");
}

struct SetIndexBits {
  std::vector<unsigned> bits;
  bool contiguous = false;
};

/// Bits whose flip keeps the pair fast (below the threshold), line-offset
/// bits excluded.
inline SetIndexBits infer_set_index_bits(const SweepResult& scan, const TwoLevelStats& stats,
                                         std::uint64_t line_size) {
  if (scan.x_meaning != SweepAxis::BitPosition)
    throw PreconditionError("set index inference needs a BitPosition scan");
  auto offset_bits = static_cast<std::uint64_t>(std::countr_zero(line_size));
  SetIndexBits out;
  for (const auto& p : scan.points)
    if (p.x >= offset_bits && static_cast<double>(p.median_ns) < stats.threshold_ns)
      out.bits.push_back(static_cast<unsigned>(p.x));
  out.contiguous = !out.bits.empty();
  for (std::size_t i = 1; i < out.bits.size(); ++i)
    out.contiguous = out.contiguous && out.bits[i] == out.bits[i - 1] + 1;
  return out;
}

struct AssociativityEstimate {
  std::uint64_t ways = 0;
  bool at_least = false;  // no group overflowed; `ways` is a lower bound
};

inline AssociativityEstimate infer_associativity(const SweepResult& scan, double threshold_ns) {
  if (scan.x_meaning != SweepAxis::GroupSize) throw PreconditionError("associativity needs a GroupSize scan");
  if (scan.points.empty() || scan.points.front().x != 2)
    throw PreconditionError("associativity scan must start at K = 2");
  for (const auto& p : scan.points)
    if (static_cast<double>(p.median_ns) > threshold_ns) return {p.x - 1, false};
  return {scan.points.back().x, true};
}

struct WriteLatencyEstimate {
  double span_ns = 0;  // p99 - p1
  Nanos p1_ns = 0;
  Nanos p99_ns = 0;
  Nanos raw_min_ns = 0;
  Nanos raw_max_ns = 0;
  bool saturated = false;
};

/// Media write latency from a saturated-queue series: the span of the stall
/// distribution. A span below the fast-commit level (p1) means the queue
/// never filled and the series says nothing about media writes.
inline WriteLatencyEstimate estimate_write_latency(const LatencySeries& series, const InferenceConstants& k = {}) {
  if (series.size() < k.min_write_samples)
    throw TooFewSamples("write latency needs >= " + std::to_string(k.min_write_samples) + " samples, got " +
                        std::to_string(series.size()));
  auto lat = series.latencies();
  std::sort(lat.begin(), lat.end());
  WriteLatencyEstimate e;
  e.p1_ns = percentile_sorted(lat, 0.01);
  e.p99_ns = percentile_sorted(lat, 0.99);
  e.raw_min_ns = lat.front();
  e.raw_max_ns = lat.back();
  e.span_ns = static_cast<double>(e.p99_ns - e.p1_ns);
  e.saturated = e.span_ns >= static_cast<double>(e.p1_ns);
  return e;
}

template <class T>
struct Evidence {
  std::string run_id;
  T data;
};

/// Everything the report can be built from. Any subset may be present.
struct ProbeEvidence {
  std::uint64_t line_size = 64;
  std::optional<Evidence<LatencySeries>> sequential_read;
  std::optional<Evidence<LatencySeries>> random_read;
  std::vector<Evidence<SweepResult>> buffer_sweeps;
  std::optional<Evidence<SweepResult>> footprint_sweep;
  std::optional<Evidence<SweepResult>> associativity_scan;
  std::optional<Evidence<SweepResult>> set_index_scan;
  std::optional<Evidence<LatencySeries>> write_saturation;
  std::optional<Evidence<TagPlacement>> tag_placement;
};

/// Recovered parameters. Empty optionals are unpopulated (no usable
/// evidence); they are written as null, never given a default.
struct InferenceReport {
  std::optional<std::uint64_t> access_granularity_bytes;
  std::optional<std::uint64_t> buffer_capacity_bytes;
  std::optional<bool> buffer_fully_associative;
  std::optional<double> buffer_hit_read_ns;
  std::optional<double> dram_read_ns;
  std::optional<double> nvm_read_ns;
  std::optional<double> nvm_write_ns;
  std::optional<Nanos> nvm_write_raw_max_ns;
  std::optional<std::uint64_t> cache_capacity_bytes;
  std::optional<std::uint64_t> cache_assoc_ways;
  bool cache_assoc_at_least = false;
  std::optional<std::vector<unsigned>> set_index_bits;
  std::optional<bool> set_index_contiguous;
  std::optional<TagPlacement> tag_placement;
  std::vector<std::string> assumptions;
  std::map<std::string, std::vector<std::string>> evidence;

  void cite(const std::string& field, const std::string& run_id) {
    auto& ids = evidence[field];
    if (std::find(ids.begin(), ids.end(), run_id) == ids.end()) ids.push_back(run_id);
  }
};

namespace detail {

// Threshold separating hit from conflict latency in a scan: the scan's own
// two-level split when it has one, else knee_factor x the hit latency.
inline std::optional<double> scan_threshold(const SweepResult& scan, std::optional<double> hit_ns,
                                            const InferenceConstants& k) {
  auto medians = scan.medians();
  if (medians.size() >= 8) {
    try {
      return cluster_two_level(std::span<const Nanos>(medians), k).threshold_ns;
    } catch (const Unimodal&) {
    }
  } else if (!medians.empty()) {
    auto [mn, mx] = std::minmax_element(medians.begin(), medians.end());
    double lo = static_cast<double>(*mn), hi = static_cast<double>(*mx);
    if (hi - lo >= k.unimodal_separation * (lo + hi) / 2) return (lo + hi) / 2;
  }
  if (hit_ns) return k.knee_factor * *hit_ns;
  return std::nullopt;
}

}  // namespace detail

inline InferenceReport build_report(const ProbeEvidence& ev, const InferenceConstants& k = {}) {
  InferenceReport rep;
  rep.assumptions.push_back(
      "cache miss latency is modeled as a serial DRAM tag read plus the NVM read; the fill write is off "
      "the critical path");
  rep.assumptions.push_back("DRAM cache fills are one line; evicted lines are dropped without writeback");

  if (ev.sequential_read) {
    const auto& [id, series] = *ev.sequential_read;
    try {
      auto g = infer_granularity(series, ev.line_size, k);
      rep.access_granularity_bytes = g.bytes;
      rep.buffer_hit_read_ns = g.stats.low_mean_ns;
      rep.nvm_read_ns = g.stats.high_mean_ns;
      rep.cite("access_granularity_bytes", id);
      rep.cite("buffer_hit_read_ns", id);
      rep.cite("nvm_read_ns", id);
    } catch (const Error& e) {
      rep.assumptions.push_back("sequential read series gave no granularity: " + std::string(e.what()));
    }
  }

  if (ev.random_read) {
    const auto& [id, series] = *ev.random_read;
    try {
      auto s = cluster_two_level(series, k);
      rep.assumptions.push_back("random read series is not single-level; using its upper level as NVM read");
      rep.nvm_read_ns = s.high_mean_ns;
      rep.cite("nvm_read_ns", id);
    } catch (const Unimodal& u) {
      rep.nvm_read_ns = u.mean_ns();
      rep.evidence["nvm_read_ns"] = {id};
    } catch (const Error& e) {
      rep.assumptions.push_back("random read series unusable: " + std::string(e.what()));
    }
  }

  if (!ev.buffer_sweeps.empty()) {
    std::vector<std::uint64_t> knees;
    for (const auto& [id, sweep] : ev.buffer_sweeps) {
      try {
        knees.push_back(infer_knee(sweep, k));
        rep.cite("buffer_capacity_bytes", id);
        rep.cite("buffer_fully_associative", id);
      } catch (const Error& e) {
        rep.assumptions.push_back("buffer sweep " + id + " has no knee: " + e.what());
      }
    }
    if (!knees.empty()) {
      rep.buffer_capacity_bytes = knees.front();
      if (knees.size() == ev.buffer_sweeps.size() && knees.size() >= 2) {
        rep.buffer_fully_associative =
            std::all_of(knees.begin(), knees.end(), [&](auto x) { return x == knees.front(); });
        if (!*rep.buffer_fully_associative) {
          rep.buffer_capacity_bytes = *std::max_element(knees.begin(), knees.end());
          rep.assumptions.push_back("buffer knee moves with stride; capacity reported as the largest knee");
        }
      } else {
        rep.evidence.erase("buffer_fully_associative");
      }
    } else {
      rep.evidence.erase("buffer_capacity_bytes");
      rep.evidence.erase("buffer_fully_associative");
    }
  }

  if (ev.footprint_sweep) {
    const auto& [id, sweep] = *ev.footprint_sweep;
    if (!sweep.points.empty()) {
      rep.dram_read_ns = static_cast<double>(sweep.points.front().median_ns);
      rep.cite("dram_read_ns", id);
    }
    try {
      rep.cache_capacity_bytes = infer_knee(sweep, k);
      rep.cite("cache_capacity_bytes", id);
    } catch (const Error& e) {
      rep.assumptions.push_back("footprint sweep has no knee: " + std::string(e.what()));
    }
  }

  if (ev.associativity_scan) {
    const auto& [id, scan] = *ev.associativity_scan;
    auto th = detail::scan_threshold(scan, rep.dram_read_ns, k);
    if (th && !scan.points.empty()) {
      try {
        auto a = infer_associativity(scan, *th);
        rep.cache_assoc_ways = a.ways;
        rep.cache_assoc_at_least = a.at_least;
        rep.cite("cache_assoc_ways", id);
        if (rep.dram_read_ns) rep.cite("cache_assoc_ways", ev.footprint_sweep->run_id);
        if (a.at_least)
          rep.assumptions.push_back("no group overflowed its set; associativity is at least " +
                                    std::to_string(a.ways));
      } catch (const Error& e) {
        rep.assumptions.push_back("associativity scan unusable: " + std::string(e.what()));
      }
    } else {
      rep.assumptions.push_back("associativity scan is single-level and no hit latency is known");
    }
  }

  if (ev.set_index_scan) {
    const auto& [id, scan] = *ev.set_index_scan;
    auto th = detail::scan_threshold(scan, rep.dram_read_ns, k);
    if (th) {
      try {
        TwoLevelStats stats{0, 0, *th, 0};
        auto bits = infer_set_index_bits(scan, stats, ev.line_size);
        rep.set_index_bits = bits.bits;
        rep.set_index_contiguous = bits.contiguous;
        rep.cite("set_index_bits", id);
        rep.cite("set_index_contiguous", id);
      } catch (const Error& e) {
        rep.assumptions.push_back("set index scan unusable: " + std::string(e.what()));
      }
    } else {
      rep.assumptions.push_back("set index scan is single-level and no hit latency is known");
    }
  }

  if (ev.write_saturation) {
    const auto& [id, series] = *ev.write_saturation;
    try {
      auto w = estimate_write_latency(series, k);
      if (w.saturated) {
        rep.nvm_write_ns = w.span_ns;
        rep.nvm_write_raw_max_ns = w.raw_max_ns;
        rep.cite("nvm_write_ns", id);
        rep.cite("nvm_write_raw_max_ns", id);
      } else {
        rep.assumptions.push_back("write series is NotSaturated (span " + std::to_string(w.span_ns) +
                                  "ns below fast commit " + std::to_string(w.p1_ns) + "ns)");
      }
    } catch (const Error& e) {
      rep.assumptions.push_back("write series unusable: " + std::string(e.what()));
    }
  }

  if (ev.tag_placement) {
    rep.tag_placement = ev.tag_placement->data;
    rep.cite("tag_placement", ev.tag_placement->run_id);
  }

  // Set bits + offset bits + way bits must add up to the cache capacity.
  if (rep.set_index_bits && rep.cache_assoc_ways && !rep.cache_assoc_at_least && rep.cache_capacity_bytes) {
    auto ways = *rep.cache_assoc_ways;
    auto cap = *rep.cache_capacity_bytes;
    auto offset = std::countr_zero(ev.line_size);
    if (!std::has_single_bit(ways) || !std::has_single_bit(cap) ||
        static_cast<int>(rep.set_index_bits->size()) + offset + std::countr_zero(ways) != std::countr_zero(cap)) {
      rep.assumptions.push_back("contradiction: " + std::to_string(rep.set_index_bits->size()) +
                                " index bits + " + std::to_string(offset) + " offset bits with " +
                                std::to_string(ways) + " ways does not match a " + std::to_string(cap) +
                                "-byte cache");
    }
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const InferenceReport& r) {
  nlohmann::ordered_json j;
  std::vector<std::string> unpopulated;
  auto put = [&](const char* name, const auto& opt) {
    if (opt) {
      j[name] = *opt;
    } else {
      j[name] = nullptr;
      unpopulated.emplace_back(name);
    }
  };
  put("access_granularity_bytes", r.access_granularity_bytes);
  put("buffer_capacity_bytes", r.buffer_capacity_bytes);
  put("buffer_fully_associative", r.buffer_fully_associative);
  put("buffer_hit_read_ns", r.buffer_hit_read_ns);
  put("dram_read_ns", r.dram_read_ns);
  put("nvm_read_ns", r.nvm_read_ns);
  put("nvm_write_ns", r.nvm_write_ns);
  put("nvm_write_raw_max_ns", r.nvm_write_raw_max_ns);
  put("cache_capacity_bytes", r.cache_capacity_bytes);
  put("cache_assoc_ways", r.cache_assoc_ways);
  j["cache_assoc_at_least"] = r.cache_assoc_at_least;
  put("set_index_bits", r.set_index_bits);
  put("set_index_contiguous", r.set_index_contiguous);
  if (r.tag_placement) {
    j["tag_placement"] = std::string(to_string(*r.tag_placement));
  } else {
    j["tag_placement"] = nullptr;
    unpopulated.emplace_back("tag_placement");
  }
  j["assumptions"] = r.assumptions;
  j["unpopulated"] = unpopulated;
  j["evidence"] = r.evidence;
  return j;
}

}  // namespace hmprobe
