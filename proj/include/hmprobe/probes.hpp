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
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hmprobe/backend.hpp"
#include "hmprobe/chain.hpp"
#include "hmprobe/errors.hpp"
#include "hmprobe/stats.hpp"

namespace hmprobe {

enum class SweepAxis { FootprintBytes, WorkingSetBytes, BitPosition, GroupSize };

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::FootprintBytes: return "FootprintBytes";
    case SweepAxis::WorkingSetBytes: return "WorkingSetBytes";
    case SweepAxis::BitPosition: return "BitPosition";
    case SweepAxis::GroupSize: return "GroupSize";
  }
  return "?";
}

struct SweepPoint {
  std::uint64_t x = 0;
  Nanos median_ns = 0;
  Nanos p10_ns = 0;
  Nanos p90_ns = 0;

  bool operator==(const SweepPoint&) const = default;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  SweepAxis x_meaning = SweepAxis::FootprintBytes;
  SeriesMetadata metadata;

  std::vector<Nanos> medians() const {
    std::vector<Nanos> out;
    for (const auto& p : points) out.push_back(p.median_ns);
    return out;
  }
  const SweepPoint* find(std::uint64_t x) const {
    for (const auto& p : points)
      if (p.x == x) return &p;
    return nullptr;
  }

  bool operator==(const SweepResult&) const = default;
};

inline SweepPoint summarize(std::uint64_t x, std::vector<Nanos> samples) {
  std::sort(samples.begin(), samples.end());
  return {x, percentile_sorted(samples, 0.5), percentile_sorted(samples, 0.1),
          percentile_sorted(samples, 0.9)};
}

namespace detail {

inline unsigned address_bits(Address limit) {
  return static_cast<unsigned>(std::bit_width(limit - 1));
}

// Steady-state samples of a round-robin read loop: the final half.
template <MemoryBackend Backend>
std::vector<Nanos> round_robin_steady(Backend& backend, const std::vector<Address>& addrs,
                                      std::uint64_t iters, StreamId stream) {
  std::vector<Nanos> steady;
  steady.reserve(iters - iters / 2);
  for (std::uint64_t i = 0; i < iters; ++i) {
    Nanos lat = backend.read(stream, addrs[i % addrs.size()]).latency_ns;
    if (i >= iters / 2) steady.push_back(lat);
  }
  return steady;
}

inline void check_conflict_args(const std::vector<Address>& addrs, std::uint64_t iters) {
  if (addrs.size() < 2) throw PreconditionError("conflict probe needs at least 2 addresses");
  if (iters < 4 * addrs.size())
    throw PreconditionError("conflict probe needs iters >= 4 * address count");
  std::set<Address> seen;
  for (Address a : addrs)
    if (!seen.insert(a).second) throw DuplicateAddress("address " + to_hex(a) + " listed twice");
}

// Tag-field patterns with at least two bits set. None of them equals a
// single-bit flip, so they never collide with a scanned pair partner.
inline std::vector<std::uint64_t> companion_patterns(std::uint64_t count, unsigned& width) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t v = 3; out.size() < count; ++v)
    if (std::popcount(v) >= 2) out.push_back(v);
  width = out.empty() ? 0 : static_cast<unsigned>(std::bit_width(out.back()));
  return out;
}

}  // namespace detail

/// Random pointer chase at each footprint. Each chain has at most
/// `max_slots` slots spread evenly over the footprint, so huge footprints
/// touch a bounded number of lines while still covering the whole range.
template <MemoryBackend Backend>
SweepResult footprint_sweep(Backend& backend, const std::vector<std::uint64_t>& footprints,
                            std::uint64_t samples_per_point, std::uint64_t seed,
                            std::uint64_t max_slots = 4096) {
  const std::uint64_t line = backend.line_size();
  if (samples_per_point < 1) throw PreconditionError("samples_per_point must be >= 1");
  if (max_slots < 2) throw PreconditionError("max_slots must be >= 2");
  SweepResult out;
  out.x_meaning = SweepAxis::FootprintBytes;
  out.metadata = {backend.describe(), "footprint_sweep", backend.fingerprint()};
  for (std::size_t i = 0; i < footprints.size(); ++i) {
    std::uint64_t f = footprints[i];
    if (i > 0 && f <= footprints[i - 1])
      throw PreconditionError("footprints must be strictly ascending");
    if (f < 2 * line) throw PreconditionError("footprint must cover at least 2 lines");
    std::uint64_t slots = std::min(f / line, std::bit_floor(max_slots));
    std::uint64_t stride = (f / slots) & ~(line - 1);
    auto chain = build_chain(0, slots, stride, ChainKind::RandomCycle, seed + i, line);
    std::uint64_t rounds = 1 + (samples_per_point + slots - 1) / slots;
    auto series = traverse_read(backend, chain, rounds);
    auto lat = series.latencies();
    out.points.push_back(summarize(f, {lat.begin() + static_cast<std::ptrdiff_t>(slots), lat.end()}));
  }
  return out;
}

struct WriteSaturationOptions {
  int saturator_streams = 3;
  std::uint64_t samples = 2000;
  std::uint64_t seed = 1;
  // Measuring-stream think time is uniform in [0, phase_window_ns). Should
  // span more than one queue drain period.
  Nanos phase_window_ns = 8192;
};

/// Saturator streams keep the write pending queue full (each retries on its
/// own commit cadence whenever the queue rejects it); one measuring stream
/// issues writes at random phases and records how long each takes to commit.
template <MemoryBackend Backend>
LatencySeries write_saturation_probe(Backend& backend, const WriteSaturationOptions& opt) {
  if (opt.saturator_streams < 1) throw PreconditionError("write saturation needs >= 1 saturator stream");
  if (opt.samples < 100) throw PreconditionError("write saturation needs >= 100 samples");
  if (opt.phase_window_ns < 1) throw PreconditionError("phase_window_ns must be >= 1");
  const std::uint64_t line = backend.line_size();
  const Address region = std::max<Address>(64 * line, 4096);
  const int n = opt.saturator_streams;
  if (region * static_cast<Address>(n + 1) > backend.address_limit())
    throw PreconditionError("address space too small for write saturation regions");

  constexpr StreamId kMeasure = 0;
  constexpr std::uint64_t kUnsaturatedLimit = 1 << 16;
  std::vector<std::uint64_t> cursor(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Nanos> cadence(static_cast<std::size_t>(n) + 1, 0);
  std::vector<bool> staggered(static_cast<std::size_t>(n) + 1, false);
  auto next_addr = [&](int s) {
    auto& c = cursor[static_cast<std::size_t>(s)];
    Address a = static_cast<Address>(s) * region + (c % (region / line)) * line;
    ++c;
    return a;
  };

  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<Nanos> phase(0, opt.phase_window_ns - 1);
  LatencySeries series;
  series.metadata = {backend.describe(), "write_saturation", backend.fingerprint()};

  bool saturated = false;
  Nanos last_fast = 1;
  const std::uint64_t max_events = opt.samples * 4096 + 1'000'000;
  for (std::uint64_t events = 0; series.size() < opt.samples; ++events) {
    if (events > max_events) throw Error("write saturation probe did not converge");
    // Earliest stream goes next; the measuring stream wins ties.
    int s = 1;
    for (int k = 2; k <= n; ++k)
      if (backend.stream_time(k) < backend.stream_time(s)) s = k;
    if (!saturated && events >= kUnsaturatedLimit) {
      // The queue never filled; measure anyway so the caller sees the
      // unsaturated distribution.
      saturated = true;
      backend.idle(kMeasure, std::max<Nanos>(0, backend.stream_time(s) - backend.stream_time(kMeasure)));
    }
    if (saturated && backend.stream_time(kMeasure) <= backend.stream_time(s)) {
      Address a = next_addr(kMeasure);
      series.add(a, backend.write(kMeasure, a).latency_ns, kMeasure);
      backend.idle(kMeasure, phase(rng));
      continue;
    }
    auto r = backend.try_write(s, next_addr(s));
    auto& cad = cadence[static_cast<std::size_t>(s)];
    if (r) {
      cad = r->latency_ns;
      last_fast = r->latency_ns;
    } else {
      --cursor[static_cast<std::size_t>(s)];
      Nanos wait = cad > 0 ? cad : last_fast;
      // Spread the saturators' retry phases evenly over one cadence so a
      // freed entry is refilled quickly.
      if (!staggered[static_cast<std::size_t>(s)]) {
        staggered[static_cast<std::size_t>(s)] = true;
        wait += wait * (s - 1) / n;
      }
      backend.idle(s, wait);
      if (!saturated) {
        saturated = true;
        backend.idle(kMeasure, std::max<Nanos>(0, backend.stream_time(s) - backend.stream_time(kMeasure)) +
                                   phase(rng));
      }
    }
  }
  return series;
}

/// Reads `addrs` round-robin and returns the median of the final half.
template <MemoryBackend Backend>
Nanos conflict_probe(Backend& backend, const std::vector<Address>& addrs, std::uint64_t iters,
                     StreamId stream = 0) {
  detail::check_conflict_args(addrs, iters);
  return percentile(detail::round_robin_steady(backend, addrs, iters, stream), 0.5);
}

struct SetIndexScanOptions {
  Address base = 0;
  unsigned first_bit = 0;
  unsigned last_bit = 36;
  std::uint64_t iters = 64;
  // Known cache ways. With more than one way each pair is joined by
  // ways - 1 companions that share the base's set, so a pair sharing the
  // set overflows it by exactly one line.
  std::uint64_t ways = 1;
};

/// For each bit b, steady latency of {base, base ^ (1 << b)} read
/// alternately. Low latency means the flip moved the line to another set.
template <MemoryBackend Backend>
SweepResult set_index_scan(Backend& backend, const SetIndexScanOptions& opt) {
  if (opt.last_bit < opt.first_bit) throw PreconditionError("set_index_scan needs first_bit <= last_bit");
  if (opt.ways < 1) throw PreconditionError("set_index_scan needs ways >= 1");
  const Address limit = backend.address_limit();
  const unsigned abits = detail::address_bits(limit);
  unsigned width = 0;
  auto patterns = detail::companion_patterns(opt.ways - 1, width);
  std::vector<Address> companions;
  if (width > abits) throw PreconditionError("address space too small for companion lines");
  for (auto v : patterns) companions.push_back(opt.base ^ (v << (abits - width)));

  SweepResult out;
  out.x_meaning = SweepAxis::BitPosition;
  out.metadata = {backend.describe(), "set_index_scan", backend.fingerprint()};
  for (unsigned b = opt.first_bit; b <= opt.last_bit; ++b) {
    if (b >= 64) throw AddressOutOfRange("bit " + std::to_string(b) + " is beyond a 64-bit address");
    std::vector<Address> addrs{opt.base, opt.base ^ (Address{1} << b)};
    addrs.insert(addrs.end(), companions.begin(), companions.end());
    detail::check_conflict_args(addrs, opt.iters);
    out.points.push_back(summarize(b, detail::round_robin_steady(backend, addrs, opt.iters, 0)));
  }
  return out;
}

struct AssociativityScanOptions {
  Address set_bits_value = 0;
  std::uint64_t max_k = 8;
  std::uint64_t iters = 64;
  // Lowest bit of the tag field used to make group members. Defaults to the
  // top bits of the backend's address space.
  std::optional<unsigned> tag_shift;
};

/// For K = 2..max_k, steady latency of K addresses that share their set
/// bits and differ only in tag bits.
template <MemoryBackend Backend>
SweepResult associativity_scan(Backend& backend, const AssociativityScanOptions& opt) {
  if (opt.max_k < 2) throw PreconditionError("associativity_scan needs max_k >= 2");
  const Address limit = backend.address_limit();
  unsigned width = static_cast<unsigned>(std::bit_width(opt.max_k - 1));
  unsigned shift = opt.tag_shift.value_or(detail::address_bits(limit) - std::min(width, detail::address_bits(limit)));
  if (shift + width > 64 || (opt.set_bits_value ^ ((opt.max_k - 1) << shift)) >= limit)
    throw AddressOutOfRange("not enough tag bits for " + std::to_string(opt.max_k) + " group members");

  SweepResult out;
  out.x_meaning = SweepAxis::GroupSize;
  out.metadata = {backend.describe(), "associativity_scan", backend.fingerprint()};
  for (std::uint64_t k = 2; k <= opt.max_k; ++k) {
    std::vector<Address> addrs;
    for (std::uint64_t i = 0; i < k; ++i) addrs.push_back(opt.set_bits_value ^ (i << shift));
    std::uint64_t iters = std::max(opt.iters, 4 * k);
    detail::check_conflict_args(addrs, iters);
    out.points.push_back(summarize(k, detail::round_robin_steady(backend, addrs, iters, 0)));
  }
  return out;
}

struct BufferCapacityOptions {
  std::vector<std::uint64_t> working_sets;
  std::uint64_t stride = 256;
  std::uint64_t iters = 8;
  // Buffer bytes one touched address accounts for; the access granularity.
  std::uint64_t granule = 256;
  Address base = 0;
};

/// Cycles over W / granule addresses spaced `stride` apart, `iters` passes
/// per working set W. The knee is the buffer capacity; the same knee at
/// every stride means the buffer is fully associative.
template <MemoryBackend Backend>
SweepResult buffer_capacity_probe(Backend& backend, const BufferCapacityOptions& opt) {
  if (opt.granule == 0 || opt.stride == 0) throw PreconditionError("granule and stride must be > 0");
  if (opt.iters < 2) throw PreconditionError("buffer_capacity_probe needs iters >= 2");
  SweepResult out;
  out.x_meaning = SweepAxis::WorkingSetBytes;
  out.metadata = {backend.describe(), "buffer_capacity_probe stride=" + std::to_string(opt.stride),
                  backend.fingerprint()};
  for (std::size_t i = 0; i < opt.working_sets.size(); ++i) {
    std::uint64_t w = opt.working_sets[i];
    if (i > 0 && w <= opt.working_sets[i - 1])
      throw PreconditionError("working sets must be strictly ascending");
    std::uint64_t n = w / opt.granule;
    if (n < 1) throw PreconditionError("working set smaller than one granule");
    std::vector<Address> addrs;
    for (std::uint64_t k = 0; k < n; ++k) addrs.push_back(opt.base + k * opt.stride);
    if (addrs.back() >= backend.address_limit())
      throw AddressOutOfRange("working set " + std::to_string(w) + " at stride " +
                              std::to_string(opt.stride) + " exceeds the address space");
    std::vector<Nanos> steady;
    std::uint64_t total = n * opt.iters;
    for (std::uint64_t k = 0; k < total; ++k) {
      Nanos lat = backend.read(0, addrs[k % n]).latency_ns;
      if (k >= total / 2) steady.push_back(lat);
    }
    out.points.push_back(summarize(w, std::move(steady)));
  }
  return out;
}

inline void write_csv(std::ostream& os, const SweepResult& s) {
  os << "# x_meaning: " << to_string(s.x_meaning) << '\n';
  os << "# backend: " << s.metadata.backend << '\n';
  os << "# probe: " << s.metadata.probe << '\n';
  os << "# config_hash: " << s.metadata.config_hash << '\n';
  os << "x,median_ns,p10_ns,p90_ns\n";
  for (const auto& p : s.points)
    os << p.x << ',' << p.median_ns << ',' << p.p10_ns << ',' << p.p90_ns << '\n';
}

inline SweepResult read_sweep_csv(std::istream& is) {
  SweepResult s;
  std::string line, key, value;
  std::size_t line_no = 0;
  bool header = false, axis = false;
  while (std::getline(is, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!detail::parse_comment(line, key, value)) continue;
      if (key == "x_meaning") {
        bool ok = false;
        for (auto a : {SweepAxis::FootprintBytes, SweepAxis::WorkingSetBytes, SweepAxis::BitPosition,
                       SweepAxis::GroupSize})
          if (value == to_string(a)) s.x_meaning = a, ok = true;
        if (!ok) throw ParseError("unknown x_meaning \"" + value + "\"", line_no);
        axis = true;
      } else if (key == "backend") {
        s.metadata.backend = value;
      } else if (key == "probe") {
        s.metadata.probe = value;
      } else if (key == "config_hash") {
        s.metadata.config_hash = value;
      }
      continue;
    }
    if (!header) {
      if (line != "x,median_ns,p10_ns,p90_ns") throw ParseError("expected header x,median_ns,p10_ns,p90_ns", line_no);
      if (!axis) throw ParseError("missing # x_meaning comment before the header", line_no);
      header = true;
      continue;
    }
    auto f = detail::split(line, ',');
    if (f.size() != 4) throw ParseError("expected 4 fields", line_no);
    SweepPoint p{detail::parse_int<std::uint64_t>(f[0], line_no), detail::parse_int<Nanos>(f[1], line_no),
                 detail::parse_int<Nanos>(f[2], line_no), detail::parse_int<Nanos>(f[3], line_no)};
    if (!s.points.empty() && p.x <= s.points.back().x) throw ParseError("x must be strictly increasing", line_no);
    if (!(p.p10_ns <= p.median_ns && p.median_ns <= p.p90_ns))
      throw ParseError("percentiles must satisfy p10 <= median <= p90", line_no);
    s.points.push_back(p);
  }
  return s;
}

}  // namespace hmprobe
