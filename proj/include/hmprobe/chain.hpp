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
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hmprobe/backend.hpp"
#include "hmprobe/config.hpp"
#include "hmprobe/errors.hpp"

namespace hmprobe {

enum class ChainKind { Sequential, RandomCycle };

/// Pointer-chase layout: `addresses` is the traversal order over `count`
/// slots at `base + i * stride`.
struct ChainLayout {
  std::vector<Address> addresses;
  Address base = 0;
  std::uint64_t stride = 0;
  ChainKind kind = ChainKind::Sequential;

  std::size_t size() const { return addresses.size(); }
};

// Sattolo's shuffle: next[i] is the slot visited after slot i, and following
// next[] from any slot visits every slot exactly once before returning.
inline std::vector<std::uint32_t> sattolo_cycle(std::uint32_t count, std::uint64_t seed) {
  std::vector<std::uint32_t> next(count);
  std::iota(next.begin(), next.end(), 0u);
  std::mt19937_64 rng(seed);
  for (std::uint32_t i = count - 1; i > 0; --i) {
    std::uint32_t j = std::uniform_int_distribution<std::uint32_t>(0, i - 1)(rng);
    std::swap(next[i], next[j]);
  }
  return next;
}

inline ChainLayout build_chain(Address base, std::uint64_t count, std::uint64_t stride,
                               ChainKind kind, std::uint64_t seed,
                               std::uint64_t line_size = 64) {
  if (count < 2) throw CountTooSmall("chain needs at least 2 slots, got " + std::to_string(count));
  if (count > 0xffffffffULL) throw PreconditionError("chain slot count exceeds 2^32 - 1");
  if (stride < line_size || stride % line_size != 0)
    throw BadStride("stride " + std::to_string(stride) + " is not a multiple of the " +
                    std::to_string(line_size) + "B line");
  if (base % line_size != 0) throw BadStride("chain base " + to_hex(base) + " is not line-aligned");

  ChainLayout chain{{}, base, stride, kind};
  chain.addresses.reserve(count);
  if (kind == ChainKind::Sequential) {
    for (std::uint64_t i = 0; i < count; ++i) chain.addresses.push_back(base + i * stride);
    return chain;
  }
  auto next = sattolo_cycle(static_cast<std::uint32_t>(count), seed);
  std::uint32_t slot = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    chain.addresses.push_back(base + slot * stride);
    slot = next[slot];
  }
  return chain;
}

struct LatencySample {
  std::uint64_t index = 0;
  Address address = 0;
  Nanos latency_ns = 0;
  StreamId stream_id = 0;

  bool operator==(const LatencySample&) const = default;
};

struct SeriesMetadata {
  std::string backend;
  std::string probe;
  std::string config_hash;

  bool operator==(const SeriesMetadata&) const = default;
};

struct LatencySeries {
  std::vector<LatencySample> samples;
  SeriesMetadata metadata;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  std::vector<Nanos> latencies() const {
    std::vector<Nanos> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.latency_ns);
    return out;
  }

  void add(Address addr, Nanos latency, StreamId stream) {
    samples.push_back({samples.size(), addr, latency, stream});
  }

  // Final `fraction` of the samples, re-indexed from 0.
  LatencySeries tail(double fraction) const {
    LatencySeries out{{}, metadata};
    std::size_t keep = static_cast<std::size_t>(static_cast<double>(samples.size()) * fraction);
    for (std::size_t i = samples.size() - keep; i < samples.size(); ++i)
      out.add(samples[i].address, samples[i].latency_ns, samples[i].stream_id);
    return out;
  }

  bool operator==(const LatencySeries&) const = default;
};

/// Reads every chain address in order, `rounds` times. Each read is issued
/// when the previous one completes, so one stream carries the whole chase.
template <MemoryBackend Backend>
LatencySeries traverse_read(Backend& backend, const ChainLayout& chain, std::uint64_t rounds,
                            StreamId stream = 0) {
  if (rounds < 1) throw PreconditionError("traverse_read needs rounds >= 1");
  LatencySeries series;
  series.metadata = {backend.describe(), "traverse_read", backend.fingerprint()};
  series.samples.reserve(chain.size() * rounds);
  for (std::uint64_t r = 0; r < rounds; ++r) {
    for (Address a : chain.addresses) series.add(a, backend.read(stream, a).latency_ns, stream);
  }
  return series;
}

inline void write_csv(std::ostream& os, const LatencySeries& s) {
  os << "# backend: " << s.metadata.backend << '\n';
  os << "# probe: " << s.metadata.probe << '\n';
  os << "# config_hash: " << s.metadata.config_hash << '\n';
  os << "index,address_hex,latency_ns,stream_id\n";
  for (const auto& x : s.samples)
    os << x.index << ',' << to_hex(x.address) << ',' << x.latency_ns << ',' << x.stream_id << '\n';
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

template <class Int>
Int parse_int(const std::string& s, std::size_t line_no, int base = 10) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used, base);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<Int>(v);
  } catch (const std::logic_error&) {
    throw ParseError("bad integer \"" + s + "\"", line_no);
  }
}

inline std::uint64_t parse_hex(const std::string& s, std::size_t line_no) {
  if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X'))
    throw ParseError("expected 0x-prefixed hex, got \"" + s + "\"", line_no);
  try {
    std::size_t used = 0;
    std::uint64_t v = std::stoull(s.substr(2), &used, 16);
    if (used != s.size() - 2) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("bad hex value \"" + s + "\"", line_no);
  }
}

// Splits "# key: value" comment lines.
inline bool parse_comment(const std::string& line, std::string& key, std::string& value) {
  if (line.empty() || line[0] != '#') return false;
  auto colon = line.find(':');
  if (colon == std::string::npos) return false;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  key = trim(line.substr(1, colon - 1));
  value = trim(line.substr(colon + 1));
  return true;
}

}  // namespace detail

inline LatencySeries read_latency_series_csv(std::istream& is) {
  LatencySeries s;
  std::string line, key, value;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (detail::parse_comment(line, key, value)) {
        if (key == "backend") s.metadata.backend = value;
        else if (key == "probe") s.metadata.probe = value;
        else if (key == "config_hash") s.metadata.config_hash = value;
      }
      continue;
    }
    if (!header) {
      if (line != "index,address_hex,latency_ns,stream_id")
        throw ParseError("expected header index,address_hex,latency_ns,stream_id", line_no);
      header = true;
      continue;
    }
    auto f = detail::split(line, ',');
    if (f.size() != 4) throw ParseError("expected 4 fields", line_no);
    LatencySample x;
    x.index = detail::parse_int<std::uint64_t>(f[0], line_no);
    x.address = detail::parse_hex(f[1], line_no);
    x.latency_ns = detail::parse_int<Nanos>(f[2], line_no);
    x.stream_id = detail::parse_int<StreamId>(f[3], line_no);
    if (x.index != s.samples.size()) throw ParseError("sample indices must be dense from 0", line_no);
    if (x.latency_ns <= 0) throw ParseError("latency must be > 0", line_no);
    s.samples.push_back(x);
  }
  return s;
}

}  // namespace hmprobe
