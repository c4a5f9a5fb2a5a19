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
#include <cstdio>
#include <string>
#include <string_view>

#include <json.hpp>

#include "hmprobe/errors.hpp"

namespace hmprobe {

using Address = std::uint64_t;
using Nanos = std::int64_t;
using StreamId = int;

inline constexpr std::uint64_t KiB = 1024;
inline constexpr std::uint64_t MiB = 1024 * KiB;
inline constexpr std::uint64_t GiB = 1024 * MiB;

enum class MemoryModeKind { MemoryMode, AppDirect };

enum class ReplacementPolicy { Lru, Fifo };

/// Full parameterization of the simulated DRAM+NVM hierarchy.
///
/// Defaults describe one 16 GiB DDR4 DIMM caching one 128 GiB Optane DIMM.
/// `xpbuffer_ways == 0` means the on-DIMM buffer is fully associative.
struct SimConfig {
  MemoryModeKind mode = MemoryModeKind::MemoryMode;
  std::uint64_t dram_capacity_bytes = 16 * GiB;
  std::uint64_t nvm_capacity_bytes = 128 * GiB;
  std::uint64_t line_size_bytes = 64;
  std::uint64_t nvm_block_bytes = 256;
  std::uint64_t xpbuffer_capacity_bytes = 16 * KiB;
  std::uint64_t xpbuffer_ways = 0;
  ReplacementPolicy xpbuffer_policy = ReplacementPolicy::Lru;
  Nanos dram_read_ns = 90;
  Nanos dram_write_ns = 90;
  Nanos nvm_media_read_ns = 350;
  Nanos nvm_buffer_hit_read_ns = 150;
  Nanos nvm_media_write_ns = 1200;
  Nanos write_commit_overhead_ns = 170;
  std::uint64_t wpq_depth = 64;
  std::uint64_t cache_assoc = 1;
  unsigned set_index_lo_bit = 6;
  unsigned set_index_hi_bit = 33;
  Nanos jitter_ns = 0;
  std::uint64_t seed = 1;

  bool xpbuffer_fully_associative() const { return xpbuffer_ways == 0; }
  unsigned set_index_bits() const { return set_index_hi_bit - set_index_lo_bit + 1; }
  std::uint64_t cache_sets() const { return std::uint64_t{1} << set_index_bits(); }
  std::uint64_t xpbuffer_entries() const { return xpbuffer_capacity_bytes / nvm_block_bytes; }

  bool operator==(const SimConfig&) const = default;
};

inline std::string_view to_string(MemoryModeKind m) {
  return m == MemoryModeKind::MemoryMode ? "MemoryMode" : "AppDirect";
}

namespace detail {

inline bool is_pow2(std::uint64_t v) { return std::has_single_bit(v); }

[[noreturn]] inline void config_fail(const std::string& what) {
  throw ConfigError("invalid SimConfig: " + what);
}

}  // namespace detail

// Throws ConfigError naming the first violated invariant.
inline void validate(const SimConfig& c) {
  using detail::config_fail;
  using detail::is_pow2;
  auto pow2 = [](std::string_view name, std::uint64_t v) {
    if (v == 0) config_fail(std::string(name) + " must be non-zero");
    if (!is_pow2(v)) config_fail(std::string(name) + " must be a power of two");
  };
  pow2("dram_capacity_bytes", c.dram_capacity_bytes);
  pow2("nvm_capacity_bytes", c.nvm_capacity_bytes);
  pow2("line_size_bytes", c.line_size_bytes);
  pow2("nvm_block_bytes", c.nvm_block_bytes);
  pow2("xpbuffer_capacity_bytes", c.xpbuffer_capacity_bytes);
  if (c.nvm_block_bytes < c.line_size_bytes)
    config_fail("line_size_bytes must divide nvm_block_bytes");
  if (c.xpbuffer_capacity_bytes < c.nvm_block_bytes)
    config_fail("nvm_block_bytes must divide xpbuffer_capacity_bytes");
  if (c.xpbuffer_ways != 0 && (c.xpbuffer_entries() % c.xpbuffer_ways) != 0)
    config_fail("xpbuffer_assoc ways must divide the number of buffer entries");

  if (c.dram_read_ns <= 0 || c.dram_write_ns <= 0 || c.nvm_media_read_ns <= 0 ||
      c.nvm_buffer_hit_read_ns <= 0 || c.nvm_media_write_ns <= 0 ||
      c.write_commit_overhead_ns <= 0)
    config_fail("all latencies must be > 0");
  if (c.wpq_depth < 1) config_fail("wpq_depth must be >= 1");
  if (c.jitter_ns < 0) config_fail("jitter_ns must be >= 0");
  Nanos min_latency = std::min({c.dram_read_ns, c.nvm_buffer_hit_read_ns,
                                c.write_commit_overhead_ns});
  if (c.jitter_ns >= min_latency)
    config_fail("jitter_ns must be smaller than every latency");

  if (c.cache_assoc < 1) config_fail("cache_assoc must be >= 1");
  if (c.set_index_hi_bit < c.set_index_lo_bit)
    config_fail("set_index_hi_bit must be >= set_index_lo_bit");
  if (c.set_index_hi_bit >= 63) config_fail("set_index_hi_bit must be < 63");
  auto line_bits = static_cast<unsigned>(std::countr_zero(c.line_size_bytes));
  if (c.set_index_lo_bit < line_bits)
    config_fail("set_index_lo_bit must not overlap the line offset");
  // 2^index_bits sets, each holding cache_assoc lines.
  unsigned bits = c.set_index_bits();
  unsigned assoc_bits = 64;
  if (is_pow2(c.cache_assoc)) assoc_bits = static_cast<unsigned>(std::countr_zero(c.cache_assoc));
  if (assoc_bits == 64 || bits + line_bits + assoc_bits >= 64 ||
      (std::uint64_t{1} << (bits + line_bits + assoc_bits)) != c.dram_capacity_bytes)
    config_fail("2^(set index bits) * line_size_bytes * cache_assoc must equal dram_capacity_bytes");
}

// JSON mirrors the struct field names. The buffer associativity is
// spelled `xpbuffer_assoc` and takes "full" or an integer way count.
inline nlohmann::ordered_json to_json(const SimConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(c.mode));
  j["dram_capacity_bytes"] = c.dram_capacity_bytes;
  j["nvm_capacity_bytes"] = c.nvm_capacity_bytes;
  j["line_size_bytes"] = c.line_size_bytes;
  j["nvm_block_bytes"] = c.nvm_block_bytes;
  j["xpbuffer_capacity_bytes"] = c.xpbuffer_capacity_bytes;
  if (c.xpbuffer_fully_associative())
    j["xpbuffer_assoc"] = "full";
  else
    j["xpbuffer_assoc"] = c.xpbuffer_ways;
  j["xpbuffer_policy"] = c.xpbuffer_policy == ReplacementPolicy::Lru ? "lru" : "fifo";
  j["dram_read_ns"] = c.dram_read_ns;
  j["dram_write_ns"] = c.dram_write_ns;
  j["nvm_media_read_ns"] = c.nvm_media_read_ns;
  j["nvm_buffer_hit_read_ns"] = c.nvm_buffer_hit_read_ns;
  j["nvm_media_write_ns"] = c.nvm_media_write_ns;
  j["write_commit_overhead_ns"] = c.write_commit_overhead_ns;
  j["wpq_depth"] = c.wpq_depth;
  j["cache_assoc"] = c.cache_assoc;
  j["set_index_lo_bit"] = c.set_index_lo_bit;
  j["set_index_hi_bit"] = c.set_index_hi_bit;
  j["jitter_ns"] = c.jitter_ns;
  j["seed"] = c.seed;
  return j;
}

// Missing fields keep their defaults; unknown fields are rejected so typos
// don't silently fall back to a default. The result is validated.
inline SimConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  SimConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "mode") {
        auto s = value.get<std::string>();
        if (s == "MemoryMode")
          c.mode = MemoryModeKind::MemoryMode;
        else if (s == "AppDirect")
          c.mode = MemoryModeKind::AppDirect;
        else
          throw ConfigError("mode must be \"MemoryMode\" or \"AppDirect\", got \"" + s + "\"");
      } else if (key == "dram_capacity_bytes") {
        c.dram_capacity_bytes = value.get<std::uint64_t>();
      } else if (key == "nvm_capacity_bytes") {
        c.nvm_capacity_bytes = value.get<std::uint64_t>();
      } else if (key == "line_size_bytes") {
        c.line_size_bytes = value.get<std::uint64_t>();
      } else if (key == "nvm_block_bytes") {
        c.nvm_block_bytes = value.get<std::uint64_t>();
      } else if (key == "xpbuffer_capacity_bytes") {
        c.xpbuffer_capacity_bytes = value.get<std::uint64_t>();
      } else if (key == "xpbuffer_assoc") {
        if (value.is_string()) {
          if (value.get<std::string>() != "full")
            throw ConfigError("xpbuffer_assoc must be \"full\" or a way count");
          c.xpbuffer_ways = 0;
        } else {
          c.xpbuffer_ways = value.get<std::uint64_t>();
          if (c.xpbuffer_ways == 0) throw ConfigError("xpbuffer_assoc way count must be >= 1");
        }
      } else if (key == "xpbuffer_policy") {
        auto s = value.get<std::string>();
        if (s == "lru")
          c.xpbuffer_policy = ReplacementPolicy::Lru;
        else if (s == "fifo")
          c.xpbuffer_policy = ReplacementPolicy::Fifo;
        else
          throw ConfigError("xpbuffer_policy must be \"lru\" or \"fifo\"");
      } else if (key == "dram_read_ns") {
        c.dram_read_ns = value.get<Nanos>();
      } else if (key == "dram_write_ns") {
        c.dram_write_ns = value.get<Nanos>();
      } else if (key == "nvm_media_read_ns") {
        c.nvm_media_read_ns = value.get<Nanos>();
      } else if (key == "nvm_buffer_hit_read_ns") {
        c.nvm_buffer_hit_read_ns = value.get<Nanos>();
      } else if (key == "nvm_media_write_ns") {
        c.nvm_media_write_ns = value.get<Nanos>();
      } else if (key == "write_commit_overhead_ns") {
        c.write_commit_overhead_ns = value.get<Nanos>();
      } else if (key == "wpq_depth") {
        c.wpq_depth = value.get<std::uint64_t>();
      } else if (key == "cache_assoc") {
        c.cache_assoc = value.get<std::uint64_t>();
      } else if (key == "set_index_lo_bit") {
        c.set_index_lo_bit = value.get<unsigned>();
      } else if (key == "set_index_hi_bit") {
        c.set_index_hi_bit = value.get<unsigned>();
      } else if (key == "jitter_ns") {
        c.jitter_ns = value.get<Nanos>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else {
        throw ConfigError("unknown config field \"" + key + "\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }
  validate(c);
  return c;
}

// FNV-1a over the canonical JSON form. Stable across platforms and runs.
inline std::string config_hash(const SimConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace hmprobe
