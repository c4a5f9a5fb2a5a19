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
#include <array>
#include <bit>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "hmprobe/config.hpp"
#include "hmprobe/errors.hpp"
#include "hmprobe/types.hpp"

namespace hmprobe {

struct WpqStats {
  std::uint64_t enqueued = 0;
  std::uint64_t drained = 0;
  std::uint64_t resident = 0;
};

/// Deterministic event model of a DRAM cache in front of an NVM DIMM with an
/// on-DIMM block buffer and a memory-controller write pending queue.
///
/// Every access is issued by a stream. A stream has its own clock that
/// advances by each access's latency (closed loop) or by `idle()`. Accesses
/// are processed in call order; an access whose stream clock is behind the
/// last processed issue time is issued at that time instead, so callers that
/// interleave streams should always advance the stream with the smallest
/// clock.
///
/// State is sparse: only touched cache sets are materialized, so the default
/// 16 GiB / 128 GiB geometry fits in a small process.
class Simulator {
 public:
  explicit Simulator(SimConfig config) : cfg_(std::move(config)), rng_(cfg_.seed) {
    validate(cfg_);
    line_shift_ = static_cast<unsigned>(std::countr_zero(cfg_.line_size_bytes));
    block_shift_ = static_cast<unsigned>(std::countr_zero(cfg_.nvm_block_bytes));
    std::uint64_t entries = cfg_.xpbuffer_entries();
    xp_ways_ = cfg_.xpbuffer_fully_associative() ? entries : cfg_.xpbuffer_ways;
    xpbuffer_.resize(entries / xp_ways_);
  }

  const SimConfig& config() const { return cfg_; }

  AccessResult read(StreamId stream, Address addr) {
    check_range(addr);
    Nanos t = issue_time(stream);
    Address line = addr & ~(cfg_.line_size_bytes - 1);
    AccessResult r;
    if (cfg_.mode == MemoryModeKind::AppDirect) {
      r.latency_ns = nvm_read(line, t, r.labels);
    } else {
      r.latency_ns = cached_read(addr, line, t, r.labels);
    }
    r.latency_ns += jitter();
    finish(stream, t, r);
    return r;
  }

  AccessResult write(StreamId stream, Address addr) {
    check_range(addr);
    Nanos t = issue_time(stream);
    drain_until(t);
    return enqueue_write(stream, addr, t);
  }

  // Issues a write only if the write pending queue has a free entry at the
  // stream's issue time; otherwise nothing happens and nullopt is returned.
  std::optional<AccessResult> try_write(StreamId stream, Address addr) {
    check_range(addr);
    Nanos t = issue_time(stream);
    drain_until(t);
    if (wpq_.size() >= cfg_.wpq_depth) return std::nullopt;
    return enqueue_write(stream, addr, t);
  }

  void idle(StreamId stream, Nanos ns) { streams_[stream] += ns; }
  Nanos stream_time(StreamId stream) const {
    auto it = streams_.find(stream);
    return it == streams_.end() ? 0 : it->second;
  }
  // Latest issue time processed so far.
  Nanos now() const { return last_issue_; }

  std::uint64_t line_size() const { return cfg_.line_size_bytes; }
  Address address_limit() const { return cfg_.nvm_capacity_bytes; }
  std::string describe() const {
    return "hybridmem_sim(" + std::string(to_string(cfg_.mode)) + ")";
  }
  std::string fingerprint() const { return config_hash(cfg_); }

  // All commands emitted so far, ordered by time (stable for equal times).
  const std::vector<DdrCommandRecord>& trace() const {
    if (!trace_sorted_) {
      std::stable_sort(trace_.begin(), trace_.end(),
                       [](const auto& a, const auto& b) { return a.time_ns < b.time_ns; });
      trace_sorted_ = true;
    }
    return trace_;
  }

  std::vector<LabeledAccess> labels() const {
    std::vector<LabeledAccess> out;
    out.reserve(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) out.push_back({i, labels_[i]});
    return out;
  }

  std::size_t materialized_sets() const { return cache_.size(); }
  std::size_t xpbuffer_occupancy() const {
    std::size_t n = 0;
    for (const auto& set : xpbuffer_) n += set.size();
    return n;
  }
  WpqStats wpq_stats() const { return {enqueued_, drained_, wpq_.size()}; }

  // Drops recorded commands and labels; cache, buffer and queue state stay.
  void clear_records() {
    trace_.clear();
    labels_.clear();
    trace_sorted_ = true;
  }

 private:
  struct Way {
    std::uint64_t line_id;
    std::uint32_t slot;
  };
  static constexpr unsigned kRowShift = 13;  // 8 KiB rows

  void check_range(Address addr) const {
    if (addr >= cfg_.nvm_capacity_bytes)
      throw AddressOutOfRange("address " + to_hex(addr) + " beyond NVM capacity " +
                              to_hex(cfg_.nvm_capacity_bytes));
  }

  Nanos issue_time(StreamId stream) {
    Nanos& clock = streams_[stream];
    clock = std::max(clock, last_issue_);
    last_issue_ = clock;
    return clock;
  }

  void finish(StreamId stream, Nanos t, const AccessResult& r) {
    streams_[stream] = t + r.latency_ns;
    labels_.push_back(r.labels);
  }

  Nanos jitter() {
    if (cfg_.jitter_ns == 0) return 0;
    return std::uniform_int_distribution<Nanos>(-cfg_.jitter_ns, cfg_.jitter_ns)(rng_);
  }

  // Read through the on-DIMM buffer. Installs the whole block on a miss.
  Nanos nvm_read(Address line, Nanos t, LabelSet& labels) {
    emit(DdrCmd::RD, Channel::NvmChannel, line, t);
    std::uint64_t block = line >> block_shift_;
    auto& set = xpbuffer_[block % xpbuffer_.size()];
    auto it = std::find(set.begin(), set.end(), block);
    if (it != set.end()) {
      if (cfg_.xpbuffer_policy == ReplacementPolicy::Lru) std::rotate(set.begin(), it, it + 1);
      labels.insert(Label::XpBufferHit);
      return cfg_.nvm_buffer_hit_read_ns;
    }
    // Front is the most recent insertion (FIFO) or use (LRU).
    set.insert(set.begin(), block);
    if (set.size() > xp_ways_) set.pop_back();
    labels.insert(Label::XpBufferMiss);
    return cfg_.nvm_media_read_ns;
  }

  Nanos cached_read(Address addr, Address line, Nanos t, LabelSet& labels) {
    std::uint64_t set_index = (addr >> cfg_.set_index_lo_bit) & (cfg_.cache_sets() - 1);
    std::uint64_t line_id = line >> line_shift_;
    auto& ways = cache_[set_index];
    auto it = std::find_if(ways.begin(), ways.end(),
                           [&](const Way& w) { return w.line_id == line_id; });
    if (it != ways.end()) {
      Address slot = slot_address(set_index, it->slot);
      std::rotate(ways.begin(), it, it + 1);
      emit(DdrCmd::RD, Channel::DramChannel, slot, t);
      labels.insert(Label::DramCacheHit);
      return cfg_.dram_read_ns;
    }
    // Miss: tag read of the victim slot, NVM fetch, then the fill write.
    // The victim is overwritten without a writeback (clean eviction).
    std::uint32_t victim;
    if (ways.size() < cfg_.cache_assoc) {
      victim = static_cast<std::uint32_t>(ways.size());
    } else {
      victim = ways.back().slot;
      ways.pop_back();
    }
    ways.insert(ways.begin(), Way{line_id, victim});
    Address slot = slot_address(set_index, victim);
    emit(DdrCmd::RD, Channel::DramChannel, slot, t);
    labels.insert(Label::DramCacheMiss);
    Nanos latency = cfg_.dram_read_ns + nvm_read(line, t + cfg_.dram_read_ns, labels);
    emit(DdrCmd::WR, Channel::DramChannel, slot, t + latency);
    return latency;
  }

  Address slot_address(std::uint64_t set_index, std::uint32_t way) const {
    return (set_index * cfg_.cache_assoc + way) << line_shift_;
  }

  void drain_until(Nanos t) {
    while (!wpq_.empty() && wpq_.front() <= t) {
      wpq_.pop_front();
      ++drained_;
    }
  }

  // Entries drain one at a time, each taking the media write latency after
  // the later of its enqueue time and the previous entry's deadline.
  AccessResult enqueue_write(StreamId stream, Address addr, Nanos t) {
    AccessResult r;
    Nanos enqueue_at = t;
    if (wpq_.size() >= cfg_.wpq_depth) {
      enqueue_at = wpq_.front();
      wpq_.pop_front();
      ++drained_;
      r.labels.insert(Label::WpqStall);
    }
    last_deadline_ = std::max(enqueue_at, last_deadline_) + cfg_.nvm_media_write_ns;
    wpq_.push_back(last_deadline_);
    ++enqueued_;
    emit(DdrCmd::WR, Channel::NvmChannel, addr & ~(cfg_.line_size_bytes - 1), enqueue_at);
    r.latency_ns = (enqueue_at - t) + cfg_.write_commit_overhead_ns + jitter();
    finish(stream, t, r);
    return r;
  }

  void emit(DdrCmd cmd, Channel ch, Address addr, Nanos t) {
    auto& open = open_row_[static_cast<std::size_t>(ch)];
    std::uint64_t row = addr >> kRowShift;
    if (!open || *open != row) {
      if (open) push({t, DdrCmd::PRE, *open << kRowShift, ch});
      push({t, DdrCmd::ACT, row << kRowShift, ch});
      open = row;
    }
    push({t, cmd, addr, ch});
  }

  void push(const DdrCommandRecord& rec) {
    if (!trace_.empty() && rec.time_ns < trace_.back().time_ns) trace_sorted_ = false;
    trace_.push_back(rec);
  }

  SimConfig cfg_;
  std::mt19937_64 rng_;
  unsigned line_shift_ = 6;
  unsigned block_shift_ = 8;
  std::uint64_t xp_ways_ = 0;

  std::map<StreamId, Nanos> streams_;
  Nanos last_issue_ = 0;

  std::unordered_map<std::uint64_t, std::vector<Way>> cache_;  // MRU first
  std::vector<std::vector<std::uint64_t>> xpbuffer_;

  std::deque<Nanos> wpq_;  // drain deadlines, oldest first
  Nanos last_deadline_ = 0;
  std::uint64_t enqueued_ = 0;
  std::uint64_t drained_ = 0;

  std::array<std::optional<std::uint64_t>, 2> open_row_{};
  mutable std::vector<DdrCommandRecord> trace_;
  mutable bool trace_sorted_ = true;
  std::vector<LabelSet> labels_;
};

}  // namespace hmprobe
