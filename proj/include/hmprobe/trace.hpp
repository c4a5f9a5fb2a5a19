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
#include <deque>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hmprobe/chain.hpp"
#include "hmprobe/errors.hpp"
#include "hmprobe/types.hpp"

namespace hmprobe {

inline constexpr const char* kTraceHeader = "time_ns,cmd,channel,address_hex";

inline void write_trace_csv(std::ostream& os, const std::vector<DdrCommandRecord>& records) {
  os << kTraceHeader << '\n';
  for (const auto& r : records)
    os << r.time_ns << ',' << to_string(r.cmd) << ',' << to_string(r.channel) << ','
       << to_hex(r.address) << '\n';
}

/// Reads a command trace. The header line is optional; blank lines are
/// skipped. Timestamps must never decrease.
inline std::vector<DdrCommandRecord> parse_trace(std::istream& is) {
  std::vector<DdrCommandRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    if (out.empty() && line == kTraceHeader) continue;
    auto f = detail::split(line, ',');
    if (f.size() != 4) throw ParseError("expected 4 fields (" + std::string(kTraceHeader) + ")", line_no);
    DdrCommandRecord r;
    r.time_ns = detail::parse_int<Nanos>(f[0], line_no);
    if (f[1] == "ACT") r.cmd = DdrCmd::ACT;
    else if (f[1] == "PRE") r.cmd = DdrCmd::PRE;
    else if (f[1] == "RD") r.cmd = DdrCmd::RD;
    else if (f[1] == "WR") r.cmd = DdrCmd::WR;
    else throw ParseError("unknown command \"" + f[1] + "\"", line_no);
    if (f[2] == "DramChannel") r.channel = Channel::DramChannel;
    else if (f[2] == "NvmChannel") r.channel = Channel::NvmChannel;
    else throw ParseError("unknown channel \"" + f[2] + "\"", line_no);
    r.address = detail::parse_hex(f[3], line_no);
    if (!out.empty() && r.time_ns < out.back().time_ns)
      throw TimeRegression("timestamp " + std::to_string(r.time_ns) + " is earlier than " +
                               std::to_string(out.back().time_ns),
                           line_no);
    out.push_back(r);
  }
  return out;
}

enum class Verdict { Hit, Miss, Ambiguous };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Hit: return "Hit";
    case Verdict::Miss: return "Miss";
    case Verdict::Ambiguous: return "Ambiguous";
  }
  return "?";
}

/// One inferred access. `commands` indexes the input records. A Hit window
/// holds exactly one DRAM RD of its line; `companion_reads` counts DRAM RDs
/// to other lines within the window either side of it (a separate tag
/// fetch would show up there). `nvm_reads` counts NVM-channel RDs inside a
/// Miss window, as corroborating evidence of the fill.
struct AccessClassification {
  Address line_address = 0;
  Nanos start_ns = 0;
  Nanos end_ns = 0;
  Verdict verdict = Verdict::Ambiguous;
  std::vector<std::size_t> commands;
  std::uint32_t companion_reads = 0;
  std::uint32_t nvm_reads = 0;
  bool opened_by_read = true;
};

/// Groups DRAM-channel RD/WR commands per line inside `window_ns` of the
/// opening RD. Lone RD: Hit. RD then WR to the same line: Miss. Anything
/// else (a WR with no open RD, a second RD before the window closes):
/// Ambiguous. ACT/PRE are ignored. Single forward pass; only commands
/// inside the current window are buffered.
inline std::vector<AccessClassification> classify_accesses(const std::vector<DdrCommandRecord>& records,
                                                           Nanos window_ns = 1000) {
  if (window_ns < 0) throw PreconditionError("window_ns must be >= 0");
  std::vector<AccessClassification> out;
  std::unordered_map<Address, AccessClassification> open;  // by line
  struct RecentRead {
    Nanos time;
    Address line;
  };
  std::deque<RecentRead> recent_reads;  // DRAM RDs within the last window
  std::deque<Nanos> recent_nvm_reads;

  auto close_expired = [&](Nanos now) {
    for (auto it = open.begin(); it != open.end();) {
      if (now > it->second.start_ns + window_ns) {
        auto& c = it->second;
        c.verdict = Verdict::Hit;
        c.end_ns = c.start_ns;
        out.push_back(std::move(c));
        it = open.erase(it);
      } else {
        ++it;
      }
    }
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.cmd != DdrCmd::RD && r.cmd != DdrCmd::WR) continue;
    while (!recent_reads.empty() && recent_reads.front().time < r.time_ns - window_ns)
      recent_reads.pop_front();
    while (!recent_nvm_reads.empty() && recent_nvm_reads.front() < r.time_ns - window_ns)
      recent_nvm_reads.pop_front();
    if (r.channel == Channel::NvmChannel) {
      if (r.cmd == DdrCmd::RD) recent_nvm_reads.push_back(r.time_ns);
      continue;
    }
    close_expired(r.time_ns);

    if (r.cmd == DdrCmd::RD) {
      AccessClassification c;
      c.line_address = r.address;
      c.start_ns = c.end_ns = r.time_ns;
      c.commands = {i};
      for (const auto& rr : recent_reads) {
        if (rr.line == r.address) continue;
        ++c.companion_reads;
        auto other = open.find(rr.line);
        if (other != open.end()) ++other->second.companion_reads;
      }
      auto prev = open.find(r.address);
      if (prev != open.end()) {
        prev->second.verdict = Verdict::Ambiguous;
        out.push_back(std::move(prev->second));
        open.erase(prev);
      }
      open.emplace(r.address, std::move(c));
      recent_reads.push_back({r.time_ns, r.address});
    } else {
      auto it = open.find(r.address);
      if (it == open.end()) {
        AccessClassification c;
        c.line_address = r.address;
        c.start_ns = c.end_ns = r.time_ns;
        c.commands = {i};
        c.verdict = Verdict::Ambiguous;
        c.opened_by_read = false;
        out.push_back(std::move(c));
        continue;
      }
      auto& c = it->second;
      c.commands.push_back(i);
      c.end_ns = r.time_ns;
      c.verdict = Verdict::Miss;
      for (Nanos t : recent_nvm_reads)
        if (t >= c.start_ns) ++c.nvm_reads;
      out.push_back(std::move(c));
      open.erase(it);
    }
  }
  for (auto& [line, c] : open) {
    c.verdict = Verdict::Hit;
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.commands.front() < b.commands.front();
  });
  return out;
}

inline void write_classifications_csv(std::ostream& os, const std::vector<AccessClassification>& cs) {
  os << "line_address_hex,start_ns,end_ns,verdict\n";
  for (const auto& c : cs)
    os << to_hex(c.line_address) << ',' << c.start_ns << ',' << c.end_ns << ',' << to_string(c.verdict)
       << '\n';
}

struct TagPlacementThresholds {
  std::size_t min_accesses = 10;
  double single_read_fraction = 0.95;
  double paired_read_fraction = 0.9;
};

/// TagInLine when at least 95% of RD-opened windows are clean single-RD
/// hits and no hit has a companion RD to another line. SeparateTag when
/// hits systematically come with such a companion. Unknown otherwise.
inline TagPlacement infer_tag_placement(const std::vector<AccessClassification>& cs,
                                        const TagPlacementThresholds& th = {}) {
  if (cs.size() < th.min_accesses)
    throw TooFewAccesses("tag placement needs at least " + std::to_string(th.min_accesses) +
                         " classified accesses, got " + std::to_string(cs.size()));
  std::size_t hits = 0, paired = 0, messy_reads = 0;
  for (const auto& c : cs) {
    if (c.verdict == Verdict::Hit) {
      ++hits;
      if (c.companion_reads > 0) ++paired;
    } else if (c.verdict == Verdict::Ambiguous && c.opened_by_read) {
      ++messy_reads;
    }
  }
  if (hits == 0) return TagPlacement::Unknown;
  double single = static_cast<double>(hits - paired) / static_cast<double>(hits + messy_reads);
  if (paired == 0 && single >= th.single_read_fraction) return TagPlacement::TagInLine;
  if (static_cast<double>(paired) >= th.paired_read_fraction * static_cast<double>(hits))
    return TagPlacement::SeparateTag;
  return TagPlacement::Unknown;
}

}  // namespace hmprobe
