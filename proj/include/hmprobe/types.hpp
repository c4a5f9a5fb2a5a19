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

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include "hmprobe/config.hpp"

namespace hmprobe {

enum class Label : std::uint8_t {
  DramCacheHit = 1u << 0,
  DramCacheMiss = 1u << 1,
  XpBufferHit = 1u << 2,
  XpBufferMiss = 1u << 3,
  WpqStall = 1u << 4,
};

inline constexpr Label kAllLabels[] = {Label::DramCacheHit, Label::DramCacheMiss,
                                       Label::XpBufferHit, Label::XpBufferMiss,
                                       Label::WpqStall};

inline std::string_view to_string(Label l) {
  switch (l) {
    case Label::DramCacheHit: return "DramCacheHit";
    case Label::DramCacheMiss: return "DramCacheMiss";
    case Label::XpBufferHit: return "XpBufferHit";
    case Label::XpBufferMiss: return "XpBufferMiss";
    case Label::WpqStall: return "WpqStall";
  }
  return "?";
}

// Small bitset of access labels.
class LabelSet {
 public:
  constexpr LabelSet() = default;
  constexpr LabelSet(std::initializer_list<Label> ls) {
    for (Label l : ls) insert(l);
  }

  constexpr void insert(Label l) { bits_ |= static_cast<std::uint8_t>(l); }
  constexpr bool contains(Label l) const { return (bits_ & static_cast<std::uint8_t>(l)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }

  bool operator==(const LabelSet&) const = default;

  // `|`-separated in declaration order; empty set is "".
  std::string str() const {
    std::string out;
    for (Label l : kAllLabels) {
      if (!contains(l)) continue;
      if (!out.empty()) out += '|';
      out += to_string(l);
    }
    return out;
  }

 private:
  std::uint8_t bits_ = 0;
};

struct AccessResult {
  Nanos latency_ns = 0;
  LabelSet labels;
};

enum class DdrCmd : std::uint8_t { ACT, PRE, RD, WR };
enum class Channel : std::uint8_t { DramChannel, NvmChannel };

inline std::string_view to_string(DdrCmd c) {
  switch (c) {
    case DdrCmd::ACT: return "ACT";
    case DdrCmd::PRE: return "PRE";
    case DdrCmd::RD: return "RD";
    case DdrCmd::WR: return "WR";
  }
  return "?";
}

inline std::string_view to_string(Channel c) {
  return c == Channel::DramChannel ? "DramChannel" : "NvmChannel";
}

/// One command observed on a DDR bus. `address` is a line-aligned byte
/// address in the addressed channel's own space.
struct DdrCommandRecord {
  Nanos time_ns = 0;
  DdrCmd cmd = DdrCmd::RD;
  Address address = 0;
  Channel channel = Channel::DramChannel;

  bool operator==(const DdrCommandRecord&) const = default;
};

enum class TagPlacement { TagInLine, SeparateTag, Unknown };

inline std::string_view to_string(TagPlacement t) {
  switch (t) {
    case TagPlacement::TagInLine: return "TagInLine";
    case TagPlacement::SeparateTag: return "SeparateTag";
    case TagPlacement::Unknown: return "Unknown";
  }
  return "?";
}

struct LabeledAccess {
  std::uint64_t access_index = 0;
  LabelSet labels;
};

}  // namespace hmprobe
