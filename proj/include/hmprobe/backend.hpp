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

#include <concepts>
#include <cstdint>
#include <optional>
#include <string>

#include "hmprobe/config.hpp"
#include "hmprobe/types.hpp"

namespace hmprobe {

// What the chain and probe layers need from something that serves memory
// accesses. The simulator models it; a hardware backend would time real
// loads and stores behind the same surface.
template <class B>
concept MemoryBackend = requires(B& b, const B& cb, StreamId s, Address a, Nanos ns) {
  { b.read(s, a) } -> std::same_as<AccessResult>;
  { b.write(s, a) } -> std::same_as<AccessResult>;
  { b.try_write(s, a) } -> std::same_as<std::optional<AccessResult>>;
  b.idle(s, ns);
  { cb.stream_time(s) } -> std::convertible_to<Nanos>;
  { cb.line_size() } -> std::convertible_to<std::uint64_t>;
  { cb.address_limit() } -> std::convertible_to<Address>;
  { cb.describe() } -> std::convertible_to<std::string>;
  { cb.fingerprint() } -> std::convertible_to<std::string>;
};

}  // namespace hmprobe
