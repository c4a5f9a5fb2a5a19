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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hmprobe {

// Root of every error thrown by the library. Callers that only care about
// "something in the data or config was wrong" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class AddressOutOfRange : public Error {
 public:
  using Error::Error;
};

// Violated operation precondition (bad argument count, wrong sweep kind...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class BadStride : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class CountTooSmall : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class DuplicateAddress : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class TooFewSamples : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class TooFewAccesses : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

// A latency series that collapsed to a single level. `mean_ns` is the one
// level the caller should use as the latency.
class Unimodal : public Error {
 public:
  Unimodal(const std::string& what, double mean_ns)
      : Error(what), mean_ns_(mean_ns) {}
  double mean_ns() const noexcept { return mean_ns_; }

 private:
  double mean_ns_;
};

class NoPeriod : public Error {
 public:
  using Error::Error;
};

class NoKnee : public Error {
 public:
  using Error::Error;
};

// Malformed input text. `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TimeRegression : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace hmprobe
