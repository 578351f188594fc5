/* Copyright 2026 The crowd-suppress Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crowd {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A box that cannot serve the requested role (e.g. zero-width proposal).
class InvalidGeometry : public Error {
 public:
  using Error::Error;
};

// Malformed numeric input: non-finite values, out-of-range parameters.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Caller violated a size or shape contract between two arguments.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A metric whose value is undefined for the given data (e.g. no ground truth).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

// A ground-truth set holds more real entries than there are prediction slots.
class GtSetOverflow : public Error {
 public:
  GtSetOverflow(std::size_t excess, const std::string& what)
      : Error(what), excess_(excess) {}
  std::size_t excess() const noexcept { return excess_; }

 private:
  std::size_t excess_;
};

// Scene generation could not satisfy a placement constraint.
class PlacementError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(what), line_(line) {}
  // 1-based line number; 0 when the failure is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace crowd
