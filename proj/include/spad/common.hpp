// Copyright 2026 The spad Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spad {

/// Error categories surfaced to callers. The CLI maps `io` to exit code 2
/// and every other kind to exit code 1.
enum class ErrorKind {
  format,
  io,
  unsupported_format,
  domain,
  manifest,
  precondition,
  training,
  config,
  threshold,
  partial_result,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

/// Wavelength in nanometres. Kept integral: every band in use is named by a
/// whole number of nm, and integer keys make map lookups exact.
using Wavelength = int;

/// Row-major H x W grid of reals.
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const noexcept { return values.size(); }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  bool same_shape(const Grid& o) const noexcept {
    return width == o.width && height == o.height;
  }
  double mean() const;
};

/// Bilinear resampling with pixel-centre alignment. Identity when the size is
/// unchanged; an exact 2x2 box average when halving.
Grid resize_bilinear(const Grid& src, int width, int height);

/// 64-bit FNV-1a, used for ids, manifest fingerprints and config hashes.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t v);

}  // namespace spad
