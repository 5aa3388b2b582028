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

#include <string>
#include <string_view>
#include <vector>

#include "spad/dataset.hpp"

namespace spad {

inline constexpr double kDefaultEpsilon = 1e-4;

/// Ordered wavelength pair. (a, b) and (b, a) are distinct features.
struct DiffSpec {
  Wavelength s1 = 0;
  Wavelength s2 = 0;

  friend bool operator==(const DiffSpec&, const DiffSpec&) = default;
  friend auto operator<=>(const DiffSpec&, const DiffSpec&) = default;
};

/// "1550-1200"
std::string to_string(const DiffSpec& d);
DiffSpec parse_diff_spec(std::string_view text);
/// Comma-separated list, e.g. "1550-1200,1450-1200".
std::vector<DiffSpec> parse_diff_specs(std::string_view text);
std::string join_diff_specs(const std::vector<DiffSpec>& specs);

/// All ordered pairs of distinct wavelengths, n(n-1) of them, ordered by
/// (index of s1, index of s2) in the given list.
std::vector<DiffSpec> enumerate_ordered_pairs(const std::vector<Wavelength>& wavelengths);

/// Per-pixel (I1 - I2) / (I1 + I2 + eps). eps = 0 is accepted; a zero
/// denominator then yields 0.
Grid normalized_diff(const BandImage& a, const BandImage& b, double epsilon = kDefaultEpsilon);
Grid normalized_diff(const Grid& a, const Grid& b, double epsilon = kDefaultEpsilon);

struct DiffStack {
  std::vector<DiffSpec> specs;
  std::vector<Grid> maps;
  double epsilon = kDefaultEpsilon;
};

DiffStack build_diff_stack(const SpectralStack& stack, const std::vector<DiffSpec>& specs,
                           double epsilon = kDefaultEpsilon);

}  // namespace spad
