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

#include "spad/swirdiff.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "spad/kernels.hpp"

namespace spad {

std::string to_string(const DiffSpec& d) {
  return std::to_string(d.s1) + "-" + std::to_string(d.s2);
}

DiffSpec parse_diff_spec(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  const auto dash = text.find('-');
  auto num = [&](std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size() || v <= 0)
      fail(ErrorKind::domain, "bad channel '" + std::string(text) + "' (expected s1-s2)");
    return v;
  };
  if (dash == std::string_view::npos)
    fail(ErrorKind::domain, "bad channel '" + std::string(text) + "' (expected s1-s2)");
  DiffSpec d{num(text.substr(0, dash)), num(text.substr(dash + 1))};
  if (d.s1 == d.s2) fail(ErrorKind::domain, "channel " + to_string(d) + " repeats a wavelength");
  return d;
}

std::vector<DiffSpec> parse_diff_specs(std::string_view text) {
  std::vector<DiffSpec> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_diff_spec(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::string join_diff_specs(const std::vector<DiffSpec>& specs) {
  std::string s;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i) s += ',';
    s += to_string(specs[i]);
  }
  return s;
}

std::vector<DiffSpec> enumerate_ordered_pairs(const std::vector<Wavelength>& wavelengths) {
  if (std::set<Wavelength>(wavelengths.begin(), wavelengths.end()).size() != wavelengths.size())
    fail(ErrorKind::domain, "duplicate wavelengths in pair enumeration");
  std::vector<DiffSpec> out;
  out.reserve(wavelengths.size() * (wavelengths.size() > 0 ? wavelengths.size() - 1 : 0));
  for (Wavelength a : wavelengths)
    for (Wavelength b : wavelengths)
      if (a != b) out.push_back({a, b});
  return out;
}

Grid normalized_diff(const Grid& a, const Grid& b, double epsilon) {
  if (!a.same_shape(b)) fail(ErrorKind::domain, "normalized_diff: image shapes differ");
  if (!(epsilon >= 0.0)) fail(ErrorKind::domain, "normalized_diff: epsilon must be >= 0");
  Grid out(a.width, a.height);
  kernels::omp::normalized_diff(a.values, b.values, out.values, epsilon);
  return out;
}

Grid normalized_diff(const BandImage& a, const BandImage& b, double epsilon) {
  return normalized_diff(a.pixels, b.pixels, epsilon);
}

DiffStack build_diff_stack(const SpectralStack& stack, const std::vector<DiffSpec>& specs,
                           double epsilon) {
  DiffStack out;
  out.specs = specs;
  out.epsilon = epsilon;
  out.maps.reserve(specs.size());
  for (const auto& d : specs) {
    for (Wavelength wl : {d.s1, d.s2})
      if (!stack.has(wl))
        fail(ErrorKind::domain, "wavelength " + std::to_string(wl) + " nm required by channel " +
                                    to_string(d) + " is missing");
    out.maps.push_back(normalized_diff(stack.band(d.s1), stack.band(d.s2), epsilon));
  }
  return out;
}

}  // namespace spad
