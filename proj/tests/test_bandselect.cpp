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

#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "spad/bandselect.hpp"
#include "test_util.hpp"

using namespace spad;

namespace {

SpectralStack one_pixel(std::map<Wavelength, double> values) {
  SpectralStack s;
  for (auto [wl, v] : values) s.bands.emplace(wl, BandImage{wl, Grid(1, 1, v)});
  return s;
}

const DiffSpec s1{940, 1050}, s2{940, 1200}, s3{940, 1300};

int mask_of(const std::vector<DiffSpec>& subset, const std::vector<DiffSpec>& all) {
  int m = 0;
  for (const auto& d : subset) m |= 1 << (std::find(all.begin(), all.end(), d) - all.begin());
  return m;
}

}  // namespace

TEST_CASE("ranking: hand-worked three-example case") {
  const std::vector<SpectralStack> ex = {one_pixel({{940, 0.2}, {1450, 0.8}}),
                                         one_pixel({{940, 0.25}, {1450, 0.75}}),
                                         one_pixel({{940, 0.5}, {1450, 0.5}})};
  const std::vector<Label> lab = {Label::bonafide, Label::bonafide, Label::attack};
  const RankedDiffs r = rank_differences(ex, lab, {940, 1450}, 0.0);
  REQUIRE(r.entries.size() == 2);
  CHECK(r.k_bf == 2);
  CHECK(r.k_a == 4);
  for (const auto& e : r.entries) {
    CHECK(e.intra == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(e.inter == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(e.ratio == doctest::Approx(5.5).epsilon(1e-12));
    CHECK_FALSE(e.degenerate);
  }
  CHECK(r.entries[0].spec == DiffSpec{940, 1450});
  CHECK(r.entries[1].spec == DiffSpec{1450, 940});
}

TEST_CASE("ranking: identical examples are degenerate") {
  const auto e = one_pixel({{940, 0.3}, {1200, 0.6}, {1450, 0.1}});
  const RankedDiffs r =
      rank_differences({e, e, e}, {Label::bonafide, Label::bonafide, Label::attack}, {940, 1200, 1450});
  CHECK(r.entries.size() == 6);
  for (const auto& x : r.entries) CHECK(x.degenerate);
}

TEST_CASE("ranking: preconditions") {
  const auto e = one_pixel({{940, 0.3}, {1200, 0.6}});
  CHECK_THROWS_AS(rank_differences({e, e}, {Label::bonafide, Label::attack}, {940, 1200}), Error);
  CHECK_THROWS_AS(rank_differences({e, e}, {Label::bonafide, Label::bonafide}, {940, 1200}), Error);
}

TEST_CASE("ranking: matches the brute-force oracle and is scale invariant at eps 0") {
  std::mt19937_64 g(99);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  const std::vector<Wavelength> wl = {940, 1200, 1450};
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 3 + rep % 3;
    std::vector<SpectralStack> ex(n);
    std::vector<Label> lab(n, Label::attack);
    lab[0] = lab[1] = Label::bonafide;
    for (auto& s : ex)
      for (Wavelength w : wl) {
        Grid px(2, 2);
        for (double& v : px.values) v = u(g);
        s.bands.emplace(w, BandImage{w, px});
      }
    const RankedDiffs r = rank_differences(ex, lab, wl, 1e-4);
    const auto oracle = spad::test::brute_force_ratios(ex, lab, wl, 1e-4);
    REQUIRE(r.entries.size() == oracle.size());
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      CHECK(std::abs(r.entries[i].ratio - oracle.at(r.entries[i].spec)) <= 1e-9);
      if (i > 0) CHECK(r.entries[i - 1].ratio >= r.entries[i].ratio);
    }

    auto scaled = ex;
    for (auto& s : scaled)
      for (auto& [_, b] : s.bands)
        for (double& v : b.pixels.values) v *= 0.5;
    CHECK(rank_differences(scaled, lab, wl, 0.0).specs() == rank_differences(ex, lab, wl, 0.0).specs());
  }
}

TEST_CASE("ranking csv round trip") {
  RankedDiffs r;
  r.entries = {{{1450, 940}, std::numeric_limits<double>::infinity(), 0.0, 1.0, true},
               {{940, 1450}, 2.5, 0.2, 0.5, false}};
  spad::test::TempDir tmp("rank");
  write_ranking_csv(r, tmp.path() / "r.csv");
  CHECK(spad::test::slurp(tmp.path() / "r.csv") ==
        "rank,s1,s2,ratio,degenerate\n1,1450,940,inf,1\n2,940,1450,2.5,0\n");
  const RankedDiffs back = read_ranking_csv(tmp.path() / "r.csv");
  CHECK(back.specs() == r.specs());
  CHECK(std::isinf(back.entries[0].ratio));
  CHECK(back.entries[0].degenerate);
}

TEST_CASE("sffs: hand-traced backward removal") {
  const std::map<std::set<DiffSpec>, double> table = {
      {{s1}, 10.0}, {{s1, s2}, 5.0}, {{s2}, 4.0}, {{s2, s3}, 7.0}};
  const Criterion J = [&](const std::vector<DiffSpec>& s) {
    auto it = table.find({s.begin(), s.end()});
    return it == table.end() ? 100.0 : it->second;
  };
  const SelectionResult r = sffs_select({s1, s2, s3}, J);
  CHECK(r.selected == std::vector<DiffSpec>{s2});
  CHECK(r.best_error == 4.0);
  std::vector<std::vector<DiffSpec>> accepted;
  for (const auto& t : r.trace)
    if (t.accepted) accepted.push_back(t.subset);
  CHECK(accepted == std::vector<std::vector<DiffSpec>>{{s1}, {s1, s2}, {s2}});
  CHECK(r.trace.back().subset == std::vector<DiffSpec>{s2, s3});
  CHECK_FALSE(r.trace.back().accepted);
}

TEST_CASE("sffs: flat and strictly decreasing criteria") {
  const SelectionResult flat = sffs_select({s1, s2, s3}, [](const auto&) { return 100.0; });
  CHECK(flat.selected.empty());
  CHECK(flat.best_error == 100.0);

  const Criterion chain = [](const std::vector<DiffSpec>& s) {
    return s.size() == 3 ? 1.0 : s.size() == 2 && s[0] == s1 && s[1] == s2 ? 2.0
           : s.size() == 1 && s[0] == s1                                     ? 3.0
                                                                             : 50.0;
  };
  const SelectionResult full = sffs_select({s1, s2, s3}, chain);
  CHECK(full.selected == std::vector<DiffSpec>{s1, s2, s3});
  CHECK(full.best_error == 1.0);
}

TEST_CASE("sffs: failures score 100 and the lower bound stops the walk") {
  const Criterion J = [](const std::vector<DiffSpec>& s) -> double {
    if (s.size() == 1 && s[0] == s1) fail(ErrorKind::training, "boom");
    return s.back() == s2 ? 0.0 : 30.0;
  };
  SffsOptions opt;
  opt.lower_bound = 0.0;
  const SelectionResult r = sffs_select({s1, s2, s3}, J, opt);
  CHECK(r.trace.front().failed);
  CHECK(r.trace.front().value == 100.0);
  CHECK(r.selected == std::vector<DiffSpec>{s2});
  CHECK(r.stopped_at_bound);
  CHECK(std::none_of(r.trace.begin(), r.trace.end(),
                     [](const TraceEntry& t) { return std::find(t.subset.begin(), t.subset.end(), s3) != t.subset.end(); }));
}

TEST_CASE("sffs: trace soundness on random lookup tables") {
  std::mt19937_64 g(7);
  std::vector<DiffSpec> feats;
  for (Wavelength w : {1050, 1200, 1300, 1450, 1550, 1650}) feats.push_back({940, w});
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> table(64);
    for (double& v : table) v = static_cast<double>(g() % 1000) / 10.0;
    const Criterion J = [&](const std::vector<DiffSpec>& s) { return table[mask_of(s, feats)]; };
    const SelectionResult r = sffs_select(feats, J);
    double lo = 100.0;
    for (const auto& t : r.trace) lo = std::min(lo, t.value);
    CHECK(r.best_error == lo);
    if (!r.selected.empty()) CHECK(J(r.selected) == r.best_error);
    double prev = 100.0;
    for (const auto& t : r.trace)
      if (t.accepted) {
        CHECK(t.value < prev);
        prev = t.value;
      }
  }
}

TEST_CASE("cached criterion") {
  int calls = 0;
  CachedCriterion J([&](const std::vector<DiffSpec>& s) { return static_cast<double>(++calls + s.size()); }, "t");
  const double a = J({s1, s2});
  CHECK(J({s1, s2}) == a);
  CHECK(J({s2, s1}) != a);
  CHECK(J.hits() == 1);
  CHECK(J.misses() == 2);
}

TEST_CASE("selection json round trip") {
  SelectionResult r;
  r.selected = {s2, s1};
  r.best_error = 2.5;
  r.trace.push_back({{s2}, 4.0, false, "", true, true});
  spad::test::TempDir tmp("sel");
  write_selection_json(r, "grand_test", "pixbis", tmp.path() / "selection.json");
  CHECK(read_selection(tmp.path() / "selection.json") == r.selected);
  const auto j = nlohmann::json::parse(spad::test::slurp(tmp.path() / "selection.json"));
  CHECK(j.at("best_acer_percent").get<double>() == 2.5);
  CHECK(j.at("protocol") == "grand_test");
  CHECK(j.at("trace").size() == 1);
}
