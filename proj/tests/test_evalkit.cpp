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
#include "json.hpp"
#include "spad/evalkit.hpp"
#include "test_util.hpp"

using namespace spad;

namespace {

ScoreSet make_set(const std::vector<double>& attacks, const std::vector<double>& bonafide,
                  AttackType type = AttackType::print) {
  ScoreSet s;
  s.split = "dev";
  s.protocol = "grand_test";
  int n = 0;
  for (double v : attacks) s.entries.push_back({"a" + std::to_string(n++), v, Label::attack, type});
  for (double v : bonafide) s.entries.push_back({"b" + std::to_string(n++), v, Label::bonafide, AttackType::none});
  return s;
}

// `accepted` of `attacks` attacks score 1, the rest 0; `rejected` of `bonafide`
// bonafide score 0, the rest 1; evaluated at tau 0.5.
RateTriple counted(int accepted, int attacks, int rejected, int bonafide) {
  std::vector<double> a(attacks, 0.0), b(bonafide, 1.0);
  std::fill(a.begin(), a.begin() + accepted, 1.0);
  std::fill(b.begin(), b.begin() + rejected, 0.0);
  return compute_rates(make_set(a, b), 0.5);
}

// Recount over the sorted score list for a given tau.
std::pair<double, double> recount(const ScoreSet& s, double tau) {
  int aa = 0, na = 0, br = 0, nb = 0;
  for (const auto& e : s.entries) {
    if (e.label == Label::attack) {
      ++na;
      aa += e.score >= tau;
    } else {
      ++nb;
      br += e.score < tau;
    }
  }
  return {100.0 * aa / na, 100.0 * br / nb};
}

}  // namespace

TEST_CASE("rates by direct counting") {
  const auto r = compute_rates(make_set({0.6, 0.4, 0.3, 0.2}, {0.7, 0.8, 0.4, 0.9}), 0.5);
  CHECK(r.apcer == 25.0);
  CHECK(r.bpcer == 25.0);
  CHECK(r.acer == 25.0);
  const auto all = compute_rates(make_set({0.6, 0.4}, {0.7, 0.1}), 0.0);
  CHECK(all.apcer == 100.0);
  CHECK(all.bpcer == 0.0);
  CHECK(all.acer == 50.0);
}

TEST_CASE("acer from fixed error counts") {
  CHECK(counted(0, 10, 1, 10).acer == 5.0);
  CHECK(counted(0, 50, 47, 500).acer == 4.7);
  const auto r = counted(3, 50, 36, 500);
  CHECK(r.apcer == 6.0);
  CHECK(r.bpcer == 7.2);
  CHECK(r.acer == 6.6);
  CHECK(acer_from_rates(10.0, 0.0) == 5.0);
}

TEST_CASE("single-class sets raise a partial result") {
  try {
    compute_rates(make_set({0.1, 0.2}, {}), 0.5);
    FAIL("expected PartialResultError");
  } catch (const PartialResultError& e) {
    CHECK(e.apcer.has_value());
    CHECK_FALSE(e.bpcer.has_value());
  }
}

TEST_CASE("threshold at dev bpcer") {
  std::vector<double> bf(100);
  for (int i = 0; i < 100; ++i) bf[i] = 0.5 + i * 0.001;
  bf[0] = 0.30;
  bf[1] = 0.40;
  const auto t = threshold_at_bpcer(make_set({0.1}, bf), 1.0);
  CHECK(t.tau == doctest::Approx(0.35));
  CHECK(t.bpcer == 1.0);
  CHECK_FALSE(t.granularity_warning);

  const auto z = threshold_at_bpcer(make_set({0.1}, bf), 0.0);
  CHECK(z.tau == 0.30);
  CHECK(z.bpcer == 0.0);

  const auto small = threshold_at_bpcer(make_set({0.1}, {0.5, 0.6, 0.7, 0.8, 0.9, 0.55, 0.65, 0.75, 0.85, 0.95}));
  CHECK(small.granularity_warning);
  CHECK(small.bpcer == 0.0);
  CHECK(small.tau == 0.5);
}

TEST_CASE("eer") {
  CHECK(eer(make_set({0.0, 0.1}, {0.9, 1.0})).eer == 0.0);
  const auto e = eer(make_set({0.6, 0.2}, {0.8, 0.4}));
  CHECK(e.eer == 50.0);
  CHECK(e.tau == doctest::Approx(0.5));
  ScoreSet swapped = make_set({-0.8, -0.4}, {-0.6, -0.2});
  CHECK(eer(swapped).eer == e.eer);
}

TEST_CASE("roc sweep agrees with a brute-force recount") {
  std::mt19937_64 g(4);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a, b;
    const int n = 4 + rep % 16;
    for (int i = 0; i < n; ++i) (i % 2 ? a : b).push_back(static_cast<double>(g() % 10) / 10.0);
    const ScoreSet s = make_set(a, b);
    std::set<double> distinct;
    for (const auto& e : s.entries) distinct.insert(e.score);
    const auto roc = roc_points(s);
    CHECK(roc.size() == distinct.size() + 1);
    for (std::size_t i = 0; i < roc.size(); ++i) {
      const auto [ap, bp] = recount(s, roc[i].tau);
      CHECK(roc[i].apcer == doctest::Approx(ap));
      CHECK(roc[i].bpcer == doctest::Approx(bp));
      if (i > 0) {
        CHECK(roc[i].tau > roc[i - 1].tau);
        CHECK(roc[i].apcer <= roc[i - 1].apcer);
        CHECK(roc[i].bpcer >= roc[i - 1].bpcer);
      }
    }
    // EER oracle: minimum |APCER - BPCER| over the same sweep, lowest tau on ties.
    double best_gap = 1e300, best = 0.0;
    for (const auto& p : roc) {
      const double gap = std::abs(p.apcer - p.bpcer);
      if (gap < best_gap - 1e-12) {
        best_gap = gap;
        best = (p.apcer + p.bpcer) / 2.0;
      }
    }
    CHECK(eer(s).eer == doctest::Approx(best));
  }
}

TEST_CASE("per-type breakdown") {
  ScoreSet s = make_set({0.9, 0.8}, {0.7, 0.6}, AttackType::tattoo);
  const auto glasses = make_set({0.1, 0.2}, {}, AttackType::glasses);
  for (auto e : glasses.entries) {
    e.id = "g" + e.id;
    s.entries.push_back(e);
  }
  const auto m = apcer_by_type(s, 0.5);
  CHECK(m.size() == 2);
  CHECK(m.at(AttackType::tattoo).apcer == 100.0);
  CHECK(m.at(AttackType::glasses).apcer == 0.0);
  const auto single = apcer_by_type(make_set({0.9, 0.1}, {0.7}), 0.5);
  CHECK(single.size() == 1);
  CHECK(single.at(AttackType::print).apcer == compute_rates(make_set({0.9, 0.1}, {0.7}), 0.5).apcer);
}

TEST_CASE("report files are complete and reproducible") {
  const ScoreSet dev = make_set({0.1, 0.2, 0.3}, {0.7, 0.8, 0.9});
  ScoreSet test = dev;
  test.split = "test";
  spad::test::TempDir a("report"), b("report");
  const Report r = write_report(dev, test, a.path(), {"PixBiS-mini", "dSWIR x2"});
  write_report(dev, test, b.path(), {"PixBiS-mini", "dSWIR x2"});
  CHECK(r.test.acer == 0.0);
  CHECK(r.test.bpcer == 0.0);
  for (const char* f : {"metrics.json", "roc.csv", "roc.svg", "breakdown.csv", "summary.txt"}) {
    CHECK(std::filesystem::exists(a.path() / f));
    CHECK(spad::test::slurp(a.path() / f) == spad::test::slurp(b.path() / f));
  }
  const auto m = nlohmann::json::parse(spad::test::slurp(a.path() / "metrics.json"));
  for (const char* k : {"protocol", "tau", "dev_bpcer_target", "test_apcer", "test_bpcer", "test_acer", "test_eer"})
    CHECK(m.contains(k));
  CHECK(spad::test::slurp(a.path() / "roc.csv").rfind("tau,apcer,bpcer\n", 0) == 0);
  CHECK(spad::test::slurp(a.path() / "breakdown.csv").rfind("attack_type,count,apcer\n", 0) == 0);
}
