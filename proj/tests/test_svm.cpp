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

#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "spad/svm.hpp"

using namespace spad;

namespace {

std::vector<double> two_clusters(int n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z(0.0, 0.05);
  std::vector<double> pts;
  for (int i = 0; i < n; ++i) {
    const double c = i % 2 ? 1.0 : -1.0;
    pts.push_back(c + z(g));
    pts.push_back(c + z(g));
  }
  return pts;
}

double accuracy(const KernelSvm& m, const std::vector<double>& x, const std::vector<int>& y) {
  int ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    ok += (m.decision({&x[i * m.dim], static_cast<std::size_t>(m.dim)}) >= 0 ? 1 : -1) == y[i];
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("gmm: constant data collapses to the variance floor") {
  const std::vector<double> pts(40, 0.3);
  const GmmFit f = fit_skin_gmm(pts, 1, 1, CounterRng(1));
  CHECK(f.gmm.means[0] == doctest::Approx(0.3));
  CHECK(f.gmm.variances[0] == kGmmVarianceFloor);
}

TEST_CASE("gmm: recovers two separated clusters with monotone likelihood") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pts = two_clusters(400, seed);
    const GmmFit f = fit_skin_gmm(pts, 2, 2, CounterRng(seed));
    REQUIRE(f.ll_trace.size() >= 2);
    for (std::size_t i = 1; i < f.ll_trace.size(); ++i) CHECK(f.ll_trace[i] >= f.ll_trace[i - 1] - 1e-9);
    std::vector<double> centers = {f.gmm.means[0], f.gmm.means[2]};
    std::sort(centers.begin(), centers.end());
    CHECK(std::abs(centers[0] + 1.0) <= 0.02);
    CHECK(std::abs(centers[1] - 1.0) <= 0.02);
    CHECK(std::abs(f.gmm.means[1] - f.gmm.means[0]) <= 0.05);
  }
}

TEST_CASE("likelihood threshold") {
  const std::vector<double> pos = {5.0, 6.0, 7.0}, neg = {1.0, 2.0};
  const ThresholdChoice t = choose_likelihood_threshold(pos, neg);
  CHECK(t.balanced_accuracy == 1.0);
  CHECK(t.threshold == 3.5);
  CHECK_FALSE(t.degenerate_warning);
  const std::vector<double> same = {1.0, 2.0};
  CHECK(choose_likelihood_threshold(same, same).degenerate_warning);
  const std::vector<double> flat = {1.0, 1.0};
  CHECK_THROWS_AS(choose_likelihood_threshold(flat, flat), Error);
}

TEST_CASE("retained pixel count") {
  CHECK(retained_pixel_count(128 * 128, 0.01) == 163);
  CHECK(retained_pixel_count(50, 0.01) == 1);
}

TEST_CASE("svm: separable toy set, label symmetry, soft margin") {
  std::vector<double> x;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    const double t = i / 19.0;
    x.push_back(t);
    x.push_back(1.0 - t + (i % 2 ? 0.6 : -0.6));
    y.push_back(i % 2 ? 1 : -1);
  }
  SvmOptions opt;
  opt.gamma = 1.0;
  opt.c = 10.0;
  const KernelSvm m = train_svm(x, 2, y, opt);
  CHECK(accuracy(m, x, y) == 1.0);

  std::vector<int> flipped(y);
  for (int& v : flipped) v = -v;
  const KernelSvm f = train_svm(x, 2, flipped, opt);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = m.decision({&x[2 * i], 2}), b = f.decision({&x[2 * i], 2});
    CHECK(b * a < 0.0);
    CHECK(b == doctest::Approx(-a).epsilon(1e-2));
  }

  std::vector<double> cx = x;
  std::vector<int> cy = y;
  cx.insert(cx.end(), {x[0], x[1]});
  cy.push_back(-y[0]);
  const KernelSvm soft = train_svm(cx, 2, cy, opt);
  CHECK(soft.iterations < opt.max_iterations);
  CHECK(accuracy(soft, cx, cy) < 1.0);
}

TEST_CASE("platt scaling is monotone in the decision value") {
  const std::vector<double> dec = {-2.0, -1.0, -0.5, 0.4, 1.2, 2.0};
  const std::vector<int> lab = {-1, -1, 1, -1, 1, 1};
  const PlattScale p = fit_platt(dec, lab);
  CHECK(p(2.0) > p(-2.0));
  CHECK(p(0.0) > 0.0);
  CHECK(p(0.0) < 1.0);
}

TEST_CASE("pixel svm scores are mean skin probabilities") {
  SkinPixelModel m;
  m.specs = {{940, 1450}};
  m.svm.dim = 1;
  m.svm.gamma = 50.0;
  m.svm.support = {0.0};
  m.svm.coef = {1.0};
  m.svm.rho = 0.0;
  m.prob_scale = {-100.0, 50.0};
  Tensor all{1, 2, {0.0, 0.0, 0.0, 0.0}};
  CHECK(score_pixel_svm(m, all) == doctest::Approx(1.0));
  Tensor half{1, 2, {0.0, 0.0, 5.0, 5.0}};
  CHECK(score_pixel_svm(m, half) == doctest::Approx(0.5));
}

TEST_CASE("default svm specs pick nearest bands as unordered pairs") {
  const auto specs = default_svm_specs({940, 1050, 1200, 1300, 1450, 1550, 1650});
  CHECK(specs.size() == 6);
  std::set<Wavelength> used;
  for (const auto& d : specs) {
    CHECK(d.s1 < d.s2);
    used.insert(d.s1);
    used.insert(d.s2);
  }
  CHECK(used == std::set<Wavelength>{940, 1050, 1300, 1550});
}

TEST_CASE("pixel svm packing round trip") {
  SkinPixelModel m;
  m.specs = {{940, 1450}, {1050, 1550}};
  m.gmm.dim = 2;
  m.gmm.weights = {0.25, 0.75};
  m.gmm.means = {0.1, 0.2, 0.3, 0.4};
  m.gmm.variances = {0.5, 0.5, 0.25, 0.25};
  m.likelihood_threshold = -1.5;
  m.svm.dim = 2;
  m.svm.gamma = 0.1;
  m.svm.support = {0.5, 0.25, -0.5, 0.75};
  m.svm.coef = {1.0, -1.0};
  m.svm.rho = 0.125;
  m.prob_scale = {-2.0, 0.5};
  const TrainedScorer t = pack_pixel_svm(m, default_config(ModelKind::pixel_svm));
  const SkinPixelModel back = unpack_pixel_svm(decode_model(encode_model(t)));
  auto as_float = [](std::vector<double> v) {
    for (double& x : v) x = static_cast<float>(x);
    return v;
  };
  CHECK(back.gmm.means == as_float(m.gmm.means));
  CHECK(back.svm.support == m.svm.support);
  CHECK(back.svm.coef == m.svm.coef);
  CHECK(back.svm.rho == m.svm.rho);
  CHECK(back.prob_scale.a == m.prob_scale.a);
  CHECK(back.likelihood_threshold == m.likelihood_threshold);
}
