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

#include "spad/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spad/synthgen.hpp"

namespace spad {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double component_log_density(const DiagGmm& g, int k, std::span<const double> x) {
  double acc = std::log(g.weights[k]);
  for (int d = 0; d < g.dim; ++d) {
    const double var = g.variances[static_cast<std::size_t>(k) * g.dim + d];
    const double diff = x[d] - g.means[static_cast<std::size_t>(k) * g.dim + d];
    acc -= 0.5 * (kLog2Pi + std::log(var) + diff * diff / var);
  }
  return acc;
}

double sq_dist(const double* a, const double* b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

}  // namespace

// --- GMM --------------------------------------------------------------------------

double DiagGmm::log_density(std::span<const double> x) const {
  std::vector<double> parts(weights.size());
  for (int k = 0; k < components(); ++k) parts[k] = component_log_density(*this, k, x);
  return log_sum_exp(parts);
}

GmmFit fit_skin_gmm(std::span<const double> points, int dim, int components, CounterRng rng) {
  if (components <= 0) fail(ErrorKind::precondition, "fit_skin_gmm: K must be positive");
  if (dim <= 0 || points.size() % dim != 0)
    fail(ErrorKind::precondition, "fit_skin_gmm: points are not a multiple of dim");
  const std::size_t n = points.size() / dim;
  if (n < 10 * static_cast<std::size_t>(components))
    fail(ErrorKind::precondition, "fit_skin_gmm: need at least 10*K points");
  for (double v : points)
    if (!std::isfinite(v)) fail(ErrorKind::precondition, "fit_skin_gmm: non-finite input");

  const int K = components;
  GmmFit fit;
  DiagGmm& g = fit.gmm;
  g.dim = dim;
  g.weights.assign(K, 1.0 / K);
  g.means.assign(static_cast<std::size_t>(K) * dim, 0.0);
  g.variances.assign(static_cast<std::size_t>(K) * dim, 0.0);

  // Global variance as the starting covariance of every component.
  std::vector<double> mu(dim, 0.0), var(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) mu[d] += points[i * dim + d];
  for (double& m : mu) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) var[d] += std::pow(points[i * dim + d] - mu[d], 2);
  for (double& v : var) v = std::max(v / static_cast<double>(n), kGmmVarianceFloor);

  // Farthest-point seeding.
  std::vector<std::size_t> seeds{static_cast<std::size_t>(rng.below(n))};
  std::vector<double> nearest(n, kInf);
  while (static_cast<int>(seeds.size()) < K) {
    const double* last = &points[seeds.back() * dim];
    std::size_t best = 0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(&points[i * dim], last, dim));
      if (nearest[i] > nearest[best]) best = i;
    }
    seeds.push_back(best);
  }
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < dim; ++d) {
      g.means[static_cast<std::size_t>(k) * dim + d] = points[seeds[k] * dim + d];
      g.variances[static_cast<std::size_t>(k) * dim + d] = var[d];
    }

  std::vector<double> resp(n * K);
  std::vector<double> parts(K);
  double prev = -kInf;
  for (int iter = 0; iter < 200; ++iter) {
    // E step
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> x = points.subspan(i * dim, dim);
      for (int k = 0; k < K; ++k) parts[k] = component_log_density(g, k, x);
      const double lse = log_sum_exp(parts);
      ll += lse;
      for (int k = 0; k < K; ++k) resp[i * K + k] = std::exp(parts[k] - lse);
    }
    ll /= static_cast<double>(n);
    fit.ll_trace.push_back(ll);  // likelihood of the parameters entering this iteration
    if (iter > 0 && std::abs(ll - prev) < 1e-6) {
      fit.converged = true;
      break;
    }
    prev = ll;

    // M step
    for (int k = 0; k < K; ++k) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp[i * K + k];
      double* mk = &g.means[static_cast<std::size_t>(k) * dim];
      double* vk = &g.variances[static_cast<std::size_t>(k) * dim];
      if (nk <= 0.0) {
        // An emptied component keeps its mean and gets the global variance.
        g.weights[k] = 0.0;
        for (int d = 0; d < dim; ++d) vk[d] = var[d];
        continue;
      }
      g.weights[k] = nk / static_cast<double>(n);
      for (int d = 0; d < dim; ++d) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += resp[i * K + k] * points[i * dim + d];
        mk[d] = s / nk;
      }
      for (int d = 0; d < dim; ++d) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += resp[i * K + k] * std::pow(points[i * dim + d] - mk[d], 2);
        vk[d] = std::max(s / nk, kGmmVarianceFloor);
      }
    }
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    for (double& w : g.weights) w = std::max(w / wsum, 1e-300);
  }
  if (!fit.converged) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) ll += g.log_density(points.subspan(i * dim, dim));
    fit.ll_trace.push_back(ll / static_cast<double>(n));
  }
  return fit;
}

// --- likelihood threshold ---------------------------------------------------------

ThresholdChoice choose_likelihood_threshold(std::span<const double> positive_ll,
                                            std::span<const double> negative_ll) {
  if (positive_ll.empty() || negative_ll.empty())
    fail(ErrorKind::precondition, "likelihood threshold: both classes are required");
  std::vector<std::pair<double, int>> v;
  for (double x : positive_ll) v.emplace_back(x, 1);
  for (double x : negative_ll) v.emplace_back(x, 0);
  std::sort(v.begin(), v.end());
  if (v.front().first == v.back().first)
    fail(ErrorKind::threshold, "likelihood threshold: all log-likelihoods are equal");

  const double np = static_cast<double>(positive_ll.size());
  const double nn = static_cast<double>(negative_ll.size());
  // Below the cut everything is called non-skin.
  std::size_t pos_below = 0, neg_below = 0;
  ThresholdChoice best;
  best.balanced_accuracy = -1.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    (v[i].second ? pos_below : neg_below) += 1;
    if (v[i + 1].first == v[i].first) continue;
    const double tpr = (np - static_cast<double>(pos_below)) / np;
    const double tnr = static_cast<double>(neg_below) / nn;
    const double ba = 0.5 * (tpr + tnr);
    if (ba > best.balanced_accuracy) {
      best.balanced_accuracy = ba;
      best.threshold = v[i].first + (v[i + 1].first - v[i].first) / 2;
    }
  }
  best.degenerate_warning = best.balanced_accuracy <= 0.5;
  return best;
}

std::size_t retained_pixel_count(std::size_t pixels, double fraction) {
  const auto n = static_cast<std::size_t>(std::floor(static_cast<double>(pixels) * fraction));
  return std::max<std::size_t>(1, n);
}

// --- SMO ------------------------------------------------------------------------------

double KernelSvm::decision(std::span<const double> x) const {
  double f = -rho;
  for (std::size_t s = 0; s < coef.size(); ++s)
    f += coef[s] * std::exp(-gamma * sq_dist(&support[s * dim], x.data(), dim));
  return f;
}

KernelSvm train_svm(std::span<const double> features, int dim, std::span<const int> labels,
                    const SvmOptions& opt) {
  const std::size_t n = labels.size();
  if (dim <= 0 || features.size() != n * dim)
    fail(ErrorKind::precondition, "train_svm: feature matrix does not match labels");
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y != 1 && y != -1) fail(ErrorKind::precondition, "train_svm: labels must be +1/-1");
    (y > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) fail(ErrorKind::precondition, "train_svm: both classes are required");

  // Q_ij = y_i y_j K(x_i, x_j), held in full.
  std::vector<double> Q(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double k = std::exp(-opt.gamma * sq_dist(&features[i * dim], &features[j * dim], dim));
      Q[i * n + j] = Q[j * n + i] = labels[i] * labels[j] * k;
    }
  const double C = opt.c;
  constexpr double kTau = 1e-12;
  std::vector<double> alpha(n, 0.0), G(n, -1.0);
  auto up = [&](std::size_t t) { return labels[t] > 0 ? alpha[t] < C : alpha[t] > 0; };
  auto low = [&](std::size_t t) { return labels[t] > 0 ? alpha[t] > 0 : alpha[t] < C; };

  long iter = 0;
  for (;; ++iter) {
    if (iter >= opt.max_iterations)
      fail(ErrorKind::training, "train_svm: no convergence in " + std::to_string(opt.max_iterations) +
                                    " iterations");
    double gmax = -kInf;
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n; ++t)
      if (up(t) && -labels[t] * G[t] >= gmax) {
        gmax = -labels[t] * G[t];
        i = static_cast<std::ptrdiff_t>(t);
      }
    double gmax2 = -kInf, obj_min = kInf;
    std::ptrdiff_t j = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (!low(t)) continue;
      const double g = labels[t] * G[t];
      gmax2 = std::max(gmax2, g);
      if (i < 0) continue;
      const double grad_diff = gmax + g;
      if (grad_diff > 0) {
        double quad = Q[i * n + i] + Q[t * n + t] - 2.0 * labels[i] * labels[t] * Q[i * n + t];
        if (quad <= 0) quad = kTau;
        const double obj = -grad_diff * grad_diff / quad;
        if (obj <= obj_min) {
          obj_min = obj;
          j = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < opt.tolerance) break;

    const double* Qi = &Q[i * n];
    const double* Qj = &Q[j * n];
    const double ai = alpha[i], aj = alpha[j];
    if (labels[i] != labels[j]) {
      double quad = Qi[i] + Qj[j] + 2 * Qi[j];
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = Qi[i] + Qj[j] - 2 * Qi[j];
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - ai, daj = alpha[j] - aj;
    for (std::size_t t = 0; t < n; ++t) G[t] += Qi[t] * dai + Qj[t] * daj;
  }

  // rho: average over free vectors, else the midpoint of the feasible range.
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  std::size_t nfree = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = labels[t] * G[t];
    if (alpha[t] >= C) {
      if (labels[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (labels[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++nfree;
      sum_free += yg;
    }
  }
  KernelSvm svm;
  svm.dim = dim;
  svm.gamma = opt.gamma;
  svm.rho = nfree > 0 ? sum_free / static_cast<double>(nfree) : (ub + lb) / 2;
  svm.iterations = iter;
  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] > 0) {
      svm.support.insert(svm.support.end(), features.begin() + t * dim, features.begin() + (t + 1) * dim);
      svm.coef.push_back(alpha[t] * labels[t]);
    }
  return svm;
}

// --- Platt scaling ---------------------------------------------------------------------

double PlattScale::operator()(double f) const {
  const double z = a * f + b;
  return z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

PlattScale fit_platt(std::span<const double> dec, std::span<const int> labels) {
  if (dec.size() != labels.size() || dec.empty())
    fail(ErrorKind::precondition, "fit_platt: decisions and labels differ in size");
  double prior1 = 0, prior0 = 0;
  for (int y : labels) (y > 0 ? prior1 : prior0) += 1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(labels.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = labels[i] > 0 ? hi : lo;

  auto objective = [&](double A, double B) {
    double f = 0.0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const double z = dec[i] * A + B;
      f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1) * z + std::log1p(std::exp(z));
    }
    return f;
  };
  double A = 0.0, B = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(A, B);
  for (int it = 0; it < 100; ++it) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0, g1 = 0, g2 = 0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const double z = dec[i] * A + B;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    while (step >= 1e-10) {
      const double nA = A + step * dA, nB = B + step * dB;
      const double nf = objective(nA, nB);
      if (nf < fval + 1e-4 * step * gd) {
        A = nA;
        B = nB;
        fval = nf;
        break;
      }
      step /= 2;
    }
    if (step < 1e-10) break;
  }
  return {A, B};
}

// --- scoring ------------------------------------------------------------------------------

double SkinPixelModel::skin_probability(std::span<const double> x) const {
  return prob_scale(svm.decision(x));
}

double score_pixel_svm(const SkinPixelModel& m, const Tensor& x) {
  const int dim = static_cast<int>(m.specs.size());
  if (x.channels != dim) fail(ErrorKind::domain, "score_pixel_svm: channel count mismatch");
  const std::size_t plane = static_cast<std::size_t>(x.size) * x.size;
  std::vector<double> px(dim);
  double sum = 0.0;
  for (std::size_t k = 0; k < plane; ++k) {
    for (int c = 0; c < dim; ++c) px[c] = x.values[c * plane + k];
    sum += m.skin_probability(px);
  }
  return sum / static_cast<double>(plane);
}

double score_pixel_svm(const SkinPixelModel& m, const SpectralStack& stack, double epsilon) {
  const DiffStack ds = build_diff_stack(stack, m.specs, epsilon);
  Tensor t;
  t.channels = static_cast<int>(m.specs.size());
  const Grid& g0 = ds.maps.front();
  if (g0.width != g0.height) fail(ErrorKind::domain, "score_pixel_svm: square frames expected");
  t.size = g0.width;
  for (const auto& g : ds.maps) t.values.insert(t.values.end(), g.values.begin(), g.values.end());
  return score_pixel_svm(m, t);
}

std::vector<DiffSpec> default_svm_specs(const std::vector<Wavelength>& wavelengths) {
  if (wavelengths.empty()) fail(ErrorKind::domain, "default_svm_specs: no wavelengths");
  std::vector<Wavelength> picked;
  for (int target : {935, 1060, 1300, 1550}) {
    Wavelength best = wavelengths.front();
    for (Wavelength w : wavelengths)
      if (std::abs(w - target) < std::abs(best - target)) best = w;
    if (std::find(picked.begin(), picked.end(), best) == picked.end()) picked.push_back(best);
  }
  std::vector<DiffSpec> out;
  for (std::size_t i = 0; i < picked.size(); ++i)
    for (std::size_t j = i + 1; j < picked.size(); ++j) out.push_back({picked[i], picked[j]});
  return out;
}

// --- end-to-end training -------------------------------------------------------------------

namespace {

// Keep at most `cap` rows of a row-major matrix, chosen by a seeded shuffle.
void cap_rows(std::vector<double>& rows, int dim, std::size_t cap, CounterRng rng) {
  const std::size_t n = rows.size() / dim;
  if (n <= cap) return;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx, rng);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<double> out;
  out.reserve(cap * dim);
  for (std::size_t i : idx) out.insert(out.end(), rows.begin() + i * dim, rows.begin() + (i + 1) * dim);
  rows.swap(out);
}

}  // namespace

TrainedScorer train_pixel_svm_model(const ModelConfig& cfg, const std::vector<DiffSpec>& specs,
                                    const std::vector<PresentationInputs>& train,
                                    PixelSvmReport* report) {
  cfg.validate();
  if (specs.empty()) fail(ErrorKind::precondition, "pixel svm: empty channel list");
  const int dim = static_cast<int>(specs.size());
  const int S = cfg.input_size;
  const std::size_t plane = static_cast<std::size_t>(S) * S;
  const std::vector<std::uint8_t> mask = face_mask(S, S);
  const CounterRng root = CounterRng(cfg.seed).split("pixel_svm");

  std::vector<const PresentationInputs*> bonafide, impostor;
  for (const auto& in : train) {
    if (!in.presentation) fail(ErrorKind::precondition, "pixel svm: inputs need presentations");
    for (const auto& t : in.frames)
      if (t.channels != dim || t.size != S)
        fail(ErrorKind::precondition, "pixel svm: inputs do not match channels/input size");
    if (in.presentation->label == Label::bonafide)
      bonafide.push_back(&in);
    else if (in.presentation->group == AttackGroup::impersonation)
      impostor.push_back(&in);
  }
  if (bonafide.empty() || impostor.empty())
    fail(ErrorKind::precondition, "pixel svm: train split needs bonafide and impersonation examples");

  auto face_pixels = [&](const std::vector<const PresentationInputs*>& set) {
    std::vector<double> rows;
    for (const auto* in : set)
      for (const auto& t : in->frames)
        for (std::size_t k = 0; k < plane; ++k)
          if (mask[k])
            for (int c = 0; c < dim; ++c) rows.push_back(t.values[c * plane + k]);
    return rows;
  };
  constexpr std::size_t kLikelihoodCap = 20000;
  std::vector<double> skin = face_pixels(bonafide);
  std::vector<double> other = face_pixels(impostor);
  cap_rows(skin, dim, kLikelihoodCap, root.split("gmm_rows"));
  cap_rows(other, dim, kLikelihoodCap, root.split("neg_rows"));

  SkinPixelModel model;
  model.specs = specs;
  model.gmm = fit_skin_gmm(skin, dim, cfg.gmm_components, root.split("gmm")).gmm;

  auto lls = [&](const std::vector<double>& rows) {
    std::vector<double> out(rows.size() / dim);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = model.gmm.log_density(std::span<const double>(rows).subspan(i * dim, dim));
    return out;
  };
  const ThresholdChoice th = choose_likelihood_threshold(lls(skin), lls(other));
  model.likelihood_threshold = th.threshold;

  // 1% of the pixels of every training image, labelled by the likelihood test.
  const std::size_t keep = retained_pixel_count(plane, cfg.pixel_fraction);
  std::vector<double> feats;
  std::vector<int> labels;
  std::vector<std::size_t> idx(plane);
  std::vector<double> px(dim);
  for (const auto* set : {&bonafide, &impostor})
    for (const auto* in : *set)
      for (std::size_t f = 0; f < in->frames.size(); ++f) {
        const auto& t = in->frames[f];
        CounterRng r = root.split(in->presentation->id).split(static_cast<std::uint64_t>(f));
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t s = 0; s < keep; ++s) std::swap(idx[s], idx[s + r.below(plane - s)]);
        for (std::size_t s = 0; s < keep; ++s) {
          for (int c = 0; c < dim; ++c) px[c] = t.values[c * plane + idx[s]];
          feats.insert(feats.end(), px.begin(), px.end());
          labels.push_back(model.gmm.log_density(px) >= th.threshold ? 1 : -1);
        }
      }

  // Cap the pixel set, then hold out 10% for calibration.
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  CounterRng sr = root.split("svm_rows");
  shuffle(order, sr);
  if (order.size() > cfg.max_svm_samples) order.resize(cfg.max_svm_samples);
  const std::size_t n_cal = std::max<std::size_t>(1, order.size() / 10);
  std::vector<double> fit_x, cal_x;
  std::vector<int> fit_y, cal_y;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t i = order[r];
    auto& X = r < n_cal ? cal_x : fit_x;
    auto& Y = r < n_cal ? cal_y : fit_y;
    X.insert(X.end(), feats.begin() + i * dim, feats.begin() + (i + 1) * dim);
    Y.push_back(labels[i]);
  }
  model.svm = train_svm(fit_x, dim, fit_y, {.gamma = cfg.svm_gamma, .c = cfg.svm_c});
  std::vector<double> cal_dec(cal_y.size());
  for (std::size_t i = 0; i < cal_y.size(); ++i)
    cal_dec[i] = model.svm.decision(std::span<const double>(cal_x).subspan(i * dim, dim));
  model.prob_scale = fit_platt(cal_dec, cal_y);

  if (report) {
    report->threshold = th;
    report->gmm_pixels = skin.size() / dim;
    report->svm_pixels = fit_y.size();
    report->skin_pixels = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < fit_y.size(); ++i)
      correct += (model.svm.decision(std::span<const double>(fit_x).subspan(i * dim, dim)) >= 0 ? 1 : -1) == fit_y[i];
    report->svm_train_accuracy = fit_y.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(fit_y.size());
  }
  return pack_pixel_svm(model, cfg);
}

// --- packing -------------------------------------------------------------------------

TrainedScorer pack_pixel_svm(const SkinPixelModel& m, const ModelConfig& cfg) {
  TrainedScorer t;
  t.kind = ModelKind::pixel_svm;
  t.specs = m.specs;
  t.config = cfg;
  t.provenance.seed = cfg.seed;
  auto& p = t.parameters;
  auto put = [&](const std::vector<double>& v) { p.insert(p.end(), v.begin(), v.end()); };
  put(m.gmm.weights);
  put(m.gmm.means);
  put(m.gmm.variances);
  p.push_back(m.likelihood_threshold);
  put(m.svm.support);
  put(m.svm.coef);
  p.push_back(m.svm.rho);
  p.push_back(m.svm.gamma);
  p.push_back(m.prob_scale.a);
  p.push_back(m.prob_scale.b);
  for (double& v : p) v = static_cast<double>(static_cast<float>(v));
  t.extra = {{"components", m.gmm.components()},
             {"dim", m.gmm.dim},
             {"support_vectors", m.svm.coef.size()}};
  return t;
}

SkinPixelModel unpack_pixel_svm(const TrainedScorer& t) {
  if (t.kind != ModelKind::pixel_svm) fail(ErrorKind::precondition, "not a pixel svm model");
  SkinPixelModel m;
  std::size_t K = 0, D = 0, N = 0;
  try {
    K = t.extra.at("components").get<std::size_t>();
    D = t.extra.at("dim").get<std::size_t>();
    N = t.extra.at("support_vectors").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("pixel svm metadata: ") + e.what());
  }
  if (D != t.specs.size()) fail(ErrorKind::format, "pixel svm: dimension does not match channels");
  const std::size_t need = K + 2 * K * D + 1 + N * D + N + 4;
  if (t.parameters.size() != need) fail(ErrorKind::format, "pixel svm: parameter count mismatch");
  std::size_t at = 0;
  auto take = [&](std::size_t n) {
    std::vector<double> v(t.parameters.begin() + at, t.parameters.begin() + at + n);
    at += n;
    return v;
  };
  m.specs = t.specs;
  m.gmm.dim = static_cast<int>(D);
  m.gmm.weights = take(K);
  m.gmm.means = take(K * D);
  m.gmm.variances = take(K * D);
  m.likelihood_threshold = take(1)[0];
  m.svm.dim = static_cast<int>(D);
  m.svm.support = take(N * D);
  m.svm.coef = take(N);
  m.svm.rho = take(1)[0];
  m.svm.gamma = take(1)[0];
  m.prob_scale.a = take(1)[0];
  m.prob_scale.b = take(1)[0];
  return m;
}

}  // namespace spad
