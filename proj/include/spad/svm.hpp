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

// Pixel-level skin baseline: a diagonal GMM over per-pixel difference vectors
// labels pixels as skin-like, an RBF SVM learns that labelling, and an image
// is scored by the mean calibrated P(skin) over its pixels.

#pragma once

#include <span>
#include <vector>

#include "spad/models.hpp"
#include "spad/rng.hpp"

namespace spad {

/// Diagonal-covariance Gaussian mixture. means/variances are K x dim.
struct DiagGmm {
  int dim = 0;
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  int components() const noexcept { return static_cast<int>(weights.size()); }
  double log_density(std::span<const double> x) const;
};

struct GmmFit {
  DiagGmm gmm;
  /// Mean per-point log-likelihood after every EM iteration.
  std::vector<double> ll_trace;
  bool converged = false;
};

inline constexpr double kGmmVarianceFloor = 1e-6;

/// EM on `points` (n x dim, row-major) until the mean log-likelihood changes
/// by less than 1e-6 or 200 iterations. Farthest-point initialisation seeded
/// by `rng`.
GmmFit fit_skin_gmm(std::span<const double> points, int dim, int components, CounterRng rng);

struct ThresholdChoice {
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
  bool degenerate_warning = false;  // best balanced accuracy is 0.5
};

/// Threshold t on log-likelihood maximizing the balanced accuracy of
/// {ll >= t -> skin}. Candidates are midpoints of adjacent distinct values;
/// ties keep the lowest t.
ThresholdChoice choose_likelihood_threshold(std::span<const double> positive_ll,
                                            std::span<const double> negative_ll);

/// max(1, floor(fraction * pixels))
std::size_t retained_pixel_count(std::size_t pixels, double fraction);

struct SvmOptions {
  double gamma = 0.1;
  double c = 1.0;
  double tolerance = 1e-3;
  long max_iterations = 100000;
};

struct KernelSvm {
  int dim = 0;
  double gamma = 0.1;
  std::vector<double> support;  // n_sv x dim
  std::vector<double> coef;     // alpha_i * y_i
  double rho = 0.0;
  long iterations = 0;

  double decision(std::span<const double> x) const;
};

/// Soft-margin RBF SVM by SMO with second-order working-set selection.
/// labels are +1 / -1.
KernelSvm train_svm(std::span<const double> features, int dim, std::span<const int> labels,
                    const SvmOptions& opt = {});

/// P(y = +1 | f) = 1 / (1 + exp(a f + b)).
struct PlattScale {
  double a = -1.0;
  double b = 0.0;
  double operator()(double f) const;
};
PlattScale fit_platt(std::span<const double> decisions, std::span<const int> labels);

struct SkinPixelModel {
  std::vector<DiffSpec> specs;
  DiagGmm gmm;
  double likelihood_threshold = 0.0;
  KernelSvm svm;
  PlattScale prob_scale;

  double skin_probability(std::span<const double> x) const;
};

/// Mean calibrated P(skin) over every pixel of a channels x size x size tensor.
double score_pixel_svm(const SkinPixelModel& m, const Tensor& x);
/// Same, building the difference channels from a frame at native size.
double score_pixel_svm(const SkinPixelModel& m, const SpectralStack& stack,
                       double epsilon = kDefaultEpsilon);

/// Nearest configured wavelengths to 935, 1060, 1300 and 1550 nm, as the six
/// unordered differences (earlier band first).
std::vector<DiffSpec> default_svm_specs(const std::vector<Wavelength>& wavelengths);

struct PixelSvmReport {
  ThresholdChoice threshold;
  std::size_t gmm_pixels = 0;
  std::size_t svm_pixels = 0;
  std::size_t skin_pixels = 0;
  double svm_train_accuracy = 0.0;  // on the pixels the SVM was fitted to
};

/// Full baseline training on prepared train inputs (bonafide and
/// impersonation presentations are used; obfuscation attacks are skipped).
TrainedScorer train_pixel_svm_model(const ModelConfig& cfg, const std::vector<DiffSpec>& specs,
                                    const std::vector<PresentationInputs>& train,
                                    PixelSvmReport* report = nullptr);

TrainedScorer pack_pixel_svm(const SkinPixelModel& m, const ModelConfig& cfg);
SkinPixelModel unpack_pixel_svm(const TrainedScorer& t);

}  // namespace spad
