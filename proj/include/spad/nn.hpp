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

// Minimal CPU building blocks for the convolutional scorers: a flat parameter
// vector described by a layout, stateless layer functions with explicit
// backward passes, and Adam. Networks never own parameters, so one network
// description can be evaluated against many parameter/gradient buffers at once.

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "spad/kernels.hpp"
#include "spad/rng.hpp"

namespace spad::nn {

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  std::vector<int> shape;
};

class ParamLayout {
 public:
  std::size_t add(const std::string& name, std::vector<int> shape);
  std::size_t total() const noexcept { return total_; }
  const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }

 private:
  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
};

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline constexpr double kProbClamp = 1e-7;

/// Binary cross-entropy with the probability clamped to [1e-7, 1 - 1e-7].
double bce(double p, double label);
/// d bce(sigmoid(z)) / dz, consistent with the clamping above.
double bce_logit_grad(double p, double label);

void relu_inplace(std::span<double> x);
/// dy *= (y > 0)
void relu_backward(std::span<const double> y, std::span<double> dy);

void avgpool2_forward(int channels, int h, int w, std::span<const double> x, std::span<double> y);
void avgpool2_backward(int channels, int h, int w, std::span<const double> dy,
                       std::span<double> dx);

/// y[o] = b[o] + sum_i W[o][i] x[i]
void linear_forward(int in, int out, std::span<const double> w, std::span<const double> b,
                    std::span<const double> x, std::span<double> y);
void linear_backward(int in, int out, std::span<const double> w, std::span<const double> x,
                     std::span<const double> dy, std::span<double> dw, std::span<double> db,
                     std::span<double> dx);

void he_uniform(std::span<double> w, int fan_in, CounterRng& rng);
void xavier_uniform(std::span<double> w, int fan_in, int fan_out, CounterRng& rng);

/// Multimodal first-layer adaptation: each kernel's channel slices are
/// averaged and the mean is replicated over `out_channels`, scaled by
/// in_channels / out_channels so the response to an input replicated across
/// channels is unchanged. Layout [kernels][channels][area].
std::vector<double> adapt_first_layer(std::span<const double> filters, int kernels,
                                      int in_channels, int area, int out_channels);

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t n, AdamOptions opt) : opt_(opt), m_(n, 0.0), v_(n, 0.0) {}
  void step(std::span<double> params, std::span<const double> grad);
  long steps() const noexcept { return t_; }

 private:
  AdamOptions opt_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace spad::nn
