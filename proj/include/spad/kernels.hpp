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

// Data-parallel inner loops. Every kernel has a plain serial version, kept as
// the reference the tests compare against, and an OpenMP version. The OpenMP
// versions partition work so that each output element is produced by exactly
// one thread with the same accumulation order as the serial code; results are
// therefore bit-identical for any thread count.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spad::kernels {

/// Shape of a 2-D convolution with 'same' zero padding and stride 1.
struct ConvShape {
  int in_channels = 0;
  int out_channels = 0;
  int height = 0;
  int width = 0;
  int kernel = 3;  // odd
};

namespace serial {

/// out[i] = (a[i] - b[i]) / (a[i] + b[i] + eps); 0 where the denominator is 0.
void normalized_diff(std::span<const double> a, std::span<const double> b,
                     std::span<double> out, double eps);

/// Sums |S_i - S_j| over ordered pairs i != j, routed by label:
/// both bonafide -> intra, exactly one bonafide -> inter, attack-attack skipped.
/// `features` is row-major (n_examples x dim). Counts are returned as pair counts.
void class_pair_distances(std::span<const double> features, std::size_t dim,
                          std::span<const unsigned char> is_bonafide,
                          std::span<double> intra, std::span<double> inter,
                          std::size_t& k_bf, std::size_t& k_a);

/// weights: [out][in][k][k], bias: [out]; x: [in][h][w]; y: [out][h][w].
void conv2d_forward(const ConvShape& s, std::span<const double> weights,
                    std::span<const double> bias, std::span<const double> x,
                    std::span<double> y);

/// Accumulates parameter gradients into dw/db and writes the input gradient to
/// dx (dx may be empty to skip it).
void conv2d_backward(const ConvShape& s, std::span<const double> weights,
                     std::span<const double> x, std::span<const double> dy,
                     std::span<double> dw, std::span<double> db, std::span<double> dx);

}  // namespace serial

namespace omp {

void normalized_diff(std::span<const double> a, std::span<const double> b,
                     std::span<double> out, double eps);

void class_pair_distances(std::span<const double> features, std::size_t dim,
                          std::span<const unsigned char> is_bonafide,
                          std::span<double> intra, std::span<double> inter,
                          std::size_t& k_bf, std::size_t& k_a);

void conv2d_forward(const ConvShape& s, std::span<const double> weights,
                    std::span<const double> bias, std::span<const double> x,
                    std::span<double> y);

void conv2d_backward(const ConvShape& s, std::span<const double> weights,
                     std::span<const double> x, std::span<const double> dy,
                     std::span<double> dw, std::span<double> db, std::span<double> dx);

}  // namespace omp

/// Caps the OpenMP team size (no-op without OpenMP). n <= 0 leaves the default.
void set_max_threads(int n);
int max_threads();

}  // namespace spad::kernels
