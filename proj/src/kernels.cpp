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

#include "spad/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spad::kernels {

namespace {

inline double nd(double a, double b, double eps) {
  const double den = a + b + eps;
  return den == 0.0 ? 0.0 : (a - b) / den;
}

// One component of the class-pair accumulation, in (i, j) order.
inline void pair_component(std::span<const double> f, std::size_t n, std::size_t dim,
                           std::size_t d, std::span<const unsigned char> bf,
                           double& intra, double& inter) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double delta = std::fabs(f[i * dim + d] - f[j * dim + d]);
      if (bf[i] && bf[j])
        intra += delta;
      else if (bf[i] != bf[j])
        inter += delta;
    }
  }
}

void pair_counts(std::span<const unsigned char> bf, std::size_t& k_bf, std::size_t& k_a) {
  std::size_t nb = 0;
  for (unsigned char b : bf) nb += b ? 1 : 0;
  const std::size_t na = bf.size() - nb;
  k_bf = nb * (nb > 0 ? nb - 1 : 0);
  k_a = 2 * nb * na;
}

// Zero-pads each channel plane by `pad` on every side.
std::vector<double>& padded(int channels, int H, int W, int pad, const double* src) {
  thread_local std::vector<double> buf[2];
  thread_local int next = 0;
  std::vector<double>& out = buf[next];
  next ^= 1;
  const int Hp = H + 2 * pad, Wp = W + 2 * pad;
  out.assign(static_cast<std::size_t>(channels) * Hp * Wp, 0.0);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < H; ++y)
      std::copy(src + (static_cast<std::size_t>(c) * H + y) * W,
                src + (static_cast<std::size_t>(c) * H + y + 1) * W,
                out.data() + (static_cast<std::size_t>(c) * Hp + y + pad) * Wp + pad);
  return out;
}

// y[o] = bias[o] + sum_i w[o][i] (*) x[i] over the padded input, one output row
// at a time with the kernel row's taps fused.
inline void conv_forward_channel(const ConvShape& s, int o, std::span<const double> w,
                                 std::span<const double> bias, const double* xp,
                                 std::span<double> y) {
  const int H = s.height, W = s.width, K = s.kernel;
  const int Hp = H + K - 1, Wp = W + K - 1;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  double* yo = y.data() + o * plane;
  std::fill(yo, yo + plane, bias[o]);
  for (int i = 0; i < s.in_channels; ++i) {
    const double* xi = xp + static_cast<std::size_t>(i) * Hp * Wp;
    const double* wk = w.data() + (static_cast<std::size_t>(o) * s.in_channels + i) * K * K;
    for (int yy = 0; yy < H; ++yy) {
      double* yrow = yo + yy * W;
      for (int ky = 0; ky < K; ++ky) {
        const double* xr = xi + (yy + ky) * Wp;
        const double* wr = wk + ky * K;
        if (K == 3) {
          const double w0 = wr[0], w1 = wr[1], w2 = wr[2];
          for (int xx = 0; xx < W; ++xx) yrow[xx] += w0 * xr[xx] + w1 * xr[xx + 1] + w2 * xr[xx + 2];
        } else {
          for (int kx = 0; kx < K; ++kx) {
            const double wv = wr[kx];
            for (int xx = 0; xx < W; ++xx) yrow[xx] += wv * xr[xx + kx];
          }
        }
      }
    }
  }
}

// dw[o][i] += dy[o] (x) x[i] over the padded input; four interleaved partial
// sums per tap so the reduction order is fixed and vectorizable.
inline void conv_backward_params(const ConvShape& s, int o, const double* xp,
                                 std::span<const double> dy, std::span<double> dw,
                                 std::span<double> db) {
  const int H = s.height, W = s.width, K = s.kernel;
  const int Hp = H + K - 1, Wp = W + K - 1;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const double* go = dy.data() + o * plane;
  double sb = 0.0;
  for (std::size_t p = 0; p < plane; ++p) sb += go[p];
  db[o] += sb;
  const int W4 = W - W % 4;
  for (int i = 0; i < s.in_channels; ++i) {
    const double* xi = xp + static_cast<std::size_t>(i) * Hp * Wp;
    double* gk = dw.data() + (static_cast<std::size_t>(o) * s.in_channels + i) * K * K;
    for (int ky = 0; ky < K; ++ky)
      for (int kx = 0; kx < K; ++kx) {
        double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
        for (int yy = 0; yy < H; ++yy) {
          const double* g = go + yy * W;
          const double* xr = xi + (yy + ky) * Wp + kx;
          for (int xx = 0; xx < W4; xx += 4) {
            l0 += g[xx] * xr[xx];
            l1 += g[xx + 1] * xr[xx + 1];
            l2 += g[xx + 2] * xr[xx + 2];
            l3 += g[xx + 3] * xr[xx + 3];
          }
          for (int xx = W4; xx < W; ++xx) l0 += g[xx] * xr[xx];
        }
        gk[ky * K + kx] += (l0 + l1) + (l2 + l3);
      }
  }
}

// dx[i] = sum_o w[o][i] (*) dy[o] as a full correlation over the padded
// output gradient (flipped taps).
inline void conv_backward_input(const ConvShape& s, int i, std::span<const double> w,
                                const double* dyp, std::span<double> dx) {
  const int H = s.height, W = s.width, K = s.kernel, P = K / 2;
  const int Hp = H + K - 1, Wp = W + K - 1;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  double* gi = dx.data() + i * plane;
  std::fill(gi, gi + plane, 0.0);
  for (int o = 0; o < s.out_channels; ++o) {
    const double* go = dyp + static_cast<std::size_t>(o) * Hp * Wp;
    const double* wk = w.data() + (static_cast<std::size_t>(o) * s.in_channels + i) * K * K;
    for (int yy = 0; yy < H; ++yy) {
      double* row = gi + yy * W;
      for (int ky = 0; ky < K; ++ky) {
        const double* gr = go + (yy + 2 * P - ky) * Wp + 2 * P;
        const double* wr = wk + ky * K;
        if (K == 3) {
          const double w0 = wr[0], w1 = wr[1], w2 = wr[2];
          for (int xx = 0; xx < W; ++xx) row[xx] += w0 * gr[xx] + w1 * gr[xx - 1] + w2 * gr[xx - 2];
        } else {
          for (int kx = 0; kx < K; ++kx) {
            const double wv = wr[kx];
            for (int xx = 0; xx < W; ++xx) row[xx] += wv * gr[xx - kx];
          }
        }
      }
    }
  }
}

}  // namespace

namespace serial {

void normalized_diff(std::span<const double> a, std::span<const double> b,
                     std::span<double> out, double eps) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = nd(a[i], b[i], eps);
}

void class_pair_distances(std::span<const double> features, std::size_t dim,
                          std::span<const unsigned char> is_bonafide,
                          std::span<double> intra, std::span<double> inter,
                          std::size_t& k_bf, std::size_t& k_a) {
  const std::size_t n = is_bonafide.size();
  std::fill(intra.begin(), intra.end(), 0.0);
  std::fill(inter.begin(), inter.end(), 0.0);
  for (std::size_t d = 0; d < dim; ++d)
    pair_component(features, n, dim, d, is_bonafide, intra[d], inter[d]);
  pair_counts(is_bonafide, k_bf, k_a);
}

void conv2d_forward(const ConvShape& s, std::span<const double> weights,
                    std::span<const double> bias, std::span<const double> x,
                    std::span<double> y) {
  const auto& xp = padded(s.in_channels, s.height, s.width, s.kernel / 2, x.data());
  for (int o = 0; o < s.out_channels; ++o) conv_forward_channel(s, o, weights, bias, xp.data(), y);
}

void conv2d_backward(const ConvShape& s, std::span<const double> weights,
                     std::span<const double> x, std::span<const double> dy,
                     std::span<double> dw, std::span<double> db, std::span<double> dx) {
  const int P = s.kernel / 2;
  const auto& xp = padded(s.in_channels, s.height, s.width, P, x.data());
  for (int o = 0; o < s.out_channels; ++o) conv_backward_params(s, o, xp.data(), dy, dw, db);
  if (!dx.empty()) {
    const auto& dyp = padded(s.out_channels, s.height, s.width, P, dy.data());
    for (int i = 0; i < s.in_channels; ++i) conv_backward_input(s, i, weights, dyp.data(), dx);
  }
}

}  // namespace serial

namespace omp {

void normalized_diff(std::span<const double> a, std::span<const double> b,
                     std::span<double> out, double eps) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = nd(a[i], b[i], eps);
}

void class_pair_distances(std::span<const double> features, std::size_t dim,
                          std::span<const unsigned char> is_bonafide,
                          std::span<double> intra, std::span<double> inter,
                          std::size_t& k_bf, std::size_t& k_a) {
  const std::size_t n = is_bonafide.size();
  const std::ptrdiff_t D = static_cast<std::ptrdiff_t>(dim);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t d = 0; d < D; ++d) {
    double a = 0.0, e = 0.0;
    pair_component(features, n, dim, static_cast<std::size_t>(d), is_bonafide, a, e);
    intra[d] = a;
    inter[d] = e;
  }
  pair_counts(is_bonafide, k_bf, k_a);
}

void conv2d_forward(const ConvShape& s, std::span<const double> weights,
                    std::span<const double> bias, std::span<const double> x,
                    std::span<double> y) {
  const double* xp = padded(s.in_channels, s.height, s.width, s.kernel / 2, x.data()).data();
#pragma omp parallel for schedule(static) if (s.out_channels * s.height * s.width > 16384)
  for (int o = 0; o < s.out_channels; ++o) conv_forward_channel(s, o, weights, bias, xp, y);
}

void conv2d_backward(const ConvShape& s, std::span<const double> weights,
                     std::span<const double> x, std::span<const double> dy,
                     std::span<double> dw, std::span<double> db, std::span<double> dx) {
  const int P = s.kernel / 2;
  const double* xp = padded(s.in_channels, s.height, s.width, P, x.data()).data();
  const double* dyp = dx.empty() ? nullptr : padded(s.out_channels, s.height, s.width, P, dy.data()).data();
  const bool par = s.out_channels * s.height * s.width > 16384;
#pragma omp parallel if (par)
  {
#pragma omp for schedule(static)
    for (int o = 0; o < s.out_channels; ++o) conv_backward_params(s, o, xp, dy, dw, db);
    if (dyp) {
#pragma omp for schedule(static)
      for (int i = 0; i < s.in_channels; ++i) conv_backward_input(s, i, weights, dyp, dx);
    }
  }
}

}  // namespace omp


void set_max_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace spad::kernels
