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

#include "spad/nn.hpp"

#include <algorithm>

namespace spad::nn {

std::size_t ParamLayout::add(const std::string& name, std::vector<int> shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  blocks_.push_back({name, total_, n, std::move(shape)});
  total_ += n;
  return blocks_.back().offset;
}

double bce(double p, double label) {
  p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

double bce_logit_grad(double p, double label) {
  if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
  return p - label;
}

void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void relu_backward(std::span<const double> y, std::span<double> dy) {
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(y[i] > 0.0)) dy[i] = 0.0;
}

void avgpool2_forward(int channels, int h, int w, std::span<const double> x, std::span<double> y) {
  const int oh = h / 2, ow = w / 2;
  for (int c = 0; c < channels; ++c) {
    const double* xc = x.data() + static_cast<std::size_t>(c) * h * w;
    double* yc = y.data() + static_cast<std::size_t>(c) * oh * ow;
    for (int yy = 0; yy < oh; ++yy)
      for (int xx = 0; xx < ow; ++xx) {
        const double* r0 = xc + (2 * yy) * w + 2 * xx;
        const double* r1 = r0 + w;
        yc[yy * ow + xx] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
  }
}

void avgpool2_backward(int channels, int h, int w, std::span<const double> dy,
                       std::span<double> dx) {
  const int oh = h / 2, ow = w / 2;
  std::fill(dx.begin(), dx.end(), 0.0);
  for (int c = 0; c < channels; ++c) {
    const double* gc = dy.data() + static_cast<std::size_t>(c) * oh * ow;
    double* xc = dx.data() + static_cast<std::size_t>(c) * h * w;
    for (int yy = 0; yy < oh; ++yy)
      for (int xx = 0; xx < ow; ++xx) {
        const double g = 0.25 * gc[yy * ow + xx];
        double* r0 = xc + (2 * yy) * w + 2 * xx;
        double* r1 = r0 + w;
        r0[0] = g;
        r0[1] = g;
        r1[0] = g;
        r1[1] = g;
      }
  }
}

void linear_forward(int in, int out, std::span<const double> w, std::span<const double> b,
                    std::span<const double> x, std::span<double> y) {
  for (int o = 0; o < out; ++o) {
    double acc = b[o];
    const double* wr = w.data() + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) acc += wr[i] * x[i];
    y[o] = acc;
  }
}

void linear_backward(int in, int out, std::span<const double> w, std::span<const double> x,
                     std::span<const double> dy, std::span<double> dw, std::span<double> db,
                     std::span<double> dx) {
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
  for (int o = 0; o < out; ++o) {
    const double g = dy[o];
    db[o] += g;
    double* gw = dw.data() + static_cast<std::size_t>(o) * in;
    const double* wr = w.data() + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) gw[i] += g * x[i];
    if (!dx.empty())
      for (int i = 0; i < in; ++i) dx[i] += g * wr[i];
  }
}

void he_uniform(std::span<double> w, int fan_in, CounterRng& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  for (double& v : w) v = rng.uniform(-bound, bound);
}

void xavier_uniform(std::span<double> w, int fan_in, int fan_out, CounterRng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : w) v = rng.uniform(-bound, bound);
}

std::vector<double> adapt_first_layer(std::span<const double> filters, int kernels,
                                      int in_channels, int area, int out_channels) {
  if (in_channels < 1 || out_channels < 1 || kernels < 0 || area < 1)
    fail(ErrorKind::precondition, "adapt_first_layer: channel counts must be >= 1");
  if (filters.size() != static_cast<std::size_t>(kernels) * in_channels * area)
    fail(ErrorKind::precondition, "adapt_first_layer: filter bank size mismatch");
  std::vector<double> out(static_cast<std::size_t>(kernels) * out_channels * area);
  const double scale = static_cast<double>(in_channels) / out_channels;
  std::vector<double> mean(area);
  for (int k = 0; k < kernels; ++k) {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (int c = 0; c < in_channels; ++c)
      for (int a = 0; a < area; ++a)
        mean[a] += filters[(static_cast<std::size_t>(k) * in_channels + c) * area + a];
    for (double& m : mean) m /= in_channels;
    for (int c = 0; c < out_channels; ++c)
      for (int a = 0; a < area; ++a)
        out[(static_cast<std::size_t>(k) * out_channels + c) * area + a] = mean[a] * scale;
  }
  return out;
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * grad[i];
    v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * grad[i] * grad[i];
    const double mh = m_[i] / bc1, vh = v_[i] / bc2;
    params[i] -= opt_.learning_rate * mh / (std::sqrt(vh) + opt_.eps);
  }
}

}  // namespace spad::nn
