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

#include "spad/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "spad/svm.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;

namespace spad {

// --- enums and config ---------------------------------------------------------

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::pixbis: return "pixbis";
    case ModelKind::mccnn: return "mccnn";
    case ModelKind::pixel_svm: return "pixel_svm";
  }
  return "?";
}

const char* to_string(FrameAgg a) {
  switch (a) {
    case FrameAgg::mean: return "mean";
    case FrameAgg::min: return "min";
    case FrameAgg::median: return "median";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "pixbis") return ModelKind::pixbis;
  if (s == "mccnn") return ModelKind::mccnn;
  if (s == "pixel_svm" || s == "pixel-svm") return ModelKind::pixel_svm;
  return std::nullopt;
}

std::optional<FrameAgg> parse_frame_agg(std::string_view s) {
  if (s == "mean") return FrameAgg::mean;
  if (s == "min") return FrameAgg::min;
  if (s == "median") return FrameAgg::median;
  return std::nullopt;
}

ModelConfig default_config(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  switch (kind) {
    case ModelKind::pixbis: break;
    case ModelKind::mccnn:
      c.input_size = 128;
      c.widths = {16};
      c.epochs = 50;
      break;
    case ModelKind::pixel_svm:
      c.input_size = 128;
      c.widths = {};
      c.epochs = 1;
      break;
  }
  return c;
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::config, "model config: " + m); };
  if (input_size < 1) bad("input_size must be positive");
  if (!(lambda >= 0.0 && lambda <= 1.0)) bad("lambda must be in [0,1]");
  if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (epochs < 1) bad("epochs must be >= 1");
  if (frames < 1) bad("frames must be >= 1");
  if (!(epsilon >= 0.0)) bad("epsilon must be >= 0");
  for (int w : widths)
    if (w < 1) bad("widths must be positive");
  switch (kind) {
    case ModelKind::pixbis: {
      if (widths.empty()) bad("pixbis needs at least one stage width");
      const int factor = 1 << widths.size();
      if (input_size % factor != 0 || input_size / factor != map_size)
        bad("input_size / 2^stages must equal map_size (" + std::to_string(input_size) + " / " +
            std::to_string(factor) + " != " + std::to_string(map_size) + ")");
      break;
    }
    case ModelKind::mccnn:
      if (widths.empty()) bad("mccnn needs a trunk width");
      if (input_size % 4 != 0) bad("mccnn input_size must be divisible by 4");
      if (embedding < 1) bad("embedding must be positive");
      break;
    case ModelKind::pixel_svm:
      if (gmm_components < 1) bad("gmm_components must be >= 1");
      if (!(svm_gamma > 0.0)) bad("svm_gamma must be positive");
      if (!(svm_c > 0.0)) bad("svm_c must be positive");
      if (!(pixel_fraction > 0.0 && pixel_fraction <= 1.0)) bad("pixel_fraction in (0,1]");
      if (max_svm_samples < 20) bad("max_svm_samples must be >= 20");
      break;
  }
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(c.kind);
  j["input_size"] = c.input_size;
  j["widths"] = c.widths;
  j["map_size"] = c.map_size;
  j["embedding"] = c.embedding;
  j["lambda"] = c.lambda;
  j["optimizer"] = "adam";
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["frames"] = c.frames;
  j["frame_agg"] = to_string(c.frame_agg);
  j["epsilon"] = c.epsilon;
  j["gmm_components"] = c.gmm_components;
  j["svm_gamma"] = c.svm_gamma;
  j["svm_c"] = c.svm_c;
  j["pixel_fraction"] = c.pixel_fraction;
  j["max_svm_samples"] = c.max_svm_samples;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j, ModelConfig c) {
  try {
    if (j.contains("kind")) {
      auto k = parse_model_kind(j.at("kind").get<std::string>());
      if (!k) fail(ErrorKind::config, "unknown model kind " + j.at("kind").dump());
      if (*k != c.kind) c = default_config(*k);
    }
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("input_size", c.input_size);
    get("widths", c.widths);
    get("map_size", c.map_size);
    get("embedding", c.embedding);
    get("lambda", c.lambda);
    get("learning_rate", c.learning_rate);
    get("batch_size", c.batch_size);
    get("epochs", c.epochs);
    get("seed", c.seed);
    get("frames", c.frames);
    get("epsilon", c.epsilon);
    get("gmm_components", c.gmm_components);
    get("svm_gamma", c.svm_gamma);
    get("svm_c", c.svm_c);
    get("pixel_fraction", c.pixel_fraction);
    get("max_svm_samples", c.max_svm_samples);
    if (j.contains("frame_agg")) {
      auto a = parse_frame_agg(j.at("frame_agg").get<std::string>());
      if (!a) fail(ErrorKind::config, "unknown frame_agg " + j.at("frame_agg").dump());
      c.frame_agg = *a;
    }
    if (j.contains("optimizer") && j.at("optimizer") != "adam")
      fail(ErrorKind::config, "only the adam optimizer is supported");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("model config: ") + e.what());
  }
  return c;
}

// --- PixBiS -------------------------------------------------------------------

PixBisNet::PixBisNet(const ModelConfig& cfg, int channels)
    : channels_(channels), input_size_(cfg.input_size), map_size_(cfg.map_size),
      lambda_(cfg.lambda) {
  if (channels < 1) fail(ErrorKind::precondition, "pixbis: at least one input channel");
  int size = cfg.input_size;
  auto add_conv = [&](const std::string& name, int in, int out, int k, bool pool) {
    Conv c;
    c.shape = {in, out, size, size, k};
    c.w = layout_.add(name + ".weight", {out, in, k, k});
    c.b = layout_.add(name + ".bias", {out});
    c.pool = pool;
    convs_.push_back(c);
    if (pool) size /= 2;
  };
  add_conv("stem", channels, cfg.widths.front(), 3, false);
  for (std::size_t s = 0; s < cfg.widths.size(); ++s)
    add_conv("stage" + std::to_string(s + 1), s == 0 ? cfg.widths.front() : cfg.widths[s - 1],
             cfg.widths[s], 3, true);
  if (size != map_size_) fail(ErrorKind::config, "pixbis: stages do not reach the map size");
  head_in_ = cfg.widths.back();
  head_w_ = layout_.add("map.weight", {1, head_in_, 1, 1});
  head_b_ = layout_.add("map.bias", {1});
  bin_w_ = layout_.add("binary.weight", {1, map_cells()});
  bin_b_ = layout_.add("binary.bias", {1});
}

void PixBisNet::init(std::span<double> params, CounterRng rng) const {
  std::fill(params.begin(), params.end(), 0.0);
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const auto& c = convs_[i];
    const int area = c.shape.kernel * c.shape.kernel;
    auto w = params.subspan(c.w, static_cast<std::size_t>(c.shape.out_channels) *
                                     c.shape.in_channels * area);
    if (i == 0) {
      // Draw a colour-like 3-channel stem and adapt it to the input channels.
      std::vector<double> proto(static_cast<std::size_t>(c.shape.out_channels) * 3 * area);
      nn::he_uniform(proto, 3 * area, rng);
      const auto adapted =
          nn::adapt_first_layer(proto, c.shape.out_channels, 3, area, c.shape.in_channels);
      std::copy(adapted.begin(), adapted.end(), w.begin());
    } else {
      nn::he_uniform(w, c.shape.in_channels * area, rng);
    }
  }
  nn::xavier_uniform(params.subspan(head_w_, head_in_), head_in_, 1, rng);
  nn::xavier_uniform(params.subspan(bin_w_, map_cells()), map_cells(), 1, rng);
}

PixBisNet::Output PixBisNet::forward(std::span<const double> params, const Tensor& x,
                                     Workspace& ws) const {
  if (x.channels != channels_ || x.size != input_size_)
    fail(ErrorKind::domain, "pixbis: input tensor shape mismatch");
  ws.acts.resize(2 * convs_.size() + 1);
  std::span<const double> in = x.values;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const auto& c = convs_[i];
    const auto& s = c.shape;
    auto& out = ws.acts[2 * i];
    out.resize(static_cast<std::size_t>(s.out_channels) * s.height * s.width);
    kernels::omp::conv2d_forward(
        s, params.subspan(c.w, static_cast<std::size_t>(s.out_channels) * s.in_channels * s.kernel * s.kernel),
        params.subspan(c.b, s.out_channels), in, out);
    nn::relu_inplace(out);
    if (c.pool) {
      auto& pooled = ws.acts[2 * i + 1];
      pooled.resize(out.size() / 4);
      nn::avgpool2_forward(s.out_channels, s.height, s.width, out, pooled);
      in = pooled;
    } else {
      ws.acts[2 * i + 1].clear();
      in = out;
    }
  }
  auto& map = ws.acts.back();
  map.resize(map_cells());
  const kernels::ConvShape hs{head_in_, 1, map_size_, map_size_, 1};
  kernels::omp::conv2d_forward(hs, params.subspan(head_w_, head_in_), params.subspan(head_b_, 1),
                               in, map);
  for (double& v : map) v = nn::sigmoid(v);
  double zb = 0.0;
  nn::linear_forward(map_cells(), 1, params.subspan(bin_w_, map_cells()), params.subspan(bin_b_, 1),
                     map, std::span<double>(&zb, 1));
  ws.binary = nn::sigmoid(zb);
  return {map, ws.binary};
}

double PixBisNet::loss_and_grad(std::span<const double> params, const Tensor& x, double label,
                                std::span<double> grad, Workspace& ws) const {
  forward(params, x, ws);
  const auto& map = ws.acts.back();
  const double loss = pixbis_loss(map, ws.binary, label, lambda_);
  const int cells = map_cells();

  // binary head
  const double dzb = (1.0 - lambda_) * nn::bce_logit_grad(ws.binary, label);
  std::vector<double> dmap(cells);
  nn::linear_backward(cells, 1, params.subspan(bin_w_, cells), map, std::span<const double>(&dzb, 1),
                      grad.subspan(bin_w_, cells), grad.subspan(bin_b_, 1), dmap);
  for (int k = 0; k < cells; ++k) {
    const double m = map[k];
    dmap[k] = lambda_ / cells * nn::bce_logit_grad(m, label) + dmap[k] * m * (1.0 - m);
  }

  // 1x1 map head
  const auto& last = convs_.back();
  std::vector<double> dcur(static_cast<std::size_t>(head_in_) * cells);
  const kernels::ConvShape hs{head_in_, 1, map_size_, map_size_, 1};
  const std::span<const double> head_in = ws.acts[2 * (convs_.size() - 1) + (last.pool ? 1 : 0)];
  kernels::omp::conv2d_backward(hs, params.subspan(head_w_, head_in_), head_in, dmap,
                                grad.subspan(head_w_, head_in_), grad.subspan(head_b_, 1), dcur);

  std::vector<double> dnext;
  for (std::size_t ii = convs_.size(); ii-- > 0;) {
    const auto& c = convs_[ii];
    const auto& s = c.shape;
    const auto& out = ws.acts[2 * ii];
    std::vector<double> dout(out.size());
    if (c.pool)
      nn::avgpool2_backward(s.out_channels, s.height, s.width, dcur, dout);
    else
      dout = dcur;
    nn::relu_backward(out, dout);
    std::span<const double> in;
    if (ii == 0)
      in = x.values;
    else
      in = convs_[ii - 1].pool ? ws.acts[2 * (ii - 1) + 1] : ws.acts[2 * (ii - 1)];
    const std::size_t nw = static_cast<std::size_t>(s.out_channels) * s.in_channels * s.kernel * s.kernel;
    if (ii > 0) dnext.assign(in.size(), 0.0);
    kernels::omp::conv2d_backward(s, params.subspan(c.w, nw), in, dout, grad.subspan(c.w, nw),
                                  grad.subspan(c.b, s.out_channels),
                                  ii > 0 ? std::span<double>(dnext) : std::span<double>());
    dcur.swap(dnext);
  }
  return loss;
}

double pixbis_loss(std::span<const double> map, double binary, double label, double lambda) {
  double pix = 0.0;
  for (double m : map) pix += nn::bce(m, label);
  pix /= static_cast<double>(map.size());
  return lambda * pix + (1.0 - lambda) * nn::bce(binary, label);
}

// --- MC-CNN -------------------------------------------------------------------

McCnnNet::McCnnNet(const ModelConfig& cfg, int channels)
    : channels_(channels), size_(cfg.input_size), width_(cfg.widths.front()),
      embedding_(cfg.embedding) {
  if (channels < 1) fail(ErrorKind::precondition, "mccnn: at least one input channel");
  for (int c = 0; c < channels; ++c) {
    own_w_.push_back(layout_.add("trunk" + std::to_string(c) + ".weight", {width_, 1, 3, 3}));
    own_b_.push_back(layout_.add("trunk" + std::to_string(c) + ".bias", {width_}));
  }
  shared_w_ = layout_.add("shared.weight", {embedding_, width_, 3, 3});
  shared_b_ = layout_.add("shared.bias", {embedding_});
  fc1_w_ = layout_.add("fc1.weight", {kHidden, channels * embedding_});
  fc1_b_ = layout_.add("fc1.bias", {kHidden});
  fc2_w_ = layout_.add("fc2.weight", {1, kHidden});
  fc2_b_ = layout_.add("fc2.bias", {1});
}

void McCnnNet::init(std::span<double> params, CounterRng rng) const {
  std::fill(params.begin(), params.end(), 0.0);
  for (int c = 0; c < channels_; ++c) nn::he_uniform(params.subspan(own_w_[c], width_ * 9), 9, rng);
  nn::he_uniform(params.subspan(shared_w_, static_cast<std::size_t>(embedding_) * width_ * 9),
                 width_ * 9, rng);
  nn::xavier_uniform(params.subspan(fc1_w_, static_cast<std::size_t>(kHidden) * channels_ * embedding_),
                     channels_ * embedding_, kHidden, rng);
  nn::xavier_uniform(params.subspan(fc2_w_, kHidden), kHidden, 1, rng);
}

// acts per channel c: [4c] conv1 relu, [4c+1] pool1, [4c+2] conv2 relu, [4c+3] pool2;
// then concat, hidden, output.
double McCnnNet::forward(std::span<const double> params, const Tensor& x, Workspace& ws) const {
  if (x.channels != channels_ || x.size != size_)
    fail(ErrorKind::domain, "mccnn: input tensor shape mismatch");
  const int s1 = size_, s2 = size_ / 2, s3 = size_ / 4;
  const std::size_t plane = static_cast<std::size_t>(s1) * s1;
  ws.acts.resize(4 * channels_ + 3);
  auto& concat = ws.acts[4 * channels_];
  concat.assign(static_cast<std::size_t>(channels_) * embedding_, 0.0);
  for (int c = 0; c < channels_; ++c) {
    auto& r1 = ws.acts[4 * c];
    auto& p1 = ws.acts[4 * c + 1];
    auto& r2 = ws.acts[4 * c + 2];
    auto& p2 = ws.acts[4 * c + 3];
    r1.resize(static_cast<std::size_t>(width_) * plane);
    kernels::omp::conv2d_forward({1, width_, s1, s1, 3}, params.subspan(own_w_[c], width_ * 9),
                                 params.subspan(own_b_[c], width_),
                                 std::span<const double>(x.values).subspan(c * plane, plane), r1);
    nn::relu_inplace(r1);
    p1.resize(r1.size() / 4);
    nn::avgpool2_forward(width_, s1, s1, r1, p1);
    r2.resize(static_cast<std::size_t>(embedding_) * s2 * s2);
    kernels::omp::conv2d_forward({width_, embedding_, s2, s2, 3},
                                 params.subspan(shared_w_, static_cast<std::size_t>(embedding_) * width_ * 9),
                                 params.subspan(shared_b_, embedding_), p1, r2);
    nn::relu_inplace(r2);
    p2.resize(r2.size() / 4);
    nn::avgpool2_forward(embedding_, s2, s2, r2, p2);
    const std::size_t area = static_cast<std::size_t>(s3) * s3;
    for (int e = 0; e < embedding_; ++e) {
      double acc = 0.0;
      for (std::size_t k = 0; k < area; ++k) acc += p2[e * area + k];
      concat[static_cast<std::size_t>(c) * embedding_ + e] = acc / static_cast<double>(area);
    }
  }
  auto& hidden = ws.acts[4 * channels_ + 1];
  hidden.resize(kHidden);
  const int nin = channels_ * embedding_;
  nn::linear_forward(nin, kHidden, params.subspan(fc1_w_, static_cast<std::size_t>(kHidden) * nin),
                     params.subspan(fc1_b_, kHidden), concat, hidden);
  for (double& h : hidden) h = nn::sigmoid(h);
  auto& out = ws.acts[4 * channels_ + 2];
  out.resize(1);
  nn::linear_forward(kHidden, 1, params.subspan(fc2_w_, kHidden), params.subspan(fc2_b_, 1), hidden,
                     out);
  out[0] = nn::sigmoid(out[0]);
  return out[0];
}

double McCnnNet::loss_and_grad(std::span<const double> params, const Tensor& x, double label,
                               std::span<double> grad, Workspace& ws) const {
  const double p = forward(params, x, ws);
  const double loss = nn::bce(p, label);
  const int nin = channels_ * embedding_;
  const auto& concat = ws.acts[4 * channels_];
  const auto& hidden = ws.acts[4 * channels_ + 1];

  const double dz2 = nn::bce_logit_grad(p, label);
  std::vector<double> dh(kHidden);
  nn::linear_backward(kHidden, 1, params.subspan(fc2_w_, kHidden), hidden,
                      std::span<const double>(&dz2, 1), grad.subspan(fc2_w_, kHidden),
                      grad.subspan(fc2_b_, 1), dh);
  for (int k = 0; k < kHidden; ++k) dh[k] *= hidden[k] * (1.0 - hidden[k]);
  std::vector<double> dconcat(nin);
  nn::linear_backward(nin, kHidden, params.subspan(fc1_w_, static_cast<std::size_t>(kHidden) * nin),
                      concat, dh, grad.subspan(fc1_w_, static_cast<std::size_t>(kHidden) * nin),
                      grad.subspan(fc1_b_, kHidden), dconcat);

  const int s1 = size_, s2 = size_ / 2, s3 = size_ / 4;
  const std::size_t plane = static_cast<std::size_t>(s1) * s1;
  const std::size_t area3 = static_cast<std::size_t>(s3) * s3;
  const std::size_t nshared = static_cast<std::size_t>(embedding_) * width_ * 9;
  std::vector<double> dp2(static_cast<std::size_t>(embedding_) * area3);
  std::vector<double> dr2(static_cast<std::size_t>(embedding_) * s2 * s2);
  std::vector<double> dp1(static_cast<std::size_t>(width_) * s2 * s2);
  std::vector<double> dr1(static_cast<std::size_t>(width_) * plane);
  for (int c = 0; c < channels_; ++c) {
    for (int e = 0; e < embedding_; ++e) {
      const double g = dconcat[static_cast<std::size_t>(c) * embedding_ + e] / static_cast<double>(area3);
      std::fill(dp2.begin() + e * area3, dp2.begin() + (e + 1) * area3, g);
    }
    nn::avgpool2_backward(embedding_, s2, s2, dp2, dr2);
    nn::relu_backward(ws.acts[4 * c + 2], dr2);
    kernels::omp::conv2d_backward({width_, embedding_, s2, s2, 3}, params.subspan(shared_w_, nshared),
                                  ws.acts[4 * c + 1], dr2, grad.subspan(shared_w_, nshared),
                                  grad.subspan(shared_b_, embedding_), dp1);
    nn::avgpool2_backward(width_, s1, s1, dp1, dr1);
    nn::relu_backward(ws.acts[4 * c], dr1);
    kernels::omp::conv2d_backward({1, width_, s1, s1, 3}, params.subspan(own_w_[c], width_ * 9),
                                  std::span<const double>(x.values).subspan(c * plane, plane), dr1,
                                  grad.subspan(own_w_[c], width_ * 9), grad.subspan(own_b_[c], width_),
                                  {});
  }
  return loss;
}

// --- serialization ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'P', 'A', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

nlohmann::ordered_json layout_json(const nn::ParamLayout& l) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& b : l.blocks()) arr.push_back({{"name", b.name}, {"shape", b.shape}});
  return arr;
}

}  // namespace

std::string encode_model(const TrainedScorer& m) {
  nlohmann::ordered_json meta;
  meta["kind"] = to_string(m.kind);
  std::vector<std::string> specs;
  for (const auto& d : m.specs) specs.push_back(to_string(d));
  meta["specs"] = specs;
  meta["config"] = to_json(m.config);
  meta["provenance"] = {{"seed", m.provenance.seed},
                        {"manifest_hash", m.provenance.manifest_hash},
                        {"best_epoch", m.provenance.best_epoch},
                        {"protocol", m.provenance.protocol}};
  meta["param_count"] = m.parameters.size();
  if (m.kind == ModelKind::pixbis)
    meta["layout"] = layout_json(PixBisNet(m.config, static_cast<int>(m.specs.size())).layout());
  else if (m.kind == ModelKind::mccnn)
    meta["layout"] = layout_json(McCnnNet(m.config, static_cast<int>(m.specs.size())).layout());
  if (!m.extra.is_null()) meta["extra"] = m.extra;
  const std::string js = meta.dump();

  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(js.size()));
  out += js;
  out.reserve(out.size() + 4 * m.parameters.size());
  for (double v : m.parameters) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

TrainedScorer decode_model(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != std::string_view(kMagic, 4))
    fail(ErrorKind::format, "not a model file (bad magic)");
  if (get_u32(bytes, 4) != kVersion)
    fail(ErrorKind::unsupported_format, "model file version " + std::to_string(get_u32(bytes, 4)));
  const std::size_t jlen = get_u32(bytes, 8);
  if (bytes.size() < 12 + jlen) fail(ErrorKind::io, "model file truncated in metadata");
  TrainedScorer m;
  try {
    const auto meta = nlohmann::json::parse(bytes.substr(12, jlen));
    auto kind = parse_model_kind(meta.at("kind").get<std::string>());
    if (!kind) fail(ErrorKind::format, "model file: unknown kind");
    m.kind = *kind;
    for (const auto& s : meta.at("specs")) m.specs.push_back(parse_diff_spec(s.get<std::string>()));
    m.config = config_from_json(meta.at("config"), default_config(m.kind));
    const auto& p = meta.at("provenance");
    m.provenance.seed = p.at("seed").get<std::uint64_t>();
    m.provenance.manifest_hash = p.at("manifest_hash").get<std::string>();
    m.provenance.best_epoch = p.at("best_epoch").get<int>();
    m.provenance.protocol = p.at("protocol").get<std::string>();
    if (meta.contains("extra")) m.extra = meta.at("extra");
    const std::size_t n = meta.at("param_count").get<std::size_t>();
    if (bytes.size() != 12 + jlen + 4 * n) fail(ErrorKind::io, "model file payload size mismatch");
    m.parameters.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bits = get_u32(bytes, 12 + jlen + 4 * i);
      float f;
      std::memcpy(&f, &bits, 4);
      m.parameters[i] = f;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("model file metadata: ") + e.what());
  }
  return m;
}

void save_model(const TrainedScorer& m, const fs::path& path) {
  const std::string bytes = encode_model(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

TrainedScorer load_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_model(ss.str());
}

// --- inputs -------------------------------------------------------------------

PresentationInputs prepare_inputs(const Presentation& p, const std::vector<SpectralStack>& frames,
                                  const std::vector<DiffSpec>& specs, const ModelConfig& cfg) {
  PresentationInputs in;
  in.presentation = &p;
  in.label = p.label == Label::bonafide ? 1.0 : 0.0;
  const int S = cfg.input_size;
  const std::size_t plane = static_cast<std::size_t>(S) * S;
  for (const auto& frame : frames) {
    Tensor t;
    t.channels = static_cast<int>(specs.size());
    t.size = S;
    t.values.resize(specs.size() * plane);
    const DiffStack ds = build_diff_stack(frame, specs, cfg.epsilon);
    for (std::size_t c = 0; c < specs.size(); ++c) {
      const Grid g = resize_bilinear(ds.maps[c], S, S);
      std::copy(g.values.begin(), g.values.end(), t.values.begin() + c * plane);
    }
    in.frames.push_back(std::move(t));
  }
  return in;
}

PresentationInputs prepare_inputs(const Presentation& p, const std::vector<DiffSpec>& specs,
                                  const ModelConfig& cfg) {
  return prepare_inputs(p, sample_frames(p, cfg.frames), specs, cfg);
}

// --- training -------------------------------------------------------------------

namespace {

int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

// Uniform front end over the two convolutional scorers.
class ConvNet {
 public:
  ConvNet(const ModelConfig& cfg, int channels) : kind_(cfg.kind) {
    if (kind_ == ModelKind::pixbis)
      pix_.emplace(cfg, channels);
    else if (kind_ == ModelKind::mccnn)
      mc_.emplace(cfg, channels);
    else
      fail(ErrorKind::precondition, "train_model handles pixbis and mccnn only");
  }

  std::size_t param_count() const {
    return pix_ ? pix_->layout().total() : mc_->layout().total();
  }
  void init(std::span<double> p, CounterRng rng) const {
    if (pix_) pix_->init(p, rng); else mc_->init(p, rng);
  }

  struct Workspace {
    PixBisNet::Workspace pix;
    McCnnNet::Workspace mc;
  };

  /// (score, loss) for one frame.
  std::pair<double, double> evaluate(std::span<const double> p, const Tensor& x, double label,
                                     Workspace& ws) const {
    if (pix_) {
      const auto out = pix_->forward(p, x, ws.pix);
      double mean = 0.0;
      for (double v : out.map) mean += v;
      mean /= static_cast<double>(out.map.size());
      return {mean, pixbis_loss(out.map, out.binary, label, lambda_)};
    }
    const double s = mc_->forward(p, x, ws.mc);
    return {s, nn::bce(s, label)};
  }

  double loss_and_grad(std::span<const double> p, const Tensor& x, double label,
                       std::span<double> g, Workspace& ws) const {
    return pix_ ? pix_->loss_and_grad(p, x, label, g, ws.pix) : mc_->loss_and_grad(p, x, label, g, ws.mc);
  }

  void set_lambda(double l) { lambda_ = l; }
  double lambda() const { return lambda_; }

 private:
  ModelKind kind_;
  std::optional<PixBisNet> pix_;
  std::optional<McCnnNet> mc_;
  double lambda_ = 0.5;
};

void round_to_float(std::span<double> p) {
  for (double& v : p) v = static_cast<double>(static_cast<float>(v));
}

void require_both_classes(const std::vector<PresentationInputs>& split, const char* name) {
  bool bf = false, at = false;
  for (const auto& in : split) (in.label > 0.5 ? bf : at) = true;
  if (!bf || !at)
    fail(ErrorKind::precondition, std::string("train_model: ") + name + " split needs both classes");
}

struct FrameRef {
  std::size_t presentation;
  std::size_t frame;
};

std::vector<FrameRef> frame_refs(const std::vector<PresentationInputs>& split) {
  std::vector<FrameRef> refs;
  for (std::size_t i = 0; i < split.size(); ++i)
    for (std::size_t f = 0; f < split[i].frames.size(); ++f) refs.push_back({i, f});
  return refs;
}

// Scores and losses of every frame, evaluated in parallel.
void evaluate_all(const ConvNet& net, std::span<const double> params,
                  const std::vector<PresentationInputs>& split, const std::vector<FrameRef>& refs,
                  std::vector<double>& scores, std::vector<double>& losses) {
  scores.assign(refs.size(), 0.0);
  losses.assign(refs.size(), 0.0);
  std::vector<ConvNet::Workspace> ws(kernels::max_threads());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(refs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& r = refs[i];
    const auto [s, l] = net.evaluate(params, split[r.presentation].frames[r.frame],
                                     split[r.presentation].label, ws[thread_id()]);
    scores[i] = s;
    losses[i] = l;
  }
}

ScoreSet to_score_set(const std::vector<PresentationInputs>& split,
                      const std::vector<FrameRef>& refs, const std::vector<double>& frame_scores,
                      FrameAgg agg) {
  ScoreSet set;
  std::vector<std::vector<double>> per(split.size());
  for (std::size_t i = 0; i < refs.size(); ++i) per[refs[i].presentation].push_back(frame_scores[i]);
  for (std::size_t i = 0; i < split.size(); ++i) {
    const Presentation* p = split[i].presentation;
    ScoreEntry e;
    e.id = p ? p->id : "p" + std::to_string(i);
    e.score = aggregate_frames(per[i], agg);
    e.label = split[i].label > 0.5 ? Label::bonafide : Label::attack;
    e.attack_type = p ? p->attack_type : AttackType::none;
    set.entries.push_back(std::move(e));
  }
  return set;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

TrainResult train_model(const ModelConfig& cfg, const std::vector<DiffSpec>& specs,
                        const std::vector<PresentationInputs>& train,
                        const std::vector<PresentationInputs>& dev) {
  cfg.validate();
  if (specs.empty()) fail(ErrorKind::precondition, "train_model: empty channel list");
  require_both_classes(train, "train");
  require_both_classes(dev, "dev");
  for (const auto* split : {&train, &dev})
    for (const auto& in : *split)
      for (const auto& t : in.frames)
        if (t.channels != static_cast<int>(specs.size()) || t.size != cfg.input_size)
          fail(ErrorKind::precondition, "train_model: inputs do not match channels/input size");

  ConvNet net(cfg, static_cast<int>(specs.size()));
  net.set_lambda(cfg.lambda);
  const std::size_t P = net.param_count();
  std::vector<double> params(P);
  const CounterRng root(cfg.seed);
  net.init(params, root.split("init"));
  round_to_float(params);

  const auto train_refs = frame_refs(train);
  const auto dev_refs = frame_refs(dev);
  TrainResult result;
  result.model.kind = cfg.kind;
  result.model.specs = specs;
  result.model.config = cfg;
  result.model.provenance.seed = cfg.seed;

  std::vector<double> scores, losses;
  evaluate_all(net, params, train, train_refs, scores, losses);
  result.initial_train_loss = mean_of(losses);

  nn::Adam adam(P, {.learning_rate = cfg.learning_rate});
  const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::vector<double>> grads(B, std::vector<double>(P));
  std::vector<double> batch_loss(B), total(P);
  std::vector<ConvNet::Workspace> ws(kernels::max_threads());

  double best_acer = std::numeric_limits<double>::infinity();
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> best_params = params;
  int best_epoch = -1;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<FrameRef> order = train_refs;
    CounterRng shuffle_rng = root.split("shuffle").split(static_cast<std::uint64_t>(epoch));
    shuffle(order, shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += B, ++batch_index) {
      const std::size_t nb = std::min(B, order.size() - start);
      const std::ptrdiff_t nbi = static_cast<std::ptrdiff_t>(nb);
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t b = 0; b < nbi; ++b) {
        auto& g = grads[b];
        std::fill(g.begin(), g.end(), 0.0);
        const auto& r = order[start + b];
        batch_loss[b] = net.loss_and_grad(params, train[r.presentation].frames[r.frame],
                                          train[r.presentation].label, g, ws[thread_id()]);
      }
      double loss = 0.0;
      std::fill(total.begin(), total.end(), 0.0);
      for (std::size_t b = 0; b < nb; ++b) {
        loss += batch_loss[b];
        for (std::size_t i = 0; i < P; ++i) total[i] += grads[b][i];
      }
      const double inv = 1.0 / static_cast<double>(nb);
      for (double& g : total) g *= inv;
      if (!std::isfinite(loss))
        fail(ErrorKind::training, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(batch_index));
      epoch_loss += loss;
      adam.step(params, total);
      round_to_float(params);
    }

    evaluate_all(net, params, dev, dev_refs, scores, losses);
    const ScoreSet dev_set = to_score_set(dev, dev_refs, scores, cfg.frame_agg);
    const double tau = threshold_at_bpcer(dev_set, 1.0).tau;
    const double acer = compute_rates(dev_set, tau).acer;
    const double dev_loss = mean_of(losses);
    result.history.push_back({epoch, epoch_loss / static_cast<double>(order.size()), acer, dev_loss});
    if (acer < best_acer || (acer == best_acer && dev_loss < best_loss)) {
      best_acer = acer;
      best_loss = dev_loss;
      best_params = params;
      best_epoch = epoch;
    }
  }
  result.best_dev_acer = best_acer;
  result.model.parameters = std::move(best_params);
  result.model.provenance.best_epoch = best_epoch;
  return result;
}

// --- scoring --------------------------------------------------------------------

double aggregate_frames(std::vector<double> scores, FrameAgg agg) {
  if (scores.empty()) fail(ErrorKind::precondition, "aggregate_frames: no frame scores");
  switch (agg) {
    case FrameAgg::mean: return mean_of(scores);
    case FrameAgg::min: return *std::min_element(scores.begin(), scores.end());
    case FrameAgg::median: {
      std::sort(scores.begin(), scores.end());
      const std::size_t n = scores.size();
      return n % 2 ? scores[n / 2] : (scores[n / 2 - 1] + scores[n / 2]) / 2.0;
    }
  }
  return 0.0;
}

std::vector<double> score_frames(const TrainedScorer& m, const PresentationInputs& in) {
  if (m.kind == ModelKind::pixel_svm) {
    const SkinPixelModel model = unpack_pixel_svm(m);
    std::vector<double> out;
    for (const auto& t : in.frames) out.push_back(score_pixel_svm(model, t));
    return out;
  }
  ConvNet net(m.config, static_cast<int>(m.specs.size()));
  net.set_lambda(m.config.lambda);
  if (net.param_count() != m.parameters.size())
    fail(ErrorKind::format, "model parameter count does not match its configuration");
  std::vector<double> scores, losses;
  std::vector<PresentationInputs> one{in};
  evaluate_all(net, m.parameters, one, frame_refs(one), scores, losses);
  return scores;
}

double score_presentation(const TrainedScorer& m, const PresentationInputs& in) {
  return aggregate_frames(score_frames(m, in), m.config.frame_agg);
}

double score_presentation(const TrainedScorer& m, const Presentation& p) {
  return score_presentation(m, prepare_inputs(p, m.specs, m.config));
}

ScoreSet score_split(const TrainedScorer& m, const std::vector<PresentationInputs>& inputs,
                     const std::string& split, const std::string& protocol) {
  ScoreSet set;
  set.split = split;
  set.protocol = protocol;
  for (const auto& in : inputs) {
    ScoreEntry e;
    e.id = in.presentation ? in.presentation->id : "p" + std::to_string(set.entries.size());
    e.score = score_presentation(m, in);
    e.label = in.label > 0.5 ? Label::bonafide : Label::attack;
    e.attack_type = in.presentation ? in.presentation->attack_type : AttackType::none;
    set.entries.push_back(std::move(e));
  }
  return set;
}

}  // namespace spad
