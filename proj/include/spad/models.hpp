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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spad/dataset.hpp"
#include "spad/evalkit.hpp"
#include "spad/nn.hpp"
#include "spad/swirdiff.hpp"

namespace spad {

enum class ModelKind { pixbis, mccnn, pixel_svm };
enum class FrameAgg { mean, min, median };

const char* to_string(ModelKind k);
const char* to_string(FrameAgg a);
std::optional<ModelKind> parse_model_kind(std::string_view s);  // accepts pixel-svm too
std::optional<FrameAgg> parse_frame_agg(std::string_view s);

/// Hyperparameters for every scorer kind. Fields irrelevant to a kind are
/// ignored by it; `default_config` fills kind-specific defaults.
struct ModelConfig {
  ModelKind kind = ModelKind::pixbis;
  int input_size = 112;
  /// pixbis: stem + stage widths (one 2x downsampling per entry);
  /// mccnn: the channel-specific first-stage width (first entry).
  std::vector<int> widths = {16, 32, 64};
  int map_size = 14;
  int embedding = 32;  // mccnn shared-trunk output per channel
  double lambda = 0.5;
  double learning_rate = 1e-4;
  int batch_size = 16;
  int epochs = 30;
  std::uint64_t seed = 0;
  std::size_t frames = 10;  // frames sampled per presentation
  FrameAgg frame_agg = FrameAgg::mean;
  double epsilon = kDefaultEpsilon;
  // pixel SVM baseline
  int gmm_components = 2;
  double svm_gamma = 0.1;
  double svm_c = 1.0;
  double pixel_fraction = 0.01;
  std::size_t max_svm_samples = 3000;

  void validate() const;
};

ModelConfig default_config(ModelKind kind);
nlohmann::ordered_json to_json(const ModelConfig& c);
/// Missing keys keep the defaults of `base`.
ModelConfig config_from_json(const nlohmann::json& j, ModelConfig base);

// --- networks ----------------------------------------------------------------

/// Input tensor: channels x size x size, row-major.
struct Tensor {
  int channels = 0;
  int size = 0;
  std::vector<double> values;
};

/// Pixel-wise supervised scorer: 3x3 conv stem, then one conv + 2x2 average
/// pool stage per width, a 1x1 conv + sigmoid producing the map_size^2
/// supervision map, and a linear + sigmoid binary head over the flattened map.
class PixBisNet {
 public:
  PixBisNet(const ModelConfig& cfg, int channels);

  const nn::ParamLayout& layout() const noexcept { return layout_; }
  int channels() const noexcept { return channels_; }
  int map_cells() const noexcept { return map_size_ * map_size_; }

  /// Random init; the stem is drawn as a 3-channel bank and adapted to the
  /// input channel count with nn::adapt_first_layer.
  void init(std::span<double> params, CounterRng rng) const;

  struct Workspace {
    std::vector<std::vector<double>> acts;  // conv outputs (post-ReLU), pools, map
    double binary = 0.0;
  };
  struct Output {
    std::vector<double> map;
    double binary = 0.0;
  };

  Output forward(std::span<const double> params, const Tensor& x, Workspace& ws) const;
  /// Loss of one sample; accumulates its gradient into `grad`.
  double loss_and_grad(std::span<const double> params, const Tensor& x, double label,
                       std::span<double> grad, Workspace& ws) const;

 private:
  struct Conv {
    kernels::ConvShape shape;
    std::size_t w = 0, b = 0;
    bool pool = false;
  };
  int channels_;
  int input_size_;
  int map_size_;
  double lambda_;
  std::vector<Conv> convs_;  // stem + stages
  std::size_t head_w_ = 0, head_b_ = 0, bin_w_ = 0, bin_b_ = 0;
  int head_in_ = 0;
  nn::ParamLayout layout_;
};

/// Late-fusion scorer: every input channel runs through its own first conv
/// stage and a shared second stage, is globally average pooled into an
/// embedding, and the concatenated embeddings feed FC(10, sigmoid) ->
/// FC(1, sigmoid).
class McCnnNet {
 public:
  static constexpr int kHidden = 10;

  McCnnNet(const ModelConfig& cfg, int channels);

  const nn::ParamLayout& layout() const noexcept { return layout_; }
  void init(std::span<double> params, CounterRng rng) const;

  struct Workspace {
    std::vector<std::vector<double>> acts;
  };
  double forward(std::span<const double> params, const Tensor& x, Workspace& ws) const;
  double loss_and_grad(std::span<const double> params, const Tensor& x, double label,
                       std::span<double> grad, Workspace& ws) const;

 private:
  int channels_, size_, width_, embedding_;
  std::vector<std::size_t> own_w_, own_b_;
  std::size_t shared_w_ = 0, shared_b_ = 0, fc1_w_ = 0, fc1_b_ = 0, fc2_w_ = 0, fc2_b_ = 0;
  nn::ParamLayout layout_;
};

/// Combined loss: lambda * mean_k BCE(map_k, label) + (1 - lambda) *
/// BCE(binary, label), probabilities clamped to [1e-7, 1 - 1e-7].
double pixbis_loss(std::span<const double> map, double binary, double label, double lambda);

// --- trained scorers ----------------------------------------------------------

struct Provenance {
  std::uint64_t seed = 0;
  std::string manifest_hash;
  int best_epoch = -1;
  std::string protocol;
};

struct TrainedScorer {
  ModelKind kind = ModelKind::pixbis;
  std::vector<DiffSpec> specs;
  ModelConfig config;
  Provenance provenance;
  /// Flat parameters; every value is float32-representable so the in-memory
  /// model and its serialized form score identically.
  std::vector<double> parameters;
  /// Extra shape metadata (pixel SVM sizes); empty for the CNNs.
  nlohmann::ordered_json extra;
};

void save_model(const TrainedScorer& m, const std::filesystem::path& path);
TrainedScorer load_model(const std::filesystem::path& path);
/// In-memory encoding, used by save_model and for hashing.
std::string encode_model(const TrainedScorer& m);
TrainedScorer decode_model(std::string_view bytes);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_acer = 0.0;
  double dev_loss = 0.0;
};

struct TrainResult {
  TrainedScorer model;
  double initial_train_loss = 0.0;
  std::vector<EpochRecord> history;
  double best_dev_acer = 100.0;
};

/// Inputs of one presentation: one tensor per sampled frame.
struct PresentationInputs {
  const Presentation* presentation = nullptr;
  double label = 0.0;  // 1 bonafide, 0 attack
  std::vector<Tensor> frames;
};

/// Samples frames, builds the normalized-difference channels and resamples
/// them to the model input size.
PresentationInputs prepare_inputs(const Presentation& p, const std::vector<DiffSpec>& specs,
                                  const ModelConfig& cfg);
/// Same, from already-loaded frames.
PresentationInputs prepare_inputs(const Presentation& p, const std::vector<SpectralStack>& frames,
                                  const std::vector<DiffSpec>& specs, const ModelConfig& cfg);

/// Trains a convolutional scorer (pixbis or mccnn) with one dev evaluation per
/// epoch and returns the best-dev-epoch weights.
TrainResult train_model(const ModelConfig& cfg, const std::vector<DiffSpec>& specs,
                        const std::vector<PresentationInputs>& train,
                        const std::vector<PresentationInputs>& dev);

/// Per-frame scores in [0, 1] (higher = bonafide).
std::vector<double> score_frames(const TrainedScorer& m, const PresentationInputs& in);
double aggregate_frames(std::vector<double> scores, FrameAgg agg);
double score_presentation(const TrainedScorer& m, const Presentation& p);
double score_presentation(const TrainedScorer& m, const PresentationInputs& in);

/// Scores every presentation of a split.
ScoreSet score_split(const TrainedScorer& m, const std::vector<PresentationInputs>& inputs,
                     const std::string& split, const std::string& protocol);

}  // namespace spad
