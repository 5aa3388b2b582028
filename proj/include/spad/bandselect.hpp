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

#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "spad/dataset.hpp"
#include "spad/models.hpp"
#include "spad/swirdiff.hpp"

namespace spad {

// --- ranking -----------------------------------------------------------------

struct RankedEntry {
  DiffSpec spec;
  double ratio = 0.0;  // inter / intra; +inf when intra is 0
  double intra = 0.0;
  double inter = 0.0;
  bool degenerate = false;
};

struct RankedDiffs {
  std::vector<RankedEntry> entries;  // ratio descending, ties in enumeration order
  std::size_t k_bf = 0;
  std::size_t k_a = 0;

  std::vector<DiffSpec> specs() const;
};

/// Spatial mean of every normalized difference of one frame.
std::vector<double> spatial_mean_features(const SpectralStack& stack,
                                          const std::vector<DiffSpec>& specs, double epsilon);

/// Ranking from precomputed per-example features (n x specs.size(), row-major).
RankedDiffs rank_from_features(std::span<const double> features,
                               std::span<const unsigned char> is_bonafide,
                               const std::vector<DiffSpec>& specs);

/// Inter/intra class variability ranking of all ordered band pairs.
RankedDiffs rank_differences(const std::vector<SpectralStack>& examples,
                             const std::vector<Label>& labels,
                             const std::vector<Wavelength>& wavelengths,
                             double epsilon = kDefaultEpsilon);

/// rank,s1,s2,ratio,degenerate
std::string format_ranking_csv(const RankedDiffs& r);
void write_ranking_csv(const RankedDiffs& r, const std::filesystem::path& path);
RankedDiffs read_ranking_csv(const std::filesystem::path& path);

// --- selection ------------------------------------------------------------------

/// Subset -> error in percent. May throw spad::Error to signal failure.
using Criterion = std::function<double(const std::vector<DiffSpec>&)>;

/// Memoizing wrapper, safe for concurrent calls. Keys are the exact ordered
/// channel list plus a configuration tag.
class CachedCriterion {
 public:
  CachedCriterion(Criterion inner, std::string tag) : inner_(std::move(inner)), tag_(std::move(tag)) {}
  double operator()(const std::vector<DiffSpec>& subset);
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  Criterion inner_;
  std::string tag_;
  mutable std::mutex mu_;
  std::map<std::string, double> cache_;
  std::size_t hits_ = 0, misses_ = 0;
};

struct TraceEntry {
  std::vector<DiffSpec> subset;
  double value = 0.0;
  bool failed = false;
  std::string error;
  bool forward = true;  // false for backward-removal candidates
  bool accepted = false;
};

struct SelectionResult {
  std::vector<DiffSpec> selected;
  double best_error = 100.0;
  std::vector<TraceEntry> trace;
  /// The forward pass stopped because e* reached the criterion's lower bound.
  bool stopped_at_bound = false;
};

struct SffsOptions {
  /// Once e* <= lower_bound no strict improvement is possible, so the
  /// remaining candidates are skipped; -inf disables the shortcut.
  double lower_bound = -std::numeric_limits<double>::infinity();
  std::function<void(const TraceEntry&)> on_evaluation;
};

/// Floating forward selection over the ranked order: a candidate is added when
/// it strictly lowers e*, after which each earlier member is dropped if that
/// strictly lowers e* further.
SelectionResult sffs_select(const std::vector<DiffSpec>& ordered, const Criterion& J,
                            const SffsOptions& opt = {});

// --- dev-ACER criterion -------------------------------------------------------------

/// Sampled frames of every presentation of a view, loaded once.
class FrameCache {
 public:
  FrameCache(const ProtocolView& view, std::size_t frames_per_presentation);
  const std::vector<SpectralStack>& frames(const Presentation* p) const;

 private:
  std::map<const Presentation*, std::vector<SpectralStack>> frames_;
};

std::vector<PresentationInputs> build_inputs(const std::vector<const Presentation*>& split,
                                             const FrameCache& cache,
                                             const std::vector<DiffSpec>& specs,
                                             const ModelConfig& cfg);

/// Trains `cfg` on the train split with the subset as channels and returns the
/// dev ACER at the dev BPCER = 1% threshold. Empty subsets score 100.
Criterion acer_criterion(const ModelConfig& cfg, const ProtocolView& view, const FrameCache& cache);

/// Trains any scorer kind; pixel_svm ignores dev.
TrainResult train_any(const ModelConfig& cfg, const std::vector<DiffSpec>& specs,
                      const std::vector<PresentationInputs>& train,
                      const std::vector<PresentationInputs>& dev);

nlohmann::ordered_json selection_to_json(const SelectionResult& r, const std::string& protocol,
                                         const std::string& model);
void write_selection_json(const SelectionResult& r, const std::string& protocol,
                          const std::string& model, const std::filesystem::path& path);
/// The `selected` list of a selection.json file.
std::vector<DiffSpec> read_selection(const std::filesystem::path& path);

}  // namespace spad
