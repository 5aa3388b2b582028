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

// End-to-end orchestration shared by the CLI and the acceptance suite:
// rank -> select -> train -> evaluate -> report.

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spad/bandselect.hpp"
#include "spad/dataset.hpp"
#include "spad/evalkit.hpp"
#include "spad/models.hpp"

namespace spad {

using LogFn = std::function<void(const std::string&)>;

/// Ranks on every sampled frame of the train split (one example per frame).
RankedDiffs rank_split(const ProtocolView& view, const FrameCache& cache,
                       const std::vector<Wavelength>& wavelengths, double epsilon);

/// Wavelengths shared by every frame of the first presentation.
std::vector<Wavelength> dataset_wavelengths(const std::vector<Presentation>& data);

std::string format_scores_csv(const ScoreSet& s);
void write_scores_csv(const ScoreSet& s, const std::filesystem::path& path);
std::string format_history_csv(const TrainResult& r);

/// Model label and input description used in summary tables.
ReportLabels report_labels(const TrainedScorer& m);

struct EvalResult {
  ScoreSet dev;
  ScoreSet test;
  Report report;
};

/// Scores dev and test with `model` and writes scores_*.csv plus the report.
EvalResult evaluate_model(const TrainedScorer& model, const ProtocolView& view,
                          const FrameCache& cache, const std::filesystem::path& out);

struct PipelineOptions {
  Protocol protocol = Protocol::grand_test;
  ModelConfig model = default_config(ModelKind::pixbis);
  /// Fixed channels skip ranking and selection.
  std::optional<std::vector<DiffSpec>> channels;
  std::string manifest_hash;
  LogFn log;
};

struct PipelineResult {
  RankedDiffs ranking;
  SelectionResult selection;
  TrainResult training;
  EvalResult eval;
};

/// Writes ranking.csv, selection.json, model.spad, train_log.csv, scores and
/// report files under `out`.
PipelineResult run_pipeline(const std::vector<Presentation>& data, const PipelineOptions& opt,
                            const std::filesystem::path& out);

}  // namespace spad
