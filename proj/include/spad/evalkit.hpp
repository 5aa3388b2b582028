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

// PAD error rates. Decision rule everywhere: a presentation is accepted as
// bonafide iff score >= tau, so higher scores mean "more bonafide".

#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spad/dataset.hpp"

namespace spad {

struct ScoreEntry {
  std::string id;
  double score = 0.0;
  Label label = Label::bonafide;
  AttackType attack_type = AttackType::none;
};

struct ScoreSet {
  std::vector<ScoreEntry> entries;
  std::string split;
  std::string protocol;

  std::size_t count(Label l) const;
  /// Unique ids, finite scores, at least one entry.
  void validate() const;
};

/// Rates in percent plus the integer counts they derive from.
struct RateTriple {
  double apcer = 0.0;
  double bpcer = 0.0;
  double acer = 0.0;
  double tau = 0.0;
  std::size_t attacks_accepted = 0;
  std::size_t attacks = 0;
  std::size_t bonafide_rejected = 0;
  std::size_t bonafide = 0;
};

/// Thrown when only one class is present; carries whichever rate is defined.
class PartialResultError : public Error {
 public:
  PartialResultError(const std::string& what, std::optional<double> apcer,
                     std::optional<double> bpcer)
      : Error(ErrorKind::partial_result, what), apcer(apcer), bpcer(bpcer) {}
  std::optional<double> apcer;
  std::optional<double> bpcer;
};

/// APCER = attacks with score >= tau, BPCER = bonafide with score < tau,
/// ACER = their mean, computed from integer counts with the division last.
RateTriple compute_rates(const ScoreSet& scores, double tau);

/// Half-sum of two reported percentages.
inline double acer_from_rates(double apcer, double bpcer) { return (apcer + bpcer) / 2.0; }

struct ThresholdResult {
  double tau = 0.0;
  double bpcer = 0.0;  // achieved on the set the threshold was chosen on
  bool granularity_warning = false;
};

/// Largest tau with BPCER <= target_percent. Candidates are the midpoints of
/// adjacent distinct bonafide scores, the minimum bonafide score (largest tau
/// with zero BPCER) and +inf.
ThresholdResult threshold_at_bpcer(const ScoreSet& dev, double target_percent = 1.0);

struct EerResult {
  double eer = 0.0;  // percent
  double tau = 0.0;
};

/// Sweeps midpoint thresholds; picks the one minimizing |APCER - BPCER|,
/// ties to the lower tau, and reports (APCER + BPCER) / 2 there.
EerResult eer(const ScoreSet& scores);

struct RocPoint {
  double tau = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
};

/// One point per gap between distinct scores plus -inf and +inf sentinels,
/// in increasing tau.
std::vector<RocPoint> roc_points(const ScoreSet& scores);

struct TypeRate {
  std::size_t count = 0;
  double apcer = 0.0;
};

/// Per-attack-type APCER at tau; types absent from the set are omitted.
std::map<AttackType, TypeRate> apcer_by_type(const ScoreSet& scores, double tau);

struct Report {
  double tau = 0.0;
  double dev_bpcer_target = 1.0;
  bool granularity_warning = false;
  RateTriple test;
  double test_eer = 0.0;
  std::map<AttackType, TypeRate> breakdown;
};

struct ReportLabels {
  std::string model = "-";
  std::string input = "-";
};

/// Chooses tau on dev at BPCER 1% and writes metrics.json, roc.csv,
/// breakdown.csv, roc.svg and summary.txt into `out`.
Report write_report(const ScoreSet& dev, const ScoreSet& test, const std::filesystem::path& out,
                    const ReportLabels& labels = {}, double dev_bpcer_target = 1.0);

/// Plain-text table with Model | Input | BPCER | APCER | ACER columns.
std::string format_summary(const Report& r, const std::string& protocol,
                           const ReportLabels& labels);

}  // namespace spad
