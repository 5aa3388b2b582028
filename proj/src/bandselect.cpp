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

#include "spad/bandselect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spad/kernels.hpp"
#include "spad/svm.hpp"

namespace fs = std::filesystem;

namespace spad {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

std::string fmt_ratio(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

// --- ranking -------------------------------------------------------------------

std::vector<DiffSpec> RankedDiffs::specs() const {
  std::vector<DiffSpec> out;
  for (const auto& e : entries) out.push_back(e.spec);
  return out;
}

std::vector<double> spatial_mean_features(const SpectralStack& stack,
                                          const std::vector<DiffSpec>& specs, double epsilon) {
  const DiffStack ds = build_diff_stack(stack, specs, epsilon);
  std::vector<double> out;
  out.reserve(specs.size());
  for (const auto& m : ds.maps) out.push_back(m.mean());
  return out;
}

RankedDiffs rank_from_features(std::span<const double> features,
                               std::span<const unsigned char> is_bonafide,
                               const std::vector<DiffSpec>& specs) {
  const std::size_t dim = specs.size();
  const std::size_t n = is_bonafide.size();
  if (features.size() != n * dim) fail(ErrorKind::precondition, "rank: feature matrix shape mismatch");
  const auto nb = static_cast<std::size_t>(std::count(is_bonafide.begin(), is_bonafide.end(), 1));
  if (nb < 2) fail(ErrorKind::precondition, "rank: intra undefined (fewer than 2 bonafide examples)");
  if (nb == n) fail(ErrorKind::precondition, "rank: inter undefined (no attack examples)");

  std::vector<double> intra(dim), inter(dim);
  RankedDiffs r;
  kernels::omp::class_pair_distances(features, dim, is_bonafide, intra, inter, r.k_bf, r.k_a);
  for (std::size_t d = 0; d < dim; ++d) {
    RankedEntry e;
    e.spec = specs[d];
    e.intra = intra[d] / static_cast<double>(r.k_bf);
    e.inter = inter[d] / static_cast<double>(r.k_a);
    if (e.intra == 0.0) {
      e.ratio = kInf;
      e.degenerate = true;
    } else {
      e.ratio = e.inter / e.intra;
    }
    r.entries.push_back(e);
  }
  std::stable_sort(r.entries.begin(), r.entries.end(),
                   [](const RankedEntry& a, const RankedEntry& b) { return a.ratio > b.ratio; });
  return r;
}

RankedDiffs rank_differences(const std::vector<SpectralStack>& examples,
                             const std::vector<Label>& labels,
                             const std::vector<Wavelength>& wavelengths, double epsilon) {
  if (examples.size() != labels.size())
    fail(ErrorKind::precondition, "rank: examples and labels differ in length");
  const auto specs = enumerate_ordered_pairs(wavelengths);
  const std::size_t dim = specs.size();
  std::vector<double> features(examples.size() * dim);
  std::vector<unsigned char> bf(examples.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(examples.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto s = spatial_mean_features(examples[i], specs, epsilon);
    std::copy(s.begin(), s.end(), features.begin() + i * dim);
    bf[i] = labels[i] == Label::bonafide ? 1 : 0;
  }
  return rank_from_features(features, bf, specs);
}

std::string format_ranking_csv(const RankedDiffs& r) {
  std::string s = "rank,s1,s2,ratio,degenerate\n";
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    const auto& e = r.entries[i];
    s += std::to_string(i + 1) + ',' + std::to_string(e.spec.s1) + ',' + std::to_string(e.spec.s2) +
         ',' + fmt_ratio(e.ratio) + ',' + (e.degenerate ? "1" : "0") + '\n';
  }
  return s;
}

void write_ranking_csv(const RankedDiffs& r, const fs::path& path) {
  write_text(path, format_ranking_csv(r));
}

RankedDiffs read_ranking_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("rank,s1,s2,ratio", 0) != 0) fail(ErrorKind::format, path.string() + ": not a ranking file");
  RankedDiffs r;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string rank, s1, s2, ratio, degenerate;
    if (!std::getline(ss, rank, ',') || !std::getline(ss, s1, ',') || !std::getline(ss, s2, ',') ||
        !std::getline(ss, ratio, ',') || !std::getline(ss, degenerate))
      fail(ErrorKind::format, path.string() + ": malformed row '" + line + "'");
    RankedEntry e;
    try {
      e.spec = {std::stoi(s1), std::stoi(s2)};
      e.ratio = ratio == "inf" ? kInf : std::stod(ratio);
    } catch (const std::exception&) {
      fail(ErrorKind::format, path.string() + ": malformed row '" + line + "'");
    }
    e.degenerate = degenerate == "1";
    r.entries.push_back(e);
  }
  return r;
}

// --- selection --------------------------------------------------------------------

double CachedCriterion::operator()(const std::vector<DiffSpec>& subset) {
  const std::string key = tag_ + "|" + join_diff_specs(subset);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) {
      ++hits_;
      return it->second;
    }
  }
  const double v = inner_(subset);
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = cache_.emplace(key, v);
  if (inserted)
    ++misses_;
  else
    ++hits_;
  return it->second;
}

std::size_t CachedCriterion::hits() const {
  std::lock_guard<std::mutex> lock(mu_);
  return hits_;
}

std::size_t CachedCriterion::misses() const {
  std::lock_guard<std::mutex> lock(mu_);
  return misses_;
}

SelectionResult sffs_select(const std::vector<DiffSpec>& ordered, const Criterion& J,
                            const SffsOptions& opt) {
  if (ordered.empty()) fail(ErrorKind::precondition, "sffs_select: empty candidate list");
  SelectionResult r;
  r.best_error = 100.0;

  auto evaluate = [&](const std::vector<DiffSpec>& subset, bool forward) -> TraceEntry& {
    TraceEntry t;
    t.subset = subset;
    t.forward = forward;
    try {
      t.value = J(subset);
    } catch (const Error& e) {
      t.value = 100.0;
      t.failed = true;
      t.error = e.what();
    }
    r.trace.push_back(std::move(t));
    return r.trace.back();
  };
  auto notify = [&](const TraceEntry& t) {
    if (opt.on_evaluation) opt.on_evaluation(t);
  };

  for (const DiffSpec& si : ordered) {
    if (r.best_error <= opt.lower_bound) {
      r.stopped_at_bound = true;
      break;
    }
    std::vector<DiffSpec> candidate = r.selected;
    candidate.push_back(si);
    TraceEntry& fwd = evaluate(candidate, true);
    if (!(fwd.value < r.best_error)) {
      notify(fwd);
      continue;
    }
    fwd.accepted = true;
    notify(fwd);
    r.selected = candidate;
    r.best_error = fwd.value;

    // Backward sweep over the members present before s_i was added.
    const std::vector<DiffSpec> earlier(r.selected.begin(), r.selected.end() - 1);
    for (const DiffSpec& sj : earlier) {
      std::vector<DiffSpec> reduced;
      for (const DiffSpec& s : r.selected)
        if (!(s == sj)) reduced.push_back(s);
      TraceEntry& back = evaluate(reduced, false);
      if (back.value < r.best_error) {
        back.accepted = true;
        r.selected = reduced;
        r.best_error = back.value;
      }
      notify(back);
    }
  }
  return r;
}

// --- dev-ACER criterion --------------------------------------------------------------

FrameCache::FrameCache(const ProtocolView& view, std::size_t frames_per_presentation) {
  std::vector<const Presentation*> all;
  for (Split s : kSplits)
    for (const Presentation* p : view.split(s)) all.push_back(p);
  std::vector<std::vector<SpectralStack>> loaded(all.size());
  std::string error;
  ErrorKind kind = ErrorKind::io;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(all.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      loaded[i] = sample_frames(*all[i], frames_per_presentation);
    } catch (const Error& e) {
#pragma omp critical(spad_frame_cache)
      if (error.empty()) {
        error = e.what();
        kind = e.kind();
      }
    }
  }
  if (!error.empty()) fail(kind, error);
  for (std::size_t i = 0; i < all.size(); ++i) frames_[all[i]] = std::move(loaded[i]);
}

const std::vector<SpectralStack>& FrameCache::frames(const Presentation* p) const {
  auto it = frames_.find(p);
  if (it == frames_.end()) fail(ErrorKind::precondition, "frame cache: presentation not loaded");
  return it->second;
}

std::vector<PresentationInputs> build_inputs(const std::vector<const Presentation*>& split,
                                             const FrameCache& cache,
                                             const std::vector<DiffSpec>& specs,
                                             const ModelConfig& cfg) {
  std::vector<PresentationInputs> out(split.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(split.size());
  std::string error;
  ErrorKind kind = ErrorKind::domain;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = prepare_inputs(*split[i], cache.frames(split[i]), specs, cfg);
    } catch (const Error& e) {
#pragma omp critical(spad_build_inputs)
      if (error.empty()) {
        error = e.what();
        kind = e.kind();
      }
    }
  }
  if (!error.empty()) fail(kind, error);
  return out;
}

TrainResult train_any(const ModelConfig& cfg, const std::vector<DiffSpec>& specs,
                      const std::vector<PresentationInputs>& train,
                      const std::vector<PresentationInputs>& dev) {
  if (cfg.kind != ModelKind::pixel_svm) return train_model(cfg, specs, train, dev);
  TrainResult r;
  r.model = train_pixel_svm_model(cfg, specs, train);
  ScoreSet d = score_split(r.model, dev, "dev", "");
  r.best_dev_acer = compute_rates(d, threshold_at_bpcer(d, 1.0).tau).acer;
  return r;
}

Criterion acer_criterion(const ModelConfig& cfg, const ProtocolView& view, const FrameCache& cache) {
  if (view.train.empty() || view.dev.empty())
    fail(ErrorKind::precondition, "acer_criterion: train and dev splits must be non-empty");
  return [cfg, &view, &cache](const std::vector<DiffSpec>& subset) -> double {
    if (subset.empty()) return 100.0;
    const auto train = build_inputs(view.train, cache, subset, cfg);
    const auto dev = build_inputs(view.dev, cache, subset, cfg);
    return train_any(cfg, subset, train, dev).best_dev_acer;
  };
}

nlohmann::ordered_json selection_to_json(const SelectionResult& r, const std::string& protocol,
                                         const std::string& model) {
  nlohmann::ordered_json j;
  j["protocol"] = protocol;
  j["model"] = model;
  std::vector<std::string> sel;
  for (const auto& d : r.selected) sel.push_back(to_string(d));
  j["selected"] = sel;
  j["best_acer_percent"] = r.best_error;
  j["criterion_threshold"] = "dev BPCER 1%";
  j["stopped_at_bound"] = r.stopped_at_bound;
  nlohmann::ordered_json trace = nlohmann::ordered_json::array();
  for (const auto& t : r.trace) {
    std::vector<std::string> sub;
    for (const auto& d : t.subset) sub.push_back(to_string(d));
    nlohmann::ordered_json e;
    e["subset"] = sub;
    e["acer"] = t.value;
    e["step"] = t.forward ? "forward" : "backward";
    e["accepted"] = t.accepted;
    e["failed"] = t.failed;
    if (t.failed) e["error"] = t.error;
    trace.push_back(e);
  }
  j["trace"] = trace;
  return j;
}

void write_selection_json(const SelectionResult& r, const std::string& protocol,
                          const std::string& model, const fs::path& path) {
  write_text(path, selection_to_json(r, protocol, model).dump(2) + "\n");
}

std::vector<DiffSpec> read_selection(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    std::vector<DiffSpec> out;
    for (const auto& s : j.at("selected")) out.push_back(parse_diff_spec(s.get<std::string>()));
    if (out.empty()) fail(ErrorKind::config, path.string() + ": empty selection");
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, path.string() + ": " + e.what());
  }
}

}  // namespace spad
