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

#include "spad/pipeline.hpp"

#include <cstdio>
#include <fstream>

namespace fs = std::filesystem;

namespace spad {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void note(const LogFn& log, const std::string& s) {
  if (log) log(s);
}

}  // namespace

RankedDiffs rank_split(const ProtocolView& view, const FrameCache& cache,
                       const std::vector<Wavelength>& wavelengths, double epsilon) {
  const auto specs = enumerate_ordered_pairs(wavelengths);
  std::vector<const SpectralStack*> frames;
  std::vector<unsigned char> bf;
  for (const Presentation* p : view.train)
    for (const auto& f : cache.frames(p)) {
      frames.push_back(&f);
      bf.push_back(p->label == Label::bonafide ? 1 : 0);
    }
  const std::size_t dim = specs.size();
  std::vector<double> features(frames.size() * dim);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(frames.size());
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto s = spatial_mean_features(*frames[i], specs, epsilon);
      std::copy(s.begin(), s.end(), features.begin() + i * dim);
    } catch (const Error& e) {
#pragma omp critical(spad_rank_split)
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) fail(ErrorKind::domain, error);
  return rank_from_features(features, bf, specs);
}

std::vector<Wavelength> dataset_wavelengths(const std::vector<Presentation>& data) {
  if (data.empty()) fail(ErrorKind::precondition, "empty dataset");
  const Presentation& p = data.front();
  if (!p.frames.empty()) return p.frames.front().wavelengths();
  std::vector<Wavelength> out;
  for (const auto& [wl, _] : p.frame_files.front()) out.push_back(wl);
  return out;
}

std::string format_scores_csv(const ScoreSet& s) {
  std::string out = "presentation_id,label,attack_type,score\n";
  for (const auto& e : s.entries)
    out += e.id + ',' + to_string(e.label) + ',' + to_string(e.attack_type) + ',' + num(e.score) + '\n';
  return out;
}

void write_scores_csv(const ScoreSet& s, const fs::path& path) { write_text(path, format_scores_csv(s)); }

std::string format_history_csv(const TrainResult& r) {
  std::string out = "epoch,train_loss,dev_acer,dev_loss\n";
  out += "0," + num(r.initial_train_loss) + ",,\n";
  for (const auto& e : r.history)
    out += std::to_string(e.epoch) + ',' + num(e.train_loss) + ',' + num(e.dev_acer) + ',' +
           num(e.dev_loss) + '\n';
  return out;
}

ReportLabels report_labels(const TrainedScorer& m) {
  ReportLabels l;
  switch (m.kind) {
    case ModelKind::pixbis: l.model = "PixBiS-mini"; break;
    case ModelKind::mccnn: l.model = "MC-CNN-mini"; break;
    case ModelKind::pixel_svm: l.model = "SVM"; break;
  }
  l.input = "dSWIR x" + std::to_string(m.specs.size());
  return l;
}

EvalResult evaluate_model(const TrainedScorer& model, const ProtocolView& view,
                          const FrameCache& cache, const fs::path& out) {
  const std::string protocol = to_string(view.protocol);
  EvalResult r;
  r.dev = score_split(model, build_inputs(view.dev, cache, model.specs, model.config), "dev", protocol);
  r.test = score_split(model, build_inputs(view.test, cache, model.specs, model.config), "test", protocol);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + out.string() + ": " + ec.message());
  write_scores_csv(r.dev, out / "scores_dev.csv");
  write_scores_csv(r.test, out / "scores_test.csv");
  r.report = write_report(r.dev, r.test, out, report_labels(model));
  return r;
}

PipelineResult run_pipeline(const std::vector<Presentation>& data, const PipelineOptions& opt,
                            const fs::path& out) {
  opt.model.validate();
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + out.string() + ": " + ec.message());

  const ProtocolView view = select_protocol(data, opt.protocol);
  for (const auto& w : view.warnings) note(opt.log, "warning: " + w);
  const std::string protocol = to_string(opt.protocol);
  const std::string model_name = to_string(opt.model.kind);
  const FrameCache cache(view, opt.model.frames);
  note(opt.log, "loaded " + std::to_string(view.train.size() + view.dev.size() + view.test.size()) +
                    " presentations");

  PipelineResult r;
  std::vector<DiffSpec> channels;
  if (opt.channels) {
    channels = *opt.channels;
  } else {
    r.ranking = rank_split(view, cache, dataset_wavelengths(data), opt.model.epsilon);
    write_ranking_csv(r.ranking, out / "ranking.csv");
    note(opt.log, "ranked " + std::to_string(r.ranking.entries.size()) + " differences");

    CachedCriterion J(acer_criterion(opt.model, view, cache), nlohmann::json(to_json(opt.model)).dump());
    SffsOptions so;
    so.lower_bound = 0.0;  // ACER cannot go below 0
    so.on_evaluation = [&](const TraceEntry& t) {
      note(opt.log, std::string(t.forward ? "  fwd " : "  bwd ") + join_diff_specs(t.subset) +
                        " acer=" + num(t.value) + (t.accepted ? " accepted" : "") +
                        (t.failed ? " FAILED: " + t.error : ""));
    };
    r.selection = sffs_select(r.ranking.specs(),
                              [&](const std::vector<DiffSpec>& s) { return J(s); }, so);
    write_selection_json(r.selection, protocol, model_name, out / "selection.json");
    note(opt.log, "selected " + join_diff_specs(r.selection.selected) + " (dev ACER " +
                      num(r.selection.best_error) + "%)");
    channels = r.selection.selected;
    if (channels.empty()) fail(ErrorKind::training, "selection kept no channels");
  }

  const auto train = build_inputs(view.train, cache, channels, opt.model);
  const auto dev = build_inputs(view.dev, cache, channels, opt.model);
  r.training = train_any(opt.model, channels, train, dev);
  r.training.model.provenance.manifest_hash = opt.manifest_hash;
  r.training.model.provenance.protocol = protocol;
  save_model(r.training.model, out / "model.spad");
  if (opt.model.kind != ModelKind::pixel_svm)
    write_text(out / "train_log.csv", format_history_csv(r.training));
  note(opt.log, "trained " + model_name + " on " + join_diff_specs(channels) + " (best epoch " +
                    std::to_string(r.training.model.provenance.best_epoch) + ")");

  r.eval = evaluate_model(r.training.model, view, cache, out);
  note(opt.log, "test ACER " + num(r.eval.report.test.acer) + "% at tau " + num(r.eval.report.tau));
  return r;
}

}  // namespace spad
