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

// spad: synthgen | rank | select | train | eval | pipeline

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spad/bandselect.hpp"
#include "spad/kernels.hpp"
#include "spad/pipeline.hpp"
#include "spad/svm.hpp"
#include "spad/synthgen.hpp"

namespace fs = std::filesystem;
using namespace spad;

namespace {

struct Args {
  std::string data, protocol = "grand_test", model, channels, selection, ranking, model_config,
      config, out, model_file, frame_agg, log = "run.log";
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<int> epochs;
  std::optional<int> frames;
  int jobs = 0;
};

Protocol protocol_arg(const Args& a) {
  auto p = parse_protocol(a.protocol);
  if (!p) fail(ErrorKind::config, "unknown protocol '" + a.protocol + "'");
  return *p;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, path.string() + ": " + e.what());
  }
}

ModelConfig model_config_arg(const Args& a) {
  std::optional<ModelKind> kind;
  if (!a.model.empty()) {
    kind = parse_model_kind(a.model);
    if (!kind) fail(ErrorKind::config, "unknown model '" + a.model + "'");
  }
  ModelConfig c = default_config(kind.value_or(ModelKind::pixbis));
  if (!a.model_config.empty()) {
    nlohmann::json j = read_json(a.model_config);
    if (kind && j.contains("kind") && parse_model_kind(j["kind"].get<std::string>()) != kind)
      fail(ErrorKind::config, "--model disagrees with the kind in " + a.model_config);
    if (kind) j["kind"] = to_string(*kind);
    c = config_from_json(j, c);
  }
  if (a.seed) c.seed = *a.seed;
  if (a.epochs) c.epochs = *a.epochs;
  if (a.frames) c.frames = static_cast<std::size_t>(*a.frames);
  if (a.epsilon) c.epsilon = *a.epsilon;
  if (!a.frame_agg.empty()) {
    auto f = parse_frame_agg(a.frame_agg);
    if (!f) fail(ErrorKind::config, "unknown frame aggregation '" + a.frame_agg + "'");
    c.frame_agg = *f;
  }
  c.validate();
  return c;
}

std::string manifest_hash(const fs::path& root) {
  std::ifstream in(root / "manifest.csv", std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

std::vector<DiffSpec> channels_arg(const Args& a) {
  if (!a.channels.empty() && !a.selection.empty())
    fail(ErrorKind::config, "--channels and --selection are mutually exclusive");
  if (!a.channels.empty()) return parse_diff_specs(a.channels);
  if (!a.selection.empty()) return read_selection(a.selection);
  return {};
}

void require(const std::string& v, const char* flag) {
  if (v.empty()) fail(ErrorKind::config, std::string("missing required flag ") + flag);
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + p.string() + ": " + ec.message());
}

void say(const std::string& s) { std::cerr << s << '\n'; }

// --- commands ---------------------------------------------------------------------

std::string cmd_synthgen(const Args& a) {
  require(a.out, "--out");
  GeneratorConfig cfg = a.config.empty() ? default_generator_config() : load_generator_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const fs::path manifest = generate_dataset(cfg, a.out);
  say("wrote " + std::to_string(cfg.total()) + " presentations, manifest " + manifest.string());
  return to_json(cfg).dump();
}

std::string cmd_rank(const Args& a) {
  require(a.data, "--data");
  require(a.out, "--out");
  const auto data = load_manifest(a.data);
  const ProtocolView view = select_protocol(data, protocol_arg(a));
  const FrameCache cache(view, a.frames ? static_cast<std::size_t>(*a.frames) : 10);
  const double eps = a.epsilon.value_or(kDefaultEpsilon);
  const RankedDiffs r = rank_split(view, cache, dataset_wavelengths(data), eps);
  if (fs::path(a.out).has_parent_path()) make_dir(fs::path(a.out).parent_path());
  write_ranking_csv(r, a.out);
  say("ranked " + std::to_string(r.entries.size()) + " differences; top " + to_string(r.entries.front().spec));
  return nlohmann::json{{"protocol", a.protocol}, {"epsilon", eps}, {"manifest", manifest_hash(a.data)}}.dump();
}

std::string cmd_select(const Args& a) {
  require(a.data, "--data");
  require(a.out, "--out");
  const ModelConfig cfg = model_config_arg(a);
  const auto data = load_manifest(a.data);
  const ProtocolView view = select_protocol(data, protocol_arg(a));
  const FrameCache cache(view, cfg.frames);
  make_dir(a.out);
  RankedDiffs ranking;
  if (!a.ranking.empty()) {
    ranking = read_ranking_csv(a.ranking);
  } else {
    ranking = rank_split(view, cache, dataset_wavelengths(data), cfg.epsilon);
    write_ranking_csv(ranking, fs::path(a.out) / "ranking.csv");
  }
  CachedCriterion J(acer_criterion(cfg, view, cache), nlohmann::json(to_json(cfg)).dump());
  SffsOptions so;
  so.lower_bound = 0.0;
  so.on_evaluation = [](const TraceEntry& t) {
    say(std::string(t.forward ? "fwd " : "bwd ") + join_diff_specs(t.subset) + " acer=" +
        std::to_string(t.value) + (t.accepted ? " accepted" : ""));
  };
  const SelectionResult r = sffs_select(ranking.specs(), [&](const auto& s) { return J(s); }, so);
  write_selection_json(r, a.protocol, to_string(cfg.kind), fs::path(a.out) / "selection.json");
  say("selected " + join_diff_specs(r.selected) + " dev ACER " + std::to_string(r.best_error) + "%");
  return nlohmann::json{{"model", to_json(cfg)}, {"manifest", manifest_hash(a.data)}}.dump();
}

std::string cmd_train(const Args& a) {
  require(a.data, "--data");
  require(a.out, "--out");
  const ModelConfig cfg = model_config_arg(a);
  auto specs = channels_arg(a);
  const auto data = load_manifest(a.data);
  if (specs.empty()) {
    if (cfg.kind != ModelKind::pixel_svm) fail(ErrorKind::config, "train needs --channels or --selection");
    specs = default_svm_specs(dataset_wavelengths(data));
  }
  const ProtocolView view = select_protocol(data, protocol_arg(a));
  const FrameCache cache(view, cfg.frames);
  TrainResult r = train_any(cfg, specs, build_inputs(view.train, cache, specs, cfg),
                            build_inputs(view.dev, cache, specs, cfg));
  r.model.provenance.manifest_hash = manifest_hash(a.data);
  r.model.provenance.protocol = a.protocol;
  make_dir(a.out);
  save_model(r.model, fs::path(a.out) / "model.spad");
  if (cfg.kind != ModelKind::pixel_svm) {
    std::ofstream log(fs::path(a.out) / "train_log.csv", std::ios::binary | std::ios::trunc);
    log << format_history_csv(r);
  }
  say("trained " + std::string(to_string(cfg.kind)) + " on " + join_diff_specs(specs) + ", best dev ACER " +
      std::to_string(r.best_dev_acer) + "%");
  return nlohmann::json{{"model", to_json(cfg)}, {"channels", join_diff_specs(specs)},
                        {"manifest", r.model.provenance.manifest_hash}}
      .dump();
}

std::string cmd_eval(const Args& a) {
  require(a.data, "--data");
  require(a.out, "--out");
  require(a.model_file, "--model-file");
  TrainedScorer m = load_model(a.model_file);
  if (!a.frame_agg.empty()) {
    auto f = parse_frame_agg(a.frame_agg);
    if (!f) fail(ErrorKind::config, "unknown frame aggregation '" + a.frame_agg + "'");
    m.config.frame_agg = *f;
  }
  const auto data = load_manifest(a.data);
  const ProtocolView view = select_protocol(data, protocol_arg(a));
  const FrameCache cache(view, m.config.frames);
  const EvalResult r = evaluate_model(m, view, cache, a.out);
  std::cout << format_summary(r.report, a.protocol, report_labels(m));
  return nlohmann::json{{"model_file", hex64(fnv1a64(encode_model(m)))}, {"manifest", manifest_hash(a.data)}}
      .dump();
}

std::string cmd_pipeline(const Args& a) {
  require(a.out, "--out");
  const fs::path out(a.out);
  make_dir(out);
  fs::path data_root = a.data;
  std::string gen;
  if (data_root.empty()) {
    GeneratorConfig g = a.config.empty() ? default_generator_config() : load_generator_config(a.config);
    if (a.seed) g.seed = *a.seed;
    data_root = out / "data";
    generate_dataset(g, data_root);
    gen = to_json(g).dump();
    say("generated " + std::to_string(g.total()) + " presentations");
  }
  PipelineOptions opt;
  opt.protocol = protocol_arg(a);
  opt.model = model_config_arg(a);
  auto specs = channels_arg(a);
  if (!specs.empty()) opt.channels = specs;
  opt.manifest_hash = manifest_hash(data_root);
  opt.log = say;
  const auto data = load_manifest(data_root);
  const PipelineResult r = run_pipeline(data, opt, out);
  std::cout << format_summary(r.eval.report, a.protocol, report_labels(r.training.model));
  return nlohmann::json{{"model", to_json(opt.model)}, {"generator", gen}, {"manifest", opt.manifest_hash}}
      .dump();
}

int exit_code(ErrorKind k) { return k == ErrorKind::io ? 2 : 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multispectral SWIR face presentation attack detection toolkit"};
  app.require_subcommand(1);
  Args a;
  auto shared = [&](CLI::App* c) {
    c->add_option("--data", a.data, "Dataset root containing manifest.csv");
    c->add_option("--protocol", a.protocol, "grand_test | impersonation | obfuscation");
    c->add_option("--seed", a.seed, "Random seed");
    c->add_option("--epsilon", a.epsilon, "Normalized-difference epsilon");
    c->add_option("--out", a.out, "Output directory (file for rank)");
    c->add_option("--jobs", a.jobs, "Worker thread cap");
    c->add_option("--log", a.log, "Provenance log appended to on exit");
  };
  auto model_flags = [&](CLI::App* c) {
    c->add_option("--model", a.model, "pixbis | mccnn | pixel-svm");
    c->add_option("--model-config", a.model_config, "Model hyperparameters (JSON)");
    c->add_option("--epochs", a.epochs, "Override training epochs");
    c->add_option("--frames", a.frames, "Frames sampled per presentation");
    c->add_option("--frame-agg", a.frame_agg, "mean | min | median");
  };
  auto* synth = app.add_subcommand("synthgen", "Generate a synthetic dataset");
  shared(synth);
  synth->add_option("--config", a.config, "generator.json");
  auto* rank = app.add_subcommand("rank", "Rank all ordered band differences");
  shared(rank);
  rank->add_option("--frames", a.frames, "Frames sampled per presentation");
  auto* select = app.add_subcommand("select", "Floating forward selection on dev ACER");
  shared(select);
  model_flags(select);
  select->add_option("--ranking", a.ranking, "Existing ranking.csv");
  auto* train = app.add_subcommand("train", "Train a scorer");
  shared(train);
  model_flags(train);
  train->add_option("--channels", a.channels, "Comma-separated s1-s2 list");
  train->add_option("--selection", a.selection, "selection.json");
  auto* eval = app.add_subcommand("eval", "Score dev/test and write the report");
  shared(eval);
  eval->add_option("--model-file", a.model_file, "Trained model file");
  eval->add_option("--frame-agg", a.frame_agg, "mean | min | median");
  auto* pipe = app.add_subcommand("pipeline", "generate -> rank -> select -> train -> eval");
  shared(pipe);
  model_flags(pipe);
  pipe->add_option("--config", a.config, "generator.json");
  pipe->add_option("--channels", a.channels, "Fixed channels (skips selection)");
  pipe->add_option("--selection", a.selection, "selection.json (skips selection)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  std::string command;
  for (int i = 1; i < argc; ++i) command += (i > 1 ? " " : "") + std::string(argv[i]);
  int code = 0;
  std::string config;
  try {
    kernels::set_max_threads(a.jobs);
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "synthgen") config = cmd_synthgen(a);
    else if (name == "rank") config = cmd_rank(a);
    else if (name == "select") config = cmd_select(a);
    else if (name == "train") config = cmd_train(a);
    else if (name == "eval") config = cmd_eval(a);
    else config = cmd_pipeline(a);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    code = exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = 1;
  }

  nlohmann::ordered_json line;
  line["command"] = command;
  line["seed"] = a.seed ? nlohmann::json(*a.seed) : nlohmann::json(nullptr);
  line["config_hash"] = hex64(fnv1a64(config));
  line["exit"] = code;
  std::ofstream log(a.log, std::ios::app);
  if (log) log << line.dump() << '\n';
  return code;
}
