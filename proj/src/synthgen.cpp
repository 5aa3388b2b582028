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

#include "spad/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace spad {

const char* to_string(Material m) {
  switch (m) {
    case Material::skin: return "skin";
    case Material::paper: return "paper";
    case Material::silicone: return "silicone";
    case Material::plastic: return "plastic";
    case Material::screen: return "screen";
    case Material::fabric: return "fabric";
    case Material::tattoo_ink_on_skin: return "tattoo_ink_on_skin";
    case Material::glass_lens: return "glass_lens";
    case Material::makeup_on_skin: return "makeup_on_skin";
  }
  return "?";
}

std::optional<Material> parse_material(std::string_view s) {
  for (Material m : kMaterials)
    if (s == to_string(m)) return m;
  return std::nullopt;
}

MaterialTable default_materials() {
  // Columns: 465 550 640 | 940 1050 1200 1300 1450 1550 1650
  const std::vector<Wavelength> wl = {465, 550, 640, 940, 1050, 1200, 1300, 1450, 1550, 1650};
  auto row = [&](std::vector<double> v, double variability) {
    MaterialSpectrum s;
    s.variability = variability;
    for (std::size_t i = 0; i < wl.size(); ++i) s.reflectance[wl[i]] = v[i];
    return s;
  };
  MaterialTable t;
  t[Material::skin] = row({0.25, 0.35, 0.45, 0.55, 0.50, 0.40, 0.35, 0.05, 0.10, 0.20}, 0.03);
  t[Material::paper] = row({0.70, 0.70, 0.70, 0.70, 0.70, 0.70, 0.70, 0.70, 0.70, 0.70}, 0.03);
  t[Material::silicone] = row({0.30, 0.38, 0.48, 0.62, 0.60, 0.52, 0.55, 0.42, 0.45, 0.40}, 0.03);
  t[Material::plastic] = row({0.35, 0.40, 0.45, 0.45, 0.45, 0.42, 0.44, 0.40, 0.42, 0.38}, 0.03);
  t[Material::screen] = row({0.12, 0.12, 0.12, 0.12, 0.12, 0.12, 0.12, 0.12, 0.12, 0.12}, 0.03);
  t[Material::fabric] = row({0.20, 0.22, 0.25, 0.30, 0.30, 0.28, 0.28, 0.25, 0.26, 0.24}, 0.03);
  t[Material::tattoo_ink_on_skin] =
      row({0.08, 0.10, 0.12, 0.55, 0.50, 0.40, 0.35, 0.05, 0.10, 0.20}, 0.03);
  t[Material::glass_lens] = row({0.60, 0.60, 0.60, 0.08, 0.10, 0.14, 0.18, 0.30, 0.34, 0.38}, 0.03);
  t[Material::makeup_on_skin] =
      row({0.30, 0.36, 0.44, 0.58, 0.54, 0.46, 0.42, 0.20, 0.24, 0.30}, 0.03);
  return t;
}

double material_reflectance(const MaterialTable& table, Material m, Wavelength wl, CounterRng& rng) {
  auto it = table.find(m);
  if (it == table.end()) fail(ErrorKind::domain, std::string("unknown material ") + to_string(m));
  auto r = it->second.reflectance.find(wl);
  if (r == it->second.reflectance.end())
    fail(ErrorKind::domain, std::string("material ") + to_string(m) + " has no reflectance at " +
                                std::to_string(wl) + " nm");
  const double z = rng.normal();
  return std::clamp(r->second * (1.0 + it->second.variability * z), 0.0, 1.0);
}

Material attack_material(AttackType t) {
  switch (t) {
    case AttackType::none: return Material::skin;
    case AttackType::print: return Material::paper;
    case AttackType::replay: return Material::screen;
    case AttackType::rigid_mask: return Material::plastic;
    case AttackType::paper_mask: return Material::paper;
    case AttackType::flexible_mask: return Material::silicone;
    case AttackType::mannequin: return Material::plastic;
    case AttackType::glasses: return Material::glass_lens;
    case AttackType::makeup: return Material::makeup_on_skin;
    case AttackType::tattoo: return Material::tattoo_ink_on_skin;
    case AttackType::wig: return Material::fabric;
  }
  return Material::skin;
}

// --- geometry ------------------------------------------------------------------

bool Ellipse::contains(double x, double y) const {
  const double dx = (x - cx) / ax, dy = (y - cy) / ay;
  return dx * dx + dy * dy <= 1.0;
}

Ellipse face_ellipse(int width, int height) {
  return {0.5 * width, 0.52 * height, 0.35 * width, 0.45 * height};
}

namespace {

template <typename Pred>
std::vector<std::uint8_t> mask_where(int width, int height, Pred pred) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(width) * height, 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      m[static_cast<std::size_t>(y) * width + x] = pred(x + 0.5, y + 0.5) ? 1 : 0;
  return m;
}

}  // namespace

std::vector<std::uint8_t> face_mask(int width, int height) {
  const Ellipse f = face_ellipse(width, height);
  return mask_where(width, height, [&](double x, double y) { return f.contains(x, y); });
}

std::vector<std::uint8_t> altered_region(AttackType t, int width, int height) {
  const Ellipse f = face_ellipse(width, height);
  const double W = width, H = height;
  auto in_face = [&](auto pred) {
    return mask_where(width, height,
                      [&](double x, double y) { return f.contains(x, y) && pred(x, y); });
  };
  switch (group_of(t)) {
    case AttackGroup::none: return mask_where(width, height, [](double, double) { return false; });
    case AttackGroup::impersonation: return in_face([](double, double) { return true; });
    case AttackGroup::obfuscation: break;
  }
  switch (t) {
    case AttackType::glasses: {
      const Ellipse l{0.35 * W, 0.42 * H, 0.11 * W, 0.07 * H};
      const Ellipse r{0.65 * W, 0.42 * H, 0.11 * W, 0.07 * H};
      return in_face([&](double x, double y) { return l.contains(x, y) || r.contains(x, y); });
    }
    case AttackType::makeup:
      return in_face([&](double, double y) { return y >= 0.35 * H && y <= 0.75 * H; });
    case AttackType::tattoo: {
      const Ellipse c{0.64 * W, 0.62 * H, 0.09 * W, 0.07 * H};
      return in_face([&](double x, double y) { return c.contains(x, y); });
    }
    case AttackType::wig:
      return in_face([&](double, double y) { return y < 0.25 * H; });
    default: break;
  }
  return in_face([](double, double) { return false; });
}

// --- config ----------------------------------------------------------------------

int GeneratorConfig::total() const {
  int n = 0;
  for (const auto& [_, per] : counts)
    for (const auto& [__, c] : per) n += c;
  return n;
}

void GeneratorConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::config, "generator config: " + m); };
  if (wavelengths.empty()) bad("no wavelengths");
  std::set<Wavelength> seen;
  for (Wavelength w : wavelengths) {
    if (w <= 0) bad("wavelengths must be positive");
    if (!seen.insert(w).second) bad("duplicate wavelength " + std::to_string(w));
  }
  for (const auto& [_, per] : counts)
    for (const auto& [__, c] : per)
      if (c < 0) bad("counts must be >= 0");
  if (total() == 0) bad("zero presentations requested");
  if (frames_per_presentation < 1) bad("frames_per_presentation must be >= 1");
  if (!(noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
  if (image_size < 4) bad("image_size must be >= 4");
  if (!(gain_min > 0.0 && gain_max >= gain_min)) bad("gains must satisfy 0 < min <= max");
  for (Material m : kMaterials) {
    auto it = materials.find(m);
    if (it == materials.end()) bad(std::string("missing material ") + to_string(m));
    if (it->second.variability < 0.0) bad("variability must be >= 0");
    for (Wavelength w : wavelengths) {
      auto r = it->second.reflectance.find(w);
      if (r == it->second.reflectance.end())
        bad(std::string(to_string(m)) + " has no reflectance at " + std::to_string(w) + " nm");
      if (!(r->second >= 0.0 && r->second <= 1.0)) bad("reflectance outside [0,1]");
    }
  }
}

std::array<int, 10> reference_attack_mix(Split s) {
  switch (s) {
    case Split::train: return {48, 36, 162, 28, 90, 20, 56, 264, 24, 14};
    case Split::dev: return {98, 100, 118, 24, 86, 38, 38, 271, 24, 26};
    case Split::test: return {0, 126, 140, 49, 48, 77, 36, 258, 24, 26};
  }
  return {};
}

std::array<int, 10> distribute_attacks(int total, const std::array<int, 10>& weights) {
  std::array<int, 10> out{};
  long long wsum = 0;
  for (int w : weights) wsum += w;
  if (total <= 0 || wsum == 0) return out;
  std::array<long long, 10> rem{};
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const long long num = static_cast<long long>(total) * weights[i];
    out[i] = static_cast<int>(num / wsum);
    rem[i] = num % wsum;
    assigned += out[i];
  }
  std::array<std::size_t, 10> order{};
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[order[k]];
  return out;
}

CountTable default_counts(int bonafide, int attacks) {
  CountTable t;
  for (Split s : kSplits) {
    auto& per = t[s];
    per[AttackType::none] = bonafide;
    const auto d = distribute_attacks(attacks, reference_attack_mix(s));
    for (std::size_t i = 0; i < kAttackTypes.size(); ++i) per[kAttackTypes[i]] = d[i];
  }
  return t;
}

GeneratorConfig default_generator_config() {
  GeneratorConfig c;
  c.counts = default_counts();
  return c;
}

nlohmann::ordered_json to_json(const GeneratorConfig& cfg) {
  nlohmann::ordered_json j;
  j["wavelengths"] = cfg.wavelengths;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [split, per] : cfg.counts) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (const auto& [t, c] : per) row[t == AttackType::none ? "bonafide" : to_string(t)] = c;
    counts[to_string(split)] = row;
  }
  j["counts"] = counts;
  j["frames_per_presentation"] = cfg.frames_per_presentation;
  j["noise_sigma"] = cfg.noise_sigma;
  j["seed"] = cfg.seed;
  j["image_size"] = cfg.image_size;
  j["gain_range"] = {cfg.gain_min, cfg.gain_max};
  nlohmann::ordered_json mats = nlohmann::ordered_json::object();
  for (const auto& [m, spec] : cfg.materials) {
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (const auto& [wl, v] : spec.reflectance) r[std::to_string(wl)] = v;
    mats[to_string(m)] = {{"variability", spec.variability}, {"reflectance", r}};
  }
  j["materials"] = mats;
  return j;
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig c = default_generator_config();
  try {
    if (j.contains("wavelengths")) j.at("wavelengths").get_to(c.wavelengths);
    if (j.contains("counts")) {
      c.counts.clear();
      for (const auto& [split_name, row] : j.at("counts").items()) {
        auto split = parse_split(split_name);
        if (!split) fail(ErrorKind::config, "generator config: unknown split '" + split_name + "'");
        auto& per = c.counts[*split];
        for (const auto& [type_name, n] : row.items()) {
          auto t = type_name == "bonafide" ? std::optional(AttackType::none) : parse_attack_type(type_name);
          if (!t) fail(ErrorKind::config, "generator config: unknown attack type '" + type_name + "'");
          per[*t] = n.get<int>();
        }
      }
    }
    if (j.contains("frames_per_presentation"))
      j.at("frames_per_presentation").get_to(c.frames_per_presentation);
    if (j.contains("noise_sigma")) j.at("noise_sigma").get_to(c.noise_sigma);
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    if (j.contains("image_size")) j.at("image_size").get_to(c.image_size);
    if (j.contains("gain_range")) {
      const auto& g = j.at("gain_range");
      c.gain_min = g.at(0).get<double>();
      c.gain_max = g.at(1).get<double>();
    }
    if (j.contains("materials")) {
      for (const auto& [name, spec] : j.at("materials").items()) {
        auto m = parse_material(name);
        if (!m) fail(ErrorKind::config, "generator config: unknown material '" + name + "'");
        auto& dst = c.materials[*m];
        if (spec.contains("variability")) spec.at("variability").get_to(dst.variability);
        if (spec.contains("reflectance"))
          for (const auto& [wl, v] : spec.at("reflectance").items())
            dst.reflectance[std::stoi(wl)] = v.get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("generator config: ") + e.what());
  } catch (const std::invalid_argument&) {
    fail(ErrorKind::config, "generator config: reflectance keys must be wavelengths in nm");
  }
  c.validate();
  return c;
}

GeneratorConfig load_generator_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, path.string() + ": " + e.what());
  }
  return generator_config_from_json(j);
}

// --- rendering ----------------------------------------------------------------------

SceneSpec make_scene(AttackType t, const GeneratorConfig& cfg) {
  SceneSpec s;
  s.attack_type = t;
  s.image_size = cfg.image_size;
  s.face = face_ellipse(cfg.image_size, cfg.image_size);
  s.altered = altered_region(t, cfg.image_size, cfg.image_size);
  s.noise_sigma = cfg.noise_sigma;
  s.gain_min = cfg.gain_min;
  s.gain_max = cfg.gain_max;
  return s;
}

Presentation render_presentation(const std::string& id, const SceneSpec& spec,
                                 const GeneratorConfig& cfg, CounterRng rng) {
  const int N = spec.image_size;
  const std::size_t npx = static_cast<std::size_t>(N) * N;
  if (spec.altered.size() != npx) fail(ErrorKind::precondition, "scene mask does not match image size");

  // Per-presentation reflectances: every material at every band, fixed order.
  std::map<Material, std::map<Wavelength, double>> refl;
  CounterRng mat_rng = rng.split("materials");
  for (Material m : kMaterials)
    for (Wavelength wl : cfg.wavelengths) refl[m][wl] = material_reflectance(cfg.materials, m, wl, mat_rng);
  for (Wavelength wl : cfg.wavelengths)
    if (wl >= kSwirStart) refl[Material::tattoo_ink_on_skin][wl] = refl[Material::skin][wl];

  const std::vector<std::uint8_t> face = face_mask(N, N);
  const Material attack = attack_material(spec.attack_type);
  std::vector<Material> pixel_material(npx, Material::fabric);
  for (std::size_t k = 0; k < npx; ++k) {
    if (spec.altered[k])
      pixel_material[k] = attack;
    else if (face[k])
      pixel_material[k] = Material::skin;
  }

  Presentation p;
  p.id = id;
  p.attack_type = spec.attack_type;
  p.label = spec.attack_type == AttackType::none ? Label::bonafide : Label::attack;
  p.group = group_of(spec.attack_type);
  CounterRng frame_rng = rng.split("frames");
  for (int f = 0; f < cfg.frames_per_presentation; ++f) {
    CounterRng r = frame_rng.split(static_cast<std::uint64_t>(f));
    const double gain = r.uniform(spec.gain_min, spec.gain_max);
    SpectralStack stack;
    stack.frame_index = f;
    for (Wavelength wl : cfg.wavelengths) {
      BandImage img{wl, Grid(N, N)};
      for (std::size_t k = 0; k < npx; ++k) {
        const double noise = r.normal();
        const double v = gain * refl[pixel_material[k]][wl] + spec.noise_sigma * noise;
        img.pixels.values[k] = std::floor(std::clamp(v, 0.0, 1.0) * 65535.0 + 0.5) / 65535.0;
      }
      stack.bands.emplace(wl, std::move(img));
    }
    p.frames.push_back(std::move(stack));
  }
  return p;
}

namespace {

struct Job {
  std::string id;
  Split split;
  AttackType type;
};

std::vector<Job> plan_jobs(const GeneratorConfig& cfg) {
  cfg.validate();
  std::vector<Job> jobs;
  for (Split s : kSplits) {
    auto it = cfg.counts.find(s);
    if (it == cfg.counts.end()) continue;
    for (AttackType t : {AttackType::none, AttackType::print, AttackType::replay, AttackType::rigid_mask,
                         AttackType::paper_mask, AttackType::flexible_mask, AttackType::mannequin,
                         AttackType::glasses, AttackType::makeup, AttackType::tattoo, AttackType::wig}) {
      auto c = it->second.find(t);
      if (c == it->second.end()) continue;
      for (int i = 0; i < c->second; ++i) {
        char num[16];
        std::snprintf(num, sizeof num, "%03d", i);
        jobs.push_back({std::string(to_string(s)) + "_" +
                            (t == AttackType::none ? "bonafide" : to_string(t)) + "_" + num,
                        s, t});
      }
    }
  }
  return jobs;
}

Presentation render_job(const Job& j, const GeneratorConfig& cfg) {
  Presentation p = render_presentation(j.id, make_scene(j.type, cfg), cfg, CounterRng(cfg.seed).split(j.id));
  p.split = j.split;
  return p;
}

}  // namespace

std::vector<Presentation> generate_presentations(const GeneratorConfig& cfg) {
  const std::vector<Job> jobs = plan_jobs(cfg);
  std::vector<Presentation> out(jobs.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = render_job(jobs[i], cfg);
  return out;
}

fs::path generate_dataset(const GeneratorConfig& cfg, const fs::path& out) {
  const std::vector<Job> jobs = plan_jobs(cfg);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + out.string() + ": " + ec.message());
  // Rows carry metadata only; frames are written as each presentation is rendered.
  std::vector<Presentation> rows(jobs.size());
  std::vector<std::string> paths(jobs.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(jobs.size());
  std::string error;
  ErrorKind error_kind = ErrorKind::io;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      Presentation p = render_job(jobs[i], cfg);
      const fs::path dir = out / p.id;
      std::error_code dir_ec;
      fs::create_directories(dir, dir_ec);
      if (dir_ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + dir_ec.message());
      for (const auto& f : p.frames)
        for (const auto& [wl, img] : f.bands) write_pgm16(img, dir / frame_file_name(f.frame_index, wl));
      paths[i] = p.id;
      p.frame_files.resize(p.frames.size());
      p.frames.clear();
      rows[i] = std::move(p);
    } catch (const Error& e) {
#pragma omp critical(spad_synthgen_error)
      if (error.empty()) {
        error = e.what();
        error_kind = e.kind();
      }
    }
  }
  if (!error.empty()) fail(error_kind, error);

  const fs::path manifest = out / "manifest.csv";
  {
    std::ofstream m(manifest, std::ios::binary | std::ios::trunc);
    if (!m) fail(ErrorKind::io, "cannot write " + manifest.string());
    m << format_manifest(rows, paths);
  }
  std::ofstream g(out / "generator.json", std::ios::binary | std::ios::trunc);
  if (!g) fail(ErrorKind::io, "cannot write generator.json");
  g << to_json(cfg).dump(2) << '\n';
  return manifest;
}

}  // namespace spad
