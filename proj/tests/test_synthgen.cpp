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

#include <cmath>

#include "doctest.h"
#include "spad/swirdiff.hpp"
#include "spad/synthgen.hpp"
#include "test_util.hpp"

using namespace spad;

namespace {

GeneratorConfig still_config() {
  GeneratorConfig g = default_generator_config();
  g.noise_sigma = 0.0;
  g.gain_min = g.gain_max = 1.0;
  g.frames_per_presentation = 1;
  g.image_size = 32;
  for (auto& [_, spec] : g.materials) spec.variability = 0.0;
  return g;
}

Presentation render(AttackType t, const GeneratorConfig& g, std::uint64_t key = 1) {
  return render_presentation("p", make_scene(t, g), g, CounterRng(key));
}

double face_mean(const Grid& grid) {
  const auto mask = face_mask(grid.width, grid.height);
  double s = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (mask[k]) {
      s += grid.values[k];
      ++n;
    }
  return s / n;
}

}  // namespace

TEST_CASE("material reflectance table lookups") {
  MaterialTable t = default_materials();
  for (auto& [_, spec] : t) spec.variability = 0.0;
  CounterRng r(3);
  CHECK(material_reflectance(t, Material::skin, 1450, r) == 0.05);
  for (Wavelength wl : kSwirBands)
    CHECK(material_reflectance(t, Material::tattoo_ink_on_skin, wl, r) ==
          material_reflectance(t, Material::skin, wl, r));
  for (Wavelength wl : kVisibleBands) CHECK(material_reflectance(t, Material::tattoo_ink_on_skin, wl, r) <= 0.15);
  CHECK(material_reflectance(t, Material::paper, 1200, r) == 0.70);
  CHECK(material_reflectance(t, Material::screen, 1650, r) == 0.12);
  CHECK_THROWS_AS(material_reflectance(t, Material::skin, 777, r), Error);

  const MaterialTable v = default_materials();
  CounterRng a(9), b(9);
  CHECK(material_reflectance(v, Material::skin, 940, a) == material_reflectance(v, Material::skin, 940, b));
}

TEST_CASE("altered regions sit inside the face") {
  const auto face = face_mask(64, 64);
  for (AttackType t : kAttackTypes) {
    const auto region = altered_region(t, 64, 64);
    int n = 0;
    for (std::size_t k = 0; k < region.size(); ++k) {
      if (region[k]) CHECK(face[k]);
      n += region[k];
    }
    CHECK(n > 0);
  }
}

TEST_CASE("noise-free bonafide and print differences") {
  const GeneratorConfig g = still_config();
  const Presentation bf = render(AttackType::none, g);
  const Grid d = normalized_diff(bf.frames[0].band(1450), bf.frames[0].band(940));
  CHECK(face_mean(d) == doctest::Approx((0.05 - 0.55) / (0.05 + 0.55 + 1e-4)).epsilon(1e-4));
  CHECK(face_mean(d) == doctest::Approx(-0.833).epsilon(1e-3));

  const Presentation print = render(AttackType::print, g);
  const Grid p = normalized_diff(print.frames[0].band(1450), print.frames[0].band(940));
  CHECK(std::abs(face_mean(p)) < 1e-9);
}

TEST_CASE("the 1450 nm dip separates skin from flat materials") {
  const GeneratorConfig g = still_config();
  const auto bf = render(AttackType::none, g).frames[0];
  for (Wavelength wl : kSwirBands)
    if (wl != 1450) CHECK(face_mean(bf.band(1450).pixels) < face_mean(bf.band(wl).pixels));
  for (AttackType t : {AttackType::print, AttackType::rigid_mask, AttackType::replay}) {
    const auto s = render(t, g).frames[0];
    bool lowest = true;
    for (Wavelength wl : kSwirBands)
      if (wl != 1450) lowest = lowest && face_mean(s.band(1450).pixels) < face_mean(s.band(wl).pixels);
    CHECK_FALSE(lowest);
  }
}

TEST_CASE("tattoos are invisible in SWIR") {
  GeneratorConfig g = default_generator_config();
  g.frames_per_presentation = 2;
  g.image_size = 32;
  const Presentation tat = render(AttackType::tattoo, g, 77);
  const Presentation bf = render(AttackType::none, g, 77);
  for (std::size_t f = 0; f < 2; ++f)
    for (Wavelength wl : kSwirBands) CHECK(tat.frames[f].band(wl).pixels.values == bf.frames[f].band(wl).pixels.values);

  g.wavelengths = {465, 940, 1450};
  const Presentation tv = render(AttackType::tattoo, g, 77);
  const Presentation bv = render(AttackType::none, g, 77);
  CHECK(tv.frames[0].band(465).pixels.values != bv.frames[0].band(465).pixels.values);
}

TEST_CASE("rendering is deterministic and quantized") {
  const GeneratorConfig g = default_generator_config();
  const Presentation a = render(AttackType::makeup, g, 5), b = render(AttackType::makeup, g, 5);
  for (std::size_t f = 0; f < a.frames.size(); ++f)
    for (Wavelength wl : kSwirBands) {
      const auto& va = a.frames[f].band(wl).pixels.values;
      CHECK(va == b.frames[f].band(wl).pixels.values);
      for (double v : va) CHECK(std::abs(std::round(v * 65535.0) - v * 65535.0) < 1e-6);
    }
}

TEST_CASE("default counts follow the reference attack mix") {
  const GeneratorConfig g = default_generator_config();
  for (Split s : kSplits) {
    const auto mix = reference_attack_mix(s);
    double total = 0;
    for (int w : mix) total += w;
    int attacks = 0;
    for (std::size_t t = 0; t < kAttackTypes.size(); ++t) {
      const auto& per = g.counts.at(s);
      const auto it = per.find(kAttackTypes[t]);
      const int n = it == per.end() ? 0 : it->second;
      attacks += n;
      CHECK(std::abs(n - 48.0 * mix[t] / total) <= 1.0);
    }
    CHECK(attacks == 48);
    CHECK(g.counts.at(s).at(AttackType::none) == 24);
  }
  CHECK(g.total() == 216);
}

TEST_CASE("generator config json round trip") {
  GeneratorConfig g = default_generator_config();
  g.seed = 7;
  g.noise_sigma = 0.01;
  const GeneratorConfig back = generator_config_from_json(nlohmann::json(to_json(g)));
  CHECK(to_json(back).dump() == to_json(g).dump());
  nlohmann::json bad = to_json(g);
  bad["noise_sigma"] = -1.0;
  CHECK_THROWS_AS(generator_config_from_json(bad), Error);
}

TEST_CASE("generated trees match their config and reproduce byte for byte") {
  GeneratorConfig g = default_generator_config();
  g.image_size = 8;
  g.frames_per_presentation = 2;
  g.counts = {{Split::train, {{AttackType::none, 4}, {AttackType::print, 4}}},
              {Split::dev, {{AttackType::none, 2}, {AttackType::glasses, 2}}},
              {Split::test, {{AttackType::none, 2}, {AttackType::tattoo, 2}}}};
  spad::test::TempDir a("gen"), b("gen");
  generate_dataset(g, a.path());
  generate_dataset(g, b.path());
  const auto data = load_manifest(a.path());
  CHECK(data.size() == 16);
  int files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    CHECK(spad::test::slurp(e.path()) == spad::test::slurp(b.path() / rel));
  }
  CHECK(files == 16 * 2 * 7 + 2);
}
