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

// Synthetic multispectral face presentations. Every pixel belongs to one
// material; a band value is gain * reflectance + Gaussian noise, quantized to
// the 16-bit grid. All randomness is keyed by (seed, presentation id).

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spad/dataset.hpp"
#include "spad/rng.hpp"

namespace spad {

enum class Material {
  skin,
  paper,
  silicone,
  plastic,
  screen,
  fabric,
  tattoo_ink_on_skin,
  glass_lens,
  makeup_on_skin,
};

inline constexpr std::array<Material, 9> kMaterials = {
    Material::skin,   Material::paper,  Material::silicone,
    Material::plastic, Material::screen, Material::fabric,
    Material::tattoo_ink_on_skin, Material::glass_lens, Material::makeup_on_skin};

const char* to_string(Material m);
std::optional<Material> parse_material(std::string_view s);

inline const std::vector<Wavelength> kSwirBands = {940, 1050, 1200, 1300, 1450, 1550, 1650};
inline const std::vector<Wavelength> kVisibleBands = {465, 550, 640};

/// Bands at or above this are SWIR; below it, visible.
inline constexpr Wavelength kSwirStart = 900;

struct MaterialSpectrum {
  std::map<Wavelength, double> reflectance;
  double variability = 0.0;  // relative std-dev, drawn once per presentation
};

using MaterialTable = std::map<Material, MaterialSpectrum>;

/// Built-in reflectance tables over the SWIR and visible bands.
MaterialTable default_materials();

/// mean * (1 + variability * z), clamped to [0, 1]; z ~ N(0, 1) from rng.
double material_reflectance(const MaterialTable& table, Material m, Wavelength wl, CounterRng& rng);

/// Material covering the face (impersonation) or the altered region
/// (obfuscation) for an attack type; skin for bonafide.
Material attack_material(AttackType t);

struct Ellipse {
  double cx = 0, cy = 0, ax = 1, ay = 1;
  bool contains(double x, double y) const;
};

/// The fixed face region of a width x height image.
Ellipse face_ellipse(int width, int height);
/// 1 inside the face ellipse (pixel centres), row-major.
std::vector<std::uint8_t> face_mask(int width, int height);
/// Region replaced by the attack material: the whole face for impersonation
/// attacks, a face subregion for obfuscation attacks, empty for bonafide.
std::vector<std::uint8_t> altered_region(AttackType t, int width, int height);

struct SceneSpec {
  AttackType attack_type = AttackType::none;
  Ellipse face;
  std::vector<std::uint8_t> altered;
  int image_size = 64;
  double noise_sigma = 0.02;
  double gain_min = 0.9;
  double gain_max = 1.1;
};

/// Presentation counts keyed by split then attack type (none = bonafide).
using CountTable = std::map<Split, std::map<AttackType, int>>;

struct GeneratorConfig {
  std::vector<Wavelength> wavelengths = kSwirBands;
  CountTable counts;
  int frames_per_presentation = 10;
  double noise_sigma = 0.02;
  std::uint64_t seed = 42;
  int image_size = 64;
  double gain_min = 0.9;
  double gain_max = 1.1;
  MaterialTable materials = default_materials();

  int total() const;
  void validate() const;
};

/// Attack-type mix of each split in the reference dataset, in kAttackTypes order.
std::array<int, 10> reference_attack_mix(Split s);

/// Distributes `total` over `weights` by largest remainder; ties go to the
/// earlier type. Zero weights receive nothing.
std::array<int, 10> distribute_attacks(int total, const std::array<int, 10>& weights);

/// Per split: `bonafide` bonafide presentations and `attacks` attacks spread
/// over the reference mix of that split.
CountTable default_counts(int bonafide = 24, int attacks = 48);

GeneratorConfig default_generator_config();

nlohmann::ordered_json to_json(const GeneratorConfig& cfg);
/// Missing keys keep the defaults.
GeneratorConfig generator_config_from_json(const nlohmann::json& j);
GeneratorConfig load_generator_config(const std::filesystem::path& path);

SceneSpec make_scene(AttackType t, const GeneratorConfig& cfg);

/// Renders all frames of one presentation in memory. Draw order is fixed and
/// independent of the attack type, so two scenes rendered with the same rng
/// differ only where their materials differ.
Presentation render_presentation(const std::string& id, const SceneSpec& spec,
                                 const GeneratorConfig& cfg, CounterRng rng);

/// Presentation ids in generation order: <split>_<type>_<nnn>.
std::vector<Presentation> generate_presentations(const GeneratorConfig& cfg);

/// Writes PGM frames, manifest.csv and generator.json under `out`; returns the
/// manifest path.
std::filesystem::path generate_dataset(const GeneratorConfig& cfg, const std::filesystem::path& out);

}  // namespace spad
