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

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spad/common.hpp"

namespace spad {

/// One single-band image; values are reflectances in [0, 1].
struct BandImage {
  Wavelength wavelength = 0;
  Grid pixels;

  int width() const noexcept { return pixels.width; }
  int height() const noexcept { return pixels.height; }
};

/// One frame: co-registered band images keyed by wavelength.
struct SpectralStack {
  int frame_index = 0;
  std::map<Wavelength, BandImage> bands;

  const BandImage& band(Wavelength wl) const;
  bool has(Wavelength wl) const { return bands.count(wl) != 0; }
  std::vector<Wavelength> wavelengths() const;
  /// Throws a domain error unless all bands share one shape.
  void validate() const;
};

enum class Label { bonafide, attack };
enum class AttackType {
  none,
  print,
  replay,
  rigid_mask,
  paper_mask,
  flexible_mask,
  mannequin,
  glasses,
  makeup,
  tattoo,
  wig,
};
enum class AttackGroup { none, impersonation, obfuscation };
enum class Split { train, dev, test };
enum class Protocol { grand_test, impersonation, obfuscation };

inline constexpr std::array<AttackType, 10> kAttackTypes = {
    AttackType::print,   AttackType::replay,        AttackType::rigid_mask,
    AttackType::paper_mask, AttackType::flexible_mask, AttackType::mannequin,
    AttackType::glasses, AttackType::makeup,        AttackType::tattoo,
    AttackType::wig};
inline constexpr std::array<Split, 3> kSplits = {Split::train, Split::dev, Split::test};

const char* to_string(Label v);
const char* to_string(AttackType v);
const char* to_string(AttackGroup v);
const char* to_string(Split v);
const char* to_string(Protocol v);
std::optional<Label> parse_label(std::string_view s);
std::optional<AttackType> parse_attack_type(std::string_view s);
std::optional<AttackGroup> parse_group(std::string_view s);
std::optional<Split> parse_split(std::string_view s);
std::optional<Protocol> parse_protocol(std::string_view s);

/// The group an attack type belongs to; `none` for AttackType::none.
AttackGroup group_of(AttackType t);

/// A labeled presentation. Frames are either held in memory (`frames`) or
/// referenced on disk (`frame_files`, one wavelength->path map per frame).
struct Presentation {
  std::string id;
  Label label = Label::bonafide;
  AttackType attack_type = AttackType::none;
  AttackGroup group = AttackGroup::none;
  Split split = Split::train;
  std::vector<SpectralStack> frames;
  std::vector<std::map<Wavelength, std::filesystem::path>> frame_files;

  std::size_t frame_count() const {
    return frames.empty() ? frame_files.size() : frames.size();
  }
  /// Loads from disk when frames are not resident.
  SpectralStack frame(std::size_t k) const;
  /// Throws a manifest error if label/type/group are inconsistent or no frame exists.
  void validate() const;
};

// --- 16-bit PGM -------------------------------------------------------------

BandImage read_pgm16(const std::filesystem::path& path, Wavelength wavelength);
void write_pgm16(const BandImage& image, const std::filesystem::path& path);

// --- manifest ----------------------------------------------------------------

inline constexpr const char* kManifestHeader =
    "presentation_id,split,label,attack_type,group,n_frames,path";

std::filesystem::path frame_file_name(int frame, Wavelength wl);

/// Parses `<root>/manifest.csv`, validates every row and checks that all frame
/// files exist. Frames stay on disk until requested.
std::vector<Presentation> load_manifest(const std::filesystem::path& root);

/// Serializes rows in the manifest format. `paths` parallels `data`.
std::string format_manifest(const std::vector<Presentation>& data,
                            const std::vector<std::string>& paths);

// --- protocols -------------------------------------------------------------

struct ProtocolView {
  Protocol protocol = Protocol::grand_test;
  std::vector<const Presentation*> train;
  std::vector<const Presentation*> dev;
  std::vector<const Presentation*> test;
  /// Non-fatal notes, e.g. a split left empty by the filter.
  std::vector<std::string> warnings;

  const std::vector<const Presentation*>& split(Split s) const;
};

bool in_protocol(const Presentation& p, Protocol protocol);
ProtocolView select_protocol(const std::vector<Presentation>& data, Protocol protocol);

// --- frame sampling ----------------------------------------------------------

/// Endpoint-inclusive even spacing, round-to-nearest, duplicates dropped.
std::vector<std::size_t> sample_frame_indices(std::size_t n_frames, std::size_t k);
std::vector<SpectralStack> sample_frames(const Presentation& p, std::size_t k = 10);

}  // namespace spad
