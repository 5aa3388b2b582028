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

#include "spad/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;

namespace spad {

const BandImage& SpectralStack::band(Wavelength wl) const {
  auto it = bands.find(wl);
  if (it == bands.end())
    fail(ErrorKind::domain, "wavelength " + std::to_string(wl) + " nm not present in frame");
  return it->second;
}

std::vector<Wavelength> SpectralStack::wavelengths() const {
  std::vector<Wavelength> out;
  out.reserve(bands.size());
  for (const auto& [wl, _] : bands) out.push_back(wl);
  return out;
}

void SpectralStack::validate() const {
  const Grid* first = nullptr;
  for (const auto& [wl, img] : bands) {
    if (wl <= 0 || img.wavelength != wl)
      fail(ErrorKind::domain, "band keyed " + std::to_string(wl) + " nm is inconsistent");
    if (img.width() < 1 || img.height() < 1)
      fail(ErrorKind::domain, "empty band image");
    if (first && !first->same_shape(img.pixels))
      fail(ErrorKind::domain, "bands of one frame differ in size");
    first = &img.pixels;
  }
}

// --- enums -------------------------------------------------------------------

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(std::string_view s, const std::array<E, N>& values) {
  for (E v : values)
    if (s == to_string(v)) return v;
  return std::nullopt;
}

constexpr std::array<AttackType, 11> kAllTypes = {
    AttackType::none,       AttackType::print,        AttackType::replay,
    AttackType::rigid_mask, AttackType::paper_mask,   AttackType::flexible_mask,
    AttackType::mannequin,  AttackType::glasses,      AttackType::makeup,
    AttackType::tattoo,     AttackType::wig};

}  // namespace

const char* to_string(Label v) { return v == Label::bonafide ? "bonafide" : "attack"; }

const char* to_string(AttackType v) {
  switch (v) {
    case AttackType::none: return "none";
    case AttackType::print: return "print";
    case AttackType::replay: return "replay";
    case AttackType::rigid_mask: return "rigid_mask";
    case AttackType::paper_mask: return "paper_mask";
    case AttackType::flexible_mask: return "flexible_mask";
    case AttackType::mannequin: return "mannequin";
    case AttackType::glasses: return "glasses";
    case AttackType::makeup: return "makeup";
    case AttackType::tattoo: return "tattoo";
    case AttackType::wig: return "wig";
  }
  return "?";
}

const char* to_string(AttackGroup v) {
  switch (v) {
    case AttackGroup::none: return "none";
    case AttackGroup::impersonation: return "impersonation";
    case AttackGroup::obfuscation: return "obfuscation";
  }
  return "?";
}

const char* to_string(Split v) {
  switch (v) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

const char* to_string(Protocol v) {
  switch (v) {
    case Protocol::grand_test: return "grand_test";
    case Protocol::impersonation: return "impersonation";
    case Protocol::obfuscation: return "obfuscation";
  }
  return "?";
}

std::optional<Label> parse_label(std::string_view s) {
  return lookup(s, std::array{Label::bonafide, Label::attack});
}
std::optional<AttackType> parse_attack_type(std::string_view s) { return lookup(s, kAllTypes); }
std::optional<AttackGroup> parse_group(std::string_view s) {
  return lookup(s, std::array{AttackGroup::none, AttackGroup::impersonation,
                              AttackGroup::obfuscation});
}
std::optional<Split> parse_split(std::string_view s) { return lookup(s, kSplits); }
std::optional<Protocol> parse_protocol(std::string_view s) {
  return lookup(s, std::array{Protocol::grand_test, Protocol::impersonation,
                              Protocol::obfuscation});
}

AttackGroup group_of(AttackType t) {
  switch (t) {
    case AttackType::none: return AttackGroup::none;
    case AttackType::print:
    case AttackType::replay:
    case AttackType::rigid_mask:
    case AttackType::paper_mask:
    case AttackType::flexible_mask:
    case AttackType::mannequin: return AttackGroup::impersonation;
    case AttackType::glasses:
    case AttackType::makeup:
    case AttackType::tattoo:
    case AttackType::wig: return AttackGroup::obfuscation;
  }
  return AttackGroup::none;
}

// --- Presentation ------------------------------------------------------------

SpectralStack Presentation::frame(std::size_t k) const {
  if (!frames.empty()) return frames.at(k);
  const auto& files = frame_files.at(k);
  SpectralStack s;
  s.frame_index = static_cast<int>(k);
  for (const auto& [wl, path] : files) s.bands.emplace(wl, read_pgm16(path, wl));
  s.validate();
  return s;
}

void Presentation::validate() const {
  const bool bf = label == Label::bonafide;
  if (bf != (attack_type == AttackType::none) || group != group_of(attack_type))
    fail(ErrorKind::manifest, "presentation " + id + ": label " + to_string(label) +
                                  ", attack_type " + to_string(attack_type) + " and group " +
                                  to_string(group) + " are inconsistent");
  if (frame_count() == 0) fail(ErrorKind::manifest, "presentation " + id + " has no frames");
}

// --- PGM ---------------------------------------------------------------------

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

int parse_positive(const std::string& tok, const fs::path& path, const char* what) {
  int v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size() || v <= 0)
    fail(ErrorKind::format, path.string() + ": bad PGM " + what + " '" + tok + "'");
  return v;
}

}  // namespace

BandImage read_pgm16(const fs::path& path, Wavelength wavelength) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  if (pgm_token(in) != "P5") fail(ErrorKind::format, path.string() + ": not a binary PGM (P5)");
  const int w = parse_positive(pgm_token(in), path, "width");
  const int h = parse_positive(pgm_token(in), path, "height");
  const int maxval = parse_positive(pgm_token(in), path, "maxval");
  if (maxval != 65535)
    fail(ErrorKind::unsupported_format,
         path.string() + ": maxval " + std::to_string(maxval) + " (only 65535 supported)");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<unsigned char> raw(2 * n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    fail(ErrorKind::io, path.string() + ": truncated pixel payload");
  BandImage img;
  img.wavelength = wavelength;
  img.pixels = Grid(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned sample = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    img.pixels.values[i] = sample / 65535.0;
  }
  return img;
}

void write_pgm16(const BandImage& image, const fs::path& path) {
  const Grid& g = image.pixels;
  std::vector<unsigned char> raw(2 * g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = g.values[i];
    if (!(v >= 0.0 && v <= 1.0))
      fail(ErrorKind::domain, "pixel value " + std::to_string(v) + " outside [0,1]");
    const auto q = static_cast<unsigned>(std::floor(v * 65535.0 + 0.5));
    raw[2 * i] = static_cast<unsigned char>(q >> 8);
    raw[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << "P5\n" << g.width << ' ' << g.height << "\n65535\n";
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

// --- manifest ----------------------------------------------------------------

fs::path frame_file_name(int frame, Wavelength wl) {
  return "frame_" + std::to_string(frame) + "_" + std::to_string(wl) + "nm.pgm";
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Maps frame index -> wavelength -> path for files named frame_<k>_<wl>nm.pgm.
std::map<int, std::map<Wavelength, fs::path>> scan_frames(const fs::path& dir) {
  static const std::regex pattern(R"(frame_(\d+)_(\d+)nm\.pgm)");
  std::map<int, std::map<Wavelength, fs::path>> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern))
      out[std::stoi(m[1])][std::stoi(m[2])] = entry.path();
  }
  if (ec) fail(ErrorKind::io, "cannot list " + dir.string() + ": " + ec.message());
  return out;
}

}  // namespace

std::vector<Presentation> load_manifest(const fs::path& root) {
  const fs::path manifest = root / "manifest.csv";
  std::ifstream in(manifest);
  if (!in) fail(ErrorKind::io, "cannot open " + manifest.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::manifest, manifest.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_csv(line);
  const std::array<const char*, 7> columns = {"presentation_id", "split", "label", "attack_type",
                                              "group", "n_frames", "path"};
  std::array<std::size_t, 7> col{};
  for (std::size_t c = 0; c < columns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), columns[c]);
    if (it == header.end())
      fail(ErrorKind::manifest, manifest.string() + ": missing column '" + columns[c] + "'");
    col[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<Presentation> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    auto where = [&] { return manifest.string() + " row " + std::to_string(row) + ": "; };
    if (cells.size() != header.size()) fail(ErrorKind::manifest, where() + "wrong column count");
    auto cell = [&](std::size_t c) -> const std::string& { return cells[col[c]]; };

    Presentation p;
    p.id = cell(0);
    if (p.id.empty() || !std::all_of(p.id.begin(), p.id.end(), [](char c) {
          return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
        }))
      fail(ErrorKind::manifest, where() + "invalid presentation_id '" + p.id + "'");
    auto need = [&](auto parsed, const char* what, const std::string& v) {
      if (!parsed) fail(ErrorKind::manifest, where() + "unknown " + what + " '" + v + "'");
      return *parsed;
    };
    p.split = need(parse_split(cell(1)), "split", cell(1));
    p.label = need(parse_label(cell(2)), "label", cell(2));
    p.attack_type = need(parse_attack_type(cell(3)), "attack_type", cell(3));
    p.group = need(parse_group(cell(4)), "group", cell(4));
    int n_frames = 0;
    {
      const std::string& v = cell(5);
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n_frames);
      if (ec != std::errc() || ptr != v.data() + v.size() || n_frames < 1)
        fail(ErrorKind::manifest, where() + "bad n_frames '" + v + "'");
    }
    try {
      Presentation probe = p;
      probe.frame_files.resize(1);
      probe.validate();
    } catch (const Error& e) {
      fail(ErrorKind::manifest, where() + e.what());
    }

    const fs::path dir = root / cell(6);
    if (!fs::is_directory(dir)) fail(ErrorKind::io, where() + "missing directory " + dir.string());
    auto found = scan_frames(dir);
    if (found.empty() || found.begin()->second.empty())
      fail(ErrorKind::io, where() + "no frame files in " + dir.string());
    const auto& reference = found.begin()->second;
    for (int k = 0; k < n_frames; ++k) {
      auto it = found.find(k);
      for (const auto& [wl, _] : reference) {
        if (it == found.end() || it->second.count(wl) == 0)
          fail(ErrorKind::io, where() + "missing frame file " +
                                  (dir / frame_file_name(k, wl)).string());
      }
      if (it->second.size() != reference.size())
        fail(ErrorKind::io, where() + "frame " + std::to_string(k) + " has extra bands");
      p.frame_files.push_back(it->second);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string format_manifest(const std::vector<Presentation>& data,
                            const std::vector<std::string>& paths) {
  std::string s = kManifestHeader;
  s += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& p = data[i];
    s += p.id + ',' + to_string(p.split) + ',' + to_string(p.label) + ',' +
         to_string(p.attack_type) + ',' + to_string(p.group) + ',' +
         std::to_string(p.frame_count()) + ',' + paths.at(i) + '\n';
  }
  return s;
}

// --- protocols -------------------------------------------------------------

const std::vector<const Presentation*>& ProtocolView::split(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::dev: return dev;
    case Split::test: return test;
  }
  return train;
}

bool in_protocol(const Presentation& p, Protocol protocol) {
  switch (protocol) {
    case Protocol::grand_test: return true;
    case Protocol::impersonation: return p.group != AttackGroup::obfuscation;
    case Protocol::obfuscation: return p.group != AttackGroup::impersonation;
  }
  return false;
}

ProtocolView select_protocol(const std::vector<Presentation>& data, Protocol protocol) {
  if (data.empty()) fail(ErrorKind::precondition, "select_protocol: no presentations");
  ProtocolView view;
  view.protocol = protocol;
  for (const auto& p : data) {
    if (!in_protocol(p, protocol)) continue;
    switch (p.split) {
      case Split::train: view.train.push_back(&p); break;
      case Split::dev: view.dev.push_back(&p); break;
      case Split::test: view.test.push_back(&p); break;
    }
  }
  for (Split s : kSplits) {
    const auto& members = view.split(s);
    if (members.empty()) {
      view.warnings.push_back(std::string(to_string(protocol)) + ": split " + to_string(s) +
                              " is empty");
      continue;
    }
    const bool any_attack = std::any_of(members.begin(), members.end(),
                                        [](const Presentation* p) { return p->label == Label::attack; });
    const bool any_bf = std::any_of(members.begin(), members.end(),
                                    [](const Presentation* p) { return p->label == Label::bonafide; });
    if (!any_attack || !any_bf)
      view.warnings.push_back(std::string(to_string(protocol)) + ": split " + to_string(s) +
                              " has a single class");
  }
  return view;
}

// --- frame sampling ----------------------------------------------------------

std::vector<std::size_t> sample_frame_indices(std::size_t n_frames, std::size_t k) {
  if (k < 1) fail(ErrorKind::precondition, "sample_frames: k must be >= 1");
  std::vector<std::size_t> out;
  if (n_frames == 0) return out;
  if (n_frames < k) {
    for (std::size_t i = 0; i < n_frames; ++i) out.push_back(i);
    return out;
  }
  if (k == 1) return {0};
  for (std::size_t j = 0; j < k; ++j) {
    // round(j (n-1) / (k-1)), half up, in exact integer arithmetic
    const std::size_t idx = (2 * j * (n_frames - 1) + (k - 1)) / (2 * (k - 1));
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

std::vector<SpectralStack> sample_frames(const Presentation& p, std::size_t k) {
  std::vector<SpectralStack> out;
  for (std::size_t idx : sample_frame_indices(p.frame_count(), k)) out.push_back(p.frame(idx));
  return out;
}

}  // namespace spad
