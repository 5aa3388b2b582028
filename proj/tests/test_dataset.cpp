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

#include <algorithm>

#include "doctest.h"
#include "spad/dataset.hpp"
#include "test_util.hpp"

using namespace spad;
using spad::test::TempDir;

namespace {

std::string pgm_bytes(int w, int h, const std::vector<int>& samples) {
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  for (int v : samples) {
    s.push_back(static_cast<char>(v >> 8));
    s.push_back(static_cast<char>(v & 0xff));
  }
  return s;
}

BandImage grid_image(int w, int h, std::uint64_t seed) {
  BandImage b{1050, Grid(w, h)};
  std::mt19937_64 g(seed);
  for (double& v : b.pixels.values) v = static_cast<double>(g() % 65536) / 65535.0;
  return b;
}

void write_presentation(const std::filesystem::path& dir, int frames) {
  std::filesystem::create_directories(dir);
  for (int f = 0; f < frames; ++f)
    for (Wavelength wl : {940, 1450}) {
      BandImage b{wl, Grid(2, 2, (f + 1) / 100.0)};
      write_pgm16(b, dir / frame_file_name(f, wl));
    }
}

}  // namespace

TEST_CASE("pgm: raw samples scale to [0, 1]") {
  TempDir tmp("pgm");
  spad::test::spit(tmp.path() / "a.pgm", pgm_bytes(2, 2, {0, 65535, 32768, 16384}));
  const BandImage b = read_pgm16(tmp.path() / "a.pgm", 940);
  CHECK(b.pixels.values[0] == 0.0);
  CHECK(b.pixels.values[1] == 1.0);
  CHECK(b.pixels.values[2] == 32768.0 / 65535.0);
  CHECK(b.pixels.values[3] == 16384.0 / 65535.0);
}

TEST_CASE("pgm: round trip on the 16-bit grid is bit-exact") {
  TempDir tmp("pgm");
  const BandImage b = grid_image(7, 5, 3);
  write_pgm16(b, tmp.path() / "b.pgm");
  const BandImage r = read_pgm16(tmp.path() / "b.pgm", 1050);
  CHECK(r.pixels.width == 7);
  CHECK(r.pixels.height == 5);
  CHECK(r.pixels.values == b.pixels.values);
}

TEST_CASE("pgm: quantization and bad magic") {
  TempDir tmp("pgm");
  BandImage half{940, Grid(1, 1, 0.5)};
  write_pgm16(half, tmp.path() / "h.pgm");
  const std::string bytes = spad::test::slurp(tmp.path() / "h.pgm");
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 2]) == 0x80);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 1]) == 0x00);

  BandImage zeros{940, Grid(3, 1, 0.0)}, ones{940, Grid(3, 1, 1.0)};
  write_pgm16(zeros, tmp.path() / "z.pgm");
  write_pgm16(ones, tmp.path() / "o.pgm");
  const std::string z = spad::test::slurp(tmp.path() / "z.pgm");
  const std::string o = spad::test::slurp(tmp.path() / "o.pgm");
  CHECK(std::all_of(z.end() - 6, z.end(), [](char c) { return c == 0; }));
  CHECK(std::all_of(o.end() - 6, o.end(), [](char c) { return static_cast<unsigned char>(c) == 0xff; }));

  spad::test::spit(tmp.path() / "p2.pgm", "P2\n1 1\n65535\n0\n");
  CHECK_THROWS_AS(read_pgm16(tmp.path() / "p2.pgm", 940), Error);
}

TEST_CASE("manifest: three rows load with their splits") {
  TempDir tmp("manifest");
  write_presentation(tmp.path() / "a", 2);
  write_presentation(tmp.path() / "b", 2);
  write_presentation(tmp.path() / "c", 3);
  spad::test::spit(tmp.path() / "manifest.csv",
                   std::string(kManifestHeader) + "\n"
                   "a,train,bonafide,none,none,2,a\n"
                   "b,train,bonafide,none,none,2,b\n"
                   "c,test,attack,print,impersonation,3,c\n");
  const auto data = load_manifest(tmp.path());
  REQUIRE(data.size() == 3);
  CHECK(data[0].split == Split::train);
  CHECK(data[1].split == Split::train);
  CHECK(data[2].split == Split::test);
  CHECK(data[2].attack_type == AttackType::print);
  CHECK(data[2].frame_count() == 3);
  CHECK(data[2].frame(2).band(940).pixels.values[0] == doctest::Approx(0.03).epsilon(1e-4));
}

TEST_CASE("manifest: label/attack mismatch is rejected") {
  TempDir tmp("manifest");
  write_presentation(tmp.path() / "a", 1);
  spad::test::spit(tmp.path() / "manifest.csv",
                   std::string(kManifestHeader) + "\na,train,bonafide,print,none,1,a\n");
  try {
    load_manifest(tmp.path());
    FAIL("expected a manifest error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::manifest);
  }
}

TEST_CASE("protocols filter attacks by group") {
  std::vector<Presentation> data;
  auto add = [&](AttackType t, int n) {
    for (int i = 0; i < n; ++i) {
      Presentation p;
      p.id = std::string(to_string(t)) + std::to_string(i);
      p.attack_type = t;
      p.label = t == AttackType::none ? Label::bonafide : Label::attack;
      p.group = group_of(t);
      p.split = Split::train;
      data.push_back(p);
    }
  };
  add(AttackType::none, 5);
  add(AttackType::rigid_mask, 3);
  add(AttackType::tattoo, 2);
  CHECK(select_protocol(data, Protocol::grand_test).train.size() == 10);
  const auto imp = select_protocol(data, Protocol::impersonation).train;
  const auto obf = select_protocol(data, Protocol::obfuscation).train;
  CHECK(imp.size() == 8);
  CHECK(obf.size() == 7);
  CHECK(std::none_of(imp.begin(), imp.end(), [](auto* p) { return p->attack_type == AttackType::tattoo; }));
  CHECK(std::none_of(obf.begin(), obf.end(), [](auto* p) { return p->attack_type == AttackType::rigid_mask; }));
}

TEST_CASE("frame sampling is even and endpoint inclusive") {
  CHECK(sample_frame_indices(10, 10) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(sample_frame_indices(20, 10) == std::vector<std::size_t>{0, 2, 4, 6, 8, 11, 13, 15, 17, 19});
  CHECK(sample_frame_indices(3, 10) == std::vector<std::size_t>{0, 1, 2});
  // Oracle: round(j * (n - 1) / (k - 1)).
  for (std::size_t n : {11u, 37u, 100u}) {
    const auto idx = sample_frame_indices(n, 10);
    for (std::size_t j = 0; j < 10; ++j)
      CHECK(idx[j] == static_cast<std::size_t>(std::llround(j * (n - 1.0) / 9.0)));
  }
}
