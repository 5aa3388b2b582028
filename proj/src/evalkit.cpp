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

#include "spad/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace spad {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double percent(std::size_t num, std::size_t den) {
  return static_cast<double>(100 * num) / static_cast<double>(den);
}

double acer_exact(std::size_t aa, std::size_t na, std::size_t br, std::size_t nb) {
  return static_cast<double>(100 * (aa * nb + br * na)) / static_cast<double>(2 * na * nb);
}

// Distinct scores ascending with per-value class counts.
struct Level {
  double score;
  std::size_t bonafide;
  std::size_t attacks;
};

std::vector<Level> levels(const ScoreSet& s) {
  std::vector<std::pair<double, bool>> v;
  v.reserve(s.entries.size());
  for (const auto& e : s.entries) v.emplace_back(e.score, e.label == Label::bonafide);
  std::sort(v.begin(), v.end());
  std::vector<Level> out;
  for (const auto& [score, bf] : v) {
    if (out.empty() || out.back().score != score) out.push_back({score, 0, 0});
    (bf ? out.back().bonafide : out.back().attacks) += 1;
  }
  return out;
}

// Candidate thresholds: -inf, midpoints, +inf; with the counts rejected below each.
struct Cut {
  double tau;
  std::size_t bonafide_rejected;
  std::size_t attacks_rejected;
};

std::vector<Cut> sweep(const std::vector<Level>& lv) {
  std::vector<Cut> cuts;
  cuts.reserve(lv.size() + 1);
  std::size_t rb = 0, ra = 0;
  cuts.push_back({-kInf, 0, 0});
  for (std::size_t g = 0; g < lv.size(); ++g) {
    rb += lv[g].bonafide;
    ra += lv[g].attacks;
    const double tau = g + 1 < lv.size() ? lv[g].score + (lv[g + 1].score - lv[g].score) / 2 : kInf;
    cuts.push_back({tau, rb, ra});
  }
  return cuts;
}

void require_two_classes(const ScoreSet& s, const char* op) {
  const std::size_t nb = s.count(Label::bonafide), na = s.count(Label::attack);
  if (nb == 0 || na == 0)
    fail(ErrorKind::partial_result, std::string(op) + ": no " +
                                        (nb == 0 ? "bonafide" : "attack") + " entries");
}

std::string fmt(double v, int prec = 6) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

nlohmann::json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

std::string roc_svg(const std::vector<RocPoint>& pts) {
  // APCER on x, BPCER on y, both in percent, 400x400 plot area.
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"460\" height=\"460\">\n"
    << "<rect x=\"40\" y=\"20\" width=\"400\" height=\"400\" fill=\"none\" stroke=\"black\"/>\n"
    << "<text x=\"240\" y=\"452\" text-anchor=\"middle\" font-size=\"12\">APCER [%]</text>\n"
    << "<text x=\"14\" y=\"220\" font-size=\"12\" transform=\"rotate(-90 14 220)\" "
       "text-anchor=\"middle\">BPCER [%]</text>\n"
    << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (const auto& p : pts) s << fmt(40 + 4 * p.apcer, 2) << ',' << fmt(420 - 4 * p.bpcer, 2) << ' ';
  s << "\"/>\n</svg>\n";
  return s.str();
}

}  // namespace

std::size_t ScoreSet::count(Label l) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [l](const ScoreEntry& e) { return e.label == l; }));
}

void ScoreSet::validate() const {
  if (entries.empty()) fail(ErrorKind::domain, "score set is empty");
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!std::isfinite(e.score)) fail(ErrorKind::domain, "non-finite score for " + e.id);
    if (!ids.insert(e.id).second) fail(ErrorKind::domain, "duplicate score id " + e.id);
  }
}

RateTriple compute_rates(const ScoreSet& scores, double tau) {
  RateTriple r;
  r.tau = tau;
  for (const auto& e : scores.entries) {
    const bool accepted = e.score >= tau;
    if (e.label == Label::attack) {
      ++r.attacks;
      if (accepted) ++r.attacks_accepted;
    } else {
      ++r.bonafide;
      if (!accepted) ++r.bonafide_rejected;
    }
  }
  if (r.attacks == 0 || r.bonafide == 0) {
    std::optional<double> apcer, bpcer;
    if (r.attacks) apcer = percent(r.attacks_accepted, r.attacks);
    if (r.bonafide) bpcer = percent(r.bonafide_rejected, r.bonafide);
    throw PartialResultError(std::string("compute_rates: no ") +
                                 (r.attacks == 0 ? "attack" : "bonafide") + " entries",
                             apcer, bpcer);
  }
  r.apcer = percent(r.attacks_accepted, r.attacks);
  r.bpcer = percent(r.bonafide_rejected, r.bonafide);
  r.acer = acer_exact(r.attacks_accepted, r.attacks, r.bonafide_rejected, r.bonafide);
  return r;
}

ThresholdResult threshold_at_bpcer(const ScoreSet& dev, double target_percent) {
  std::vector<double> bf;
  for (const auto& e : dev.entries)
    if (e.label == Label::bonafide) bf.push_back(e.score);
  if (bf.empty()) fail(ErrorKind::precondition, "threshold_at_bpcer: no bonafide entries");
  std::sort(bf.begin(), bf.end());
  const std::size_t n = bf.size();

  ThresholdResult r;
  r.tau = bf.front();
  r.bpcer = 0.0;
  r.granularity_warning = target_percent > 0.0 && percent(1, n) > target_percent;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (bf[i + 1] == bf[i]) continue;
    const double rate = percent(i + 1, n);
    if (rate > target_percent) break;
    r.tau = bf[i] + (bf[i + 1] - bf[i]) / 2;
    r.bpcer = rate;
  }
  if (target_percent >= 100.0) {
    r.tau = kInf;
    r.bpcer = 100.0;
  }
  return r;
}

EerResult eer(const ScoreSet& scores) {
  require_two_classes(scores, "eer");
  const std::size_t nb = scores.count(Label::bonafide), na = scores.count(Label::attack);
  const auto cuts = sweep(levels(scores));
  // |APCER - BPCER| compared exactly through the common denominator na*nb.
  auto gap = [&](const Cut& c) {
    const std::size_t a = (na - c.attacks_rejected) * nb, b = c.bonafide_rejected * na;
    return a > b ? a - b : b - a;
  };
  const Cut* best = &cuts.front();
  for (const auto& c : cuts)
    if (gap(c) < gap(*best)) best = &c;
  return {acer_exact(na - best->attacks_rejected, na, best->bonafide_rejected, nb), best->tau};
}

std::vector<RocPoint> roc_points(const ScoreSet& scores) {
  require_two_classes(scores, "roc_points");
  const std::size_t nb = scores.count(Label::bonafide), na = scores.count(Label::attack);
  std::vector<RocPoint> out;
  for (const auto& c : sweep(levels(scores)))
    out.push_back({c.tau, percent(na - c.attacks_rejected, na), percent(c.bonafide_rejected, nb)});
  return out;
}

std::map<AttackType, TypeRate> apcer_by_type(const ScoreSet& scores, double tau) {
  std::map<AttackType, std::pair<std::size_t, std::size_t>> counts;  // accepted, total
  for (const auto& e : scores.entries) {
    if (e.label != Label::attack) continue;
    auto& c = counts[e.attack_type];
    ++c.second;
    if (e.score >= tau) ++c.first;
  }
  if (counts.empty()) fail(ErrorKind::precondition, "apcer_by_type: no attack entries");
  std::map<AttackType, TypeRate> out;
  for (const auto& [t, c] : counts) out[t] = {c.second, percent(c.first, c.second)};
  return out;
}

std::string format_summary(const Report& r, const std::string& protocol,
                           const ReportLabels& labels) {
  std::ostringstream s;
  s << "BPCER, APCER and ACER [%] on the test set of the " << protocol << " protocol\n";
  s << "threshold (dev BPCER " << fmt(r.dev_bpcer_target, 1) << "%): " << fmt(r.tau)
    << (r.granularity_warning ? "  [dev too small for target; BPCER 0 threshold]" : "") << "\n\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-28s %7s %7s %7s\n", "Model", "Input", "BPCER", "APCER",
                "ACER");
  s << line;
  std::snprintf(line, sizeof line, "%-12s %-28s %7.1f %7.1f %7.1f\n", labels.model.c_str(),
                labels.input.c_str(), r.test.bpcer, r.test.apcer, r.test.acer);
  s << line;
  s << "\ntest EER: " << fmt(r.test_eer, 2) << "%\n\nAPCER [%] per attack type\n";
  for (const auto& [t, tr] : r.breakdown) {
    std::snprintf(line, sizeof line, "  %-14s %5zu %7.1f\n", to_string(t), tr.count, tr.apcer);
    s << line;
  }
  return s.str();
}

Report write_report(const ScoreSet& dev, const ScoreSet& test, const fs::path& out,
                    const ReportLabels& labels, double dev_bpcer_target) {
  dev.validate();
  test.validate();
  const auto th = threshold_at_bpcer(dev, dev_bpcer_target);
  Report r;
  r.tau = th.tau;
  r.dev_bpcer_target = dev_bpcer_target;
  r.granularity_warning = th.granularity_warning;
  r.test = compute_rates(test, th.tau);
  r.test_eer = eer(test).eer;
  r.breakdown = apcer_by_type(test, th.tau);

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + out.string() + ": " + ec.message());

  const std::string protocol = test.protocol.empty() ? dev.protocol : test.protocol;
  nlohmann::ordered_json m;
  m["protocol"] = protocol;
  m["tau"] = json_number(r.tau);
  m["dev_bpcer_target"] = dev_bpcer_target;
  m["test_apcer"] = r.test.apcer;
  m["test_bpcer"] = r.test.bpcer;
  m["test_acer"] = r.test.acer;
  m["test_eer"] = r.test_eer;
  m["dev_granularity_warning"] = r.granularity_warning;
  write_text(out / "metrics.json", m.dump(2) + "\n");

  const auto roc = roc_points(test);
  std::string csv = "tau,apcer,bpcer\n";
  for (const auto& p : roc) csv += fmt(p.tau, 9) + ',' + fmt(p.apcer) + ',' + fmt(p.bpcer) + '\n';
  write_text(out / "roc.csv", csv);
  write_text(out / "roc.svg", roc_svg(roc));

  std::string bd = "attack_type,count,apcer\n";
  for (const auto& [t, tr] : r.breakdown)
    bd += std::string(to_string(t)) + ',' + std::to_string(tr.count) + ',' + fmt(tr.apcer) + '\n';
  write_text(out / "breakdown.csv", bd);
  write_text(out / "summary.txt", format_summary(r, protocol, labels));
  return r;
}

}  // namespace spad
