#include "mmtlab/probing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "mmtlab/error.hpp"
#include "mmtlab/keyed_rng.hpp"
#include "mmtlab/text.hpp"

namespace mmtlab::probing {

using corpus::CorpusSplit;
using corpus::FeatureMap;
using corpus::FeatureMatrix;
using corpus::RecordId;

const char* to_string(Substitution s) noexcept {
  switch (s) {
    case Substitution::actual: return "actual";
    case Substitution::random_uniform: return "random_uniform";
    case Substitution::random_derangement: return "random_derangement";
  }
  return "?";
}

const char* to_string(FeatureKind k) noexcept { return k == FeatureKind::crop ? "crop" : "full"; }

const char* to_string(NoiseLevel n) noexcept {
  switch (n) {
    case NoiseLevel::none: return "none";
    case NoiseLevel::low: return "low";
    case NoiseLevel::high: return "high";
  }
  return "?";
}

const char* to_string(Subset s) noexcept { return s == Subset::test ? "test" : "challenge"; }

Substitution parse_substitution(std::string_view name) {
  if (name == "actual") return Substitution::actual;
  if (name == "uniform" || name == "random_uniform") return Substitution::random_uniform;
  if (name == "derangement" || name == "random_derangement") return Substitution::random_derangement;
  throw Error(Errc::invalid_argument, "unknown substitution mode '" + std::string(name) + "'");
}

FeatureKind parse_feature_kind(std::string_view name) {
  if (name == "crop") return FeatureKind::crop;
  if (name == "full") return FeatureKind::full;
  throw Error(Errc::invalid_argument, "unknown feature kind '" + std::string(name) + "'");
}

NoiseLevel parse_noise_level(std::string_view name) {
  if (name == "none") return NoiseLevel::none;
  if (name == "low") return NoiseLevel::low;
  if (name == "high") return NoiseLevel::high;
  throw Error(Errc::invalid_argument, "unknown noise level '" + std::string(name) + "'");
}

Subset parse_subset(std::string_view name) {
  if (name == "test" || name == "eval") return Subset::test;
  if (name == "challenge" || name == "chal") return Subset::challenge;
  throw Error(Errc::invalid_argument, "unknown subset '" + std::string(name) + "'");
}

std::vector<std::size_t> derangement(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw Error(Errc::invalid_argument, "derangement needs a pool of at least 2 images");
  const KeyedRng rng(seed);
  std::vector<std::size_t> p(n);
  // Uniform shuffle, rejected until fixed-point free (about e attempts).
  for (std::uint64_t attempt = 0;; ++attempt) {
    std::iota(p.begin(), p.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(p[i], p[rng.below(i + 1, attempt, i)]);
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i) fixed = p[i] == i;
    if (!fixed) return p;
  }
}

std::map<RecordId, std::string> assign_images(const CorpusSplit& split, const FeatureMap& features,
                                              const ProbeConfig& config) {
  corpus::require_features(split, features);
  std::set<std::string> distinct;
  for (const auto& r : split.records) distinct.insert(r.image_id);
  const std::vector<std::string> pool(distinct.begin(), distinct.end());

  std::map<RecordId, std::string> out;
  switch (config.substitution) {
    case Substitution::actual:
      for (const auto& r : split.records) out[r.id] = r.image_id;
      break;
    case Substitution::random_uniform: {
      const KeyedRng rng(config.seed);
      for (const auto& r : split.records)
        out[r.id] = pool[rng.below(pool.size(), static_cast<std::uint64_t>(r.id))];
      break;
    }
    case Substitution::random_derangement: {
      if (pool.size() < 2)
        throw Error(Errc::invalid_argument, "derangement needs at least 2 distinct images, split has " +
                                                std::to_string(pool.size()));
      const auto perm = derangement(pool.size(), config.seed);
      std::map<std::string, std::string, std::less<>> mapped;
      for (std::size_t i = 0; i < pool.size(); ++i) mapped[pool[i]] = pool[perm[i]];
      for (const auto& r : split.records) out[r.id] = mapped.at(r.image_id);
      break;
    }
  }
  return out;
}

std::map<RecordId, FeatureMatrix> substitute_features(const CorpusSplit& split, const FeatureMap& features,
                                                      const ProbeConfig& config) {
  std::map<RecordId, FeatureMatrix> out;
  for (const auto& [id, image] : assign_images(split, features, config)) out[id] = features.find(image)->second;
  return out;
}

CorpusSplit apply_assignment(const CorpusSplit& split, const std::map<RecordId, std::string>& assignment) {
  CorpusSplit out = split;
  for (auto& r : out.records) {
    const auto it = assignment.find(r.id);
    if (it == assignment.end())
      throw Error(Errc::invalid_argument, "no assignment for record " + std::to_string(r.id));
    r.image_id = it->second;
  }
  return out;
}

// ---- scores -------------------------------------------------------------

ScoreSet parse_scores(std::string_view contents) {
  std::istringstream in{std::string(contents)};
  std::string line;
  std::size_t line_no = 0;
  int col_system = -1, col_lang = -1, col_subset = -1, col_bleu = -1;
  std::size_t width = 0;
  ScoreSet set;
  std::set<std::tuple<std::string, std::string, Subset>> seen;
  auto fail = [&](const std::string& m) {
    throw Error(Errc::data, "scores line " + std::to_string(line_no) + ": " + m);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(std::string(text::trim(f)));
    if (!line.empty() && line.back() == '\t') fields.emplace_back();
    if (col_system < 0) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const std::string& h = fields[i];
        if (h == "system") col_system = int(i);
        else if (h == "language") col_lang = int(i);
        else if (h == "subset") col_subset = int(i);
        else if (h == "bleu") col_bleu = int(i);
      }
      if (col_system < 0 || col_lang < 0 || col_subset < 0 || col_bleu < 0)
        fail("header must name system, language, subset and bleu");
      width = fields.size();
      continue;
    }
    if (fields.size() != width) fail("expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()));
    Score s;
    s.system = fields[col_system];
    s.language = fields[col_lang];
    if (s.system.empty() || s.language.empty()) fail("empty system or language");
    try {
      s.subset = parse_subset(fields[col_subset]);
    } catch (const Error& e) {
      fail(e.what());
    }
    const std::string& b = fields[col_bleu];
    char* end = nullptr;
    s.bleu = std::strtod(b.c_str(), &end);
    if (b.empty() || end != b.c_str() + b.size() || !std::isfinite(s.bleu)) fail("bad bleu value '" + b + "'");
    if (!seen.emplace(s.system, s.language, s.subset).second)
      fail("duplicate row for " + s.system + "/" + s.language + "/" + to_string(s.subset));
    set.scores.push_back(std::move(s));
  }
  if (col_system < 0) throw Error(Errc::data, "scores file has no header");
  if (set.scores.empty()) throw Error(Errc::data, "scores file has no rows");
  return set;
}

ScoreSet load_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scores(ss.str());
}

namespace {

using GridKey = std::pair<std::string, Subset>;

std::vector<std::string> systems_of(const ScoreSet& s) {
  std::vector<std::string> out;
  for (const auto& x : s.scores)
    if (std::find(out.begin(), out.end(), x.system) == out.end()) out.push_back(x.system);
  return out;
}

std::map<GridKey, double> grid_of(const ScoreSet& s, const std::string& system) {
  std::map<GridKey, double> g;
  for (const auto& x : s.scores)
    if (x.system == system) g[{x.language, x.subset}] = x.bleu;
  return g;
}

std::string describe(const std::map<GridKey, double>& g) {
  std::string out;
  for (const auto& [k, v] : g) out += (out.empty() ? "" : ",") + k.first + "/" + to_string(k.second);
  return out;
}

}  // namespace

std::vector<ComparisonCell> run_probe(const ScoreSet& a, const ScoreSet& b) {
  const auto systems_a = systems_of(a);
  const auto systems_b = systems_of(b);
  if (systems_a.empty() || systems_b.empty()) throw Error(Errc::data, "empty score set");
  std::vector<ComparisonCell> cells;
  for (const auto& sb : systems_b) {
    std::string sa = systems_a.front();
    if (systems_a.size() > 1) {
      if (std::find(systems_a.begin(), systems_a.end(), sb) == systems_a.end())
        throw Error(Errc::data, "system '" + sb + "' has no counterpart in the baseline scores");
      sa = sb;
    }
    const auto ga = grid_of(a, sa);
    const auto gb = grid_of(b, sb);
    bool same = ga.size() == gb.size();
    for (auto ia = ga.begin(), ib = gb.begin(); same && ia != ga.end(); ++ia, ++ib) same = ia->first == ib->first;
    if (!same)
      throw Error(Errc::data, "grid mismatch: " + sa + " covers {" + describe(ga) + "}, " + sb + " covers {" +
                                  describe(gb) + "}");
    // Languages keep the order in which they appear in b.
    for (const auto& x : b.scores) {
      if (x.system != sb) continue;
      cells.push_back({sa, sb, x.subset, x.language, x.bleu - ga.at({x.language, x.subset})});
    }
  }
  return cells;
}

std::string format_delta(double delta) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f", delta);
  std::string s = buf;
  if (s == "+0.00" || s == "-0.00") return "0.00";
  return s;
}

namespace {

struct Layout {
  std::vector<std::pair<std::string, std::string>> rows;  // (a, b)
  std::vector<std::string> languages;
  std::vector<Subset> subsets;
  std::map<std::tuple<std::string, std::string, std::string, Subset>, double> value;
};

Layout layout_of(const std::vector<ComparisonCell>& cells) {
  Layout l;
  std::set<Subset> subsets;
  for (const auto& c : cells) {
    const std::pair<std::string, std::string> row{c.system_a, c.system_b};
    if (std::find(l.rows.begin(), l.rows.end(), row) == l.rows.end()) l.rows.push_back(row);
    if (std::find(l.languages.begin(), l.languages.end(), c.language) == l.languages.end())
      l.languages.push_back(c.language);
    subsets.insert(c.subset);
    if (!std::isfinite(c.delta)) throw Error(Errc::data, "non-finite delta for " + c.system_b);
    l.value[{c.system_a, c.system_b, c.language, c.subset}] = c.delta;
  }
  l.subsets.assign(subsets.begin(), subsets.end());
  return l;
}

bool single_baseline(const Layout& l) {
  return std::all_of(l.rows.begin(), l.rows.end(), [&](const auto& r) { return r.first == l.rows.front().first; });
}

// Cells of a row in column order, then the per-subset averages.
std::vector<std::string> row_values(const Layout& l, const std::pair<std::string, std::string>& row) {
  std::vector<std::string> out;
  std::map<Subset, std::pair<double, std::size_t>> sums;
  for (const auto& lang : l.languages) {
    for (Subset s : l.subsets) {
      const auto it = l.value.find({row.first, row.second, lang, s});
      if (it == l.value.end()) {
        out.emplace_back("");
        continue;
      }
      out.push_back(format_delta(it->second));
      sums[s].first += it->second;
      sums[s].second += 1;
    }
  }
  for (Subset s : l.subsets) {
    const auto& [sum, n] = sums[s];
    out.push_back(n ? format_delta(sum / double(n)) : "");
  }
  return out;
}

std::string row_label(const Layout& l, const std::pair<std::string, std::string>& row) {
  return single_baseline(l) ? row.second : row.second + " vs " + row.first;
}

}  // namespace

std::string render_markdown(const std::vector<ComparisonCell>& cells) {
  if (cells.empty()) throw Error(Errc::data, "no comparison cells");
  const Layout l = layout_of(cells);
  std::ostringstream out;
  out << "| System |";
  for (const auto& lang : l.languages)
    for (Subset s : l.subsets) out << ' ' << lang << ' ' << to_string(s) << " |";
  for (Subset s : l.subsets) out << " Average " << to_string(s) << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < (l.languages.size() + 1) * l.subsets.size(); ++i) out << "---:|";
  out << '\n';
  for (const auto& row : l.rows) {
    out << "| " << row_label(l, row) << " |";
    for (const auto& v : row_values(l, row)) out << ' ' << v << " |";
    out << '\n';
  }
  if (single_baseline(l)) out << "\nDeltas are system minus " << l.rows.front().first << "; positive favours the system.\n";
  else out << "\nDeltas are b minus a; positive favours b.\n";
  return out.str();
}

std::string render_csv(const std::vector<ComparisonCell>& cells) {
  std::ostringstream out;
  out << "system_a,system_b,language,subset,delta\n";
  for (const auto& c : cells) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", c.delta);
    out << c.system_a << ',' << c.system_b << ',' << c.language << ',' << to_string(c.subset) << ',' << buf << '\n';
  }
  return out.str();
}

}  // namespace mmtlab::probing
