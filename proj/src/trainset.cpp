#include "blast/trainset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "blast/error.hpp"
#include "blast/objective.hpp"

namespace blast {

using nlohmann::json;

void Dataset::validate() const {
  for (const auto& t : targets) {
    for (const std::string* label : {&t.kind.label_a, &t.kind.label_b}) {
      if (t.kind.type != PropertyType::energy_per_atom && t.kind.type != PropertyType::energy_difference) break;
      if (label->empty()) continue;
      if (!structures.contains(*label)) {
        throw ValidationError("target '" + t.id + "' references unknown structure '" + *label + "'");
      }
    }
  }
}

// --- extended XYZ -----------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// key=value tokens; values may be double-quoted.
std::map<std::string, std::string> parse_comment(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    const std::size_t key_start = i;
    while (i < line.size() && line[i] != '=' && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::string key = line.substr(key_start, i - key_start);
    if (i >= line.size() || line[i] != '=') {
      kv[key] = "";
      continue;
    }
    ++i;  // '='
    std::string value;
    if (i < line.size() && line[i] == '"') {
      const auto close = line.find('"', i + 1);
      if (close == std::string::npos) throw ParseError("unterminated quote in comment line");
      value = line.substr(i + 1, close - i - 1);
      i = close + 1;
    } else {
      const std::size_t v_start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      value = line.substr(v_start, i - v_start);
    }
    kv[key] = value;
  }
  return kv;
}

bool parse_double(const std::string& token, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(token, &used);
    return used == token.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::string frame_label(const std::string& stem, std::size_t index, bool single) {
  return single ? stem : stem + "_" + std::to_string(index);
}

}  // namespace

std::vector<Structure> read_xyz(std::istream& in, const std::string& stem) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();

  std::vector<Structure> frames;
  std::size_t pos = 0;
  while (pos < lines.size()) {
    const std::size_t frame = frames.size();
    const std::string where = "frame " + std::to_string(frame) + " (line " + std::to_string(pos + 1) + ")";
    const std::string count_text = trim(lines[pos]);
    long long count = -1;
    try {
      std::size_t used = 0;
      count = std::stoll(count_text, &used);
      if (used != count_text.size()) count = -1;
    } catch (const std::exception&) {
      count = -1;
    }
    if (count < 0) throw ParseError(where + ": malformed atom count line '" + count_text + "'");
    if (pos + 1 >= lines.size()) throw ParseError(where + ": missing comment line");

    Structure s;
    const auto kv = parse_comment(lines[pos + 1]);
    if (auto it = kv.find("Properties"); it != kv.end() && it->second != "species:S:1:pos:R:3") {
      throw ParseError(where + ": unsupported Properties '" + it->second + "'");
    }
    if (auto it = kv.find("Lattice"); it != kv.end()) {
      std::istringstream ls(it->second);
      std::vector<double> v;
      for (std::string tok; ls >> tok;) {
        double x = 0.0;
        if (!parse_double(tok, x) || !std::isfinite(x)) throw ParseError(where + ": bad Lattice value '" + tok + "'");
        v.push_back(x);
      }
      if (v.size() != 9) throw ParseError(where + ": Lattice needs 9 values");
      s.cell = Mat3{Vec3{v[0], v[1], v[2]}, Vec3{v[3], v[4], v[5]}, Vec3{v[6], v[7], v[8]}};
      s.periodic = {true, true, true};
      if (!(determinant(*s.cell) > 0.0)) throw ParseError(where + ": Lattice determinant must be positive");
    }

    const std::size_t first_atom = pos + 2;
    std::size_t found = 0;
    while (found < static_cast<std::size_t>(count) && first_atom + found < lines.size()) {
      std::istringstream ls(lines[first_atom + found]);
      std::vector<std::string> tok;
      for (std::string t; ls >> t;) tok.push_back(t);
      double probe = 0.0;
      // A bare count line means the next frame started early.
      if (tok.size() == 1 && parse_double(tok[0], probe)) break;
      if (tok.size() < 4 || parse_double(tok[0], probe)) {
        throw ParseError(where + ": atom " + std::to_string(found) + " is missing the species column");
      }
      Vec3 p;
      for (int k = 0; k < 3; ++k) {
        double x = 0.0;
        if (!parse_double(tok[1 + k], x) || !std::isfinite(x)) {
          throw ParseError(where + ": non-finite coordinate '" + tok[1 + k] + "' for atom " + std::to_string(found));
        }
        p[k] = x;
      }
      s.species.push_back(tok[0]);
      s.positions.push_back(p);
      ++found;
    }
    if (found != static_cast<std::size_t>(count)) {
      throw ParseError(where + ": atom count line says " + std::to_string(count) + " but " + std::to_string(found) +
                       " atom lines follow");
    }
    frames.push_back(std::move(s));
    pos = first_atom + found;
  }
  for (std::size_t k = 0; k < frames.size(); ++k) frames[k].label = frame_label(stem, k, frames.size() == 1);
  return frames;
}

std::vector<Structure> load_structures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open structure file '" + path.string() + "'");
  try {
    return read_xyz(in, path.stem().string());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_xyz(std::ostream& out, const std::vector<Structure>& frames) {
  char buf[96];
  for (const auto& s : frames) {
    out << s.size() << '\n';
    if (s.cell && s.any_periodic()) {
      out << "Lattice=\"";
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          std::snprintf(buf, sizeof buf, "%.17g", (*s.cell)[r][c]);
          out << buf << (r == 2 && c == 2 ? "" : " ");
        }
      }
      out << "\" ";
    }
    out << "Properties=species:S:1:pos:R:3\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& p = s.positions[i];
      std::snprintf(buf, sizeof buf, " %.17g %.17g %.17g", p.x, p.y, p.z);
      out << s.species[i] << buf << '\n';
    }
  }
}

// --- targets ------------------------------------------------------------------

TargetProperty target_from_json(const json& entry, std::size_t index) {
  const std::string path = "targets[" + std::to_string(index) + "]";
  if (!entry.is_object()) throw ValidationError("target entry must be an object", path);
  TargetProperty t;
  t.id = entry.value("id", "target_" + std::to_string(index));
  if (!entry.contains("kind") || !entry["kind"].is_string()) throw ValidationError("missing kind", path + ".kind");
  try {
    t.kind = PropertyKind::parse(entry["kind"].get<std::string>());
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), path + ".kind");
  }
  if (!entry.contains("target") || !entry["target"].is_number()) {
    throw ValidationError("missing numeric target", path + ".target");
  }
  t.target = entry["target"].get<double>();
  if (!std::isfinite(t.target)) throw ValidationError("target must be finite", path + ".target");

  const std::string natural = t.kind.natural_unit();
  t.unit = entry.value("unit", natural);
  if (!natural.empty() && t.unit != natural) {
    throw ValidationError("unit '" + t.unit + "' does not match " + t.kind.to_string() + " (" + natural + ")",
                          path + ".unit");
  }
  t.weight = entry.value("weight", 1.0);
  if (!(t.weight >= 0.0)) throw ValidationError("weight must be >= 0", path + ".weight");
  t.rank = entry.value("rank", 1);
  if (t.rank < 1) throw ValidationError("rank must be >= 1", path + ".rank");
  t.scale = entry.value("scale", std::max(std::abs(t.target), 1e-8));
  if (!(t.scale > 0.0)) throw ValidationError("scale must be > 0", path + ".scale");
  t.tolerance = entry.value("tolerance", 0.01 * t.scale);
  if (!(t.tolerance > 0.0)) throw ValidationError("tolerance must be > 0", path + ".tolerance");
  return t;
}

json to_json(const TargetProperty& t) {
  return json{{"id", t.id},         {"kind", t.kind.to_string()}, {"target", t.target},
              {"unit", t.unit},     {"weight", t.weight},         {"rank", t.rank},
              {"tolerance", t.tolerance}, {"scale", t.scale}};
}

std::vector<TargetProperty> parse_targets(const json& doc) {
  const json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("targets")) throw ValidationError("missing targets array", "targets");
    list = &doc["targets"];
  }
  if (!list->is_array()) throw ValidationError("targets must be an array", "targets");
  std::vector<TargetProperty> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < list->size(); ++i) {
    out.push_back(target_from_json((*list)[i], i));
    if (!ids.insert(out.back().id).second) {
      throw ValidationError("duplicate target id '" + out.back().id + "'", "targets[" + std::to_string(i) + "].id");
    }
  }
  return out;
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<TargetProperty> load_targets(const std::filesystem::path& path) { return parse_targets(read_json_file(path)); }

Dataset load_dataset(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  if (!doc.is_object()) throw ValidationError("dataset document must be an object");
  const auto base = path.parent_path();
  Dataset d;
  d.provenance = doc.value("provenance", "");
  if (doc.contains("structures")) {
    if (!doc["structures"].is_array()) throw ValidationError("must be an array of paths", "structures");
    for (const auto& p : doc["structures"]) {
      for (auto& s : load_structures(base / p.get<std::string>())) {
        const std::string label = s.label;
        if (!d.structures.emplace(label, std::move(s)).second) {
          throw ValidationError("duplicate structure label '" + label + "'", "structures");
        }
      }
    }
  }
  if (doc.contains("targets") && doc["targets"].is_string()) {
    d.targets = load_targets(base / doc["targets"].get<std::string>());
  } else {
    d.targets = parse_targets(doc);
  }
  d.validate();
  return d;
}

// --- splitting and validation ---------------------------------------------------

std::pair<Dataset, Dataset> split(const Dataset& data, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ValidationError("holdout fraction must be in (0, 1)");
  }
  const std::size_t n = data.targets.size();
  if (n < 2) throw ValidationError("need at least 2 targets to split");
  std::size_t k = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> hold(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(hold.begin(), hold.end());
  std::sort(train.begin(), train.end());

  Dataset a{data.structures, {}, data.provenance};
  Dataset b{data.structures, {}, data.provenance};
  for (auto i : train) a.targets.push_back(data.targets[i]);
  for (auto i : hold) b.targets.push_back(data.targets[i]);
  return {std::move(a), std::move(b)};
}

json to_json(const ValidationReport& r) {
  json targets = json::array();
  for (const auto& t : r.targets) {
    json row{{"id", t.id}, {"kind", t.kind}, {"target", t.target}, {"ok", t.ok}, {"tolerance", t.tolerance},
             {"pass", t.pass}};
    if (t.ok) {
      row["predicted"] = t.predicted;
      row["abs_error"] = t.abs_error;
      row["normalized_residual"] = t.normalized_residual;
    } else {
      row["error"] = t.error;
    }
    targets.push_back(std::move(row));
  }
  return json{{"targets", targets},
              {"rms_normalized_residual", r.rms_normalized_residual},
              {"passed", r.passed},
              {"failed", r.failed}};
}

ValidationReport cross_validate(const ParameterSpace& space, const ParameterVector& params, const Dataset& holdout,
                                const std::function<double(const std::string&)>& external) {
  ValidationReport report;
  std::map<std::string, RelaxResult> cache;
  PropertyContext ctx{&holdout.structures, external, &cache};
  double sum_sq = 0.0;
  std::size_t computed = 0;
  for (const auto& t : holdout.targets) {
    TargetReport row;
    row.id = t.id;
    row.kind = t.kind.to_string();
    row.target = t.target;
    row.tolerance = t.tolerance;
    try {
      row.predicted = compute_property(t.kind, space, params, ctx);
      if (!std::isfinite(row.predicted)) throw ComputeError("non-finite prediction");
      row.abs_error = std::abs(row.predicted - t.target);
      row.normalized_residual = residual(row.predicted, t);
      row.pass = row.abs_error <= t.tolerance;
      sum_sq += row.normalized_residual * row.normalized_residual;
      ++computed;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      row.pass = false;
    }
    (row.pass ? report.passed : report.failed)++;
    report.targets.push_back(std::move(row));
  }
  report.rms_normalized_residual = computed ? std::sqrt(sum_sq / static_cast<double>(computed)) : 0.0;
  return report;
}

}  // namespace blast
