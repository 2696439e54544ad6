#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "blast/potentials.hpp"
#include "blast/properties.hpp"
#include "blast/structure.hpp"

namespace blast {

// One training objective term.
struct TargetProperty {
  std::string id;
  PropertyKind kind;
  double target = 0.0;
  std::string unit;
  double weight = 1.0;
  int rank = 1;
  double tolerance = 0.0;
  double scale = 1.0;
};

struct Dataset {
  std::map<std::string, Structure> structures;
  std::vector<TargetProperty> targets;
  std::string provenance;

  // Every energy_per_atom/energy_difference label must name a structure.
  void validate() const;
};

// --- extended XYZ ---------------------------------------------------------
//
// Per frame: atom count line; a comment line of key=value tokens, of which
// Lattice="ax ay az bx by bz cx cy cz" and Properties=species:S:1:pos:R:3 are
// understood; then `<species> <x> <y> <z>` per atom.

// `stem` labels the frames: "<stem>" for a single frame, "<stem>_<k>" otherwise.
std::vector<Structure> read_xyz(std::istream& in, const std::string& stem);
std::vector<Structure> load_structures(const std::filesystem::path& path);
void write_xyz(std::ostream& out, const std::vector<Structure>& frames);

// --- targets ---------------------------------------------------------------

// Parses one target entry, applying the defaults: weight 1, rank 1,
// scale max(|target|, 1e-8), tolerance 0.01·scale, unit = kind's natural unit.
TargetProperty target_from_json(const nlohmann::json& entry, std::size_t index);
nlohmann::json to_json(const TargetProperty& t);

// Either a bare array of entries or {"targets": [...]}. Duplicate ids rejected.
std::vector<TargetProperty> parse_targets(const nlohmann::json& doc);
std::vector<TargetProperty> load_targets(const std::filesystem::path& path);

// A dataset document: {"provenance": "...", "structures": [xyz paths],
// "targets": [...] or "targets.json"}. Relative paths resolve against the
// document's directory.
Dataset load_dataset(const std::filesystem::path& path);

// --- splitting and validation ----------------------------------------------

// Seeded uniform shuffle of the targets; holdout gets round(fraction·n)
// targets (at least 1). Structures are shared by both halves.
std::pair<Dataset, Dataset> split(const Dataset& data, double holdout_fraction, std::uint64_t seed);

struct TargetReport {
  std::string id;
  std::string kind;
  double target = 0.0;
  bool ok = true;  // false when the property calculation itself failed
  std::string error;
  double predicted = 0.0;
  double abs_error = 0.0;
  double normalized_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<TargetReport> targets;
  double rms_normalized_residual = 0.0;  // over successfully computed targets
  std::size_t passed = 0;
  std::size_t failed = 0;
};

nlohmann::json to_json(const ValidationReport& r);

// Predicts every holdout target with the fitted parameters. Property failures
// are recorded per target; the report is always produced. `external` serves
// external(...) targets when present.
ValidationReport cross_validate(const ParameterSpace& space, const ParameterVector& params, const Dataset& holdout,
                                const std::function<double(const std::string&)>& external = {});

}  // namespace blast
