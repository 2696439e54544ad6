#include "blast/serialize.hpp"

#include <cmath>
#include <limits>

#include "blast/error.hpp"

namespace blast {

using nlohmann::json;

json real_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double real_from_json(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

void to_json(json& j, const ParameterSpec& s) {
  j = json{{"name", s.name},   {"unit", s.unit},
           {"lower", s.lower}, {"upper", s.upper},
           {"default_low", s.default_low}, {"default_high", s.default_high}};
}

void from_json(const json& j, ParameterSpec& s) {
  s.name = j.at("name").get<std::string>();
  s.unit = j.value("unit", "");
  s.lower = j.at("lower").get<double>();
  s.upper = j.at("upper").get<double>();
  s.default_low = j.value("default_low", s.lower);
  s.default_high = j.value("default_high", s.upper);
}

void to_json(json& j, const ParameterSpace& s) {
  j = json{{"model_id", s.model_id}, {"species", s.species}, {"specs", s.specs}};
}

void from_json(const json& j, ParameterSpace& s) {
  s.model_id = j.at("model_id").get<std::string>();
  s.species = j.at("species").get<std::vector<std::string>>();
  s.specs = j.at("specs").get<std::vector<ParameterSpec>>();
}

void to_json(json& j, const ParameterVector& v) { j = v.values; }
void from_json(const json& j, ParameterVector& v) { v.values = j.get<std::vector<double>>(); }

void to_json(json& j, const Prediction& p) {
  j = p.ok ? json{{"ok", true}, {"value", real_to_json(p.value)}} : json{{"ok", false}, {"error", p.error}};
}

void from_json(const json& j, Prediction& p) {
  p.ok = j.at("ok").get<bool>();
  p.value = p.ok ? real_from_json(j.at("value")) : 0.0;
  p.error = j.value("error", "");
}

void to_json(json& j, const Candidate& c) {
  json levels = json::object();
  for (const auto& [rank, v] : c.level_objectives) levels[std::to_string(rank)] = real_to_json(v);
  j = json{{"params", c.params},
           {"objective", real_to_json(c.objective)},
           {"levels", levels},
           {"feasible", c.feasible},
           {"predictions", c.predictions}};
}

void from_json(const json& j, Candidate& c) {
  c.params = j.at("params").get<ParameterVector>();
  c.objective = real_from_json(j.at("objective"));
  c.level_objectives.clear();
  for (const auto& [rank, v] : j.at("levels").items()) c.level_objectives[std::stoi(rank)] = real_from_json(v);
  c.feasible = j.at("feasible").get<bool>();
  c.predictions = j.value("predictions", Predictions{});
}

void to_json(json& j, const HistoryEntry& h) {
  json levels = json::object();
  for (const auto& [rank, v] : h.best_levels) levels[std::to_string(rank)] = real_to_json(v);
  j = json{{"iteration", h.iteration},
           {"best_objective", real_to_json(h.best_objective)},
           {"mean_objective", real_to_json(h.mean_objective)},
           {"evaluations", h.evaluations},
           {"best_levels", levels},
           {"stage", h.stage}};
}

void from_json(const json& j, HistoryEntry& h) {
  h.iteration = j.at("iteration").get<int>();
  h.best_objective = real_from_json(j.at("best_objective"));
  h.mean_objective = real_from_json(j.at("mean_objective"));
  h.evaluations = j.at("evaluations").get<std::size_t>();
  h.best_levels.clear();
  const json levels = j.value("best_levels", json::object());
  for (const auto& [rank, v] : levels.items()) {
    h.best_levels[std::stoi(rank)] = real_from_json(v);
  }
  h.stage = j.value("stage", "");
}

void to_json(json& j, const LearnResult& r) {
  j = json{{"best", r.best}, {"history", r.history}, {"total_evaluations", r.total_evaluations}};
  if (!r.front.empty()) j["front"] = r.front;
}

void from_json(const json& j, LearnResult& r) {
  r.best = j.at("best").get<Candidate>();
  r.history = j.at("history").get<std::vector<HistoryEntry>>();
  r.total_evaluations = j.at("total_evaluations").get<std::size_t>();
  r.front = j.value("front", std::vector<Candidate>{});
}

void to_json(json& j, const Structure& s) {
  json pos = json::array();
  for (const auto& p : s.positions) pos.push_back({p.x, p.y, p.z});
  j = json{{"label", s.label}, {"species", s.species}, {"positions", pos}, {"periodic", s.periodic}};
  if (s.cell) {
    json cell = json::array();
    for (const auto& row : *s.cell) cell.push_back({row.x, row.y, row.z});
    j["cell"] = cell;
  }
}

void from_json(const json& j, Structure& s) {
  s.label = j.value("label", "");
  s.species = j.at("species").get<std::vector<std::string>>();
  s.positions.clear();
  for (const auto& p : j.at("positions")) s.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
  s.periodic = j.value("periodic", std::array<bool, 3>{false, false, false});
  s.cell.reset();
  if (j.contains("cell")) {
    Mat3 m;
    for (int r = 0; r < 3; ++r) m[r] = {j["cell"][r][0].get<double>(), j["cell"][r][1].get<double>(), j["cell"][r][2].get<double>()};
    s.cell = m;
  }
}

json named_params(const ParameterSpace& space, const ParameterVector& v) {
  json out = json::object();
  for (std::size_t i = 0; i < space.size() && i < v.size(); ++i) out[space.specs[i].name] = v[i];
  return out;
}

}  // namespace blast
