#pragma once

// JSON codecs for the domain types. Non-finite reals are written as null and
// read back as +inf (objectives are the only values that can be infinite).

#include "json.hpp"

#include "blast/learn.hpp"
#include "blast/objective.hpp"
#include "blast/potentials.hpp"
#include "blast/structure.hpp"

namespace blast {

nlohmann::json real_to_json(double v);
double real_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const ParameterSpec& s);
void from_json(const nlohmann::json& j, ParameterSpec& s);
void to_json(nlohmann::json& j, const ParameterSpace& s);
void from_json(const nlohmann::json& j, ParameterSpace& s);
void to_json(nlohmann::json& j, const ParameterVector& v);
void from_json(const nlohmann::json& j, ParameterVector& v);
void to_json(nlohmann::json& j, const Prediction& p);
void from_json(const nlohmann::json& j, Prediction& p);
void to_json(nlohmann::json& j, const Candidate& c);
void from_json(const nlohmann::json& j, Candidate& c);
void to_json(nlohmann::json& j, const HistoryEntry& h);
void from_json(const nlohmann::json& j, HistoryEntry& h);
void to_json(nlohmann::json& j, const LearnResult& r);
void from_json(const nlohmann::json& j, LearnResult& r);
void to_json(nlohmann::json& j, const Structure& s);
void from_json(const nlohmann::json& j, Structure& s);

// Name → value view of a parameter vector, in spec order.
nlohmann::json named_params(const ParameterSpace& space, const ParameterVector& v);

}  // namespace blast
