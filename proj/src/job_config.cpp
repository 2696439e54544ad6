#include <cmath>
#include <set>

#include "blast/jobs.hpp"
#include "blast/serialize.hpp"

namespace blast {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("unknown field", join(path, key));
  }
}

const json& object_at(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) throw ValidationError("is required", join(path, key));
  if (!obj[key].is_object()) throw ValidationError("must be an object", join(path, key));
  return obj[key];
}

std::string string_at(const json& obj, const char* key, const std::string& path, std::optional<std::string> fallback = {}) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ValidationError("is required", join(path, key));
  }
  if (!obj[key].is_string()) throw ValidationError("must be a string", join(path, key));
  return obj[key].get<std::string>();
}

double real_at(const json& obj, const char* key, const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ValidationError("must be a number", join(path, key));
  const double v = obj[key].get<double>();
  if (!std::isfinite(v)) throw ValidationError("must be finite", join(path, key));
  return v;
}

long long int_at(const json& obj, const char* key, const std::string& path, long long fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj[key];
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() && std::abs(v.get<double>()) < 1e15) {
    return static_cast<long long>(v.get<double>());
  }
  throw ValidationError("must be an integer", join(path, key));
}

int small_int_at(const json& obj, const char* key, const std::string& path, int fallback) {
  const long long v = int_at(obj, key, path, fallback);
  if (v < -1000000000LL || v > 1000000000LL) throw ValidationError("out of range", join(path, key));
  return static_cast<int>(v);
}

fs::path resolve_existing(const std::string& p, const fs::path& base, const std::string& path) {
  if (p.empty()) throw ValidationError("must be a non-empty path", path);
  fs::path full = fs::path(p).is_absolute() ? fs::path(p) : base / p;
  std::error_code ec;
  if (!fs::is_regular_file(full, ec)) throw ValidationError("file not found: " + full.string(), path);
  return fs::weakly_canonical(full, ec);
}

Strategy parse_strategy(const std::string& s, const std::string& path) {
  if (s == "random") return Strategy::random;
  if (s == "ga") return Strategy::ga;
  if (s == "hoga") return Strategy::hoga;
  if (s == "nsga2") return Strategy::nsga2;
  if (s == "nelder_mead") return Strategy::nelder_mead;
  if (s == "two_stage") return Strategy::two_stage;
  throw ValidationError("must be one of random, ga, hoga, nsga2, nelder_mead, two_stage", path);
}

ObjectiveMode parse_mode(const std::string& s, const std::string& path) {
  if (s == "single") return ObjectiveMode::single;
  if (s == "hierarchical") return ObjectiveMode::hierarchical;
  if (s == "pareto") return ObjectiveMode::pareto;
  throw ValidationError("must be one of single, hierarchical, pareto", path);
}

void apply_override(ParameterSpec& spec, const json& o, const std::string& path) {
  if (!o.is_object()) throw ValidationError("must be an object", path);
  only_keys(o, path, {"lower", "upper", "default_low", "default_high", "fixed"});
  if (o.contains("fixed")) {
    if (o.size() != 1) throw ValidationError("fixed excludes the other fields", path);
    const double v = real_at(o, "fixed", path, 0.0);
    spec.lower = spec.upper = spec.default_low = spec.default_high = v;
    return;
  }
  spec.lower = real_at(o, "lower", path, spec.lower);
  spec.upper = real_at(o, "upper", path, spec.upper);
  const bool range_given = o.contains("default_low") || o.contains("default_high");
  spec.default_low = real_at(o, "default_low", path, range_given ? spec.default_low : std::max(spec.default_low, spec.lower));
  spec.default_high = real_at(o, "default_high", path, range_given ? spec.default_high : std::min(spec.default_high, spec.upper));
  if (!range_given && spec.default_low > spec.default_high) {
    spec.default_low = spec.lower;
    spec.default_high = spec.upper;
  }
  if (!(spec.lower <= spec.default_low && spec.default_low <= spec.default_high && spec.default_high <= spec.upper)) {
    throw ValidationError("need lower <= default_low <= default_high <= upper", path);
  }
}

Dataset load_job_dataset(const DataSection& d) {
  Dataset data;
  if (!d.dataset.empty()) {
    data = load_dataset(d.dataset);
  }
  for (std::size_t i = 0; i < d.structures.size(); ++i) {
    for (auto& s : load_structures(d.structures[i])) {
      const std::string label = s.label;
      if (!data.structures.emplace(label, std::move(s)).second) {
        throw ValidationError("duplicate structure label '" + label + "'", "data.structures[" + std::to_string(i) + "]");
      }
    }
  }
  if (d.targets.is_string()) {
    auto more = load_targets(d.targets.get<std::string>());
    data.targets.insert(data.targets.end(), more.begin(), more.end());
  } else if (d.targets.is_array()) {
    try {
      auto more = parse_targets(d.targets);
      data.targets.insert(data.targets.end(), more.begin(), more.end());
    } catch (const ValidationError& e) {
      if (e.path().empty()) throw ValidationError(e.what(), "data.targets");
      throw ValidationError(std::string(e.what()).substr(e.path().size() + 2), "data." + e.path());
    }
  }
  std::set<std::string> ids;
  for (const auto& t : data.targets) {
    if (!ids.insert(t.id).second) throw ValidationError("duplicate target id '" + t.id + "'", "data.targets");
  }
  if (data.targets.empty()) throw ValidationError("no targets", "data.targets");
  data.validate();
  return data;
}

}  // namespace

std::string_view to_string(ObjectiveMode m) {
  switch (m) {
    case ObjectiveMode::single: return "single";
    case ObjectiveMode::hierarchical: return "hierarchical";
    case ObjectiveMode::pareto: return "pareto";
  }
  return "?";
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::random: return "random";
    case Strategy::ga: return "ga";
    case Strategy::hoga: return "hoga";
    case Strategy::nsga2: return "nsga2";
    case Strategy::nelder_mead: return "nelder_mead";
    case Strategy::two_stage: return "two_stage";
  }
  return "?";
}

JobConfig parse_job_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ValidationError("config document must be an object");
  only_keys(doc, "", {"name", "model", "data", "objective", "learner", "parallel", "evaluators", "seed", "output_dir"});
  JobConfig c;
  c.name = string_at(doc, "name", "", std::string("job"));
  const long long seed = int_at(doc, "seed", "", 1);
  if (seed < 0) throw ValidationError("must be >= 0", "seed");
  c.seed = static_cast<std::uint64_t>(seed);

  // model
  const json& model = object_at(doc, "model", "");
  only_keys(model, "model", {"id", "species", "parameters"});
  c.model.id = string_at(model, "id", "model");
  try {
    find_model(c.model.id);
  } catch (const Error& e) {
    throw ValidationError(e.what(), "model.id");
  }
  if (!model.contains("species") || !model["species"].is_array() || model["species"].empty()) {
    throw ValidationError("must be a non-empty array of strings", "model.species");
  }
  for (const auto& s : model["species"]) {
    if (!s.is_string() || s.get<std::string>().empty()) throw ValidationError("must be non-empty strings", "model.species");
    c.model.species.push_back(s.get<std::string>());
  }
  if (model.contains("parameters")) {
    if (!model["parameters"].is_object()) throw ValidationError("must be an object", "model.parameters");
    c.model.parameters = model["parameters"];
  }

  // data
  const json& data = object_at(doc, "data", "");
  only_keys(data, "data", {"dataset", "structures", "targets", "holdout_fraction", "split_seed"});
  if (data.contains("dataset")) c.data.dataset = resolve_existing(string_at(data, "dataset", "data"), base_dir, "data.dataset").string();
  if (data.contains("structures")) {
    if (!data["structures"].is_array()) throw ValidationError("must be an array of paths", "data.structures");
    for (std::size_t i = 0; i < data["structures"].size(); ++i) {
      const auto& s = data["structures"][i];
      const std::string path = "data.structures[" + std::to_string(i) + "]";
      if (!s.is_string()) throw ValidationError("must be a path", path);
      c.data.structures.push_back(resolve_existing(s.get<std::string>(), base_dir, path).string());
    }
  }
  if (data.contains("targets")) {
    if (data["targets"].is_string()) {
      c.data.targets = resolve_existing(data["targets"].get<std::string>(), base_dir, "data.targets").string();
    } else if (data["targets"].is_array()) {
      c.data.targets = data["targets"];
    } else {
      throw ValidationError("must be a path or an array of targets", "data.targets");
    }
  }
  if (c.data.dataset.empty() && c.data.targets.is_null()) throw ValidationError("needs targets or dataset", "data");
  c.data.holdout_fraction = real_at(data, "holdout_fraction", "data", 0.0);
  if (c.data.holdout_fraction < 0.0 || c.data.holdout_fraction >= 1.0) {
    throw ValidationError("must be in [0, 1)", "data.holdout_fraction");
  }
  const long long split_seed = int_at(data, "split_seed", "data", 0);
  if (split_seed < 0) throw ValidationError("must be >= 0", "data.split_seed");
  c.data.split_seed = static_cast<std::uint64_t>(split_seed);

  // learner
  json learner = doc.value("learner", json::object());
  if (!learner.is_object()) throw ValidationError("must be an object", "learner");
  only_keys(learner, "learner",
            {"strategy", "population", "generations", "tournament_size", "crossover_alpha", "mutation_rate",
             "mutation_sigma_fraction", "elitism", "max_iter", "f_tol", "x_tol", "top_k", "samples", "x0"});
  c.learner.strategy = parse_strategy(string_at(learner, "strategy", "learner", std::string("ga")), "learner.strategy");
  auto& ga = c.learner.ga;
  ga.population = small_int_at(learner, "population", "learner", ga.population);
  ga.generations = small_int_at(learner, "generations", "learner", ga.generations);
  ga.tournament_size = small_int_at(learner, "tournament_size", "learner", ga.tournament_size);
  ga.crossover_alpha = real_at(learner, "crossover_alpha", "learner", ga.crossover_alpha);
  ga.mutation_rate = real_at(learner, "mutation_rate", "learner", ga.mutation_rate);
  if (learner.contains("mutation_rate") && ga.mutation_rate < 0.0) throw ValidationError("must be in [0, 1]", "learner.mutation_rate");
  ga.mutation_sigma_fraction = real_at(learner, "mutation_sigma_fraction", "learner", ga.mutation_sigma_fraction);
  ga.elitism = small_int_at(learner, "elitism", "learner", ga.elitism);
  ga.seed = c.seed;
  auto& nm = c.learner.nelder_mead;
  nm.max_iter = small_int_at(learner, "max_iter", "learner", nm.max_iter);
  nm.f_tol = real_at(learner, "f_tol", "learner", nm.f_tol);
  nm.x_tol = real_at(learner, "x_tol", "learner", nm.x_tol);
  c.learner.top_k = small_int_at(learner, "top_k", "learner", c.learner.top_k);
  c.learner.samples = small_int_at(learner, "samples", "learner", c.learner.samples);
  if (learner.contains("x0")) c.learner.x0 = learner["x0"];
  switch (c.learner.strategy) {
    case Strategy::ga:
    case Strategy::hoga:
    case Strategy::nsga2:
      ga.validate();
      break;
    case Strategy::two_stage:
      ga.validate();
      nm.validate();
      if (c.learner.top_k < 1) throw ValidationError("must be >= 1", "learner.top_k");
      break;
    case Strategy::nelder_mead:
      nm.validate();
      break;
    case Strategy::random:
      if (c.learner.samples < 1) throw ValidationError("must be >= 1", "learner.samples");
      break;
  }

  // objective
  json objective = doc.value("objective", json::object());
  if (!objective.is_object()) throw ValidationError("must be an object", "objective");
  only_keys(objective, "objective", {"mode", "tolerances"});
  if (objective.contains("mode")) {
    c.objective.mode = parse_mode(string_at(objective, "mode", "objective"), "objective.mode");
  } else if (c.learner.strategy == Strategy::hoga) {
    c.objective.mode = ObjectiveMode::hierarchical;
  } else if (c.learner.strategy == Strategy::nsga2) {
    c.objective.mode = ObjectiveMode::pareto;
  }
  if (objective.contains("tolerances")) {
    if (!objective["tolerances"].is_object()) throw ValidationError("must be an object keyed by rank", "objective.tolerances");
    for (const auto& [rank, tol] : objective["tolerances"].items()) {
      const std::string path = "objective.tolerances." + rank;
      int r = 0;
      try {
        std::size_t used = 0;
        r = std::stoi(rank, &used);
        if (used != rank.size()) throw std::invalid_argument("rank");
      } catch (const std::exception&) {
        throw ValidationError("rank keys must be integers", path);
      }
      if (!tol.is_number() || !(tol.get<double>() > 0.0)) throw ValidationError("must be a positive number", path);
      c.objective.tolerances[r] = tol.get<double>();
    }
  }
  if (c.learner.strategy == Strategy::nsga2 && c.objective.mode != ObjectiveMode::pareto) {
    throw ValidationError("nsga2 requires objective mode pareto", "objective.mode");
  }
  if (c.objective.mode == ObjectiveMode::pareto && c.learner.strategy != Strategy::nsga2) {
    throw ValidationError("pareto mode requires the nsga2 strategy", "learner.strategy");
  }
  if (c.learner.strategy == Strategy::hoga && c.objective.mode != ObjectiveMode::hierarchical) {
    throw ValidationError("hoga requires objective mode hierarchical", "objective.mode");
  }

  // parallel
  json parallel = doc.value("parallel", json::object());
  if (!parallel.is_object()) throw ValidationError("must be an object", "parallel");
  only_keys(parallel, "parallel", {"executor"});
  c.executor = string_at(parallel, "executor", "parallel", std::string("serial"));
  validate_executor_spec(c.executor);

  // evaluators
  if (doc.contains("evaluators")) {
    if (!doc["evaluators"].is_array()) throw ValidationError("must be an array", "evaluators");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < doc["evaluators"].size(); ++i) {
      const std::string path = "evaluators[" + std::to_string(i) + "]";
      auto spec = evaluator_from_json(doc["evaluators"][i], path);
      if (!ids.insert(spec.id).second) throw ValidationError("duplicate evaluator id '" + spec.id + "'", path + ".id");
      c.evaluators.push_back(std::move(spec));
    }
  }

  if (doc.contains("output_dir")) {
    const std::string out = string_at(doc, "output_dir", "");
    c.output_dir = (fs::path(out).is_absolute() ? fs::path(out) : base_dir / out).lexically_normal().string();
  }

  // Cross-checks that need the data itself.
  const ParameterSpace space = build_parameter_space(c);
  Dataset dataset;
  try {
    dataset = load_job_dataset(c.data);
  } catch (const ValidationError& e) {
    throw;
  } catch (const Error& e) {
    throw ValidationError(e.what(), "data");
  }
  std::set<std::string> evaluator_ids;
  for (const auto& e : c.evaluators) evaluator_ids.insert(e.id);
  for (std::size_t i = 0; i < dataset.targets.size(); ++i) {
    const auto& kind = dataset.targets[i].kind;
    if (kind.type == PropertyType::external && !evaluator_ids.count(kind.evaluator_id)) {
      throw ValidationError("target '" + dataset.targets[i].id + "' needs evaluator '" + kind.evaluator_id + "'",
                            "evaluators");
    }
    for (const auto* sp : {&kind.species_a, &kind.species_b}) {
      if (!sp->empty() && std::find(space.species.begin(), space.species.end(), *sp) == space.species.end()) {
        throw ValidationError("target '" + dataset.targets[i].id + "' uses species '" + *sp + "' not in the model",
                              "data.targets");
      }
    }
  }
  if (c.data.holdout_fraction > 0.0 && dataset.targets.size() < 2) {
    throw ValidationError("needs at least 2 targets to hold some out", "data.holdout_fraction");
  }
  if (c.objective.mode == ObjectiveMode::pareto) {
    std::set<int> ranks;
    for (const auto& t : dataset.targets) ranks.insert(t.rank);
    if (ranks.size() < 2) throw ValidationError("pareto mode needs targets in at least 2 ranks", "objective.mode");
  }
  if (c.learner.x0) {
    const json& x0 = *c.learner.x0;
    if (!x0.is_object()) throw ValidationError("must be an object of parameter values", "learner.x0");
    for (const auto& [name, v] : x0.items()) {
      if (!space.index_of(name)) throw ValidationError("unknown parameter", "learner.x0." + name);
      if (!v.is_number()) throw ValidationError("must be a number", "learner.x0." + name);
      const auto& spec = space.at(name);
      if (v.get<double>() < spec.lower || v.get<double>() > spec.upper) throw ValidationError("outside bounds", "learner.x0." + name);
    }
  }
  return c;
}

json to_json(const JobConfig& c) {
  json learner{{"strategy", to_string(c.learner.strategy)},
               {"population", c.learner.ga.population},
               {"generations", c.learner.ga.generations},
               {"tournament_size", c.learner.ga.tournament_size},
               {"crossover_alpha", c.learner.ga.crossover_alpha},
               {"mutation_sigma_fraction", c.learner.ga.mutation_sigma_fraction},
               {"elitism", c.learner.ga.elitism},
               {"max_iter", c.learner.nelder_mead.max_iter},
               {"f_tol", c.learner.nelder_mead.f_tol},
               {"x_tol", c.learner.nelder_mead.x_tol},
               {"top_k", c.learner.top_k},
               {"samples", c.learner.samples}};
  if (c.learner.ga.mutation_rate >= 0.0) learner["mutation_rate"] = c.learner.ga.mutation_rate;
  if (c.learner.x0) learner["x0"] = *c.learner.x0;
  json tolerances = json::object();
  for (const auto& [rank, tol] : c.objective.tolerances) tolerances[std::to_string(rank)] = tol;
  json data{{"holdout_fraction", c.data.holdout_fraction}, {"split_seed", c.data.split_seed}};
  if (!c.data.dataset.empty()) data["dataset"] = c.data.dataset;
  if (!c.data.structures.empty()) data["structures"] = c.data.structures;
  if (!c.data.targets.is_null()) data["targets"] = c.data.targets;
  json evaluators = json::array();
  for (const auto& e : c.evaluators) evaluators.push_back(to_json(e));
  json doc{{"name", c.name},
           {"model", {{"id", c.model.id}, {"species", c.model.species}, {"parameters", c.model.parameters}}},
           {"data", data},
           {"objective", {{"mode", to_string(c.objective.mode)}, {"tolerances", tolerances}}},
           {"learner", learner},
           {"parallel", {{"executor", c.executor}}},
           {"evaluators", evaluators},
           {"seed", c.seed}};
  if (!c.output_dir.empty()) doc["output_dir"] = c.output_dir;
  return doc;
}

ParameterSpace build_parameter_space(const JobConfig& c) {
  ParameterSpace space;
  try {
    space = parameter_space(c.model.id, c.model.species);
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), "model.species");
  } catch (const Error& e) {
    throw ValidationError(e.what(), "model");
  }
  for (const auto& [name, o] : c.model.parameters.items()) {
    const std::string path = "model.parameters." + name;
    if (!space.index_of(name)) throw ValidationError("unknown parameter for " + c.model.id, path);
    apply_override(space.at(name), o, path);
  }
  return space;
}

std::map<int, double> default_level_tolerances(std::span<const TargetProperty> targets) {
  std::map<int, double> out;
  for (const auto& t : targets) {
    const double r = t.tolerance / t.scale;
    out[t.rank] += t.weight * r * r;
  }
  for (auto& [rank, tol] : out) {
    if (!(tol > 0.0)) tol = 1e-12;
  }
  return out;
}

PreparedJob prepare_job(const JobConfig& c, const fs::path& home) {
  PreparedJob job;
  auto problem = std::make_shared<FitProblem>();
  problem->space = build_parameter_space(c);
  Dataset all = load_job_dataset(c.data);
  if (c.data.holdout_fraction > 0.0) {
    auto [train, holdout] = split(all, c.data.holdout_fraction, c.data.split_seed);
    problem->data = std::move(train);
    job.holdout = std::move(holdout);
  } else {
    problem->data = std::move(all);
  }
  for (const auto& e : c.evaluators) problem->evaluators[e.id] = e;
  problem->home = home;
  problem->scratch = (c.output_dir.empty() ? home : fs::path(c.output_dir)) / "scratch";

  if (c.objective.mode == ObjectiveMode::hierarchical) {
    auto tolerances = default_level_tolerances(problem->data.targets);
    for (const auto& [rank, tol] : c.objective.tolerances) tolerances[rank] = tol;
    job.comparator = hierarchical_comparator(std::move(tolerances));
  } else {
    job.comparator = single_comparator();
  }
  job.problem = std::move(problem);
  return job;
}

std::unique_ptr<Learner> make_learner(const JobConfig& c, const ParameterSpace& space, BatchEvaluator evaluator,
                                      CandidateComparator comparator) {
  GaConfig ga = c.learner.ga;
  ga.seed = c.seed;
  switch (c.learner.strategy) {
    case Strategy::random:
      return make_random_search(space, std::move(evaluator), c.learner.samples, c.seed);
    case Strategy::ga:
    case Strategy::hoga:
      return make_ga(space, std::move(evaluator), ga, std::move(comparator));
    case Strategy::nsga2:
      return make_nsga2(space, std::move(evaluator), ga);
    case Strategy::nelder_mead: {
      ParameterVector x0{std::vector<double>(space.size())};
      for (std::size_t i = 0; i < space.size(); ++i) {
        const auto& s = space.specs[i];
        x0[i] = 0.5 * (s.default_low + s.default_high);
        if (c.learner.x0 && c.learner.x0->contains(s.name)) x0[i] = (*c.learner.x0)[s.name].get<double>();
      }
      return make_nelder_mead(space, std::move(evaluator), std::move(x0), c.learner.nelder_mead);
    }
    case Strategy::two_stage:
      return make_two_stage(space, std::move(evaluator), ga, std::move(comparator), c.learner.nelder_mead,
                            c.learner.top_k);
  }
  throw Error("unknown strategy");
}

}  // namespace blast
