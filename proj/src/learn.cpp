#include "blast/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "blast/error.hpp"
#include "blast/serialize.hpp"

namespace blast {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string save_rng(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void load_rng(std::mt19937_64& rng, const std::string& text) {
  std::istringstream in(text);
  in >> rng;
  if (!in) throw ValidationError("corrupt random state in checkpoint");
}

std::size_t free_dimensions(const ParameterSpace& space) {
  return static_cast<std::size_t>(
      std::count_if(space.specs.begin(), space.specs.end(), [](const auto& s) { return !s.frozen(); }));
}

Candidate unevaluated_best() {
  Candidate c;
  c.objective = kInf;
  c.feasible = false;
  return c;
}

bool better(const CandidateComparator& cmp, const Candidate& a, const Candidate& b) { return cmp(a, b) < 0; }

void sort_population(std::vector<Candidate>& pop, const CandidateComparator& cmp) {
  std::stable_sort(pop.begin(), pop.end(), [&](const Candidate& a, const Candidate& b) { return better(cmp, a, b); });
}

double mean_finite(const std::vector<Candidate>& pop) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : pop) {
    if (std::isfinite(c.objective)) {
      sum += c.objective;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : kInf;
}

std::vector<Candidate> evaluate_checked(const BatchEvaluator& evaluator, std::span<const ParameterVector> batch) {
  if (batch.empty()) return {};
  auto out = evaluator(batch);
  if (out.size() != batch.size()) {
    throw Error("evaluator returned " + std::to_string(out.size()) + " candidates for " +
                std::to_string(batch.size()) + " inputs");
  }
  return out;
}

HistoryEntry make_entry(int iteration, const Candidate& best, double mean, std::size_t evaluations,
                        std::string_view stage) {
  return {iteration, best.objective, mean, evaluations, best.level_objectives, std::string(stage)};
}

// --- random search ---------------------------------------------------------

class RandomSearch final : public Learner {
 public:
  RandomSearch(const ParameterSpace& space, BatchEvaluator evaluator, int samples, std::uint64_t seed, int batch)
      : space_(space), evaluator_(std::move(evaluator)), samples_(samples), batch_(batch), rng_(seed) {
    if (samples < 1) throw ValidationError("must be >= 1", "learner.samples");
    if (batch < 1) throw ValidationError("must be >= 1", "learner.batch_size");
    result_.best = unevaluated_best();
  }

  bool done() const override { return drawn_ >= samples_; }

  void step() override {
    const int n = std::min(batch_, samples_ - drawn_);
    const auto params = sample_default_range(space_, static_cast<std::size_t>(n), rng_);
    const auto scored = evaluate_checked(evaluator_, params);
    drawn_ += n;
    result_.total_evaluations += scored.size();
    for (const auto& c : scored) {
      if (better(cmp_, c, result_.best) || result_.best.params.size() == 0) result_.best = c;
    }
    result_.history.push_back(make_entry(static_cast<int>(result_.history.size()) + 1, result_.best,
                                         mean_finite(scored), result_.total_evaluations, strategy()));
  }

  const LearnResult& result() const override { return result_; }
  std::string_view strategy() const override { return "random"; }

  json save_state() const override {
    return json{{"strategy", strategy()}, {"drawn", drawn_}, {"rng", save_rng(rng_)}, {"result", result_}};
  }

  void restore_state(const json& state) override {
    drawn_ = state.at("drawn").get<int>();
    load_rng(rng_, state.at("rng").get<std::string>());
    result_ = state.at("result").get<LearnResult>();
  }

 private:
  ParameterSpace space_;
  BatchEvaluator evaluator_;
  int samples_;
  int batch_;
  std::mt19937_64 rng_;
  int drawn_ = 0;
  CandidateComparator cmp_ = single_comparator();
  LearnResult result_;
};

// --- genetic algorithm -----------------------------------------------------

class Genetic final : public Learner {
 public:
  Genetic(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& config, CandidateComparator cmp,
          std::string stage = "ga")
      : space_(space), evaluator_(std::move(evaluator)), config_(config), cmp_(std::move(cmp)), rng_(config.seed),
        stage_(std::move(stage)) {
    config_.validate();
    result_.best = unevaluated_best();
  }

  bool done() const override { return generation_ >= config_.generations; }

  void step() override {
    if (population_.empty()) {
      const auto initial = sample_default_range(space_, static_cast<std::size_t>(config_.population), rng_);
      auto scored = evaluate_checked(evaluator_, initial);
      evaluations_ += scored.size();
      sort_population(scored, cmp_);
      population_ = std::move(scored);
      track_best();
    }
    Offspring next = ga_step(space_, population_, cmp_, config_, rng_);
    auto scored = evaluate_checked(evaluator_, next.children);
    evaluations_ += scored.size();
    std::vector<Candidate> pop = std::move(next.elites);
    for (auto& c : scored) pop.push_back(std::move(c));
    sort_population(pop, cmp_);
    population_ = std::move(pop);
    ++generation_;
    track_best();
    result_.total_evaluations = evaluations_;
    result_.history.push_back(
        make_entry(generation_, population_.front(), mean_finite(population_), evaluations_, stage_));
  }

  const LearnResult& result() const override { return result_; }
  std::string_view strategy() const override { return stage_; }
  const std::vector<Candidate>& population() const { return population_; }

  json save_state() const override {
    return json{{"strategy", stage_},           {"generation", generation_}, {"rng", save_rng(rng_)},
                {"population", population_},    {"evaluations", evaluations_}, {"result", result_}};
  }

  void restore_state(const json& state) override {
    generation_ = state.at("generation").get<int>();
    load_rng(rng_, state.at("rng").get<std::string>());
    population_ = state.at("population").get<std::vector<Candidate>>();
    evaluations_ = state.at("evaluations").get<std::size_t>();
    result_ = state.at("result").get<LearnResult>();
  }

 private:
  void track_best() {
    if (!population_.empty() && (result_.best.params.size() == 0 || better(cmp_, population_.front(), result_.best))) {
      result_.best = population_.front();
    }
    result_.total_evaluations = evaluations_;
  }

  ParameterSpace space_;
  BatchEvaluator evaluator_;
  GaConfig config_;
  CandidateComparator cmp_;
  std::mt19937_64 rng_;
  std::string stage_;
  int generation_ = 0;
  std::size_t evaluations_ = 0;
  std::vector<Candidate> population_;
  LearnResult result_;
};

// --- NSGA-II -----------------------------------------------------------------

class Nsga2 final : public Learner {
 public:
  Nsga2(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& config)
      : space_(space), evaluator_(std::move(evaluator)), config_(config), rng_(config.seed) {
    config_.validate();
    result_.best = unevaluated_best();
  }

  bool done() const override { return generation_ >= config_.generations; }

  void step() override {
    if (population_.empty()) {
      const auto initial = sample_default_range(space_, static_cast<std::size_t>(config_.population), rng_);
      population_ = evaluate_checked(evaluator_, initial);
      evaluations_ += population_.size();
      check_components(population_);
    }
    const auto ranked = rank_population(population_);

    // Crowded binary tournament: lower front wins, then larger crowding distance.
    std::uniform_int_distribution<std::size_t> pick(0, population_.size() - 1);
    auto select = [&]() {
      std::size_t best = pick(rng_);
      for (int k = 1; k < config_.tournament_size; ++k) {
        const std::size_t other = pick(rng_);
        if (ranked.front_of[other] < ranked.front_of[best] ||
            (ranked.front_of[other] == ranked.front_of[best] && ranked.crowding[other] > ranked.crowding[best])) {
          best = other;
        }
      }
      return best;
    };
    std::vector<ParameterVector> children;
    while (children.size() < population_.size()) {
      const auto& pa = population_[select()].params;
      const auto& pb = population_[select()].params;
      auto [ca, cb] = blend(pa, pb);
      children.push_back(mutate(std::move(ca)));
      if (children.size() < population_.size()) children.push_back(mutate(std::move(cb)));
    }
    auto offspring = evaluate_checked(evaluator_, children);
    evaluations_ += offspring.size();

    std::vector<Candidate> merged = population_;
    for (auto& c : offspring) merged.push_back(std::move(c));
    population_ = survivors(std::move(merged));
    ++generation_;
    update_result();
  }

  const LearnResult& result() const override { return result_; }
  std::string_view strategy() const override { return "nsga2"; }

  json save_state() const override {
    return json{{"strategy", "nsga2"},       {"generation", generation_}, {"rng", save_rng(rng_)},
                {"population", population_}, {"evaluations", evaluations_}, {"result", result_}};
  }

  void restore_state(const json& state) override {
    generation_ = state.at("generation").get<int>();
    load_rng(rng_, state.at("rng").get<std::string>());
    population_ = state.at("population").get<std::vector<Candidate>>();
    evaluations_ = state.at("evaluations").get<std::size_t>();
    result_ = state.at("result").get<LearnResult>();
  }

 private:
  struct Ranked {
    std::vector<std::size_t> front_of;
    std::vector<double> crowding;
  };

  static void check_components(const std::vector<Candidate>& pop) {
    for (const auto& c : pop) {
      if (c.feasible && c.level_objectives.size() < 2) {
        throw ValidationError("pareto optimization needs at least 2 objective components (use the ga strategy)");
      }
    }
  }

  static Ranked rank_population(const std::vector<Candidate>& pop) {
    std::vector<std::vector<double>> pts;
    for (const auto& c : pop) pts.push_back(objective_vector(c));
    Ranked r{std::vector<std::size_t>(pop.size()), std::vector<double>(pop.size(), 0.0)};
    const auto fronts = non_dominated_sort(pts);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
      const auto dist = crowding_distance(pts, fronts[f]);
      for (std::size_t k = 0; k < fronts[f].size(); ++k) {
        r.front_of[fronts[f][k]] = f;
        r.crowding[fronts[f][k]] = dist[k];
      }
    }
    return r;
  }

  std::vector<Candidate> survivors(std::vector<Candidate> merged) const {
    std::vector<std::vector<double>> pts;
    for (const auto& c : merged) pts.push_back(objective_vector(c));
    const auto fronts = non_dominated_sort(pts);
    std::vector<Candidate> next;
    const std::size_t target = static_cast<std::size_t>(config_.population);
    for (const auto& front : fronts) {
      if (next.size() + front.size() <= target) {
        for (auto i : front) next.push_back(merged[i]);
        continue;
      }
      const auto dist = crowding_distance(pts, front);
      std::vector<std::size_t> order(front.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
      for (std::size_t k = 0; next.size() < target; ++k) next.push_back(merged[front[order[k]]]);
      break;
    }
    return next;
  }

  std::pair<ParameterVector, ParameterVector> blend(const ParameterVector& a, const ParameterVector& b) {
    ParameterVector ca = a;
    ParameterVector cb = b;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double lo = std::min(a[i], b[i]);
      const double hi = std::max(a[i], b[i]);
      const double d = hi - lo;
      if (d == 0.0) continue;
      std::uniform_real_distribution<double> u(lo - config_.crossover_alpha * d, hi + config_.crossover_alpha * d);
      ca[i] = u(rng_);
      cb[i] = u(rng_);
    }
    return {std::move(ca), std::move(cb)};
  }

  ParameterVector mutate(ParameterVector v) {
    const double rate =
        config_.mutation_rate >= 0.0 ? config_.mutation_rate : 1.0 / std::max<std::size_t>(1, free_dimensions(space_));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (coin(rng_) < rate && !space_.specs[i].frozen()) {
        std::normal_distribution<double> g(0.0, config_.mutation_sigma_fraction * space_.specs[i].width());
        v[i] += g(rng_);
      }
    }
    return clip_to_bounds(space_, std::move(v));
  }

  void update_result() {
    std::vector<std::vector<double>> pts;
    for (const auto& c : population_) pts.push_back(objective_vector(c));
    const auto fronts = non_dominated_sort(pts);
    result_.front.clear();
    std::set<std::vector<double>> seen;
    for (auto i : fronts.front()) {
      if (seen.insert(population_[i].params.values).second) result_.front.push_back(population_[i]);
    }
    std::stable_sort(result_.front.begin(), result_.front.end(),
                     [](const Candidate& a, const Candidate& b) { return objective_vector(a) < objective_vector(b); });
    const auto cmp = single_comparator();
    Candidate best = result_.front.front();
    for (const auto& c : result_.front) {
      if (better(cmp, c, best)) best = c;
    }
    result_.best = best;
    result_.total_evaluations = evaluations_;
    result_.history.push_back(make_entry(generation_, best, mean_finite(population_), evaluations_, "nsga2"));
  }

  ParameterSpace space_;
  BatchEvaluator evaluator_;
  GaConfig config_;
  std::mt19937_64 rng_;
  int generation_ = 0;
  std::size_t evaluations_ = 0;
  std::vector<Candidate> population_;
  LearnResult result_;
};

// --- Nelder-Mead ---------------------------------------------------------------

class NelderMead final : public Learner {
 public:
  NelderMead(const ParameterSpace& space, BatchEvaluator evaluator, ParameterVector x0,
             const NelderMeadConfig& config, std::string stage = "nelder_mead", int iteration_offset = 0,
             std::size_t evaluation_offset = 0)
      : space_(space), evaluator_(std::move(evaluator)), x0_(std::move(x0)), config_(config),
        stage_(std::move(stage)), iteration_offset_(iteration_offset), evaluation_offset_(evaluation_offset) {
    config_.validate();
    if (!validate_params(space_, x0_).empty()) throw ValidationError("starting point outside bounds", "learner.x0");
    result_.best = unevaluated_best();
  }

  bool done() const override { return converged_ || iteration_ >= config_.max_iter; }

  void step() override {
    if (simplex_.empty()) initialize();
    if (!converged_) iterate();
    ++iteration_;
    sort_simplex();
    converged_ = converged_ || has_converged();
    result_.best = simplex_.front();
    result_.total_evaluations = evaluations_;
    result_.history.push_back(make_entry(iteration_offset_ + iteration_, simplex_.front(), mean_finite(simplex_),
                                         evaluation_offset_ + evaluations_, stage_));
  }

  const LearnResult& result() const override { return result_; }
  std::string_view strategy() const override { return stage_; }

  json save_state() const override {
    return json{{"strategy", stage_},
                {"iteration", iteration_},
                {"converged", converged_},
                {"simplex", simplex_},
                {"evaluations", evaluations_},
                {"iteration_offset", iteration_offset_},
                {"evaluation_offset", evaluation_offset_},
                {"result", result_}};
  }

  void restore_state(const json& state) override {
    iteration_offset_ = state.value("iteration_offset", iteration_offset_);
    evaluation_offset_ = state.value("evaluation_offset", evaluation_offset_);
    iteration_ = state.at("iteration").get<int>();
    converged_ = state.at("converged").get<bool>();
    simplex_ = state.at("simplex").get<std::vector<Candidate>>();
    evaluations_ = state.at("evaluations").get<std::size_t>();
    result_ = state.at("result").get<LearnResult>();
  }

 private:
  static bool lt(const Candidate& a, const Candidate& b) {
    // NaN and +inf sort last.
    const double fa = std::isnan(a.objective) ? kInf : a.objective;
    const double fb = std::isnan(b.objective) ? kInf : b.objective;
    return fa < fb;
  }

  Candidate eval_one(ParameterVector v) {
    const std::vector<ParameterVector> batch{clip_to_bounds(space_, std::move(v))};
    auto out = evaluate_checked(evaluator_, batch);
    ++evaluations_;
    return std::move(out.front());
  }

  void initialize() {
    std::vector<ParameterVector> vertices{clip_to_bounds(space_, x0_)};
    for (std::size_t i = 0; i < space_.size(); ++i) {
      const auto& spec = space_.specs[i];
      if (spec.frozen()) continue;
      const double h = 0.05 * spec.width();
      ParameterVector v = vertices.front();
      v[i] += (v[i] + h <= spec.upper) ? h : -h;
      vertices.push_back(clip_to_bounds(space_, std::move(v)));
    }
    simplex_ = evaluate_checked(evaluator_, vertices);
    evaluations_ += simplex_.size();
    sort_simplex();
    if (simplex_.size() == 1) converged_ = true;
  }

  void sort_simplex() { std::stable_sort(simplex_.begin(), simplex_.end(), lt); }

  bool has_converged() const {
    const double spread = simplex_.back().objective - simplex_.front().objective;
    if (!(spread <= config_.f_tol)) return false;
    double xs = 0.0;
    for (const auto& v : simplex_) {
      for (std::size_t i = 0; i < v.params.size(); ++i) xs = std::max(xs, std::abs(v.params[i] - simplex_.front().params[i]));
    }
    return xs <= config_.x_tol;
  }

  ParameterVector affine(const ParameterVector& c, const ParameterVector& x, double t) const {
    // c + t (x - c)
    ParameterVector out = c;
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i] + t * (x[i] - c[i]);
    return out;
  }

  void iterate() {
    const std::size_t n = simplex_.size() - 1;
    ParameterVector centroid{std::vector<double>(space_.size(), 0.0)};
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < space_.size(); ++i) centroid[i] += simplex_[k].params[i] / static_cast<double>(n);
    }
    const Candidate& worst = simplex_[n];
    Candidate reflected = eval_one(affine(centroid, worst.params, -1.0));
    if (lt(reflected, simplex_.front())) {
      Candidate expanded = eval_one(affine(centroid, worst.params, -2.0));
      simplex_[n] = lt(expanded, reflected) ? std::move(expanded) : std::move(reflected);
      return;
    }
    if (lt(reflected, simplex_[n - 1])) {
      simplex_[n] = std::move(reflected);
      return;
    }
    if (lt(reflected, worst)) {
      Candidate outside = eval_one(affine(centroid, reflected.params, 0.5));
      if (!lt(reflected, outside)) {
        simplex_[n] = std::move(outside);
        return;
      }
    } else {
      Candidate inside = eval_one(affine(centroid, worst.params, 0.5));
      if (lt(inside, worst)) {
        simplex_[n] = std::move(inside);
        return;
      }
    }
    shrink();
  }

  void shrink() {
    std::vector<ParameterVector> moved;
    for (std::size_t k = 1; k < simplex_.size(); ++k) {
      moved.push_back(clip_to_bounds(space_, affine(simplex_.front().params, simplex_[k].params, 0.5)));
    }
    auto scored = evaluate_checked(evaluator_, moved);
    evaluations_ += scored.size();
    for (std::size_t k = 1; k < simplex_.size(); ++k) simplex_[k] = std::move(scored[k - 1]);
  }

  ParameterSpace space_;
  BatchEvaluator evaluator_;
  ParameterVector x0_;
  NelderMeadConfig config_;
  std::string stage_;
  int iteration_offset_;
  std::size_t evaluation_offset_;
  int iteration_ = 0;
  bool converged_ = false;
  std::size_t evaluations_ = 0;
  std::vector<Candidate> simplex_;
  LearnResult result_;
};

// --- two-stage -------------------------------------------------------------------

class TwoStage final : public Learner {
 public:
  TwoStage(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& global, CandidateComparator cmp,
           const NelderMeadConfig& local, int top_k)
      : space_(space), evaluator_(std::move(evaluator)), local_(local), cmp_(cmp), top_k_(top_k),
        global_(space, evaluator_, global, cmp, "global") {
    if (top_k < 1) throw ValidationError("must be >= 1", "learner.top_k");
    local_.validate();
    result_.best = unevaluated_best();
  }

  bool done() const override { return global_.done() && refined_.size() == survivors_.size() && !local_run_; }

  void step() override {
    if (!global_.done()) {
      global_.step();
      result_.history = global_.result().history;
      result_.total_evaluations = global_.result().total_evaluations;
      result_.best = global_.result().best;
      if (global_.done()) pick_survivors();
      return;
    }
    if (!local_run_) start_local(refined_.size());
    local_run_->step();
    result_.history.push_back(local_run_->result().history.back());
    result_.total_evaluations = global_.result().total_evaluations + local_evaluations_ +
                                local_run_->result().total_evaluations;
    if (local_run_->done()) {
      local_evaluations_ += local_run_->result().total_evaluations;
      refined_.push_back(local_run_->result().best);
      local_run_.reset();
      Candidate best = refined_.front();
      for (const auto& c : refined_) {
        if (better(cmp_, c, best)) best = c;
      }
      result_.best = best;
    }
  }

  const LearnResult& result() const override { return result_; }
  std::string_view strategy() const override { return "two_stage"; }

  json save_state() const override {
    json s{{"strategy", "two_stage"},
           {"global", global_.save_state()},
           {"survivors", survivors_},
           {"refined", refined_},
           {"local_evaluations", local_evaluations_},
           {"result", result_}};
    if (local_run_) s["local"] = local_run_->save_state();
    return s;
  }

  void restore_state(const json& state) override {
    global_.restore_state(state.at("global"));
    survivors_ = state.at("survivors").get<std::vector<Candidate>>();
    refined_ = state.at("refined").get<std::vector<Candidate>>();
    local_evaluations_ = state.at("local_evaluations").get<std::size_t>();
    result_ = state.at("result").get<LearnResult>();
    local_run_.reset();
    if (state.contains("local")) {
      start_local(refined_.size());
      local_run_->restore_state(state.at("local"));
    }
  }

 private:
  void pick_survivors() {
    std::vector<Candidate> pool{global_.result().best};
    for (const auto& c : global_.population()) pool.push_back(c);
    std::set<std::vector<double>> seen;
    survivors_.clear();
    for (const auto& c : pool) {
      if (static_cast<int>(survivors_.size()) >= top_k_) break;
      if (c.params.size() == 0 || !seen.insert(c.params.values).second) continue;
      survivors_.push_back(c);
    }
  }

  void start_local(std::size_t index) {
    const int offset = result_.history.empty() ? 0 : result_.history.back().iteration;
    local_run_ = std::make_unique<NelderMead>(space_, evaluator_, survivors_.at(index).params, local_, "local", offset,
                                              global_.result().total_evaluations + local_evaluations_);
  }

  ParameterSpace space_;
  BatchEvaluator evaluator_;
  NelderMeadConfig local_;
  CandidateComparator cmp_;
  int top_k_;
  Genetic global_;
  std::vector<Candidate> survivors_;
  std::vector<Candidate> refined_;
  std::unique_ptr<NelderMead> local_run_;
  std::size_t local_evaluations_ = 0;
  LearnResult result_;
};

}  // namespace

void GaConfig::validate() const {
  if (population < 4 || population % 2 != 0) throw ValidationError("must be an even integer >= 4", "learner.population");
  if (generations < 1) throw ValidationError("must be >= 1", "learner.generations");
  if (tournament_size < 2) throw ValidationError("must be >= 2", "learner.tournament_size");
  if (!(crossover_alpha >= 0.0)) throw ValidationError("must be >= 0", "learner.crossover_alpha");
  if (mutation_rate > 1.0) throw ValidationError("must be in [0, 1]", "learner.mutation_rate");
  if (!(mutation_sigma_fraction > 0.0)) throw ValidationError("must be > 0", "learner.mutation_sigma_fraction");
  if (elitism < 0 || elitism >= population) throw ValidationError("must be in [0, population)", "learner.elitism");
}

void NelderMeadConfig::validate() const {
  if (max_iter < 1) throw ValidationError("must be >= 1", "learner.max_iter");
  if (!(f_tol >= 0.0)) throw ValidationError("must be >= 0", "learner.f_tol");
  if (!(x_tol >= 0.0)) throw ValidationError("must be >= 0", "learner.x_tol");
}

std::vector<ParameterVector> sample_default_range(const ParameterSpace& space, std::size_t n, std::mt19937_64& rng) {
  std::vector<ParameterVector> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    ParameterVector v{std::vector<double>(space.size())};
    for (std::size_t i = 0; i < space.size(); ++i) {
      const auto& s = space.specs[i];
      if (s.default_low == s.default_high) {
        v[i] = s.default_low;
      } else {
        std::uniform_real_distribution<double> u(s.default_low, s.default_high);
        v[i] = u(rng);
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

Offspring ga_step(const ParameterSpace& space, std::span<const Candidate> population,
                  const CandidateComparator& comparator, const GaConfig& config, std::mt19937_64& rng) {
  if (population.size() != static_cast<std::size_t>(config.population)) {
    throw ValidationError("population size " + std::to_string(population.size()) + " != configured " +
                          std::to_string(config.population));
  }
  std::vector<Candidate> sorted(population.begin(), population.end());
  sort_population(sorted, comparator);

  Offspring out;
  out.elites.assign(sorted.begin(), sorted.begin() + config.elitism);

  std::uniform_int_distribution<std::size_t> pick(0, sorted.size() - 1);
  auto tournament = [&]() -> const Candidate& {
    std::size_t best = pick(rng);
    for (int k = 1; k < config.tournament_size; ++k) {
      const std::size_t other = pick(rng);
      if (better(comparator, sorted[other], sorted[best])) best = other;
    }
    return sorted[best];
  };

  const double rate =
      config.mutation_rate >= 0.0 ? config.mutation_rate : 1.0 / std::max<std::size_t>(1, free_dimensions(space));
  auto mutate = [&](ParameterVector& v) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (coin(rng) < rate && !space.specs[i].frozen()) {
        std::normal_distribution<double> g(0.0, config.mutation_sigma_fraction * space.specs[i].width());
        v[i] += g(rng);
      }
    }
    v = clip_to_bounds(space, std::move(v));
  };

  const std::size_t needed = static_cast<std::size_t>(config.population - config.elitism);
  while (out.children.size() < needed) {
    const ParameterVector& a = tournament().params;
    const ParameterVector& b = tournament().params;
    ParameterVector ca = a;
    ParameterVector cb = b;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double lo = std::min(a[i], b[i]);
      const double hi = std::max(a[i], b[i]);
      const double d = hi - lo;
      if (d == 0.0) continue;
      std::uniform_real_distribution<double> u(lo - config.crossover_alpha * d, hi + config.crossover_alpha * d);
      ca[i] = u(rng);
      cb[i] = u(rng);
    }
    mutate(ca);
    mutate(cb);
    out.children.push_back(std::move(ca));
    if (out.children.size() < needed) out.children.push_back(std::move(cb));
  }
  return out;
}

std::vector<std::vector<std::size_t>> non_dominated_sort(const std::vector<std::vector<double>>& points) {
  const std::size_t n = points.size();
  std::vector<std::vector<std::size_t>> dominated_by_me(n);
  std::vector<std::size_t> dominators(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(std::span<const double>(points[p]), std::span<const double>(points[q]))) {
        dominated_by_me[p].push_back(q);
      } else if (dominates(std::span<const double>(points[q]), std::span<const double>(points[p]))) {
        ++dominators[p];
      }
    }
    if (dominators[p] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    fronts.push_back(current);
    std::vector<std::size_t> next;
    for (auto p : current) {
      for (auto q : dominated_by_me[p]) {
        if (--dominators[q] == 0) next.push_back(q);
      }
    }
    std::sort(next.begin(), next.end());
    current = std::move(next);
  }
  return fronts;
}

std::vector<double> crowding_distance(const std::vector<std::vector<double>>& points,
                                      const std::vector<std::size_t>& front) {
  const std::size_t m = front.size();
  std::vector<double> dist(m, 0.0);
  if (m == 0) return dist;
  if (m <= 2) return std::vector<double>(m, kInf);
  const std::size_t dims = points[front[0]].size();
  std::vector<std::size_t> order(m);
  for (std::size_t d = 0; d < dims; ++d) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return points[front[a]][d] < points[front[b]][d]; });
    const double lo = points[front[order.front()]][d];
    const double hi = points[front[order.back()]][d];
    dist[order.front()] = kInf;
    dist[order.back()] = kInf;
    const double span = hi - lo;
    if (!(span > 0.0) || !std::isfinite(span)) continue;
    for (std::size_t k = 1; k + 1 < m; ++k) {
      dist[order[k]] += (points[front[order[k + 1]]][d] - points[front[order[k - 1]]][d]) / span;
    }
  }
  return dist;
}

std::vector<double> objective_vector(const Candidate& c) {
  std::vector<double> v;
  v.reserve(c.level_objectives.size());
  for (const auto& [rank, value] : c.level_objectives) {
    v.push_back(c.feasible && !std::isnan(value) ? value : kInf);
  }
  return v;
}

std::unique_ptr<Learner> make_random_search(const ParameterSpace& space, BatchEvaluator evaluator, int samples,
                                            std::uint64_t seed, int batch_size) {
  return std::make_unique<RandomSearch>(space, std::move(evaluator), samples, seed, batch_size);
}

std::unique_ptr<Learner> make_ga(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& config,
                                 CandidateComparator comparator) {
  return std::make_unique<Genetic>(space, std::move(evaluator), config, std::move(comparator));
}

std::unique_ptr<Learner> make_nsga2(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& config) {
  return std::make_unique<Nsga2>(space, std::move(evaluator), config);
}

std::unique_ptr<Learner> make_nelder_mead(const ParameterSpace& space, BatchEvaluator evaluator, ParameterVector x0,
                                          const NelderMeadConfig& config) {
  return std::make_unique<NelderMead>(space, std::move(evaluator), std::move(x0), config);
}

std::unique_ptr<Learner> make_two_stage(const ParameterSpace& space, BatchEvaluator evaluator,
                                        const GaConfig& global, CandidateComparator comparator,
                                        const NelderMeadConfig& local, int top_k) {
  return std::make_unique<TwoStage>(space, std::move(evaluator), global, std::move(comparator), local, top_k);
}

LearnResult run_to_completion(Learner& learner) {
  while (!learner.done()) learner.step();
  return learner.result();
}

LearnResult random_search(const ParameterSpace& space, BatchEvaluator evaluator, int samples, std::uint64_t seed) {
  auto l = make_random_search(space, std::move(evaluator), samples, seed);
  return run_to_completion(*l);
}

LearnResult run_ga(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& config,
                   CandidateComparator comparator) {
  auto l = make_ga(space, std::move(evaluator), config, std::move(comparator));
  return run_to_completion(*l);
}

std::vector<Candidate> nsga2(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& config) {
  auto l = make_nsga2(space, std::move(evaluator), config);
  return run_to_completion(*l).front;
}

LearnResult nelder_mead(const ParameterSpace& space, BatchEvaluator evaluator, ParameterVector x0,
                        const NelderMeadConfig& config) {
  auto l = make_nelder_mead(space, std::move(evaluator), std::move(x0), config);
  return run_to_completion(*l);
}

LearnResult two_stage(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& global,
                      CandidateComparator comparator, const NelderMeadConfig& local, int top_k) {
  auto l = make_two_stage(space, std::move(evaluator), global, std::move(comparator), local, top_k);
  return run_to_completion(*l);
}

}  // namespace blast
