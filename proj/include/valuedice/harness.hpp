// Copyright 2026 The valuedice-tabular Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment configuration, seeded runs, baseline comparison and CSV/JSON
// export. Everything the CLI does is reachable from here.

#ifndef VALUEDICE_HARNESS_HPP_
#define VALUEDICE_HARNESS_HPP_

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"
#include "valuedice/baselines.hpp"
#include "valuedice/divergence.hpp"
#include "valuedice/environments.hpp"
#include "valuedice/errors.hpp"
#include "valuedice/format.hpp"
#include "valuedice/mdp.hpp"
#include "valuedice/objective.hpp"
#include "valuedice/trainer.hpp"

namespace valuedice {

enum class Experiment { kRingSparse, kRingStochastic, kRandomSweep };
enum class Algorithm { kValueDiceExact, kValueDiceEmpirical, kBc, kGail };

inline constexpr std::array<std::pair<Experiment, std::string_view>, 3> kExperimentNames{{
    {Experiment::kRingSparse, "ring-sparse"},
    {Experiment::kRingStochastic, "ring-stochastic"},
    {Experiment::kRandomSweep, "random-sweep"},
}};

inline constexpr std::array<std::pair<Algorithm, std::string_view>, 4> kAlgorithmNames{{
    {Algorithm::kValueDiceExact, "valuedice-exact"},
    {Algorithm::kValueDiceEmpirical, "valuedice-empirical"},
    {Algorithm::kBc, "bc"},
    {Algorithm::kGail, "gail"},
}};

inline std::string_view to_string(Experiment e) {
  for (const auto& [value, name] : kExperimentNames)
    if (value == e) return name;
  return "?";
}

inline std::string_view to_string(Algorithm a) {
  for (const auto& [value, name] : kAlgorithmNames)
    if (value == a) return name;
  return "?";
}

inline std::optional<Experiment> parse_experiment(std::string_view name) {
  for (const auto& [value, known] : kExperimentNames)
    if (known == name) return value;
  return std::nullopt;
}

inline std::optional<Algorithm> parse_algorithm(std::string_view name) {
  for (const auto& [value, known] : kAlgorithmNames)
    if (known == name) return value;
  return std::nullopt;
}

/// Environment knobs. Unset optionals take the experiment's default:
/// the ring uses 8 states and gamma 0.95, random-sweep 6 states and 0.9.
struct EnvironmentConfig {
  std::optional<double> gamma;
  std::optional<std::size_t> n_states;
  std::optional<std::vector<double>> initial_dist;
  double p_forward = 0.75;
  std::size_t n_trajectories = 10;
  std::size_t horizon = 50;
  // random-sweep only.
  std::size_t n_actions = 3;
  std::size_t branching = 2;
  double expert_scale = 2.0;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::kRingStochastic;
  Algorithm algorithm = Algorithm::kValueDiceExact;
  MixConfig mix;
  TrainingConfig training;
  EnvironmentConfig environment;
  double bc_regularizer = kDefaultBcRegularizer;
  std::vector<std::uint64_t> seeds{0};
  std::string output = "metrics.csv";

  std::size_t n_states() const {
    if (environment.n_states) return *environment.n_states;
    return experiment == Experiment::kRandomSweep ? 6 : kRingDefaultStates;
  }
  double gamma() const {
    if (environment.gamma) return *environment.gamma;
    return experiment == Experiment::kRandomSweep ? 0.9 : kRingDefaultGamma;
  }
};

// ---------------------------------------------------------------------------
// JSON config

namespace detail {

using nlohmann::json;

inline void expect_object(const json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field, "expected an object");
}

inline double config_real(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(field, "must be finite");
  return x;
}

inline double config_positive(const json& v, const std::string& field) {
  const double x = config_real(v, field);
  if (!(x > 0.0)) throw ConfigError(field, "must be positive");
  return x;
}

inline std::uint64_t config_unsigned(const json& v, const std::string& field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    // Programmatically built JSON stores nonnegative ints as signed.
    if (v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(field, "must be nonnegative");
  }
  throw ConfigError(field, "expected an integer");
}

inline std::size_t config_count(const json& v, const std::string& field) {
  const auto n = config_unsigned(v, field);
  if (n == 0) throw ConfigError(field, "must be positive");
  return static_cast<std::size_t>(n);
}

inline bool config_bool(const json& v, const std::string& field) {
  if (!v.is_boolean()) throw ConfigError(field, "expected true or false");
  return v.get<bool>();
}

inline std::string config_string(const json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field, "expected a string");
  return v.get<std::string>();
}

inline void parse_training(const json& j, TrainingConfig& t) {
  expect_object(j, "training");
  for (const auto& [key, v] : j.items()) {
    const std::string field = "training." + key;
    if (key == "nu_learning_rate") t.nu_learning_rate = config_positive(v, field);
    else if (key == "policy_learning_rate") t.policy_learning_rate = config_positive(v, field);
    else if (key == "batch_size") t.batch_size = config_count(v, field);
    else if (key == "n_updates") t.n_updates = config_count(v, field);
    else if (key == "nu_steps_per_policy_step") t.nu_steps_per_policy_step = config_count(v, field);
    else if (key == "eval_every") t.eval_every = config_count(v, field);
    else if (key == "logits_l2") {
      t.logits_l2 = config_real(v, field);
      if (t.logits_l2 < 0.0) throw ConfigError(field, "must be nonnegative");
    } else if (key == "full_policy_gradient") t.full_policy_gradient = config_bool(v, field);
    else if (key == "episode_horizon") t.episode_horizon = config_count(v, field);
    else if (key == "replay_capacity") t.replay_capacity = config_count(v, field);
    else if (key == "virtual_initial_states") t.virtual_initial_states = config_bool(v, field);
    else throw ConfigError(field, "unknown field");
  }
}

inline void parse_environment(const json& j, EnvironmentConfig& e) {
  expect_object(j, "environment");
  for (const auto& [key, v] : j.items()) {
    const std::string field = "environment." + key;
    if (key == "gamma") {
      const double g = config_real(v, field);
      if (g < 0.0 || g >= 1.0) throw ConfigError(field, "must lie in [0, 1)");
      e.gamma = g;
    } else if (key == "n_states") {
      e.n_states = config_count(v, field);
    } else if (key == "initial_dist") {
      if (!v.is_array()) throw ConfigError(field, "expected an array of probabilities");
      std::vector<double> p;
      for (const auto& x : v) p.push_back(config_real(x, field));
      e.initial_dist = std::move(p);
    } else if (key == "p_forward") {
      e.p_forward = config_real(v, field);
      if (!(e.p_forward > 0.0 && e.p_forward < 1.0)) throw ConfigError(field, "must lie in (0, 1)");
    } else if (key == "n_trajectories") e.n_trajectories = config_count(v, field);
    else if (key == "horizon") e.horizon = config_count(v, field);
    else if (key == "n_actions") e.n_actions = config_count(v, field);
    else if (key == "branching") e.branching = config_count(v, field);
    else if (key == "expert_scale") e.expert_scale = config_positive(v, field);
    else throw ConfigError(field, "unknown field");
  }
}

inline void check_environment(const ExperimentConfig& c) {
  const auto& e = c.environment;
  const std::size_t n = c.n_states();
  if (c.experiment != Experiment::kRandomSweep && n < 3)
    throw ConfigError("environment.n_states", "the ring needs at least 3 states");
  if (c.experiment == Experiment::kRandomSweep && e.branching > n)
    throw ConfigError("environment.branching", "must not exceed n_states");
  if (e.initial_dist) {
    if (c.experiment == Experiment::kRandomSweep)
      throw ConfigError("environment.initial_dist", "only the ring experiments take an initial_dist");
    const auto& p = *e.initial_dist;
    if (p.size() != n) throw ConfigError("environment.initial_dist", "must have n_states entries");
    double total = 0.0;
    for (double x : p) {
      if (x < 0.0) throw ConfigError("environment.initial_dist", "entries must be nonnegative");
      total += x;
    }
    if (std::abs(total - 1.0) > kStochasticTolerance)
      throw ConfigError("environment.initial_dist", "must sum to 1");
    if (c.experiment == Experiment::kRingSparse)
      for (std::size_t s = 3; s < n; ++s)
        if (p[s] != 0.0)
          throw ConfigError("environment.initial_dist",
                            "ring-sparse demonstrations must start within {0, 1, 2}");
  }
}

}  // namespace detail

/// Builds a config from JSON. Unknown or invalid fields throw ConfigError
/// naming the dotted field path.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::config_string;
  detail::expect_object(j, "config");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "experiment") {
      const auto name = config_string(v, key);
      const auto e = parse_experiment(name);
      if (!e) throw ConfigError(key, "unknown experiment '" + name + "'");
      c.experiment = *e;
    } else if (key == "algorithm") {
      const auto name = config_string(v, key);
      const auto a = parse_algorithm(name);
      if (!a) throw ConfigError(key, "unknown algorithm '" + name + "'");
      c.algorithm = *a;
    } else if (key == "mix") {
      detail::expect_object(v, key);
      for (const auto& [k, x] : v.items()) {
        if (k != "alpha") throw ConfigError("mix." + k, "unknown field");
        c.mix.alpha = detail::config_real(x, "mix.alpha");
        if (c.mix.alpha < 0.0 || c.mix.alpha >= 1.0)
          throw ConfigError("mix.alpha", "must lie in [0, 1)");
      }
    } else if (key == "training") {
      detail::parse_training(v, c.training);
    } else if (key == "environment") {
      detail::parse_environment(v, c.environment);
    } else if (key == "bc") {
      detail::expect_object(v, key);
      for (const auto& [k, x] : v.items()) {
        if (k != "regularizer") throw ConfigError("bc." + k, "unknown field");
        c.bc_regularizer = detail::config_real(x, "bc.regularizer");
        if (c.bc_regularizer < 0.0) throw ConfigError("bc.regularizer", "must be nonnegative");
      }
    } else if (key == "seeds") {
      if (!v.is_array()) throw ConfigError(key, "expected an array of integers");
      c.seeds.clear();
      for (const auto& s : v) c.seeds.push_back(detail::config_unsigned(s, key));
      if (c.seeds.empty()) throw ConfigError(key, "must not be empty");
    } else if (key == "output") {
      c.output = config_string(v, key);
      if (c.output.empty()) throw ConfigError(key, "must not be empty");
    } else {
      throw ConfigError(key, "unknown field");
    }
  }
  detail::check_environment(c);
  return c;
}

inline nlohmann::json read_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", "cannot parse " + path + ": " + e.what());
  }
}

/// Applies `--a.b-c value` as j["a"]["b_c"] = value. The value is read as
/// JSON when it parses (numbers, booleans, arrays) and as a string otherwise.
inline void apply_override(nlohmann::json& j, std::string_view flag, std::string_view value) {
  while (!flag.empty() && flag.front() == '-') flag.remove_prefix(1);
  if (flag.empty()) throw ConfigError("override", "empty flag name");
  std::string path(flag);
  std::replace(path.begin(), path.end(), '-', '_');

  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = std::string(value);
  }

  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError(path, "malformed field path");
    if (!node->is_object()) throw ConfigError(path, "parent is not an object");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(parsed);
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

/// "0,1,2" -> {0, 1, 2}.
inline std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string item(text.substr(start, comma - start));
    std::uint64_t seed = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), seed);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw ConfigError("seed", "expected a comma-separated list of nonnegative integers");
    seeds.push_back(seed);
    start = comma + 1;
  }
  return seeds;
}

// ---------------------------------------------------------------------------
// Per-seed problems

/// MDP, demonstrations and the occupancy every KL is measured against.
/// ring-sparse measures against the demonstrations' empirical occupancy,
/// the other experiments against the expert's exact occupancy.
struct Problem {
  TabularMdp mdp;
  ExpertDataset demonstrations;
  Occupancy target;
};

inline TabularMdp build_ring(const ExperimentConfig& c) {
  RingOptions options;
  options.n_states = c.n_states();
  options.gamma = c.gamma();
  if (c.environment.initial_dist) {
    const auto& p = *c.environment.initial_dist;
    options.initial_dist = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
  }
  return build_ring_mdp(options);
}

inline Problem build_problem(const ExperimentConfig& c, std::uint64_t seed) {
  const auto& env = c.environment;
  switch (c.experiment) {
    case Experiment::kRingSparse: {
      TabularMdp mdp = build_ring(c);
      ExpertDataset demos = sparse_expert_dataset(mdp, env.horizon, env.n_trajectories, seed);
      Occupancy target = empirical_occupancy(demos, mdp.gamma);
      return {std::move(mdp), std::move(demos), std::move(target)};
    }
    case Experiment::kRingStochastic: {
      TabularMdp mdp = build_ring(c);
      const Policy expert = stochastic_expert_policy(env.p_forward, mdp.n_states);
      ExpertDataset demos = generate_demonstrations(mdp, expert, env.n_trajectories, env.horizon, seed);
      Occupancy target = compute_occupancy(mdp, expert);
      return {std::move(mdp), std::move(demos), std::move(target)};
    }
    case Experiment::kRandomSweep: {
      TabularMdp mdp = random_mdp(c.n_states(), env.n_actions, env.branching, seed, c.gamma());
      const Policy expert = random_policy(mdp.n_states, mdp.n_actions,
                                          seed ^ 0x9e3779b97f4a7c15ULL, env.expert_scale);
      ExpertDataset demos = generate_demonstrations(mdp, expert, env.n_trajectories, env.horizon, seed);
      Occupancy target = compute_occupancy(mdp, expert);
      return {std::move(mdp), std::move(demos), std::move(target)};
    }
  }
  throw PreconditionError("unhandled experiment");
}

/// Trains one algorithm on one problem. BC is a single fit, reported as a
/// one-point curve at update 0 whose objective is the penalized NLL.
inline TrainResult run_algorithm(const ExperimentConfig& c, Algorithm algorithm,
                                 const Problem& problem, std::uint64_t seed) {
  TrainingConfig training = c.training;
  training.seed = seed;
  switch (algorithm) {
    case Algorithm::kValueDiceExact:
      return train_exact(problem.mdp, problem.target, c.mix, training);
    case Algorithm::kValueDiceEmpirical:
      return train_empirical(problem.mdp, problem.demonstrations, c.mix, training, problem.target);
    case Algorithm::kBc: {
      TrainResult result;
      Policy policy = bc_fit(problem.demonstrations, c.bc_regularizer);
      const double kl = kl_occupancy(compute_occupancy(problem.mdp, policy), problem.target);
      result.kl_curve.push_back({0, kl});
      result.objective_curve.push_back({0, bc_objective(policy, problem.demonstrations, c.bc_regularizer)});
      result.final_state = SaddleState{std::move(policy),
                                       NuFunction::zeros(problem.mdp.n_states, problem.mdp.n_actions), 0};
      return result;
    }
    case Algorithm::kGail:
      return gail_train(problem.mdp, problem.target, training);
  }
  throw PreconditionError("unhandled algorithm");
}

// ---------------------------------------------------------------------------
// Reports

struct MetricsRow {
  std::size_t update = 0;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::kValueDiceExact;
  double alpha = 0.0;
  double kl = 0.0;
  double j_value = 0.0;
};

inline constexpr double kMetricsKlFloor = -1e-12;

struct SeedSummary {
  std::uint64_t seed = 0;
  double final_kl = 0.0;
  Policy policy;
};

struct AlgorithmSummary {
  Algorithm algorithm = Algorithm::kValueDiceExact;
  std::vector<SeedSummary> seeds;
  double final_kl_mean = 0.0;
  /// Sample standard deviation; 0 for a single seed.
  double final_kl_stddev = 0.0;
};

struct ExperimentReport {
  Experiment experiment = Experiment::kRingStochastic;
  std::vector<MetricsRow> rows;
  std::vector<AlgorithmSummary> algorithms;
  /// Algorithms by ascending mean final KL.
  std::vector<Algorithm> ranking;
};

/// Per-state greedy action, or nullopt where the action distribution is
/// uniform to within `tol`.
inline std::vector<std::optional<std::size_t>> greedy_table(const Policy& policy, double tol = 1e-9) {
  std::vector<std::optional<std::size_t>> table;
  const Table& p = policy.probs();
  for (Eigen::Index s = 0; s < p.rows(); ++s) {
    if (p.row(s).maxCoeff() - p.row(s).minCoeff() <= tol) {
      table.emplace_back(std::nullopt);
    } else {
      table.emplace_back(policy.greedy_action(static_cast<std::size_t>(s)));
    }
  }
  return table;
}

/// Runs each algorithm on every seed. Rows are sorted by (seed, update),
/// ties keeping the order of `algorithms`.
inline ExperimentReport execute(const ExperimentConfig& c, const std::vector<Algorithm>& algorithms) {
  require(!c.seeds.empty(), "seed list is empty");
  require(!algorithms.empty(), "no algorithms to run");
  ExperimentReport report;
  report.experiment = c.experiment;
  for (Algorithm a : algorithms) report.algorithms.push_back({a, {}, 0.0, 0.0});

  for (std::uint64_t seed : c.seeds) {
    const Problem problem = build_problem(c, seed);
    for (std::size_t k = 0; k < algorithms.size(); ++k) {
      TrainResult result = run_algorithm(c, algorithms[k], problem, seed);
      for (std::size_t i = 0; i < result.kl_curve.size(); ++i) {
        const MetricsRow row{result.kl_curve[i].update, seed, algorithms[k], c.mix.alpha,
                             result.kl_curve[i].value, result.objective_curve[i].value};
        if (!(row.kl >= kMetricsKlFloor))
          throw NumericalError("KL " + format_double(row.kl) + " below floor at update " +
                               std::to_string(row.update));
        report.rows.push_back(row);
      }
      report.algorithms[k].seeds.push_back(
          {seed, result.final_kl(), std::move(result.final_state.policy)});
    }
  }

  auto order = [&](Algorithm a) {
    return std::find(algorithms.begin(), algorithms.end(), a) - algorithms.begin();
  };
  std::stable_sort(report.rows.begin(), report.rows.end(), [&](const MetricsRow& x, const MetricsRow& y) {
    if (x.seed != y.seed) return x.seed < y.seed;
    if (x.update != y.update) return x.update < y.update;
    return order(x.algorithm) < order(y.algorithm);
  });

  for (auto& summary : report.algorithms) {
    const auto n = static_cast<double>(summary.seeds.size());
    double mean = 0.0;
    for (const auto& s : summary.seeds) mean += s.final_kl;
    mean /= n;
    double var = 0.0;
    for (const auto& s : summary.seeds) var += (s.final_kl - mean) * (s.final_kl - mean);
    summary.final_kl_mean = mean;
    summary.final_kl_stddev = summary.seeds.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  }
  std::vector<const AlgorithmSummary*> ranked;
  for (const auto& s : report.algorithms) ranked.push_back(&s);
  std::stable_sort(ranked.begin(), ranked.end(), [](const AlgorithmSummary* x, const AlgorithmSummary* y) {
    return x->final_kl_mean < y->final_kl_mean;
  });
  for (const auto* s : ranked) report.ranking.push_back(s->algorithm);
  return report;
}

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << "update,seed,algorithm,alpha,kl,j_value\n";
  for (const auto& r : rows) {
    out << r.update << ',' << r.seed << ',' << to_string(r.algorithm) << ',' << format_double(r.alpha)
        << ',' << format_double(r.kl) << ',' << format_double(r.j_value) << '\n';
  }
}

inline nlohmann::json summary_json(const ExperimentReport& report) {
  using nlohmann::json;
  json j;
  j["experiment"] = std::string(to_string(report.experiment));
  json algorithms = json::array();
  for (const auto& summary : report.algorithms) {
    json a;
    a["algorithm"] = std::string(to_string(summary.algorithm));
    a["final_kl_mean"] = summary.final_kl_mean;
    a["final_kl_stddev"] = summary.final_kl_stddev;
    json seeds = json::array();
    for (const auto& s : summary.seeds) {
      json entry;
      entry["seed"] = s.seed;
      entry["final_kl"] = s.final_kl;
      json probs = json::array();
      for (Eigen::Index row = 0; row < s.policy.probs().rows(); ++row) {
        json p = json::array();
        for (Eigen::Index col = 0; col < s.policy.probs().cols(); ++col) p.push_back(s.policy.probs()(row, col));
        probs.push_back(std::move(p));
      }
      entry["policy"] = std::move(probs);
      json greedy = json::array();
      for (const auto& g : greedy_table(s.policy)) greedy.push_back(g ? json(*g) : json(nullptr));
      entry["greedy"] = std::move(greedy);
      seeds.push_back(std::move(entry));
    }
    a["seeds"] = std::move(seeds);
    algorithms.push_back(std::move(a));
  }
  j["algorithms"] = std::move(algorithms);
  json ranking = json::array();
  for (Algorithm a : report.ranking) ranking.push_back(std::string(to_string(a)));
  j["ranking"] = std::move(ranking);
  return j;
}

/// metrics.csv -> metrics.summary.json
inline std::filesystem::path summary_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".summary.json");
  return p;
}

namespace detail {

inline std::ofstream open_for_writing(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

inline void finish_writing(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace detail

/// Writes the metrics CSV at `csv_path` and the JSON summary beside it.
inline void write_report(const ExperimentReport& report, const std::filesystem::path& csv_path) {
  {
    auto out = detail::open_for_writing(csv_path);
    write_metrics_csv(report.rows, out);
    detail::finish_writing(out, csv_path);
  }
  const auto json_path = summary_path(csv_path);
  auto out = detail::open_for_writing(json_path);
  out << summary_json(report).dump(2) << '\n';
  detail::finish_writing(out, json_path);
}

/// The configured algorithm on every seed; files go to c.output.
inline ExperimentReport run_experiment(const ExperimentConfig& c) {
  ExperimentReport report = execute(c, {c.algorithm});
  write_report(report, c.output);
  return report;
}

/// ValueDICE, BC and GAIL on identical problems and seeds. The ValueDICE
/// variant is the configured one when it is empirical, exact otherwise.
inline ExperimentReport compare_baselines(const ExperimentConfig& c) {
  const Algorithm vd = c.algorithm == Algorithm::kValueDiceEmpirical ? Algorithm::kValueDiceEmpirical
                                                                     : Algorithm::kValueDiceExact;
  ExperimentReport report = execute(c, {vd, Algorithm::kBc, Algorithm::kGail});
  write_report(report, c.output);
  return report;
}

// ---------------------------------------------------------------------------
// KL curve export

inline void write_kl_curve(const std::vector<CurvePoint>& curve, std::ostream& out) {
  out << "update,kl\n";
  for (const auto& p : curve) out << p.update << ',' << format_double(p.value) << '\n';
}

/// Two-column CSV update,kl. Values use the shortest exact decimal form so
/// reading them back reproduces the curve bit for bit.
inline void export_kl_curve(const TrainResult& result, const std::filesystem::path& path) {
  require(!result.kl_curve.empty(), "KL curve is empty");
  auto out = detail::open_for_writing(path);
  write_kl_curve(result.kl_curve, out);
  detail::finish_writing(out, path);
}

inline std::vector<CurvePoint> read_kl_curve(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "update,kl") throw IoError("bad header in " + path.string());
  std::vector<CurvePoint> curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("bad row in " + path.string() + ": " + line);
    CurvePoint p;
    const auto res = std::from_chars(line.data(), line.data() + comma, p.update);
    if (res.ec != std::errc() || res.ptr != line.data() + comma)
      throw IoError("bad update in " + path.string() + ": " + line);
    try {
      p.value = parse_double(line.substr(comma + 1));
    } catch (const std::invalid_argument&) {
      throw IoError("bad kl in " + path.string() + ": " + line);
    }
    curve.push_back(p);
  }
  return curve;
}

/// Trains the configured algorithm on one seed and writes its KL curve.
inline TrainResult export_experiment_curve(const ExperimentConfig& c, std::uint64_t seed,
                                           const std::filesystem::path& path) {
  TrainResult result = run_algorithm(c, c.algorithm, build_problem(c, seed), seed);
  export_kl_curve(result, path);
  return result;
}

}  // namespace valuedice

#endif  // VALUEDICE_HARNESS_HPP_
