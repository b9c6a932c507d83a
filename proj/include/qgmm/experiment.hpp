#pragma once

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qgmm/diagnostics.hpp"
#include "qgmm/errors.hpp"
#include "qgmm/io.hpp"
#include "qgmm/moment_model.hpp"
#include "qgmm/prior.hpp"
#include "qgmm/samplers.hpp"
#include "qgmm/synth.hpp"

namespace qgmm {

namespace fs = std::filesystem;

/// Where the data of each replication comes from.
struct Scenario {
  enum class Kind { Synthetic, Csv };
  Kind kind = Kind::Synthetic;
  /// n and k of the synthetic design (its seed is set per replication).
  synth::SynthConfig synthetic;
  fs::path csv_path;
  io::ColumnMapping mapping;

  std::string label() const { return kind == Kind::Synthetic ? "synthetic" : csv_path.stem().string(); }
};

struct ExperimentConfig {
  Scenario scenario;
  PriorSpec prior;
  /// Algorithm and seed fields are overridden per task.
  SamplerConfig sampler;
  std::vector<Algorithm> algorithms{std::begin(kAllAlgorithms), std::end(kAllAlgorithms)};
  std::size_t replications = 100;
  std::uint64_t base_seed = 0;

  void validate() const {
    if (replications < 1) throw InvalidArgument("experiment: replications must be at least 1");
    if (algorithms.empty()) throw InvalidArgument("experiment: no algorithms selected");
    if (scenario.kind == Scenario::Kind::Synthetic) scenario.synthetic.validate();
    prior.validate();
    sampler.validate();
  }

  /// Seed of replication r: base_seed XOR r.
  std::uint64_t replication_seed(std::size_t r) const { return base_seed ^ static_cast<std::uint64_t>(r); }
};

/// Desk-scale benchmark defaults: 20,000 total / 10,000 retained draws, 10 replications.
inline ExperimentConfig desk_scale_defaults() {
  ExperimentConfig config;
  config.sampler.total_draws = 20000;
  config.sampler.retained_draws = 10000;
  config.replications = 10;
  return config;
}

inline std::vector<Algorithm> parse_algorithm_list(std::string_view s) {
  if (s == "all") return {std::begin(kAllAlgorithms), std::end(kAllAlgorithms)};
  return {parse_algorithm(s)};
}

/// Reads an experiment document. Missing fields keep the values already in `config`.
///
/// {
///   "scenario": {"synthetic": {"n": 100, "k": 5}}
///            or {"csv": {"path": "ajr.csv", "mapping": {...} | "mapping_file": "ajr.json"}},
///   "prior": {"family": "nig-hetero", "nu1": 2, "nu2": 1},
///   "sampler": {"algorithm": "all", "total_draws": 20000, "retained_draws": 10000,
///               "alpha_star": 0.234, "gamma": 0.6667, "initial_scale": 0.1, "da_adapt_on": "stage1"},
///   "replications": 10,
///   "base_seed": 1
/// }
///
/// Relative paths are resolved against the directory of the config file.
inline void apply_config_json(ExperimentConfig& config, const nlohmann::json& j, const fs::path& base_dir = {}) {
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    if (s.contains("synthetic")) {
      config.scenario.kind = Scenario::Kind::Synthetic;
      config.scenario.synthetic.n = s["synthetic"].value("n", config.scenario.synthetic.n);
      config.scenario.synthetic.k = s["synthetic"].value("k", config.scenario.synthetic.k);
    } else if (s.contains("csv")) {
      const auto& c = s.at("csv");
      config.scenario.kind = Scenario::Kind::Csv;
      config.scenario.csv_path = resolve(c.at("path").get<std::string>());
      if (c.contains("mapping")) {
        config.scenario.mapping = c.at("mapping").get<io::ColumnMapping>();
      } else {
        config.scenario.mapping = io::read_mapping(resolve(c.at("mapping_file").get<std::string>()));
      }
    } else {
      throw InvalidArgument("config: scenario needs a 'synthetic' or 'csv' entry");
    }
  }
  if (j.contains("prior")) {
    const auto& p = j.at("prior");
    if (p.contains("family")) config.prior.family = parse_prior_family(p.at("family").get<std::string>());
    config.prior.nu1 = p.value("nu1", config.prior.nu1);
    config.prior.nu2 = p.value("nu2", config.prior.nu2);
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    auto& c = config.sampler;
    if (s.contains("algorithm")) config.algorithms = parse_algorithm_list(s.at("algorithm").get<std::string>());
    c.total_draws = s.value("total_draws", c.total_draws);
    c.retained_draws = s.value("retained_draws", c.retained_draws);
    c.alpha_star = s.value("alpha_star", c.alpha_star);
    c.gamma = s.value("gamma", c.gamma);
    c.initial_scale = s.value("initial_scale", c.initial_scale);
    if (s.contains("da_adapt_on")) {
      const auto v = s.at("da_adapt_on").get<std::string>();
      if (v == "stage1") {
        c.da_adapt_on = DaAdaptSignal::Stage1;
      } else if (v == "final") {
        c.da_adapt_on = DaAdaptSignal::Final;
      } else {
        throw InvalidArgument("config: da_adapt_on must be 'stage1' or 'final'");
      }
    }
  }
  config.replications = j.value("replications", config.replications);
  config.base_seed = j.value("base_seed", config.base_seed);
}

inline void load_config_file(ExperimentConfig& config, const fs::path& path) {
  try {
    apply_config_json(config, nlohmann::json::parse(io::read_file(path)), path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("config '" + path.string() + "': " + e.what());
  }
}

struct ReplicationFailure {
  std::size_t replication = 0;
  Algorithm algorithm = Algorithm::MdaApprox;
  std::string message;
};

struct ExperimentOptions {
  unsigned jobs = 1;
  /// Per-run JSON artifacts go to <out_dir>/runs when set.
  std::optional<fs::path> out_dir;
  bool write_draws = false;
};

struct ExperimentOutcome {
  io::BenchmarkTable table;
  std::vector<ReplicationFailure> failures;

  bool all_completed() const { return failures.empty(); }
};

inline std::string run_file_stem(Algorithm a, std::size_t replication) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_rep%04zu", replication);
  return std::string(to_string(a)) + buf;
}

/// Runs every (replication, algorithm) pair, then aggregates medians per algorithm.
///
/// Replications run concurrently on up to `options.jobs` threads; each owns its
/// RNG streams, and aggregation is keyed, so the table does not depend on scheduling.
inline ExperimentOutcome run_experiment(const ExperimentConfig& config, const ExperimentOptions& options = {}) {
  config.validate();
  std::optional<Dataset> csv_data;
  if (config.scenario.kind == Scenario::Kind::Csv)
    csv_data = io::ingest_csv(config.scenario.csv_path, config.scenario.mapping);

  const std::size_t n_alg = config.algorithms.size();
  const std::size_t n_tasks = config.replications * n_alg;
  std::vector<std::optional<MessReport>> reports(n_tasks);
  std::vector<std::string> errors(n_tasks);

  std::optional<fs::path> runs_dir;
  if (options.out_dir) {
    runs_dir = *options.out_dir / "runs";
    fs::create_directories(*runs_dir);
  }

  auto run_task = [&](std::size_t task) {
    const std::size_t rep = task / n_alg;
    const Algorithm algorithm = config.algorithms[task % n_alg];
    const std::uint64_t seed = config.replication_seed(rep);
    try {
      std::optional<MomentModel> model;
      if (csv_data) {
        model.emplace(*csv_data);
      } else {
        synth::SynthConfig sc = config.scenario.synthetic;
        sc.seed = seed;
        model.emplace(synth::generate(sc).data);
      }
      SamplerConfig sampler = config.sampler;
      sampler.algorithm = algorithm;
      sampler.seed = seed;
      const RunResult result = run_chain(*model, config.prior, sampler);
      const MessReport report = mess(result.draws, result.sampling_seconds);
      if (runs_dir) {
        const std::string stem = run_file_stem(algorithm, rep);
        std::optional<fs::path> draws_path;
        if (options.write_draws) draws_path = *runs_dir / (stem + "_draws.csv");
        io::write_results(result, report, *runs_dir / (stem + ".json"), draws_path);
      }
      reports[task] = report;
    } catch (const std::exception& e) {
      errors[task] = e.what();
    }
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(n_tasks)));
  if (jobs == 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w)
      workers.emplace_back([&] {
        for (std::size_t t = next++; t < n_tasks; t = next++) run_task(t);
      });
    for (auto& w : workers) w.join();
  }

  ExperimentOutcome outcome;
  Eigen::Index n = 0;
  Eigen::Index k = 0;
  if (csv_data) {
    n = csv_data->n();
    k = csv_data->k();
  } else {
    n = config.scenario.synthetic.n;
    k = config.scenario.synthetic.k;
  }
  for (std::size_t a = 0; a < n_alg; ++a) {
    std::vector<MessReport> completed;
    for (std::size_t rep = 0; rep < config.replications; ++rep) {
      const std::size_t task = rep * n_alg + a;
      if (reports[task]) {
        completed.push_back(*reports[task]);
      } else {
        outcome.failures.push_back({rep, config.algorithms[a], errors[task]});
      }
    }
    io::BenchmarkRow row;
    row.scenario = config.scenario.label();
    row.n = n;
    row.k = k;
    row.algorithm = config.algorithms[a];
    row.requested = config.replications;
    row.completed = completed.size();
    if (!completed.empty()) {
      const MessReport med = median_across_runs(completed);
      row.mess_per_iter = med.mess_per_iter;
      row.mess_per_sec = med.mess_per_sec;
    }
    outcome.table.rows.push_back(std::move(row));
  }
  outcome.table.sort();
  return outcome;
}

}  // namespace qgmm
