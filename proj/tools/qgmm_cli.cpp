// qgmm: quasi-Bayesian linear-moment inference from the command line.
//
//   qgmm synth        --n 100 --k 5 --seed 1 --out data/
//   qgmm run          --prior nig-hetero --algorithm mda-approx --n 1000 --k 20 --out run/
//   qgmm bench        --algorithm all --reps 10 --draws 20000 --retain 10000 --jobs 4 --out bench/
//   qgmm mess         --draws-csv run/draws.csv --seconds 1.5
//   qgmm ingest-check --csv ajr.csv --mapping data/mappings/ajr.json

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <typeinfo>

#include "qgmm/qgmm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Flags shared by run and bench; unset flags leave the config untouched.
struct ExperimentFlags {
  std::string config_path;
  std::string algorithm;
  std::string prior;
  std::optional<long> n;
  std::optional<long> k;
  std::optional<std::size_t> draws;
  std::optional<std::size_t> retain;
  std::optional<std::size_t> reps;
  std::optional<std::uint64_t> seed;
  std::string csv;
  std::string mapping;
  unsigned jobs = 1;
  std::string out;

  void attach(CLI::App& app, bool with_reps) {
    app.add_option("--config", config_path, "Experiment JSON document")->check(CLI::ExistingFile);
    app.add_option("--algorithm", algorithm, "ram | da | mda-exact | mda-approx | all");
    app.add_option("--prior", prior, "normal | nig-homo | nig-hetero");
    app.add_option("--n", n, "Synthetic sample size");
    app.add_option("--k", k, "Synthetic parameter count");
    app.add_option("--draws", draws, "Total draws per chain");
    app.add_option("--retain", retain, "Retained (final) draws per chain");
    if (with_reps) app.add_option("--reps", reps, "Replications");
    app.add_option("--seed", seed, "Base seed (falls back to QGMM_SEED, then 0)");
    app.add_option("--csv", csv, "Real-data CSV instead of the synthetic design")->check(CLI::ExistingFile);
    app.add_option("--mapping", mapping, "Column mapping JSON for --csv")->check(CLI::ExistingFile);
    if (with_reps) app.add_option("--jobs", jobs, "Concurrent replications")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "Output directory")->required();
  }

  qgmm::ExperimentConfig build(qgmm::ExperimentConfig config) const {
    if (const char* env = std::getenv("QGMM_SEED")) config.base_seed = std::stoull(env);
    if (!config_path.empty()) qgmm::load_config_file(config, config_path);
    if (!algorithm.empty()) config.algorithms = qgmm::parse_algorithm_list(algorithm);
    if (!prior.empty()) config.prior.family = qgmm::parse_prior_family(prior);
    if (n) config.scenario.synthetic.n = *n;
    if (k) config.scenario.synthetic.k = *k;
    if (draws) config.sampler.total_draws = *draws;
    if (retain) config.sampler.retained_draws = *retain;
    if (draws && !retain && config.sampler.retained_draws > *draws) config.sampler.retained_draws = *draws / 2;
    if (reps) config.replications = *reps;
    if (seed) config.base_seed = *seed;
    if (!csv.empty()) {
      if (mapping.empty()) throw qgmm::InvalidArgument("--csv needs --mapping");
      config.scenario.kind = qgmm::Scenario::Kind::Csv;
      config.scenario.csv_path = csv;
      config.scenario.mapping = qgmm::io::read_mapping(mapping);
    }
    return config;
  }
};

json error_json(const std::string& type, const std::string& message) {
  return json{{"error", {{"type", type}, {"message", message}}}};
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const qgmm::FileNotFound*>(&e)) return "FileNotFound";
  if (dynamic_cast<const qgmm::HeaderMismatch*>(&e)) return "HeaderMismatch";
  if (dynamic_cast<const qgmm::NonNumericCell*>(&e)) return "NonNumericCell";
  if (dynamic_cast<const qgmm::RankDeficient*>(&e)) return "RankDeficient";
  if (dynamic_cast<const qgmm::SingularWeighting*>(&e)) return "SingularWeighting";
  if (dynamic_cast<const qgmm::SingularCovariance*>(&e)) return "SingularCovariance";
  if (dynamic_cast<const qgmm::TooFewDraws*>(&e)) return "TooFewDraws";
  if (dynamic_cast<const qgmm::SamplerFailure*>(&e)) return "SamplerFailure";
  if (dynamic_cast<const qgmm::InvalidArgument*>(&e)) return "InvalidArgument";
  if (dynamic_cast<const qgmm::IoError*>(&e)) return "IoError";
  return "Error";
}

qgmm::MomentModel load_model(const qgmm::ExperimentConfig& config) {
  if (config.scenario.kind == qgmm::Scenario::Kind::Csv)
    return qgmm::MomentModel(qgmm::io::ingest_csv(config.scenario.csv_path, config.scenario.mapping));
  qgmm::synth::SynthConfig sc = config.scenario.synthetic;
  sc.seed = config.replication_seed(0);
  return qgmm::MomentModel(qgmm::synth::generate(sc).data);
}

int cmd_synth(long n, long k, std::optional<std::uint64_t> seed, const fs::path& out) {
  qgmm::synth::SynthConfig config;
  config.n = n;
  config.k = k;
  config.seed = seed.value_or(0);
  if (!seed)
    if (const char* env = std::getenv("QGMM_SEED")) config.seed = std::stoull(env);
  const auto generated = qgmm::synth::generate(config);
  fs::create_directories(out);
  qgmm::io::write_dataset_csv(out / "dataset.csv", generated.data);
  json truth{{"n", n}, {"k", k}, {"seed", config.seed}, {"true_theta", std::vector<double>(
      generated.true_theta.data(), generated.true_theta.data() + generated.true_theta.size())}};
  qgmm::io::write_text(out / "truth.json", truth.dump(2) + "\n");
  std::cout << "wrote " << (out / "dataset.csv").string() << " (n=" << n << ", k=" << k << ")\n";
  return 0;
}

int cmd_run(const ExperimentFlags& flags, bool save_draws) {
  qgmm::ExperimentConfig config;
  config.algorithms = {qgmm::Algorithm::MdaApprox};
  config = flags.build(config);
  if (config.algorithms.size() != 1) throw qgmm::InvalidArgument("run takes a single --algorithm");
  config.validate();

  const qgmm::MomentModel model = load_model(config);
  qgmm::SamplerConfig sampler = config.sampler;
  sampler.algorithm = config.algorithms.front();
  sampler.seed = config.replication_seed(0);
  const qgmm::RunResult result = qgmm::run_chain(model, config.prior, sampler);
  const qgmm::MessReport report = qgmm::mess(result.draws, result.sampling_seconds);

  const fs::path out(flags.out);
  fs::create_directories(out);
  std::optional<fs::path> draws_path;
  if (save_draws) draws_path = out / "draws.csv";
  qgmm::io::write_results(result, report, out / "result.json", draws_path);
  std::cout << qgmm::io::results_json(result, report).dump(2) << "\n";
  return 0;
}

int cmd_bench(const ExperimentFlags& flags, bool save_draws) {
  const qgmm::ExperimentConfig config = flags.build(qgmm::desk_scale_defaults());
  const fs::path out(flags.out);
  fs::create_directories(out);

  qgmm::ExperimentOptions options;
  options.jobs = flags.jobs;
  options.out_dir = out;
  options.write_draws = save_draws;
  const auto outcome = qgmm::run_experiment(config, options);

  const auto rendered = qgmm::io::render_table(outcome.table, {.include_timing = false});
  const auto timed = qgmm::io::render_table(outcome.table, {.include_timing = true});
  qgmm::io::write_text(out / "bench_table.csv", rendered.csv);
  qgmm::io::write_text(out / "bench_timing.csv", timed.csv);
  qgmm::io::write_text(out / "bench_table.txt", timed.text);
  std::cout << timed.text;

  if (!outcome.all_completed()) {
    json failures = json::array();
    for (const auto& f : outcome.failures)
      failures.push_back({{"replication", f.replication},
                          {"algorithm", std::string(qgmm::to_string(f.algorithm))},
                          {"message", f.message}});
    const json summary{{"error", {{"type", "ReplicationFailure"}, {"failures", failures}}}};
    qgmm::io::write_text(out / "errors.json", summary.dump(2) + "\n");
    std::cerr << summary.dump() << "\n";
    return kExitFailure;
  }
  return 0;
}

int cmd_mess(const fs::path& draws_csv, double seconds, const std::string& out) {
  const qgmm::Matrix draws = qgmm::io::read_draws_csv(draws_csv);
  const qgmm::MessReport report = qgmm::mess(draws, seconds);
  const json doc{{"draws", draws.rows()},       {"p", report.p},
                 {"batch_size", report.batch_size}, {"mess", report.mess},
                 {"mess_per_iter", report.mess_per_iter}, {"mess_per_sec", report.mess_per_sec},
                 {"numerical_fault", report.numerical_fault}};
  if (!out.empty()) {
    fs::create_directories(out);
    qgmm::io::write_text(fs::path(out) / "mess.json", doc.dump(2) + "\n");
  }
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int cmd_ingest_check(const fs::path& csv, const fs::path& mapping_path) {
  const auto mapping = qgmm::io::read_mapping(mapping_path);
  const qgmm::MomentModel model(qgmm::io::ingest_csv(csv, mapping));
  const auto& pivot = model.pivot();
  const json doc{{"n", model.n()},
                 {"k", model.k()},
                 {"pivot", std::vector<double>(pivot.data(), pivot.data() + pivot.size())}};
  std::cout << doc.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-Bayesian inference for linear moment conditions via delayed-acceptance MCMC"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate a heteroskedastic regression dataset");
  long synth_n = 100;
  long synth_k = 5;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_out;
  synth->add_option("--n", synth_n, "Sample size");
  synth->add_option("--k", synth_k, "Parameter count (intercept included)");
  synth->add_option("--seed", synth_seed, "Seed (falls back to QGMM_SEED, then 0)");
  synth->add_option("--out", synth_out, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Run a single chain");
  ExperimentFlags run_flags;
  run_flags.attach(*run, false);
  bool run_save_draws = false;
  run->add_flag("--save-draws", run_save_draws, "Also write draws.csv");

  auto* bench = app.add_subcommand("bench", "Replication study with median mESS tables");
  ExperimentFlags bench_flags;
  bench_flags.attach(*bench, true);
  bool bench_save_draws = false;
  bench->add_flag("--save-draws", bench_save_draws, "Also write per-run draws CSVs");

  auto* mess_cmd = app.add_subcommand("mess", "Multivariate ESS of a saved draws CSV");
  std::string mess_draws;
  double mess_seconds = 0.0;
  std::string mess_out;
  mess_cmd->add_option("--draws-csv", mess_draws, "Draws CSV (theta_1..theta_k)")->required()->check(CLI::ExistingFile);
  mess_cmd->add_option("--seconds", mess_seconds, "Sampling time, for mESS/s");
  mess_cmd->add_option("--out", mess_out, "Optional output directory for mess.json");

  auto* ingest = app.add_subcommand("ingest-check", "Validate a column mapping against a CSV file");
  std::string ingest_csv;
  std::string ingest_mapping;
  ingest->add_option("--csv", ingest_csv, "Data CSV")->required();
  ingest->add_option("--mapping", ingest_mapping, "Column mapping JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) return cmd_synth(synth_n, synth_k, synth_seed, synth_out);
    if (*run) return cmd_run(run_flags, run_save_draws);
    if (*bench) return cmd_bench(bench_flags, bench_save_draws);
    if (*mess_cmd) return cmd_mess(mess_draws, mess_seconds, mess_out);
    if (*ingest) return cmd_ingest_check(ingest_csv, ingest_mapping);
  } catch (const qgmm::InvalidArgument& e) {
    std::cerr << error_json(error_type(e), e.what()).dump() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << error_json(error_type(e), e.what()).dump() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
