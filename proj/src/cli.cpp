#include "lmtp/cli.hpp"

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "lmtp/report.hpp"

namespace lmtp {

namespace {

namespace fs = std::filesystem;

ContrastMatrix resolve_contrast(const std::string& spec, int tau) {
  if (spec == "baseline") return build_contrast(ContrastKind::baseline, tau);
  if (spec == "adjacent") return build_contrast(ContrastKind::adjacent, tau);
  if (spec.rfind("file:", 0) == 0) return load_contrast(spec.substr(5), tau);
  throw Error(ErrorKind::config, "unknown contrast '" + spec + "' (expected baseline, adjacent or file:<path>)");
}

fs::path prepare_out(const RunConfig& config) {
  fs::path dir(config.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::config, "cannot create output directory '" + config.out + "'");
  return dir;
}

// The config file is applied before flags are parsed so that explicit flags
// take precedence over it.
std::string find_config_path(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int cmd_estimate(const RunConfig& config, std::ostream& out) {
  if (config.input.empty()) throw Error(ErrorKind::config, "estimate needs --input");
  const LongitudinalDataset data = load_csv(config.input);
  const Policy prime = parse_policy(config.policy_prime);
  const Policy dprime = parse_policy(config.policy_dprime);
  const ContrastMatrix contrast = resolve_contrast(config.contrast, data.tau());
  const SdrConfig sdr = config.sdr_config();

  const FoldAssignment folds = sdr_folds(data.n(), sdr);
  const CrossFitNuisance nuisance(sdr, folds);
  const TrajectoryEstimate tp = estimate_trajectory(data, prime, nuisance, sdr.parallel);
  const TrajectoryEstimate td = estimate_trajectory(data, dprime, nuisance, sdr.parallel);
  const StackedEstimate stacked = stack(tp, td);
  const InferenceReport report = infer(stacked, contrast, config.alpha, config.mvn_config());

  const fs::path dir = prepare_out(config);
  Json j = provenance_json(config);
  j["n"] = data.n();
  j["tau"] = data.tau();
  j["assessment_times"] = data.assessment_times();
  j["folds"] = folds.folds();
  j["trajectories"] = {{"prime", trajectory_json(tp)}, {"dprime", trajectory_json(td)}};
  j["inference"] = inference_json(report);
  for (const auto* traj : {&tp, &td})
    for (std::size_t t = 0; t < traj->diagnostics.size(); ++t)
      if (traj->diagnostics[t].out_of_range)
        j["notices"].push_back("estimate for " + traj->policy_label + " at time " + std::to_string(t + 1) +
                               " lies outside the observed outcome range");
  write_json(dir / "report.json", j);
  write_trajectory_csv(dir / "trajectory.csv", stacked, data.assessment_times(), config.alpha, config);
  write_delta_csv(dir / "delta.csv", report, config);
  write_text(dir / "report.svg", render_estimate_svg(stacked, report, config));
  if (config.dump_eif) write_eif_csv(dir / "eif.csv", stacked, config);
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_simulate(const RunConfig& config, std::ostream& out) {
  const StudyConfig study = config.study_config();
  const StudyTables tables = run_study(study);
  const fs::path dir = prepare_out(config);
  Json j = provenance_json(config);
  j["study"] = study_json(tables, config.raw);
  write_json(dir / "study_tables.json", j);
  write_study_csvs(dir, tables, config);
  Json summary = provenance_json(config);
  summary["cells"] = j["study"]["cells"];
  out << summary.dump(2) << '\n';
  return 0;
}

int cmd_truth(const RunConfig& config, std::ostream& out) {
  const DgpParams params = study_params(config.beta);
  Json j = provenance_json(config);
  j["truth"] = truth_json(analytic_truth(params), params);
  const fs::path dir = prepare_out(config);
  write_json(dir / "truth.json", j);
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_contrast(const RunConfig& config, int tau, std::ostream& out) {
  const ContrastMatrix c = resolve_contrast(config.contrast, tau);
  Json j = provenance_json(config);
  j["kind"] = to_string(c.kind);
  j["tau"] = tau;
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < c.K.rows(); ++r) {
    std::vector<double> row(c.K.cols());
    for (Eigen::Index col = 0; col < c.K.cols(); ++col) row[static_cast<std::size_t>(col)] = c.K(r, col);
    rows.push_back(row);
  }
  j["K"] = std::move(rows);
  out << j.dump(2) << '\n';
  return 0;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig config;
  int tau = 4;
  try {
    if (const std::string path = find_config_path(argc, argv); !path.empty()) {
      apply_config_file(path, config);
      config.config_file = path;
    }

    CLI::App app{"Longitudinal modified treatment policy estimation and simultaneous inference"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "lmtp-roc 1.0");

    auto add_common = [&](CLI::App* sub) {
      sub->add_option("--config", config.config_file, "key = value learner/config file");
      sub->add_option("--seed", config.seed, "base random seed");
      sub->add_option("--alpha", config.alpha, "significance level")->check(CLI::Range(1e-12, 1.0 - 1e-12));
      sub->add_option("--out", config.out, "output directory");
    };
    auto add_estimation = [&](CLI::App* sub) {
      sub->add_option("--folds", config.folds, "cross-fitting folds")->check(CLI::PositiveNumber);
      sub->add_option("--mvn-se", config.mvn_se, "target standard error of MVN probabilities")
          ->check(CLI::PositiveNumber);
      sub->add_option("--mvn-max-points", config.mvn_max_points, "lattice size cap")->check(CLI::PositiveNumber);
      sub->add_option("--ratio-p-min", config.ratio_p_min, "probability clip for density ratios");
      sub->add_option("--threads", config.threads, "OpenMP threads (0 = default)");
    };

    auto* est = app.add_subcommand("estimate", "estimate trajectories under two policies and test contrasts");
    add_common(est);
    add_estimation(est);
    est->add_option("--input", config.input, "wide CSV dataset")->required();
    est->add_option("--policy-prime", config.policy_prime, "policy d' (identity, shift:x, threshold:x, ...)");
    est->add_option("--policy-dprime", config.policy_dprime, "policy d''");
    est->add_option("--contrast", config.contrast, "baseline | adjacent | file:<path>");
    est->add_flag("--dump-eif", config.dump_eif, "write the EIF matrix to eif.csv");

    auto* sim = app.add_subcommand("simulate", "run the replication study");
    add_common(sim);
    add_estimation(sim);
    sim->add_flag("--desk-scale", config.desk_scale, "n in {250, 1000, 2500}, beta in {0, 0.5, 1}, 300 replicates");
    sim->add_option("--grid", config.grid, "e.g. \"n=250 beta=0,1 reps=10\"");
    sim->add_option("--beta", config.betas, "beta values (overrides the grid)")->delimiter(',');
    sim->add_flag("--raw", config.raw, "include per-replicate records");

    auto* truth = app.add_subcommand("truth", "analytic truth of the simulation system");
    add_common(truth);
    truth->add_option("--beta", config.beta, "interaction strength")->check(CLI::NonNegativeNumber);

    auto* con = app.add_subcommand("contrast", "print a contrast matrix");
    add_common(con);
    con->add_option("--contrast", config.contrast, "baseline | adjacent | file:<path>");
    con->add_option("--tau", tau, "number of time points")->check(CLI::PositiveNumber);

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      throw Error(ErrorKind::config, e.what());
    }
    if (config.threads > 0) omp_set_num_threads(config.threads);

    if (*est) {
      config.subcommand = "estimate";
      return cmd_estimate(config, out);
    }
    if (*sim) {
      config.subcommand = "simulate";
      return cmd_simulate(config, out);
    }
    if (*truth) {
      config.subcommand = "truth";
      return cmd_truth(config, out);
    }
    config.subcommand = "contrast";
    return cmd_contrast(config, tau, out);
  } catch (const Error& e) {
    err << error_json(e).dump(2) << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << error_json(Error(ErrorKind::estimation, e.what())).dump(2) << '\n';
    return 1;
  }
}

}  // namespace lmtp
