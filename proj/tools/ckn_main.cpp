// Command-line front end: configure a (manifold, field, parameters, function
// family) experiment from a JSON file, run it, and emit JSON and text
// reports.
//
// Exit codes: 0 pass, 1 verification failure, 2 usage/config error.

#include "ckn/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_path;
  std::int64_t seed = -1;
  double quad_tol = 0.0;
  int threads = 0;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--out", flags.out_path, "write the JSON report to this path");
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--quad-tol", flags.quad_tol, "override the adaptive quadrature rel_tol");
  cmd->add_option("--threads", flags.threads, "worker threads for grid sampling and sweeps");
}

ckn::ExperimentConfig load_config(const CommonFlags& flags) {
  std::ifstream in(flags.config_path);
  if (!in) throw ckn::ConfigError("cannot open config file '" + flags.config_path + "'");
  ckn::json j;
  try {
    in >> j;
  } catch (const ckn::json::exception& e) {
    throw ckn::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ckn::ExperimentConfig cfg = ckn::parse_config(j);
  if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.quad_tol > 0.0) cfg.scheme.rel_tol = flags.quad_tol;
  if (flags.threads > 0) cfg.threads = flags.threads;
  if (!flags.out_path.empty()) cfg.output_path = flags.out_path;
  return cfg;
}

int emit(const ckn::RunOutcome& outcome, const ckn::ExperimentConfig& cfg) {
  std::cout << outcome.summary;
  if (!cfg.output_path.empty()) {
    std::ofstream out(cfg.output_path);
    if (!out) {
      std::cerr << "error: cannot write report to '" << cfg.output_path << "'\n";
      return 2;
    }
    out << outcome.report.dump(2) << "\n";
  } else {
    std::cout << outcome.report.dump(2) << "\n";
  }
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical verification of weighted inequalities on Riemannian charts"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* verify = app.add_subcommand("verify-field", "classify the conformal field and check the divergence identities");
  auto* check = app.add_subcommand("check-inequality", "evaluate the selected inequality over the configured test functions");
  auto* probe = app.add_subcommand("probe-sharpness", "sweep extremal families and extrapolate the sharpness deficit");
  auto* trace = app.add_subcommand("trace-proof", "evaluate the proof stations and the quadratic certificate");
  for (auto* cmd : {verify, check, probe, trace}) add_common_flags(cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const ckn::ExperimentConfig cfg = load_config(flags);
    ckn::RunOutcome outcome;
    if (verify->parsed())
      outcome = ckn::cmd_verify_field(cfg);
    else if (check->parsed())
      outcome = ckn::cmd_check_inequality(cfg);
    else if (probe->parsed())
      outcome = ckn::cmd_probe_sharpness(cfg);
    else
      outcome = ckn::cmd_trace_proof(cfg);
    return emit(outcome, cfg);
  } catch (const ckn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ckn::ParamConditionViolated& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const ckn::ParameterOutOfRange& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const ckn::FitIllConditioned& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ckn::Error& e) {
    std::cerr << "verification error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
