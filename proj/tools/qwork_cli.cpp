// Experiment runner for unsharp-measurement work statistics.
//
// Subcommands:
//   sweep-sigma   xi and entropic averages across a beta*sigma grid
//   sweep-rabi    entropic averages across an Omega_R/omega_q grid
//   single-run    one point at the configured sigma and drive
//   validate      invariant suite, machine-readable JSON report
//
// Exit codes: 0 success, 1 validation failure, 2 config error, 3 numerical failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qwork/qwork.hpp"

namespace {

// Reference-qubit defaults when validate runs without a config.
qwork::ExperimentConfig default_config() {
  qwork::ExperimentConfig c;
  c.omega_q_hz = 6.541e9;
  c.rabi_ratio = 1.0e6 / 6.541e9;
  c.psi = qwork::kPi / 4.0;
  c.beta = qwork::beta_natural_from_si(c.omega_q_hz, 0.14);
  c.kernel = qwork::KernelShape::Box;
  c.sigma_natural = 1.0;
  c.n_trials = 100000;
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int write_rows(const std::vector<qwork::SweepRow>& rows,
               const qwork::ExperimentConfig& cfg, const std::string& fingerprint) {
  if (cfg.out_path == "-") {
    qwork::write_csv(rows, cfg, fingerprint, std::cout);
    return 0;
  }
  std::ofstream out(cfg.out_path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot open output path " << cfg.out_path << "\n";
    return 2;
  }
  qwork::write_csv(rows, cfg, fingerprint, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"work statistics under non-projective energy measurements"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long> trials;
  std::optional<std::string> out_path;
  bool quadrature_only = false;
  bool inject_denormalized = false;

  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--seed", seed, "override run.master_seed");
  app.add_option("--trials", trials, "override run.n_trials");
  app.add_option("--out", out_path, "override output.path ('-' for stdout)");
  app.add_flag("--quadrature-only", quadrature_only,
               "skip Monte Carlo columns, deterministic quadrature only");

  auto* cmd_sigma = app.add_subcommand("sweep-sigma", "xi vs beta*sigma");
  auto* cmd_rabi = app.add_subcommand("sweep-rabi", "entropic averages vs Omega_R/omega_q");
  auto* cmd_single = app.add_subcommand("single-run", "one configured point");
  auto* cmd_validate = app.add_subcommand("validate", "run the invariant suite");
  // Global options may appear after the subcommand name.
  for (auto* sub : {cmd_sigma, cmd_rabi, cmd_single, cmd_validate}) sub->fallthrough();
  cmd_validate->add_flag("--inject-denormalized-kernel", inject_denormalized,
                         "negative control: add a deliberately failing completeness check");

  CLI11_PARSE(app, argc, argv);

  qwork::ExperimentConfig cfg;
  std::string fingerprint;
  try {
    if (!config_path.empty()) {
      cfg = qwork::load_config(config_path);
      fingerprint = read_file(config_path);
    } else if (!cmd_validate->parsed()) {
      std::cerr << "error: --config is required for this subcommand\n";
      return 2;
    } else {
      cfg = default_config();
      fingerprint = "builtin-default";
    }
    if (seed) cfg.master_seed = *seed;
    if (trials) cfg.n_trials = *trials;
    if (out_path) cfg.out_path = *out_path;
    cfg.quadrature_only = quadrature_only;
  } catch (const qwork::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (cmd_sigma->parsed()) {
      if (cfg.axis != qwork::SweepAxis::BetaSigma) {
        std::cerr << "config error: sweep-sigma requires run.sweep.axis = beta_sigma\n";
        return 2;
      }
      return write_rows(qwork::sweep_sigma(cfg), cfg, fingerprint);
    }
    if (cmd_rabi->parsed()) {
      if (cfg.axis != qwork::SweepAxis::RabiRatio) {
        std::cerr << "config error: sweep-rabi requires run.sweep.axis = rabi_ratio\n";
        return 2;
      }
      return write_rows(qwork::sweep_rabi(cfg), cfg, fingerprint);
    }
    if (cmd_single->parsed()) {
      return write_rows({qwork::single_run(cfg)}, cfg, fingerprint);
    }
    if (cmd_validate->parsed()) {
      const auto report = qwork::validate(cfg, inject_denormalized);
      std::cout << report.to_json().dump(2) << "\n";
      return report.all_pass() ? 0 : 1;
    }
  } catch (const qwork::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qwork::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qwork::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
