#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qwork/config.hpp"
#include "qwork/theorems.hpp"

namespace qwork {

struct SweepRow {
  double sweep_value;
  std::string regime;  // "nonoverlap" | "overlap"
  double xi_mc;
  double xi_se;
  double xi_quadrature;
  double xi_closed_nonoverlap;  // NaN where not applicable
  double xi_closed_overlap;     // NaN where not applicable
  double mean_dC, se_dC;
  double mean_dDKL, se_dDKL;
  double mean_dSR, se_dSR;
  double jensen_slack;
};

namespace detail {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline SweepRow evaluate_point(const SingleMeasurementSetup& setup, double sweep_value,
                               const ExperimentConfig& cfg, std::uint64_t sweep_index) {
  SweepRow row{};
  row.sweep_value = sweep_value;
  bool overlap = false;
  for (const auto& r : setup.measurement().regions()) overlap |= !r.informative;
  row.regime = overlap ? "overlap" : "nonoverlap";

  row.xi_quadrature = xi_quadrature(setup).xi;
  const double gap = setup.h0().min_gap();
  const double sigma = setup.measurement().kernel().sigma();
  row.xi_closed_nonoverlap = sigma <= gap ? closed_form_nonoverlap(setup).xi : kNaN;
  row.xi_closed_overlap =
      (setup.measurement().kernel().shape() == KernelShape::Box && sigma >= gap &&
       setup.h0().num_groups() == 2 && setup.thermal_start())
          ? closed_form_overlap_box(setup).xi
          : kNaN;

  if (cfg.quadrature_only) {
    row.xi_mc = row.xi_se = kNaN;
    row.mean_dC = row.se_dC = row.mean_dDKL = row.se_dDKL = kNaN;
    row.mean_dSR = row.se_dSR = row.jensen_slack = kNaN;
    return row;
  }
  const RngStream stream(cfg.master_seed, sweep_index);
  const auto records = run_trials(setup, cfg.n_trials, stream);
  const XiEstimate mc = xi_from_records(records);
  row.xi_mc = mc.xi;
  row.xi_se = mc.standard_error;
  const TrialAverages avg = decompose_trial_average(records, setup);
  row.mean_dC = avg.mean_dC;
  row.se_dC = avg.se_dC;
  row.mean_dDKL = avg.mean_dDKL;
  row.se_dDKL = avg.se_dDKL;
  row.mean_dSR = avg.mean_dSR;
  row.se_dSR = avg.se_dSR;
  row.jensen_slack = jensen_bound_check(mc, records, setup).slack;
  return row;
}

}  // namespace detail

// xi and entropic averages across a beta*sigma grid at fixed drive.
inline std::vector<SweepRow> sweep_sigma(const ExperimentConfig& cfg) {
  const HamiltonianProtocol proto =
      rabi_protocol(cfg.rabi_ratio, cfg.psi, cfg.t_final_natural);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
    const double beta_sigma = cfg.grid[i];
    const MeasurementKernel kernel(cfg.kernel, beta_sigma / cfg.beta);
    const auto setup = SingleMeasurementSetup::build(proto, cfg.beta, kernel);
    rows.push_back(detail::evaluate_point(setup, beta_sigma, cfg, i));
  }
  return rows;
}

// Entropic averages across an Omega_R/omega_q grid at fixed meter width.
inline std::vector<SweepRow> sweep_rabi(const ExperimentConfig& cfg) {
  const MeasurementKernel kernel(cfg.kernel, cfg.sigma_natural);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
    const double ratio = cfg.grid[i];
    const HamiltonianProtocol proto = rabi_protocol(ratio, cfg.psi, cfg.t_final_natural);
    const auto setup = SingleMeasurementSetup::build(proto, cfg.beta, kernel);
    rows.push_back(detail::evaluate_point(setup, ratio, cfg, i));
  }
  return rows;
}

// One point at the configured sigma and drive (sweep index 0).
inline SweepRow single_run(const ExperimentConfig& cfg) {
  const HamiltonianProtocol proto =
      rabi_protocol(cfg.rabi_ratio, cfg.psi, cfg.t_final_natural);
  const MeasurementKernel kernel(cfg.kernel, cfg.sigma_natural);
  const auto setup = SingleMeasurementSetup::build(proto, cfg.beta, kernel);
  return detail::evaluate_point(setup, cfg.beta * cfg.sigma_natural, cfg, 0);
}

inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline const char* kCsvHeader =
    "sweep_value,regime,xi_mc,xi_se,xi_quadrature,xi_closed_nonoverlap,"
    "xi_closed_overlap,mean_dC,se_dC,mean_dDKL,se_dDKL,mean_dSR,se_dSR,jensen_slack";

inline void write_csv(const std::vector<SweepRow>& rows, const ExperimentConfig& cfg,
                      const std::string& config_fingerprint, std::ostream& out) {
  out << "# qwork sweep v1\n";
  out << "# config_hash=" << fnv1a_hash(config_fingerprint) << "\n";
  out << "# master_seed=" << cfg.master_seed << "\n";
  out << "# n_trials=" << cfg.n_trials << "\n";
  out << kCsvHeader << "\n";
  for (const auto& r : rows) {
    out << format_g17(r.sweep_value) << ',' << r.regime << ',' << format_g17(r.xi_mc)
        << ',' << format_g17(r.xi_se) << ',' << format_g17(r.xi_quadrature) << ','
        << format_g17(r.xi_closed_nonoverlap) << ',' << format_g17(r.xi_closed_overlap)
        << ',' << format_g17(r.mean_dC) << ',' << format_g17(r.se_dC) << ','
        << format_g17(r.mean_dDKL) << ',' << format_g17(r.se_dDKL) << ','
        << format_g17(r.mean_dSR) << ',' << format_g17(r.se_dSR) << ','
        << format_g17(r.jensen_slack) << "\n";
  }
}

struct ValidationItem {
  std::string name;
  bool pass;
  double residual;
  double threshold;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool all_pass() const {
    for (const auto& i : items)
      if (!i.pass) return false;
    return true;
  }
  nlohmann::json to_json() const {
    nlohmann::json j;
    j["all_pass"] = all_pass();
    j["checks"] = nlohmann::json::array();
    for (const auto& i : items)
      j["checks"].push_back({{"name", i.name},
                             {"pass", i.pass},
                             {"residual", i.residual},
                             {"threshold", i.threshold}});
    return j;
  }
};

// Machine-readable invariant suite across all modules.  The optional
// denormalized-kernel injection is a negative control for the reporting path.
inline ValidationReport validate(const ExperimentConfig& cfg,
                                 bool inject_denormalized_kernel = false) {
  ValidationReport rep;
  auto check = [&rep](const std::string& name, double residual, double threshold) {
    rep.items.push_back({name, residual < threshold, residual, threshold});
  };

  const HamiltonianProtocol proto =
      rabi_protocol(cfg.rabi_ratio, cfg.psi, cfg.t_final_natural);
  const double gap = 1.0;  // qubit in natural units
  const MeasurementKernel narrow(cfg.kernel, 0.5 * gap);
  const MeasurementKernel wide(cfg.kernel, 2.0 * gap);

  for (const auto* kp : {&narrow, &wide}) {
    const auto setup = SingleMeasurementSetup::build(proto, cfg.beta, *kp);
    const std::string tag =
        kp->sigma() < gap ? "nonoverlap" : "overlap";

    check("povm_completeness_" + tag, setup.measurement().completeness_residual(), 1e-8);
    check("propagator_unitarity_" + tag, setup.propagator().unitarity_drift, 1e-9);

    std::vector<Segment> segs;
    for (const auto& r : setup.measurement().regions()) segs.push_back({r.lo, r.hi});
    const double norm = integrate_segments_rel(
        [&](double f) { return setup.outcome_pdf(f); }, segs, 1e-10);
    check("outcome_pdf_normalization_" + tag, std::abs(norm - 1.0), 1e-8);

    const double xq = xi_quadrature(setup).xi;
    if (kp->sigma() <= gap)
      check("closed_nonoverlap_vs_quadrature",
            std::abs(closed_form_nonoverlap(setup).xi - xq), 1e-6);
    if (cfg.kernel == KernelShape::Box && kp->sigma() >= gap)
      check("closed_overlap_vs_quadrature",
            std::abs(closed_form_overlap_box(setup).xi - xq), 1e-6);

    const RngStream stream(cfg.master_seed, kp->sigma() < gap ? 1001 : 1002);
    const long n = std::min<long>(cfg.n_trials, 100000);
    const auto records = run_trials(setup, n, stream);
    const XiEstimate mc = xi_from_records(records);
    check("xi_mc_vs_quadrature_" + tag + "_3se", std::abs(mc.xi - xq),
          std::max(3.0 * mc.standard_error, 1e-12));

    double max_decomp = 0.0;
    for (std::size_t t = 0; t < records.size(); t += 97) {
      const auto& r = records[t];
      max_decomp = std::max(max_decomp,
                            std::abs(r.s_re - (r.dC + setup.initial_coherence()) -
                                     (r.dDKL + setup.initial_dkl())));
    }
    check("relative_entropy_decomposition_" + tag, max_decomp, 1e-9);

    const TrialAverages avg = decompose_trial_average(records, setup);
    check("ft_product_form_" + tag, avg.product_residual, 1e-9);

    const JensenCheck jc = jensen_bound_check(mc, records, setup);
    check("jensen_bound_" + tag, -jc.slack, 3.0 * jc.slack_se + 1e-12);

    // Empirical CDF of sampled outcomes vs the quadrature CDF of P(f).
    std::vector<double> fs(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) fs[i] = records[i].f;
    std::sort(fs.begin(), fs.end());
    double ks = 0.0;
    const std::size_t stride = std::max<std::size_t>(fs.size() / 400, 1);
    for (std::size_t i = 0; i < fs.size(); i += stride) {
      std::vector<Segment> below;
      for (const auto& reg : setup.measurement().regions())
        if (reg.lo < fs[i]) below.push_back({reg.lo, std::min(reg.hi, fs[i])});
      const double cdf = integrate_segments(
          [&](double f) { return setup.outcome_pdf(f); }, below, 1e-9);
      const double emp_lo = static_cast<double>(i) / fs.size();
      const double emp_hi = static_cast<double>(i + 1) / fs.size();
      ks = std::max({ks, std::abs(cdf - emp_lo), std::abs(cdf - emp_hi)});
    }
    check("sample_vs_pdf_ks_" + tag, ks, 0.01);

    const double mf_quad = partial_meter_factor(*kp, cfg.beta, kp->support_lo(),
                                                kp->support_hi(), 0.0);
    check("meter_factor_closed_vs_quadrature_" + tag,
          std::abs(meter_factor(*kp, cfg.beta) - mf_quad) / mf_quad, 1e-9);
  }

  if (inject_denormalized_kernel) {
    // Scale the kernel mass by 1.1 and re-run the completeness check; the
    // reported residual must surface as a failure.
    const MeasurementKernel k(cfg.kernel, gap);
    const double mass = partial_meter_factor(k, 0.0, k.support_lo(), k.support_hi(), 0.0);
    check("povm_completeness_injected_denormalized", std::abs(1.1 * mass - 1.0), 1e-8);
  }
  return rep;
}

}  // namespace qwork
