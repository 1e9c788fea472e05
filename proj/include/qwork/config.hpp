#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qwork/errors.hpp"
#include "qwork/meter.hpp"

namespace qwork {

// CODATA 2018 exact/defined values, SI.
constexpr double kHbar = 1.054571817e-34;       // J s
constexpr double kBoltzmann = 1.380649e-23;     // J/K
constexpr double kPi = 3.14159265358979323846;

enum class SweepAxis { BetaSigma, RabiRatio };

// Natural units: hbar*omega_q := 1 for energy, 1/omega_q for time.
struct ExperimentConfig {
  // system
  double omega_q_hz = 6.541e9;       // ordinary frequency nu_q; omega_q = 2 pi nu_q
  double rabi_ratio = 0.0;           // Omega_R / omega_q
  double psi = 0.0;                  // drive phase, radians
  double t_final_natural = 2.0 * kPi / 3.0;  // tau_f = omega_q t_f
  // bath
  double beta = 1.0;                 // hbar omega_q / (k_B T)
  // meter
  KernelShape kernel = KernelShape::Box;
  double sigma_natural = 1.0;        // width in units of hbar omega_q
  // run
  long n_trials = 100000;
  std::uint64_t master_seed = 0;
  SweepAxis axis = SweepAxis::BetaSigma;
  std::vector<double> grid;
  // output
  std::string out_path = "sweep.csv";
  std::string format = "csv";
  bool quadrature_only = false;
};

inline double beta_natural_from_si(double omega_q_hz, double temperature_K) {
  return kHbar * (2.0 * kPi * omega_q_hz) / (kBoltzmann * temperature_K);
}

namespace detail {

inline double require_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path);
  return j.get<double>();
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::require_number;
  ExperimentConfig c;

  if (!j.contains("system") || !j["system"].is_object()) throw ValidationError("system");
  const auto& sys = j["system"];
  c.omega_q_hz = require_number(sys.value("omega_q_hz", nlohmann::json()), "system.omega_q_hz");
  if (!(c.omega_q_hz > 0.0)) throw ValidationError("system.omega_q_hz");
  if (sys.contains("Omega_R_hz"))
    c.rabi_ratio = require_number(sys["Omega_R_hz"], "system.Omega_R_hz") / c.omega_q_hz;
  if (sys.contains("psi_rad")) c.psi = require_number(sys["psi_rad"], "system.psi_rad");
  if (sys.contains("t_final")) {
    const auto& tf = sys["t_final"];
    if (!tf.is_object() || !tf.contains("value") || !tf.contains("units"))
      throw ValidationError("system.t_final");
    const double v = require_number(tf["value"], "system.t_final.value");
    const std::string units = tf["units"].get<std::string>();
    if (units == "natural")
      c.t_final_natural = v;
    else if (units == "seconds")
      c.t_final_natural = 2.0 * kPi * c.omega_q_hz * v;
    else
      throw ValidationError("system.t_final.units");
  }

  if (!j.contains("bath") || !j["bath"].is_object()) throw ValidationError("bath");
  const auto& bath = j["bath"];
  const bool has_t = bath.contains("temperature_K");
  const bool has_b = bath.contains("beta_natural");
  if (has_t == has_b) throw ValidationError("bath.temperature_K|beta_natural");
  if (has_t) {
    const double t = require_number(bath["temperature_K"], "bath.temperature_K");
    if (!(t > 0.0)) throw ValidationError("bath.temperature_K");
    c.beta = beta_natural_from_si(c.omega_q_hz, t);
  } else {
    c.beta = require_number(bath["beta_natural"], "bath.beta_natural");
    if (!(c.beta >= 0.0)) throw ValidationError("bath.beta_natural");
  }

  if (!j.contains("meter") || !j["meter"].is_object()) throw ValidationError("meter");
  const auto& meter = j["meter"];
  const std::string kernel = meter.value("kernel", std::string());
  if (kernel == "box")
    c.kernel = KernelShape::Box;
  else if (kernel == "gaussian")
    c.kernel = KernelShape::Gaussian;
  else
    throw ValidationError("meter.kernel");
  if (!meter.contains("sigma")) throw ValidationError("meter.sigma");
  c.sigma_natural = require_number(meter["sigma"], "meter.sigma");
  if (!(c.sigma_natural > 0.0)) throw ValidationError("meter.sigma");

  if (!j.contains("run") || !j["run"].is_object()) throw ValidationError("run");
  const auto& run = j["run"];
  if (run.contains("n_trials")) {
    if (!run["n_trials"].is_number_integer()) throw ValidationError("run.n_trials");
    c.n_trials = run["n_trials"].get<long>();
  }
  if (c.n_trials < 100) throw ValidationError("run.n_trials");
  if (run.contains("master_seed")) {
    if (!run["master_seed"].is_number_unsigned() && !run["master_seed"].is_number_integer())
      throw ValidationError("run.master_seed");
    c.master_seed = run["master_seed"].get<std::uint64_t>();
  }
  if (run.contains("sweep")) {
    const auto& sw = run["sweep"];
    const std::string axis = sw.value("axis", std::string());
    if (axis == "beta_sigma")
      c.axis = SweepAxis::BetaSigma;
    else if (axis == "rabi_ratio")
      c.axis = SweepAxis::RabiRatio;
    else
      throw ValidationError("run.sweep.axis");
    if (sw.contains("grid")) {
      if (!sw["grid"].is_array() || sw["grid"].empty()) throw ValidationError("run.sweep.grid");
      for (const auto& g : sw["grid"])
        c.grid.push_back(require_number(g, "run.sweep.grid"));
    } else {
      const double lo = require_number(sw.value("min", nlohmann::json()), "run.sweep.min");
      const double hi = require_number(sw.value("max", nlohmann::json()), "run.sweep.max");
      if (!sw.contains("points") || !sw["points"].is_number_integer())
        throw ValidationError("run.sweep.points");
      const int n = sw["points"].get<int>();
      if (n < 1 || !(hi >= lo)) throw ValidationError("run.sweep");
      const bool log_spaced = sw.value("log", false);
      for (int i = 0; i < n; ++i) {
        const double s = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
        c.grid.push_back(log_spaced ? lo * std::pow(hi / lo, s) : lo + (hi - lo) * s);
      }
    }
  } else {
    // no sweep block: single-point grid at the configured sigma / rabi ratio
    c.grid = {c.axis == SweepAxis::BetaSigma ? c.beta * c.sigma_natural : c.rabi_ratio};
  }

  if (j.contains("output")) {
    const auto& out = j["output"];
    if (out.contains("path")) c.out_path = out["path"].get<std::string>();
    if (out.contains("format")) c.format = out["format"].get<std::string>();
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config JSON parse failure: " + std::string(e.what()));
  }
  return config_from_json(j);
}

}  // namespace qwork
