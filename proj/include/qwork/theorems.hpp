#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "qwork/dynamics.hpp"
#include "qwork/errors.hpp"
#include "qwork/meter.hpp"
#include "qwork/qcore.hpp"
#include "qwork/quadrature.hpp"
#include "qwork/rng.hpp"

namespace qwork {

// Entropic bookkeeping of one conditioned final state.
struct TrialStats {
  double energy;     // Tr H(t1) rho(t1,f)
  double entropy;    // S(rho(t1,f))
  double s_re;       // S(rho(t1,f) || rho_th(t1))
  double coh;        // C_{H(t1)}(rho(t1,f))
  double dkl;        // D_KL(diag rho(t1,f) || diag rho_th(t1))
};

struct TrialRecord {
  double f;
  double work;       // Tr H(t1) rho(t1,f) - f
  double s_re;
  double dS;         // S(rho(t1,f)) - S(rho(t0))
  double dC;
  double dDKL;
  double dSR;        // S_re(t1) - S_re(t0)
  double weight;     // e^{beta(dF - W)}
  bool informative;
};

enum class XiMethod { MonteCarlo, Quadrature, ClosedFormNonOverlap, ClosedFormOverlap };

struct XiEstimate {
  double xi;
  double standard_error;  // 0 for deterministic methods
  long n_trials;          // 0 for deterministic methods
  XiMethod method;
  double quad_tol;        // relative tolerance for deterministic methods
};

// One driven measurement experiment: initial diagonal state, unsharp energy
// measurement of H(t0), unitary drive to t1, thermal reference path.
// All f-independent quantities (propagator, branch states and their entropic
// functionals, per-region caches for the box kernel) are precomputed here.
class SingleMeasurementSetup {
 public:
  static SingleMeasurementSetup build(const HamiltonianProtocol& protocol, double beta,
                                      const MeasurementKernel& kernel,
                                      std::optional<DensityMatrix> initial = std::nullopt,
                                      double step_control = 1e-10) {
    Observable h0 = spectral_decompose(protocol.h(protocol.t0));
    Observable h1 = spectral_decompose(protocol.h(protocol.t1));
    ThermalEnsemble th0 = gibbs_state(h0, beta);
    ThermalEnsemble th1 = gibbs_state(h1, beta);
    DensityMatrix rho0 = initial ? *initial : th0.state;
    if ((rho0.matrix() - dephase(rho0, h0).matrix()).cwiseAbs().maxCoeff() > 1e-10)
      throw NonCommutingState("setup: initial state must be diagonal in the H(t0) eigenbasis");
    Propagator prop = propagate(protocol, protocol.t0, protocol.t1, step_control);
    return SingleMeasurementSetup(std::move(h0), std::move(h1), std::move(th0),
                                  std::move(th1), std::move(rho0), kernel, std::move(prop),
                                  beta);
  }

  double beta() const { return beta_; }
  const Observable& h0() const { return h0_; }
  const Observable& h1() const { return h1_; }
  const ThermalEnsemble& thermal0() const { return thermal0_; }
  const ThermalEnsemble& thermal1() const { return thermal1_; }
  const DensityMatrix& rho0() const { return rho0_; }
  const UnsharpMeasurement& measurement() const { return measurement_; }
  const Propagator& propagator() const { return prop_; }
  double deltaF() const { return deltaF_; }
  double initial_energy() const { return E0_; }
  double initial_entropy() const { return S0_; }
  double initial_coherence() const { return C0_; }
  double initial_dkl() const { return dkl0_; }
  double initial_s_re() const { return Sre0_; }
  const std::vector<double>& branch_probs() const { return q_; }
  const std::vector<double>& branch_energies() const { return E1_; }
  const std::vector<double>& branch_s_re() const { return Sre1_; }
  const std::vector<double>& branch_entropies() const { return S1_; }
  const std::vector<DensityMatrix>& branch_states() const { return rho1_; }
  bool thermal_start() const { return thermal_start_; }

  // Entropic functionals of the conditioned evolved state for outcome f.
  // For the box kernel the state is constant per region, so stats are cached.
  TrialStats stats_for_outcome(double f) const {
    if (!region_stats_.empty()) {
      const auto& regions = measurement_.regions();
      for (std::size_t r = 0; r < regions.size(); ++r)
        if (f >= regions[r].lo && f < regions[r].hi) return region_stats_[r];
      throw ImpossibleOutcome("stats_for_outcome: f outside every kernel support");
    }
    return compute_stats(mixture_weights(f));
  }

  // Mixture weights w_i(f) = q_i g(f - mu_i)/P(f) over eigenvalue groups.
  std::vector<double> mixture_weights(double f) const {
    const auto& groups = h0_.groups();
    std::vector<double> w(groups.size(), 0.0);
    double pf = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      w[i] = q_[i] * measurement_.kernel().density(f - groups[i].value);
      pf += w[i];
    }
    if (pf < 1e-300)
      throw ImpossibleOutcome("mixture_weights: f outside every kernel support");
    for (auto& x : w) x /= pf;
    return w;
  }

  double outcome_pdf(double f) const { return measurement_.outcome_pdf(rho0_, f); }

 private:
  SingleMeasurementSetup(Observable h0, Observable h1, ThermalEnsemble th0,
                         ThermalEnsemble th1, DensityMatrix rho0,
                         const MeasurementKernel& kernel, Propagator prop, double beta)
      : beta_(beta),
        h0_(std::move(h0)),
        h1_(std::move(h1)),
        thermal0_(std::move(th0)),
        thermal1_(std::move(th1)),
        rho0_(std::move(rho0)),
        measurement_(kernel, h0_),
        prop_(std::move(prop)),
        deltaF_(thermal1_.freeEnergy - thermal0_.freeEnergy) {
    E0_ = expectation(h0_, rho0_);
    S0_ = von_neumann_entropy(rho0_);
    C0_ = coherence(rho0_, h0_);
    dkl0_ = kl_divergence(h0_.populations(rho0_), thermal0_.populations);
    Sre0_ = relative_entropy(rho0_, thermal0_.state);
    thermal_start_ =
        (rho0_.matrix() - thermal0_.state.matrix()).cwiseAbs().maxCoeff() < 1e-12;

    q_ = h0_.populations(rho0_);
    const auto& groups = h0_.groups();
    for (std::size_t i = 0; i < groups.size(); ++i) {
      Mat block = groups[i].projector * rho0_.matrix() * groups[i].projector;
      const double tr = block.trace().real();
      // Unreachable branches (q_i ~ 0) get the flat in-group state so every
      // entry stays well defined.
      Mat cond = tr > 1e-300 ? Mat(block / tr)
                             : Mat(groups[i].projector / static_cast<double>(groups[i].rank));
      DensityMatrix evolved = evolve_state(DensityMatrix((cond + cond.adjoint()) / 2.0), prop_);
      E1_.push_back(expectation(h1_, evolved));
      S1_.push_back(von_neumann_entropy(evolved));
      Sre1_.push_back(relative_entropy(evolved, thermal1_.state));
      rho1_.push_back(std::move(evolved));
    }
    if (measurement_.kernel().shape() == KernelShape::Box) {
      for (const auto& region : measurement_.regions()) {
        std::vector<double> w(groups.size(), 0.0);
        double qsum = 0.0;
        for (int lvl : region.levels) qsum += q_[lvl];
        for (int lvl : region.levels) w[lvl] = qsum > 0.0 ? q_[lvl] / qsum : 0.0;
        region_stats_.push_back(compute_stats(w));
      }
    }
  }

  TrialStats compute_stats(const std::vector<double>& w) const {
    Mat acc = Mat::Zero(h0_.dim(), h0_.dim());
    double energy = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      acc += w[i] * rho1_[i].matrix();
      energy += w[i] * E1_[i];
    }
    DensityMatrix state((acc + acc.adjoint()) / 2.0);
    TrialStats st;
    st.energy = energy;
    st.entropy = von_neumann_entropy(state);
    st.s_re = relative_entropy(state, thermal1_.state);
    st.coh = coherence(state, h1_);
    st.dkl = kl_divergence(h1_.populations(state), thermal1_.populations);
    return st;
  }

  double beta_;
  Observable h0_, h1_;
  ThermalEnsemble thermal0_, thermal1_;
  DensityMatrix rho0_;
  UnsharpMeasurement measurement_;
  Propagator prop_;
  double deltaF_;
  double E0_, S0_, C0_, dkl0_, Sre0_;
  bool thermal_start_;
  std::vector<double> q_;
  std::vector<DensityMatrix> rho1_;
  std::vector<double> E1_, S1_, Sre1_;
  std::vector<TrialStats> region_stats_;  // box kernel only; aligned with regions()
};

// Sample one outcome, condition, and book all entropic terms.
inline TrialRecord run_single_trial(const SingleMeasurementSetup& setup, CounterRng& rng) {
  const OutcomeSample s = setup.measurement().sample_outcome(setup.rho0(), rng);
  const TrialStats st = setup.stats_for_outcome(s.f);
  TrialRecord rec;
  rec.f = s.f;
  rec.work = st.energy - s.f;
  rec.s_re = st.s_re;
  rec.dS = st.entropy - setup.initial_entropy();
  rec.dC = st.coh - setup.initial_coherence();
  rec.dDKL = st.dkl - setup.initial_dkl();
  rec.dSR = st.s_re - setup.initial_s_re();
  rec.weight = std::exp(setup.beta() * (setup.deltaF() - rec.work));
  rec.informative = s.informative;
  return rec;
}

inline std::vector<TrialRecord> run_trials(const SingleMeasurementSetup& setup, long n,
                                           const RngStream& stream) {
  std::vector<TrialRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long t = 0; t < n; ++t) {
    CounterRng rng = stream.trial(static_cast<std::uint64_t>(t));
    out.push_back(run_single_trial(setup, rng));
  }
  return out;
}

struct MeanSe {
  double mean;
  double se;
};

inline MeanSe mean_with_se(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double m = pairwise_sum(xs) / n;
  std::vector<double> dev2(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) dev2[i] = (xs[i] - m) * (xs[i] - m);
  const double var = xs.size() > 1 ? pairwise_sum(dev2) / (n - 1.0) : 0.0;
  return {m, std::sqrt(var / n)};
}

// xi = ln(mean weight); the standard error follows by the delta method,
// se(xi) = se(mean)/mean.
inline XiEstimate xi_from_records(const std::vector<TrialRecord>& records) {
  std::vector<double> w(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) w[i] = records[i].weight;
  const MeanSe m = mean_with_se(w);
  return XiEstimate{std::log(m.mean), m.se / m.mean,
                    static_cast<long>(records.size()), XiMethod::MonteCarlo, 0.0};
}

inline XiEstimate xi_monte_carlo(const SingleMeasurementSetup& setup, long n,
                                 const RngStream& stream) {
  if (n < 100) throw InvalidState("xi_monte_carlo: n must be >= 100");
  return xi_from_records(run_trials(setup, n, stream));
}

// Deterministic route: adaptive quadrature of P(f) e^{beta(dF - W(f))} over the
// kernel-support partition, with the pointwise conditioned state for W(f).
inline XiEstimate xi_quadrature(const SingleMeasurementSetup& setup,
                                double rel_tol = 1e-8) {
  std::vector<Segment> segs;
  for (const auto& r : setup.measurement().regions()) segs.push_back({r.lo, r.hi});
  if (segs.empty()) throw QuadratureFailure("xi_quadrature: empty outcome support");
  const double beta = setup.beta();
  const double dF = setup.deltaF();
  const auto& e1 = setup.branch_energies();
  auto integrand = [&](double f) {
    const double pf = setup.outcome_pdf(f);
    if (pf <= 0.0) return 0.0;
    const auto w = setup.mixture_weights(f);
    double energy = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) energy += w[i] * e1[i];
    return pf * std::exp(beta * (dF - energy + f));
  };
  const double val = integrate_segments_rel(integrand, segs, rel_tol);
  if (!(val > 0.0) || !std::isfinite(val))
    throw QuadratureFailure("xi_quadrature: integral not positive finite");
  return XiEstimate{std::log(val), 0.0, 0, XiMethod::Quadrature, rel_tol};
}

namespace detail {

inline double logsumexp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace detail

// e^xi = Gbar(i beta) sum_i (q_i Z(t0) e^{beta mu_i}) e^{-S_re(i) - S(rho_i(t1))},
// valid when no two kernel supports overlap.  The entropy term is inert for
// non-degenerate levels (pure branch states) and keeps degenerate groups exact.
inline XiEstimate closed_form_nonoverlap(const SingleMeasurementSetup& setup) {
  for (const auto& r : setup.measurement().regions())
    if (!r.informative)
      throw RegimeViolation("closed_form_nonoverlap: kernel supports overlap");
  const double beta = setup.beta();
  std::vector<double> terms;
  const auto& groups = setup.h0().groups();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double q = setup.branch_probs()[i];
    if (q <= 0.0) continue;
    const double s_re = setup.branch_s_re()[i];
    if (std::isinf(s_re)) continue;  // e^{-inf} contributes 0
    terms.push_back(std::log(q) + setup.thermal0().logZ + beta * groups[i].value - s_re -
                    setup.branch_entropies()[i]);
  }
  const double xi =
      std::log(meter_factor(setup.measurement().kernel(), beta)) + detail::logsumexp(terms);
  return XiEstimate{xi, 0.0, 0, XiMethod::ClosedFormNonOverlap, 0.0};
}

// Two-level box-kernel overlap formula: the non-overlap part plus the
// correction from uninformative records,
//   e^xi = (2/bs) sinh(bs/2) (e^{-S1} + e^{-S2})
//        + (2/bs) (sinh(b*gap - bs/2) - sinh(bs/2))
//          (p1 e^{-S1} + p2 e^{-S2} - e^{-p1 S1 - p2 S2}),
// with bs = beta*sigma and gap = mu2 - mu1.  Thermal start only.
inline XiEstimate closed_form_overlap_box(const SingleMeasurementSetup& setup) {
  const auto& kernel = setup.measurement().kernel();
  if (kernel.shape() != KernelShape::Box)
    throw RegimeViolation("closed_form_overlap_box: box kernel required");
  if (setup.h0().num_groups() != 2)
    throw RegimeViolation("closed_form_overlap_box: two-level system required");
  if (!setup.thermal_start())
    throw RegimeViolation("closed_form_overlap_box: thermal initial state required");
  const double gap = setup.h0().min_gap();
  if (kernel.sigma() < gap)
    throw RegimeViolation("closed_form_overlap_box: sigma below the level gap");
  const double beta = setup.beta();
  const double bs = beta * kernel.sigma();
  const double s1 = setup.branch_s_re()[0];
  const double s2 = setup.branch_s_re()[1];
  const double p1 = setup.thermal0().populations[0];
  const double p2 = setup.thermal0().populations[1];
  const double nonov = meter_factor(kernel, beta) * (std::exp(-s1) + std::exp(-s2));
  const double pref = 2.0 / bs * (std::sinh(beta * gap - 0.5 * bs) - std::sinh(0.5 * bs));
  const double bracket =
      p1 * std::exp(-s1) + p2 * std::exp(-s2) - std::exp(-(p1 * s1 + p2 * s2));
  return XiEstimate{std::log(nonov + pref * bracket), 0.0, 0,
                    XiMethod::ClosedFormOverlap, 0.0};
}

struct HistogramSpec {
  double lo;
  double hi;
  int bins;
};

struct Histogram {
  HistogramSpec spec;
  std::vector<double> mass;  // sums to 1; out-of-range samples clamp to edge bins
};

inline Histogram work_distribution(const SingleMeasurementSetup& setup, long n,
                                   const HistogramSpec& spec, const RngStream& stream) {
  if (n < 1) throw InvalidState("work_distribution: n must be >= 1");
  Histogram h{spec, std::vector<double>(spec.bins, 0.0)};
  const double width = (spec.hi - spec.lo) / spec.bins;
  for (long t = 0; t < n; ++t) {
    CounterRng rng = stream.trial(static_cast<std::uint64_t>(t));
    const TrialRecord rec = run_single_trial(setup, rng);
    int b = static_cast<int>(std::floor((rec.work - spec.lo) / width));
    b = std::clamp(b, 0, spec.bins - 1);
    h.mass[static_cast<std::size_t>(b)] += 1.0;
  }
  for (auto& m : h.mass) m /= static_cast<double>(n);
  return h;
}

struct TrialAverages {
  double mean_dS, se_dS;
  double mean_dC, se_dC;
  double mean_dDKL, se_dDKL;
  double mean_dSR, se_dSR;
  double xi_product;           // xi re-evaluated from the product-form integrand
  double product_residual;     // max relative gap between product and direct weights
};

// Arithmetic means of the per-trial entropic increments, plus the product-form
// reassembly e^{beta(f - <H(t0)>)} e^{-dS} e^{-dC} e^{-dDKL} which must equal
// the direct weight trial by trial.
inline TrialAverages decompose_trial_average(const std::vector<TrialRecord>& records,
                                             const SingleMeasurementSetup& setup) {
  if (records.empty()) throw InvalidState("decompose_trial_average: empty record list");
  std::vector<double> ds, dc, dd, dsr, prod;
  ds.reserve(records.size());
  double max_rel = 0.0;
  for (const auto& r : records) {
    ds.push_back(r.dS);
    dc.push_back(r.dC);
    dd.push_back(r.dDKL);
    dsr.push_back(r.dSR);
    const double w =
        std::exp(setup.beta() * (r.f - setup.initial_energy()) - r.dS - r.dC - r.dDKL);
    prod.push_back(w);
    max_rel = std::max(max_rel, std::abs(w - r.weight) / r.weight);
  }
  const MeanSe ms = mean_with_se(ds);
  const MeanSe mc = mean_with_se(dc);
  const MeanSe md = mean_with_se(dd);
  const MeanSe mr = mean_with_se(dsr);
  const double xi_prod = std::log(pairwise_sum(prod) / static_cast<double>(prod.size()));
  return TrialAverages{ms.mean, ms.se, mc.mean, mc.se, md.mean, md.se,
                       mr.mean, mr.se, xi_prod, max_rel};
}

// Differential Shannon entropy -integral p ln p over the given segments.
inline double shannon_entropy(const std::function<double(double)>& pdf,
                              const std::vector<Segment>& segs, double rel_tol = 1e-8) {
  const double norm = integrate_segments_rel(pdf, segs, rel_tol);
  if (std::abs(norm - 1.0) > 1e-8)
    throw NotNormalized("shannon_entropy: density does not integrate to 1");
  auto integrand = [&](double f) {
    const double p = pdf(f);
    return p > kEigenvalueFloor ? -p * std::log(p) : 0.0;
  };
  return integrate_segments(integrand, segs, rel_tol);
}

// Predicted mean von Neumann entropy change over outcomes:
// <dS> = H_S(G(f|0)) - H_S(P(f)), both by quadrature.  Negative or zero; its
// magnitude is the Shannon information the record carries about the state.
inline double info_gain(const SingleMeasurementSetup& setup, double rel_tol = 1e-8) {
  const auto& kernel = setup.measurement().kernel();
  std::vector<Segment> ksegs{{kernel.support_lo(), kernel.support_hi()}};
  const double hg =
      shannon_entropy([&](double f) { return kernel.density(f); }, ksegs, rel_tol);
  std::vector<Segment> psegs;
  for (const auto& r : setup.measurement().regions()) psegs.push_back({r.lo, r.hi});
  const double hp =
      shannon_entropy([&](double f) { return setup.outcome_pdf(f); }, psegs, rel_tol);
  return hg - hp;
}

struct JensenCheck {
  bool pass;
  double slack;     // beta <W> - beta dF + xi
  double slack_se;
};

// Second-law bound beta <W> >= beta dF - xi (Jensen on the xi identity).
inline JensenCheck jensen_bound_check(const XiEstimate& estimate,
                                      const std::vector<TrialRecord>& records,
                                      const SingleMeasurementSetup& setup) {
  std::vector<double> w(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) w[i] = records[i].work;
  const MeanSe mw = mean_with_se(w);
  const double beta = setup.beta();
  const double slack = beta * mw.mean - beta * setup.deltaF() + estimate.xi;
  const double se = std::sqrt(beta * beta * mw.se * mw.se +
                              estimate.standard_error * estimate.standard_error);
  return JensenCheck{slack >= -3.0 * se, slack, se};
}

// Projective two-point baseline: W = nu - mu from two projective energy
// outcomes bracketing the drive.
inline double two_point_trial(const ThermalEnsemble& initial, const Observable& h0,
                              const Observable& h1, const Mat& u, CounterRng& rng) {
  const auto& g0 = h0.groups();
  double acc = 0.0;
  const double u1 = rng.uniform();
  int i = static_cast<int>(g0.size()) - 1;
  for (std::size_t k = 0; k < g0.size(); ++k) {
    acc += initial.populations[k];
    if (u1 < acc) {
      i = static_cast<int>(k);
      break;
    }
  }
  Mat proj = g0[static_cast<std::size_t>(i)].projector * initial.state.matrix() *
             g0[static_cast<std::size_t>(i)].projector;
  proj /= proj.trace().real();
  const Mat evolved = u * proj * u.adjoint();
  const auto& g1 = h1.groups();
  std::vector<double> pops(g1.size());
  for (std::size_t k = 0; k < g1.size(); ++k)
    pops[k] = (g1[k].projector * evolved).trace().real();
  const double u2 = rng.uniform();
  acc = 0.0;
  int j = static_cast<int>(g1.size()) - 1;
  for (std::size_t k = 0; k < g1.size(); ++k) {
    acc += pops[k];
    if (u2 < acc) {
      j = static_cast<int>(k);
      break;
    }
  }
  return g1[static_cast<std::size_t>(j)].value - g0[static_cast<std::size_t>(i)].value;
}

inline double two_point_trial(const SingleMeasurementSetup& setup, CounterRng& rng) {
  return two_point_trial(setup.thermal0(), setup.h0(), setup.h1(),
                         setup.propagator().u, rng);
}

}  // namespace qwork
