#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qwork/errors.hpp"
#include "qwork/qcore.hpp"
#include "qwork/quadrature.hpp"
#include "qwork/rng.hpp"

namespace qwork {

enum class KernelShape { Box, Gaussian };

constexpr double kGaussianCut = 8.0;          // truncation, mass loss < 1e-15
constexpr double kOverlapRatio = 1e-12;       // Gaussian informative-region threshold
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Outcome-noise density g(f), centered at 0, width parameter sigma.
// Box: uniform on the half-open interval [-sigma/2, sigma/2).
// Gaussian: standard deviation sigma, truncated at +-8 sigma.
class MeasurementKernel {
 public:
  MeasurementKernel(KernelShape shape, double sigma) : shape_(shape), sigma_(sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      throw InvalidState("measurement kernel width must be positive and finite");
  }

  KernelShape shape() const { return shape_; }
  double sigma() const { return sigma_; }

  double support_lo() const {
    return shape_ == KernelShape::Box ? -0.5 * sigma_ : -kGaussianCut * sigma_;
  }
  double support_hi() const {
    return shape_ == KernelShape::Box ? 0.5 * sigma_ : kGaussianCut * sigma_;
  }

  double density(double f) const {
    if (shape_ == KernelShape::Box)
      return (f >= -0.5 * sigma_ && f < 0.5 * sigma_) ? 1.0 / sigma_ : 0.0;
    if (f < support_lo() || f > support_hi()) return 0.0;
    const double z = f / sigma_;
    return kInvSqrt2Pi / sigma_ * std::exp(-0.5 * z * z);
  }

  // One draw centered at 0; deterministic given the stream state.
  double draw(CounterRng& rng) const {
    if (shape_ == KernelShape::Box) return rng.uniform(-0.5 * sigma_, 0.5 * sigma_);
    double z = rng.gaussian();
    while (std::abs(z) > kGaussianCut) z = rng.gaussian();
    return sigma_ * z;
  }

 private:
  KernelShape shape_;
  double sigma_;
};

// Gbar(i*beta) = integral of g(f) e^{beta f} df, closed form.
// Box: (2/(beta sigma)) sinh(beta sigma / 2); Gaussian: exp(beta^2 sigma^2 / 2).
inline double meter_factor(const MeasurementKernel& k, double beta) {
  if (!(beta >= 0.0)) throw InvalidState("meter_factor: beta must be >= 0");
  if (k.shape() == KernelShape::Gaussian) {
    const double bs = beta * k.sigma();
    return std::exp(0.5 * bs * bs);
  }
  const double x = beta * k.sigma();
  if (x < 1e-8) return 1.0 + x * x / 24.0;
  return 2.0 * std::sinh(0.5 * x) / x;
}

// Gbar_i(i*beta) restricted to an interval: integral over [lo, hi] of
// g(f - mu) e^{beta (f - mu)} df, relative tolerance 1e-10.
inline double partial_meter_factor(const MeasurementKernel& k, double beta,
                                   double lo, double hi, double mu) {
  const double a = std::max(lo, mu + k.support_lo());
  const double b = std::min(hi, mu + k.support_hi());
  if (!(b > a)) return 0.0;
  auto integrand = [&](double f) { return k.density(f - mu) * std::exp(beta * (f - mu)); };
  return integrate_segments_rel(integrand, {{a, b}}, 1e-10);
}

struct Region {
  double lo;
  double hi;
  std::vector<int> levels;  // eigenvalue-group indices with non-negligible density
  bool informative;         // exactly one contributing level
};

// Partition of the outcome axis into informative and overlap intervals.
// Box supports are sharp; for the Gaussian a level is counted in a region
// when its density is within a factor 1e-12 of the locally dominant one.
// Half-open boundary convention: a boundary point belongs to the lower region.
inline std::vector<Region> classify_regions(const Observable& h,
                                            const MeasurementKernel& k) {
  const auto& groups = h.groups();
  const int n = static_cast<int>(groups.size());
  std::vector<double> cuts;
  for (const auto& g : groups) {
    cuts.push_back(g.value + k.support_lo());
    cuts.push_back(g.value + k.support_hi());
  }
  if (k.shape() == KernelShape::Gaussian) {
    // Dominance thresholds per level pair: the ratio of two equal-width
    // gaussians crosses kOverlapRatio at mid -/+ sigma^2 ln(1/ratio)/gap.
    const double l = std::log(1.0 / kOverlapRatio);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double gap = groups[j].value - groups[i].value;
        const double mid = 0.5 * (groups[i].value + groups[j].value);
        const double off = k.sigma() * k.sigma() * l / gap;
        cuts.push_back(mid - off);
        cuts.push_back(mid + off);
      }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<Region> regions;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double lo = cuts[c], hi = cuts[c + 1];
    if (!(hi > lo)) continue;
    const double mid = 0.5 * (lo + hi);
    double gmax = 0.0;
    std::vector<double> dens(n, 0.0);
    for (int i = 0; i < n; ++i) {
      dens[i] = k.density(mid - groups[i].value);
      gmax = std::max(gmax, dens[i]);
    }
    if (gmax <= 0.0) continue;
    std::vector<int> levels;
    for (int i = 0; i < n; ++i)
      if (dens[i] > kOverlapRatio * gmax) levels.push_back(i);
    if (!regions.empty() && regions.back().levels == levels &&
        regions.back().hi == lo) {
      regions.back().hi = hi;
    } else {
      regions.push_back({lo, hi, levels, levels.size() == 1});
    }
  }
  return regions;
}

struct OutcomeSample {
  double f;
  int branch;        // eigenvalue-group index drawn by the sampler (diagnostic)
  bool informative;  // outcome lies in a single-level region
};

// Unsharp measurement of an observable: POVM elements G^{1/2}(f|A) built from
// the kernel shifted to each eigenvalue group.
class UnsharpMeasurement {
 public:
  UnsharpMeasurement(MeasurementKernel kernel, Observable observable)
      : kernel_(kernel),
        observable_(std::move(observable)),
        regions_(classify_regions(observable_, kernel_)) {}

  const MeasurementKernel& kernel() const { return kernel_; }
  const Observable& observable() const { return observable_; }
  const std::vector<Region>& regions() const { return regions_; }

  // G^{1/2}(f|A) = sum_i sqrt(g(f - mu_i)) Pi_i
  Mat povm_sqrt(double f) const {
    const int d = observable_.dim();
    Mat m = Mat::Zero(d, d);
    for (const auto& g : observable_.groups()) {
      const double w = kernel_.density(f - g.value);
      if (w > 0.0) m += std::sqrt(w) * g.projector;
    }
    return m;
  }

  // P(f) = Tr G(f|A) rho = sum_i g(f - mu_i) Tr(Pi_i rho)
  double outcome_pdf(const DensityMatrix& rho, double f) const {
    if (rho.dim() != observable_.dim())
      throw DimensionMismatch("outcome_pdf: dimension mismatch");
    double p = 0.0;
    for (const auto& g : observable_.groups())
      p += kernel_.density(f - g.value) * (g.projector * rho.matrix()).trace().real();
    return p;
  }

  // rho(t+, f) = G^{1/2} rho G^{1/2} / P(f)
  DensityMatrix post_measurement_state(const DensityMatrix& rho, double f) const {
    const Mat m = povm_sqrt(f);
    Mat out = m * rho.matrix() * m.adjoint();
    const double tr = out.trace().real();
    if (tr < 1e-300)
      throw ImpossibleOutcome("post_measurement_state: outcome has vanishing probability");
    out /= tr;
    return DensityMatrix((out + out.adjoint()) / 2.0);
  }

  // Mixture sampling for initial states diagonal in the measured eigenbasis:
  // draw a group with probability Tr(Pi_i rho), then f = mu_i + kernel draw.
  // The marginal of f is exactly P(f).
  OutcomeSample sample_outcome(const DensityMatrix& rho, CounterRng& rng) const {
    if ((rho.matrix() - dephase(rho, observable_).matrix()).cwiseAbs().maxCoeff() > 1e-10)
      throw NonCommutingState(
          "sample_outcome: initial state must commute with the measured observable");
    const auto pops = observable_.populations(rho);
    const double u = rng.uniform();
    double acc = 0.0;
    int branch = static_cast<int>(pops.size()) - 1;
    for (std::size_t i = 0; i < pops.size(); ++i) {
      acc += pops[i];
      if (u < acc) {
        branch = static_cast<int>(i);
        break;
      }
    }
    const double f = observable_.groups()[branch].value + kernel_.draw(rng);
    bool informative = false;
    for (const auto& r : regions_)
      if (f >= r.lo && f < r.hi) {
        informative = r.informative;
        break;
      }
    return OutcomeSample{f, branch, informative};
  }

  // Max elementwise residual of integral G(f|A) df - identity, by quadrature
  // per eigenvalue group over its own (truncated) support.
  double completeness_residual() const {
    const int d = observable_.dim();
    Mat acc = Mat::Zero(d, d);
    for (const auto& g : observable_.groups()) {
      auto integrand = [&](double f) { return kernel_.density(f - g.value); };
      const double c = integrate_segments(
          integrand, {{g.value + kernel_.support_lo(), g.value + kernel_.support_hi()}}, 1e-12);
      acc += c * g.projector;
    }
    return (acc - Mat::Identity(d, d)).cwiseAbs().maxCoeff();
  }

 private:
  MeasurementKernel kernel_;
  Observable observable_;
  std::vector<Region> regions_;
};

}  // namespace qwork
