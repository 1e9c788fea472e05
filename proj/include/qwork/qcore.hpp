#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "qwork/errors.hpp"

namespace qwork {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using RealVec = Eigen::VectorXd;

// Internal units: hbar = k_B = 1, energies in a caller-declared reference
// hbar*omega_ref, times in 1/omega_ref.  Entropies are in nats.

constexpr double kEigenvalueFloor = 1e-14;  // eigenvalues below this are treated as 0 in logs
constexpr double kHermiticityTol = 1e-12;
constexpr double kGroupTol = 1e-12;  // degeneracy grouping, relative to spectral range

inline double hermiticity_residual(const Mat& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

// Positive unit-trace Hermitian matrix; validated on construction.
class DensityMatrix {
 public:
  explicit DensityMatrix(Mat m) : m_(std::move(m)) {
    if (m_.rows() < 1 || m_.rows() != m_.cols())
      throw InvalidState("density matrix must be square with dim >= 1");
    if (!m_.allFinite()) throw InvalidState("density matrix has non-finite entries");
    if (hermiticity_residual(m_) > kHermiticityTol)
      throw InvalidState("density matrix is not Hermitian within 1e-12");
    if (std::abs(m_.trace().real() - 1.0) > 1e-12 || std::abs(m_.trace().imag()) > 1e-12)
      throw InvalidState("density matrix trace is not 1 within 1e-12");
    Eigen::SelfAdjointEigenSolver<Mat> es(m_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12)
      throw InvalidState("density matrix has eigenvalue below -1e-12");
  }

  static DensityMatrix pure(const Eigen::VectorXcd& psi) {
    Eigen::VectorXcd n = psi / psi.norm();
    return DensityMatrix(n * n.adjoint());
  }

  static DensityMatrix maximally_mixed(int dim) {
    return DensityMatrix(Mat::Identity(dim, dim) / static_cast<double>(dim));
  }

  const Mat& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  Mat m_;
};

struct EigenGroup {
  double value;   // eigenvalue shared by the group
  Mat projector;  // orthogonal projector onto the eigenspace
  int rank;
};

// Hermitian operator with cached spectral decomposition grouped by eigenvalue.
class Observable {
 public:
  Observable(Mat m, std::vector<EigenGroup> groups)
      : m_(std::move(m)), groups_(std::move(groups)) {}

  const Mat& matrix() const { return m_; }
  const std::vector<EigenGroup>& groups() const { return groups_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  int num_groups() const { return static_cast<int>(groups_.size()); }

  double min_gap() const {
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < groups_.size(); ++i)
      g = std::min(g, groups_[i].value - groups_[i - 1].value);
    return g;
  }

  // Populations Tr(Pi_i rho) per group.
  std::vector<double> populations(const DensityMatrix& rho) const {
    if (rho.dim() != dim()) throw DimensionMismatch("populations: dimension mismatch");
    std::vector<double> p;
    p.reserve(groups_.size());
    for (const auto& g : groups_)
      p.push_back((g.projector * rho.matrix()).trace().real());
    return p;
  }

 private:
  Mat m_;
  std::vector<EigenGroup> groups_;
};

// Spectral decomposition with degeneracy grouping; eigenvalues ascending.
inline Observable spectral_decompose(const Mat& h, double group_tol = kGroupTol) {
  if (h.rows() != h.cols() || h.rows() < 1)
    throw NonHermitianInput("spectral_decompose: matrix must be square");
  if (hermiticity_residual(h) > kHermiticityTol)
    throw NonHermitianInput("spectral_decompose: input not Hermitian within 1e-12");
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const RealVec& w = es.eigenvalues();
  const Mat& v = es.eigenvectors();
  const double range = w(w.size() - 1) - w(0);
  const double tol = group_tol * std::max(range, 1.0);

  std::vector<EigenGroup> groups;
  int i = 0;
  const int n = static_cast<int>(w.size());
  while (i < n) {
    int j = i + 1;
    while (j < n && w(j) - w(j - 1) < tol) ++j;
    Mat proj = Mat::Zero(n, n);
    double mean = 0.0;
    for (int k = i; k < j; ++k) {
      proj += v.col(k) * v.col(k).adjoint();
      mean += w(k);
    }
    groups.push_back({mean / (j - i), std::move(proj), j - i});
    i = j;
  }
  return Observable(h, std::move(groups));
}

struct ThermalEnsemble {
  double beta;
  DensityMatrix state;
  double logZ;
  double freeEnergy;                 // F = -logZ / beta (0 declared at beta = 0)
  std::vector<double> populations;   // per eigenvalue group, Tr(Pi_i rho_th)
};

// Gibbs state exp(-beta H)/Z.  Populations are computed with a ground-level
// shift so exp never overflows for beta >= 0.
inline ThermalEnsemble gibbs_state(const Observable& h, double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw InvalidState("gibbs_state: beta must be finite and >= 0");
  const auto& groups = h.groups();
  const double mu0 = groups.front().value;
  double zs = 0.0;
  std::vector<double> weights;
  weights.reserve(groups.size());
  for (const auto& g : groups) {
    const double w = std::exp(-beta * (g.value - mu0));
    weights.push_back(w);
    zs += w * g.rank;
  }
  Mat rho = Mat::Zero(h.dim(), h.dim());
  std::vector<double> pops;
  pops.reserve(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double per_state = weights[i] / zs;
    rho += per_state * groups[i].projector;
    pops.push_back(per_state * groups[i].rank);
  }
  const double logZ = std::log(zs) - beta * mu0;
  const double freeEnergy = beta > 0.0 ? -logZ / beta : 0.0;
  return ThermalEnsemble{beta, DensityMatrix(rho), logZ, freeEnergy, std::move(pops)};
}

// S(rho) = -Tr rho ln rho, with 0 ln 0 := 0.
inline double von_neumann_entropy(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Mat> es(rho.matrix(), Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double p = es.eigenvalues()(i);
    if (p > kEigenvalueFloor) s -= p * std::log(p);
  }
  return s;
}

// S(rho||sigma) = Tr rho ln rho - Tr rho ln sigma.  Returns +inf when the
// support of rho leaks outside the support of sigma.
inline double relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim())
    throw DimensionMismatch("relative_entropy: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> er(rho.matrix());
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma.matrix());
  double tr_rho_ln_rho = 0.0;
  for (int i = 0; i < er.eigenvalues().size(); ++i) {
    const double p = er.eigenvalues()(i);
    if (p > kEigenvalueFloor) tr_rho_ln_rho += p * std::log(p);
  }
  double tr_rho_ln_sigma = 0.0;
  for (int j = 0; j < es.eigenvalues().size(); ++j) {
    const double q = es.eigenvalues()(j);
    const double weight =
        (es.eigenvectors().col(j).adjoint() * rho.matrix() * es.eigenvectors().col(j))(0).real();
    if (q < kEigenvalueFloor) {
      if (weight > 1e-12) return std::numeric_limits<double>::infinity();
      continue;
    }
    tr_rho_ln_sigma += weight * std::log(q);
  }
  return tr_rho_ln_rho - tr_rho_ln_sigma;
}

// Sum_i Pi_i rho Pi_i in the observable's projector groups; degenerate levels
// share one block so degenerate coherences survive.
inline DensityMatrix dephase(const DensityMatrix& rho, const Observable& h) {
  if (rho.dim() != h.dim()) throw DimensionMismatch("dephase: dimension mismatch");
  Mat out = Mat::Zero(rho.dim(), rho.dim());
  for (const auto& g : h.groups()) out += g.projector * rho.matrix() * g.projector;
  return DensityMatrix(std::move(out));
}

// Relative entropy of coherence C_H(rho) = S(rho_D) - S(rho).
inline double coherence(const DensityMatrix& rho, const Observable& h) {
  return von_neumann_entropy(dephase(rho, h)) - von_neumann_entropy(rho);
}

// Classical KL divergence between probability vectors, in nats.
inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw LengthMismatch("kl_divergence: length mismatch");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw NotNormalized("kl_divergence: negative entry");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-10 || std::abs(sq - 1.0) > 1e-10)
    throw NotNormalized("kl_divergence: inputs must sum to 1 within 1e-10");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 1e-12) continue;
    if (q[i] < kEigenvalueFloor) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

// Tr(H rho); the O(1e-10) imaginary residue of the trace is discarded.
inline double expectation(const Observable& h, const DensityMatrix& rho) {
  if (rho.dim() != h.dim()) throw DimensionMismatch("expectation: dimension mismatch");
  return (h.matrix() * rho.matrix()).trace().real();
}

inline double expectation(const Mat& h, const DensityMatrix& rho) {
  if (rho.dim() != h.rows()) throw DimensionMismatch("expectation: dimension mismatch");
  return (h * rho.matrix()).trace().real();
}

}  // namespace qwork
