#pragma once

#include <Eigen/SVD>
#include <cmath>
#include <functional>

#include "qwork/errors.hpp"
#include "qwork/qcore.hpp"

namespace qwork {

// Time-dependent Hamiltonian, natural units (hbar = 1, energy in hbar*omega_ref,
// time in 1/omega_ref).
struct HamiltonianProtocol {
  int dim;
  double t0;
  double t1;
  std::function<Mat(double)> h;
};

// H(tau) = sigma_z/2 + (Omega_R/omega_q) sigma_y cos(tau + psi), with
// tau = omega_q t.  Integrating in tau keeps step sizes O(1); the physical
// Rabi amplitude enters only through the ratio.
inline HamiltonianProtocol rabi_protocol(double rabi_ratio, double psi, double t_final) {
  Mat sz2(2, 2), sy(2, 2);
  sz2 << 0.5, 0.0, 0.0, -0.5;
  sy << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return HamiltonianProtocol{
      2, 0.0, t_final,
      [sz2, sy, rabi_ratio, psi](double tau) -> Mat {
        return sz2 + rabi_ratio * std::cos(tau + psi) * sy;
      }};
}

struct Propagator {
  Mat u;
  double t0;
  double t1;
  double unitarity_drift;  // ||U+U - 1||_max before re-unitarization (diagnostic)
};

namespace detail {

// Classic RK4 on dU/dt = -i H(t) U with n fixed steps.
inline Mat rk4_propagate(const HamiltonianProtocol& p, double t0, double t1, long n) {
  const Complex mi(0.0, -1.0);
  const double dt = (t1 - t0) / static_cast<double>(n);
  Mat u = Mat::Identity(p.dim, p.dim);
  for (long s = 0; s < n; ++s) {
    const double t = t0 + dt * static_cast<double>(s);
    const Mat h1 = p.h(t);
    const Mat h2 = p.h(t + 0.5 * dt);
    const Mat h3 = p.h(t + dt);
    const Mat k1 = mi * (h1 * u);
    const Mat k2 = mi * (h2 * (u + 0.5 * dt * k1));
    const Mat k3 = mi * (h2 * (u + 0.5 * dt * k2));
    const Mat k4 = mi * (h3 * (u + dt * k3));
    u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return u;
}

// Closest unitary in Frobenius norm (polar projection via SVD).
inline Mat polar_unitary(const Mat& u) {
  Eigen::JacobiSVD<Mat> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

}  // namespace detail

// Fixed-step RK4 with step halving until successive refinements agree within
// step_control in max norm.  The result is re-unitarized by polar projection
// when the drift exceeds 1e-12; the raw drift is kept as a diagnostic.
inline Propagator propagate(const HamiltonianProtocol& p, double t0, double t1,
                            double step_control = 1e-10) {
  if (!(t1 >= t0)) throw InvalidState("propagate: t1 must be >= t0");
  if (t1 == t0)
    return Propagator{Mat::Identity(p.dim, p.dim), t0, t1, 0.0};
  constexpr long kMaxSteps = 1L << 22;
  long n = 16;
  Mat prev = detail::rk4_propagate(p, t0, t1, n);
  while (true) {
    n *= 2;
    if (n > kMaxSteps)
      throw NoConvergence("propagate: step count exceeded 2^22 without convergence");
    Mat next = detail::rk4_propagate(p, t0, t1, n);
    const double diff = (next - prev).cwiseAbs().maxCoeff();
    prev = std::move(next);
    if (diff < step_control) break;
  }
  const double drift =
      (prev.adjoint() * prev - Mat::Identity(p.dim, p.dim)).cwiseAbs().maxCoeff();
  Mat u = drift > 1e-12 ? detail::polar_unitary(prev) : prev;
  return Propagator{std::move(u), t0, t1, drift};
}

// U rho U+
inline DensityMatrix evolve_state(const DensityMatrix& rho, const Propagator& prop) {
  if (rho.dim() != prop.u.rows())
    throw DimensionMismatch("evolve_state: dimension mismatch");
  Mat out = prop.u * rho.matrix() * prop.u.adjoint();
  return DensityMatrix((out + out.adjoint()) / 2.0);
}

}  // namespace qwork
