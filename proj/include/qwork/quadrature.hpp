#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qwork/errors.hpp"

namespace qwork {

// Pairwise (cascade) summation.  Keeps the floating-point error of large
// reductions at O(log n) ulps so Monte Carlo reductions stay reproducible
// and accurate at n = 1e5 and beyond.
inline double pairwise_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& xs) {
  return pairwise_sum(std::span<const double>(xs));
}

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a,
                      double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_step(const std::function<double(double)>& f, double a,
                            double fa, double b, double fb, double fm,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(f, a, fa, m, fm, flm);
  const double right = simpson(f, m, fm, b, fb, frm);
  const double err = left + right - whole;
  if (std::abs(err) <= 15.0 * tol || (b - a) < 1e-14 * (1.0 + std::abs(a)))
    return left + right + err / 15.0;
  if (depth <= 0)
    throw QuadratureFailure("adaptive Simpson recursion limit exceeded");
  return adaptive_step(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with an absolute tolerance.  Integrands with kinks must be
// split at the kink by the caller (see integrate_segments).
inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double abs_tol = 1e-10, int max_depth = 60) {
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = detail::simpson(f, a, fa, b, fb, fm);
  return detail::adaptive_step(f, a, fa, b, fb, fm, whole, abs_tol, max_depth);
}

struct Segment {
  double lo;
  double hi;
};

// Integrate over a union of disjoint intervals, splitting adaptivity per
// segment.  The tolerance is absolute and divided evenly among segments.
inline double integrate_segments(const std::function<double(double)>& f,
                                 const std::vector<Segment>& segs,
                                 double abs_tol = 1e-10) {
  if (segs.empty()) return 0.0;
  std::vector<double> parts;
  parts.reserve(segs.size());
  const double tol = abs_tol / static_cast<double>(segs.size());
  for (const auto& s : segs) parts.push_back(integrate(f, s.lo, s.hi, tol));
  return pairwise_sum(parts);
}

// Relative-tolerance wrapper: one rough pass to fix the scale, then a refined
// pass at abs_tol = rel_tol * max(|rough|, floor).
inline double integrate_segments_rel(const std::function<double(double)>& f,
                                     const std::vector<Segment>& segs,
                                     double rel_tol, double floor = 1e-30) {
  const double rough = integrate_segments(f, segs, 1e-6);
  const double scale = std::max(std::abs(rough), floor);
  return integrate_segments(f, segs, rel_tol * scale);
}

}  // namespace qwork
