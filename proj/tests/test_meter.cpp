#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

using namespace qwork;

namespace {

Observable qubit_h0() { return spectral_decompose(0.5 * testutil::pauli_z()); }

}  // namespace

TEST_CASE("box kernel density: half-open uniform window") {
  MeasurementKernel k(KernelShape::Box, 2.0);
  CHECK(k.density(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(k.density(-1.0) == doctest::Approx(0.5).epsilon(1e-15));  // lower edge included
  CHECK(k.density(0.999) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(k.density(1.0) == 0.0);                                    // upper edge excluded
  CHECK(k.density(1.5) == 0.0);
  CHECK(k.support_lo() == -1.0);
  CHECK(k.support_hi() == 1.0);
}

TEST_CASE("gaussian kernel density: peak value and symmetry") {
  MeasurementKernel k(KernelShape::Gaussian, 1.0);
  CHECK(k.density(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-14));
  CHECK(k.density(0.7) == doctest::Approx(k.density(-0.7)).epsilon(1e-14));
  MeasurementKernel k2(KernelShape::Gaussian, 2.0);
  CHECK(k2.density(0.0) == doctest::Approx(0.5 * 0.3989422804014327).epsilon(1e-14));
  CHECK(k2.density(17.0) == 0.0);  // beyond the 8 sigma truncation
}

TEST_CASE("kernel construction rejects non-positive width") {
  CHECK_THROWS_AS((MeasurementKernel(KernelShape::Box, 0.0)), InvalidState);
  CHECK_THROWS_AS((MeasurementKernel(KernelShape::Gaussian, -1.0)), InvalidState);
}

TEST_CASE("kernel densities integrate to 1") {
  for (auto shape : {KernelShape::Box, KernelShape::Gaussian}) {
    for (double sigma : {0.3, 1.0, 2.5}) {
      MeasurementKernel k(shape, sigma);
      const double mass = integrate_segments(
          [&](double f) { return k.density(f); },
          {{k.support_lo(), k.support_hi()}}, 1e-12);
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("kernel draws match the declared moments") {
  CounterRng rng(12345);
  MeasurementKernel box(KernelShape::Box, 2.0);
  double sum = 0.0, sum2 = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const double f = box.draw(rng);
    CHECK(f >= -1.0);
    CHECK(f < 1.0);
    sum += f;
    sum2 += f * f;
  }
  // Var = sigma^2/12 = 1/3; 4-sigma bands on the sample mean / second moment.
  CHECK(std::abs(sum / n) < 4.0 * std::sqrt(1.0 / 3.0 / n));
  CHECK(std::abs(sum2 / n - 1.0 / 3.0) < 0.01);

  MeasurementKernel gauss(KernelShape::Gaussian, 1.5);
  sum = 0.0;
  sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = gauss.draw(rng);
    sum += f;
    sum2 += f * f;
  }
  CHECK(std::abs(sum / n) < 4.0 * 1.5 / std::sqrt(n));
  CHECK(std::abs(sum2 / n - 2.25) < 0.1);
}

TEST_CASE("exponential tilt factor: closed forms") {
  MeasurementKernel box(KernelShape::Box, 2.0);
  // (2/x) sinh(x/2) at x = 2
  CHECK(meter_factor(box, 1.0) == doctest::Approx(1.1752011936438014).epsilon(1e-14));
  CHECK(meter_factor(box, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  MeasurementKernel gauss(KernelShape::Gaussian, 1.0);
  CHECK(meter_factor(gauss, 1.0) == doctest::Approx(1.6487212707001282).epsilon(1e-14));
  CHECK(meter_factor(gauss, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("exponential tilt factor: box matches quadrature, small-x series branch") {
  for (double sigma : {0.4, 1.0, 3.0}) {
    MeasurementKernel k(KernelShape::Box, sigma);
    for (double beta : {0.3, 1.0, 2.2422749}) {
      const double q = partial_meter_factor(k, beta, k.support_lo(), k.support_hi(), 0.0);
      CHECK(meter_factor(k, beta) == doctest::Approx(q).epsilon(1e-9));
    }
  }
  MeasurementKernel tiny(KernelShape::Box, 1e-10);
  CHECK(meter_factor(tiny, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("exponential tilt factor: gaussian matches an untruncated quadrature oracle") {
  // Independent oracle: integrate the analytic normal density times e^{beta f}
  // over a window centered on the tilted mean beta*sigma^2, which is where the
  // integrand mass actually sits.
  const double sigma = 1.0, beta = 3.0;
  auto integrand = [&](double f) {
    return 0.3989422804014327 / sigma * std::exp(-0.5 * f * f / (sigma * sigma)) *
           std::exp(beta * f);
  };
  const double center = beta * sigma * sigma;
  const double oracle =
      integrate_segments_rel(integrand, {{center - 10.0 * sigma, center + 10.0 * sigma}}, 1e-12);
  MeasurementKernel k(KernelShape::Gaussian, sigma);
  CHECK(meter_factor(k, beta) == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(oracle == doctest::Approx(std::exp(4.5)).epsilon(1e-10));
}

TEST_CASE("restricted tilt factor: box window example") {
  MeasurementKernel k(KernelShape::Box, 2.0);
  // integral over [0,1] of (1/2) e^f df = (e-1)/2
  CHECK(partial_meter_factor(k, 1.0, 0.0, 1.0, 0.0) ==
        doctest::Approx(0.85914091422952261).epsilon(1e-9));
  CHECK(partial_meter_factor(k, 1.0, 5.0, 6.0, 0.0) == 0.0);
}

TEST_CASE("region classification: narrow box gives two informative islands") {
  const auto regions = classify_regions(qubit_h0(), MeasurementKernel(KernelShape::Box, 0.5));
  REQUIRE(regions.size() == 2);
  CHECK(regions[0].lo == doctest::Approx(-0.75));
  CHECK(regions[0].hi == doctest::Approx(-0.25));
  CHECK(regions[0].levels == std::vector<int>{0});
  CHECK(regions[0].informative);
  CHECK(regions[1].lo == doctest::Approx(0.25));
  CHECK(regions[1].hi == doctest::Approx(0.75));
  CHECK(regions[1].levels == std::vector<int>{1});
  CHECK(regions[1].informative);
}

TEST_CASE("region classification: wide box has a central overlap band") {
  const auto regions = classify_regions(qubit_h0(), MeasurementKernel(KernelShape::Box, 2.0));
  REQUIRE(regions.size() == 3);
  CHECK(regions[0].informative);
  CHECK(regions[0].levels == std::vector<int>{0});
  CHECK(regions[1].lo == doctest::Approx(-0.5));
  CHECK(regions[1].hi == doctest::Approx(0.5));
  CHECK(regions[1].levels == std::vector<int>{0, 1});
  CHECK_FALSE(regions[1].informative);
  CHECK(regions[2].informative);
  CHECK(regions[2].levels == std::vector<int>{1});
}

TEST_CASE("region classification: box at the gap width stays informative") {
  // Supports touch but do not overlap (half-open windows).
  const auto regions = classify_regions(qubit_h0(), MeasurementKernel(KernelShape::Box, 1.0));
  REQUIRE(regions.size() == 2);
  CHECK(regions[0].informative);
  CHECK(regions[1].informative);
  CHECK(regions[0].hi == doctest::Approx(0.0));
  CHECK(regions[1].lo == doctest::Approx(0.0));
}

TEST_CASE("region classification: narrow gaussian is informative except near the midpoint") {
  const auto regions =
      classify_regions(qubit_h0(), MeasurementKernel(KernelShape::Gaussian, 0.1));
  bool has_informative = false, has_overlap = false;
  double overlap_width = 0.0;
  for (const auto& r : regions) {
    if (r.informative)
      has_informative = true;
    else {
      has_overlap = true;
      overlap_width += r.hi - r.lo;
    }
  }
  CHECK(has_informative);
  CHECK(has_overlap);
  // Dominance band half-width sigma^2 ln(1e12)/gap = 0.01*27.6 ~ 0.28
  CHECK(overlap_width < 0.6);
}

TEST_CASE("povm square root: equal-density point is proportional to identity") {
  UnsharpMeasurement m(MeasurementKernel(KernelShape::Box, 2.0), qubit_h0());
  const Mat s = m.povm_sqrt(0.0);
  CHECK((s - std::sqrt(0.5) * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
  // Only the upper level contributes at f = 1.2; for sigma_z/2 its
  // eigenvector is the first basis vector.
  const Mat edge = m.povm_sqrt(1.2);
  CHECK(std::abs(edge(1, 1)) < 1e-15);
  CHECK(std::abs(edge(0, 0).real() - std::sqrt(0.5)) < 1e-14);
}

TEST_CASE("povm completeness residual") {
  for (auto shape : {KernelShape::Box, KernelShape::Gaussian}) {
    for (double sigma : {0.5, 2.0}) {
      UnsharpMeasurement m(MeasurementKernel(shape, sigma), qubit_h0());
      CHECK(m.completeness_residual() < 1e-8);
    }
  }
}

TEST_CASE("outcome pdf: wide box over a thermal state") {
  const Observable h0 = qubit_h0();
  const double beta = testutil::ref_beta();
  const auto th = gibbs_state(h0, beta);
  UnsharpMeasurement m(MeasurementKernel(KernelShape::Box, 2.0), h0);
  const double pg = 1.0 / (1.0 + std::exp(-beta));
  // Overlap zone: both levels contribute with density 1/2 each.
  CHECK(m.outcome_pdf(th.state, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  // Informative zones carry only one population.
  CHECK(m.outcome_pdf(th.state, -1.0) == doctest::Approx(0.5 * pg).epsilon(1e-12));
  CHECK(m.outcome_pdf(th.state, 1.0) == doctest::Approx(0.5 * (1.0 - pg)).epsilon(1e-12));
  CHECK(m.outcome_pdf(th.state, 3.0) == 0.0);
  // Normalizes to 1 over the full support.
  const double norm = integrate_segments(
      [&](double f) { return m.outcome_pdf(th.state, f); }, {{-1.5, -0.5}, {-0.5, 0.5}, {0.5, 1.5}},
      1e-12);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("post-measurement state: informative outcome projects, overlap outcome mixes") {
  const Observable h0 = qubit_h0();
  const double beta = testutil::ref_beta();
  const auto th = gibbs_state(h0, beta);
  UnsharpMeasurement m(MeasurementKernel(KernelShape::Box, 2.0), h0);

  // f = 1.2 only touches the upper level: the state collapses onto it.
  const DensityMatrix up = m.post_measurement_state(th.state, 1.2);
  CHECK((up.matrix() - h0.groups()[1].projector).cwiseAbs().maxCoeff() < 1e-12);

  // In the equal-density overlap zone the thermal state is a fixed point.
  const DensityMatrix mid = m.post_measurement_state(th.state, 0.0);
  CHECK((mid.matrix() - th.state.matrix()).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS((void)m.post_measurement_state(th.state, 5.0), ImpossibleOutcome);
}

TEST_CASE("sampling rejects states with coherence in the measured basis") {
  UnsharpMeasurement m(MeasurementKernel(KernelShape::Box, 2.0), qubit_h0());
  Eigen::VectorXcd plus(2);
  plus << 1.0, 1.0;
  CounterRng rng(7);
  CHECK_THROWS_AS((void)m.sample_outcome(DensityMatrix::pure(plus), rng), NonCommutingState);
}

TEST_CASE("sampled outcomes: branch frequencies and empirical CDF match the pdf") {
  const Observable h0 = qubit_h0();
  const double beta = testutil::ref_beta();
  const auto th = gibbs_state(h0, beta);
  MeasurementKernel k(KernelShape::Box, 2.0);
  UnsharpMeasurement m(k, h0);
  const double pg = th.populations[0];

  const long n = 50000;
  RngStream stream(99, 0);
  std::vector<double> fs;
  fs.reserve(n);
  long ground = 0;
  for (long t = 0; t < n; ++t) {
    CounterRng rng = stream.trial(static_cast<std::uint64_t>(t));
    const OutcomeSample s = m.sample_outcome(th.state, rng);
    fs.push_back(s.f);
    if (s.branch == 0) ++ground;
    // The informative flag must agree with the region the outcome fell in.
    CHECK(s.informative == (s.f < -0.5 || s.f >= 0.5));
  }
  const double se = std::sqrt(pg * (1.0 - pg) / n);
  CHECK(std::abs(static_cast<double>(ground) / n - pg) < 4.0 * se);

  std::sort(fs.begin(), fs.end());
  auto cdf = [&](double x) {
    std::vector<Segment> below;
    for (const auto& r : m.regions())
      if (r.lo < x) below.push_back({r.lo, std::min(r.hi, x)});
    return integrate_segments([&](double f) { return m.outcome_pdf(th.state, f); }, below, 1e-10);
  };
  double ks = 0.0;
  for (std::size_t i = 0; i < fs.size(); i += 125) {
    const double c = cdf(fs[i]);
    ks = std::max({ks, std::abs(c - static_cast<double>(i) / n),
                   std::abs(c - static_cast<double>(i + 1) / n)});
  }
  CHECK(ks < 0.01);
}
