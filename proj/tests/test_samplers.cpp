#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pkbd/samplers.hpp"
#include "test_util.hpp"

using namespace pkbd;

namespace {

struct EfficiencyRow {
  int d;
  double rho;
  double vmf;
  double uniform;
};

const EfficiencyRow kEfficiencyTable[] = {
    {3, 0.1, 0.97661, 0.73636},  {3, 0.4, 0.60894, 0.25714},  {5, 0.1, 0.95492, 0.59645},
    {5, 0.3, 0.60808, 0.18469},  {10, 0.1, 0.90278, 0.35220}, {10, 0.3, 0.33698, 0.03104},
    {50, 0.1, 0.57614, 0.00521}, {50, 0.2, 0.08983, 0.00001}, {100, 0.1, 0.32863, 0.00003},
};

double round5(double x) { return std::round(x * 1e5) / 1e5; }

std::vector<double> cosines(const SampleBatch& b, const UnitVector& mu) {
  std::vector<double> t;
  t.reserve(b.points.size());
  for (const auto& p : b.points) t.push_back(dot(p, mu));
  return t;
}

// angle in [0, 2 pi) measured counter-clockwise from `phi`
std::vector<double> angles(const SampleBatch& b, double phi = 0.0) {
  std::vector<double> a;
  for (const auto& p : b.points) {
    double t = std::atan2(p[1], p[0]) - phi;
    t = std::fmod(t, 2 * std::numbers::pi);
    if (t < 0) t += 2 * std::numbers::pi;
    a.push_back(t);
  }
  return a;
}

}  // namespace

TEST(Uniform, UnitNormAndCentredCoordinates) {
  Rng rng(1);
  const std::size_t n = 100000;
  const auto b = sample_uniform(3, n, rng);
  ASSERT_EQ(b.points.size(), n);
  EXPECT_EQ(b.proposals_used, n);
  double sum[3] = {0, 0, 0};
  for (const auto& p : b.points) {
    EXPECT_NEAR(norm(p.coords()), 1.0, 1e-12);
    for (int c = 0; c < 3; ++c) sum[c] += p[c];
  }
  const double bound = 3.0 / std::sqrt(3.0 * n);
  for (double s : sum) EXPECT_LT(std::abs(s / n), bound);
}

TEST(Uniform, CircleAnglesAreUniform) {
  Rng rng(2);
  const auto a = angles(sample_uniform(2, 100000, rng));
  const double ks = testutil::ks_one_sample(a, [](double t) { return t / (2 * std::numbers::pi); });
  EXPECT_LT(ks, 0.01);
  EXPECT_THROW(sample_uniform(1, 10, rng), Error);
}

TEST(Vmf, MeanCosineInThreeDimensions) {
  Rng rng(3);
  const UnitVector mu = normalize(std::vector<double>{1.0, 2.0, -2.0});
  const auto t = cosines(sample_vmf({mu, 5.0}, 100000, rng), mu);
  double s = 0, s2 = 0;
  for (double v : t) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(t.size());
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  const double expected = 1.0 / std::tanh(5.0) - 0.2;
  EXPECT_NEAR(expected, 0.80009, 1e-5);
  EXPECT_LT(std::abs(mean - expected), 3 * se);
}

TEST(Vmf, ZeroConcentrationIsUniform) {
  Rng a(4), b(5);
  const UnitVector mu{0.0, 0.0, 1.0};
  const auto t1 = cosines(sample_vmf({mu, 0.0}, 50000, a), mu);
  const auto t2 = cosines(sample_uniform(3, 50000, b), mu);
  EXPECT_LT(testutil::ks_two_sample(t1, t2), 0.015);
}

TEST(CircleCdf, Examples) {
  for (double rho : {0.1, 0.5, 0.9}) EXPECT_NEAR(pkbd_cdf_circle(std::numbers::pi, rho), 0.5, 1e-12);
  EXPECT_EQ(pkbd_cdf_circle(0.0, 0.3), 0.0);
  EXPECT_NEAR(pkbd_cdf_circle(2 * std::numbers::pi - 1e-12, 0.3), 1.0, 1e-10);
  EXPECT_NEAR(pkbd_cdf_circle(std::numbers::pi / 2, 0.5), std::atan(3.0) / std::numbers::pi, 1e-14);
  EXPECT_NEAR(pkbd_cdf_circle(std::numbers::pi / 2, 0.5), 0.3976, 1e-4);
  EXPECT_NEAR(pkbd_cdf_circle(1.3, 1e-12), 1.3 / (2 * std::numbers::pi), 1e-10);
  EXPECT_THROW(pkbd_cdf_circle(1.0, 1.0), Error);
  for (double u : {0.01, 0.2, 0.5, 0.77, 0.999})
    for (double rho : {0.1, 0.5, 0.95})
      EXPECT_NEAR(pkbd_cdf_circle(pkbd_inverse_cdf_circle(u, rho), rho), u, 1e-12);
}

TEST(CircleCdf, IsMonotone) {
  double prev = -1.0;
  for (int i = 0; i <= 2000; ++i) {
    const double th = 2 * std::numbers::pi * i / 2000.0;
    const double f = pkbd_cdf_circle(th, 0.9);
    EXPECT_GE(f, prev - 1e-15);
    prev = f;
  }
}

TEST(CircleSampler, MatchesCdfAndMean) {
  Rng rng(6);
  const PkbdComponent c(UnitVector{1.0, 0.0}, 0.5);
  const auto b = sample_pkbd_circle(c, 100000, rng);
  EXPECT_EQ(b.proposals_used, 100000u);
  const auto a = angles(b);
  EXPECT_LT(testutil::ks_one_sample(a, [](double t) { return pkbd_cdf_circle(t, 0.5); }), 0.01);
  // wrapped Cauchy mean resultant length equals rho
  double cs = 0;
  for (double t : a) cs += std::cos(t);
  EXPECT_NEAR(cs / static_cast<double>(a.size()), 0.5, 0.01);
}

TEST(CircleSampler, ModeFollowsMu) {
  Rng rng(7);
  const UnitVector mu = normalize(std::vector<double>{-1.0, 1.0});
  const auto b = sample_pkbd_circle(PkbdComponent(mu, 0.7), 100000, rng);
  double sx = 0, sy = 0;
  for (const auto& p : b.points) {
    sx += p[0];
    sy += p[1];
  }
  const double err = std::atan2(sy, sx) - std::atan2(mu[1], mu[0]);
  EXPECT_LT(std::abs(err), std::numbers::pi / 180);
  EXPECT_THROW(sample_pkbd_circle(PkbdComponent(UnitVector{1.0, 0.0, 0.0}, 0.5), 1, rng), Error);
}

TEST(Envelope, ReproducesEfficiencyTable) {
  for (const auto& row : kEfficiencyTable) {
    const auto env = envelope_constants(row.rho, row.d);
    EXPECT_DOUBLE_EQ(env.kappa_rho, row.d * row.rho / (1 + row.rho * row.rho));
    EXPECT_GE(env.m_rho, 1.0);
    EXPECT_NEAR(env.efficiency * env.m_rho, 1.0, 1e-12);
    EXPECT_EQ(round5(env.efficiency), row.vmf) << "d=" << row.d << " rho=" << row.rho;
    EXPECT_EQ(round5(1.0 / uniform_envelope_constant(row.rho, row.d)), row.uniform)
        << "d=" << row.d << " rho=" << row.rho;
    EXPECT_GE(env.efficiency, 1.0 / uniform_envelope_constant(row.rho, row.d));
  }
  EXPECT_NEAR(1.0 / uniform_envelope_constant(1e-12, 5), 1.0, 1e-10);
  EXPECT_THROW(envelope_constants(0.0, 3), Error);
  EXPECT_THROW(envelope_constants(1.0, 3), Error);
  EXPECT_THROW(uniform_envelope_constant(-0.2, 3), Error);
}

TEST(Envelope, DominatesDensity) {
  Rng rng(8);
  for (const auto& row : kEfficiencyTable) {
    const auto env = envelope_constants(row.rho, row.d);
    const UnitVector mu = UnitVector::basis(static_cast<std::size_t>(row.d), 0);
    const PkbdComponent c(mu, row.rho);
    const double lcd = log_vmf_normalizer(row.d, env.kappa_rho);
    for (int i = 0; i < 2000; ++i) {
      const auto x = testutil::random_unit(static_cast<std::size_t>(row.d), rng);
      const double log_f = pkbd_log_density(x, c);
      EXPECT_LE(log_f, env.log_m_rho + lcd + env.kappa_rho * dot(x, mu) + 1e-9);
      EXPECT_LE(log_f, log_uniform_envelope_constant(row.rho, row.d) - log_surface_area(row.d) + 1e-9);
    }
    // both bounds are attained at the mode
    EXPECT_NEAR(pkbd_log_density(mu, c), env.log_m_rho + lcd + env.kappa_rho, 1e-9);
    EXPECT_NEAR(pkbd_log_density(mu, c), log_uniform_envelope_constant(row.rho, row.d) - log_surface_area(row.d),
                1e-9);
  }
}

TEST(Rejection, AcceptanceRateMatchesEfficiency) {
  Rng rng(9);
  const std::uint64_t proposals = 200000;
  for (const auto& [d, rho, envelope] :
       {std::tuple{3, 0.1, Envelope::Vmf}, std::tuple{10, 0.3, Envelope::Uniform},
        std::tuple{5, 0.3, Envelope::Vmf}}) {
    const double eff = envelope == Envelope::Vmf ? envelope_constants(rho, d).efficiency
                                                 : 1.0 / uniform_envelope_constant(rho, d);
    const PkbdComponent c(UnitVector::basis(static_cast<std::size_t>(d), 1), rho);
    const auto b = sample_pkbd_rejection(c, 1, envelope, rng, proposals);
    EXPECT_EQ(b.proposals_used, proposals);
    EXPECT_LT(std::abs(b.acceptance_rate() - eff), 3 * std::sqrt(eff * (1 - eff) / proposals))
        << "d=" << d << " rho=" << rho;
  }
}

TEST(Rejection, AgreesWithInversionOnCircle) {
  Rng a(10), b(11);
  const PkbdComponent c(UnitVector{0.0, 1.0}, 0.5);
  const auto inv = angles(sample_pkbd_circle(c, 50000, a));
  const auto rej = sample_pkbd_rejection(c, 50000, Envelope::Vmf, b);
  EXPECT_GE(rej.proposals_used, 50000u);
  EXPECT_LT(testutil::ks_two_sample(inv, angles(rej)), 0.015);
}

TEST(Rejection, EnvelopesAgree) {
  Rng a(12), b(13);
  const UnitVector mu{0.0, 0.0, 1.0};
  const PkbdComponent c(mu, 0.6);
  const auto t1 = cosines(sample_pkbd_rejection(c, 50000, Envelope::Vmf, a), mu);
  const auto t2 = cosines(sample_pkbd_rejection(c, 50000, Envelope::Uniform, b), mu);
  EXPECT_LT(testutil::ks_two_sample(t1, t2), 0.015);
}

TEST(Rejection, CosineMarginalMatchesDensity) {
  // For d = 3 the cosine t = x.mu has density 2 pi f(t), so its CDF is
  // (1 - rho^2)/(2 rho) * (1/(1 + rho^2 - 2 rho t)^{1/2} - 1/(1 + rho))
  Rng rng(14);
  const double rho = 0.7;
  const UnitVector mu = normalize(std::vector<double>{1.0, 1.0, 1.0});
  const auto t = cosines(sample_pkbd(PkbdComponent(mu, rho), 50000, rng), mu);
  const auto cdf = [rho](double x) {
    return (1 - rho * rho) / (2 * rho) * (1.0 / std::sqrt(1 + rho * rho - 2 * rho * x) - 1.0 / (1 + rho));
  };
  EXPECT_NEAR(cdf(1.0), 1.0, 1e-12);
  EXPECT_LT(testutil::ks_one_sample(t, cdf), 0.01);
}

TEST(Rejection, RotationEquivariance) {
  Rng rng(15), ra(16), rb(17);
  const std::size_t d = 4;
  const auto q = testutil::random_rotation(d, rng);
  const UnitVector mu = UnitVector::basis(d, 0);
  const UnitVector mu_rot = testutil::rotate(q, mu.coords());
  const PkbdComponent c(mu, 0.5);
  const PkbdComponent c_rot(mu_rot, 0.5);
  const auto base = sample_pkbd(c, 30000, ra);
  std::vector<double> rotated;
  for (const auto& p : base.points) rotated.push_back(dot(testutil::rotate(q, p.coords()), mu_rot));
  const auto direct = cosines(sample_pkbd(c_rot, 30000, rb), mu_rot);
  EXPECT_LT(testutil::ks_two_sample(rotated, direct), 0.02);
}

TEST(Rejection, ReportsHopelessEnvelopes) {
  Rng rng(18);
  EXPECT_THROW(sample_pkbd(PkbdComponent(UnitVector::basis(100, 0), 0.9), 10, rng), Error);
  try {
    sample_pkbd_rejection(PkbdComponent(UnitVector::basis(100, 0), 0.5), 10, Envelope::Uniform, rng);
    FAIL() << "expected EfficiencyTooLow";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EfficiencyTooLow);
  }
}

TEST(Samplers, SameSeedSameDraws) {
  Rng a(99), b(99);
  const PkbdComponent c(UnitVector{0.0, 1.0, 0.0}, 0.8);
  const auto x = sample_pkbd(c, 100, a);
  const auto y = sample_pkbd(c, 100, b);
  ASSERT_EQ(x.points.size(), y.points.size());
  for (std::size_t i = 0; i < x.points.size(); ++i) EXPECT_EQ(x.points[i], y.points[i]);
  EXPECT_EQ(x.seed, 99u);
}
