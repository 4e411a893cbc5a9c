#include "wits/gaussian_core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace wits;

namespace {

// Truncated standard-normal moments by composite Simpson in long double, with
// the density scaled by its value at the end nearest the origin so that far
// tails stay representable. Returns {log mass, mean, var}.
struct OracleMoments {
    long double log_mass, mean, var;
};

OracleMoments simpson_moments(double a, double b) {
    const long double lo = std::isfinite(a) ? a : (std::isfinite(b) ? b - 40.0L : -40.0L);
    const long double hi = std::isfinite(b) ? b : (std::isfinite(a) ? a + 40.0L : 40.0L);
    const long double x0 = (lo <= 0 && hi >= 0) ? 0.0L : (lo > 0 ? lo : hi);
    const int n = 200000;
    const long double h = (hi - lo) / n;
    long double s0 = 0, s1 = 0, s2 = 0;
    for (int i = 0; i <= n; ++i) {
        const long double x = lo + h * i;
        const long double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        const long double f = std::exp(-(x * x - x0 * x0) / 2);
        s0 += w * f;
        s1 += w * f * (x - x0);
        s2 += w * f * (x - x0) * (x - x0);
    }
    s0 *= h / 3;
    s1 *= h / 3;
    s2 *= h / 3;
    const long double m = s1 / s0;
    return {std::log(s0) - x0 * x0 / 2 - 0.918938533204672741780329736406L, x0 + m, s2 / s0 - m * m};
}

} // namespace

TEST(GaussianCore, CcdfMatchesErfcInTheBody) {
    for (double x = -7.5; x <= 7.5; x += 0.37)
        EXPECT_NEAR(std_ccdf(x), 0.5 * std::erfc(x / std::sqrt(2.0)), 1e-16 + 1e-14 * std_ccdf(x));
}

TEST(GaussianCore, LogCcdfFarTailMatchesAsymptoticSeries) {
    for (double x : {30.0, 100.0, 1e3}) {
        const double x2 = x * x;
        const double series = 1 - 1 / x2 + 3 / (x2 * x2) - 15 / (x2 * x2 * x2) + 105 / (x2 * x2 * x2 * x2);
        const double ref = -0.5 * x2 - std::log(x) - 0.5 * std::log(2 * M_PI) + std::log(series);
        EXPECT_NEAR(log_std_ccdf(x), ref, 1e-12 * std::abs(ref));
    }
}

TEST(GaussianCore, LogCcdfPastSwitchMatchesErfc) {
    // erfc keeps full relative precision until it underflows near x = 37
    for (double x : {8.5, 12.0, 20.0, 30.0})
        EXPECT_NEAR(log_std_ccdf(x), std::log(0.5 * std::erfc(x / std::sqrt(2.0))), 1e-13 * x * x);
}

TEST(GaussianCore, MillsRatioContinuousAtSwitch) {
    const double h = 8.0;
    EXPECT_NEAR(mills_ratio(std::nextafter(h, 0.0)), mills_ratio(std::nextafter(h, 20.0)), 1e-12);
}

TEST(GaussianCore, LogSumExpIsShiftInvariant) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> xs(1 + rep % 9);
        double direct = 0;
        for (auto& x : xs) {
            x = u(gen);
            direct += std::exp(x);
        }
        EXPECT_NEAR(log_sum_exp(xs), std::log(direct), 1e-13);
        std::vector<double> shifted = xs;
        for (auto& x : shifted)
            x -= 1e4;
        EXPECT_NEAR(log_sum_exp(shifted), std::log(direct) - 1e4, 1e-9);
    }
    EXPECT_EQ(log_sum_exp(std::vector<double>{}), -kInf);
}

TEST(GaussianCore, GaussLegendreIntegratesPolynomialsExactly) {
    for (int n : {2, 5, 16, 64}) {
        const auto& rule = gauss_legendre(n);
        for (int p = 0; p < 2 * n; ++p) {
            double s = 0;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i)
                s += rule.weights[i] * std::pow(rule.nodes[i], p);
            const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
            EXPECT_NEAR(s, exact, 1e-13) << "n=" << n << " p=" << p;
        }
    }
}

TEST(GaussianCore, AdaptiveIntegrateGaussianMoments) {
    const QuadratureSpec spec{16, 1e-300, 1e-13, 12.0, 2000};
    const double s = 3.5, mu = 1.25;
    auto pdf = [&](double x) { return std::exp(-0.5 * ((x - mu) / s) * ((x - mu) / s)) / (s * std::sqrt(2 * M_PI)); };
    const Integral i0 = integrate(pdf, Domain{-kInf, kInf, mu, s}, spec);
    const Integral i2 = integrate([&](double x) { return (x - mu) * (x - mu) * pdf(x); }, Domain{-kInf, kInf, mu, s}, spec);
    EXPECT_NEAR(i0.value, 1.0, 1e-12);
    EXPECT_NEAR(i2.value, s * s, 1e-10);
    EXPECT_LT(i0.error, 1e-10);
}

TEST(GaussianCore, IntegrateRejectsEmptyDomain) {
    EXPECT_THROW(integrate([](double) { return 1.0; }, Domain{1, 1}, QuadratureSpec{}), DomainError);
}

TEST(GaussianCore, TruncatedMomentsAgreeWithSimpsonOracle) {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> pos(-12, 12), len(1e-3, 9);
    for (int rep = 0; rep < 60; ++rep) {
        const double a = pos(gen), b = a + len(gen);
        const TruncatedMoments t = truncated_moments(a, b, 0.0, 1.0);
        const OracleMoments o = simpson_moments(a, b);
        EXPECT_NEAR(t.log_prob, static_cast<double>(o.log_mass), 1e-9 * (1 + std::abs(t.log_prob))) << a << " " << b;
        EXPECT_NEAR(t.mean, static_cast<double>(o.mean), 1e-9 * (b - a)) << a << " " << b;
        EXPECT_NEAR(t.var, static_cast<double>(o.var), 1e-8 * (b - a) * (b - a)) << a << " " << b;
    }
}

TEST(GaussianCore, TruncatedMomentsFarTailStayAccurate) {
    for (double a : {10.0, 25.0, 38.0}) {
        const TruncatedMoments t = truncated_moments(a, kInf, 0.0, 1.0);
        const OracleMoments o = simpson_moments(a, kInf);
        EXPECT_NEAR(t.mean, static_cast<double>(o.mean), 1e-9 * a);
        EXPECT_NEAR(t.var, static_cast<double>(o.var), 1e-7 / (a * a));
        EXPECT_NEAR(t.log_prob, log_std_ccdf(a), 1e-12 * a * a);
    }
}

TEST(GaussianCore, TruncatedMomentsScaleAndShift) {
    // moments of N(mu, s^2) on [a, b] are the standard ones mapped affinely
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-3, 3), sg(0.1, 50);
    for (int rep = 0; rep < 200; ++rep) {
        const double mu = u(gen) * 10, s = sg(gen);
        const double za = u(gen), zb = za + 0.01 + std::abs(u(gen));
        const TruncatedMoments t = truncated_moments(mu + s * za, mu + s * zb, mu, s);
        const TruncatedMoments z = truncated_moments(za, zb, 0.0, 1.0);
        EXPECT_NEAR(t.mean, mu + s * z.mean, 1e-11 * (std::abs(mu) + s));
        EXPECT_NEAR(t.var, s * s * z.var, 1e-10 * s * s);
        EXPECT_NEAR(t.log_prob, z.log_prob, 1e-9);
    }
}

TEST(GaussianCore, TruncatedMomentsValidateInput) {
    EXPECT_THROW(truncated_moments(1.0, 1.0, 0.0, 1.0), DomainError);
    EXPECT_THROW(truncated_moments(0.0, 1.0, 0.0, -1.0), DomainError);
    EXPECT_THROW(truncated_moments(0.0, 1.0, NAN, 1.0), DomainError);
    EXPECT_THROW(log_std_pdf(NAN), DomainError);
}
