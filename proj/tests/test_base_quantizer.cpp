#include "wits/base_quantizer.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace wits;

namespace {

double q(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }
double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI); }

// Distortion of the 3-level quantizer with threshold b and centroid levels.
double three_level_distortion(double b) {
    const double c1 = phi(b) / q(b);
    return 1.0 - 2.0 * q(b) * c1 * c1;
}

// Distortion of an arbitrary odd quantizer by direct Simpson integration.
double simpson_distortion(const BaseConfig& cfg) {
    const int n = 400000;
    const double lo = 0, hi = 12 * cfg.sigma, h = (hi - lo) / n;
    double s = 0;
    for (int i = 0; i <= n; ++i) {
        const double th = lo + h * i;
        int k = 0;
        while (k < cfg.m && th >= cfg.b[k + 1])
            ++k;
        const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        s += w * (th - cfg.c[k]) * (th - cfg.c[k]) * phi(th / cfg.sigma) / cfg.sigma;
    }
    return 2 * s * h / 3;
}

} // namespace

TEST(BaseQuantizer, StationaryForManySizes) {
    for (double sigma : {1.0, 5.0, 25.0})
        for (int m : {0, 1, 2, 7, 20}) {
            const BaseConfig cfg = build_base(m, sigma);
            EXPECT_LT(cfg.stationarity_residual(), 1e-10) << "m=" << m << " sigma=" << sigma;
            ASSERT_EQ(static_cast<int>(cfg.c.size()), m + 1);
            for (int k = 1; k <= m; ++k) {
                EXPECT_GT(cfg.c[k], cfg.b[k]);
                EXPECT_GT(cfg.b[k], cfg.c[k - 1]);
            }
        }
}

TEST(BaseQuantizer, ThreeLevelMatchesGoldenSectionOracle) {
    double a = 0.1, b = 3.0;
    const double g = (std::sqrt(5.0) - 1) / 2;
    for (int it = 0; it < 200; ++it) {
        const double x1 = b - g * (b - a), x2 = a + g * (b - a);
        if (three_level_distortion(x1) < three_level_distortion(x2))
            b = x2;
        else
            a = x1;
    }
    const double b_star = 0.5 * (a + b);
    const BaseConfig cfg = build_base(1, 1.0);
    // the distortion is flat at the optimum, so the location is good to ~sqrt(eps)
    EXPECT_NEAR(cfg.b[1], b_star, 1e-6);
    EXPECT_NEAR(cfg.c[1], phi(cfg.b[1]) / q(cfg.b[1]), 1e-12);
    EXPECT_NEAR(base_distortion(cfg), three_level_distortion(b_star), 1e-12);
}

TEST(BaseQuantizer, DistortionMatchesDirectIntegration) {
    for (int m : {1, 3, 8}) {
        const BaseConfig cfg = build_base(m, 2.0);
        EXPECT_NEAR(base_distortion(cfg), simpson_distortion(cfg), 1e-9);
    }
}

TEST(BaseQuantizer, ScalesLinearlyWithSigma) {
    const BaseConfig u = build_base(12, 1.0);
    const BaseConfig s = build_base(12, 37.5);
    for (int k = 1; k <= 12; ++k) {
        EXPECT_NEAR(s.c[k], 37.5 * u.c[k], 1e-11 * s.c[k]);
        EXPECT_NEAR(s.b[k], 37.5 * u.b[k], 1e-11 * s.b[k]);
    }
}

TEST(BaseQuantizer, SingleLevelIsTheOrigin) {
    const BaseConfig cfg = build_base(0, 3.0);
    EXPECT_EQ(cfg.c[0], 0.0);
    EXPECT_NEAR(base_distortion(cfg), 9.0, 1e-12);
}

TEST(BaseQuantizer, LemmaOneHoldsForSmallSizes) {
    for (int m = 2; m <= 12; ++m) {
        const BoundReport rep = verify_lemma1(build_base(m, 1.0));
        EXPECT_TRUE(rep.all_pass()) << "m=" << m << " worst " << rep.worst()->name;
    }
}

TEST(BaseQuantizer, HalfGapsGrowOutward) {
    const BaseConfig cfg = build_base(30, 1.0);
    for (int k = 1; k < 30; ++k)
        EXPECT_GE(cfg.x[k + 1], cfg.x[k]);
}

TEST(BaseQuantizer, RejectsBadArguments) {
    EXPECT_THROW(build_base(-1, 1.0), DomainError);
    EXPECT_THROW(build_base(2, 0.0), DomainError);
    EXPECT_THROW(build_base(2, NAN), DomainError);
    EXPECT_THROW(verify_lemma1(build_base(0, 1.0)), UsageError);
}
