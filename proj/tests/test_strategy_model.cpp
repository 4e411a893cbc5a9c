#include "wits/strategy_model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace wits;

namespace {

// Leader fixture in the large-sigma regime: x_1 near 2 sqrt(2 ln sigma).
struct Fixture {
    double sigma = 1000.0;
    double r = 1e-6;
    int m = 146;
    BaseConfig cfg = build_base(m, sigma);
    LeaderStrategy L = slopey_from_base(cfg, r);
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

} // namespace

TEST(StrategyModel, SlopeyLeaderIsOddAndMonotone) {
    const auto& f = fixture();
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-4 * f.sigma, 4 * f.sigma);
    for (int i = 0; i < 2000; ++i) {
        const double a = u(gen), b = u(gen);
        EXPECT_EQ(f.L.eval(-a), -f.L.eval(a));
        if (a < b) {
            EXPECT_LE(f.L.eval(a), f.L.eval(b));
        }
    }
}

TEST(StrategyModel, SlopeyLeaderFixesCentroidsWithSlopeR) {
    const auto& f = fixture();
    for (int k = 0; k <= f.m; k += 7) {
        EXPECT_EQ(f.L.eval(f.cfg.c[k]), f.cfg.c[k]);
        EXPECT_EQ(f.L.slope(f.cfg.c[k] + 0.1), f.r);
    }
    for (int k = 1; k <= f.m; ++k)
        EXPECT_EQ(f.L.endpoint(k), f.cfg.b[k]);
}

TEST(StrategyModel, SegmentLookupMatchesEndpoints) {
    const auto& f = fixture();
    for (int k = 1; k <= f.m; k += 5) {
        EXPECT_EQ(f.L.segment_of(f.cfg.b[k]), k);
        EXPECT_EQ(f.L.segment_of(std::nextafter(f.cfg.b[k], 0.0)), k - 1);
        EXPECT_EQ(f.L.segment_of(-f.cfg.b[k]), -k);
    }
}

TEST(StrategyModel, HermiteShapeReproducesCubics) {
    auto cubic = [](double u) { return 0.3 * u * u * u - u * u + 0.5 * u; };
    auto dcubic = [](double u) { return 0.9 * u * u - 2 * u + 0.5; };
    SampledShape s;
    for (double u : {-2.0, -0.7, 0.0, 0.4, 1.5, 3.0}) {
        s.u.push_back(u);
        s.g.push_back(cubic(u));
        s.dg.push_back(dcubic(u));
    }
    for (double u = -2.0; u <= 3.0; u += 0.013) {
        const ValueSlope v = detail::hermite_eval(s, u);
        EXPECT_NEAR(v.value, cubic(u), 1e-12);
        EXPECT_NEAR(v.slope, dcubic(u), 1e-11);
    }
    // linear continuation past the last knot
    const ValueSlope far = detail::hermite_eval(s, 5.0);
    EXPECT_NEAR(far.value, cubic(3.0) + 2.0 * dcubic(3.0), 1e-12);
    EXPECT_EQ(far.slope, dcubic(3.0));
}

TEST(StrategyModel, SlopeyBaseIsInTheClass) {
    const auto& f = fixture();
    const PropertyReport rep = check_membership(f.L, f.cfg, f.r, f.sigma);
    EXPECT_TRUE(rep.overall);
    EXPECT_TRUE(rep.records.all_pass());
    EXPECT_EQ(rep.displacement_max, 0.0);
    EXPECT_LE(rep.fixed_point_error, 1e-9);
}

TEST(StrategyModel, MembershipDetectsDisplacementAndSlopeViolations) {
    const auto& f = fixture();
    std::vector<double> c = f.cfg.c, beta(f.m + 1, 0.0);
    for (int k = 1; k <= f.m; ++k)
        beta[k] = f.cfg.b[k] - 0.5 * (c[k - 1] + c[k]);
    c[40] += 3.5;   // beyond the displacement allowance
    beta[40] -= 1.75;
    beta[41] += 1.75;
    const LeaderStrategy moved(f.m, f.sigma, f.r, c, beta, std::vector<SegmentShape>(f.m + 1, LinearShape{f.r}));
    const PropertyReport r1 = check_membership(moved, f.cfg, f.r, f.sigma);
    EXPECT_FALSE(r1.property2);
    EXPECT_FALSE(r1.overall);

    const LeaderStrategy steep = slopey_from_base(f.cfg, 2 * f.r);
    EXPECT_FALSE(check_membership(steep, f.cfg, f.r, f.sigma).property3);
}

TEST(StrategyModel, QuantizerFollowerPicksTheCellLevel) {
    const BaseConfig cfg = build_base(4, 2.0);
    const FollowerStrategy q = FollowerStrategy::quantizer(cfg);
    for (int k = 0; k <= 4; ++k) {
        EXPECT_EQ(q(cfg.c[k]), cfg.c[k]);
        EXPECT_EQ(q(-cfg.c[k]), -cfg.c[k]);
    }
    EXPECT_EQ(q(cfg.b[2]), cfg.c[2]);
    EXPECT_EQ(q(std::nextafter(cfg.b[2], 0.0)), cfg.c[1]);
    EXPECT_EQ(q(1e9), cfg.c[4]);
}

TEST(StrategyModel, ClassBoundsDefinitions) {
    const auto& f = fixture();
    const ClassBounds cb = ClassBounds::make(f.cfg, f.r);
    const double q = f.r * f.r * f.sigma * f.sigma;
    EXPECT_DOUBLE_EQ(cb.r_lo, f.r * (1 - 0.5 * q));
    EXPECT_DOUBLE_EQ(cb.r_hi, f.r * (1 + 0.5 * q));
    EXPECT_DOUBLE_EQ(cb.x_hi[1], f.cfg.x[1] + 3);
    EXPECT_DOUBLE_EQ(cb.x_hi[f.m + 1], std::sqrt(M_E) * cb.x_hi[f.m]);
    EXPECT_DOUBLE_EQ(cb.x_hi[0], cb.x_hi[1]);
    EXPECT_DOUBLE_EQ(cb.tail_slope_extent(), std::sqrt(M_E) * f.sigma * cb.x_hi[f.m]);
}

TEST(StrategyModel, MSetEmptyWhereTheBracketIsInverted) {
    for (double s : {5.0, 100.0, 1e4}) {
        const MSetResult r = m_set(s);
        EXPECT_TRUE(r.m.empty()) << s;
        EXPECT_FALSE(r.feasible) << s;
    }
    EXPECT_THROW(m_set(1.0), DomainError);
}

TEST(StrategyModel, RejectsMalformedStrategies) {
    using V = std::vector<double>;
    using S = std::vector<SegmentShape>;
    EXPECT_THROW(LeaderStrategy(1, 1.0, 0.1, V{0.0, -1.0}, V{0.0, 0.0}, S(2, LinearShape{0.1})), UsageError);
    EXPECT_THROW(LeaderStrategy(1, 1.0, 0.1, V{0.0}, V{0.0, 0.0}, S(2, LinearShape{0.1})), UsageError);
    EXPECT_THROW(LeaderStrategy(1, 1.0, 0.1, V{0.0, 2.0}, V{0.0, 1.5}, S(2, LinearShape{0.1})), UsageError);
    EXPECT_THROW(LeaderStrategy(1, -1.0, 0.1, V{0.0, 2.0}, V{0.0, 0.0}, S(2, LinearShape{0.1})), DomainError);
    SampledShape bad{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
    EXPECT_THROW(LeaderStrategy(0, 1.0, 0.1, V{0.0}, V{0.0}, S{bad}), UsageError);
}
