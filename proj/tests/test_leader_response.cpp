#include "wits/follower_response.hpp"
#include "wits/leader_response.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace wits;

namespace {

double q(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// E[(a - Q(a + W))^2] for a nearest-level quantizer follower, W ~ N(0,1).
double quantizer_mismatch(const BaseConfig& cfg, double a) {
    double J = 0;
    for (int k = -cfg.m; k <= cfg.m; ++k) {
        const double lo = k == -cfg.m ? -kInf : (k <= 0 ? -cfg.b[-k + 1] : cfg.b[k]);
        const double hi = k == cfg.m ? kInf : (k >= 0 ? cfg.b[k + 1] : -cfg.b[-k]);
        const double ck = k >= 0 ? cfg.c[k] : -cfg.c[-k];
        const double p = q(lo - a) - (std::isinf(hi) ? 0.0 : q(hi - a));
        J += (a - ck) * (a - ck) * p;
    }
    return J;
}

struct Round {
    double sigma = 1000.0, r = 1e-6;
    int m = 146;
    BaseConfig cfg = build_base(m, sigma);
    LeaderStrategy L = slopey_from_base(cfg, r);
    FollowerStrategy F = follower_br(L);
    LeaderContext ctx{&L, ClassBounds::make(cfg, r)};
    LeaderObjective obj{F, ctx, LeaderOptions{}};
    LeaderResponse R = leader_br_full(obj);
};

const Round& round_fixture() {
    static const Round r;
    return r;
}

} // namespace

TEST(LeaderResponse, ObjectiveAgainstLinearFollower) {
    for (double g : {0.0, 0.3, 1.0})
        for (double a : {-3.0, 0.0, 0.7, 12.0}) {
            const double theta = 1.5, r = 0.2;
            const double J = (1 - g) * (1 - g) * a * a + g * g;
            EXPECT_NEAR(leader_objective(theta, a, FollowerStrategy::linear(g), r),
                        -r * (theta - a) * (theta - a) - (1 - r) * J, 1e-12 * (1 + a * a));
        }
}

TEST(LeaderResponse, ObjectiveAgainstQuantizerFollower) {
    const BaseConfig cfg = build_base(3, 5.0);
    const FollowerStrategy F = FollowerStrategy::quantizer(cfg);
    for (double a = -14; a <= 14; a += 0.9) {
        const double expect = -0.1 * (2.0 - a) * (2.0 - a) - 0.9 * quantizer_mismatch(cfg, a);
        EXPECT_NEAR(leader_objective(2.0, a, F, 0.1), expect, 1e-11) << a;
    }
}

TEST(LeaderResponse, PointwiseResponseBeatsADenseGrid) {
    const Round& f = round_fixture();
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(0, 1.1 * f.L.fixed_point(f.m));
    for (int i = 0; i < 6; ++i) {
        const double theta = u(gen);
        const double a = leader_br(f.obj, theta);
        const double best = leader_objective(theta, a, f.F, f.r);
        const int k = std::clamp(f.L.segment_of(theta), 0, f.m);
        double grid_best = -kInf;
        for (int q : {k - 1, k, k + 1}) {
            if (q < 0 || q > f.m)
                continue;
            for (int j = -300; j <= 300; ++j) {
                const double cand = f.L.fixed_point(q) + j * 0.01;
                grid_best = std::max(grid_best, leader_objective(theta, cand, f.F, f.r));
            }
        }
        EXPECT_GE(best, grid_best - 1e-12 * std::abs(grid_best)) << theta;
    }
}

TEST(LeaderResponse, ResponseIsOdd) {
    const Round& f = round_fixture();
    for (double theta : {0.3, 250.0, 901.7, 4000.0})
        EXPECT_EQ(leader_br(f.obj, -theta), -leader_br(f.obj, theta));
}

TEST(LeaderResponse, NewFixedPointsAreFixed) {
    const Round& f = round_fixture();
    const LeaderStrategy& N = f.R.strategy;
    for (int k = 1; k <= f.m; k += 9) {
        const double c = N.fixed_point(k);
        EXPECT_NEAR(leader_br(f.obj, c), c, 1e-8 * c) << k;
        EXPECT_EQ(N.eval(c), c);
    }
}

// Endpoint roots land near v = 0, where a relative stopping rule alone stalls.
TEST(LeaderResponse, EndpointRootsResolveNearZero) {
    const Round& f = round_fixture();
    // past the first ~80 gaps the true offsets are below 1e-15
    double worst = 0.0;
    for (int k = 90; k < f.m; ++k)
        worst = std::max(worst, std::abs(f.R.endpoints[k].offset));
    EXPECT_LT(worst, 1e-6 * f.r);
}

TEST(LeaderResponse, SampledProfileTracksPointwiseResponse) {
    const Round& f = round_fixture();
    const LeaderStrategy& N = f.R.strategy;
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> u(0, 1.05 * N.fixed_point(f.m));
    for (int i = 0; i < 40; ++i) {
        const double theta = u(gen);
        EXPECT_NEAR(N.eval(theta), leader_br(f.obj, theta), 1e-6) << theta;
    }
}

TEST(LeaderResponse, ChebyshevLobattoEndsAndSymmetry) {
    const auto x = detail::chebyshev_lobatto(-2.0, 4.0, 9);
    EXPECT_EQ(x.front(), -2.0);
    EXPECT_EQ(x.back(), 4.0);
    for (int i = 0; i < 9; ++i)
        EXPECT_NEAR(x[i] + x[8 - i], 2.0, 1e-14);
}

TEST(LeaderResponse, OptionsValidate) {
    LeaderOptions o;
    o.z_cutoff = 2.0;
    EXPECT_THROW(o.validate(), DomainError);
    EXPECT_THROW(leader_objective(0.0, 0.0, FollowerStrategy::zero(), 1.5), DomainError);
}
