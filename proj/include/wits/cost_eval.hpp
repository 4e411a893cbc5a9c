// -*- c++ -*-
/**
 * @file cost_eval.hpp
 * @brief Expected cost of a strategy pair, the base-pair decomposition and its
 *        upper bound, the best linear pair, and the constant-factor comparison.
 *
 * Costs are kept in the game's units U = r E(theta - a_L)^2 + (1 - r) E(a_F - a_L)^2.
 * Witsenhausen units divide by (1 - r), with k^2 = r / (1 - r).
 */
#ifndef WITS_COST_EVAL_HPP
#define WITS_COST_EVAL_HPP

#include "wits/base_quantizer.hpp"
#include "wits/errors.hpp"
#include "wits/gaussian_core.hpp"
#include "wits/parallel.hpp"
#include "wits/strategy_model.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace wits {

struct CostBreakdown {
    double stage1 = 0.0;
    double stage2 = 0.0;
    double total = 0.0;
    double witsenhausen_units = 0.0;
    double error = 0.0;   // summed quadrature error estimate (game units)
    double r_L = 0.0;
    double sigma = 1.0;
    double k = 0.0;

    static CostBreakdown make(double stage1, double stage2, double r_L, double sigma, double error = 0.0) {
        CostBreakdown c;
        c.stage1 = stage1;
        c.stage2 = stage2;
        c.total = stage1 + stage2;
        c.witsenhausen_units = c.total / (1.0 - r_L);
        c.error = error;
        c.r_L = r_L;
        c.sigma = sigma;
        c.k = std::sqrt(r_L / (1.0 - r_L));
        return c;
    }
};

inline double k_from_r(double r_L) { return std::sqrt(r_L / (1.0 - r_L)); }
inline double r_from_k(double k) { return k * k / (1.0 + k * k); }

struct CostOptions {
    QuadratureSpec outer{16, 1e-300, 1e-11, 10.0, 20000};
    QuadratureSpec inner{16, 1e-300, 1e-12, 10.0, 4000};
    double inner_cutoff = 16.0;   // s-window half-width around a_L(theta), noise units
    int threads = 1;
};

namespace detail {

// Outer u-breaks of segment k restricted to theta >= 0, in local coordinates.
inline std::vector<double> segment_breaks(const LeaderStrategy& L, int k, double theta_max) {
    const SegmentView v = L.segment(k);
    double lo = k == 0 ? 0.0 : v.lo;
    double hi = std::isfinite(v.hi) ? v.hi : theta_max - v.center;
    std::vector<double> br;
    if (!(hi > lo))
        return br;
    br.push_back(lo);
    if (const auto* s = std::get_if<SampledShape>(&L.shapes()[k]))
        for (double u : s->u)
            if (u > lo && u < hi)
                br.push_back(u);
    constexpr int kMin = 8;
    for (int i = 1; i < kMin; ++i)
        br.push_back(lo + (hi - lo) * i / kMin);
    br.push_back(hi);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    return br;
}

} // namespace detail

/// Inner mismatch integral J(a) = int (a_F(s) - a)^2 phi(s - a) ds with a = c_ref + d.
inline Integral mismatch_integral(const FollowerStrategy& F, double c_ref, double d, const CostOptions& opt) {
    const double Z = opt.inner_cutoff;
    std::vector<double> br;
    for (int i = 0; i <= 8; ++i)
        br.push_back(-Z + 2.0 * Z * i / 8);
    for (double t : F.breaks_local(c_ref, d - Z, d + Z))
        br.push_back(t - d);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    auto f = [&](double z) {
        const double e = F.eval_local(c_ref, d + z).value - d;
        return std::array<double, 1>{e * e * kInvSqrt2Pi * std::exp(-0.5 * z * z)};
    };
    const VecIntegral<1> r = integrate_panels<1>(f, br, opt.inner);
    return {r.value[0], r.error[0], r.panels};
}

/**
 * U(a_L, a_F) for an odd leader and odd follower: both stages integrated over
 * theta >= 0 segment by segment in local coordinates and doubled.
 */
inline CostBreakdown expected_cost(const LeaderStrategy& L, const FollowerStrategy& F, double r_L, double sigma,
                                   const CostOptions& opt = {}) {
    if (!(r_L > 0.0 && r_L < 1.0))
        throw DomainError("expected_cost: r_L must lie in (0, 1)");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw DomainError("expected_cost: sigma must be positive");
    opt.outer.validate();
    opt.inner.validate();
    const int m = L.m();
    const double theta_max = opt.outer.tail_cutoff_sigmas * sigma;
    std::vector<std::array<double, 3>> part(m + 1, {0.0, 0.0, 0.0});
    parallel_for(m + 1, opt.threads, [&](int k) {
        const double ck = L.fixed_point(k);
        const std::vector<double> br = detail::segment_breaks(L, k, theta_max);
        if (br.size() < 2)
            return;
        auto f = [&](double u) {
            const double w = std_pdf((ck + u) / sigma) / sigma;
            const double g = L.shape_local(k, u).value;
            const double e = u - g;
            return std::array<double, 2>{w * e * e, w * mismatch_integral(F, ck, g, opt).value};
        };
        const VecIntegral<2> r = integrate_panels<2>(f, br, opt.outer);
        part[k] = {r.value[0], r.value[1], r_L * r.error[0] + (1.0 - r_L) * r.error[1]};
    });
    double s1 = 0.0, s2 = 0.0, err = 0.0;
    for (const auto& p : part) {
        s1 += p[0];
        s2 += p[1];
        err += p[2];
    }
    // outer error, inner relative tolerance, and the prior mass cut at theta_max
    const double T = opt.outer.tail_cutoff_sigmas;
    const double cut = 2.0 * r_L * sigma * sigma * (T * std_pdf(T) + std_ccdf(T));
    const double error = 2.0 * err + 2.0 * (1.0 - r_L) * opt.inner.rel_tol * s2 + cut;
    return CostBreakdown::make(2.0 * r_L * s1, 2.0 * (1.0 - r_L) * s2, r_L, sigma, error);
}

struct BasePairCost {
    double D_L0 = 0.0;
    double D_F0 = 0.0;
    double excess = 0.0;   // D_F0 - r^2 D_L0
    double U = 0.0;
    double stage1 = 0.0;   // r (1 - r)^2 D_L0
    double stage2 = 0.0;   // (1 - r) D_F0
    double bound = 0.0;    // upper bound on D_F0
    double bound_margin = 0.0;
    bool bound_vacuous = false;
    double error = 0.0;
};

/// Bound on D_F0 - r^2 D_L0 for the base pair; infinite when m = 0.
inline double base_follower_slack(const BaseConfig& cfg, double r_L) {
    if (cfg.m == 0)
        return kInf;
    const double q = (2.0 - r_L) / (1.0 - r_L);
    return 4.0 * std::sqrt(2.0 / std::numbers::e) * q * q * std_pdf(cfg.x[1] / std::numbers::sqrt2);
}

/// Upper bound on D_F0 for the base pair.
inline double base_follower_bound(const BaseConfig& cfg, double r_L, double D_L0) {
    return base_follower_slack(cfg, r_L) + r_L * r_L * D_L0;
}

/**
 * Cost of the base pair: slopey base leader against the nearest-level quantizer
 * follower. The inner expectation over the noise is the exact finite sum
 * sum_j (c_j - a)^2 P[s in cell j | a], so only the outer integral is numeric.
 */
inline BasePairCost base_pair_cost(const BaseConfig& cfg, double r_L, const CostOptions& opt = {}) {
    if (!(r_L > 0.0 && r_L < 1.0))
        throw DomainError("base_pair_cost: r_L must lie in (0, 1)");
    const int m = cfg.m;
    const double sigma = cfg.sigma;
    const LeaderStrategy L = slopey_from_base(cfg, r_L);
    const double theta_max = opt.outer.tail_cutoff_sigmas * sigma;
    auto level = [&](int j) { return j >= 0 ? cfg.c[j] : -cfg.c[-j]; };
    auto lower_edge = [&](int j) {   // left threshold of cell j
        if (j == -m)
            return -kInf;
        if (j > 0)
            return cfg.b[j];
        return j == 0 ? -cfg.b[1] : -cfg.b[-j + 1];
    };
    auto upper_edge = [&](int j) { return -lower_edge(-j); };
    // With a = c_k + d, sum_j (c_j - a)^2 P_j minus d^2 equals
    // sum_{j != k} (c_j - c_k)(c_j + c_k - 2a) P_j; summing that form keeps the
    // tiny excess over r^2 D_L0 free of cancellation.
    auto excess = [&](int k, double d) {
        const double ck = cfg.c[k];
        double acc = 0.0;
        for (int j = -m; j <= m; ++j) {
            if (j == k)
                continue;
            const double lo = lower_edge(j) - ck - d;
            const double hi = upper_edge(j) - ck - d;
            if (lo > 40.0 || hi < -40.0)
                continue;
            const double gap = level(j) - ck;
            acc += gap * (gap - 2.0 * d) * std::exp(log_std_mass(lo, hi));
        }
        return acc;
    };
    std::vector<std::array<double, 2>> part(m + 1, {0.0, 0.0});
    parallel_for(m + 1, opt.threads, [&](int k) {
        const double ck = cfg.c[k];
        const std::vector<double> br = detail::segment_breaks(L, k, theta_max);
        if (br.size() < 2)
            return;
        auto f = [&](double u) {
            const double w = std_pdf((ck + u) / sigma) / sigma;
            return std::array<double, 1>{w * excess(k, r_L * u)};
        };
        const VecIntegral<1> r = integrate_panels<1>(f, br, opt.outer);
        part[k] = {r.value[0], r.error[0]};
    });
    BasePairCost out;
    double s = 0.0, err = 0.0;
    for (const auto& p : part) {
        s += p[0];
        err += p[1];
    }
    out.D_L0 = base_distortion(cfg);
    out.excess = 2.0 * s;
    out.D_F0 = r_L * r_L * out.D_L0 + out.excess;
    out.stage1 = r_L * (1.0 - r_L) * (1.0 - r_L) * out.D_L0;
    out.stage2 = (1.0 - r_L) * out.D_F0;
    out.U = out.stage1 + out.stage2;
    out.error = 2.0 * (1.0 - r_L) * err;
    out.bound = base_follower_bound(cfg, r_L, out.D_L0);
    out.bound_vacuous = !std::isfinite(out.bound);
    out.bound_margin = out.bound_vacuous ? kInf : base_follower_slack(cfg, r_L) - out.excess;
    return out;
}

/// U of the base pair over its large-m asymptotic expression (expected <= 1.02 for large m).
inline double dlf_asymptotic_ratio(const BaseConfig& cfg, double r_L, double U) {
    if (cfg.m == 0)
        throw DomainError("dlf_asymptotic_ratio: needs m >= 1");
    const double x1 = cfg.x[1];
    const double q = (2.0 - r_L) * (2.0 - r_L) / (1.0 - r_L);
    const double denom = r_L * (1.0 - r_L) * x1 * x1 / std::sqrt(3.0) +
                         4.0 * std::sqrt(2.0 / std::numbers::e) * q * std_pdf(x1 / std::numbers::sqrt2);
    return U / denom;
}

// ---------------------------------------------------------------------------
// Linear pair, lower bound and ratios

struct LinearBenchmark {
    double lambda_star = 0.0;
    CostBreakdown cost;
};

/// U for a_L = lambda theta against its posterior-mean follower.
inline double linear_cost(double lambda, double r_L, double sigma) {
    const double s2 = sigma * sigma;
    const double l2 = lambda * lambda * s2;
    return r_L * s2 * (1.0 - lambda) * (1.0 - lambda) + (1.0 - r_L) * l2 / (1.0 + l2);
}

inline LinearBenchmark linear_benchmark(double r_L, double sigma) {
    if (!(r_L > 0.0 && r_L < 1.0))
        throw DomainError("linear_benchmark: r_L must lie in (0, 1)");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw DomainError("linear_benchmark: sigma must be positive");
    // U(lambda) can have two local minima, so bracket the global one on a grid first
    constexpr int kGrid = 20000;
    int best = 0;
    double best_u = linear_cost(0.0, r_L, sigma);
    for (int i = 1; i <= kGrid; ++i) {
        const double u = linear_cost(static_cast<double>(i) / kGrid, r_L, sigma);
        if (u < best_u) {
            best_u = u;
            best = i;
        }
    }
    const double lo = std::max(0.0, (best - 1.0) / kGrid);
    const double hi = std::min(1.0, (best + 1.0) / kGrid);
    boost::uintmax_t iters = 200;
    const auto res = boost::math::tools::brent_find_minima(
        [&](double l) { return linear_cost(l, r_L, sigma); }, lo, hi, 52, iters);
    double lam = res.first;
    if (linear_cost(lam, r_L, sigma) > best_u)
        lam = static_cast<double>(best) / kGrid;
    const double s2 = sigma * sigma;
    const double l2 = lam * lam * s2;
    LinearBenchmark out;
    out.lambda_star = lam;
    out.cost = CostBreakdown::make(r_L * s2 * (1.0 - lam) * (1.0 - lam), (1.0 - r_L) * l2 / (1.0 + l2), r_L, sigma);
    return out;
}

/// Lower bound on the optimal cost in the regime r_L sigma^2 = 1 (game units).
inline double lower_bound(double sigma) {
    if (!(sigma > 1.0) || !std::isfinite(sigma))
        throw DomainError("lower_bound: requires sigma > 1");
    const double s2 = sigma * sigma;
    return std::log(sigma) / (6.0 * s2) + (1.0 - std::log(1.25)) / (12.0 * s2);
}

/// Asymptotic equilibrium cost 8 r_L ln(sigma) / sqrt(3).
inline double asymptotic_upper(double r_L, double sigma) {
    return 8.0 * r_L * std::log(sigma) / std::sqrt(3.0);
}

struct PerformanceRatio {
    std::optional<double> vs_lower_bound;   // empty outside r_L sigma^2 = 1
    double vs_asymptotic_upper = 0.0;
    std::string regime_error;
};

inline PerformanceRatio performance_ratio(double U, double sigma, double r_L) {
    PerformanceRatio p;
    p.vs_asymptotic_upper = U / asymptotic_upper(r_L, sigma);
    const double reg = r_L * sigma * sigma;
    if (std::abs(reg - 1.0) > 1e-9)
        p.regime_error = "lower bound needs r_L sigma^2 = 1, got " + std::to_string(reg);
    else
        p.vs_lower_bound = U / lower_bound(sigma);
    return p;
}

} // namespace wits

#endif
