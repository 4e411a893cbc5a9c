// -*- c++ -*-
/**
 * @file leader_response.hpp
 * @brief The leader's best response to a follower map: the mismatch integral
 *        J(a) = int (a_F(s) - a)^2 phi(s - a) ds, per-basin minimization,
 *        fixed points, segment endpoints and assembly of the new strategy.
 */
#ifndef WITS_LEADER_RESPONSE_HPP
#define WITS_LEADER_RESPONSE_HPP

#include "wits/errors.hpp"
#include "wits/gaussian_core.hpp"
#include "wits/parallel.hpp"
#include "wits/strategy_model.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace wits {

struct LeaderOptions {
    QuadratureSpec spec{16, 1e-300, 1e-12, 10.0, 4000};
    double z_cutoff = 16.0;    // half-width of the s-window around the action
    int knots_per_side = 17;   // Chebyshev-Lobatto knots on each side of a fixed point
    int threads = 1;
    int max_newton = 40;
    double tie_tol = 1e-12;

    void validate() const {
        spec.validate();
        if (!(z_cutoff >= 8.0))
            throw DomainError("LeaderOptions: z_cutoff must be >= 8");
        if (knots_per_side < 3)
            throw DomainError("LeaderOptions: knots_per_side must be >= 3");
        if (threads < 1)
            throw DomainError("LeaderOptions: threads must be >= 1");
    }
};

/// Quantities the leader best response is computed against.
struct LeaderContext {
    const LeaderStrategy* leader = nullptr;   // supplies the basin centers c_k
    ClassBounds bounds;                       // r_L, sigma, xbar from the base configuration

    double basin_half_width() const {
        const int m = leader->m();
        return 5.0 * bounds.r_hi * (m >= 1 ? bounds.x_hi[m + 1] : 1.0);
    }
};

/// J, J'/2 and J''/2 - 1 at one action.
struct MismatchTerms {
    double J = 0.0;
    double J1 = 0.0;      // (1/2) dJ/da = int (a - a_F)(1 - a_F') phi
    double curv = 0.0;    // (1/2) d2J/da2 - 1
};

struct BasinSolution {
    double d = 0.0;        // action - c_k
    double value = 0.0;    // r (u - d)^2 + (1 - r) J
    MismatchTerms terms;
    double slope = 0.0;    // d(action)/d(theta) at this point
    int iterations = 0;
    bool fallback = false;
};

/**
 * Leader objective in the local coordinates of basin center c_k: theta = c_k + u,
 * action a = c_k + d.
 */
class LeaderObjective {
public:
    LeaderObjective(const FollowerStrategy& follower, const LeaderContext& ctx, LeaderOptions opt)
        : F_(follower), ctx_(ctx), opt_(opt) {
        opt_.validate();
        if (!ctx_.leader)
            throw UsageError("LeaderObjective: missing leader context");
    }

    double r() const { return ctx_.bounds.r_L; }
    double center(int k) const { return ctx_.leader->fixed_point(k); }

    /// Search interval for d = a - c_k when theta = c_k + u. The localization
    /// width is capped at 0.45 of the gap to each neighbouring fixed point so
    /// basins never overlap (matters only at small sigma).
    std::pair<double, double> basin(int k, double u = 0.0) const {
        const LeaderStrategy& L = *ctx_.leader;
        const int m = L.m();
        const double W = ctx_.basin_half_width();
        const double grow = 3.0 * r() * std::abs(u);
        if (m == 0)
            return {-W - grow, W + grow};
        double lo = -W, hi = W;
        if (k < m)
            hi = std::min(hi, 0.45 * (L.fixed_point(k + 1) - L.fixed_point(k)));
        else if (u > 0.0)
            hi += grow;
        if (k >= 1)
            lo = std::max(lo, -0.45 * (L.fixed_point(k) - L.fixed_point(k - 1)));
        else
            lo = -hi;
        return {lo, hi};
    }

    MismatchTerms terms(int k, double d) const {
        const double ck = center(k);
        const double Z = opt_.z_cutoff;
        std::vector<double> br;
        constexpr int kPieces = 8;
        for (int i = 0; i <= kPieces; ++i)
            br.push_back(-Z + 2.0 * Z * i / kPieces);
        for (double t : F_.breaks_local(ck, d - Z, d + Z))
            br.push_back(t - d);
        std::sort(br.begin(), br.end());
        br.erase(std::unique(br.begin(), br.end()), br.end());
        auto f = [&](double z) {
            const ValueSlope v = F_.eval_local(ck, d + z);
            const double w = kInvSqrt2Pi * std::exp(-0.5 * z * z);
            const double e = d - v.value;   // a - a_F
            const double one_m = 1.0 - v.slope;
            return std::array<double, 3>{w * e * e, w * e * one_m, w * (-v.slope + e * one_m * z)};
        };
        const VecIntegral<3> r = integrate_panels<3>(f, br, opt_.spec);
        return {r.value[0], r.value[1], r.value[2]};
    }

    double value(int k, double u, double d) const {
        const double rl = r();
        const double e = u - d;
        return rl * e * e + (1.0 - rl) * terms(k, d).J;
    }

    /// Minimizer of the objective for theta = c_k + u over d in [lo, hi].
    BasinSolution minimize(int k, double u, double d0, double lo, double hi) const {
        const double rl = r();
        const double scale = ctx_.basin_half_width() / 5.0;
        BasinSolution sol;
        double d = std::clamp(d0, lo, hi);
        bool ok = false;
        for (int it = 0; it < opt_.max_newton; ++it) {
            const MismatchTerms t = terms(k, d);
            const double g = rl * (d - u) + (1.0 - rl) * t.J1;
            const double gp = rl + (1.0 - rl) * (1.0 + t.curv);
            sol.iterations = it + 1;
            sol.terms = t;
            if (!(gp > 0.0))
                break;
            const double step = -g / gp;
            const double next = d + step;
            if (next < lo || next > hi)
                break;
            d = next;
            if (std::abs(step) <= 1e-10 * (std::abs(d) + scale)) {
                ok = true;
                break;
            }
        }
        if (ok) {
            sol.terms = terms(k, d);
        } else {
            auto obj = [&](double x) { return value(k, u, x); };
            boost::uintmax_t iters = 200;
            const auto res = boost::math::tools::brent_find_minima(obj, lo, hi, 52, iters);
            d = res.first;
            sol.terms = terms(k, d);
            sol.fallback = true;
        }
        sol.d = d;
        const double e = u - d;
        sol.value = rl * e * e + (1.0 - rl) * sol.terms.J;
        const double gp = rl + (1.0 - rl) * (1.0 + sol.terms.curv);
        sol.slope = rl / gp;
        return sol;
    }

    /// Root of J'(c_k + delta) = 0 near delta = 0 (the fixed point of the response).
    BasinSolution fixed_point(int k, double lo, double hi) const {
        const double scale = ctx_.basin_half_width() / 5.0;
        double d = 0.0;
        BasinSolution sol;
        bool ok = false;
        for (int it = 0; it < opt_.max_newton; ++it) {
            const MismatchTerms t = terms(k, d);
            sol.iterations = it + 1;
            const double gp = 1.0 + t.curv;
            if (!(gp > 0.0))
                break;
            const double step = -t.J1 / gp;
            if (d + step < lo || d + step > hi)
                break;
            d += step;
            if (std::abs(step) <= 1e-10 * (std::abs(d) + scale)) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            auto j1 = [&](double x) { return terms(k, x).J1; };
            const double flo = j1(lo), fhi = j1(hi);
            if (!(flo < 0.0 && fhi > 0.0))
                throw StructureLost("leader fixed point: J' does not change sign over the basin, k=" +
                                        std::to_string(k),
                                    k, d, flo);
            const double abs_tol = 1e-15 * (hi - lo);
            auto done = [abs_tol](double a, double b) {
                return std::abs(b - a) <= std::max(abs_tol, 4.0 * std::numeric_limits<double>::epsilon() *
                                                                std::min(std::abs(a), std::abs(b)));
            };
            boost::uintmax_t iters = 400;
            const auto br = boost::math::tools::toms748_solve(j1, lo, hi, flo, fhi, done, iters);
            d = 0.5 * (br.first + br.second);
            sol.fallback = true;
        }
        sol.d = d;
        sol.terms = terms(k, d);
        sol.value = (1.0 - r()) * sol.terms.J;
        sol.slope = r() / (r() + (1.0 - r()) * (1.0 + sol.terms.curv));
        return sol;
    }

    const FollowerStrategy& follower() const { return F_; }
    const LeaderContext& context() const { return ctx_; }
    const LeaderOptions& options() const { return opt_; }

private:
    FollowerStrategy F_;
    LeaderContext ctx_;
    LeaderOptions opt_;
};

/**
 * Leader payoff -r (theta - a)^2 - (1 - r) J(a) for one (theta, a) pair. The
 * mismatch integral is taken over s in [a - cutoff, a + cutoff] in coordinates
 * centred on a; the truncated Gaussian mass is below 1e-50 at the default cutoff.
 */
inline double leader_objective(double theta, double a, const FollowerStrategy& follower, double r_L,
                               const QuadratureSpec& spec = {}, double cutoff = 16.0) {
    require_finite(theta, "leader_objective");
    require_finite(a, "leader_objective");
    if (!(r_L > 0.0 && r_L < 1.0))
        throw DomainError("leader_objective: r_L must lie in (0, 1)");
    spec.validate();
    std::vector<double> br;
    for (int i = 0; i <= 8; ++i)
        br.push_back(-cutoff + 2.0 * cutoff * i / 8);
    for (double t : follower.breaks_local(a, -cutoff, cutoff))
        br.push_back(t);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    auto f = [&](double z) {
        const double e = follower.eval_local(a, z).value;
        return std::array<double, 1>{e * e * kInvSqrt2Pi * std::exp(-0.5 * z * z)};
    };
    const double J = integrate_panels<1>(f, br, spec).value[0];
    const double e = theta - a;
    return -r_L * e * e - (1.0 - r_L) * J;
}

/// Per-segment record of the response construction.
struct SegmentResponse {
    int k = 0;
    double delta = 0.0;         // new fixed point - c_k, before rounding
    double eps = 0.0;           // fl(c_k + delta) - c_k
    double curvature = 0.0;     // (1/2) J'' at the new fixed point
    double fixed_residual = 0.0;   // |g(0)| before it was pinned to zero
    double basin_max_offset = 0.0; // max |a - c_k| over knots with theta between c_k and c_{k+1}
    std::vector<double> knot_u;     // new local coordinates
    std::vector<double> knot_d;     // action - c_k (old center)
    std::vector<double> knot_slope;
    int fallbacks = 0;
};

struct EndpointResponse {
    int k = 0;              // endpoint between segments k-1 and k (1..m)
    double v = 0.0;         // new b_k - (c_{k-1}+c_k)/2 (old centers)
    double offset = 0.0;    // new b_k - (c~_{k-1}+c~_k)/2
};

struct LeaderResponse {
    LeaderStrategy strategy;
    std::vector<SegmentResponse> segments;     // k = 0..m
    std::vector<EndpointResponse> endpoints;   // index k = 1..m, [0] unused
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<double> chebyshev_lobatto(double a, double b, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
        const double x = -std::cos(std::numbers::pi * i / (n - 1));
        out[i] = 0.5 * (a + b) + 0.5 * (b - a) * x;
    }
    out.front() = a;
    out.back() = b;
    return out;
}

} // namespace detail

/**
 * Leader best response at a single theta: minimizes over the basins of the
 * two fixed points bracketing theta (one basin beyond c_m) and returns the
 * better action. Ties within tie_tol go to the lower action.
 */
inline double leader_br(const LeaderObjective& obj, double theta, bool* tie = nullptr) {
    require_finite(theta, "leader_br");
    if (theta < 0.0)
        return -leader_br(obj, -theta, tie);
    const LeaderStrategy& L = *obj.context().leader;
    const int m = L.m();
    const auto& c = L.fixed_points();
    int k = static_cast<int>(std::upper_bound(c.begin(), c.end(), theta) - c.begin()) - 1;
    k = std::clamp(k, 0, m);
    auto solve = [&](int q) {
        const double u = theta - c[q];
        const auto [lo, hi] = obj.basin(q, u);
        return obj.minimize(q, u, std::clamp(obj.r() * u, lo, hi), lo, hi);
    };
    const BasinSolution a = solve(k);
    if (tie)
        *tie = false;
    if (k == m)
        return c[k] + a.d;
    const BasinSolution b = solve(k + 1);
    const double diff = a.value - b.value;
    if (std::abs(diff) <= obj.options().tie_tol * std::max(std::abs(a.value), std::abs(b.value))) {
        if (tie)
            *tie = true;
        return c[k] + a.d;
    }
    return diff < 0.0 ? c[k] + a.d : c[k + 1] + b.d;
}

/**
 * Assembles the leader best response as a new LeaderStrategy: fixed points by
 * root-finding J' in each basin, endpoints where the two neighbouring basins
 * give equal objective, and a sampled slope profile per segment.
 */
inline LeaderResponse leader_br_full(const LeaderObjective& obj) {
    const LeaderStrategy& L = *obj.context().leader;
    const ClassBounds& cb = obj.context().bounds;
    const int m = L.m();
    const double r = obj.r();
    const int threads = obj.options().threads;
    LeaderResponse out;
    out.segments.assign(m + 1, {});
    out.endpoints.assign(m + 1, {});

    // fixed points
    parallel_for(m + 1, threads, [&](int k) {
        SegmentResponse& sr = out.segments[k];
        sr.k = k;
        if (k == 0) {
            sr.delta = 0.0;
            sr.curvature = 1.0 + obj.terms(0, 0.0).curv;
            return;
        }
        const auto [lo, hi] = obj.basin(k);
        const BasinSolution fp = obj.fixed_point(k, lo, hi);
        sr.delta = fp.d;
        sr.curvature = 1.0 + fp.terms.curv;
        if (fp.fallback)
            ++sr.fallbacks;
        if (!(sr.curvature > 0.0))
            throw NonConvergence("leader_br_full: objective not convex at fixed point k=" + std::to_string(k),
                                 fp.d, sr.curvature);
    });
    for (int k = 0; k <= m; ++k) {
        const double ck = L.fixed_point(k);
        out.segments[k].eps = (ck + out.segments[k].delta) - ck;
    }

    // endpoints between k-1 and k
    parallel_for(m, threads, [&](int i) {
        const int k = i + 1;
        const double h = 0.5 * (L.fixed_point(k) - L.fixed_point(k - 1));
        const double dl0 = out.segments[k - 1].delta, dr0 = out.segments[k].delta;
        auto D = [&](double v) {
            const double ul = h + v, ur = v - h;
            const auto [llo, lhi] = obj.basin(k - 1, ul);
            const auto [rlo, rhi] = obj.basin(k, ur);
            const BasinSolution a = obj.minimize(k - 1, ul, std::clamp(dl0 + r * ul, llo, lhi), llo, lhi);
            const BasinSolution b = obj.minimize(k, ur, std::clamp(dr0 + r * ur, rlo, rhi), rlo, rhi);
            const double amb = 2.0 * h - a.d + b.d;
            const double apb = 2.0 * v - a.d - b.d;
            return r * amb * apb + (1.0 - r) * (a.terms.J - b.terms.J);
        };
        const double lo = -0.9 * h, hi = 0.9 * h;
        const double flo = D(lo), fhi = D(hi);
        if (!(flo < 0.0 && fhi > 0.0))
            throw StructureLost("leader_br_full: endpoint not bracketed, k=" + std::to_string(k), k, flo, fhi);
        // roots sit near v = 0, where a purely relative tolerance never triggers
        const double abs_tol = 1e-15 * std::max(h, 1.0);
        auto done = [abs_tol](double a, double b) {
            return std::abs(b - a) <= std::max(abs_tol, 4.0 * std::numeric_limits<double>::epsilon() *
                                                            std::min(std::abs(a), std::abs(b)));
        };
        boost::uintmax_t iters = 400;
        const auto br = boost::math::tools::toms748_solve(D, lo, hi, flo, fhi, done, iters);
        const double v = 0.5 * (br.first + br.second);
        EndpointResponse& ep = out.endpoints[k];
        ep.k = k;
        ep.v = v;
        ep.offset = v - 0.5 * (out.segments[k - 1].delta + out.segments[k].delta);
    });

    // new geometry in the new local coordinates
    std::vector<double> c_new(m + 1, 0.0), beta_new(m + 1, 0.0);
    for (int k = 1; k <= m; ++k) {
        c_new[k] = L.fixed_point(k) + out.segments[k].eps;
        beta_new[k] = out.endpoints[k].v - 0.5 * (out.segments[k - 1].eps + out.segments[k].eps);
    }
    const double tail_extent = std::max(cb.tail_slope_extent(), 1.0);

    std::vector<SegmentShape> shapes(m + 1);
    parallel_for(m + 1, threads, [&](int k) {
        SegmentResponse& sr = out.segments[k];
        const double eps = sr.eps;
        double lo = 0.0, hi = 0.0;
        if (k >= 1) {
            const double h = 0.5 * (L.fixed_point(k) - L.fixed_point(k - 1));
            lo = -h + out.endpoints[k].v - eps;
        }
        if (k < m) {
            const double h = 0.5 * (L.fixed_point(k + 1) - L.fixed_point(k));
            hi = h + out.endpoints[k + 1].v - eps;
        } else {
            hi = tail_extent;
        }
        if (m == 0)
            hi = tail_extent;
        const int n = obj.options().knots_per_side;
        std::vector<double> us;
        if (k >= 1) {
            const auto left = detail::chebyshev_lobatto(lo, 0.0, n);
            us.insert(us.end(), left.begin(), left.end() - 1);
        }
        const auto right = detail::chebyshev_lobatto(0.0, hi, n);
        us.insert(us.end(), right.begin(), right.end());
        SampledShape shape;
        // solve outward from the fixed point so each knot warm-starts the next
        std::vector<double> d(us.size()), slope(us.size());
        const auto zero = static_cast<std::size_t>(std::find(us.begin(), us.end(), 0.0) - us.begin());
        auto solve_at = [&](std::size_t i, double warm) {
            const double u = us[i] + eps;
            const auto [blo, bhi] = obj.basin(k, u);
            const BasinSolution s = obj.minimize(k, u, std::clamp(warm, blo, bhi), blo, bhi);
            if (s.fallback)
                ++sr.fallbacks;
            d[i] = s.d;
            slope[i] = s.slope;
        };
        solve_at(zero, sr.delta);
        sr.fixed_residual = std::abs(d[zero] - eps);
        for (std::size_t i = zero + 1; i < us.size(); ++i)
            solve_at(i, d[i - 1] + slope[i - 1] * (us[i] - us[i - 1]));
        for (std::size_t i = zero; i-- > 0;)
            solve_at(i, d[i + 1] + slope[i + 1] * (us[i] - us[i + 1]));
        // c_k + eps is only a fixed point to within an ulp of c_k; shifting every
        // knot by the same residual keeps g(0) = 0 without bending the slopes
        const double g0 = d[zero] - eps;
        for (std::size_t i = 0; i < us.size(); ++i) {
            shape.u.push_back(us[i]);
            shape.g.push_back(i == zero ? 0.0 : d[i] - eps - g0);
            shape.dg.push_back(slope[i]);
            if (k < m || us[i] <= 0.0)
                sr.basin_max_offset = std::max(sr.basin_max_offset, std::abs(d[i]));
        }
        sr.knot_u = shape.u;
        sr.knot_d = d;
        sr.knot_slope = slope;
        shapes[k] = std::move(shape);
    });

    out.strategy = LeaderStrategy(m, L.sigma(), r, std::move(c_new), std::move(beta_new), std::move(shapes));
    for (const auto& sr : out.segments)
        if (sr.fallbacks > 0)
            out.warnings.push_back("segment " + std::to_string(sr.k) + ": " + std::to_string(sr.fallbacks) +
                                   " basin solves used the derivative-free fallback");
    return out;
}

} // namespace wits

#endif
