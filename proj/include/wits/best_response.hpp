// -*- c++ -*-
/**
 * @file best_response.hpp
 * @brief Follower and leader best responses plus the numeric check of every
 *        quantitative bound they are expected to satisfy for slopey strategies.
 *
 * Each check is evaluated on a probe grid and stored as a BoundRecord
 * (margin >= 0 means the inequality holds). Record names are
 * "L<lemma>.<quantity>"; "C.<quantity>" for the two corollaries of the
 * transition bracket and "E15.<quantity>" for the fixed-point displacement.
 */
#ifndef WITS_BEST_RESPONSE_HPP
#define WITS_BEST_RESPONSE_HPP

#include "wits/follower_response.hpp"
#include "wits/leader_response.hpp"
#include "wits/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

namespace wits {

using BrDiagnostics = BoundReport;

struct VerifyOptions {
    std::vector<int> segments;   // follower-side checks; empty selects {0, 1, m/2, m-1, m}
    int probes = 9;              // signal probes per checked interval and bound
    bool all_leader_segments = true;   // leader-side checks on every k (cheap) or only `segments`
    double fixed_point_tol = 1e-8;

    void validate() const {
        if (probes < 2)
            throw DomainError("VerifyOptions: probes must be >= 2");
        if (!(fixed_point_tol > 0.0))
            throw DomainError("VerifyOptions: fixed_point_tol must be positive");
    }
};

/// Fixed point s_k of a_F near c_k, as an offset from c_k (Newton on t - a_F).
inline double follower_fixed_point_local(const FollowerBestResponse& F, int k) {
    if (k == 0)
        return 0.0;
    double t = 0.0;
    for (int it = 0; it < 60; ++it) {
        const PosteriorMoments p = F.exact_local(k, t);
        const double h = t - p.mean;
        const double hp = 1.0 - p.var;
        if (!(hp > 0.0))
            throw NonConvergence("follower fixed point: a_F' >= 1 at k=" + std::to_string(k), t, h);
        const double step = h / hp;
        t -= step;
        if (std::abs(step) <= 1e-15 * (1.0 + std::abs(t)))
            return t;
    }
    throw NonConvergence("follower fixed point: Newton did not settle at k=" + std::to_string(k), t, 0.0);
}

namespace detail {

// n points on [a, b]; an open end is stepped in by one spacing
inline std::vector<double> probe_grid(double a, double b, int n, bool open_lo = false, bool open_hi = false) {
    const int first = open_lo ? 1 : 0;
    const int den = n - 1 + first + (open_hi ? 1 : 0);
    std::vector<double> out;
    for (int j = 0; j < n; ++j)
        out.push_back(a + (b - a) * (first + j) / den);
    return out;
}

inline std::vector<int> spot_segments(int m, const std::vector<int>& requested) {
    std::set<int> s;
    if (requested.empty()) {
        for (int k : {0, 1, m / 2, m - 1, m})
            if (k >= 0 && k <= m)
                s.insert(k);
    } else {
        for (int k : requested) {
            if (k < 0 || k > m)
                throw UsageError("verify_br_bounds: segment index " + std::to_string(k) + " out of range");
            s.insert(k);
        }
    }
    return {s.begin(), s.end()};
}

/// E[theta - c | theta in [lo, hi]] under N(0, sigma^2), evaluated about c.
inline double centroid_offset(double lo, double hi, double c, double sigma) {
    return truncated_moments(lo - c, hi - c, -c, sigma).mean;
}

} // namespace detail

/**
 * Checks the follower-side bounds on a_F = follower_br(a_L) and the
 * leader-side bounds on the response assembled from it.
 *
 * @param obj       leader objective built from a_F and the context of a_L
 * @param response  leader_br_full(obj)
 */
inline BrDiagnostics verify_br_bounds(const LeaderObjective& obj, const LeaderResponse& response,
                                      const VerifyOptions& opt = {}) {
    opt.validate();
    const FollowerBestResponse* F = as_best_response(obj.follower());
    if (!F)
        throw UsageError("verify_br_bounds: follower is not a best response");
    const LeaderStrategy& L = *obj.context().leader;
    const ClassBounds& cb = obj.context().bounds;
    const int m = L.m();
    if (static_cast<int>(cb.x_hi.size()) != m + 2)
        throw UsageError("verify_br_bounds: bounds built for a different m");
    const double r = cb.r_L, rb = cb.r_hi, sigma = cb.sigma;
    const auto& xb = cb.x_hi;
    const int n = opt.probes;
    BrDiagnostics rep;
    if (m == 0)
        return rep;

    auto c = [&](int k) { return L.fixed_point(k); };
    auto sq = [](double v) { return v * v; };
    auto xavg = [&](int k) { return 0.5 * (xb[k] + xb[k + 1]); };   // (xbar_k + xbar_{k+1}) / 2
    const std::vector<int> spots = detail::spot_segments(m, opt.segments);

    // ---- follower side ------------------------------------------------------
    for (int k : spots) {
        // conditional moments inside one segment
        if (k < m) {
            const double lo = k >= 1 ? c(k - 1) - c(k) : -c(1);
            const double hi = c(k + 1) - c(k);
            for (double t : detail::probe_grid(lo, hi, n)) {
                const SegmentPosterior sp = F->segment_posterior(k, t, k);
                rep.add(upper_bound_record("L2.mean", k, std::abs(sp.mean), rb * xb[k + 1]));
                rep.add(upper_bound_record("L2.var", k, sp.var, sq(rb * xavg(k))));
            }
        } else {
            const double xm1 = xb[m + 1];
            std::vector<double> ts;
            if (m >= 2) {
                for (double t : detail::probe_grid(c(m - 2) - c(m), c(m - 1) - c(m), n, false, true))
                    ts.push_back(t);
            } else {
                for (double t : detail::probe_grid(-c(1) - 4.0, -c(1), n, false, true))
                    ts.push_back(t);
            }
            for (double t : detail::probe_grid(c(m - 1) - c(m), xm1, n))
                ts.push_back(t);
            for (double t : detail::probe_grid(xm1, 4.0 * xm1, n, true, false))
                ts.push_back(t);
            for (double t : ts) {
                const SegmentPosterior sp = F->segment_posterior(m, t, m);
                const double mean_bound = t <= xm1 ? rb * xm1 : 3.0 * r * sigma * (t + 1.0);
                rep.add(upper_bound_record("L3.mean_upper", m, sp.mean, mean_bound));
                rep.add(lower_bound_record("L3.mean_lower", m, sp.mean, -rb * xb[m]));
                double var_bound;
                if (t < c(m - 1) - c(m))
                    var_bound = 1.0 / 3.0;
                else if (t <= xm1)
                    var_bound = 0.75 * sq(rb * 0.5 * (xb[m] + xm1));
                else
                    var_bound = 2.5 * sq(r * sigma * t);
                rep.add(upper_bound_record("L3.var", m, sp.var, var_bound));
            }
        }

        // posterior mass away from the neighbouring segments, s = c_k + delta
        if (k < m) {
            const double Dk = c(k + 1) - c(k);
            for (double t : detail::probe_grid(0.0, Dk, n)) {
                const double lw_k = F->segment_posterior(k, t, k).log_weight;
                const double lw_k1 = F->segment_posterior(k, t, k + 1).log_weight;
                for (int j = 1; j <= 2; ++j) {
                    if (k - j >= -m) {
                        const double lw = F->segment_posterior(k, t, k - j).log_weight;
                        rep.add(upper_bound_record("L4.lower_ratio_log", k, lw - lw_k,
                                                   -0.5 * sq(c(k) - c(k - j)) + 3.0 * j));
                    }
                    if (k + j + 1 <= m) {
                        const double lw = F->segment_posterior(k, t, k + j + 1).log_weight;
                        rep.add(upper_bound_record("L4.upper_ratio_log", k, lw - lw_k1,
                                                   -0.5 * sq(c(k + j + 1) - c(k + 1)) + 3.0 * j));
                    }
                }
            }
        }

        // transition between c_k and c_{k+1}
        if (k < m) {
            const double Dk = c(k + 1) - c(k);
            const double mk_local = Dk + F->midpoint_shift_local(k + 1);   // m_{k+1} - c_k
            rep.add(upper_bound_record("L5.midpoint_shift", k, std::abs(mk_local - 0.5 * Dk), 2.0 / Dk));
            const double lnsig = std::log(sigma);
            const double cor_gap = lnsig > 0.0 ? 2.0 * std::sqrt(2.0 * lnsig) / 5.0 : 0.0;
            for (double t : detail::probe_grid(0.0, Dk, n)) {
                const double delta = t - mk_local;
                const double lw_k = F->segment_posterior(k, t, k).log_weight;
                const double lw_k1 = F->segment_posterior(k, t, k + 1).log_weight;
                const double lr = lw_k - lw_k1;
                if (k < m - 1) {
                    rep.add(lower_bound_record("L5.ratio_lower_log", k, lr,
                                               -Dk * (delta + rb * xb[k + 1]) - 0.5 * sq(rb * xb[k + 1])));
                    rep.add(upper_bound_record("L5.ratio_upper_log", k, lr,
                                               Dk * (rb * xb[k + 2] - delta) + 0.5 * sq(rb * xb[k + 2])));
                } else {
                    rep.add(lower_bound_record("L5.ratio_lower_log", k, lr,
                                               -Dk * (delta + rb * xb[m]) - 0.5 * sq(rb * xb[m])));
                    rep.add(upper_bound_record("L5.ratio_upper_log", k, lr,
                                               std::log(1.16) - Dk * (delta - rb * xb[m]) + 0.5 * sq(rb * xb[m])));
                }

                const PosteriorMoments p = F->exact_local(k, t);
                const double a = p.mean;   // a_F(s) - c_k
                const double slack = 1.01 * rb * xb[k + 2];
                rep.add(lower_bound_record("L6.aF_lower", k, a, Dk / (1.0 + 1.17 * std::exp(-Dk * delta)) - slack));
                rep.add(upper_bound_record("L6.aF_upper", k, a,
                                           1.17 * Dk / (1.17 + std::exp(-Dk * delta)) + slack));
                rep.add(lower_bound_record("L6.daF_nonneg", k, p.var, 0.0));
                const double dbound = delta <= -0.5
                                          ? 1.17 * std::exp(Dk * delta) * sq(Dk) + 1.01 * sq(rb * xavg(k))
                                          : 1.17 * std::exp(-Dk * std::abs(delta)) * sq(Dk) +
                                                1.01 * sq(rb * xavg(k + 1));
                rep.add(upper_bound_record("L6.daF_upper", k, p.var, dbound));

                rep.add(lower_bound_record("C.aF_lower", k, a, Dk - 1.17 * std::exp(-Dk * delta) * Dk - slack));
                rep.add(upper_bound_record("C.aF_upper", k, a, 1.17 * std::exp(Dk * delta) * Dk + slack));
                rep.add(upper_bound_record("C.daF_upper", k, p.var,
                                           1.17 * std::exp(-Dk * std::abs(delta)) * sq(Dk) +
                                               1.01 * sq(rb * xb[k + 2])));
                const double near = 1.1 * rb * xb[k + 2];
                if (delta < -cor_gap)
                    rep.add(upper_bound_record("C.aF_near_lower_level", k, std::abs(a), near));
                else if (delta > cor_gap)
                    rep.add(upper_bound_record("C.aF_near_upper_level", k, std::abs(a - Dk), near));
            }
        } else {
            const double xm1 = xb[m + 1];
            std::vector<double> ds = detail::probe_grid(0.0, xm1, n, true, false);
            for (double d : detail::probe_grid(xm1, 4.0 * xm1, n, true, false))
                ds.push_back(d);
            for (double d : ds) {
                const PosteriorMoments p = F->exact_local(m, d);
                rep.add(lower_bound_record("L7.daF_nonneg", m, p.var, 0.0));
                if (d <= xm1) {
                    rep.add(lower_bound_record("L7.i.aF_lower", m, p.mean, -1.01 * rb * xm1));
                    rep.add(upper_bound_record("L7.i.aF_upper", m, p.mean, rb * xm1));
                    rep.add(upper_bound_record("L7.i.daF_upper", m, p.var, 0.8 * sq(rb * 0.5 * (xb[m] + xm1))));
                } else {
                    rep.add(lower_bound_record("L7.ii.aF_lower", m, p.mean, -1.01 * rb * xb[m]));
                    rep.add(upper_bound_record("L7.ii.aF_upper", m, p.mean, 3.0 * r * sigma * (d + 1.0)));
                    rep.add(upper_bound_record("L7.ii.daF_upper", m, p.var, 3.0 * sq(r * sigma * d)));
                }
            }
        }
    }

    // ---- leader side --------------------------------------------------------
    std::vector<int> lk;
    if (opt.all_leader_segments) {
        for (int k = 0; k <= m; ++k)
            lk.push_back(k);
    } else {
        lk = spots;
    }
    const double slope_lo = r / (r + (1.0 - r) * (1.0 + 0.4 * sq(rb * sigma)));
    const double slope_hi = r / (r + (1.0 - r) * (1.0 - 0.4 * sq(rb * sigma)));
    const double tail_u = sigma * xb[m + 1];
    const LeaderStrategy& Lt = response.strategy;
    const double xlo1 = cb.x_lo.size() > 1 ? cb.x_lo[1] : 0.0;

    for (int k : lk) {
        const SegmentResponse& sr = response.segments.at(k);
        // knot data: sr.knot_u are new local coordinates, knot_d offsets from the old c_k
        for (std::size_t i = 0; i < sr.knot_u.size(); ++i) {
            const double u = sr.knot_u[i];
            const bool in_tail = k == m && u > 0.0;
            if (!in_tail) {
                rep.add(upper_bound_record("L8.basin_offset", k, std::abs(sr.knot_d[i]), 5.0 * rb * xb[m + 1]));
                rep.add(lower_bound_record("L9.slope_lower", k, sr.knot_slope[i], slope_lo));
                rep.add(upper_bound_record("L9.slope_upper", k, sr.knot_slope[i], slope_hi));
            } else if (u < tail_u) {
                rep.add(lower_bound_record("L11.slope_lower", k, sr.knot_slope[i], cb.r_lo));
                rep.add(upper_bound_record("L11.slope_upper", k, sr.knot_slope[i], cb.r_hi));
            }
        }

        // strong convexity across the basin and the fixed-point property
        const auto [blo, bhi] = obj.basin(k);
        for (double d : {blo, 0.5 * blo, sr.delta, 0.5 * bhi, bhi}) {
            const double half_curv = 1.0 + obj.terms(k, d).curv;   // J''/2
            rep.add(lower_bound_record("L10.convexity", k, half_curv, 1.0 - 0.4 * sq(rb * sigma)));
        }
        const double ct = Lt.fixed_point(k);
        rep.add(upper_bound_record("L10.fixed_point", k, std::abs(leader_br(obj, ct) - ct),
                                   opt.fixed_point_tol * std::max(1.0, std::abs(ct))));

        if (k >= 1)
            rep.add(upper_bound_record("L12.endpoint", k, std::abs(response.endpoints[k].offset), 0.1 * r));

        if (k >= 1) {
            const double s_k = follower_fixed_point_local(*F, k);
            const double cur = sq(xavg(k));
            rep.add(upper_bound_record("L13.ck_vs_sk", k, std::abs(sr.delta - s_k),
                                       0.42 * r * r * cur + 0.08 * r * r * xlo1));
            const double bk = L.endpoint(k);
            const double bk1 = k < m ? L.endpoint(k + 1) : kInf;
            const double e_k = detail::centroid_offset(bk, bk1, c(k), sigma);
            rep.add(upper_bound_record("L14.sk_location", k, std::abs(s_k - r * e_k), 1.9 * r * r * xb[k + 1]));
            const double hb = 0.5 * (c(k - 1) + c(k));
            const double hb1 = k < m ? 0.5 * (c(k) + c(k + 1)) : kInf;
            const double eh_k = detail::centroid_offset(hb, hb1, c(k), sigma);
            rep.add(upper_bound_record("E15.ck_location", k, std::abs(sr.delta - r * eh_k),
                                       0.42 * r * r * cur + 2.0 * r * r * xb[k + 1]));
        }
    }

    // tail rule of the response beyond the slope range
    if (std::isfinite(tail_u)) {
        const double ct = Lt.fixed_point(m);
        for (double f : {1.0, 1.5, 2.0, 4.0}) {
            const double th = ct + f * tail_u;
            const double a = leader_br(obj, th);
            rep.add(upper_bound_record("L11.tail_linear", m, a - ct, 3.0 * r * (th - ct)));
        }
    }
    return rep;
}

} // namespace wits

#endif
