// -*- c++ -*-
/**
 * @file follower_response.hpp
 * @brief The follower's best response a_F(s) = E[a_L | s]: an exact windowed
 *        quadrature evaluator and a cached interpolant over s.
 */
#ifndef WITS_FOLLOWER_RESPONSE_HPP
#define WITS_FOLLOWER_RESPONSE_HPP

#include "wits/errors.hpp"
#include "wits/gaussian_core.hpp"
#include "wits/parallel.hpp"
#include "wits/strategy_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace wits {

/// Posterior summary of a_L given s restricted to one segment.
struct SegmentPosterior {
    int q = 0;
    double log_weight = -kInf;   // ln P[theta in B_q, s] up to a constant common to all q
    double mean = 0.0;           // E[a_L | s, B_q] - c_ref
    double var = 0.0;
    double mu3 = 0.0;            // third central moment
};

/// Posterior moments of a_L given s, relative to the reference fixed point.
struct PosteriorMoments {
    double mean = 0.0;   // a_F(s) - c_ref
    double var = 0.0;    // d a_F / ds
    double mu3 = 0.0;    // d^2 a_F / ds^2
    int lo_segment = 0;
    int hi_segment = 0;
    double log_mass_window = 0.0;   // ln of posterior mass inside the window (<= 0)
};

/// Segments kept around the observed signal.
struct PosteriorWindow {
    int center_segment = 0;
    int half_width = 6;
    std::vector<int> segments;
    std::vector<double> log_weights;   // normalized: log-sum-exp is 0 over the kept segments
};

struct FollowerOptions {
    QuadratureSpec spec{};
    int window = 6;                 // minimum half-width in segments
    double window_eps = 1e-18;      // posterior mass dropped per edge
    bool use_cache = true;
    int threads = 1;
    int uniform_knots = 64;
    int cluster_knots = 32;
    int max_knots_per_cell = 6000;
    double cache_rel_tol = 1e-9;    // Hermite cache, relative to the local action

    void validate() const {
        spec.validate();
        if (window < 1)
            throw DomainError("FollowerOptions: window must be >= 1");
        if (!(window_eps > 0.0 && window_eps < 1e-3))
            throw DomainError("FollowerOptions: window_eps must be in (0, 1e-3)");
        if (threads < 1)
            throw DomainError("FollowerOptions: threads must be >= 1");
        if (!(cache_rel_tol >= 1e-15 && cache_rel_tol <= 1e-4))
            throw DomainError("FollowerOptions: cache_rel_tol must be in [1e-15, 1e-4]");
    }
};

namespace detail {

/**
 * Exact windowed posterior of a_L given s = C_j + t. Each segment q is
 * integrated in its local coordinate u = theta - C_q where the log integrand is
 *   E_q(u) = -(C_j - C_q + t - G_q(u))^2 / 2 - (2 C_q u + u^2) / (2 sigma^2)
 * and the constant -C_q^2/(2 sigma^2) is carried separately.
 */
class PosteriorEngine {
public:
    PosteriorEngine(std::shared_ptr<const LeaderStrategy> leader, FollowerOptions opt)
        : L_(std::move(leader)), opt_(opt) {
        opt_.validate();
    }

    const LeaderStrategy& leader() const { return *L_; }
    const FollowerOptions& options() const { return opt_; }

    /// Segment integral for signed segment q at s = C_j + t.
    SegmentPosterior segment(int j, double t, int q) const {
        const Scan sc = scan(j, t, q);
        return integrate_segment(j, t, q, sc);
    }

    /// Full posterior at s = C_j + t with the adaptive window.
    PosteriorMoments eval(int j, double t, PosteriorWindow* window_out = nullptr) const {
        const int m = L_->m();
        if (j < 0 || (j == 0 && t < 0.0)) {
            PosteriorMoments r = eval(-j, -t, window_out);
            r.mean = -r.mean;
            r.mu3 = -r.mu3;
            std::swap(r.lo_segment, r.hi_segment);
            r.lo_segment = -r.lo_segment;
            r.hi_segment = -r.hi_segment;
            if (window_out) {
                window_out->center_segment = -window_out->center_segment;
                for (int& q : window_out->segments)
                    q = -q;
            }
            return r;
        }
        const double ln_eps = std::log(opt_.window_eps);
        int lo = std::max(-m, j - opt_.window), hi = std::min(m, j + opt_.window);
        std::vector<Scan> scans;
        std::vector<int> qs;
        for (int q = lo; q <= hi; ++q) {
            qs.push_back(q);
            scans.push_back(scan(j, t, q));
        }
        double best_bound = -kInf;
        for (const auto& s : scans)
            best_bound = std::max(best_bound, s.bound);
        // widen while the outermost segment may still carry mass above the cut
        while (lo > -m && scans.front().bound >= best_bound + ln_eps - 5.0) {
            --lo;
            qs.insert(qs.begin(), lo);
            scans.insert(scans.begin(), scan(j, t, lo));
            best_bound = std::max(best_bound, scans.front().bound);
        }
        while (hi < m && scans.back().bound >= best_bound + ln_eps - 5.0) {
            ++hi;
            qs.push_back(hi);
            scans.push_back(scan(j, t, hi));
            best_bound = std::max(best_bound, scans.back().bound);
        }
        std::vector<SegmentPosterior> parts;
        for (std::size_t i = 0; i < qs.size(); ++i) {
            if (scans[i].bound < best_bound + ln_eps - 10.0)
                continue;
            parts.push_back(integrate_segment(j, t, qs[i], scans[i]));
        }
        double max_lw = -kInf;
        for (const auto& p : parts)
            max_lw = std::max(max_lw, p.log_weight);
        // drop segments below the window threshold relative to the best actual weight
        std::vector<SegmentPosterior> kept;
        for (const auto& p : parts)
            if (p.log_weight >= max_lw + ln_eps)
                kept.push_back(p);
        double w_sum = 0.0, mean = 0.0;
        for (const auto& p : kept) {
            const double w = std::exp(p.log_weight - max_lw);
            w_sum += w;
            mean += w * p.mean;
        }
        mean /= w_sum;
        double var = 0.0, mu3 = 0.0;
        for (const auto& p : kept) {
            const double w = std::exp(p.log_weight - max_lw) / w_sum;
            const double dm = p.mean - mean;
            var += w * (p.var + dm * dm);
            mu3 += w * (p.mu3 + 3.0 * p.var * dm + dm * dm * dm);
        }
        PosteriorMoments r;
        r.mean = mean;
        r.var = std::max(0.0, var);
        r.mu3 = mu3;
        r.lo_segment = kept.front().q;
        r.hi_segment = kept.back().q;
        double all = 0.0;
        for (const auto& p : parts)
            all += std::exp(p.log_weight - max_lw);
        r.log_mass_window = std::log(w_sum / all);
        if (window_out) {
            window_out->center_segment = j;
            window_out->half_width = opt_.window;
            window_out->segments.clear();
            window_out->log_weights.clear();
            const double lz = max_lw + std::log(w_sum);
            for (const auto& p : kept) {
                window_out->segments.push_back(p.q);
                window_out->log_weights.push_back(p.log_weight - lz);
            }
        }
        return r;
    }

    /// Local integration range of segment q (truncated where infinite).
    std::pair<double, double> segment_range(int q) const {
        const SegmentView v = L_->segment(q);
        const double T = opt_.spec.tail_cutoff_sigmas;
        const double s = L_->sigma();
        double lo = v.lo, hi = v.hi;
        if (!std::isfinite(hi)) {
            if (std::isfinite(lo)) {
                const double start = v.center + lo;   // > 0
                hi = std::sqrt(start * start + T * T * s * s) - v.center;
            } else {
                hi = T * s;
            }
        }
        if (!std::isfinite(lo)) {
            if (std::isfinite(hi)) {
                const double start = -(v.center + hi);   // > 0
                lo = -std::sqrt(start * start + T * T * s * s) - v.center;
            } else {
                lo = -T * s;
            }
        }
        return {lo, hi};
    }

private:
    struct Scan {
        double lo = 0.0, hi = 0.0;
        double max_e = -kInf;
        double anchor = 0.0;   // G at the scan maximum
        double anchor_u = 0.0; // u at the scan maximum
        double bound = -kInf;  // upper estimate of the log weight
    };

    double log_integrand(int j, double t, int q, double u, double* g_out = nullptr) const {
        const double cq = L_->fixed_point(q);
        const double d = L_->fixed_point(j) - cq;
        const double g = L_->shape_local(q, u).value;
        if (g_out)
            *g_out = g;
        const double e = d + t - g;
        const double s2 = L_->sigma() * L_->sigma();
        return -0.5 * e * e - (2.0 * cq * u + u * u) / (2.0 * s2);
    }

    Scan scan(int j, double t, int q) const {
        Scan sc;
        auto [lo, hi] = segment_range(q);
        const SegmentView v = L_->segment(q);
        constexpr int kScan = 33;
        auto run = [&] {
            sc.max_e = -kInf;
            for (int i = 0; i < kScan; ++i) {
                const double u = lo + (hi - lo) * i / (kScan - 1);
                double g = 0.0;
                const double e = log_integrand(j, t, q, u, &g);
                if (e > sc.max_e) {
                    sc.max_e = e;
                    sc.anchor = g;
                    sc.anchor_u = u;
                }
            }
        };
        run();
        // extend truncated ends while the integrand there is not negligible
        for (int rep = 0; rep < 60; ++rep) {
            bool grew = false;
            if (!std::isfinite(v.hi) && log_integrand(j, t, q, hi) > sc.max_e - 45.0) {
                hi = hi + (hi - lo);
                grew = true;
            }
            if (!std::isfinite(v.lo) && log_integrand(j, t, q, lo) > sc.max_e - 45.0) {
                lo = lo - (hi - lo);
                grew = true;
            }
            if (!grew)
                break;
            run();
        }
        sc.lo = lo;
        sc.hi = hi;
        const double cq = L_->fixed_point(q);
        const double s2 = L_->sigma() * L_->sigma();
        sc.bound = -cq * cq / (2.0 * s2) + sc.max_e + std::log(hi - lo) + 2.0;
        return sc;
    }

    SegmentPosterior integrate_segment(int j, double t, int q, const Scan& sc) const {
        std::vector<double> br;
        const int pieces = (std::isfinite(L_->segment(q).lo) && std::isfinite(L_->segment(q).hi)) ? 4 : 16;
        for (int i = 0; i <= pieces; ++i)
            br.push_back(sc.lo + (sc.hi - sc.lo) * i / pieces);
        br.back() = sc.hi;
        add_knot_breaks(q, sc.lo, sc.hi, br);
        const double ref = sc.max_e, a = sc.anchor, u0 = sc.anchor_u;
        const double cq_ = L_->fixed_point(q);
        const double e0 = (L_->fixed_point(j) - cq_) + t - a;
        const double s2_ = L_->sigma() * L_->sigma();
        // log integrand minus its value at u0, in difference form: far from the
        // signal -e^2/2 is huge and its rounding noise would swamp rel_tol
        auto f = [&](double u) {
            const double g = L_->shape_local(q, u).value;
            const double y = g - a;
            const double du = u - u0;
            const double le = 0.5 * y * (2.0 * e0 - y) - du * (2.0 * cq_ + u + u0) / (2.0 * s2_);
            const double w = std::exp(le);
            return std::array<double, 4>{w, w * y, w * y * y, w * y * y * y};
        };
        QuadratureSpec spec = opt_.spec;
        spec.abs_tol = 1e-300;
        const VecIntegral<4> r = integrate_panels<4>(f, br, spec);
        SegmentPosterior p;
        p.q = q;
        const double i0 = r.value[0];
        if (!(i0 > 0.0))
            throw NonConvergence("follower posterior: zero segment mass", 0.0, 0.0);
        const double cq = L_->fixed_point(q);
        const double s2 = L_->sigma() * L_->sigma();
        p.log_weight = -cq * cq / (2.0 * s2) + ref + std::log(i0);
        const double m1 = r.value[1] / i0, m2 = r.value[2] / i0, m3 = r.value[3] / i0;
        p.mean = (cq - L_->fixed_point(j)) + a + m1;
        p.var = std::max(0.0, m2 - m1 * m1);
        p.mu3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
        return p;
    }

    void add_knot_breaks(int q, double lo, double hi, std::vector<double>& br) const {
        const int k = std::abs(q);
        const auto* sm = std::get_if<SampledShape>(&L_->shapes()[k]);
        if (!sm)
            return;
        auto push = [&](double u) {
            if (u > lo && u < hi)
                br.push_back(u);
        };
        for (double u : sm->u) {
            const double uq = q < 0 ? -u : u;
            push(uq);
            if (k == 0)
                push(-uq);
        }
        std::sort(br.begin(), br.end());
        br.erase(std::unique(br.begin(), br.end()), br.end());
    }

    std::shared_ptr<const LeaderStrategy> L_;
    FollowerOptions opt_;
};

// Quintic Hermite on [0, h] from value, first and second derivative at both ends.
struct QuinticNode {
    double t = 0.0;
    double f = 0.0, d1 = 0.0, d2 = 0.0;
    double err = 0.0;   // |interpolant - exact| observed when the node was inserted
};

inline ValueSlope quintic_eval(const QuinticNode& a, const QuinticNode& b, double t) {
    const double h = b.t - a.t;
    const double s = (t - a.t) / h;
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    const double H0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
    const double H1 = s - 6 * s3 + 8 * s4 - 3 * s5;
    const double H2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    const double H3 = 0.5 * s3 - s4 + 0.5 * s5;
    const double H4 = -4 * s3 + 7 * s4 - 3 * s5;
    const double H5 = 10 * s3 - 15 * s4 + 6 * s5;
    const double D0 = -30 * s2 + 60 * s3 - 30 * s4;
    const double D1 = 1 - 18 * s2 + 32 * s3 - 15 * s4;
    const double D2 = s - 4.5 * s2 + 6 * s3 - 2.5 * s4;
    const double D3 = 1.5 * s2 - 4 * s3 + 2.5 * s4;
    const double D4 = -12 * s2 + 28 * s3 - 15 * s4;
    const double D5 = 30 * s2 - 60 * s3 + 30 * s4;
    const double v = a.f * H0 + h * a.d1 * H1 + h * h * a.d2 * H2 + h * h * b.d2 * H3 + h * b.d1 * H4 + b.f * H5;
    const double d = (a.f * D0 + b.f * D5) / h + a.d1 * D1 + b.d1 * D4 + h * (a.d2 * D2 + b.d2 * D3);
    return {v, d};
}

} // namespace detail

/// Summary of the cached interpolant of one cell.
struct CacheCellInfo {
    int cell = 0;
    double t_lo = 0.0, t_hi = 0.0;   // relative to c_cell
    int knots = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
};

/**
 * Follower best response to a leader strategy. Cell j (0 <= j <= m) covers
 * s in [M_j, M_{j+1}) where M_j are the posterior transition points between
 * adjacent segments; a_F - c_j, Var and the third central moment are sampled
 * on a knot grid in t = s - c_j and interpolated by quintic Hermite pieces.
 * Negative s uses oddness. The exact evaluator is used beyond the cached range
 * or when the cache is disabled.
 */
class FollowerBestResponse final : public FollowerModel {
public:
    FollowerBestResponse(const LeaderStrategy& leader, const FollowerOptions& opt)
        : leader_(std::make_shared<const LeaderStrategy>(leader)), engine_(leader_, opt) {
        build_transitions();
        if (opt.use_cache)
            build_cache();
    }

    std::string kind() const override { return "best_response"; }

    ValueSlope eval_local(double c_ref, double t) const override {
        const double s = c_ref + t;
        if (s < 0.0 || (s == 0.0 && t < 0.0)) {
            const ValueSlope v = eval_local(-c_ref, -t);
            return {-v.value, v.slope};
        }
        const auto [j, tj] = locate(c_ref, t);
        const double shift = leader_->fixed_point(j) - c_ref;
        if (!cells_.empty() && tj <= cells_[j].back().t) {
            const ValueSlope v = cell_eval(j, tj);
            return {v.value + shift, v.slope};
        }
        const PosteriorMoments p = engine_.eval(j, tj);
        return {p.mean + shift, p.var};
    }

    std::vector<double> breaks_local(double c_ref, double t_lo, double t_hi) const override {
        std::vector<double> out;
        const int m = leader_->m();
        for (int k = 1; k <= m; ++k) {
            for (int sgn : {1, -1}) {
                // M_k relative to c_ref, computed from the nearer fixed point
                const double center = sgn * leader_->fixed_point(k);
                const double t = (center - c_ref) + sgn * mt_[k];
                if (t > t_lo && t < t_hi)
                    out.push_back(t);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Exact posterior at s = c_j + t (bypasses the cache).
    PosteriorMoments exact_local(int j, double t, PosteriorWindow* w = nullptr) const { return engine_.eval(j, t, w); }
    PosteriorMoments exact(double s, PosteriorWindow* w = nullptr) const {
        const auto [j, tj] = locate(0.0, s < 0.0 ? -s : s);
        PosteriorMoments p = engine_.eval(j, tj, w);
        p.mean += leader_->fixed_point(j);
        if (s < 0.0) {
            p.mean = -p.mean;
            p.mu3 = -p.mu3;
        }
        return p;
    }
    SegmentPosterior segment_posterior(int j, double t, int q) const { return engine_.segment(j, t, q); }

    const LeaderStrategy& leader() const { return *leader_; }
    const std::shared_ptr<const LeaderStrategy>& leader_ptr() const { return leader_; }
    const FollowerOptions& options() const { return engine_.options(); }

    /// Transition point M_k relative to c_k (k = 1..m), clamped inside (c_{k-1}, c_k).
    double transition_local(int k) const { return mt_.at(k); }
    /// Unclamped prior-adjusted midpoint m_k - c_k.
    double midpoint_shift_local(int k) const { return mt_raw_.at(k); }
    const std::vector<CacheCellInfo>& cache_info() const { return info_; }
    /// Upper end of the cached range, relative to c_m.
    double cache_limit_local() const { return s_max_local_; }

    /// Exports (s, a_F(s)) for s in [s_lo, s_hi] on n points.
    std::vector<std::pair<double, double>> sample(double s_lo, double s_hi, int n) const {
        std::vector<std::pair<double, double>> out;
        for (int i = 0; i < n; ++i) {
            const double s = s_lo + (s_hi - s_lo) * i / std::max(1, n - 1);
            out.emplace_back(s, eval_local(0.0, s).value);
        }
        return out;
    }

private:
    // Cell of s = c_ref + t (s >= 0) and the local coordinate in that cell.
    std::pair<int, double> locate(double c_ref, double t) const {
        const auto& c = leader_->fixed_points();
        const int m = leader_->m();
        const double s = c_ref + t;
        int j = static_cast<int>(std::upper_bound(c.begin(), c.end(), s) - c.begin()) - 1;
        j = std::clamp(j, 0, m);
        auto local = [&](int jj) { return (c_ref - c[jj]) + t; };
        double tj = local(j);
        // move to the cell whose [M_j, M_{j+1}) contains s
        while (j < m && tj >= (c[j + 1] - c[j]) + mt_[j + 1]) {
            ++j;
            tj = local(j);
        }
        while (j > 0 && tj < mt_[j]) {
            --j;
            tj = local(j);
        }
        return {j, tj};
    }

    void build_transitions() {
        const LeaderStrategy& L = *leader_;
        const int m = L.m();
        mt_.assign(m + 1, 0.0);
        mt_raw_.assign(m + 1, 0.0);
        std::vector<double> lp(m + 1);
        const double s = L.sigma();
        for (int k = 0; k <= m; ++k) {
            const double lo = k == 0 ? (m == 0 ? -kInf : -L.endpoint(1)) : L.endpoint(k);
            const double hi = k == m ? kInf : L.endpoint(k + 1);
            lp[k] = (k == 0 && m == 0) ? 0.0 : log_std_mass(lo / s, hi / s);
        }
        for (int k = 1; k <= m; ++k) {
            const double delta = L.fixed_point(k) - L.fixed_point(k - 1);
            const double raw = -0.5 * delta + (lp[k - 1] - lp[k]) / delta;
            mt_raw_[k] = raw;
            mt_[k] = std::clamp(raw, -0.95 * delta, -0.05 * delta);
        }
    }

    double cell_lo(int j) const { return j == 0 ? 0.0 : mt_[j]; }
    double cell_hi(int j) const {
        const int m = leader_->m();
        if (j == m)
            return s_max_local_;
        return (leader_->fixed_point(j + 1) - leader_->fixed_point(j)) + mt_[j + 1];
    }

    ValueSlope cell_eval(int j, double t) const {
        const auto& nodes = cells_[j];
        if (t <= nodes.front().t)
            return {nodes.front().f + nodes.front().d1 * (t - nodes.front().t), nodes.front().d1};
        const auto it = std::upper_bound(nodes.begin(), nodes.end(), t,
                                         [](double v, const detail::QuinticNode& n) { return v < n.t; });
        const std::size_t i = static_cast<std::size_t>(it - nodes.begin());
        if (i >= nodes.size())
            return {nodes.back().f, nodes.back().d1};
        return detail::quintic_eval(nodes[i - 1], nodes[i], t);
    }

    detail::QuinticNode exact_node(int j, double t) const {
        const PosteriorMoments p = engine_.eval(j, t);
        return {t, p.mean, p.var, p.mu3, 0.0};
    }

    void build_cache() {
        const LeaderStrategy& L = *leader_;
        const int m = L.m();
        const auto [ulo, uhi] = engine_.segment_range(m);
        (void)ulo;
        s_max_local_ = L.shape_local(m, uhi).value + 18.0;
        cells_.assign(m + 1, {});
        info_.assign(m + 1, {});
        const FollowerOptions& opt = engine_.options();
        parallel_for(m + 1, opt.threads, [&](int j) { build_cell(j); });
    }

    void build_cell(int j) {
        const FollowerOptions& opt = engine_.options();
        const LeaderStrategy& L = *leader_;
        const int m = L.m();
        const double lo = cell_lo(j), hi = cell_hi(j);
        std::vector<double> ts;
        const int nu = opt.uniform_knots;
        for (int i = 0; i <= nu; ++i)
            ts.push_back(lo + (hi - lo) * i / nu);
        // cluster near the transitions at either end, where a_F moves fast
        auto cluster = [&](double at, int k) {
            if (k < 1 || k > m)
                return;
            const double delta = L.fixed_point(k) - L.fixed_point(k - 1);
            const double w = 8.0 / delta;
            for (int i = 1; i <= opt.cluster_knots; ++i) {
                const double x = w * std::pow(static_cast<double>(i) / opt.cluster_knots, 2.0);
                for (double t : {at - x, at + x})
                    if (t > lo && t < hi)
                        ts.push_back(t);
            }
        };
        if (j >= 1)
            cluster(lo, j);
        if (j < m)
            cluster(hi, j + 1);
        std::sort(ts.begin(), ts.end());
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

        std::vector<detail::QuinticNode> nodes;
        nodes.reserve(ts.size() * 2);
        for (double t : ts)
            nodes.push_back(exact_node(j, t));

        const double x_ref = j < m ? 0.5 * (L.fixed_point(j + 1) - L.fixed_point(j))
                                   : 0.5 * (L.fixed_point(m) - (m >= 1 ? L.fixed_point(m - 1) : 0.0));
        const double r = std::max(L.r_L(), 1e-300);
        const double tol_abs = 1e-10 * r * std::max(x_ref, 1.0);
        auto tol_at = [&](double f) { return std::max(tol_abs, opt.cache_rel_tol * std::abs(f)); };

        // adaptive midpoint refinement
        std::vector<detail::QuinticNode> out;
        out.reserve(nodes.size() * 2);
        std::vector<std::pair<detail::QuinticNode, detail::QuinticNode>> stack;
        double max_err = 0.0;
        int total = static_cast<int>(nodes.size());
        out.push_back(nodes.front());
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
            stack.clear();
            stack.emplace_back(nodes[i], nodes[i + 1]);
            // depth-first, left to right, so `out` stays sorted
            while (!stack.empty()) {
                auto [a, b] = stack.back();
                stack.pop_back();
                const double tm = 0.5 * (a.t + b.t);
                bool split = false;
                detail::QuinticNode mid{};
                if (tm > a.t && tm < b.t && b.t - a.t > 1e-9 * std::max(1.0, std::abs(tm)) &&
                    total < opt.max_knots_per_cell) {
                    mid = exact_node(j, tm);
                    const double interp = detail::quintic_eval(a, b, tm).value;
                    mid.err = std::abs(interp - mid.f);
                    split = mid.err > tol_at(mid.f);
                }
                if (split) {
                    ++total;
                    stack.emplace_back(mid, b);
                    stack.emplace_back(a, mid);
                } else {
                    max_err = std::max(max_err, mid.err);
                    out.push_back(b);
                }
            }
        }
        CacheCellInfo info;
        info.cell = j;
        info.t_lo = lo;
        info.t_hi = hi;
        info.knots = static_cast<int>(out.size());
        info.max_error = max_err;
        info.tolerance = tol_abs;
        cells_[j] = std::move(out);
        info_[j] = info;
    }

    std::shared_ptr<const LeaderStrategy> leader_;
    detail::PosteriorEngine engine_;
    std::vector<double> mt_, mt_raw_;
    double s_max_local_ = 0.0;
    std::vector<std::vector<detail::QuinticNode>> cells_;
    std::vector<CacheCellInfo> info_;
};

/// Follower best response to @p leader.
inline FollowerStrategy follower_br(const LeaderStrategy& leader, const FollowerOptions& opt = {}) {
    return FollowerStrategy(std::make_shared<FollowerBestResponse>(leader, opt));
}

inline const FollowerBestResponse* as_best_response(const FollowerStrategy& f) {
    return dynamic_cast<const FollowerBestResponse*>(&f.model());
}

/// d a_F / ds = Var[a_L | s], by direct quadrature.
inline double follower_br_derivative(const FollowerStrategy& f, double s) {
    require_finite(s, "follower_br_derivative");
    const auto* br = as_best_response(f);
    if (!br)
        throw UsageError("follower_br_derivative: follower is not a best response");
    return br->exact(s).var;
}

} // namespace wits

#endif
