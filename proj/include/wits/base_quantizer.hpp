// -*- c++ -*-
/**
 * @file base_quantizer.hpp
 * @brief The (2m+1)-level minimum-MSE scalar quantizer of N(0, sigma^2) and
 *        checks of its structural bounds.
 */
#ifndef WITS_BASE_QUANTIZER_HPP
#define WITS_BASE_QUANTIZER_HPP

#include "wits/errors.hpp"
#include "wits/gaussian_core.hpp"
#include "wits/report.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace wits {

/**
 * Odd-symmetric quantizer with cells B_k = [b_k, b_{k+1}) for k >= 1,
 * B_0 = (-b_1, b_1), b_{m+1} = +inf. Only the k >= 0 half is stored.
 */
struct BaseConfig {
    int m = 0;
    double sigma = 1.0;
    std::vector<double> b;   // b[k] for k = 1..m; b[0] = 0 is a placeholder
    std::vector<double> c;   // c[k] for k = 0..m
    std::vector<double> x;   // x[k] = (c[k]-c[k-1])/2 for k = 1..m; x[0] = 0
    double residual = 0.0;   // stationarity residual / sigma at exit
    int iterations = 0;

    /// b_k for -m-1 <= k <= m+1, with infinite outer ends.
    double endpoint(int k) const {
        if (k > m + 1 || k < -m - 1 || k == 0)
            throw UsageError("BaseConfig::endpoint: index out of range");
        if (k == m + 1)
            return kInf;
        if (k == -m - 1)
            return -kInf;
        return k > 0 ? b[k] : -b[-k];
    }
    double centroid(int k) const {
        if (k > m || k < -m)
            throw UsageError("BaseConfig::centroid: index out of range");
        return k >= 0 ? c[k] : -c[-k];
    }
    double half_gap(int k) const {
        if (k < 1 || k > m)
            throw UsageError("BaseConfig::half_gap: index out of range");
        return x[k];
    }
    /// Lower and upper ends of cell k >= 0 (cell 0 is symmetric).
    double cell_lo(int k) const { return k == 0 ? (m == 0 ? -kInf : -b[1]) : b[k]; }
    double cell_hi(int k) const { return k == m ? kInf : b[k + 1]; }

    /// Prior moments of cell k >= 0.
    TruncatedMoments cell_moments(int k) const {
        return truncated_moments(cell_lo(k), cell_hi(k), 0.0, sigma);
    }
    double log_cell_mass(int k) const { return cell_moments(k).log_prob; }

    /// max_k |c_k - E[theta | B_k]| and |b_k - (c_{k-1}+c_k)/2|, divided by sigma.
    double stationarity_residual() const {
        double r = 0.0;
        for (int k = 1; k <= m; ++k) {
            r = std::max(r, std::abs(c[k] - cell_moments(k).mean));
            r = std::max(r, std::abs(b[k] - 0.5 * (c[k - 1] + c[k])));
        }
        return r / sigma;
    }
};

struct BaseBuildOptions {
    double tol = 1e-13;     // on the sigma-scaled residual
    int max_iterations = 400;
};

namespace detail {

inline double std_quantile(double p) { return -kSqrt2 * boost::math::erfc_inv(2.0 * p); }

// Centroids of unit-variance cells for thresholds b[1..m].
inline void unit_centroids(const std::vector<double>& b, int m, std::vector<double>& c,
                           std::vector<double>* log_mass = nullptr) {
    c.assign(m + 1, 0.0);
    if (log_mass)
        log_mass->assign(m + 1, 0.0);
    for (int k = 0; k <= m; ++k) {
        if (k == 0) {
            if (log_mass)
                (*log_mass)[0] = m == 0 ? 0.0 : log_std_mass(-b[1], b[1]);
            continue;
        }
        const double hi = (k == m) ? kInf : b[k + 1];
        const TruncatedMoments t = truncated_moments(b[k], hi, 0.0, 1.0);
        c[k] = t.mean;
        if (log_mass)
            (*log_mass)[k] = t.log_prob;
    }
}

inline double unit_residual(const std::vector<double>& b, const std::vector<double>& c, int m,
                            std::vector<double>* f = nullptr) {
    double r = 0.0;
    if (f)
        f->assign(m + 1, 0.0);
    for (int k = 1; k <= m; ++k) {
        const double fk = b[k] - 0.5 * (c[k - 1] + c[k]);
        if (f)
            (*f)[k] = fk;
        r = std::max(r, std::abs(fk));
    }
    return r;
}

inline bool strictly_increasing_positive(const std::vector<double>& b, int m) {
    if (m >= 1 && !(b[1] > 0.0))
        return false;
    for (int k = 2; k <= m; ++k)
        if (!(b[k] > b[k - 1]))
            return false;
    return true;
}

// Solves the tridiagonal system lower[k] y[k-1] + diag[k] y[k] + upper[k] y[k+1] = rhs[k]
// for k = 1..m in place (Thomas algorithm).
inline void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag,
                              std::vector<double>& upper, std::vector<double>& rhs, int m) {
    for (int k = 2; k <= m; ++k) {
        const double w = lower[k] / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    rhs[m] /= diag[m];
    for (int k = m - 1; k >= 1; --k)
        rhs[k] = (rhs[k] - upper[k] * rhs[k + 1]) / diag[k];
}

} // namespace detail

/**
 * Builds the optimal (2m+1)-level quantizer of N(0, sigma^2).
 *
 * The fixed point of the Lloyd map is solved at unit scale on the thresholds
 * b_1..b_m, with centroids recomputed from the thresholds each step. Damped
 * Newton steps on F_k = b_k - (c_{k-1}+c_k)/2 use the exact tridiagonal
 * Jacobian; a plain Lloyd update is taken whenever the Newton step fails to
 * reduce the residual. The unit solution is then scaled by sigma.
 *
 * @throws NonConvergence with the last residual if the iteration cap is hit.
 */
inline BaseConfig build_base(int m, double sigma, const BaseBuildOptions& opt = {}) {
    if (m < 0)
        throw DomainError("build_base: m must be >= 0");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw DomainError("build_base: sigma must be finite and > 0");
    if (!(opt.tol >= 1e-14))
        throw DomainError("build_base: tol must be >= 1e-14");
    BaseConfig cfg;
    cfg.m = m;
    cfg.sigma = sigma;
    cfg.b.assign(m + 1, 0.0);
    cfg.c.assign(m + 1, 0.0);
    cfg.x.assign(m + 1, 0.0);
    if (m == 0)
        return cfg;

    // equiprobable start: each of the 2m+1 cells carries mass 1/(2m+1)
    std::vector<double> b(m + 1, 0.0), c, f, trial(m + 1, 0.0), trial_c;
    for (int k = 1; k <= m; ++k)
        b[k] = detail::std_quantile(0.5 + (2.0 * k - 1.0) / (2.0 * (2 * m + 1)));
    detail::unit_centroids(b, m, c);
    double res = detail::unit_residual(b, c, m, &f);

    std::vector<double> lower(m + 1), diag(m + 1), upper(m + 1), rhs(m + 1);
    std::vector<double> dc_lo(m + 1, 0.0), dc_hi(m + 1, 0.0);   // dc_k/db_k, dc_k/db_{k+1}
    int it = 0;
    int polish = 0;
    while (true) {
        if (res < opt.tol) {
            // two extra Newton steps drive the residual to rounding level
            if (++polish > 2)
                break;
        }
        if (it >= opt.max_iterations)
            throw NonConvergence("build_base: iteration cap reached", b[1] * sigma, res);
        ++it;
        for (int k = 1; k <= m; ++k) {
            const double hi = (k == m) ? kInf : b[k + 1];
            const double lp = truncated_moments(b[k], hi, 0.0, 1.0).log_prob;
            dc_lo[k] = std::exp(log_std_pdf(b[k]) - lp) * (c[k] - b[k]);
            dc_hi[k] = (k == m) ? 0.0 : std::exp(log_std_pdf(hi) - lp) * (hi - c[k]);
        }
        for (int k = 1; k <= m; ++k) {
            lower[k] = (k >= 2) ? -0.5 * dc_lo[k - 1] : 0.0;
            // c_0 is pinned at 0 by symmetry
            const double prev_hi = (k >= 2) ? dc_hi[k - 1] : 0.0;
            diag[k] = 1.0 - 0.5 * (prev_hi + dc_lo[k]);
            upper[k] = (k < m) ? -0.5 * dc_hi[k] : 0.0;
            rhs[k] = -f[k];
        }
        detail::solve_tridiagonal(lower, diag, upper, rhs, m);
        bool accepted = false;
        double step = 1.0;
        for (int tries = 0; tries < 40 && !accepted; ++tries, step *= 0.5) {
            for (int k = 1; k <= m; ++k)
                trial[k] = b[k] + step * rhs[k];
            if (!detail::strictly_increasing_positive(trial, m))
                continue;
            detail::unit_centroids(trial, m, trial_c);
            const double r = detail::unit_residual(trial, trial_c, m);
            if (r < res || (res < opt.tol && r <= res)) {
                accepted = true;
                b.swap(trial);
                c.swap(trial_c);
            }
        }
        if (!accepted) {
            if (res < opt.tol)
                break;
            for (int k = 1; k <= m; ++k)
                b[k] = 0.5 * (c[k - 1] + c[k]);
            detail::unit_centroids(b, m, c);
        }
        res = detail::unit_residual(b, c, m, &f);
    }
    for (int k = 1; k <= m; ++k) {
        cfg.b[k] = sigma * b[k];
        cfg.c[k] = sigma * c[k];
        cfg.x[k] = 0.5 * (cfg.c[k] - cfg.c[k - 1]);
    }
    cfg.residual = res;
    cfg.iterations = it;
    return cfg;
}

/// Mean-square error of nearest-centroid quantization, sum_k P_k Var_k.
inline double base_distortion(const BaseConfig& cfg) {
    if (cfg.m == 0)
        return cfg.sigma * cfg.sigma;
    double tail = 0.0;
    for (int k = cfg.m; k >= 1; --k) {
        const TruncatedMoments t = cfg.cell_moments(k);
        const double d = cfg.c[k] - t.mean;
        tail += t.prob * (t.var + d * d);
    }
    const TruncatedMoments t0 = cfg.cell_moments(0);
    return 2.0 * tail + t0.prob * t0.var;
}

inline double panter_dite_constant() { return std::sqrt(3.0) * std::numbers::pi / 2.0; }
inline double half_gap_limit() { return std::sqrt(6.0 * std::numbers::pi) / 2.0; }

/**
 * Checks the structural bounds of the base quantizer. Parts:
 *  (i)   1 - (x_m/s)^2 <= c_m x_m / s^2 <= 1, and >= 3/4 when m >= 2
 *  (ii)  phi(b_k/s)/phi(c_k/s) <= (x_{k+1}/x_k)^2 <= phi(b_k/s)/phi(b_{k+1}/s), 1 <= x_{k+1}/x_k <= e
 *  (iii) P(B_k)/P(B_j) <= (1+e)/2 for 0 <= j <= k <= m
 *  (iv)  brackets on x_1, c_m and x_m in terms of m (m >= 2; vacuous sides when ln m < 3)
 */
inline BoundReport verify_lemma1(const BaseConfig& cfg) {
    const int m = cfg.m;
    if (m < 1)
        throw UsageError("verify_lemma1: requires m >= 1");
    const double s = cfg.sigma;
    BoundReport rep;
    const double cm = cfg.c[m] / s, xm = cfg.x[m] / s;
    rep.add(lower_bound_record("i.cx_lower", m, cm * xm, 1.0 - xm * xm));
    rep.add(upper_bound_record("i.cx_upper", m, cm * xm, 1.0));
    if (m >= 2)
        rep.add(lower_bound_record("i.cx_three_quarters", m, cm * xm, 0.75));

    for (int k = 1; k < m; ++k) {
        const double bk = cfg.b[k] / s, bk1 = cfg.b[k + 1] / s, ck = cfg.c[k] / s;
        const double ratio = cfg.x[k + 1] / cfg.x[k];
        const double sq = ratio * ratio;
        rep.add(lower_bound_record("ii.ratio_sq_lower", k, sq, std::exp(log_std_pdf(bk) - log_std_pdf(ck))));
        rep.add(upper_bound_record("ii.ratio_sq_upper", k, sq, std::exp(log_std_pdf(bk) - log_std_pdf(bk1))));
        rep.add(lower_bound_record("ii.ratio_ge_1", k, ratio, 1.0));
        rep.add(upper_bound_record("ii.ratio_le_e", k, ratio, std::numbers::e));
    }

    // P(B_k)/P(B_j) over j <= k is maximized by the smallest P(B_j) with j <= k
    std::vector<double> lp(m + 1);
    for (int k = 0; k <= m; ++k)
        lp[k] = cfg.log_cell_mass(k);
    double min_prefix = lp[0];
    const double bound3 = (1.0 + std::numbers::e) / 2.0;
    for (int k = 0; k <= m; ++k) {
        min_prefix = std::min(min_prefix, lp[k]);
        rep.add(upper_bound_record("iii.mass_ratio", k, std::exp(lp[k] - min_prefix), bound3));
    }

    if (m >= 2) {
        const double md = m, lm = std::log(md);
        const double pi = std::numbers::pi, e = std::numbers::e;
        const double x1 = cfg.x[1] / s;
        rep.add(lower_bound_record("iv.x1_lower", m, x1, std::sqrt(pi) / (2.0 * e * md)));
        rep.add(upper_bound_record("iv.x1_upper", m, x1, std::sqrt(2.0 * pi * e) / (2.0 * md)));
        if (lm > 3.0)
            rep.add(lower_bound_record("iv.cm_lower", m, cm, 2.0 * std::sqrt(lm - 3.0)));
        else
            rep.add(vacuous_record("iv.cm_lower", m, cm));
        rep.add(upper_bound_record("iv.cm_upper", m, cm, 2.0 * std::sqrt(2.0 * lm + 2.0)));
        rep.add(lower_bound_record("iv.xm_lower", m, xm, 3.0 / (8.0 * std::sqrt(2.0 * lm + 2.0))));
        if (lm > 3.0)
            rep.add(upper_bound_record("iv.xm_upper", m, xm, 1.0 / (2.0 * std::sqrt(lm - 3.0))));
        else
            rep.add(vacuous_record("iv.xm_upper", m, xm));
    }
    return rep;
}

struct AsymptoticReport {
    double half_gap_ratio = 0.0;      // (2m+1) x_1 / sigma over sqrt(6 pi)/2
    double distortion_vs_gap = 0.0;   // D / (x_1^2 / sqrt 3)
    double panter_dite_ratio = 0.0;   // D (2m+1)^2 / sigma^2 over sqrt(3) pi / 2
    double support_ratio = 0.0;       // b_m / sigma, reported only
    double distortion = 0.0;
    BoundReport lemma1;
};

inline AsymptoticReport asymptotic_checks(const BaseConfig& cfg) {
    if (cfg.m < 2)
        throw UsageError("asymptotic_checks: requires m >= 2");
    AsymptoticReport r;
    const double s = cfg.sigma, n = 2.0 * cfg.m + 1.0;
    const double d = base_distortion(cfg);
    r.distortion = d;
    r.half_gap_ratio = n * cfg.x[1] / s / half_gap_limit();
    r.distortion_vs_gap = d / (cfg.x[1] * cfg.x[1] / std::sqrt(3.0));
    r.panter_dite_ratio = d * n * n / (s * s) / panter_dite_constant();
    r.support_ratio = cfg.b[cfg.m] / s;
    r.lemma1 = verify_lemma1(cfg);
    return r;
}

} // namespace wits

#endif
