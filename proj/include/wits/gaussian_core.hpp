// -*- c++ -*-
/**
 * @file gaussian_core.hpp
 * @brief Standard normal special functions, truncated-normal moments and an
 *        adaptive Gauss-Legendre panel integrator.
 */
#ifndef WITS_GAUSSIAN_CORE_HPP
#define WITS_GAUSSIAN_CORE_HPP

#include "wits/errors.hpp"

#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace wits {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;
inline constexpr double kSqrt2 = 1.41421356237309504880168872421;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline void require_finite(double x, const char* what) {
    if (!std::isfinite(x))
        throw DomainError(std::string(what) + ": non-finite input");
}

inline double log_std_pdf(double x) {
    require_finite(x, "log_std_pdf");
    return -0.5 * x * x - kLogSqrt2Pi;
}

inline double std_pdf(double x) { return std::exp(log_std_pdf(x)); }

namespace detail {

// (1 - Phi(h)) / phi(h) by the continued fraction 1/(h+1/(h+2/(h+...))).
// Only used for h > 8 where 60 levels are far more than enough.
inline double inverse_mills_cf(double h) {
    double t = h;
    for (int n = 60; n >= 1; --n)
        t = h + n / t;
    return 1.0 / t;
}

inline constexpr double kMillsSwitch = 8.0;

} // namespace detail

/// ln(1 - Phi(x)), accurate far into both tails.
inline double log_std_ccdf(double x) {
    require_finite(x, "log_std_ccdf");
    if (x > detail::kMillsSwitch)
        return log_std_pdf(x) + std::log(detail::inverse_mills_cf(x));
    if (x < -detail::kMillsSwitch)
        return std::log1p(-std::exp(log_std_ccdf(-x)));
    return std::log(0.5 * std::erfc(x / kSqrt2));
}

/// 1 - Phi(x).
inline double std_ccdf(double x) {
    require_finite(x, "std_ccdf");
    if (x > detail::kMillsSwitch)
        return std::exp(log_std_ccdf(x));
    return 0.5 * std::erfc(x / kSqrt2);
}

inline double std_cdf(double x) {
    require_finite(x, "std_cdf");
    return std_ccdf(-x);
}

inline double log_std_cdf(double x) {
    require_finite(x, "log_std_cdf");
    return log_std_ccdf(-x);
}

/// Mills ratio rho(h) = phi(h) / (1 - Phi(h)).
inline double mills_ratio(double h) {
    require_finite(h, "mills_ratio");
    if (h > detail::kMillsSwitch)
        return 1.0 / detail::inverse_mills_cf(h);
    return std_pdf(h) / std_ccdf(h);
}

/// ln P[a <= Z <= b] for standard normal Z; a < b, either end may be infinite.
inline double log_std_mass(double a, double b) {
    if (!(a < b))
        throw DomainError("log_std_mass: empty interval");
    if (a >= 0.0) {
        const double la = log_std_ccdf(a);
        if (b == kInf)
            return la;
        return la + std::log(-std::expm1(log_std_ccdf(b) - la));
    }
    if (b <= 0.0)
        return log_std_mass(-b, -a);
    const double upper = (b == kInf) ? 0.0 : std_ccdf(b);
    const double lower = (a == -kInf) ? 0.0 : std_ccdf(-a);
    return std::log1p(-(upper + lower));
}

inline double log_sum_exp(std::span<const double> xs) {
    double mx = -kInf;
    for (double x : xs)
        mx = std::max(mx, x);
    if (mx == -kInf)
        return -kInf;
    double acc = 0.0;
    for (double x : xs)
        acc += std::exp(x - mx);
    return mx + std::log(acc);
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rules

struct GaussLegendreRule {
    std::vector<double> nodes;   // on [-1, 1], ascending
    std::vector<double> weights;
};

inline constexpr int kMaxPanelOrder = 128;

inline const GaussLegendreRule& gauss_legendre(int n) {
    if (n < 2 || n > kMaxPanelOrder)
        throw DomainError("gauss_legendre: order out of range");
    static std::array<std::once_flag, kMaxPanelOrder + 1> flags;
    static std::array<GaussLegendreRule, kMaxPanelOrder + 1> rules;
    std::call_once(flags[n], [n] {
        const std::vector<double> zeros = boost::math::legendre_p_zeros<double>(n);
        GaussLegendreRule rule;
        for (double z : zeros) {
            const double dp = boost::math::legendre_p_prime(n, z);
            const double w = 2.0 / ((1.0 - z * z) * dp * dp);
            rule.nodes.push_back(z);
            rule.weights.push_back(w);
            if (z != 0.0) {
                rule.nodes.push_back(-z);
                rule.weights.push_back(w);
            }
        }
        std::vector<std::size_t> idx(rule.nodes.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            idx[i] = i;
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return rule.nodes[a] < rule.nodes[b]; });
        GaussLegendreRule sorted;
        for (std::size_t i : idx) {
            sorted.nodes.push_back(rule.nodes[i]);
            sorted.weights.push_back(rule.weights[i]);
        }
        rules[n] = std::move(sorted);
    });
    return rules[n];
}

// ---------------------------------------------------------------------------
// Quadrature

struct QuadratureSpec {
    int panel_order = 16;
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    double tail_cutoff_sigmas = 10.0;
    int max_panels = 2000;

    void validate() const {
        if (panel_order < 2 || panel_order > kMaxPanelOrder)
            throw DomainError("QuadratureSpec: panel_order must be in [2, 128]");
        if (!(abs_tol > 0.0))
            throw DomainError("QuadratureSpec: abs_tol must be > 0");
        if (!(rel_tol > 0.0))
            throw DomainError("QuadratureSpec: rel_tol must be > 0");
        if (!(tail_cutoff_sigmas >= 8.0))
            throw DomainError("QuadratureSpec: tail_cutoff_sigmas must be >= 8");
        if (max_panels < 1)
            throw DomainError("QuadratureSpec: max_panels must be >= 1");
    }
};

template <std::size_t N>
struct VecIntegral {
    std::array<double, N> value{};
    std::array<double, N> error{};
    std::array<double, N> l1{};   // integral of |f_c|, the reference for rel_tol
    int panels = 0;
    bool converged = true;
};

struct Integral {
    double value = 0.0;
    double error = 0.0;
    int panels = 0;
};

namespace detail {

template <std::size_t N>
struct PanelSums {
    std::array<double, N> val{};
    std::array<double, N> abs{};
};

template <std::size_t N, class F>
PanelSums<N> gl_panel(F& f, double a, double b, const GaussLegendreRule& rule) {
    PanelSums<N> out;
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const std::array<double, N> v = f(mid + half * rule.nodes[i]);
        const double w = rule.weights[i] * half;
        for (std::size_t c = 0; c < N; ++c) {
            out.val[c] += w * v[c];
            out.abs[c] += w * std::abs(v[c]);
        }
    }
    return out;
}

template <std::size_t N>
struct Panel {
    double a, b;
    PanelSums<N> left, right;
    std::array<double, N> err;
};

} // namespace detail

/**
 * Adaptive Gauss-Legendre integration of a vector-valued integrand over a
 * finite interval partitioned by @p breaks (sorted, at least two entries).
 *
 * Each panel is compared against its two halves; the difference is the
 * panel's error estimate. Component c is accepted when the summed error is
 * below max(abs_tol, rel_tol * integral of |f_c|). The panel with the worst
 * error relative to its tolerance is split until all components pass or
 * max_panels is reached.
 */
template <std::size_t N, class F>
VecIntegral<N> integrate_panels(F&& f, std::span<const double> breaks, const QuadratureSpec& spec,
                                bool throw_on_failure = true) {
    if (breaks.size() < 2)
        throw DomainError("integrate: need at least one panel");
    const GaussLegendreRule& rule = gauss_legendre(spec.panel_order);
    std::vector<detail::Panel<N>> panels;
    panels.reserve(64);
    auto make_panel = [&](double a, double b, const detail::PanelSums<N>* whole) {
        detail::Panel<N> p{a, b, {}, {}, {}};
        const double m = 0.5 * (a + b);
        detail::PanelSums<N> w = whole ? *whole : detail::gl_panel<N>(f, a, b, rule);
        p.left = detail::gl_panel<N>(f, a, m, rule);
        p.right = detail::gl_panel<N>(f, m, b, rule);
        for (std::size_t c = 0; c < N; ++c)
            p.err[c] = std::abs(w.val[c] - p.left.val[c] - p.right.val[c]);
        return p;
    };
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double a = breaks[i], b = breaks[i + 1];
        if (!(std::isfinite(a) && std::isfinite(b)))
            throw DomainError("integrate: breakpoints must be finite");
        if (b < a)
            throw DomainError("integrate: breakpoints must be sorted");
        if (b > a)
            panels.push_back(make_panel(a, b, nullptr));
    }
    VecIntegral<N> out;
    if (panels.empty())
        return out;
    while (true) {
        std::array<double, N> val{}, err{}, l1{}, tol{};
        for (const auto& p : panels)
            for (std::size_t c = 0; c < N; ++c) {
                val[c] += p.left.val[c] + p.right.val[c];
                err[c] += p.err[c];
                l1[c] += p.left.abs[c] + p.right.abs[c];
            }
        bool ok = true;
        for (std::size_t c = 0; c < N; ++c) {
            tol[c] = std::max(spec.abs_tol, spec.rel_tol * l1[c]);
            if (!(err[c] <= tol[c]))
                ok = false;
        }
        out.value = val;
        out.error = err;
        out.l1 = l1;
        out.panels = static_cast<int>(panels.size());
        if (ok)
            return out;
        if (static_cast<int>(panels.size()) >= spec.max_panels) {
            out.converged = false;
            if (throw_on_failure)
                throw NonConvergence("integrate: max_panels reached", val[0], err[0]);
            return out;
        }
        std::size_t worst = 0;
        double worst_ratio = -1.0;
        for (std::size_t i = 0; i < panels.size(); ++i) {
            double ratio = 0.0;
            for (std::size_t c = 0; c < N; ++c)
                ratio = std::max(ratio, panels[i].err[c] / tol[c]);
            if (ratio > worst_ratio) {
                worst_ratio = ratio;
                worst = i;
            }
        }
        const detail::Panel<N> p = panels[worst];
        const double m = 0.5 * (p.a + p.b);
        if (!(m > p.a && m < p.b)) {
            // panel cannot be split further in floating point
            out.converged = false;
            if (throw_on_failure)
                throw NonConvergence("integrate: panel underflow", val[0], err[0]);
            return out;
        }
        panels[worst] = make_panel(p.a, m, &p.left);
        panels.insert(panels.begin() + static_cast<std::ptrdiff_t>(worst) + 1,
                      make_panel(m, p.b, &p.right));
    }
}

/// Integration domain; infinite ends are truncated at center +- cutoff*scale.
struct Domain {
    double lo;
    double hi;
    double center = 0.0;
    double scale = 1.0;
};

/**
 * Scalar adaptive integration over a possibly infinite domain. Infinite ends
 * are cut at tail_cutoff_sigmas * scale from center. The truncation error is
 * bounded assuming |f| decays at least like a Gaussian of the given scale
 * beyond the cut: |f(x_c)| * scale / cutoff per truncated end, added to the
 * reported error.
 */
template <class F>
Integral integrate(F&& f, const Domain& dom, const QuadratureSpec& spec) {
    spec.validate();
    if (!(dom.lo < dom.hi))
        throw DomainError("integrate: empty domain");
    if (!(dom.scale > 0.0) || !std::isfinite(dom.center))
        throw DomainError("integrate: bad scale or center");
    const double t = spec.tail_cutoff_sigmas;
    double lo = dom.lo, hi = dom.hi, trunc = 0.0;
    if (lo == -kInf) {
        lo = std::min(dom.center - t * dom.scale, hi - dom.scale);
        trunc += std::abs(f(lo)) * dom.scale / t;
    }
    if (hi == kInf) {
        hi = std::max(dom.center + t * dom.scale, lo + dom.scale);
        trunc += std::abs(f(hi)) * dom.scale / t;
    }
    const std::array<double, 2> br{lo, hi};
    auto vf = [&](double x) { return std::array<double, 1>{f(x)}; };
    const auto r = integrate_panels<1>(vf, br, spec);
    return Integral{r.value[0], r.error[0] + trunc, r.panels};
}

// ---------------------------------------------------------------------------
// Truncated normal moments

struct TruncatedMoments {
    double prob = 0.0;
    double log_prob = -kInf;
    double mean = 0.0;
    double var = 0.0;
    bool negligible = false;   // prob below 1e-300; mean/var still from log-domain forms
};

namespace detail {

// Moments of the standard normal on a short finite interval by composite
// Gauss-Legendre, with the density scaled by phi at the point of [a, b]
// closest to zero so the exponent stays small.
inline TruncatedMoments narrow_std_moments(double a, double b) {
    const GaussLegendreRule& rule = gauss_legendre(32);
    const double x0 = (a > 0.0) ? a : (b < 0.0 ? b : 0.0);
    constexpr int kPanels = 2;
    const double width = (b - a) / kPanels;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int p = 0; p < kPanels; ++p) {
        const double pa = a + p * width - x0;
        const double half = 0.5 * width;
        const double mid = pa + half;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double u = mid + half * rule.nodes[i];
            const double w = rule.weights[i] * half * std::exp(-u * (2.0 * x0 + u) * 0.5);
            s0 += w;
            s1 += w * u;
            s2 += w * u * u;
        }
    }
    TruncatedMoments m;
    const double off = s1 / s0;
    m.log_prob = log_std_pdf(x0) + std::log(s0);
    m.prob = std::exp(m.log_prob);
    m.mean = x0 + off;
    m.var = std::max(0.0, s2 / s0 - off * off);
    return m;
}

// Standard-normal moments on [a, b] with a >= 0 (b may be +inf).
inline TruncatedMoments right_std_moments(double a, double b) {
    TruncatedMoments m;
    const double la = log_std_ccdf(a);
    const double rho = mills_ratio(a);
    if (b == kInf) {
        m.log_prob = la;
        m.mean = rho;
        m.var = std::max(0.0, 1.0 - rho * (rho - a));
    } else {
        const double dccdf = -std::expm1(log_std_ccdf(b) - la);   // 1 - Q(b)/Q(a)
        const double rpdf = std::exp(-0.5 * (b - a) * (b + a));   // phi(b)/phi(a)
        m.log_prob = la + std::log(dccdf);
        const double mean = rho * (1.0 - rpdf) / dccdf;
        const double tail = rho * (a - b * rpdf) / dccdf;   // (a phi(a) - b phi(b)) / P
        m.mean = mean;
        m.var = std::max(0.0, 1.0 + tail - mean * mean);
    }
    m.prob = std::exp(m.log_prob);
    return m;
}

} // namespace detail

/**
 * Moments of N(mu, sigma^2) truncated to [a, b]. Half-infinite intervals are
 * supported. Intervals in a single tail use Mills-ratio forms so that neither
 * the mass nor the mean loses precision; narrow finite intervals use a fixed
 * quadrature rule.
 */
inline TruncatedMoments truncated_moments(double a, double b, double mu, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mu))
        throw DomainError("truncated_moments: need finite mu and sigma > 0");
    if (std::isnan(a) || std::isnan(b) || !(a < b))
        throw DomainError("truncated_moments: need a < b");
    const double alpha = (a - mu) / sigma;
    const double beta = (b - mu) / sigma;
    TruncatedMoments s;
    const bool finite = std::isfinite(alpha) && std::isfinite(beta);
    const double near = finite ? std::min({std::abs(alpha), std::abs(beta), (alpha < 0.0 && beta > 0.0) ? 0.0 : kInf}) : kInf;
    if (finite && beta - alpha <= 2.0 && near * (beta - alpha) <= 4.0) {
        s = detail::narrow_std_moments(alpha, beta);
    } else if (alpha >= 0.0) {
        s = detail::right_std_moments(alpha, beta);
    } else if (beta <= 0.0) {
        s = detail::right_std_moments(-beta, -alpha);
        s.mean = -s.mean;
    } else {
        s.log_prob = log_std_mass(alpha, beta);
        s.prob = std::exp(s.log_prob);
        const double pa = std::isfinite(alpha) ? std_pdf(alpha) : 0.0;
        const double pb = std::isfinite(beta) ? std_pdf(beta) : 0.0;
        const double ta = std::isfinite(alpha) ? alpha * pa : 0.0;
        const double tb = std::isfinite(beta) ? beta * pb : 0.0;
        s.mean = (pa - pb) / s.prob;
        s.var = std::max(0.0, 1.0 + (ta - tb) / s.prob - s.mean * s.mean);
    }
    TruncatedMoments out;
    out.log_prob = s.log_prob;
    out.prob = s.prob;
    out.negligible = s.log_prob < std::log(1e-300);
    out.mean = mu + sigma * s.mean;
    out.var = sigma * sigma * s.var;
    if (std::isfinite(a))
        out.mean = std::max(out.mean, a);
    if (std::isfinite(b))
        out.mean = std::min(out.mean, b);
    return out;
}

} // namespace wits

#endif
