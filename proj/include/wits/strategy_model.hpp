// -*- c++ -*-
/**
 * @file strategy_model.hpp
 * @brief Leader and follower strategy representations, the slopey quantizer
 *        built from a base configuration, and membership checks for the
 *        invariant strategy class.
 *
 * A leader strategy is stored in local offset coordinates: fixed points c_k
 * are absolute, every other quantity is an offset from a nearby fixed point.
 * This keeps offsets of order one representable when c_k is of order 1e6.
 */
#ifndef WITS_STRATEGY_MODEL_HPP
#define WITS_STRATEGY_MODEL_HPP

#include "wits/base_quantizer.hpp"
#include "wits/errors.hpp"
#include "wits/gaussian_core.hpp"
#include "wits/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace wits {

struct ValueSlope {
    double value = 0.0;
    double slope = 0.0;
};

/// g(u) = a_L(c_k + u) - c_k with constant slope.
struct LinearShape {
    double slope = 0.0;
};

/// g(u) sampled at ascending knots with values and derivatives; cubic Hermite
/// between knots and linear extension beyond the end knots.
struct SampledShape {
    std::vector<double> u;
    std::vector<double> g;
    std::vector<double> dg;
};

using SegmentShape = std::variant<LinearShape, SampledShape>;

namespace detail {

inline ValueSlope hermite_eval(const SampledShape& s, double u) {
    const std::size_t n = s.u.size();
    if (u <= s.u.front())
        return {s.g.front() + s.dg.front() * (u - s.u.front()), s.dg.front()};
    if (u >= s.u.back())
        return {s.g.back() + s.dg.back() * (u - s.u.back()), s.dg.back()};
    const std::size_t i =
        static_cast<std::size_t>(std::upper_bound(s.u.begin(), s.u.end(), u) - s.u.begin()) - 1;
    const std::size_t j = std::min(i + 1, n - 1);
    const double h = s.u[j] - s.u[i];
    const double t = (u - s.u[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    const double v = h00 * s.g[i] + h10 * h * s.dg[i] + h01 * s.g[j] + h11 * h * s.dg[j];
    const double d00 = (6 * t2 - 6 * t) / h, d10 = 3 * t2 - 4 * t + 1;
    const double d01 = (-6 * t2 + 6 * t) / h, d11 = 3 * t2 - 2 * t;
    const double d = d00 * s.g[i] + d10 * s.dg[i] + d01 * s.g[j] + d11 * s.dg[j];
    return {v, d};
}

inline ValueSlope shape_eval(const SegmentShape& shape, double u) {
    if (const auto* lin = std::get_if<LinearShape>(&shape))
        return {lin->slope * u, lin->slope};
    return hermite_eval(std::get<SampledShape>(shape), u);
}

inline void validate_shape(const SegmentShape& shape) {
    if (const auto* lin = std::get_if<LinearShape>(&shape)) {
        require_finite(lin->slope, "LinearShape.slope");
        return;
    }
    const auto& s = std::get<SampledShape>(shape);
    if (s.u.size() < 2 || s.g.size() != s.u.size() || s.dg.size() != s.u.size())
        throw UsageError("SampledShape: need >= 2 knots with matching value/slope arrays");
    for (std::size_t i = 0; i < s.u.size(); ++i) {
        require_finite(s.u[i], "SampledShape.u");
        require_finite(s.g[i], "SampledShape.g");
        require_finite(s.dg[i], "SampledShape.dg");
        if (i > 0 && !(s.u[i] > s.u[i - 1]))
            throw UsageError("SampledShape: knots must be strictly increasing");
    }
}

} // namespace detail

/// Geometry of one signed segment q in local coordinates u = theta - center.
struct SegmentView {
    int q = 0;
    double center = 0.0;
    double lo = -kInf;
    double hi = kInf;
};

/**
 * Odd, piecewise-smooth leader strategy theta -> a_L(theta) with 2m+1
 * segments. Segment k >= 0 is [b_k, b_{k+1}) with fixed point c_k, where
 * b_k = (c_{k-1}+c_k)/2 + beta_k. The shape of segment 0 is stored for u >= 0
 * and extended oddly. The shape of segment m extends linearly beyond its last
 * knot (the tail rule).
 */
class LeaderStrategy {
public:
    LeaderStrategy() : LeaderStrategy(0, 1.0, 0.0, {0.0}, {0.0}, {LinearShape{0.0}}) {}

    LeaderStrategy(int m, double sigma, double r_L, std::vector<double> c, std::vector<double> beta,
                   std::vector<SegmentShape> shapes)
        : m_(m), sigma_(sigma), r_L_(r_L), c_(std::move(c)), beta_(std::move(beta)),
          shapes_(std::move(shapes)) {
        validate();
        build_geometry();
    }

    int m() const noexcept { return m_; }
    double sigma() const noexcept { return sigma_; }
    double r_L() const noexcept { return r_L_; }
    const std::vector<double>& fixed_points() const noexcept { return c_; }
    const std::vector<double>& endpoint_offsets() const noexcept { return beta_; }
    const std::vector<SegmentShape>& shapes() const noexcept { return shapes_; }

    double fixed_point(int q) const { return q >= 0 ? c_.at(q) : -c_.at(-q); }
    /// b_k for 1 <= k <= m (absolute).
    double endpoint(int k) const { return b_.at(k); }
    /// b_k - (c_{k-1}+c_k)/2.
    double endpoint_offset(int k) const { return beta_.at(k); }

    /// Local domain of segment q (signed), u = theta - c_q.
    SegmentView segment(int q) const {
        if (q > m_ || q < -m_)
            throw UsageError("LeaderStrategy::segment: index out of range");
        const int k = std::abs(q);
        SegmentView v{q, c_[k], lo_[k], hi_[k]};
        if (q < 0) {
            v.center = -c_[k];
            v.lo = -hi_[k];
            v.hi = -lo_[k];
        }
        return v;
    }

    /// g_q(u) = a_L(c_q + u) - c_q and its derivative, u inside the segment.
    ValueSlope shape_local(int q, double u) const {
        const int k = std::abs(q);
        if (q < 0) {
            const ValueSlope v = shape_local(k, -u);
            return {-v.value, v.slope};
        }
        if (k == 0 && u < 0.0) {
            const ValueSlope v = detail::shape_eval(shapes_[0], -u);
            return {-v.value, v.slope};
        }
        return detail::shape_eval(shapes_[k], u);
    }

    /// Segment index q with theta in B_q.
    int segment_of(double theta) const {
        require_finite(theta, "LeaderStrategy::segment_of");
        if (theta < 0.0) {
            // B_{-k} = (b_{-k-1}, b_{-k}] mirrors [b_k, b_{k+1})
            return -segment_of_nonneg(-theta);
        }
        return segment_of_nonneg(theta);
    }

    double eval(double theta) const {
        require_finite(theta, "eval_leader");
        if (theta < 0.0)
            return -eval(-theta);
        const int k = segment_of_nonneg(theta);
        return c_[k] + shape_local(k, theta - c_[k]).value;
    }

    double slope(double theta) const {
        require_finite(theta, "LeaderStrategy::slope");
        const int q = segment_of(theta);
        return shape_local(q, theta - fixed_point(q)).slope;
    }

    /// Slope used beyond the last knot of the tail segment.
    double tail_slope() const { return shape_local(m_, 1e300).slope; }
    /// Local u at which the tail rule takes over (0 for a linear tail).
    double tail_start() const {
        if (const auto* s = std::get_if<SampledShape>(&shapes_[m_]))
            return s->u.back();
        return 0.0;
    }

private:
    int segment_of_nonneg(double theta) const {
        // b_[1..m] ascending; k = number of endpoints <= theta
        const auto it = std::upper_bound(b_.begin() + 1, b_.end(), theta);
        return static_cast<int>(it - (b_.begin() + 1));
    }

    void validate() const {
        if (m_ < 0)
            throw DomainError("LeaderStrategy: m must be >= 0");
        if (!(sigma_ > 0.0) || !std::isfinite(sigma_))
            throw DomainError("LeaderStrategy: sigma must be > 0");
        require_finite(r_L_, "LeaderStrategy: r_L");
        const auto n = static_cast<std::size_t>(m_ + 1);
        if (c_.size() != n || beta_.size() != n || shapes_.size() != n)
            throw UsageError("LeaderStrategy: expected m+1 fixed points, offsets and shapes");
        if (c_[0] != 0.0)
            throw UsageError("LeaderStrategy: c_0 must be 0");
        for (int k = 1; k <= m_; ++k) {
            require_finite(c_[k], "LeaderStrategy: c");
            require_finite(beta_[k], "LeaderStrategy: beta");
            if (!(c_[k] > c_[k - 1]))
                throw UsageError("LeaderStrategy: fixed points must be increasing");
        }
        for (const auto& s : shapes_)
            detail::validate_shape(s);
    }

    void build_geometry() {
        b_.assign(m_ + 1, 0.0);
        lo_.assign(m_ + 1, 0.0);
        hi_.assign(m_ + 1, 0.0);
        for (int k = 1; k <= m_; ++k)
            b_[k] = 0.5 * (c_[k - 1] + c_[k]) + beta_[k];
        for (int k = 0; k <= m_; ++k) {
            hi_[k] = (k == m_) ? kInf : 0.5 * (c_[k + 1] - c_[k]) + beta_[k + 1];
            if (k == 0)
                lo_[k] = -hi_[k];
            else
                lo_[k] = -0.5 * (c_[k] - c_[k - 1]) + beta_[k];
        }
        for (int k = 0; k <= m_; ++k)
            if (!(lo_[k] < 0.0 && hi_[k] > 0.0))
                throw UsageError("LeaderStrategy: fixed point outside its segment");
    }

    int m_;
    double sigma_;
    double r_L_;
    std::vector<double> c_;
    std::vector<double> beta_;
    std::vector<SegmentShape> shapes_;
    std::vector<double> b_, lo_, hi_;
};

inline double eval_leader(const LeaderStrategy& s, double theta) { return s.eval(theta); }

/// Piecewise-linear slopey quantizer: slope r_L through each base centroid.
inline LeaderStrategy slopey_from_base(const BaseConfig& cfg, double r_L) {
    if (!(r_L > 0.0 && r_L < 1.0))
        throw DomainError("slopey_from_base: r_L must be in (0,1)");
    std::vector<double> beta(cfg.m + 1, 0.0);
    for (int k = 1; k <= cfg.m; ++k)
        beta[k] = cfg.b[k] - 0.5 * (cfg.c[k - 1] + cfg.c[k]);
    std::vector<SegmentShape> shapes(cfg.m + 1, LinearShape{r_L});
    return LeaderStrategy(cfg.m, cfg.sigma, r_L, cfg.c, std::move(beta), std::move(shapes));
}

/// Test strategy a_L(theta) = lambda * theta (a single segment).
inline LeaderStrategy linear_leader(double lambda, double sigma) {
    return LeaderStrategy(0, sigma, 0.0, {0.0}, {0.0}, {LinearShape{lambda}});
}

// ---------------------------------------------------------------------------
// Followers

/// Interface for a follower map s -> a_F(s). Evaluation is relative to a
/// reference point so that callers holding large s = c_ref + t keep the
/// precision of t.
class FollowerModel {
public:
    virtual ~FollowerModel() = default;
    virtual std::string kind() const = 0;
    /// a_F(c_ref + t) - c_ref and d a_F / ds.
    virtual ValueSlope eval_local(double c_ref, double t) const = 0;
    /// Points in (t_lo, t_hi), relative to c_ref, where a_F jumps or changes
    /// rapidly; integrators split panels there.
    virtual std::vector<double> breaks_local(double /*c_ref*/, double /*t_lo*/, double /*t_hi*/) const {
        return {};
    }
};

class ZeroFollower final : public FollowerModel {
public:
    std::string kind() const override { return "zero"; }
    ValueSlope eval_local(double c_ref, double) const override { return {-c_ref, 0.0}; }
};

/// a_F(s) = gain * s.
class LinearFollower final : public FollowerModel {
public:
    explicit LinearFollower(double gain) : gain_(gain) { require_finite(gain, "LinearFollower"); }
    std::string kind() const override { return "linear"; }
    ValueSlope eval_local(double c_ref, double t) const override {
        return {(gain_ - 1.0) * c_ref + gain_ * t, gain_};
    }
    double gain() const noexcept { return gain_; }

private:
    double gain_;
};

/// Nearest-level quantizer with levels c_k (odd) and thresholds b_k.
class QuantizerFollower final : public FollowerModel {
public:
    QuantizerFollower(std::vector<double> levels, std::vector<double> thresholds)
        : c_(std::move(levels)), b_(std::move(thresholds)) {
        if (c_.empty() || b_.size() != c_.size())
            throw UsageError("QuantizerFollower: need m+1 levels and thresholds");
    }
    static QuantizerFollower from_base(const BaseConfig& cfg) { return QuantizerFollower(cfg.c, cfg.b); }

    std::string kind() const override { return "quantizer"; }
    ValueSlope eval_local(double c_ref, double t) const override {
        const double s = c_ref + t;
        const int q = level_of(s, c_ref, t);
        const double level = q >= 0 ? c_[q] : -c_[-q];
        return {level - c_ref, 0.0};
    }
    std::vector<double> breaks_local(double c_ref, double t_lo, double t_hi) const override {
        std::vector<double> out;
        const int m = static_cast<int>(c_.size()) - 1;
        for (int k = -m; k <= m; ++k) {
            if (k == 0)
                continue;
            const double bk = k > 0 ? b_[k] : -b_[-k];
            const double t = bk - c_ref;
            if (t > t_lo && t < t_hi)
                out.push_back(t);
        }
        return out;
    }
    const std::vector<double>& levels() const noexcept { return c_; }
    const std::vector<double>& thresholds() const noexcept { return b_; }

private:
    int level_of(double s, double, double) const {
        const int m = static_cast<int>(c_.size()) - 1;
        const double a = std::abs(s);
        const auto it = std::upper_bound(b_.begin() + 1, b_.end(), a);
        int k = static_cast<int>(it - (b_.begin() + 1));
        k = std::min(k, m);
        if (s < 0.0 && k > 0 && a == b_[k])
            --k;   // left-closed mirrored cells
        return s < 0.0 ? -k : k;
    }
    std::vector<double> c_, b_;
};

/// Value-semantics handle to an immutable follower model.
class FollowerStrategy {
public:
    FollowerStrategy() : model_(std::make_shared<ZeroFollower>()) {}
    explicit FollowerStrategy(std::shared_ptr<const FollowerModel> model) : model_(std::move(model)) {
        if (!model_)
            throw UsageError("FollowerStrategy: null model");
    }
    static FollowerStrategy zero() { return FollowerStrategy(std::make_shared<ZeroFollower>()); }
    static FollowerStrategy linear(double gain) { return FollowerStrategy(std::make_shared<LinearFollower>(gain)); }
    static FollowerStrategy identity() { return linear(1.0); }
    static FollowerStrategy quantizer(const BaseConfig& cfg) {
        return FollowerStrategy(std::make_shared<QuantizerFollower>(QuantizerFollower::from_base(cfg)));
    }

    double operator()(double s) const { return value(s); }
    double value(double s) const {
        require_finite(s, "FollowerStrategy::value");
        return model_->eval_local(0.0, s).value;
    }
    double slope(double s) const {
        require_finite(s, "FollowerStrategy::slope");
        return model_->eval_local(0.0, s).slope;
    }
    ValueSlope eval_local(double c_ref, double t) const { return model_->eval_local(c_ref, t); }
    std::vector<double> breaks_local(double c_ref, double t_lo, double t_hi) const {
        return model_->breaks_local(c_ref, t_lo, t_hi);
    }
    std::string kind() const { return model_->kind(); }
    const FollowerModel& model() const { return *model_; }
    const std::shared_ptr<const FollowerModel>& model_ptr() const { return model_; }

private:
    std::shared_ptr<const FollowerModel> model_;
};

// ---------------------------------------------------------------------------
// Membership in the invariant class

/// Reference quantities derived from a base configuration and r_L.
struct ClassBounds {
    double r_L = 0.0;
    double sigma = 1.0;
    double r_lo = 0.0;   // r_L (1 - 0.5 r_L^2 sigma^2)
    double r_hi = 0.0;   // r_L (1 + 0.5 r_L^2 sigma^2)
    std::vector<double> x_hi;   // x_k^0 + 3 for k = 1..m, and x_hi[m+1] = sqrt(e) x_hi[m]
    std::vector<double> x_lo;   // x_k^0 - 3 for k = 1..m
    std::vector<double> c0;

    static ClassBounds make(const BaseConfig& cfg, double r_L) {
        ClassBounds cb;
        cb.r_L = r_L;
        cb.sigma = cfg.sigma;
        const double q = r_L * r_L * cfg.sigma * cfg.sigma;
        cb.r_lo = r_L * (1.0 - 0.5 * q);
        cb.r_hi = r_L * (1.0 + 0.5 * q);
        cb.x_hi.assign(cfg.m + 2, 0.0);
        cb.x_lo.assign(cfg.m + 2, 0.0);
        for (int k = 1; k <= cfg.m; ++k) {
            cb.x_hi[k] = cfg.x[k] + 3.0;
            cb.x_lo[k] = cfg.x[k] - 3.0;
        }
        if (cfg.m >= 1) {
            cb.x_hi[cfg.m + 1] = std::sqrt(std::numbers::e) * cb.x_hi[cfg.m];
            cb.x_hi[0] = cb.x_hi[1];
        }
        cb.c0 = cfg.c;
        return cb;
    }
    /// Upper limit of theta - c_m over which the tail slope bracket applies.
    double tail_slope_extent() const {
        const int m = static_cast<int>(c0.size()) - 1;
        return m >= 1 ? std::sqrt(std::numbers::e) * sigma * x_hi[m] : kInf;
    }
};

struct PropertyReport {
    bool unique_fixed_points = true;
    bool monotone = true;
    bool property1 = true;
    bool property2 = true;
    bool property3 = true;
    bool overall = true;
    double endpoint_offset_max = 0.0;    // max_k |b_k - (c_{k-1}+c_k)/2|
    double endpoint_offset_margin = 0.0; // 0.1 r_L - max
    double displacement_max = 0.0;       // max_k |c_k - c_k^0|
    double displacement_margin = 0.0;    // 2.9 - max
    double slope_min = kInf;
    double slope_max = -kInf;
    double slope_margin = kInf;          // min(slope_min - r_lo, r_hi - slope_max)
    double tail_bound_margin = kInf;     // min over checks of c_m + 3 r (theta - c_m) - a_L(theta)
    double fixed_point_error = 0.0;      // max |located root| (should be 0)
    double monotone_margin = kInf;       // min jump / slope observed (>= 0 required)
    BoundReport records;
};

namespace detail {

// Slopes of a segment shape over local [lo, hi]: knot slopes and the Hermite
// derivative at three interior points of each knot interval.
inline void shape_slope_range(const LeaderStrategy& s, int k, double lo, double hi, double& smin,
                              double& smax) {
    const SegmentShape& shape = s.shapes()[k];
    auto visit = [&](double u) {
        if (u < lo || u > hi)
            return;
        const double d = s.shape_local(k, u).slope;
        smin = std::min(smin, d);
        smax = std::max(smax, d);
    };
    if (const auto* lin = std::get_if<LinearShape>(&shape)) {
        smin = std::min(smin, lin->slope);
        smax = std::max(smax, lin->slope);
        return;
    }
    const auto& sm = std::get<SampledShape>(shape);
    const bool mirrored = (k == 0);
    for (std::size_t i = 0; i < sm.u.size(); ++i) {
        visit(sm.u[i]);
        if (mirrored)
            visit(-sm.u[i]);
        if (i + 1 < sm.u.size()) {
            for (double f : {0.25, 0.5, 0.75}) {
                const double u = sm.u[i] + f * (sm.u[i + 1] - sm.u[i]);
                visit(u);
                if (mirrored)
                    visit(-u);
            }
        }
    }
    visit(lo);
    if (std::isfinite(hi))
        visit(hi);
}

} // namespace detail

/**
 * Checks Properties 1-3 of the invariant class on a leader strategy, using the
 * base configuration @p cfg as reference. Negative segments follow by oddness.
 */
inline PropertyReport check_membership(const LeaderStrategy& s, const BaseConfig& cfg, double r_L,
                                       double sigma) {
    if (s.m() != cfg.m)
        throw UsageError("check_membership: strategy and base configuration differ in m");
    if (!(r_L > 0.0 && r_L < 1.0) || !(sigma > 0.0))
        throw DomainError("check_membership: need r_L in (0,1) and sigma > 0");
    const int m = s.m();
    const ClassBounds cb = ClassBounds::make(cfg, r_L);
    PropertyReport rep;

    // Property 1: one fixed point per segment, monotone across segments
    for (int k = 0; k <= m; ++k) {
        const SegmentView v = s.segment(k);
        const double lo = v.lo;
        const double hi = std::isfinite(v.hi) ? v.hi : std::max(8.0 * sigma, 2.0 * cb.tail_slope_extent());
        auto h = [&](double u) { return s.shape_local(k, u).value - u; };
        constexpr int kScan = 256;
        int changes = 0;
        double root = 0.0;
        double prev_u = lo, prev_h = h(lo);
        for (int i = 1; i <= kScan; ++i) {
            const double u = (i == kScan) ? hi : lo + (hi - lo) * i / kScan;
            const double hu = h(u);
            // zero counts as nonpositive so a root on a grid point is seen once
            const bool sign_change = (prev_h > 0.0) != (hu > 0.0);
            if (sign_change) {
                ++changes;
                double a = prev_u, b = u, ha = prev_h;
                for (int it = 0; it < 200 && b - a > 1e-12 * std::max(1.0, std::abs(a)); ++it) {
                    const double mid = 0.5 * (a + b);
                    const double hm = h(mid);
                    if ((ha > 0.0) == (hm > 0.0)) {
                        a = mid;
                        ha = hm;
                    } else {
                        b = mid;
                    }
                }
                root = 0.5 * (a + b);
            }
            prev_u = u;
            prev_h = hu;
        }
        if (changes != 1)
            rep.unique_fixed_points = false;
        else
            rep.fixed_point_error = std::max(rep.fixed_point_error, std::abs(root));
        rep.records.add(upper_bound_record("P1.fixed_point_count", k, changes, 1.0));
        rep.records.add(lower_bound_record("P1.fixed_point_count_min", k, changes, 1.0));
    }
    for (int k = 1; k <= m; ++k) {
        // a_L(b_k) - a_L(b_k^-) >= 0, in local coordinates of c_k
        const SegmentView cur = s.segment(k), prev = s.segment(k - 1);
        const double dc = s.fixed_point(k) - s.fixed_point(k - 1);
        const double jump = dc + s.shape_local(k, cur.lo).value - s.shape_local(k - 1, prev.hi).value;
        rep.monotone_margin = std::min(rep.monotone_margin, jump);
        rep.records.add(lower_bound_record("P1.jump_nonnegative", k, jump, 0.0));
    }
    for (int k = 0; k <= m; ++k) {
        const SegmentView v = s.segment(k);
        double smin = kInf, smax = -kInf;
        const double hi = std::isfinite(v.hi) ? v.hi : std::max(s.tail_start(), cb.tail_slope_extent());
        detail::shape_slope_range(s, k, v.lo, std::isfinite(hi) ? hi : v.lo + 8.0 * sigma, smin, smax);
        if (!std::isfinite(v.hi))
            smin = std::min(smin, s.tail_slope());
        rep.monotone_margin = std::min(rep.monotone_margin, smin);
        rep.records.add(lower_bound_record("P1.slope_nonnegative", k, smin, 0.0));
    }
    rep.monotone = rep.monotone_margin >= 0.0;
    rep.property1 = rep.unique_fixed_points && rep.monotone;

    // Property 2
    for (int k = 1; k <= m; ++k) {
        const double off = std::abs(s.endpoint_offset(k));
        const double disp = std::abs(s.fixed_point(k) - cfg.c[k]);
        rep.endpoint_offset_max = std::max(rep.endpoint_offset_max, off);
        rep.displacement_max = std::max(rep.displacement_max, disp);
        rep.records.add(upper_bound_record("P2.endpoint_offset", k, off, 0.1 * r_L));
        rep.records.add(upper_bound_record("P2.displacement", k, disp, 2.9));
    }
    rep.endpoint_offset_margin = 0.1 * r_L - rep.endpoint_offset_max;
    rep.displacement_margin = 2.9 - rep.displacement_max;
    rep.property2 = rep.endpoint_offset_margin >= 0.0 && rep.displacement_margin >= 0.0;

    // Property 3: slope bracket on segments |k| < m and on the tail up to
    // c_m + sqrt(e) sigma xbar_m; the linear bound beyond
    for (int k = 0; k <= m; ++k) {
        const SegmentView v = s.segment(k);
        double smin = kInf, smax = -kInf;
        const double hi = (k == m && m >= 1) ? cb.tail_slope_extent() : v.hi;
        if (m == 0)
            break;
        detail::shape_slope_range(s, k, v.lo, hi, smin, smax);
        rep.slope_min = std::min(rep.slope_min, smin);
        rep.slope_max = std::max(rep.slope_max, smax);
        rep.records.add(lower_bound_record("P3.slope_lower", k, smin, cb.r_lo));
        rep.records.add(upper_bound_record("P3.slope_upper", k, smax, cb.r_hi));
    }
    if (m >= 1) {
        rep.slope_margin = std::min(rep.slope_min - cb.r_lo, cb.r_hi - rep.slope_max);
        // beyond the extent: a_L is the tail extension of the sampled profile;
        // checking the start value and the asymptotic slope covers the half-line
        const double u0 = std::max(cb.tail_slope_extent(), s.tail_start());
        const double g0 = s.shape_local(m, u0).value;
        const double value_margin = 3.0 * r_L * u0 - g0;
        const double slope_margin = 3.0 * r_L - s.tail_slope();
        // the stretch between the extent and the tail start is Hermite; sample it
        double mid_margin = kInf;
        if (s.tail_start() > cb.tail_slope_extent()) {
            for (int i = 0; i <= 64; ++i) {
                const double u = cb.tail_slope_extent() + (s.tail_start() - cb.tail_slope_extent()) * i / 64.0;
                mid_margin = std::min(mid_margin, 3.0 * r_L * u - s.shape_local(m, u).value);
            }
        }
        rep.tail_bound_margin = std::min({value_margin, mid_margin, slope_margin * u0});
        rep.records.add(lower_bound_record("P3.tail_linear_bound", m, rep.tail_bound_margin, 0.0));
        rep.property3 = rep.slope_margin >= 0.0 && rep.tail_bound_margin >= 0.0;
    }
    rep.overall = rep.property1 && rep.property2 && rep.property3;
    return rep;
}

// ---------------------------------------------------------------------------
// M(sigma)

struct MSetResult {
    std::vector<int> m;
    double lower = 0.0;   // bracket on x_1^0
    double upper = 0.0;
    bool feasible = false;   // lower < upper
    std::vector<std::string> warnings;
};

/// Strict bracket on x_1^0 defining M(sigma).
inline std::pair<double, double> m_set_bracket(double sigma) {
    const double ls = std::log(sigma);
    return {2.0 * std::sqrt(2.0 * ls) + 4.0, 4.0 * std::sqrt(ls)};
}

/**
 * All m whose base configuration has x_1^0 strictly inside the bracket.
 * x_1^0 = sigma * x1(m) with x1(m) from a unit-scale build, decreasing in m.
 * The boundaries are found by bracketed integer search seeded by the
 * high-resolution estimate (2m+1) x1(m) ~ sqrt(6 pi)/2.
 */
inline MSetResult m_set(double sigma, const BaseBuildOptions& opt = {}) {
    if (!(sigma > 1.0) || !std::isfinite(sigma))
        throw DomainError("m_set: sigma must be > 1");
    MSetResult out;
    const auto [lo, hi] = m_set_bracket(sigma);
    out.lower = lo;
    out.upper = hi;
    out.feasible = lo < hi;
    if (!out.feasible)
        return out;

    std::map<long, double> memo;
    auto x1 = [&](long m) {
        const auto it = memo.find(m);
        if (it != memo.end())
            return it->second;
        const double v = sigma * build_base(static_cast<int>(m), 1.0, opt).x[1];
        memo.emplace(m, v);
        return v;
    };
    // smallest m >= 1 with x1(m) < level; x1 decreases in m
    auto first_below = [&](double level) {
        auto predict = [&](long m) {
            const double g = (2.0 * m + 1.0) * x1(m);   // slowly varying in m
            return std::max(1L, static_cast<long>(std::floor(g / (2.0 * level) - 0.5)));
        };
        long a = predict(std::max(1L, static_cast<long>(half_gap_limit() * sigma / (2.0 * level))));
        a = predict(a);
        // walk to a bracket x1(a) >= level > x1(a+1), doubling the stride
        long stride = 1;
        while (a > 1 && x1(a) < level) {
            a = std::max(1L, a - stride);
            stride *= 2;
        }
        if (x1(a) < level)
            return a;
        long b = a + 1;
        stride = 1;
        while (!(x1(b) < level)) {
            a = b;
            b += stride;
            stride *= 2;
            if (b > 1'000'000'000L)
                throw NonConvergence("m_set: search range exceeded", static_cast<double>(b), 0.0);
        }
        while (b - a > 1) {
            const long mid = a + (b - a) / 2;
            if (x1(mid) < level)
                b = mid;
            else
                a = mid;
        }
        return b;
    };
    const long m_first = first_below(hi);            // x1 < hi from here on
    const long m_past = first_below(lo);             // x1 < lo from here on
    long m_last = m_past - 1;
    // strict lower inequality: exclude m with x1 == lo (first_below uses <)
    if (m_last >= m_first) {
        const double xl = x1(m_last);
        if (!(xl > lo)) {
            out.warnings.push_back("m_set: tie at lower bracket end excluded");
            --m_last;
        }
        if (std::abs(x1(m_first) - hi) <= 1e-12 * hi)
            out.warnings.push_back("m_set: value within 1e-12 of upper bracket end");
    }
    for (long m = m_first; m <= m_last; ++m)
        out.m.push_back(static_cast<int>(m));
    return out;
}

} // namespace wits

#endif
