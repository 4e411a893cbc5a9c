// -*- c++ -*-
/**
 * @file equilibrium.hpp
 * @brief Alternating best responses from a leader strategy, and sweeps of that
 *        iteration over (sigma, m) cells.
 */
#ifndef WITS_EQUILIBRIUM_HPP
#define WITS_EQUILIBRIUM_HPP

#include "wits/base_quantizer.hpp"
#include "wits/best_response.hpp"
#include "wits/cost_eval.hpp"
#include "wits/strategy_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace wits {

enum class TerminalStatus { converged, max_rounds, membership_lost, error };

inline std::string to_string(TerminalStatus s) {
    switch (s) {
    case TerminalStatus::converged:
        return "converged";
    case TerminalStatus::max_rounds:
        return "max_rounds";
    case TerminalStatus::membership_lost:
        return "membership_lost";
    case TerminalStatus::error:
        return "error";
    }
    return "error";
}

struct IterateOptions {
    double tol = 1e-7;          // stop when the residual is below tol * sigma
    int max_rounds = 200;
    int threads = 1;
    bool cost_each_round = true;
    bool verify_each_round = false;     // attach lemma diagnostics to every round
    bool stop_on_membership_loss = false;
    FollowerOptions follower{};
    LeaderOptions leader{};
    CostOptions cost{};
    VerifyOptions verify{};

    void validate() const {
        if (!(tol > 0.0) || !std::isfinite(tol))
            throw DomainError("IterateOptions: tol must be positive");
        if (max_rounds < 1)
            throw DomainError("IterateOptions: max_rounds must be >= 1");
        if (threads < 1)
            throw DomainError("IterateOptions: threads must be >= 1");
    }
};

/// Change between two leader strategies with the same m.
struct StrategyChange {
    double sup = 0.0;            // over interior probes and one-sided edge values
    double fixed_points = 0.0;   // max |c_k' - c_k|
    double endpoints = 0.0;      // max |b_k' - b_k|
    double residual() const { return std::max({sup, fixed_points, endpoints}); }
};

/**
 * Compares a and b on theta >= 0: at every fixed point, at each segment's two
 * edges (one-sided limits, so a moved jump does not count as a change in
 * value) and at 16 interior points of each segment.
 */
inline StrategyChange strategy_change(const LeaderStrategy& a, const LeaderStrategy& b, double tail_extent) {
    if (a.m() != b.m())
        throw UsageError("strategy_change: strategies differ in m");
    const int m = a.m();
    StrategyChange out;
    auto val = [](const LeaderStrategy& s, int k, double u) { return s.fixed_point(k) + s.shape_local(k, u).value; };
    for (int k = 0; k <= m; ++k) {
        out.fixed_points = std::max(out.fixed_points, std::abs(a.fixed_point(k) - b.fixed_point(k)));
        if (k >= 1)
            out.endpoints = std::max(out.endpoints, std::abs(a.endpoint(k) - b.endpoint(k)));
        const SegmentView va = a.segment(k), vb = b.segment(k);
        const double ext = std::isfinite(tail_extent) ? tail_extent : 8.0 * a.sigma();
        const double ahi = std::isfinite(va.hi) ? va.hi : ext;
        const double bhi = std::isfinite(vb.hi) ? vb.hi : ext;
        const double alo = k == 0 ? 0.0 : va.lo, blo = k == 0 ? 0.0 : vb.lo;
        out.sup = std::max(out.sup, std::abs(val(a, k, alo) - val(b, k, blo)));
        out.sup = std::max(out.sup, std::abs(val(a, k, ahi) - val(b, k, bhi)));
        // interior probes, placed inside both segments
        const double tlo = std::max(va.center + alo, vb.center + blo);
        const double thi = std::min(va.center + ahi, vb.center + bhi);
        if (!(thi > tlo))
            continue;
        for (int i = 0; i < 16; ++i) {
            const double th = tlo + (thi - tlo) * (i + 0.5) / 16.0;
            out.sup = std::max(out.sup, std::abs(val(a, k, th - va.center) - val(b, k, th - vb.center)));
        }
    }
    return out;
}

struct RoundRecord {
    int round = 0;
    std::optional<CostBreakdown> cost;   // U(a_L, follower_br(a_L)) for this round's leader
    StrategyChange change;               // this round's leader vs the response built from it
    double sup_residual = 0.0;
    PropertyReport membership;           // of this round's leader
    std::optional<BrDiagnostics> diagnostics;
    std::vector<std::string> warnings;
};

struct IterationTrace {
    std::vector<RoundRecord> rounds;
    TerminalStatus status = TerminalStatus::max_rounds;
    std::string message;
    bool monotone = true;        // U nonincreasing within the quadrature budget
    double worst_increase = 0.0; // largest U(r+1) - U(r) seen
};

struct IterateResult {
    LeaderStrategy leader;
    FollowerStrategy follower;
    std::optional<CostBreakdown> cost;   // of the final pair
    IterationTrace trace;
};

/**
 * Best-response iteration from `initial`. `base` supplies the class bounds
 * used for membership and basin widths. Each round: a_F = follower_br(a_L),
 * U(a_L, a_F), a_L <- leader_br_full(a_F). Stops when the change drops below
 * tol * sigma; the returned follower is the exact best response to the
 * returned leader.
 */
inline IterateResult br_iterate(const LeaderStrategy& initial, const BaseConfig& base, double r_L,
                                IterateOptions opt = {},
                                const std::function<void(const RoundRecord&)>& on_round = {}) {
    opt.validate();
    if (base.m != initial.m())
        throw UsageError("br_iterate: base configuration and strategy differ in m");
    const double sigma = base.sigma;
    if (std::abs(initial.sigma() - sigma) > 1e-12 * sigma)
        throw UsageError("br_iterate: base configuration and strategy differ in sigma");
    opt.follower.threads = opt.threads;
    opt.leader.threads = opt.threads;
    opt.cost.threads = opt.threads;
    const ClassBounds cb = ClassBounds::make(base, r_L);
    const double tail_extent = cb.tail_slope_extent();

    IterateResult res;
    res.leader = initial;
    IterationTrace& tr = res.trace;
    const double budget_rel = 1e-9;
    try {
        for (int round = 0; round < opt.max_rounds; ++round) {
            RoundRecord rec;
            rec.round = round;
            const FollowerStrategy F = follower_br(res.leader, opt.follower);
            if (opt.cost_each_round)
                rec.cost = expected_cost(res.leader, F, r_L, sigma, opt.cost);
            rec.membership = check_membership(res.leader, base, r_L, sigma);
            if (round == 0 && !rec.membership.overall)
                rec.warnings.push_back("initial strategy fails membership; iterating anyway");
            if (!rec.membership.overall && opt.stop_on_membership_loss) {
                tr.rounds.push_back(rec);
                tr.status = TerminalStatus::membership_lost;
                tr.message = "membership check failed at round " + std::to_string(round);
                break;
            }
            LeaderContext ctx{&res.leader, cb};
            const LeaderObjective obj(F, ctx, opt.leader);
            LeaderResponse next = leader_br_full(obj);
            for (auto& w : next.warnings)
                rec.warnings.push_back(std::move(w));
            if (opt.verify_each_round)
                rec.diagnostics = verify_br_bounds(obj, next, opt.verify);
            rec.change = strategy_change(res.leader, next.strategy, tail_extent);
            rec.sup_residual = rec.change.residual();

            if (!tr.rounds.empty() && rec.cost && tr.rounds.back().cost) {
                const CostBreakdown& prev = *tr.rounds.back().cost;
                const double inc = rec.cost->total - prev.total;
                tr.worst_increase = std::max(tr.worst_increase, inc);
                const double budget = budget_rel * prev.total + prev.error + rec.cost->error;
                if (inc > budget)
                    tr.monotone = false;
            }
            if (on_round)
                on_round(rec);
            tr.rounds.push_back(std::move(rec));
            res.leader = std::move(next.strategy);
            if (tr.rounds.back().sup_residual < opt.tol * sigma) {
                tr.status = TerminalStatus::converged;
                break;
            }
        }
        if (tr.status != TerminalStatus::converged && tr.status != TerminalStatus::membership_lost) {
            tr.status = TerminalStatus::max_rounds;
            tr.message = "no convergence within " + std::to_string(opt.max_rounds) + " rounds";
        }
        res.follower = follower_br(res.leader, opt.follower);
        res.cost = expected_cost(res.leader, res.follower, r_L, sigma, opt.cost);
    } catch (const StructureLost& e) {
        tr.status = TerminalStatus::membership_lost;
        tr.message = "round " + std::to_string(tr.rounds.size()) + ": " + e.what();
    } catch (const std::exception& e) {
        tr.status = TerminalStatus::error;
        tr.message = "round " + std::to_string(tr.rounds.size()) + ": " + e.what();
    }
    return res;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class MPolicy { list, mset };
enum class RPolicy { fixed, inverse_square };   // r_L given, or r_L = 1 / sigma^2

struct SweepSpec {
    std::vector<double> sigmas;
    MPolicy m_policy = MPolicy::list;
    std::vector<int> m_list;
    RPolicy r_policy = RPolicy::fixed;
    double r_L = 0.0;
    IterateOptions iterate{};
};

struct SweepRow {
    double sigma = 0.0;
    double r_L = 0.0;
    int m = 0;
    TerminalStatus status = TerminalStatus::error;
    std::string message;
    int rounds = 0;
    double residual = 0.0;
    bool monotone = true;
    bool membership = false;   // final leader passes check_membership
    std::optional<CostBreakdown> cost;
    double linear_U = 0.0;
    double linear_lambda = 0.0;
    std::optional<double> lower_bound;   // sigma > 1
    PerformanceRatio ratio;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::string> notices;
    std::vector<IterateResult> runs;   // parallel to rows

    /// Row with the smallest total among rows that converged.
    const SweepRow* best_converged() const {
        const SweepRow* best = nullptr;
        for (const auto& r : rows)
            if (r.status == TerminalStatus::converged && r.cost && (!best || r.cost->total < best->cost->total))
                best = &r;
        return best;
    }
};

inline double sweep_r(const SweepSpec& spec, double sigma) {
    return spec.r_policy == RPolicy::inverse_square ? 1.0 / (sigma * sigma) : spec.r_L;
}

/**
 * Runs br_iterate from the slopey base strategy for every (sigma, m) cell.
 * A failing cell becomes a row with status error; the sweep continues.
 */
inline SweepResult equilibrium_sweep(const SweepSpec& spec,
                                     const std::function<void(const SweepRow&)>& on_row = {}) {
    SweepResult out;
    if (spec.sigmas.empty())
        throw UsageError("equilibrium_sweep: no sigma values");
    for (double sigma : spec.sigmas) {
        const double r = sweep_r(spec, sigma);
        if (!(r > 0.0 && r < 1.0))
            throw DomainError("equilibrium_sweep: r_L must lie in (0, 1) at sigma " + std::to_string(sigma));
        std::vector<int> ms = spec.m_list;
        if (spec.m_policy == MPolicy::mset) {
            const MSetResult ms_res = m_set(sigma);
            ms = ms_res.m;
            if (ms.empty())
                out.notices.push_back("m_set is empty at sigma " + std::to_string(sigma) + "; no cells run");
        }
        const LinearBenchmark lin = linear_benchmark(r, sigma);
        for (int m : ms) {
            SweepRow row;
            row.sigma = sigma;
            row.r_L = r;
            row.m = m;
            row.linear_U = lin.cost.total;
            row.linear_lambda = lin.lambda_star;
            if (sigma > 1.0)
                row.lower_bound = lower_bound(sigma);
            IterateResult run;
            try {
                if (m < 0)
                    throw DomainError("m must be >= 0");
                const BaseConfig base = build_base(m, sigma);
                run = br_iterate(slopey_from_base(base, r), base, r, spec.iterate);
                row.status = run.trace.status;
                row.message = run.trace.message;
                row.rounds = static_cast<int>(run.trace.rounds.size());
                row.residual = run.trace.rounds.empty() ? 0.0 : run.trace.rounds.back().sup_residual;
                row.monotone = run.trace.monotone;
                row.cost = run.cost;
                if (row.status == TerminalStatus::converged || row.status == TerminalStatus::max_rounds)
                    row.membership = check_membership(run.leader, base, r, sigma).overall;
                if (row.cost)
                    row.ratio = performance_ratio(row.cost->total, sigma, r);
            } catch (const std::exception& e) {
                row.status = TerminalStatus::error;
                row.message = e.what();
            }
            if (on_row)
                on_row(row);
            out.rows.push_back(std::move(row));
            out.runs.push_back(std::move(run));
        }
    }
    return out;
}

} // namespace wits

#endif
