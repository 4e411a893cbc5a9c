// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include "wits/wits.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

using namespace wits;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double std_q(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }
double std_phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// ---------------------------------------------------------------------------

Outcome stationarity() {
    double worst = 0.0;
    for (double sig : {1.0, 5.0, 25.0})
        for (int m = 1; m <= 50; ++m)
            worst = std::max(worst, build_base(m, sig).stationarity_residual());

    // m = 1, sigma = 1: levels {-c, 0, c}, thresholds +-b.
    // With centroid levels D(b) = 1 - 2 phi(b)^2 / Q(b); with threshold b fixed
    // D(c) = 1 - 4 c phi(b) + 2 c^2 Q(b).
    double best_b = 0.0, best_d = kInf;
    for (long i = 0; i <= 250000; ++i) {
        const double b = 0.3 + 1e-5 * static_cast<double>(i);
        const double d = 1.0 - 2.0 * std_phi(b) * std_phi(b) / std_q(b);
        if (d < best_d) {
            best_d = d;
            best_b = b;
        }
    }
    double best_c = 0.0;
    best_d = kInf;
    for (long i = 0; i <= 250000; ++i) {
        const double c = 0.5 + 1e-5 * static_cast<double>(i);
        const double d = 1.0 - 4.0 * c * std_phi(best_b) + 2.0 * c * c * std_q(best_b);
        if (d < best_d) {
            best_d = d;
            best_c = c;
        }
    }
    const BaseConfig cfg = build_base(1, 1.0);
    const double db = std::abs(cfg.b[1] - best_b), dc = std::abs(cfg.c[1] - best_c);
    return {worst < 1e-10 && db < 1e-4 && dc < 1e-4,
            fmt::format("max residual {:.2e}; m=1 grid b={:.5f} c={:.5f}, solver b={:.8f} c={:.8f}", worst, best_b,
                        best_c, cfg.b[1], cfg.c[1])};
}

Outcome quantizer_bounds() {
    int failures = 0, records = 0, vacuous = 0;
    std::string first;
    for (double sig : {1.0, 5.0, 25.0})
        for (int m = 2; m <= 50; ++m) {
            const BoundReport rep = verify_lemma1(build_base(m, sig));
            for (const auto& r : rep.records) {
                ++records;
                vacuous += r.vacuous;
                if (!r.pass && failures++ == 0)
                    first = fmt::format(" first: {} m={} sigma={}", r.name, m, sig);
            }
        }
    return {failures == 0,
            fmt::format("{} records over m=2..50 x sigma {{1,5,25}}, {} vacuous, {} failing{}", records, vacuous,
                        failures, first)};
}

Outcome high_resolution() {
    const AsymptoticReport a = asymptotic_checks(build_base(500, 1.0));
    const double pd = a.panter_dite_ratio * panter_dite_constant();
    const double hg = a.half_gap_ratio * half_gap_limit();
    return {std::abs(a.panter_dite_ratio - 1.0) < 0.02 && std::abs(a.half_gap_ratio - 1.0) < 0.01,
            fmt::format("D(2m+1)^2 = {:.5f} vs {:.5f} ({:+.3f}%); (2m+1)x1 = {:.5f} vs {:.5f} ({:+.3f}%)", pd,
                        panter_dite_constant(), 100 * (a.panter_dite_ratio - 1), hg, half_gap_limit(),
                        100 * (a.half_gap_ratio - 1))};
}

Outcome follower_oracle() {
    double worst_val = 0.0, worst_der = 0.0;
    for (auto [lam, sig] : {std::pair{0.5, 1.0}, {1.0, 1.0}, {1.0, 5.0}}) {
        const FollowerStrategy F = follower_br(linear_leader(lam, sig));
        const double v = lam * lam * sig * sig, gain = v / (1.0 + v);
        const double scale = std::sqrt(1.0 + v);
        for (int i = -200; i <= 200; ++i) {
            if (i == 0)
                continue;
            const double s = 8.0 * scale * i / 200.0;
            worst_val = std::max(worst_val, std::abs(F(s) - gain * s) / std::abs(gain * s));
            worst_der = std::max(worst_der, std::abs(follower_br_derivative(F, s) - gain) / gain);
        }
    }
    double worst_fd = 0.0;
    for (auto [m, sig] : {std::pair{2, 5.0}, {6, 25.0}}) {
        FollowerOptions exact;
        exact.use_cache = false;
        const FollowerStrategy F = follower_br(slopey_from_base(build_base(m, sig), 1.0 / (1.0 + sig * sig)), exact);
        const double h = 1e-4;
        for (int i = 0; i <= 120; ++i) {
            const double s = -3.0 * sig + 6.0 * sig * i / 120.0 + 0.0137;
            const double fd = (F(s + h) - F(s - h)) / (2.0 * h);
            worst_fd = std::max(worst_fd, std::abs(fd - follower_br_derivative(F, s)));
        }
    }
    return {worst_val < 1e-8 && worst_der < 1e-8 && worst_fd < 1e-5,
            fmt::format("linear: value rel {:.2e}, derivative rel {:.2e}; slopey derivative vs FD {:.2e}", worst_val,
                        worst_der, worst_fd)};
}

Outcome cost_identity() {
    double worst_rel = 0.0, min_margin = kInf;
    for (double sig : {5.0, 25.0})
        for (int m = 1; m <= 20; ++m) {
            const double r = 1.0 / (1.0 + sig * sig);
            const BaseConfig cfg = build_base(m, sig);
            const BasePairCost b = base_pair_cost(cfg, r);
            const CostBreakdown direct =
                expected_cost(slopey_from_base(cfg, r), FollowerStrategy::quantizer(cfg), r, sig);
            const double formula = r * (1 - r) * (1 - r) * b.D_L0 + (1 - r) * b.D_F0;
            worst_rel = std::max(worst_rel, std::abs(direct.total - formula) / formula);
            min_margin = std::min(min_margin, b.bound_margin);
        }
    return {worst_rel < 1e-9 && min_margin >= 0.0,
            fmt::format("direct vs identity rel {:.2e}; min follower-distortion bound margin {:.3e}", worst_rel,
                        min_margin)};
}

Outcome benchmark_sigma5() {
    SweepSpec spec;
    spec.sigmas = {5.0};
    spec.m_list = {1, 2, 3, 4};
    spec.r_L = r_from_k(0.2);
    spec.iterate.max_rounds = 400;
    spec.iterate.tol = 1e-7;
    const SweepResult res = equilibrium_sweep(spec);
    bool all_converged = true;
    std::string cells;
    for (const auto& row : res.rows) {
        const bool ok = row.status == TerminalStatus::converged && row.monotone && row.residual < 1e-6;
        all_converged = all_converged && ok;
        cells += fmt::format(" m={}:{}/{}r", row.m, to_string(row.status), row.rounds);
        if (row.cost)
            cells += fmt::format("/U_w={:.6f}", row.cost->witsenhausen_units);
    }
    const SweepRow* best = res.best_converged();
    std::string verdict = " no converged cell";
    bool bounds_ok = false;
    if (best) {
        const double to_w = 1.0 / (1.0 - best->r_L);
        const double lin = best->linear_U * to_w, lb = *best->lower_bound * to_w;
        const double u = best->cost->witsenhausen_units;
        bounds_ok = u < lin && u > lb;
        verdict = fmt::format(" best m={} U_wits={:.6f}; linear {:.6f}; lower bound {:.6f}; literature line 0.167",
                              best->m, u, lin, lb);
    }
    return {all_converged && bounds_ok, fmt::format("cells:{};{}", cells, verdict)};
}

// one BR round from the slopey base strategy at (sigma, m)
struct InvarianceRun {
    bool input_member = false, output_member = false;
    int records = 0, failures = 0, endpoint_checks = 0, location_checks = 0;
    std::string first_failure;
};

InvarianceRun invariance_round(double sigma, int m) {
    const double r = 1.0 / (sigma * sigma);
    const BaseConfig cfg = build_base(m, sigma);
    const LeaderStrategy L = slopey_from_base(cfg, r);
    InvarianceRun out;
    out.input_member = check_membership(L, cfg, r, sigma).overall;
    const FollowerStrategy F = follower_br(L);
    const LeaderContext ctx{&L, ClassBounds::make(cfg, r)};
    const LeaderObjective obj(F, ctx, LeaderOptions{});
    const LeaderResponse R = leader_br_full(obj);
    const PropertyReport mem = check_membership(R.strategy, cfg, r, sigma);
    out.output_member = mem.overall;
    const BrDiagnostics d = verify_br_bounds(obj, R);
    for (const auto& rec : d.records) {
        ++out.records;
        out.endpoint_checks += rec.name == "L12.endpoint";
        out.location_checks += rec.name == "E15.ck_location";
        if (!rec.pass && out.failures++ == 0)
            out.first_failure = fmt::format("{} k={} observed {:.3e} bound {:.3e}", rec.name, rec.k, rec.observed,
                                            rec.bound);
    }
    if (!mem.overall && out.first_failure.empty())
        for (const auto& rec : mem.records.records)
            if (!rec.pass) {
                out.first_failure = fmt::format("membership {} k={}", rec.name, rec.k);
                break;
            }
    return out;
}

// m whose base x_1 (times sigma) sits closest above 2 sqrt(2 ln sigma)
int m_near_lower_threshold(double sigma) {
    const double target = 2.0 * std::sqrt(2.0 * std::log(sigma));
    int lo = 1, hi = 2;
    while (sigma * build_base(hi, 1.0).x[1] > target)
        hi *= 2;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (sigma * build_base(mid, 1.0).x[1] > target ? lo : hi) = mid;
    }
    return lo;
}

Outcome invariance() {
    bool pass = true;
    std::string detail;
    for (double start : {1e3, 1e4}) {
        bool found = false;
        for (double sigma = start; sigma <= 1e6 * 1.0001 && !found; sigma *= 10.0) {
            const int m0 = m_near_lower_threshold(sigma);
            const std::vector<int> ms = sigma < 5e3 ? std::vector<int>{m0 - 1, m0, m0 + 1} : std::vector<int>{m0};
            bool all = true;
            for (int m : ms) {
                const InvarianceRun run = invariance_round(sigma, m);
                const bool ok = run.input_member && run.output_member && run.failures == 0 &&
                                run.endpoint_checks > 0 && run.location_checks > 0;
                all = all && ok;
                detail += fmt::format(" [sigma={:g} m={} x1={:.3f}: in {} out {} records {} (endpoint {}, location {}) "
                                      "failing {}{}{}]",
                                      sigma, m, sigma * build_base(m, 1.0).x[1], run.input_member, run.output_member,
                                      run.records, run.endpoint_checks, run.location_checks, run.failures,
                                      run.first_failure.empty() ? "" : " ", run.first_failure);
            }
            found = all;
            if (!all && sigma * 10.0 <= 1e6 * 1.0001)
                detail += " escalating;";
        }
        pass = pass && found;
    }
    return {pass, detail};
}

Outcome theorem_ratio() {
    // 1/ratio is affine in 1/ln(sigma) at r sigma^2 = 1, so two finite-sigma
    // evaluations extrapolate exactly to the sigma -> infinity limit
    auto ratio = [](double sigma) {
        const double r = 1.0 / (sigma * sigma);
        return *performance_ratio(asymptotic_upper(r, sigma), sigma, r).vs_lower_bound;
    };
    const double s1 = 1e5, s2 = 1e6;
    const double y1 = 1.0 / ratio(s1), y2 = 1.0 / ratio(s2);
    const double t1 = 1.0 / std::log(s1), t2 = 1.0 / std::log(s2);
    const double limit = 1.0 / (y2 - t2 * (y1 - y2) / (t1 - t2));
    const double target = 16.0 * std::sqrt(3.0);
    const double rel = std::abs(limit - target) / target;
    return {rel < 0.005 && target < 27.8,
            fmt::format("extrapolated {:.6f} vs 16 sqrt 3 = {:.6f} (rel {:.1e}); raw ratio at sigma=1e6 is {:.4f} "
                        "({:+.2f}%, the constant term of the lower bound decays like 1/ln sigma)",
                        limit, target, rel, ratio(s2), 100.0 * (ratio(s2) / target - 1.0))};
}

Outcome mset_semantics() {
    bool pass = m_set(5.0).m.empty();
    // the bracket width 4 sqrt(L) - 2 sqrt(2L) - 4 increases with L = ln sigma,
    // so emptiness at 1e4 covers every smaller sigma
    const auto [lo4, hi4] = m_set_bracket(1e4);
    pass = pass && !(lo4 < hi4);
    for (double s : {1.5, 5.0, 10.0, 100.0, 1e3, 5e3, 1e4})
        pass = pass && m_set(s).m.empty();
    const double sig = std::exp(16.0);
    const MSetResult r = m_set(sig);
    pass = pass && !r.m.empty();
    std::string detail = fmt::format("empty for sampled sigma <= 1e4 and bracket infeasible at 1e4; e^16: {} values",
                                     r.m.size());
    if (!r.m.empty()) {
        const auto [lo, hi] = m_set_bracket(sig);
        auto x1 = [&](int m) { return build_base(m, sig).x[1]; };
        // tens of thousands of m come back, each a ~8 s build; x1 decreases in m,
        // so the ends, their outside neighbours and a few interior samples
        // rebuilt directly at sigma settle the whole contiguous range
        for (std::size_t i = 1; i < r.m.size(); ++i)
            pass = pass && r.m[i] == r.m[i - 1] + 1;
        double prev = kInf;
        for (int q = 0; q <= 4; ++q) {
            const int m = r.m[(r.m.size() - 1) * q / 4];
            const double x = x1(m);
            pass = pass && x > lo && x < hi && x < prev;
            prev = x;
        }
        // neighbours just outside the returned range fall outside the bracket
        pass = pass && !(x1(r.m.front() - 1) < hi) && !(x1(r.m.back() + 1) > lo);
        detail += fmt::format(" m={}..{}, x1 in [{:.8f}, {:.8f}] inside ({:.8f}, {:.8f})", r.m.front(),
                              r.m.back(), x1(r.m.back()), x1(r.m.front()), lo, hi);
    }
    return {pass, detail};
}

std::string determinism_artifacts() {
    const double sig = 25.0, r = 1.0 / (sig * sig);
    const BaseConfig cfg = build_base(6, sig);
    const LeaderStrategy L = slopey_from_base(cfg, r);
    const FollowerStrategy F = follower_br(L);
    const LeaderContext ctx{&L, ClassBounds::make(cfg, r)};
    const LeaderObjective obj(F, ctx, LeaderOptions{});
    const LeaderResponse R = leader_br_full(obj);
    std::string out = dump(to_json(cfg));
    out += dump(to_json(R.strategy));
    out += follower_series_csv(F, 4.0 * sig, 400);
    out += dump(to_json(expected_cost(R.strategy, F, r, sig)));
    out += dump(summary_json(verify_br_bounds(obj, R)));
    return out;
}

Outcome determinism() {
    const std::string a = determinism_artifacts(), b = determinism_artifacts();

    const double sig = 25.0, r = 1.0 / (sig * sig);
    const BaseConfig cfg = build_base(6, sig);
    const LeaderStrategy L = slopey_from_base(cfg, r);
    const FollowerStrategy F = follower_br(L);
    const LeaderContext ctx{&L, ClassBounds::make(cfg, r)};
    const LeaderResponse R = leader_br_full(LeaderObjective(F, ctx, LeaderOptions{}));
    const LeaderStrategy back = leader_from_json(parse_json(dump(to_json(R.strategy))));
    const FollowerStrategy fback = follower_from_json(parse_json(dump(to_json(F))));
    int mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        const double t = -6.0 * sig + 12.0 * sig * (i + 0.5) / 1000.0;
        const double x = R.strategy.eval(t), y = back.eval(t);
        const double u = F(t), v = fback(t);
        mismatches += std::memcmp(&x, &y, sizeof x) != 0;
        mismatches += std::memcmp(&u, &v, sizeof u) != 0;
    }
    return {a == b && mismatches == 0,
            fmt::format("repeat artifacts {} ({} bytes); round-trip mismatches {} over 1000 leader and 1000 follower "
                        "probes",
                        a == b ? "identical" : "differ", a.size(), mismatches)};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"quantizer stationarity and brute-force optimum", stationarity},
        {"quantizer structural bounds", quantizer_bounds},
        {"high-resolution constants at m=500", high_resolution},
        {"follower best response vs Gaussian oracle", follower_oracle},
        {"base-pair cost identity and follower bound", cost_identity},
        {"sigma=5 equilibrium benchmark", benchmark_sigma5},
        {"one-round invariance of the slopey class", invariance},
        {"asymptotic performance ratio 16 sqrt 3", theorem_ratio},
        {"admissible m set", mset_semantics},
        {"determinism and serialization round-trip", determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i)
        only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id))
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        fmt::print("criterion {:2}: {} ({}, {:.1f} s) {}\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first, secs,
                   o.detail);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
