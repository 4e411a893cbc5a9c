// wits_cli: quantize | equilibrium | sweep | cost | verify
//
// Settings resolve as: built-in default < --config JSON < WITS_* environment < flag.
// Exit codes: 0 ok, 1 a --strict check failed, 2 invalid input, 3 numeric failure.

#include "wits/wits.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace wits;

namespace {

struct StrictFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Raw settings: every option is read as text so the config file, environment
// and flags can be layered before anything is interpreted.

struct Setting {
    const char* name;   // config key and flag name without dashes
    const char* help;
};

constexpr Setting kSettings[] = {
    {"sigma", "prior standard deviation (sweep: comma list)"},
    {"rL", "leader weight r_L in (0,1), or 'auto' for 1/sigma^2"},
    {"k", "Witsenhausen k; r_L = k^2/(1+k^2)"},
    {"m", "number of positive levels: 10, 1..4 or 1,3,5"},
    {"m-policy", "list | mset"},
    {"tol", "equilibrium stop: sup change below tol*sigma"},
    {"max-rounds", "best-response round cap"},
    {"window", "follower posterior half-width in segments"},
    {"units", "wits | paper (tables)"},
    {"out", "output file (directory for equilibrium and sweep)"},
    {"format", "json | csv"},
    {"threads", "worker threads"},
    {"leader", "leader strategy JSON (cost, verify)"},
    {"follower", "follower strategy JSON (cost)"},
    {"follower-kind", "best_response | quantizer | zero (cost without --follower)"},
    {"mc-samples", "Monte Carlo cross-check samples for cost (0 = off)"},
    {"seed", "Monte Carlo seed"},
};

std::string env_name(const std::string& key) {
    std::string e = "WITS_";
    for (char c : key)
        e += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return e;
}

struct RawConfig {
    std::map<std::string, std::string> values;   // resolved text per key
    bool strict = false;
    bool verify_lemma1 = false;

    std::optional<std::string> get(const std::string& key) const {
        const auto it = values.find(key);
        if (it == values.end() || it->second.empty())
            return std::nullopt;
        return it->second;
    }
};

std::string json_scalar_text(const Json& v, const std::string& key) {
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_number_integer())
        return std::to_string(v.get<long long>());
    if (v.is_number())
        return csv_num(v.get<double>());
    if (v.is_boolean())
        return v.get<bool>() ? "true" : "false";
    if (v.is_array()) {
        std::string s;
        for (const auto& e : v)
            s += (s.empty() ? "" : ",") + json_scalar_text(e, key);
        return s;
    }
    throw UsageError("config: unsupported value for '" + key + "'");
}

// ---------------------------------------------------------------------------
// Typed parsing with messages that name the field

double parse_double(const std::string& key, const std::string& text) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size() || text.empty())
        throw UsageError("--" + key + ": expected a number, got '" + text + "'");
    return v;
}

long parse_long(const std::string& key, const std::string& text) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size() || text.empty())
        throw UsageError("--" + key + ": expected an integer, got '" + text + "'");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<int> parse_m_list(const std::string& text) {
    std::vector<int> out;
    auto one = [](const std::string& t) {
        const long v = parse_long("m", t);
        if (v < 0)
            throw UsageError("--m: must be >= 0, got " + t);
        if (v > 100'000'000)
            throw UsageError("--m: too large, got " + t);
        return static_cast<int>(v);
    };
    for (const std::string& part : split(text, ',')) {
        const auto dots = part.find("..");
        if (dots == std::string::npos) {
            out.push_back(one(part));
            continue;
        }
        const int a = one(part.substr(0, dots)), b = one(part.substr(dots + 2));
        if (b < a)
            throw UsageError("--m: empty range '" + part + "'");
        for (int m = a; m <= b; ++m)
            out.push_back(m);
    }
    return out;
}

struct RunConfig {
    std::string command;
    std::vector<double> sigmas;
    bool r_auto = false;
    double r_L = 0.0;
    bool have_r = false;
    std::vector<int> ms;
    MPolicy m_policy = MPolicy::list;
    double tol = 1e-7;
    int max_rounds = 200;
    int window = 6;
    Units units = Units::wits;
    std::string out;
    std::string format = "json";
    int threads = 1;
    bool strict = false;
    bool verify_lemma1 = false;
    std::string leader_file, follower_file;
    std::string follower_kind = "best_response";
    long mc_samples = 0;
    std::uint64_t seed = 42;

    double sigma() const { return sigmas.front(); }
    double r_at(double sigma) const { return r_auto ? 1.0 / (sigma * sigma) : r_L; }

    Json to_json() const {
        Json j;
        j["command"] = command;
        Json s = Json::array();
        for (double v : sigmas)
            s.push_back(num(v));
        j["sigma"] = s;
        if (have_r)
            j["r_L"] = r_auto ? Json("auto") : num(r_L);
        j["m"] = ms;
        j["m_policy"] = m_policy == MPolicy::mset ? "mset" : "list";
        j["tol"] = num(tol);
        j["max_rounds"] = max_rounds;
        j["window"] = window;
        j["units"] = units == Units::wits ? "wits" : "paper";
        j["format"] = format;
        j["threads"] = threads;
        j["strict"] = strict;
        if (command == "quantize")
            j["verify_lemma1"] = verify_lemma1;
        if (!leader_file.empty())
            j["leader"] = leader_file;
        if (command == "cost") {
            if (!follower_file.empty())
                j["follower"] = follower_file;
            else
                j["follower_kind"] = follower_kind;
            j["mc_samples"] = mc_samples;
            j["seed"] = seed;
        }
        return j;
    }
};

RunConfig resolve(const std::string& command, const RawConfig& raw) {
    RunConfig c;
    c.command = command;
    c.strict = raw.strict;
    c.verify_lemma1 = raw.verify_lemma1;
    const bool needs_r = command != "quantize";
    const bool leader_given = raw.get("leader").has_value() && (command == "cost" || command == "verify");

    if (auto v = raw.get("leader"))
        c.leader_file = *v;
    if (auto v = raw.get("sigma")) {
        for (const std::string& t : split(*v, ','))
            c.sigmas.push_back(parse_double("sigma", t));
    } else if (!leader_given) {
        throw UsageError("--sigma: required");
    }
    for (double s : c.sigmas)
        if (!(s > 0.0) || !std::isfinite(s))
            throw UsageError("--sigma: must be positive and finite");
    if (c.sigmas.size() > 1 && command != "sweep")
        throw UsageError("--sigma: only 'sweep' accepts a list");

    const auto rl = raw.get("rL");
    const auto kk = raw.get("k");
    if (rl && kk)
        throw UsageError("--rL/--k: give exactly one");
    if (needs_r && !rl && !kk && !leader_given)
        throw UsageError("--rL/--k: one of them is required");
    if (rl) {
        c.have_r = true;
        if (*rl == "auto") {
            c.r_auto = true;
        } else {
            c.r_L = parse_double("rL", *rl);
            if (!(c.r_L > 0.0 && c.r_L < 1.0))
                throw UsageError("--rL: must lie in (0, 1)");
        }
    } else if (kk) {
        c.have_r = true;
        const double k = parse_double("k", *kk);
        if (!(k > 0.0) || !std::isfinite(k))
            throw UsageError("--k: must be positive");
        c.r_L = r_from_k(k);
    }
    if (c.r_auto)
        for (double s : c.sigmas)
            if (!(s > 1.0))
                throw UsageError("--rL auto: needs sigma > 1");

    if (auto v = raw.get("m-policy")) {
        if (*v == "list")
            c.m_policy = MPolicy::list;
        else if (*v == "mset")
            c.m_policy = MPolicy::mset;
        else
            throw UsageError("--m-policy: must be 'list' or 'mset'");
    }
    if (c.m_policy == MPolicy::mset && command != "equilibrium" && command != "sweep")
        throw UsageError("--m-policy: mset applies to equilibrium and sweep only");
    if (auto v = raw.get("m"))
        c.ms = parse_m_list(*v);
    if (c.m_policy == MPolicy::list && c.ms.empty() && !leader_given)
        throw UsageError("--m: required (or --m-policy mset)");
    if ((command == "cost" || command == "verify") && c.ms.size() > 1)
        throw UsageError("--m: '" + command + "' takes a single m");

    if (auto v = raw.get("tol")) {
        c.tol = parse_double("tol", *v);
        if (!(c.tol > 0.0))
            throw UsageError("--tol: must be positive");
    }
    if (auto v = raw.get("max-rounds")) {
        const long n = parse_long("max-rounds", *v);
        if (n < 1 || n > 1'000'000)
            throw UsageError("--max-rounds: must be in [1, 1000000]");
        c.max_rounds = static_cast<int>(n);
    }
    if (auto v = raw.get("window")) {
        const long n = parse_long("window", *v);
        if (n < 1 || n > 100000)
            throw UsageError("--window: must be in [1, 100000]");
        c.window = static_cast<int>(n);
    }
    if (auto v = raw.get("units")) {
        try {
            c.units = units_from_string(*v);
        } catch (const UsageError&) {
            throw UsageError("--units: must be 'wits' or 'paper'");
        }
    }
    if (auto v = raw.get("format")) {
        if (*v != "json" && *v != "csv")
            throw UsageError("--format: must be 'json' or 'csv'");
        c.format = *v;
    }
    if (auto v = raw.get("threads")) {
        const long n = parse_long("threads", *v);
        if (n < 1 || n > 1024)
            throw UsageError("--threads: must be in [1, 1024]");
        c.threads = static_cast<int>(n);
    }
    if (auto v = raw.get("out"))
        c.out = *v;
    if (auto v = raw.get("follower"))
        c.follower_file = *v;
    if (auto v = raw.get("follower-kind")) {
        if (*v != "best_response" && *v != "quantizer" && *v != "zero")
            throw UsageError("--follower-kind: must be best_response, quantizer or zero");
        c.follower_kind = *v;
    }
    if (auto v = raw.get("mc-samples")) {
        c.mc_samples = parse_long("mc-samples", *v);
        if (c.mc_samples < 0)
            throw UsageError("--mc-samples: must be >= 0");
    }
    if (auto v = raw.get("seed")) {
        const long s = parse_long("seed", *v);
        if (s < 0)
            throw UsageError("--seed: must be >= 0");
        c.seed = static_cast<std::uint64_t>(s);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Output helpers

void emit(const RunConfig& c, const std::string& text) {
    if (c.out.empty())
        std::fwrite(text.data(), 1, text.size(), stdout);
    else
        write_file(c.out, text);
}

FollowerOptions follower_options(const RunConfig& c) {
    FollowerOptions o;
    o.window = c.window;
    o.threads = c.threads;
    return o;
}

Json levels_json(const BaseConfig& cfg) {
    Json levels = Json::array(), thresholds = Json::array();
    for (int k = -cfg.m; k <= cfg.m; ++k)
        levels.push_back(num(cfg.centroid(k)));
    for (int k = -cfg.m; k <= cfg.m; ++k)
        if (k != 0)
            thresholds.push_back(num(cfg.endpoint(k)));
    Json j;
    j["levels"] = levels;
    j["thresholds"] = thresholds;
    return j;
}

Json asymptotic_json(const AsymptoticReport& a) {
    Json j;
    j["distortion"] = num(a.distortion);
    j["panter_dite_ratio"] = num(a.panter_dite_ratio);
    j["half_gap_ratio"] = num(a.half_gap_ratio);
    j["distortion_vs_gap"] = num(a.distortion_vs_gap);
    j["support_ratio"] = num(a.support_ratio);
    return j;
}

// worst margins first, for humans
void print_margins(const std::string& title, const BoundReport& rep, int limit) {
    const auto sorted = rep.sorted_by_margin();
    int negative = 0;
    for (const auto& r : sorted)
        negative += !r.pass;
    fmt::print(stderr, "{}: {} records, {} failing\n", title, sorted.size(), negative);
    for (int i = 0; i < limit && i < static_cast<int>(sorted.size()); ++i) {
        const auto& r = sorted[i];
        if (r.vacuous)
            break;
        fmt::print(stderr, "  {:<6} {:<24} k={:<6} observed {:>12.5e} bound {:>12.5e} margin {:>12.5e}\n",
                   r.pass ? "ok" : "FAIL", r.name, r.k, r.observed, r.bound, r.margin);
    }
}

// ---------------------------------------------------------------------------
// Commands

int cmd_quantize(const RunConfig& c) {
    Json results = Json::array();
    bool all_pass = true;
    std::string csv;
    if (c.format == "csv" && c.ms.size() != 1)
        throw UsageError("--format csv: quantize takes a single m");
    for (int m : c.ms) {
        const BaseConfig cfg = build_base(m, c.sigma());
        Json r;
        r["base"] = to_json(cfg);
        const Json lv = levels_json(cfg);
        r["levels"] = lv["levels"];
        r["thresholds"] = lv["thresholds"];
        r["stationarity_residual"] = num(cfg.stationarity_residual());
        r["distortion"] = num(base_distortion(cfg));
        if (m >= 2)
            r["asymptotic"] = asymptotic_json(asymptotic_checks(cfg));
        if (c.verify_lemma1) {
            if (m < 2)
                throw UsageError("--verify-lemma1: needs m >= 2");
            const BoundReport rep = verify_lemma1(cfg);
            r["lemma1"] = to_json(rep);
            r["lemma1_summary"] = summary_json(rep);
            all_pass = all_pass && rep.all_pass();
            print_margins(fmt::format("m={} quantizer bounds", m), rep, 5);
        }
        csv = base_config_csv(cfg);
        results.push_back(std::move(r));
    }
    if (c.format == "csv")
        emit(c, csv);
    else
        emit(c, dump(envelope("quantize", c.to_json(), c.ms.size() == 1 ? results[0] : results)));
    if (c.strict && !all_pass)
        throw StrictFailure("quantizer bound check failed");
    return 0;
}

void write_sweep_artifacts(const RunConfig& c, const SweepResult& res) {
    namespace fs = std::filesystem;
    const fs::path dir(c.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw UsageError("--out: cannot create directory '" + c.out + "'");
    const Json cfg = c.to_json();
    write_file((dir / "summary.json").string(), dump(envelope("sweep", cfg, to_json(res))));
    write_file((dir / "table.csv").string(), sweep_csv(res.rows, c.units));
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        const SweepRow& row = res.rows[i];
        const IterateResult& run = res.runs[i];
        const std::string tag = fmt::format("sigma{}_m{}", csv_num(row.sigma), row.m);
        Json cell = cfg;
        cell["sigma"] = num(row.sigma);
        cell["r_L"] = num(row.r_L);
        cell["m"] = row.m;
        write_file((dir / ("trace_" + tag + ".jsonl")).string(), trace_jsonl(run.trace, cell));
        if (run.trace.rounds.empty() && row.status == TerminalStatus::error)
            continue;
        write_file((dir / ("leader_" + tag + ".json")).string(), dump(envelope("leader", cell, to_json(run.leader))));
        write_file((dir / ("follower_" + tag + ".json")).string(),
                   dump(envelope("follower", cell, to_json(run.follower))));
        const double span = 6.0 * row.sigma;
        write_file((dir / ("leader_" + tag + ".csv")).string(), leader_series_csv(run.leader, span, 2000));
        write_file((dir / ("follower_" + tag + ".csv")).string(), follower_series_csv(run.follower, span, 2000));
    }
}

int cmd_sweep(const RunConfig& c) {
    SweepSpec spec;
    spec.sigmas = c.sigmas;
    spec.m_policy = c.m_policy;
    spec.m_list = c.ms;
    spec.r_policy = c.r_auto ? RPolicy::inverse_square : RPolicy::fixed;
    spec.r_L = c.r_L;
    spec.iterate.tol = c.tol;
    spec.iterate.max_rounds = c.max_rounds;
    spec.iterate.threads = c.threads;
    spec.iterate.follower = follower_options(c);

    auto in_units = [&](double U, double r) { return c.units == Units::wits ? U / (1.0 - r) : U; };
    const SweepResult res = equilibrium_sweep(spec, [&](const SweepRow& row) {
        fmt::print(stderr, "sigma={} m={} {} after {} rounds{}\n", csv_num(row.sigma), row.m, to_string(row.status),
                   row.rounds, row.cost ? fmt::format(", U={:.10g}", in_units(row.cost->total, row.r_L)) : "");
    });
    for (const auto& n : res.notices)
        fmt::print(stderr, "notice: {}\n", n);

    const char* unit_name = c.units == Units::wits ? "Witsenhausen" : "game";
    for (double sigma : c.sigmas) {
        const double r = c.r_at(sigma);
        fmt::print(stderr, "sigma={} ({} units)\n", csv_num(sigma), unit_name);
        for (const auto& row : res.rows)
            if (row.sigma == sigma)
                fmt::print(stderr, "  m={:<8} {:<16} {}\n", row.m, to_string(row.status),
                           row.cost ? fmt::format("{:.10g}", in_units(row.cost->total, r)) : "-");
        fmt::print(stderr, "  {:<25} {:.10g}\n", "linear benchmark", in_units(linear_benchmark(r, sigma).cost.total, r));
        if (sigma > 1.0)
            fmt::print(stderr, "  {:<25} {:.10g}\n", "lower bound", in_units(lower_bound(sigma), r));
    }

    if (!c.out.empty())
        write_sweep_artifacts(c, res);
    else if (c.format == "csv")
        emit(c, sweep_csv(res.rows, c.units));
    else
        emit(c, dump(envelope("sweep", c.to_json(), to_json(res))));

    if (c.strict)
        for (const auto& row : res.rows)
            if (row.status != TerminalStatus::converged)
                throw NonConvergence(fmt::format("cell sigma={} m={} ended {}", csv_num(row.sigma), row.m,
                                                 to_string(row.status)),
                                     row.residual, row.residual);
    return 0;
}

struct LoadedLeader {
    LeaderStrategy leader;
    std::optional<BaseConfig> base;   // when built from (sigma, m)
    double r_L = 0.0;
};

LoadedLeader load_leader(RunConfig& c) {
    if (!c.leader_file.empty()) {
        const Json j = parse_json(read_file(c.leader_file));
        LeaderStrategy L = leader_from_json(open_envelope(j, "leader"));
        if (c.sigmas.empty())
            c.sigmas = {L.sigma()};
        else if (c.sigma() != L.sigma())
            throw UsageError("--sigma: does not match the leader file");
        if (!c.have_r) {
            c.have_r = true;
            c.r_L = L.r_L();
        }
        if (c.ms.empty())
            c.ms = {L.m()};
        else if (c.ms.front() != L.m())
            throw UsageError("--m: does not match the leader file");
        return {std::move(L), std::nullopt, c.r_at(c.sigma())};
    }
    const double r = c.r_at(c.sigma());
    BaseConfig cfg = build_base(c.ms.front(), c.sigma());
    LeaderStrategy L = slopey_from_base(cfg, r);
    return {std::move(L), std::move(cfg), r};
}

int cmd_cost(RunConfig c) {
    const LoadedLeader ld = load_leader(c);
    const double sigma = c.sigma(), r = ld.r_L;
    FollowerStrategy F;
    if (!c.follower_file.empty()) {
        F = follower_from_json(open_envelope(parse_json(read_file(c.follower_file)), "follower"));
    } else if (c.follower_kind == "quantizer") {
        if (!ld.base)
            throw UsageError("--follower-kind quantizer: needs a base configuration (--sigma, --m)");
        F = FollowerStrategy::quantizer(*ld.base);
    } else if (c.follower_kind == "zero") {
        F = FollowerStrategy::zero();
    } else {
        F = follower_br(ld.leader, follower_options(c));
    }
    CostOptions copt;
    copt.threads = c.threads;
    const CostBreakdown cost = expected_cost(ld.leader, F, r, sigma, copt);

    Json data;
    data["cost"] = to_json(cost);
    const LinearBenchmark lin = linear_benchmark(r, sigma);
    data["linear_lambda"] = num(lin.lambda_star);
    data["linear_cost"] = to_json(lin.cost);
    if (sigma > 1.0) {
        data["lower_bound"] = num(lower_bound(sigma));
        data["lower_bound_wits"] = num(lower_bound(sigma) / (1.0 - r));
    }
    if (ld.base && c.follower_file.empty() && c.follower_kind == "quantizer")
        data["base_pair"] = to_json(base_pair_cost(*ld.base, r, copt));
    if (c.mc_samples > 0) {
        // plain Monte Carlo on (theta, w) as an independent cross-check
        std::mt19937_64 gen(c.seed);
        std::normal_distribution<double> nd(0.0, 1.0);
        double sum = 0.0, sum2 = 0.0;
        for (long i = 0; i < c.mc_samples; ++i) {
            const double th = sigma * nd(gen), w = nd(gen);
            const double a = ld.leader.eval(th);
            const double v = r * (a - th) * (a - th) + (1.0 - r) * (a - F(a + w)) * (a - F(a + w));
            sum += v;
            sum2 += v * v;
        }
        const double n = static_cast<double>(c.mc_samples);
        const double mean = sum / n;
        Json mc;
        mc["samples"] = c.mc_samples;
        mc["seed"] = c.seed;
        mc["mean"] = num(mean);
        mc["std_error"] = num(std::sqrt(std::max(0.0, sum2 / n - mean * mean) / n));
        data["monte_carlo"] = mc;
    }
    if (c.format == "csv")
        emit(c, cost_csv(cost));
    else
        emit(c, dump(envelope("cost", c.to_json(), data)));
    return 0;
}

int cmd_verify(RunConfig c) {
    const LoadedLeader ld = load_leader(c);
    const double sigma = c.sigma(), r = ld.r_L;
    const BaseConfig base = ld.base ? *ld.base : build_base(ld.leader.m(), sigma);
    Json data;
    bool clean = true;

    const PropertyReport in = check_membership(ld.leader, base, r, sigma);
    data["membership_input"] = to_json(in);
    clean = clean && in.overall;
    print_margins("input membership", in.records, 5);

    if (base.m >= 2) {
        const BoundReport q = verify_lemma1(base);
        data["quantizer_bounds"] = to_json(q);
        clean = clean && q.all_pass();
    }
    if (ld.base && base.m >= 1) {
        const BasePairCost bp = base_pair_cost(base, r);
        data["base_pair"] = to_json(bp);
        clean = clean && bp.bound_margin >= 0.0;
    }

    const FollowerStrategy F = follower_br(ld.leader, follower_options(c));
    const LeaderContext ctx{&ld.leader, ClassBounds::make(base, r)};
    LeaderOptions lo;
    lo.threads = c.threads;
    const LeaderObjective obj(F, ctx, lo);
    try {
        const LeaderResponse R = leader_br_full(obj);
        const BrDiagnostics d = verify_br_bounds(obj, R);
        const PropertyReport out = check_membership(R.strategy, base, r, sigma);
        data["br_bounds"] = to_json(d);
        data["br_summary"] = summary_json(d);
        data["membership_output"] = to_json(out);
        clean = clean && d.all_pass() && out.overall;
        print_margins("best-response bounds", d, 15);
        print_margins("output membership", out.records, 5);
    } catch (const StructureLost& e) {
        // the response leaves the class; that is a finding, not a crash
        data["br_error"] = e.what();
        clean = false;
        fmt::print(stderr, "best response left the class: {}\n", e.what());
    }
    data["all_pass"] = clean;
    emit(c, dump(envelope("verify", c.to_json(), data)));
    if (c.strict && !clean)
        throw StrictFailure("negative margins present");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Slopey-quantizer equilibria for the two-stage Gaussian control game"};
    app.require_subcommand(1);
    std::string config_file;

    std::map<std::string, std::string> flag_values;
    std::vector<std::pair<std::string, CLI::Option*>> options;
    bool strict = false, lemma1 = false;
    auto add_common = [&](CLI::App* sub) {
        for (const Setting& s : kSettings) {
            CLI::Option* o = sub->add_option(std::string("--") + s.name, flag_values[s.name], s.help)
                                 ->envname(env_name(s.name));
            options.emplace_back(s.name, o);
        }
        sub->add_flag("--strict", strict, "nonzero exit on any failed check")->envname("WITS_STRICT");
        sub->add_option("--config", config_file, "JSON settings file (flags override)")->envname("WITS_CONFIG");
    };
    CLI::App* q = app.add_subcommand("quantize", "optimal symmetric quantizer and its bounds");
    add_common(q);
    q->add_flag("--verify-lemma1", lemma1, "attach the structural bound report");
    CLI::App* e = app.add_subcommand("equilibrium", "best-response iteration at one sigma");
    add_common(e);
    CLI::App* s = app.add_subcommand("sweep", "equilibrium cells over several sigma");
    add_common(s);
    CLI::App* c = app.add_subcommand("cost", "expected cost of a strategy pair");
    add_common(c);
    CLI::App* v = app.add_subcommand("verify", "margin suite for one best-response round");
    add_common(v);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        const std::string command = app.get_subcommands().front()->get_name();
        RawConfig raw;
        if (!config_file.empty()) {
            const Json j = parse_json(read_file(config_file));
            if (!j.is_object())
                throw UsageError("--config: expected a JSON object");
            for (const auto& [key, val] : j.items()) {
                if (key == "strict")
                    raw.strict = val.is_boolean() && val.get<bool>();
                else if (key == "verify_lemma1" || key == "verify-lemma1")
                    raw.verify_lemma1 = val.is_boolean() && val.get<bool>();
                else {
                    std::string k = key;
                    std::replace(k.begin(), k.end(), '_', '-');
                    if (k == "r-L" || k == "rl")
                        k = "rL";
                    bool known = false;
                    for (const Setting& st : kSettings)
                        known = known || k == st.name;
                    if (!known)
                        throw UsageError("--config: unknown setting '" + key + "'");
                    raw.values[k] = json_scalar_text(val, key);
                }
            }
        }
        for (const auto& [name, opt] : options)
            if (opt->count() > 0)
                raw.values[name] = flag_values[name];
        // --rL and --k exclude each other; a later layer that sets one drops the
        // other from earlier layers, both on the same layer is an error
        std::set<std::string> r_layer;
        for (const auto& [name, opt] : options)
            if (opt->count() > 0 && (name == "rL" || name == "k"))
                r_layer.insert(name);
        if (r_layer.size() == 1)
            raw.values.erase(*r_layer.begin() == "rL" ? "k" : "rL");
        raw.strict = raw.strict || strict;
        raw.verify_lemma1 = raw.verify_lemma1 || lemma1;

        RunConfig cfg = resolve(command, raw);
        if (command == "quantize")
            return cmd_quantize(cfg);
        if (command == "equilibrium" || command == "sweep")
            return cmd_sweep(cfg);
        if (command == "cost")
            return cmd_cost(cfg);
        return cmd_verify(cfg);
    } catch (const UsageError& err) {
        fmt::print(stderr, "error: {}\n", err.what());
        return 2;
    } catch (const DomainError& err) {
        fmt::print(stderr, "error: {}\n", err.what());
        return 2;
    } catch (const StrictFailure& err) {
        fmt::print(stderr, "strict: {}\n", err.what());
        return 1;
    } catch (const std::exception& err) {
        fmt::print(stderr, "numeric failure: {}\n", err.what());
        return 3;
    }
}
