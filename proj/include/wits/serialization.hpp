// -*- c++ -*-
/**
 * @file serialization.hpp
 * @brief JSON and CSV forms of configurations, strategies, reports, traces and
 *        sweep tables.
 *
 * JSON numbers use the shortest decimal form that round-trips to the same
 * double; non-finite values are written as the strings "inf", "-inf", "nan".
 * CSV numbers use 17 significant digits.
 */
#ifndef WITS_SERIALIZATION_HPP
#define WITS_SERIALIZATION_HPP

#include "wits/equilibrium.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace wits {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Numbers

inline Json num(double v) {
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return v;
}

inline double get_num(const Json& j, const char* field) {
    if (j.is_number())
        return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf")
            return -std::numeric_limits<double>::infinity();
        if (s == "nan")
            return std::numeric_limits<double>::quiet_NaN();
    }
    throw UsageError(std::string("expected a number in field '") + field + "'");
}

inline const Json& need(const Json& j, const char* field) {
    if (!j.is_object() || !j.contains(field))
        throw UsageError(std::string("missing field '") + field + "'");
    return j.at(field);
}

inline double need_num(const Json& j, const char* field) { return get_num(need(j, field), field); }

inline int need_int(const Json& j, const char* field) {
    const Json& v = need(j, field);
    if (!v.is_number_integer())
        throw UsageError(std::string("expected an integer in field '") + field + "'");
    return v.get<int>();
}

inline Json num_array(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v)
        a.push_back(num(x));
    return a;
}

inline std::vector<double> need_num_array(const Json& j, const char* field) {
    const Json& a = need(j, field);
    if (!a.is_array())
        throw UsageError(std::string("expected an array in field '") + field + "'");
    std::vector<double> out;
    out.reserve(a.size());
    for (const auto& x : a)
        out.push_back(get_num(x, field));
    return out;
}

inline std::string csv_num(double v) { return fmt::format("{:.17g}", v); }

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"')
            out += '"';
        out += ch;
    }
    return out + "\"";
}

/// Wraps a payload with the schema version, artifact kind and producing config.
inline Json envelope(const std::string& kind, const Json& config, Json data) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = kind;
    j["config"] = config;
    j["data"] = std::move(data);
    return j;
}

inline const Json& open_envelope(const Json& j, const std::string& kind) {
    if (j.is_object() && j.contains("schema_version")) {
        if (need_int(j, "schema_version") != kSchemaVersion)
            throw UsageError("unsupported schema_version");
        if (need(j, "kind") != kind)
            throw UsageError("expected a '" + kind + "' artifact");
        return need(j, "data");
    }
    return j;   // bare payload
}

inline Json parse_json(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(std::string("malformed JSON: ") + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw UsageError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw UsageError("cannot write '" + path + "'");
    out << text;
    if (!out)
        throw UsageError("write failed for '" + path + "'");
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// BaseConfig

inline Json to_json(const BaseConfig& cfg) {
    Json j;
    j["m"] = cfg.m;
    j["sigma"] = num(cfg.sigma);
    j["endpoints"] = num_array(std::vector<double>(cfg.b.begin() + 1, cfg.b.end()));
    j["centroids"] = num_array(cfg.c);
    j["half_gaps"] = num_array(std::vector<double>(cfg.x.begin() + 1, cfg.x.end()));
    j["residual"] = num(cfg.residual);
    j["iterations"] = cfg.iterations;
    return j;
}

inline BaseConfig base_config_from_json(const Json& jin) {
    const Json& j = open_envelope(jin, "base_config");
    BaseConfig cfg;
    cfg.m = need_int(j, "m");
    cfg.sigma = need_num(j, "sigma");
    if (cfg.m < 0)
        throw UsageError("base_config: m must be >= 0");
    if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma))
        throw UsageError("base_config: sigma must be positive");
    const auto b = need_num_array(j, "endpoints");
    cfg.c = need_num_array(j, "centroids");
    if (static_cast<int>(b.size()) != cfg.m || static_cast<int>(cfg.c.size()) != cfg.m + 1)
        throw UsageError("base_config: endpoints/centroids have the wrong length");
    cfg.b.assign(1, 0.0);
    cfg.b.insert(cfg.b.end(), b.begin(), b.end());
    cfg.x.assign(1, 0.0);
    if (j.contains("half_gaps")) {
        const auto x = need_num_array(j, "half_gaps");
        if (static_cast<int>(x.size()) != cfg.m)
            throw UsageError("base_config: half_gaps has the wrong length");
        cfg.x.insert(cfg.x.end(), x.begin(), x.end());
    } else {
        for (int k = 1; k <= cfg.m; ++k)
            cfg.x.push_back(0.5 * (cfg.c[k] - cfg.c[k - 1]));
    }
    if (j.contains("residual"))
        cfg.residual = need_num(j, "residual");
    if (j.contains("iterations"))
        cfg.iterations = need_int(j, "iterations");
    return cfg;
}

inline std::string base_config_csv(const BaseConfig& cfg) {
    std::string out = "k,b_k,c_k,x_k\n";
    for (int k = 0; k <= cfg.m; ++k)
        out += fmt::format("{},{},{},{}\n", k, csv_num(k == 0 ? 0.0 : cfg.b[k]), csv_num(cfg.c[k]),
                           csv_num(k == 0 ? 0.0 : cfg.x[k]));
    return out;
}

// ---------------------------------------------------------------------------
// Strategies

inline Json to_json(const SegmentShape& shape) {
    Json j;
    if (const auto* lin = std::get_if<LinearShape>(&shape)) {
        j["kind"] = "linear";
        j["slope"] = num(lin->slope);
    } else {
        const auto& s = std::get<SampledShape>(shape);
        j["kind"] = "sampled";
        j["u"] = num_array(s.u);
        j["g"] = num_array(s.g);
        j["dg"] = num_array(s.dg);
    }
    return j;
}

inline SegmentShape shape_from_json(const Json& j) {
    const Json& kind = need(j, "kind");
    if (kind == "linear")
        return LinearShape{need_num(j, "slope")};
    if (kind == "sampled")
        return SampledShape{need_num_array(j, "u"), need_num_array(j, "g"), need_num_array(j, "dg")};
    throw UsageError("unknown segment shape kind");
}

inline Json to_json(const LeaderStrategy& s) {
    Json j;
    j["m"] = s.m();
    j["sigma"] = num(s.sigma());
    j["r_L"] = num(s.r_L());
    Json segs = Json::array();
    for (int k = 0; k <= s.m(); ++k) {
        const SegmentView v = s.segment(k);
        Json seg;
        seg["k"] = k;
        seg["b_left"] = num(v.center + v.lo);
        seg["b_right"] = num(v.center + v.hi);
        seg["c"] = num(s.fixed_point(k));
        seg["beta"] = num(s.endpoint_offset(k));
        seg["slope_knots"] = to_json(s.shapes()[k]);
        segs.push_back(std::move(seg));
    }
    j["segments"] = std::move(segs);
    j["tail_rule"] = "linear_extension";
    j["symmetry"] = "odd";
    return j;
}

inline LeaderStrategy leader_from_json(const Json& jin) {
    const Json& j = open_envelope(jin, "leader_strategy");
    const int m = need_int(j, "m");
    if (m < 0)
        throw UsageError("leader_strategy: m must be >= 0");
    const Json& segs = need(j, "segments");
    if (!segs.is_array() || static_cast<int>(segs.size()) != m + 1)
        throw UsageError("leader_strategy: segments must have m+1 entries");
    if (j.contains("tail_rule") && need(j, "tail_rule") != "linear_extension")
        throw UsageError("leader_strategy: unsupported tail_rule");
    std::vector<double> c, beta;
    std::vector<SegmentShape> shapes;
    for (const auto& seg : segs) {
        c.push_back(need_num(seg, "c"));
        beta.push_back(need_num(seg, "beta"));
        shapes.push_back(shape_from_json(need(seg, "slope_knots")));
    }
    try {
        return LeaderStrategy(m, need_num(j, "sigma"), need_num(j, "r_L"), std::move(c), std::move(beta),
                              std::move(shapes));
    } catch (const DomainError& e) {
        throw UsageError(std::string("leader_strategy: ") + e.what());
    }
}

inline Json to_json(const FollowerOptions& o) {
    Json j;
    j["panel_order"] = o.spec.panel_order;
    j["abs_tol"] = num(o.spec.abs_tol);
    j["rel_tol"] = num(o.spec.rel_tol);
    j["tail_cutoff_sigmas"] = num(o.spec.tail_cutoff_sigmas);
    j["max_panels"] = o.spec.max_panels;
    j["window"] = o.window;
    j["window_eps"] = num(o.window_eps);
    j["use_cache"] = o.use_cache;
    j["uniform_knots"] = o.uniform_knots;
    j["cluster_knots"] = o.cluster_knots;
    j["max_knots_per_cell"] = o.max_knots_per_cell;
    return j;
}

inline FollowerOptions follower_options_from_json(const Json& j) {
    FollowerOptions o;
    if (j.contains("panel_order"))
        o.spec.panel_order = need_int(j, "panel_order");
    if (j.contains("abs_tol"))
        o.spec.abs_tol = need_num(j, "abs_tol");
    if (j.contains("rel_tol"))
        o.spec.rel_tol = need_num(j, "rel_tol");
    if (j.contains("tail_cutoff_sigmas"))
        o.spec.tail_cutoff_sigmas = need_num(j, "tail_cutoff_sigmas");
    if (j.contains("max_panels"))
        o.spec.max_panels = need_int(j, "max_panels");
    if (j.contains("window"))
        o.window = need_int(j, "window");
    if (j.contains("window_eps"))
        o.window_eps = need_num(j, "window_eps");
    if (j.contains("use_cache"))
        o.use_cache = need(j, "use_cache").get<bool>();
    if (j.contains("uniform_knots"))
        o.uniform_knots = need_int(j, "uniform_knots");
    if (j.contains("cluster_knots"))
        o.cluster_knots = need_int(j, "cluster_knots");
    if (j.contains("max_knots_per_cell"))
        o.max_knots_per_cell = need_int(j, "max_knots_per_cell");
    return o;
}

/// A best-response follower is stored as the leader it responds to plus the
/// options used; loading recomputes it deterministically.
inline Json to_json(const FollowerStrategy& f) {
    Json j;
    j["kind"] = f.kind();
    const FollowerModel& mdl = f.model();
    if (const auto* lin = dynamic_cast<const LinearFollower*>(&mdl)) {
        j["gain"] = num(lin->gain());
    } else if (const auto* q = dynamic_cast<const QuantizerFollower*>(&mdl)) {
        j["levels"] = num_array(q->levels());
        j["thresholds"] = num_array(q->thresholds());
    } else if (const auto* br = as_best_response(f)) {
        j["leader"] = to_json(br->leader());
        j["options"] = to_json(br->options());
    }
    return j;
}

inline FollowerStrategy follower_from_json(const Json& jin) {
    const Json& j = open_envelope(jin, "follower_strategy");
    const Json& kind = need(j, "kind");
    if (kind == "zero")
        return FollowerStrategy::zero();
    if (kind == "linear")
        return FollowerStrategy::linear(need_num(j, "gain"));
    if (kind == "quantizer")
        return FollowerStrategy(std::make_shared<QuantizerFollower>(need_num_array(j, "levels"),
                                                                    need_num_array(j, "thresholds")));
    if (kind == "best_response") {
        const FollowerOptions o = j.contains("options") ? follower_options_from_json(j["options"]) : FollowerOptions{};
        return follower_br(leader_from_json(need(j, "leader")), o);
    }
    throw UsageError("unknown follower kind");
}

/// (theta, a_L(theta)) on theta in [0, theta_max], n uniform points plus 8
/// points around each segment endpoint.
inline std::string leader_series_csv(const LeaderStrategy& s, double theta_max, int n) {
    std::vector<double> th;
    for (int i = 0; i < n; ++i)
        th.push_back(theta_max * i / std::max(1, n - 1));
    for (int k = 1; k <= s.m(); ++k)
        for (int i = -4; i <= 4; ++i)
            if (i != 0)
                th.push_back(s.endpoint(k) + i * 1e-3 * std::max(1.0, s.endpoint(k) - s.fixed_point(k - 1)));
    std::sort(th.begin(), th.end());
    std::string out = "theta,a_L\n";
    for (double t : th)
        if (t >= 0.0 && t <= theta_max)
            out += csv_num(t) + "," + csv_num(s.eval(t)) + "\n";
    return out;
}

/// (s, a_F(s)) on [0, s_max], uniform plus dense sampling near the follower's
/// transition points when it is a best response.
inline std::string follower_series_csv(const FollowerStrategy& f, double s_max, int n) {
    std::vector<double> ss;
    for (int i = 0; i < n; ++i)
        ss.push_back(s_max * i / std::max(1, n - 1));
    if (const auto* br = as_best_response(f)) {
        const LeaderStrategy& L = br->leader();
        for (int k = 1; k <= L.m(); ++k) {
            const double mid = L.fixed_point(k) + br->transition_local(k);
            for (int i = -32; i <= 32; ++i)
                ss.push_back(mid + i * 0.125);
        }
    }
    std::sort(ss.begin(), ss.end());
    ss.erase(std::unique(ss.begin(), ss.end()), ss.end());
    std::string out = "s,a_F\n";
    for (double s : ss)
        if (s >= 0.0 && s <= s_max)
            out += csv_num(s) + "," + csv_num(f.value(s)) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Reports

inline Json to_json(const BoundRecord& r) {
    Json j;
    j["lemma"] = r.name;
    j["k"] = r.k;
    j["bound"] = num(r.bound);
    j["observed"] = num(r.observed);
    j["margin"] = num(r.margin);
    j["pass"] = r.pass;
    if (r.vacuous)
        j["vacuous"] = true;
    return j;
}

inline Json to_json(const BoundReport& rep) {
    Json a = Json::array();
    for (const auto& r : rep.records)
        a.push_back(to_json(r));
    return a;
}

inline BoundReport bound_report_from_json(const Json& a) {
    if (!a.is_array())
        throw UsageError("bound report must be an array");
    BoundReport rep;
    for (const auto& j : a) {
        BoundRecord r;
        r.name = need(j, "lemma").get<std::string>();
        r.k = need_int(j, "k");
        r.bound = need_num(j, "bound");
        r.observed = need_num(j, "observed");
        r.margin = need_num(j, "margin");
        r.pass = need(j, "pass").get<bool>();
        r.vacuous = j.contains("vacuous") && j["vacuous"].get<bool>();
        rep.add(std::move(r));
    }
    return rep;
}

inline Json summary_json(const BoundReport& rep) {
    Json j;
    j["records"] = rep.records.size();
    std::size_t fails = 0;
    for (const auto& r : rep.records)
        fails += r.pass ? 0 : 1;
    j["failures"] = fails;
    if (const BoundRecord* w = rep.worst())
        j["worst"] = to_json(*w);
    return j;
}

inline Json to_json(const PropertyReport& p, bool with_records = true) {
    Json j;
    j["overall"] = p.overall;
    j["property1"] = p.property1;
    j["property2"] = p.property2;
    j["property3"] = p.property3;
    j["unique_fixed_points"] = p.unique_fixed_points;
    j["monotone"] = p.monotone;
    j["endpoint_offset_max"] = num(p.endpoint_offset_max);
    j["endpoint_offset_margin"] = num(p.endpoint_offset_margin);
    j["displacement_max"] = num(p.displacement_max);
    j["displacement_margin"] = num(p.displacement_margin);
    j["slope_min"] = num(p.slope_min);
    j["slope_max"] = num(p.slope_max);
    j["slope_margin"] = num(p.slope_margin);
    j["tail_bound_margin"] = num(p.tail_bound_margin);
    j["fixed_point_error"] = num(p.fixed_point_error);
    j["monotone_margin"] = num(p.monotone_margin);
    if (with_records)
        j["records"] = to_json(p.records);
    return j;
}

inline Json to_json(const CostBreakdown& c) {
    Json j;
    j["stage1"] = num(c.stage1);
    j["stage2"] = num(c.stage2);
    j["total"] = num(c.total);
    j["witsenhausen_units"] = num(c.witsenhausen_units);
    j["error"] = num(c.error);
    j["r_L"] = num(c.r_L);
    j["sigma"] = num(c.sigma);
    j["k"] = num(c.k);
    return j;
}

inline std::string cost_csv(const CostBreakdown& c) {
    return "stage1,stage2,total,witsenhausen_units,error,r_L,sigma,k\n" +
           fmt::format("{},{},{},{},{},{},{},{}\n", csv_num(c.stage1), csv_num(c.stage2), csv_num(c.total),
                       csv_num(c.witsenhausen_units), csv_num(c.error), csv_num(c.r_L), csv_num(c.sigma),
                       csv_num(c.k));
}

inline Json to_json(const BasePairCost& b) {
    Json j;
    j["D_L0"] = num(b.D_L0);
    j["D_F0"] = num(b.D_F0);
    j["excess"] = num(b.excess);
    j["U"] = num(b.U);
    j["stage1"] = num(b.stage1);
    j["stage2"] = num(b.stage2);
    j["D_F0_bound"] = num(b.bound);
    j["bound_margin"] = num(b.bound_margin);
    j["bound_vacuous"] = b.bound_vacuous;
    j["error"] = num(b.error);
    return j;
}

// ---------------------------------------------------------------------------
// Traces and sweeps

inline Json to_json(const StrategyChange& c) {
    Json j;
    j["sup"] = num(c.sup);
    j["fixed_points"] = num(c.fixed_points);
    j["endpoints"] = num(c.endpoints);
    return j;
}

inline Json to_json(const RoundRecord& r) {
    Json j;
    j["round"] = r.round;
    if (r.cost) {
        j["U_total"] = num(r.cost->total);
        j["U_wits"] = num(r.cost->witsenhausen_units);
        j["cost"] = to_json(*r.cost);
    } else {
        j["U_total"] = nullptr;
    }
    j["sup_residual"] = num(r.sup_residual);
    j["change"] = to_json(r.change);
    j["membership"] = to_json(r.membership, false);
    if (r.diagnostics) {
        j["br_diagnostics_ref"] = r.round;
        j["br_diagnostics"] = summary_json(*r.diagnostics);
    } else {
        j["br_diagnostics_ref"] = nullptr;
    }
    if (!r.warnings.empty())
        j["warnings"] = r.warnings;
    return j;
}

/// One JSON object per line: every round, then a terminal record.
inline std::string trace_jsonl(const IterationTrace& t, const Json& config) {
    std::string out;
    Json head;
    head["schema_version"] = kSchemaVersion;
    head["kind"] = "iteration_trace";
    head["config"] = config;
    out += head.dump() + "\n";
    for (const auto& r : t.rounds)
        out += to_json(r).dump() + "\n";
    Json tail;
    tail["terminal_status"] = to_string(t.status);
    tail["message"] = t.message;
    tail["rounds"] = t.rounds.size();
    tail["monotone"] = t.monotone;
    tail["worst_increase"] = num(t.worst_increase);
    out += tail.dump() + "\n";
    return out;
}

enum class Units { wits, paper };

inline Units units_from_string(const std::string& s) {
    if (s == "wits")
        return Units::wits;
    if (s == "paper")
        return Units::paper;
    throw UsageError("units must be 'wits' or 'paper'");
}

inline Json to_json(const SweepRow& r) {
    Json j;
    j["sigma"] = num(r.sigma);
    j["r_L"] = num(r.r_L);
    j["k"] = num(k_from_r(r.r_L));
    j["m"] = r.m;
    j["status"] = to_string(r.status);
    j["message"] = r.message;
    j["rounds"] = r.rounds;
    j["residual"] = num(r.residual);
    j["monotone"] = r.monotone;
    j["membership"] = r.membership;
    const double w = 1.0 / (1.0 - r.r_L);
    if (r.cost)
        j["cost"] = to_json(*r.cost);
    j["linear_U"] = num(r.linear_U);
    j["linear_U_wits"] = num(r.linear_U * w);
    j["linear_lambda"] = num(r.linear_lambda);
    if (r.lower_bound) {
        j["lower_bound"] = num(*r.lower_bound);
        j["lower_bound_wits"] = num(*r.lower_bound * w);
    }
    if (r.cost) {
        j["ratio_vs_asymptotic_upper"] = num(r.ratio.vs_asymptotic_upper);
        if (r.ratio.vs_lower_bound)
            j["ratio_vs_lower_bound"] = num(*r.ratio.vs_lower_bound);
        if (!r.ratio.regime_error.empty())
            j["regime_note"] = r.ratio.regime_error;
    }
    return j;
}

/**
 * Cost table. U, linear_U and lower_bound are in the selected units; U_wits is
 * always Witsenhausen units. ratio = U / lower_bound (unit-free), blank when
 * sigma <= 1 or the cell has no cost. Rows of failed cells carry their status.
 */
inline std::string sweep_csv(const std::vector<SweepRow>& rows, Units units) {
    std::string out = "sigma,r_L,m,U,U_wits,linear_U,lower_bound,ratio,status,rounds,residual\n";
    for (const auto& r : rows) {
        const double w = units == Units::wits ? 1.0 / (1.0 - r.r_L) : 1.0;
        const std::string U = r.cost ? csv_num(r.cost->total * w) : "";
        const std::string Uw = r.cost ? csv_num(r.cost->witsenhausen_units) : "";
        const std::string lb = r.lower_bound ? csv_num(*r.lower_bound * w) : "";
        const std::string ratio = r.cost && r.lower_bound ? csv_num(r.cost->total / *r.lower_bound) : "";
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", csv_num(r.sigma), csv_num(r.r_L), r.m, U, Uw,
                           csv_num(r.linear_U * w), lb, ratio, to_string(r.status), r.rounds,
                           csv_num(r.residual));
    }
    return out;
}

inline Json to_json(const SweepResult& s) {
    Json j;
    Json rows = Json::array();
    for (const auto& r : s.rows)
        rows.push_back(to_json(r));
    j["rows"] = std::move(rows);
    j["notices"] = s.notices;
    return j;
}

} // namespace wits

#endif
