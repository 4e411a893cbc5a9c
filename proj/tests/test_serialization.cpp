#include "wits/serialization.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

using namespace wits;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// Leader with sampled profiles, built from one best-response round.
const LeaderStrategy& sampled_leader() {
    static const LeaderStrategy L = [] {
        const BaseConfig cfg = build_base(2, 5.0);
        const LeaderStrategy L0 = slopey_from_base(cfg, 1.0 / 26);
        const LeaderContext ctx{&L0, ClassBounds::make(cfg, 1.0 / 26)};
        const LeaderObjective obj(follower_br(L0), ctx, LeaderOptions{});
        return leader_br_full(obj).strategy;
    }();
    return L;
}

} // namespace

TEST(Serialization, LeaderRoundTripIsBitExact) {
    const LeaderStrategy& L = sampled_leader();
    const std::string text = dump(envelope("leader_strategy", Json::object(), to_json(L)));
    const LeaderStrategy back = leader_from_json(parse_json(text));
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-30, 30);
    for (int i = 0; i < 1000; ++i) {
        const double th = u(gen);
        EXPECT_TRUE(same_bits(L.eval(th), back.eval(th))) << th;
    }
    EXPECT_EQ(dump(to_json(back)), dump(to_json(L)));
}

TEST(Serialization, LeaderJsonHasDocumentedFields) {
    const Json j = to_json(sampled_leader());
    for (const char* k : {"m", "sigma", "r_L", "segments", "tail_rule"})
        EXPECT_TRUE(j.contains(k)) << k;
    for (const char* k : {"b_left", "b_right", "c", "slope_knots"})
        EXPECT_TRUE(j["segments"][1].contains(k)) << k;
    EXPECT_EQ(get_num(j["segments"][2]["b_right"], "b_right"), kInf);
}

TEST(Serialization, BaseConfigRoundTrip) {
    const BaseConfig cfg = build_base(7, 3.3);
    const BaseConfig back = base_config_from_json(parse_json(dump(to_json(cfg))));
    EXPECT_EQ(back.m, cfg.m);
    EXPECT_EQ(back.c, cfg.c);
    EXPECT_EQ(back.b, cfg.b);
    EXPECT_EQ(back.x, cfg.x);
}

TEST(Serialization, CsvUsesSeventeenDigits) {
    EXPECT_EQ(csv_num(0.1), "0.10000000000000001");
    const BaseConfig cfg = build_base(2, 1.0);
    const std::string csv = base_config_csv(cfg);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,b_k,c_k,x_k");
    const auto line = csv.substr(csv.find("\n1,") + 3);
    EXPECT_EQ(std::stod(line.substr(0, line.find(','))), cfg.b[1]);
}

TEST(Serialization, NonFiniteNumbersSurvive) {
    EXPECT_EQ(num(kInf), "inf");
    EXPECT_EQ(get_num(num(-kInf), "x"), -kInf);
    EXPECT_TRUE(std::isnan(get_num(num(NAN), "x")));
    EXPECT_THROW(get_num(Json("abc"), "x"), UsageError);
}

TEST(Serialization, FollowerKindsRoundTrip) {
    const BaseConfig cfg = build_base(3, 2.0);
    for (const FollowerStrategy& f : {FollowerStrategy::zero(), FollowerStrategy::linear(0.37), FollowerStrategy::quantizer(cfg)}) {
        const FollowerStrategy back = follower_from_json(parse_json(to_json(f).dump()));
        EXPECT_EQ(back.kind(), f.kind());
        for (double s = -9; s <= 9; s += 0.31)
            EXPECT_TRUE(same_bits(back(s), f(s)));
    }
    const FollowerStrategy br = follower_br(sampled_leader());
    const FollowerStrategy back = follower_from_json(parse_json(to_json(br).dump()));
    for (double s = -20; s <= 20; s += 0.7)
        EXPECT_TRUE(same_bits(back(s), br(s)));
}

TEST(Serialization, BoundReportRoundTrip) {
    BoundReport rep;
    rep.add(upper_bound_record("L2.mean", 3, 0.5, 1.0));
    rep.add(lower_bound_record("L9.slope_lower", 1, 0.1, 0.2));
    rep.add(vacuous_record("iv.cm_lower", 2, 4.0));
    const BoundReport back = bound_report_from_json(parse_json(to_json(rep).dump()));
    ASSERT_EQ(back.records.size(), 3u);
    EXPECT_EQ(back.records[1].pass, false);
    EXPECT_EQ(back.records[2].vacuous, true);
    EXPECT_EQ(back.records[2].bound, kInf);
    EXPECT_EQ(back.records[0].margin, 0.5);
    EXPECT_EQ(to_json(rep)[0]["lemma"], "L2.mean");
}

TEST(Serialization, MalformedInputIsAUsageError) {
    EXPECT_THROW(parse_json("{not json"), UsageError);
    EXPECT_THROW(leader_from_json(parse_json("{\"m\": 1}")), UsageError);
    EXPECT_THROW(leader_from_json(parse_json(R"({"m":1,"sigma":1,"r_L":0.1,"segments":[]})")), UsageError);
    Json j = to_json(sampled_leader());
    j["segments"][1]["c"] = -1.0;
    EXPECT_THROW(leader_from_json(j), UsageError);
    Json e = envelope("base_config", Json::object(), to_json(build_base(1, 1.0)));
    EXPECT_THROW(leader_from_json(e), UsageError);
    e["schema_version"] = 99;
    EXPECT_THROW(base_config_from_json(e), UsageError);
}

TEST(Serialization, SweepCsvHasTheTableColumns) {
    SweepRow row;
    row.sigma = 5;
    row.r_L = 1.0 / 26;
    row.m = 1;
    row.status = TerminalStatus::converged;
    row.cost = CostBreakdown::make(0.1, 0.2, row.r_L, 5.0);
    row.linear_U = 0.9;
    row.lower_bound = lower_bound(5.0);
    const std::string csv = sweep_csv({row}, Units::paper);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "sigma,r_L,m,U,U_wits,linear_U,lower_bound,ratio,status,rounds,residual");
    EXPECT_NE(csv.find(",converged,"), std::string::npos);
    // ratio is unit-free
    const std::string wits = sweep_csv({row}, Units::wits);
    auto ratio_of = [](const std::string& s) {
        std::string line = s.substr(s.find('\n') + 1);
        for (int i = 0; i < 7; ++i)
            line = line.substr(line.find(',') + 1);
        return line.substr(0, line.find(','));
    };
    EXPECT_EQ(ratio_of(csv), ratio_of(wits));
}

TEST(Serialization, DumpsAreDeterministic) {
    const Json a = to_json(sampled_leader()), b = to_json(sampled_leader());
    EXPECT_EQ(dump(a), dump(b));
}
