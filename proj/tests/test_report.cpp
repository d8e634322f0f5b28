#include <gtest/gtest.h>

#include <sstream>

#include "hitlist/report.hpp"

using namespace hitlist;

TEST(Report, StageTableLayout) {
    StageReport r;
    r.initial = 4547;
    std::uint64_t remaining = r.initial;
    for (auto s : kStageOrder) {
        remaining -= 10;
        r.stages.push_back({s, 10, remaining});
    }
    const auto table = report::stage_table(r);
    std::istringstream in(table);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    ASSERT_EQ(lines.size(), 2 + kStageOrder.size());
    EXPECT_EQ(lines[0].rfind("stage", 0), 0u);
    EXPECT_EQ(lines[1].rfind("initial", 0), 0u);
    for (const auto& l : lines) EXPECT_EQ(l.size(), lines[0].size()) << l;
    EXPECT_NE(lines.back().find("4477"), std::string::npos);

    const auto j = report::stage_report_json(r);
    EXPECT_EQ(j.at("final"), 4477);
    EXPECT_EQ(j.at("stages").size(), 7u);
}

TEST(Report, DumpEndsWithNewlineAndKeepsOrder) {
    report::Json j;
    j["z"] = 1;
    j["a"] = 2;
    EXPECT_EQ(report::dump(j), "{\n  \"z\": 1,\n  \"a\": 2\n}\n");
}

TEST(Report, IcmpDecayRoundTrip) {
    ResponseTable t;
    t.intervals = {60, 600};
    t.rows.push_back({{Transport::tcp, 80}, 5, {{60, 2, 5}, {600, 1, 5}}});
    t.rows.push_back({{Transport::icmp6, std::nullopt}, 7, {{60, 3, 7}, {600, 0, 7}}});
    const auto j = report::response_json(t, InProtocolSummary{}, 0, 0);
    EXPECT_EQ(j.at("decay").at(1).at("rates").at(0).at("pct"), "42.86");
    const auto row = report::read_icmp_decay(j);
    ASSERT_TRUE(row);
    EXPECT_EQ(*row, t.rows[1]);
    EXPECT_EQ(report::decay_tsv(t).substr(0, 40), "scan_class\toffset\tprobed\tresponsive\tpct\n");

    t.rows.pop_back();
    EXPECT_FALSE(report::read_icmp_decay(report::response_json(t, InProtocolSummary{}, 0, 0)));
}

TEST(Report, ResponderModelRoundTrip) {
    ResponderModel m;
    Responder a;
    a.birth = 100;
    a.lifetime = 3600;
    a.responds_to.insert({Transport::icmp6, std::nullopt});
    a.responds_to.insert({Transport::udp, 49001});
    Responder b;
    b.birth = 5;
    b.drops_icmp = true;
    m[parse_address("2001:db8::1")] = a;
    m[parse_address("2001:db8::2")] = b;
    std::istringstream in(report::responder_model_json(m).dump());
    EXPECT_EQ(report::load_responder_model(in), m);
}

TEST(Report, ResponderModelErrors) {
    for (const char* bad : {"{", "{}", "[{\"address\": \"zz\", \"birth\": 0, \"lifetime_seconds\": null, \"responds_to\": []}]",
                            "[{\"address\": \"::1\", \"birth\": 0, \"lifetime_seconds\": null, \"responds_to\": [\"sctp1\"]}]",
                            "[{\"address\": \"::1\"}]"}) {
        std::istringstream in(bad);
        EXPECT_THROW(report::load_responder_model(in), Error) << bad;
    }
}

TEST(Report, TagJsonRoundTrip) {
    const SourceTag t{SourceKind::zone_file, "com"};
    EXPECT_EQ(report::parse_tag_json(report::tag_json(t)), t);
    EXPECT_THROW(report::parse_tag_json(report::Json{{"kind", "x"}, {"name", ""}}), Error);
}
