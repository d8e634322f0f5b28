#include <gtest/gtest.h>

#include "hitlist/filter.hpp"
#include "support.hpp"

using namespace hitlist;
using namespace testsupport;

namespace {

const SourceTag kTag{SourceKind::passive_flow, "t"};

TargetSet targets_of(std::initializer_list<const char*> addrs) {
    ObservationList obs;
    for (const char* a : addrs) obs.push_back(Observation{parse_address(a), 0, Transport::unknown, std::nullopt, kTag});
    return merge({obs});
}

FilterConfig small_config() {
    FilterConfig c;
    c.fullbogons.insert(parse_prefix("3ffe::/16"));
    c.iana_special.insert(parse_prefix("2001:db8::/32"));
    c.own_networks.insert(parse_prefix("2a00:1::/32"));
    c.routing.add(parse_prefix("2a00::/12"), AsSet{64496});
    c.routing.add(parse_prefix("3ffe::/16"), AsSet{64497});
    c.announced.insert(parse_prefix("2a00::/16"));
    c.blacklist.insert(parse_prefix("2a00:2::/32"));
    return c;
}

std::uint64_t removed_at(const StageReport& r, Stage s) {
    for (const auto& c : r.stages)
        if (c.stage == s) return c.removed;
    return ~0ULL;
}

} // namespace

TEST(Cascade, FullbogonRemovedAtItsStage) {
    const auto r = apply_cascade(targets_of({"3ffe::1"}), small_config());
    EXPECT_EQ(removed_at(r.report, Stage::fullbogons), 1u);
    EXPECT_TRUE(r.filtered.empty());
}

TEST(Cascade, RoutedAnnouncedSurvives) {
    const auto r = apply_cascade(targets_of({"2a00:5::1"}), small_config());
    ASSERT_EQ(r.filtered.size(), 1u);
    EXPECT_EQ(r.report.final_count(), 1u);
}

TEST(Cascade, EveryStageInOrder) {
    const auto t = targets_of({"3ffe::1", "2001:db8::1", "2a00:1::1", "2c00::1", "2a01::1", "2a00:2::1", "2a00:5::1",
                               "2a00:5::1"});
    const auto r = apply_cascade(t, small_config());
    ASSERT_EQ(r.report.stages.size(), 7u);
    for (std::size_t i = 0; i < kStageOrder.size(); ++i) EXPECT_EQ(r.report.stages[i].stage, kStageOrder[i]);
    EXPECT_EQ(r.report.initial, 8u);
    for (const auto& s : r.report.stages) EXPECT_EQ(s.removed, 1u) << to_string(s.stage);
    EXPECT_EQ(r.report.final_count(), 1u);
}

TEST(Cascade, EmptyBlacklistRemovesNothing) {
    auto cfg = small_config();
    cfg.blacklist = PrefixSet{};
    const auto r = apply_cascade(targets_of({"2a00:2::1"}), cfg);
    EXPECT_EQ(removed_at(r.report, Stage::blacklist), 0u);
    EXPECT_EQ(r.filtered.size(), 1u);
}

TEST(Cascade, EmptyAnnouncedDisablesWhitelist) {
    auto cfg = small_config();
    cfg.announced = PrefixSet{};
    const auto r = apply_cascade(targets_of({"2a01::1"}), cfg);
    EXPECT_EQ(removed_at(r.report, Stage::announced_whitelist), 0u);
}

TEST(Cascade, EmptyTargets) {
    const auto r = apply_cascade(TargetSet{}, small_config());
    EXPECT_EQ(r.report.initial, 0u);
    EXPECT_EQ(r.report.stages.size(), 7u);
    EXPECT_TRUE(r.filtered.empty());
}

TEST(Cascade, KnownMembershipFixtureMatchesSetAlgebra) {
    Rng rng(101);
    auto inst = random_cascade_instance(rng, 1000);
    const auto cfg = inst.config();
    const auto result = apply_cascade(merge({inst.observations}), cfg);
    const auto [removed, survivors] = oracle_cascade(inst);
    ASSERT_EQ(result.report.stages.size(), removed.size());
    std::uint64_t remaining = inst.observations.size();
    for (std::size_t i = 0; i < removed.size(); ++i) {
        EXPECT_EQ(result.report.stages[i].removed, removed[i]) << to_string(kStageOrder[i]);
        remaining -= removed[i];
        EXPECT_EQ(result.report.stages[i].remaining, remaining);
    }
    std::set<Address128> got;
    for (const auto& e : result.filtered) got.insert(e.address);
    EXPECT_EQ(got, survivors);
}

TEST(Cascade, RandomInstancesIdempotentAndThreadInvariant) {
    Rng rng(202);
    for (int round = 0; round < 25; ++round) {
        auto inst = random_cascade_instance(rng, 400);
        const auto cfg = inst.config();
        const auto t = merge({inst.observations});
        const auto one = apply_cascade(t, cfg, 1);
        const auto again = apply_cascade(one.filtered, cfg, 1);
        ASSERT_EQ(again.filtered, one.filtered);
        for (std::size_t i = 1; i < again.report.stages.size(); ++i) ASSERT_EQ(again.report.stages[i].removed, 0u);
        for (unsigned threads : {2u, 3u, 4u, 8u}) {
            const auto many = apply_cascade(t, cfg, threads);
            ASSERT_EQ(many.filtered, one.filtered);
            ASSERT_EQ(many.report, one.report);
        }
        for (std::size_t i = 1; i < one.report.stages.size(); ++i)
            ASSERT_EQ(one.report.stages[i].remaining, one.report.stages[i - 1].remaining - one.report.stages[i].removed);
    }
}
