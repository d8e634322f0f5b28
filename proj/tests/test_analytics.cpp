#include <gtest/gtest.h>

#include <sstream>

#include "hitlist/analytics.hpp"
#include "support.hpp"

using namespace hitlist;
using namespace testsupport;

namespace {

Observation obs(const Address128& a, Timestamp ts, const SourceTag& tag, Transport t = Transport::unknown,
                std::optional<std::uint16_t> port = std::nullopt) {
    return Observation{a, ts, t, port, tag};
}

const SourceTag kA{SourceKind::passive_flow, "a"};
const SourceTag kB{SourceKind::alexa_list, "b"};
const SourceTag kC{SourceKind::caida_dns_names, "c"};
const SourceTag kD{SourceKind::zone_file, "d"};
const SourceTag kE{SourceKind::traceroute, "e"};

/// /32 per AS: 2a0a:(100+i)::/32 -> AS 64500+i
RoutingTable simple_routing(unsigned n) {
    RoutingTable t;
    for (unsigned i = 0; i < n; ++i)
        t.add(Prefix(Address128{static_cast<std::uint64_t>(0x2a0a0100u + i) << 32, 0}, 32), AsSet{64500 + i});
    return t;
}

Address128 in_as(unsigned i, std::uint64_t host) {
    return {(static_cast<std::uint64_t>(0x2a0a0100u + i) << 32) | (host >> 32), host};
}

} // namespace

TEST(Coverage, AsInTwoOfFourSourcesSplitsInHalf) {
    const auto routing = simple_routing(4);
    std::map<SourceTag, TargetSet> sets;
    sets[kA] = merge({ObservationList{obs(in_as(0, 1), 0, kA), obs(in_as(1, 1), 0, kA)}});
    sets[kB] = merge({ObservationList{obs(in_as(0, 2), 0, kB)}});
    sets[kC] = merge({ObservationList{obs(in_as(2, 1), 0, kC)}});
    sets[kD] = merge({ObservationList{obs(in_as(3, 1), 0, kD)}});
    const auto r = coverage(sets, routing);
    EXPECT_EQ(r.find(kA)->normalized_as, Rational(3, 2));
    EXPECT_EQ(r.find(kB)->normalized_as, Rational(1, 2));
    EXPECT_EQ(r.find(kA)->unique_as_count, 1u);
    EXPECT_EQ(r.find(kB)->unique_as_count, 0u);
    EXPECT_EQ(r.as_coverage_pct(*r.find(kA)), "50.00");
    EXPECT_EQ(r.combined_as_count, 4u);
}

TEST(Coverage, SingleSource) {
    const auto routing = simple_routing(10);
    std::map<SourceTag, TargetSet> sets;
    sets[kA] = merge({ObservationList{obs(in_as(0, 1), 0, kA), obs(in_as(5, 1), 0, kA),
                                      obs(parse_address("2001:db8::1"), 0, kA)}});
    const auto r = coverage(sets, routing);
    const auto& s = r.sources.at(0);
    EXPECT_EQ(s.targets, 3u);
    EXPECT_EQ(s.normalized_as, Rational(2));
    EXPECT_EQ(s.unique_as_count, 2u);
    EXPECT_EQ(s.unique_prefix_count, 2u);
    EXPECT_EQ(r.as_coverage_pct(s), "20.00");
}

TEST(Coverage, MissingRoutingTable) {
    EXPECT_THROW(coverage({}, RoutingTable{}), MissingRoutingTable);
}

TEST(Coverage, RandomInstancesMatchSetAlgebra) {
    Rng rng(55);
    for (int round = 0; round < 40; ++round) {
        const unsigned n_as = static_cast<unsigned>(rng.between(5, 30));
        auto routing = simple_routing(n_as);
        // a multi-origin more-specific
        routing.add(Prefix(in_as(0, 0), 48), AsSet{65000, 65001});
        std::map<SourceTag, TargetSet> sets;
        std::map<SourceTag, std::set<AsNumber>> as_oracle;
        std::map<SourceTag, std::set<std::pair<std::uint64_t, unsigned>>> pfx_oracle;
        for (const auto& tag : {kA, kB, kC, kD, kE}) {
            ObservationList l;
            const auto n = rng.between(0, 20);
            for (int i = 0; i < n; ++i) {
                const auto as = static_cast<unsigned>(rng.below(n_as));
                auto a = in_as(as, rng.next());
                if (as == 0 && rng.chance(0.3)) a.hi &= 0xffffffff0000ffffULL;
                l.push_back(obs(a, 0, tag));
                if (as == 0 && ((a.hi >> 16) & 0xffff) == 0) {
                    as_oracle[tag].insert({65000, 65001});
                    pfx_oracle[tag].insert({a.hi & 0xffffffffffff0000ULL, 48});
                } else {
                    as_oracle[tag].insert(64500 + as);
                    pfx_oracle[tag].insert({a.hi & 0xffffffff00000000ULL, 32});
                }
            }
            sets[tag] = merge({l});
            as_oracle[tag];
            pfx_oracle[tag];
        }
        const auto r = coverage(sets, routing);
        std::map<AsNumber, int> as_k;
        std::map<std::pair<std::uint64_t, unsigned>, int> pfx_k;
        for (auto& [tag, s] : as_oracle)
            for (auto a : s) ++as_k[a];
        for (auto& [tag, s] : pfx_oracle)
            for (auto p : s) ++pfx_k[p];
        Rational as_sum{0}, pfx_sum{0};
        for (const auto& s : r.sources) {
            const auto& ao = as_oracle[s.source];
            ASSERT_EQ(std::set<AsNumber>(s.ases.begin(), s.ases.end()), ao);
            ASSERT_EQ(s.prefixes.size(), pfx_oracle[s.source].size());
            Rational want{0};
            std::uint64_t unique = 0;
            for (auto a : ao) {
                want += Rational(1, as_k[a]);
                unique += as_k[a] == 1;
            }
            ASSERT_EQ(s.normalized_as, want);
            ASSERT_EQ(s.unique_as_count, unique);
            as_sum += s.normalized_as;
            pfx_sum += s.normalized_prefix;
        }
        ASSERT_EQ(as_sum, Rational(static_cast<std::int64_t>(as_k.size())));
        ASSERT_EQ(pfx_sum, Rational(static_cast<std::int64_t>(pfx_k.size())));
        ASSERT_EQ(r.combined_as_count, as_k.size());
        ASSERT_EQ(r.announced_as_total, n_as + 2);
    }
}

TEST(Runup, SingleDay) {
    const auto routing = simple_routing(3);
    ObservationList l{obs(in_as(0, 1), 100, kA), obs(in_as(1, 1), 200, kA), obs(in_as(0, 1), 300, kA)};
    const auto s = runup(l, routing);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].new_ips, 2u);
    EXPECT_EQ(s[0].total_ases, 2u);
}

TEST(Runup, RepeatCountedOnFirstDayOnly) {
    const auto routing = simple_routing(3);
    ObservationList l{obs(in_as(0, 1), 86400 * 3 + 5, kA), obs(in_as(0, 1), 86400 * 1 + 5, kA)};
    const auto s = runup(l, routing);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].bucket_start, 86400);
    EXPECT_EQ(s[0].new_ips, 1u);
    EXPECT_EQ(s[1].new_ips, 0u);
    EXPECT_EQ(s[2].new_ips, 0u);
    EXPECT_EQ(s[2].total_ips, 1u);
}

TEST(Runup, FourteenDayStreamMatchesSortAndScan) {
    Rng rng(66);
    const auto routing = simple_routing(20);
    ObservationList l;
    for (int i = 0; i < 3000; ++i) {
        const auto a = rng.chance(0.9) ? in_as(static_cast<unsigned>(rng.below(20)), rng.below(400))
                                       : parse_address("2001:db8::1");
        l.push_back(obs(a, 1'500'000'000 + rng.between(0, 14 * 86400 - 1), kA));
    }
    const auto series = runup(l, routing);
    auto sorted = l;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Observation& a, const Observation& b) { return a.timestamp < b.timestamp; });
    std::map<Timestamp, std::set<Address128>> new_by_day;
    std::set<Address128> seen;
    std::set<std::uint64_t> seen_as;
    std::map<Timestamp, std::uint64_t> new_as;
    for (const auto& o : sorted) {
        if (!seen.insert(o.address).second) continue;
        const auto day = o.timestamp / 86400 * 86400;
        new_by_day[day].insert(o.address);
        const auto top = o.address.hi >> 32;
        if (top >= 0x2a0a0100u && top < 0x2a0a0100u + 20 && seen_as.insert(top).second) ++new_as[day];
    }
    ASSERT_GE(series.size(), 14u);
    std::uint64_t total = 0;
    for (const auto& p : series) {
        const auto want = new_by_day.count(p.bucket_start) ? new_by_day[p.bucket_start].size() : 0;
        ASSERT_EQ(p.new_ips, want);
        ASSERT_EQ(p.new_ases, new_as[p.bucket_start]);
        total += want;
        ASSERT_EQ(p.total_ips, total);
    }
    EXPECT_EQ(total, seen.size());
}

TEST(PortBreakdown, Shares) {
    const auto a = parse_address("2001:db8::1");
    ObservationList l{obs(a, 0, kA, Transport::tcp, 443), obs(a, 0, kA, Transport::tcp, 443),
                      obs(a, 0, kA, Transport::tcp, 443), obs(a, 0, kA, Transport::udp, 53), obs(a, 0, kB)};
    const auto s = port_breakdown(l, 10);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].port_protocol.label(), "tcp443");
    EXPECT_EQ(s[0].pct(), "75.00");
    EXPECT_EQ(s[1].pct(), "25.00");
    EXPECT_EQ(port_breakdown(l, 1).size(), 1u);
}

TEST(PortBreakdown, MatchesCountingOracle) {
    Rng rng(77);
    ObservationList l;
    std::map<std::string, std::uint64_t> want;
    for (int i = 0; i < 5000; ++i) {
        const auto port = static_cast<std::uint16_t>(rng.below(30));
        const auto t = rng.chance(0.5) ? Transport::tcp : Transport::udp;
        l.push_back(obs(random_address(rng), 0, kA, t, port));
        ++want[PortProtocol{t, port}.label()];
    }
    const auto s = port_breakdown(l, 1000);
    ASSERT_EQ(s.size(), want.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(s[i].count, want[s[i].port_protocol.label()]);
        EXPECT_EQ(s[i].total, 5000u);
        if (i > 0) {
            EXPECT_GE(s[i - 1].count, s[i].count);
        }
    }
}

TEST(IidProfile, SingleVendor) {
    OuiDatabase oui;
    oui.add(0x00163e, "ExampleCorp");
    const Mac48 mac{{0x00, 0x16, 0x3e, 1, 2, 3}};
    const auto t = merge({ObservationList{obs(Address128{0x20010db800000000ULL, eui64_encode(mac).bits}, 0, kA)}});
    const auto p = iid_profile(kA, t, oui);
    ASSERT_EQ(p.vendors.size(), 1u);
    EXPECT_EQ(p.vendors[0].vendor, "ExampleCorp");
    EXPECT_EQ(p.vendor_pct(p.vendors[0]), "100.00");
    EXPECT_EQ(p.eui64_pct(), "100.00");
}

TEST(IidProfile, NoEuiAddresses) {
    const auto t = merge({ObservationList{obs(parse_address("2001:db8::1"), 0, kA)}});
    const auto p = iid_profile(kA, t, OuiDatabase{});
    EXPECT_TRUE(p.vendors.empty());
    EXPECT_EQ(p.eui64_pct(), "0.00");
}

TEST(IidProfile, ConstructedMixCountsExactly) {
    std::istringstream reg("00-16-3E   (hex)\t\tAlpha\n52-54-00   (hex)\t\tBeta\nnoise line\n");
    const auto oui = OuiDatabase::load(reg);
    ASSERT_EQ(oui.size(), 2u);
    Rng rng(88);
    ObservationList l;
    std::array<std::uint64_t, 4> plan{};
    std::map<std::string, std::uint64_t> vendors;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const Address128 net{0x20010db800000000ULL | i, 0};
        const auto kind = rng.below(4);
        std::uint64_t iid = 0;
        if (kind == 0) {
            Mac48 m = rng.mac();
            const auto v = rng.below(3);
            if (v == 0) m.octets = {0x00, 0x16, 0x3e, m.octets[3], m.octets[4], m.octets[5]};
            if (v == 1) m.octets = {0x52, 0x54, 0x00, m.octets[3], m.octets[4], m.octets[5]};
            if (v == 2) m.octets[0] = 0xaa;
            iid = eui64_encode(m).bits;
            ++vendors[v == 0 ? "Alpha" : v == 1 ? "Beta" : "unknown"];
        } else if (kind == 1) {
            iid = rng.below(1 << 16);
        } else if (kind == 2) {
            do iid = rng.privacy_iid().bits;
            while (classify_iid(Iid{iid}).kind != IidKind::privacy_random);
        } else {
            iid = 0xffff000000000000ULL | rng.below(1ULL << 40) << 16 | 0x1;
            iid |= kUniversalLocalBit;
            if (Iid{iid}.byte(3) == 0xff && Iid{iid}.byte(4) == 0xfe) iid ^= 1ULL << 32;
        }
        ++plan[kind];
        l.push_back(obs(Address128{net.hi, iid}, 0, kA));
    }
    const auto p = iid_profile(kA, merge({l}), oui);
    EXPECT_EQ(p.total, 1000u);
    EXPECT_EQ(p.count(IidKind::eui64), plan[0]);
    EXPECT_EQ(p.count(IidKind::low), plan[1]);
    EXPECT_EQ(p.count(IidKind::privacy_random), plan[2]);
    EXPECT_EQ(p.count(IidKind::other), plan[3]);
    for (const auto& v : p.vendors) EXPECT_EQ(v.count, vendors[v.vendor]) << v.vendor;
}

TEST(Hamming, SpikesAtExtremes) {
    const std::vector<Iid> iids{Iid{0}, Iid{~0ULL}};
    const auto h = hamming_histogram(iids);
    EXPECT_EQ(h.bins[0], 1u);
    EXPECT_EQ(h.bins[64], 1u);
    EXPECT_DOUBLE_EQ(*h.mean, 32.0);
    EXPECT_DOUBLE_EQ(*h.variance, 1024.0);
}

TEST(Hamming, EmptyInputHasNoMean) {
    const auto h = hamming_histogram({});
    EXPECT_EQ(h.count, 0u);
    EXPECT_FALSE(h.mean);
    EXPECT_FALSE(h.variance);
}

TEST(Hamming, PrivacyModelSmallSample) {
    Rng rng(99);
    std::vector<Iid> iids;
    for (int i = 0; i < 200000; ++i) iids.push_back(rng.privacy_iid());
    const auto h = hamming_histogram(iids);
    EXPECT_NEAR(*h.mean, 31.5, 0.05);
    EXPECT_NEAR(*h.variance, 15.75, 0.3);
}

TEST(Agility, SameIidUnderTwoPrefixes) {
    const std::vector<Address128> a{{1, 42}, {2, 42}, {1, 7}};
    const auto r = prefix_agility(std::span<const Address128>(a));
    EXPECT_EQ(r.iid_count, 2u);
    EXPECT_EQ(r.agile_count, 1u);
}

TEST(Agility, SinglePrefixIsNeverAgile) {
    std::vector<Address128> a;
    for (std::uint64_t i = 0; i < 100; ++i) a.push_back({5, i});
    EXPECT_EQ(prefix_agility(std::span<const Address128>(a)).agile_fraction(), 0.0);
}

TEST(Agility, ConstructedFourteenPercent) {
    Rng rng(111);
    std::vector<Address128> a;
    for (int i = 0; i < 500; ++i) {
        const auto iid = eui64_encode(rng.mac()).bits;
        const int prefixes = i < 70 ? 2 + static_cast<int>(rng.below(3)) : 1;
        for (int k = 0; k < prefixes; ++k)
            for (int rep = 0; rep < 2; ++rep) a.push_back({0x20010db800000000ULL | static_cast<std::uint64_t>(k), iid});
        a.push_back({0x20010db800010000ULL | static_cast<std::uint64_t>(i), rng.privacy_iid().bits});
    }
    const auto r = prefix_agility(std::span<const Address128>(a), true);
    EXPECT_EQ(r.iid_count, 500u);
    EXPECT_EQ(r.agile_count, 70u);
    EXPECT_EQ(r.agile_pct(), "14.00");
}

namespace {

ResponseMatrix matrix_with(std::vector<Seconds> intervals,
                           std::vector<std::tuple<std::uint64_t, Seconds, bool>> cells) {
    ResponseMatrix m;
    m.scans = {ScanType::icmp6()};
    m.intervals = std::move(intervals);
    for (auto [t, off, ok] : cells)
        m.cells.push_back(ResponseCell{Address128{1, t}, 0, off, 0, ok ? ReplyKind::echo_reply : ReplyKind::none, ok,
                                       false});
    return m;
}

} // namespace

TEST(StableCore, IncludedAndExcluded) {
    const auto m = matrix_with({60, 3600, 604800}, {{1, 60, true}, {1, 3600, true}, {1, 604800, true},
                                                    {2, 60, true}, {2, 3600, true}, {2, 604800, false}});
    const auto core = stable_core(m);
    ASSERT_EQ(core.size(), 1u);
    EXPECT_EQ(core[0], (Address128{1, 1}));
    EXPECT_EQ(stable_core(m, 3600).size(), 2u);
    EXPECT_THROW(stable_core(m, 604801), WindowExceedsMatrix);
}

TEST(StableCore, MatchesConjunctionOracleAndIsMonotone) {
    Rng rng(123);
    for (int round = 0; round < 10; ++round) {
        std::vector<std::tuple<std::uint64_t, Seconds, bool>> cells;
        for (std::uint64_t t = 0; t < 150; ++t)
            for (auto off : kMwnIntervals)
                if (rng.chance(0.97)) cells.emplace_back(t, off, rng.chance(0.85));
        const auto m = matrix_with(kMwnIntervals, cells);
        std::set<Address128> prev;
        bool first = true;
        for (auto it = kMwnIntervals.rbegin(); it != kMwnIntervals.rend(); ++it) {
            const auto core = stable_core(m, *it);
            const std::set<Address128> got(core.begin(), core.end());
            ASSERT_EQ(got, oracle_stable_core(m, *it));
            if (!first) {
                ASSERT_TRUE(std::includes(got.begin(), got.end(), prev.begin(), prev.end()));
            }
            prev = got;
            first = false;
        }
    }
}

TEST(ServerCoverage, AllAndNone) {
    const auto routing = simple_routing(4);
    const auto all = merge({ObservationList{obs(in_as(0, 1), 0, kA, Transport::tcp, 443),
                                            obs(in_as(1, 1), 0, kA, Transport::tcp, 443)}});
    const auto s = server_coverage(all, routing);
    EXPECT_EQ(s.as_pct(), "100.00");
    const auto none = merge({ObservationList{obs(in_as(0, 1), 0, kA, Transport::tcp, 22)}});
    const auto n = server_coverage(none, routing);
    EXPECT_EQ(n.server_targets, 0u);
    EXPECT_EQ(n.server_as_count, 0u);
    EXPECT_EQ(n.as_pct(), "0.00");
}

TEST(ServerCoverage, MatchesFilteredSetOracle) {
    Rng rng(131);
    const auto routing = simple_routing(25);
    for (int round = 0; round < 20; ++round) {
        ObservationList l;
        for (int i = 0; i < 200; ++i) {
            const auto port = static_cast<std::uint16_t>(rng.chance(0.3) ? 443 : rng.below(100));
            l.push_back(obs(in_as(static_cast<unsigned>(rng.below(25)), rng.next()), 0, kA,
                            rng.chance(0.5) ? Transport::tcp : Transport::udp, port));
        }
        const auto t = merge({l});
        const auto s = server_coverage(t, routing);
        std::set<std::uint64_t> server_as, all_as;
        std::uint64_t servers = 0;
        for (const auto& e : t) {
            all_as.insert(e.address.hi >> 32);
            bool server = false;
            for (const auto& pp : e.port_protocols)
                server = server || (pp.port == 443 && pp.transport != Transport::unknown) ||
                         (pp.port == 80 && pp.transport == Transport::tcp);
            if (server) {
                ++servers;
                server_as.insert(e.address.hi >> 32);
            }
        }
        ASSERT_EQ(s.server_targets, servers);
        ASSERT_EQ(s.server_as_count, server_as.size());
        ASSERT_EQ(s.total_as_count, all_as.size());
    }
}

TEST(SourceResponse, PerSourceIcmpRates) {
    const auto m = matrix_with({60}, {{1, 60, true}, {2, 60, false}});
    std::map<SourceTag, TargetSet> sets;
    sets[kA] = merge({ObservationList{obs(Address128{1, 1}, 0, kA), obs(Address128{1, 2}, 0, kA)}});
    sets[kB] = merge({ObservationList{obs(Address128{1, 1}, 0, kB), obs(Address128{1, 3}, 0, kB)}});
    const auto r = icmp_response_by_source(sets, m);
    EXPECT_EQ(r.at(kA), (SourceResponse{2, 1}));
    EXPECT_EQ(r.at(kB), (SourceResponse{1, 1}));
    EXPECT_EQ(r.at(kA).pct(), "50.00");
}
