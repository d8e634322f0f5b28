// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "hitlist/analytics.hpp"
#include "hitlist/filter.hpp"
#include "hitlist/fixture.hpp"
#include "hitlist/pipeline.hpp"
#include "hitlist/probe.hpp"
#include "hitlist/recommend.hpp"
#include "support.hpp"

using namespace hitlist;
using namespace testsupport;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool ok = true;
    std::string detail;

    void check(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

int failures = 0;

void criterion(int n, const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.ok = false;
        o.detail = std::string("exception: ") + e.what();
    }
    if (!o.ok) ++failures;
    std::cout << (o.ok ? "PASS" : "FAIL") << " [" << n << "] " << name;
    if (!o.detail.empty()) std::cout << " (" << o.detail << ")";
    std::cout << std::endl;
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << std::fixed << v;
    return s.str();
}

// ---- 1 ----

Outcome eui64_codec() {
    Outcome o;
    Rng rng(1);
    const auto t0 = Clock::now();
    std::uint64_t failed = 0;
    for (int i = 0; i < 100'000; ++i) {
        const auto mac = rng.mac();
        const auto back = eui64_decode(eui64_encode(mac));
        failed += !(back && *back == mac);
    }
    const double t = seconds_since(t0);
    o.check(failed == 0, std::to_string(failed) + " round-trip failures");
    o.check(t < 1.0, "took " + fmt(t) + "s");
    if (o.ok) o.detail = "100000 MACs, 0 failures, " + fmt(t) + "s";
    return o;
}

// ---- 2 ----

Outcome privacy_hamming() {
    Outcome o;
    Rng rng(2);
    const auto t0 = Clock::now();
    std::vector<Iid> iids;
    iids.reserve(1'000'000);
    for (int i = 0; i < 1'000'000; ++i) iids.push_back(rng.privacy_iid());
    const auto h = hamming_histogram(iids);
    const double t = seconds_since(t0);
    o.check(h.mean && std::abs(*h.mean - 31.5) <= 0.05, "mean " + fmt(h.mean.value_or(-1)));
    o.check(h.variance && std::abs(*h.variance - 15.75) <= 0.2, "variance " + fmt(h.variance.value_or(-1)));
    o.check(t < 5.0, "took " + fmt(t) + "s");
    if (o.ok) o.detail = "mean " + fmt(*h.mean) + ", variance " + fmt(*h.variance) + ", " + fmt(t) + "s";
    return o;
}

// ---- 3 ----

Outcome lpm_oracle() {
    Outcome o;
    Rng rng(3);
    const auto t0 = Clock::now();
    std::vector<RouteEntry> entries;
    std::vector<Prefix> prefixes;
    RoutingTable table;
    for (int i = 0; i < 1000; ++i) {
        const Prefix p = prefixes.empty() || rng.chance(0.3)
                             ? random_prefix(rng, 0, 64)
                             : Prefix(address_in(rng, prefixes[rng.below(prefixes.size())]),
                                      static_cast<unsigned>(rng.between(8, 128)));
        prefixes.push_back(p);
        std::set<AsNumber> ases{static_cast<AsNumber>(rng.between(1, 65000))};
        if (rng.chance(0.1)) ases.insert(static_cast<AsNumber>(rng.between(1, 65000)));
        entries.push_back({p.base(), p.length(), ases});
        table.add(p, AsSet(ases.begin(), ases.end()));
    }
    std::uint64_t mismatches = 0;
    for (int i = 0; i < 10'000; ++i) {
        const auto a = rng.chance(0.8) ? address_in(rng, prefixes[rng.below(prefixes.size())]) : random_address(rng);
        const auto want = oracle_lpm(entries, a);
        const auto got = table.lookup(a);
        if (got.has_value() != want.has_value()) {
            ++mismatches;
        } else if (got && (got->prefix.length() != want->first ||
                           std::set<AsNumber>(got->ases.begin(), got->ases.end()) != want->second)) {
            ++mismatches;
        }
    }
    const double t = seconds_since(t0);
    o.check(mismatches == 0, std::to_string(mismatches) + " of 10000 queries differ");
    o.check(t < 10.0, "took " + fmt(t) + "s");
    if (o.ok) o.detail = "1000 prefixes x 10000 addresses, 100% agreement, " + fmt(t) + "s";
    return o;
}

// ---- 4 ----

Outcome cascade_oracle() {
    Outcome o;
    Rng rng(4);
    for (int round = 0; round < 100 && o.ok; ++round) {
        const auto inst = random_cascade_instance(rng, static_cast<std::size_t>(rng.between(50, 800)));
        const auto cfg = inst.config();
        const auto r = apply_cascade(merge({inst.observations}), cfg);
        const auto [removed, survivors] = oracle_cascade(inst);
        const auto tag = "instance " + std::to_string(round);
        o.check(r.report.initial == inst.observations.size(), tag + ": initial count");
        o.check(r.report.stages.size() == removed.size(), tag + ": stage count");
        for (std::size_t i = 0; o.ok && i < removed.size(); ++i)
            o.check(r.report.stages[i].removed == removed[i], tag + ": stage " + std::string(to_string(kStageOrder[i])));
        std::set<Address128> got;
        for (const auto& e : r.filtered) got.insert(e.address);
        o.check(got == survivors, tag + ": survivor set");
        const auto again = apply_cascade(r.filtered, cfg);
        o.check(again.filtered == r.filtered, tag + ": not idempotent");
    }
    if (o.ok) o.detail = "100 instances, all stage counts and survivors equal, idempotent";
    return o;
}

// ---- 5 ----

Outcome normalized_conservation() {
    Outcome o;
    Rng rng(5);
    for (int round = 0; round < 100 && o.ok; ++round) {
        std::vector<Prefix> anchors;
        std::vector<RouteEntry> entries;
        RoutingTable table;
        const auto n_routes = rng.between(5, 40);
        for (int i = 0; i < n_routes; ++i) {
            const Prefix p = anchors.empty() || rng.chance(0.6)
                                 ? random_prefix(rng, 16, 40)
                                 : Prefix(address_in(rng, anchors[rng.below(anchors.size())]),
                                          static_cast<unsigned>(rng.between(41, 64)));
            anchors.push_back(p);
            std::set<AsNumber> ases{static_cast<AsNumber>(rng.between(64496, 64530))};
            if (rng.chance(0.15)) ases.insert(static_cast<AsNumber>(rng.between(64496, 64530)));
            entries.push_back({p.base(), p.length(), ases});
            table.add(p, AsSet(ases.begin(), ases.end()));
        }
        std::map<SourceTag, TargetSet> sets;
        std::set<AsNumber> as_union;
        std::set<std::pair<Address128, unsigned>> prefix_union;
        const auto n_sources = rng.between(1, 6);
        for (int s = 0; s < n_sources; ++s) {
            const SourceTag tag{kAllSourceKinds[rng.below(kAllSourceKinds.size())], "s" + std::to_string(s)};
            ObservationList l;
            const auto n = rng.between(0, 60);
            for (int i = 0; i < n; ++i) {
                const auto a = rng.chance(0.9) ? address_in(rng, anchors[rng.below(anchors.size())]) : random_address(rng);
                l.push_back(Observation{a, 0, Transport::unknown, std::nullopt, tag});
                if (auto m = oracle_lpm(entries, a)) {
                    as_union.insert(m->second.begin(), m->second.end());
                    prefix_union.insert({Prefix(a, m->first).base(), m->first});
                }
            }
            sets[tag] = merge({l});
        }
        const auto r = coverage(sets, table);
        Rational as_sum{0}, pfx_sum{0};
        for (const auto& s : r.sources) {
            as_sum += s.normalized_as;
            pfx_sum += s.normalized_prefix;
        }
        const auto tag = "instance " + std::to_string(round);
        o.check(as_sum == Rational(static_cast<std::int64_t>(as_union.size())),
                tag + ": AS weights sum to " + format_rational(as_sum) + ", union " + std::to_string(as_union.size()));
        o.check(pfx_sum == Rational(static_cast<std::int64_t>(prefix_union.size())),
                tag + ": prefix weights sum to " + format_rational(pfx_sum) + ", union " +
                    std::to_string(prefix_union.size()));
    }
    if (o.ok) o.detail = "100 instances, exact rational sums equal union sizes";
    return o;
}

// ---- 6 ----

Outcome decay_recovery() {
    Outcome o;
    Rng rng(6);
    const double tau = 86400;
    const SourceTag tag{SourceKind::passive_flow, "sim"};
    ObservationList l;
    ResponderModel model;
    for (std::uint64_t i = 0; i < 10'000; ++i) {
        const Address128 a{0x20010db800000000ULL | (i >> 16), i};
        l.push_back(Observation{a, 1'000'000, Transport::unknown, std::nullopt, tag});
        Responder r;
        r.birth = 1'000'000;
        r.lifetime = static_cast<Seconds>(std::llround(rng.exponential(tau)));
        r.responds_to.insert(PortProtocol{Transport::icmp6, std::nullopt});
        model.emplace(a, r);
    }
    const auto plan = build_plan(merge({l}), kIxpIntervals, {}, PlanOptions{1'000'000, 0.01});
    SimulatedProber prober(model, 6, 0.0);
    SimulatedClock clock;
    const auto m = execute(plan, prober, clock);
    const auto table = response_table(m);
    o.check(table.rows.size() == 1, "expected one icmp6 row");
    std::string fractions;
    for (const auto& r : table.rows.at(0).rates) {
        const double got = static_cast<double>(r.responsive) / static_cast<double>(r.probed);
        const double want = std::exp(-static_cast<double>(r.offset) / tau);
        o.check(std::abs(got - want) <= 0.02,
                "offset " + std::to_string(r.offset) + ": " + fmt(got) + " vs " + fmt(want));
        fractions += (fractions.empty() ? "" : ", ") + std::to_string(r.offset) + "s " + fmt(got, 3) + "/" + fmt(want, 3);
    }
    const auto oracle = oracle_recount(m);
    std::size_t cells = 0;
    for (const auto& row : table.rows)
        for (const auto& r : row.rates) {
            auto it = oracle.find({row.scan_class.label(), r.offset});
            o.check(it != oracle.end() && it->second == std::make_pair(r.responsive, r.probed),
                    "recount mismatch at " + std::to_string(r.offset));
            ++cells;
        }
    o.check(cells == oracle.size(), "recount cell count");
    if (o.ok) o.detail = "measured/expected " + fractions + "; recount exact";
    return o;
}

// ---- 7 ----

Outcome table_viii() {
    Outcome o;
    TempDir dir;
    const auto truth = fixture::generate(dir.path(), fixture::Options{});
    const auto cfg = config::load(dir / "config.toml", [](const std::string&) { return std::optional<std::string>{}; });
    const auto ing = pipeline::ingest(cfg);
    const auto filtered = apply_cascade(ing.targets, pipeline::load_filter(cfg)).filtered;
    const auto model = pipeline::load_model(cfg);
    SimulatedProber prober(model, cfg.probe.seed, cfg.probe.loss_rate);
    SimulatedClock clock;
    const auto blacklist = pipeline::load_cidrs(cfg.filter.blacklist);
    const auto m = execute(pipeline::plan(cfg, filtered), prober, clock, ExecuteOptions{&blacklist});
    o.check(format_pct(truth.peers_dropping_icmp, truth.peers) == "64.50", "fixture not configured at 64.50%");
    bool found = false;
    for (const auto& r : icmp_vs_inprotocol(m).rows) {
        if (r.scan_class != PortProtocol{Transport::udp, 49001}) continue;
        found = true;
        const auto pct = format_pct(r.icmp_unresponsive, r.in_protocol_responders);
        o.check(pct == "64.50", "reported " + pct + "%");
        if (o.ok)
            o.detail = std::to_string(r.icmp_unresponsive) + " of " + std::to_string(r.in_protocol_responders) +
                       " udp49001 responders icmp-unresponsive = " + pct + "%";
    }
    o.check(found, "no udp49001 row");
    return o;
}

// ---- 8 ----

Outcome stable_core_check() {
    Outcome o;
    Rng rng(8);
    for (int round = 0; round < 10 && o.ok; ++round) {
        const SourceTag tag{SourceKind::passive_flow, "sim"};
        ObservationList l;
        ResponderModel model;
        for (std::uint64_t i = 0; i < 200; ++i) {
            const Address128 a{0x20010db800000000ULL, i + 1};
            const bool tcp = rng.chance(0.5);
            l.push_back(Observation{a, 0, tcp ? Transport::tcp : Transport::unknown,
                                    tcp ? std::optional<std::uint16_t>(443) : std::nullopt, tag});
            Responder r;
            if (rng.chance(0.5)) r.lifetime = static_cast<Seconds>(rng.exponential(200'000));
            r.responds_to.insert(PortProtocol{Transport::icmp6, std::nullopt});
            if (tcp && rng.chance(0.5)) r.responds_to.insert(PortProtocol{Transport::tcp, 443});
            r.drops_icmp = rng.chance(0.2);
            model.emplace(a, r);
        }
        SimulatedProber prober(model, rng.next(), 0.05);
        SimulatedClock clock;
        const auto m = execute(build_plan(merge({l}), kMwnIntervals), prober, clock);
        std::set<Address128> longer;
        bool first = true;
        for (auto it = kMwnIntervals.rbegin(); it != kMwnIntervals.rend(); ++it) {
            const auto core = stable_core(m, *it);
            const std::set<Address128> got(core.begin(), core.end());
            o.check(got == oracle_stable_core(m, *it), "round " + std::to_string(round) + " window " + std::to_string(*it));
            if (!first)
                o.check(std::includes(got.begin(), got.end(), longer.begin(), longer.end()),
                        "not monotone at window " + std::to_string(*it));
            longer = got;
            first = false;
        }
    }
    if (o.ok) o.detail = "10 seeded simulations x 7 windows equal the oracle; monotone";
    return o;
}

// ---- 9 ----

std::map<std::string, std::string> report_bundle(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_file(e.path());
    return out;
}

Outcome cli_determinism() {
    Outcome o;
    const fs::path demo = fs::path(HITLIST_SOURCE_DIR) / "fixtures" / "demo";
    const fs::path golden = fs::path(HITLIST_SOURCE_DIR) / "tests" / "golden";
    TempDir scratch;
    std::vector<std::map<std::string, std::string>> bundles;
    for (const char* run_name : {"run1", "run2"}) {
        const auto out = scratch / run_name;
        for (const char* step : {"ingest", "filter", "probe", "analyze"}) {
            const auto r = run(quote(HITLIST_BIN) + " --quiet --seed 42 --config " + quote(demo / "config.toml") +
                                   " --out " + quote(out) + " " + step,
                               scratch.path());
            o.check(r.exit_code == 0, std::string(step) + " exited " + std::to_string(r.exit_code) + ": " + r.err);
            if (!o.ok) return o;
        }
        bundles.push_back(report_bundle(out / "reports"));
    }
    o.check(bundles[0] == bundles[1], "report bundles differ between runs");
    const auto gold = report_bundle(golden);
    o.check(!gold.empty(), "no golden files");
    for (const auto& [name, content] : gold) {
        auto it = bundles[0].find(name);
        o.check(it != bundles[0].end() && it->second == content, "golden mismatch: " + name);
    }
    if (o.ok)
        o.detail = std::to_string(bundles[0].size()) + " report files byte-identical across runs; " +
                   std::to_string(gold.size()) + " golden files match";
    return o;
}

// ---- 10 ----

Outcome throughput() {
    Outcome o;
    Rng rng(10);
    // 64 announced /32s, each address drawn inside one of them; a few in blacklisted /48s.
    FilterConfig cfg;
    cfg.fullbogons.insert(parse_prefix("3ffe::/16"));
    cfg.iana_special.insert(parse_prefix("2001:db8::/32"));
    cfg.own_networks.insert(parse_prefix("2a0a:ffff::/32"));
    std::vector<std::uint64_t> nets;
    for (std::uint64_t i = 0; i < 64; ++i) {
        const std::uint64_t hi = (0x2a0a0000ULL + i) << 32;
        nets.push_back(hi);
        const Prefix p(Address128{hi, 0}, 32);
        cfg.routing.add(p, AsSet{static_cast<AsNumber>(64500 + i)});
        if (i % 8 != 7) cfg.announced.insert(p);
        cfg.blacklist.insert(Prefix(Address128{hi | 0xbad0000ULL, 0}, 48));
    }

    std::string csv = "ts,src,dst,proto,port\n";
    csv.reserve(60'000'000);
    auto addr = [&](std::uint64_t i) {
        const std::uint64_t hi = nets[rng.below(nets.size())] | (rng.below(0x10000) << 16);
        return canonical_text(Address128{hi, (i << 20) | rng.below(1 << 20)});
    };
    for (std::uint64_t i = 0; i < 500'000; ++i) {
        csv += std::to_string(1'500'000'000 + i) + "," + addr(2 * i) + "," + addr(2 * i + 1) + ",tcp," +
               std::to_string(rng.chance(0.5) ? 443 : 80) + "\n";
    }

    const auto t0 = Clock::now();
    std::istringstream in(std::move(csv));
    const auto ingested = ingest_flow_records(in, SourceTag{SourceKind::passive_flow, "bulk"});
    const auto targets = merge({ingested.observations});
    const auto one = apply_cascade(targets, cfg, 1);
    const double t = seconds_since(t0);
    o.check(targets.size() == 1'000'000, std::to_string(targets.size()) + " distinct addresses");
    o.check(t < 10.0, "ingest+filter took " + fmt(t) + "s");
    const auto four = apply_cascade(targets, cfg, 4);
    o.check(four.filtered == one.filtered && four.report == one.report, "4-thread output differs");
    if (o.ok)
        o.detail = "1000000 addresses ingest+filter " + fmt(t, 2) + "s single-threaded, " +
                   std::to_string(one.report.final_count()) + " survive; 4 threads identical";
    return o;
}

// ---- 11 ----

Outcome recommendation_table() {
    Outcome o;
    using K = SourceKind;
    const std::map<ScanPurpose, std::vector<SourceKind>> table{
        {ScanPurpose::routers, {K::caida_dns_names, K::traceroute}},
        {ScanPurpose::clients, {K::passive_flow}},
        {ScanPurpose::internet_structure, {K::passive_flow, K::caida_dns_names}},
        {ScanPurpose::security_posture, {K::alexa_list, K::reverse_dns, K::dns_any, K::zone_file, K::passive_flow}},
        {ScanPurpose::active_prefixes, {K::passive_flow}},
    };
    const std::set<SourceKind> all(kAllSourceKinds.begin(), kAllSourceKinds.end());
    for (auto p : kAllScanPurposes) {
        const auto r = recommend(p, all, {});
        std::vector<SourceKind> got;
        for (const auto& s : r.plan) got.push_back(s.kind);
        o.check(got == table.at(p), std::string(to_string(p)) + " ordering differs");
    }
    if (o.ok) o.detail = "5 scan types match the decision table";
    return o;
}

} // namespace

int main() {
    criterion(1, "EUI-64 codec round trip", eui64_codec);
    criterion(2, "privacy-extension Hamming model", privacy_hamming);
    criterion(3, "LPM equals linear-scan oracle", lpm_oracle);
    criterion(4, "cascade equals set-algebra oracle", cascade_oracle);
    criterion(5, "normalized-weight conservation", normalized_conservation);
    criterion(6, "response-decay recovery", decay_recovery);
    criterion(7, "udp49001 icmp-unresponsive share", table_viii);
    criterion(8, "stable-core oracle and monotonicity", stable_core_check);
    criterion(9, "end-to-end determinism and golden files", cli_determinism);
    criterion(10, "ingest+filter throughput", throughput);
    criterion(11, "recommendation ordering", recommendation_table);
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
