#pragma once

// The stages behind each subcommand, as functions from loaded inputs to
// in-memory outputs. The CLI adds file handling, manifests and exit codes.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "hitlist/analytics.hpp"
#include "hitlist/artifact.hpp"
#include "hitlist/config.hpp"
#include "hitlist/dns.hpp"
#include "hitlist/error.hpp"
#include "hitlist/filter.hpp"
#include "hitlist/prefix_trie.hpp"
#include "hitlist/probe.hpp"
#include "hitlist/recommend.hpp"
#include "hitlist/report.hpp"
#include "hitlist/source.hpp"

namespace hitlist::pipeline {

namespace fs = std::filesystem;
using report::Json;

inline std::ifstream open_input(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + p.string());
    return in;
}

/// Prefixes the error with the file it came from.
template <typename F>
auto with_file(const fs::path& p, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const LineError& e) {
        throw Error(p.string() + ":" + std::to_string(e.line()) + ": " + e.what());
    } catch (const Error& e) {
        throw Error(p.string() + ": " + e.what());
    }
}

// ---- ingest ----

struct IngestOutcome {
    ObservationList observations;
    TargetSet targets;
    Json report;
};

inline std::unique_ptr<Resolver> make_resolver(const config::ResolverSpec& spec) {
    if (spec.kind == config::ResolverSpec::Kind::stub) {
        auto in = open_input(spec.stub_file);
        return with_file(spec.stub_file, [&] { return std::make_unique<StubResolver>(StubResolver::load(in)); });
    }
    return std::make_unique<UdpResolver>(spec.server, spec.port);
}

/// Reads every declared source. Passive flows go first, so their latest
/// timestamp can stand in for the ingestion time of list-based sources when
/// [ingest] timestamp is unset; traceroute hops go last, so their "new"
/// count is measured against everything else.
inline IngestOutcome ingest(const config::PipelineConfig& cfg) {
    std::vector<ObservationList> lists;
    std::map<SourceTag, Json> per_source;

    std::optional<Timestamp> latest_flow;
    for (const auto& s : cfg.sources) {
        if (s.tag.kind != SourceKind::passive_flow) continue;
        auto in = open_input(*s.path);
        auto r = with_file(*s.path, [&] { return ingest_flow_records(in, s.tag, cfg.filter.self_prefixes); });
        for (const auto& o : r.observations)
            latest_flow = latest_flow ? std::max(*latest_flow, o.timestamp) : o.timestamp;
        per_source[s.tag] = Json{{"rows", r.drops.rows},
                                 {"malformed_rows", r.drops.malformed_rows},
                                 {"self_filtered_rows", r.drops.self_filtered_rows},
                                 {"self_filtered_endpoints", r.drops.self_filtered_endpoints},
                                 {"observations", r.observations.size()}};
        lists.push_back(std::move(r.observations));
    }
    const Timestamp ts = cfg.ingest.timestamp.value_or(latest_flow.value_or(0));

    for (const auto& s : cfg.sources) {
        if (s.tag.kind == SourceKind::passive_flow || s.tag.kind == SourceKind::traceroute) continue;
        Json j = Json::object();
        ObservationList obs;
        if (s.path) {
            auto in = open_input(*s.path);
            auto r = with_file(*s.path, [&] { return ingest_address_list(in, s.tag, ts); });
            j["list_addresses"] = r.observations.size();
            j["malformed_lines"] = r.malformed_lines;
            obs = std::move(r.observations);
        }
        if (s.hostnames) {
            auto in = open_input(*s.hostnames);
            auto names = with_file(*s.hostnames, [&] { return read_hostname_list(in, s.tag); });
            auto resolver = make_resolver(*s.resolver);
            auto r = resolve_hostnames(names.records, *resolver, cfg.ingest.dns, ts);
            j["hostnames"] = names.records.size();
            j["invalid_hostnames"] = names.invalid_lines;
            j["dns"] = Json{{"queried", r.counts.queried},   {"answered", r.counts.answered},
                            {"nxdomain", r.counts.nxdomain}, {"no_data", r.counts.no_data},
                            {"servfail", r.counts.servfail}, {"timeout", r.counts.timeout},
                            {"error", r.counts.error}};
            j["resolved_addresses"] = r.observations.size();
            obs.insert(obs.end(), r.observations.begin(), r.observations.end());
        }
        j["observations"] = obs.size();
        per_source[s.tag] = std::move(j);
        lists.push_back(std::move(obs));
    }

    bool has_hops = std::any_of(cfg.sources.begin(), cfg.sources.end(),
                                [](const auto& s) { return s.tag.kind == SourceKind::traceroute; });
    if (has_hops) {
        const auto known = merge(lists);
        for (const auto& s : cfg.sources) {
            if (s.tag.kind != SourceKind::traceroute) continue;
            auto in = open_input(*s.path);
            auto r = with_file(*s.path, [&] { return ingest_traceroute_hops(in, s.tag, known, ts); });
            per_source[s.tag] = Json{{"hops", r.observations.size()},
                                     {"malformed_lines", r.malformed_lines},
                                     {"new_addresses", r.new_count},
                                     {"observations", r.observations.size()}};
            lists.push_back(std::move(r.observations));
        }
    }

    IngestOutcome out;
    out.targets = merge(lists);
    std::size_t total = 0;
    for (const auto& l : lists) total += l.size();
    out.observations.reserve(total);
    for (auto& l : lists) out.observations.insert(out.observations.end(), l.begin(), l.end());

    Json sources = Json::array();
    for (auto& [tag, j] : per_source) {
        Json row = report::tag_json(tag);
        for (auto& [k, v] : j.items()) row[k] = v;
        row["targets"] = out.targets.restrict_to(tag).size();
        sources.push_back(std::move(row));
    }
    out.report = Json{{"ingest_timestamp", ts},
                      {"sources", sources},
                      {"merged", {{"observations", out.observations.size()}, {"targets", out.targets.size()}}}};
    return out;
}

// ---- filter ----

inline PrefixSet load_cidrs(const std::optional<fs::path>& p) {
    if (!p) return {};
    auto in = open_input(*p);
    return with_file(*p, [&] { return load_cidr_set(in); });
}

inline RoutingTable load_routing(const config::PipelineConfig& cfg, std::string_view stage) {
    if (!cfg.filter.pfx2as) throw ConfigError(std::string(stage) + " needs [filter] pfx2as");
    auto in = open_input(*cfg.filter.pfx2as);
    return with_file(*cfg.filter.pfx2as, [&] { return load_pfx2as(in); });
}

inline FilterConfig load_filter(const config::PipelineConfig& cfg) {
    FilterConfig f;
    f.self_prefixes = cfg.filter.self_prefixes;
    f.fullbogons = load_cidrs(cfg.filter.fullbogons);
    f.iana_special = load_cidrs(cfg.filter.iana_special);
    f.own_networks = load_cidrs(cfg.filter.own_networks);
    f.routing = load_routing(cfg, "filter");
    f.announced = load_cidrs(cfg.filter.announced);
    f.blacklist = load_cidrs(cfg.filter.blacklist);
    return f;
}

// ---- probe ----

inline ResponderModel load_model(const config::PipelineConfig& cfg) {
    if (!cfg.probe.model) throw ConfigError("the simulated backend needs [probe] model");
    auto in = open_input(*cfg.probe.model);
    return with_file(*cfg.probe.model, [&] { return report::load_responder_model(in); });
}

inline ProbePlan plan(const config::PipelineConfig& cfg, const TargetSet& targets) {
    return build_plan(targets, cfg.probe.intervals, cfg.probe.policy,
                      PlanOptions{cfg.probe.rate_limit, cfg.probe.jitter_fraction});
}

inline Json probe_report(const ProbePlan& p, const ResponseMatrix& m, std::string_view backend, std::uint64_t seed) {
    std::uint64_t responsive = 0, late = 0;
    for (const auto& c : m.cells) {
        responsive += c.responsive;
        late += c.late;
    }
    Json scans = Json::array();
    for (const auto& s : m.scans) scans.push_back(s.label());
    Json intervals = Json::array();
    for (auto i : m.intervals) intervals.push_back(i);
    return Json{{"backend", std::string(backend)},
                {"seed", seed},
                {"intervals", intervals},
                {"scans", scans},
                {"tasks", p.tasks.size()},
                {"cells", m.cells.size()},
                {"policy_skips", m.skips.size()},
                {"responsive_cells", responsive},
                {"late_cells", late},
                {"rate_limit", p.rate_limit},
                {"max_sends_per_second", max_sends_per_second(m)}};
}

// ---- analyze ----

/// Report file name to contents, in a stable order.
using Bundle = std::map<std::string, std::string>;

struct AnalyzeInputs {
    const TargetSet& targets;              // the filtered hitlist
    const ObservationList& observations;   // raw observations; restricted to `targets` here
    const ResponseMatrix* matrix = nullptr; // absent when probing has not run
};

inline Bundle analyze(const config::PipelineConfig& cfg, const AnalyzeInputs& in, std::vector<std::string>& warnings) {
    const auto routing = load_routing(cfg, "analyze");
    OuiDatabase oui;
    if (cfg.analyze.oui) {
        auto f = open_input(*cfg.analyze.oui);
        oui = OuiDatabase::load(f);
    } else {
        warnings.push_back("no [analyze] oui file; every EUI-64 vendor reports as unknown");
    }

    ObservationList obs;
    for (const auto& o : in.observations)
        if (in.targets.contains(o.address)) obs.push_back(o);
    const auto sets = split_by_source(in.targets);
    std::map<SourceTag, ObservationList> obs_by_source;
    for (const auto& o : obs) obs_by_source[o.source].push_back(o);

    Bundle b;
    std::optional<std::map<SourceTag, SourceResponse>> responses;
    if (in.matrix) responses = icmp_response_by_source(sets, *in.matrix);

    // coverage
    const auto cov = coverage(sets, routing);
    b["coverage.json"] = report::dump(report::coverage_json(cov, responses ? &*responses : nullptr));

    // runup
    std::vector<report::RunupSeries> runups;
    for (const auto& [tag, list] : obs_by_source)
        runups.push_back({tag.label(), runup(list, routing, cfg.analyze.runup_bucket)});
    runups.push_back({"combined", runup(obs, routing, cfg.analyze.runup_bucket)});
    b["runup.json"] = report::dump(report::runup_json(cfg.analyze.runup_bucket, runups));
    b["runup.tsv"] = report::runup_tsv(runups);

    // port breakdown over passive observations
    {
        Json series = Json::array();
        ObservationList passive;
        for (const auto& [tag, list] : obs_by_source) {
            if (tag.kind != SourceKind::passive_flow) continue;
            passive.insert(passive.end(), list.begin(), list.end());
            auto j = report::port_breakdown_json(port_breakdown(list, cfg.analyze.top_ports), cfg.analyze.top_ports);
            series.push_back(Json{{"series", tag.label()}, {"breakdown", j}});
        }
        auto j = report::port_breakdown_json(port_breakdown(passive, cfg.analyze.top_ports), cfg.analyze.top_ports);
        series.push_back(Json{{"series", "combined"}, {"breakdown", j}});
        b["port_breakdown.json"] = report::dump(Json{{"series", series}});
    }

    // IID profiles
    b["iid_profile.json"] =
        report::dump(report::iid_profile_json(iid_profiles(sets, oui, cfg.analyze.classifier), cfg.analyze.classifier));

    // Hamming weights
    {
        std::vector<report::HammingSeries> series;
        auto iids = [](const TargetSet& t) {
            std::vector<Iid> v;
            v.reserve(t.size());
            for (const auto& e : t) v.push_back(Iid{e.address.lo});
            return v;
        };
        for (const auto& [tag, set] : sets) series.push_back({tag.label(), hamming_histogram(iids(set))});
        series.push_back({"combined", hamming_histogram(iids(in.targets))});
        b["hamming.json"] = report::dump(report::hamming_json(series));
        b["hamming.tsv"] = report::hamming_tsv(series);
    }

    // prefix agility
    {
        std::vector<report::AgilitySeries> series;
        for (const auto& [tag, list] : obs_by_source)
            series.push_back({tag.label(), prefix_agility(std::span<const Observation>(list), cfg.analyze.agility_eui64_only)});
        series.push_back({"combined", prefix_agility(std::span<const Observation>(obs), cfg.analyze.agility_eui64_only)});
        b["agility.json"] = report::dump(report::agility_json(series, cfg.analyze.agility_eui64_only));
    }

    // server coverage
    {
        std::vector<report::ServerCoverageRow> rows;
        for (const auto& [tag, set] : sets)
            rows.push_back({tag.label(), server_coverage(set, routing, cfg.analyze.server_ports)});
        rows.push_back({"combined", server_coverage(in.targets, routing, cfg.analyze.server_ports)});
        b["server_coverage.json"] = report::dump(report::server_coverage_json(rows, cfg.analyze.server_ports));
    }

    if (!in.matrix) {
        warnings.push_back("no response matrix (run 'probe' first); skipping stable_core and response reports");
        return b;
    }
    const auto& m = *in.matrix;

    // stable core
    try {
        std::unordered_set<Address128> probed;
        for (const auto& c : m.cells) probed.insert(c.target);
        const auto core = stable_core(m, cfg.analyze.stable_window);
        b["stable_core.json"] = report::dump(report::stable_core_json(core, cfg.analyze.stable_window, probed.size()));
    } catch (const WindowExceedsMatrix& e) {
        warnings.push_back(std::string(e.what()) + "; skipping stable_core");
    }

    // response decay and in-protocol summary
    const auto table = response_table(m);
    std::uint64_t late = 0;
    for (const auto& c : m.cells) late += c.late;
    b["response.json"] = report::dump(report::response_json(table, icmp_vs_inprotocol(m), m.skips.size(), late));
    b["decay.tsv"] = report::decay_tsv(table);
    return b;
}

// ---- recommend ----

struct RecommendInputs {
    Json coverage;
    std::optional<Json> response;
};

inline Recommendation recommend_from_reports(ScanPurpose purpose, const RecommendInputs& in,
                                             const std::optional<std::set<SourceKind>>& available_override = {}) {
    RecommendationInputs inputs;
    inputs.sources = report::read_coverage_summary(in.coverage);
    if (in.response) inputs.icmp_decay = report::read_icmp_decay(*in.response);
    std::set<SourceKind> available;
    if (available_override) {
        available = *available_override;
    } else {
        for (const auto& s : inputs.sources) available.insert(s.source.kind);
    }
    return recommend(purpose, available, inputs);
}

} // namespace hitlist::pipeline
