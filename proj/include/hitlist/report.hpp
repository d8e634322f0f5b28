#pragma once

// JSON and TSV renderings of every report, plus the few readers the CLI
// needs to chain subcommands (coverage and response reports for
// recommendations, the simulated responder model). Percentages are emitted
// as two-decimal strings so the bundle is byte-stable.

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitlist/analytics.hpp"
#include "hitlist/error.hpp"
#include "hitlist/filter.hpp"
#include "hitlist/format.hpp"
#include "hitlist/probe.hpp"
#include "hitlist/recommend.hpp"
#include "hitlist/source.hpp"

namespace hitlist::report {

using Json = nlohmann::ordered_json;

/// Pretty-printed with a trailing newline.
inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json tag_json(const SourceTag& t) {
    return Json{{"kind", std::string(to_string(t.kind))}, {"name", t.name}, {"label", t.label()}};
}

inline SourceTag parse_tag_json(const Json& j) {
    const auto kind = parse_source_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error("unknown source kind '" + j.at("kind").get<std::string>() + "'");
    return SourceTag{*kind, j.at("name").get<std::string>()};
}

// ---- filter ----

inline Json stage_report_json(const StageReport& r) {
    Json stages = Json::array();
    for (const auto& s : r.stages)
        stages.push_back({{"stage", std::string(to_string(s.stage))}, {"removed", s.removed}, {"remaining", s.remaining}});
    return Json{{"initial", r.initial}, {"stages", stages}, {"final", r.final_count()}};
}

/// Fixed-width text table: one row per stage plus the initial count.
inline std::string stage_table(const StageReport& r) {
    std::size_t w = 7; // "initial"
    for (const auto& s : r.stages) w = std::max(w, to_string(s.stage).size());
    std::size_t nw = 9; // "remaining"
    nw = std::max(nw, std::to_string(r.initial).size());
    std::ostringstream out;
    auto row = [&](std::string_view name, const std::string& removed, const std::string& remaining) {
        out << name << std::string(w - name.size() + 2, ' ') << std::string(nw - std::min(nw, removed.size()), ' ')
            << removed << "  " << std::string(nw - std::min(nw, remaining.size()), ' ') << remaining << "\n";
    };
    row("stage", "removed", "remaining");
    row("initial", "", std::to_string(r.initial));
    for (const auto& s : r.stages) row(to_string(s.stage), std::to_string(s.removed), std::to_string(s.remaining));
    return out.str();
}

// ---- coverage ----

inline Json coverage_json(const CoverageReport& r, const std::map<SourceTag, SourceResponse>* responses = nullptr) {
    Json sources = Json::array();
    for (const auto& s : r.sources) {
        Json j = tag_json(s.source);
        j["targets"] = s.targets;
        j["as_count"] = s.ases.size();
        j["as_coverage_pct"] = r.as_coverage_pct(s);
        j["prefix_count"] = s.prefixes.size();
        j["prefix_coverage_pct"] = r.prefix_coverage_pct(s);
        j["unique_as_count"] = s.unique_as_count;
        j["unique_prefix_count"] = s.unique_prefix_count;
        j["normalized_as"] = format_rational(s.normalized_as);
        j["normalized_as_exact"] = exact_rational(s.normalized_as);
        j["normalized_prefix"] = format_rational(s.normalized_prefix);
        j["normalized_prefix_exact"] = exact_rational(s.normalized_prefix);
        if (responses) {
            auto it = responses->find(s.source);
            if (it != responses->end() && it->second.probed > 0) {
                j["icmp_probed"] = it->second.probed;
                j["icmp_responsive"] = it->second.responsive;
                j["icmp_response_pct"] = it->second.pct();
            }
        }
        sources.push_back(std::move(j));
    }
    return Json{
        {"announced_as_total", r.announced_as_total},
        {"announced_prefix_total", r.announced_prefix_total},
        {"sources", sources},
        {"combined",
         {{"targets", r.combined_targets},
          {"as_count", r.combined_as_count},
          {"as_coverage_pct", r.combined_as_pct()},
          {"prefix_count", r.combined_prefix_count},
          {"prefix_coverage_pct", r.combined_prefix_pct()}}},
    };
}

/// Reads the per-source numbers back out of a coverage report.
inline std::vector<SourceSummary> read_coverage_summary(const Json& j) {
    std::vector<SourceSummary> out;
    for (const auto& s : j.at("sources")) {
        SourceSummary sum;
        sum.source = parse_tag_json(s);
        sum.targets = s.at("targets").get<std::uint64_t>();
        sum.as_count = s.at("as_count").get<std::uint64_t>();
        sum.as_pct = s.at("as_coverage_pct").get<std::string>();
        sum.prefix_count = s.at("prefix_count").get<std::uint64_t>();
        sum.prefix_pct = s.at("prefix_coverage_pct").get<std::string>();
        sum.normalized_as = s.at("normalized_as").get<std::string>();
        sum.unique_as_count = s.at("unique_as_count").get<std::uint64_t>();
        if (s.contains("icmp_response_pct")) sum.icmp_response_pct = s.at("icmp_response_pct").get<std::string>();
        out.push_back(std::move(sum));
    }
    return out;
}

// ---- runup ----

inline Json runup_points_json(const std::vector<RunupPoint>& pts) {
    Json a = Json::array();
    for (const auto& p : pts)
        a.push_back({{"bucket_start", p.bucket_start},
                     {"new_ips", p.new_ips},
                     {"new_ases", p.new_ases},
                     {"new_prefixes", p.new_prefixes},
                     {"total_ips", p.total_ips},
                     {"total_ases", p.total_ases},
                     {"total_prefixes", p.total_prefixes}});
    return a;
}

struct RunupSeries {
    std::string label; // source label or "combined"
    std::vector<RunupPoint> points;
};

inline Json runup_json(Seconds bucket, const std::vector<RunupSeries>& series) {
    Json s = Json::array();
    for (const auto& r : series) s.push_back({{"series", r.label}, {"points", runup_points_json(r.points)}});
    return Json{{"bucket_seconds", bucket}, {"series", s}};
}

inline std::string runup_tsv(const std::vector<RunupSeries>& series) {
    std::ostringstream out;
    out << "series\tbucket_start\tnew_ips\tnew_ases\tnew_prefixes\ttotal_ips\ttotal_ases\ttotal_prefixes\n";
    for (const auto& r : series)
        for (const auto& p : r.points)
            out << r.label << '\t' << p.bucket_start << '\t' << p.new_ips << '\t' << p.new_ases << '\t'
                << p.new_prefixes << '\t' << p.total_ips << '\t' << p.total_ases << '\t' << p.total_prefixes << '\n';
    return out.str();
}

// ---- port breakdown ----

inline Json port_breakdown_json(const std::vector<PortShare>& shares, std::size_t n) {
    Json a = Json::array();
    for (const auto& s : shares) a.push_back({{"port_protocol", s.port_protocol.label()}, {"count", s.count}, {"pct", s.pct()}});
    return Json{{"top_n", n}, {"total_flows", shares.empty() ? 0 : shares.front().total}, {"ranking", a}};
}

// ---- IID profiles ----

inline Json iid_profile_json(const std::vector<IidProfile>& profiles, const ClassifierConfig& cfg) {
    Json a = Json::array();
    for (const auto& p : profiles) {
        Json j = tag_json(p.source);
        j["total"] = p.total;
        Json counts;
        for (auto k : kAllIidKinds) counts[std::string(to_string(k))] = p.count(k);
        j["counts"] = counts;
        j["eui64_pct"] = p.eui64_pct();
        Json vendors = Json::array();
        for (const auto& v : p.vendors) vendors.push_back({{"vendor", v.vendor}, {"count", v.count}, {"pct", p.vendor_pct(v)}});
        j["vendors"] = vendors;
        a.push_back(std::move(j));
    }
    return Json{{"classifier",
                 {{"low_threshold", cfg.low_threshold},
                  {"privacy_min_weight", cfg.privacy_min_weight},
                  {"privacy_max_weight", cfg.privacy_max_weight}}},
                {"sources", a}};
}

// ---- Hamming weights ----

struct HammingSeries {
    std::string label;
    HammingHistogram histogram;
};

inline Json hamming_json(const std::vector<HammingSeries>& series) {
    Json a = Json::array();
    for (const auto& s : series) {
        const auto& h = s.histogram;
        Json bins = Json::array();
        for (auto b : h.bins) bins.push_back(b);
        a.push_back({{"series", s.label},
                     {"count", h.count},
                     {"mean", h.mean ? Json(format_fixed(*h.mean, 4)) : Json(nullptr)},
                     {"variance", h.variance ? Json(format_fixed(*h.variance, 4)) : Json(nullptr)},
                     {"bins", bins}});
    }
    return Json{{"reference_mean", format_fixed(HammingHistogram::kReferenceMean, 2)},
                {"reference_variance", format_fixed(HammingHistogram::kReferenceVariance, 2)},
                {"series", a}};
}

/// Normal density with the reference parameters, for overlaying on the histogram.
inline double reference_density(unsigned weight) {
    const double var = HammingHistogram::kReferenceVariance;
    const double d = static_cast<double>(weight) - HammingHistogram::kReferenceMean;
    return std::exp(-d * d / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
}

inline std::string hamming_tsv(const std::vector<HammingSeries>& series) {
    std::ostringstream out;
    out << "weight";
    for (const auto& s : series) out << '\t' << s.label;
    out << "\treference_density\n";
    for (unsigned w = 0; w <= 64; ++w) {
        out << w;
        for (const auto& s : series) out << '\t' << s.histogram.bins[w];
        out << '\t' << format_fixed(reference_density(w), 6) << '\n';
    }
    return out.str();
}

// ---- prefix agility ----

struct AgilitySeries {
    std::string label;
    AgilityReport report;
};

inline Json agility_json(const std::vector<AgilitySeries>& series, bool eui64_only) {
    Json a = Json::array();
    for (const auto& s : series)
        a.push_back({{"series", s.label},
                     {"iid_count", s.report.iid_count},
                     {"agile_count", s.report.agile_count},
                     {"agile_pct", s.report.agile_pct()}});
    return Json{{"eui64_only", eui64_only}, {"series", a}};
}

// ---- stable core ----

inline Json stable_core_json(const std::vector<Address128>& core, Seconds window, std::uint64_t probed_targets) {
    Json a = Json::array();
    for (const auto& addr : core) a.push_back(canonical_text(addr));
    return Json{{"window_seconds", window},
                {"probed_targets", probed_targets},
                {"stable_count", core.size()},
                {"stable_pct", format_pct(core.size(), probed_targets)},
                {"addresses", a}};
}

// ---- server coverage ----

struct ServerCoverageRow {
    std::string label;
    ServerCoverage coverage;
};

inline Json server_coverage_json(const std::vector<ServerCoverageRow>& rows,
                                 const boost::container::flat_set<PortProtocol>& ports) {
    Json p = Json::array();
    for (const auto& pp : ports) p.push_back(pp.label());
    Json a = Json::array();
    for (const auto& r : rows) {
        const auto& c = r.coverage;
        a.push_back({{"series", r.label},
                     {"server_targets", c.server_targets},
                     {"total_targets", c.total_targets},
                     {"server_as_count", c.server_as_count},
                     {"total_as_count", c.total_as_count},
                     {"as_pct", c.as_pct()},
                     {"server_prefix_count", c.server_prefix_count},
                     {"total_prefix_count", c.total_prefix_count},
                     {"prefix_pct", c.prefix_pct()}});
    }
    return Json{{"server_ports", p}, {"series", a}};
}

// ---- response (decay table + in-protocol summary) ----

inline Json response_json(const ResponseTable& t, const InProtocolSummary& s, std::uint64_t policy_skips,
                          std::uint64_t late_cells) {
    Json intervals = Json::array();
    for (auto i : t.intervals) intervals.push_back(i);
    Json rows = Json::array();
    for (const auto& r : t.rows) {
        Json rates = Json::array();
        for (const auto& c : r.rates)
            rates.push_back({{"offset", c.offset},
                             {"probed", c.probed},
                             {"responsive", c.responsive},
                             {"pct", format_pct(c.responsive, c.probed)}});
        rows.push_back({{"scan_class", r.scan_class.label()}, {"targets", r.targets}, {"rates", rates}});
    }
    Json inproto = Json::array();
    for (const auto& r : s.rows)
        inproto.push_back({{"scan_class", r.scan_class.label()},
                           {"in_protocol_responders", r.in_protocol_responders},
                           {"icmp_unresponsive", r.icmp_unresponsive},
                           {"icmp_unresponsive_pct", format_pct(r.icmp_unresponsive, r.in_protocol_responders)}});
    return Json{{"intervals", intervals},
                {"decay", rows},
                {"icmp_responders", s.icmp_responders},
                {"in_protocol", inproto},
                {"policy_skips", policy_skips},
                {"late_cells", late_cells}};
}

/// The icmp6 decay row of a response report, if present.
inline std::optional<ResponseRow> read_icmp_decay(const Json& j) {
    for (const auto& r : j.at("decay")) {
        if (r.at("scan_class").get<std::string>() != "icmp6") continue;
        ResponseRow row;
        row.scan_class = PortProtocol{Transport::icmp6, std::nullopt};
        row.targets = r.at("targets").get<std::uint64_t>();
        for (const auto& c : r.at("rates"))
            row.rates.push_back(RateCell{c.at("offset").get<Seconds>(), c.at("responsive").get<std::uint64_t>(),
                                         c.at("probed").get<std::uint64_t>()});
        return row;
    }
    return std::nullopt;
}

inline std::string decay_tsv(const ResponseTable& t) {
    std::ostringstream out;
    out << "scan_class\toffset\tprobed\tresponsive\tpct\n";
    for (const auto& r : t.rows)
        for (const auto& c : r.rates)
            out << r.scan_class.label() << '\t' << c.offset << '\t' << c.probed << '\t' << c.responsive << '\t'
                << format_pct(c.responsive, c.probed) << '\n';
    return out.str();
}

// ---- recommendation ----

inline Json recommendation_json(const Recommendation& r) {
    Json plan = Json::array();
    for (const auto& s : r.plan) {
        Json ev = Json::array();
        for (const auto& e : s.evidence) ev.push_back(e);
        plan.push_back({{"source", std::string(to_string(s.kind))},
                        {"role", std::string(to_string(s.role))},
                        {"rationale", s.rationale},
                        {"evidence", ev}});
    }
    Json notes = Json::array();
    for (const auto& n : r.notes) notes.push_back(n);
    Json j{{"scan_type", std::string(to_string(r.purpose))}, {"plan", plan}, {"notes", notes}};
    j["max_probe_delay_seconds"] = r.max_probe_delay ? Json(*r.max_probe_delay) : Json(nullptr);
    return j;
}

inline std::string recommendation_text(const Recommendation& r) {
    std::ostringstream out;
    out << "Scan type: " << to_string(r.purpose) << "\n";
    int i = 1;
    for (const auto& s : r.plan) {
        out << i++ << ". " << to_string(s.kind) << " [" << to_string(s.role) << "]: " << s.rationale << "\n";
        for (const auto& e : s.evidence) out << "     " << e << "\n";
    }
    if (r.plan.empty()) out << "(no usable source)\n";
    if (r.max_probe_delay) out << "Max probe delay: " << *r.max_probe_delay << "s\n";
    for (const auto& n : r.notes) out << "Note: " << n << "\n";
    return out.str();
}

// ---- simulated responder model ----

/// JSON array of {address, birth, lifetime_seconds|null, responds_to:[labels], drops_icmp}.
inline ResponderModel load_responder_model(std::istream& in) {
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("responder model is not valid JSON: ") + e.what());
    }
    if (!j.is_array()) throw Error("responder model must be a JSON array");
    ResponderModel model;
    std::size_t i = 0;
    for (const auto& e : j) {
        const auto where = "responder model entry " + std::to_string(i++);
        try {
            const auto addr = parse_address(e.at("address").get<std::string>());
            Responder r;
            r.birth = e.at("birth").get<Timestamp>();
            const auto& life = e.at("lifetime_seconds");
            if (!life.is_null()) r.lifetime = life.get<Seconds>();
            for (const auto& label : e.at("responds_to")) {
                auto pp = parse_port_protocol(label.get<std::string>());
                if (!pp) throw Error("unknown scan class '" + label.get<std::string>() + "'");
                r.responds_to.insert(*pp);
            }
            r.drops_icmp = e.value("drops_icmp", false);
            model[addr] = std::move(r);
        } catch (const nlohmann::json::exception& ex) {
            throw Error(where + ": " + ex.what());
        } catch (const Error& ex) {
            throw Error(where + ": " + ex.what());
        }
    }
    return model;
}

inline Json responder_model_json(const ResponderModel& model) {
    Json a = Json::array();
    for (const auto& [addr, r] : model) {
        Json to = Json::array();
        for (const auto& pp : r.responds_to) to.push_back(pp.label());
        a.push_back({{"address", canonical_text(addr)},
                     {"birth", r.birth},
                     {"lifetime_seconds", r.lifetime ? Json(*r.lifetime) : Json(nullptr)},
                     {"responds_to", to},
                     {"drops_icmp", r.drops_icmp}});
    }
    return a;
}

} // namespace hitlist::report
