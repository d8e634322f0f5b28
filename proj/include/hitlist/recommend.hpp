#pragma once

// Source selection per scan purpose, annotated with the coverage and
// response numbers computed for the sources at hand.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hitlist/analytics.hpp"
#include "hitlist/error.hpp"
#include "hitlist/format.hpp"
#include "hitlist/probe.hpp"
#include "hitlist/source.hpp"

namespace hitlist {

enum class ScanPurpose : std::uint8_t { internet_structure, security_posture, routers, clients, active_prefixes };

inline constexpr std::array<ScanPurpose, 5> kAllScanPurposes{
    ScanPurpose::internet_structure, ScanPurpose::security_posture, ScanPurpose::routers, ScanPurpose::clients,
    ScanPurpose::active_prefixes,
};

constexpr std::string_view to_string(ScanPurpose p) noexcept {
    switch (p) {
    case ScanPurpose::internet_structure: return "internet_structure";
    case ScanPurpose::security_posture: return "security_posture";
    case ScanPurpose::routers: return "routers";
    case ScanPurpose::clients: return "clients";
    case ScanPurpose::active_prefixes: return "active_prefixes";
    }
    return "?";
}

inline std::string scan_purpose_list() {
    std::string s;
    for (auto p : kAllScanPurposes) {
        if (!s.empty()) s += ", ";
        s += to_string(p);
    }
    return s;
}

inline ScanPurpose parse_scan_purpose(std::string_view s) {
    for (auto p : kAllScanPurposes)
        if (to_string(p) == s) return p;
    throw UnknownScanType("unknown scan type '" + std::string(s) + "'; valid values: " + scan_purpose_list());
}

/// Per-source numbers a recommendation can cite; built from a
/// CoverageReport or read back from its JSON rendering.
struct SourceSummary {
    SourceTag source;
    std::uint64_t targets = 0;
    std::uint64_t as_count = 0;
    std::string as_pct;
    std::uint64_t prefix_count = 0;
    std::string prefix_pct;
    std::string normalized_as;
    std::uint64_t unique_as_count = 0;
    std::optional<std::string> icmp_response_pct; // share answering icmp6 at any offset
};

inline std::vector<SourceSummary> summarize(const CoverageReport& r,
                                            const std::map<SourceTag, SourceResponse>* responses = nullptr) {
    std::vector<SourceSummary> out;
    for (const auto& s : r.sources) {
        SourceSummary sum{s.source,
                          s.targets,
                          s.ases.size(),
                          r.as_coverage_pct(s),
                          s.prefixes.size(),
                          r.prefix_coverage_pct(s),
                          format_rational(s.normalized_as),
                          s.unique_as_count,
                          std::nullopt};
        if (responses) {
            auto it = responses->find(s.source);
            if (it != responses->end() && it->second.probed > 0) sum.icmp_response_pct = it->second.pct();
        }
        out.push_back(std::move(sum));
    }
    return out;
}

struct RecommendationInputs {
    std::vector<SourceSummary> sources;
    std::optional<ResponseRow> icmp_decay; // icmp6 row of the response table, if probing ran
};

enum class StepRole : std::uint8_t { primary, extension };

constexpr std::string_view to_string(StepRole r) noexcept {
    return r == StepRole::primary ? "primary" : "extension";
}

struct RecommendationStep {
    SourceKind kind;
    StepRole role = StepRole::primary;
    std::string rationale;
    std::vector<std::string> evidence;
};

struct Recommendation {
    ScanPurpose purpose;
    std::vector<RecommendationStep> plan;
    std::vector<std::string> notes;
    std::optional<Seconds> max_probe_delay;
};

namespace detail {

struct PlannedStep {
    SourceKind kind;
    StepRole role;
    std::string_view rationale;
};

inline std::vector<PlannedStep> decision_table(ScanPurpose p) {
    using K = SourceKind;
    using R = StepRole;
    switch (p) {
    case ScanPurpose::internet_structure:
        return {
            {K::passive_flow, R::primary, "broadest AS and announced-prefix coverage"},
            {K::caida_dns_names, R::primary, "router addresses across announced prefixes at low collection cost"},
        };
    case ScanPurpose::security_posture:
        return {
            {K::alexa_list, R::primary, "resolved server names; mostly responsive hosts"},
            {K::reverse_dns, R::primary, "resolved server names; mostly responsive hosts"},
            {K::dns_any, R::primary, "resolved server names; mostly responsive hosts"},
            {K::zone_file, R::primary, "resolved server names; mostly responsive hosts"},
            {K::passive_flow, R::extension, "adds server addresses, prefixes and ASes missing from DNS data"},
        };
    case ScanPurpose::routers:
        return {
            {K::caida_dns_names, R::primary, "router-heavy data set with high coverage for little effort"},
            {K::traceroute, R::extension, "traces towards active-source targets add further router addresses"},
        };
    case ScanPurpose::clients:
        return {
            {K::passive_flow, R::primary, "only passive taps see client addresses; they disappear quickly"},
        };
    case ScanPurpose::active_prefixes:
        return {
            {K::passive_flow, R::primary, "traffic reveals which prefixes and sub-prefixes are in use"},
        };
    }
    return {};
}

/// Largest leading offset whose responsive share stays within 90% of the first offset's.
inline std::optional<Seconds> decay_limited_delay(const ResponseRow& row) {
    if (row.rates.empty() || row.rates.front().probed == 0) return std::nullopt;
    const auto& first = row.rates.front();
    Seconds best = first.offset;
    for (const auto& r : row.rates) {
        if (r.probed == 0) break;
        // r.responsive / r.probed >= 0.9 * first.responsive / first.probed, in integers
        const auto lhs = static_cast<unsigned __int128>(r.responsive) * first.probed * 10;
        const auto rhs = static_cast<unsigned __int128>(first.responsive) * r.probed * 9;
        if (lhs < rhs) break;
        best = r.offset;
    }
    return best;
}

} // namespace detail

/// Default delay before the first client probe when no response data exists (first profile interval).
inline constexpr Seconds kDefaultClientProbeDelay = 60;

/// Orders the available sources for a scan purpose. Sources missing from
/// `available` are dropped with a note; each remaining step carries the
/// computed coverage of every matching source as evidence.
inline Recommendation recommend(ScanPurpose purpose, const std::set<SourceKind>& available,
                                const RecommendationInputs& inputs) {
    Recommendation rec{purpose, {}, {}, std::nullopt};
    for (const auto& step : detail::decision_table(purpose)) {
        if (!available.contains(step.kind)) {
            rec.notes.push_back(std::string(to_string(step.kind)) + " (" + std::string(to_string(step.role)) +
                                ") is not available");
            continue;
        }
        RecommendationStep out{step.kind, step.role, std::string(step.rationale), {}};
        for (const auto& s : inputs.sources) {
            if (s.source.kind != step.kind) continue;
            out.evidence.push_back(s.source.label() + ": " + std::to_string(s.targets) + " targets, AS coverage " +
                                   s.as_pct + "% (" + std::to_string(s.as_count) + " ASes, normalized " +
                                   s.normalized_as + "), prefix coverage " + s.prefix_pct + "% (" +
                                   std::to_string(s.prefix_count) + " prefixes)" +
                                   (s.icmp_response_pct ? ", icmp6 responsive " + *s.icmp_response_pct + "%" : ""));
        }
        rec.plan.push_back(std::move(out));
    }
    if (std::none_of(rec.plan.begin(), rec.plan.end(),
                     [](const RecommendationStep& s) { return s.role == StepRole::primary; }))
        rec.notes.push_back("no primary source for this scan type is available");

    if (purpose == ScanPurpose::internet_structure)
        rec.notes.push_back("prefixes not covered by these sources can be probed with guessed IIDs such as ::1");

    if (purpose == ScanPurpose::clients) {
        std::optional<Seconds> delay;
        if (inputs.icmp_decay) delay = detail::decay_limited_delay(*inputs.icmp_decay);
        rec.max_probe_delay = delay.value_or(kDefaultClientProbeDelay);
        if (inputs.icmp_decay && !inputs.icmp_decay->rates.empty()) {
            const auto& f = inputs.icmp_decay->rates.front();
            const auto& l = inputs.icmp_decay->rates.back();
            rec.notes.push_back("icmp6 responsiveness falls from " + format_pct(f.responsive, f.probed) + "% at " +
                                std::to_string(f.offset) + "s to " + format_pct(l.responsive, l.probed) + "% at " +
                                std::to_string(l.offset) + "s; probe new addresses within " +
                                std::to_string(*rec.max_probe_delay) + "s of observation");
        } else {
            rec.notes.push_back("no response data; probe new addresses within " +
                                std::to_string(*rec.max_probe_delay) + "s of observation");
        }
    }
    return rec;
}

} // namespace hitlist
