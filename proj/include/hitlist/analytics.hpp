#pragma once

// Derived statistics over target sets, observations and response matrices:
// AS/prefix coverage with normalized weights, runup series, port breakdowns,
// IID profiles, Hamming histograms, prefix agility, stable cores and
// server coverage.

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <boost/container/flat_set.hpp>

#include "hitlist/addr.hpp"
#include "hitlist/error.hpp"
#include "hitlist/format.hpp"
#include "hitlist/prefix_trie.hpp"
#include "hitlist/probe.hpp"
#include "hitlist/source.hpp"
#include "hitlist/text.hpp"

namespace hitlist {

using PrefixSetSorted = boost::container::flat_set<Prefix>;

struct SourceCoverage {
    SourceTag source;
    std::uint64_t targets = 0;
    AsSet ases;
    PrefixSetSorted prefixes;
    std::uint64_t unique_as_count = 0;
    std::uint64_t unique_prefix_count = 0;
    Rational normalized_as{0};
    Rational normalized_prefix{0};
};

struct CoverageReport {
    std::uint64_t announced_as_total = 0;     // distinct ASes in the routing table
    std::uint64_t announced_prefix_total = 0; // distinct prefixes in the routing table
    std::vector<SourceCoverage> sources;      // ordered by source tag
    std::uint64_t combined_targets = 0;
    std::uint64_t combined_as_count = 0;
    std::uint64_t combined_prefix_count = 0;

    std::string as_coverage_pct(const SourceCoverage& s) const { return format_pct(s.ases.size(), announced_as_total); }
    std::string prefix_coverage_pct(const SourceCoverage& s) const {
        return format_pct(s.prefixes.size(), announced_prefix_total);
    }
    std::string combined_as_pct() const { return format_pct(combined_as_count, announced_as_total); }
    std::string combined_prefix_pct() const { return format_pct(combined_prefix_count, announced_prefix_total); }

    const SourceCoverage* find(const SourceTag& tag) const {
        for (const auto& s : sources)
            if (s.source == tag) return &s;
        return nullptr;
    }
};

/// Each address is attributed to the origin ASes and the matched prefix of
/// its longest routing match; unmatched addresses count only as targets.
/// Every AS (prefix) carries weight 1/k split across the k sources that
/// contain it, so the normalized values sum to the size of the union.
inline CoverageReport coverage(const std::map<SourceTag, TargetSet>& sets, const RoutingTable& routing) {
    if (routing.empty()) throw MissingRoutingTable("coverage needs a loaded routing table");
    CoverageReport r;
    r.announced_as_total = routing.as_count();
    r.announced_prefix_total = routing.prefix_count();

    std::unordered_set<Address128> all_targets;
    for (const auto& [tag, set] : sets) {
        SourceCoverage s;
        s.source = tag;
        s.targets = set.size();
        std::vector<AsNumber> ases;
        std::vector<Prefix> prefixes;
        for (const auto& e : set) {
            all_targets.insert(e.address);
            if (auto m = routing.lookup(e.address)) {
                ases.insert(ases.end(), m->ases.begin(), m->ases.end());
                prefixes.push_back(m->prefix);
            }
        }
        s.ases.insert(ases.begin(), ases.end());
        s.prefixes.insert(prefixes.begin(), prefixes.end());
        r.sources.push_back(std::move(s));
    }
    r.combined_targets = all_targets.size();

    std::map<AsNumber, std::int64_t> as_k;
    std::map<Prefix, std::int64_t> prefix_k;
    for (const auto& s : r.sources) {
        for (auto as : s.ases) ++as_k[as];
        for (const auto& p : s.prefixes) ++prefix_k[p];
    }
    r.combined_as_count = as_k.size();
    r.combined_prefix_count = prefix_k.size();
    for (auto& s : r.sources) {
        for (auto as : s.ases) {
            const auto k = as_k[as];
            s.normalized_as += Rational(1, k);
            if (k == 1) ++s.unique_as_count;
        }
        for (const auto& p : s.prefixes) {
            const auto k = prefix_k[p];
            s.normalized_prefix += Rational(1, k);
            if (k == 1) ++s.unique_prefix_count;
        }
    }
    return r;
}

/// Splits a merged set by source tag (an address seen by two sources lands in both).
inline std::map<SourceTag, TargetSet> split_by_source(const TargetSet& merged) {
    std::map<SourceTag, std::vector<TargetEntry>> parts;
    for (const auto& e : merged)
        for (const auto& tag : e.sources) parts[tag].push_back(e);
    std::map<SourceTag, TargetSet> out;
    for (auto& [tag, entries] : parts) out.emplace(tag, TargetSet::from_sorted(std::move(entries)));
    return out;
}

struct RunupPoint {
    Timestamp bucket_start = 0;
    std::uint64_t new_ips = 0;
    std::uint64_t new_ases = 0;
    std::uint64_t new_prefixes = 0;
    std::uint64_t total_ips = 0;
    std::uint64_t total_ases = 0;
    std::uint64_t total_prefixes = 0;

    bool operator==(const RunupPoint&) const = default;
};

namespace detail {
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
    const auto q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}
} // namespace detail

/// Cumulative first-sightings of addresses, origin ASes and announced
/// prefixes per time bucket (epoch-aligned). Every bucket between the first
/// and last observation is present, including empty ones.
inline std::vector<RunupPoint> runup(std::span<const Observation> observations, const RoutingTable& routing,
                                     Seconds bucket = 86400) {
    if (bucket <= 0) throw Error("runup bucket must be positive");
    std::vector<RunupPoint> series;
    if (observations.empty()) return series;

    std::vector<const Observation*> sorted;
    sorted.reserve(observations.size());
    for (const auto& o : observations) sorted.push_back(&o);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Observation* a, const Observation* b) { return a->timestamp < b->timestamp; });

    std::unordered_set<Address128> ips;
    std::unordered_set<AsNumber> ases;
    std::set<Prefix> prefix_keys;
    const auto first = detail::floor_div(sorted.front()->timestamp, bucket);
    const auto last = detail::floor_div(sorted.back()->timestamp, bucket);
    if (last - first > 10'000'000) throw Error("runup would span more than 10^7 buckets; check timestamps");
    std::size_t i = 0;
    for (auto b = first; b <= last; ++b) {
        RunupPoint p;
        p.bucket_start = b * bucket;
        for (; i < sorted.size() && detail::floor_div(sorted[i]->timestamp, bucket) == b; ++i) {
            const auto& o = *sorted[i];
            if (!ips.insert(o.address).second) continue;
            ++p.new_ips;
            if (auto m = routing.lookup(o.address)) {
                for (auto as : m->ases)
                    if (ases.insert(as).second) ++p.new_ases;
                if (prefix_keys.insert(m->prefix).second) ++p.new_prefixes;
            }
        }
        p.total_ips = ips.size();
        p.total_ases = ases.size();
        p.total_prefixes = prefix_keys.size();
        series.push_back(p);
    }
    return series;
}

struct PortShare {
    PortProtocol port_protocol;
    std::uint64_t count = 0;
    std::uint64_t total = 0; // flow observations with a known transport

    std::string pct() const { return format_pct(count, total); }
    bool operator==(const PortShare&) const = default;
};

/// Top-n (transport, port) combinations by observation count; ties go to
/// the smaller (transport, port). Observations with unknown transport are ignored.
inline std::vector<PortShare> port_breakdown(std::span<const Observation> flows, std::size_t n) {
    std::map<PortProtocol, std::uint64_t> counts;
    std::uint64_t total = 0;
    for (const auto& o : flows) {
        if (o.transport == Transport::unknown) continue;
        ++counts[o.port_protocol()];
        ++total;
    }
    std::vector<PortShare> ranked;
    for (const auto& [pp, c] : counts) ranked.push_back(PortShare{pp, c, total});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const PortShare& a, const PortShare& b) { return a.count > b.count; });
    if (ranked.size() > n) ranked.resize(n);
    return ranked;
}

/// IEEE OUI registry: "XX-XX-XX   (hex)\tVendor" lines, everything else ignored.
class OuiDatabase {
public:
    static OuiDatabase load(std::istream& in) {
        OuiDatabase db;
        std::string line;
        while (std::getline(in, line)) {
            const auto body = text::trim(line);
            if (body.size() < 8 || body[2] != '-' || body[5] != '-') continue;
            std::uint32_t oui = 0;
            bool ok = true;
            for (std::size_t i : {0u, 1u, 3u, 4u, 6u, 7u}) {
                const int v = detail::hex_value(body[i]);
                if (v < 0) {
                    ok = false;
                    break;
                }
                oui = (oui << 4) | static_cast<std::uint32_t>(v);
            }
            if (!ok) continue;
            auto rest = text::trim(body.substr(8));
            if (!rest.starts_with("(hex)")) continue;
            const auto vendor = text::trim(rest.substr(5));
            if (vendor.empty()) continue;
            db.vendors_.emplace(oui, std::string(vendor));
        }
        return db;
    }

    void add(std::uint32_t oui, std::string vendor) { vendors_[oui] = std::move(vendor); }

    /// Looks up the recovered MAC (u/l bit already restored by eui64_decode).
    std::optional<std::string_view> vendor(const Mac48& mac) const {
        auto it = vendors_.find(mac.oui());
        if (it == vendors_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t size() const noexcept { return vendors_.size(); }

private:
    std::unordered_map<std::uint32_t, std::string> vendors_;
};

struct VendorShare {
    std::string vendor;
    std::uint64_t count = 0;

    bool operator==(const VendorShare&) const = default;
};

struct IidProfile {
    SourceTag source;
    std::uint64_t total = 0;
    std::array<std::uint64_t, 4> counts{}; // indexed by IidKind
    std::vector<VendorShare> vendors;      // EUI-64 population only, most common first

    std::uint64_t count(IidKind k) const noexcept { return counts[static_cast<std::size_t>(k)]; }
    std::string eui64_pct() const { return format_pct(count(IidKind::eui64), total); }
    std::string vendor_pct(const VendorShare& v) const { return format_pct(v.count, count(IidKind::eui64)); }
};

inline constexpr std::string_view kUnknownVendor = "unknown";

inline IidProfile iid_profile(const SourceTag& tag, const TargetSet& targets, const OuiDatabase& oui,
                              const ClassifierConfig& cfg = {}) {
    cfg.validate();
    IidProfile p;
    p.source = tag;
    p.total = targets.size();
    std::map<std::string, std::uint64_t> vendors;
    for (const auto& e : targets) {
        const auto cls = classify_iid(Iid{e.address.lo}, cfg);
        ++p.counts[static_cast<std::size_t>(cls.kind)];
        if (cls.mac) {
            auto v = oui.vendor(*cls.mac);
            ++vendors[v ? std::string(*v) : std::string(kUnknownVendor)];
        }
    }
    for (auto& [name, c] : vendors) p.vendors.push_back(VendorShare{name, c});
    std::stable_sort(p.vendors.begin(), p.vendors.end(),
                     [](const VendorShare& a, const VendorShare& b) { return a.count > b.count; });
    return p;
}

inline std::vector<IidProfile> iid_profiles(const std::map<SourceTag, TargetSet>& sets, const OuiDatabase& oui,
                                            const ClassifierConfig& cfg = {}) {
    std::vector<IidProfile> out;
    for (const auto& [tag, set] : sets) out.push_back(iid_profile(tag, set, oui, cfg));
    return out;
}

struct HammingHistogram {
    static constexpr double kReferenceMean = 31.5;
    static constexpr double kReferenceVariance = 15.75;

    std::array<std::uint64_t, 65> bins{};
    std::uint64_t count = 0;
    std::optional<double> mean;
    std::optional<double> variance; // population variance
};

inline HammingHistogram hamming_histogram(std::span<const Iid> iids) {
    HammingHistogram h;
    for (auto iid : iids) ++h.bins[hamming_weight(iid)];
    h.count = iids.size();
    if (h.count == 0) return h;
    unsigned __int128 s1 = 0, s2 = 0;
    for (std::uint64_t w = 0; w <= 64; ++w) {
        s1 += static_cast<unsigned __int128>(w) * h.bins[w];
        s2 += static_cast<unsigned __int128>(w * w) * h.bins[w];
    }
    const double n = static_cast<double>(h.count);
    const double mean = static_cast<double>(s1) / n;
    h.mean = mean;
    h.variance = static_cast<double>(s2) / n - mean * mean;
    return h;
}

struct AgilityReport {
    std::uint64_t iid_count = 0;
    std::uint64_t agile_count = 0; // IIDs seen under two or more /64s

    double agile_fraction() const noexcept {
        return iid_count == 0 ? 0.0 : static_cast<double>(agile_count) / static_cast<double>(iid_count);
    }
    std::string agile_pct() const { return format_pct(agile_count, iid_count); }
    bool operator==(const AgilityReport&) const = default;
};

/// Groups addresses by IID and counts IIDs that appear in more than one /64.
inline AgilityReport prefix_agility(std::span<const Address128> addresses, bool eui64_only = false) {
    std::unordered_map<std::uint64_t, std::uint64_t> first_prefix;
    std::unordered_set<std::uint64_t> agile;
    for (const auto& a : addresses) {
        if (eui64_only && !eui64_decode(Iid{a.lo})) continue;
        auto [it, fresh] = first_prefix.emplace(a.lo, a.hi);
        if (!fresh && it->second != a.hi) agile.insert(a.lo);
    }
    return AgilityReport{first_prefix.size(), agile.size()};
}

inline AgilityReport prefix_agility(std::span<const Observation> observations, bool eui64_only = false) {
    std::vector<Address128> addrs;
    addrs.reserve(observations.size());
    for (const auto& o : observations) addrs.push_back(o.address);
    return prefix_agility(std::span<const Address128>(addrs), eui64_only);
}

/// Targets that answered some scan at every planned offset up to `window`,
/// sorted by canonical text.
inline std::vector<Address128> stable_core(const ResponseMatrix& m, Seconds window = 604800) {
    if (m.intervals.empty() || m.intervals.back() < window)
        throw WindowExceedsMatrix("stable-core window of " + std::to_string(window) +
                                  "s exceeds the probed offsets");
    std::vector<Seconds> planned;
    for (auto off : m.intervals)
        if (off <= window) planned.push_back(off);

    std::map<Address128, std::map<Seconds, bool>> seen;
    for (const auto& c : m.cells) {
        if (c.offset > window) continue;
        auto& slot = seen[c.target][c.offset];
        slot = slot || c.responsive;
    }
    std::vector<std::pair<std::string, Address128>> core;
    for (const auto& [addr, offsets] : seen) {
        if (planned.empty()) break;
        const bool all = std::all_of(planned.begin(), planned.end(), [&](Seconds off) {
            auto it = offsets.find(off);
            return it != offsets.end() && it->second;
        });
        if (all) core.emplace_back(canonical_text(addr), addr);
    }
    std::sort(core.begin(), core.end());
    std::vector<Address128> out;
    out.reserve(core.size());
    for (auto& [text, a] : core) out.push_back(a);
    return out;
}

inline const boost::container::flat_set<PortProtocol>& default_server_ports() {
    static const boost::container::flat_set<PortProtocol> ports{
        {Transport::tcp, 80}, {Transport::tcp, 443}, {Transport::udp, 443}};
    return ports;
}

struct ServerCoverage {
    std::uint64_t server_targets = 0;
    std::uint64_t total_targets = 0;
    std::uint64_t server_as_count = 0;
    std::uint64_t total_as_count = 0;
    std::uint64_t server_prefix_count = 0;
    std::uint64_t total_prefix_count = 0;

    std::string as_pct() const { return format_pct(server_as_count, total_as_count); }
    std::string prefix_pct() const { return format_pct(server_prefix_count, total_prefix_count); }
    bool operator==(const ServerCoverage&) const = default;
};

/// AS/prefix coverage of the targets seen on server ports, relative to the
/// coverage of the whole set.
inline ServerCoverage server_coverage(const TargetSet& targets, const RoutingTable& routing,
                                      const boost::container::flat_set<PortProtocol>& server_ports =
                                          default_server_ports()) {
    ServerCoverage s;
    AsSet all_as, server_as;
    PrefixSetSorted all_prefix, server_prefix;
    for (const auto& e : targets) {
        const bool server = std::any_of(e.port_protocols.begin(), e.port_protocols.end(),
                                        [&](const PortProtocol& pp) { return server_ports.contains(pp); });
        ++s.total_targets;
        if (server) ++s.server_targets;
        auto m = routing.lookup(e.address);
        if (!m) continue;
        all_as.insert(m->ases.begin(), m->ases.end());
        all_prefix.insert(m->prefix);
        if (server) {
            server_as.insert(m->ases.begin(), m->ases.end());
            server_prefix.insert(m->prefix);
        }
    }
    s.total_as_count = all_as.size();
    s.server_as_count = server_as.size();
    s.total_prefix_count = all_prefix.size();
    s.server_prefix_count = server_prefix.size();
    return s;
}

struct SourceResponse {
    std::uint64_t probed = 0;     // source targets that received icmp6 probes
    std::uint64_t responsive = 0; // of those, answering icmp6 at any offset

    std::string pct() const { return format_pct(responsive, probed); }
    bool operator==(const SourceResponse&) const = default;
};

/// ICMPv6 responsiveness (any offset) of each source's targets.
inline std::map<SourceTag, SourceResponse> icmp_response_by_source(const std::map<SourceTag, TargetSet>& sets,
                                                                   const ResponseMatrix& m) {
    std::map<Address128, bool> icmp;
    for (const auto& c : m.cells) {
        if (m.scans[c.scan].kind() != ScanKind::icmp6) continue;
        auto& ok = icmp[c.target];
        ok = ok || c.responsive;
    }
    std::map<SourceTag, SourceResponse> out;
    for (const auto& [tag, set] : sets) {
        auto& r = out[tag];
        for (const auto& e : set) {
            auto it = icmp.find(e.address);
            if (it == icmp.end()) continue;
            ++r.probed;
            if (it->second) ++r.responsive;
        }
    }
    return out;
}

} // namespace hitlist
