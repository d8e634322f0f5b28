#pragma once

// Source ingestion: flow records, address lists and traceroute hop dumps
// become source-tagged observations, which merge() folds into a
// deduplicated per-address TargetSet.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <boost/container/flat_set.hpp>

#include "hitlist/addr.hpp"
#include "hitlist/error.hpp"
#include "hitlist/prefix_trie.hpp"
#include "hitlist/text.hpp"

namespace hitlist {

using Timestamp = std::int64_t; // seconds since the epoch, UTC

enum class SourceKind : std::uint8_t {
    passive_flow = 0,
    alexa_list = 1,
    reverse_dns = 2,
    dns_any = 3,
    zone_file = 4,
    caida_dns_names = 5,
    traceroute = 6,
};

inline constexpr std::array<SourceKind, 7> kAllSourceKinds{
    SourceKind::passive_flow, SourceKind::alexa_list,      SourceKind::reverse_dns, SourceKind::dns_any,
    SourceKind::zone_file,    SourceKind::caida_dns_names, SourceKind::traceroute,
};

constexpr std::string_view to_string(SourceKind k) noexcept {
    switch (k) {
    case SourceKind::passive_flow: return "passive_flow";
    case SourceKind::alexa_list: return "alexa";
    case SourceKind::reverse_dns: return "rdns";
    case SourceKind::dns_any: return "dns_any";
    case SourceKind::zone_file: return "zone_file";
    case SourceKind::caida_dns_names: return "caida_dns_names";
    case SourceKind::traceroute: return "traceroute";
    }
    return "unknown";
}

inline std::optional<SourceKind> parse_source_kind(std::string_view s) noexcept {
    for (auto k : kAllSourceKinds)
        if (to_string(k) == s) return k;
    return std::nullopt;
}

/// Active sources in the sense of the hitlist taxonomy: static files plus DNS work.
constexpr bool is_active(SourceKind k) noexcept {
    return k == SourceKind::alexa_list || k == SourceKind::reverse_dns || k == SourceKind::dns_any ||
           k == SourceKind::zone_file;
}

struct SourceTag {
    SourceKind kind = SourceKind::passive_flow;
    std::string name;

    std::string label() const { return std::string(to_string(kind)) + ":" + name; }

    auto operator<=>(const SourceTag&) const = default;
    bool operator==(const SourceTag&) const = default;
};

enum class Transport : std::uint8_t { tcp = 0, udp = 1, icmp6 = 2, unknown = 3 };

constexpr std::string_view to_string(Transport t) noexcept {
    switch (t) {
    case Transport::tcp: return "tcp";
    case Transport::udp: return "udp";
    case Transport::icmp6: return "icmp6";
    case Transport::unknown: return "unknown";
    }
    return "unknown";
}

/// (transport, port) as seen in traffic; icmp6/unknown carry no port.
struct PortProtocol {
    Transport transport = Transport::unknown;
    std::optional<std::uint16_t> port;

    /// "tcp443", "udp53", "icmp6"
    std::string label() const {
        std::string s(to_string(transport));
        if (port) s += std::to_string(*port);
        return s;
    }

    auto operator<=>(const PortProtocol&) const = default;
    bool operator==(const PortProtocol&) const = default;
};

inline std::optional<PortProtocol> parse_port_protocol(std::string_view s) noexcept {
    if (s == "icmp6") return PortProtocol{Transport::icmp6, std::nullopt};
    for (auto t : {Transport::tcp, Transport::udp}) {
        const auto name = to_string(t);
        if (s.starts_with(name)) {
            auto port = text::parse_uint<std::uint16_t>(s.substr(name.size()), 65535);
            if (!port) return std::nullopt;
            return PortProtocol{t, port};
        }
    }
    return std::nullopt;
}

struct Observation {
    Address128 address;
    Timestamp timestamp = 0;
    Transport transport = Transport::unknown;
    std::optional<std::uint16_t> port;
    SourceTag source;

    PortProtocol port_protocol() const { return {transport, port}; }
};

using ObservationList = std::vector<Observation>;

struct TargetEntry {
    Address128 address;
    Timestamp first_seen = 0;
    Timestamp last_seen = 0;
    boost::container::flat_set<PortProtocol> port_protocols;
    boost::container::flat_set<SourceTag> sources;
    std::uint64_t observation_count = 0;

    bool operator==(const TargetEntry&) const = default;
};

/// Deduplicated per-address aggregate, kept sorted by address.
class TargetSet {
public:
    TargetSet() = default;

    /// `entries` must be sorted by address with no duplicates.
    static TargetSet from_sorted(std::vector<TargetEntry> entries) {
        TargetSet t;
        t.entries_ = std::move(entries);
        return t;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::span<const TargetEntry> entries() const noexcept { return entries_; }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    const TargetEntry* find(const Address128& a) const noexcept {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), a,
                                   [](const TargetEntry& e, const Address128& x) { return e.address < x; });
        return it != entries_.end() && it->address == a ? &*it : nullptr;
    }

    bool contains(const Address128& a) const noexcept { return find(a) != nullptr; }

    /// Sum of observation counts over all entries.
    std::uint64_t total_observations() const noexcept {
        std::uint64_t n = 0;
        for (const auto& e : entries_) n += e.observation_count;
        return n;
    }

    /// Entries seen by the given source.
    TargetSet restrict_to(const SourceTag& tag) const {
        std::vector<TargetEntry> out;
        for (const auto& e : entries_)
            if (e.sources.contains(tag)) out.push_back(e);
        return from_sorted(std::move(out));
    }

    std::vector<SourceTag> source_tags() const {
        boost::container::flat_set<SourceTag> tags;
        for (const auto& e : entries_) tags.insert(e.sources.begin(), e.sources.end());
        return {tags.begin(), tags.end()};
    }

    bool operator==(const TargetSet&) const = default;

private:
    std::vector<TargetEntry> entries_;
};

struct FlowDropReport {
    std::uint64_t rows = 0;            // data rows read, excluding the header
    std::uint64_t malformed_rows = 0;
    std::uint64_t self_filtered_rows = 0;      // rows with at least one endpoint in a self prefix
    std::uint64_t self_filtered_endpoints = 0;

    bool operator==(const FlowDropReport&) const = default;
};

struct FlowIngestResult {
    ObservationList observations;
    FlowDropReport drops;
};

inline constexpr std::string_view kFlowHeader = "ts,src,dst,proto,port";

namespace detail {

inline bool in_any(std::span<const Prefix> prefixes, const Address128& a) noexcept {
    return std::any_of(prefixes.begin(), prefixes.end(), [&](const Prefix& p) { return p.contains(a); });
}

inline std::optional<Address128> try_parse_address(std::string_view s) noexcept {
    try {
        return parse_address(s);
    } catch (const MalformedAddress&) {
        return std::nullopt;
    }
}

} // namespace detail

/// Reads flow CSV (`ts,src,dst,proto,port`). Both endpoints become
/// observations carrying the row's (proto, port) unless they fall inside a
/// self prefix. Malformed rows are counted and skipped; a wrong header is fatal.
inline FlowIngestResult ingest_flow_records(std::istream& in, const SourceTag& tag,
                                            std::span<const Prefix> self_prefixes = {}) {
    FlowIngestResult result;
    std::string line;
    if (!std::getline(in, line)) return result;
    if (text::chomp_cr(line) != kFlowHeader)
        throw FatalFormat("flow CSV header must be '" + std::string(kFlowHeader) + "', got '" + line + "'");

    PrefixSet self;
    for (const auto& p : self_prefixes) self.insert(p);

    while (std::getline(in, line)) {
        const auto row = text::chomp_cr(line);
        if (row.empty()) continue;
        ++result.drops.rows;
        const auto cols = text::split(row, ',');
        if (cols.size() != 5) {
            ++result.drops.malformed_rows;
            continue;
        }
        const auto ts = text::parse_int(cols[0]);
        const auto src = detail::try_parse_address(cols[1]);
        const auto dst = detail::try_parse_address(cols[2]);
        std::optional<Transport> transport;
        if (cols[3] == "tcp") transport = Transport::tcp;
        else if (cols[3] == "udp") transport = Transport::udp;
        else if (cols[3] == "icmp6") transport = Transport::icmp6;
        std::optional<std::uint16_t> port;
        bool port_ok = false;
        if (transport == Transport::icmp6) {
            port_ok = cols[4].empty();
        } else if (transport) {
            port = text::parse_uint<std::uint16_t>(cols[4], 65535);
            port_ok = port.has_value();
        }
        if (!ts || !src || !dst || !transport || !port_ok) {
            ++result.drops.malformed_rows;
            continue;
        }
        bool dropped = false;
        for (const auto& endpoint : {*src, *dst}) {
            if (self.contains(endpoint)) {
                ++result.drops.self_filtered_endpoints;
                dropped = true;
                continue;
            }
            result.observations.push_back(Observation{endpoint, *ts, *transport, port, tag});
        }
        if (dropped) ++result.drops.self_filtered_rows;
    }
    return result;
}

struct ListIngestResult {
    ObservationList observations;
    std::uint64_t malformed_lines = 0;
};

/// One address per line; '#' comments and blank lines are skipped. Every
/// observation gets transport=unknown and the given ingestion timestamp.
/// Duplicates are kept; merge() removes them.
inline ListIngestResult ingest_address_list(std::istream& in, const SourceTag& tag, Timestamp ingested_at) {
    ListIngestResult result;
    std::string line;
    while (std::getline(in, line)) {
        const auto body = text::strip_comment(line);
        if (body.empty()) continue;
        if (auto a = detail::try_parse_address(body))
            result.observations.push_back(Observation{*a, ingested_at, Transport::unknown, std::nullopt, tag});
        else
            ++result.malformed_lines;
    }
    return result;
}

struct HopIngestResult {
    ObservationList observations;
    std::uint64_t new_count = 0; // distinct hop addresses absent from the known targets
    std::uint64_t malformed_lines = 0;
};

/// Hop dump: one router address per line. `new_count` mirrors the
/// "new IPs only" accounting against the targets that were tracerouted.
inline HopIngestResult ingest_traceroute_hops(std::istream& in, const SourceTag& tag, const TargetSet& known,
                                              Timestamp ingested_at) {
    HopIngestResult r;
    auto list = ingest_address_list(in, tag, ingested_at);
    r.observations = std::move(list.observations);
    r.malformed_lines = list.malformed_lines;
    std::unordered_set<Address128> fresh;
    for (const auto& o : r.observations)
        if (!known.contains(o.address)) fresh.insert(o.address);
    r.new_count = fresh.size();
    return r;
}

/// Folds observation lists into a TargetSet. The result depends only on the
/// multiset of observations, never on their order.
inline TargetSet merge(std::span<const ObservationList> lists) {
    std::vector<const Observation*> all;
    std::size_t total = 0;
    for (const auto& l : lists) total += l.size();
    all.reserve(total);
    for (const auto& l : lists)
        for (const auto& o : l) all.push_back(&o);
    std::sort(all.begin(), all.end(),
              [](const Observation* a, const Observation* b) { return a->address < b->address; });

    std::vector<TargetEntry> entries;
    for (std::size_t i = 0; i < all.size();) {
        TargetEntry e;
        e.address = all[i]->address;
        e.first_seen = all[i]->timestamp;
        e.last_seen = all[i]->timestamp;
        std::vector<PortProtocol> pps;
        std::vector<SourceTag> tags;
        std::size_t j = i;
        for (; j < all.size() && all[j]->address == e.address; ++j) {
            const auto& o = *all[j];
            e.first_seen = std::min(e.first_seen, o.timestamp);
            e.last_seen = std::max(e.last_seen, o.timestamp);
            if (o.transport != Transport::unknown) pps.push_back(o.port_protocol());
            tags.push_back(o.source);
        }
        e.observation_count = j - i;
        e.port_protocols.insert(pps.begin(), pps.end());
        e.sources.insert(tags.begin(), tags.end());
        entries.push_back(std::move(e));
        i = j;
    }
    return TargetSet::from_sorted(std::move(entries));
}

inline TargetSet merge(std::initializer_list<ObservationList> lists) {
    return merge(std::span<const ObservationList>(lists.begin(), lists.size()));
}

/// Keeps every n-th item (1-in-n systematic count-based sampling). Only used
/// to produce sampled fixtures; real inputs are taken as already sampled.
class SystematicSampler {
public:
    explicit SystematicSampler(std::uint64_t n) : n_(n == 0 ? 1 : n) {}

    bool keep() noexcept { return (counter_++ % n_) == 0; }

private:
    std::uint64_t n_;
    std::uint64_t counter_ = 0;
};

struct HostnameRecord {
    std::string name;
    SourceTag origin;
};

/// Non-empty, dot-separated labels of 1..63 bytes, at most 253 bytes overall
/// (a single trailing dot is tolerated).
inline bool valid_hostname(std::string_view name) noexcept {
    if (!name.empty() && name.back() == '.') name.remove_suffix(1);
    if (name.empty() || name.size() > 253) return false;
    std::size_t label = 0;
    for (char c : name) {
        if (c == '.') {
            if (label == 0) return false;
            label = 0;
            continue;
        }
        if (static_cast<unsigned char>(c) <= ' ') return false;
        if (++label > 63) return false;
    }
    return label > 0;
}

/// One DNS name per line; invalid names are counted.
struct HostnameListResult {
    std::vector<HostnameRecord> records;
    std::uint64_t invalid_lines = 0;
};

inline HostnameListResult read_hostname_list(std::istream& in, const SourceTag& tag) {
    HostnameListResult r;
    std::string line;
    while (std::getline(in, line)) {
        const auto body = text::strip_comment(line);
        if (body.empty()) continue;
        if (valid_hostname(body))
            r.records.push_back(HostnameRecord{std::string(body), tag});
        else
            ++r.invalid_lines;
    }
    return r;
}

} // namespace hitlist
