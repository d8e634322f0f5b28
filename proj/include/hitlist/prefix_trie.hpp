#pragma once

// Longest-prefix-match structures: a per-bit binary trie over 128-bit keys,
// the CIDR membership set built on it, and the pfx2as routing table.

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/container/flat_set.hpp>

#include "hitlist/addr.hpp"
#include "hitlist/error.hpp"
#include "hitlist/text.hpp"

namespace hitlist {

/// Binary trie keyed by prefix bits. Lookups walk at most 128 nodes.
template <typename Value>
class PrefixTrie {
public:
    struct Match {
        const Prefix& prefix;
        const Value& value;
    };

    PrefixTrie() : nodes_(1) {}

    /// Inserts `value` for `p`, or merges it into the existing entry via `merge(existing, value)`.
    template <typename Merge>
    Value& insert(const Prefix& p, Value value, Merge&& merge) {
        std::uint32_t node = 0;
        for (unsigned i = 0; i < p.length(); ++i) {
            const unsigned b = p.base().bit(i) ? 1u : 0u;
            if (nodes_[node].child[b] == 0) {
                nodes_[node].child[b] = static_cast<std::uint32_t>(nodes_.size());
                nodes_.emplace_back();
            }
            node = nodes_[node].child[b];
        }
        if (nodes_[node].slot == kNoSlot) {
            nodes_[node].slot = static_cast<std::uint32_t>(entries_.size());
            entries_.emplace_back(p, std::move(value));
        } else {
            merge(entries_[nodes_[node].slot].second, std::move(value));
        }
        return entries_[nodes_[node].slot].second;
    }

    Value& insert(const Prefix& p, Value value) {
        return insert(p, std::move(value), [](Value& existing, Value&& v) { existing = std::move(v); });
    }

    const Value* find(const Prefix& p) const noexcept {
        std::uint32_t node = 0;
        for (unsigned i = 0; i < p.length(); ++i) {
            node = nodes_[node].child[p.base().bit(i) ? 1 : 0];
            if (node == 0) return nullptr;
        }
        return nodes_[node].slot == kNoSlot ? nullptr : &entries_[nodes_[node].slot].second;
    }

    std::optional<Match> longest_match(const Address128& a) const noexcept {
        std::uint32_t node = 0;
        std::uint32_t best = nodes_[0].slot;
        for (unsigned i = 0; i < 128; ++i) {
            node = nodes_[node].child[a.bit(i) ? 1 : 0];
            if (node == 0) break;
            if (nodes_[node].slot != kNoSlot) best = nodes_[node].slot;
        }
        if (best == kNoSlot) return std::nullopt;
        return Match{entries_[best].first, entries_[best].second};
    }

    /// True iff any stored prefix contains `a`; stops at the shortest match.
    bool covers(const Address128& a) const noexcept {
        std::uint32_t node = 0;
        if (nodes_[0].slot != kNoSlot) return true;
        for (unsigned i = 0; i < 128; ++i) {
            node = nodes_[node].child[a.bit(i) ? 1 : 0];
            if (node == 0) return false;
            if (nodes_[node].slot != kNoSlot) return true;
        }
        return false;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::span<const std::pair<Prefix, Value>> entries() const noexcept { return entries_; }

private:
    static constexpr std::uint32_t kNoSlot = 0xffffffffu;

    struct Node {
        std::uint32_t child[2] = {0, 0}; // 0 = absent; the root is never a child
        std::uint32_t slot = kNoSlot;
    };

    std::vector<Node> nodes_;
    std::vector<std::pair<Prefix, Value>> entries_;
};

/// A union of CIDR prefixes with address membership.
class PrefixSet {
public:
    PrefixSet() = default;

    PrefixSet(std::initializer_list<Prefix> prefixes) {
        for (const auto& p : prefixes) insert(p);
    }

    void insert(const Prefix& p) { trie_.insert(p, Marker{}); }

    bool contains(const Address128& a) const noexcept { return trie_.covers(a); }
    bool contains_prefix(const Prefix& p) const noexcept { return trie_.find(p) != nullptr; }

    std::size_t size() const noexcept { return trie_.size(); }
    bool empty() const noexcept { return trie_.empty(); }

    std::vector<Prefix> prefixes() const {
        std::vector<Prefix> out;
        out.reserve(trie_.size());
        for (const auto& e : trie_.entries()) out.push_back(e.first);
        return out;
    }

private:
    struct Marker {};
    PrefixTrie<Marker> trie_;
};

using AsNumber = std::uint32_t;
using AsSet = boost::container::flat_set<AsNumber>;

/// Result of an origin lookup: the matched announced prefix and its origin ASes.
struct OriginMatch {
    const Prefix& prefix;
    const AsSet& ases;
};

/// pfx2as mapping with longest-prefix-match lookup.
class RoutingTable {
public:
    /// Adds a mapping; repeated prefixes accumulate their AS sets.
    void add(const Prefix& p, const AsSet& ases) {
        trie_.insert(p, ases, [](AsSet& existing, AsSet&& more) { existing.insert(more.begin(), more.end()); });
        for (AsNumber as : ases) all_ases_.insert(as);
    }

    std::optional<OriginMatch> lookup(const Address128& a) const noexcept {
        auto m = trie_.longest_match(a);
        if (!m) return std::nullopt;
        return OriginMatch{m->prefix, m->value};
    }

    std::size_t prefix_count() const noexcept { return trie_.size(); }
    std::size_t as_count() const noexcept { return all_ases_.size(); }
    bool empty() const noexcept { return trie_.empty(); }
    const AsSet& all_ases() const noexcept { return all_ases_; }
    std::span<const std::pair<Prefix, AsSet>> entries() const noexcept { return trie_.entries(); }

private:
    PrefixTrie<AsSet> trie_;
    AsSet all_ases_;
};

inline std::optional<OriginMatch> lookup_origin(const RoutingTable& table, const Address128& a) noexcept {
    return table.lookup(a);
}

/// One `addr/len` per line; '#' comments and blank lines are skipped.
inline PrefixSet load_cidr_set(std::istream& in) {
    PrefixSet set;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = text::strip_comment(line);
        if (body.empty()) continue;
        try {
            set.insert(parse_prefix(body));
        } catch (const Error& e) {
            throw MalformedCidr(std::string("malformed CIDR '") + std::string(body) + "': " + e.what(), lineno);
        }
    }
    return set;
}

/// CAIDA pfx2as rows: `prefix \t length \t as_spec`, where as_spec separates
/// multi-origin ASes with ',' and AS-set members with '_'.
inline RoutingTable load_pfx2as(std::istream& in) {
    RoutingTable table;
    std::string line;
    std::size_t lineno = 0;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = text::chomp_cr(line);
        if (text::trim(body).empty() || text::trim(body).front() == '#') continue;
        const auto cols = text::split(body, '\t');
        if (cols.size() != 3) throw MalformedRow("expected 3 tab-separated columns", lineno);
        const auto len = text::parse_uint<unsigned>(cols[1], 128);
        if (!len) throw MalformedRow("bad prefix length '" + std::string(cols[1]) + "'", lineno);
        Address128 base;
        try {
            base = parse_address(cols[0]);
        } catch (const MalformedAddress& e) {
            throw MalformedRow(e.what(), lineno);
        }
        AsSet ases;
        for (auto part : text::split(cols[2], ',')) {
            for (auto as_text : text::split(part, '_')) {
                const auto as = text::parse_uint<AsNumber>(as_text, 0xffffffffu);
                if (!as) throw MalformedRow("bad AS number '" + std::string(as_text) + "'", lineno);
                ases.insert(*as);
            }
        }
        table.add(Prefix(base, *len), ases);
        ++rows;
    }
    if (rows == 0) throw EmptyRoutingTable("pfx2as input contains no valid rows");
    return table;
}

} // namespace hitlist
