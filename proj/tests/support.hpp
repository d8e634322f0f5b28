#pragma once

// Generators and brute-force oracles shared by the unit and acceptance tests.
// Oracles deliberately avoid the production lookup structures.

#include <sys/wait.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hitlist/addr.hpp"
#include "hitlist/filter.hpp"
#include "hitlist/prefix_trie.hpp"
#include "hitlist/probe.hpp"
#include "hitlist/rng.hpp"
#include "hitlist/source.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using namespace hitlist;

inline Address128 random_address(Rng& rng) { return {rng.next(), rng.next()}; }

inline Prefix random_prefix(Rng& rng, unsigned min_len, unsigned max_len) {
    return Prefix(random_address(rng), static_cast<unsigned>(rng.between(min_len, max_len)));
}

/// An address inside `p` with random host bits.
inline Address128 address_in(Rng& rng, const Prefix& p) {
    const auto host = ~prefix_mask(p.length()) & random_address(rng);
    return p.base() | host;
}

/// Bit-by-bit containment over the byte representation.
inline bool oracle_contains(const Address128& base, unsigned len, const Address128& a) {
    const auto x = base.to_bytes();
    const auto y = a.to_bytes();
    for (unsigned i = 0; i < len; ++i) {
        const unsigned byte = i / 8, shift = 7 - i % 8;
        if (((x[byte] >> shift) & 1) != ((y[byte] >> shift) & 1)) return false;
    }
    return true;
}

struct RouteEntry {
    Address128 base;
    unsigned len;
    std::set<AsNumber> ases;
};

/// Linear scan for the longest containing entry; ties on length merge AS sets.
inline std::optional<std::pair<unsigned, std::set<AsNumber>>> oracle_lpm(const std::vector<RouteEntry>& table,
                                                                         const Address128& a) {
    std::optional<std::pair<unsigned, std::set<AsNumber>>> best;
    for (const auto& e : table) {
        if (!oracle_contains(e.base, e.len, a)) continue;
        if (!best || e.len > best->first) {
            best = std::pair{e.len, e.ases};
        } else if (e.len == best->first) {
            best->second.insert(e.ases.begin(), e.ases.end());
        }
    }
    return best;
}

inline bool oracle_in_any(const std::vector<Prefix>& set, const Address128& a) {
    return std::any_of(set.begin(), set.end(),
                       [&](const Prefix& p) { return oracle_contains(p.base(), p.length(), a); });
}

inline PrefixSet to_set(const std::vector<Prefix>& v) {
    PrefixSet s;
    for (const auto& p : v) s.insert(p);
    return s;
}

/// A cascade instance kept in plain vectors so the oracle can run on it.
struct CascadeInstance {
    std::vector<Observation> observations;
    std::vector<Prefix> fullbogons, iana, own, announced, blacklist;
    std::vector<RouteEntry> routes;

    FilterConfig config() const {
        FilterConfig c;
        c.fullbogons = to_set(fullbogons);
        c.iana_special = to_set(iana);
        c.own_networks = to_set(own);
        c.announced = to_set(announced);
        c.blacklist = to_set(blacklist);
        for (const auto& r : routes) c.routing.add(Prefix(r.base, r.len), AsSet(r.ases.begin(), r.ases.end()));
        return c;
    }
};

/// Addresses are drawn near a small pool of anchor prefixes so that every
/// stage has something to remove.
inline CascadeInstance random_cascade_instance(Rng& rng, std::size_t n_obs) {
    CascadeInstance inst;
    std::vector<Prefix> anchors;
    for (int i = 0; i < 12; ++i) anchors.push_back(random_prefix(rng, 16, 40));
    auto pick = [&](std::vector<Prefix>& into, int count, unsigned extra_min, unsigned extra_max) {
        for (int i = 0; i < count; ++i) {
            const auto& a = anchors[rng.below(anchors.size())];
            const auto len = std::min(128u, a.length() + static_cast<unsigned>(rng.between(extra_min, extra_max)));
            into.push_back(Prefix(address_in(rng, a), len));
        }
    };
    pick(inst.fullbogons, static_cast<int>(rng.between(0, 2)), 0, 8);
    pick(inst.iana, static_cast<int>(rng.between(0, 2)), 0, 8);
    pick(inst.own, static_cast<int>(rng.between(0, 2)), 2, 10);
    pick(inst.blacklist, static_cast<int>(rng.between(0, 3)), 4, 12);
    std::vector<Prefix> routed;
    pick(routed, static_cast<int>(rng.between(3, 10)), 0, 16);
    for (const auto& p : routed) {
        std::set<AsNumber> ases{static_cast<AsNumber>(rng.between(64496, 64520))};
        if (rng.chance(0.2)) ases.insert(static_cast<AsNumber>(rng.between(64496, 64520)));
        inst.routes.push_back({p.base(), p.length(), ases});
    }
    if (rng.chance(0.8))
        for (const auto& r : inst.routes)
            if (rng.chance(0.7)) inst.announced.push_back(Prefix(r.base, r.len));

    std::vector<Address128> pool;
    for (std::size_t i = 0; i < n_obs / 2 + 1; ++i) {
        const auto& a = anchors[rng.below(anchors.size())];
        pool.push_back(rng.chance(0.05) ? random_address(rng) : address_in(rng, a));
    }
    const SourceTag tags[] = {{SourceKind::passive_flow, "a"}, {SourceKind::zone_file, "b"}};
    for (std::size_t i = 0; i < n_obs; ++i) {
        Observation o;
        o.address = pool[rng.below(pool.size())];
        o.timestamp = rng.between(0, 1000);
        o.source = tags[rng.below(2)];
        inst.observations.push_back(o);
    }
    return inst;
}

/// Sequential set algebra: |T ∩ S| for drop stages, |T \ W| for whitelists.
inline std::pair<std::vector<std::uint64_t>, std::set<Address128>> oracle_cascade(const CascadeInstance& inst) {
    std::set<Address128> t;
    for (const auto& o : inst.observations) t.insert(o.address);
    std::vector<std::uint64_t> removed;
    removed.push_back(inst.observations.size() - t.size());
    auto drop_if = [&](auto pred) {
        std::uint64_t n = 0;
        for (auto it = t.begin(); it != t.end();) {
            if (pred(*it)) {
                it = t.erase(it);
                ++n;
            } else {
                ++it;
            }
        }
        removed.push_back(n);
    };
    drop_if([&](const Address128& a) { return oracle_in_any(inst.fullbogons, a); });
    drop_if([&](const Address128& a) { return oracle_in_any(inst.iana, a); });
    drop_if([&](const Address128& a) { return oracle_in_any(inst.own, a); });
    drop_if([&](const Address128& a) { return !oracle_lpm(inst.routes, a); });
    drop_if([&](const Address128& a) { return !inst.announced.empty() && !oracle_in_any(inst.announced, a); });
    drop_if([&](const Address128& a) { return oracle_in_any(inst.blacklist, a); });
    return {removed, t};
}

/// Direct recount of (class, offset) -> (responsive, probed).
inline std::map<std::pair<std::string, Seconds>, std::pair<std::uint64_t, std::uint64_t>>
oracle_recount(const ResponseMatrix& m) {
    std::map<std::pair<std::string, Seconds>, std::pair<std::uint64_t, std::uint64_t>> out;
    for (const auto& c : m.cells) {
        auto& v = out[{m.scans[c.scan].label(), c.offset}];
        ++v.second;
        if (c.reply != ReplyKind::none && c.reply != ReplyKind::icmp_error && c.reply != ReplyKind::rst) ++v.first;
    }
    return out;
}

/// Targets answering some scan at every interval <= window.
inline std::set<Address128> oracle_stable_core(const ResponseMatrix& m, Seconds window) {
    std::set<Address128> targets;
    for (const auto& c : m.cells) targets.insert(c.target);
    std::set<Address128> out;
    for (const auto& t : targets) {
        bool all = true;
        for (auto off : m.intervals) {
            if (off > window) continue;
            bool any = false;
            for (const auto& c : m.cells)
                if (c.target == t && c.offset == off && c.responsive) any = true;
            all = all && any;
        }
        if (all) out.insert(t);
    }
    return out;
}

class TempDir {
public:
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "hitlist-test-XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& s) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << s;
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs a shell command line, capturing stdout and stderr.
inline RunResult run(const std::string& cmd, const fs::path& scratch) {
    const auto o = scratch / "stdout.txt";
    const auto e = scratch / "stderr.txt";
    const int status = std::system((cmd + " >" + o.string() + " 2>" + e.string()).c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(o);
    r.err = read_file(e);
    return r;
}

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

} // namespace testsupport
