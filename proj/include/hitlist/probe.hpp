#pragma once

// Interval probing: plans of (target, scan, offset) tasks, a rate-limited
// executor driven by an injected clock, the seeded responder simulation,
// and the response-rate tables computed from the resulting matrix.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/container/flat_set.hpp>

#include "hitlist/addr.hpp"
#include "hitlist/error.hpp"
#include "hitlist/prefix_trie.hpp"
#include "hitlist/source.hpp"

namespace hitlist {

using Seconds = std::int64_t;
using Micros = std::int64_t;

inline constexpr Micros kMicrosPerSecond = 1'000'000;

enum class ScanKind : std::uint8_t { icmp6 = 0, tcp = 1, udp = 2 };

/// A probe type: ICMPv6 echo, TCP SYN to a port, or a UDP datagram with payload.
class ScanType {
public:
    static ScanType icmp6() { return ScanType(ScanKind::icmp6, 0, {}); }
    static ScanType tcp(std::uint16_t port) { return ScanType(ScanKind::tcp, port, {}); }
    static ScanType udp(std::uint16_t port, std::vector<std::uint8_t> payload = {}) {
        return ScanType(ScanKind::udp, port, std::move(payload));
    }

    ScanKind kind() const noexcept { return kind_; }
    std::uint16_t port() const noexcept { return port_; }
    const std::vector<std::uint8_t>& payload() const noexcept { return payload_; }

    /// The payload-agnostic class used for reporting and for responder models.
    PortProtocol scan_class() const {
        switch (kind_) {
        case ScanKind::icmp6: return {Transport::icmp6, std::nullopt};
        case ScanKind::tcp: return {Transport::tcp, port_};
        case ScanKind::udp: return {Transport::udp, port_};
        }
        return {};
    }

    std::string label() const { return scan_class().label(); }

    auto operator<=>(const ScanType&) const = default;
    bool operator==(const ScanType&) const = default;

private:
    ScanType(ScanKind k, std::uint16_t port, std::vector<std::uint8_t> payload)
        : kind_(k), port_(port), payload_(std::move(payload)) {}

    ScanKind kind_ = ScanKind::icmp6;
    std::uint16_t port_ = 0;
    std::vector<std::uint8_t> payload_;
};

/// Interval profiles (offsets after first observation, in seconds).
inline const std::vector<Seconds> kMwnIntervals{60, 600, 3600, 43200, 86400, 259200, 604800};
inline const std::vector<Seconds> kIxpIntervals{60, 3600, 86400, 604800};

/// Payload bytes shipped for well-known UDP ports.
namespace payloads {

/// QUIC long header with a reserved 0x?a?a?a?a version, padded to 1200
/// bytes, which makes servers answer with version negotiation.
inline std::vector<std::uint8_t> quic_version_negotiation() {
    std::vector<std::uint8_t> p = {0xc0, 0x1a, 0x2a, 0x3a, 0x4a, 0x08, 0x68, 0x69, 0x74, 0x6c, 0x69, 0x73, 0x74, 0x36, 0x00};
    p.resize(1200, 0x00);
    return p;
}

/// DNS query for the root NS set.
inline std::vector<std::uint8_t> dns_root_query() {
    return {0x68, 0x6c, 0x01, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x02, 0x00, 0x01};
}

/// Bencoded Mainline DHT ping.
inline std::vector<std::uint8_t> bittorrent_dht_ping() {
    const std::string_view msg = "d1:ad2:id20:hitlistprobe-node-id1e1:q4:ping1:t2:hl1:y1:qe";
    return {msg.begin(), msg.end()};
}

inline std::map<std::uint16_t, std::vector<std::uint8_t>> defaults() {
    return {
        {53, dns_root_query()},
        {443, quic_version_negotiation()},
        {49001, bittorrent_dht_ping()},
        {51413, bittorrent_dht_ping()},
    };
}

} // namespace payloads

/// How observed (transport, port) pairs turn into in-protocol scans.
struct ScanPolicy {
    std::map<std::uint16_t, std::vector<std::uint8_t>> udp_payloads = payloads::defaults();
    /// udp ports without a configured payload get an empty datagram when true, no scan otherwise
    bool probe_unmapped_udp = true;
};

struct ProbeTask {
    Address128 target;
    std::uint32_t scan = 0; // index into ProbePlan::scans
    Seconds offset = 0;
    Timestamp first_seen = 0;

    Micros due() const noexcept { return (first_seen + offset) * kMicrosPerSecond; }
};

struct ProbePlan {
    std::vector<ScanType> scans;
    std::vector<Seconds> intervals;
    std::vector<ProbeTask> tasks;
    std::uint64_t rate_limit = 10'000; // packets per second
    double jitter_fraction = 0.01;     // dispatch tolerance as a fraction of the offset

    Micros jitter_tolerance(const ProbeTask& t) const noexcept {
        return static_cast<Micros>(static_cast<double>(t.offset) * kMicrosPerSecond * jitter_fraction);
    }
};

struct PlanOptions {
    std::uint64_t rate_limit = 10'000;
    double jitter_fraction = 0.01;
};

/// One icmp6 task per interval for every target, plus one in-protocol task
/// per interval for each tcp/udp (transport, port) the target was seen on.
inline ProbePlan build_plan(const TargetSet& targets, std::span<const Seconds> intervals,
                            const ScanPolicy& policy = {}, const PlanOptions& opts = {}) {
    if (intervals.empty()) throw EmptyIntervals("probe plan needs at least one interval");
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        if (intervals[i] <= 0 || (i > 0 && intervals[i] <= intervals[i - 1]))
            throw EmptyIntervals("probe intervals must be positive and strictly increasing");
    }
    if (opts.rate_limit == 0) throw Error("rate_limit must be positive");

    ProbePlan plan;
    plan.intervals.assign(intervals.begin(), intervals.end());
    plan.rate_limit = opts.rate_limit;
    plan.jitter_fraction = opts.jitter_fraction;

    std::map<ScanType, std::uint32_t> index;
    auto scan_id = [&](ScanType s) {
        auto [it, fresh] = index.emplace(std::move(s), static_cast<std::uint32_t>(plan.scans.size()));
        if (fresh) plan.scans.push_back(it->first);
        return it->second;
    };
    const auto icmp = scan_id(ScanType::icmp6());

    for (const auto& t : targets) {
        std::vector<std::uint32_t> scans{icmp};
        for (const auto& pp : t.port_protocols) {
            if (!pp.port) continue;
            if (pp.transport == Transport::tcp) {
                scans.push_back(scan_id(ScanType::tcp(*pp.port)));
            } else if (pp.transport == Transport::udp) {
                auto it = policy.udp_payloads.find(*pp.port);
                if (it != policy.udp_payloads.end())
                    scans.push_back(scan_id(ScanType::udp(*pp.port, it->second)));
                else if (policy.probe_unmapped_udp)
                    scans.push_back(scan_id(ScanType::udp(*pp.port)));
            }
        }
        for (auto s : scans)
            for (auto off : intervals) plan.tasks.push_back(ProbeTask{t.address, s, off, t.first_seen});
    }
    return plan;
}

enum class ReplyKind : std::uint8_t { none = 0, echo_reply, syn_ack, rst, udp_payload, icmp_error };

constexpr std::string_view to_string(ReplyKind k) noexcept {
    switch (k) {
    case ReplyKind::none: return "none";
    case ReplyKind::echo_reply: return "echo_reply";
    case ReplyKind::syn_ack: return "syn_ack";
    case ReplyKind::rst: return "rst";
    case ReplyKind::udp_payload: return "udp_payload";
    case ReplyKind::icmp_error: return "icmp_error";
    }
    return "none";
}

/// A RST proves the host is up but the port is closed; it is recorded but
/// does not make the target responsive.
constexpr bool is_responsive(ReplyKind k) noexcept {
    return k == ReplyKind::echo_reply || k == ReplyKind::syn_ack || k == ReplyKind::udp_payload;
}

struct ProbeRequest {
    Address128 target;
    const ScanType& scan;
    std::uint64_t task_key; // stable per (target, scan, offset); used for correlation
    Micros send_time;
};

class Prober {
public:
    virtual ~Prober() = default;
    virtual ReplyKind probe(const ProbeRequest& request) = 0;
};

class Clock {
public:
    virtual ~Clock() = default;
    virtual Micros now() = 0;
    virtual void sleep_until(Micros t) = 0;
};

/// Time advances only when the executor waits; a week of probing runs instantly.
class SimulatedClock final : public Clock {
public:
    explicit SimulatedClock(Micros start = 0) : now_(start) {}
    Micros now() override { return now_; }
    void sleep_until(Micros t) override { now_ = std::max(now_, t); }

private:
    Micros now_;
};

class SystemClock final : public Clock {
public:
    Micros now() override {
        return std::chrono::duration_cast<std::chrono::microseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }
    void sleep_until(Micros t) override {
        const auto n = now();
        if (t > n) std::this_thread::sleep_for(std::chrono::microseconds(t - n));
    }
};

/// Admits at most `rate` sends in any half-open one-second window.
class SlidingWindowLimiter {
public:
    explicit SlidingWindowLimiter(std::uint64_t rate) : rate_(std::max<std::uint64_t>(rate, 1)) {}

    Micros earliest(Micros now) const noexcept {
        if (recent_.size() < rate_) return now;
        return std::max(now, recent_.front() + kMicrosPerSecond);
    }

    void record(Micros t) {
        recent_.push_back(t);
        while (recent_.size() > rate_) recent_.pop_front();
    }

private:
    std::uint64_t rate_;
    std::deque<Micros> recent_;
};

struct Responder {
    Timestamp birth = 0;
    std::optional<Seconds> lifetime; // nullopt = lives forever
    boost::container::flat_set<PortProtocol> responds_to;
    bool drops_icmp = false;

    bool alive_at(Micros t) const noexcept {
        if (t < birth * kMicrosPerSecond) return false;
        return !lifetime || t <= (birth + *lifetime) * kMicrosPerSecond;
    }

    bool operator==(const Responder&) const = default;
};

using ResponderModel = std::map<Address128, Responder>;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Deterministic network: a target answers scan s at time t iff it is alive
/// at t, s is in its responds_to set, and s is not an icmp6 probe it drops.
/// Live hosts answer closed TCP ports with RST and closed UDP ports with an
/// ICMPv6 port-unreachable. Optional seeded loss drops replies per task.
class SimulatedProber final : public Prober {
public:
    SimulatedProber(const ResponderModel& model, std::uint64_t seed, double loss_rate = 0.0)
        : model_(model), seed_(seed), loss_rate_(loss_rate) {}

    ReplyKind probe(const ProbeRequest& r) override {
        auto it = model_.find(r.target);
        if (it == model_.end()) return ReplyKind::none;
        const Responder& h = it->second;
        if (!h.alive_at(r.send_time)) return ReplyKind::none;
        if (loss_rate_ > 0.0) {
            const auto u = detail::splitmix64(seed_ ^ detail::splitmix64(r.task_key));
            if (static_cast<double>(u >> 11) * 0x1.0p-53 < loss_rate_) return ReplyKind::none;
        }
        const auto cls = r.scan.scan_class();
        const bool open = h.responds_to.contains(cls);
        switch (r.scan.kind()) {
        case ScanKind::icmp6: return open && !h.drops_icmp ? ReplyKind::echo_reply : ReplyKind::none;
        case ScanKind::tcp: return open ? ReplyKind::syn_ack : ReplyKind::rst;
        case ScanKind::udp: return open ? ReplyKind::udp_payload : ReplyKind::icmp_error;
        }
        return ReplyKind::none;
    }

private:
    const ResponderModel& model_;
    std::uint64_t seed_;
    double loss_rate_;
};

struct ResponseCell {
    Address128 target;
    std::uint32_t scan = 0;
    Seconds offset = 0;
    Micros sent_at = 0;
    ReplyKind reply = ReplyKind::none;
    bool responsive = false;
    bool late = false; // dispatched after the jitter tolerance (rate limit saturated)

    bool operator==(const ResponseCell&) const = default;
};

struct PolicySkip {
    Address128 target;
    std::uint32_t scan = 0;
    Seconds offset = 0;

    bool operator==(const PolicySkip&) const = default;
};

/// Outcome of executing a plan; cells and skips are sorted by (target, scan, offset).
struct ResponseMatrix {
    std::vector<ScanType> scans;
    std::vector<Seconds> intervals;
    std::vector<ResponseCell> cells;
    std::vector<PolicySkip> skips;

    bool operator==(const ResponseMatrix&) const = default;
};

inline std::uint64_t task_key(const Address128& a, std::uint32_t scan, Seconds offset) noexcept {
    std::uint64_t h = detail::splitmix64(a.hi);
    h = detail::splitmix64(h ^ a.lo);
    h = detail::splitmix64(h ^ scan);
    return detail::splitmix64(h ^ static_cast<std::uint64_t>(offset));
}

struct ExecuteOptions {
    const PrefixSet* blacklist = nullptr; // re-checked before every send
};

/// Dispatches tasks in due-time order, each as early as the rate limiter
/// allows but never before its due time. Blacklisted targets are recorded
/// as policy skips and never sent.
inline ResponseMatrix execute(const ProbePlan& plan, Prober& prober, Clock& clock, const ExecuteOptions& opts = {}) {
    std::vector<std::size_t> order(plan.tasks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = plan.tasks[a];
        const auto& y = plan.tasks[b];
        return std::tuple(x.due(), x.target, x.scan, x.offset) < std::tuple(y.due(), y.target, y.scan, y.offset);
    });

    ResponseMatrix m;
    m.scans = plan.scans;
    m.intervals = plan.intervals;
    m.cells.reserve(plan.tasks.size());
    SlidingWindowLimiter limiter(plan.rate_limit);

    for (auto idx : order) {
        const auto& task = plan.tasks[idx];
        if (opts.blacklist && opts.blacklist->contains(task.target)) {
            m.skips.push_back(PolicySkip{task.target, task.scan, task.offset});
            continue;
        }
        clock.sleep_until(limiter.earliest(std::max(clock.now(), task.due())));
        const Micros sent = clock.now();
        limiter.record(sent);
        const ProbeRequest req{task.target, plan.scans[task.scan], task_key(task.target, task.scan, task.offset), sent};
        const ReplyKind reply = prober.probe(req);
        m.cells.push_back(ResponseCell{task.target, task.scan, task.offset, sent, reply, is_responsive(reply),
                                       sent > task.due() + plan.jitter_tolerance(task)});
    }

    auto key = [](const auto& c) { return std::tie(c.target, c.scan, c.offset); };
    std::sort(m.cells.begin(), m.cells.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    std::sort(m.skips.begin(), m.skips.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    return m;
}

/// Largest number of sends falling in any half-open one-second window.
inline std::uint64_t max_sends_per_second(const ResponseMatrix& m) {
    std::vector<Micros> t;
    t.reserve(m.cells.size());
    for (const auto& c : m.cells) t.push_back(c.sent_at);
    std::sort(t.begin(), t.end());
    std::uint64_t best = 0;
    std::size_t lo = 0;
    for (std::size_t hi = 0; hi < t.size(); ++hi) {
        while (t[hi] - t[lo] >= kMicrosPerSecond) ++lo;
        best = std::max<std::uint64_t>(best, hi - lo + 1);
    }
    return best;
}

/// Report ordering for scan classes: icmp6 first, then tcp ports, then udp ports.
inline bool scan_class_less(const PortProtocol& a, const PortProtocol& b) noexcept {
    const bool ai = a.transport == Transport::icmp6, bi = b.transport == Transport::icmp6;
    if (ai != bi) return ai;
    return a < b;
}

struct RateCell {
    Seconds offset = 0;
    std::uint64_t responsive = 0;
    std::uint64_t probed = 0;

    bool operator==(const RateCell&) const = default;
};

struct ResponseRow {
    PortProtocol scan_class;
    std::uint64_t targets = 0;
    std::vector<RateCell> rates; // one per interval, in interval order

    bool operator==(const ResponseRow&) const = default;
};

struct ResponseTable {
    std::vector<Seconds> intervals;
    std::vector<ResponseRow> rows;

    bool operator==(const ResponseTable&) const = default;
};

/// Per scan class and offset: how many targets were probed and how many replied.
inline ResponseTable response_table(const ResponseMatrix& m) {
    struct Acc {
        std::vector<Address128> targets;
        std::map<Seconds, RateCell> rates;
    };
    std::map<PortProtocol, Acc, decltype(&scan_class_less)> acc(&scan_class_less);
    for (const auto& c : m.cells) {
        auto& a = acc[m.scans[c.scan].scan_class()];
        if (a.targets.empty() || a.targets.back() != c.target) a.targets.push_back(c.target);
        auto& r = a.rates[c.offset];
        r.offset = c.offset;
        ++r.probed;
        if (c.responsive) ++r.responsive;
    }
    ResponseTable t;
    t.intervals = m.intervals;
    for (auto& [cls, a] : acc) {
        // cells are sorted by target first, but two payload variants of one
        // class may interleave, so dedupe again
        std::sort(a.targets.begin(), a.targets.end());
        const auto n = std::unique(a.targets.begin(), a.targets.end()) - a.targets.begin();
        ResponseRow row{cls, static_cast<std::uint64_t>(n), {}};
        for (auto off : m.intervals) {
            auto it = a.rates.find(off);
            row.rates.push_back(it == a.rates.end() ? RateCell{off, 0, 0} : it->second);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

struct InProtocolRow {
    PortProtocol scan_class;
    std::uint64_t in_protocol_responders = 0; // targets answering in-protocol at any offset
    std::uint64_t icmp_unresponsive = 0;      // of those, never answering icmp6

    bool operator==(const InProtocolRow&) const = default;
};

struct InProtocolSummary {
    std::uint64_t icmp_responders = 0;
    std::vector<InProtocolRow> rows;

    bool operator==(const InProtocolSummary&) const = default;
};

/// In-protocol responders per scan class and how many of them never
/// answered an ICMPv6 echo at any offset.
inline InProtocolSummary icmp_vs_inprotocol(const ResponseMatrix& m) {
    std::map<Address128, bool> icmp_ok;
    std::map<PortProtocol, boost::container::flat_set<Address128>> responders;
    for (const auto& c : m.cells) {
        const auto cls = m.scans[c.scan].scan_class();
        if (cls.transport == Transport::icmp6) {
            icmp_ok[c.target] = icmp_ok[c.target] || c.responsive;
        } else {
            auto& set = responders[cls];
            if (c.responsive) set.insert(c.target);
        }
    }
    InProtocolSummary s;
    for (const auto& [addr, ok] : icmp_ok)
        if (ok) ++s.icmp_responders;
    for (const auto& [cls, set] : responders) {
        InProtocolRow row{cls, set.size(), 0};
        for (const auto& a : set) {
            auto it = icmp_ok.find(a);
            if (it == icmp_ok.end() || !it->second) ++row.icmp_unresponsive;
        }
        s.rows.push_back(row);
    }
    return s;
}

} // namespace hitlist
