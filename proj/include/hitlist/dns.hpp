#pragma once

// AAAA resolution for hostname-based sources: a pluggable resolver interface,
// a fixture-backed stub, a UDP client speaking the DNS wire format, and the
// bounded-concurrency driver that turns answers into observations.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hitlist/addr.hpp"
#include "hitlist/error.hpp"
#include "hitlist/source.hpp"
#include "hitlist/text.hpp"

namespace hitlist {

enum class DnsStatus : std::uint8_t { ok, nxdomain, no_data, servfail, timeout, error };

struct DnsAnswer {
    DnsStatus status = DnsStatus::error;
    std::vector<Address128> addresses;
};

/// Implementations must be safe to call from several threads at once.
class Resolver {
public:
    virtual ~Resolver() = default;
    virtual DnsAnswer query_aaaa(std::string_view name, std::chrono::milliseconds timeout) = 0;
};

inline std::string normalize_dns_name(std::string_view name) {
    std::string s(name);
    if (!s.empty() && s.back() == '.') s.pop_back();
    for (auto& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

/// Resolver backed by a `name whitespace address` fixture. Names absent from
/// the fixture answer NXDOMAIN.
class StubResolver final : public Resolver {
public:
    StubResolver() = default;

    explicit StubResolver(std::map<std::string, std::vector<Address128>> table) {
        for (auto& [name, addrs] : table) table_[normalize_dns_name(name)] = std::move(addrs);
    }

    static StubResolver load(std::istream& in) {
        StubResolver r;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto body = text::strip_comment(line);
            if (body.empty()) continue;
            const auto cols = text::fields(body);
            if (cols.size() != 2) throw MalformedRow("stub resolver rows need 'name address'", lineno);
            try {
                r.table_[normalize_dns_name(cols[0])].push_back(parse_address(cols[1]));
            } catch (const MalformedAddress& e) {
                throw MalformedRow(e.what(), lineno);
            }
        }
        return r;
    }

    DnsAnswer query_aaaa(std::string_view name, std::chrono::milliseconds) override {
        auto it = table_.find(normalize_dns_name(name));
        if (it == table_.end()) return {DnsStatus::nxdomain, {}};
        if (it->second.empty()) return {DnsStatus::no_data, {}};
        return {DnsStatus::ok, it->second};
    }

private:
    std::map<std::string, std::vector<Address128>> table_;
};

namespace dns_wire {

inline constexpr std::uint16_t kTypeAaaa = 28;
inline constexpr std::uint16_t kClassIn = 1;

/// Standard recursive query (RD=1) for one AAAA question.
inline std::vector<std::uint8_t> encode_aaaa_query(std::uint16_t id, std::string_view name) {
    std::vector<std::uint8_t> q = {
        static_cast<std::uint8_t>(id >> 8), static_cast<std::uint8_t>(id), 0x01, 0x00, // RD
        0x00, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    };
    std::string n = normalize_dns_name(name);
    if (!valid_hostname(n)) throw Error("invalid DNS name '" + std::string(name) + "'");
    for (auto label : text::split(n, '.')) {
        q.push_back(static_cast<std::uint8_t>(label.size()));
        q.insert(q.end(), label.begin(), label.end());
    }
    q.push_back(0);
    q.push_back(0);
    q.push_back(kTypeAaaa);
    q.push_back(0);
    q.push_back(kClassIn);
    return q;
}

namespace detail {

inline std::uint16_t read16(std::span<const std::uint8_t> b, std::size_t pos) {
    return static_cast<std::uint16_t>((b[pos] << 8) | b[pos + 1]);
}

// Advances past a possibly compressed name; nullopt on truncation.
inline std::optional<std::size_t> skip_name(std::span<const std::uint8_t> b, std::size_t pos) {
    while (true) {
        if (pos >= b.size()) return std::nullopt;
        const std::uint8_t len = b[pos];
        if ((len & 0xc0) == 0xc0) {
            if (pos + 2 > b.size()) return std::nullopt;
            return pos + 2;
        }
        if (len & 0xc0) return std::nullopt;
        if (len == 0) return pos + 1;
        pos += 1 + len;
    }
}

} // namespace detail

/// Decodes a response to the query with `id`. Returns nullopt when the
/// packet is not a response to that query (wrong id, not a response, truncated).
inline std::optional<DnsAnswer> parse_aaaa_response(std::span<const std::uint8_t> b, std::uint16_t id) {
    if (b.size() < 12) return std::nullopt;
    if (detail::read16(b, 0) != id) return std::nullopt;
    if ((b[2] & 0x80) == 0) return std::nullopt;
    const unsigned rcode = b[3] & 0x0f;
    const std::uint16_t qd = detail::read16(b, 4);
    const std::uint16_t an = detail::read16(b, 6);
    if (rcode == 3) return DnsAnswer{DnsStatus::nxdomain, {}};
    if (rcode == 2) return DnsAnswer{DnsStatus::servfail, {}};
    if (rcode != 0) return DnsAnswer{DnsStatus::error, {}};

    std::size_t pos = 12;
    for (unsigned i = 0; i < qd; ++i) {
        auto next = detail::skip_name(b, pos);
        if (!next || *next + 4 > b.size()) return std::nullopt;
        pos = *next + 4;
    }
    DnsAnswer answer{DnsStatus::ok, {}};
    for (unsigned i = 0; i < an; ++i) {
        auto next = detail::skip_name(b, pos);
        if (!next || *next + 10 > b.size()) return std::nullopt;
        pos = *next;
        const std::uint16_t type = detail::read16(b, pos);
        const std::uint16_t cls = detail::read16(b, pos + 2);
        const std::uint16_t rdlen = detail::read16(b, pos + 8);
        pos += 10;
        if (pos + rdlen > b.size()) return std::nullopt;
        if (type == kTypeAaaa && cls == kClassIn && rdlen == 16) {
            std::array<std::uint8_t, 16> raw{};
            std::memcpy(raw.data(), b.data() + pos, 16);
            answer.addresses.push_back(Address128::from_bytes(raw));
        }
        pos += rdlen;
    }
    if (answer.addresses.empty()) answer.status = DnsStatus::no_data;
    return answer;
}

} // namespace dns_wire

/// Queries a recursive resolver over UDP (IPv4 or IPv6 server address).
/// Each query uses its own socket so concurrent calls never share state.
class UdpResolver final : public Resolver {
public:
    UdpResolver(std::string server, std::uint16_t port = 53) : port_(port) {
        std::memset(&v6_, 0, sizeof v6_);
        std::memset(&v4_, 0, sizeof v4_);
        if (inet_pton(AF_INET6, server.c_str(), &v6_.sin6_addr) == 1) {
            family_ = AF_INET6;
            v6_.sin6_family = AF_INET6;
            v6_.sin6_port = htons(port);
        } else if (inet_pton(AF_INET, server.c_str(), &v4_.sin_addr) == 1) {
            family_ = AF_INET;
            v4_.sin_family = AF_INET;
            v4_.sin_port = htons(port);
        } else {
            throw Error("resolver address '" + server + "' is neither IPv6 nor IPv4");
        }
    }

    DnsAnswer query_aaaa(std::string_view name, std::chrono::milliseconds timeout) override {
        std::uint16_t id;
        {
            std::lock_guard lock(rng_mutex_);
            id = static_cast<std::uint16_t>(rng_());
        }
        std::vector<std::uint8_t> query;
        try {
            query = dns_wire::encode_aaaa_query(id, name);
        } catch (const Error&) {
            return {DnsStatus::error, {}};
        }

        const int fd = ::socket(family_, SOCK_DGRAM | SOCK_CLOEXEC, 0);
        if (fd < 0) return {DnsStatus::error, {}};
        struct Closer {
            int fd;
            ~Closer() { ::close(fd); }
        } closer{fd};

        const sockaddr* addr = family_ == AF_INET6 ? reinterpret_cast<const sockaddr*>(&v6_)
                                                   : reinterpret_cast<const sockaddr*>(&v4_);
        const socklen_t len = family_ == AF_INET6 ? sizeof v6_ : sizeof v4_;
        if (::connect(fd, addr, len) != 0) return {DnsStatus::error, {}};
        if (::send(fd, query.data(), query.size(), 0) != static_cast<ssize_t>(query.size()))
            return {DnsStatus::error, {}};

        const auto deadline = std::chrono::steady_clock::now() + timeout;
        std::array<std::uint8_t, 4096> buf{};
        while (true) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) return {DnsStatus::timeout, {}};
            pollfd p{fd, POLLIN, 0};
            const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
            if (rc == 0) return {DnsStatus::timeout, {}};
            if (rc < 0) {
                if (errno == EINTR) continue;
                return {DnsStatus::error, {}};
            }
            const ssize_t got = ::recv(fd, buf.data(), buf.size(), 0);
            if (got < 0) return {DnsStatus::error, {}}; // e.g. ECONNREFUSED from an ICMP error
            if (auto answer = dns_wire::parse_aaaa_response({buf.data(), static_cast<std::size_t>(got)}, id))
                return *answer;
        }
    }

private:
    int family_ = AF_INET6;
    std::uint16_t port_;
    sockaddr_in6 v6_;
    sockaddr_in v4_;
    std::mutex rng_mutex_;
    std::mt19937 rng_{std::random_device{}()};
};

struct ResolveOptions {
    unsigned concurrency = 8;
    std::chrono::milliseconds timeout{2000};
    /// transport failures (timeout/error) tolerated before the first
    /// successful response; reaching it aborts with ResolverUnavailable
    unsigned failure_threshold = 50;
};

struct ResolveCounts {
    std::uint64_t queried = 0;
    std::uint64_t answered = 0; // names with at least one AAAA
    std::uint64_t nxdomain = 0;
    std::uint64_t no_data = 0;
    std::uint64_t servfail = 0;
    std::uint64_t timeout = 0;
    std::uint64_t error = 0;

    bool operator==(const ResolveCounts&) const = default;
};

struct ResolveResult {
    ObservationList observations;
    ResolveCounts counts;
};

/// Resolves every record with up to `concurrency` queries in flight. Output
/// is ordered by input record, then by answer order, so it does not depend
/// on scheduling.
inline ResolveResult resolve_hostnames(std::span<const HostnameRecord> records, Resolver& resolver,
                                       const ResolveOptions& opts, Timestamp resolved_at) {
    std::vector<DnsAnswer> answers(records.size());
    std::atomic<std::size_t> next{0};
    std::atomic<unsigned> failures{0};
    std::atomic<bool> any_response{false};
    std::atomic<bool> abort{false};

    auto worker = [&] {
        while (!abort.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1);
            if (i >= records.size()) return;
            answers[i] = resolver.query_aaaa(records[i].name, opts.timeout);
            const auto st = answers[i].status;
            if (st == DnsStatus::timeout || st == DnsStatus::error) {
                if (!any_response.load() && failures.fetch_add(1) + 1 >= opts.failure_threshold) abort = true;
            } else {
                any_response = true;
            }
        }
    };

    const unsigned n = std::max(1u, std::min<unsigned>(opts.concurrency, static_cast<unsigned>(
                                                                               std::max<std::size_t>(records.size(), 1))));
    {
        std::vector<std::jthread> pool;
        pool.reserve(n);
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    if (abort && !any_response)
        throw ResolverUnavailable("resolver unreachable: " + std::to_string(failures.load()) +
                                  " transport failures before any response");

    ResolveResult r;
    r.counts.queried = records.size();
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& a = answers[i];
        switch (a.status) {
        case DnsStatus::ok:
            ++r.counts.answered;
            for (const auto& addr : a.addresses)
                r.observations.push_back(
                    Observation{addr, resolved_at, Transport::unknown, std::nullopt, records[i].origin});
            break;
        case DnsStatus::nxdomain: ++r.counts.nxdomain; break;
        case DnsStatus::no_data: ++r.counts.no_data; break;
        case DnsStatus::servfail: ++r.counts.servfail; break;
        case DnsStatus::timeout: ++r.counts.timeout; break;
        case DnsStatus::error: ++r.counts.error; break;
        }
    }
    return r;
}

} // namespace hitlist
