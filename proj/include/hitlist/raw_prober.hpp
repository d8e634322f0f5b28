#pragma once

// Live probing over raw sockets. Needs CAP_NET_RAW; refuses to start
// otherwise. Probes are sent one at a time and the reply is awaited
// synchronously, which keeps correlation trivial at the cost of speed.

#include <arpa/inet.h>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <netinet/icmp6.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <string>
#include <sys/socket.h>
#include <unistd.h>
#include <vector>

#include "hitlist/addr.hpp"
#include "hitlist/error.hpp"
#include "hitlist/probe.hpp"

namespace hitlist {

namespace detail {

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Fd& operator=(Fd&& o) noexcept {
        std::swap(fd_, o.fd_);
        return *this;
    }
    ~Fd() {
        if (fd_ >= 0) ::close(fd_);
    }
    int get() const noexcept { return fd_; }

private:
    int fd_ = -1;
};

inline sockaddr_in6 to_sockaddr(const Address128& a, std::uint16_t port = 0) {
    sockaddr_in6 sa{};
    sa.sin6_family = AF_INET6;
    sa.sin6_port = htons(port);
    const auto b = a.to_bytes();
    std::memcpy(&sa.sin6_addr, b.data(), 16);
    return sa;
}

inline Address128 from_sockaddr(const sockaddr_in6& sa) {
    std::array<std::uint8_t, 16> b{};
    std::memcpy(b.data(), &sa.sin6_addr, 16);
    return Address128::from_bytes(b);
}

inline int remaining_ms(std::chrono::steady_clock::time_point deadline) {
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
    return left < 0 ? 0 : static_cast<int>(left);
}

} // namespace detail

/// ICMPv6 echo with a per-task identifier, TCP SYN carrying the task key in
/// its sequence number, UDP datagrams with the scan's payload.
class RawProber final : public Prober {
public:
    explicit RawProber(std::chrono::milliseconds wait = std::chrono::milliseconds(1000)) : wait_(wait) {
        icmp_ = open_raw(IPPROTO_ICMPV6);
        tcp_ = open_raw(IPPROTO_TCP);
        int offset = 16; // TCP checksum field
        if (::setsockopt(tcp_.get(), IPPROTO_IPV6, IPV6_CHECKSUM, &offset, sizeof offset) != 0)
            throw Error(std::string("IPV6_CHECKSUM: ") + std::strerror(errno));
    }

    ReplyKind probe(const ProbeRequest& r) override {
        switch (r.scan.kind()) {
        case ScanKind::icmp6: return echo(r);
        case ScanKind::tcp: return syn(r);
        case ScanKind::udp: return datagram(r);
        }
        return ReplyKind::none;
    }

    /// Source port used for a task's SYN (ephemeral range, derived from the key).
    static std::uint16_t tcp_source_port(std::uint64_t key) noexcept {
        return static_cast<std::uint16_t>(32768 + ((key >> 32) % 28000));
    }

private:
    static detail::Fd open_raw(int proto) {
        const int fd = ::socket(AF_INET6, SOCK_RAW, proto);
        if (fd < 0) {
            if (errno == EPERM || errno == EACCES)
                throw InsufficientPrivilege("raw sockets need CAP_NET_RAW (run as root or grant the capability)");
            throw Error(std::string("raw socket: ") + std::strerror(errno));
        }
        return detail::Fd(fd);
    }

    ReplyKind echo(const ProbeRequest& r) {
        const auto id = static_cast<std::uint16_t>(r.task_key & 0xffff);
        const auto seq = static_cast<std::uint16_t>((r.task_key >> 16) & 0xffff);
        std::uint8_t pkt[16] = {};
        pkt[0] = ICMP6_ECHO_REQUEST;
        pkt[4] = static_cast<std::uint8_t>(id >> 8);
        pkt[5] = static_cast<std::uint8_t>(id);
        pkt[6] = static_cast<std::uint8_t>(seq >> 8);
        pkt[7] = static_cast<std::uint8_t>(seq);
        for (int i = 0; i < 8; ++i) pkt[8 + i] = static_cast<std::uint8_t>(r.task_key >> (8 * i));
        const auto dst = detail::to_sockaddr(r.target);
        if (::sendto(icmp_.get(), pkt, sizeof pkt, 0, reinterpret_cast<const sockaddr*>(&dst), sizeof dst) < 0)
            return ReplyKind::none;

        const auto deadline = std::chrono::steady_clock::now() + wait_;
        std::uint8_t buf[1500];
        while (true) {
            const auto n = receive(icmp_.get(), buf, sizeof buf, deadline, r.target);
            if (n < 0) return ReplyKind::none;
            if (n < 8) continue;
            const std::uint16_t rid = static_cast<std::uint16_t>(buf[4] << 8 | buf[5]);
            const std::uint16_t rseq = static_cast<std::uint16_t>(buf[6] << 8 | buf[7]);
            if (buf[0] == ICMP6_ECHO_REPLY && rid == id && rseq == seq) return ReplyKind::echo_reply;
            if (buf[0] < 128) return ReplyKind::icmp_error; // error about our probe, from the target itself
        }
    }

    ReplyKind syn(const ProbeRequest& r) {
        const std::uint16_t sport = tcp_source_port(r.task_key);
        const auto seq = static_cast<std::uint32_t>(r.task_key);
        std::uint8_t pkt[20] = {};
        pkt[0] = static_cast<std::uint8_t>(sport >> 8);
        pkt[1] = static_cast<std::uint8_t>(sport);
        pkt[2] = static_cast<std::uint8_t>(r.scan.port() >> 8);
        pkt[3] = static_cast<std::uint8_t>(r.scan.port());
        for (int i = 0; i < 4; ++i) pkt[4 + i] = static_cast<std::uint8_t>(seq >> (24 - 8 * i));
        pkt[12] = 5 << 4; // data offset
        pkt[13] = TH_SYN;
        pkt[14] = 0xff; // window 65535
        pkt[15] = 0xff;
        const auto dst = detail::to_sockaddr(r.target);
        if (::sendto(tcp_.get(), pkt, sizeof pkt, 0, reinterpret_cast<const sockaddr*>(&dst), sizeof dst) < 0)
            return ReplyKind::none;

        const auto deadline = std::chrono::steady_clock::now() + wait_;
        std::uint8_t buf[1500];
        while (true) {
            const auto n = receive(tcp_.get(), buf, sizeof buf, deadline, r.target);
            if (n < 0) return ReplyKind::none;
            if (n < 20) continue;
            const std::uint16_t src = static_cast<std::uint16_t>(buf[0] << 8 | buf[1]);
            const std::uint16_t dport = static_cast<std::uint16_t>(buf[2] << 8 | buf[3]);
            std::uint32_t ack = 0;
            for (int i = 0; i < 4; ++i) ack = ack << 8 | buf[8 + i];
            if (src != r.scan.port() || dport != sport || ack != seq + 1) continue;
            const auto flags = buf[13];
            if ((flags & (TH_SYN | TH_ACK)) == (TH_SYN | TH_ACK)) return ReplyKind::syn_ack;
            if (flags & TH_RST) return ReplyKind::rst;
        }
    }

    ReplyKind datagram(const ProbeRequest& r) {
        detail::Fd fd(::socket(AF_INET6, SOCK_DGRAM, IPPROTO_UDP));
        if (fd.get() < 0) return ReplyKind::none;
        const auto dst = detail::to_sockaddr(r.target, r.scan.port());
        if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&dst), sizeof dst) != 0) return ReplyKind::none;
        const auto& payload = r.scan.payload();
        if (::send(fd.get(), payload.data(), payload.size(), 0) < 0) return ReplyKind::none;

        const auto deadline = std::chrono::steady_clock::now() + wait_;
        std::uint8_t buf[2048];
        while (true) {
            pollfd p{fd.get(), POLLIN, 0};
            const int ready = ::poll(&p, 1, detail::remaining_ms(deadline));
            if (ready <= 0) return ReplyKind::none;
            const auto n = ::recv(fd.get(), buf, sizeof buf, 0);
            if (n >= 0) return ReplyKind::udp_payload;
            if (errno == ECONNREFUSED || errno == EHOSTUNREACH || errno == ENETUNREACH) return ReplyKind::icmp_error;
            if (errno != EINTR && errno != EAGAIN) return ReplyKind::none;
        }
    }

    /// Next packet from `from` before the deadline; -1 on timeout.
    static ssize_t receive(int fd, std::uint8_t* buf, std::size_t size, std::chrono::steady_clock::time_point deadline,
                           const Address128& from) {
        while (true) {
            pollfd p{fd, POLLIN, 0};
            const int ready = ::poll(&p, 1, detail::remaining_ms(deadline));
            if (ready <= 0) return -1;
            sockaddr_in6 sa{};
            socklen_t len = sizeof sa;
            const auto n = ::recvfrom(fd, buf, size, 0, reinterpret_cast<sockaddr*>(&sa), &len);
            if (n < 0) {
                if (errno == EINTR) continue;
                return -1;
            }
            if (detail::from_sockaddr(sa) == from) return n;
        }
    }

    std::chrono::milliseconds wait_;
    detail::Fd icmp_;
    detail::Fd tcp_;
};

} // namespace hitlist
