#pragma once

// IPv6 address atoms: 128-bit addresses, /N prefixes, 64-bit interface
// identifiers and the modified EUI-64 codec used to classify them.

#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "hitlist/error.hpp"

namespace hitlist {

/// A 128-bit IPv6 address. `hi` holds the most significant 64 bits, so bit 0
/// (the first bit on the wire) is the top bit of `hi`.
struct Address128 {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    constexpr Address128() = default;
    constexpr Address128(std::uint64_t high, std::uint64_t low) : hi(high), lo(low) {}

    static Address128 from_bytes(const std::array<std::uint8_t, 16>& b) noexcept {
        Address128 a;
        for (int i = 0; i < 8; ++i) {
            a.hi = (a.hi << 8) | b[i];
            a.lo = (a.lo << 8) | b[i + 8];
        }
        return a;
    }

    std::array<std::uint8_t, 16> to_bytes() const noexcept {
        std::array<std::uint8_t, 16> b{};
        for (int i = 0; i < 8; ++i) {
            b[i] = static_cast<std::uint8_t>(hi >> (56 - 8 * i));
            b[i + 8] = static_cast<std::uint8_t>(lo >> (56 - 8 * i));
        }
        return b;
    }

    /// bit `i` counted from the most significant end, i in [0, 128)
    constexpr bool bit(unsigned i) const noexcept {
        return i < 64 ? ((hi >> (63 - i)) & 1u) != 0 : ((lo >> (127 - i)) & 1u) != 0;
    }

    constexpr std::uint16_t group(unsigned i) const noexcept {
        const std::uint64_t half = i < 4 ? hi : lo;
        return static_cast<std::uint16_t>(half >> (48 - 16 * (i % 4)));
    }

    constexpr Address128 operator&(const Address128& o) const noexcept { return {hi & o.hi, lo & o.lo}; }
    constexpr Address128 operator|(const Address128& o) const noexcept { return {hi | o.hi, lo | o.lo}; }
    constexpr Address128 operator~() const noexcept { return {~hi, ~lo}; }

    constexpr auto operator<=>(const Address128&) const = default;
};

/// Network mask with the top `length` bits set.
constexpr Address128 prefix_mask(unsigned length) noexcept {
    if (length == 0) return {};
    if (length <= 64) return {length == 64 ? ~0ULL : ~0ULL << (64 - length), 0};
    return {~0ULL, length == 128 ? ~0ULL : ~0ULL << (128 - length)};
}

namespace detail {

constexpr int hex_value(char c) noexcept {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Dotted-quad tail of a mixed-notation address. Returns the offset of the
// first bad character, or npos on success.
inline std::size_t parse_ipv4_tail(std::string_view s, std::size_t pos, std::uint32_t& out) {
    std::uint32_t value = 0;
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (pos >= s.size() || s[pos] != '.') return pos;
            ++pos;
        }
        const std::size_t start = pos;
        unsigned v = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            if (pos - start == 3) return pos;
            if (pos > start && s[start] == '0') return pos;
            v = v * 10 + static_cast<unsigned>(s[pos] - '0');
            ++pos;
        }
        if (pos == start || v > 255) return start;
        value = (value << 8) | v;
    }
    if (pos != s.size()) return pos;
    out = value;
    return std::string_view::npos;
}

} // namespace detail

/// Strict parser for full, compressed and mixed (dotted-quad tail) notation.
/// Zone identifiers and surrounding whitespace are rejected.
inline Address128 parse_address(std::string_view s) {
    auto fail = [&](std::size_t offset) -> Address128 {
        throw MalformedAddress(std::string(s), offset);
    };

    std::array<std::uint16_t, 8> groups{};
    std::size_t count = 0;
    int gap = -1; // group index where "::" sits
    std::size_t gap_pos = 0;
    std::size_t i = 0;
    const std::size_t n = s.size();

    if (n == 0) return fail(0);
    if (s[0] == ':') {
        if (n < 2 || s[1] != ':') return fail(1);
        gap = 0;
        i = 2;
    }

    while (i < n) {
        const std::size_t start = i;
        unsigned v = 0;
        while (i < n && detail::hex_value(s[i]) >= 0) {
            if (i - start == 4) break;
            v = (v << 4) | static_cast<unsigned>(detail::hex_value(s[i]));
            ++i;
        }
        if (i < n && s[i] == '.') {
            if (count > 6) return fail(start);
            std::uint32_t v4 = 0;
            const std::size_t bad = detail::parse_ipv4_tail(s, start, v4);
            if (bad != std::string_view::npos) return fail(bad);
            groups[count++] = static_cast<std::uint16_t>(v4 >> 16);
            groups[count++] = static_cast<std::uint16_t>(v4 & 0xffff);
            i = n;
            break;
        }
        if (i == start) return fail(i);
        if (i - start == 4 && i < n && detail::hex_value(s[i]) >= 0) return fail(i);
        if (count == 8) return fail(start);
        groups[count++] = static_cast<std::uint16_t>(v);
        if (i == n) break;
        if (s[i] != ':' || count == 8) return fail(i);
        ++i;
        if (i < n && s[i] == ':') {
            if (gap >= 0) return fail(i);
            gap = static_cast<int>(count);
            gap_pos = i - 1;
            ++i;
            continue;
        }
        if (i == n) return fail(i);
    }

    if (gap >= 0) {
        if (count > 7) return fail(gap_pos);
        std::array<std::uint16_t, 8> expanded{};
        const std::size_t tail = count - static_cast<std::size_t>(gap);
        for (std::size_t k = 0; k < static_cast<std::size_t>(gap); ++k) expanded[k] = groups[k];
        for (std::size_t k = 0; k < tail; ++k) expanded[8 - tail + k] = groups[static_cast<std::size_t>(gap) + k];
        groups = expanded;
    } else if (count != 8) {
        return fail(n);
    }

    Address128 a;
    for (int k = 0; k < 4; ++k) {
        a.hi = (a.hi << 16) | groups[k];
        a.lo = (a.lo << 16) | groups[k + 4];
    }
    return a;
}

/// Shortest-form lowercase text: leading zeros dropped, the longest run of
/// two or more zero groups compressed to "::" (leftmost run wins ties).
inline std::string canonical_text(const Address128& a) {
    int best_start = -1, best_len = 0;
    for (int k = 0; k < 8;) {
        if (a.group(static_cast<unsigned>(k)) != 0) {
            ++k;
            continue;
        }
        int run = 0;
        const int start = k;
        while (k < 8 && a.group(static_cast<unsigned>(k)) == 0) {
            ++run;
            ++k;
        }
        if (run > best_len) {
            best_start = start;
            best_len = run;
        }
    }
    if (best_len < 2) best_start = -1;

    std::string out;
    out.reserve(39);
    char buf[8];
    for (int k = 0; k < 8; ++k) {
        if (k == best_start) {
            out += "::";
            k += best_len - 1;
            continue;
        }
        if (!out.empty() && out.back() != ':') out += ':';
        std::snprintf(buf, sizeof buf, "%x", static_cast<unsigned>(a.group(static_cast<unsigned>(k))));
        out += buf;
    }
    return out;
}

/// The low 64 bits of an address.
struct Iid {
    std::uint64_t bits = 0;

    constexpr std::uint8_t byte(unsigned i) const noexcept {
        return static_cast<std::uint8_t>(bits >> (56 - 8 * i));
    }
    constexpr auto operator<=>(const Iid&) const = default;
};

/// A CIDR prefix. The base is always stored with the host bits cleared.
class Prefix {
public:
    constexpr Prefix() = default;

    Prefix(const Address128& base, unsigned length) {
        if (length > 128) throw MalformedPrefix("prefix length " + std::to_string(length) + " exceeds 128");
        length_ = static_cast<std::uint8_t>(length);
        base_ = base & prefix_mask(length);
    }

    constexpr const Address128& base() const noexcept { return base_; }
    constexpr unsigned length() const noexcept { return length_; }

    constexpr bool contains(const Address128& a) const noexcept {
        return (a & prefix_mask(length_)) == base_;
    }

    std::string to_string() const { return canonical_text(base_) + "/" + std::to_string(length_); }

    constexpr auto operator<=>(const Prefix&) const = default;

private:
    Address128 base_{};
    std::uint8_t length_ = 0;
};

/// Parses "addr/len"; the base is normalized (host bits cleared).
inline Prefix parse_prefix(std::string_view s) {
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) throw MalformedPrefix("missing '/' in prefix '" + std::string(s) + "'");
    const auto len_text = s.substr(slash + 1);
    if (len_text.empty() || len_text.size() > 3) throw MalformedPrefix("bad prefix length in '" + std::string(s) + "'");
    unsigned len = 0;
    for (char c : len_text) {
        if (c < '0' || c > '9') throw MalformedPrefix("bad prefix length in '" + std::string(s) + "'");
        len = len * 10 + static_cast<unsigned>(c - '0');
    }
    if (len > 128) throw MalformedPrefix("prefix length " + std::to_string(len) + " exceeds 128 in '" + std::string(s) + "'");
    return Prefix(parse_address(s.substr(0, slash)), len);
}

inline std::pair<Prefix, Iid> split(const Address128& a) {
    return {Prefix(Address128{a.hi, 0}, 64), Iid{a.lo}};
}

/// Inverse of split for /64 prefixes; for other lengths the IID overwrites the low 64 bits.
inline Address128 combine(const Prefix& p, Iid iid) noexcept { return {p.base().hi, iid.bits}; }

struct Mac48 {
    std::array<std::uint8_t, 6> octets{};

    std::string to_string() const {
        char buf[18];
        std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", octets[0], octets[1], octets[2],
                      octets[3], octets[4], octets[5]);
        return buf;
    }

    /// the organizationally unique identifier as a 24-bit value
    constexpr std::uint32_t oui() const noexcept {
        return (std::uint32_t{octets[0]} << 16) | (std::uint32_t{octets[1]} << 8) | octets[2];
    }

    constexpr auto operator<=>(const Mac48&) const = default;
};

/// universal/local bit: bit 6 of the IID counted from the most significant bit
inline constexpr std::uint64_t kUniversalLocalBit = 1ULL << 57;

constexpr Iid eui64_encode(const Mac48& mac) noexcept {
    const auto& o = mac.octets;
    std::uint64_t v = 0;
    v |= std::uint64_t{static_cast<std::uint8_t>(o[0] ^ 0x02)} << 56;
    v |= std::uint64_t{o[1]} << 48;
    v |= std::uint64_t{o[2]} << 40;
    v |= std::uint64_t{0xff} << 32;
    v |= std::uint64_t{0xfe} << 24;
    v |= std::uint64_t{o[3]} << 16;
    v |= std::uint64_t{o[4]} << 8;
    v |= std::uint64_t{o[5]};
    return Iid{v};
}

/// Recovers the MAC from a modified EUI-64 IID (ff:fe in bytes 3..4).
constexpr std::optional<Mac48> eui64_decode(Iid iid) noexcept {
    if (iid.byte(3) != 0xff || iid.byte(4) != 0xfe) return std::nullopt;
    Mac48 m;
    m.octets = {static_cast<std::uint8_t>(iid.byte(0) ^ 0x02), iid.byte(1), iid.byte(2),
                iid.byte(5), iid.byte(6), iid.byte(7)};
    return m;
}

constexpr unsigned hamming_weight(Iid iid) noexcept { return static_cast<unsigned>(std::popcount(iid.bits)); }

enum class IidKind : std::uint8_t { eui64 = 0, low = 1, privacy_random = 2, other = 3 };

inline constexpr std::array<IidKind, 4> kAllIidKinds{IidKind::eui64, IidKind::low, IidKind::privacy_random,
                                                    IidKind::other};

constexpr std::string_view to_string(IidKind k) noexcept {
    switch (k) {
    case IidKind::eui64: return "eui64";
    case IidKind::low: return "low";
    case IidKind::privacy_random: return "privacy_random";
    case IidKind::other: return "other";
    }
    return "other";
}

struct IidClass {
    IidKind kind = IidKind::other;
    std::optional<Mac48> mac; // set iff kind == eui64

    bool operator==(const IidClass&) const = default;
};

/// Knobs for classify_iid. "Low" is IID < 2^low_threshold; the privacy band
/// is centred on the Binomial(63, 1/2) mean with roughly three sigma each side.
struct ClassifierConfig {
    unsigned low_threshold = 16;
    unsigned privacy_min_weight = 20;
    unsigned privacy_max_weight = 44;

    void validate() const {
        if (low_threshold > 64)
            throw InvalidThreshold("low_threshold " + std::to_string(low_threshold) + " exceeds 64");
        if (privacy_min_weight > privacy_max_weight || privacy_max_weight > 64)
            throw InvalidThreshold("privacy weight band [" + std::to_string(privacy_min_weight) + ", " +
                                   std::to_string(privacy_max_weight) + "] is invalid");
    }
};

/// Precedence: eui64 > low > privacy_random > other.
/// A random IID carries the ff:fe marker with probability 2^-16 and is then
/// reported as eui64.
inline IidClass classify_iid(Iid iid, const ClassifierConfig& cfg = {}) {
    cfg.validate();
    if (auto mac = eui64_decode(iid)) return {IidKind::eui64, mac};
    const bool low = cfg.low_threshold == 64 || iid.bits < (1ULL << cfg.low_threshold);
    if (low) return {IidKind::low, std::nullopt};
    const unsigned w = hamming_weight(iid);
    if ((iid.bits & kUniversalLocalBit) == 0 && w >= cfg.privacy_min_weight && w <= cfg.privacy_max_weight)
        return {IidKind::privacy_random, std::nullopt};
    return {IidKind::other, std::nullopt};
}

inline IidClass classify_iid(Iid iid, unsigned low_threshold) {
    ClassifierConfig cfg;
    cfg.low_threshold = low_threshold;
    return classify_iid(iid, cfg);
}

} // namespace hitlist

template <>
struct std::hash<hitlist::Address128> {
    std::size_t operator()(const hitlist::Address128& a) const noexcept {
        std::uint64_t h = a.hi * 0x9e3779b97f4a7c15ULL;
        h ^= a.lo + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2);
        h ^= h >> 31;
        h *= 0xbf58476d1ce4e5b9ULL;
        h ^= h >> 29;
        return static_cast<std::size_t>(h);
    }
};

template <>
struct std::hash<hitlist::Iid> {
    std::size_t operator()(const hitlist::Iid& i) const noexcept {
        return std::hash<hitlist::Address128>{}(hitlist::Address128{0, i.bits});
    }
};
