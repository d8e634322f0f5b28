#pragma once

// Intermediate artifacts passed between subcommands. Every file is
//
//   magic[8] | u32 version | u64 record_count | record_count x (u32 length | payload)
//
// with all integers little-endian. Each artifact kind has its own magic and
// record layout; schema() describes the JSON descriptor written next to
// every artifact as "<file>.schema.json".

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <iterator>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hitlist/addr.hpp"
#include "hitlist/error.hpp"
#include "hitlist/probe.hpp"
#include "hitlist/source.hpp"

namespace hitlist::artifact {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::string_view kTargetsMagic = "HLTARGET";
inline constexpr std::string_view kObservationsMagic = "HLOBSERV";
inline constexpr std::string_view kMatrixMagic = "HLMATRIX";

namespace detail {

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
    void addr(const Address128& a) {
        const auto b = a.to_bytes();
        buf_.append(reinterpret_cast<const char*>(b.data()), b.size());
    }
    void bytes(std::span<const std::uint8_t> b) {
        u32(static_cast<std::uint32_t>(b.size()));
        buf_.append(reinterpret_cast<const char*>(b.data()), b.size());
    }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    std::string take() { return std::move(buf_); }
    void clear() { buf_.clear(); }
    const std::string& data() const noexcept { return buf_; }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view data, std::string_view what) : data_(data), what_(what) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
    Address128 addr() {
        need(16);
        std::array<std::uint8_t, 16> b{};
        std::memcpy(b.data(), data_.data() + pos_, 16);
        pos_ += 16;
        return Address128::from_bytes(b);
    }
    std::vector<std::uint8_t> bytes() {
        const auto n = u32();
        need(n);
        std::vector<std::uint8_t> out(data_.begin() + pos_, data_.begin() + pos_ + n);
        pos_ += n;
        return out;
    }
    std::string str() {
        const auto n = u32();
        need(n);
        std::string out(data_.substr(pos_, n));
        pos_ += n;
        return out;
    }
    bool done() const noexcept { return pos_ == data_.size(); }
    void expect_done() const {
        if (!done()) fail("trailing bytes in record");
    }
    [[noreturn]] void fail(const std::string& why) const { throw CorruptArtifact(std::string(what_) + ": " + why); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) fail("truncated record");
    }
    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::string_view data_;
    std::string_view what_;
    std::size_t pos_ = 0;
};

/// Streams records out behind a fixed header.
class FileWriter {
public:
    FileWriter(std::ostream& out, std::string_view magic, std::uint64_t records) : out_(out) {
        Writer h;
        for (char c : magic) h.u8(static_cast<std::uint8_t>(c));
        h.u32(kVersion);
        h.u64(records);
        out_.write(h.data().data(), static_cast<std::streamsize>(h.data().size()));
    }
    void record(const std::string& payload) {
        Writer len;
        len.u32(static_cast<std::uint32_t>(payload.size()));
        out_.write(len.data().data(), 4);
        out_.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        ++written_;
    }
    std::uint64_t written() const noexcept { return written_; }

private:
    std::ostream& out_;
    std::uint64_t written_ = 0;
};

/// Whole file in memory, header validated, records handed out as views.
class FileReader {
public:
    FileReader(std::istream& in, std::string_view magic, std::string_view what) : what_(what) {
        data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        Reader r(data_, what_);
        if (data_.size() < 20 || std::string_view(data_).substr(0, 8) != magic)
            r.fail("bad magic, expected " + std::string(magic));
        Reader h(std::string_view(data_).substr(8, 12), what_);
        const auto version = h.u32();
        if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
        count_ = h.u64();
        pos_ = 20;
    }
    std::uint64_t count() const noexcept { return count_; }

    Reader next() {
        if (read_ == count_) fail("more records requested than declared");
        if (data_.size() - pos_ < 4) fail("truncated record length");
        Reader lr(std::string_view(data_).substr(pos_, 4), what_);
        const auto len = lr.u32();
        pos_ += 4;
        if (data_.size() - pos_ < len) fail("truncated record");
        Reader r(std::string_view(data_).substr(pos_, len), what_);
        pos_ += len;
        ++read_;
        return r;
    }
    void expect_end() const {
        if (read_ != count_ || pos_ != data_.size()) fail("record count does not match file contents");
    }
    [[noreturn]] void fail(const std::string& why) const { throw CorruptArtifact(std::string(what_) + ": " + why); }

private:
    std::string data_;
    std::string_view what_;
    std::size_t pos_ = 0;
    std::uint64_t count_ = 0;
    std::uint64_t read_ = 0;
};

inline void write_tag_table(Writer& w, std::span<const SourceTag> tags) {
    w.u32(static_cast<std::uint32_t>(tags.size()));
    for (const auto& t : tags) {
        w.u8(static_cast<std::uint8_t>(t.kind));
        w.str(t.name);
    }
}

inline std::vector<SourceTag> read_tag_table(Reader& r) {
    const auto n = r.u32();
    std::vector<SourceTag> tags;
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto k = r.u8();
        if (k >= kAllSourceKinds.size()) r.fail("unknown source kind " + std::to_string(k));
        tags.push_back(SourceTag{static_cast<SourceKind>(k), r.str()});
    }
    r.expect_done();
    return tags;
}

inline std::uint32_t tag_index(std::span<const SourceTag> tags, const SourceTag& t) {
    auto it = std::lower_bound(tags.begin(), tags.end(), t);
    return static_cast<std::uint32_t>(it - tags.begin());
}

inline void write_port(Writer& w, Transport t, const std::optional<std::uint16_t>& port) {
    w.u8(static_cast<std::uint8_t>(t));
    w.u8(port ? 1 : 0);
    w.u16(port.value_or(0));
}

inline void read_port(Reader& r, Transport& t, std::optional<std::uint16_t>& port) {
    const auto tr = r.u8();
    if (tr > static_cast<std::uint8_t>(Transport::unknown)) r.fail("bad transport " + std::to_string(tr));
    t = static_cast<Transport>(tr);
    const auto has = r.u8();
    const auto p = r.u16();
    if (has > 1) r.fail("bad port flag");
    port = has ? std::optional<std::uint16_t>(p) : std::nullopt;
}

inline const SourceTag& tag_at(Reader& r, std::span<const SourceTag> tags, std::uint32_t i) {
    if (i >= tags.size()) r.fail("source index out of range");
    return tags[i];
}

} // namespace detail

/// Record 0 holds the sorted source-tag table; every further record is one target entry.
inline void write_targets(std::ostream& out, const TargetSet& targets) {
    const auto tags = targets.source_tags();
    detail::FileWriter f(out, kTargetsMagic, targets.size() + 1);
    detail::Writer w;
    detail::write_tag_table(w, tags);
    f.record(w.data());
    for (const auto& e : targets) {
        w.clear();
        w.addr(e.address);
        w.i64(e.first_seen);
        w.i64(e.last_seen);
        w.u64(e.observation_count);
        w.u16(static_cast<std::uint16_t>(e.port_protocols.size()));
        for (const auto& pp : e.port_protocols) detail::write_port(w, pp.transport, pp.port);
        w.u16(static_cast<std::uint16_t>(e.sources.size()));
        for (const auto& s : e.sources) w.u32(detail::tag_index(tags, s));
        f.record(w.data());
    }
}

inline TargetSet read_targets(std::istream& in) {
    detail::FileReader f(in, kTargetsMagic, "target set");
    if (f.count() == 0) f.fail("missing source table");
    auto head = f.next();
    const auto tags = detail::read_tag_table(head);
    std::vector<TargetEntry> entries;
    entries.reserve(f.count() - 1);
    for (std::uint64_t i = 1; i < f.count(); ++i) {
        auto r = f.next();
        TargetEntry e;
        e.address = r.addr();
        e.first_seen = r.i64();
        e.last_seen = r.i64();
        e.observation_count = r.u64();
        const auto npp = r.u16();
        for (std::uint16_t j = 0; j < npp; ++j) {
            PortProtocol pp;
            detail::read_port(r, pp.transport, pp.port);
            e.port_protocols.insert(pp);
        }
        const auto nsrc = r.u16();
        for (std::uint16_t j = 0; j < nsrc; ++j) e.sources.insert(detail::tag_at(r, tags, r.u32()));
        r.expect_done();
        if (!entries.empty() && !(entries.back().address < e.address)) r.fail("entries not sorted by address");
        entries.push_back(std::move(e));
    }
    f.expect_end();
    return TargetSet::from_sorted(std::move(entries));
}

/// Record 0 holds the sorted source-tag table; every further record is one observation.
inline void write_observations(std::ostream& out, std::span<const Observation> obs) {
    boost::container::flat_set<SourceTag> tagset;
    for (const auto& o : obs) tagset.insert(o.source);
    const std::vector<SourceTag> tags(tagset.begin(), tagset.end());
    detail::FileWriter f(out, kObservationsMagic, obs.size() + 1);
    detail::Writer w;
    detail::write_tag_table(w, tags);
    f.record(w.data());
    for (const auto& o : obs) {
        w.clear();
        w.addr(o.address);
        w.i64(o.timestamp);
        detail::write_port(w, o.transport, o.port);
        w.u32(detail::tag_index(tags, o.source));
        f.record(w.data());
    }
}

inline ObservationList read_observations(std::istream& in) {
    detail::FileReader f(in, kObservationsMagic, "observations");
    if (f.count() == 0) f.fail("missing source table");
    auto head = f.next();
    const auto tags = detail::read_tag_table(head);
    ObservationList out;
    out.reserve(f.count() - 1);
    for (std::uint64_t i = 1; i < f.count(); ++i) {
        auto r = f.next();
        Observation o;
        o.address = r.addr();
        o.timestamp = r.i64();
        detail::read_port(r, o.transport, o.port);
        o.source = detail::tag_at(r, tags, r.u32());
        r.expect_done();
        out.push_back(std::move(o));
    }
    f.expect_end();
    return out;
}

namespace detail {
inline constexpr std::uint8_t kCellRecord = 'C';
inline constexpr std::uint8_t kSkipRecord = 'S';
} // namespace detail

/// Record 0: intervals; record 1: scan table; then one record per cell
/// ('C') followed by one per policy skip ('S').
inline void write_matrix(std::ostream& out, const ResponseMatrix& m) {
    detail::FileWriter f(out, kMatrixMagic, 2 + m.cells.size() + m.skips.size());
    detail::Writer w;
    w.u32(static_cast<std::uint32_t>(m.intervals.size()));
    for (auto s : m.intervals) w.i64(s);
    f.record(w.data());
    w.clear();
    w.u32(static_cast<std::uint32_t>(m.scans.size()));
    for (const auto& s : m.scans) {
        w.u8(static_cast<std::uint8_t>(s.kind()));
        w.u16(s.port());
        w.bytes(s.payload());
    }
    f.record(w.data());
    for (const auto& c : m.cells) {
        w.clear();
        w.u8(detail::kCellRecord);
        w.addr(c.target);
        w.u32(c.scan);
        w.i64(c.offset);
        w.i64(c.sent_at);
        w.u8(static_cast<std::uint8_t>(c.reply));
        w.u8(static_cast<std::uint8_t>((c.responsive ? 1 : 0) | (c.late ? 2 : 0)));
        f.record(w.data());
    }
    for (const auto& s : m.skips) {
        w.clear();
        w.u8(detail::kSkipRecord);
        w.addr(s.target);
        w.u32(s.scan);
        w.i64(s.offset);
        f.record(w.data());
    }
}

inline ResponseMatrix read_matrix(std::istream& in) {
    detail::FileReader f(in, kMatrixMagic, "response matrix");
    if (f.count() < 2) f.fail("missing interval or scan table");
    ResponseMatrix m;
    {
        auto r = f.next();
        const auto n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) m.intervals.push_back(r.i64());
        r.expect_done();
    }
    {
        auto r = f.next();
        const auto n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto kind = r.u8();
            const auto port = r.u16();
            auto payload = r.bytes();
            switch (kind) {
            case 0: m.scans.push_back(ScanType::icmp6()); break;
            case 1: m.scans.push_back(ScanType::tcp(port)); break;
            case 2: m.scans.push_back(ScanType::udp(port, std::move(payload))); break;
            default: r.fail("unknown scan kind " + std::to_string(kind));
            }
        }
        r.expect_done();
    }
    for (std::uint64_t i = 2; i < f.count(); ++i) {
        auto r = f.next();
        const auto type = r.u8();
        if (type == detail::kCellRecord) {
            ResponseCell c;
            c.target = r.addr();
            c.scan = r.u32();
            c.offset = r.i64();
            c.sent_at = r.i64();
            const auto reply = r.u8();
            if (reply > static_cast<std::uint8_t>(ReplyKind::icmp_error)) r.fail("unknown reply kind");
            c.reply = static_cast<ReplyKind>(reply);
            const auto flags = r.u8();
            if (flags > 3) r.fail("bad cell flags");
            c.responsive = flags & 1;
            c.late = flags & 2;
            if (c.scan >= m.scans.size()) r.fail("scan index out of range");
            if (!m.skips.empty()) r.fail("cell after policy skips");
            m.cells.push_back(c);
        } else if (type == detail::kSkipRecord) {
            PolicySkip s;
            s.target = r.addr();
            s.scan = r.u32();
            s.offset = r.i64();
            if (s.scan >= m.scans.size()) r.fail("scan index out of range");
            m.skips.push_back(s);
        } else {
            r.fail("unknown record type");
        }
        r.expect_done();
    }
    f.expect_end();
    return m;
}

/// Descriptor written next to each artifact so other tools can decode it.
inline nlohmann::ordered_json schema(std::string_view magic) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["magic"] = std::string(magic);
    j["version"] = kVersion;
    j["byte_order"] = "little";
    j["header"] = ordered_json::array({"magic: 8 bytes", "version: u32", "record_count: u64"});
    j["record_framing"] = "u32 length, then payload";
    const ordered_json tag_table = {"count: u32", "per tag: kind u8 (index into source kinds), name (u32 length + bytes)"};
    ordered_json kinds = ordered_json::array();
    for (auto k : kAllSourceKinds) kinds.push_back(std::string(to_string(k)));
    const ordered_json port = "transport u8 (0 tcp, 1 udp, 2 icmp6, 3 unknown), has_port u8, port u16";
    if (magic == kTargetsMagic) {
        j["records"] = {
            {{"index", "0"}, {"name", "source_table"}, {"fields", tag_table}},
            {{"index", "1.."},
             {"name", "target"},
             {"fields",
              {"address: 16 bytes", "first_seen: i64", "last_seen: i64", "observation_count: u64",
               "port_protocol_count: u16", "port_protocols: " + port.get<std::string>(), "source_count: u16",
               "sources: u32 index into source_table"}}},
        };
        j["source_kinds"] = kinds;
    } else if (magic == kObservationsMagic) {
        j["records"] = {
            {{"index", "0"}, {"name", "source_table"}, {"fields", tag_table}},
            {{"index", "1.."},
             {"name", "observation"},
             {"fields", {"address: 16 bytes", "timestamp: i64", port, "source: u32 index into source_table"}}},
        };
        j["source_kinds"] = kinds;
    } else if (magic == kMatrixMagic) {
        ordered_json replies = ordered_json::array();
        for (int k = 0; k <= static_cast<int>(ReplyKind::icmp_error); ++k)
            replies.push_back(std::string(to_string(static_cast<ReplyKind>(k))));
        j["records"] = {
            {{"index", "0"}, {"name", "intervals"}, {"fields", {"count: u32", "offset_seconds: i64"}}},
            {{"index", "1"},
             {"name", "scans"},
             {"fields", {"count: u32", "per scan: kind u8 (0 icmp6, 1 tcp, 2 udp), port u16, payload (u32 length + bytes)"}}},
            {{"index", "2.."},
             {"name", "cell"},
             {"fields",
              {"type: u8 'C'", "target: 16 bytes", "scan: u32", "offset: i64", "sent_at_us: i64", "reply: u8",
               "flags: u8 (1 responsive, 2 late)"}}},
            {{"index", "after cells"},
             {"name", "policy_skip"},
             {"fields", {"type: u8 'S'", "target: 16 bytes", "scan: u32", "offset: i64"}}},
        };
        j["reply_kinds"] = replies;
    }
    return j;
}

} // namespace hitlist::artifact
