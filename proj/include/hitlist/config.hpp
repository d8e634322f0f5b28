#pragma once

// Pipeline configuration: a small TOML-like document (grammar in
// docs/config.md) resolved into typed settings. Relative paths are taken
// relative to the config file; HITLIST_<SECTION>_<KEY> environment
// variables override path-valued keys only.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/container/flat_set.hpp>

#include "hitlist/addr.hpp"
#include "hitlist/analytics.hpp"
#include "hitlist/dns.hpp"
#include "hitlist/error.hpp"
#include "hitlist/probe.hpp"
#include "hitlist/source.hpp"
#include "hitlist/text.hpp"

namespace hitlist::config {

namespace fs = std::filesystem;

// ---- generic document ----

struct Value {
    using Array = std::vector<Value>;
    std::variant<std::string, std::int64_t, double, bool, Array> v;
    int line = 0;

    bool is_string() const noexcept { return std::holds_alternative<std::string>(v); }
    bool is_int() const noexcept { return std::holds_alternative<std::int64_t>(v); }
    bool is_float() const noexcept { return std::holds_alternative<double>(v); }
    bool is_bool() const noexcept { return std::holds_alternative<bool>(v); }
    bool is_array() const noexcept { return std::holds_alternative<Array>(v); }
};

struct Section {
    int line = 0;
    std::map<std::string, Value> keys;
};

/// Sections by dotted name; keys outside any section live in "".
using Document = std::map<std::string, Section>;

namespace detail {

inline bool key_char(char c) noexcept {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class LineParser {
public:
    LineParser(std::string_view s, int line, std::string_view origin) : s_(s), line_(line), origin_(origin) {}

    [[noreturn]] void fail(const std::string& why) const {
        throw ConfigError(std::string(origin_) + ":" + std::to_string(line_) + ": " + why);
    }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    bool at_end_or_comment() {
        skip_ws();
        return pos_ == s_.size() || s_[pos_] == '#';
    }

    std::string key() {
        skip_ws();
        const auto start = pos_;
        while (pos_ < s_.size() && key_char(s_[pos_])) ++pos_;
        if (pos_ == start) fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    std::string section_name() {
        std::string name = key();
        while (pos_ < s_.size() && s_[pos_] == '.') {
            ++pos_;
            name += "." + key();
        }
        return name;
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    Value value() {
        skip_ws();
        if (pos_ >= s_.size()) fail("missing value");
        Value out;
        out.line = line_;
        const char c = s_[pos_];
        if (c == '"') {
            out.v = string();
        } else if (c == '[') {
            ++pos_;
            Value::Array items;
            for (;;) {
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ']') {
                    ++pos_;
                    break;
                }
                items.push_back(value());
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                expect(']');
                break;
            }
            out.v = std::move(items);
        } else {
            const auto start = pos_;
            while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) && s_[pos_] != ',' &&
                   s_[pos_] != ']' && s_[pos_] != '#')
                ++pos_;
            out.v = scalar(s_.substr(start, pos_ - start));
        }
        return out;
    }

private:
    std::string string() {
        ++pos_; // opening quote
        std::string out;
        while (pos_ < s_.size()) {
            const char c = s_[pos_++];
            if (c == '"') return out;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (pos_ >= s_.size()) break;
            switch (const char e = s_[pos_++]) {
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            default: fail(std::string("unknown escape \\") + e);
            }
        }
        fail("unterminated string");
    }

    std::variant<std::string, std::int64_t, double, bool, Value::Array> scalar(std::string_view t) {
        if (t == "true") return true;
        if (t == "false") return false;
        if (auto i = text::parse_int(t)) return *i;
        if (!t.empty() && (std::isdigit(static_cast<unsigned char>(t[0])) || t[0] == '-' || t[0] == '+' || t[0] == '.')) {
            const std::string tmp(t);
            char* end = nullptr;
            const double d = std::strtod(tmp.c_str(), &end);
            if (end == tmp.c_str() + tmp.size()) return d;
        }
        fail("cannot parse value '" + std::string(t) + "' (strings need double quotes)");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    int line_;
    std::string_view origin_;
};

} // namespace detail

inline Document parse_document(std::string_view text, std::string_view origin = "config") {
    Document doc;
    std::string current;
    doc[current];
    int lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text::chomp_cr(text.substr(start, end - start));
        start = end + 1;
        ++lineno;
        detail::LineParser p(line, lineno, origin);
        if (p.at_end_or_comment()) {
            if (end == text.size()) break;
            continue;
        }
        if (line.find('[') == line.find_first_not_of(" \t")) {
            p.expect('[');
            const auto name = p.section_name();
            p.expect(']');
            if (!p.at_end_or_comment()) p.fail("trailing characters after section header");
            if (doc.contains(name)) p.fail("duplicate section [" + name + "]");
            doc[name].line = lineno;
            current = name;
        } else {
            const auto key = p.key();
            p.expect('=');
            auto v = p.value();
            if (!p.at_end_or_comment()) p.fail("trailing characters after value");
            auto& sec = doc[current];
            if (sec.keys.contains(key)) p.fail("duplicate key '" + key + "'");
            sec.keys.emplace(key, std::move(v));
        }
        if (end == text.size()) break;
    }
    return doc;
}

// ---- typed configuration ----

enum class Backend : std::uint8_t { simulated, raw };

struct ResolverSpec {
    enum class Kind : std::uint8_t { stub, udp } kind = Kind::stub;
    fs::path stub_file;   // kind == stub
    std::string server;   // kind == udp
    std::uint16_t port = 53;
};

struct SourceConfig {
    SourceTag tag;
    std::optional<fs::path> path;      // flow CSV, address list or hop dump
    std::optional<fs::path> hostnames; // names to resolve (DNS-backed kinds)
    std::optional<ResolverSpec> resolver;
};

struct FilterFiles {
    std::vector<Prefix> self_prefixes;
    std::optional<fs::path> fullbogons;
    std::optional<fs::path> iana_special;
    std::optional<fs::path> own_networks;
    std::optional<fs::path> pfx2as;
    std::optional<fs::path> announced;
    std::optional<fs::path> blacklist;
};

struct ProbeConfig {
    std::string profile = "mwn";
    std::vector<Seconds> intervals = kMwnIntervals;
    std::uint64_t rate_limit = 10'000;
    double jitter_fraction = 0.01;
    Backend backend = Backend::simulated;
    std::optional<fs::path> model;
    std::uint64_t seed = 42;
    double loss_rate = 0.0;
    ScanPolicy policy;
    std::uint32_t raw_wait_ms = 1000; // reply wait per probe, raw backend
};

struct AnalyzeConfig {
    ClassifierConfig classifier;
    boost::container::flat_set<PortProtocol> server_ports = default_server_ports();
    std::optional<fs::path> oui;
    Seconds stable_window = 604800;
    bool agility_eui64_only = false;
    std::size_t top_ports = 10;
    Seconds runup_bucket = 86400;
};

struct IngestConfig {
    std::optional<Timestamp> timestamp; // applied to list, hostname and hop sources
    ResolveOptions dns;
};

struct PipelineConfig {
    fs::path file;
    std::string text;
    std::vector<SourceConfig> sources; // ordered by name
    FilterFiles filter;
    ProbeConfig probe;
    AnalyzeConfig analyze;
    IngestConfig ingest;
    fs::path output_dir;

    /// Every file the configuration points at, in a stable order.
    std::vector<fs::path> input_files() const {
        std::vector<fs::path> out;
        for (const auto& s : sources) {
            if (s.path) out.push_back(*s.path);
            if (s.hostnames) out.push_back(*s.hostnames);
            if (s.resolver && s.resolver->kind == ResolverSpec::Kind::stub) out.push_back(s.resolver->stub_file);
        }
        for (const auto* p : {&filter.fullbogons, &filter.iana_special, &filter.own_networks, &filter.pfx2as,
                              &filter.announced, &filter.blacklist, &probe.model, &analyze.oui})
            if (*p) out.push_back(**p);
        return out;
    }
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

/// HITLIST_<SECTION>_<KEY>, upper-cased, with every non-alphanumeric mapped to '_'.
inline std::string env_name(std::string_view section, std::string_view key) {
    std::string out = "HITLIST_";
    auto add = [&](std::string_view s) {
        for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(c)) : '_';
    };
    add(section);
    out += '_';
    add(key);
    return out;
}

namespace detail {

class Builder {
public:
    Builder(const Document& doc, fs::path base, const EnvLookup& env, std::string origin)
        : doc_(doc), base_(std::move(base)), env_(env), origin_(std::move(origin)) {}

    [[noreturn]] void fail(int line, const std::string& why) const {
        throw ConfigError(origin_ + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + why);
    }

    const Section* section(const std::string& name) {
        auto it = doc_.find(name);
        if (it == doc_.end()) return nullptr;
        used_sections_.insert(name);
        return &it->second;
    }

    const Value* get(const std::string& sec, const std::string& key) {
        auto s = doc_.find(sec);
        if (s == doc_.end()) return nullptr;
        auto k = s->second.keys.find(key);
        if (k == s->second.keys.end()) return nullptr;
        used_.insert(sec + "\x1f" + key);
        return &k->second;
    }

    std::optional<std::string> str(const std::string& sec, const std::string& key) {
        const auto* v = get(sec, key);
        if (!v) return std::nullopt;
        if (!v->is_string()) fail(v->line, "'" + key + "' must be a string");
        return std::get<std::string>(v->v);
    }

    std::optional<std::int64_t> integer(const std::string& sec, const std::string& key, std::int64_t min,
                                        std::int64_t max) {
        const auto* v = get(sec, key);
        if (!v) return std::nullopt;
        if (!v->is_int()) fail(v->line, "'" + key + "' must be an integer");
        const auto i = std::get<std::int64_t>(v->v);
        if (i < min || i > max)
            fail(v->line, "'" + key + "' must be in [" + std::to_string(min) + ", " + std::to_string(max) + "]");
        return i;
    }

    std::optional<double> number(const std::string& sec, const std::string& key, double min, double max) {
        const auto* v = get(sec, key);
        if (!v) return std::nullopt;
        double d = 0;
        if (v->is_float())
            d = std::get<double>(v->v);
        else if (v->is_int())
            d = static_cast<double>(std::get<std::int64_t>(v->v));
        else
            fail(v->line, "'" + key + "' must be a number");
        if (!(d >= min && d <= max))
            fail(v->line, "'" + key + "' must be in [" + format_fixed(min, 2) + ", " + format_fixed(max, 2) + "]");
        return d;
    }

    std::optional<bool> boolean(const std::string& sec, const std::string& key) {
        const auto* v = get(sec, key);
        if (!v) return std::nullopt;
        if (!v->is_bool()) fail(v->line, "'" + key + "' must be true or false");
        return std::get<bool>(v->v);
    }

    std::optional<std::vector<std::string>> strings(const std::string& sec, const std::string& key) {
        const auto* v = get(sec, key);
        if (!v) return std::nullopt;
        if (!v->is_array()) fail(v->line, "'" + key + "' must be an array of strings");
        std::vector<std::string> out;
        for (const auto& item : std::get<Value::Array>(v->v)) {
            if (!item.is_string()) fail(v->line, "'" + key + "' must be an array of strings");
            out.push_back(std::get<std::string>(item.v));
        }
        return out;
    }

    std::optional<std::vector<std::int64_t>> integers(const std::string& sec, const std::string& key) {
        const auto* v = get(sec, key);
        if (!v) return std::nullopt;
        if (!v->is_array()) fail(v->line, "'" + key + "' must be an array of integers");
        std::vector<std::int64_t> out;
        for (const auto& item : std::get<Value::Array>(v->v)) {
            if (!item.is_int()) fail(v->line, "'" + key + "' must be an array of integers");
            out.push_back(std::get<std::int64_t>(item.v));
        }
        return out;
    }

    /// A path key, with the environment taking precedence over the file.
    std::optional<fs::path> path(const std::string& sec, const std::string& key) {
        if (auto e = env_(env_name(sec, key)); e && !e->empty()) {
            get(sec, key); // mark as used
            return fs::path(*e);
        }
        auto s = str(sec, key);
        if (!s) return std::nullopt;
        fs::path p(*s);
        return p.is_absolute() ? p : base_ / p;
    }

    int line_of(const std::string& sec, const std::string& key) const {
        auto s = doc_.find(sec);
        if (s == doc_.end()) return 0;
        auto k = s->second.keys.find(key);
        return k == s->second.keys.end() ? s->second.line : k->second.line;
    }

    void reject_unknown() const {
        for (const auto& [name, sec] : doc_) {
            if (!name.empty() && !used_sections_.contains(name))
                fail(sec.line, "unknown section [" + name + "]");
            for (const auto& [key, v] : sec.keys)
                if (!used_.contains(name + "\x1f" + key))
                    fail(v.line, "unknown key '" + key + "'" + (name.empty() ? "" : " in [" + name + "]"));
        }
    }

    const fs::path& base() const noexcept { return base_; }

private:
    const Document& doc_;
    fs::path base_;
    const EnvLookup& env_;
    std::string origin_;
    std::set<std::string> used_;
    std::set<std::string> used_sections_;
};

inline std::vector<std::uint8_t> parse_hex(std::string_view s) {
    std::vector<std::uint8_t> out;
    std::string digits;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) digits += c;
    if (digits.size() % 2) throw Error("odd number of hex digits");
    for (std::size_t i = 0; i < digits.size(); i += 2) {
        const int hi = hitlist::detail::hex_value(digits[i]), lo = hitlist::detail::hex_value(digits[i + 1]);
        if (hi < 0 || lo < 0) throw Error("invalid hex digit");
        out.push_back(static_cast<std::uint8_t>(hi * 16 + lo));
    }
    return out;
}

} // namespace detail

/// Builds the typed configuration and checks that every referenced file exists.
/// All missing files are reported in one ConfigError.
inline PipelineConfig build(const Document& doc, const fs::path& base_dir, const EnvLookup& env = process_env,
                            std::string origin = "config") {
    detail::Builder b(doc, base_dir, env, origin);
    PipelineConfig cfg;

    // sources
    for (const auto& [name, sec] : doc) {
        if (!name.starts_with("sources.")) continue;
        const auto sname = name.substr(8);
        if (sname.empty() || sname.find('.') != std::string::npos) b.fail(sec.line, "bad source section [" + name + "]");
        b.section(name);
        SourceConfig s;
        const auto kind_text = b.str(name, "kind");
        if (!kind_text) b.fail(sec.line, "[" + name + "] needs a 'kind'");
        auto kind = parse_source_kind(*kind_text);
        if (!kind) {
            std::string valid;
            for (auto k : kAllSourceKinds) valid += (valid.empty() ? "" : ", ") + std::string(to_string(k));
            b.fail(b.line_of(name, "kind"), "unknown source kind '" + *kind_text + "'; valid values: " + valid);
        }
        s.tag = SourceTag{*kind, sname};
        s.path = b.path(name, "path");
        s.hostnames = b.path(name, "hostnames");
        if (auto r = b.str(name, "resolver")) {
            ResolverSpec spec;
            if (r->starts_with("stub:")) {
                spec.kind = ResolverSpec::Kind::stub;
                fs::path p(r->substr(5));
                spec.stub_file = p.is_absolute() ? p : base_dir / p;
            } else if (r->starts_with("udp:")) {
                spec.kind = ResolverSpec::Kind::udp;
                std::string rest = r->substr(4);
                // "udp:[2001:db8::53]:5353", "udp:192.0.2.1:53", "udp:2001:db8::53"
                if (rest.starts_with("[")) {
                    const auto close = rest.find(']');
                    if (close == std::string::npos) b.fail(b.line_of(name, "resolver"), "unterminated '[' in resolver");
                    spec.server = rest.substr(1, close - 1);
                    if (close + 1 < rest.size()) {
                        if (rest[close + 1] != ':') b.fail(b.line_of(name, "resolver"), "bad resolver port");
                        auto port = text::parse_uint<std::uint16_t>(std::string_view(rest).substr(close + 2), 65535);
                        if (!port || *port == 0) b.fail(b.line_of(name, "resolver"), "bad resolver port");
                        spec.port = *port;
                    }
                } else if (std::count(rest.begin(), rest.end(), ':') == 1) {
                    const auto colon = rest.find(':');
                    spec.server = rest.substr(0, colon);
                    auto port = text::parse_uint<std::uint16_t>(std::string_view(rest).substr(colon + 1), 65535);
                    if (!port || *port == 0) b.fail(b.line_of(name, "resolver"), "bad resolver port");
                    spec.port = *port;
                } else {
                    spec.server = rest;
                }
                if (spec.server.empty()) b.fail(b.line_of(name, "resolver"), "resolver address is empty");
            } else {
                b.fail(b.line_of(name, "resolver"), "resolver must be 'stub:<file>' or 'udp:<address>[:port]'");
            }
            s.resolver = std::move(spec);
        }
        const bool dns_kind = *kind != SourceKind::passive_flow && *kind != SourceKind::traceroute;
        if (s.hostnames && !dns_kind)
            b.fail(b.line_of(name, "hostnames"), "'hostnames' is only valid for DNS-backed source kinds");
        if (s.hostnames && !s.resolver) b.fail(sec.line, "[" + name + "] has 'hostnames' but no 'resolver'");
        if (s.resolver && !s.hostnames) b.fail(sec.line, "[" + name + "] has a 'resolver' but no 'hostnames'");
        if (!s.path && !s.hostnames) b.fail(sec.line, "[" + name + "] needs 'path' or 'hostnames'");
        cfg.sources.push_back(std::move(s));
    }
    if (doc.contains("sources")) b.fail(doc.at("sources").line, "sources are declared as [sources.<name>]");

    // filter
    b.section("filter");
    if (auto list = b.strings("filter", "self_prefixes")) {
        for (const auto& p : *list) {
            try {
                cfg.filter.self_prefixes.push_back(parse_prefix(p));
            } catch (const Error& e) {
                b.fail(b.line_of("filter", "self_prefixes"), e.what());
            }
        }
    }
    cfg.filter.fullbogons = b.path("filter", "fullbogons");
    cfg.filter.iana_special = b.path("filter", "iana_special");
    cfg.filter.own_networks = b.path("filter", "own_networks");
    cfg.filter.pfx2as = b.path("filter", "pfx2as");
    cfg.filter.announced = b.path("filter", "announced");
    cfg.filter.blacklist = b.path("filter", "blacklist");

    // probe
    b.section("probe");
    auto& probe = cfg.probe;
    if (auto profile = b.str("probe", "profile")) {
        if (*profile == "mwn")
            probe.intervals = kMwnIntervals;
        else if (*profile == "ixp")
            probe.intervals = kIxpIntervals;
        else
            b.fail(b.line_of("probe", "profile"), "profile must be \"mwn\" or \"ixp\"");
        probe.profile = *profile;
    }
    if (auto iv = b.integers("probe", "intervals")) {
        probe.intervals.assign(iv->begin(), iv->end());
        probe.profile = "custom";
        if (probe.intervals.empty()) b.fail(b.line_of("probe", "intervals"), "intervals must not be empty");
        for (std::size_t i = 0; i < probe.intervals.size(); ++i)
            if (probe.intervals[i] <= 0 || (i > 0 && probe.intervals[i] <= probe.intervals[i - 1]))
                b.fail(b.line_of("probe", "intervals"), "intervals must be positive and strictly increasing");
    }
    if (auto v = b.integer("probe", "rate_limit", 1, 100'000'000)) probe.rate_limit = static_cast<std::uint64_t>(*v);
    if (auto v = b.number("probe", "jitter_fraction", 0.0, 1.0)) probe.jitter_fraction = *v;
    if (auto v = b.str("probe", "backend")) {
        if (*v == "simulated")
            probe.backend = Backend::simulated;
        else if (*v == "raw")
            probe.backend = Backend::raw;
        else
            b.fail(b.line_of("probe", "backend"), "backend must be \"simulated\" or \"raw\"");
    }
    probe.model = b.path("probe", "model");
    if (auto v = b.integer("probe", "seed", 0, INT64_MAX)) probe.seed = static_cast<std::uint64_t>(*v);
    if (auto v = b.number("probe", "loss_rate", 0.0, 1.0)) probe.loss_rate = *v;
    if (auto v = b.boolean("probe", "probe_unmapped_udp")) probe.policy.probe_unmapped_udp = *v;
    if (auto v = b.integer("probe", "raw_wait_ms", 1, 60'000)) probe.raw_wait_ms = static_cast<std::uint32_t>(*v);
    if (const auto* sec = b.section("probe.payloads")) {
        for (const auto& [key, val] : sec->keys) {
            auto pp = parse_port_protocol(key);
            if (!pp || pp->transport != Transport::udp) b.fail(val.line, "payload keys look like udp<port>, got '" + key + "'");
            auto hex = b.str("probe.payloads", key);
            try {
                probe.policy.udp_payloads[*pp->port] = detail::parse_hex(*hex);
            } catch (const Error& e) {
                b.fail(val.line, "payload for " + key + ": " + e.what());
            }
        }
    }
    if (probe.backend == Backend::raw && !cfg.filter.blacklist)
        b.fail(b.line_of("probe", "backend"), "the raw backend requires [filter] blacklist");

    // analyze
    b.section("analyze");
    auto& an = cfg.analyze;
    if (auto v = b.integer("analyze", "low_threshold", 0, 64)) an.classifier.low_threshold = static_cast<unsigned>(*v);
    if (auto v = b.integer("analyze", "privacy_min_weight", 0, 64))
        an.classifier.privacy_min_weight = static_cast<unsigned>(*v);
    if (auto v = b.integer("analyze", "privacy_max_weight", 0, 64))
        an.classifier.privacy_max_weight = static_cast<unsigned>(*v);
    try {
        an.classifier.validate();
    } catch (const Error& e) {
        b.fail(b.line_of("analyze", "privacy_min_weight"), e.what());
    }
    if (auto ports = b.strings("analyze", "server_ports")) {
        an.server_ports.clear();
        for (const auto& p : *ports) {
            auto pp = parse_port_protocol(p);
            if (!pp || pp->transport == Transport::icmp6)
                b.fail(b.line_of("analyze", "server_ports"), "bad server port '" + p + "' (use tcp80, udp443, ...)");
            an.server_ports.insert(*pp);
        }
    }
    an.oui = b.path("analyze", "oui");
    if (auto v = b.integer("analyze", "stable_window", 1, INT64_MAX / kMicrosPerSecond)) an.stable_window = *v;
    if (auto v = b.boolean("analyze", "agility_eui64_only")) an.agility_eui64_only = *v;
    if (auto v = b.integer("analyze", "top_ports", 1, 1'000'000)) an.top_ports = static_cast<std::size_t>(*v);
    if (auto v = b.integer("analyze", "runup_bucket", 1, INT64_MAX)) an.runup_bucket = *v;

    // ingest
    b.section("ingest");
    if (auto v = b.integer("ingest", "timestamp", INT64_MIN, INT64_MAX)) cfg.ingest.timestamp = *v;
    if (auto v = b.integer("ingest", "dns_concurrency", 1, 1024)) cfg.ingest.dns.concurrency = static_cast<unsigned>(*v);
    if (auto v = b.integer("ingest", "dns_timeout_ms", 1, 600'000)) cfg.ingest.dns.timeout = std::chrono::milliseconds(*v);
    if (auto v = b.integer("ingest", "dns_failure_threshold", 1, 1'000'000))
        cfg.ingest.dns.failure_threshold = static_cast<unsigned>(*v);

    // output
    b.section("output");
    cfg.output_dir = b.path("output", "dir").value_or(base_dir / "out");

    b.reject_unknown();

    std::vector<std::string> missing;
    for (const auto& f : cfg.input_files())
        if (!fs::is_regular_file(f)) missing.push_back(f.string());
    if (!missing.empty()) {
        std::string msg = origin + ": missing input file" + (missing.size() > 1 ? "s" : "") + ":";
        for (const auto& m : missing) msg += "\n  " + m;
        throw ConfigError(msg);
    }
    return cfg;
}

inline PipelineConfig load(const fs::path& file, const EnvLookup& env = process_env) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto text = ss.str();
    auto doc = parse_document(text, file.string());
    auto base = file.parent_path();
    if (base.empty()) base = ".";
    auto cfg = build(doc, base, env, file.string());
    cfg.file = file;
    cfg.text = text;
    return cfg;
}

} // namespace hitlist::config
