#pragma once

// Seeded synthetic world for demos and end-to-end tests: a small routing
// table, hosts of several kinds (servers, clients, CPE with EUI-64 IIDs,
// BitTorrent peers, routers), the source files that observe them, filter
// lists, a simulated responder model and a config tying it together.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitlist/addr.hpp"
#include "hitlist/error.hpp"
#include "hitlist/probe.hpp"
#include "hitlist/report.hpp"
#include "hitlist/rng.hpp"
#include "hitlist/source.hpp"

namespace hitlist::fixture {

namespace fs = std::filesystem;

struct Options {
    std::uint64_t seed = 42;
    unsigned servers = 240;
    unsigned clients = 600;
    unsigned cpe = 160;
    unsigned peers = 200;
    unsigned routers = 120;
    unsigned days = 14;
    Timestamp start = 1'500'000'000;
};

/// What the generator built, for tests that check recovery.
struct GroundTruth {
    std::uint64_t peers = 0;
    std::uint64_t peers_dropping_icmp = 0;
    std::uint64_t cpe_iids = 0;
    std::uint64_t agile_cpe_iids = 0;
    std::vector<std::string> files; // relative names, sorted
};

namespace detail {

inline constexpr std::uint32_t kBase = 0x2a0a0100; // AS i announces 2a0a:(100+i)::/32
inline constexpr unsigned kAsCount = 30;
inline constexpr AsNumber kFirstAs = 64500;
inline constexpr unsigned kUnannouncedAs = 28; // in pfx2as, missing from the announced list
inline constexpr std::uint16_t kBlacklistedSubnet = 0x0bad;

struct Vendor {
    std::uint32_t oui;
    std::string_view name;
};

inline constexpr Vendor kVendors[] = {
    {0x001a2b, "Example Networks Inc."},
    {0x3c4d5e, "Sample Devices GmbH"},
    {0x7c8d9e, "Demo Home Gateways Ltd."},
    {0xa0b1c2, "Placeholder Electronics Co."},
    {0xd4e5f6, "Fictional Mobile Corp."},
};

class World {
public:
    explicit World(const Options& o) : opt_(o), rng_(o.seed) {}

    const GroundTruth& truth() const noexcept { return truth_; }

    void build() {
        const Timestamp end = opt_.start + static_cast<Timestamp>(opt_.days) * 86400;
        list_ts_ = end;
        make_servers();
        make_clients();
        make_cpe();
        make_peers();
        make_routers();
        make_noise();
    }

    void write(const fs::path& dir) {
        fs::create_directories(dir);
        auto put = [&](const std::string& name, const std::string& body) {
            std::ofstream out(dir / name, std::ios::binary);
            if (!out) throw Error("cannot write " + (dir / name).string());
            out << body;
            truth_.files.push_back(name);
        };
        put("flows_mwn.csv", flows_csv(mwn_flows_));
        put("flows_ixp.csv", flows_csv(ixp_flows_));
        put("alexa_hostnames.txt", lines("# popular web names\n", alexa_names_));
        put("dns_any_hostnames.txt", lines("# names from ANY queries\n", any_names_));
        put("stub_dns.txt", stub_table());
        put("rdns.txt", lines("# reverse DNS walk\n", addrs(rdns_)));
        put("zone_file.txt", lines("# AAAA records from zone files\n", addrs(zone_)));
        put("caida_dns_names.txt", lines("# router interface addresses\n", addrs(caida_)));
        put("traceroute_hops.txt", lines("# hops towards active-source targets\n", addrs(hops_)));
        put("pfx2as.txt", pfx2as());
        put("announced.txt", announced());
        put("fullbogons.txt", "# unallocated space\n3ffe::/16\n2c0e::/16\n");
        put("iana_special.txt", "::1/128\n::ffff:0:0/96\n2001::/23\n2001:db8::/32\nfc00::/7\nfe80::/10\n");
        put("own_networks.txt", "# the monitored network\n" + prefix32(0).to_string() + "\n");
        put("blacklist.txt", "# opted out\n" + blacklist_prefix().to_string() + "\n");
        put("oui.txt", oui_file());
        put("model.json", report::responder_model_json(model_).dump(1) + "\n");
        put("config.toml", config_text());
        std::sort(truth_.files.begin(), truth_.files.end());
    }

private:
    static Prefix prefix32(unsigned as_index) {
        return Prefix(Address128{static_cast<std::uint64_t>(kBase + as_index) << 32, 0}, 32);
    }
    static Prefix blacklist_prefix() {
        return Prefix(Address128{(static_cast<std::uint64_t>(kBase + 1) << 32) | (std::uint64_t{kBlacklistedSubnet} << 16), 0},
                      48);
    }
    static Prefix more_specific() { // announced by an extra AS inside AS 5's /32
        return Prefix(Address128{(static_cast<std::uint64_t>(kBase + 5) << 32) | (std::uint64_t{0x00ff} << 16), 0}, 48);
    }
    static Prefix self_prefix() {
        return Prefix(Address128{(static_cast<std::uint64_t>(kBase) << 32) | (std::uint64_t{1} << 16), 0}, 48);
    }

    /// A /64 in a "clean" AS: announced, not own, not blacklisted.
    std::uint64_t clean_subnet() {
        const auto as = static_cast<unsigned>(rng_.between(1, kUnannouncedAs - 1));
        return subnet_in(as);
    }
    std::uint64_t subnet_in(unsigned as) {
        std::uint64_t s48;
        do s48 = rng_.between(2, 0x0fff);
        while (s48 == kBlacklistedSubnet || (as == 5 && s48 == 0x00ff));
        return (static_cast<std::uint64_t>(kBase + as) << 32) | (s48 << 16) | rng_.below(0x10000);
    }

    Timestamp flow_time() { return opt_.start + rng_.between(0, static_cast<std::int64_t>(opt_.days) * 86400 - 1); }

    struct Flow {
        Timestamp ts;
        Address128 src, dst;
        PortProtocol pp;
    };

    void flow(std::vector<Flow>& sink, Timestamp ts, const Address128& src, const Address128& dst, PortProtocol pp) {
        sink.push_back(Flow{ts, src, dst, pp});
    }

    std::vector<Flow>& some_flows() { return rng_.chance(0.5) ? mwn_flows_ : ixp_flows_; }

    void add_host(const Address128& a, Responder r) {
        auto it = model_.find(a);
        if (it == model_.end())
            model_.emplace(a, std::move(r));
        else
            it->second.responds_to.insert(r.responds_to.begin(), r.responds_to.end());
    }

    void make_servers() {
        static const PortProtocol kPorts[] = {
            {Transport::tcp, 80}, {Transport::tcp, 443}, {Transport::udp, 443}, {Transport::udp, 53}};
        for (unsigned i = 0; i < opt_.servers; ++i) {
            const std::uint64_t iid = rng_.chance(0.6) ? rng_.between(1, 0x1ff) : (rng_.next() | kUniversalLocalBit);
            const Address128 a{clean_subnet(), iid};
            servers_.push_back(a);
            Responder r;
            r.birth = opt_.start - 30 * 86400;
            if (rng_.chance(0.05)) r.lifetime = 30 * 86400 + rng_.between(0, static_cast<std::int64_t>(opt_.days) * 86400);
            r.responds_to.insert({Transport::icmp6, std::nullopt});
            r.drops_icmp = rng_.chance(0.1);
            std::vector<PortProtocol> ports;
            for (const auto& pp : kPorts)
                if (rng_.chance(pp.port == 80 || pp.port == 443 ? 0.6 : 0.2)) ports.push_back(pp);
            if (ports.empty()) ports.push_back(kPorts[1]);
            for (const auto& pp : ports)
                if (rng_.chance(0.9)) r.responds_to.insert(pp);

            const std::string name = "www" + std::to_string(i) + ".example" + std::to_string(i % 37) + ".net";
            if (rng_.chance(0.5)) {
                alexa_names_.push_back(name);
                stub_.emplace_back(name, a);
            }
            if (rng_.chance(0.3)) {
                const std::string any = "any" + std::to_string(i) + ".example" + std::to_string(i % 11) + ".org";
                any_names_.push_back(any);
                stub_.emplace_back(any, a);
            }
            if (rng_.chance(0.4)) rdns_.push_back(a);
            if (rng_.chance(0.4)) zone_.push_back(a);
            if (rng_.chance(0.6)) {
                const unsigned n = static_cast<unsigned>(rng_.between(1, 4));
                for (unsigned k = 0; k < n; ++k)
                    flow(some_flows(), flow_time(), Address128{clean_subnet(), rng_.privacy_iid().bits}, a,
                         ports[rng_.below(ports.size())]);
            }
            add_host(a, std::move(r));
        }
        // names the resolver does not know
        for (int i = 0; i < 5; ++i) alexa_names_.push_back("gone" + std::to_string(i) + ".example.com");
        alexa_names_.push_back("bad..name");
    }

    const Address128& pick_server() { return servers_[rng_.below(servers_.size())]; }

    void make_clients() {
        for (unsigned i = 0; i < opt_.clients; ++i) {
            const bool own = rng_.chance(0.08);
            const Address128 a{own ? subnet_in(0) : clean_subnet(), rng_.privacy_iid().bits};
            const auto first = flow_time();
            const unsigned n = static_cast<unsigned>(rng_.between(1, 3));
            auto& sink = some_flows();
            Timestamp last = first;
            for (unsigned k = 0; k < n; ++k) {
                const Timestamp ts = first + rng_.between(0, 3600);
                last = std::max(last, ts);
                const PortProtocol pp = rng_.chance(0.8) ? PortProtocol{Transport::tcp, 443} : PortProtocol{Transport::udp, 443};
                flow(sink, ts, a, pick_server(), pp);
            }
            Responder r;
            r.birth = first;
            r.lifetime = (last - first) + static_cast<Seconds>(rng_.exponential(86400.0));
            r.responds_to.insert({Transport::icmp6, std::nullopt});
            r.drops_icmp = rng_.chance(0.25);
            add_host(a, std::move(r));
        }
        // traffic from the vantage point itself
        for (int i = 0; i < 12; ++i) {
            const Address128 self{self_prefix().base().hi | rng_.below(0x10000), rng_.privacy_iid().bits};
            flow(mwn_flows_, flow_time(), self, pick_server(), {Transport::tcp, 443});
        }
    }

    void make_cpe() {
        for (unsigned i = 0; i < opt_.cpe; ++i) {
            Mac48 mac = rng_.mac();
            if (!rng_.chance(0.15)) {
                const auto& v = kVendors[rng_.below(std::size(kVendors))];
                mac.octets[0] = static_cast<std::uint8_t>(v.oui >> 16);
                mac.octets[1] = static_cast<std::uint8_t>(v.oui >> 8);
                mac.octets[2] = static_cast<std::uint8_t>(v.oui);
            } else {
                mac.octets[0] &= 0xfc; // keep it a plausible unicast, universally administered MAC
            }
            const auto iid = eui64_encode(mac);
            const Address128 a{clean_subnet(), iid.bits};
            ++truth_.cpe_iids;
            const auto first = flow_time();
            flow(some_flows(), first, a, pick_server(), {Transport::tcp, 443});
            Responder r;
            r.birth = first;
            r.responds_to.insert({Transport::icmp6, std::nullopt});
            r.drops_icmp = rng_.chance(0.2);
            add_host(a, r);
            if (rng_.chance(0.14)) {
                // renumbered into a new /64 later on
                ++truth_.agile_cpe_iids;
                const Address128 b{clean_subnet(), iid.bits};
                flow(some_flows(), first + rng_.between(86400, 3 * 86400), b, pick_server(), {Transport::tcp, 80});
                add_host(b, r);
            }
            if (rng_.chance(0.1)) caida_.push_back(a);
        }
    }

    void make_peers() {
        std::vector<Address128> peers;
        for (unsigned i = 0; i < opt_.peers; ++i) peers.push_back(Address128{clean_subnet(), rng_.privacy_iid().bits});
        // an exact share of peers drop ICMPv6 echo requests
        const std::uint64_t dropping = (static_cast<std::uint64_t>(opt_.peers) * 645 + 500) / 1000;
        truth_.peers = peers.size();
        truth_.peers_dropping_icmp = dropping;
        std::vector<std::size_t> order(peers.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.below(i)]);
        std::vector<bool> drops(peers.size(), false);
        for (std::uint64_t k = 0; k < dropping; ++k) drops[order[k]] = true;

        const PortProtocol bt{Transport::udp, 49001};
        for (std::size_t i = 0; i < peers.size(); ++i) {
            const auto& other = peers[(i + 1 + rng_.below(peers.size() - 1)) % peers.size()];
            const auto ts = flow_time();
            flow(ixp_flows_, ts, peers[i], other, bt);
            Responder r;
            r.birth = opt_.start - 86400;
            r.responds_to.insert({Transport::icmp6, std::nullopt});
            r.responds_to.insert(bt);
            r.drops_icmp = drops[i];
            add_host(peers[i], std::move(r));
        }
    }

    void make_routers() {
        for (unsigned i = 0; i < opt_.routers; ++i) {
            const std::uint64_t iid =
                rng_.chance(0.8) ? rng_.between(1, 4) : eui64_encode(rng_.mac()).bits;
            const Address128 a{clean_subnet(), iid};
            Responder r;
            r.birth = opt_.start - 365 * 86400;
            r.responds_to.insert({Transport::icmp6, std::nullopt});
            add_host(a, std::move(r));
            const bool in_caida = rng_.chance(0.7);
            if (in_caida) caida_.push_back(a);
            if (!in_caida || rng_.chance(0.5)) hops_.push_back(a);
        }
        // traces also revisit a few known servers
        for (int i = 0; i < 10; ++i) hops_.push_back(pick_server());
    }

    void make_noise() {
        auto junk = [&](Address128 a) { flow(some_flows(), flow_time(), a, pick_server(), {Transport::tcp, 443}); };
        for (int i = 0; i < 6; ++i) junk(Address128{0x3ffe000000000000ULL | rng_.below(1ULL << 40), rng_.next()});
        for (int i = 0; i < 6; ++i) junk(Address128{0x20010db800000000ULL | rng_.below(1ULL << 32), rng_.next()});
        for (int i = 0; i < 6; ++i) junk(Address128{0x2a0c000000000000ULL | rng_.below(1ULL << 32), rng_.next()});
        for (int i = 0; i < 6; ++i)
            junk(Address128{blacklist_prefix().base().hi | rng_.below(0x10000), rng_.privacy_iid().bits});
        for (int i = 0; i < 6; ++i) junk(Address128{subnet_in(kUnannouncedAs), rng_.privacy_iid().bits});
        for (int i = 0; i < 4; ++i) junk(Address128{(subnet_in(5) & 0xffffffff0000ffffULL) | (0x00ffULL << 16), rng_.next()});
        junk(Address128{0, 1}); // ::1 leaked into a trace
        rdns_.push_back(Address128{0xfe80000000000000ULL, rng_.next()});
    }

    static std::vector<std::string> addrs(const std::vector<Address128>& v) {
        std::vector<std::string> out;
        for (const auto& a : v) out.push_back(canonical_text(a));
        return out;
    }

    static std::string lines(std::string header, const std::vector<std::string>& items) {
        for (const auto& s : items) header += s + "\n";
        return header;
    }

    std::string flows_csv(std::vector<Flow> flows) const {
        std::stable_sort(flows.begin(), flows.end(), [](const Flow& a, const Flow& b) { return a.ts < b.ts; });
        std::string out(kFlowHeader);
        out += "\n";
        for (const auto& f : flows) {
            out += std::to_string(f.ts) + "," + canonical_text(f.src) + "," + canonical_text(f.dst) + "," +
                   std::string(to_string(f.pp.transport)) + "," + (f.pp.port ? std::to_string(*f.pp.port) : "") + "\n";
        }
        out += "not-a-timestamp,::1,::2,tcp,80\n";
        return out;
    }

    std::string stub_table() const {
        std::string out = "# name address\n";
        for (const auto& [name, a] : stub_) out += name + " " + canonical_text(a) + "\n";
        return out;
    }

    static std::string pfx2as() {
        std::string out;
        for (unsigned i = 0; i < kAsCount; ++i) {
            const auto p = prefix32(i);
            std::string origin = std::to_string(kFirstAs + i);
            if (i == kAsCount - 1) origin += "_" + std::to_string(kFirstAs + kAsCount + 1); // MOAS
            out += canonical_text(p.base()) + "\t" + std::to_string(p.length()) + "\t" + origin + "\n";
        }
        const auto ms = more_specific();
        out += canonical_text(ms.base()) + "\t48\t" + std::to_string(kFirstAs + kAsCount) + "\n";
        return out;
    }

    static std::string announced() {
        std::string out = "# prefixes visible in BGP\n";
        for (unsigned i = 0; i < kAsCount; ++i)
            if (i != kUnannouncedAs) out += prefix32(i).to_string() + "\n";
        out += more_specific().to_string() + "\n";
        return out;
    }

    static std::string oui_file() {
        std::string out = "OUI/MA-L                                                    Organization\n"
                          "company_id                                                  Organization\n\n";
        for (const auto& v : kVendors) {
            char hex[16];
            std::snprintf(hex, sizeof hex, "%02X-%02X-%02X", v.oui >> 16, (v.oui >> 8) & 0xff, v.oui & 0xff);
            out += std::string(hex) + "   (hex)\t\t" + std::string(v.name) + "\n\n";
        }
        return out;
    }

    std::string config_text() const {
        std::ostringstream c;
        c << "# Synthetic demo pipeline (generated with seed " << opt_.seed << ")\n\n"
          << "[sources.mwn]\nkind = \"passive_flow\"\npath = \"flows_mwn.csv\"\n\n"
          << "[sources.ixp]\nkind = \"passive_flow\"\npath = \"flows_ixp.csv\"\n\n"
          << "[sources.alexa]\nkind = \"alexa\"\nhostnames = \"alexa_hostnames.txt\"\nresolver = \"stub:stub_dns.txt\"\n\n"
          << "[sources.any]\nkind = \"dns_any\"\nhostnames = \"dns_any_hostnames.txt\"\nresolver = \"stub:stub_dns.txt\"\n\n"
          << "[sources.rdns]\nkind = \"rdns\"\npath = \"rdns.txt\"\n\n"
          << "[sources.zones]\nkind = \"zone_file\"\npath = \"zone_file.txt\"\n\n"
          << "[sources.caida]\nkind = \"caida_dns_names\"\npath = \"caida_dns_names.txt\"\n\n"
          << "[sources.traces]\nkind = \"traceroute\"\npath = \"traceroute_hops.txt\"\n\n"
          << "[ingest]\ntimestamp = " << list_ts_ << "\n\n"
          << "[filter]\nself_prefixes = [\"" << self_prefix().to_string() << "\"]\n"
          << "fullbogons = \"fullbogons.txt\"\niana_special = \"iana_special.txt\"\n"
          << "own_networks = \"own_networks.txt\"\npfx2as = \"pfx2as.txt\"\nannounced = \"announced.txt\"\n"
          << "blacklist = \"blacklist.txt\"\n\n"
          << "[probe]\nprofile = \"mwn\"\nbackend = \"simulated\"\nmodel = \"model.json\"\nseed = " << opt_.seed
          << "\nrate_limit = 10000\n\n"
          << "[analyze]\noui = \"oui.txt\"\nlow_threshold = 16\nserver_ports = [\"tcp80\", \"tcp443\", \"udp443\"]\n\n"
          << "[output]\ndir = \"out\"\n";
        return c.str();
    }

    Options opt_;
    Rng rng_;
    GroundTruth truth_;
    Timestamp list_ts_ = 0;
    std::vector<Address128> servers_;
    std::vector<Flow> mwn_flows_, ixp_flows_;
    std::vector<std::string> alexa_names_, any_names_;
    std::vector<std::pair<std::string, Address128>> stub_;
    std::vector<Address128> rdns_, zone_, caida_, hops_;
    ResponderModel model_;
};

} // namespace detail

/// Generates the synthetic world into `dir` (created if needed).
inline GroundTruth generate(const fs::path& dir, const Options& opt = {}) {
    detail::World w(opt);
    w.build();
    w.write(dir);
    return w.truth();
}

} // namespace hitlist::fixture
