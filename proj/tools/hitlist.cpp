// hitlist: command-line driver for the target-list pipeline.
//
// Exit codes: 0 success (possibly with warnings), 2 usage, config or input
// error, 3 safety refusal, 1 anything unexpected.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hitlist/artifact.hpp"
#include "hitlist/config.hpp"
#include "hitlist/error.hpp"
#include "hitlist/filter.hpp"
#include "hitlist/fixture.hpp"
#include "hitlist/pipeline.hpp"
#include "hitlist/probe.hpp"
#include "hitlist/raw_prober.hpp"
#include "hitlist/recommend.hpp"
#include "hitlist/report.hpp"
#include "hitlist/version.hpp"
#include "sha256.hpp"

namespace fs = std::filesystem;
using hitlist::report::Json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRefused = 3;

class SafetyRefusal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    bool quiet = false;
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

/// Collects what a run read and wrote, then writes manifest.<command>.json.
class Manifest {
public:
    Manifest(std::string command, const Globals& g) : command_(std::move(command)), g_(g) {}

    void config(const hitlist::config::PipelineConfig& cfg) {
        config_path_ = cfg.file.string();
        config_hash_ = hitlist::tools::sha256_hex(cfg.text);
        seed_ = cfg.probe.seed;
        for (const auto& f : cfg.input_files()) input(f);
    }
    void input(const fs::path& p) {
        if (fs::is_regular_file(p))
            inputs_[p.string()] = {hitlist::tools::sha256_file(p), fs::file_size(p)};
    }
    void output(const fs::path& p) {
        outputs_[p.filename().string()] = {hitlist::tools::sha256_file(p), fs::file_size(p)};
    }
    void count(const std::string& k, std::uint64_t v) { counts_[k] = v; }
    void timing(const std::string& k, double ms) { timings_[k] = ms; }

    void write(const fs::path& dir) const {
        Json inputs = Json::array();
        for (const auto& [p, d] : inputs_) inputs.push_back({{"path", p}, {"sha256", d.first}, {"bytes", d.second}});
        Json outputs = Json::array();
        for (const auto& [p, d] : outputs_) outputs.push_back({{"file", p}, {"sha256", d.first}, {"bytes", d.second}});
        Json counts = Json::object();
        for (const auto& [k, v] : counts_) counts[k] = v;
        Json timings = Json::object();
        for (const auto& [k, v] : timings_) timings[k] = hitlist::format_fixed(v, 3);
        Json j{{"tool", "hitlist"},
               {"version", std::string(hitlist::kVersion)},
               {"command", command_},
               {"config", {{"path", config_path_}, {"sha256", config_hash_}}},
               {"seed", seed_ ? Json(*seed_) : Json(nullptr)},
               {"threads", g_.threads},
               {"inputs", inputs},
               {"outputs", outputs},
               {"counts", counts},
               {"timings_ms", timings}};
        std::ofstream out(dir / ("manifest." + command_ + ".json"), std::ios::binary);
        out << hitlist::report::dump(j);
    }

private:
    std::string command_;
    const Globals& g_;
    std::string config_path_;
    std::string config_hash_;
    std::optional<std::uint64_t> seed_;
    std::map<std::string, std::pair<std::string, std::uintmax_t>> inputs_;
    std::map<std::string, std::pair<std::string, std::uintmax_t>> outputs_;
    std::map<std::string, std::uint64_t> counts_;
    std::map<std::string, double> timings_;
};

/// Writes through a temporary file so readers never see half a file.
template <typename F>
void write_file(const fs::path& p, F&& body) {
    fs::create_directories(p.parent_path());
    const auto tmp = fs::path(p.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw hitlist::Error("cannot write " + tmp.string());
        body(out);
        if (!out) throw hitlist::Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, p);
}

void write_text(const fs::path& p, const std::string& s) {
    write_file(p, [&](std::ostream& o) { o << s; });
}

void write_schema(const fs::path& artifact, std::string_view magic) {
    write_text(fs::path(artifact.string() + ".schema.json"), hitlist::report::dump(hitlist::artifact::schema(magic)));
}

std::ifstream open_artifact(const fs::path& dir, const std::string& name, const std::string& producer) {
    const auto p = dir / name;
    if (!fs::is_regular_file(p))
        throw hitlist::ConfigError("missing artifact " + p.string() + " (run 'hitlist " + producer + "' first)");
    return std::ifstream(p, std::ios::binary);
}

struct Context {
    Globals g;
    hitlist::config::PipelineConfig cfg;
    fs::path out;

    void note(const std::string& s) const {
        if (!g.quiet) std::cout << s << "\n";
    }
    void warn(const std::string& s) const { std::cerr << "warning: " << s << "\n"; }
};

Context load_context(const Globals& g) {
    if (g.config.empty()) throw hitlist::ConfigError("--config is required for this command");
    Context c;
    c.g = g;
    c.cfg = hitlist::config::load(g.config);
    if (g.seed) c.cfg.probe.seed = *g.seed;
    c.out = g.out.empty() ? c.cfg.output_dir : fs::path(g.out);
    fs::create_directories(c.out);
    return c;
}

int cmd_ingest(const Globals& g) {
    const auto t0 = Clock::now();
    auto c = load_context(g);
    Manifest m("ingest", g);
    m.config(c.cfg);
    if (c.cfg.sources.empty()) throw hitlist::ConfigError("no [sources.<name>] sections in " + g.config);

    auto r = hitlist::pipeline::ingest(c.cfg);
    m.timing("ingest", ms_since(t0));
    const auto targets = c.out / "targets.bin";
    const auto obs = c.out / "observations.bin";
    write_file(targets, [&](std::ostream& o) { hitlist::artifact::write_targets(o, r.targets); });
    write_schema(targets, hitlist::artifact::kTargetsMagic);
    write_file(obs, [&](std::ostream& o) { hitlist::artifact::write_observations(o, r.observations); });
    write_schema(obs, hitlist::artifact::kObservationsMagic);
    write_text(c.out / "ingest_report.json", hitlist::report::dump(r.report));
    for (const auto& p : {targets, obs, c.out / "ingest_report.json"}) m.output(p);
    m.count("observations", r.observations.size());
    m.count("targets", r.targets.size());
    m.timing("total", ms_since(t0));
    m.write(c.out);
    c.note("ingested " + std::to_string(r.observations.size()) + " observations, " + std::to_string(r.targets.size()) +
           " distinct addresses -> " + targets.string());
    return 0;
}

int cmd_filter(const Globals& g) {
    const auto t0 = Clock::now();
    auto c = load_context(g);
    Manifest m("filter", g);
    m.config(c.cfg);
    auto in = open_artifact(c.out, "targets.bin", "ingest");
    m.input(c.out / "targets.bin");
    const auto targets = hitlist::artifact::read_targets(in);
    const auto fc = hitlist::pipeline::load_filter(c.cfg);
    const auto t1 = Clock::now();
    const auto r = hitlist::apply_cascade(targets, fc, g.threads);
    m.timing("cascade", ms_since(t1));

    const auto filtered = c.out / "filtered.bin";
    write_file(filtered, [&](std::ostream& o) { hitlist::artifact::write_targets(o, r.filtered); });
    write_schema(filtered, hitlist::artifact::kTargetsMagic);
    const auto table = hitlist::report::stage_table(r.report);
    write_text(c.out / "filter_report.json", hitlist::report::dump(hitlist::report::stage_report_json(r.report)));
    write_text(c.out / "filter_report.txt", table);
    for (const auto& p : {filtered, c.out / "filter_report.json", c.out / "filter_report.txt"}) m.output(p);
    m.count("initial", r.report.initial);
    for (const auto& s : r.report.stages) m.count("removed." + std::string(hitlist::to_string(s.stage)), s.removed);
    m.count("final", r.report.final_count());
    m.timing("total", ms_since(t0));
    m.write(c.out);
    if (!g.quiet) std::cout << table;
    return 0;
}

int cmd_probe(const Globals& g, bool authorized) {
    const auto t0 = Clock::now();
    auto c = load_context(g);
    Manifest m("probe", g);
    m.config(c.cfg);
    auto in = open_artifact(c.out, "filtered.bin", "filter");
    m.input(c.out / "filtered.bin");
    const auto targets = hitlist::artifact::read_targets(in);
    const auto blacklist = hitlist::pipeline::load_cidrs(c.cfg.filter.blacklist);
    const auto plan = hitlist::pipeline::plan(c.cfg, targets);
    hitlist::ExecuteOptions opts{&blacklist};

    hitlist::ResponseMatrix matrix;
    std::string backend;
    if (c.cfg.probe.backend == hitlist::config::Backend::raw) {
        backend = "raw";
        if (!authorized)
            throw SafetyRefusal("refusing to send live probes without --i-am-authorized; confirm you are permitted "
                                "to scan every target and that the blacklist is current");
        if (!c.cfg.filter.blacklist) throw SafetyRefusal("refusing to send live probes without a blacklist file");
        hitlist::RawProber prober(std::chrono::milliseconds(c.cfg.probe.raw_wait_ms));
        hitlist::SystemClock clock;
        c.warn("raw backend: probes are scheduled against wall-clock time");
        matrix = hitlist::execute(plan, prober, clock, opts);
    } else {
        backend = "simulated";
        const auto model = hitlist::pipeline::load_model(c.cfg);
        hitlist::SimulatedProber prober(model, c.cfg.probe.seed, c.cfg.probe.loss_rate);
        hitlist::SimulatedClock clock;
        matrix = hitlist::execute(plan, prober, clock, opts);
    }
    m.timing("execute", ms_since(t0));

    const auto mpath = c.out / "matrix.bin";
    write_file(mpath, [&](std::ostream& o) { hitlist::artifact::write_matrix(o, matrix); });
    write_schema(mpath, hitlist::artifact::kMatrixMagic);
    const auto report = hitlist::pipeline::probe_report(plan, matrix, backend, c.cfg.probe.seed);
    write_text(c.out / "probe_report.json", hitlist::report::dump(report));
    for (const auto& p : {mpath, c.out / "probe_report.json"}) m.output(p);
    m.count("tasks", plan.tasks.size());
    m.count("cells", matrix.cells.size());
    m.count("policy_skips", matrix.skips.size());
    m.timing("total", ms_since(t0));
    m.write(c.out);
    c.note("probed " + std::to_string(targets.size()) + " targets: " + std::to_string(matrix.cells.size()) +
           " cells, " + std::to_string(matrix.skips.size()) + " policy skips -> " + mpath.string());
    return 0;
}

int cmd_analyze(const Globals& g) {
    const auto t0 = Clock::now();
    auto c = load_context(g);
    Manifest m("analyze", g);
    m.config(c.cfg);
    auto tin = open_artifact(c.out, "filtered.bin", "filter");
    auto oin = open_artifact(c.out, "observations.bin", "ingest");
    m.input(c.out / "filtered.bin");
    m.input(c.out / "observations.bin");
    const auto targets = hitlist::artifact::read_targets(tin);
    const auto observations = hitlist::artifact::read_observations(oin);
    std::optional<hitlist::ResponseMatrix> matrix;
    if (fs::is_regular_file(c.out / "matrix.bin")) {
        std::ifstream min(c.out / "matrix.bin", std::ios::binary);
        matrix = hitlist::artifact::read_matrix(min);
        m.input(c.out / "matrix.bin");
    }
    std::vector<std::string> warnings;
    const auto bundle = hitlist::pipeline::analyze(
        c.cfg, {targets, observations, matrix ? &*matrix : nullptr}, warnings);
    const auto dir = c.out / "reports";
    for (const auto& [name, body] : bundle) {
        write_text(dir / name, body);
        m.output(dir / name);
    }
    for (const auto& w : warnings) c.warn(w);
    m.count("reports", bundle.size());
    m.count("warnings", warnings.size());
    m.timing("total", ms_since(t0));
    m.write(c.out);
    c.note("wrote " + std::to_string(bundle.size()) + " report files to " + dir.string());
    return 0;
}

int cmd_recommend(const Globals& g, const std::string& type, const std::vector<std::string>& available) {
    const auto purpose = hitlist::parse_scan_purpose(type);
    auto c = load_context(g);
    Manifest m("recommend", g);
    m.config(c.cfg);
    const auto dir = c.out / "reports";
    auto cin = open_artifact(dir, "coverage.json", "analyze");
    m.input(dir / "coverage.json");
    hitlist::pipeline::RecommendInputs in;
    try {
        in.coverage = Json::parse(cin);
        if (fs::is_regular_file(dir / "response.json")) {
            std::ifstream rin(dir / "response.json", std::ios::binary);
            in.response = Json::parse(rin);
            m.input(dir / "response.json");
        } else {
            c.warn("no response report; client probe delay falls back to the default");
        }
    } catch (const nlohmann::json::exception& e) {
        throw hitlist::CorruptArtifact(std::string("unreadable report: ") + e.what());
    }
    std::optional<std::set<hitlist::SourceKind>> avail;
    if (!available.empty()) {
        avail.emplace();
        for (const auto& a : available) {
            auto k = hitlist::parse_source_kind(a);
            if (!k) throw hitlist::ConfigError("unknown source kind '" + a + "' in --available");
            avail->insert(*k);
        }
    }
    const auto rec = hitlist::pipeline::recommend_from_reports(purpose, in, avail);
    const auto base = dir / ("recommend_" + std::string(hitlist::to_string(purpose)));
    write_text(fs::path(base.string() + ".json"), hitlist::report::dump(hitlist::report::recommendation_json(rec)));
    const auto text = hitlist::report::recommendation_text(rec);
    write_text(fs::path(base.string() + ".txt"), text);
    m.output(fs::path(base.string() + ".json"));
    m.output(fs::path(base.string() + ".txt"));
    m.write(c.out);
    if (!g.quiet) std::cout << text;
    return 0;
}

int cmd_fixture(const Globals& g, const hitlist::fixture::Options& base) {
    if (g.out.empty()) throw hitlist::ConfigError("fixture-gen needs --out <directory>");
    auto opt = base;
    if (g.seed) opt.seed = *g.seed;
    const auto truth = hitlist::fixture::generate(g.out, opt);
    if (!g.quiet)
        std::cout << "wrote " << truth.files.size() << " fixture files to " << g.out << " (seed " << opt.seed << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Build, filter, probe and evaluate IPv6 target lists"};
    app.set_version_flag("--version", std::string(hitlist::kVersion));
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "pipeline config file");
    app.add_option("--out", g.out, "output directory (overrides [output] dir)");
    app.add_option("--seed", g.seed, "seed for simulation and fixture generation");
    app.add_option("--threads", g.threads, "worker threads for the filter cascade")->check(CLI::Range(1u, 256u));
    app.add_flag("--quiet", g.quiet, "suppress progress output");

    auto* ingest = app.add_subcommand("ingest", "read all sources into a merged target set");
    auto* filter = app.add_subcommand("filter", "apply the filtering cascade");
    auto* probe = app.add_subcommand("probe", "probe the filtered targets at the configured offsets");
    bool authorized = false;
    probe->add_flag("--i-am-authorized", authorized, "acknowledge that live probing is permitted");
    auto* analyze = app.add_subcommand("analyze", "compute the report bundle");
    auto* recommend = app.add_subcommand("recommend", "suggest sources for a scan type");
    std::string scan_type;
    std::vector<std::string> available;
    recommend->add_option("scan_type", scan_type, "one of: " + hitlist::scan_purpose_list())->required();
    recommend->add_option("--available", available, "source kinds to consider (default: all with coverage)")
        ->delimiter(',');
    auto* fixture = app.add_subcommand("fixture-gen", "write a synthetic fixture world to --out");
    hitlist::fixture::Options fx;
    fixture->add_option("--servers", fx.servers, "server hosts");
    fixture->add_option("--clients", fx.clients, "client hosts");
    fixture->add_option("--cpe", fx.cpe, "hosts with EUI-64 identifiers");
    fixture->add_option("--peers", fx.peers, "BitTorrent peers");
    fixture->add_option("--routers", fx.routers, "router interfaces");
    fixture->add_option("--days", fx.days, "observation period in days")->check(CLI::Range(1u, 365u));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*ingest) return cmd_ingest(g);
        if (*filter) return cmd_filter(g);
        if (*probe) return cmd_probe(g, authorized);
        if (*analyze) return cmd_analyze(g);
        if (*recommend) return cmd_recommend(g, scan_type, available);
        if (*fixture) return cmd_fixture(g, fx);
    } catch (const SafetyRefusal& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return kExitRefused;
    } catch (const hitlist::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
