#pragma once

// The filtering cascade applied to merged targets before probing, with
// exact per-stage accounting.

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hitlist/addr.hpp"
#include "hitlist/prefix_trie.hpp"
#include "hitlist/source.hpp"

namespace hitlist {

/// Inputs to the cascade. Self prefixes are applied during flow ingestion;
/// they live here so one config describes the whole filtering policy.
struct FilterConfig {
    std::vector<Prefix> self_prefixes;
    PrefixSet fullbogons;
    PrefixSet iana_special;
    PrefixSet own_networks;
    RoutingTable routing;
    PrefixSet announced; // empty disables the announced-routes whitelist
    PrefixSet blacklist;
};

enum class Stage : std::uint8_t {
    dedup = 0,
    fullbogons,
    iana_special,
    own_networks,
    pfx2as_whitelist,
    announced_whitelist,
    blacklist,
};

inline constexpr std::array<Stage, 7> kStageOrder{
    Stage::dedup,         Stage::fullbogons,          Stage::iana_special, Stage::own_networks,
    Stage::pfx2as_whitelist, Stage::announced_whitelist, Stage::blacklist,
};

constexpr std::string_view to_string(Stage s) noexcept {
    switch (s) {
    case Stage::dedup: return "dedup";
    case Stage::fullbogons: return "fullbogons";
    case Stage::iana_special: return "iana_special";
    case Stage::own_networks: return "own_networks";
    case Stage::pfx2as_whitelist: return "pfx2as_whitelist";
    case Stage::announced_whitelist: return "announced_whitelist";
    case Stage::blacklist: return "blacklist";
    }
    return "?";
}

struct StageCount {
    Stage stage;
    std::uint64_t removed = 0;
    std::uint64_t remaining = 0;

    bool operator==(const StageCount&) const = default;
};

/// `initial` counts raw observations, so the dedup stage removes the
/// duplicate sightings; each later stage removes whole addresses.
struct StageReport {
    std::uint64_t initial = 0;
    std::vector<StageCount> stages;

    std::uint64_t final_count() const noexcept { return stages.empty() ? initial : stages.back().remaining; }

    bool operator==(const StageReport&) const = default;
};

struct CascadeResult {
    TargetSet filtered;
    StageReport report;
};

/// Stage at which `a` leaves the cascade, or Stage::dedup if it survives.
inline Stage removal_stage(const Address128& a, const FilterConfig& cfg) noexcept {
    if (cfg.fullbogons.contains(a)) return Stage::fullbogons;
    if (cfg.iana_special.contains(a)) return Stage::iana_special;
    if (cfg.own_networks.contains(a)) return Stage::own_networks;
    if (!cfg.routing.lookup(a)) return Stage::pfx2as_whitelist;
    if (!cfg.announced.empty() && !cfg.announced.contains(a)) return Stage::announced_whitelist;
    if (cfg.blacklist.contains(a)) return Stage::blacklist;
    return Stage::dedup;
}

/// Runs the cascade. With threads > 1 the targets are split into contiguous
/// chunks; the verdicts are combined in order, so the result is identical to
/// the single-threaded run.
inline CascadeResult apply_cascade(const TargetSet& targets, const FilterConfig& cfg, unsigned threads = 1) {
    const auto entries = targets.entries();
    std::vector<Stage> verdict(entries.size());

    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) verdict[i] = removal_stage(entries[i].address, cfg);
    };
    threads = std::max(1u, threads);
    if (threads == 1 || entries.size() < 2 * threads) {
        run(0, entries.size());
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (entries.size() + threads - 1) / threads;
        for (std::size_t b = 0; b < entries.size(); b += chunk)
            pool.emplace_back(run, b, std::min(entries.size(), b + chunk));
    }

    std::array<std::uint64_t, kStageOrder.size()> removed{};
    std::vector<TargetEntry> kept;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (verdict[i] == Stage::dedup)
            kept.push_back(entries[i]);
        else
            ++removed[static_cast<std::size_t>(verdict[i])];
    }

    CascadeResult r;
    r.report.initial = targets.total_observations();
    removed[0] = r.report.initial - entries.size();
    std::uint64_t remaining = r.report.initial;
    for (auto stage : kStageOrder) {
        const auto n = removed[static_cast<std::size_t>(stage)];
        remaining -= n;
        r.report.stages.push_back(StageCount{stage, n, remaining});
    }
    r.filtered = TargetSet::from_sorted(std::move(kept));
    return r;
}

} // namespace hitlist
