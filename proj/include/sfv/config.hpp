#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sfv/core.hpp"
#include "sfv/random.hpp"

namespace sfv {

/// Where the committee casts the seed (dummy) votes before polls open.
enum class SeedingMode {
    PerCluster,   // one station per cluster (the cluster's lowest precinct id)
    PerPrecinct,  // every station; each precinct keeps local decoys for every candidate
};

enum class SigningMode {
    Eager,     // sign every receipt at cast time
    Deferred,  // keep the machine keys and sign receipts when they are first needed
};

/// Half-open interval of simulated seconds since polls opened.
struct TimeWindow {
    std::uint32_t from = 0;
    std::uint32_t to = 0;
    bool contains(std::uint32_t t) const noexcept { return from <= t && t < to; }
    friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct PrecinctConfig {
    PrecinctId id;
    ClusterId cluster;
    std::uint32_t voters = 0;
    /// Per-candidate choice probabilities (need not be normalised).
    std::vector<double> preferences;
    /// When set, the precinct's choices are exactly this multiset in random order.
    std::optional<std::vector<std::uint32_t>> exact_counts;

    friend bool operator==(const PrecinctConfig&, const PrecinctConfig&) = default;
};

struct ElectionConfig {
    std::uint64_t seed = 1;
    int pseudonym_width = kDefaultPseudonymWidth;
    std::vector<Candidate> candidates;
    std::vector<PrecinctConfig> precincts;
    std::map<ClusterId, SuperId> cluster_parent;
    std::map<SuperId, UltraId> super_parent;
    std::uint32_t dummies_per_candidate = 1;
    SeedingMode seeding = SeedingMode::PerCluster;
    std::uint32_t cluster_target_size = 5000;
    random::RngMode rng = random::Honest{};
    SigningMode signing = SigningMode::Eager;
    std::uint32_t day_seconds = 12 * 3600;
    /// Clusters cut off from each other; machines fall back to local decoys inside the window.
    std::map<ClusterId, TimeWindow> partitions;

    std::size_t num_candidates() const noexcept { return candidates.size(); }
    std::uint64_t num_voters() const;
    std::uint64_t sample_space() const { return pow10(pseudonym_width); }
    const PrecinctConfig& precinct(PrecinctId id) const;
    std::vector<PrecinctId> precincts_of(ClusterId cluster) const;
    std::vector<ClusterId> clusters() const;
    std::vector<ClusterId> clusters_of(SuperId super) const;
    std::vector<SuperId> supers_of(UltraId ultra) const;
    std::vector<UltraId> ultras() const;
    /// Precinct whose station seeds a cluster in PerCluster mode.
    PrecinctId seeding_precinct(ClusterId cluster) const;

    /// Throws ConfigError describing the first violated invariant.
    void validate() const;

    friend bool operator==(const ElectionConfig&, const ElectionConfig&) = default;
};

/// Parsed config file: the election plus any free-form `[attack]` keys.
struct ConfigFile {
    ElectionConfig election;
    std::map<std::string, std::string> attack;
};

/// Parses the key=value section format documented in docs/config.md.
/// Throws ConfigParseError (with line number) or ConfigError.
ConfigFile parse_config(std::string_view text);
std::string serialize_config(const ConfigFile& file);

/// Regular layout used by experiments and tests.
struct GridSpec {
    std::uint64_t seed = 1;
    std::uint32_t candidates = 2;
    std::uint32_t precincts_per_cluster = 4;
    std::uint32_t voters_per_precinct = 100;
    std::uint32_t clusters = 2;
    std::uint32_t clusters_per_super = 10;
    std::uint32_t supers_per_ultra = 10;
    std::uint32_t dummies_per_candidate = 1;
    int pseudonym_width = kDefaultPseudonymWidth;
    std::vector<double> preferences;  // empty = uniform
    SeedingMode seeding = SeedingMode::PerCluster;
    SigningMode signing = SigningMode::Eager;
};

ElectionConfig make_grid_config(const GridSpec& spec);

}  // namespace sfv
