#include "sfv/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace sfv {

std::uint64_t ElectionConfig::num_voters() const {
    std::uint64_t n = 0;
    for (const auto& p : precincts) n += p.voters;
    return n;
}

const PrecinctConfig& ElectionConfig::precinct(PrecinctId id) const {
    auto it = std::find_if(precincts.begin(), precincts.end(), [&](const auto& p) { return p.id == id; });
    if (it == precincts.end()) throw ConfigError("unknown precinct " + std::to_string(id.value));
    return *it;
}

std::vector<PrecinctId> ElectionConfig::precincts_of(ClusterId cluster) const {
    std::vector<PrecinctId> out;
    for (const auto& p : precincts)
        if (p.cluster == cluster) out.push_back(p.id);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<ClusterId> ElectionConfig::clusters() const {
    std::vector<ClusterId> out;
    for (const auto& [c, s] : cluster_parent) out.push_back(c);
    return out;
}

std::vector<ClusterId> ElectionConfig::clusters_of(SuperId super) const {
    std::vector<ClusterId> out;
    for (const auto& [c, s] : cluster_parent)
        if (s == super) out.push_back(c);
    return out;
}

std::vector<SuperId> ElectionConfig::supers_of(UltraId ultra) const {
    std::vector<SuperId> out;
    for (const auto& [s, u] : super_parent)
        if (u == ultra) out.push_back(s);
    return out;
}

std::vector<UltraId> ElectionConfig::ultras() const {
    std::set<UltraId> u;
    for (const auto& [s, parent] : super_parent) u.insert(parent);
    return {u.begin(), u.end()};
}

PrecinctId ElectionConfig::seeding_precinct(ClusterId cluster) const {
    auto ps = precincts_of(cluster);
    if (ps.empty()) throw ConfigError("cluster " + std::to_string(cluster.value) + " has no polling station");
    return ps.front();
}

void ElectionConfig::validate() const {
    pow10(pseudonym_width);
    if (candidates.empty()) throw ConfigError("election needs at least one candidate");
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i].id != i) throw ConfigError("candidate ids must be dense 0..n-1");
    if (dummies_per_candidate < 1) throw ConfigError("dummy count must be at least 1 per candidate per cluster");
    if (day_seconds == 0) throw ConfigError("day_seconds must be positive");
    random::validate_mode(rng, pseudonym_width);
    if (std::holds_alternative<random::Rigged>(rng))
        throw ConfigError("rigged draws are an attack behaviour, not an election setting");

    std::set<PrecinctId> seen;
    for (const auto& p : precincts) {
        if (!seen.insert(p.id).second) throw ConfigError("duplicate precinct " + std::to_string(p.id.value));
        if (!cluster_parent.contains(p.cluster))
            throw ConfigError("precinct " + std::to_string(p.id.value) + " belongs to unknown cluster " +
                              std::to_string(p.cluster.value));
        if (p.exact_counts) {
            if (p.exact_counts->size() != candidates.size())
                throw ConfigError("precinct " + std::to_string(p.id.value) + " counts do not cover every candidate");
            std::uint64_t sum = 0;
            for (auto c : *p.exact_counts) sum += c;
            if (sum != p.voters)
                throw ConfigError("precinct " + std::to_string(p.id.value) + " counts do not sum to its voters");
        } else if (p.voters > 0) {
            if (p.preferences.size() != candidates.size())
                throw ConfigError("precinct " + std::to_string(p.id.value) +
                                  " preferences do not cover every candidate");
            double total = 0;
            for (double w : p.preferences) {
                if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("preferences must be non-negative");
                total += w;
            }
            if (!(total > 0.0)) throw ConfigError("preferences must not all be zero");
        }
    }
    for (const auto& [cluster, super] : cluster_parent) {
        if (!super_parent.contains(super))
            throw ConfigError("cluster " + std::to_string(cluster.value) + " maps to unknown super-cluster " +
                              std::to_string(super.value));
        if (precincts_of(cluster).empty())
            throw ConfigError("cluster " + std::to_string(cluster.value) + " has no polling station");
    }
    for (const auto& [super, ultra] : super_parent)
        if (clusters_of(super).empty())
            throw ConfigError("super-cluster " + std::to_string(super.value) + " has no clusters");
    for (const auto& [cluster, window] : partitions) {
        if (!cluster_parent.contains(cluster)) throw ConfigError("partition names an unknown cluster");
        if (window.from > window.to) throw ConfigError("partition window is reversed");
    }
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    while (true) {
        auto pos = s.find(sep);
        out.push_back(trim(s.substr(0, pos)));
        if (pos == std::string_view::npos) break;
        s.remove_prefix(pos + 1);
    }
    return out;
}

struct LineCtx {
    std::size_t line;
    [[noreturn]] void fail(const std::string& msg) const { throw ConfigParseError(line, msg); }

    template <class T>
    T integer(std::string_view s) const {
        T v{};
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
            fail("expected an unsigned integer, got '" + std::string(s) + "'");
        return v;
    }

    double real(std::string_view s) const {
        std::string tmp(s);
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(tmp, &used);
        } catch (const std::exception&) {
            fail("expected a number, got '" + tmp + "'");
        }
        if (used != tmp.size()) fail("expected a number, got '" + tmp + "'");
        return v;
    }
};

enum class Section { None, Election, Candidates, Super, Cluster, Precinct, Attack, Grid };

}  // namespace

ConfigFile parse_config(std::string_view text) {
    ConfigFile file;
    ElectionConfig& cfg = file.election;
    std::string rng_kind = "honest";
    int voter_digits = 2;
    std::optional<std::size_t> voter_digits_line;

    Section section = Section::None;
    std::uint32_t section_id = 0;
    PrecinctConfig* precinct = nullptr;
    std::set<std::string> section_headers;
    std::map<std::uint32_t, std::string> candidate_names;
    std::map<PrecinctId, std::size_t> precinct_lines;
    std::optional<GridSpec> grid;
    std::optional<std::vector<std::uint32_t>> grid_counts;
    std::size_t grid_line = 0;
    std::size_t explicit_line = 0;

    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        auto nl = text.find('\n');
        std::string_view raw = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        std::string_view line = trim(raw);
        if (line.empty()) continue;
        LineCtx ctx{line_no};

        if (line.front() == '[') {
            if (line.back() != ']') ctx.fail("unterminated section header");
            std::string header(trim(line.substr(1, line.size() - 2)));
            if (!section_headers.insert(header).second) ctx.fail("duplicate section [" + header + "]");
            auto parts = split(header, ' ');
            parts.erase(std::remove(parts.begin(), parts.end(), std::string_view{}), parts.end());
            precinct = nullptr;
            if (parts.size() == 1 && parts[0] == "election") {
                section = Section::Election;
            } else if (parts.size() == 1 && parts[0] == "candidates") {
                section = Section::Candidates;
            } else if (parts.size() == 1 && parts[0] == "attack") {
                section = Section::Attack;
            } else if (parts.size() == 1 && parts[0] == "grid") {
                section = Section::Grid;
                grid.emplace();
                grid->candidates = 0;
                grid_line = line_no;
            } else if (parts.size() == 2 && (parts[0] == "super" || parts[0] == "cluster" || parts[0] == "precinct")) {
                section_id = ctx.integer<std::uint32_t>(parts[1]);
                if (!explicit_line) explicit_line = line_no;
                if (parts[0] == "super") {
                    section = Section::Super;
                } else if (parts[0] == "cluster") {
                    section = Section::Cluster;
                } else {
                    section = Section::Precinct;
                    cfg.precincts.push_back(PrecinctConfig{PrecinctId{section_id}, ClusterId{}, 0, {}, std::nullopt});
                    precinct = &cfg.precincts.back();
                    precinct_lines[PrecinctId{section_id}] = line_no;
                }
            } else {
                ctx.fail("unknown section [" + header + "]");
            }
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string_view::npos) ctx.fail("expected key=value");
        std::string key(trim(line.substr(0, eq)));
        std::string_view value = trim(line.substr(eq + 1));
        if (key.empty()) ctx.fail("empty key");

        switch (section) {
        case Section::None:
            ctx.fail("key outside of any section");
        case Section::Election:
            if (key == "seed") {
                cfg.seed = ctx.integer<std::uint64_t>(value);
            } else if (key == "pseudonym_width") {
                cfg.pseudonym_width = ctx.integer<int>(value);
            } else if (key == "dummies_per_candidate") {
                cfg.dummies_per_candidate = ctx.integer<std::uint32_t>(value);
            } else if (key == "cluster_target_size") {
                cfg.cluster_target_size = ctx.integer<std::uint32_t>(value);
            } else if (key == "day_seconds") {
                cfg.day_seconds = ctx.integer<std::uint32_t>(value);
            } else if (key == "seeding") {
                if (value == "cluster")
                    cfg.seeding = SeedingMode::PerCluster;
                else if (value == "precinct")
                    cfg.seeding = SeedingMode::PerPrecinct;
                else
                    ctx.fail("seeding must be 'cluster' or 'precinct'");
            } else if (key == "signing") {
                if (value == "eager")
                    cfg.signing = SigningMode::Eager;
                else if (value == "deferred")
                    cfg.signing = SigningMode::Deferred;
                else
                    ctx.fail("signing must be 'eager' or 'deferred'");
            } else if (key == "rng") {
                if (value != "honest" && value != "voter_entropy") ctx.fail("rng must be 'honest' or 'voter_entropy'");
                rng_kind = std::string(value);
            } else if (key == "voter_digits") {
                voter_digits = ctx.integer<int>(value);
                voter_digits_line = line_no;
            } else {
                ctx.fail("unknown key '" + key + "' in [election]");
            }
            break;
        case Section::Candidates: {
            auto id = ctx.integer<std::uint32_t>(key);
            if (value.empty()) ctx.fail("candidate needs a display name");
            if (!candidate_names.emplace(id, std::string(value)).second) ctx.fail("duplicate candidate id");
            break;
        }
        case Section::Super:
            if (key != "ultra") ctx.fail("unknown key '" + key + "' in [super]");
            cfg.super_parent[SuperId{section_id}] = UltraId{ctx.integer<std::uint32_t>(value)};
            break;
        case Section::Cluster:
            if (key == "super") {
                cfg.cluster_parent[ClusterId{section_id}] = SuperId{ctx.integer<std::uint32_t>(value)};
            } else if (key == "partition") {
                auto parts = split(value, '-');
                if (parts.size() != 2) ctx.fail("partition must be <from>-<to>");
                cfg.partitions[ClusterId{section_id}] =
                    TimeWindow{ctx.integer<std::uint32_t>(parts[0]), ctx.integer<std::uint32_t>(parts[1])};
            } else {
                ctx.fail("unknown key '" + key + "' in [cluster]");
            }
            break;
        case Section::Precinct:
            if (key == "cluster") {
                precinct->cluster = ClusterId{ctx.integer<std::uint32_t>(value)};
            } else if (key == "voters") {
                precinct->voters = ctx.integer<std::uint32_t>(value);
            } else if (key == "prefs") {
                precinct->preferences.clear();
                for (auto part : split(value, ',')) precinct->preferences.push_back(ctx.real(part));
            } else if (key == "counts") {
                std::vector<std::uint32_t> counts;
                for (auto part : split(value, ',')) counts.push_back(ctx.integer<std::uint32_t>(part));
                precinct->exact_counts = std::move(counts);
            } else {
                ctx.fail("unknown key '" + key + "' in [precinct]");
            }
            break;
        case Section::Attack:
            file.attack[key] = std::string(value);
            break;
        case Section::Grid:
            if (key == "candidates") {
                grid->candidates = ctx.integer<std::uint32_t>(value);
            } else if (key == "clusters") {
                grid->clusters = ctx.integer<std::uint32_t>(value);
            } else if (key == "precincts_per_cluster") {
                grid->precincts_per_cluster = ctx.integer<std::uint32_t>(value);
            } else if (key == "voters_per_precinct") {
                grid->voters_per_precinct = ctx.integer<std::uint32_t>(value);
            } else if (key == "clusters_per_super") {
                grid->clusters_per_super = ctx.integer<std::uint32_t>(value);
            } else if (key == "supers_per_ultra") {
                grid->supers_per_ultra = ctx.integer<std::uint32_t>(value);
            } else if (key == "prefs") {
                grid->preferences.clear();
                for (auto part : split(value, ',')) grid->preferences.push_back(ctx.real(part));
            } else if (key == "counts") {
                std::vector<std::uint32_t> counts;
                for (auto part : split(value, ',')) counts.push_back(ctx.integer<std::uint32_t>(part));
                grid_counts = std::move(counts);
            } else {
                ctx.fail("unknown key '" + key + "' in [grid]");
            }
            break;
        }
    }

    if (grid) {
        if (explicit_line)
            throw ConfigParseError(explicit_line, "[grid] cannot be combined with explicit super/cluster/precinct sections");
        if (grid->candidates == 0) grid->candidates = static_cast<std::uint32_t>(candidate_names.size());
        if (grid->candidates == 0) throw ConfigParseError(grid_line, "[grid] needs candidates");
        if (!candidate_names.empty() && candidate_names.size() != grid->candidates)
            throw ConfigParseError(grid_line, "[grid] candidates disagrees with [candidates]");
        try {
            auto generated = make_grid_config(*grid);
            cfg.candidates = std::move(generated.candidates);
            cfg.precincts = std::move(generated.precincts);
            cfg.cluster_parent = std::move(generated.cluster_parent);
            cfg.super_parent = std::move(generated.super_parent);
        } catch (const ConfigError& e) {
            throw ConfigParseError(grid_line, e.what());
        }
        if (grid_counts) {
            if (grid_counts->size() != grid->candidates)
                throw ConfigParseError(grid_line, "[grid] counts must list every candidate");
            std::uint64_t sum = 0;
            for (auto c : *grid_counts) sum += c;
            for (auto& p : cfg.precincts) {
                p.exact_counts = grid_counts;
                p.voters = static_cast<std::uint32_t>(sum);
            }
        }
        if (!candidate_names.empty()) cfg.candidates.clear();
    }

    std::uint32_t expect = 0;
    for (const auto& [id, name] : candidate_names) {
        if (id != expect++) throw ConfigError("candidate ids must be dense 0..n-1");
        cfg.candidates.push_back(Candidate{id, name});
    }
    if (rng_kind == "voter_entropy") {
        if (voter_digits < 1 || voter_digits >= cfg.pseudonym_width)
            throw ConfigParseError(voter_digits_line.value_or(0), "voter_digits must be in [1, pseudonym_width)");
        cfg.rng = random::VoterEntropy{cfg.pseudonym_width - voter_digits, voter_digits, std::nullopt};
    }
    std::sort(cfg.precincts.begin(), cfg.precincts.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& p : cfg.precincts) {
        if (!cfg.cluster_parent.contains(p.cluster))
            throw ConfigParseError(precinct_lines[p.id], "precinct " + std::to_string(p.id.value) +
                                                             " references unknown cluster " +
                                                             std::to_string(p.cluster.value));
    }
    cfg.validate();
    return file;
}

std::string serialize_config(const ConfigFile& file) {
    const ElectionConfig& cfg = file.election;
    std::ostringstream os;
    os << "[election]\n";
    os << "seed=" << cfg.seed << "\n";
    os << "pseudonym_width=" << cfg.pseudonym_width << "\n";
    os << "dummies_per_candidate=" << cfg.dummies_per_candidate << "\n";
    os << "seeding=" << (cfg.seeding == SeedingMode::PerCluster ? "cluster" : "precinct") << "\n";
    os << "cluster_target_size=" << cfg.cluster_target_size << "\n";
    os << "day_seconds=" << cfg.day_seconds << "\n";
    os << "signing=" << (cfg.signing == SigningMode::Eager ? "eager" : "deferred") << "\n";
    if (const auto* ve = std::get_if<random::VoterEntropy>(&cfg.rng)) {
        os << "rng=voter_entropy\n";
        os << "voter_digits=" << ve->voter_width << "\n";
    } else {
        os << "rng=honest\n";
    }
    os << "\n[candidates]\n";
    for (const auto& c : cfg.candidates) os << c.id << "=" << c.display_name << "\n";
    for (const auto& [super, ultra] : cfg.super_parent) os << "\n[super " << super << "]\nultra=" << ultra << "\n";
    for (const auto& [cluster, super] : cfg.cluster_parent) {
        os << "\n[cluster " << cluster << "]\nsuper=" << super << "\n";
        if (auto it = cfg.partitions.find(cluster); it != cfg.partitions.end())
            os << "partition=" << it->second.from << "-" << it->second.to << "\n";
    }
    for (const auto& p : cfg.precincts) {
        os << "\n[precinct " << p.id << "]\ncluster=" << p.cluster << "\nvoters=" << p.voters << "\n";
        if (!p.preferences.empty()) {
            os << "prefs=";
            for (std::size_t i = 0; i < p.preferences.size(); ++i) {
                char buf[32];
                const auto end = std::to_chars(buf, buf + sizeof buf, p.preferences[i]).ptr;
                os << (i ? "," : "") << std::string_view(buf, static_cast<std::size_t>(end - buf));
            }
            os << "\n";
        }
        if (p.exact_counts) {
            os << "counts=";
            for (std::size_t i = 0; i < p.exact_counts->size(); ++i) os << (i ? "," : "") << (*p.exact_counts)[i];
            os << "\n";
        }
    }
    if (!file.attack.empty()) {
        os << "\n[attack]\n";
        for (const auto& [k, v] : file.attack) os << k << "=" << v << "\n";
    }
    return os.str();
}

ElectionConfig make_grid_config(const GridSpec& spec) {
    if (spec.candidates == 0) throw ConfigError("grid needs candidates");
    if (spec.clusters == 0 || spec.precincts_per_cluster == 0 || spec.clusters_per_super == 0 ||
        spec.supers_per_ultra == 0)
        throw ConfigError("grid dimensions must be positive");
    ElectionConfig cfg;
    cfg.seed = spec.seed;
    cfg.pseudonym_width = spec.pseudonym_width;
    cfg.dummies_per_candidate = spec.dummies_per_candidate;
    cfg.seeding = spec.seeding;
    cfg.signing = spec.signing;
    for (std::uint32_t c = 0; c < spec.candidates; ++c)
        cfg.candidates.push_back(Candidate{c, std::string(1, static_cast<char>('A' + c % 26)) +
                                                  (c >= 26 ? std::to_string(c / 26) : std::string{})});
    std::vector<double> prefs = spec.preferences;
    if (prefs.empty()) prefs.assign(spec.candidates, 1.0);
    if (prefs.size() != spec.candidates) throw ConfigError("grid preferences do not cover every candidate");

    std::uint32_t precinct = 0;
    for (std::uint32_t c = 0; c < spec.clusters; ++c) {
        SuperId super{c / spec.clusters_per_super};
        cfg.cluster_parent[ClusterId{c}] = super;
        cfg.super_parent[super] = UltraId{super.value / spec.supers_per_ultra};
        for (std::uint32_t p = 0; p < spec.precincts_per_cluster; ++p)
            cfg.precincts.push_back(
                PrecinctConfig{PrecinctId{precinct++}, ClusterId{c}, spec.voters_per_precinct, prefs, std::nullopt});
    }
    cfg.cluster_target_size = spec.precincts_per_cluster * spec.voters_per_precinct;
    cfg.validate();
    return cfg;
}

}  // namespace sfv
