// sfv: simulate elections, publish ledgers, verify them, run attacks, statistics and audits.
//
// Exit codes: 0 pass, 1 verified failure, 2 malformed or missing input.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "rundir.hpp"
#include "sfv/adversary.hpp"
#include "sfv/audit.hpp"
#include "sfv/engine.hpp"
#include "sfv/error.hpp"
#include "sfv/ledger.hpp"
#include "sfv/stats.hpp"
#include "sfv/verification.hpp"

using namespace sfv;
using namespace sfv::cli;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kInput = 2;

// --- tables -----------------------------------------------------------------

/// Per-trial numeric table, printed aligned and as key=value lines.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void print(std::ostream& os) const {
        std::vector<std::size_t> w(columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c) w[c] = std::max<std::size_t>(columns[c].size(), 8);
        for (std::size_t c = 0; c < columns.size(); ++c) os << std::setw(static_cast<int>(w[c]) + 2) << columns[c];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t c = 0; c < r.size(); ++c) os << std::setw(static_cast<int>(w[c]) + 2) << cell(r[c]);
            os << '\n';
        }
    }

    static std::string cell(double v) {
        std::ostringstream s;
        if (v == std::floor(v) && std::abs(v) < 1e15)
            s << static_cast<long long>(v);
        else
            s << std::setprecision(6) << v;
        return s.str();
    }

    double mean(std::size_t c) const {
        double s = 0;
        for (const auto& r : rows) s += r[c];
        return rows.empty() ? 0 : s / static_cast<double>(rows.size());
    }

    /// Half-width of the normal 95% interval for the column mean.
    double ci95(std::size_t c) const {
        if (rows.size() < 2) return 0;
        const double m = mean(c);
        double ss = 0;
        for (const auto& r : rows) ss += (r[c] - m) * (r[c] - m);
        return 1.96 * std::sqrt(ss / static_cast<double>(rows.size() - 1) / static_cast<double>(rows.size()));
    }

    void summary(std::ostream& os, std::size_t first_metric = 1) const {
        os << "\nsummary over " << rows.size() << " trials (mean +/- 95% CI)\n";
        for (std::size_t c = first_metric; c < columns.size(); ++c)
            os << "  " << std::left << std::setw(22) << columns[c] << std::right << std::setprecision(6) << mean(c)
               << " +/- " << ci95(c) << '\n';
        for (std::size_t c = first_metric; c < columns.size(); ++c)
            os << "summary." << columns[c] << ".mean=" << std::setprecision(10) << mean(c) << '\n'
               << "summary." << columns[c] << ".ci95=" << ci95(c) << '\n';
    }

    std::string csv() const {
        std::ostringstream os;
        for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << cell(r[c]);
            os << '\n';
        }
        return os.str();
    }
};

void kv(const std::string& key, double value) {
    std::cout << key << '=' << std::setprecision(12) << value << '\n';
}

// --- shared helpers ---------------------------------------------------------

fs::path output_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("SFV_OUT_DIR"); env && *env) return env;
    return "sfv-out";
}

std::vector<std::uint32_t> parse_id_list(const std::string& text, const char* what) {
    std::vector<std::uint32_t> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        try {
            std::size_t used = 0;
            const auto v = std::stoul(part, &used);
            if (used != part.size()) throw std::invalid_argument(part);
            out.push_back(static_cast<std::uint32_t>(v));
        } catch (const std::exception&) {
            throw InputError(std::string("bad ") + what + " '" + part + "'");
        }
    }
    return out;
}

verification::HierarchyEvidence evidence_of(const ledger::HierarchicalLedger& h) {
    verification::HierarchyEvidence ev;
    for (const auto& c : h.clusters) ev.clusters[c.cluster] = verification::verify_cluster_manual(c);
    ev.aggregates = h.supers;
    ev.aggregates.insert(ev.aggregates.end(), h.ultras.begin(), h.ultras.end());
    if (h.national.candidates > 0) ev.aggregates.push_back(h.national);
    return ev;
}

std::string totals_line(const std::vector<std::int64_t>& t) {
    std::ostringstream os;
    for (std::size_t c = 0; c < t.size(); ++c) os << (c ? " " : "") << c << ':' << t[c];
    return os.str();
}

/// A well-formed file whose content disagrees with itself is a failed check, not bad input.
bool contradicts_itself(ledger::ParseErrorKind kind) {
    using K = ledger::ParseErrorKind;
    return kind == K::SerialGap || kind == K::UnsortedRows || kind == K::TotalsMismatch ||
           kind == K::RowCountMismatch || kind == K::BadDummyMetadata;
}

const char* level_name(ledger::Level l) {
    switch (l) {
        case ledger::Level::Super: return "super";
        case ledger::Level::Ultra: return "ultra";
        case ledger::Level::National: return "national";
    }
    return "?";
}

// --- simulate / publish -----------------------------------------------------

struct SimulateOpts {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool no_receipts = false;
};

int cmd_simulate(const SimulateOpts& o) {
    auto config = load_config(o.config);
    if (o.seed) config.election.seed = *o.seed;
    config.election.signing = SigningMode::Deferred;
    const auto out = engine::simulate_election(config.election);
    RunPaths paths{output_dir(o.out)};
    write_run(paths, config, out, !o.no_receipts);

    const auto truth = out.national_truth();
    std::cout << "run written to " << paths.root.string() << '\n';
    kv("seed", static_cast<double>(config.election.seed));
    kv("voters", static_cast<double>(config.election.num_voters()));
    kv("records", static_cast<double>(out.records.size()));
    kv("nullified_sessions", static_cast<double>(out.nullified_sessions));
    for (std::size_t c = 0; c < truth.size(); ++c) kv("truth." + std::to_string(c), static_cast<double>(truth[c]));
    return kPass;
}

int cmd_publish(const std::string& in) {
    RunPaths paths{in};
    const auto config = load_config(paths.config());
    const auto records = parse_records(read_file(paths.records()));
    const auto keys = signing::KeyRegistry::parse(read_file(paths.ledger() / "keys.csv"));
    for (const auto& e : fs::directory_iterator(paths.ledger()))
        if (e.path().filename() != "keys.csv") fs::remove(e.path());
    const auto names = write_ledger(paths.ledger(), records, config.election, keys);
    write_manifest(paths, config);
    std::cout << "published " << names.size() << " files to " << paths.ledger().string() << '\n';
    return kPass;
}

// --- verification -----------------------------------------------------------

int cmd_verify_vote(const std::string& ledger_path, const std::string& r_text, std::optional<unsigned> candidate) {
    const auto dir = resolve_ledger_dir(ledger_path);
    const auto flat = ledger::parse_flat(read_file(dir / ledger::flat_file_name()));
    const auto r = parse_pseudonym(r_text, flat.width);
    if (!r) throw InputError("pseudonym must be exactly " + std::to_string(flat.width) + " digits");
    const auto rows = verification::locate_vote(flat, *r);
    for (const auto& row : rows) std::cout << format_pseudonym(row.r) << ',' << row.candidate << '\n';
    bool ok = !rows.empty();
    if (candidate)
        ok = std::any_of(rows.begin(), rows.end(), [&](const ledger::FlatRow& x) { return x.candidate == *candidate; });
    std::cout << (ok ? "FOUND" : "NOT FOUND") << '\n';
    return ok ? kPass : kFail;
}

int cmd_verify_cluster(const std::string& file) {
    // Lenient parsing: a manual verifier still reads a damaged file and reports what is wrong.
    const auto cluster = ledger::parse_cluster(read_file(file), ledger::Strictness::Lenient);
    const auto rep = verification::verify_cluster_manual(cluster);
    std::cout << "cluster " << rep.cluster.value << '\n';
    std::cout << "totals " << totals_line(rep.totals) << '\n';
    if (rep.serial_gap_found) std::cout << "serial gap at row " << rep.gap_position << '\n';
    if (rep.grouping_error) std::cout << "candidate blocks out of order\n";
    std::cout << (rep.pass ? "PASS" : "FAIL") << '\n';
    return rep.pass ? kPass : kFail;
}

int cmd_verify_hierarchy(const std::string& ledger_path, const std::string& node, const std::string& config_path) {
    const auto dir = resolve_ledger_dir(ledger_path);
    // Lenient: a file whose rows disagree with its own total is reported as a failed node.
    const auto loaded = load_ledger(dir, ledger::Strictness::Lenient);
    const auto ev = evidence_of(loaded.tree);
    verification::HierarchyReport rep;
    if (node.empty()) {
        rep = verification::verify_hierarchy(ev);
    } else {
        std::string id = node;
        if (id.starts_with("cluster-")) id = id.substr(8);
        const auto ids = parse_id_list(id, "cluster id");
        if (ids.size() != 1) throw InputError("--path takes one cluster id, e.g. cluster-3");
        fs::path cfg = config_path.empty() ? dir.parent_path() / "config.cfg" : fs::path(config_path);
        const auto config = load_config(cfg);
        rep = verification::verify_drill_down(ev, config.election, ClusterId{ids[0]});
    }
    for (const auto& n : rep.nodes)
        std::cout << level_name(n.level) << ' ' << n.node << ' ' << (n.pass ? "ok" : "FAIL")
                  << (n.detail.empty() ? "" : " " + n.detail) << '\n';
    kv("totals_read", static_cast<double>(rep.totals_read));
    std::cout << (rep.pass() ? "PASS" : "FAIL") << '\n';
    return rep.pass() ? kPass : kFail;
}

int cmd_tally(const std::string& ledger_path) {
    const auto dir = resolve_ledger_dir(ledger_path);
    const auto flat = ledger::parse_flat(read_file(dir / ledger::flat_file_name()));
    const auto tally = verification::digital_tally(flat);
    for (std::size_t c = 0; c < tally.size(); ++c) kv("tally." + std::to_string(c), static_cast<double>(tally[c]));
    const auto national = dir / ledger::national_file_name();
    if (fs::exists(national)) {
        const auto agg = ledger::parse_aggregate(read_file(national));
        const bool same = agg.totals == tally;
        std::cout << "national aggregate " << (same ? "matches" : "DIFFERS: " + totals_line(agg.totals)) << '\n';
        return same ? kPass : kFail;
    }
    return kPass;
}

int cmd_collisions(const std::string& ledger_path, double z, std::optional<int> machine_width) {
    const auto dir = resolve_ledger_dir(ledger_path);
    const auto flat = ledger::parse_flat(read_file(dir / ledger::flat_file_name()));
    const auto census = verification::count_collisions(flat);
    const stats::CollisionModel model{static_cast<double>(flat.rows.size()), static_cast<double>(pow10(flat.width))};

    std::cout << std::setw(4) << "k" << std::setw(12) << "observed" << std::setw(14) << "expected" << '\n';
    const std::size_t kmax = std::max<std::size_t>(3, census.by_multiplicity.empty() ? 0 : census.by_multiplicity.rbegin()->first);
    for (std::size_t k = 1; k <= kmax; ++k)
        std::cout << std::setw(4) << k << std::setw(12) << census.count(k) << std::setw(14) << std::setprecision(6)
                  << stats::expected_collisions(model, static_cast<unsigned>(k)) << '\n';
    const double mean = stats::expected_collisions(model, 2);
    const double limit = mean + z * std::sqrt(mean);
    kv("census.c2", static_cast<double>(census.count(2)));
    kv("model.c2.mean", mean);
    kv("model.c2.limit", limit);
    kv("visible_collisions", static_cast<double>(census.visible_collisions()));
    bool ok = static_cast<double>(census.count(2)) <= limit;

    if (machine_width) {
        const auto semi = verification::detect_semi_collisions(flat, *machine_width);
        kv("semi.pairs", static_cast<double>(semi.pairs));
        kv("semi.triplets", static_cast<double>(semi.triplets));
        kv("semi.flagged", static_cast<double>(semi.flagged()));
        for (const auto& g : semi.offending)
            if (g.same_candidate_triplet)
                std::cout << "same-candidate triplet on prefix " << g.prefix << " (" << g.rows.size() << " rows)\n";
        ok = ok && semi.flagged() == 0;
    }
    std::cout << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? kPass : kFail;
}

int cmd_dispute(const std::string& receipt_path, std::size_t row, const std::string& ledger_path,
                const std::string& keys_path) {
    const auto receipt = parse_receipt(read_file(receipt_path));
    const auto dir = resolve_ledger_dir(ledger_path);
    const auto flat = ledger::parse_flat(read_file(dir / ledger::flat_file_name()));
    const auto keys =
        signing::KeyRegistry::parse(read_file(keys_path.empty() ? dir / "keys.csv" : fs::path(keys_path)));
    if (row >= receipt.rows.size()) throw InputError("row index outside the receipt");
    const auto outcome = verification::file_dispute(receipt, flat, row, keys);
    std::cout << "classification=" << verification::to_string(outcome.classification) << '\n';
    for (const auto& r : outcome.ledger_rows)
        std::cout << "ledger row " << format_pseudonym(r.r) << ',' << r.candidate << '\n';
    switch (outcome.classification) {
        case verification::DisputeClass::RecordFound: return kPass;
        case verification::DisputeClass::SignatureValidMismatch: return kFail;
        case verification::DisputeClass::SignatureInvalid: return kInput;
    }
    return kInput;
}

int cmd_anti_stuffing(const std::string& in, const std::string& rolls_path) {
    const auto dir = resolve_ledger_dir(in);
    const auto flat = ledger::parse_flat(read_file(dir / ledger::flat_file_name()));
    const fs::path run = dir.filename() == "ledger" ? dir.parent_path() : dir;
    const auto rolls = parse_rolls(read_file(rolls_path.empty() ? RunPaths{run}.rolls() : fs::path(rolls_path)));
    const auto res = verification::anti_stuffing_check(rolls, flat);
    kv("delta", static_cast<double>(res.delta));
    bool ok = res.ok;
    if (const auto records = RunPaths{run}.records(); rolls_path.empty() && fs::exists(records)) {
        for (const auto& [p, r] : verification::anti_stuffing_by_precinct(rolls, parse_records(read_file(records))))
            if (!r.ok) {
                std::cout << "precinct " << p.value << " delta " << r.delta << '\n';
                ok = false;
            }
    }
    std::cout << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? kPass : kFail;
}

// --- stats ------------------------------------------------------------------

int cmd_stats_collisions(double n, double s, unsigned k, double z) {
    const stats::CollisionModel m{n, s};
    std::cout << std::setw(4) << "k" << std::setw(16) << "E[C_k]" << '\n';
    for (unsigned i = 1; i <= std::max(k, 3u); ++i)
        std::cout << std::setw(4) << i << std::setw(16) << std::setprecision(8) << stats::expected_collisions(m, i)
                  << '\n';
    const auto band = stats::normal_band(m, 3.0);
    const auto [plo, phi] = stats::poisson_band(m);
    kv("lambda", m.lambda());
    kv("expected_c" + std::to_string(k), stats::expected_collisions(m, k));
    kv("c2.stddev", stats::collision_stddev(m));
    kv("c2.band3.lo", band.lo);
    kv("c2.band3.hi", band.hi);
    kv("c2.poisson_band.lo", static_cast<double>(plo));
    kv("c2.poisson_band.hi", static_cast<double>(phi));
    kv("budget", static_cast<double>(stats::collision_budget(m, z)));
    return kPass;
}

int cmd_stats_detection(std::uint64_t v, double p, std::uint64_t threshold) {
    kv("mean_catches", static_cast<double>(v) * p);
    kv("detection_probability", stats::detection_probability(v, p, threshold));
    return kPass;
}

// --- attacks ----------------------------------------------------------------

struct AttackOpts {
    std::string scenario;
    std::string config;
    std::size_t trials = 1;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    std::string out;
};

class AttackKeys {
public:
    explicit AttackKeys(const std::map<std::string, std::string>& m) : m_(m) {}

    std::string str(const std::string& k, const std::string& def) const {
        auto it = m_.find(k);
        return it == m_.end() ? def : it->second;
    }
    std::uint64_t u64(const std::string& k, std::uint64_t def) const {
        auto it = m_.find(k);
        if (it == m_.end()) return def;
        try {
            std::size_t used = 0;
            auto v = std::stoull(it->second, &used);
            if (used == it->second.size()) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError("[attack] " + k + " must be a non-negative integer");
    }
    std::vector<std::uint32_t> ids(const std::string& k) const { return parse_id_list(str(k, ""), k.c_str()); }

private:
    const std::map<std::string, std::string>& m_;
};

ElectionConfig trial_config(const ElectionConfig& base, std::uint64_t seed, std::size_t t) {
    ElectionConfig cfg = base;
    cfg.seed = random::derive_seed(seed, random::Purpose::Trial, t);
    cfg.signing = SigningMode::Deferred;
    return cfg;
}

int cmd_attack(const AttackOpts& o) {
    const auto file = load_config(o.config);
    const AttackKeys keys(file.attack);
    const auto& base = file.election;
    Table table;
    std::ostringstream analytic;

    auto run = [&](std::vector<std::string> cols, const std::function<std::vector<double>(std::size_t)>& fn) {
        table.columns = std::move(cols);
        table.columns.insert(table.columns.begin(), "trial");
        auto rows = adversary::run_trials<std::vector<double>>(o.trials, o.jobs, [&](std::size_t t) {
            auto r = fn(t);
            r.insert(r.begin(), static_cast<double>(t));
            return r;
        });
        table.rows = std::move(rows);
    };

    if (o.scenario == "dos") {
        const auto window_text = keys.str("window", "0-" + std::to_string(base.day_seconds));
        const auto dash = window_text.find('-');
        if (dash == std::string::npos) throw ConfigError("[attack] window must be <from>-<to>");
        const auto w = parse_id_list(window_text.substr(0, dash) + "," + window_text.substr(dash + 1), "window");
        std::set<ClusterId> clusters;
        for (auto c : keys.ids("clusters")) clusters.insert(ClusterId{c});
        if (clusters.empty()) clusters.insert(base.clusters().front());
        run({"max_shared", "baseline_max_shared", "local_fetches", "fallbacks", "tally_ok"}, [&](std::size_t t) {
            const auto cfg = trial_config(base, o.seed, t);
            const auto dos = adversary::run_localized_dos(cfg, TimeWindow{w.at(0), w.at(1)}, clusters);
            const auto baseline = adversary::measure_anonymity(engine::simulate_election(cfg));
            const bool ok = std::equal(dos.tally.begin(), dos.tally.end(), dos.truth.begin(),
                                       [](std::int64_t a, std::uint64_t b) { return a == static_cast<std::int64_t>(b); });
            return std::vector<double>{static_cast<double>(dos.max_shared_decoy),
                                       static_cast<double>(baseline.max_shared_decoy),
                                       static_cast<double>(dos.local_fetches), static_cast<double>(dos.fallbacks),
                                       ok ? 1.0 : 0.0};
        });
    } else if (o.scenario == "malicious-decoys") {
        std::set<PrecinctId> bad;
        for (auto p : keys.ids("compromised")) bad.insert(PrecinctId{p});
        if (bad.empty()) throw ConfigError("[attack] compromised must list at least one precinct");
        run({"max_shared", "baseline_max_shared", "compromised_decoys", "tally_ok"}, [&](std::size_t t) {
            const auto cfg = trial_config(base, o.seed, t);
            const auto rep = adversary::run_malicious_decoys(cfg, bad);
            const auto baseline = adversary::measure_anonymity(engine::simulate_election(cfg));
            const bool ok = std::equal(rep.tally.begin(), rep.tally.end(), rep.truth.begin(),
                                       [](std::int64_t a, std::uint64_t b) { return a == static_cast<std::int64_t>(b); });
            return std::vector<double>{static_cast<double>(rep.max_shared_decoy),
                                       static_cast<double>(baseline.max_shared_decoy),
                                       static_cast<double>(rep.compromised_decoys), ok ? 1.0 : 0.0};
        });
    } else if (o.scenario == "flip-drop" || o.scenario == "safe-vote") {
        adversary::AlterationParams a;
        a.M = keys.u64("M", 0);
        a.K = keys.u64("K", 0);
        a.mode = keys.str("mode", "flip") == "drop" ? adversary::AlterMode::Drop : adversary::AlterMode::Flip;
        if (const auto mode = keys.str("mode", "flip"); mode != "flip" && mode != "drop")
            throw ConfigError("[attack] mode must be flip or drop");
        a.target = static_cast<CandidateId>(keys.u64("target", 0));
        a.beneficiary = static_cast<CandidateId>(keys.u64("beneficiary", 1));
        a.manual_verifiers = keys.u64("manual_verifiers", 0);
        a.digital_verifiers = keys.u64("digital_verifiers", 0);
        a.threshold = keys.u64("threshold", 10);
        a.pool = o.scenario == "safe-vote" || keys.str("pool", "all") == "unknown" ? adversary::VerifierPool::UnknownActionable
                                                                                    : adversary::VerifierPool::AllVoters;
        std::uint64_t actionable = 0;
        run({"altered", "blind", "catches", "mismatch_disputes", "anti_stuffing_delta", "collision_delta", "credible"},
            [&](std::size_t t) {
                const auto out = engine::simulate_election(trial_config(base, o.seed, t));
                auto p = a;
                p.seed = random::derive_seed(o.seed, random::Purpose::Attack, t);
                const auto rep = adversary::run_central_alteration(out, p);
                actionable = rep.actionable;
                const auto svm = std::count_if(rep.disputes.begin(), rep.disputes.end(), [](const auto& d) {
                    return d.classification == verification::DisputeClass::SignatureValidMismatch;
                });
                return std::vector<double>{static_cast<double>(rep.altered), static_cast<double>(rep.blind),
                                           static_cast<double>(rep.catches), static_cast<double>(svm),
                                           static_cast<double>(rep.anti_stuffing_delta),
                                           static_cast<double>(rep.collision_delta), rep.credible ? 1.0 : 0.0};
            });
        if (o.scenario == "safe-vote" && a.M > a.K && actionable > a.K) {
            const double pc = stats::catch_probability(static_cast<double>(a.M), static_cast<double>(a.K),
                                                       static_cast<double>(actionable));
            analytic << "analytic.catch_probability=" << pc << '\n'
                     << "analytic.mean_catches=" << pc * static_cast<double>(a.manual_verifiers) << '\n'
                     << "analytic.credible=" << stats::detection_probability(a.manual_verifiers, pc, a.threshold)
                     << '\n';
        }
    } else if (o.scenario == "collision") {
        adversary::CollisionAttackParams p;
        p.budget = keys.u64("budget", stats::collision_budget({static_cast<double>(base.num_voters()),
                                                                static_cast<double>(base.sample_space())}));
        for (auto id : keys.ids("targets")) p.targets.insert(PrecinctId{id});
        run({"attempts", "steals", "visible", "skipped", "challenges", "census_c2"}, [&](std::size_t t) {
            auto q = p;
            q.seed = random::derive_seed(o.seed, random::Purpose::Attack, t);
            const auto r = adversary::run_homogeneous_collision_attack(trial_config(base, o.seed, t), q);
            return std::vector<double>{static_cast<double>(r.attempts), static_cast<double>(r.steals),
                                       static_cast<double>(r.visible_collisions), static_cast<double>(r.skipped),
                                       static_cast<double>(r.in_booth_challenges), static_cast<double>(r.census_c2)};
        });
        // Prediction accuracy: the attacker's hit rate averaged over targeted precincts.
        double acc = 0;
        std::size_t n = 0;
        for (const auto& pc : base.precincts) {
            if (!p.targets.empty() && !p.targets.contains(pc.id)) continue;
            const double sum = std::accumulate(pc.preferences.begin(), pc.preferences.end(), 0.0);
            if (sum > 0) acc += *std::max_element(pc.preferences.begin(), pc.preferences.end()) / sum;
            ++n;
        }
        if (n > 0 && acc / static_cast<double>(n) < 1) {
            const auto cap = stats::steal_capacity(static_cast<double>(p.budget), acc / static_cast<double>(n));
            const stats::CollisionModel m{static_cast<double>(base.num_voters()), static_cast<double>(base.sample_space())};
            analytic << "analytic.p=" << acc / static_cast<double>(n) << '\n'
                     << "analytic.attempts=" << cap.attempts << '\n'
                     << "analytic.steals=" << cap.expected_steals << '\n'
                     << "analytic.census_c2=" << stats::expected_collisions(m, 2) + static_cast<double>(p.budget)
                     << '\n';
        }
    } else if (o.scenario == "triplet") {
        adversary::TripletAttackParams p;
        p.precinct = PrecinctId{static_cast<std::uint32_t>(keys.u64("precinct", base.precincts.front().id.value))};
        p.candidate = static_cast<CandidateId>(keys.u64("candidate", 0));
        p.repeats = static_cast<std::uint32_t>(keys.u64("repeats", 3));
        run({"forced", "pairs", "triplets", "flagged"}, [&](std::size_t t) {
            auto q = p;
            q.seed = random::derive_seed(o.seed, random::Purpose::Attack, t);
            const auto r = adversary::run_entropy_triplet_attack(trial_config(base, o.seed, t), q);
            return std::vector<double>{static_cast<double>(r.forced), static_cast<double>(r.report.pairs),
                                       static_cast<double>(r.report.triplets), static_cast<double>(r.report.flagged())};
        });
    } else {
        throw InputError("unknown scenario '" + o.scenario +
                         "' (dos, malicious-decoys, flip-drop, collision, safe-vote, triplet)");
    }

    std::cout << "scenario " << o.scenario << ", " << o.trials << " trials, seed " << o.seed << "\n\n";
    table.print(std::cout);
    table.summary(std::cout);
    std::cout << analytic.str();
    if (!o.out.empty()) {
        write_file(fs::path(o.out) / ("attack-" + o.scenario + ".csv"), table.csv());
        std::ostringstream s;
        table.summary(s);
        write_file(fs::path(o.out) / ("attack-" + o.scenario + "-summary.txt"), s.str() + analytic.str());
    }
    return kPass;
}

// --- audits -----------------------------------------------------------------

int cmd_rla(const std::string& in, double alpha, std::optional<double> margin, std::uint64_t seed,
            const std::string& out) {
    RunPaths paths{in};
    const auto config = load_config(paths.config());
    const std::size_t n = config.election.num_candidates();
    const auto records = parse_records(read_file(paths.records()));
    const auto boxes = parse_boxes(read_file(paths.boxes()));
    const auto electronic = audit::electronic_batch_tallies(records, n);
    if (!margin) {
        const auto net = audit::national_totals(audit::subtract(electronic, audit::seed_tallies(records, n)), n);
        margin = audit::reported_margin(std::vector<std::int64_t>(net.begin(), net.end()));
    }
    std::size_t batches = electronic.size();
    for (const auto& b : boxes)
        if (!electronic.contains(b.precinct)) ++batches;
    const auto plan = audit::plan_rla(*margin, batches, alpha, seed);
    const auto outcome = audit::run_rla(boxes, electronic, n, plan);
    const auto cert = audit::format_certificate(plan, outcome);
    std::cout << cert;
    write_file(out.empty() ? paths.root / "audit-certificate.txt" : fs::path(out), cert);
    return outcome.decision == audit::Decision::Certify ? kPass : kFail;
}

int cmd_recount(const std::string& in, const std::string& scope_text, const std::string& out) {
    RunPaths paths{in};
    const auto config = load_config(paths.config());
    const std::size_t n = config.election.num_candidates();
    const auto records = parse_records(read_file(paths.records()));
    const auto boxes = parse_boxes(read_file(paths.boxes()));
    audit::RecountScope scope;
    if (scope_text == "national")
        scope.national = true;
    else
        for (auto p : parse_id_list(scope_text, "precinct id")) scope.precincts.insert(PrecinctId{p});
    if (scope.empty()) throw InputError("empty recount scope");

    const auto electronic = audit::electronic_batch_tallies(records, n);
    const auto physical = audit::full_recount(boxes, n, scope);
    const auto seeds = audit::seed_tallies(records, n);
    std::ostringstream os;
    os << "precinct,source";
    for (std::size_t c = 0; c < n; ++c) os << ",c" << c;
    os << '\n';
    bool changed = false;
    for (const auto& [p, counts] : physical) {
        std::vector<std::uint64_t> elec(n, 0);
        if (auto it = electronic.find(p); it != electronic.end()) elec = it->second;
        changed = changed || elec != counts;
        for (const auto& [label, t] : {std::pair{"electronic", elec}, std::pair{"recount", counts}}) {
            os << p.value << ',' << label;
            for (auto v : t) os << ',' << v;
            os << '\n';
        }
    }
    const auto merged = audit::subtract(audit::apply_recount(electronic, boxes, n, scope), seeds);
    const auto totals = audit::national_totals(merged, n);
    os << "national (net of seed votes)";
    for (auto v : totals) os << ',' << v;
    os << '\n' << (changed ? "recount CHANGED in-scope results\n" : "recount matches electronic results\n");
    std::cout << os.str();
    write_file(out.empty() ? paths.root / "recount.csv" : fs::path(out), os.str());
    return changed ? kFail : kPass;
}

// --- report -----------------------------------------------------------------

int cmd_report(std::size_t trials, std::uint64_t seed, unsigned jobs) {
    const stats::CollisionModel national{1e7, 1e12};
    const auto band = stats::normal_band(national, 3.0);
    const auto cap = stats::steal_capacity(20, 0.9);
    const double pc = stats::catch_probability(2e5, 1e5, 5.1e6);
    std::cout << "Analytic values at national scale (N=1e7, S=1e12)\n";
    std::cout << "  E[C_2]                      " << stats::expected_collisions(national, 2) << '\n'
              << "  sigma                       " << stats::collision_stddev(national) << '\n'
              << "  3-sigma band                " << band.lo << " .. " << band.hi << '\n'
              << "  attempts / steals (B=20)    " << cap.attempts << " / " << cap.expected_steals << '\n'
              << "  P_catch                     " << pc << '\n'
              << "  P(catches >= 10 | V=1000)   " << stats::detection_probability(1000, pc, 10) << "\n\n";

    std::cout << "Scaled Monte-Carlo (" << trials << " trials each)\n";
    auto desk = [&](std::uint64_t s, std::vector<double> prefs) {
        GridSpec g;
        g.seed = s;
        g.clusters = 10;
        g.precincts_per_cluster = 10;
        g.voters_per_precinct = 100;
        g.pseudonym_width = 6;
        g.preferences = std::move(prefs);
        g.signing = SigningMode::Deferred;
        return make_grid_config(g);
    };
    const stats::CollisionModel scaled{1e4, 1e6};
    const auto c2 = adversary::run_trials<double>(trials, jobs, [&](std::size_t t) {
        const auto out = engine::simulate_election(desk(random::derive_seed(seed, random::Purpose::Trial, t), {}));
        const auto flat = ledger::build_format_a(out.records, 2, 6);
        return static_cast<double>(verification::count_collisions(flat).count(2));
    });
    const double c2_mean = std::accumulate(c2.begin(), c2.end(), 0.0) / static_cast<double>(trials);
    const auto budget = stats::collision_budget(scaled);
    const auto steals = adversary::run_trials<double>(trials, jobs, [&](std::size_t t) {
        const auto cfg = desk(random::derive_seed(seed, random::Purpose::Trial, 1000 + t), {0.9, 0.1});
        return static_cast<double>(adversary::run_homogeneous_collision_attack(
                                       cfg, {{}, static_cast<std::uint64_t>(budget), seed + t})
                                       .steals);
    });
    const double steal_mean = std::accumulate(steals.begin(), steals.end(), 0.0) / static_cast<double>(trials);
    const auto credible = adversary::run_trials<double>(trials, jobs, [&](std::size_t t) {
        GridSpec g;
        g.seed = random::derive_seed(seed, random::Purpose::Trial, 2000 + t);
        g.clusters = 10;
        g.precincts_per_cluster = 10;
        g.voters_per_precinct = 1000;
        g.signing = SigningMode::Deferred;
        auto cfg = make_grid_config(g);
        for (auto& p : cfg.precincts) p.exact_counts = std::vector<std::uint32_t>{510, 490};
        adversary::AlterationParams a;
        a.M = 2000;
        a.K = 1000;
        a.manual_verifiers = 1000;
        a.seed = seed + t;
        return adversary::run_safe_vote_alteration(engine::simulate_election(cfg), a).credible ? 1.0 : 0.0;
    });
    const double rate = std::accumulate(credible.begin(), credible.end(), 0.0) / static_cast<double>(trials);

    std::cout << std::left << std::setw(40) << "  quantity" << std::setw(14) << "analytic" << "empirical\n";
    std::cout << std::setw(40) << "  E[C_2] (N=1e4, S=1e6)" << std::setw(14) << stats::expected_collisions(scaled, 2)
              << c2_mean << '\n';
    std::cout << std::setw(40) << ("  steals (B=" + std::to_string(budget) + ", p=0.9)") << std::setw(14)
              << stats::steal_capacity(static_cast<double>(budget), 0.9).expected_steals << steal_mean << '\n';
    std::cout << std::setw(40) << "  P(catches >= 10) (N=1e5, 1:100 scale)" << std::setw(14)
              << stats::detection_probability(1000, 0.02, 10) << rate << '\n'
              << std::right;
    kv("empirical.c2", c2_mean);
    kv("empirical.steals", steal_mean);
    kv("empirical.credible", rate);
    return kPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Software-free verifiable election simulator and verifier"};
    app.require_subcommand(1);

    SimulateOpts sim;
    auto* simulate = app.add_subcommand("simulate", "run an election and write a run directory");
    simulate->alias("run");
    simulate->add_option("--config", sim.config, "election config file")->required();
    simulate->add_option("--seed", sim.seed, "master seed (overrides the config)");
    simulate->add_option("--out", sim.out, "output directory (default $SFV_OUT_DIR or ./sfv-out)");
    simulate->add_flag("--no-receipts", sim.no_receipts, "skip writing one receipt file per voter");

    std::string in_dir;
    auto* publish = app.add_subcommand("publish", "rebuild ledger files from a run's central record list");
    publish->add_option("--in", in_dir, "run directory")->required();

    std::string ledger_path, r_text, file_path, node, config_path, receipt_path, keys_path, rolls_path;
    std::optional<unsigned> candidate;
    auto* verify_vote = app.add_subcommand("verify-vote", "look up a pseudonym in the flat ledger");
    verify_vote->add_option("--ledger", ledger_path, "ledger or run directory")->required();
    verify_vote->add_option("--r", r_text, "pseudonym, zero padded")->required();
    verify_vote->add_option("--candidate", candidate, "expected candidate id");

    auto* verify_cluster = app.add_subcommand("verify-cluster", "manual check of one cluster file");
    verify_cluster->add_option("--file", file_path, "cluster file")->required();

    auto* verify_hierarchy = app.add_subcommand("verify-hierarchy", "check aggregate files against cluster files");
    verify_hierarchy->add_option("--ledger", ledger_path, "ledger or run directory")->required();
    verify_hierarchy->add_option("--path", node, "drill down to one cluster, e.g. cluster-3");
    verify_hierarchy->add_option("--config", config_path, "election config (default: the run's config.cfg)");

    auto* tally = app.add_subcommand("tally", "digital tally of the flat ledger");
    tally->add_option("--ledger", ledger_path, "ledger or run directory")->required();

    double z = stats::kDefaultBudgetZ;
    std::optional<int> machine_width;
    auto* collisions = app.add_subcommand("collisions", "collision census against the Poisson model");
    collisions->add_option("--ledger", ledger_path, "ledger or run directory")->required();
    collisions->add_option("--z", z, "alarm threshold in standard deviations");
    collisions->add_option("--machine-width", machine_width, "also report semi-collisions on this prefix width");

    std::size_t row = 0;
    auto* dispute = app.add_subcommand("dispute", "classify a voter's dispute");
    dispute->add_option("--receipt", receipt_path, "receipt file")->required();
    dispute->add_option("--row", row, "row index of the voter's true choice")->required();
    dispute->add_option("--ledger", ledger_path, "ledger or run directory")->required();
    dispute->add_option("--keys", keys_path, "machine key file (default: keys.csv next to the ledger)");

    auto* anti = app.add_subcommand("anti-stuffing", "compare ledger rows with crossed-off names");
    anti->add_option("--ledger", ledger_path, "run directory (or ledger directory with --rolls)")->required();
    anti->add_option("--rolls", rolls_path, "voter roll counts file");

    auto* stats_cmd = app.add_subcommand("stats", "analytic collision and detection figures");
    stats_cmd->require_subcommand(1);
    double sn = 0, ss = 0, sp = 0;
    unsigned sk = 2;
    std::uint64_t sv = 0, st = 10;
    auto* stats_coll = stats_cmd->add_subcommand("collisions", "E[C_k] and the C_2 band");
    stats_coll->add_option("--n", sn, "voters")->required();
    stats_coll->add_option("--s", ss, "sample space size")->required();
    stats_coll->add_option("--k", sk, "multiplicity");
    stats_coll->add_option("--z", z, "budget threshold in standard deviations");
    auto* stats_det = stats_cmd->add_subcommand("detection", "P(at least threshold catches)");
    stats_det->add_option("--v", sv, "verifiers")->required();
    stats_det->add_option("--p", sp, "per-verifier catch probability")->required();
    stats_det->add_option("--threshold", st, "catches needed");

    AttackOpts atk;
    auto* attack = app.add_subcommand("attack", "run an attack scenario over several trials");
    attack->add_option("--scenario", atk.scenario, "dos, malicious-decoys, flip-drop, collision, safe-vote, triplet")
        ->required();
    attack->add_option("--config", atk.config, "election config with an [attack] section")->required();
    attack->add_option("--trials", atk.trials, "trial count")->check(CLI::PositiveNumber);
    attack->add_option("--seed", atk.seed, "master seed");
    attack->add_option("--jobs", atk.jobs, "worker threads")->check(CLI::PositiveNumber);
    attack->add_option("--out", atk.out, "directory for the per-trial CSV and summary");

    double alpha = 0.05;
    std::optional<double> margin;
    std::uint64_t seed = 1;
    std::string out_path, scope;
    auto* rla = app.add_subcommand("rla", "batch-comparison risk-limiting audit of a run");
    rla->add_option("--in", in_dir, "run directory")->required();
    rla->add_option("--alpha", alpha, "risk limit");
    rla->add_option("--margin", margin, "margin as a fraction of ballots (default: reported margin)");
    rla->add_option("--seed", seed, "sampling seed");
    rla->add_option("--out", out_path, "certificate file");

    auto* recount = app.add_subcommand("recount", "count the ballot boxes in scope");
    recount->add_option("--in", in_dir, "run directory")->required();
    recount->add_option("--scope", scope, "'national' or a comma-separated precinct list")->required();
    recount->add_option("--out", out_path, "output file");

    std::size_t report_trials = 20;
    unsigned jobs = 1;
    auto* report = app.add_subcommand("report", "analytic figures next to scaled Monte-Carlo runs");
    report->add_option("--trials", report_trials, "trials per experiment")->check(CLI::PositiveNumber);
    report->add_option("--seed", seed, "master seed");
    report->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kInput;
    }

    try {
        if (*simulate) return cmd_simulate(sim);
        if (*publish) return cmd_publish(in_dir);
        if (*verify_vote) return cmd_verify_vote(ledger_path, r_text, candidate);
        if (*verify_cluster) return cmd_verify_cluster(file_path);
        if (*verify_hierarchy) return cmd_verify_hierarchy(ledger_path, node, config_path);
        if (*tally) return cmd_tally(ledger_path);
        if (*collisions) return cmd_collisions(ledger_path, z, machine_width);
        if (*dispute) return cmd_dispute(receipt_path, row, ledger_path, keys_path);
        if (*anti) return cmd_anti_stuffing(ledger_path, rolls_path);
        if (*stats_coll) return cmd_stats_collisions(sn, ss, sk, z);
        if (*stats_det) return cmd_stats_detection(sv, sp, st);
        if (*attack) return cmd_attack(atk);
        if (*rla) return cmd_rla(in_dir, alpha, margin, seed, out_path);
        if (*recount) return cmd_recount(in_dir, scope, out_path);
        if (*report) return cmd_report(report_trials, seed, jobs);
    } catch (const LedgerInconsistency& e) {
        std::cerr << "ledger inconsistency: " << e.what() << '\n';
        std::cout << "FAIL\n";
        return kFail;
    } catch (const ledger::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (!contradicts_itself(e.kind())) return kInput;
        std::cout << "FAIL\n";
        return kFail;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInput;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInput;
    }
    return kInput;
}
