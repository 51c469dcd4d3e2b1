#include "sfv/adversary.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "sfv/error.hpp"
#include "sfv/random.hpp"

namespace sfv::adversary {

AnonymityReport measure_anonymity(const engine::RawElectionOutput& out) {
    AnonymityReport report;
    std::map<std::tuple<std::uint32_t, CandidateId, std::uint64_t>, std::uint64_t> shared;
    for (const auto& ir : out.receipts)
        for (const auto& row : ir.receipt.rows)
            if (row.candidate != ir.choice) {
                auto n = ++shared[{ir.precinct.value, row.candidate, row.r.value()}];
                report.max_shared_decoy = std::max(report.max_shared_decoy, n);
            }
    for (const auto& e : out.logs) {
        if (e.kind == engine::LogKind::DecoyFetch && e.locality == engine::Locality::LocalOnly) ++report.local_fetches;
        if (e.kind == engine::LogKind::Fallback) ++report.fallbacks;
    }
    const auto flat = ledger::build_format_a(out.records, out.config.num_candidates(), out.config.pseudonym_width);
    report.tally = verification::digital_tally(flat);
    report.truth = out.national_truth();
    return report;
}

AnonymityReport run_localized_dos(const ElectionConfig& config, TimeWindow window,
                                  const std::set<ClusterId>& clusters) {
    if (window.to > config.day_seconds || window.from > window.to)
        throw ConfigError("partition window must lie within polling hours");
    ElectionConfig cfg = config;
    for (auto c : clusters) cfg.partitions[c] = window;
    return measure_anonymity(engine::simulate_election(cfg));
}

AnonymityReport run_malicious_decoys(const ElectionConfig& config, const std::set<PrecinctId>& compromised) {
    engine::SimulationHooks hooks;
    hooks.setup = [&](engine::Election& e) {
        for (auto p : compromised) e.set_compromised(p);
    };
    auto out = engine::simulate_election(config, hooks);
    auto report = measure_anonymity(out);
    for (const auto& e : out.logs)
        if (e.kind == engine::LogKind::DecoyFetch && compromised.contains(e.source) && !compromised.contains(e.precinct))
            ++report.compromised_decoys;
    return report;
}

// ---------------------------------------------------------------------------

namespace {

bool in_cluster_file(const ledger::HierarchicalLedger& h, ClusterId cluster, const ReceiptRow& row) {
    const auto* file = h.cluster(cluster);
    if (!file) return false;
    // Rows are grouped by candidate and sorted by r inside a group.
    auto it = std::lower_bound(file->rows.begin(), file->rows.end(), row, [](const ledger::ClusterRow& a, const ReceiptRow& b) {
        if (a.candidate != b.candidate) return a.candidate < b.candidate;
        return a.r.value() < b.r.value();
    });
    return it != file->rows.end() && it->candidate == row.candidate && it->r.value() == row.r.value();
}

}  // namespace

DetectionReport run_central_alteration(const engine::RawElectionOutput& out, const AlterationParams& params) {
    const auto& cfg = out.config;
    const std::size_t n = cfg.num_candidates();
    if (params.target >= n || params.beneficiary >= n) throw DomainError("unknown candidate");
    if (params.mode == AlterMode::Flip && params.target == params.beneficiary)
        throw DomainError("flip target and beneficiary must differ");

    DetectionReport report;
    std::vector<std::size_t> actionable;  // receipt indices
    for (std::size_t i = 0; i < out.receipts.size(); ++i) {
        const auto& ir = out.receipts[i];
        if (ir.record && ir.choice == params.target) actionable.push_back(i);
    }
    report.actionable = actionable.size();
    if (params.M > actionable.size()) throw DomainError("M exceeds the actionable pool");

    random::Stream stream(random::derive_seed(params.seed, random::Purpose::Attack, cfg.seed));
    stream.shuffle(actionable);

    std::set<std::size_t> forced_alter(params.forced_alterations.begin(), params.forced_alterations.end());
    std::set<std::size_t> forced_verify(params.forced_verifiers.begin(), params.forced_verifiers.end());
    std::vector<std::size_t> safe, unknown;
    for (auto i : actionable) {
        if (forced_alter.contains(i) || forced_verify.contains(i))
            unknown.push_back(i);
        else if (safe.size() < params.K)
            safe.push_back(i);
        else
            unknown.push_back(i);
    }
    report.safe_pool_surplus = params.K > params.M;

    std::set<std::size_t> altered;
    for (auto i : params.forced_alterations) {
        if (altered.size() >= params.M) break;
        if (i < out.receipts.size() && out.receipts[i].record && out.receipts[i].choice == params.target)
            altered.insert(i);
    }
    for (auto i : safe) {
        if (altered.size() >= params.M) break;
        altered.insert(i);
    }
    std::vector<std::size_t> candidates_blind;
    for (auto i : unknown)
        if (!altered.contains(i)) candidates_blind.push_back(i);
    const std::size_t need = params.M - altered.size();
    for (auto k : stream.sample_without_replacement(candidates_blind.size(), need)) {
        altered.insert(candidates_blind[k]);
        ++report.blind;
    }
    report.altered = altered.size();

    // Apply to the central list.
    std::vector<bool> drop(out.records.size(), false);
    report.published = out.records;
    for (auto i : altered) {
        const auto rec = *out.receipts[i].record;
        report.altered_precincts.insert(out.records[rec].precinct);
        if (params.mode == AlterMode::Flip)
            report.published[rec].candidate = params.beneficiary;
        else
            drop[rec] = true;
    }
    if (params.mode == AlterMode::Drop) {
        std::vector<VoteRecord> kept;
        kept.reserve(report.published.size());
        for (std::size_t i = 0; i < report.published.size(); ++i)
            if (!drop[i]) kept.push_back(report.published[i]);
        report.published = std::move(kept);
    }

    const auto before = ledger::build_format_a(out.records, n, cfg.pseudonym_width);
    const auto after = ledger::build_format_a(report.published, n, cfg.pseudonym_width);
    const auto printed = ledger::build_format_b(report.published, cfg);
    report.collision_delta = static_cast<std::int64_t>(verification::count_collisions(after).count(2)) -
                             static_cast<std::int64_t>(verification::count_collisions(before).count(2));
    report.anti_stuffing_delta = verification::anti_stuffing_check(out.rolls, after).delta;

    // Verifier population.
    std::vector<std::size_t> pool;
    if (params.pool == VerifierPool::UnknownActionable) {
        for (auto i : unknown)
            if (!forced_verify.contains(i)) pool.push_back(i);
    } else {
        std::set<std::size_t> safe_set(safe.begin(), safe.end());
        for (std::size_t i = 0; i < out.receipts.size(); ++i)
            if (out.receipts[i].record && !safe_set.contains(i) && !forced_verify.contains(i)) pool.push_back(i);
    }
    const std::size_t wanted = params.manual_verifiers + params.digital_verifiers;
    if (wanted > pool.size()) throw DomainError("more verifiers requested than eligible voters");
    auto picks = stream.sample_without_replacement(pool.size(), wanted);
    std::vector<std::size_t> manual(forced_verify.begin(), forced_verify.end());
    for (std::size_t k = 0; k < params.manual_verifiers; ++k) manual.push_back(pool[picks[k]]);
    report.manual_verifiers = manual.size();
    report.verifiers = manual.size() + params.digital_verifiers;

    for (auto i : manual) {
        const auto& ir = out.receipts[i];
        const auto& row = ir.receipt.rows.at(ir.choice);
        if (in_cluster_file(printed, ir.cluster, row)) continue;
        ++report.catches;
        report.disputes.push_back(verification::file_dispute(out.signed_receipt(i), after, ir.choice, out.keys));
    }
    report.credible = report.catches >= params.threshold;
    return report;
}

// ---------------------------------------------------------------------------

CollisionAttackResult run_homogeneous_collision_attack(const ElectionConfig& config,
                                                       const CollisionAttackParams& params) {
    const std::size_t n = config.num_candidates();
    if (n < 2) throw ConfigError("the collision attack needs two candidates");
    CollisionAttackResult result;

    auto predicted = [&](PrecinctId p) {
        const auto& prefs = config.precinct(p).preferences;
        return static_cast<CandidateId>(std::max_element(prefs.begin(), prefs.end()) - prefs.begin());
    };
    auto targeted = [&](PrecinctId p) { return params.targets.empty() || params.targets.contains(p); };

    std::set<std::uint64_t> reused;
    engine::SimulationHooks hooks;
    // The rigged pseudonym is fixed before the choice is known; the choice only decides whether the
    // reused number turns into an absorbed steal or a visible collision.
    hooks.plan = [&](engine::Election& e, const engine::Session& s, CandidateId choice, int attempt) {
        engine::CastOptions options;
        if (attempt > 0 || !targeted(s.precinct) || result.visible_collisions >= params.budget) return options;
        const CandidateId pred = predicted(s.precinct);
        random::Stream stream(random::derive_seed(params.seed, random::Purpose::Attack, s.id.value));
        // Each earlier record is reused at most once, so a failed attempt shows up as a plain pair.
        std::vector<Pseudonym> fresh;
        for (const auto& entry : e.pool(s.cluster).of(pred))
            if (!reused.contains(entry.r.value())) fresh.push_back(entry.r);
        // A second record must remain to serve as this voter's decoy for the predicted candidate.
        if (fresh.size() < 2) {
            ++result.skipped;
            return options;
        }
        ++result.attempts;
        const Pseudonym r = fresh[stream.below(fresh.size())];
        reused.insert(r.value());
        options.rng = random::Rigged{r};
        if (choice != pred) {
            ++result.visible_collisions;
            return options;
        }
        options.publish = false;
        ++result.steals;
        std::vector<PrecinctId> others;
        for (auto p : config.precincts_of(s.cluster))
            if (p != s.precinct) others.push_back(p);
        const PrecinctId where = others.empty() ? s.precinct : others[stream.below(others.size())];
        const auto beneficiary = static_cast<CandidateId>((pred + 1) % n);
        e.inject_record(where, beneficiary, random::draw_pseudonym(stream, config.pseudonym_width), s.time);
        return options;
    };

    auto out = engine::simulate_election(config, hooks);
    result.in_booth_challenges = out.nullified_sessions;
    const auto flat = ledger::build_format_a(out.records, n, config.pseudonym_width);
    result.census_c2 = verification::count_collisions(flat).count(2);
    result.rows = flat.rows.size();
    for (const auto& roll : out.rolls) result.crossed_off += roll.crossed_off;
    result.tally = verification::digital_tally(flat);
    result.truth = out.national_truth();
    return result;
}

// ---------------------------------------------------------------------------

TripletAttackResult run_entropy_triplet_attack(const ElectionConfig& config, const TripletAttackParams& params) {
    const auto* mode = std::get_if<random::VoterEntropy>(&config.rng);
    if (!mode) throw ConfigError("the triplet attack needs voter-entropy pseudonyms");
    TripletAttackResult result;
    random::Stream stream(random::derive_seed(params.seed, random::Purpose::Attack, params.precinct.value));
    result.prefix = stream.below(pow10(mode->machine_width));

    engine::SimulationHooks hooks;
    hooks.plan = [&](engine::Election&, const engine::Session& s, CandidateId choice, int) {
        engine::CastOptions options;
        if (s.precinct != params.precinct || choice != params.candidate || result.forced >= params.repeats)
            return options;
        random::VoterEntropy rigged = *mode;
        rigged.forced_prefix = result.prefix;
        options.rng = rigged;
        ++result.forced;
        return options;
    };
    auto out = engine::simulate_election(config, hooks);
    const auto flat = ledger::build_format_a(out.records, config.num_candidates(), config.pseudonym_width);
    result.report = verification::detect_semi_collisions(flat, mode->machine_width);
    return result;
}

}  // namespace sfv::adversary
