#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "sfv/engine.hpp"
#include "sfv/ledger.hpp"
#include "sfv/verification.hpp"

namespace sfv::adversary {

// --- anonymity degradation (partitions, malicious decoys) -------------------

struct AnonymityReport {
    /// Largest number of receipts in one precinct that print the same decoy (r, C).
    std::uint64_t max_shared_decoy = 0;
    std::uint64_t local_fetches = 0;  // decoy fetches served from the local pool
    std::uint64_t fallbacks = 0;
    std::vector<std::int64_t> tally;       // digital tally of the published ledger
    std::vector<std::uint64_t> truth;      // engine ground truth
    std::uint64_t compromised_decoys = 0;  // decoys honest machines received from compromised peers
};

AnonymityReport measure_anonymity(const engine::RawElectionOutput& out);

/// Cuts the given clusters off for `window`; machines there draw decoys from local history only.
AnonymityReport run_localized_dos(const ElectionConfig& config, TimeWindow window, const std::set<ClusterId>& clusters);

/// Compromised machines answer every peer request with one fixed record per candidate.
AnonymityReport run_malicious_decoys(const ElectionConfig& config, const std::set<PrecinctId>& compromised);

// --- central alteration (flip / drop) --------------------------------------

enum class AlterMode { Flip, Drop };

enum class VerifierPool {
    UnknownActionable,  // voters of the target candidate the attacker has no information about
    AllVoters,
};

struct AlterationParams {
    std::uint64_t M = 0;  // votes to alter
    std::uint64_t K = 0;  // actionable votes known never to be verified
    AlterMode mode = AlterMode::Flip;
    CandidateId target = 0;       // candidate whose votes are altered
    CandidateId beneficiary = 1;  // flips go to this candidate
    std::uint64_t manual_verifiers = 0;
    std::uint64_t digital_verifiers = 0;  // shown a consistent fake; never catch
    VerifierPool pool = VerifierPool::UnknownActionable;
    /// Receipt indices that verify in addition to the random draw (manual).
    std::vector<std::size_t> forced_verifiers;
    /// Receipt indices the attacker alters first (before the safe pool).
    std::vector<std::size_t> forced_alterations;
    std::uint64_t threshold = 10;
    std::uint64_t seed = 0;
};

struct DetectionReport {
    std::uint64_t actionable = 0;
    std::uint64_t altered = 0;
    std::uint64_t blind = 0;  // altered outside the safe pool
    bool safe_pool_surplus = false;
    std::uint64_t verifiers = 0;
    std::uint64_t manual_verifiers = 0;
    std::uint64_t catches = 0;
    bool credible = false;  // catches >= threshold
    std::vector<verification::DisputeOutcome> disputes;
    std::int64_t collision_delta = 0;  // C_2 after minus before
    std::int64_t anti_stuffing_delta = 0;
    std::set<PrecinctId> altered_precincts;
    std::vector<VoteRecord> published;  // central list after the attack
};

/// Alters the closed election's central list. Throws DomainError if M exceeds the actionable pool.
DetectionReport run_central_alteration(const engine::RawElectionOutput& out, const AlterationParams& params);

inline DetectionReport run_central_flip_drop(const engine::RawElectionOutput& out, AlterationParams params) {
    params.digital_verifiers = 0;
    return run_central_alteration(out, params);
}

/// Manual verifiers are drawn from the unknown actionable pool only.
inline DetectionReport run_safe_vote_alteration(const engine::RawElectionOutput& out, AlterationParams params) {
    params.pool = VerifierPool::UnknownActionable;
    return run_central_alteration(out, params);
}

// --- homogeneous collision attack ------------------------------------------

struct CollisionAttackParams {
    std::set<PrecinctId> targets;  // empty: every precinct
    std::uint64_t budget = 20;     // visible collisions the attacker tolerates
    std::uint64_t seed = 0;
};

struct CollisionAttackResult {
    std::uint64_t attempts = 0;
    std::uint64_t steals = 0;
    std::uint64_t visible_collisions = 0;
    std::uint64_t skipped = 0;  // no earlier record to reuse
    std::uint64_t in_booth_challenges = 0;
    std::uint64_t census_c2 = 0;
    std::uint64_t rows = 0;
    std::uint64_t crossed_off = 0;
    std::vector<std::int64_t> tally;
    std::vector<std::uint64_t> truth;
};

/// Prediction per precinct = its most preferred candidate; the attacker's beneficiary is the next one.
CollisionAttackResult run_homogeneous_collision_attack(const ElectionConfig& config,
                                                       const CollisionAttackParams& params);

// --- voter-entropy triplet attempt -----------------------------------------

struct TripletAttackParams {
    PrecinctId precinct;
    CandidateId candidate = 0;
    std::uint32_t repeats = 3;  // votes forced onto one committed prefix
    std::uint64_t seed = 0;
};

struct TripletAttackResult {
    std::uint64_t forced = 0;
    std::uint64_t prefix = 0;
    verification::SemiCollisionReport report;
};

/// The config must use VoterEntropy. A rigged machine forces one prefix onto several votes for
/// the same candidate, hoping the voter digits line up.
TripletAttackResult run_entropy_triplet_attack(const ElectionConfig& config, const TripletAttackParams& params);

// --- trials -----------------------------------------------------------------

/// Runs fn(0..n-1) on `jobs` threads; results are returned in trial order.
template <class T>
std::vector<T> run_trials(std::size_t n, unsigned jobs, const std::function<T(std::size_t)>& fn) {
    std::vector<T> results(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                results[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    jobs = std::max(1u, jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

}  // namespace sfv::adversary
