#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sfv/engine.hpp"
#include "sfv/stats.hpp"
#include "sfv/verification.hpp"

namespace sfv::audit {

/// Batch-comparison audit plan. `margin` is the fraction of all ballots that would have to
/// change to overturn the reported outcome.
struct RlaPlan {
    double alpha = 0.05;
    double margin = 0;
    std::size_t batches = 0;
    std::size_t corrupted_batches = 0;  // fewest batches an outcome-changing error must touch
    std::size_t sample_size = 0;
    std::uint64_t seed = 0;
    std::uint64_t tolerance = 0;           // per-batch discrepancy allowed
    std::uint64_t aggregate_threshold = 0;  // sum over the sample allowed
    bool full_recount = false;             // tie: count everything
};

/// C(B - b, n) / C(B, n): chance that a sample of n batches misses all b corrupted ones.
double miss_probability(std::size_t batches, std::size_t corrupted, std::size_t n);

/// Throws DomainError unless 0 < alpha < 1 (alpha == 1 is accepted), margin >= 0, batches >= 1.
RlaPlan plan_rla(double margin, std::size_t batches, double alpha, std::uint64_t seed = 0);

/// Flip-fraction margin from reported totals: (winner - runner_up) / (2 * total).
double reported_margin(std::span<const std::int64_t> totals);

using BatchTallies = std::map<PrecinctId, std::vector<std::uint64_t>>;

/// Per-precinct counts of the central records. Committee seed votes are included because their
/// paper ballots sit in the seeding precinct's box.
BatchTallies electronic_batch_tallies(std::span<const VoteRecord> records, std::size_t candidates);

/// Per-precinct counts of the committee seed votes alone.
BatchTallies seed_tallies(std::span<const VoteRecord> records, std::size_t candidates);

/// a - b per batch and candidate; throws DomainError if any count would go negative.
BatchTallies subtract(const BatchTallies& a, const BatchTallies& b);

enum class Decision { Certify, EscalateFullRecount };

std::string_view to_string(Decision d);

struct BatchResult {
    PrecinctId batch;
    std::uint64_t discrepancy = 0;  // L1 distance between manual and electronic counts
    bool missing = false;           // no ballot box for a sampled batch
};

struct AuditOutcome {
    Decision decision = Decision::Certify;
    std::vector<PrecinctId> sampled;
    std::vector<BatchResult> batches;
    std::uint64_t max_discrepancy = 0;
    std::uint64_t total_discrepancy = 0;
};

/// Samples plan.sample_size batches without replacement from the electronic batch list.
AuditOutcome run_rla(std::span<const engine::BallotBox> boxes, const BatchTallies& electronic,
                     std::size_t candidates, const RlaPlan& plan);

std::string format_certificate(const RlaPlan& plan, const AuditOutcome& outcome);

struct RecountScope {
    bool national = false;
    std::set<PrecinctId> precincts;

    bool empty() const { return !national && precincts.empty(); }
    bool covers(PrecinctId p) const { return national || precincts.contains(p); }
};

/// Physical count for the scope.
BatchTallies full_recount(std::span<const engine::BallotBox> boxes, std::size_t candidates,
                          const RecountScope& scope);

/// Electronic results with every in-scope batch replaced by its physical count.
BatchTallies apply_recount(const BatchTallies& electronic, std::span<const engine::BallotBox> boxes,
                           std::size_t candidates, const RecountScope& scope);

std::vector<std::uint64_t> national_totals(const BatchTallies& tallies, std::size_t candidates);

struct TriggerDecision {
    RecountScope scope;
    bool national_review = false;
    std::vector<std::string> reasons;
};

/// Any signature-valid mismatch or anti-stuffing mismatch puts its precinct in scope;
/// C_2 above mean + z*sigma raises a national review flag.
TriggerDecision recount_trigger(std::span<const verification::DisputeOutcome> disputes,
                                const std::map<PrecinctId, verification::AntiStuffingResult>& anti_stuffing,
                                const verification::CollisionCensus& census, const stats::CollisionModel& model,
                                double z = stats::kDefaultBudgetZ);

}  // namespace sfv::audit
