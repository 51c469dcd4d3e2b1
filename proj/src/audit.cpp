#include "sfv/audit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sfv/error.hpp"
#include "sfv/random.hpp"

namespace sfv::audit {

double miss_probability(std::size_t batches, std::size_t corrupted, std::size_t n) {
    if (corrupted > batches || n > batches) throw DomainError("sample or corruption exceeds batch count");
    if (corrupted == 0) return 1.0;
    if (n + corrupted > batches) return 0.0;
    // prod_{i<n} (B - b - i) / (B - i)
    double log_p = 0;
    for (std::size_t i = 0; i < n; ++i)
        log_p += std::log(static_cast<double>(batches - corrupted - i)) - std::log(static_cast<double>(batches - i));
    return std::exp(log_p);
}

RlaPlan plan_rla(double margin, std::size_t batches, double alpha, std::uint64_t seed) {
    if (!(alpha > 0 && alpha <= 1)) throw DomainError("risk limit must lie in (0, 1]");
    if (margin < 0 || std::isnan(margin)) throw DomainError("margin must be non-negative");
    if (batches == 0) throw DomainError("at least one batch is required");
    RlaPlan plan;
    plan.alpha = alpha;
    plan.margin = margin;
    plan.batches = batches;
    plan.seed = seed;
    if (margin == 0) {
        plan.full_recount = true;
        plan.sample_size = batches;
        plan.corrupted_batches = 0;
        return plan;
    }
    const double b = std::ceil(std::min(margin, 1.0) * static_cast<double>(batches) - 1e-9);
    plan.corrupted_batches = std::clamp<std::size_t>(static_cast<std::size_t>(b), 1, batches);
    plan.sample_size = batches;
    for (std::size_t n = 1; n <= batches; ++n) {
        if (miss_probability(batches, plan.corrupted_batches, n) <= alpha) {
            plan.sample_size = n;
            break;
        }
    }
    if (alpha == 1) plan.sample_size = 1;
    return plan;
}

double reported_margin(std::span<const std::int64_t> totals) {
    if (totals.size() < 2) throw DomainError("a margin needs at least two candidates");
    std::vector<std::int64_t> sorted(totals.begin(), totals.end());
    std::sort(sorted.rbegin(), sorted.rend());
    std::int64_t sum = 0;
    for (auto t : sorted) sum += t;
    if (sum <= 0) return 0;
    return static_cast<double>(sorted[0] - sorted[1]) / (2.0 * static_cast<double>(sum));
}

BatchTallies electronic_batch_tallies(std::span<const VoteRecord> records, std::size_t candidates) {
    BatchTallies out;
    for (const auto& rec : records) {
        auto& t = out[rec.precinct];
        t.resize(candidates, 0);
        t.at(rec.candidate) += 1;
    }
    return out;
}

BatchTallies seed_tallies(std::span<const VoteRecord> records, std::size_t candidates) {
    BatchTallies out;
    for (const auto& rec : records) {
        if (!rec.is_dummy) continue;
        auto& t = out[rec.precinct];
        t.resize(candidates, 0);
        t.at(rec.candidate) += 1;
    }
    return out;
}

BatchTallies subtract(const BatchTallies& a, const BatchTallies& b) {
    BatchTallies out = a;
    for (const auto& [p, t] : b) {
        auto& dst = out[p];
        dst.resize(std::max(dst.size(), t.size()), 0);
        for (std::size_t c = 0; c < t.size(); ++c) {
            if (dst[c] < t[c]) throw DomainError("negative tally in precinct " + std::to_string(p.value));
            dst[c] -= t[c];
        }
    }
    return out;
}

std::string_view to_string(Decision d) { return d == Decision::Certify ? "certify" : "escalate-full-recount"; }

namespace {

const engine::BallotBox* box_of(std::span<const engine::BallotBox> boxes, PrecinctId p) {
    for (const auto& b : boxes)
        if (b.precinct == p) return &b;
    return nullptr;
}

}  // namespace

AuditOutcome run_rla(std::span<const engine::BallotBox> boxes, const BatchTallies& electronic,
                     std::size_t candidates, const RlaPlan& plan) {
    std::vector<PrecinctId> ids;
    for (const auto& [p, t] : electronic) ids.push_back(p);
    for (const auto& b : boxes)
        if (!electronic.contains(b.precinct)) ids.push_back(b.precinct);
    std::sort(ids.begin(), ids.end());

    AuditOutcome out;
    const std::size_t n = plan.full_recount ? ids.size() : std::min(plan.sample_size, ids.size());
    random::Stream stream(random::derive_seed(plan.seed, random::Purpose::Audit, ids.size(), n));
    for (auto idx : stream.sample_without_replacement(ids.size(), n)) out.sampled.push_back(ids[idx]);
    std::sort(out.sampled.begin(), out.sampled.end());

    bool escalate = false;
    for (auto p : out.sampled) {
        BatchResult res{p, 0, false};
        const auto* box = box_of(boxes, p);
        if (!box) {
            res.missing = true;
            escalate = true;
        } else {
            const auto manual = box->counts(candidates);
            std::vector<std::uint64_t> elec(candidates, 0);
            if (auto it = electronic.find(p); it != electronic.end()) elec = it->second;
            elec.resize(candidates, 0);
            for (std::size_t c = 0; c < candidates; ++c)
                res.discrepancy += manual[c] > elec[c] ? manual[c] - elec[c] : elec[c] - manual[c];
        }
        if (res.discrepancy > plan.tolerance) escalate = true;
        out.max_discrepancy = std::max(out.max_discrepancy, res.discrepancy);
        out.total_discrepancy += res.discrepancy;
        out.batches.push_back(res);
    }
    if (out.total_discrepancy > plan.aggregate_threshold) escalate = true;
    out.decision = escalate ? Decision::EscalateFullRecount : Decision::Certify;
    return out;
}

std::string format_certificate(const RlaPlan& plan, const AuditOutcome& outcome) {
    std::ostringstream os;
    os << "alpha=" << plan.alpha << "\n"
       << "margin=" << plan.margin << "\n"
       << "batches=" << plan.batches << "\n"
       << "sample_size=" << plan.sample_size << "\n"
       << "seed=" << plan.seed << "\n"
       << "tolerance=" << plan.tolerance << "\n";
    os << "batch,discrepancy,missing\n";
    for (const auto& b : outcome.batches) os << b.batch.value << ',' << b.discrepancy << ',' << (b.missing ? 1 : 0) << "\n";
    os << "max_discrepancy=" << outcome.max_discrepancy << "\n"
       << "total_discrepancy=" << outcome.total_discrepancy << "\n"
       << "decision=" << to_string(outcome.decision) << "\n";
    return os.str();
}

BatchTallies full_recount(std::span<const engine::BallotBox> boxes, std::size_t candidates,
                          const RecountScope& scope) {
    BatchTallies out;
    for (const auto& b : boxes)
        if (scope.covers(b.precinct)) out[b.precinct] = b.counts(candidates);
    for (auto p : scope.precincts)
        if (!out.contains(p)) throw IncompleteEvidence("no ballot box for precinct " + std::to_string(p.value));
    return out;
}

BatchTallies apply_recount(const BatchTallies& electronic, std::span<const engine::BallotBox> boxes,
                           std::size_t candidates, const RecountScope& scope) {
    BatchTallies out = electronic;
    for (auto& [p, t] : full_recount(boxes, candidates, scope)) out[p] = t;
    return out;
}

std::vector<std::uint64_t> national_totals(const BatchTallies& tallies, std::size_t candidates) {
    std::vector<std::uint64_t> out(candidates, 0);
    for (const auto& [p, t] : tallies)
        for (std::size_t c = 0; c < candidates && c < t.size(); ++c) out[c] += t[c];
    return out;
}

TriggerDecision recount_trigger(std::span<const verification::DisputeOutcome> disputes,
                                const std::map<PrecinctId, verification::AntiStuffingResult>& anti_stuffing,
                                const verification::CollisionCensus& census, const stats::CollisionModel& model,
                                double z) {
    TriggerDecision d;
    for (const auto& dispute : disputes) {
        if (dispute.classification != verification::DisputeClass::SignatureValidMismatch) continue;
        const PrecinctId p{dispute.receipt.machine.value};
        if (d.scope.precincts.insert(p).second)
            d.reasons.push_back("signed receipt missing from ledger in precinct " + std::to_string(p.value));
    }
    for (const auto& [p, r] : anti_stuffing) {
        if (r.ok) continue;
        d.scope.precincts.insert(p);
        d.reasons.push_back("anti-stuffing delta " + std::to_string(r.delta) + " in precinct " +
                            std::to_string(p.value));
    }
    const double mean = stats::expected_collisions(model, 2);
    const double limit = mean + z * std::sqrt(mean);
    if (static_cast<double>(census.count(2)) > limit) {
        d.national_review = true;
        d.reasons.push_back("C_2 = " + std::to_string(census.count(2)) + " above " + std::to_string(limit));
    }
    return d;
}

}  // namespace sfv::audit
