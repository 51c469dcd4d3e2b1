#include "doctest.h"
#include "oracles.hpp"

#include <fstream>
#include <regex>

#include "sfv/audit.hpp"
#include "sfv/engine.hpp"
#include "sfv/error.hpp"

using namespace sfv;
using namespace sfv::audit;

namespace {

engine::RawElectionOutput small_election(std::uint64_t seed, std::uint32_t clusters = 4) {
    GridSpec g;
    g.seed = seed;
    g.candidates = 2;
    g.clusters = clusters;
    g.precincts_per_cluster = 5;
    g.voters_per_precinct = 20;
    g.signing = SigningMode::Deferred;
    return engine::simulate_election(make_grid_config(g));
}

/// Flips up to `per_batch` non-dummy votes from candidate 0 to 1 in each listed precinct.
std::vector<VoteRecord> flip(std::vector<VoteRecord> records, const std::set<PrecinctId>& where, int per_batch) {
    std::map<PrecinctId, int> done;
    for (auto& r : records)
        if (!r.is_dummy && r.candidate == 0 && where.contains(r.precinct) && done[r.precinct] < per_batch) {
            r.candidate = 1;
            ++done[r.precinct];
        }
    return records;
}

}  // namespace

TEST_CASE("miss probability matches the hypergeometric oracle") {
    for (auto [B, b, n] : {std::tuple{100u, 1u, 95u}, {100u, 20u, 13u}, {400u, 4u, 211u}, {1000u, 50u, 58u}, {10u, 3u, 7u}})
        CHECK(miss_probability(B, b, n) == doctest::Approx(static_cast<double>(oracle::miss(B, b, n))).epsilon(1e-10));
    CHECK(miss_probability(10, 0, 5) == 1);
    CHECK(miss_probability(10, 6, 5) == 0);
    CHECK_THROWS_AS(miss_probability(10, 11, 1), DomainError);
}

TEST_CASE("plan sizes") {
    auto p = plan_rla(0.2, 100, 0.05, 9);
    CHECK(p.corrupted_batches == 20);
    CHECK(miss_probability(100, 20, p.sample_size) <= 0.05);
    CHECK(miss_probability(100, 20, p.sample_size - 1) > 0.05);
    CHECK(p.seed == 9);

    CHECK(plan_rla(0.3, 100, 1.0).sample_size == 1);
    CHECK(plan_rla(1.0, 100, 0.05).sample_size == 1);
    CHECK(plan_rla(1.7, 100, 0.05).sample_size == 1);
    auto tie = plan_rla(0, 100, 0.05);
    CHECK(tie.full_recount);
    CHECK(tie.sample_size == 100);

    CHECK_THROWS_AS(plan_rla(0.1, 100, 0), DomainError);
    CHECK_THROWS_AS(plan_rla(0.1, 100, 1.5), DomainError);
    CHECK_THROWS_AS(plan_rla(-0.1, 100, 0.05), DomainError);
    CHECK_THROWS_AS(plan_rla(0.1, 0, 0.05), DomainError);

    // Smaller margins never need fewer batches.
    std::size_t prev = 0;
    for (double m : {1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01}) {
        auto n = plan_rla(m, 400, 0.05).sample_size;
        CHECK(n >= prev);
        prev = n;
    }
}

TEST_CASE("reported margin") {
    std::vector<std::int64_t> t{5100, 4900};
    CHECK(reported_margin(t) == doctest::Approx(0.01));
    std::vector<std::int64_t> three{50, 30, 20};
    CHECK(reported_margin(three) == doctest::Approx(0.1));
    std::vector<std::int64_t> one{3};
    CHECK_THROWS_AS(reported_margin(one), DomainError);
}

TEST_CASE("shipped calibration table agrees with the planner") {
    std::ifstream in(std::string(SFV_SOURCE_DIR) + "/docs/rla_calibration.md");
    REQUIRE(in);
    const std::regex row(R"(^\| ([0-9.]+) \| ([0-9]+) \| ([0-9.]+) \| ([0-9]+) \| ([0-9]+) \| ([0-9.]+) \| ([0-9.]+) \|$)");
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_match(line, m, row)) continue;
        ++rows;
        const double alpha = std::stod(m[1]);
        const auto batches = std::stoul(m[2]);
        auto plan = plan_rla(std::stod(m[3]), batches, alpha);
        CHECK(plan.corrupted_batches == std::stoul(m[4]));
        CHECK(plan.sample_size == std::stoul(m[5]));
        CHECK(std::stod(m[6]) <= alpha);
        // 20000 trials: binomial sd of the empirical rate is at most ~0.0016
        CHECK(std::abs(std::stod(m[7]) - std::stod(m[6])) < 0.01);
    }
    CHECK(rows == 48);
}

TEST_CASE("honest run certifies; corrupted batches escalate") {
    auto out = small_election(21);
    auto elec = electronic_batch_tallies(out.records, 2);
    CHECK(elec.size() == 20);
    for (const auto& [p, t] : subtract(elec, seed_tallies(out.records, 2))) CHECK(t == out.ground_truth.at(p));
    for (const auto& box : out.ballot_boxes) CHECK(box.counts(2) == elec.at(box.precinct));

    auto plan = plan_rla(0.1, elec.size(), 0.05, 3);
    auto ok = run_rla(out.ballot_boxes, elec, 2, plan);
    CHECK(ok.decision == Decision::Certify);
    CHECK(ok.sampled.size() == plan.sample_size);
    CHECK(ok.total_discrepancy == 0);
    CHECK(format_certificate(plan, ok).find("decision=certify") != std::string::npos);

    auto bad = electronic_batch_tallies(flip(out.records, {PrecinctId{0}, PrecinctId{7}}, 1), 2);
    auto full = plan;
    full.sample_size = 20;
    auto caught = run_rla(out.ballot_boxes, bad, 2, full);
    CHECK(caught.decision == Decision::EscalateFullRecount);
    CHECK(caught.total_discrepancy == 4);
    CHECK(caught.max_discrepancy == 2);

    auto tolerant = full;
    tolerant.tolerance = 2;
    tolerant.aggregate_threshold = 4;
    CHECK(run_rla(out.ballot_boxes, bad, 2, tolerant).decision == Decision::Certify);
}

TEST_CASE("sampling is seeded and without replacement") {
    auto out = small_election(22);
    auto elec = electronic_batch_tallies(out.records, 2);
    auto plan = plan_rla(0.2, elec.size(), 0.05, 77);
    auto a = run_rla(out.ballot_boxes, elec, 2, plan);
    auto b = run_rla(out.ballot_boxes, elec, 2, plan);
    CHECK(a.sampled == b.sampled);
    std::set<PrecinctId> uniq(a.sampled.begin(), a.sampled.end());
    CHECK(uniq.size() == a.sampled.size());
    plan.seed = 78;
    CHECK(run_rla(out.ballot_boxes, elec, 2, plan).sampled != a.sampled);
}

TEST_CASE("missing ballot box escalates") {
    auto out = small_election(23);
    auto elec = electronic_batch_tallies(out.records, 2);
    auto boxes = out.ballot_boxes;
    boxes.erase(boxes.begin() + 3);
    auto plan = plan_rla(0, elec.size(), 0.05);
    auto res = run_rla(boxes, elec, 2, plan);
    CHECK(res.decision == Decision::EscalateFullRecount);
    CHECK(std::any_of(res.batches.begin(), res.batches.end(), [](const BatchResult& b) { return b.missing; }));
    CHECK_THROWS_AS(full_recount(boxes, 2, RecountScope{false, {out.ballot_boxes[3].precinct}}), IncompleteEvidence);
}

TEST_CASE("recount containment") {
    auto out = small_election(24);
    auto bad = electronic_batch_tallies(flip(out.records, {PrecinctId{4}, PrecinctId{9}}, 3), 2);
    RecountScope scope{false, {PrecinctId{4}}};
    auto fixed = apply_recount(bad, out.ballot_boxes, 2, scope);
    CHECK(subtract(fixed, seed_tallies(out.records, 2)).at(PrecinctId{4}) == out.ground_truth.at(PrecinctId{4}));
    for (const auto& [p, t] : bad)
        if (!scope.covers(p)) CHECK(fixed.at(p) == t);
    CHECK(subtract(fixed, seed_tallies(out.records, 2)).at(PrecinctId{9}) != out.ground_truth.at(PrecinctId{9}));

    const auto seeds = seed_tallies(out.records, 2);
    auto national = subtract(apply_recount(bad, out.ballot_boxes, 2, RecountScope{true, {}}), seeds);
    CHECK(national_totals(national, 2) == out.national_truth());
    for (const auto& [p, t] : subtract(full_recount(out.ballot_boxes, 2, RecountScope{true, {}}), seeds))
        CHECK(t == out.ground_truth.at(p));
    CHECK_THROWS_AS(subtract(seeds, bad), DomainError);
}

TEST_CASE("recount triggers") {
    const stats::CollisionModel model{1e4, 1e6};
    verification::CollisionCensus quiet;
    quiet.by_multiplicity[2] = 50;
    auto none = recount_trigger({}, {}, quiet, model);
    CHECK(none.scope.empty());
    CHECK_FALSE(none.national_review);

    verification::DisputeOutcome d;
    d.classification = verification::DisputeClass::SignatureValidMismatch;
    d.receipt.machine = MachineId{7};
    verification::DisputeOutcome found = d;
    found.classification = verification::DisputeClass::RecordFound;
    std::vector<verification::DisputeOutcome> disputes{d, found, d};
    auto one = recount_trigger(disputes, {}, quiet, model);
    CHECK(one.scope.precincts == std::set<PrecinctId>{PrecinctId{7}});
    CHECK_FALSE(one.scope.national);

    std::map<PrecinctId, verification::AntiStuffingResult> as;
    as[PrecinctId{2}].ok = false;
    as[PrecinctId{2}].delta = 5;
    as[PrecinctId{3}].ok = true;
    CHECK(recount_trigger({}, as, quiet, model).scope.precincts == std::set<PrecinctId>{PrecinctId{2}});

    const double mean = stats::expected_collisions(model, 2);
    verification::CollisionCensus loud;
    loud.by_multiplicity[2] = static_cast<std::uint64_t>(std::ceil(mean + 5 * std::sqrt(mean)));
    CHECK(recount_trigger({}, {}, loud, model).national_review);
}
