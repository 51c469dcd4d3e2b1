#include "doctest.h"
#include "oracles.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "sfv/engine.hpp"
#include "sfv/error.hpp"
#include "sfv/ledger.hpp"

using namespace sfv;
using namespace sfv::engine;

namespace {

ElectionConfig grid(std::uint32_t candidates, std::uint32_t clusters, std::uint32_t voters, std::uint64_t seed = 1,
                    int width = 12) {
    GridSpec g;
    g.seed = seed;
    g.candidates = candidates;
    g.clusters = clusters;
    g.precincts_per_cluster = 2;
    g.voters_per_precinct = voters;
    g.pseudonym_width = width;
    return make_grid_config(g);
}

}  // namespace

TEST_CASE("seeding casts dummies per candidate") {
    SUBCASE("3 candidates, 1 dummy") {
        Election e(grid(3, 1, 0));
        auto dummies = e.seed_decoy_pool(ClusterId{0});
        REQUIRE(dummies.size() == 3);
        for (CandidateId c = 0; c < 3; ++c) {
            CHECK(dummies[c].candidate == c);
            CHECK(dummies[c].is_dummy);
        }
    }
    SUBCASE("2 dummies, 4 clusters, 5 candidates") {
        GridSpec g;
        g.candidates = 5;
        g.clusters = 4;
        g.dummies_per_candidate = 2;
        g.voters_per_precinct = 0;
        auto out = simulate_election(make_grid_config(g));
        CHECK(out.records.size() == 40);
        auto flat = ledger::build_format_a(out.records, 5, 12);
        CHECK(flat.dummies == std::vector<std::uint32_t>(5, 8));
    }
    SUBCASE("per-precinct seeding seeds every station") {
        auto cfg = grid(2, 2, 0);
        cfg.seeding = SeedingMode::PerPrecinct;
        Election e(cfg);
        CHECK(e.seed_decoy_pool(ClusterId{1}).size() == 4);
        CHECK(e.pool(ClusterId{1}).local(PrecinctId{3}, 0).size() == 1);
    }
    SUBCASE("errors") {
        Election e(grid(2, 1, 1));
        e.seed_decoy_pool(ClusterId{0});
        CHECK_THROWS_AS(e.seed_decoy_pool(ClusterId{0}), ProtocolError);
        CHECK_THROWS_AS(e.seed_decoy_pool(ClusterId{5}), ConfigError);
    }
}

TEST_CASE("empty election tallies to zero after dummies") {
    auto out = simulate_election(grid(3, 2, 0));
    auto flat = ledger::build_format_a(out.records, 3, 12);
    std::vector<std::uint64_t> counts(3, 0);
    for (const auto& row : flat.rows) counts[row.candidate]++;
    for (CandidateId c = 0; c < 3; ++c) CHECK(counts[c] == flat.dummies[c]);
}

TEST_CASE("sessions and rolls") {
    Election e(grid(2, 1, 100));
    e.seed_all();
    auto s = e.open_session(PrecinctId{0}, VoterId{1}, 10);
    CHECK(s.status == SessionStatus::Open);
    CHECK(e.crossed_off(PrecinctId{0}) == 1);
    CHECK_THROWS_AS(e.open_session(PrecinctId{0}, VoterId{2}, 11), ProtocolError);  // machine busy
    e.cast_vote(s.id, 1);
    try {
        e.open_session(PrecinctId{0}, VoterId{1}, 12);
        FAIL("double vote accepted");
    } catch (const ProtocolError& err) {
        CHECK(err.kind() == ProtocolError::Kind::DoubleVote);
    }
    CHECK(e.crossed_off(PrecinctId{0}) == 1);
    for (std::uint32_t v = 2; v <= 100; ++v) {
        auto t = e.open_session(PrecinctId{0}, VoterId{v}, 20 + v);
        e.cast_vote(t.id, v % 2);
    }
    CHECK(e.crossed_off(PrecinctId{0}) == 100);
    CHECK_THROWS_AS(e.cast_vote(s.id, 0), ProtocolError);
    CHECK_THROWS_AS(e.cast_vote(SessionId{9999}, 0), ProtocolError);
}

TEST_CASE("close with an open session is a protocol violation") {
    Election e(grid(2, 1, 1));
    e.seed_all();
    e.open_session(PrecinctId{0}, VoterId{1}, 1);
    CHECK_THROWS_AS(e.close_polls(), ProtocolError);
}

TEST_CASE("first voter after seeding receives the dummies as decoys") {
    Election e(grid(3, 1, 1));
    auto dummies = e.seed_decoy_pool(ClusterId{0});
    auto s = e.open_session(PrecinctId{0}, VoterId{0}, 5);
    auto res = e.cast_vote(s.id, 1);
    REQUIRE(res.receipt.rows.size() == 3);
    CHECK(res.receipt.rows[0].r == dummies[0].r);
    CHECK(res.receipt.rows[1].r == res.displayed_r);
    CHECK(res.receipt.rows[2].r == dummies[2].r);
    CHECK(in_booth_check(res.receipt, res.displayed_r, 1, res.marked) == BoothCheck::Ok);
}

TEST_CASE("decoy selection") {
    DecoyPool pool(ClusterId{0}, 2);
    pool.add({Pseudonym(1, 6), 0, PrecinctId{0}, 0, 0, true});
    pool.add({Pseudonym(2, 6), 1, PrecinctId{0}, 0, 1, true});
    random::Stream s(3);

    SUBCASE("forced choice") {
        auto d = select_decoys(pool, Locality::ClusterWide, PrecinctId{0}, 2, 0, Pseudonym(9, 6), {}, s);
        CHECK(d.size() == 1);
        CHECK(d.at(1).r == Pseudonym(2, 6));
    }
    SUBCASE("true r is never reused as a decoy") {
        CHECK_THROWS_AS(select_decoys(pool, Locality::ClusterWide, PrecinctId{0}, 2, 0, Pseudonym(2, 6), {}, s),
                        DecoyStarvation);
    }
    SUBCASE("excluded time window hides a voter") {
        pool.add({Pseudonym(3, 6), 1, PrecinctId{0}, 100, 2, false});
        auto c = DecoyConstraint::exclude_window({90, 110});
        for (int i = 0; i < 200; ++i) {
            auto d = select_decoys(pool, Locality::ClusterWide, PrecinctId{0}, 2, 0, Pseudonym(9, 6), c, s);
            REQUIRE(d.at(1).r != Pseudonym(3, 6));
        }
        auto only = DecoyConstraint::exclude_window({0, 1});
        auto d = select_decoys(pool, Locality::ClusterWide, PrecinctId{0}, 2, 0, Pseudonym(9, 6), only, s);
        CHECK(d.at(1).r == Pseudonym(3, 6));
    }
    SUBCASE("uniform over a two-record pool") {
        pool.add({Pseudonym(4, 6), 1, PrecinctId{0}, 5, 3, false});
        int first = 0;
        for (int i = 0; i < 10000; ++i)
            first += select_decoys(pool, Locality::ClusterWide, PrecinctId{0}, 2, 0, Pseudonym(9, 6), {}, s)
                         .at(1)
                         .r == Pseudonym(2, 6);
        CHECK(std::abs(first - 5000) <= 4 * 50);
    }
    SUBCASE("parity constraint") {
        pool.add({Pseudonym(5, 6), 1, PrecinctId{0}, 5, 3, false});
        auto c = DecoyConstraint::require_parity({DecoyConstraint::Parity::Any, DecoyConstraint::Parity::Odd});
        for (int i = 0; i < 100; ++i)
            REQUIRE(select_decoys(pool, Locality::ClusterWide, PrecinctId{0}, 2, 0, Pseudonym(9, 6), c, s)
                        .at(1)
                        .r.value() == 5);
    }
    SUBCASE("local view") {
        CHECK(pool.local(PrecinctId{1}, 1).empty());
        CHECK_THROWS_AS(select_decoys(pool, Locality::LocalOnly, PrecinctId{1}, 2, 0, Pseudonym(9, 6), {}, s),
                        DecoyStarvation);
    }
}

TEST_CASE("in-booth check catches tampering and the voter re-votes") {
    auto cfg = grid(3, 1, 30, 4);
    SimulationHooks hooks;
    int tampered = 0;
    hooks.plan = [&](Election&, const Session& s, CandidateId, int attempt) {
        CastOptions o;
        if (attempt == 0 && s.voter.value % 10 == 0) {
            o.tamper = s.voter.value % 20 == 0 ? BoothTamper::ShiftTrueRow : BoothTamper::WrongBallotMark;
            ++tampered;
        }
        return o;
    };
    auto out = simulate_election(cfg, hooks);
    CHECK(tampered == 6);
    CHECK(out.nullified_sessions == 6);
    std::size_t challenges = 0;
    for (const auto& e : out.logs) challenges += e.kind == LogKind::Challenge;
    CHECK(challenges == 6);
    // Exactly one record per voter survives.
    CHECK(out.records.size() == 60 + 3);
    CHECK(out.receipts.size() == 60);
    std::uint64_t crossed = 0;
    for (const auto& r : out.rolls) crossed += r.crossed_off;
    CHECK(crossed == 60);
    std::uint64_t marks = 0;
    for (const auto& b : out.ballot_boxes) marks += b.marks.size();
    CHECK(marks == 63);
}

TEST_CASE("honest run invariants") {
    auto cfg = grid(3, 3, 60, 12, 8);
    auto out = simulate_election(cfg);

    std::size_t dummies = 0;
    for (const auto& r : out.records) dummies += r.is_dummy;
    CHECK(out.records.size() == cfg.num_voters() + dummies);

    std::map<ClusterId, std::multiset<std::pair<std::uint64_t, CandidateId>>> by_cluster;
    for (const auto& r : out.records) by_cluster[r.cluster].insert({r.r.value(), r.candidate});

    for (const auto& ir : out.receipts) {
        REQUIRE_NOTHROW(ir.receipt.validate(3));
        REQUIRE(ir.record);
        const auto& rec = out.records[*ir.record];
        CHECK(rec.r == ir.receipt.rows[ir.choice].r);
        CHECK(rec.candidate == ir.choice);
        for (const auto& row : ir.receipt.rows)
            CHECK(by_cluster[ir.cluster].contains({row.r.value(), row.candidate}));
    }

    // Ballot boxes carry the voters' choices plus local dummies.
    for (const auto& box : out.ballot_boxes) {
        auto counts = box.counts(3);
        std::vector<std::uint64_t> expected = out.ground_truth.at(box.precinct);
        for (const auto& r : out.records)
            if (r.is_dummy && r.precinct == box.precinct) expected[r.candidate] += 1;
        CHECK(counts == expected);
    }
}

TEST_CASE("eager and deferred signatures agree") {
    auto cfg = grid(2, 1, 20, 3);
    auto eager = simulate_election(cfg);
    cfg.signing = SigningMode::Deferred;
    auto deferred = simulate_election(cfg);
    REQUIRE(eager.receipts.size() == deferred.receipts.size());
    CHECK(deferred.receipts[0].receipt.signature.empty());
    for (std::size_t i = 0; i < eager.receipts.size(); ++i)
        CHECK(eager.receipts[i].receipt == deferred.signed_receipt(i));
    CHECK(eager.records == deferred.records);
}

TEST_CASE("simulation is deterministic") {
    auto cfg = grid(3, 2, 40, 77);
    auto a = simulate_election(cfg);
    auto b = simulate_election(cfg);
    CHECK(a.records == b.records);
    CHECK(format_log(a.logs) == format_log(b.logs));
    cfg.seed = 78;
    CHECK(simulate_election(cfg).records != a.records);
}

TEST_CASE("partition window switches decoy fetches to local") {
    auto cfg = grid(2, 2, 50, 5);
    cfg.seeding = SeedingMode::PerPrecinct;
    cfg.partitions[ClusterId{0}] = TimeWindow{0, cfg.day_seconds};
    auto out = simulate_election(cfg);
    std::size_t local = 0, wide_in_zero = 0;
    for (const auto& e : out.logs) {
        if (e.kind != LogKind::DecoyFetch) continue;
        const bool in_zero = e.precinct.value < 2;
        if (in_zero && e.locality == Locality::LocalOnly) {
            ++local;
            CHECK(e.source == e.precinct);
        }
        if (in_zero && e.locality == Locality::ClusterWide) ++wide_in_zero;
        if (!in_zero) CHECK(e.locality == Locality::ClusterWide);
    }
    CHECK(local == 100);
    CHECK(wide_in_zero == 0);
}

TEST_CASE("local starvation falls back to the cluster pool") {
    auto cfg = grid(2, 1, 10, 5);
    cfg.partitions[ClusterId{0}] = TimeWindow{0, cfg.day_seconds};
    auto out = simulate_election(cfg);  // per-cluster seeding: precinct 1 has no local dummies
    std::size_t fallbacks = 0;
    for (const auto& e : out.logs) fallbacks += e.kind == LogKind::Fallback;
    CHECK(fallbacks > 0);
    CHECK(out.receipts.size() == 20);
}

TEST_CASE("schedule covers every voter once in time order") {
    auto cfg = grid(2, 2, 25, 9);
    cfg.precincts[0].exact_counts = std::vector<std::uint32_t>{20, 5};
    auto schedule = make_schedule(cfg);
    CHECK(schedule.size() == 100);
    std::set<VoterId> voters;
    for (const auto& v : schedule) voters.insert(v.voter);
    CHECK(voters.size() == 100);
    CHECK(std::is_sorted(schedule.begin(), schedule.end(),
                         [](const ScheduledVoter& a, const ScheduledVoter& b) { return a.time < b.time; }));
    std::size_t zero = 0;
    for (const auto& v : schedule)
        if (v.precinct == PrecinctId{0}) zero += v.choice == 0;
    CHECK(zero == 20);
}
