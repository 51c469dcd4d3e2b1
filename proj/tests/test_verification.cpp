#include "doctest.h"
#include "oracles.hpp"

#include <map>

#include "sfv/engine.hpp"
#include "sfv/error.hpp"
#include "sfv/ledger.hpp"
#include "sfv/verification.hpp"

using namespace sfv;
using namespace sfv::verification;

namespace {

ledger::FlatLedger flat_of(std::vector<std::pair<std::uint64_t, CandidateId>> rows, std::size_t candidates,
                           std::vector<std::uint32_t> dummies, int width = 6) {
    ledger::FlatLedger f;
    f.width = width;
    f.candidates = candidates;
    f.dummies = std::move(dummies);
    for (auto [r, c] : rows) f.rows.push_back({Pseudonym(r, width), c});
    std::sort(f.rows.begin(), f.rows.end());
    return f;
}

ElectionConfig tree(std::uint64_t seed, std::uint32_t clusters = 8) {
    GridSpec g;
    g.seed = seed;
    g.candidates = 3;
    g.clusters = clusters;
    g.precincts_per_cluster = 2;
    g.voters_per_precinct = 25;
    g.clusters_per_super = 2;
    g.supers_per_ultra = 2;
    g.signing = SigningMode::Deferred;
    return make_grid_config(g);
}

HierarchyEvidence evidence_of(const ledger::HierarchicalLedger& h) {
    HierarchyEvidence ev;
    for (const auto& c : h.clusters) ev.clusters[c.cluster] = verify_cluster_manual(c);
    ev.aggregates = h.supers;
    ev.aggregates.insert(ev.aggregates.end(), h.ultras.begin(), h.ultras.end());
    ev.aggregates.push_back(h.national);
    return ev;
}

}  // namespace

TEST_CASE("locate_vote") {
    auto f = flat_of({{5, 0}, {5, 1}, {9, 1}}, 2, {0, 0});
    CHECK(locate_vote(f, Pseudonym(9, 6)).size() == 1);
    CHECK(locate_vote(f, Pseudonym(5, 6)).size() == 2);
    CHECK(locate_vote(f, Pseudonym(6, 6)).empty());
    CHECK(locate_vote(f, Pseudonym(0, 6)).empty());
    CHECK(locate_vote(f, Pseudonym(999999, 6)).empty());
}

TEST_CASE("digital tally") {
    CHECK(digital_tally(flat_of({{1, 0}, {2, 1}, {3, 2}}, 3, {1, 1, 1})) == std::vector<std::int64_t>{0, 0, 0});
    CHECK(digital_tally(flat_of({{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}, {6, 1}}, 2, {1, 1}))[0] == 4);
    CHECK_THROWS_AS(digital_tally(flat_of({{1, 0}}, 2, {1, 1})), LedgerInconsistency);
}

TEST_CASE("collision census") {
    auto f = flat_of({{5, 0}, {5, 1}, {9, 1}}, 2, {0, 0});
    auto c = count_collisions(f);
    CHECK(c.count(2) == 1);
    CHECK(c.count(1) == 1);
    CHECK(c.visible_collisions() == 1);

    auto same = count_collisions(flat_of({{5, 0}, {5, 0}, {5, 0}, {7, 1}}, 2, {0, 0}));
    CHECK(same.count(3) == 1);
    CHECK(same.visible_collisions() == 0);
}

TEST_CASE("census agrees with a brute-force count and sums to the row total") {
    random::Stream s(17);
    std::vector<std::pair<std::uint64_t, CandidateId>> rows;
    std::vector<std::uint64_t> keys;
    for (int i = 0; i < 5000; ++i) {
        auto r = s.below(4000);
        rows.push_back({r, static_cast<CandidateId>(s.below(3))});
        keys.push_back(r);
    }
    auto census = count_collisions(flat_of(rows, 3, {0, 0, 0}, 4));
    CHECK(census.by_multiplicity == oracle::multiplicities(keys));
    std::uint64_t total = 0;
    for (auto [k, n] : census.by_multiplicity) total += k * n;
    CHECK(total == 5000);
}

TEST_CASE("semi-collisions group by machine prefix") {
    // width 4, machine width 2: prefixes 12, 12, 34
    auto f = flat_of({{1201, 0}, {1255, 1}, {3407, 0}}, 2, {0, 0}, 4);
    auto rep = detect_semi_collisions(f, 2);
    CHECK(rep.pairs == 1);
    CHECK(rep.triplets == 0);
    CHECK(rep.flagged() == 0);

    auto trip = detect_semi_collisions(flat_of({{1201, 0}, {1255, 0}, {1299, 0}, {3407, 1}}, 2, {0, 0}, 4), 2);
    CHECK(trip.triplets == 1);
    CHECK(trip.flagged() == 1);

    auto mixed = detect_semi_collisions(flat_of({{1201, 0}, {1255, 1}, {1299, 0}}, 2, {0, 0}, 4), 2);
    CHECK(mixed.triplets == 1);
    CHECK(mixed.flagged() == 0);

    CHECK_THROWS_AS(detect_semi_collisions(f, 4), ConfigError);
    CHECK_THROWS_AS(detect_semi_collisions(f, 0), ConfigError);
}

TEST_CASE("manual cluster check") {
    ledger::ClusterFile f;
    f.cluster = ClusterId{0};
    f.candidates = 2;
    f.width = 6;
    f.dummies = {1, 1};
    for (std::uint64_t i = 1; i <= 6; ++i) f.rows.push_back({i, Pseudonym(i, 6), 0});
    for (std::uint64_t i = 7; i <= 9; ++i) f.rows.push_back({i, Pseudonym(i, 6), 1});

    auto rep = verify_cluster_manual(f);
    CHECK(rep.pass);
    CHECK(rep.totals == std::vector<std::int64_t>{5, 2});

    SUBCASE("gap") {
        ledger::ClusterFile g = f;
        g.rows.resize(3);
        g.rows[2].serial = 4;
        auto r = verify_cluster_manual(g);
        CHECK_FALSE(r.pass);
        CHECK(r.serial_gap_found);
        CHECK(r.gap_position == 3);
    }
    SUBCASE("empty block goes negative") {
        ledger::ClusterFile g = f;
        g.rows.resize(6);
        auto r = verify_cluster_manual(g);
        CHECK(r.totals[1] == -1);
        CHECK_FALSE(r.pass);
    }
    SUBCASE("split block") {
        ledger::ClusterFile g = f;
        std::swap(g.rows[2].candidate, g.rows[7].candidate);
        CHECK(verify_cluster_manual(g).grouping_error);
        CHECK_FALSE(verify_cluster_manual(g).pass);
    }
    SUBCASE("formula matches a direct count") {
        std::vector<std::int64_t> direct(2, 0);
        for (const auto& row : f.rows) direct[row.candidate]++;
        for (int c = 0; c < 2; ++c) direct[c] -= f.dummies[c];
        CHECK(rep.totals == direct);
    }
}

TEST_CASE("honest run: every check passes") {
    auto cfg = tree(3);
    auto out = engine::simulate_election(cfg);
    auto flat = ledger::build_format_a(out.records, 3, cfg.pseudonym_width);
    auto h = ledger::build_format_b(out.records, cfg);
    auto ev = evidence_of(h);

    std::vector<std::int64_t> sum(3, 0);
    for (const auto& [id, rep] : ev.clusters) {
        CHECK(rep.pass);
        for (int c = 0; c < 3; ++c) sum[c] += rep.totals[c];
    }
    CHECK(sum == digital_tally(flat));
    CHECK(verify_hierarchy(ev).pass());
    CHECK(anti_stuffing_check(out.rolls, flat).ok);
    for (const auto& [p, r] : anti_stuffing_by_precinct(out.rolls, out.records)) CHECK(r.ok);

    for (std::size_t i = 0; i < out.receipts.size(); ++i) {
        const auto& ir = out.receipts[i];
        auto rows = locate_vote(flat, ir.receipt.rows[ir.choice].r);
        CHECK(std::find(rows.begin(), rows.end(), ledger::FlatRow{ir.receipt.rows[ir.choice].r, ir.choice}) !=
              rows.end());
        if (i % 20 == 0) CHECK(file_dispute(out.signed_receipt(i), flat, ir.choice, out.keys).classification ==
                               DisputeClass::RecordFound);
    }
}

TEST_CASE("hierarchy fault propagates up the parent chain") {
    auto cfg = tree(4);
    auto out = engine::simulate_election(cfg);
    auto h = ledger::build_format_b(out.records, cfg);
    auto ev = evidence_of(h);
    // Cluster 5 reports one extra vote: its block gains a row at the end.
    auto& c5 = ev.clusters.at(ClusterId{5});
    c5.totals[0] += 1;
    auto rep = verify_hierarchy(ev);
    CHECK_FALSE(rep.pass());
    const auto super = cfg.cluster_parent.at(ClusterId{5});
    const auto ultra = cfg.super_parent.at(super);
    CHECK_FALSE(rep.find(ledger::Level::Super, super.value)->pass);
    CHECK_FALSE(rep.find(ledger::Level::Ultra, ultra.value)->pass);
    CHECK_FALSE(rep.find(ledger::Level::National, 0)->pass);
    for (const auto& n : rep.nodes) {
        if (n.level == ledger::Level::Super && n.node != super.value) CHECK(n.pass);
        if (n.level == ledger::Level::Ultra && n.node != ultra.value) CHECK(n.pass);
    }
}

TEST_CASE("drill-down reads depth times fan-out totals") {
    auto cfg = tree(5);
    auto out = engine::simulate_election(cfg);
    auto h = ledger::build_format_b(out.records, cfg);
    auto ev = evidence_of(h);
    auto rep = verify_drill_down(ev, cfg, ClusterId{6});
    CHECK(rep.pass());
    CHECK(rep.nodes.size() == 3);
    CHECK(rep.totals_read == 3 * 2);

    auto bad = ev;
    for (auto& a : bad.aggregates)
        if (a.level == ledger::Level::Super && a.node == 3) a.totals[1] += 1;
    CHECK_FALSE(verify_drill_down(bad, cfg, ClusterId{6}).pass());
    CHECK(verify_drill_down(bad, cfg, ClusterId{0}).pass());
}

TEST_CASE("missing evidence") {
    auto cfg = tree(6);
    auto out = engine::simulate_election(cfg);
    auto h = ledger::build_format_b(out.records, cfg);
    auto ev = evidence_of(h);
    auto no_cluster = ev;
    no_cluster.clusters.erase(ClusterId{2});
    CHECK_THROWS_AS(verify_hierarchy(no_cluster), IncompleteEvidence);
    auto no_national = ev;
    no_national.aggregates.pop_back();
    CHECK_THROWS_AS(verify_hierarchy(no_national), IncompleteEvidence);
}

TEST_CASE("anti-stuffing deltas") {
    auto cfg = tree(7, 2);
    auto out = engine::simulate_election(cfg);
    auto records = out.records;
    for (int i = 0; i < 10; ++i)
        records.push_back({Pseudonym(100 + i), 0, ClusterId{0}, PrecinctId{0}, false});
    CHECK(anti_stuffing_check(out.rolls, ledger::build_format_a(records, 3, 12)).delta == 10);
    records = out.records;
    int dropped = 0;
    records.erase(std::remove_if(records.begin(), records.end(),
                                 [&](const VoteRecord& r) { return !r.is_dummy && dropped++ < 3; }),
                  records.end());
    auto res = anti_stuffing_check(out.rolls, ledger::build_format_a(records, 3, 12));
    CHECK_FALSE(res.ok);
    CHECK(res.delta == -3);
}

TEST_CASE("dispute classification") {
    auto cfg = tree(8, 2);
    auto out = engine::simulate_election(cfg);
    auto receipt = out.signed_receipt(0);
    const auto& ir = out.receipts[0];

    auto records = out.records;
    records[*ir.record].candidate = (ir.choice + 1) % 3;
    auto flipped = ledger::build_format_a(records, 3, 12);
    CHECK(file_dispute(receipt, flipped, ir.choice, out.keys).classification == DisputeClass::SignatureValidMismatch);

    auto forged = receipt;
    for (auto& b : forged.signature) b ^= 0x5a;
    CHECK(file_dispute(forged, flipped, ir.choice, out.keys).classification == DisputeClass::SignatureInvalid);

    auto stranger = receipt;
    stranger.machine = MachineId{999};
    CHECK(file_dispute(stranger, flipped, ir.choice, out.keys).classification == DisputeClass::SignatureInvalid);

    auto honest = ledger::build_format_a(out.records, 3, 12);
    CHECK(file_dispute(receipt, honest, ir.choice, out.keys).classification == DisputeClass::RecordFound);
    CHECK_THROWS_AS(verification::verify_receipt_signature(stranger, out.keys), UnknownKey);
}
