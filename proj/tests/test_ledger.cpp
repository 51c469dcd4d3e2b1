#include "doctest.h"
#include "oracles.hpp"

#include <algorithm>
#include <map>

#include "sfv/engine.hpp"
#include "sfv/error.hpp"
#include "sfv/ledger.hpp"

using namespace sfv;
using namespace sfv::ledger;

namespace {

VoteRecord rec(std::uint64_t r, CandidateId c, std::uint32_t cluster = 0, bool dummy = false) {
    return VoteRecord{Pseudonym(r, 6), c, ClusterId{cluster}, PrecinctId{cluster}, dummy};
}

ElectionConfig one_cluster(std::uint32_t candidates) {
    GridSpec g;
    g.candidates = candidates;
    g.clusters = 1;
    g.precincts_per_cluster = 1;
    g.pseudonym_width = 6;
    return make_grid_config(g);
}

ParseErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const ParseError& e) {
        return e.kind();
    }
    FAIL("no parse error");
    return ParseErrorKind::MalformedLine;
}

}  // namespace

TEST_CASE("format A sorts by r with candidate tie-break") {
    std::vector<VoteRecord> records{rec(9, 1), rec(5, 0), rec(5, 1)};
    auto flat = build_format_a(records, 2, 6);
    REQUIRE(flat.rows.size() == 3);
    CHECK(flat.rows[0] == FlatRow{Pseudonym(5, 6), 0});
    CHECK(flat.rows[1] == FlatRow{Pseudonym(5, 6), 1});
    CHECK(flat.rows[2] == FlatRow{Pseudonym(9, 6), 1});
}

TEST_CASE("format A of dummies only") {
    std::vector<VoteRecord> records{rec(1, 0, 0, true), rec(2, 1, 0, true), rec(3, 2, 0, true)};
    auto flat = build_format_a(records, 3, 6);
    CHECK(flat.rows.size() == 3);
    CHECK(flat.dummies == std::vector<std::uint32_t>{1, 1, 1});
}

TEST_CASE("format B single cluster layout") {
    // A: 3 rows incl. 1 dummy, B: 2 rows incl. 1 dummy
    std::vector<VoteRecord> records{rec(50, 0), rec(10, 1, 0, true), rec(30, 0, 0, true), rec(20, 0), rec(40, 1)};
    auto h = build_format_b(records, one_cluster(2));
    REQUIRE(h.clusters.size() == 1);
    const auto& f = h.clusters[0];
    REQUIRE(f.rows.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(f.rows[i].serial == i + 1);
    CHECK(f.rows[0].candidate == 0);
    CHECK(f.rows[0].r.value() == 20);
    CHECK(f.rows[2].r.value() == 50);
    CHECK(f.rows[3].candidate == 1);
    CHECK(f.rows[3].r.value() == 10);
    CHECK(f.dummies == std::vector<std::uint32_t>{1, 1});
    CHECK(h.national.totals == std::vector<std::int64_t>{2, 1});
}

TEST_CASE("orphan cluster is a configuration error") {
    std::vector<VoteRecord> records{rec(1, 0, 7)};
    CHECK_THROWS_AS(build_format_b(records, one_cluster(2)), ConfigError);
}

TEST_CASE("equal clusters sum tenfold at the super-cluster") {
    GridSpec g;
    g.clusters = 10;
    g.precincts_per_cluster = 1;
    auto cfg = make_grid_config(g);
    std::vector<VoteRecord> records;
    for (std::uint32_t c = 0; c < 10; ++c) {
        records.push_back({Pseudonym(c * 10 + 1), 0, ClusterId{c}, PrecinctId{c}, false});
        records.push_back({Pseudonym(c * 10 + 2), 0, ClusterId{c}, PrecinctId{c}, false});
        records.push_back({Pseudonym(c * 10 + 3), 1, ClusterId{c}, PrecinctId{c}, false});
    }
    auto h = build_format_b(records, cfg);
    REQUIRE(h.supers.size() == 1);
    CHECK(h.supers[0].totals == std::vector<std::int64_t>{20, 10});
    CHECK(h.supers[0].children.size() == 10);
}

TEST_CASE("cross-format consistency on a random election") {
    GridSpec g;
    g.seed = 31;
    g.candidates = 4;
    g.clusters = 20;
    g.precincts_per_cluster = 2;
    g.voters_per_precinct = 30;
    g.clusters_per_super = 4;
    g.supers_per_ultra = 2;
    g.pseudonym_width = 5;  // dense enough for collisions
    auto cfg = make_grid_config(g);
    auto out = engine::simulate_election(cfg);
    auto flat = build_format_a(out.records, 4, 5);
    auto h = build_format_b(out.records, cfg);

    std::multiset<std::pair<std::uint64_t, CandidateId>> a, b;
    for (const auto& row : flat.rows) a.insert({row.r.value(), row.candidate});
    for (const auto& f : h.clusters)
        for (const auto& row : f.rows) b.insert({row.r.value(), row.candidate});
    CHECK(a == b);

    std::vector<std::int64_t> sum_clusters(4, 0), sum_supers(4, 0), sum_ultras(4, 0);
    for (const auto& f : h.clusters) {
        CHECK(f.rows.size() == (f.rows.empty() ? 0 : f.rows.back().serial));
        auto t = net_totals(f);
        for (int c = 0; c < 4; ++c) sum_clusters[c] += t[c];
    }
    for (const auto& s : h.supers)
        for (int c = 0; c < 4; ++c) sum_supers[c] += s.totals[c];
    for (const auto& u : h.ultras)
        for (int c = 0; c < 4; ++c) sum_ultras[c] += u.totals[c];
    CHECK(sum_clusters == h.national.totals);
    CHECK(sum_supers == h.national.totals);
    CHECK(sum_ultras == h.national.totals);
    std::vector<std::int64_t> truth;
    for (auto v : out.national_truth()) truth.push_back(static_cast<std::int64_t>(v));
    CHECK(h.national.totals == truth);
}

TEST_CASE("serialized layout") {
    std::vector<VoteRecord> records{rec(7, 1, 0, true), rec(3, 0, 0, true), rec(3, 1)};
    auto flat = build_format_a(records, 2, 6);
    CHECK(serialize(flat) ==
          "# format=sfv-flat-1\n# width=6\n# candidates=2\n# rows=3\n# dummies=1,1\n"
          "000003,0\n000003,1\n000007,1\n");
    auto h = build_format_b(records, one_cluster(2));
    CHECK(serialize(h.clusters[0]) ==
          "# format=sfv-cluster-1\n# cluster=0\n# super=0\n# width=6\n# candidates=2\n# rows=3\n# dummies=1,1\n"
          "1,000003,0\n2,000003,1\n3,000007,1\n");
    CHECK(serialize(h.national) ==
          "# format=sfv-aggregate-1\n# level=national\n# node=0\n# candidates=2\n# children=1\n0,0,1\ntotal,0,1\n");
    CHECK(serialize(h.supers[0]).find("# parent=0\n") != std::string::npos);
}

TEST_CASE("round trips") {
    GridSpec g;
    g.seed = 8;
    g.candidates = 3;
    g.clusters = 3;
    g.voters_per_precinct = 40;
    g.pseudonym_width = 4;
    auto cfg = make_grid_config(g);
    auto out = engine::simulate_election(cfg);
    auto flat = build_format_a(out.records, 3, 4);
    auto text = serialize(flat);
    CHECK(parse_flat(text) == flat);
    CHECK(serialize(parse_flat(text)) == text);
    auto h = build_format_b(out.records, cfg);
    for (const auto& f : h.clusters) CHECK(serialize(parse_cluster(serialize(f))) == serialize(f));
    for (const auto& s : h.supers) CHECK(parse_aggregate(serialize(s)) == s);
    CHECK(parse_aggregate(serialize(h.national)) == h.national);
}

TEST_CASE("empty ledgers are valid") {
    FlatLedger flat{6, 2, {}, {0, 0}};
    CHECK(parse_flat(serialize(flat)) == flat);
    ClusterFile cf{ClusterId{3}, SuperId{1}, 6, 2, {1, 1}, {}};
    CHECK(parse_cluster(serialize(cf)) == cf);
}

TEST_CASE("parse errors are named and located") {
    const std::string head = "# format=sfv-cluster-1\n# cluster=0\n# super=0\n# width=6\n# candidates=2\n# rows=3\n# dummies=1,1\n";
    try {
        parse_cluster(head + "1,000001,0\n2,000002,0\n4,000003,1\n");
        FAIL("gap accepted");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseErrorKind::SerialGap);
        CHECK(e.line() == 10);  // third data row
    }
    CHECK(kind_of([&] { parse_cluster(head + "1,000002,0\n2,000001,0\n3,000003,1\n"); }) == ParseErrorKind::UnsortedRows);
    CHECK(kind_of([&] { parse_cluster(head + "1,000002,1\n2,000001,0\n3,000003,1\n"); }) == ParseErrorKind::UnsortedRows);
    CHECK(kind_of([&] { parse_cluster(head + "1,000002,0\n2,000003,0\n"); }) == ParseErrorKind::RowCountMismatch);
    CHECK(kind_of([&] { parse_cluster(head + "1,00002,0\n2,000003,0\n3,000004,0\n"); }) == ParseErrorKind::WidthMismatch);
    CHECK(kind_of([&] { parse_cluster(head + "1,000002,0\n2,000003,5\n3,000004,0\n"); }) ==
          ParseErrorKind::CandidateOutOfRange);
    CHECK(kind_of([&] { parse_cluster(head + "1,000002\n"); }) == ParseErrorKind::MalformedLine);
    CHECK(kind_of([&] { parse_flat("# format=sfv-flat-1\n# width=6\n# candidates=2\n# rows=0\n# dummies=1\n"); }) ==
          ParseErrorKind::BadDummyMetadata);
    CHECK(kind_of([&] { parse_flat("# format=sfv-flat-1\n# width=6\n# candidates=2\n# rows=0\n"); }) ==
          ParseErrorKind::MissingHeader);
    CHECK(kind_of([&] {
              parse_flat("# format=sfv-flat-1\n# width=6\n# color=red\n# candidates=2\n# rows=0\n# dummies=0,0\n");
          }) == ParseErrorKind::UnknownHeaderKey);
    CHECK(kind_of([&] {
              parse_flat("# format=sfv-flat-1\n# width=6\n# width=6\n# candidates=2\n# rows=0\n# dummies=0,0\n");
          }) == ParseErrorKind::DuplicateHeaderKey);
    CHECK(kind_of([&] {
              parse_aggregate("# format=sfv-aggregate-1\n# level=national\n# node=0\n# candidates=1\n# children=1\n0,5\ntotal,6\n");
          }) == ParseErrorKind::TotalsMismatch);
}

TEST_CASE("lenient parsing keeps damaged content for the manual check") {
    const std::string text = "# format=sfv-cluster-1\n# cluster=0\n# super=0\n# width=6\n# candidates=2\n# rows=3\n"
                             "# dummies=1,1\n1,000001,0\n2,000002,0\n4,000003,1\n";
    auto f = parse_cluster(text, Strictness::Lenient);
    CHECK(f.rows.size() == 3);
    CHECK(f.rows[2].serial == 4);
}
