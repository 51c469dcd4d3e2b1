#include "sfv/verification.hpp"

#include <algorithm>
#include <set>

namespace sfv::verification {

std::vector<ledger::FlatRow> locate_vote(const ledger::FlatLedger& flat, const Pseudonym& r) {
    auto lo = std::partition_point(flat.rows.begin(), flat.rows.end(),
                                   [&](const ledger::FlatRow& row) { return row.r.value() < r.value(); });
    std::vector<ledger::FlatRow> out;
    for (auto it = lo; it != flat.rows.end() && it->r.value() == r.value(); ++it) out.push_back(*it);
    return out;
}

std::vector<std::int64_t> digital_tally(const ledger::FlatLedger& flat) {
    std::vector<std::int64_t> totals(flat.candidates, 0);
    for (const auto& row : flat.rows) totals.at(row.candidate) += 1;
    for (std::size_t c = 0; c < totals.size(); ++c) {
        totals[c] -= static_cast<std::int64_t>(c < flat.dummies.size() ? flat.dummies[c] : 0);
        if (totals[c] < 0)
            throw LedgerInconsistency("candidate " + std::to_string(c) + " has fewer rows than designated dummies");
    }
    return totals;
}

std::uint64_t CollisionCensus::visible_collisions() const {
    std::uint64_t n = 0;
    for (const auto& g : colliding) {
        std::set<CandidateId> distinct(g.candidates.begin(), g.candidates.end());
        if (distinct.size() > 1) ++n;
    }
    return n;
}

CollisionCensus count_collisions(const ledger::FlatLedger& flat) {
    CollisionCensus census;
    const auto& rows = flat.rows;
    for (std::size_t i = 0; i < rows.size();) {
        std::size_t j = i + 1;
        while (j < rows.size() && rows[j].r.value() == rows[i].r.value()) ++j;
        const std::size_t k = j - i;
        census.by_multiplicity[k] += 1;
        if (k >= 2) {
            CollisionCensus::Group g{rows[i].r, {}};
            for (std::size_t t = i; t < j; ++t) g.candidates.push_back(rows[t].candidate);
            census.colliding.push_back(std::move(g));
        }
        i = j;
    }
    return census;
}

std::uint64_t SemiCollisionReport::flagged() const {
    return static_cast<std::uint64_t>(
        std::count_if(offending.begin(), offending.end(), [](const Group& g) { return g.same_candidate_triplet; }));
}

SemiCollisionReport detect_semi_collisions(const ledger::FlatLedger& flat, int machine_width) {
    if (machine_width < 1 || machine_width >= flat.width)
        throw ConfigError("machine width must be in [1, pseudonym width)");
    const std::uint64_t divisor = pow10(flat.width - machine_width);
    SemiCollisionReport report;
    const auto& rows = flat.rows;
    // Rows sorted by r are also sorted by prefix.
    for (std::size_t i = 0; i < rows.size();) {
        const std::uint64_t prefix = rows[i].r.value() / divisor;
        std::size_t j = i + 1;
        while (j < rows.size() && rows[j].r.value() / divisor == prefix) ++j;
        const std::size_t k = j - i;
        if (k >= 2) {
            SemiCollisionReport::Group g;
            g.prefix = prefix;
            g.rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(i), rows.begin() + static_cast<std::ptrdiff_t>(j));
            std::map<CandidateId, std::size_t> per;
            for (const auto& row : g.rows) per[row.candidate] += 1;
            for (const auto& [c, n] : per)
                if (n >= 3) g.same_candidate_triplet = true;
            if (k == 2)
                ++report.pairs;
            else
                ++report.triplets;
            report.offending.push_back(std::move(g));
        }
        i = j;
    }
    return report;
}

ClusterCheckReport verify_cluster_manual(const ledger::ClusterFile& file) {
    ClusterCheckReport report;
    report.cluster = file.cluster;
    report.dummies_used = file.dummies;
    report.dummies_used.resize(file.candidates, 0);

    for (std::size_t i = 0; i < file.rows.size(); ++i) {
        if (file.rows[i].serial != i + 1) {
            report.serial_gap_found = true;
            report.gap_position = i + 1;
            break;
        }
    }

    // Blocks: first and last serial of each candidate's contiguous run.
    struct Block {
        std::uint64_t first = 0, last = 0;
        bool seen = false;
    };
    std::vector<Block> blocks(file.candidates);
    std::optional<CandidateId> current;
    for (const auto& row : file.rows) {
        if (row.candidate >= file.candidates) {
            report.grouping_error = true;
            continue;
        }
        auto& b = blocks[row.candidate];
        if (current != row.candidate) {
            if (b.seen || (current && row.candidate < *current)) report.grouping_error = true;
            if (!b.seen) b.first = row.serial;
            b.seen = true;
            current = row.candidate;
        }
        b.last = row.serial;
    }
    report.totals.assign(file.candidates, 0);
    bool negative = false;
    for (std::size_t c = 0; c < file.candidates; ++c) {
        const auto& b = blocks[c];
        const std::int64_t rows = b.seen ? static_cast<std::int64_t>(b.last) - static_cast<std::int64_t>(b.first) + 1 : 0;
        report.totals[c] = rows - static_cast<std::int64_t>(report.dummies_used[c]);
        if (report.totals[c] < 0) negative = true;
    }
    report.pass = !report.serial_gap_found && !report.grouping_error && !negative;
    return report;
}

bool HierarchyReport::pass() const {
    return std::all_of(nodes.begin(), nodes.end(), [](const NodeResult& n) { return n.pass; });
}

const NodeResult* HierarchyReport::find(ledger::Level level, std::uint32_t node) const {
    for (const auto& n : nodes)
        if (n.level == level && n.node == node) return &n;
    return nullptr;
}

namespace {

using Totals = std::vector<std::int64_t>;

const ledger::AggregateFile* find_file(const HierarchyEvidence& ev, ledger::Level level, std::uint32_t node) {
    for (const auto& f : ev.aggregates)
        if (f.level == level && f.node == node) return &f;
    return nullptr;
}

const ledger::AggregateFile& need_file(const HierarchyEvidence& ev, ledger::Level level, std::uint32_t node) {
    if (const auto* f = find_file(ev, level, node)) return *f;
    static constexpr const char* names[] = {"super", "ultra", "national"};
    throw IncompleteEvidence(std::string("missing ") + names[static_cast<int>(level)] + " file for node " +
                             std::to_string(node));
}

const ClusterCheckReport& need_cluster(const HierarchyEvidence& ev, std::uint32_t id) {
    auto it = ev.clusters.find(ClusterId{id});
    if (it == ev.clusters.end()) throw IncompleteEvidence("missing cluster file " + std::to_string(id));
    return it->second;
}

Totals sum_rows(const ledger::AggregateFile& f) {
    Totals sum(f.candidates, 0);
    for (const auto& child : f.children)
        for (std::size_t c = 0; c < sum.size() && c < child.totals.size(); ++c) sum[c] += child.totals[c];
    return sum;
}

ledger::Level child_level(ledger::Level level) {
    return level == ledger::Level::National ? ledger::Level::Ultra : ledger::Level::Super;
}

/// Verified totals of a node (bottom-up), appending one NodeResult per aggregate visited.
Totals verify_node(const HierarchyEvidence& ev, const ledger::AggregateFile& file, HierarchyReport& report) {
    Totals verified(file.candidates, 0);
    std::string detail;
    bool rows_match = true;
    for (const auto& child : file.children) {
        Totals child_verified;
        Totals child_reported;
        if (file.level == ledger::Level::Super) {
            const auto& cr = need_cluster(ev, child.child);
            child_verified = cr.totals;
            child_reported = cr.totals;
            if (!cr.pass) {
                rows_match = false;
                detail += "cluster " + std::to_string(child.child) + " failed its manual check; ";
            }
        } else {
            const auto& cf = need_file(ev, child_level(file.level), child.child);
            child_verified = verify_node(ev, cf, report);
            child_reported = cf.totals;
        }
        report.totals_read += 1;
        if (child.totals != child_reported) {
            rows_match = false;
            detail += "row for child " + std::to_string(child.child) + " disagrees with its file; ";
        }
        for (std::size_t c = 0; c < verified.size() && c < child_verified.size(); ++c) verified[c] += child_verified[c];
    }
    const bool self_consistent = sum_rows(file) == file.totals;
    if (!self_consistent) detail += "child rows do not add up to the node total; ";
    const bool matches_verified = verified == file.totals;
    if (!matches_verified) detail += "node total differs from the verified sum below it; ";
    report.nodes.push_back(NodeResult{file.level, file.node, rows_match && self_consistent && matches_verified, detail});
    return verified;
}

}  // namespace

HierarchyReport verify_hierarchy(const HierarchyEvidence& evidence) {
    HierarchyReport report;
    const auto& national = need_file(evidence, ledger::Level::National, 0);
    verify_node(evidence, national, report);
    return report;
}

HierarchyReport verify_drill_down(const HierarchyEvidence& evidence, const ElectionConfig& hierarchy,
                                  ClusterId cluster) {
    auto sit = hierarchy.cluster_parent.find(cluster);
    if (sit == hierarchy.cluster_parent.end())
        throw ConfigError("cluster " + std::to_string(cluster.value) + " is not in the hierarchy");
    const SuperId super = sit->second;
    const UltraId ultra = hierarchy.super_parent.at(super);

    HierarchyReport report;
    auto check = [&](const ledger::AggregateFile& file, const Totals* expected_from_parent) {
        NodeResult res{file.level, file.node, true, {}};
        report.totals_read += file.children.size();
        if (sum_rows(file) != file.totals) {
            res.pass = false;
            res.detail += "child rows do not add up to the node total; ";
        }
        if (expected_from_parent && *expected_from_parent != file.totals) {
            res.pass = false;
            res.detail += "node total differs from the parent's row; ";
        }
        report.nodes.push_back(res);
    };
    auto row_for = [](const ledger::AggregateFile& file, std::uint32_t child) -> const Totals* {
        for (const auto& c : file.children)
            if (c.child == child) return &c.totals;
        return nullptr;
    };

    const auto& nat = need_file(evidence, ledger::Level::National, 0);
    check(nat, nullptr);
    const auto& uf = need_file(evidence, ledger::Level::Ultra, ultra.value);
    const Totals* urow = row_for(nat, ultra.value);
    check(uf, urow);
    if (!urow) report.nodes.back().pass = false;
    const auto& sf = need_file(evidence, ledger::Level::Super, super.value);
    const Totals* srow = row_for(uf, super.value);
    check(sf, srow);
    if (!srow) report.nodes.back().pass = false;

    const auto& cr = need_cluster(evidence, cluster.value);
    const Totals* crow = row_for(sf, cluster.value);
    NodeResult base{ledger::Level::Super, super.value, cr.pass && crow && *crow == cr.totals, {}};
    if (!cr.pass) base.detail += "cluster file failed its manual check; ";
    if (!crow || *crow != cr.totals) base.detail += "cluster totals differ from the super-cluster row; ";
    // The base link is attributed to the super-cluster that lists the cluster.
    report.nodes.back().pass = report.nodes.back().pass && base.pass;
    report.nodes.back().detail += base.detail;
    return report;
}

AntiStuffingResult anti_stuffing_check(std::span<const engine::VoterRoll> rolls, const ledger::FlatLedger& flat) {
    std::int64_t crossed = 0;
    for (const auto& roll : rolls) crossed += static_cast<std::int64_t>(roll.crossed_off);
    std::int64_t dummies = 0;
    for (auto d : flat.dummies) dummies += d;
    const std::int64_t recorded = static_cast<std::int64_t>(flat.rows.size()) - dummies;
    return AntiStuffingResult{recorded == crossed, recorded - crossed};
}

std::map<PrecinctId, AntiStuffingResult> anti_stuffing_by_precinct(std::span<const engine::VoterRoll> rolls,
                                                                   std::span<const VoteRecord> records) {
    std::map<PrecinctId, std::int64_t> recorded;
    for (const auto& roll : rolls) recorded[roll.precinct] = 0;
    for (const auto& rec : records)
        if (!rec.is_dummy) recorded[rec.precinct] += 1;
    std::map<PrecinctId, AntiStuffingResult> out;
    for (const auto& roll : rolls) {
        const std::int64_t delta = recorded[roll.precinct] - static_cast<std::int64_t>(roll.crossed_off);
        out[roll.precinct] = AntiStuffingResult{delta == 0, delta};
    }
    for (const auto& [p, n] : recorded)
        if (!out.contains(p)) out[p] = AntiStuffingResult{n == 0, n};
    return out;
}

bool verify_receipt_signature(const Receipt& receipt, const signing::KeyRegistry& keys) {
    return signing::verify_receipt_signature(receipt, keys);
}

std::string_view to_string(DisputeClass c) {
    switch (c) {
    case DisputeClass::RecordFound:
        return "record-found";
    case DisputeClass::SignatureValidMismatch:
        return "signature-valid-mismatch";
    case DisputeClass::SignatureInvalid:
        return "signature-invalid";
    }
    return "?";
}

DisputeOutcome file_dispute(const Receipt& receipt, const ledger::FlatLedger& flat, std::size_t choice_row,
                            const signing::KeyRegistry& keys) {
    DisputeOutcome out;
    out.receipt = receipt;
    out.row = choice_row;
    if (choice_row >= receipt.rows.size()) {
        out.classification = DisputeClass::SignatureInvalid;
        return out;
    }
    const auto& row = receipt.rows[choice_row];
    out.ledger_rows = locate_vote(flat, row.r);
    const bool found = std::any_of(out.ledger_rows.begin(), out.ledger_rows.end(),
                                   [&](const ledger::FlatRow& fr) { return fr.candidate == row.candidate; });
    if (found) {
        out.classification = DisputeClass::RecordFound;
        return out;
    }
    bool valid = false;
    try {
        valid = verification::verify_receipt_signature(receipt, keys);
    } catch (const UnknownKey&) {
        valid = false;
    }
    out.classification = valid ? DisputeClass::SignatureValidMismatch : DisputeClass::SignatureInvalid;
    return out;
}

}  // namespace sfv::verification
