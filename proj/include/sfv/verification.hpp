#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfv/engine.hpp"
#include "sfv/ledger.hpp"
#include "sfv/signing.hpp"

namespace sfv::verification {

// --- digital checks over Format A ------------------------------------------

/// All rows carrying pseudonym r, in ledger order (binary search over the sorted rows).
std::vector<ledger::FlatRow> locate_vote(const ledger::FlatLedger& flat, const Pseudonym& r);

/// occurrences(c) - dummies(c). Throws LedgerInconsistency on a negative total.
std::vector<std::int64_t> digital_tally(const ledger::FlatLedger& flat);

struct CollisionCensus {
    std::map<std::size_t, std::uint64_t> by_multiplicity;  // k -> pseudonyms seen exactly k times
    struct Group {
        Pseudonym r;
        std::vector<CandidateId> candidates;
    };
    std::vector<Group> colliding;  // every pseudonym with k >= 2

    std::uint64_t count(std::size_t k) const {
        auto it = by_multiplicity.find(k);
        return it == by_multiplicity.end() ? 0 : it->second;
    }
    /// Pseudonyms that appear with more than one distinct candidate.
    std::uint64_t visible_collisions() const;
};

CollisionCensus count_collisions(const ledger::FlatLedger& flat);

struct SemiCollisionReport {
    std::uint64_t pairs = 0;     // prefix groups of exactly two rows
    std::uint64_t triplets = 0;  // prefix groups of three or more rows
    struct Group {
        std::uint64_t prefix = 0;
        std::vector<ledger::FlatRow> rows;
        bool same_candidate_triplet = false;  // >= 3 rows for one candidate: fraud evidence
    };
    std::vector<Group> offending;  // every group of size >= 2
    std::uint64_t flagged() const;
};

/// Groups rows by their machine-committed prefix. Throws ConfigError if machine_width >= width.
SemiCollisionReport detect_semi_collisions(const ledger::FlatLedger& flat, int machine_width);

// --- manual checks over Format B -------------------------------------------

struct ClusterCheckReport {
    ClusterId cluster;
    bool serial_gap_found = false;
    std::size_t gap_position = 0;  // 1-based row where the serial sequence first breaks
    bool grouping_error = false;   // a candidate block is split or out of order
    std::vector<std::int64_t> totals;
    std::vector<std::uint32_t> dummies_used;
    bool pass = false;
};

/// Gap scan over serials, then per candidate block: last - first + 1 - dummies.
ClusterCheckReport verify_cluster_manual(const ledger::ClusterFile& file);

struct NodeResult {
    ledger::Level level = ledger::Level::Super;
    std::uint32_t node = 0;
    bool pass = false;
    std::string detail;
};

struct HierarchyReport {
    std::vector<NodeResult> nodes;
    std::size_t totals_read = 0;  // per-candidate total vectors consulted
    bool pass() const;
    const NodeResult* find(ledger::Level level, std::uint32_t node) const;
};

/// Evidence a verifier has in hand.
struct HierarchyEvidence {
    std::vector<ledger::AggregateFile> aggregates;
    std::map<ClusterId, ClusterCheckReport> clusters;
};

/// Full tree, bottom-up: each node's reported totals must equal the sum of its children's
/// independently verified totals, and each child row must match the child's own file.
/// Throws IncompleteEvidence if a file is missing.
HierarchyReport verify_hierarchy(const HierarchyEvidence& evidence);

/// Drill-down from the national node to one base cluster, checking one node per level.
HierarchyReport verify_drill_down(const HierarchyEvidence& evidence, const ElectionConfig& hierarchy,
                                  ClusterId cluster);

// --- physical / procedural checks ------------------------------------------

struct AntiStuffingResult {
    bool ok = true;
    std::int64_t delta = 0;  // recorded votes minus crossed-off names
};

AntiStuffingResult anti_stuffing_check(std::span<const engine::VoterRoll> rolls, const ledger::FlatLedger& flat);

/// Per-precinct variant over the central record list (localises a mismatch).
std::map<PrecinctId, AntiStuffingResult> anti_stuffing_by_precinct(std::span<const engine::VoterRoll> rolls,
                                                                   std::span<const VoteRecord> records);

/// Throws UnknownKey if the machine has no registered key.
bool verify_receipt_signature(const Receipt& receipt, const signing::KeyRegistry& keys);

enum class DisputeClass { RecordFound, SignatureValidMismatch, SignatureInvalid };

std::string_view to_string(DisputeClass c);

struct DisputeOutcome {
    DisputeClass classification = DisputeClass::RecordFound;
    Receipt receipt;
    std::size_t row = 0;
    std::vector<ledger::FlatRow> ledger_rows;  // rows sharing the designated pseudonym
};

/// The voter designates their true row. Found -> RecordFound; otherwise the signature decides.
DisputeOutcome file_dispute(const Receipt& receipt, const ledger::FlatLedger& flat, std::size_t choice_row,
                            const signing::KeyRegistry& keys);

}  // namespace sfv::verification
