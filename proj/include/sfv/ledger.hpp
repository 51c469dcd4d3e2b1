#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sfv/config.hpp"
#include "sfv/core.hpp"

namespace sfv::ledger {

struct FlatRow {
    Pseudonym r;
    CandidateId candidate = 0;

    friend bool operator==(const FlatRow&, const FlatRow&) = default;
    friend auto operator<=>(const FlatRow& a, const FlatRow& b) {
        if (auto c = a.r.value() <=> b.r.value(); c != 0) return c;
        return a.candidate <=> b.candidate;
    }
};

/// Format A: every (r, C) pair nationwide, sorted by r then candidate.
struct FlatLedger {
    int width = kDefaultPseudonymWidth;
    std::size_t candidates = 0;
    std::vector<FlatRow> rows;
    std::vector<std::uint32_t> dummies;  // national, per candidate

    friend bool operator==(const FlatLedger&, const FlatLedger&) = default;
};

struct ClusterRow {
    std::uint64_t serial = 0;
    Pseudonym r;
    CandidateId candidate = 0;

    friend bool operator==(const ClusterRow&, const ClusterRow&) = default;
};

/// Format B base file: grouped by candidate, sorted by r inside a group, serials 1..N.
struct ClusterFile {
    ClusterId cluster;
    SuperId super;
    int width = kDefaultPseudonymWidth;
    std::size_t candidates = 0;
    std::vector<std::uint32_t> dummies;
    std::vector<ClusterRow> rows;

    friend bool operator==(const ClusterFile&, const ClusterFile&) = default;
};

enum class Level { Super, Ultra, National };

struct ChildTotals {
    std::uint32_t child = 0;
    std::vector<std::int64_t> totals;

    friend bool operator==(const ChildTotals&, const ChildTotals&) = default;
};

/// Aggregation node: net (dummy-free) totals of every child plus the node's own totals.
struct AggregateFile {
    Level level = Level::Super;
    std::uint32_t node = 0;
    std::optional<std::uint32_t> parent;  // none for the national node
    std::size_t candidates = 0;
    std::vector<ChildTotals> children;
    std::vector<std::int64_t> totals;

    friend bool operator==(const AggregateFile&, const AggregateFile&) = default;
};

struct HierarchicalLedger {
    std::vector<ClusterFile> clusters;
    std::vector<AggregateFile> supers;
    std::vector<AggregateFile> ultras;
    AggregateFile national;

    const ClusterFile* cluster(ClusterId id) const;
    const AggregateFile* super(SuperId id) const;
    const AggregateFile* ultra(UltraId id) const;

    friend bool operator==(const HierarchicalLedger&, const HierarchicalLedger&) = default;
};

FlatLedger build_format_a(std::span<const VoteRecord> records, std::size_t candidates, int width);

/// Throws ConfigError when a record names a cluster missing from the hierarchy.
HierarchicalLedger build_format_b(std::span<const VoteRecord> records, const ElectionConfig& hierarchy);

/// Recomputes every aggregate from the cluster files (used after rewriting cluster contents).
void recompute_aggregates(HierarchicalLedger& ledger, const ElectionConfig& hierarchy);

std::vector<std::int64_t> net_totals(const ClusterFile& file);

// --- file names -----------------------------------------------------------

std::string flat_file_name();
std::string cluster_file_name(ClusterId id);
std::string super_file_name(SuperId id);
std::string ultra_file_name(UltraId id);
std::string national_file_name();

// --- serialization --------------------------------------------------------

std::string serialize(const FlatLedger& ledger);
std::string serialize(const ClusterFile& file);
std::string serialize(const AggregateFile& file);

/// Named failure classes reported by the parsers.
enum class ParseErrorKind {
    MalformedLine,
    MissingHeader,
    UnknownHeaderKey,
    DuplicateHeaderKey,
    BadDummyMetadata,
    RowCountMismatch,
    CandidateOutOfRange,
    WidthMismatch,
    SerialGap,
    UnsortedRows,
    TotalsMismatch,
};

std::string_view to_string(ParseErrorKind kind);

class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, std::size_t line, const std::string& detail)
        : Error("line " + std::to_string(line) + ": " + std::string(to_string(kind)) + ": " + detail),
          kind_(kind),
          line_(line) {}
    ParseErrorKind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }

private:
    ParseErrorKind kind_;
    std::size_t line_;
};

/// Strict parsing enforces every published invariant; Lenient checks syntax only, so a manual
/// verifier can be handed a damaged file and find the problem itself.
enum class Strictness { Strict, Lenient };

FlatLedger parse_flat(std::string_view text, Strictness strictness = Strictness::Strict);
ClusterFile parse_cluster(std::string_view text, Strictness strictness = Strictness::Strict);
AggregateFile parse_aggregate(std::string_view text, Strictness strictness = Strictness::Strict);

}  // namespace sfv::ledger
