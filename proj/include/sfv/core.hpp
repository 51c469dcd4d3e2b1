#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sfv/error.hpp"
#include "sfv/ids.hpp"

namespace sfv {

inline constexpr int kDefaultPseudonymWidth = 12;
inline constexpr int kMaxPseudonymWidth = 18;  // 10^18 still fits in 64 bits

/// 10^width as an integer. Throws ConfigError outside [1, kMaxPseudonymWidth].
std::uint64_t pow10(int width);

/// Random decimal number drawn in the booth. Canonical text is zero-padded to `width` digits.
class Pseudonym {
public:
    constexpr Pseudonym() = default;
    /// Throws ConfigError if width is out of range or value >= 10^width.
    Pseudonym(std::uint64_t value, int width = kDefaultPseudonymWidth);

    std::uint64_t value() const noexcept { return value_; }
    int width() const noexcept { return width_; }

    friend constexpr bool operator==(const Pseudonym&, const Pseudonym&) = default;
    friend constexpr auto operator<=>(const Pseudonym& a, const Pseudonym& b) {
        if (auto c = a.value_ <=> b.value_; c != 0) return c;
        return a.width_ <=> b.width_;
    }

private:
    std::uint64_t value_ = 0;
    int width_ = kDefaultPseudonymWidth;
};

std::string format_pseudonym(const Pseudonym& p);

/// Accepts exactly `width` decimal digits; nullopt otherwise.
std::optional<Pseudonym> parse_pseudonym(std::string_view text, int width);
/// Width taken from the text length.
std::optional<Pseudonym> parse_pseudonym(std::string_view text);

struct Candidate {
    CandidateId id = 0;
    std::string display_name;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// One row of the central record list. Cluster/precinct are the origin of the vote.
struct VoteRecord {
    Pseudonym r;
    CandidateId candidate = 0;
    ClusterId cluster;
    PrecinctId precinct;
    bool is_dummy = false;

    friend bool operator==(const VoteRecord&, const VoteRecord&) = default;
};

struct ReceiptRow {
    Pseudonym r;
    CandidateId candidate = 0;

    friend bool operator==(const ReceiptRow&, const ReceiptRow&) = default;
};

/// Printed receipt: one row per candidate in ascending id order, exactly one row carries the true vote.
struct Receipt {
    std::vector<ReceiptRow> rows;
    MachineId machine;
    std::vector<std::uint8_t> signature;

    /// Throws MalformedReceipt unless rows are 0..n-1 in order with pairwise distinct pseudonyms.
    /// When `expected_candidates` is given the row count must also match it.
    void validate(std::optional<std::size_t> expected_candidates = std::nullopt) const;

    friend bool operator==(const Receipt&, const Receipt&) = default;
};

/// Bytes covered by the machine signature:
///   machine=<id>\n
///   <candidate>,<pseudonym>\n   (one per row, canonical order)
std::string canonical_receipt_bytes(const Receipt& receipt);

/// Inverse of canonical_receipt_bytes (signature left empty).
Receipt decode_receipt_bytes(std::string_view bytes);

/// Receipt file = canonical bytes followed by `signature=<hex>`.
std::string serialize_receipt(const Receipt& receipt);
Receipt parse_receipt(std::string_view text);

std::string to_hex(const std::vector<std::uint8_t>& bytes);
std::optional<std::vector<std::uint8_t>> from_hex(std::string_view hex);

}  // namespace sfv
