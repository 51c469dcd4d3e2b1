#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sfv/core.hpp"

namespace sfv::random {

/// SplitMix64 finalizer; used only to derive independent seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream labels keep derived seeds for different purposes apart.
enum class Purpose : std::uint64_t {
    Session = 1,
    Voter = 2,
    Seeding = 3,
    Ballot = 4,
    Trial = 5,
    Audit = 6,
    Attack = 7,
    MachineKey = 8,
    Schedule = 9,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, Purpose purpose, std::uint64_t a = 0,
                                    std::uint64_t b = 0) noexcept {
    std::uint64_t h = mix64(master);
    h = mix64(h ^ static_cast<std::uint64_t>(purpose));
    h = mix64(h ^ a);
    return mix64(h ^ (b * 0xd6e8feb86659fd93ULL));
}

/// Seeded random stream. Bounded draws use rejection sampling so results do not depend on the
/// standard library's distribution implementations.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform on [0, 1).
    double unit();
    bool bernoulli(double p) { return unit() < p; }

    /// Index drawn according to non-negative weights (need not sum to 1).
    std::size_t weighted(std::span<const double> weights);

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

    /// k distinct indices from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

struct Honest {
    friend bool operator==(const Honest&, const Honest&) = default;
};
struct Rigged {
    Pseudonym forced;
    friend bool operator==(const Rigged&, const Rigged&) = default;
};
/// Voter-injected entropy: the machine commits `machine_width + voter_width` digits, the voter
/// then adds their own digits (mod 10) onto the concealed `voter_width` suffix.
struct VoterEntropy {
    int machine_width = 10;
    int voter_width = 2;
    /// Rigged machines may force the committed prefix; the voter's digits stay out of reach.
    std::optional<std::uint64_t> forced_prefix;
    friend bool operator==(const VoterEntropy&, const VoterEntropy&) = default;
};

using RngMode = std::variant<Honest, Rigged, VoterEntropy>;

/// Throws ConfigError when a VoterEntropy split does not add up to `width`.
void validate_mode(const RngMode& mode, int width);

Pseudonym draw_pseudonym(Stream& stream, int width);
inline Pseudonym draw_rigged(const Pseudonym& forced) { return forced; }

/// Machine half of a voter-entropy draw. Logged before the voter chooses.
struct MachineCommitment {
    std::uint64_t prefix = 0;          // machine_width digits, published as-is
    std::uint64_t concealed_suffix = 0;  // voter_width digits, hidden from the voter
    int machine_width = 10;
    int voter_width = 2;
};

MachineCommitment commit_machine(Stream& stream, const VoterEntropy& mode);

/// Final pseudonym = prefix followed by per-digit (concealed + voter) mod 10.
/// `voter_digits` must have voter_width digits (leading zeros allowed).
Pseudonym combine_voter_entropy(const MachineCommitment& commitment, std::uint64_t voter_digits);

/// Digit-wise sum mod 10 of two `digits`-wide numbers.
std::uint64_t add_digits_mod10(std::uint64_t a, std::uint64_t b, int digits);

}  // namespace sfv::random
