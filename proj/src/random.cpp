#include "sfv/random.hpp"

#include <numeric>
#include <unordered_set>

namespace sfv::random {

std::uint64_t Stream::below(std::uint64_t bound) {
    if (bound == 0) throw DomainError("Stream::below: bound must be positive");
    // Reject the tail so every residue is equally likely.
    const std::uint64_t limit = max() - (max() % bound + 1) % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x > limit);
    return x % bound;
}

double Stream::unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Stream::weighted(std::span<const double> weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw DomainError("weighted draw needs a positive total weight");
    double x = unit() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (x < weights[i]) return i;
        x -= weights[i];
    }
    // Rounding can leave x just past the last bucket.
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return i;
    return 0;
}

std::vector<std::size_t> Stream::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw DomainError("cannot sample more items than the population holds");
    std::vector<std::size_t> out;
    out.reserve(k);
    if (k * 4 > n) {
        // Dense: partial Fisher-Yates over the full index range.
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) {
            std::swap(idx[i], idx[i + below(n - i)]);
            out.push_back(idx[i]);
        }
        return out;
    }
    std::unordered_set<std::size_t> taken;
    while (out.size() < k) {
        auto i = static_cast<std::size_t>(below(n));
        if (taken.insert(i).second) out.push_back(i);
    }
    return out;
}

void validate_mode(const RngMode& mode, int width) {
    if (const auto* ve = std::get_if<VoterEntropy>(&mode)) {
        if (ve->machine_width < 1 || ve->voter_width < 1 || ve->machine_width + ve->voter_width != width)
            throw ConfigError("voter-entropy split " + std::to_string(ve->machine_width) + "+" +
                              std::to_string(ve->voter_width) + " does not match pseudonym width " +
                              std::to_string(width));
        if (ve->forced_prefix && *ve->forced_prefix >= pow10(ve->machine_width))
            throw ConfigError("forced prefix does not fit the machine width");
    } else if (const auto* rg = std::get_if<Rigged>(&mode)) {
        if (rg->forced.width() != width) throw ConfigError("forced pseudonym has the wrong width");
    }
}

Pseudonym draw_pseudonym(Stream& stream, int width) {
    return Pseudonym(stream.below(pow10(width)), width);
}

MachineCommitment commit_machine(Stream& stream, const VoterEntropy& mode) {
    MachineCommitment c;
    c.machine_width = mode.machine_width;
    c.voter_width = mode.voter_width;
    c.prefix = mode.forced_prefix ? *mode.forced_prefix : stream.below(pow10(mode.machine_width));
    c.concealed_suffix = stream.below(pow10(mode.voter_width));
    return c;
}

std::uint64_t add_digits_mod10(std::uint64_t a, std::uint64_t b, int digits) {
    std::uint64_t out = 0, place = 1;
    for (int i = 0; i < digits; ++i) {
        out += ((a % 10 + b % 10) % 10) * place;
        a /= 10;
        b /= 10;
        place *= 10;
    }
    return out;
}

Pseudonym combine_voter_entropy(const MachineCommitment& c, std::uint64_t voter_digits) {
    const std::uint64_t suffix_space = pow10(c.voter_width);
    if (voter_digits >= suffix_space || c.concealed_suffix >= suffix_space || c.prefix >= pow10(c.machine_width))
        throw ConfigError("voter-entropy digits do not match the configured widths");
    const int width = c.machine_width + c.voter_width;
    return Pseudonym(c.prefix * suffix_space + add_digits_mod10(c.concealed_suffix, voter_digits, c.voter_width),
                     width);
}

}  // namespace sfv::random
