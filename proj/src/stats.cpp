#include "sfv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sfv/error.hpp"

namespace sfv::stats {

double expected_collisions(const CollisionModel& model, unsigned k) {
    if (k < 1) throw DomainError("k must be at least 1");
    if (model.S < 1) throw DomainError("sample space must be at least 1");
    if (model.N < 0) throw DomainError("voter count must be non-negative");
    if (model.N == 0) return 0.0;
    const double lambda = model.lambda();
    const double log_term = std::log(model.S) + k * std::log(lambda) - std::lgamma(k + 1.0) - lambda;
    return std::exp(log_term);
}

double collision_stddev(const CollisionModel& model) { return std::sqrt(expected_collisions(model, 2)); }

std::int64_t collision_budget(const CollisionModel& model, double z) {
    if (z < 0) throw DomainError("z must be non-negative");
    return static_cast<std::int64_t>(std::floor(z * collision_stddev(model)));
}

Band normal_band(const CollisionModel& model, double z) {
    const double mean = expected_collisions(model, 2);
    const double sd = std::sqrt(mean);
    return {mean - z * sd, mean + z * sd};
}

std::int64_t poisson_quantile(double mean, double q) {
    if (mean < 0 || q < 0 || q > 1) throw DomainError("poisson quantile out of domain");
    if (mean == 0) return 0;
    double log_pmf = -mean;  // P(X = 0)
    double cdf = std::exp(log_pmf);
    std::int64_t x = 0;
    while (cdf < q) {
        ++x;
        log_pmf += std::log(mean) - std::log(static_cast<double>(x));
        cdf += std::exp(log_pmf);
        if (x > 100 + static_cast<std::int64_t>(10 * mean)) break;
    }
    return x;
}

std::pair<std::int64_t, std::int64_t> poisson_band(const CollisionModel& model, double coverage) {
    const double mean = expected_collisions(model, 2);
    const double tail = (1.0 - coverage) / 2.0;
    return {poisson_quantile(mean, tail), poisson_quantile(mean, 1.0 - tail)};
}

StealCapacity steal_capacity(double B, double p) {
    if (B < 0) throw DomainError("budget must be non-negative");
    if (p < 0 || p > 1) throw DomainError("prediction accuracy must lie in [0, 1]");
    if (p == 1) throw DomainError("p = 1 gives unbounded attempts");
    const double attempts = B / (1.0 - p);
    return {attempts, p * attempts};
}

double catch_probability(double M, double K, double A) {
    if (M < 0 || K < 0 || A < 0) throw DomainError("counts must be non-negative");
    if (K > M) throw DomainError("K must not exceed M");
    if (M > A) throw DomainError("M must not exceed A");
    if (K >= A) throw DomainError("K must be below A");
    return (M - K) / (A - K);
}

double detection_probability(std::uint64_t V, double p, std::uint64_t threshold) {
    if (p < 0 || p > 1) throw DomainError("catch probability must lie in [0, 1]");
    if (threshold == 0) return 1.0;
    if (threshold > V || p == 0) return 0.0;
    if (p == 1) return 1.0;
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    const double lgV = std::lgamma(static_cast<double>(V) + 1.0);
    auto log_pmf = [&](std::uint64_t x) {
        const double xd = static_cast<double>(x);
        return lgV - std::lgamma(xd + 1.0) - std::lgamma(static_cast<double>(V - x) + 1.0) + xd * lp +
               (static_cast<double>(V) - xd) * lq;
    };
    // Sum the shorter side with log-sum-exp.
    const double mean = static_cast<double>(V) * p;
    const bool upper = static_cast<double>(threshold) > mean;
    std::vector<double> terms;
    if (upper) {
        for (std::uint64_t x = threshold; x <= V; ++x) terms.push_back(log_pmf(x));
    } else {
        for (std::uint64_t x = 0; x < threshold; ++x) terms.push_back(log_pmf(x));
    }
    const double peak = *std::max_element(terms.begin(), terms.end());
    double acc = 0;
    for (double t : terms) acc += std::exp(t - peak);
    const double side = std::exp(peak + std::log(acc));
    return std::clamp(upper ? side : 1.0 - side, 0.0, 1.0);
}

double expected_semi_collisions(double N, double machine_space, unsigned k) {
    return expected_collisions(CollisionModel{N, machine_space}, k);
}

}  // namespace sfv::stats
