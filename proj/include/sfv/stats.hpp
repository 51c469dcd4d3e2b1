#pragma once

#include <cstdint>
#include <utility>

namespace sfv::stats {

/// Poisson model of pseudonym draws: N voters, S possible pseudonyms.
struct CollisionModel {
    double N = 0;
    double S = 1;

    double lambda() const { return N / S; }
};

/// Expected number of pseudonyms drawn exactly k times: S * lambda^k / k! * exp(-lambda).
double expected_collisions(const CollisionModel& model, unsigned k);

double collision_stddev(const CollisionModel& model);

inline constexpr double kDefaultBudgetZ = 2.83;

/// floor(z * stddev). Throws DomainError on negative z.
std::int64_t collision_budget(const CollisionModel& model, double z = kDefaultBudgetZ);

struct Band {
    double lo = 0;
    double hi = 0;
};

/// mean -/+ z * stddev for C_2.
Band normal_band(const CollisionModel& model, double z = 3.0);

/// Exact quantiles of Poisson(E[C_2]) at tail mass (1 - coverage)/2 on each side.
std::pair<std::int64_t, std::int64_t> poisson_band(const CollisionModel& model, double coverage = 0.9973);

/// Smallest x with P(X <= x) >= q for X ~ Poisson(mean).
std::int64_t poisson_quantile(double mean, double q);

struct StealCapacity {
    double attempts = 0;
    double expected_steals = 0;
};

/// attempts = B/(1-p), steals = p * attempts. Throws DomainError for p outside [0, 1).
StealCapacity steal_capacity(double B, double p);

/// (M - K)/(A - K). Throws DomainError unless K <= M <= A and K < A.
double catch_probability(double M, double K, double A);

/// P(X >= threshold) for X ~ Binomial(V, p), summed in log space.
double detection_probability(std::uint64_t V, double p, std::uint64_t threshold);

/// expected_collisions with S = machine_space.
double expected_semi_collisions(double N, double machine_space, unsigned k);

}  // namespace sfv::stats
