#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dflab/family.hpp"
#include "dflab/report.hpp"

namespace dflab {

enum class Divergence { converges, diverges_heuristic, unknown };
const char* to_string(Divergence d);

// Cutoff value marking a sum that was evaluated completely (no truncation).
inline constexpr std::uint64_t NO_CUTOFF = ~0ull;

// A truncated-sum value. When divergence == converges and tail_bound is set,
// the true sum lies in [value, value + tail_bound].
struct SumEstimate {
    double value = 0.0;
    std::uint64_t cutoff = 0;
    std::optional<double> tail_bound; // nullopt = unknown
    Divergence divergence = Divergence::unknown;
    std::string note;

    nlohmann::ordered_json to_json() const;
};

enum class DensityMode { smooth_upper, limit, lower_bound, vacuous };
const char* to_string(DensityMode m);

struct DensityPrediction {
    std::string family;
    int class_index = 0;
    std::optional<std::uint64_t> y;
    double predicted = 0.0;
    DensityMode mode = DensityMode::limit;
    // The two evaluation routes of the smooth-relaxed density (identical to
    // `predicted` for the other modes).
    double route_product = 0.0; // mertens_product(y) * smooth harmonic sum of class i
    double route_inverse = 0.0; // product over j != i of inverse smooth harmonic sums
    std::optional<double> tail_bound;
    std::string note;

    nlohmann::ordered_json to_json() const;
};

// Budgets for evaluating the harmonic sums behind a density prediction.
struct EvalBudget {
    std::uint64_t prime_limit = 100000; // Euler-product route
    std::uint64_t cutoff = 1000000;     // direct-summation fallback
};

// A_i(x): members of class i up to x. Thread count only partitions the range;
// results are identical for any value.
std::uint64_t count_members(const FamilySpec& spec, int i, std::uint64_t x, const SpfTable& table,
                            unsigned threads = 1);

// Counts at several checkpoints in one scan; xs must be ascending.
std::vector<std::uint64_t> count_members_at(const FamilySpec& spec, int i,
                                            std::span<const std::uint64_t> xs,
                                            const SpfTable& table, unsigned threads = 1);

// A_{i,y}(x): integers n <= x whose y-smooth part lies in class i.
std::uint64_t count_smooth_relaxed(const FamilySpec& spec, int i, std::uint64_t y,
                                   std::uint64_t x, const SpfTable& table, unsigned threads = 1);

std::vector<std::uint64_t> count_smooth_relaxed_at(const FamilySpec& spec, int i, std::uint64_t y,
                                                   std::span<const std::uint64_t> xs,
                                                   const SpfTable& table, unsigned threads = 1);

// Direct summation of 1/a over members a <= cutoff of class j.
SumEstimate harmonic_sum_truncated(const FamilySpec& spec, int j, std::uint64_t cutoff,
                                   const SpfTable& table);

// Sum of 1/a over y-smooth members of class j. For the per-prime structured
// kinds this is a finite product over primes <= y of exponent-set series and
// the cutoff argument is ignored; for table-backed kinds members <= cutoff
// are summed directly.
SumEstimate harmonic_sum_smooth(const FamilySpec& spec, int j, std::uint64_t y,
                                std::uint64_t cutoff, const SpfTable& table);

// Full harmonic sum H of class j as an Euler product over primes up to
// prime_limit. Convergent cases with unbounded prime support (the digit-split
// classes) are completed with a prime-zeta tail so the reported tail_bound
// reflects numerical accuracy rather than raw truncation. Classes that admit
// exponent 1 at infinitely many primes are flagged divergent.
SumEstimate euler_harmonic(const FamilySpec& spec, int j, std::uint64_t prime_limit);

// Heuristic divergence classification of H(class j) from the class structure.
Divergence classify_harmonic(const FamilySpec& spec, int j, std::string* reason = nullptr);

// Checks prod_{p<=y} (1-1/p)^-1 == prod_i (smooth harmonic sum of class i).
VerificationReport euler_identity_check(const FamilySpec& spec, std::uint64_t y,
                                        std::uint64_t cutoff, const SpfTable& table);

// Density of the smooth-relaxed class {n : n_y in class i}, evaluated by two
// independent routes; `predicted` is their mean and the discrepancy must stay
// within the combined tail bounds.
DensityPrediction smooth_class_density(const FamilySpec& spec, int i, std::uint64_t y,
                                       std::uint64_t cutoff, const SpfTable& table);

// Limit density of class i: prod_{j != i} H(class j)^-1, zero when any factor
// diverges.
DensityPrediction predicted_density(const FamilySpec& spec, int i, const EvalBudget& budget = {});

// Lower bound d_{i,y} + 1 - d_{i,y} * prod_{j != i} H(class j); vacuous when
// some H diverges.
DensityPrediction density_lower_bound(const FamilySpec& spec, int i, std::uint64_t y,
                                      const EvalBudget& budget, const SpfTable& table);

// count_members(i, x) / x.
double empirical_density(const FamilySpec& spec, int i, std::uint64_t x, const SpfTable& table,
                         unsigned threads = 1);

} // namespace dflab
