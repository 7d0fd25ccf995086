#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dflab/errors.hpp"

namespace dflab {

// Sentinel for P^-(1): every comparison "P^-(n) > y" is true for n = 1.
inline constexpr std::uint64_t P_MINUS_INFINITY = std::numeric_limits<std::uint64_t>::max();

// Default memory budget for sieve construction (entries are 4 bytes each).
inline constexpr std::uint64_t DEFAULT_SIEVE_BUDGET_BYTES = 2ull << 30;

// Smallest-prime-factor table for 2..limit. Immutable after construction and
// safe to share across threads.
class SpfTable {
public:
    static SpfTable build(std::uint64_t limit,
                          std::uint64_t budget_bytes = DEFAULT_SIEVE_BUDGET_BYTES);

    std::uint64_t limit() const { return limit_; }

    // Smallest prime factor of n, 2 <= n <= limit.
    std::uint32_t spf(std::uint64_t n) const { return spf_[n]; }

    bool is_prime(std::uint64_t n) const { return n >= 2 && spf_[n] == n; }

    std::vector<std::uint64_t> primes_up_to(std::uint64_t y) const;

    // Persistence: little-endian file with header magic "DFLABSPF",
    // version u32, limit u64, then one u32 entry per n = 2..limit.
    void save(const std::filesystem::path& path) const;
    static SpfTable load(const std::filesystem::path& path);

private:
    SpfTable(std::uint64_t limit, std::vector<std::uint32_t> spf)
        : limit_(limit), spf_(std::move(spf)) {}

    std::uint64_t limit_ = 0;
    std::vector<std::uint32_t> spf_; // indexed 0..limit, entries 0 and 1 unused
};

struct PrimePower {
    std::uint64_t prime = 0;
    std::uint32_t exponent = 0;

    bool operator==(const PrimePower&) const = default;
};

// Prime-power decomposition with primes strictly increasing. n = 1 has an
// empty factor list; then P^+(1) = 1 and P^-(1) = P_MINUS_INFINITY.
class Factorization {
public:
    Factorization() = default;
    Factorization(std::uint64_t n, std::vector<PrimePower> factors)
        : n_(n), factors_(std::move(factors)) {}

    std::uint64_t n() const { return n_; }
    std::span<const PrimePower> factors() const& { return factors_; }
    // A span must not outlive its owner; bind the factorization first.
    std::span<const PrimePower> factors() && = delete;

    std::uint64_t p_plus() const { return factors_.empty() ? 1 : factors_.back().prime; }
    std::uint64_t p_minus() const {
        return factors_.empty() ? P_MINUS_INFINITY : factors_.front().prime;
    }

private:
    std::uint64_t n_ = 1;
    std::vector<PrimePower> factors_;
};

// Factor n using the table; requires n <= table.limit().
Factorization factorize(std::uint64_t n, const SpfTable& table);

// n_y: the product of prime powers p^v || n with p <= y.
std::uint64_t smooth_part(std::uint64_t n, std::uint64_t y, const SpfTable& table);

struct Fraction {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    bool operator==(const Fraction&) const = default;
};

// prod_{p <= y} (1 - 1/p), the density of {n : P^-(n) > y}. Evaluated with
// exact 128-bit rational arithmetic for the first exact_prime_budget primes
// (or until overflow), then long-double factors for the rest.
double mertens_product(std::uint64_t y, std::size_t exact_prime_budget = 64);

// Exact reduced fraction for the same product when it fits in 64/64 bits.
std::optional<Fraction> mertens_product_exact(std::uint64_t y);

// Fundamental discriminant test (d = 1 mod 4 squarefree, or d = 4m with
// m = 2,3 mod 4 squarefree; 0 and 1 excluded).
bool is_fundamental_discriminant(std::int64_t d);

// Kronecker symbol (d|p) for a fundamental discriminant d and a prime p.
// +1 split, -1 inert, 0 ramified. Throws std::invalid_argument on a
// non-fundamental d; primality of p is the caller's contract.
int kronecker_symbol(std::int64_t d, std::uint64_t p);

// Jacobi symbol (a|n) for odd n >= 1.
int jacobi_symbol(std::uint64_t a, std::uint64_t n);

// Deterministic trial-division primality test (sieve-independent).
bool is_prime_trial(std::uint64_t n);

// base^exp without overflow checks; exponents here stay within u64 products.
std::uint64_t ipow(std::uint64_t base, std::uint32_t exp);

} // namespace dflab
