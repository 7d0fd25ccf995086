#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>

#include "dflab/arith.hpp"
#include "dflab/family.hpp"

namespace dflab::testing {

// One sieve per size per test binary; construction is the dominant cost.
inline const SpfTable& shared_sieve(std::uint64_t limit) {
    static std::map<std::uint64_t, std::unique_ptr<SpfTable>> cache;
    auto it = cache.find(limit);
    if (it == cache.end())
        it = cache.emplace(limit, std::make_unique<SpfTable>(SpfTable::build(limit))).first;
    return *it->second;
}

// Independent oracle: trial-division factorization, no sieve involved.
inline std::vector<PrimePower> trial_factorize(std::uint64_t n) {
    std::vector<PrimePower> out;
    for (std::uint64_t p = 2; p * p <= n; ++p) {
        if (n % p == 0) {
            std::uint32_t e = 0;
            while (n % p == 0) {
                n /= p;
                ++e;
            }
            out.push_back({p, e});
        }
    }
    if (n > 1) out.push_back({n, 1});
    return out;
}

inline std::mt19937_64 fixed_rng(std::uint64_t seed = 0x5eed5eedULL) {
    return std::mt19937_64(seed);
}

// The family zoo used across the test suite.
inline FamilySpec zoo_p2_p3_rest() {
    return FamilySpec::prime_partition({{2}, {3}, {}}, 3);
}
inline FamilySpec zoo_p2_p35_rest() {
    return FamilySpec::prime_partition({{2}, {3, 5}, {}}, 3);
}
inline FamilySpec zoo_p2_odd() {
    return FamilySpec::prime_partition({{2}, {}}, 2);
}
inline FamilySpec zoo_trivial_pair() {
    return FamilySpec::prime_partition({{}, {}}, 2);
}
inline FamilySpec zoo_residue_mod4() {
    return FamilySpec::residue_classes(4);
}
inline FamilySpec zoo_gauss() {
    return FamilySpec::quadratic_degree(-4);
}
inline FamilySpec zoo_digit_split() {
    return FamilySpec::digit_split_pair();
}

inline std::vector<FamilySpec> covering_zoo() {
    return {zoo_p2_p3_rest(), zoo_p2_p35_rest(), zoo_p2_odd(),    zoo_trivial_pair(),
            zoo_residue_mod4(), zoo_gauss(),     zoo_digit_split()};
}

} // namespace dflab::testing
