#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dflab/arith.hpp"
#include "dflab/errors.hpp"

namespace dflab {

enum class FamilyKind {
    prime_partition,
    residue_classes,
    quadratic_degree,
    digit_split_pair,
    primitive_pair,
    oracle_table,
};

const char* to_string(FamilyKind kind);

// Exponent masks for the digit-split pair. Binary digit position 0 (least
// significant) counts as even, so class 1 admits exponent 1 and class 2
// starts at exponent 2.
inline constexpr std::uint32_t EVEN_POSITION_MASK = 0x55555555u;
inline constexpr std::uint32_t ODD_POSITION_MASK = 0xAAAAAAAAu;

struct PrimePartitionParams {
    std::vector<std::vector<std::uint64_t>> classes; // explicit prime lists, sorted
    int default_class = 1;                           // 1-based; receives unlisted primes
};

struct ResidueClassesParams {
    std::uint64_t modulus = 0;
    std::vector<std::uint64_t> residues; // coprime residues, ascending; class i <-> residues[i-1]
    int divisor_class = 1;               // 1-based class receiving primes p | modulus
    bool coprime_only = false;           // alternative reading: family of {n : gcd(n,q)=1}
};

struct QuadraticDegreeParams {
    std::int64_t discriminant = 0; // class 1: split/ramified, class 2: inert
};

struct DigitSplitParams {};

struct PrimitivePairParams {
    std::vector<std::uint64_t> sequence;                 // primitive sequence S, sorted
    std::array<std::vector<std::uint64_t>, 2> partition; // S1, S2 (sorted, disjoint, union = S)
};

struct OracleTableParams {
    std::uint64_t bound = 0;
    std::vector<std::vector<std::uint64_t>> classes; // sorted member lists, each containing 1
};

// Declarative description of an m-family of direct factors. Immutable;
// operations on it are pure and thread-safe given a shared SpfTable.
class FamilySpec {
public:
    FamilyKind kind() const { return kind_; }
    int m() const { return m_; }
    std::string label() const;
    bool covers_naturals() const;

    static FamilySpec prime_partition(std::vector<std::vector<std::uint64_t>> classes,
                                      int default_class);
    static FamilySpec residue_classes(std::uint64_t modulus, int divisor_class = 1,
                                      bool coprime_only = false);
    static FamilySpec quadratic_degree(std::int64_t discriminant);
    static FamilySpec digit_split_pair();
    static FamilySpec primitive_pair(std::vector<std::uint64_t> sequence,
                                     std::array<std::vector<std::uint64_t>, 2> partition);
    static FamilySpec oracle_table(std::uint64_t bound,
                                   std::vector<std::vector<std::uint64_t>> classes);

    static FamilySpec from_json(const nlohmann::json& doc);
    static FamilySpec load(const std::filesystem::path& path);
    nlohmann::ordered_json to_json() const;

    const PrimePartitionParams& prime_partition_params() const;
    const ResidueClassesParams& residue_classes_params() const;
    const QuadraticDegreeParams& quadratic_degree_params() const;
    const PrimitivePairParams& primitive_pair_params() const;
    const OracleTableParams& oracle_table_params() const;

private:
    using Params = std::variant<PrimePartitionParams, ResidueClassesParams,
                                QuadraticDegreeParams, DigitSplitParams, PrimitivePairParams,
                                OracleTableParams>;

    FamilySpec(FamilyKind kind, int m, Params params)
        : kind_(kind), m_(m), params_(std::move(params)) {}

    FamilyKind kind_;
    int m_;
    Params params_;
};

struct DecompositionTuple {
    std::uint64_t n = 1;
    std::vector<std::uint64_t> parts;

    bool operator==(const DecompositionTuple&) const = default;
};

// True iff n lies in class i (1-based). 1 belongs to every class.
bool membership(const FamilySpec& spec, int i, std::uint64_t n, const SpfTable& table);

// The unique tuple (a_1, ..., a_m) with product n and a_i in class i.
DecompositionTuple decompose(const FamilySpec& spec, std::uint64_t n, const SpfTable& table);

// i-th component of the decomposition tuple of n.
std::uint64_t component(const FamilySpec& spec, int i, std::uint64_t n, const SpfTable& table);

// Maps a member a of class i to component_i(a_y) * a / a_y, an element of the
// smooth-relaxed class {n : n_y in class i}. Injective on class members.
std::uint64_t smooth_injection(const FamilySpec& spec, int i, std::uint64_t y, std::uint64_t a,
                               const SpfTable& table);

// Indices j != i whose component of k is nontrivial; empty exactly on members
// of class i.
std::vector<int> signature_set(const FamilySpec& spec, int i, std::uint64_t k,
                               const SpfTable& table);

// Precomputed prime -> class classification for the per-prime structured
// kinds. Built once per scan; immutable afterwards and safe to share.
class ClassLookup {
public:
    ClassLookup(const FamilySpec& spec, const SpfTable& table);

    // True for kinds whose membership is decided prime power by prime power.
    bool per_prime() const { return per_prime_; }
    // False when explicit prime lists overlap (membership then needs the
    // slower per-class path).
    bool unambiguous() const { return unambiguous_; }

    // 1-based owner of prime p; 0 when p belongs to no class. Only valid for
    // per-prime kinds other than digit_split_pair.
    int class_of_prime(std::uint64_t p) const { return class_of_[p]; }

    bool prime_power_in_class(std::uint64_t p, std::uint32_t e, int i) const {
        if (digit_split_) {
            return i == 1 ? (e & ODD_POSITION_MASK) == 0 : (e & EVEN_POSITION_MASK) == 0;
        }
        return class_of_[p] == i;
    }

    // Membership of n in class i via an allocation-free factor walk.
    bool member(std::uint64_t n, int i, const SpfTable& table) const;

private:
    bool per_prime_ = false;
    bool unambiguous_ = true;
    bool digit_split_ = false;
    std::vector<std::int16_t> class_of_; // indexed by prime value
};

} // namespace dflab
