#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dflab/density.hpp"
#include "dflab/family.hpp"
#include "dflab/report.hpp"

namespace dflab {

// Brute-force uniqueness: for each n <= N enumerate every ordered m-tuple of
// divisors multiplying to n with all parts members; exactly one must exist and
// match decompose(n).
VerificationReport verify_unique_decomposition(const FamilySpec& spec, std::uint64_t N,
                                               const SpfTable& table, unsigned threads = 1);

// Injectivity of the smooth injection a -> component_i(a_y) * a/a_y on class
// members up to N, and containment of every image in the smooth-relaxed class.
VerificationReport verify_smooth_injection(const FamilySpec& spec, int i, std::uint64_t y,
                                           std::uint64_t N, const SpfTable& table);

// A_i(x) <= A_{i,y}(x) at every listed x.
VerificationReport verify_count_inequality(const FamilySpec& spec, int i, std::uint64_t y,
                                           std::span<const std::uint64_t> xs,
                                           const SpfTable& table, unsigned threads = 1);

// Signature sets partition the complement of class i: empty signature exactly
// on members, nonempty fibers disjoint with union [1,N] minus the class.
VerificationReport verify_signature_partition(const FamilySpec& spec, int i, std::uint64_t N,
                                              const SpfTable& table);

// Bound chain lower(y) - slack <= empirical(x_max) <= upper(y) + slack for
// each y, with the upper bounds nonincreasing and the lower bounds
// nondecreasing across the ascending ys.
VerificationReport verify_squeeze(const FamilySpec& spec, int i,
                                  std::span<const std::uint64_t> ys,
                                  std::span<const std::uint64_t> xs, double slack,
                                  const EvalBudget& budget, const SpfTable& table,
                                  unsigned threads = 1);

// Unique representation of every s in S' = S u {1} as a product from
// S1' x S2'.
VerificationReport verify_pair_for_subset(const FamilySpec& pair_spec, std::uint64_t N);

// Exhaustive refutation of a self factor pair (A, A): reduced to exponent
// sets, no E containing 0 gives every e >= 0 exactly one representation
// e = e1 + e2 with e1, e2 in E. The search records the forced membership
// decisions and the terminal two-sided conflict.
struct RefutationCertificate {
    enum class Status { unsat, inconclusive };

    struct Decision {
        unsigned exponent = 0;
        bool in_set = false;
        std::string reason; // conflict that rules out the opposite branch
    };

    Status status = Status::inconclusive;
    bool ordered_pairs = false;
    unsigned max_exponent = 0;
    std::vector<Decision> decisions;
    std::optional<unsigned> conflict_exponent; // exponent whose two branches both fail
    std::string conflict_detail;
    unsigned conflict_depth = 0; // largest exponent involved in the closing conflicts

    nlohmann::ordered_json to_json() const;
};

RefutationCertificate search_self_factor_pair(unsigned max_exponent, bool ordered_pairs = false);

// Re-derives every forced decision and the terminal conflict from scratch;
// true iff the certificate replays deterministically.
bool replay_certificate(const RefutationCertificate& cert, std::string* why = nullptr);

} // namespace dflab
