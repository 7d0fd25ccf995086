#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dflab/density.hpp"

namespace dflab {

// One grid point of a convergence experiment. Column order is fixed:
// x,y,empirical,smooth_upper,lower_bound,limit,smooth_tail,limit_tail
struct ConvergenceRow {
    std::uint64_t x = 0;
    std::uint64_t y = 0;
    double empirical = 0.0;
    double smooth_upper = 0.0;
    double lower_bound = 0.0; // -inf for the vacuous (divergent) case
    double limit = 0.0;
    std::optional<double> smooth_tail;
    std::optional<double> limit_tail;
};

std::vector<ConvergenceRow> convergence_table(const FamilySpec& spec, int i,
                                              std::span<const std::uint64_t> xs,
                                              std::span<const std::uint64_t> ys,
                                              const EvalBudget& budget, const SpfTable& table,
                                              unsigned threads = 1);

// Locale-independent shortest round-trip formatting (infinities print as
// "inf"/"-inf"); unknown optionals become empty fields.
std::string format_double(double v);

void write_convergence_csv(std::ostream& os, std::span<const ConvergenceRow> rows);

} // namespace dflab
