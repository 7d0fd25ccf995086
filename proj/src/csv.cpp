#include "dflab/csv.hpp"

#include <charconv>
#include <cmath>

namespace dflab {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::vector<ConvergenceRow> convergence_table(const FamilySpec& spec, int i,
                                              std::span<const std::uint64_t> xs,
                                              std::span<const std::uint64_t> ys,
                                              const EvalBudget& budget, const SpfTable& table,
                                              unsigned threads) {
    if (xs.empty() || ys.empty())
        throw std::invalid_argument("convergence_table: xs and ys must be nonempty");

    auto counts = count_members_at(spec, i, xs, table, threads);
    DensityPrediction limit = predicted_density(spec, i, budget);

    struct PerY {
        DensityPrediction smooth;
        DensityPrediction lower;
    };
    std::vector<PerY> per_y;
    per_y.reserve(ys.size());
    for (std::uint64_t y : ys) {
        per_y.push_back({smooth_class_density(spec, i, y, budget.cutoff, table),
                         density_lower_bound(spec, i, y, budget, table)});
    }

    std::vector<ConvergenceRow> rows;
    rows.reserve(xs.size() * ys.size());
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
        double empirical = static_cast<double>(counts[xi]) / static_cast<double>(xs[xi]);
        for (std::size_t yi = 0; yi < ys.size(); ++yi) {
            ConvergenceRow row;
            row.x = xs[xi];
            row.y = ys[yi];
            row.empirical = empirical;
            row.smooth_upper = per_y[yi].smooth.predicted;
            row.lower_bound = per_y[yi].lower.predicted;
            row.limit = limit.predicted;
            row.smooth_tail = per_y[yi].smooth.tail_bound;
            row.limit_tail = limit.tail_bound;
            rows.push_back(row);
        }
    }
    return rows;
}

void write_convergence_csv(std::ostream& os, std::span<const ConvergenceRow> rows) {
    os << "x,y,empirical,smooth_upper,lower_bound,limit,smooth_tail,limit_tail\n";
    for (const auto& row : rows) {
        os << row.x << ',' << row.y << ',' << format_double(row.empirical) << ','
           << format_double(row.smooth_upper) << ',' << format_double(row.lower_bound) << ','
           << format_double(row.limit) << ','
           << (row.smooth_tail ? format_double(*row.smooth_tail) : std::string()) << ','
           << (row.limit_tail ? format_double(*row.limit_tail) : std::string()) << '\n';
    }
}

} // namespace dflab
