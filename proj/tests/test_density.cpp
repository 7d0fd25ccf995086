#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "common.hpp"
#include "dflab/csv.hpp"
#include "dflab/density.hpp"

using namespace dflab;
using namespace dflab::testing;

// Reference values computed independently with mpmath (40 digits).
static constexpr double DIGIT_SPLIT_H2 = 1.52599127273749217982375972578;
static constexpr double DIGIT_SPLIT_DENSITY1 = 0.655311742514810867508451760158;

TEST_CASE("count_members examples and thread invariance") {
    const SpfTable& table = shared_sieve(1000000);
    FamilySpec spec = zoo_p2_odd();

    CHECK(count_members(spec, 2, 100, table) == 50);
    CHECK(count_members(spec, 1, 100, table) == 7); // {1,2,4,8,16,32,64}
    for (const auto& zoo : covering_zoo()) CHECK(count_members(zoo, 1, 1, table) == 1);

    CHECK(count_members(spec, 2, 999999, table) == count_members(spec, 2, 999999, table, 3));
    std::vector<std::uint64_t> xs{10, 1000, 12345, 999999};
    CHECK(count_members_at(spec, 1, xs, table, 1) == count_members_at(spec, 1, xs, table, 4));
}

TEST_CASE("count_smooth_relaxed examples") {
    const SpfTable& table = shared_sieve(1000000);
    FamilySpec spec = zoo_p2_odd();

    CHECK(count_smooth_relaxed(spec, 2, 2, 100, table) == 50);
    // the 2-smooth part is always a power of two, hence always in class 1
    CHECK(count_smooth_relaxed(spec, 1, 2, 100, table) == 100);
    {
        // brute-force confirmation with independent smooth-part logic
        std::uint64_t count = 0;
        for (std::uint64_t n = 1; n <= 100; ++n) {
            std::uint64_t v = n;
            while (v % 2 == 0) v /= 2;
            std::uint64_t smooth = n / v; // power of two
            bool in_class1 = (smooth & (smooth - 1)) == 0;
            if (in_class1) ++count;
        }
        CHECK(count == 100);
    }
    CHECK(count_smooth_relaxed(spec, 1, 2, 1, table) == 1);
}

TEST_CASE("harmonic_sum_truncated") {
    const SpfTable& table = shared_sieve(1000000);

    SumEstimate geo = harmonic_sum_truncated(zoo_p2_odd(), 1, 1024, table);
    CHECK(geo.value == doctest::Approx(1.9990234375).epsilon(1e-15));
    CHECK(geo.divergence == Divergence::converges);

    SumEstimate one = harmonic_sum_truncated(zoo_trivial_pair(), 1, 500, table);
    CHECK(one.value == doctest::Approx(1.0).epsilon(1e-15));

    // quadratic degree-2 class vs an independent trial-division summation
    SumEstimate inert = harmonic_sum_truncated(zoo_gauss(), 2, 1000000, table);
    long double reference = 1.0L;
    reference = 1.0L; // a = 1
    for (std::uint64_t n = 2; n <= 1000000; ++n) {
        std::uint64_t v = n;
        bool ok = true;
        for (std::uint64_t p = 2; p * p <= v; ++p) {
            if (v % p != 0) continue;
            if (p % 4 != 3) {
                ok = false;
                break;
            }
            while (v % p == 0) v /= p;
        }
        if (ok && v > 1 && v % 4 != 3) ok = false;
        if (ok) reference += 1.0L / static_cast<long double>(n);
    }
    CHECK(inert.value == doctest::Approx(static_cast<double>(reference)).epsilon(1e-12));
    CHECK(inert.divergence == Divergence::diverges_heuristic);
}

TEST_CASE("harmonic_sum_smooth") {
    const SpfTable& table = shared_sieve(100000);

    SumEstimate geo = harmonic_sum_smooth(zoo_p2_odd(), 1, 2, 1000, table);
    CHECK(geo.value == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(geo.cutoff == NO_CUTOFF);

    SumEstimate odd3 = harmonic_sum_smooth(zoo_p2_odd(), 2, 3, 1000, table);
    CHECK(odd3.value == doctest::Approx(1.5).epsilon(1e-15));

    // digit-split class 2 at y = 3: brute-force the exponent-set series
    SumEstimate digit = harmonic_sum_smooth(zoo_digit_split(), 2, 3, 1000, table);
    long double expect = 1.0L;
    for (std::uint64_t p : {2ull, 3ull}) {
        long double f = 0.0L;
        for (std::uint32_t e = 0; e <= 60; ++e) {
            if ((e & EVEN_POSITION_MASK) != 0) continue;
            f += powl(static_cast<long double>(p), -static_cast<long double>(e));
        }
        expect *= f;
    }
    CHECK(digit.value == doctest::Approx(static_cast<double>(expect)).epsilon(1e-12));
    REQUIRE(digit.tail_bound.has_value());
    CHECK(*digit.tail_bound < 1e-10);
}

TEST_CASE("euler_harmonic") {
    SumEstimate two = euler_harmonic(zoo_p2_odd(), 1, 100);
    CHECK(two.value == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(two.divergence == Divergence::converges);

    SumEstimate digit = euler_harmonic(zoo_digit_split(), 2, 100000);
    CHECK(digit.divergence == Divergence::converges);
    REQUIRE(digit.tail_bound.has_value());
    CHECK(*digit.tail_bound < 1e-9);
    // reference value inside [value, value + tail_bound]
    CHECK(digit.value <= DIGIT_SPLIT_H2);
    CHECK(digit.value + *digit.tail_bound >= DIGIT_SPLIT_H2);

    // prime-limit insensitivity within tails
    SumEstimate digit_small = euler_harmonic(zoo_digit_split(), 2, 20000);
    CHECK(std::abs(digit_small.value - digit.value) <=
          *digit.tail_bound + *digit_small.tail_bound);

    SumEstimate div = euler_harmonic(zoo_residue_mod4(), 2, 1000);
    CHECK(div.divergence == Divergence::diverges_heuristic);
    CHECK_FALSE(div.tail_bound.has_value());

    CHECK(euler_harmonic(zoo_digit_split(), 1, 1000).divergence ==
          Divergence::diverges_heuristic);

    CHECK_THROWS_AS(
        euler_harmonic(FamilySpec::oracle_table(4, {{1, 2, 4}, {1, 3}}), 1, 100),
        std::invalid_argument);
}

TEST_CASE("euler vs truncated for convergent classes") {
    const SpfTable& table = shared_sieve(1000000);

    // digit-split class 2 members are perfect squares, so the truncated tail
    // beyond x is at most sum_{k > sqrt(x)} k^-2 < 1/sqrt(x)
    SumEstimate truncated = harmonic_sum_truncated(zoo_digit_split(), 2, 1000000, table);
    SumEstimate euler = euler_harmonic(zoo_digit_split(), 2, 100000);
    double cutoff_tail = 1.0 / 1000.0;
    CHECK(std::abs(euler.value - truncated.value) <= *euler.tail_bound + cutoff_tail);
    CHECK(truncated.value <= euler.value + *euler.tail_bound);

    // geometric class: truncated tail below 2/cutoff
    SumEstimate tg = harmonic_sum_truncated(zoo_p2_odd(), 1, 1000000, table);
    SumEstimate eg = euler_harmonic(zoo_p2_odd(), 1, 100);
    CHECK(std::abs(eg.value - tg.value) <= *eg.tail_bound + 2.0 / 1000000.0);
}

TEST_CASE("euler identity") {
    const SpfTable& table = shared_sieve(100000);

    VerificationReport r = euler_identity_check(zoo_p2_odd(), 3, 1000, table);
    CHECK(r.pass);
    CHECK(r.metrics["lhs"].get<double>() == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(r.metrics["rhs"].get<double>() == doctest::Approx(3.0).epsilon(1e-14));

    for (const auto& spec : covering_zoo()) {
        for (std::uint64_t y : {2ull, 3ull, 5ull, 7ull, 11ull}) {
            VerificationReport report = euler_identity_check(spec, y, 1000, table);
            INFO(spec.label(), " y=", y);
            CHECK(report.pass);
        }
    }
}

TEST_CASE("smooth_class_density examples and route agreement") {
    const SpfTable& table = shared_sieve(100000);

    DensityPrediction d1 = smooth_class_density(zoo_p2_odd(), 2, 2, 1000, table);
    CHECK(d1.predicted == doctest::Approx(0.5).epsilon(1e-14));

    DensityPrediction d2 = smooth_class_density(zoo_p2_odd(), 1, 2, 1000, table);
    CHECK(d2.predicted == doctest::Approx(1.0).epsilon(1e-14));

    DensityPrediction d3 = smooth_class_density(zoo_p2_p35_rest(), 3, 5, 1000, table);
    CHECK(d3.route_product == doctest::Approx(4.0 / 15.0).epsilon(1e-14));
    CHECK(d3.route_inverse == doctest::Approx(4.0 / 15.0).epsilon(1e-14));
    CHECK(d3.predicted == doctest::Approx(4.0 / 15.0).epsilon(1e-14));

    for (const auto& spec : covering_zoo()) {
        for (int i = 1; i <= spec.m(); ++i) {
            for (std::uint64_t y : {2ull, 3ull, 5ull, 7ull, 11ull}) {
                DensityPrediction p = smooth_class_density(spec, i, y, 1000, table);
                INFO(spec.label(), " i=", i, " y=", y);
                REQUIRE(p.tail_bound.has_value());
                CHECK(std::abs(p.route_product - p.route_inverse) <= *p.tail_bound);
                CHECK(p.predicted >= 0.0);
                CHECK(p.predicted <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("predicted_density") {
    DensityPrediction third = predicted_density(zoo_p2_p3_rest(), 3);
    CHECK(std::abs(third.predicted - 1.0 / 3.0) <= 1e-15);

    for (int i : {1, 2}) {
        DensityPrediction z = predicted_density(zoo_gauss(), i);
        CHECK(z.predicted == 0.0);
        CHECK(z.note.find("diverges") != std::string::npos);
    }

    DensityPrediction digit = predicted_density(zoo_digit_split(), 1);
    CHECK(digit.predicted == doctest::Approx(DIGIT_SPLIT_DENSITY1).epsilon(1e-11));
    CHECK(predicted_density(zoo_digit_split(), 2).predicted == 0.0);

    // the pair special case: a 2-family with H(A_1) finite has density(2) = 1/H(A_1)
    CHECK(predicted_density(zoo_p2_odd(), 2).predicted == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(predicted_density(zoo_trivial_pair(), 2).predicted ==
          doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("density_lower_bound") {
    const SpfTable& table = shared_sieve(100000);
    EvalBudget budget;

    DensityPrediction lo = density_lower_bound(zoo_p2_p3_rest(), 3, 5, budget, table);
    CHECK(lo.predicted == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
    CHECK(lo.mode == DensityMode::lower_bound);

    DensityPrediction vac = density_lower_bound(zoo_gauss(), 1, 5, budget, table);
    CHECK(vac.mode == DensityMode::vacuous);
    CHECK(std::isinf(vac.predicted));

    DensityPrediction one = density_lower_bound(zoo_trivial_pair(), 2, 7, budget, table);
    CHECK(one.predicted == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("empirical_density") {
    const SpfTable& table = shared_sieve(1000000);
    CHECK(empirical_density(zoo_p2_odd(), 2, 1000000, table) == 0.5);
    CHECK(std::abs(empirical_density(zoo_p2_p3_rest(), 3, 1000000, table) - 1.0 / 3.0) < 1e-5);
    CHECK(empirical_density(zoo_p2_odd(), 1, 1, table) == 1.0);
}

TEST_CASE("squeeze shape of the digit-split bounds") {
    const SpfTable& table = shared_sieve(100000);
    EvalBudget budget;
    double limit = predicted_density(zoo_digit_split(), 1, budget).predicted;

    double prev_upper = 2.0, prev_lower = -2.0;
    for (std::uint64_t y : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull}) {
        double upper = smooth_class_density(zoo_digit_split(), 1, y, 1000, table).predicted;
        double lower = density_lower_bound(zoo_digit_split(), 1, y, budget, table).predicted;
        CHECK(upper <= prev_upper + 1e-12);
        CHECK(lower >= prev_lower - 1e-12);
        CHECK(lower <= limit + 1e-12);
        CHECK(limit <= upper + 1e-12);
        prev_upper = upper;
        prev_lower = lower;
    }
    CHECK(prev_upper - limit < 0.01);
    CHECK(limit - prev_lower < 0.01);
}

TEST_CASE("empirical counts never exceed smooth-relaxed counts") {
    const SpfTable& table = shared_sieve(100000);
    std::vector<FamilySpec> specs = covering_zoo();
    std::vector<std::uint64_t> odds, powers;
    for (std::uint64_t n = 1; n <= 100000; n += 2) odds.push_back(n);
    for (std::uint64_t n = 1; n <= 100000; n *= 2) powers.push_back(n);
    specs.push_back(FamilySpec::oracle_table(100000, {powers, odds}));

    for (const auto& spec : specs) {
        for (int i = 1; i <= spec.m(); ++i) {
            for (std::uint64_t y : {2ull, 5ull}) {
                std::uint64_t a = count_members(spec, i, 100000, table);
                std::uint64_t ay = count_smooth_relaxed(spec, i, y, 100000, table);
                INFO(spec.label(), " i=", i, " y=", y);
                CHECK(a <= ay);
            }
        }
    }
}

TEST_CASE("classes overlap only at one") {
    const SpfTable& table = shared_sieve(100000);
    for (const auto& spec : covering_zoo()) {
        for (std::uint64_t x : {100ull, 10000ull, 100000ull}) {
            std::uint64_t total = 0;
            for (int i = 1; i <= spec.m(); ++i) total += count_members(spec, i, x, table) - 1;
            CHECK(total <= x - 1);
        }
    }
}

TEST_CASE("convergence table and CSV output") {
    const SpfTable& table = shared_sieve(100000);
    std::vector<std::uint64_t> xs{1000, 10000, 100000};
    std::vector<std::uint64_t> ys{2, 3, 5};
    EvalBudget budget{100000, 100000};

    auto rows = convergence_table(zoo_digit_split(), 1, xs, ys, budget, table, 1);
    REQUIRE(rows.size() == xs.size() * ys.size());
    CHECK(rows[0].x == 1000);
    CHECK(rows[0].y == 2);
    CHECK(rows[1].y == 3);
    CHECK(rows.back().x == 100000);

    std::ostringstream a, b;
    write_convergence_csv(a, rows);
    auto rows_threaded = convergence_table(zoo_digit_split(), 1, xs, ys, budget, table, 4);
    write_convergence_csv(b, rows_threaded);
    CHECK(a.str() == b.str()); // byte-identical across thread counts

    std::istringstream lines(a.str());
    std::string header;
    std::getline(lines, header);
    CHECK(header == "x,y,empirical,smooth_upper,lower_bound,limit,smooth_tail,limit_tail");
    CHECK(a.str().back() == '\n');

    // divergent family: lower bound column renders as -inf, limit as 0
    auto vac = convergence_table(zoo_gauss(), 1, {{1000ull}}, {{2ull}}, budget, table, 1);
    std::ostringstream c;
    write_convergence_csv(c, vac);
    CHECK(c.str().find("-inf") != std::string::npos);

    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
}
