#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "common.hpp"

using namespace dflab;
using dflab::testing::fixed_rng;
using dflab::testing::shared_sieve;
using dflab::testing::trial_factorize;

TEST_CASE("spf sieve on small limits") {
    const SpfTable& t10 = shared_sieve(10);
    std::vector<std::pair<std::uint64_t, std::uint32_t>> expected = {
        {2, 2}, {3, 3}, {4, 2}, {5, 5}, {6, 2}, {7, 7}, {8, 2}, {9, 3}, {10, 2}};
    for (auto [n, spf] : expected) CHECK(t10.spf(n) == spf);

    SpfTable t2 = SpfTable::build(2);
    CHECK(t2.limit() == 2);
    CHECK(t2.spf(2) == 2);

    CHECK_THROWS_AS(SpfTable::build(1), std::invalid_argument);
    CHECK_THROWS_AS(SpfTable::build(1000000, /*budget=*/1024), SieveCapacityError);
}

TEST_CASE("spf entries are prime divisors; large prime case") {
    const SpfTable& table = shared_sieve(1000000);
    CHECK(table.spf(999983) == 999983);
    CHECK(dflab::is_prime_trial(999983));

    // every spf divides its index and is prime (trial-division oracle)
    auto rng = fixed_rng();
    std::uniform_int_distribution<std::uint64_t> pick(2, table.limit());
    for (int k = 0; k < 2000; ++k) {
        std::uint64_t n = pick(rng);
        std::uint32_t p = table.spf(n);
        CHECK(n % p == 0);
        CHECK(dflab::is_prime_trial(p));
    }
}

TEST_CASE("factorize invariants and examples") {
    const SpfTable& table = shared_sieve(100000);

    auto f60 = factorize(60, table);
    REQUIRE(f60.factors().size() == 3);
    CHECK(f60.factors()[0] == PrimePower{2, 2});
    CHECK(f60.factors()[1] == PrimePower{3, 1});
    CHECK(f60.factors()[2] == PrimePower{5, 1});
    CHECK(f60.p_plus() == 5);
    CHECK(f60.p_minus() == 2);

    auto f1 = factorize(1, table);
    CHECK(f1.factors().empty());
    CHECK(f1.p_plus() == 1);
    CHECK(f1.p_minus() == P_MINUS_INFINITY);

    auto f1024 = factorize(1024, table);
    REQUIRE(f1024.factors().size() == 1);
    CHECK(f1024.factors()[0] == PrimePower{2, 10});

    CHECK_THROWS_AS(factorize(table.limit() + 1, table), std::out_of_range);
    CHECK_THROWS_AS(factorize(0, table), std::invalid_argument);

    // product and primality of every factorization (exhaustive small range)
    for (std::uint64_t n = 2; n <= 20000; ++n) {
        auto f = factorize(n, table);
        std::uint64_t product = 1;
        std::uint64_t last = 1;
        for (const auto& pp : f.factors()) {
            CHECK(pp.prime > last);
            last = pp.prime;
            CHECK(dflab::is_prime_trial(pp.prime));
            CHECK(pp.exponent >= 1);
            product *= ipow(pp.prime, pp.exponent);
        }
        CHECK(product == n);
    }
}

TEST_CASE("smooth part") {
    const SpfTable& table = shared_sieve(100000);
    CHECK(smooth_part(60, 3, table) == 12);
    CHECK(smooth_part(7, 2, table) == 1);
    CHECK(smooth_part(1, 100, table) == 1);

    auto rng = fixed_rng(7);
    std::uniform_int_distribution<std::uint64_t> pick_n(1, table.limit());
    std::uniform_int_distribution<std::uint64_t> pick_y(2, 40);
    for (int k = 0; k < 3000; ++k) {
        std::uint64_t n = pick_n(rng), y = pick_y(rng);
        std::uint64_t s = smooth_part(n, y, table);
        CHECK(n % s == 0);
        std::uint64_t rough = n / s;
        if (s > 1) CHECK(factorize(s, table).p_plus() <= y);
        if (rough > 1) CHECK(factorize(rough, table).p_minus() > y);
    }
}

TEST_CASE("mertens product exact values and monotonicity") {
    auto half = mertens_product_exact(2);
    REQUIRE(half.has_value());
    CHECK(*half == Fraction{1, 2});

    auto third = mertens_product_exact(4);
    REQUIRE(third.has_value());
    CHECK(*third == Fraction{1, 3});

    CHECK(mertens_product(2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mertens_product(4) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    // independent prime list by trial division
    long double reference = 1.0L;
    for (std::uint64_t p = 2; p <= 100; ++p) {
        if (dflab::is_prime_trial(p)) reference *= 1.0L - 1.0L / static_cast<long double>(p);
    }
    CHECK(mertens_product(100) == doctest::Approx(static_cast<double>(reference)).epsilon(1e-14));

    // strictly decreasing across primes, constant in between
    double prev = mertens_product(2);
    for (std::uint64_t y = 3; y <= 120; ++y) {
        double cur = mertens_product(y);
        if (dflab::is_prime_trial(y)) {
            CHECK(cur < prev);
        } else {
            CHECK(cur == prev);
        }
        prev = cur;
    }
}

TEST_CASE("rough counts converge to the mertens product" * doctest::skip(false)) {
    // density of {n <= x : P^-(n) > y} vs the product, y <= 30 at x = 1e7
    const SpfTable& table = shared_sieve(10000000);
    const std::uint64_t x = 10000000;
    for (std::uint64_t y : {2ull, 5ull, 11ull, 19ull, 29ull}) {
        std::uint64_t count = 1; // n = 1 has no prime factor at all
        for (std::uint64_t n = 2; n <= x; ++n) {
            if (table.spf(n) > y) ++count;
        }
        double density = static_cast<double>(count) / static_cast<double>(x);
        CHECK(std::abs(density - mertens_product(y)) < 1e-3);
    }
}

TEST_CASE("kronecker symbol") {
    CHECK(kronecker_symbol(-4, 5) == 1);
    CHECK(kronecker_symbol(-4, 3) == -1);
    CHECK(kronecker_symbol(-4, 2) == 0);

    // non-fundamental discriminants rejected
    CHECK_THROWS_AS(kronecker_symbol(9, 5), std::invalid_argument);   // not squarefree
    CHECK_THROWS_AS(kronecker_symbol(7, 5), std::invalid_argument);   // 3 mod 4
    CHECK_THROWS_AS(kronecker_symbol(0, 5), std::invalid_argument);
    CHECK_THROWS_AS(kronecker_symbol(1, 5), std::invalid_argument);
    CHECK_THROWS_AS(kronecker_symbol(-27, 5), std::invalid_argument); // 1 mod 4, 27 = 3^3

    CHECK(is_fundamental_discriminant(-3));
    CHECK(is_fundamental_discriminant(-4));
    CHECK(is_fundamental_discriminant(5));
    CHECK(is_fundamental_discriminant(8));
    CHECK(is_fundamental_discriminant(-8));
    CHECK(is_fundamental_discriminant(12)); // 4 * 3 with 3 = 3 mod 4
    CHECK_FALSE(is_fundamental_discriminant(-12));
    CHECK_FALSE(is_fundamental_discriminant(16));

    // D = 8: split iff p = +-1 mod 8
    for (std::uint64_t p : {7ull, 17ull, 23ull, 31ull}) CHECK(kronecker_symbol(8, p) == 1);
    for (std::uint64_t p : {3ull, 5ull, 11ull, 13ull}) CHECK(kronecker_symbol(8, p) == -1);
    CHECK(kronecker_symbol(8, 2) == 0);

    // D = 5: split iff p = +-1 mod 5
    for (std::uint64_t p : {11ull, 19ull, 29ull, 31ull}) CHECK(kronecker_symbol(5, p) == 1);
    for (std::uint64_t p : {2ull, 3ull, 7ull, 13ull, 17ull, 23ull}) CHECK(kronecker_symbol(5, p) == -1);
    CHECK(kronecker_symbol(5, 5) == 0);

    // Euler's criterion as an independent oracle for odd primes
    auto legendre = [](std::int64_t a, std::uint64_t p) {
        std::uint64_t r = static_cast<std::uint64_t>(((a % (std::int64_t)p) + (std::int64_t)p) %
                                                     (std::int64_t)p);
        unsigned __int128 acc = 1, base = r;
        std::uint64_t e = (p - 1) / 2;
        while (e) {
            if (e & 1) acc = acc * base % p;
            base = base * base % p;
            e >>= 1;
        }
        if (acc == 0) return 0;
        return acc == 1 ? 1 : -1;
    };
    for (std::int64_t d : {-8ll, -7ll, -4ll, -3ll, 5ll, 8ll, 13ll, 17ll, -20ll}) {
        REQUIRE(is_fundamental_discriminant(d));
        for (std::uint64_t p : {3ull, 5ull, 7ull, 11ull, 13ull, 97ull, 101ull}) {
            CHECK(kronecker_symbol(d, p) == legendre(d, p));
        }
    }
}

TEST_CASE("sieve cache round trip") {
    namespace fs = std::filesystem;
    fs::path path = fs::temp_directory_path() / "dflab_test_sieve.bin";
    SpfTable table = SpfTable::build(5000);
    table.save(path);
    SpfTable loaded = SpfTable::load(path);
    REQUIRE(loaded.limit() == table.limit());
    for (std::uint64_t n = 2; n <= 5000; ++n) CHECK(loaded.spf(n) == table.spf(n));
    fs::remove(path);

    CHECK_THROWS(SpfTable::load(fs::temp_directory_path() / "dflab_missing_sieve.bin"));
}
