#include "dflab/arith.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace dflab {

namespace {

using u128 = unsigned __int128;

u128 gcd_u128(u128 a, u128 b) {
    while (b != 0) {
        u128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

bool squarefree_abs(std::int64_t v) {
    std::uint64_t n = v < 0 ? static_cast<std::uint64_t>(-v) : static_cast<std::uint64_t>(v);
    for (std::uint64_t p = 2; p * p <= n; ++p) {
        if (n % p == 0) {
            n /= p;
            if (n % p == 0) return false;
        }
    }
    return true;
}

constexpr char SPF_MAGIC[8] = {'D', 'F', 'L', 'A', 'B', 'S', 'P', 'F'};
constexpr std::uint32_t SPF_VERSION = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    std::array<unsigned char, 4> b{static_cast<unsigned char>(v),
                                   static_cast<unsigned char>(v >> 8),
                                   static_cast<unsigned char>(v >> 16),
                                   static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b.data()), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& is) {
    std::array<unsigned char, 4> b{};
    is.read(reinterpret_cast<char*>(b.data()), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
    std::uint64_t lo = get_u32(is);
    std::uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}

} // namespace

SpfTable SpfTable::build(std::uint64_t limit, std::uint64_t budget_bytes) {
    if (limit < 2) throw std::invalid_argument("sieve limit must be at least 2");
    if (limit > std::numeric_limits<std::uint32_t>::max())
        throw SieveCapacityError("sieve limit exceeds 32-bit entry range");
    if ((limit + 1) * sizeof(std::uint32_t) > budget_bytes)
        throw SieveCapacityError("sieve of limit " + std::to_string(limit) +
                                 " exceeds memory budget of " + std::to_string(budget_bytes) +
                                 " bytes");

    std::vector<std::uint32_t> spf(limit + 1, 0);
    for (std::uint64_t i = 2; i <= limit; ++i) {
        if (spf[i] == 0) {
            for (std::uint64_t j = i; j <= limit; j += i) {
                if (spf[j] == 0) spf[j] = static_cast<std::uint32_t>(i);
            }
        }
    }
    return SpfTable(limit, std::move(spf));
}

std::vector<std::uint64_t> SpfTable::primes_up_to(std::uint64_t y) const {
    std::vector<std::uint64_t> out;
    std::uint64_t top = std::min(y, limit_);
    for (std::uint64_t p = 2; p <= top; ++p) {
        if (spf_[p] == p) out.push_back(p);
    }
    return out;
}

void SpfTable::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open sieve cache for writing: " + path.string());
    os.write(SPF_MAGIC, sizeof(SPF_MAGIC));
    put_u32(os, SPF_VERSION);
    put_u64(os, limit_);
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(spf_.data() + 2),
                 static_cast<std::streamsize>((limit_ - 1) * sizeof(std::uint32_t)));
    } else {
        for (std::uint64_t n = 2; n <= limit_; ++n) put_u32(os, spf_[n]);
    }
    if (!os) throw std::runtime_error("failed writing sieve cache: " + path.string());
}

SpfTable SpfTable::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open sieve cache: " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, SPF_MAGIC, sizeof(magic)) != 0)
        throw std::runtime_error("sieve cache has wrong magic: " + path.string());
    std::uint32_t version = get_u32(is);
    if (version != SPF_VERSION)
        throw std::runtime_error("sieve cache version " + std::to_string(version) +
                                 " unsupported");
    std::uint64_t limit = get_u64(is);
    if (!is || limit < 2) throw std::runtime_error("sieve cache has bad limit");

    std::vector<std::uint32_t> spf(limit + 1, 0);
    if constexpr (std::endian::native == std::endian::little) {
        is.read(reinterpret_cast<char*>(spf.data() + 2),
                static_cast<std::streamsize>((limit - 1) * sizeof(std::uint32_t)));
    } else {
        for (std::uint64_t n = 2; n <= limit; ++n) spf[n] = get_u32(is);
    }
    if (!is) throw std::runtime_error("sieve cache truncated: " + path.string());
    return SpfTable(limit, std::move(spf));
}

Factorization factorize(std::uint64_t n, const SpfTable& table) {
    if (n == 0) throw std::invalid_argument("factorize: n must be positive");
    if (n > table.limit())
        throw std::out_of_range("factorize: n = " + std::to_string(n) + " exceeds sieve limit " +
                                std::to_string(table.limit()));
    std::vector<PrimePower> factors;
    while (n > 1) {
        std::uint64_t p = table.spf(n);
        std::uint32_t e = 0;
        while (n % p == 0) {
            n /= p;
            ++e;
        }
        factors.push_back({p, e});
    }
    std::uint64_t value = 1;
    for (const auto& f : factors) {
        for (std::uint32_t i = 0; i < f.exponent; ++i) value *= f.prime;
    }
    return Factorization(value, std::move(factors));
}

std::uint64_t smooth_part(std::uint64_t n, std::uint64_t y, const SpfTable& table) {
    if (n == 0) throw std::invalid_argument("smooth_part: n must be positive");
    if (n > table.limit())
        throw std::out_of_range("smooth_part: n exceeds sieve limit");
    std::uint64_t smooth = 1;
    while (n > 1) {
        std::uint64_t p = table.spf(n);
        if (p > y) break;
        while (n % p == 0) {
            n /= p;
            smooth *= p;
        }
    }
    return smooth;
}

namespace {

std::vector<std::uint64_t> primes_below(std::uint64_t y) {
    std::vector<std::uint64_t> primes;
    if (y < 2) return primes;
    std::vector<bool> composite(y + 1, false);
    for (std::uint64_t p = 2; p <= y; ++p) {
        if (composite[p]) continue;
        primes.push_back(p);
        for (std::uint64_t q = p * p; q <= y; q += p) composite[q] = true;
    }
    return primes;
}

} // namespace

double mertens_product(std::uint64_t y, std::size_t exact_prime_budget) {
    if (y < 2) throw std::invalid_argument("mertens_product: y must be at least 2");
    u128 num = 1, den = 1;
    long double tail = 1.0L;
    bool exact = true;
    std::size_t used = 0;
    for (std::uint64_t p : primes_below(y)) {
        if (exact && used < exact_prime_budget) {
            u128 n2 = num * (p - 1);
            u128 d2 = den * p;
            if (n2 / (p - 1) != num || d2 / p != den) {
                exact = false; // would overflow 128 bits
            } else {
                num = n2;
                den = d2;
                u128 g = gcd_u128(num, den);
                if (g > 1) {
                    num /= g;
                    den /= g;
                }
                ++used;
                continue;
            }
        }
        exact = false;
        tail *= 1.0L - 1.0L / static_cast<long double>(p);
    }
    long double head =
        static_cast<long double>(num) / static_cast<long double>(den);
    return static_cast<double>(head * tail);
}

std::optional<Fraction> mertens_product_exact(std::uint64_t y) {
    if (y < 2) throw std::invalid_argument("mertens_product_exact: y must be at least 2");
    u128 num = 1, den = 1;
    for (std::uint64_t p : primes_below(y)) {
        u128 n2 = num * (p - 1);
        u128 d2 = den * p;
        if (n2 / (p - 1) != num || d2 / p != den) return std::nullopt;
        num = n2;
        den = d2;
        u128 g = gcd_u128(num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }
    if (num > std::numeric_limits<std::uint64_t>::max() ||
        den > std::numeric_limits<std::uint64_t>::max())
        return std::nullopt;
    return Fraction{static_cast<std::uint64_t>(num), static_cast<std::uint64_t>(den)};
}

bool is_fundamental_discriminant(std::int64_t d) {
    if (d == 0 || d == 1) return false;
    std::int64_t mod4 = ((d % 4) + 4) % 4;
    if (mod4 == 1) return squarefree_abs(d);
    if (mod4 == 0) {
        std::int64_t m = d / 4;
        std::int64_t m4 = ((m % 4) + 4) % 4;
        return (m4 == 2 || m4 == 3) && squarefree_abs(m);
    }
    return false;
}

int jacobi_symbol(std::uint64_t a, std::uint64_t n) {
    if (n == 0 || n % 2 == 0) throw std::invalid_argument("jacobi_symbol: n must be odd positive");
    a %= n;
    int t = 1;
    while (a != 0) {
        while ((a & 1) == 0) {
            a >>= 1;
            std::uint64_t r = n % 8;
            if (r == 3 || r == 5) t = -t;
        }
        std::swap(a, n);
        if (a % 4 == 3 && n % 4 == 3) t = -t;
        a %= n;
    }
    return n == 1 ? t : 0;
}

bool is_prime_trial(std::uint64_t n) {
    if (n < 2) return false;
    if (n % 2 == 0) return n == 2;
    if (n % 3 == 0) return n == 3;
    for (std::uint64_t d = 5; d * d <= n; d += 6) {
        if (n % d == 0 || n % (d + 2) == 0) return false;
    }
    return true;
}

std::uint64_t ipow(std::uint64_t base, std::uint32_t exp) {
    std::uint64_t r = 1;
    while (exp--) r *= base;
    return r;
}

int kronecker_symbol(std::int64_t d, std::uint64_t p) {
    if (!is_fundamental_discriminant(d))
        throw std::invalid_argument("kronecker_symbol: " + std::to_string(d) +
                                    " is not a fundamental discriminant");
    if (p < 2) throw std::invalid_argument("kronecker_symbol: p must be prime");
    if (p == 2) {
        if (d % 2 == 0) return 0;
        std::int64_t r = ((d % 8) + 8) % 8;
        return (r == 1 || r == 7) ? 1 : -1;
    }
    std::uint64_t a = static_cast<std::uint64_t>(((d % static_cast<std::int64_t>(p)) +
                                                  static_cast<std::int64_t>(p)) %
                                                 static_cast<std::int64_t>(p));
    return jacobi_symbol(a, p);
}

} // namespace dflab
