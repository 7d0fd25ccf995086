#include "dflab/density.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace dflab {

namespace {

using nlohmann::ordered_json;

ordered_json json_double(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

// ---------------------------------------------------------------------------
// checkpointed range counting
//
// Counts {n <= x : pred(n)} at each ascending checkpoint in one pass over
// [1, max(xs)]. The range is cut into fixed-size jobs inside the checkpoint
// intervals; threads pull jobs from an atomic index and accumulate integer
// counts per interval, so the result is identical for any thread count.
// ---------------------------------------------------------------------------
template <typename Pred>
std::vector<std::uint64_t> counts_at_checkpoints(std::span<const std::uint64_t> xs,
                                                 unsigned threads, Pred&& pred) {
    if (xs.empty()) return {};
    for (std::size_t k = 1; k < xs.size(); ++k) {
        if (xs[k] < xs[k - 1])
            throw std::invalid_argument("checkpoints must be ascending");
    }
    if (xs.front() == 0) throw std::invalid_argument("checkpoints must be positive");

    struct Job {
        std::uint64_t lo, hi;
        std::size_t interval;
    };
    std::vector<Job> jobs;
    std::uint64_t chunk = std::max<std::uint64_t>(xs.back() / (std::max(threads, 1u) * 16) + 1, 1024);
    std::uint64_t prev = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        std::uint64_t lo = prev + 1;
        while (lo <= xs[k]) {
            std::uint64_t hi = std::min(xs[k], lo + chunk - 1);
            jobs.push_back({lo, hi, k});
            lo = hi + 1;
        }
        prev = xs[k];
    }

    unsigned nthreads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
    std::vector<std::vector<std::uint64_t>> partial(
        nthreads, std::vector<std::uint64_t>(xs.size(), 0));
    std::atomic<std::size_t> next{0};

    auto work = [&](unsigned t) {
        for (;;) {
            std::size_t idx = next.fetch_add(1);
            if (idx >= jobs.size()) break;
            const Job& job = jobs[idx];
            std::uint64_t c = 0;
            for (std::uint64_t n = job.lo; n <= job.hi; ++n) {
                if (pred(n)) ++c;
            }
            partial[t][job.interval] += c;
        }
    };

    if (nthreads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }

    std::vector<std::uint64_t> out(xs.size(), 0);
    std::uint64_t running = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        for (unsigned t = 0; t < nthreads; ++t) running += partial[t][k];
        out[k] = running;
    }
    return out;
}

void check_scan_range(std::uint64_t x, const SpfTable& table) {
    if (x > table.limit())
        throw std::out_of_range("count range " + std::to_string(x) + " exceeds sieve limit " +
                                std::to_string(table.limit()));
}

// ---------------------------------------------------------------------------
// zeta and prime zeta (long double, Euler-Maclaurin)
// ---------------------------------------------------------------------------

long double zeta_em(long double s) {
    // Euler-Maclaurin with three correction terms; for s >= 2 and N = 4000 the
    // remainder is far below long-double resolution.
    constexpr int N = 4000;
    long double sum = 0.0L;
    for (int n = N; n >= 1; --n) sum += powl(static_cast<long double>(n), -s);
    long double Nf = static_cast<long double>(N);
    sum += powl(Nf, 1.0L - s) / (s - 1.0L);
    sum -= 0.5L * powl(Nf, -s);
    sum += s / 12.0L * powl(Nf, -s - 1.0L);
    sum -= s * (s + 1.0L) * (s + 2.0L) / 720.0L * powl(Nf, -s - 3.0L);
    return sum;
}

int moebius_small(int n) {
    int mu = 1;
    for (int p = 2; p * p <= n; ++p) {
        if (n % p == 0) {
            n /= p;
            if (n % p == 0) return 0;
            mu = -mu;
        }
    }
    if (n > 1) mu = -mu;
    return mu;
}

// P(s) = sum_p p^-s for s >= 2, via sum_k mu(k)/k log zeta(k s).
long double prime_zeta(long double s) {
    if (s < 2.0L) throw std::invalid_argument("prime_zeta: s must be >= 2");
    long double acc = 0.0L;
    for (int k = 1; k * s <= 200.0L; ++k) {
        int mu = moebius_small(k);
        if (mu == 0) continue;
        acc += static_cast<long double>(mu) / k * logl(zeta_em(k * s));
    }
    return acc;
}

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

// ---------------------------------------------------------------------------
// per-prime exponent-set series
// ---------------------------------------------------------------------------

// Exponent bases of the digit-split classes: class 1 uses binary positions
// 0,2,4,... (exponents 1,4,16,...), class 2 positions 1,3,5,... (2,8,32,...).
std::vector<std::uint32_t> digit_exponent_bases(int i) {
    std::vector<std::uint32_t> bases;
    for (std::uint32_t k = (i == 1 ? 0u : 1u); k < 10; k += 2) bases.push_back(1u << k);
    return bases;
}

// Local factor sum_{e in E_j} p^-e of class j at prime p, with a bound on the
// truncated part of the series.
long double exponent_series(const FamilySpec& spec, int j, std::uint64_t p,
                            long double* truncation) {
    switch (spec.kind()) {
    case FamilyKind::digit_split_pair: {
        long double f = 1.0L;
        long double trunc = 0.0L;
        for (std::uint32_t base : digit_exponent_bases(j)) {
            long double term = powl(static_cast<long double>(p), -static_cast<long double>(base));
            if (term < 1e-38L) {
                trunc += 2.0L * term * f;
                break;
            }
            f *= 1.0L + term;
        }
        if (truncation) *truncation += trunc;
        return f;
    }
    case FamilyKind::prime_partition:
    case FamilyKind::residue_classes:
    case FamilyKind::quadratic_degree: {
        // Full geometric series when the prime belongs to the class, else only
        // the exponent-0 term.
        bool in_class = false;
        switch (spec.kind()) {
        case FamilyKind::prime_partition: {
            const auto& params = spec.prime_partition_params();
            bool listed = false;
            for (const auto& cls : params.classes) {
                if (std::binary_search(cls.begin(), cls.end(), p)) {
                    listed = true;
                    break;
                }
            }
            in_class = std::binary_search(params.classes[static_cast<std::size_t>(j) - 1].begin(),
                                          params.classes[static_cast<std::size_t>(j) - 1].end(), p) ||
                       (!listed && j == params.default_class);
            break;
        }
        case FamilyKind::residue_classes: {
            const auto& params = spec.residue_classes_params();
            if (params.modulus % p == 0) {
                in_class = !params.coprime_only && j == params.divisor_class;
            } else {
                auto it = std::lower_bound(params.residues.begin(), params.residues.end(),
                                           p % params.modulus);
                in_class = it != params.residues.end() && *it == p % params.modulus &&
                           static_cast<int>(it - params.residues.begin()) + 1 == j;
            }
            break;
        }
        case FamilyKind::quadratic_degree:
            in_class =
                (kronecker_symbol(spec.quadratic_degree_params().discriminant, p) >= 0 ? 1 : 2) ==
                j;
            break;
        default: break;
        }
        if (!in_class) return 1.0L;
        long double pf = static_cast<long double>(p);
        return pf / (pf - 1.0L);
    }
    default:
        throw std::invalid_argument("exponent series: unsupported family kind");
    }
}

bool per_prime_kind(FamilyKind kind) {
    switch (kind) {
    case FamilyKind::prime_partition:
    case FamilyKind::residue_classes:
    case FamilyKind::quadratic_degree:
    case FamilyKind::digit_split_pair:
        return true;
    default:
        return false;
    }
}

// True when the explicit prime support of the class is finite (the Euler
// product is then a finite, exactly evaluable product).
bool finite_prime_support(const FamilySpec& spec, int j) {
    return spec.kind() == FamilyKind::prime_partition &&
           j != spec.prime_partition_params().default_class;
}

} // namespace

const char* to_string(Divergence d) {
    switch (d) {
    case Divergence::converges: return "converges";
    case Divergence::diverges_heuristic: return "diverges_heuristic";
    case Divergence::unknown: return "unknown";
    }
    return "?";
}

const char* to_string(DensityMode m) {
    switch (m) {
    case DensityMode::smooth_upper: return "smooth_upper";
    case DensityMode::limit: return "limit";
    case DensityMode::lower_bound: return "lower_bound";
    case DensityMode::vacuous: return "vacuous";
    }
    return "?";
}

ordered_json SumEstimate::to_json() const {
    ordered_json out;
    out["value"] = json_double(value);
    out["cutoff"] = cutoff == NO_CUTOFF ? ordered_json(nullptr) : ordered_json(cutoff);
    out["tail_bound"] = tail_bound ? json_double(*tail_bound) : ordered_json(nullptr);
    out["divergence"] = to_string(divergence);
    out["note"] = note;
    return out;
}

ordered_json DensityPrediction::to_json() const {
    ordered_json out;
    out["family"] = family;
    out["class_index"] = class_index;
    out["y"] = y ? ordered_json(*y) : ordered_json(nullptr);
    out["predicted"] = json_double(predicted);
    out["mode"] = to_string(mode);
    out["route_product"] = json_double(route_product);
    out["route_inverse"] = json_double(route_inverse);
    out["tail_bound"] = tail_bound ? json_double(*tail_bound) : ordered_json(nullptr);
    out["note"] = note;
    return out;
}

Divergence classify_harmonic(const FamilySpec& spec, int j, std::string* reason) {
    auto set_reason = [&](const std::string& r) {
        if (reason) *reason = r;
    };
    switch (spec.kind()) {
    case FamilyKind::prime_partition:
        if (j == spec.prime_partition_params().default_class) {
            set_reason("class admits exponent 1 at every prime outside the explicit lists; "
                       "the reciprocal prime sum diverges");
            return Divergence::diverges_heuristic;
        }
        set_reason("finite prime support");
        return Divergence::converges;
    case FamilyKind::residue_classes: {
        const auto& params = spec.residue_classes_params();
        set_reason("residue class " + std::to_string(params.residues[static_cast<std::size_t>(j) - 1]) +
                   " (mod " + std::to_string(params.modulus) +
                   ") contains infinitely many primes (Dirichlet)");
        return Divergence::diverges_heuristic;
    }
    case FamilyKind::quadratic_degree:
        set_reason("each splitting type captures half of all primes (Chebotarev)");
        return Divergence::diverges_heuristic;
    case FamilyKind::digit_split_pair:
        if (j == 1) {
            set_reason("exponent 1 is admitted at every prime; the reciprocal prime sum diverges");
            return Divergence::diverges_heuristic;
        }
        set_reason("smallest admitted exponent is 2; the prime series converges");
        return Divergence::converges;
    case FamilyKind::primitive_pair:
        set_reason("finite member list");
        return Divergence::converges;
    case FamilyKind::oracle_table:
        set_reason("membership is known only up to the table bound");
        return Divergence::unknown;
    }
    return Divergence::unknown;
}

std::vector<std::uint64_t> count_members_at(const FamilySpec& spec, int i,
                                            std::span<const std::uint64_t> xs,
                                            const SpfTable& table, unsigned threads) {
    if (i < 1 || i > spec.m()) throw std::invalid_argument("class index out of range");
    if (xs.empty()) return {};

    if (spec.kind() == FamilyKind::oracle_table) {
        const auto& params = spec.oracle_table_params();
        if (xs.back() > params.bound)
            throw std::out_of_range("count range exceeds oracle bound");
        const auto& cls = params.classes[static_cast<std::size_t>(i) - 1];
        std::vector<std::uint64_t> out;
        for (std::uint64_t x : xs)
            out.push_back(static_cast<std::uint64_t>(
                std::upper_bound(cls.begin(), cls.end(), x) - cls.begin()));
        return out;
    }
    if (spec.kind() == FamilyKind::primitive_pair) {
        const auto& part = spec.primitive_pair_params().partition[static_cast<std::size_t>(i) - 1];
        std::vector<std::uint64_t> out;
        for (std::uint64_t x : xs)
            out.push_back(1 + static_cast<std::uint64_t>(
                                  std::upper_bound(part.begin(), part.end(), x) - part.begin()));
        return out;
    }

    check_scan_range(xs.back(), table);
    ClassLookup lookup(spec, table);
    if (lookup.per_prime() && lookup.unambiguous()) {
        return counts_at_checkpoints(xs, threads,
                                     [&](std::uint64_t n) { return lookup.member(n, i, table); });
    }
    return counts_at_checkpoints(xs, threads,
                                 [&](std::uint64_t n) { return membership(spec, i, n, table); });
}

std::uint64_t count_members(const FamilySpec& spec, int i, std::uint64_t x, const SpfTable& table,
                            unsigned threads) {
    std::uint64_t xs[1] = {x};
    return count_members_at(spec, i, xs, table, threads)[0];
}

std::vector<std::uint64_t> count_smooth_relaxed_at(const FamilySpec& spec, int i, std::uint64_t y,
                                                   std::span<const std::uint64_t> xs,
                                                   const SpfTable& table, unsigned threads) {
    if (i < 1 || i > spec.m()) throw std::invalid_argument("class index out of range");
    if (xs.empty()) return {};
    check_scan_range(xs.back(), table);

    if (per_prime_kind(spec.kind())) {
        ClassLookup lookup(spec, table);
        if (lookup.unambiguous()) {
            return counts_at_checkpoints(xs, threads, [&](std::uint64_t n) {
                while (n > 1) {
                    std::uint64_t p = table.spf(n);
                    if (p > y) break; // remaining part is y-rough
                    std::uint32_t e = 0;
                    while (n % p == 0) {
                        n /= p;
                        ++e;
                    }
                    if (!lookup.prime_power_in_class(p, e, i)) return false;
                }
                return true;
            });
        }
    }
    return counts_at_checkpoints(xs, threads, [&](std::uint64_t n) {
        return membership(spec, i, smooth_part(n, y, table), table);
    });
}

std::uint64_t count_smooth_relaxed(const FamilySpec& spec, int i, std::uint64_t y, std::uint64_t x,
                                   const SpfTable& table, unsigned threads) {
    std::uint64_t xs[1] = {x};
    return count_smooth_relaxed_at(spec, i, y, xs, table, threads)[0];
}

SumEstimate harmonic_sum_truncated(const FamilySpec& spec, int j, std::uint64_t cutoff,
                                   const SpfTable& table) {
    if (j < 1 || j > spec.m()) throw std::invalid_argument("class index out of range");
    if (cutoff < 1) throw std::invalid_argument("cutoff must be positive");

    SumEstimate est;
    est.cutoff = cutoff;
    std::string reason;
    est.divergence = classify_harmonic(spec, j, &reason);
    est.note = reason;

    if (spec.kind() == FamilyKind::oracle_table) {
        const auto& params = spec.oracle_table_params();
        if (cutoff > params.bound)
            throw std::out_of_range("cutoff exceeds oracle bound");
        long double sum = 0.0L;
        for (std::uint64_t a : params.classes[static_cast<std::size_t>(j) - 1]) {
            if (a > cutoff) break;
            sum += 1.0L / static_cast<long double>(a);
        }
        est.value = static_cast<double>(sum);
        return est;
    }
    if (spec.kind() == FamilyKind::primitive_pair) {
        const auto& part = spec.primitive_pair_params().partition[static_cast<std::size_t>(j) - 1];
        long double sum = 1.0L; // the adjoined 1
        long double tail = 0.0L;
        for (std::uint64_t s : part) {
            if (s <= cutoff)
                sum += 1.0L / static_cast<long double>(s);
            else
                tail += 1.0L / static_cast<long double>(s);
        }
        est.value = static_cast<double>(sum);
        est.tail_bound = static_cast<double>(tail);
        return est;
    }

    check_scan_range(cutoff, table);
    ClassLookup lookup(spec, table);
    bool fast = lookup.per_prime() && lookup.unambiguous();
    long double sum = 1.0L; // a = 1
    for (std::uint64_t a = 2; a <= cutoff; ++a) {
        bool member = fast ? lookup.member(a, j, table) : membership(spec, j, a, table);
        if (member) sum += 1.0L / static_cast<long double>(a);
    }
    est.value = static_cast<double>(sum);
    return est;
}

SumEstimate harmonic_sum_smooth(const FamilySpec& spec, int j, std::uint64_t y,
                                std::uint64_t cutoff, const SpfTable& table) {
    if (j < 1 || j > spec.m()) throw std::invalid_argument("class index out of range");
    if (y < 2) throw std::invalid_argument("y must be at least 2");

    SumEstimate est;
    est.divergence = Divergence::converges; // finite y keeps every smooth sum finite

    if (per_prime_kind(spec.kind())) {
        long double value = 1.0L;
        long double trunc = 0.0L;
        std::size_t factors = 0;
        for (std::uint64_t p : primes_below(y)) {
            value *= exponent_series(spec, j, p, &trunc);
            ++factors;
        }
        est.value = static_cast<double>(value);
        est.cutoff = NO_CUTOFF;
        // series truncation plus one rounding ulp per factor and the final
        // double conversion
        est.tail_bound = static_cast<double>(trunc * value) +
                         est.value * (static_cast<double>(factors) * 1e-18 + 3e-16);
        est.note = "finite product over primes <= y";
        return est;
    }

    // Table-backed kinds: direct sum over y-smooth members up to the cutoff.
    if (spec.kind() == FamilyKind::primitive_pair) {
        const auto& part = spec.primitive_pair_params().partition[static_cast<std::size_t>(j) - 1];
        long double sum = 1.0L;
        long double tail = 0.0L;
        for (std::uint64_t s : part) {
            if (s > table.limit())
                throw std::out_of_range("primitive sequence entry exceeds sieve limit");
            if (factorize(s, table).p_plus() > y) continue;
            if (s <= cutoff)
                sum += 1.0L / static_cast<long double>(s);
            else
                tail += 1.0L / static_cast<long double>(s);
        }
        est.value = static_cast<double>(sum);
        est.cutoff = cutoff;
        est.tail_bound = static_cast<double>(tail);
        return est;
    }

    const auto& params = spec.oracle_table_params();
    std::uint64_t top = std::min(cutoff, params.bound);
    if (top > table.limit()) throw std::out_of_range("cutoff exceeds sieve limit");
    long double sum = 0.0L;
    for (std::uint64_t a : params.classes[static_cast<std::size_t>(j) - 1]) {
        if (a > top) break;
        if (factorize(a, table).p_plus() <= y) sum += 1.0L / static_cast<long double>(a);
    }
    est.value = static_cast<double>(sum);
    est.cutoff = top;
    est.tail_bound = cutoff >= params.bound
                         ? std::optional<double>(0.0)
                         : std::nullopt; // table exhausted vs genuinely truncated
    est.divergence = Divergence::unknown;
    est.note = "membership known only up to the table bound";
    return est;
}

SumEstimate euler_harmonic(const FamilySpec& spec, int j, std::uint64_t prime_limit) {
    if (!per_prime_kind(spec.kind()))
        throw std::invalid_argument("euler_harmonic: unsupported family kind " +
                                    std::string(to_string(spec.kind())));
    if (j < 1 || j > spec.m()) throw std::invalid_argument("class index out of range");
    if (prime_limit < 2) throw std::invalid_argument("prime_limit must be at least 2");

    SumEstimate est;
    std::string reason;
    est.divergence = classify_harmonic(spec, j, &reason);

    if (finite_prime_support(spec, j)) {
        // Exact finite product over the explicit primes of the class.
        const auto& cls = spec.prime_partition_params().classes[static_cast<std::size_t>(j) - 1];
        long double value = 1.0L;
        for (std::uint64_t p : cls)
            value *= static_cast<long double>(p) / (static_cast<long double>(p) - 1.0L);
        est.value = static_cast<double>(value);
        est.cutoff = NO_CUTOFF;
        est.tail_bound = est.value * (static_cast<double>(cls.size()) * 1e-18 + 3e-16);
        est.note = "exact finite Euler product (" + reason + ")";
        return est;
    }

    auto primes = primes_below(prime_limit);
    long double value = 1.0L;
    long double series_trunc = 0.0L;
    long double partial_prime_sum = 0.0L; // sum of 1/p over class primes, for the note
    for (std::uint64_t p : primes) {
        long double f = exponent_series(spec, j, p, &series_trunc);
        if (f > 1.0L && spec.kind() != FamilyKind::digit_split_pair)
            partial_prime_sum += 1.0L / static_cast<long double>(p);
        value *= f;
    }
    est.cutoff = prime_limit;

    if (est.divergence != Divergence::converges) {
        est.value = static_cast<double>(value);
        est.note = reason + "; partial product over primes <= " + std::to_string(prime_limit);
        if (partial_prime_sum > 0.0L)
            est.note += " (partial sum of 1/p over class primes = " +
                        std::to_string(static_cast<double>(partial_prime_sum)) + ")";
        return est;
    }

    if (spec.kind() != FamilyKind::digit_split_pair)
        throw std::logic_error("euler_harmonic: unexpected convergent kind");

    // Convergent with unbounded prime support: only the digit-split classes.
    // Complete the product analytically: for p > prime_limit the factor is
    // sum_{e in E} p^-e with smallest positive exponent >= 2, so
    //   log tail = sum_{a in bases} sum_t (-1)^(t+1)/t (P(a t) - S_{a t}(P))
    // with P the prime zeta function and S_k(P) the finite prime-power sum
    // below the limit. Everything here is known to far better than 1e-12.
    long double log_tail = 0.0L;
    for (std::uint32_t base : digit_exponent_bases(j)) {
        for (std::uint32_t t = 1; base * t <= 80; ++t) {
            long double s = static_cast<long double>(base) * t;
            long double below = 0.0L;
            for (std::uint64_t p : primes) below += powl(static_cast<long double>(p), -s);
            long double over = prime_zeta(s) - below;
            log_tail += (t % 2 == 1 ? 1.0L : -1.0L) / static_cast<long double>(t) * over;
        }
    }
    // Uncertainty: prime-zeta evaluation and product rounding, taken with wide
    // margins, plus the truncated parts of the exponent series.
    long double uncertainty = 1e-13L + 1e-12L * fabsl(log_tail) +
                              static_cast<long double>(primes.size()) * 1e-18L + series_trunc;
    long double low = value * expl(log_tail - uncertainty);
    long double high = value * expl(log_tail + uncertainty);
    est.value = static_cast<double>(low);
    est.tail_bound = static_cast<double>(high - low) + 4e-16 * est.value;
    est.note = "product over primes <= " + std::to_string(prime_limit) +
               " completed with a prime-zeta tail";
    return est;
}

VerificationReport euler_identity_check(const FamilySpec& spec, std::uint64_t y,
                                        std::uint64_t cutoff, const SpfTable& table) {
    if (!spec.covers_naturals())
        throw std::invalid_argument("euler_identity_check: family must cover the naturals");

    double lhs = 1.0 / mertens_product(y);
    long double rhs = 1.0L;
    double tail = 0.0;
    bool tails_known = true;
    std::vector<double> factors;
    for (int j = 1; j <= spec.m(); ++j) {
        SumEstimate s = harmonic_sum_smooth(spec, j, y, cutoff, table);
        factors.push_back(s.value);
        rhs *= static_cast<long double>(s.value);
        if (s.tail_bound)
            tail += *s.tail_bound; // factors exceed 1 only mildly; scaled below
        else
            tails_known = false;
    }
    double rhs_d = static_cast<double>(rhs);
    // propagate factor tails through the product and allow for rounding on
    // both sides
    double tol = tail * std::max(1.0, rhs_d) + 1e-12 * (lhs + rhs_d);
    double diff = std::abs(lhs - rhs_d);

    VerificationReport report;
    report.check = "euler_identity";
    report.params["family"] = spec.label();
    report.params["y"] = y;
    report.params["cutoff"] = cutoff;
    report.pass = tails_known && diff <= tol;
    report.metrics["lhs"] = lhs;
    report.metrics["rhs"] = rhs_d;
    report.metrics["factors"] = factors;
    report.metrics["abs_diff"] = diff;
    report.metrics["tolerance"] = tol;
    report.metrics["tails_known"] = tails_known;
    if (!report.pass) {
        report.counterexample = ordered_json::object();
        report.counterexample["lhs"] = lhs;
        report.counterexample["rhs"] = rhs_d;
    }
    return report;
}

DensityPrediction smooth_class_density(const FamilySpec& spec, int i, std::uint64_t y,
                                       std::uint64_t cutoff, const SpfTable& table) {
    if (i < 1 || i > spec.m()) throw std::invalid_argument("class index out of range");
    if (!spec.covers_naturals())
        throw std::invalid_argument("smooth_class_density: family must cover the naturals");

    DensityPrediction pred;
    pred.family = spec.label();
    pred.class_index = i;
    pred.y = y;
    pred.mode = DensityMode::smooth_upper;

    double mert = mertens_product(y);
    SumEstimate own = harmonic_sum_smooth(spec, i, y, cutoff, table);
    double tail_product = mert * own.tail_bound.value_or(0.0) + 2e-16 * mert * own.value;
    pred.route_product = mert * own.value;

    long double inv = 1.0L;
    double rel_tail = 0.0;
    bool tails_known = own.tail_bound.has_value();
    for (int j = 1; j <= spec.m(); ++j) {
        if (j == i) continue;
        SumEstimate s = harmonic_sum_smooth(spec, j, y, cutoff, table);
        inv /= static_cast<long double>(s.value);
        if (s.tail_bound)
            rel_tail += *s.tail_bound / s.value;
        else
            tails_known = false;
        rel_tail += 2e-16;
    }
    pred.route_inverse = static_cast<double>(inv);
    double tail_inverse = pred.route_inverse * rel_tail;

    pred.predicted = 0.5 * (pred.route_product + pred.route_inverse);
    if (tails_known) pred.tail_bound = tail_product + tail_inverse;
    pred.note = "route discrepancy " + std::to_string(std::abs(pred.route_product - pred.route_inverse));
    return pred;
}

namespace {

// H(class j) evaluated within the budget: Euler product for structured kinds,
// direct table sums otherwise.
SumEstimate harmonic_within_budget(const FamilySpec& spec, int j, const EvalBudget& budget) {
    if (per_prime_kind(spec.kind())) return euler_harmonic(spec, j, budget.prime_limit);

    SumEstimate est;
    if (spec.kind() == FamilyKind::primitive_pair) {
        const auto& part = spec.primitive_pair_params().partition[static_cast<std::size_t>(j) - 1];
        long double sum = 1.0L;
        for (std::uint64_t s : part) sum += 1.0L / static_cast<long double>(s);
        est.value = static_cast<double>(sum);
        est.cutoff = NO_CUTOFF;
        est.tail_bound = 3e-16 * est.value;
        est.divergence = Divergence::converges;
        est.note = "exact sum over the finite member list";
        return est;
    }
    const auto& params = spec.oracle_table_params();
    std::uint64_t top = std::min(budget.cutoff, params.bound);
    long double sum = 0.0L;
    for (std::uint64_t a : params.classes[static_cast<std::size_t>(j) - 1]) {
        if (a > top) break;
        sum += 1.0L / static_cast<long double>(a);
    }
    est.value = static_cast<double>(sum);
    est.cutoff = top;
    est.divergence = Divergence::unknown;
    est.note = "truncated sum over the oracle table";
    return est;
}

} // namespace

DensityPrediction predicted_density(const FamilySpec& spec, int i, const EvalBudget& budget) {
    if (i < 1 || i > spec.m()) throw std::invalid_argument("class index out of range");
    if (!spec.covers_naturals())
        throw std::invalid_argument("predicted_density: family must cover the naturals");

    DensityPrediction pred;
    pred.family = spec.label();
    pred.class_index = i;
    pred.mode = DensityMode::limit;

    long double product = 1.0L;
    double rel_tail = 0.0;
    bool tails_known = true;
    bool divergence_unknown = false;
    for (int j = 1; j <= spec.m(); ++j) {
        if (j == i) continue;
        SumEstimate h = harmonic_within_budget(spec, j, budget);
        if (h.divergence == Divergence::diverges_heuristic) {
            pred.predicted = 0.0;
            pred.route_product = pred.route_inverse = 0.0;
            pred.tail_bound = 0.0;
            pred.note = "zero: H(class " + std::to_string(j) + ") diverges (" + h.note + ")";
            return pred;
        }
        if (h.divergence == Divergence::unknown) divergence_unknown = true;
        product /= static_cast<long double>(h.value);
        if (h.tail_bound)
            rel_tail += *h.tail_bound / h.value;
        else
            tails_known = false;
        rel_tail += 2e-16;
    }
    pred.predicted = static_cast<double>(product);
    pred.route_product = pred.route_inverse = pred.predicted;
    if (tails_known && !divergence_unknown) pred.tail_bound = pred.predicted * rel_tail;
    pred.note = divergence_unknown
                    ? "divergence undecidable for table-backed classes; truncated sums used"
                    : "product of inverse harmonic sums";
    return pred;
}

DensityPrediction density_lower_bound(const FamilySpec& spec, int i, std::uint64_t y,
                                      const EvalBudget& budget, const SpfTable& table) {
    if (i < 1 || i > spec.m()) throw std::invalid_argument("class index out of range");
    if (!spec.covers_naturals())
        throw std::invalid_argument("density_lower_bound: family must cover the naturals");

    DensityPrediction pred;
    pred.family = spec.label();
    pred.class_index = i;
    pred.y = y;
    pred.mode = DensityMode::lower_bound;

    DensityPrediction smooth = smooth_class_density(spec, i, y, budget.cutoff, table);
    double d_iy = smooth.predicted;

    long double h_product = 1.0L;
    double rel_tail = 0.0;
    bool tails_known = smooth.tail_bound.has_value();
    for (int j = 1; j <= spec.m(); ++j) {
        if (j == i) continue;
        SumEstimate h = harmonic_within_budget(spec, j, budget);
        if (h.divergence == Divergence::diverges_heuristic) {
            pred.mode = DensityMode::vacuous;
            pred.predicted = -std::numeric_limits<double>::infinity();
            pred.route_product = pred.route_inverse = pred.predicted;
            pred.note = "vacuous: H(class " + std::to_string(j) + ") diverges (" + h.note + ")";
            return pred;
        }
        h_product *= static_cast<long double>(h.value);
        if (h.tail_bound)
            rel_tail += *h.tail_bound / h.value;
        else
            tails_known = false;
        rel_tail += 2e-16;
    }
    double hp = static_cast<double>(h_product);
    pred.predicted = d_iy + 1.0 - d_iy * hp;
    pred.route_product = pred.route_inverse = pred.predicted;
    if (tails_known) {
        double tail_d = smooth.tail_bound.value_or(0.0);
        pred.tail_bound = tail_d * std::abs(1.0 - hp) + d_iy * hp * rel_tail + 4e-16;
    }
    pred.note = "smooth-relaxed density " + std::to_string(d_iy) + ", harmonic product " +
                std::to_string(hp);
    return pred;
}

double empirical_density(const FamilySpec& spec, int i, std::uint64_t x, const SpfTable& table,
                         unsigned threads) {
    if (x == 0) throw std::invalid_argument("x must be positive");
    return static_cast<double>(count_members(spec, i, x, table, threads)) /
           static_cast<double>(x);
}

} // namespace dflab
