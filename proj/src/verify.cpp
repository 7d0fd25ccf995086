#include "dflab/verify.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace dflab {

namespace {

using nlohmann::ordered_json;

ordered_json uint_array(std::span<const std::uint64_t> xs) {
    ordered_json out = ordered_json::array();
    for (auto x : xs) out.push_back(x);
    return out;
}

// Ordered member tuples of divisors of n, capped; membership via the fast
// lookup when the family kind allows it.
struct TupleEnumerator {
    const FamilySpec& spec;
    const SpfTable& table;
    const ClassLookup& lookup;
    bool fast;

    bool member(int j, std::uint64_t d) const {
        if (d == 1) return true;
        return fast ? lookup.member(d, j, table) : membership(spec, j, d, table);
    }

    void run(std::uint64_t rem, int j, std::vector<std::uint64_t>& parts,
             std::vector<std::vector<std::uint64_t>>& found, std::size_t cap) const {
        int m = spec.m();
        if (found.size() >= cap) return;
        if (j == m) {
            if (member(m, rem)) {
                parts[static_cast<std::size_t>(m) - 1] = rem;
                found.push_back(parts);
            }
            return;
        }
        auto f = factorize(rem, table);
        std::vector<std::uint64_t> divisors{1};
        for (const auto& pp : f.factors()) {
            std::size_t count = divisors.size();
            std::uint64_t power = 1;
            for (std::uint32_t e = 1; e <= pp.exponent; ++e) {
                power *= pp.prime;
                for (std::size_t k = 0; k < count; ++k)
                    divisors.push_back(divisors[k] * power);
            }
        }
        std::sort(divisors.begin(), divisors.end());
        for (std::uint64_t d : divisors) {
            if (found.size() >= cap) return;
            if (!member(j, d)) continue;
            parts[static_cast<std::size_t>(j) - 1] = d;
            run(rem / d, j + 1, parts, found, cap);
        }
    }

    std::vector<std::vector<std::uint64_t>> tuples(std::uint64_t n, std::size_t cap) const {
        std::vector<std::vector<std::uint64_t>> found;
        std::vector<std::uint64_t> parts(static_cast<std::size_t>(spec.m()), 1);
        if (n == 1) {
            found.push_back(parts);
            return found;
        }
        run(n, 1, parts, found, cap);
        return found;
    }
};

} // namespace

// Largest range checked exhaustively; past it the scan keeps the full prefix
// and adds a deterministic evenly spaced sample (no randomness anywhere).
constexpr std::uint64_t EXHAUSTIVE_UNIQUENESS_LIMIT = 1000000;

VerificationReport verify_unique_decomposition(const FamilySpec& spec, std::uint64_t N,
                                               const SpfTable& table, unsigned threads) {
    if (!spec.covers_naturals())
        throw std::invalid_argument("verify_unique_decomposition: family must cover the naturals");
    if (N < 1) throw std::invalid_argument("N must be positive");
    if (N > table.limit()) throw std::out_of_range("N exceeds sieve limit");
    if (spec.m() > 6)
        throw std::invalid_argument("exhaustive tuple enumeration is capped at m <= 6");

    std::uint64_t prefix = std::min(N, EXHAUSTIVE_UNIQUENESS_LIMIT);
    std::uint64_t stride =
        N > prefix ? std::max<std::uint64_t>(1, (N - prefix) / EXHAUSTIVE_UNIQUENESS_LIMIT) : 0;
    std::uint64_t sampled = stride ? (N - prefix + stride - 1) / stride : 0;
    std::uint64_t candidates = prefix + sampled;
    auto candidate = [&](std::uint64_t idx) {
        return idx < prefix ? idx + 1 : prefix + 1 + (idx - prefix) * stride;
    };

    ClassLookup lookup(spec, table);
    TupleEnumerator en{spec, table, lookup, lookup.per_prime() && lookup.unambiguous()};

    struct Failure {
        std::uint64_t n;
        std::string what;
    };
    std::mutex mu;
    std::optional<Failure> first_failure;
    std::atomic<std::uint64_t> best_failure{P_MINUS_INFINITY};
    auto record = [&](std::uint64_t n, std::string what) {
        std::uint64_t seen = best_failure.load();
        while (n < seen && !best_failure.compare_exchange_weak(seen, n)) {
        }
        std::lock_guard<std::mutex> lock(mu);
        if (!first_failure || n < first_failure->n) first_failure = Failure{n, std::move(what)};
    };

    unsigned nthreads = std::max(1u, threads);
    std::uint64_t chunk = std::max<std::uint64_t>(candidates / (nthreads * 32) + 1, 512);
    std::atomic<std::uint64_t> next{0};

    auto work = [&]() {
        for (;;) {
            std::uint64_t lo = next.fetch_add(chunk);
            if (lo >= candidates) break;
            std::uint64_t hi = std::min(candidates - 1, lo + chunk - 1);
            if (best_failure.load(std::memory_order_relaxed) < candidate(lo)) continue;
            for (std::uint64_t idx = lo; idx <= hi; ++idx) {
                std::uint64_t n = candidate(idx);
                if (n > N) break;
                if (best_failure.load(std::memory_order_relaxed) < n) break;
                auto tuples = en.tuples(n, 2);
                if (tuples.size() != 1) {
                    record(n, tuples.empty() ? "no member tuple" : "multiple member tuples");
                    continue;
                }
                try {
                    auto direct = decompose(spec, n, table);
                    if (direct.parts != tuples.front())
                        record(n, "enumerated tuple disagrees with decompose");
                } catch (const std::exception& e) {
                    record(n, std::string("decompose failed: ") + e.what());
                }
            }
        }
    };
    if (nthreads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    VerificationReport report;
    report.check = "unique_decomposition";
    report.params["family"] = spec.label();
    report.params["limit"] = N;
    report.pass = !first_failure;
    report.metrics["checked"] = candidates;
    report.metrics["mode"] = stride ? "exhaustive+sampled" : "exhaustive";
    if (stride) report.metrics["sample_stride"] = stride;
    if (first_failure) {
        auto witnesses = en.tuples(first_failure->n, 8);
        report.counterexample = ordered_json::object();
        report.counterexample["n"] = first_failure->n;
        report.counterexample["reason"] = first_failure->what;
        report.counterexample["tuples"] = witnesses;
    }
    return report;
}

VerificationReport verify_smooth_injection(const FamilySpec& spec, int i, std::uint64_t y,
                                           std::uint64_t N, const SpfTable& table) {
    if (N > table.limit()) throw std::out_of_range("N exceeds sieve limit");

    VerificationReport report;
    report.check = "smooth_injection_injective";
    report.params["family"] = spec.label();
    report.params["class_index"] = i;
    report.params["y"] = y;
    report.params["limit"] = N;

    std::unordered_map<std::uint64_t, std::uint64_t> image_of;
    std::uint64_t members = 0;
    for (std::uint64_t a = 1; a <= N; ++a) {
        if (!membership(spec, i, a, table)) continue;
        ++members;
        std::uint64_t img = smooth_injection(spec, i, y, a, table);
        if (!membership(spec, i, smooth_part(img, y, table), table)) {
            report.pass = false;
            report.counterexample = ordered_json::object();
            report.counterexample["a"] = a;
            report.counterexample["image"] = img;
            report.counterexample["reason"] = "image not in the smooth-relaxed class";
            report.metrics["members"] = members;
            return report;
        }
        auto [it, inserted] = image_of.emplace(img, a);
        if (!inserted) {
            report.pass = false;
            report.counterexample = ordered_json::object();
            report.counterexample["a"] = it->second;
            report.counterexample["a_prime"] = a;
            report.counterexample["image"] = img;
            report.counterexample["reason"] = "collision";
            report.metrics["members"] = members;
            return report;
        }
    }
    report.pass = true;
    report.metrics["members"] = members;
    report.metrics["images"] = image_of.size();
    return report;
}

VerificationReport verify_count_inequality(const FamilySpec& spec, int i, std::uint64_t y,
                                           std::span<const std::uint64_t> xs,
                                           const SpfTable& table, unsigned threads) {
    if (xs.empty()) throw std::invalid_argument("xs must be nonempty");
    auto members = count_members_at(spec, i, xs, table, threads);
    auto relaxed = count_smooth_relaxed_at(spec, i, y, xs, table, threads);

    VerificationReport report;
    report.check = "count_inequality";
    report.params["family"] = spec.label();
    report.params["class_index"] = i;
    report.params["y"] = y;
    report.params["xs"] = uint_array(xs);
    report.pass = true;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        if (members[k] > relaxed[k]) {
            report.pass = false;
            report.counterexample = ordered_json::object();
            report.counterexample["x"] = xs[k];
            report.counterexample["members"] = members[k];
            report.counterexample["smooth_relaxed"] = relaxed[k];
            break;
        }
    }
    report.metrics["members"] = members;
    report.metrics["smooth_relaxed"] = relaxed;
    return report;
}

VerificationReport verify_signature_partition(const FamilySpec& spec, int i, std::uint64_t N,
                                              const SpfTable& table) {
    VerificationReport report;
    report.check = "signature_partition";
    report.params["family"] = spec.label();
    report.params["class_index"] = i;
    report.params["limit"] = N;

    std::map<std::vector<int>, std::uint64_t> fibers;
    std::uint64_t members = 0;
    for (std::uint64_t k = 1; k <= N; ++k) {
        auto sig = signature_set(spec, i, k, table);
        bool is_member = membership(spec, i, k, table); // independent route
        if (sig.empty() != is_member) {
            report.pass = false;
            report.counterexample = ordered_json::object();
            report.counterexample["k"] = k;
            report.counterexample["signature"] = sig;
            report.counterexample["membership"] = is_member;
            return report;
        }
        if (sig.empty())
            ++members;
        else
            ++fibers[sig];
    }
    std::uint64_t fiber_total = 0;
    ordered_json fiber_json = ordered_json::object();
    for (const auto& [sig, count] : fibers) {
        std::ostringstream key;
        for (std::size_t t = 0; t < sig.size(); ++t) key << (t ? "," : "") << sig[t];
        fiber_json[key.str()] = count;
        fiber_total += count;
    }
    report.pass = members + fiber_total == N;
    report.metrics["members"] = members;
    report.metrics["fiber_total"] = fiber_total;
    report.metrics["fibers"] = fiber_json;
    if (!report.pass) {
        report.counterexample = ordered_json::object();
        report.counterexample["reason"] = "fibers and members do not cover the range";
    }
    return report;
}

VerificationReport verify_squeeze(const FamilySpec& spec, int i,
                                  std::span<const std::uint64_t> ys,
                                  std::span<const std::uint64_t> xs, double slack,
                                  const EvalBudget& budget, const SpfTable& table,
                                  unsigned threads) {
    if (ys.empty() || xs.empty()) throw std::invalid_argument("ys and xs must be nonempty");
    for (std::size_t k = 1; k < ys.size(); ++k) {
        if (ys[k] <= ys[k - 1]) throw std::invalid_argument("ys must be strictly ascending");
    }

    auto counts = count_members_at(spec, i, xs, table, threads);
    std::vector<double> empiricals;
    for (std::size_t k = 0; k < xs.size(); ++k)
        empiricals.push_back(static_cast<double>(counts[k]) / static_cast<double>(xs[k]));
    double empirical = empiricals.back();

    std::vector<double> uppers, lowers;
    bool vacuous = false;
    for (std::uint64_t y : ys) {
        uppers.push_back(smooth_class_density(spec, i, y, budget.cutoff, table).predicted);
        DensityPrediction lo = density_lower_bound(spec, i, y, budget, table);
        vacuous = lo.mode == DensityMode::vacuous;
        lowers.push_back(lo.predicted);
    }

    VerificationReport report;
    report.check = "squeeze";
    report.params["family"] = spec.label();
    report.params["class_index"] = i;
    report.params["ys"] = uint_array(ys);
    report.params["xs"] = uint_array(xs);
    report.params["slack"] = slack;
    report.pass = true;

    auto fail = [&](std::uint64_t y, const char* reason, double lhs, double rhs) {
        report.pass = false;
        if (!report.counterexample.is_null()) return;
        report.counterexample = ordered_json::object();
        report.counterexample["y"] = y;
        report.counterexample["reason"] = reason;
        report.counterexample["lhs"] = lhs;
        report.counterexample["rhs"] = rhs;
    };

    constexpr double MONOTONE_EPS = 1e-12;
    for (std::size_t k = 0; k < ys.size(); ++k) {
        if (empirical > uppers[k] + slack)
            fail(ys[k], "empirical above smooth upper bound", empirical, uppers[k]);
        if (!vacuous && empirical < lowers[k] - slack)
            fail(ys[k], "empirical below lower bound", empirical, lowers[k]);
        if (k > 0) {
            if (uppers[k] > uppers[k - 1] + MONOTONE_EPS)
                fail(ys[k], "upper bounds not nonincreasing", uppers[k], uppers[k - 1]);
            if (!vacuous && lowers[k] < lowers[k - 1] - MONOTONE_EPS)
                fail(ys[k], "lower bounds not nondecreasing", lowers[k], lowers[k - 1]);
        }
    }
    report.metrics["empirical"] = empiricals;
    report.metrics["uppers"] = uppers;
    report.metrics["lowers"] = vacuous ? ordered_json("vacuous") : ordered_json(lowers);
    return report;
}

VerificationReport verify_pair_for_subset(const FamilySpec& pair_spec, std::uint64_t N) {
    if (pair_spec.kind() != FamilyKind::primitive_pair)
        throw std::invalid_argument("verify_pair_for_subset: spec must be a primitive_pair");
    const auto& params = pair_spec.primitive_pair_params();

    std::vector<std::uint64_t> s_prime{1};
    for (std::uint64_t s : params.sequence)
        if (s <= N) s_prime.push_back(s);

    std::vector<std::uint64_t> left{1}, right{1};
    left.insert(left.end(), params.partition[0].begin(), params.partition[0].end());
    right.insert(right.end(), params.partition[1].begin(), params.partition[1].end());

    VerificationReport report;
    report.check = "pair_for_subset";
    report.params["family"] = pair_spec.label();
    report.params["limit"] = N;
    report.pass = true;

    std::uint64_t checked = 0;
    for (std::uint64_t s : s_prime) {
        std::vector<std::pair<std::uint64_t, std::uint64_t>> reps;
        for (std::uint64_t a : left) {
            if (a > s || s % a != 0) continue;
            std::uint64_t b = s / a;
            if (std::binary_search(right.begin(), right.end(), b)) reps.emplace_back(a, b);
        }
        ++checked;
        if (reps.size() != 1) {
            report.pass = false;
            report.counterexample = ordered_json::object();
            report.counterexample["s"] = s;
            report.counterexample["representations"] = reps;
            break;
        }
    }
    report.metrics["checked"] = checked;
    return report;
}

// ---------------------------------------------------------------------------
// self factor pair search
// ---------------------------------------------------------------------------

namespace {

struct RepConflict {
    unsigned exponent = 0;
    std::size_t count = 0; // 0 = unrepresentable, >= 2 = ambiguous
    std::vector<std::pair<unsigned, unsigned>> pairs;
};

std::vector<std::pair<unsigned, unsigned>> representations(const std::vector<int>& state,
                                                           unsigned e, bool ordered) {
    std::vector<std::pair<unsigned, unsigned>> reps;
    for (unsigned a = 0; a <= e / 2; ++a) {
        unsigned b = e - a;
        if (state[a] == 1 && state[b] == 1) {
            reps.emplace_back(a, b);
            if (ordered && a != b) reps.emplace_back(b, a);
        }
    }
    return reps;
}

// Checks the assignment of exponents 1..depth. Representation counts are
// final for e <= depth and may only grow for e > depth, so a partial count of
// two already closes the branch.
std::optional<RepConflict> find_conflict(const std::vector<int>& state, unsigned depth,
                                         unsigned max_exponent, bool ordered) {
    for (unsigned e = 0; e <= max_exponent; ++e) {
        auto reps = representations(state, e, ordered);
        if (e <= depth && reps.empty()) return RepConflict{e, 0, {}};
        if (reps.size() >= 2) return RepConflict{e, reps.size(), reps};
    }
    return std::nullopt;
}

std::string pair_list(const std::vector<std::pair<unsigned, unsigned>>& pairs) {
    std::ostringstream os;
    for (std::size_t k = 0; k < pairs.size() && k < 4; ++k)
        os << (k ? ", " : "") << "(" << pairs[k].first << "," << pairs[k].second << ")";
    if (pairs.size() > 4) os << ", ...";
    return os.str();
}

std::string describe_branch(unsigned exponent, bool in_set, const RepConflict& conflict) {
    std::ostringstream os;
    os << (in_set ? "including " : "excluding ") << exponent;
    if (conflict.count == 0) {
        os << " leaves exponent " << conflict.exponent << " with no representation";
    } else {
        os << " gives exponent " << conflict.exponent << " " << conflict.count
           << " representations: " << pair_list(conflict.pairs);
    }
    return os.str();
}

// Plain DFS fallback for the (unreached in practice) case where neither
// branch of some exponent closes immediately.
bool dfs_satisfiable(std::vector<int>& state, unsigned depth, unsigned max_exponent,
                     bool ordered) {
    if (find_conflict(state, depth, max_exponent, ordered)) return false;
    if (depth == max_exponent) return true;
    for (int v : {1, 0}) {
        state[depth + 1] = v;
        if (dfs_satisfiable(state, depth + 1, max_exponent, ordered)) {
            state[depth + 1] = -1;
            return true;
        }
    }
    state[depth + 1] = -1;
    return false;
}

} // namespace

RefutationCertificate search_self_factor_pair(unsigned max_exponent, bool ordered_pairs) {
    if (max_exponent < 1) throw std::invalid_argument("max_exponent must be positive");

    RefutationCertificate cert;
    cert.ordered_pairs = ordered_pairs;
    cert.max_exponent = max_exponent;

    std::vector<int> state(max_exponent + 1, -1);
    state[0] = 1; // 1 is always a member

    for (unsigned d = 1; d <= max_exponent; ++d) {
        state[d] = 1;
        auto conflict_in = find_conflict(state, d, max_exponent, ordered_pairs);
        state[d] = 0;
        auto conflict_out = find_conflict(state, d, max_exponent, ordered_pairs);

        if (conflict_in && conflict_out) {
            cert.status = RefutationCertificate::Status::unsat;
            cert.conflict_exponent = d;
            cert.conflict_depth = std::max(conflict_in->exponent, conflict_out->exponent);
            cert.conflict_detail = describe_branch(d, true, *conflict_in) + "; " +
                                   describe_branch(d, false, *conflict_out);
            return cert;
        }
        if (conflict_in) {
            state[d] = 0;
            cert.decisions.push_back({d, false, describe_branch(d, true, *conflict_in)});
        } else if (conflict_out) {
            state[d] = 1;
            cert.decisions.push_back({d, true, describe_branch(d, false, *conflict_out)});
        } else {
            // Neither branch closes immediately; settle the horizon by search.
            state[d] = -1;
            bool sat = dfs_satisfiable(state, d - 1, max_exponent, ordered_pairs);
            cert.status = sat ? RefutationCertificate::Status::inconclusive
                              : RefutationCertificate::Status::unsat;
            cert.conflict_detail = sat ? "branching found an assignment consistent to the horizon"
                                       : "closed by exhaustive branching (no forced chain)";
            cert.conflict_depth = max_exponent;
            return cert;
        }
    }
    cert.status = RefutationCertificate::Status::inconclusive;
    cert.conflict_detail = "forced chain is consistent up to the horizon";
    return cert;
}

bool replay_certificate(const RefutationCertificate& cert, std::string* why) {
    auto reject = [&](const std::string& reason) {
        if (why) *why = reason;
        return false;
    };

    std::vector<int> state(cert.max_exponent + 1, -1);
    state[0] = 1;
    unsigned depth = 0;
    for (std::size_t k = 0; k < cert.decisions.size(); ++k) {
        const auto& dec = cert.decisions[k];
        if (dec.exponent != k + 1)
            return reject("decisions are not consecutive from exponent 1");
        state[dec.exponent] = dec.in_set ? 0 : 1; // opposite branch must conflict
        if (!find_conflict(state, dec.exponent, cert.max_exponent, cert.ordered_pairs))
            return reject("opposite branch of exponent " + std::to_string(dec.exponent) +
                          " does not conflict");
        state[dec.exponent] = dec.in_set ? 1 : 0;
        if (find_conflict(state, dec.exponent, cert.max_exponent, cert.ordered_pairs))
            return reject("chosen branch of exponent " + std::to_string(dec.exponent) +
                          " conflicts");
        depth = dec.exponent;
    }

    if (cert.status == RefutationCertificate::Status::unsat) {
        if (!cert.conflict_exponent)
            return reject("unsat certificate lacks a terminal conflict exponent");
        unsigned d = *cert.conflict_exponent;
        if (d != depth + 1) return reject("terminal conflict does not follow the decisions");
        unsigned deepest = 0;
        for (int v : {1, 0}) {
            state[d] = v;
            auto conflict = find_conflict(state, d, cert.max_exponent, cert.ordered_pairs);
            if (!conflict)
                return reject("terminal branch " + std::to_string(v) + " does not conflict");
            deepest = std::max(deepest, conflict->exponent);
        }
        if (deepest != cert.conflict_depth)
            return reject("conflict depth does not match the replayed conflicts");
        return true;
    }

    // Inconclusive: chain must be consistent and complete to the horizon.
    if (depth != cert.max_exponent)
        return reject("inconclusive certificate does not reach the horizon");
    return true;
}

nlohmann::ordered_json RefutationCertificate::to_json() const {
    ordered_json out;
    out["status"] = status == Status::unsat ? "unsat" : "inconclusive";
    out["ordered_pairs"] = ordered_pairs;
    out["max_exponent"] = max_exponent;
    ordered_json decs = ordered_json::array();
    for (const auto& d : decisions) {
        ordered_json dec;
        dec["exponent"] = d.exponent;
        dec["in_set"] = d.in_set;
        dec["reason"] = d.reason;
        decs.push_back(dec);
    }
    out["decisions"] = decs;
    out["conflict_exponent"] =
        conflict_exponent ? ordered_json(*conflict_exponent) : ordered_json(nullptr);
    out["conflict_detail"] = conflict_detail;
    out["conflict_depth"] = conflict_depth;
    return out;
}

} // namespace dflab
