#include "dflab/family.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace dflab {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

bool sorted_contains(const std::vector<std::uint64_t>& v, std::uint64_t x) {
    return std::binary_search(v.begin(), v.end(), x);
}

std::vector<std::uint64_t> coprime_residues(std::uint64_t q) {
    std::vector<std::uint64_t> out;
    for (std::uint64_t r = 1; r < q; ++r) {
        if (std::gcd(r, q) == 1) out.push_back(r);
    }
    return out;
}

int residue_class_index(const ResidueClassesParams& params, std::uint64_t residue) {
    auto it = std::lower_bound(params.residues.begin(), params.residues.end(), residue);
    if (it == params.residues.end() || *it != residue) return 0;
    return static_cast<int>(it - params.residues.begin()) + 1;
}

// Class membership of a single prime power, per-class semantics. Tolerates
// overlapping explicit prime lists (each class answers independently).
bool prime_power_in_class(const FamilySpec& spec, std::uint64_t p, std::uint32_t e, int i) {
    switch (spec.kind()) {
    case FamilyKind::prime_partition: {
        const auto& params = spec.prime_partition_params();
        bool listed_anywhere = false;
        for (const auto& cls : params.classes) {
            if (sorted_contains(cls, p)) {
                listed_anywhere = true;
                break;
            }
        }
        if (sorted_contains(params.classes[static_cast<std::size_t>(i) - 1], p)) return true;
        return !listed_anywhere && i == params.default_class;
    }
    case FamilyKind::residue_classes: {
        const auto& params = spec.residue_classes_params();
        if (params.modulus % p == 0)
            return !params.coprime_only && i == params.divisor_class;
        return residue_class_index(params, p % params.modulus) == i;
    }
    case FamilyKind::quadratic_degree: {
        int chi = kronecker_symbol(spec.quadratic_degree_params().discriminant, p);
        return (chi >= 0 ? 1 : 2) == i;
    }
    case FamilyKind::digit_split_pair:
        return i == 1 ? (e & ODD_POSITION_MASK) == 0 : (e & EVEN_POSITION_MASK) == 0;
    default:
        throw std::logic_error("prime_power_in_class: not a per-prime kind");
    }
}

// The unique class owning prime p, for per-prime kinds that route whole prime
// powers (everything but digit_split). Returns 0 if none, -1 if ambiguous.
int unique_class_of_prime(const FamilySpec& spec, std::uint64_t p) {
    switch (spec.kind()) {
    case FamilyKind::prime_partition: {
        const auto& params = spec.prime_partition_params();
        int found = 0;
        for (std::size_t j = 0; j < params.classes.size(); ++j) {
            if (sorted_contains(params.classes[j], p)) {
                if (found != 0) return -1;
                found = static_cast<int>(j) + 1;
            }
        }
        return found != 0 ? found : params.default_class;
    }
    case FamilyKind::residue_classes: {
        const auto& params = spec.residue_classes_params();
        if (params.modulus % p == 0) return params.coprime_only ? 0 : params.divisor_class;
        return residue_class_index(params, p % params.modulus);
    }
    case FamilyKind::quadratic_degree:
        return kronecker_symbol(spec.quadratic_degree_params().discriminant, p) >= 0 ? 1 : 2;
    default:
        throw std::logic_error("unique_class_of_prime: unsupported kind");
    }
}

void check_class_index(const FamilySpec& spec, int i) {
    if (i < 1 || i > spec.m())
        throw std::invalid_argument("class index " + std::to_string(i) + " out of range 1.." +
                                    std::to_string(spec.m()));
}

std::vector<std::uint64_t> sorted_unique(std::vector<std::uint64_t> v, const char* what) {
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end())
        throw std::invalid_argument(std::string(what) + " contains duplicates");
    return v;
}

// Enumeration of ordered member tuples of divisors multiplying to n; used by
// oracle decomposition. Stops once `cap` tuples were found.
void enumerate_member_tuples(const FamilySpec& spec, std::uint64_t rem, int j,
                             std::vector<std::uint64_t>& parts,
                             std::vector<DecompositionTuple>& found, std::size_t cap,
                             const SpfTable& table) {
    int m = spec.m();
    if (j == m) {
        if (membership(spec, m, rem, table)) {
            parts[static_cast<std::size_t>(m) - 1] = rem;
            std::uint64_t product = 1;
            for (auto part : parts) product *= part;
            found.push_back({product, parts});
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
            for (std::size_t k = 0; k < count; ++k) divisors.push_back(divisors[k] * power);
        }
    }
    std::sort(divisors.begin(), divisors.end());
    for (std::uint64_t d : divisors) {
        if (found.size() >= cap) return;
        if (!membership(spec, j, d, table)) continue;
        parts[static_cast<std::size_t>(j) - 1] = d;
        enumerate_member_tuples(spec, rem / d, j + 1, parts, found, cap, table);
    }
}

} // namespace

const char* to_string(FamilyKind kind) {
    switch (kind) {
    case FamilyKind::prime_partition: return "prime_partition";
    case FamilyKind::residue_classes: return "residue_classes";
    case FamilyKind::quadratic_degree: return "quadratic_degree";
    case FamilyKind::digit_split_pair: return "digit_split_pair";
    case FamilyKind::primitive_pair: return "primitive_pair";
    case FamilyKind::oracle_table: return "oracle_table";
    }
    return "?";
}

std::string FamilySpec::label() const {
    std::ostringstream os;
    os << to_string(kind_);
    switch (kind_) {
    case FamilyKind::prime_partition:
        os << "(m=" << m_ << ",default=" << prime_partition_params().default_class << ")";
        break;
    case FamilyKind::residue_classes:
        os << "(q=" << residue_classes_params().modulus
           << (residue_classes_params().coprime_only ? ",coprime_only" : "") << ")";
        break;
    case FamilyKind::quadratic_degree:
        os << "(D=" << quadratic_degree_params().discriminant << ")";
        break;
    case FamilyKind::digit_split_pair:
        break;
    case FamilyKind::primitive_pair:
        os << "(|S|=" << primitive_pair_params().sequence.size() << ")";
        break;
    case FamilyKind::oracle_table:
        os << "(bound=" << oracle_table_params().bound << ")";
        break;
    }
    return os.str();
}

bool FamilySpec::covers_naturals() const {
    switch (kind_) {
    case FamilyKind::primitive_pair: return false;
    case FamilyKind::residue_classes: return !residue_classes_params().coprime_only;
    default: return true;
    }
}

FamilySpec FamilySpec::prime_partition(std::vector<std::vector<std::uint64_t>> classes,
                                       int default_class) {
    if (classes.size() < 2) throw std::invalid_argument("prime_partition needs m >= 2 classes");
    if (default_class < 1 || default_class > static_cast<int>(classes.size()))
        throw std::invalid_argument("default_class out of range 1.." +
                                    std::to_string(classes.size()));
    for (std::size_t j = 0; j < classes.size(); ++j) {
        classes[j] = sorted_unique(std::move(classes[j]),
                                   ("class " + std::to_string(j + 1)).c_str());
        for (std::uint64_t p : classes[j]) {
            if (!is_prime_trial(p))
                throw std::invalid_argument("class " + std::to_string(j + 1) + " entry " +
                                            std::to_string(p) + " is not prime");
        }
    }
    int m = static_cast<int>(classes.size());
    return FamilySpec(FamilyKind::prime_partition, m,
                      PrimePartitionParams{std::move(classes), default_class});
}

FamilySpec FamilySpec::residue_classes(std::uint64_t modulus, int divisor_class,
                                       bool coprime_only) {
    if (modulus < 3)
        throw std::invalid_argument("residue_classes: modulus must be at least 3 "
                                    "(a smaller modulus leaves fewer than two classes)");
    auto residues = coprime_residues(modulus);
    int m = static_cast<int>(residues.size());
    if (divisor_class < 1 || divisor_class > m)
        throw std::invalid_argument("divisor_class out of range 1.." + std::to_string(m));
    return FamilySpec(FamilyKind::residue_classes, m,
                      ResidueClassesParams{modulus, std::move(residues), divisor_class,
                                           coprime_only});
}

FamilySpec FamilySpec::quadratic_degree(std::int64_t discriminant) {
    if (!is_fundamental_discriminant(discriminant))
        throw std::invalid_argument("quadratic_degree: " + std::to_string(discriminant) +
                                    " is not a fundamental discriminant");
    return FamilySpec(FamilyKind::quadratic_degree, 2, QuadraticDegreeParams{discriminant});
}

FamilySpec FamilySpec::digit_split_pair() {
    return FamilySpec(FamilyKind::digit_split_pair, 2, DigitSplitParams{});
}

FamilySpec FamilySpec::primitive_pair(std::vector<std::uint64_t> sequence,
                                      std::array<std::vector<std::uint64_t>, 2> partition) {
    sequence = sorted_unique(std::move(sequence), "sequence");
    for (std::uint64_t s : sequence) {
        if (s < 2) throw std::invalid_argument("sequence entries must be at least 2");
    }
    for (std::size_t a = 0; a < sequence.size(); ++a) {
        for (std::size_t b = a + 1; b < sequence.size(); ++b) {
            if (sequence[b] % sequence[a] == 0)
                throw NotPrimitiveError(sequence[a], sequence[b]);
        }
    }
    partition[0] = sorted_unique(std::move(partition[0]), "partition[0]");
    partition[1] = sorted_unique(std::move(partition[1]), "partition[1]");
    std::vector<std::uint64_t> merged;
    std::merge(partition[0].begin(), partition[0].end(), partition[1].begin(),
               partition[1].end(), std::back_inserter(merged));
    if (std::adjacent_find(merged.begin(), merged.end()) != merged.end())
        throw std::invalid_argument("partition parts are not disjoint");
    if (merged != sequence)
        throw std::invalid_argument("partition does not cover the sequence exactly");
    return FamilySpec(FamilyKind::primitive_pair, 2,
                      PrimitivePairParams{std::move(sequence), std::move(partition)});
}

FamilySpec FamilySpec::oracle_table(std::uint64_t bound,
                                    std::vector<std::vector<std::uint64_t>> classes) {
    if (classes.size() < 2) throw std::invalid_argument("oracle_table needs m >= 2 classes");
    if (bound < 1) throw std::invalid_argument("oracle_table bound must be positive");
    for (std::size_t j = 0; j < classes.size(); ++j) {
        auto& cls = classes[j];
        cls.push_back(1); // 1 is a member of every class
        std::sort(cls.begin(), cls.end());
        cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
        if (cls.front() < 1 || cls.back() > bound)
            throw std::invalid_argument("class " + std::to_string(j + 1) +
                                        " has entries outside 1..bound");
    }
    int m = static_cast<int>(classes.size());
    return FamilySpec(FamilyKind::oracle_table, m, OracleTableParams{bound, std::move(classes)});
}

const PrimePartitionParams& FamilySpec::prime_partition_params() const {
    return std::get<PrimePartitionParams>(params_);
}
const ResidueClassesParams& FamilySpec::residue_classes_params() const {
    return std::get<ResidueClassesParams>(params_);
}
const QuadraticDegreeParams& FamilySpec::quadratic_degree_params() const {
    return std::get<QuadraticDegreeParams>(params_);
}
const PrimitivePairParams& FamilySpec::primitive_pair_params() const {
    return std::get<PrimitivePairParams>(params_);
}
const OracleTableParams& FamilySpec::oracle_table_params() const {
    return std::get<OracleTableParams>(params_);
}

namespace {

const json& require_field(const json& doc, const char* name) {
    auto it = doc.find(name);
    if (it == doc.end())
        throw FamilyParseError(std::string("missing required field '") + name + "'");
    return *it;
}

std::uint64_t get_uint(const json& doc, const char* name) {
    const json& v = require_field(doc, name);
    if (!v.is_number_unsigned())
        throw FamilyParseError(std::string("field '") + name + "': expected unsigned integer");
    return v.get<std::uint64_t>();
}

std::int64_t get_int(const json& doc, const char* name) {
    const json& v = require_field(doc, name);
    if (!v.is_number_integer())
        throw FamilyParseError(std::string("field '") + name + "': expected integer");
    return v.get<std::int64_t>();
}

std::vector<std::uint64_t> get_uint_array(const json& v, const char* name) {
    if (!v.is_array())
        throw FamilyParseError(std::string("field '") + name +
                               "': expected array of unsigned integers");
    std::vector<std::uint64_t> out;
    for (const auto& e : v) {
        if (!e.is_number_unsigned())
            throw FamilyParseError(std::string("field '") + name +
                                   "': expected array of unsigned integers");
        out.push_back(e.get<std::uint64_t>());
    }
    return out;
}

std::vector<std::vector<std::uint64_t>> get_nested_uint_array(const json& doc, const char* name) {
    const json& v = require_field(doc, name);
    if (!v.is_array())
        throw FamilyParseError(std::string("field '") + name + "': expected array of arrays");
    std::vector<std::vector<std::uint64_t>> out;
    for (const auto& e : v) out.push_back(get_uint_array(e, name));
    return out;
}

} // namespace

FamilySpec FamilySpec::from_json(const json& doc) {
    if (!doc.is_object()) throw FamilyParseError("family document must be a JSON object");
    const json& kind_field = require_field(doc, "kind");
    if (!kind_field.is_string()) throw FamilyParseError("field 'kind': expected string");
    std::string kind = kind_field.get<std::string>();

    try {
        if (kind == "prime_partition") {
            auto classes = get_nested_uint_array(doc, "classes");
            int default_class = static_cast<int>(get_int(doc, "default_class"));
            return prime_partition(std::move(classes), default_class);
        }
        if (kind == "residue_classes") {
            std::uint64_t modulus = get_uint(doc, "modulus");
            int divisor_class =
                doc.contains("divisor_class") ? static_cast<int>(get_int(doc, "divisor_class")) : 1;
            bool coprime_only = false;
            if (doc.contains("coprime_only")) {
                const json& v = doc.at("coprime_only");
                if (!v.is_boolean())
                    throw FamilyParseError("field 'coprime_only': expected boolean");
                coprime_only = v.get<bool>();
            }
            return residue_classes(modulus, divisor_class, coprime_only);
        }
        if (kind == "quadratic_degree") {
            return quadratic_degree(get_int(doc, "discriminant"));
        }
        if (kind == "digit_split_pair") {
            return digit_split_pair();
        }
        if (kind == "primitive_pair") {
            auto sequence = get_uint_array(require_field(doc, "sequence"), "sequence");
            auto parts = get_nested_uint_array(doc, "partition");
            if (parts.size() != 2)
                throw FamilyParseError("field 'partition': expected exactly two parts");
            return primitive_pair(std::move(sequence), {std::move(parts[0]), std::move(parts[1])});
        }
        if (kind == "oracle_table") {
            std::uint64_t bound = get_uint(doc, "bound");
            auto classes = get_nested_uint_array(doc, "classes");
            return oracle_table(bound, std::move(classes));
        }
    } catch (const NotPrimitiveError&) {
        throw; // typed error, reported with the offending pair
    } catch (const FamilyParseError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw FamilyParseError(std::string("invalid family parameters: ") + e.what());
    }
    throw FamilyParseError("field 'kind': unknown value '" + kind + "'");
}

FamilySpec FamilySpec::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FamilyParseError("cannot open family file: " + path.string());
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::parse_error& e) {
        throw FamilyParseError(std::string("invalid JSON: ") + e.what());
    }
    return from_json(doc);
}

ordered_json FamilySpec::to_json() const {
    ordered_json out;
    out["kind"] = to_string(kind_);
    switch (kind_) {
    case FamilyKind::prime_partition: {
        const auto& params = prime_partition_params();
        out["classes"] = params.classes;
        out["default_class"] = params.default_class;
        break;
    }
    case FamilyKind::residue_classes: {
        const auto& params = residue_classes_params();
        out["modulus"] = params.modulus;
        out["divisor_class"] = params.divisor_class;
        out["coprime_only"] = params.coprime_only;
        break;
    }
    case FamilyKind::quadratic_degree:
        out["discriminant"] = quadratic_degree_params().discriminant;
        break;
    case FamilyKind::digit_split_pair:
        break;
    case FamilyKind::primitive_pair: {
        const auto& params = primitive_pair_params();
        out["sequence"] = params.sequence;
        out["partition"] = params.partition;
        break;
    }
    case FamilyKind::oracle_table: {
        const auto& params = oracle_table_params();
        out["bound"] = params.bound;
        out["classes"] = params.classes;
        break;
    }
    }
    return out;
}

bool membership(const FamilySpec& spec, int i, std::uint64_t n, const SpfTable& table) {
    check_class_index(spec, i);
    if (n == 0) throw std::invalid_argument("membership: n must be positive");
    if (n == 1) return true;

    switch (spec.kind()) {
    case FamilyKind::oracle_table: {
        const auto& params = spec.oracle_table_params();
        if (n > params.bound)
            throw std::out_of_range("membership: n = " + std::to_string(n) +
                                    " beyond oracle bound " + std::to_string(params.bound));
        return sorted_contains(params.classes[static_cast<std::size_t>(i) - 1], n);
    }
    case FamilyKind::primitive_pair:
        return sorted_contains(spec.primitive_pair_params().partition[static_cast<std::size_t>(i) - 1],
                               n);
    default: {
        if (n > table.limit())
            throw std::out_of_range("membership: n exceeds sieve limit");
        std::uint64_t rest = n;
        while (rest > 1) {
            std::uint64_t p = table.spf(rest);
            std::uint32_t e = 0;
            while (rest % p == 0) {
                rest /= p;
                ++e;
            }
            if (!prime_power_in_class(spec, p, e, i)) return false;
        }
        return true;
    }
    }
}

DecompositionTuple decompose(const FamilySpec& spec, std::uint64_t n, const SpfTable& table) {
    if (n == 0) throw std::invalid_argument("decompose: n must be positive");
    if (spec.kind() == FamilyKind::primitive_pair)
        throw std::invalid_argument("decompose: family does not cover the naturals");

    int m = spec.m();
    DecompositionTuple tuple{n, std::vector<std::uint64_t>(static_cast<std::size_t>(m), 1)};
    if (n == 1) return tuple;

    if (spec.kind() == FamilyKind::oracle_table) {
        const auto& params = spec.oracle_table_params();
        if (n > params.bound)
            throw std::out_of_range("decompose: n beyond oracle bound");
        if (n > table.limit()) throw std::out_of_range("decompose: n exceeds sieve limit");
        std::vector<DecompositionTuple> found;
        std::vector<std::uint64_t> parts(static_cast<std::size_t>(m), 1);
        enumerate_member_tuples(spec, n, 1, parts, found, 2, table);
        if (found.size() != 1)
            throw MalformedFamilyError("oracle_table decomposition of " + std::to_string(n) +
                                       (found.empty() ? " does not exist" : " is ambiguous"));
        return found.front();
    }

    if (n > table.limit()) throw std::out_of_range("decompose: n exceeds sieve limit");
    if (spec.kind() == FamilyKind::residue_classes && spec.residue_classes_params().coprime_only &&
        std::gcd(n, spec.residue_classes_params().modulus) != 1)
        throw std::invalid_argument("decompose: n is not coprime to the modulus "
                                    "(coprime_only family)");

    std::uint64_t rest = n;
    while (rest > 1) {
        std::uint64_t p = table.spf(rest);
        std::uint32_t e = 0;
        while (rest % p == 0) {
            rest /= p;
            ++e;
        }
        if (spec.kind() == FamilyKind::digit_split_pair) {
            tuple.parts[0] *= ipow(p, e & EVEN_POSITION_MASK);
            tuple.parts[1] *= ipow(p, e & ODD_POSITION_MASK);
        } else {
            int j = unique_class_of_prime(spec, p);
            if (j == 0)
                throw MalformedFamilyError("prime " + std::to_string(p) +
                                           " belongs to no class");
            if (j == -1)
                throw MalformedFamilyError("prime " + std::to_string(p) +
                                           " belongs to more than one class");
            tuple.parts[static_cast<std::size_t>(j) - 1] *= ipow(p, e);
        }
    }
    return tuple;
}

std::uint64_t component(const FamilySpec& spec, int i, std::uint64_t n, const SpfTable& table) {
    check_class_index(spec, i);
    return decompose(spec, n, table).parts[static_cast<std::size_t>(i) - 1];
}

std::uint64_t smooth_injection(const FamilySpec& spec, int i, std::uint64_t y, std::uint64_t a,
                               const SpfTable& table) {
    if (!membership(spec, i, a, table))
        throw std::invalid_argument("smooth_injection: " + std::to_string(a) +
                                    " is not a member of class " + std::to_string(i));
    std::uint64_t ay = smooth_part(a, y, table);
    std::uint64_t pi = decompose(spec, ay, table).parts[static_cast<std::size_t>(i) - 1];
    return pi * (a / ay);
}

std::vector<int> signature_set(const FamilySpec& spec, int i, std::uint64_t k,
                               const SpfTable& table) {
    check_class_index(spec, i);
    auto tuple = decompose(spec, k, table);
    std::vector<int> out;
    for (int j = 1; j <= spec.m(); ++j) {
        if (j != i && tuple.parts[static_cast<std::size_t>(j) - 1] != 1) out.push_back(j);
    }
    return out;
}

ClassLookup::ClassLookup(const FamilySpec& spec, const SpfTable& table) {
    switch (spec.kind()) {
    case FamilyKind::oracle_table:
    case FamilyKind::primitive_pair:
        return; // per_prime_ stays false; callers use membership() directly
    case FamilyKind::digit_split_pair:
        per_prime_ = true;
        digit_split_ = true;
        return;
    default:
        break;
    }
    if (spec.m() > 32000)
        throw std::invalid_argument("ClassLookup: family has too many classes");
    per_prime_ = true;
    class_of_.assign(table.limit() + 1, 0);
    for (std::uint64_t p = 2; p <= table.limit(); ++p) {
        if (!table.is_prime(p)) continue;
        int j = unique_class_of_prime(spec, p);
        if (j == -1) unambiguous_ = false;
        class_of_[p] = static_cast<std::int16_t>(j);
    }
}

bool ClassLookup::member(std::uint64_t n, int i, const SpfTable& table) const {
    while (n > 1) {
        std::uint64_t p = table.spf(n);
        std::uint32_t e = 0;
        while (n % p == 0) {
            n /= p;
            ++e;
        }
        if (!prime_power_in_class(p, e, i)) return false;
    }
    return true;
}

} // namespace dflab
