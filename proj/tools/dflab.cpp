// dflab -- command-line front end for direct factor family experiments.
//
// Exit codes: 0 success / verification passed, 1 verification failed,
// 2 usage or configuration error.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "dflab/csv.hpp"
#include "dflab/density.hpp"
#include "dflab/family.hpp"
#include "dflab/verify.hpp"

namespace {

using namespace dflab;

// Configuration-level problem; maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;           // e.g. "verify.unique"
    std::string family_path;
    int index = 1;
    std::uint64_t n = 0;
    std::uint64_t x = 0;
    std::uint64_t y = 0;
    std::uint64_t limit = 0;
    std::vector<std::uint64_t> xs;
    std::vector<std::uint64_t> ys;
    std::optional<std::uint64_t> sieve_limit;
    std::uint64_t cutoff = 1000000;
    std::uint64_t prime_limit = 100000;
    std::string out_path;
    unsigned threads = 1;
    double slack = 1e-2;
    unsigned max_exponent = 8;
    bool ordered = false;
    bool euler = false;
    std::optional<std::uint64_t> smooth_y;
};

// Counting bounds accept scientific notation but must denote exact integers.
std::uint64_t parse_count(const std::string& text) {
    if (text.empty()) throw ConfigError("empty numeric argument");
    if (text.find_first_not_of("0123456789") == std::string::npos) {
        try {
            return std::stoull(text);
        } catch (const std::exception&) {
            throw ConfigError("integer out of range: " + text);
        }
    }
    errno = 0;
    char* end = nullptr;
    long double v = strtold(text.c_str(), &end);
    if (errno != 0 || end == text.c_str() || *end != '\0' || !std::isfinite((double)v))
        throw ConfigError("cannot parse number: " + text);
    if (v < 0 || v > 9.0e18L || floorl(v) != v)
        throw ConfigError("expected an exact nonnegative integer: " + text);
    return static_cast<std::uint64_t>(v);
}

std::vector<std::uint64_t> parse_counts(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_count(item));
    }
    if (out.empty()) throw ConfigError("empty list argument");
    return out;
}

FamilySpec load_family(const RunConfig& config) {
    if (config.family_path.empty()) throw ConfigError("--family is required");
    return FamilySpec::load(config.family_path);
}

// Builds or loads the sieve. DFLAB_SIEVE_CACHE names a persisted table that is
// reused when large enough and rewritten otherwise.
SpfTable acquire_sieve(std::uint64_t needed, const RunConfig& config) {
    std::uint64_t limit = std::max<std::uint64_t>(needed, 2);
    if (config.sieve_limit) {
        if (*config.sieve_limit < needed)
            throw ConfigError("--sieve-limit " + std::to_string(*config.sieve_limit) +
                              " is smaller than the largest requested bound " +
                              std::to_string(needed));
        limit = *config.sieve_limit;
    }
    const char* cache = std::getenv("DFLAB_SIEVE_CACHE");
    if (cache && *cache) {
        try {
            SpfTable table = SpfTable::load(cache);
            if (table.limit() >= limit) return table;
        } catch (const std::exception&) {
            // rebuilt below
        }
        SpfTable table = SpfTable::build(limit);
        try {
            table.save(cache);
        } catch (const std::exception& e) {
            std::cerr << "warning: could not write sieve cache: " << e.what() << "\n";
        }
        return table;
    }
    return SpfTable::build(limit);
}

void emit(const RunConfig& config, const std::string& text) {
    std::cout << text;
    if (!config.out_path.empty()) {
        std::ofstream os(config.out_path, std::ios::binary | std::ios::trunc);
        if (!os) throw ConfigError("cannot open output file: " + config.out_path);
        os << text;
    }
}

void emit_json(const RunConfig& config, const nlohmann::ordered_json& doc) {
    emit(config, doc.dump(2) + "\n");
}

int report_exit(const RunConfig& config, const VerificationReport& report) {
    emit_json(config, report.to_json());
    return report.pass ? 0 : 1;
}

int run(const RunConfig& config) {
    if (config.command == "decompose") {
        FamilySpec spec = load_family(config);
        SpfTable table = acquire_sieve(config.n, config);
        DecompositionTuple tuple = decompose(spec, config.n, table);
        std::ostringstream os;
        os << "(";
        for (std::size_t k = 0; k < tuple.parts.size(); ++k)
            os << (k ? ", " : "") << tuple.parts[k];
        os << ")\n";
        emit(config, os.str());
        return 0;
    }

    if (config.command == "harmonic") {
        FamilySpec spec = load_family(config);
        if (config.euler) {
            emit_json(config, euler_harmonic(spec, config.index, config.prime_limit).to_json());
            return 0;
        }
        if (config.smooth_y) {
            SpfTable table = acquire_sieve(config.cutoff, config);
            emit_json(config,
                      harmonic_sum_smooth(spec, config.index, *config.smooth_y, config.cutoff,
                                          table)
                          .to_json());
            return 0;
        }
        SpfTable table = acquire_sieve(config.cutoff, config);
        emit_json(config,
                  harmonic_sum_truncated(spec, config.index, config.cutoff, table).to_json());
        return 0;
    }

    if (config.command == "density.empirical") {
        FamilySpec spec = load_family(config);
        SpfTable table = acquire_sieve(config.x, config);
        nlohmann::ordered_json out;
        out["family"] = spec.label();
        out["class_index"] = config.index;
        out["x"] = config.x;
        out["empirical"] = empirical_density(spec, config.index, config.x, table, config.threads);
        emit_json(config, out);
        return 0;
    }
    if (config.command == "density.smooth") {
        FamilySpec spec = load_family(config);
        SpfTable table = acquire_sieve(config.cutoff, config);
        emit_json(config,
                  smooth_class_density(spec, config.index, config.y, config.cutoff, table)
                      .to_json());
        return 0;
    }
    if (config.command == "density.lower") {
        FamilySpec spec = load_family(config);
        SpfTable table = acquire_sieve(config.cutoff, config);
        EvalBudget budget{config.prime_limit, config.cutoff};
        emit_json(config,
                  density_lower_bound(spec, config.index, config.y, budget, table).to_json());
        return 0;
    }
    if (config.command == "density.limit") {
        FamilySpec spec = load_family(config);
        EvalBudget budget{config.prime_limit, config.cutoff};
        emit_json(config, predicted_density(spec, config.index, budget).to_json());
        return 0;
    }

    if (config.command == "verify.unique") {
        FamilySpec spec = load_family(config);
        SpfTable table = acquire_sieve(config.limit, config);
        return report_exit(config,
                           verify_unique_decomposition(spec, config.limit, table, config.threads));
    }
    if (config.command == "verify.injection") {
        FamilySpec spec = load_family(config);
        SpfTable table = acquire_sieve(config.limit, config);
        return report_exit(
            config, verify_smooth_injection(spec, config.index, config.y, config.limit, table));
    }
    if (config.command == "verify.counts") {
        FamilySpec spec = load_family(config);
        SpfTable table = acquire_sieve(*std::max_element(config.xs.begin(), config.xs.end()),
                                       config);
        bool all_pass = true;
        nlohmann::ordered_json reports = nlohmann::ordered_json::array();
        for (std::uint64_t y : config.ys) {
            VerificationReport r = verify_count_inequality(spec, config.index, y, config.xs,
                                                           table, config.threads);
            all_pass = all_pass && r.pass;
            reports.push_back(r.to_json());
        }
        emit_json(config, reports);
        return all_pass ? 0 : 1;
    }
    if (config.command == "verify.partition") {
        FamilySpec spec = load_family(config);
        SpfTable table = acquire_sieve(config.limit, config);
        return report_exit(config,
                           verify_signature_partition(spec, config.index, config.limit, table));
    }
    if (config.command == "verify.squeeze") {
        FamilySpec spec = load_family(config);
        std::uint64_t xmax = *std::max_element(config.xs.begin(), config.xs.end());
        SpfTable table = acquire_sieve(std::max(xmax, config.cutoff), config);
        EvalBudget budget{config.prime_limit, config.cutoff};
        return report_exit(config,
                           verify_squeeze(spec, config.index, config.ys, config.xs, config.slack,
                                          budget, table, config.threads));
    }
    if (config.command == "verify.self-pair") {
        RefutationCertificate cert = search_self_factor_pair(config.max_exponent, config.ordered);
        std::string why;
        bool replay = replay_certificate(cert, &why);
        nlohmann::ordered_json out = cert.to_json();
        out["replay_valid"] = replay;
        if (!replay) out["replay_error"] = why;
        emit_json(config, out);
        return cert.status == RefutationCertificate::Status::unsat && replay ? 0 : 1;
    }
    if (config.command == "verify.primitive-pair") {
        FamilySpec spec = [&] {
            try {
                return load_family(config);
            } catch (const NotPrimitiveError& e) {
                VerificationReport report;
                report.check = "pair_for_subset";
                report.params["family"] = config.family_path;
                report.pass = false;
                report.counterexample = nlohmann::ordered_json::object();
                report.counterexample["divisor"] = e.divisor();
                report.counterexample["multiple"] = e.multiple();
                report.counterexample["reason"] = "sequence is not primitive";
                emit_json(config, report.to_json());
                std::exit(1);
            }
        }();
        std::uint64_t limit = config.limit;
        if (limit == 0) {
            const auto& seq = spec.primitive_pair_params().sequence;
            limit = seq.empty() ? 1 : seq.back();
        }
        return report_exit(config, verify_pair_for_subset(spec, limit));
    }

    if (config.command == "convergence") {
        FamilySpec spec = load_family(config);
        std::uint64_t xmax = *std::max_element(config.xs.begin(), config.xs.end());
        SpfTable table = acquire_sieve(std::max(xmax, config.cutoff), config);
        EvalBudget budget{config.prime_limit, config.cutoff};
        auto rows = convergence_table(spec, config.index, config.xs, config.ys, budget, table,
                                      config.threads);
        std::ostringstream os;
        write_convergence_csv(os, rows);
        emit(config, os.str());
        return 0;
    }

    if (config.command == "sieve") {
        if (config.out_path.empty()) throw ConfigError("sieve: --out is required");
        SpfTable table = SpfTable::build(config.limit);
        table.save(config.out_path);
        std::cout << "wrote sieve of limit " << table.limit() << " to " << config.out_path
                  << "\n";
        return 0;
    }

    throw ConfigError("no subcommand given (try --help)");
}

} // namespace

int main(int argc, char** argv) {
    RunConfig config;
    CLI::App app{"direct factor family laboratory"};
    app.require_subcommand(0, 1);

    std::string xs_text, ys_text, n_text, x_text, y_text, limit_text, cutoff_text,
        prime_limit_text, sieve_limit_text, smooth_y_text, max_exponent_text;

    auto add_family = [&](CLI::App* cmd) {
        cmd->add_option("--family", config.family_path, "family spec JSON file");
    };
    auto add_sieve_limit = [&](CLI::App* cmd) {
        cmd->add_option("--sieve-limit", sieve_limit_text, "sieve size (default: auto)");
    };
    auto add_threads = [&](CLI::App* cmd) {
        cmd->add_option("--threads", config.threads, "range-partition width for counting");
    };
    auto add_out = [&](CLI::App* cmd) {
        cmd->add_option("--out", config.out_path, "also write the output to this file");
    };

    CLI::App* decompose = app.add_subcommand("decompose", "decompose an integer");
    add_family(decompose);
    decompose->add_option("--n", n_text, "integer to decompose")->required();
    add_sieve_limit(decompose);
    add_out(decompose);
    decompose->callback([&] { config.command = "decompose"; });

    CLI::App* harmonic = app.add_subcommand("harmonic", "harmonic sum of a class");
    add_family(harmonic);
    harmonic->add_option("--index", config.index, "class index (1-based)");
    harmonic->add_option("--cutoff", cutoff_text, "truncation cutoff");
    harmonic->add_option("--smooth-y", smooth_y_text, "restrict to y-smooth members");
    harmonic->add_flag("--euler", config.euler, "evaluate as an Euler product");
    harmonic->add_option("--prime-limit", prime_limit_text, "Euler product prime budget");
    add_sieve_limit(harmonic);
    add_out(harmonic);
    harmonic->callback([&] { config.command = "harmonic"; });

    CLI::App* density = app.add_subcommand("density", "density predictions");
    for (const char* sub : {"empirical", "smooth", "lower", "limit"}) {
        CLI::App* cmd = density->add_subcommand(sub);
        add_family(cmd);
        cmd->add_option("--index", config.index, "class index (1-based)");
        if (std::string(sub) == "empirical") {
            cmd->add_option("--x", x_text, "count bound")->required();
            add_threads(cmd);
        }
        if (std::string(sub) == "smooth" || std::string(sub) == "lower")
            cmd->add_option("--y", y_text, "smoothness level")->required();
        cmd->add_option("--cutoff", cutoff_text, "harmonic sum cutoff");
        cmd->add_option("--prime-limit", prime_limit_text, "Euler product prime budget");
        add_sieve_limit(cmd);
        add_out(cmd);
        cmd->callback([&, sub] { config.command = std::string("density.") + sub; });
    }

    CLI::App* verify = app.add_subcommand("verify", "property checks");
    for (const char* sub : {"unique", "injection", "counts", "partition", "squeeze", "self-pair",
                            "primitive-pair"}) {
        CLI::App* cmd = verify->add_subcommand(sub);
        std::string name(sub);
        if (name != "self-pair") add_family(cmd);
        if (name == "unique" || name == "injection" || name == "partition" ||
            name == "primitive-pair")
            cmd->add_option("--limit", limit_text, "range bound");
        if (name == "injection" || name == "counts" || name == "partition" || name == "squeeze")
            cmd->add_option("--index", config.index, "class index (1-based)");
        if (name == "injection") cmd->add_option("--y", y_text, "smoothness level")->required();
        if (name == "counts" || name == "squeeze") {
            cmd->add_option("--xs", xs_text, "comma-separated count bounds")->required();
            cmd->add_option("--ys", ys_text, "comma-separated smoothness levels")->required();
        }
        if (name == "squeeze") {
            cmd->add_option("--slack", config.slack, "tolerance for the bound chain");
            cmd->add_option("--cutoff", cutoff_text, "harmonic sum cutoff");
            cmd->add_option("--prime-limit", prime_limit_text, "Euler product prime budget");
        }
        if (name == "self-pair") {
            cmd->add_option("--max-exponent", max_exponent_text, "search horizon");
            cmd->add_flag("--ordered", config.ordered, "count ordered representations");
        }
        if (name == "unique" || name == "counts" || name == "squeeze") add_threads(cmd);
        add_sieve_limit(cmd);
        add_out(cmd);
        cmd->callback([&, name] { config.command = "verify." + name; });
    }

    CLI::App* convergence = app.add_subcommand("convergence", "density convergence table (CSV)");
    add_family(convergence);
    convergence->add_option("--index", config.index, "class index (1-based)");
    convergence->add_option("--xs", xs_text, "comma-separated count bounds")->required();
    convergence->add_option("--ys", ys_text, "comma-separated smoothness levels")->required();
    convergence->add_option("--cutoff", cutoff_text, "harmonic sum cutoff");
    convergence->add_option("--prime-limit", prime_limit_text, "Euler product prime budget");
    add_threads(convergence);
    add_sieve_limit(convergence);
    add_out(convergence);
    convergence->callback([&] { config.command = "convergence"; });

    CLI::App* sieve = app.add_subcommand("sieve", "build and persist a sieve table");
    sieve->add_option("--limit", limit_text, "sieve limit")->required();
    add_out(sieve);
    sieve->callback([&] { config.command = "sieve"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (!n_text.empty()) config.n = parse_count(n_text);
        if (!x_text.empty()) config.x = parse_count(x_text);
        if (!y_text.empty()) config.y = parse_count(y_text);
        if (!limit_text.empty()) config.limit = parse_count(limit_text);
        if (!cutoff_text.empty()) config.cutoff = parse_count(cutoff_text);
        if (!prime_limit_text.empty()) config.prime_limit = parse_count(prime_limit_text);
        if (!sieve_limit_text.empty()) config.sieve_limit = parse_count(sieve_limit_text);
        if (!smooth_y_text.empty()) config.smooth_y = parse_count(smooth_y_text);
        if (!max_exponent_text.empty())
            config.max_exponent = static_cast<unsigned>(parse_count(max_exponent_text));
        if (!xs_text.empty()) config.xs = parse_counts(xs_text);
        if (!ys_text.empty()) config.ys = parse_counts(ys_text);
        if (config.threads == 0) config.threads = 1;

        return run(config);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FamilyParseError& e) {
        std::cerr << "family spec error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
