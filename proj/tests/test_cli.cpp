#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "dflab_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

CliResult run_cli(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    fs::path out = scratch_dir() / ("out" + std::to_string(counter) + ".txt");
    fs::path err = scratch_dir() / ("err" + std::to_string(counter) + ".txt");
    ++counter;
    std::string cmd = env + (env.empty() ? "" : " ") + "\"" DFLAB_BIN "\" " + args + " > \"" +
                      out.string() + "\" 2> \"" + err.string() + "\"";
    int rc = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WEXITSTATUS(rc);
    result.out = slurp(out);
    result.err = slurp(err);
    return result;
}

std::string family(const char* name) {
    return std::string("--family \"") + DFLAB_FAMILY_DIR + "/" + name + "\"";
}

fs::path write_file(const char* name, const std::string& text) {
    fs::path p = scratch_dir() / name;
    std::ofstream os(p, std::ios::binary);
    os << text;
    return p;
}

} // namespace

TEST_CASE("decompose prints the tuple") {
    CliResult r = run_cli("decompose " + family("p2_p35_rest.json") + " --n 60");
    CHECK(r.exit_code == 0);
    CHECK(r.out == "(4, 15, 1)\n");
}

TEST_CASE("verify unique accepts scientific notation and reports JSON") {
    CliResult r = run_cli("verify unique " + family("p2_odd.json") + " --limit 1e3");
    CHECK(r.exit_code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["check"] == "unique_decomposition");
    CHECK(doc["pass"] == true);
    CHECK(doc["params"]["limit"] == 1000);
}

TEST_CASE("verify unique fails with exit code 1 on a broken family") {
    fs::path broken = write_file("broken.json",
                                 R"({"kind":"oracle_table","bound":8,)"
                                 R"("classes":[[1,2,4,8],[1,2,3,5,7]]})");
    CliResult r = run_cli("verify unique --family \"" + broken.string() + "\" --limit 8");
    CHECK(r.exit_code == 1);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["pass"] == false);
    CHECK(doc["counterexample"]["n"] == 2);
}

TEST_CASE("malformed family JSON exits 2 and names the field") {
    fs::path bad = write_file("bad.json", R"({"kind":"residue_classes"})");
    CliResult r = run_cli("decompose --family \"" + bad.string() + "\" --n 10");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("modulus") != std::string::npos);

    fs::path garbage = write_file("garbage.json", "{not json");
    CliResult g = run_cli("decompose --family \"" + garbage.string() + "\" --n 10");
    CHECK(g.exit_code == 2);
    CHECK(g.err.find("JSON") != std::string::npos);

    CliResult missing = run_cli("decompose --family /nonexistent.json --n 10");
    CHECK(missing.exit_code == 2);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("decompose --no-such-flag 1").exit_code == 2);
    CHECK(run_cli("decompose " + family("p2_odd.json") + " --n 1.5").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("sieve limit validation") {
    CliResult r = run_cli("verify unique " + family("p2_odd.json") +
                          " --limit 1000 --sieve-limit 100");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("sieve") != std::string::npos);
}

TEST_CASE("convergence CSV is byte-identical for any thread count") {
    std::string base = "convergence " + family("p2_p3_rest.json") +
                       " --index 3 --xs 1e3,1e4,1e5 --ys 2,3,5 --cutoff 1e5";
    fs::path out1 = scratch_dir() / "conv1.csv";
    fs::path out3 = scratch_dir() / "conv3.csv";
    CliResult a = run_cli(base + " --threads 1 --out \"" + out1.string() + "\"");
    CliResult b = run_cli(base + " --threads 3 --out \"" + out3.string() + "\"");
    CHECK(a.exit_code == 0);
    CHECK(b.exit_code == 0);
    std::string csv1 = slurp(out1);
    std::string csv3 = slurp(out3);
    CHECK(csv1 == csv3);
    CHECK(a.out == b.out);
    CHECK(csv1.substr(0, csv1.find('\n')) ==
          "x,y,empirical,smooth_upper,lower_bound,limit,smooth_tail,limit_tail");
    CHECK(csv1.back() == '\n');
}

TEST_CASE("verify reports are byte-identical for any thread count") {
    std::string base = "verify counts " + family("digit_split.json") +
                       " --index 1 --ys 2,3 --xs 1e3,1e4";
    CliResult a = run_cli(base + " --threads 1");
    CliResult b = run_cli(base + " --threads 5");
    CHECK(a.exit_code == 0);
    CHECK(a.out == b.out);
}

TEST_CASE("squeeze subcommand") {
    CliResult r = run_cli("verify squeeze " + family("p2_p3_rest.json") +
                          " --index 3 --ys 2,3,5 --xs 1e3,1e4 --slack 1e-2 --cutoff 1e4");
    CHECK(r.exit_code == 0);
    CHECK(nlohmann::json::parse(r.out)["pass"] == true);
}

TEST_CASE("self-pair subcommand") {
    CliResult r = run_cli("verify self-pair --max-exponent 8");
    CHECK(r.exit_code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["status"] == "unsat");
    CHECK(doc["replay_valid"] == true);
    CHECK(doc["conflict_depth"].get<int>() <= 6);

    CliResult open = run_cli("verify self-pair --max-exponent 3");
    CHECK(open.exit_code == 1);
    CHECK(nlohmann::json::parse(open.out)["status"] == "inconclusive");

    CliResult ordered = run_cli("verify self-pair --max-exponent 8 --ordered");
    CHECK(ordered.exit_code == 0);
}

TEST_CASE("primitive pair subcommand") {
    fs::path good = write_file("pair.json",
                               R"({"kind":"primitive_pair","sequence":[2,9,125],)"
                               R"("partition":[[2,125],[9]]})");
    CliResult r = run_cli("verify primitive-pair --family \"" + good.string() + "\"");
    CHECK(r.exit_code == 0);
    CHECK(nlohmann::json::parse(r.out)["pass"] == true);

    fs::path bad = write_file("nonprimitive.json",
                              R"({"kind":"primitive_pair","sequence":[2,4],)"
                              R"("partition":[[2],[4]]})");
    CliResult f = run_cli("verify primitive-pair --family \"" + bad.string() + "\"");
    CHECK(f.exit_code == 1);
    auto doc = nlohmann::json::parse(f.out);
    CHECK(doc["pass"] == false);
    CHECK(doc["counterexample"]["divisor"] == 2);
    CHECK(doc["counterexample"]["multiple"] == 4);
}

TEST_CASE("density subcommands emit prediction JSON") {
    CliResult r = run_cli("density limit " + family("p2_p3_rest.json") + " --index 3");
    CHECK(r.exit_code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["mode"] == "limit");
    CHECK(doc["predicted"].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    CliResult z = run_cli("density limit " + family("gauss_disc_m4.json") + " --index 1");
    CHECK(nlohmann::json::parse(z.out)["predicted"] == 0.0);

    CliResult emp = run_cli("density empirical " + family("p2_odd.json") +
                            " --index 2 --x 1e5 --threads 2");
    CHECK(nlohmann::json::parse(emp.out)["empirical"] == 0.5);

    CliResult smooth = run_cli("density smooth " + family("p2_odd.json") + " --index 2 --y 2");
    CHECK(nlohmann::json::parse(smooth.out)["predicted"].get<double>() ==
          doctest::Approx(0.5).epsilon(1e-13));

    CliResult lower = run_cli("density lower " + family("trivial_pair.json") +
                              " --index 2 --y 3");
    CHECK(nlohmann::json::parse(lower.out)["predicted"].get<double>() ==
          doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("injection and partition subcommands") {
    CliResult inj = run_cli("verify injection " + family("digit_split.json") +
                            " --index 1 --y 3 --limit 1e4");
    CHECK(inj.exit_code == 0);
    CHECK(nlohmann::json::parse(inj.out)["pass"] == true);

    CliResult part = run_cli("verify partition " + family("p2_p35_rest.json") +
                             " --index 1 --limit 1e3");
    CHECK(part.exit_code == 0);
    auto doc = nlohmann::json::parse(part.out);
    CHECK(doc["pass"] == true);
    CHECK(doc["metrics"]["fibers"].is_object());
}

TEST_CASE("harmonic subcommand") {
    CliResult r = run_cli("harmonic " + family("p2_odd.json") + " --index 1 --cutoff 1024");
    CHECK(r.exit_code == 0);
    CHECK(nlohmann::json::parse(r.out)["value"].get<double>() ==
          doctest::Approx(1.9990234375).epsilon(1e-14));

    CliResult smooth = run_cli("harmonic " + family("p2_odd.json") + " --index 2 --smooth-y 3");
    CHECK(smooth.exit_code == 0);
    CHECK(nlohmann::json::parse(smooth.out)["value"].get<double>() ==
          doctest::Approx(1.5).epsilon(1e-14));

    CliResult e = run_cli("harmonic " + family("digit_split.json") +
                          " --index 2 --euler --prime-limit 1e4");
    auto doc = nlohmann::json::parse(e.out);
    CHECK(doc["divergence"] == "converges");
    CHECK(doc["tail_bound"].get<double>() < 1e-9);
}

TEST_CASE("sieve cache environment variable") {
    fs::path cache = scratch_dir() / "sieve_cache.bin";
    std::string env = "DFLAB_SIEVE_CACHE=\"" + cache.string() + "\"";

    CliResult first = run_cli("decompose " + family("p2_p35_rest.json") + " --n 60", env);
    CHECK(first.exit_code == 0);
    REQUIRE(fs::exists(cache));

    std::string header = slurp(cache).substr(0, 8);
    CHECK(header == "DFLABSPF");

    CliResult second = run_cli("decompose " + family("p2_p35_rest.json") + " --n 60", env);
    CHECK(second.exit_code == 0);
    CHECK(second.out == first.out);

    // corrupt cache is rebuilt, not trusted
    write_file("sieve_cache.bin", "garbage");
    CliResult third = run_cli("decompose " + family("p2_p35_rest.json") + " --n 60", env);
    CHECK(third.exit_code == 0);
    CHECK(third.out == first.out);
    CHECK(slurp(cache).substr(0, 8) == "DFLABSPF");
}

TEST_CASE("sieve subcommand writes a loadable table") {
    fs::path out = scratch_dir() / "sieve_out.bin";
    CliResult r = run_cli("sieve --limit 1e4 --out \"" + out.string() + "\"");
    CHECK(r.exit_code == 0);
    REQUIRE(fs::exists(out));
    CHECK(slurp(out).size() == 20 + 4 * (10000 - 1)); // header + one u32 per n in 2..limit
}
