#include <doctest.h>

#include <kickns/stats.hpp>
#include <kickns_app/app.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace kickns;
using namespace kickns::app;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "kickns");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = app::main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("kickns_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string write_config(const fs::path& dir, const std::string& body) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << body;
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        if (line.starts_with("#")) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, '\t')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

double parse(const std::string& s) {
    double x = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), x);
    return x;
}

const std::string oracle_config = R"({
  "seed": 11,
  "ldp": {"backend": "oracle", "n": 60, "particles": 64, "ufp": {"n_list": [2, 4], "n_mc": 32}},
  "oracle": {"chain": ")" KICKNS_DATA_DIR R"(/five_state.chain", "fk_samples": 4000}
})";

}  // namespace

TEST_CASE("malformed configs exit with code 2 and name the key") {
    const fs::path dir = scratch("malformed");
    SUBCASE("unknown key") {
        const Run r = run({"simulate", "--config", write_config(dir, R"({"seed": 1, "chain": {"lenght": 3}})")});
        CHECK(r.code == exit_config);
        CHECK(r.err.find("chain.lenght") != std::string::npos);
    }
    SUBCASE("wrong type") {
        const Run r = run({"simulate", "--config", write_config(dir, R"({"seed": 1, "solver": {"dt": "small"}})")});
        CHECK(r.code == exit_config);
        CHECK(r.err.find("solver.dt") != std::string::npos);
    }
    SUBCASE("missing seed") {
        const Run r = run({"simulate", "--config", write_config(dir, R"({"chain": {"length": 3}})")});
        CHECK(r.code == exit_config);
        CHECK(r.err.find("seed") != std::string::npos);
        const std::string cfg = write_config(dir, R"({"chain": {"length": 2}})");
        CHECK(run({"simulate", "--config", cfg, "--seed", "4", "--out", (dir / "out").string()}).code == exit_ok);
        CHECK(run({"simulate", "--config", cfg, "--seed", "four"}).code == exit_config);
    }
    SUBCASE("syntax error") {
        const Run r = run({"simulate", "--config", write_config(dir, R"({"seed": 1,)")});
        CHECK(r.code == exit_config);
    }
    SUBCASE("unknown subcommand and missing file") {
        CHECK(run({"fly", "--config", "x.json"}).code == exit_config);
        CHECK(run({"simulate", "--config", (dir / "absent.json").string()}).code == exit_config);
    }
}

TEST_CASE("config parsing") {
    const ExperimentConfig a = parse_config(nlohmann::json::parse(R"({"seed": 3})"));
    CHECK(a.seed == 3);
    CHECK(a.domain.nx == 32);
    ExperimentConfig b = parse_config(nlohmann::json::parse(R"({"seed": 3, "output_dir": "elsewhere", "threads": 4})"));
    CHECK(a.hash() == b.hash());
    const ExperimentConfig c = parse_config(nlohmann::json::parse(R"({"seed": 4})"));
    CHECK(a.hash() != c.hash());
    CHECK(a.hash().size() == 16);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"chain": {}})")), ConfigError);
    CHECK_NOTHROW(parse_config(nlohmann::json::parse(R"({"chain": {}})"), true));
    try {
        parse_config(nlohmann::json::parse(R"({"seed": 1, "coupling": {"q": 0.5, "extra": 1}})"));
        FAIL("accepted an unknown key");
    } catch (const ConfigError& e) {
        CHECK(e.key_path() == "coupling.extra");
    }
    const ExperimentConfig shipped = load_config(KICKNS_DATA_DIR "/default_config.json");
    CHECK(shipped.seed != 0);
}

TEST_CASE("oracle-validate passes on the bundled chain") {
    const fs::path dir = scratch("oracle");
    const Run r = run({"oracle-validate", "--config", write_config(dir, oracle_config), "--out", (dir / "out").string()});
    CHECK(r.code == exit_ok);
    const auto rows = read_tsv(dir / "out" / "oracle-validate" / "oracle_validation.tsv");
    REQUIRE(rows.size() > 1);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK_MESSAGE(rows[i].back() == "pass", rows[i][0]);
}

TEST_CASE("reruns are byte-identical and manifests are complete") {
    const fs::path dir = scratch("rerun");
    const std::string cfg = write_config(dir, oracle_config);
    for (const std::string sub : {"estimate-q", "ufp"}) {
        REQUIRE(run({sub, "--config", cfg, "--out", (dir / "a").string()}).code == exit_ok);
        REQUIRE(run({sub, "--config", cfg, "--out", (dir / "b").string(), "--threads", "2"}).code == exit_ok);
        const nlohmann::json manifest = nlohmann::json::parse(slurp(dir / "a" / sub / "manifest.json"));
        REQUIRE(manifest["artifacts"].size() >= 2);
        for (const auto& art : manifest["artifacts"]) {
            const std::string name = art["file"];
            CHECK(art["config_hash"] == manifest["config_hash"]);
            CHECK(slurp(dir / "a" / sub / name) == slurp(dir / "b" / sub / name));
            if (!name.ends_with(".json")) CHECK(slurp(dir / "a" / sub / name).starts_with("# config_hash="));
        }
    }
    CHECK(fs::exists(dir / "a" / "estimate-q" / "running_q.dat"));
    const Run other = run({"estimate-q", "--config", cfg, "--out", (dir / "c").string(), "--seed", "12"});
    CHECK(other.code == exit_ok);
    CHECK(slurp(dir / "a" / "estimate-q" / "q_estimates.tsv") != slurp(dir / "c" / "estimate-q" / "q_estimates.tsv"));
}

TEST_CASE("output directory precedence") {
    const fs::path dir = scratch("precedence");
    const std::string body = R"({"seed": 2, "output_dir": ")" + (dir / "from_config").string() +
                             R"(", "ldp": {"backend": "oracle", "n": 10, "particles": 8},
      "oracle": {"chain": ")" KICKNS_DATA_DIR R"(/five_state.chain"}})";
    const std::string cfg = write_config(dir, body);
    REQUIRE(run({"estimate-q", "--config", cfg}).code == exit_ok);
    CHECK(fs::exists(dir / "from_config" / "estimate-q" / "q_estimates.tsv"));
    REQUIRE(run({"estimate-q", "--config", cfg, "--out", (dir / "flag").string()}).code == exit_ok);
    CHECK(fs::exists(dir / "flag" / "estimate-q" / "q_estimates.tsv"));
    ::setenv("KICKNS_OUT", (dir / "from_env").string().c_str(), 1);
    const int env_code = run({"estimate-q", "--config", cfg}).code;
    const bool env_written = fs::exists(dir / "from_env" / "estimate-q" / "q_estimates.tsv");
    fs::remove_all(dir / "from_env");
    const int both_code = run({"estimate-q", "--config", cfg, "--out", (dir / "flag2").string()}).code;
    ::unsetenv("KICKNS_OUT");
    CHECK(env_code == exit_ok);
    CHECK(env_written);
    CHECK(both_code == exit_ok);
    CHECK(fs::exists(dir / "flag2" / "estimate-q" / "q_estimates.tsv"));
    CHECK_FALSE(fs::exists(dir / "from_env"));
}

TEST_CASE("contraction table serializes the computed values") {
    const fs::path dir = scratch("couple");
    const std::string cfg = write_config(
        dir, R"({"seed": 5, "coupling": {"n_mc": 3, "warmup": 2, "d_list": [0.01, 0.004]}})");
    REQUIRE(run({"couple", "--config", cfg, "--out", dir.string()}).code == exit_ok);
    const auto rows = read_tsv(dir / "couple" / "contraction.tsv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0][0] == "d");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double d = parse(rows[i][0]);
        const auto failures = static_cast<std::uint64_t>(parse(rows[i][3]));
        const auto n = static_cast<std::uint64_t>(parse(rows[i][2]));
        const ProbabilityEstimate ci = wilson_interval(failures, n);
        CHECK(n == 3);
        CHECK(parse(rows[i][4]) == ci.estimate);
        CHECK(parse(rows[i][5]) == ci.estimate / d);
        CHECK(parse(rows[i][6]) == ci.lower / d);
        CHECK(parse(rows[i][7]) == ci.upper / d);
    }
}

TEST_CASE("report formatting") {
    const fs::path dir = scratch("report");
    Report rep(dir, "0123456789abcdef", "test", 1);
    rep.table("empty.tsv", {"a", "b"}, {});
    rep.series("s.dat", "x", "y", {{1.0, 0.1}});
    rep.finish();
    CHECK(slurp(dir / "empty.tsv") == "# config_hash=0123456789abcdef\na\tb\n");
    CHECK(slurp(dir / "s.dat") == "# config_hash=0123456789abcdef\n# x y\n1 0.1\n");
    const nlohmann::json m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(m["artifacts"].size() == 2);
    CHECK(m["versions"].contains("kickns"));

    kickns::Stream rng(1, 1);
    for (int i = 0; i < 1000; ++i) {
        const double x = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.below(200)) - 100);
        CHECK(parse(fmt(x)) == x);
    }
    CHECK_THROWS(Report("/proc/kickns_forbidden/x", "h", "t", 0));
}
