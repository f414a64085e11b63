#include <doctest.h>

#include "cli_app.hpp"
#include "test_helpers.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace gridsafe;
using namespace gridsafe::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("gridsafe_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("verify writes one report per node and exits 0 on the bundled defaults") {
    TempDir dir;
    const CliResult r = cli({"verify", "--input", kBundledNetwork, "--out", dir.path.string()});
    CAPTURE(r.err);
    CHECK(r.code == 0);
    for (int node : {1, 2, 3, 4}) {
        const fs::path file = dir.path / ("report_node" + std::to_string(node) + ".json");
        REQUIRE(fs::exists(file));
        const std::string text = slurp(file);
        CHECK(text.find("\"config\"") != std::string::npos);
        CHECK(text.find("\"lambda_p_star\"") != std::string::npos);
    }
    CHECK(r.out.find("nonempty") != std::string::npos);
}

TEST_CASE("verify exits 2 when the droop exceeds lambda-star") {
    TempDir dir;
    const CliResult r = cli({"verify", "--input", kBundledNetwork, "--out", dir.path.string(),
                             "--node", "1", "--lambda-q", "5.0"});
    CHECK(r.code == 2);
    CHECK(r.out.find("EMPTY") != std::string::npos);
}

TEST_CASE("verify propagates operational errors as exit 1") {
    const CliResult missing = cli({"verify", "--input", "/nonexistent/net.json"});
    CHECK(missing.code == 1);
    CHECK(!missing.err.empty());

    const CliResult unknown_node = cli({"verify", "--input", kBundledNetwork, "--node", "9"});
    CHECK(unknown_node.code == 1);

    const CliResult no_input = cli({"verify"});
    CHECK(no_input.code == 1);
}

TEST_CASE("verify with jobs matches the serial run") {
    TempDir serial, parallel;
    const CliResult a = cli({"verify", "--input", kBundledNetwork, "--out", serial.path.string()});
    const CliResult b = cli({"verify", "--input", kBundledNetwork, "--out", parallel.path.string(),
                             "--jobs", "4"});
    CHECK(a.code == b.code);
    for (int node : {1, 2, 3, 4}) {
        const std::string name = "report_node" + std::to_string(node) + ".json";
        // Identical up to the config echo, which records jobs/out verbatim.
        nlohmann::json ja = nlohmann::json::parse(slurp(serial.path / name));
        nlohmann::json jb = nlohmann::json::parse(slurp(parallel.path / name));
        ja.erase("config");
        jb.erase("config");
        CHECK(ja == jb);
    }
}

TEST_CASE("droop sweep emits a config-echoed csv with a crossing") {
    TempDir dir;
    const CliResult r = cli({"sweep", "--input", kBundledNetwork, "--out", dir.path.string(),
                             "--node", "2", "--axis", "lambda-q", "--grid-start", "0.2",
                             "--grid-stop", "1.2", "--grid-points", "26"});
    CAPTURE(r.err);
    CHECK(r.code == 0);
    const std::string text = slurp(dir.path / "sweep_lambda-q_node2.csv");
    REQUIRE(!text.empty());
    CHECK(text.rfind("# ", 0) == 0);
    CHECK(text.find("lambda,u_lower,u_upper,nonempty,crossing") != std::string::npos);
    CHECK(text.find(",1\n") != std::string::npos);  // some crossing row
}

TEST_CASE("sensitivity sweep emits weakly decreasing lambda-q-star") {
    TempDir dir;
    const CliResult r = cli({"sweep", "--input", kBundledNetwork, "--out", dir.path.string(),
                             "--node", "3", "--axis", "delta-v", "--grid-start", "0",
                             "--grid-stop", "0.6", "--grid-points", "5"});
    CAPTURE(r.err);
    CHECK(r.code == 0);
    std::istringstream in(slurp(dir.path / "sweep_delta-v_node3.csv"));
    std::string line;
    std::getline(in, line);  // comment
    std::getline(in, line);  // header
    CHECK(line == "delta_v,lambda_q_star");
    double prev = kInf;
    int rows = 0;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        const double lambda = std::stod(line.substr(comma + 1));
        CHECK(lambda <= prev + 1e-4);
        prev = lambda;
        ++rows;
    }
    CHECK(rows == 5);
}

TEST_CASE("empty sweep grid is a usage error") {
    TempDir dir;
    const CliResult r = cli({"sweep", "--input", kBundledNetwork, "--out", dir.path.string(),
                             "--node", "2", "--axis", "lambda-q", "--grid-start", "0.2",
                             "--grid-stop", "1.2", "--grid-points", "0"});
    CHECK(r.code == 1);
}

TEST_CASE("simulate runs certified controls with zero violations") {
    TempDir dir;
    const CliResult r = cli({"simulate", "--input", kBundledNetwork, "--out", dir.path.string(),
                             "--node", "1", "--duration", "2", "--seed", "5"});
    CAPTURE(r.err);
    CHECK(r.code == 0);
    CHECK(r.out.find("0 violations") != std::string::npos);
    const std::string text = slurp(dir.path / "trace_node1.csv");
    CHECK(text.find("time_s,theta_i,omega_i_hz,v_i_dev,u_p,u_q,theta_2,v_2_dev,theta_4,v_4_dev,"
                    "margin_omega_hz,margin_v") != std::string::npos);
}

TEST_CASE("simulate worst-case-hold stays safe") {
    TempDir dir;
    const CliResult r = cli({"simulate", "--input", kBundledNetwork, "--out", dir.path.string(),
                             "--node", "1", "--duration", "2", "--neighbor-policy",
                             "worst-case-hold"});
    CAPTURE(r.err);
    CHECK(r.code == 0);
    CHECK(r.out.find("0 violations") != std::string::npos);
}

TEST_CASE("simulate flags a deliberately inadmissible constant control") {
    TempDir dir;
    // At the default droop the guaranteed-violation offset is
    // 0.5 * width(S_omega) / lambda_p above the maximal upper control.
    const CliResult r = cli({"simulate", "--input", kBundledNetwork, "--out", dir.path.string(),
                             "--node", "1", "--duration", "20", "--control-policy", "constant",
                             "--u-p", "16.0", "--seed", "2"});
    CHECK(r.code == 3);
    // The summary line starts with the true-violation count.
    std::istringstream in(r.out);
    long count = -1;
    in >> count;
    CHECK(count > 0);
}

TEST_CASE("help exits 0") {
    const CliResult r = cli({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("verify") != std::string::npos);
}
