#include <doctest.h>

#include "gridsafe/network.hpp"

#include <random>
#include <string>

using namespace gridsafe;

namespace {

const std::string kBundled = std::string(GRIDSAFE_DATA_DIR) + "/microgrid4.json";

std::string minimal_file(const std::string& nodes, const std::string& lines) {
    return R"({"format_version": 1, "nodes": [)" + nodes + R"(], "lines": [)" + lines +
           R"(], "safety": {"s_v": [-0.4, 0.2], "s_omega_hz": [-3, 3],
               "s_theta": [-0.5, 0.5], "delta_v": null, "delta_omega_hz": null}})";
}

const char* kNode1 = R"({"id": 1, "tau": 1.0, "lambda_p": 1.0, "lambda_q": 1.0,
                         "v_nom": 1.0, "p_nom": 0.0, "q_nom": 0.0})";

}  // namespace

TEST_CASE("bundled network loads with a symmetric ring neighbor map") {
    const LoadResult r = load_network(kBundled);
    CHECK(r.model.nodes().size() == 4);
    CHECK(r.model.neighbors(1) == std::set<int>{1, 2, 4});
    CHECK(r.model.neighbors(2) == std::set<int>{1, 2, 3});
    CHECK(r.model.neighbors(3) == std::set<int>{2, 3, 4});
    CHECK(r.model.neighbors(4) == std::set<int>{1, 3, 4});
    for (const auto& n : r.model.nodes()) {
        for (int k : r.model.neighbors(n.id)) {
            CHECK(r.model.neighbors(k).count(n.id) == 1);
        }
        CHECK(r.model.neighbors(n.id).count(n.id) == 1);
    }
    CHECK(r.safety.delta_v == doctest::Approx(0.02));
    CHECK(r.safety.s_omega.hi == doctest::Approx(3.0 * kTwoPi));
}

TEST_CASE("validation errors name the violated invariant") {
    SUBCASE("non-positive droop") {
        const std::string text = minimal_file(
            R"({"id": 1, "tau": 1.0, "lambda_p": 0.0, "lambda_q": 1.0,
                "v_nom": 1.0, "p_nom": 0.0, "q_nom": 0.0})",
            "");
        CHECK_THROWS_WITH_AS(parse_network(text),
                             doctest::Contains("droop must be positive"), ValidationError);
    }
    SUBCASE("undeclared line endpoint") {
        const std::string text =
            minimal_file(kNode1, R"({"from": 1, "to": 9, "g": -1.0, "b": 2.0})");
        CHECK_THROWS_WITH_AS(parse_network(text), doctest::Contains("undeclared node"),
                             ValidationError);
    }
    SUBCASE("duplicate unordered pair") {
        const std::string nodes = std::string(kNode1) +
            R"(, {"id": 2, "tau": 1.0, "lambda_p": 1.0, "lambda_q": 1.0,
                  "v_nom": 1.0, "p_nom": 0.0, "q_nom": 0.0})";
        const std::string text = minimal_file(
            nodes,
            R"({"from": 1, "to": 2, "g": -1.0, "b": 2.0}, {"from": 2, "to": 1, "g": -1.0, "b": 2.0})");
        CHECK_THROWS_AS(parse_network(text), ValidationError);
    }
    SUBCASE("unknown fields are rejected") {
        std::string text = minimal_file(kNode1, "");
        text.insert(text.size() - 2, R"(, "extra": 1)");
        CHECK_THROWS_AS(parse_network(text), ParseError);
    }
    SUBCASE("wrong format version") {
        std::string text = minimal_file(kNode1, "");
        const auto pos = text.find("\"format_version\": 1");
        text.replace(pos, 19, "\"format_version\": 2");
        CHECK_THROWS_AS(parse_network(text), ParseError);
    }
    SUBCASE("s_theta outside (-pi/2, pi/2)") {
        std::string text = minimal_file(kNode1, "");
        const auto pos = text.find("[-0.5, 0.5]");
        text.replace(pos, 11, "[-1.6, 0.5]");
        CHECK_THROWS_AS(parse_network(text), ValidationError);
    }
    SUBCASE("malformed json") {
        CHECK_THROWS_AS(parse_network("{"), ParseError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_network("/nonexistent/net.json"), ParseError);
    }
}

TEST_CASE("neighbor conventions") {
    SUBCASE("isolated node is its own neighbor") {
        const std::string text = minimal_file(
            R"({"id": 0, "tau": 1.0, "lambda_p": 1.0, "lambda_q": 1.0,
                "v_nom": 1.0, "p_nom": 0.0, "q_nom": 0.0})",
            "");
        const LoadResult r = parse_network(text);
        CHECK(neighbors(r.model, 0) == std::set<int>{0});
    }
    SUBCASE("two-node network") {
        const std::string nodes =
            R"({"id": 0, "tau": 1.0, "lambda_p": 1.0, "lambda_q": 1.0,
                "v_nom": 1.0, "p_nom": 0.0, "q_nom": 0.0},
               {"id": 1, "tau": 1.0, "lambda_p": 1.0, "lambda_q": 1.0,
                "v_nom": 1.0, "p_nom": 0.0, "q_nom": 0.0})";
        const LoadResult r =
            parse_network(minimal_file(nodes, R"({"from": 0, "to": 1, "g": -2.0, "b": 0.0})"));
        CHECK(neighbors(r.model, 0) == std::set<int>{0, 1});
        CHECK(neighbors(r.model, 1) == std::set<int>{0, 1});
    }
    SUBCASE("unknown node id") {
        const LoadResult r = parse_network(minimal_file(kNode1, ""));
        CHECK_THROWS_AS(r.model.neighbors(42), std::out_of_range);
    }
}

TEST_CASE("serialize/load round trip is field-for-field identical") {
    const LoadResult first = load_network(kBundled);
    const std::string text = serialize_network(first.model, first.safety);
    const LoadResult second = parse_network(text);
    CHECK(first.model == second.model);
    CHECK(first.safety == second.safety);
    // Also through a second generation, to catch asymmetric formatting.
    CHECK(serialize_network(second.model, second.safety) == text);
}

TEST_CASE("self-admittance defaults to zero when absent") {
    const LoadResult r = parse_network(minimal_file(kNode1, ""));
    auto [g, b] = r.model.admittance(1, 1);
    CHECK(g == 0.0);
    CHECK(b == 0.0);
}
