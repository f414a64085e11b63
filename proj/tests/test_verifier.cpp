#include <doctest.h>

#include "gridsafe/verifier.hpp"
#include "test_helpers.hpp"

#include <cmath>

using namespace gridsafe;
using namespace gridsafe::testing;

namespace {

constexpr double kPi = 3.14159265358979323846;

SafetySpec uncoupled_spec() {
    SafetySpec s = paper_safety_spec();
    s.delta_v = kInf;
    return s;
}

}  // namespace

TEST_CASE("isolated node has a zero envelope and infinite droop limits") {
    const NetworkModel m = isolated_node_model();
    const SafetySpec spec = paper_safety_spec();
    const PowerEnvelope env = power_envelope(m, 0, spec);
    CHECK(std::fabs(env.p_max_value()) < 1e-12);
    CHECK(std::fabs(env.p_min_value()) < 1e-12);
    CHECK(std::fabs(env.q_max_value()) < 1e-12);
    CHECK(std::fabs(env.q_min_value()) < 1e-12);

    const MaxDroopResult md = max_droop(m, 0, spec);
    CHECK(md.lambda_p_star.is_infinite());
    CHECK(md.lambda_q_star.is_infinite());
    CHECK(md.lambda_p_star.to_string() == "inf");
}

TEST_CASE("two-node toy P extrema match hand calculus") {
    // P = (1 + v_own)(1 + v_2)(-2 cos t): magnitudes in [0.6, 1.2]^2 and
    // cos t in [cos(pi/6), 1] give max -2*0.36*cos(pi/6) and min -2*1.44.
    const NetworkModel m = two_node_model(-2.0, 0.0);
    const SafetySpec spec = uncoupled_spec();
    const PowerEnvelope env = power_envelope(m, 1, spec, VerifyOptions{1e-9});
    CHECK(env.p_max_value() == doctest::Approx(-0.72 * std::cos(kPi / 6)).epsilon(1e-7));
    CHECK(env.p_min_value() == doctest::Approx(-2.88).epsilon(1e-7));
    CHECK(env.p_min_value() <= env.p_max_value());
}

TEST_CASE("bundled envelope is stable across both optimizer engines") {
    const LoadResult r = load_network(kBundledNetwork);
    VerifyOptions opt;
    opt.tol = 1e-7;
    const PowerEnvelope env = power_envelope(r.model, 2, r.safety, opt);
    // The reactive boxes pin the own voltage, so the analytic engine runs
    // them; force branch-and-bound over the same boxes and compare.
    CHECK(env.q_max.engine == CertifiedBound::Engine::analytic);
    CHECK(env.p_max.engine == CertifiedBound::Engine::branch_and_bound);

    DisturbanceBox qbox = DisturbanceBox::uniform(r.model, 2, Interval::point(r.safety.s_v.lo),
                                                  r.safety.s_theta, r.safety.s_v);
    for (auto& v : qbox.v_dev) {
        v = *intersect(r.safety.s_v, Interval(r.safety.s_v.lo - r.safety.delta_v,
                                              r.safety.s_v.lo + r.safety.delta_v));
    }
    const CertifiedBound viaBnb =
        extremize_bnb(r.model, 2, PowerKind::reactive, qbox, OptSense::maximize, 1e-7);
    CHECK(std::fabs(viaBnb.mid() - env.q_max.mid()) <= 2e-7);
}

TEST_CASE("interval endpoint structure") {
    const LoadResult r = load_network(kBundledNetwork);
    const VerifyOptions opt;
    const PowerEnvelope env = power_envelope(r.model, 1, r.safety, opt);
    const auto& par = r.model.params(1);

    SUBCASE("identity: width = safe-width/lambda - envelope spread") {
        for (double lambda : {0.3, 1.0, 2.51, 7.0, 20.0}) {
            const AdmissibleInterval iv = frequency_interval(env, par.p_nom, lambda, r.safety);
            const double want = r.safety.s_omega.width() / lambda -
                                (env.p_max_value() - env.p_min_value());
            CHECK(std::fabs(iv.width() - want) <= 1e-9);
        }
    }

    SUBCASE("hyperbolic endpoints: (lower - P_max + P0) * lambda is constant") {
        for (double lambda : {0.5, 1.0, 4.0}) {
            const AdmissibleInterval iv = frequency_interval(env, par.p_nom, lambda, r.safety);
            CHECK((iv.lower - env.p_max_value() + par.p_nom) * lambda ==
                  doctest::Approx(r.safety.s_omega.lo).epsilon(1e-10));
        }
    }

    SUBCASE("at lambda-star the interval closes") {
        const MaxDroopResult md = max_droop_from(env, r.safety, opt.tol, 1);
        REQUIRE(!md.lambda_p_star.is_infinite());
        const AdmissibleInterval iv =
            frequency_interval(env, par.p_nom, md.lambda_p_star.value(), r.safety);
        CHECK(std::fabs(iv.upper - iv.lower) <= 2.0 * opt.tol);
        const AdmissibleInterval ivq =
            voltage_interval(env, r.model.params(1).q_nom, md.lambda_q_star.value(), r.safety);
        CHECK(std::fabs(ivq.upper - ivq.lower) <= 2.0 * opt.tol);
    }

    SUBCASE("small lambda is nonempty, large lambda is empty") {
        const MaxDroopResult md = max_droop_from(env, r.safety, opt.tol, 1);
        const double star = md.lambda_p_star.value();
        CHECK(frequency_interval(env, par.p_nom, star / 10.0, r.safety).nonempty);
        CHECK(!frequency_interval(env, par.p_nom, star * 1.1, r.safety).nonempty);
        const double qstar = md.lambda_q_star.value();
        CHECK(voltage_interval(env, par.q_nom, qstar / 10.0, r.safety).nonempty);
        CHECK(!voltage_interval(env, par.q_nom, qstar * 1.1, r.safety).nonempty);
    }

    SUBCASE("non-positive droop is rejected") {
        CHECK_THROWS_AS(frequency_interval(env, 0.0, 0.0, r.safety), std::invalid_argument);
        CHECK_THROWS_AS(admissible_controls(r.model, 1, -1.0, 0.2, r.safety),
                        std::invalid_argument);
    }

    SUBCASE("nonempty exactly when lambda is below lambda-star") {
        const MaxDroopResult md = max_droop_from(env, r.safety, opt.tol, 1);
        std::mt19937_64 rng(77);
        for (int trial = 0; trial < 200; ++trial) {
            const double lp = uniform(rng, 0.05, 2.0) * md.lambda_p_star.value();
            const AdmissibleInterval iv = frequency_interval(env, par.p_nom, lp, r.safety);
            if (lp < md.lambda_p_star.value() * (1.0 - 1e-12)) CHECK(iv.nonempty);
            if (lp > md.lambda_p_star.value() * (1.0 + 1e-12)) CHECK(!iv.nonempty);
            const double lq = uniform(rng, 0.05, 2.0) * md.lambda_q_star.value();
            const AdmissibleInterval ivq = voltage_interval(env, par.q_nom, lq, r.safety);
            if (lq < md.lambda_q_star.value() * (1.0 - 1e-12)) CHECK(ivq.nonempty);
            if (lq > md.lambda_q_star.value() * (1.0 + 1e-12)) CHECK(!ivq.nonempty);
        }
    }
}

TEST_CASE("P envelope ignores the frequency safe set") {
    const LoadResult r = load_network(kBundledNetwork);
    const PowerEnvelope env1 = power_envelope(r.model, 2, r.safety);
    SafetySpec wide = r.safety;
    wide.set_omega_hz(Interval(-30.0, 30.0));
    const PowerEnvelope env2 = power_envelope(r.model, 2, wide);
    CHECK(env1.p_max_value() == env2.p_max_value());
    CHECK(env1.p_min_value() == env2.p_min_value());

    // Doubling the frequency safe set doubles lambda_p*.
    const MaxDroopResult md1 = max_droop_from(env1, r.safety, 1e-6, 2);
    SafetySpec doubled = r.safety;
    doubled.set_omega_hz(Interval(-6.0, 6.0));
    const MaxDroopResult md2 = max_droop_from(env2, doubled, 1e-6, 2);
    CHECK(md2.lambda_p_star.value() ==
          doctest::Approx(2.0 * md1.lambda_p_star.value()).epsilon(1e-12));
}

TEST_CASE("simple example reproduces the toy model") {
    const ToyControls at1 = simple_example(1.0);
    CHECK(at1.upper == -1.0);
    CHECK(at1.lower == 1.0);
    CHECK(!at1.nonempty());

    const ToyControls at_star = simple_example(0.5);
    CHECK(at_star.lower == doctest::Approx(at_star.upper).epsilon(1e-15));
    CHECK(simple_example_max_droop() == 0.5);

    const ToyControls at_quarter = simple_example(0.25);
    CHECK(at_quarter.lower == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(at_quarter.upper == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(at_quarter.nonempty());

    CHECK_THROWS_AS(simple_example(0.0), std::invalid_argument);

    // Sweep across the crossing: admissibility flips exactly once at 0.5.
    bool was_nonempty = true;
    int flips = 0;
    for (double lambda = 0.1; lambda <= 1.01; lambda += 0.05) {
        const ToyControls tc = simple_example(lambda);
        if (tc.nonempty() != was_nonempty) {
            ++flips;
            was_nonempty = tc.nonempty();
        }
    }
    CHECK(flips == 1);
}

TEST_CASE("nagumo margins track the admissible slack") {
    const LoadResult r = load_network(kBundledNetwork);
    const int node = 2;
    VerifyOptions opt;
    const auto& par = r.model.params(node);
    const double lambda_p = par.lambda_p;
    const double lambda_q = par.lambda_q;
    auto [u_omega, u_v] = admissible_controls(r.model, node, lambda_p, lambda_q, r.safety, opt);
    REQUIRE(u_omega.nonempty);
    REQUIRE(u_v.nonempty);

    SUBCASE("interior control has margins proportional to the slack") {
        const double s_p = 0.25 * u_omega.width();
        const double s_q = 0.25 * u_v.width();
        const NagumoMargins m = nagumo_check(r.model, node, u_omega.lower + s_p,
                                             u_v.lower + s_q, r.safety, opt);
        CHECK(m.all_pass(opt.tol));
        CHECK(m.omega_lower == doctest::Approx(lambda_p * s_p).epsilon(1e-9));
        CHECK(m.omega_upper ==
              doctest::Approx(lambda_p * (u_omega.width() - s_p)).epsilon(1e-9));
        CHECK(m.v_lower == doctest::Approx(lambda_q * s_q).epsilon(1e-9));
        CHECK(m.v_upper == doctest::Approx(lambda_q * (u_v.width() - s_q)).epsilon(1e-9));
    }

    SUBCASE("boundary control has a vanishing margin") {
        const NagumoMargins m = nagumo_check(r.model, node, u_omega.upper, u_v.upper,
                                             r.safety, opt);
        CHECK(std::fabs(m.omega_upper) <= 4.0 * opt.tol * lambda_p + 1e-9);
        CHECK(m.omega_lower >= -opt.tol);
    }

    SUBCASE("inadmissible control fails the boundary condition") {
        const NagumoMargins m = nagumo_check(r.model, node, u_omega.upper + 0.5,
                                             u_v.lower + 0.25 * u_v.width(), r.safety, opt);
        CHECK(m.omega_upper < 0.0);
        CHECK(!m.all_pass(opt.tol));
    }
}

TEST_CASE("droop sweep marks a single crossing") {
    const LoadResult r = load_network(kBundledNetwork);
    for (int node : {1, 3}) {
        for (Channel ch : {Channel::frequency, Channel::voltage}) {
            const MaxDroopResult md = max_droop(r.model, node, r.safety);
            const double star = (ch == Channel::frequency) ? md.lambda_p_star.value()
                                                           : md.lambda_q_star.value();
            std::vector<double> grid;
            for (int i = 0; i < 21; ++i) grid.push_back(star * (0.5 + i * 0.05));
            const DroopSweepTable table = droop_sweep(r.model, node, r.safety, grid, ch);
            int flips = 0;
            std::size_t crossing_at = 0;
            for (std::size_t i = 1; i < table.rows.size(); ++i) {
                if (table.rows[i].nonempty != table.rows[i - 1].nonempty) {
                    ++flips;
                    crossing_at = i;
                }
            }
            CHECK(flips == 1);
            CHECK(table.rows[crossing_at].crossing);
            // The crossing cell brackets lambda-star.
            CHECK(table.rows[crossing_at - 1].lambda <= star * (1.0 + 1e-9));
            CHECK(table.rows[crossing_at].lambda >= star * (1.0 - 1e-9));
        }
    }
    CHECK_THROWS_AS(droop_sweep(load_network(kBundledNetwork).model, 1,
                                load_network(kBundledNetwork).safety, {}, Channel::frequency),
                    std::invalid_argument);
}

TEST_CASE("enlarging the disturbance box only shrinks the interval") {
    std::mt19937_64 rng(505);
    for (int trial = 0; trial < 10; ++trial) {
        const NetworkModel m = random_model(rng, 3);
        const int node = m.nodes()[0].id;
        SafetySpec small = paper_safety_spec();
        small.delta_v = uniform(rng, 0.0, 0.05);
        const double half = uniform(rng, 0.1, 0.3);
        small.s_theta = Interval(-half, half);
        SafetySpec big = small;
        big.delta_v = small.delta_v + uniform(rng, 0.01, 0.2);
        big.s_theta = Interval(-half - 0.1, half + 0.1);

        const PowerEnvelope env_small = power_envelope(m, node, small);
        const PowerEnvelope env_big = power_envelope(m, node, big);
        const auto& par = m.params(node);
        const AdmissibleInterval iv_small = frequency_interval(env_small, par.p_nom, 1.0, small);
        const AdmissibleInterval iv_big = frequency_interval(env_big, par.p_nom, 1.0, big);
        CHECK(iv_big.upper <= iv_small.upper + 1e-9);
        CHECK(iv_big.lower >= iv_small.lower - 1e-9);
    }
}

TEST_CASE("sensitivity sweeps are weakly decreasing on the bundled network") {
    const LoadResult r = load_network(kBundledNetwork);
    const int node = 3;  // carries the resistive line, so delta_v binds

    SUBCASE("delta_v axis") {
        std::vector<double> grid;
        for (int i = 0; i < 8; ++i) grid.push_back(0.6 * i / 7.0);
        const auto rows = sensitivity_sweep(r.model, node, r.safety, SweepAxis::delta_v, grid);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i].lambda_q_star.value() <=
                  rows[i - 1].lambda_q_star.value() + 1e-4);
        }
        // Endpoints bracket the interior.
        for (const auto& row : rows) {
            CHECK(row.lambda_q_star.value() <= rows.front().lambda_q_star.value() + 1e-4);
            CHECK(row.lambda_q_star.value() >= rows.back().lambda_q_star.value() - 1e-4);
        }
    }

    SUBCASE("s_theta axis") {
        std::vector<double> grid;
        for (int i = 0; i < 8; ++i) grid.push_back(0.05 + (kPi / 6.0 - 0.05) * i / 7.0);
        const auto rows =
            sensitivity_sweep(r.model, node, r.safety, SweepAxis::s_theta_halfwidth, grid);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i].lambda_q_star.value() <=
                  rows[i - 1].lambda_q_star.value() + 1e-4);
        }
    }

    SUBCASE("s_v width axis runs without an asserted shape") {
        std::vector<double> grid = {0.3, 0.45, 0.6, 0.75};
        const auto rows = sensitivity_sweep(r.model, node, r.safety, SweepAxis::s_v_width, grid);
        CHECK(rows.size() == 4);
        for (const auto& row : rows) CHECK(!row.lambda_q_star.is_infinite());
    }

    CHECK_THROWS_AS(sensitivity_sweep(r.model, node, r.safety, SweepAxis::delta_v, {}),
                    std::invalid_argument);
}

TEST_CASE("warnings fire when 0 is not interior to a safe set") {
    const NetworkModel m = two_node_model(-1.0, 1.0);
    SafetySpec spec = paper_safety_spec();
    spec.set_omega_hz(Interval(0.0, 3.0));
    const MaxDroopResult md = max_droop(m, 1, spec);
    REQUIRE(md.warnings.size() == 1);
    CHECK(md.warnings[0].find("frequency") != std::string::npos);
}

TEST_CASE("conservative sides are the reported envelope values") {
    const LoadResult r = load_network(kBundledNetwork);
    const PowerEnvelope env = power_envelope(r.model, 4, r.safety);
    CHECK(env.p_max_value() == env.p_max.hi);
    CHECK(env.p_min_value() == env.p_min.lo);
    CHECK(env.q_max_value() == env.q_max.hi);
    CHECK(env.q_min_value() == env.q_min.lo);
    CHECK(env.q_min_value() <= env.q_max_value());
}

TEST_CASE("verify_node ties the pieces together") {
    const LoadResult r = load_network(kBundledNetwork);
    const AdmissibleReport rep = verify_node(r.model, 1, 2.51, 0.2, r.safety);
    CHECK(rep.node == 1);
    CHECK(rep.u_omega.nonempty);
    CHECK(rep.u_v.nonempty);
    CHECK(!rep.lambda_p_star.is_infinite());
    CHECK(rep.lambda_p_star.value() > 2.51);
    CHECK(rep.lambda_q_star.value() > 0.2);
    CHECK(rep.warnings.empty());
}

TEST_CASE("taylor3 engine shifts envelopes by at most the remainder bound") {
    const LoadResult r = load_network(kBundledNetwork);
    VerifyOptions exact_opt, taylor_opt;
    taylor_opt.form = PowerForm::taylor3;
    const int node = 2;
    const double rem = taylor_remainder_bound(r.model, node, r.safety);
    const PowerEnvelope e1 = power_envelope(r.model, node, r.safety, exact_opt);
    const PowerEnvelope e2 = power_envelope(r.model, node, r.safety, taylor_opt);
    const double slack = rem + 2.0 * exact_opt.tol;
    CHECK(std::fabs(e1.p_max_value() - e2.p_max_value()) <= slack);
    CHECK(std::fabs(e1.p_min_value() - e2.p_min_value()) <= slack);
    CHECK(std::fabs(e1.q_max_value() - e2.q_max_value()) <= slack);
    CHECK(std::fabs(e1.q_min_value() - e2.q_min_value()) <= slack);
}

TEST_CASE("pinned-nominal own voltage narrows the frequency envelope") {
    const LoadResult r = load_network(kBundledNetwork);
    VerifyOptions pinned;
    pinned.own_voltage = OwnVoltageMode::pinned_nominal;
    const PowerEnvelope free_env = power_envelope(r.model, 1, r.safety);
    const PowerEnvelope pin_env = power_envelope(r.model, 1, r.safety, pinned);
    CHECK(pin_env.p_max_value() <= free_env.p_max_value() + 1e-9);
    CHECK(pin_env.p_min_value() >= free_env.p_min_value() - 1e-9);
}
