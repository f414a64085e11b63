#include "gridsafe/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace gridsafe {

namespace {

// Platform-stable uniform draw on [0, 1): top 53 bits of the engine output.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Uniform draw from S intersected with [center - delta, center + delta];
// the center is clamped into S first so the draw interval is never empty.
double draw_coupled(std::mt19937_64& rng, const Interval& s, double center, double delta) {
    const double c = std::clamp(center, s.lo, s.hi);
    if (!std::isfinite(delta)) return uniform_in(rng, s.lo, s.hi);
    return uniform_in(rng, std::max(s.lo, c - delta), std::min(s.hi, c + delta));
}

std::size_t period_to_steps(double period, double step, const char* what) {
    const double ratio = period / step;
    const double rounded = std::llround(ratio);
    if (!(period > 0.0) || std::fabs(ratio - rounded) > 1e-9 * std::max(1.0, ratio) ||
        rounded < 1.0) {
        throw std::invalid_argument(std::string(what) +
                                    " must be a positive integer multiple of the step");
    }
    return static_cast<std::size_t>(rounded);
}

struct State {
    double th = 0.0, om = 0.0, v = 0.0;
};

State operator+(const State& a, const State& b) { return {a.th + b.th, a.om + b.om, a.v + b.v}; }
State operator*(double c, const State& a) { return {c * a.th, c * a.om, c * a.v}; }

}  // namespace

std::pair<double, double> switching_policy_step(const SafetySpec& spec, const SwitchingState& state,
                                                const AdmissibleInterval& u_p_range,
                                                const AdmissibleInterval& u_q_range,
                                                double threshold_fraction) {
    if (!(threshold_fraction > 0.0 && threshold_fraction < 0.5)) {
        throw std::invalid_argument("threshold_fraction must be in (0, 0.5)");
    }
    // Crossed endpoints are legitimate here: past the maximal droop the
    // interval is empty, yet the extreme controls still enforce their own
    // one-sided conditions and the switching law is exactly for that regime.
    if (!std::isfinite(u_p_range.lower) || !std::isfinite(u_p_range.upper) ||
        !std::isfinite(u_q_range.lower) || !std::isfinite(u_q_range.upper)) {
        throw std::invalid_argument("switching policy needs finite interval endpoints");
    }
    double u_p = state.prev_u_p;
    double u_q = state.prev_u_q;
    const double om_band = threshold_fraction * spec.s_omega.width();
    if (state.omega >= spec.s_omega.hi - om_band) u_p = u_p_range.upper;
    else if (state.omega <= spec.s_omega.lo + om_band) u_p = u_p_range.lower;
    const double v_band = threshold_fraction * spec.s_v.width();
    if (state.v >= spec.s_v.hi - v_band) u_q = u_q_range.upper;
    else if (state.v <= spec.s_v.lo + v_band) u_q = u_q_range.lower;
    return {u_p, u_q};
}

SimTrace simulate(const NetworkModel& model, int focal, const SafetySpec& spec,
                  const Scenario& sc) {
    if (!(sc.step_s > 0.0)) throw std::invalid_argument("integrator step must be positive");
    if (!(sc.duration_s >= sc.step_s)) {
        throw std::invalid_argument("duration must cover at least one step");
    }
    if (!spec.s_omega.contains(sc.omega0) || !spec.s_v.contains(sc.v0)) {
        throw std::invalid_argument("initial state must lie inside the safe sets");
    }

    const InverterParams& par = model.params(focal);
    const NodeCoupling coupling = NodeCoupling::of(model, focal);
    const std::size_t n_nbr = coupling.terms().size();
    const std::size_t n_steps = static_cast<std::size_t>(std::llround(sc.duration_s / sc.step_s));

    std::size_t ctrl_every = 1;
    if (sc.control_policy == Scenario::ControlPolicy::stochastic) {
        ctrl_every = period_to_steps(sc.control_resample_s, sc.step_s, "control resample period");
        if (!sc.u_p_range.nonempty || !sc.u_q_range.nonempty) {
            throw std::invalid_argument("stochastic control policy needs nonempty intervals");
        }
    }
    std::size_t nbr_every = 1;
    if (sc.neighbor_policy == Scenario::NeighborPolicy::stochastic) {
        nbr_every = period_to_steps(sc.neighbor_resample_s, sc.step_s, "neighbor resample period");
    }

    std::mt19937_64 rng(sc.seed);

    SimTrace trace;
    trace.focal = focal;
    for (const auto& t : coupling.terms()) trace.neighbor_ids.push_back(t.k);
    trace.nbr_theta.resize(n_nbr);
    trace.nbr_v.resize(n_nbr);
    trace.nbr_omega.resize(n_nbr);

    State s{sc.theta0, sc.omega0, sc.v0};
    double u_p = sc.u_p_const;
    double u_q = sc.u_q_const;
    if (sc.control_policy == Scenario::ControlPolicy::switching) {
        if (!std::isfinite(sc.u_p_range.lower) || !std::isfinite(sc.u_p_range.upper) ||
            !std::isfinite(sc.u_q_range.lower) || !std::isfinite(sc.u_q_range.upper)) {
            throw std::invalid_argument("switching control policy needs finite interval endpoints");
        }
        u_p = 0.5 * (sc.u_p_range.lower + sc.u_p_range.upper);
        u_q = 0.5 * (sc.u_q_range.lower + sc.u_q_range.upper);
    }

    std::vector<double> nbr_theta(n_nbr, sc.pinned_theta);
    std::vector<double> nbr_v(n_nbr, 0.0);
    std::vector<double> nbr_omega(n_nbr, 0.0);

    const bool worst_case = sc.neighbor_policy == Scenario::NeighborPolicy::worst_case_hold;
    auto worst_case_v = [&](double v_own) {
        if (sc.worst_case_v_side == Scenario::WorstCaseSide::lower) {
            return std::max(spec.s_v.lo, std::isfinite(spec.delta_v) ? v_own - spec.delta_v : -kInf);
        }
        return std::min(spec.s_v.hi, std::isfinite(spec.delta_v) ? v_own + spec.delta_v : kInf);
    };

    // Worst-case-hold neighbors track the focal voltage continuously, so the
    // rule is applied inside every integrator stage.
    std::vector<double> stage_v(n_nbr);
    auto deriv = [&](const State& x) {
        const std::span<const double> theta_span(nbr_theta);
        std::span<const double> v_span(nbr_v);
        if (worst_case) {
            const double wv = worst_case_v(x.v);
            std::fill(stage_v.begin(), stage_v.end(), wv);
            v_span = std::span<const double>(stage_v);
        }
        const double p = coupling.eval(PowerKind::active, x.v, theta_span, v_span);
        const double q = coupling.eval(PowerKind::reactive, x.v, theta_span, v_span);
        State d;
        d.th = x.om;
        d.om = (-x.om + par.lambda_p * (par.p_nom + u_p - p)) / par.tau;
        d.v = (-x.v + par.lambda_q * (par.q_nom + u_q - q)) / par.tau;
        return d;
    };

    auto record = [&](std::size_t n) {
        trace.t.push_back(n * sc.step_s);
        trace.theta.push_back(s.th);
        trace.omega.push_back(s.om);
        trace.v.push_back(s.v);
        trace.u_p.push_back(u_p);
        trace.u_q.push_back(u_q);
        for (std::size_t j = 0; j < n_nbr; ++j) {
            trace.nbr_theta[j].push_back(nbr_theta[j]);
            trace.nbr_v[j].push_back(worst_case ? worst_case_v(s.v) : nbr_v[j]);
            trace.nbr_omega[j].push_back(nbr_omega[j]);
        }
        trace.margin_omega.push_back(std::min(s.om - spec.s_omega.lo, spec.s_omega.hi - s.om));
        trace.margin_v.push_back(std::min(s.v - spec.s_v.lo, spec.s_v.hi - s.v));
    };

    const double h = sc.step_s;
    for (std::size_t n = 0; n < n_steps; ++n) {
        // Draw order is fixed: controls first, then neighbors ascending by id
        // (theta, omega, v per neighbor).
        if (sc.control_policy == Scenario::ControlPolicy::stochastic && n % ctrl_every == 0) {
            u_p = uniform_in(rng, sc.u_p_range.lower, sc.u_p_range.upper);
            u_q = uniform_in(rng, sc.u_q_range.lower, sc.u_q_range.upper);
        } else if (sc.control_policy == Scenario::ControlPolicy::switching) {
            auto [up, uq] = switching_policy_step(spec, SwitchingState{s.om, s.v, u_p, u_q},
                                                  sc.u_p_range, sc.u_q_range,
                                                  sc.switching_threshold);
            u_p = up;
            u_q = uq;
        }
        if (!worst_case && n % nbr_every == 0) {
            for (std::size_t j = 0; j < n_nbr; ++j) {
                nbr_theta[j] = uniform_in(rng, spec.s_theta.lo, spec.s_theta.hi);
                nbr_omega[j] = draw_coupled(rng, spec.s_omega, s.om, spec.delta_omega);
                nbr_v[j] = draw_coupled(rng, spec.s_v, s.v, spec.delta_v);
            }
        }
        record(n);

        const State k1 = deriv(s);
        const State k2 = deriv(s + (h / 2.0) * k1);
        const State k3 = deriv(s + (h / 2.0) * k2);
        const State k4 = deriv(s + h * k3);
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        if (!std::isfinite(s.th) || !std::isfinite(s.om) || !std::isfinite(s.v)) {
            throw std::runtime_error("state became non-finite at step " + std::to_string(n + 1));
        }
    }
    record(n_steps);
    return trace;
}

ViolationReport safety_monitor(const SimTrace& trace, const SafetySpec& spec, double tolerance,
                               double allowance) {
    ViolationReport rep;
    rep.worst_margin = kInf;
    auto scan = [&](const std::vector<double>& margins, char channel) {
        for (std::size_t n = 0; n < margins.size(); ++n) {
            const double m = margins[n];
            if (m < rep.worst_margin) {
                rep.worst_margin = m;
                rep.worst_time = trace.t[n];
                rep.worst_channel = channel;
            }
            if (m < -tolerance) {
                const Violation v{n, trace.t[n], channel, m};
                if (m < -(tolerance + allowance)) rep.true_violations.push_back(v);
                else rep.discretization_violations.push_back(v);
            }
        }
    };
    scan(trace.margin_omega, 'w');
    scan(trace.margin_v, 'v');
    // Margins are recomputed from the recorded states by construction of the
    // trace; spec is carried for interface symmetry with future exporters.
    (void)spec;
    return rep;
}

DerivativeBounds derivative_bounds(const NetworkModel& model, int node, const SafetySpec& spec,
                                   double u_p_mag, double u_q_mag) {
    const NodeCoupling c = NodeCoupling::of(model, node);
    std::vector<Interval> box(c.dims());
    box[0] = spec.s_v;
    for (std::size_t j = 0; j < c.terms().size(); ++j) {
        box[1 + 2 * j] = spec.s_theta;
        box[2 + 2 * j] = spec.s_v;
    }
    const double p_mag = c.enclose_flat(PowerKind::active, box).mag();
    const double q_mag = c.enclose_flat(PowerKind::reactive, box).mag();
    const InverterParams& par = model.params(node);
    DerivativeBounds b;
    b.omega_dot = (spec.s_omega.mag() +
                   par.lambda_p * (std::fabs(par.p_nom) + u_p_mag + p_mag)) / par.tau;
    b.v_dot = (spec.s_v.mag() +
               par.lambda_q * (std::fabs(par.q_nom) + u_q_mag + q_mag)) / par.tau;
    return b;
}

}  // namespace gridsafe
