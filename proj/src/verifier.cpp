#include "gridsafe/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gridsafe {

namespace {

Interval coupled_v_interval(const SafetySpec& spec, double v_pin) {
    if (!std::isfinite(spec.delta_v)) return spec.s_v;
    auto m = intersect(spec.s_v, Interval(v_pin - spec.delta_v, v_pin + spec.delta_v));
    if (!m) {
        throw OptimizerError("coupled neighbor voltage box is empty at v = " + std::to_string(v_pin));
    }
    return *m;
}

DisturbanceBox active_box(const NetworkModel& model, int node, const SafetySpec& spec,
                          OwnVoltageMode mode) {
    const Interval v_own = (mode == OwnVoltageMode::free_in_safe_set)
                               ? spec.s_v
                               : Interval::point(0.0);
    DisturbanceBox box = DisturbanceBox::uniform(model, node, v_own, spec.s_theta, spec.s_v);
    if (std::isfinite(spec.delta_v)) {
        box.coupled = true;
        box.delta_v = spec.delta_v;
        if (mode == OwnVoltageMode::pinned_nominal) {
            // Own voltage is a point, so the coupling collapses to fixed
            // per-neighbor intervals.
            box.coupled = false;
            for (auto& v : box.v_dev) v = coupled_v_interval(spec, 0.0);
        }
    }
    return box;
}

DisturbanceBox reactive_box(const NetworkModel& model, int node, const SafetySpec& spec,
                            double v_pin) {
    DisturbanceBox box = DisturbanceBox::uniform(model, node, Interval::point(v_pin),
                                                 spec.s_theta, spec.s_v);
    for (auto& v : box.v_dev) v = coupled_v_interval(spec, v_pin);
    return box;
}

CertifiedBound run_engine(const NetworkModel& model, int node, PowerKind kind,
                          const DisturbanceBox& box, OptSense sense, const VerifyOptions& opt,
                          const char* what) {
    CertifiedBound bound;
    const bool separable_ok = opt.form == PowerForm::exact && box.v_own.is_point() &&
                              !(box.coupled && std::isfinite(box.delta_v));
    if (separable_ok) {
        bound = extremize_separable(model, node, kind, box, sense);
    } else {
        bound = extremize_bnb(model, node, kind, box, sense, opt.tol, opt.max_boxes, opt.form);
    }
    if (!bound.converged) {
        std::ostringstream os;
        os << "optimizer budget exceeded while computing " << what << " for node " << node
           << " (enclosure width " << bound.width() << " > tol " << opt.tol << ")";
        throw OptimizerError(os.str());
    }
    return bound;
}

void check_droop(double lambda, const char* name) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument(std::string(name) + " must be positive");
    }
}

}  // namespace

PowerEnvelope power_envelope(const NetworkModel& model, int node, const SafetySpec& spec,
                             const VerifyOptions& options) {
    PowerEnvelope env;
    // The frequency bound pins omega, which is absent from the coupling
    // equations, so P_max and P_min share one box.
    const DisturbanceBox pbox = active_box(model, node, spec, options.own_voltage);
    env.p_max = run_engine(model, node, PowerKind::active, pbox, OptSense::maximize, options, "P_max");
    env.p_min = run_engine(model, node, PowerKind::active, pbox, OptSense::minimize, options, "P_min");
    // The voltage bounds pin the own voltage, which both enters the
    // objective and anchors the coupled neighbor intervals.
    const DisturbanceBox qmax_box = reactive_box(model, node, spec, spec.s_v.lo);
    const DisturbanceBox qmin_box = reactive_box(model, node, spec, spec.s_v.hi);
    env.q_max = run_engine(model, node, PowerKind::reactive, qmax_box, OptSense::maximize, options, "Q_max");
    env.q_min = run_engine(model, node, PowerKind::reactive, qmin_box, OptSense::minimize, options, "Q_min");
    return env;
}

AdmissibleInterval frequency_interval(const PowerEnvelope& env, double p_nom, double lambda_p,
                                      const SafetySpec& spec) {
    check_droop(lambda_p, "lambda_p");
    const double lower = spec.s_omega.lo / lambda_p + env.p_max_value() - p_nom;
    const double upper = spec.s_omega.hi / lambda_p + env.p_min_value() - p_nom;
    return AdmissibleInterval::from(lower, upper);
}

AdmissibleInterval voltage_interval(const PowerEnvelope& env, double q_nom, double lambda_q,
                                    const SafetySpec& spec) {
    check_droop(lambda_q, "lambda_q");
    const double lower = spec.s_v.lo / lambda_q + env.q_max_value() - q_nom;
    const double upper = spec.s_v.hi / lambda_q + env.q_min_value() - q_nom;
    return AdmissibleInterval::from(lower, upper);
}

std::pair<AdmissibleInterval, AdmissibleInterval> admissible_controls(
    const NetworkModel& model, int node, double lambda_p, double lambda_q,
    const SafetySpec& spec, const VerifyOptions& options) {
    check_droop(lambda_p, "lambda_p");
    check_droop(lambda_q, "lambda_q");
    const PowerEnvelope env = power_envelope(model, node, spec, options);
    const auto& params = model.params(node);
    return {frequency_interval(env, params.p_nom, lambda_p, spec),
            voltage_interval(env, params.q_nom, lambda_q, spec)};
}

std::string DroopStar::to_string() const {
    if (infinite_) return "inf";
    std::ostringstream os;
    os.precision(17);
    os << value_;
    return os.str();
}

namespace {

DroopStar droop_limit(double safe_width, const Interval& spread, double tol) {
    // spread encloses (max - min) of the relevant power over its boxes.
    if (spread.hi <= 0.0) return DroopStar::infinite();           // interval never empties
    if (spread.lo <= 0.0 && spread.width() <= tol) return DroopStar::infinite();  // isolated node
    return DroopStar::finite(safe_width / spread.hi);             // conservative side
}

}  // namespace

MaxDroopResult max_droop_from(const PowerEnvelope& env, const SafetySpec& spec, double tol,
                              int node) {
    MaxDroopResult out;
    const Interval p_spread(env.p_max.lo - env.p_min.hi, env.p_max.hi - env.p_min.lo);
    const Interval q_spread(env.q_max.lo - env.q_min.hi, env.q_max.hi - env.q_min.lo);
    out.lambda_p_star = droop_limit(spec.s_omega.width(), p_spread, tol);
    out.lambda_q_star = droop_limit(spec.s_v.width(), q_spread, tol);

    if (!(spec.s_omega.lo < 0.0 && 0.0 < spec.s_omega.hi)) {
        out.warnings.push_back("node " + std::to_string(node) +
                               ": 0 is not interior to the frequency safe set; no droop value "
                               "can make the frequency interval nonempty");
    }
    if (!(spec.s_v.lo < 0.0 && 0.0 < spec.s_v.hi)) {
        out.warnings.push_back("node " + std::to_string(node) +
                               ": 0 is not interior to the voltage safe set; the interior "
                               "condition is sufficient but not necessary for the voltage "
                               "interval, so this is reported as a warning only");
    }
    return out;
}

MaxDroopResult max_droop(const NetworkModel& model, int node, const SafetySpec& spec,
                         const VerifyOptions& options) {
    const PowerEnvelope env = power_envelope(model, node, spec, options);
    return max_droop_from(env, spec, options.tol, node);
}

AdmissibleReport verify_node(const NetworkModel& model, int node, double lambda_p,
                             double lambda_q, const SafetySpec& spec,
                             const VerifyOptions& options) {
    check_droop(lambda_p, "lambda_p");
    check_droop(lambda_q, "lambda_q");
    AdmissibleReport rep;
    rep.node = node;
    rep.envelope = power_envelope(model, node, spec, options);
    const auto& params = model.params(node);
    rep.u_omega = frequency_interval(rep.envelope, params.p_nom, lambda_p, spec);
    rep.u_v = voltage_interval(rep.envelope, params.q_nom, lambda_q, spec);
    MaxDroopResult md = max_droop_from(rep.envelope, spec, options.tol, node);
    rep.lambda_p_star = md.lambda_p_star;
    rep.lambda_q_star = md.lambda_q_star;
    rep.warnings = std::move(md.warnings);
    return rep;
}

ToyControls simple_example(double lambda_p) {
    check_droop(lambda_p, "lambda_p");
    // Toy envelope: P ranges over [-2, 2] at either frequency bound, safe set
    // [-1, 1], zero nominal set-point.
    return ToyControls{-1.0 / lambda_p + 2.0, 1.0 / lambda_p - 2.0};
}

double simple_example_max_droop() {
    const double safe_width = 2.0;   // upper - lower bound of the toy safe set
    const double spread = 4.0;       // P_max - P_min of the toy coupling
    return safe_width / spread;
}

NagumoMargins nagumo_check(const NetworkModel& model, int node, double u_p, double u_q,
                           const SafetySpec& spec, const VerifyOptions& options) {
    const PowerEnvelope env = power_envelope(model, node, spec, options);
    const auto& params = model.params(node);
    NagumoMargins m;
    // tau * omega_dot = -omega + lambda_p (P0 + u - P); worst case at the
    // upper bound uses the minimal P, at the lower bound the maximal P.
    m.omega_upper = spec.s_omega.hi - params.lambda_p * (params.p_nom + u_p - env.p_min_value());
    m.omega_lower = -spec.s_omega.lo + params.lambda_p * (params.p_nom + u_p - env.p_max_value());
    // tau * v_dot = -v + lambda_q (Q0 + u - Q) in deviation coordinates.
    m.v_upper = spec.s_v.hi - params.lambda_q * (params.q_nom + u_q - env.q_min_value());
    m.v_lower = -spec.s_v.lo + params.lambda_q * (params.q_nom + u_q - env.q_max_value());
    return m;
}

DroopSweepTable droop_sweep(const NetworkModel& model, int node, const SafetySpec& spec,
                            std::span<const double> lambda_grid, Channel channel,
                            const VerifyOptions& options) {
    if (lambda_grid.empty()) throw std::invalid_argument("empty droop sweep grid");
    const PowerEnvelope env = power_envelope(model, node, spec, options);
    const MaxDroopResult md = max_droop_from(env, spec, options.tol, node);
    const auto& params = model.params(node);

    DroopSweepTable table;
    table.channel = channel;
    table.lambda_star = (channel == Channel::frequency) ? md.lambda_p_star : md.lambda_q_star;
    for (double lambda : lambda_grid) {
        const AdmissibleInterval iv = (channel == Channel::frequency)
                                          ? frequency_interval(env, params.p_nom, lambda, spec)
                                          : voltage_interval(env, params.q_nom, lambda, spec);
        table.rows.push_back(DroopSweepRow{lambda, iv.lower, iv.upper, iv.nonempty, false});
    }
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        if (table.rows[i - 1].nonempty != table.rows[i].nonempty) {
            table.rows[i].crossing = true;
            break;
        }
    }
    return table;
}

std::vector<SensitivityRow> sensitivity_sweep(const NetworkModel& model, int node,
                                              const SafetySpec& base_spec, SweepAxis axis,
                                              std::span<const double> grid,
                                              const VerifyOptions& options) {
    if (grid.empty()) throw std::invalid_argument("empty sensitivity sweep grid");
    std::vector<SensitivityRow> rows;
    for (double value : grid) {
        SafetySpec spec = base_spec;
        switch (axis) {
            case SweepAxis::delta_v:
                if (value < 0.0) throw std::invalid_argument("delta_v grid values must be >= 0");
                spec.delta_v = value;
                break;
            case SweepAxis::s_theta_halfwidth:
                if (value < 0.0) throw std::invalid_argument("s_theta half-widths must be >= 0");
                spec.s_theta = Interval(-value, value);
                break;
            case SweepAxis::s_v_width: {
                if (value < 0.0) throw std::invalid_argument("s_v widths must be >= 0");
                const double mid = base_spec.s_v.mid();
                spec.s_v = Interval(mid - value / 2.0, mid + value / 2.0);
                break;
            }
        }
        // Only the reactive envelope enters lambda_q*.
        PowerEnvelope env;
        env.q_max = run_engine(model, node, PowerKind::reactive,
                               reactive_box(model, node, spec, spec.s_v.lo), OptSense::maximize,
                               options, "Q_max");
        env.q_min = run_engine(model, node, PowerKind::reactive,
                               reactive_box(model, node, spec, spec.s_v.hi), OptSense::minimize,
                               options, "Q_min");
        const Interval q_spread(env.q_max.lo - env.q_min.hi, env.q_max.hi - env.q_min.lo);
        SensitivityRow row;
        row.axis_value = value;
        row.lambda_q_star = droop_limit(spec.s_v.width(), q_spread, options.tol);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace gridsafe
