#pragma once

#include "gridsafe/verifier.hpp"

#include <cstdint>
#include <vector>

namespace gridsafe {

/// One simulation run description. Stochastic draws are fully determined by
/// the seed; resample periods must be integer multiples of the step.
struct Scenario {
    double duration_s = 20.0;
    double step_s = 1e-3;

    enum class ControlPolicy { constant, stochastic, switching };
    ControlPolicy control_policy = ControlPolicy::stochastic;
    double control_resample_s = 1.0;
    double u_p_const = 0.0;                // constant policy
    double u_q_const = 0.0;
    AdmissibleInterval u_p_range;          // stochastic and switching policies
    AdmissibleInterval u_q_range;
    double switching_threshold = 0.1;      // fraction of the safe-set width, in (0, 0.5)

    enum class NeighborPolicy { stochastic, worst_case_hold };
    NeighborPolicy neighbor_policy = NeighborPolicy::stochastic;
    double neighbor_resample_s = 1e-2;
    double pinned_theta = 0.0;             // worst-case-hold angle
    enum class WorstCaseSide { lower, upper };
    WorstCaseSide worst_case_v_side = WorstCaseSide::lower;

    double theta0 = 0.0;                   // initial state (rad, rad/s, p.u.)
    double omega0 = 0.0;
    double v0 = 0.0;

    std::uint64_t seed = 0;
};

/// Recorded trajectory of the focal node. Frequencies are stored in rad/s;
/// the CSV exporter converts to Hz. Neighbor angles are the angle differences
/// entering the coupling equations (the focal node is the reference angle).
struct SimTrace {
    int focal = -1;
    std::vector<int> neighbor_ids;
    std::vector<double> t;
    std::vector<double> theta, omega, v;            // focal state
    std::vector<double> u_p, u_q;                   // applied controls
    std::vector<std::vector<double>> nbr_theta;     // [neighbor][step]
    std::vector<std::vector<double>> nbr_v;
    std::vector<std::vector<double>> nbr_omega;     // recorded only; absent from power flow
    std::vector<double> margin_omega;               // min(w - w_lo, w_hi - w), rad/s
    std::vector<double> margin_v;                   // p.u.
    std::size_t steps() const { return t.size(); }
};

/// Integrates the exact nonlinear dynamics of the focal node with classical
/// fixed-step RK4; neighbor states and controls are held between their
/// resample instants (worst-case-hold neighbors track their pinned rule
/// continuously). Throws std::invalid_argument for bad scenarios and
/// std::runtime_error if the state leaves the reals.
SimTrace simulate(const NetworkModel& model, int focal, const SafetySpec& spec,
                  const Scenario& scenario);

/// State-dependent switching rule: within threshold * width of a safe-set
/// bound apply the corresponding extreme control, otherwise hold.
struct SwitchingState {
    double omega = 0.0;  // rad/s
    double v = 0.0;      // p.u. deviation
    double prev_u_p = 0.0;
    double prev_u_q = 0.0;
};
std::pair<double, double> switching_policy_step(const SafetySpec& spec, const SwitchingState& state,
                                                const AdmissibleInterval& u_p_range,
                                                const AdmissibleInterval& u_q_range,
                                                double threshold_fraction);

struct Violation {
    std::size_t step = 0;
    double time = 0.0;
    char channel = 'w';  // 'w' frequency, 'v' voltage
    double margin = 0.0;
};

struct ViolationReport {
    std::vector<Violation> true_violations;
    std::vector<Violation> discretization_violations;  // within the step allowance
    double worst_margin = 0.0;
    double worst_time = 0.0;
    char worst_channel = 'w';
    bool empty() const { return true_violations.empty() && discretization_violations.empty(); }
};

/// Lists every step whose margin is below -tolerance. Margins within the
/// additional `allowance` (typically step * worst-case derivative bound) are
/// classified as discretization-level rather than true violations.
ViolationReport safety_monitor(const SimTrace& trace, const SafetySpec& spec, double tolerance,
                               double allowance = 0.0);

/// Coarse certified bounds on |omega_dot| (rad/s^2) and |v_dot| (p.u./s)
/// over the safe sets and the full uncoupled disturbance box, for sizing the
/// discretization allowance.
struct DerivativeBounds {
    double omega_dot = 0.0;
    double v_dot = 0.0;
};
DerivativeBounds derivative_bounds(const NetworkModel& model, int node, const SafetySpec& spec,
                                   double u_p_mag, double u_q_mag);

}  // namespace gridsafe
