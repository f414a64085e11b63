#pragma once

#include "gridsafe/power_flow.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gridsafe {

enum class OptSense { minimize, maximize };
enum class PowerForm { exact, taylor3 };

struct OptimizerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Box of disturbance values for one node, in the shared flattened layout
/// [v_own, theta_0, v_0, theta_1, v_1, ...] with neighbors ascending by id.
/// When `coupled` is set, every v_k is additionally constrained to
/// [v_own - delta_v, v_own + delta_v].
struct DisturbanceBox {
    int node = -1;
    Interval v_own;                  // own voltage deviation; a point when pinned
    std::vector<int> neighbor_ids;   // non-self neighbors, ascending
    std::vector<Interval> theta;
    std::vector<Interval> v_dev;
    bool coupled = false;
    double delta_v = kInf;

    std::size_t dims() const { return 1 + 2 * neighbor_ids.size(); }
    std::vector<Interval> flatten() const;

    /// Box matching a node's neighbor structure, with every neighbor given
    /// the same theta/v intervals. Callers then pin or shrink as needed.
    static DisturbanceBox uniform(const NetworkModel& model, int node, const Interval& v_own,
                                  const Interval& theta_each, const Interval& v_each);
};

/// Rigorous enclosure of a global extremum, plus the point that certifies
/// its achievable side.
struct CertifiedBound {
    enum class Engine { analytic, branch_and_bound };

    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> witness;   // flattened layout
    double witness_value = 0.0;
    Engine engine = Engine::branch_and_bound;
    std::uint64_t boxes_explored = 0;
    bool converged = true;

    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
};

/// Closed-form global extremum for the separable case: own voltage pinned to
/// a point and no voltage coupling. Enclosure width is at rounding level.
/// Throws std::invalid_argument when the preconditions do not hold.
CertifiedBound extremize_separable(const NetworkModel& model, int node, PowerKind kind,
                                   const DisturbanceBox& box, OptSense sense);

/// Interval branch-and-bound over the full (possibly coupled) box. Bisects
/// the dimension with the largest width-times-derivative score, prunes with
/// the best witness, and terminates once the enclosure width is <= tol.
/// Exceeding the box budget returns the best enclosure with converged=false.
/// Throws OptimizerError for an infeasible coupled box.
CertifiedBound extremize_bnb(const NetworkModel& model, int node, PowerKind kind,
                             const DisturbanceBox& box, OptSense sense, double tol,
                             std::uint64_t max_boxes = 1'000'000,
                             PowerForm form = PowerForm::exact);

struct GridOracleResult {
    double value = 0.0;
    std::vector<double> arg;  // flattened layout (after coupling clamp)
    std::uint64_t points = 0;
};

/// Brute-force extremum over the tensor grid spanned by the box (endpoints
/// always included). Coupled boxes clamp each v_k grid value into
/// [v_own - delta_v, v_own + delta_v] so every evaluated point is feasible.
/// Test oracle only; throws OptimizerError when the grid exceeds the budget.
GridOracleResult grid_oracle(const NetworkModel& model, int node, PowerKind kind,
                             const DisturbanceBox& box, OptSense sense, int points_per_dim,
                             std::uint64_t budget = 200'000'000);

/// Worst-case gap between the grid oracle and the true extremum, from the
/// objective's curvature over the box and the grid cell sizes. Used by tests
/// to interpret "agreement within oracle resolution".
double grid_resolution_bound(const NetworkModel& model, int node, const DisturbanceBox& box,
                             int points_per_dim);

}  // namespace gridsafe
