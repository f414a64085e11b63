#pragma once

#include "gridsafe/box_optimizer.hpp"

#include <span>
#include <utility>

namespace gridsafe {

enum class Channel { frequency, voltage };

/// How the frequency-envelope optimizations treat the node's own voltage:
/// the boundary condition pins only omega, so by default v_own ranges over
/// the voltage safe set; the alternative pins it at nominal (zero deviation).
enum class OwnVoltageMode { free_in_safe_set, pinned_nominal };

struct VerifyOptions {
    double tol = 1e-6;
    std::uint64_t max_boxes = 1'000'000;
    PowerForm form = PowerForm::exact;
    OwnVoltageMode own_voltage = OwnVoltageMode::free_in_safe_set;
};

/// Certified extremes of the injected powers over the disturbance boxes with
/// the local state pinned at the relevant safe-set bound. The *_value
/// accessors return the conservative enclosure sides (hi for maxima, lo for
/// minima) so everything derived from them stays a valid certificate.
struct PowerEnvelope {
    CertifiedBound p_max, p_min, q_max, q_min;

    double p_max_value() const { return p_max.hi; }
    double p_min_value() const { return p_min.lo; }
    double q_max_value() const { return q_max.hi; }
    double q_min_value() const { return q_min.lo; }
};

/// P extremes over theta in S_theta and the coupled voltage box (omega does
/// not enter the coupling equations, so the pinned omega bound leaves the box
/// unchanged); Q_max with the own voltage at the lower safe bound, Q_min at
/// the upper. Throws OptimizerError when an optimization fails to converge.
PowerEnvelope power_envelope(const NetworkModel& model, int node, const SafetySpec& spec,
                             const VerifyOptions& options = {});

/// [lower, upper] control interval; both endpoints are always meaningful —
/// when empty they quantify the gap.
struct AdmissibleInterval {
    double lower = 0.0;
    double upper = 0.0;
    bool nonempty = false;

    static AdmissibleInterval from(double lower, double upper) {
        return AdmissibleInterval{lower, upper, lower <= upper};
    }
    double width() const { return upper - lower; }
};

/// Endpoint formulas from the envelope. Frequency bounds are in rad/s
/// internally; the voltage form is in deviation coordinates where the
/// stabilizing term of the voltage dynamics is -v.
AdmissibleInterval frequency_interval(const PowerEnvelope& env, double p_nom, double lambda_p,
                                      const SafetySpec& spec);
AdmissibleInterval voltage_interval(const PowerEnvelope& env, double q_nom, double lambda_q,
                                    const SafetySpec& spec);

/// Convenience: computes the envelope then both intervals. Throws on
/// non-positive droop.
std::pair<AdmissibleInterval, AdmissibleInterval> admissible_controls(
    const NetworkModel& model, int node, double lambda_p, double lambda_q,
    const SafetySpec& spec, const VerifyOptions& options = {});

/// Maximal droop value; +infinity is an explicit state, and reading the
/// numeric value of an infinite limit is a programming error (always
/// checked, including in release builds).
class DroopStar {
public:
    static DroopStar finite(double v) { return DroopStar(v, false); }
    static DroopStar infinite() { return DroopStar(0.0, true); }

    bool is_infinite() const { return infinite_; }
    double value() const {
        if (infinite_) throw std::logic_error("arithmetic on an infinite droop limit");
        return value_;
    }
    std::string to_string() const;

private:
    DroopStar(double v, bool inf) : value_(v), infinite_(inf) {}
    double value_ = 0.0;
    bool infinite_ = false;
};

struct MaxDroopResult {
    DroopStar lambda_p_star = DroopStar::infinite();
    DroopStar lambda_q_star = DroopStar::infinite();
    std::vector<std::string> warnings;
};

/// Maximal droop coefficients from the conservative envelope sides. Returns
/// +infinity when the certified envelope spread is indistinguishable from
/// zero (isolated node) or provably non-positive. Warns, rather than errors,
/// when a safe set does not contain 0 in its interior.
MaxDroopResult max_droop(const NetworkModel& model, int node, const SafetySpec& spec,
                         const VerifyOptions& options = {});
MaxDroopResult max_droop_from(const PowerEnvelope& env, const SafetySpec& spec, double tol,
                              int node);

/// Everything the verify command reports for one node.
struct AdmissibleReport {
    int node = -1;
    PowerEnvelope envelope;
    AdmissibleInterval u_omega;  // active-power set-point interval
    AdmissibleInterval u_v;      // reactive-power set-point interval
    DroopStar lambda_p_star = DroopStar::infinite();
    DroopStar lambda_q_star = DroopStar::infinite();
    std::vector<std::string> warnings;
};

AdmissibleReport verify_node(const NetworkModel& model, int node, double lambda_p,
                             double lambda_q, const SafetySpec& spec,
                             const VerifyOptions& options = {});

/// Closed-form single-neighbor toy model (scalar frequency state, safe set
/// [-1, 1], disturbance in the same interval, coupling gain 2):
/// upper(lambda) = 1/lambda - 2, lower(lambda) = -1/lambda + 2.
struct ToyControls {
    double lower = 0.0;
    double upper = 0.0;
    bool nonempty() const { return lower <= upper; }
};
ToyControls simple_example(double lambda_p);
double simple_example_max_droop();  // the crossing droop of the toy model

/// Certified worst-case boundary derivatives for the four one-sided
/// invariance conditions, tau-scaled so a control with slack s yields a
/// margin of lambda * s. Positive margin means the field points inward.
struct NagumoMargins {
    double omega_upper = 0.0;
    double omega_lower = 0.0;
    double v_upper = 0.0;
    double v_lower = 0.0;

    bool all_pass(double tol) const {
        return omega_upper >= -tol && omega_lower >= -tol && v_upper >= -tol && v_lower >= -tol;
    }
};
NagumoMargins nagumo_check(const NetworkModel& model, int node, double u_p, double u_q,
                           const SafetySpec& spec, const VerifyOptions& options = {});

struct DroopSweepRow {
    double lambda = 0.0;
    double u_lower = 0.0;
    double u_upper = 0.0;
    bool nonempty = false;
    bool crossing = false;  // first cell where the interval flips empty
};

struct DroopSweepTable {
    Channel channel = Channel::frequency;
    DroopStar lambda_star = DroopStar::infinite();
    std::vector<DroopSweepRow> rows;
};

/// Envelope computed once, endpoints evaluated across the grid.
DroopSweepTable droop_sweep(const NetworkModel& model, int node, const SafetySpec& spec,
                            std::span<const double> lambda_grid, Channel channel,
                            const VerifyOptions& options = {});

enum class SweepAxis { delta_v, s_theta_halfwidth, s_v_width };

struct SensitivityRow {
    double axis_value = 0.0;
    DroopStar lambda_q_star = DroopStar::infinite();
};

/// Recomputes the reactive envelope and lambda_q* per grid point. The
/// s_v_width axis scales the voltage safe set about its midpoint.
std::vector<SensitivityRow> sensitivity_sweep(const NetworkModel& model, int node,
                                              const SafetySpec& base_spec, SweepAxis axis,
                                              std::span<const double> grid,
                                              const VerifyOptions& options = {});

}  // namespace gridsafe
