#pragma once

#include "gridsafe/network.hpp"

#include <span>
#include <string>
#include <vector>

namespace gridsafe {

enum class PowerKind { active, reactive };

/// Point values of the disturbance variables seen by one node: its own
/// voltage deviation plus (theta_k, v_k deviation) for every non-self
/// neighbor. theta_i is identically zero (the node is the reference angle),
/// so the stored angles are already the angle differences entering the
/// coupling equations.
struct NodeAssignment {
    double v_own = 0.0;
    std::map<int, std::pair<double, double>> neighbors;  // k -> (theta_k, v_k dev)
};

/// Per-node view of the coupling terms: nominal voltage, self admittance and
/// one (g, b, v_nom_k) entry per non-self neighbor, ascending by node id.
///
/// Every flattened caller (optimizer, grid oracle, simulator) shares the same
/// variable layout: index 0 is the node's own voltage deviation, then
/// (theta, v deviation) pairs in term order.
class NodeCoupling {
public:
    struct Term {
        int k = 0;
        double g = 0.0;
        double b = 0.0;
        double v_nom_k = 1.0;
    };

    static NodeCoupling of(const NetworkModel& model, int node);

    int node() const { return node_; }
    double v_nom() const { return v_nom_; }
    double g_self() const { return g_self_; }
    double b_self() const { return b_self_; }
    const std::vector<Term>& terms() const { return terms_; }
    std::size_t dims() const { return 1 + 2 * terms_.size(); }

    /// Injected power for point values; theta/v_dev are in term order.
    double eval(PowerKind kind, double v_own_dev, std::span<const double> theta,
                std::span<const double> v_dev) const;

    /// Same, in the flattened layout (x.size() == dims()).
    double eval_flat(PowerKind kind, std::span<const double> x) const;

    /// Certified enclosure of the injected power over a flattened box. Exact
    /// per-neighbor trig ranges keep the enclosure tight; the only slack left
    /// is the correlation through the node's own voltage.
    Interval enclose_flat(PowerKind kind, std::span<const Interval> x) const;

    /// Magnitude bounds of the partial derivatives over a flattened box, one
    /// per dimension; used as branching scores.
    void derivative_mags_flat(PowerKind kind, std::span<const Interval> x,
                              std::span<double> out) const;

private:
    int node_ = -1;
    double v_nom_ = 1.0;
    double g_self_ = 0.0;
    double b_self_ = 0.0;
    std::vector<Term> terms_;
};

/// Injected active power P_i at the given assignment (absolute magnitudes are
/// v_nom + deviation; the assignment must cover exactly N_i \ {i}).
double active_power(const NetworkModel& model, int node, const NodeAssignment& assignment);

/// Injected reactive power Q_i, including its leading minus sign.
double reactive_power(const NetworkModel& model, int node, const NodeAssignment& assignment);

/// Sparse multivariate polynomial over the node's disturbance variables, in
/// the shared flattened layout. Construction merges duplicate exponent
/// vectors and asserts the degree cap.
class PolynomialExpr {
public:
    struct Monomial {
        double coeff = 0.0;
        std::vector<int> exponents;  // aligned with variables()
    };

    // Highest monomial is (own voltage) * (neighbor voltage) * theta^3.
    static constexpr int kMaxTotalDegree = 5;

    PolynomialExpr(std::vector<std::string> variables, std::vector<Monomial> terms);

    const std::vector<std::string>& variables() const { return variables_; }
    const std::vector<Monomial>& terms() const { return terms_; }
    int total_degree() const;

    double eval(std::span<const double> x) const;
    Interval enclose(std::span<const Interval> x) const;
    PolynomialExpr partial(std::size_t var) const;

    /// Canonical human-readable form (graded-lex monomial order).
    std::string to_string() const;

private:
    std::vector<std::string> variables_;
    std::vector<Monomial> terms_;
};

/// Degree-3 truncation of the trigonometric factors of the coupling
/// equations about theta = 0 (cos -> 1 - t^2/2, sin -> t - t^3/6), with the
/// voltage factors kept exact.
PolynomialExpr taylor3_power(const NetworkModel& model, int node, PowerKind kind);

/// Uniform bound on |exact - taylor3| over the disturbance boxes drawn from
/// the given safety limits, dominating the Lagrange remainders of both
/// truncations.
double taylor_remainder_bound(const NetworkModel& model, int node, const SafetySpec& spec);

}  // namespace gridsafe
