#pragma once

#include "gridsafe/interval.hpp"

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridsafe {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Per-inverter droop and filter parameters (all per-unit except tau in
/// seconds and lambda_p in rad/s per p.u.).
struct InverterParams {
    double tau = 1.0;       // measurement filter time constant, s
    double lambda_p = 1.0;  // active-power droop, rad/s per p.u.
    double lambda_q = 1.0;  // reactive-power droop, p.u. per p.u.
    double v_nom = 1.0;     // nominal voltage magnitude, p.u.
    double p_nom = 0.0;     // nominal active set-point, p.u.
    double q_nom = 0.0;     // nominal reactive set-point, p.u.

    bool operator==(const InverterParams&) const = default;
};

/// One admittance entry. from == to is allowed and defines the node's
/// self-admittance (G_ii, B_ii); absent self entries default to zero.
struct Line {
    int from = 0;
    int to = 0;
    double g = 0.0;  // transfer conductance, p.u.^-1
    double b = 0.0;  // transfer susceptance, p.u.^-1

    bool operator==(const Line&) const = default;
};

/// Immutable microgrid description: inverter nodes, admittance entries, and
/// the derived neighbor map (symmetric, self-inclusive by convention).
class NetworkModel {
public:
    struct Node {
        int id = 0;
        InverterParams params;
        bool operator==(const Node&) const = default;
    };

    NetworkModel() = default;
    /// Validates all structural invariants; throws ValidationError naming the
    /// offending node or line.
    NetworkModel(std::vector<Node> nodes, std::vector<Line> lines);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Line>& lines() const { return lines_; }

    bool has_node(int id) const { return index_.count(id) != 0; }
    const InverterParams& params(int id) const;

    /// Neighbor set of node i, including i itself. Throws on unknown ids.
    const std::set<int>& neighbors(int id) const;

    /// Admittance entry (g, b) between i and k; zero when no line exists.
    std::pair<double, double> admittance(int i, int k) const;

    /// Copy with the droop coefficients of one node replaced (used to test a
    /// candidate droop setting without mutating the loaded model).
    NetworkModel with_droop(int id, double lambda_p, double lambda_q) const;

    bool operator==(const NetworkModel& o) const {
        return nodes_ == o.nodes_ && lines_ == o.lines_;
    }

private:
    std::vector<Node> nodes_;
    std::vector<Line> lines_;
    std::map<int, std::size_t> index_;
    std::map<int, std::set<int>> neighbor_map_;
};

/// Free-function form of the neighbor query.
std::set<int> neighbors(const NetworkModel& model, int id);

/// Safe sets and coupling radii. Frequency quantities are stored both as
/// loaded (Hz) and converted to rad/s; the conversion happens exactly once,
/// at ingestion, and the *_hz fields are kept verbatim so serialization
/// round-trips bit-for-bit.
struct SafetySpec {
    Interval s_v{-0.4, 0.2};      // voltage deviation from nominal, p.u.
    Interval s_omega_hz{-3, 3};   // as loaded, Hz
    Interval s_omega{};           // rad/s (s_omega_hz scaled by 2*pi)
    Interval s_theta{};           // neighbor phase angles, rad
    double delta_v = kInf;        // neighbor voltage coupling radius, p.u.
    double delta_omega_hz = kInf;
    double delta_omega = kInf;    // rad/s

    void set_omega_hz(const Interval& hz) {
        s_omega_hz = hz;
        s_omega = Interval(hz.lo * kTwoPi, hz.hi * kTwoPi);
    }
    void set_delta_omega_hz(double hz) {
        delta_omega_hz = hz;
        delta_omega = hz * kTwoPi;
    }

    bool operator==(const SafetySpec&) const = default;
};

struct LoadResult {
    NetworkModel model;
    SafetySpec safety;
};

/// Parses and validates the versioned network file format. Throws ParseError
/// on malformed input and ValidationError on invariant violations.
LoadResult load_network(const std::string& path);

/// Same as load_network but from an in-memory document.
LoadResult parse_network(const std::string& json_text);

std::string serialize_network(const NetworkModel& model, const SafetySpec& safety);
void save_network(const std::string& path, const NetworkModel& model, const SafetySpec& safety);

}  // namespace gridsafe
