#include "gridsafe/power_flow.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gridsafe {

NodeCoupling NodeCoupling::of(const NetworkModel& model, int node) {
    NodeCoupling c;
    c.node_ = node;
    c.v_nom_ = model.params(node).v_nom;
    for (int k : model.neighbors(node)) {
        auto [g, b] = model.admittance(node, k);
        if (k == node) {
            c.g_self_ = g;
            c.b_self_ = b;
        } else {
            c.terms_.push_back(Term{k, g, b, model.params(k).v_nom});
        }
    }
    // std::set iteration is ascending, so terms_ is already sorted by id.
    return c;
}

double NodeCoupling::eval(PowerKind kind, double v_own_dev, std::span<const double> theta,
                          std::span<const double> v_dev) const {
    assert(theta.size() == terms_.size() && v_dev.size() == terms_.size());
    const double a = v_nom_ + v_own_dev;
    double sum = a * (kind == PowerKind::active ? g_self_ : b_self_);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        const Term& t = terms_[j];
        const double vk = t.v_nom_k + v_dev[j];
        const double c = std::cos(theta[j]);
        const double s = std::sin(theta[j]);
        const double f = (kind == PowerKind::active) ? (t.g * c - t.b * s) : (t.b * c + t.g * s);
        sum += vk * f;
    }
    const double p = a * sum;
    return kind == PowerKind::active ? p : -p;
}

double NodeCoupling::eval_flat(PowerKind kind, std::span<const double> x) const {
    assert(x.size() == dims());
    const double a = v_nom_ + x[0];
    double sum = a * (kind == PowerKind::active ? g_self_ : b_self_);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        const Term& t = terms_[j];
        const double vk = t.v_nom_k + x[2 + 2 * j];
        const double c = std::cos(x[1 + 2 * j]);
        const double s = std::sin(x[1 + 2 * j]);
        const double f = (kind == PowerKind::active) ? (t.g * c - t.b * s) : (t.b * c + t.g * s);
        sum += vk * f;
    }
    const double p = a * sum;
    return kind == PowerKind::active ? p : -p;
}

Interval NodeCoupling::enclose_flat(PowerKind kind, std::span<const Interval> x) const {
    assert(x.size() == dims());
    Interval sum = Interval::point(0.0);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        const Term& t = terms_[j];
        const Interval vk = widen(t.v_nom_k + x[2 + 2 * j], 1);
        const Interval f = (kind == PowerKind::active) ? trig_range(t.g, -t.b, x[1 + 2 * j])
                                                       : trig_range(t.b, t.g, x[1 + 2 * j]);
        sum = sum + vk * f;
    }
    // Centered form in the own voltage a = a0 + da:
    //   g*a^2 + a*S = g*a0^2 + a0*S + da*(2*g*a0 + g*da + S),
    // which keeps the enclosure excess quadratic in the box width instead of
    // linear (the correlated occurrences of a otherwise dominate).
    const double gs = (kind == PowerKind::active) ? g_self_ : b_self_;
    const double a0 = v_nom_ + x[0].mid();
    const Interval da = widen(Interval(x[0].lo - x[0].mid(), x[0].hi - x[0].mid()), 1);
    const Interval p = widen(Interval::point(gs * a0 * a0), 2) + a0 * sum +
                       da * (Interval::point(2.0 * gs * a0) + gs * da + sum);
    return kind == PowerKind::active ? p : -p;
}

void NodeCoupling::derivative_mags_flat(PowerKind kind, std::span<const Interval> x,
                                        std::span<double> out) const {
    assert(x.size() == dims() && out.size() == dims());
    const Interval a = widen(v_nom_ + x[0], 1);
    const double gs = (kind == PowerKind::active) ? g_self_ : b_self_;
    Interval sum = Interval::point(0.0);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        const Term& t = terms_[j];
        const Interval vk = widen(t.v_nom_k + x[2 + 2 * j], 1);
        const Interval f = (kind == PowerKind::active) ? trig_range(t.g, -t.b, x[1 + 2 * j])
                                                       : trig_range(t.b, t.g, x[1 + 2 * j]);
        sum = sum + vk * f;
        // d/dtheta of the trig factor.
        const Interval df = (kind == PowerKind::active) ? trig_range(-t.b, -t.g, x[1 + 2 * j])
                                                        : trig_range(t.g, -t.b, x[1 + 2 * j]);
        out[1 + 2 * j] = (a * vk * df).mag();
        out[2 + 2 * j] = (a * f).mag();
    }
    out[0] = (2.0 * gs * a + sum).mag();
}

namespace {

std::vector<double> assignment_arrays(const NetworkModel& model, int node,
                                      const NodeAssignment& assignment,
                                      std::vector<double>& theta_out) {
    const NodeCoupling c = NodeCoupling::of(model, node);
    if (assignment.neighbors.size() != c.terms().size()) {
        throw std::invalid_argument("assignment must cover exactly the non-self neighbors of node " +
                                    std::to_string(node));
    }
    std::vector<double> v_dev;
    for (const auto& t : c.terms()) {
        auto it = assignment.neighbors.find(t.k);
        if (it == assignment.neighbors.end()) {
            throw std::invalid_argument("assignment missing neighbor " + std::to_string(t.k) +
                                        " of node " + std::to_string(node));
        }
        theta_out.push_back(it->second.first);
        v_dev.push_back(it->second.second);
    }
    return v_dev;
}

}  // namespace

double active_power(const NetworkModel& model, int node, const NodeAssignment& assignment) {
    std::vector<double> theta;
    std::vector<double> v_dev = assignment_arrays(model, node, assignment, theta);
    return NodeCoupling::of(model, node).eval(PowerKind::active, assignment.v_own, theta, v_dev);
}

double reactive_power(const NetworkModel& model, int node, const NodeAssignment& assignment) {
    std::vector<double> theta;
    std::vector<double> v_dev = assignment_arrays(model, node, assignment, theta);
    return NodeCoupling::of(model, node).eval(PowerKind::reactive, assignment.v_own, theta, v_dev);
}

PolynomialExpr::PolynomialExpr(std::vector<std::string> variables, std::vector<Monomial> terms)
    : variables_(std::move(variables)) {
    // Merge duplicate exponent vectors, drop zeros, sort graded-lex.
    std::map<std::vector<int>, double> merged;
    for (Monomial& m : terms) {
        if (m.exponents.size() != variables_.size()) {
            throw std::invalid_argument("monomial exponent vector has wrong length");
        }
        const int deg = std::accumulate(m.exponents.begin(), m.exponents.end(), 0);
        if (deg > kMaxTotalDegree) {
            throw std::invalid_argument("monomial exceeds the degree cap");
        }
        merged[m.exponents] += m.coeff;
    }
    for (auto& [expo, coeff] : merged) {
        if (coeff != 0.0) terms_.push_back(Monomial{coeff, expo});
    }
    std::sort(terms_.begin(), terms_.end(), [](const Monomial& a, const Monomial& b) {
        const int da = std::accumulate(a.exponents.begin(), a.exponents.end(), 0);
        const int db = std::accumulate(b.exponents.begin(), b.exponents.end(), 0);
        if (da != db) return da < db;
        return a.exponents < b.exponents;
    });
}

int PolynomialExpr::total_degree() const {
    int deg = 0;
    for (const Monomial& m : terms_) {
        deg = std::max(deg, std::accumulate(m.exponents.begin(), m.exponents.end(), 0));
    }
    return deg;
}

double PolynomialExpr::eval(std::span<const double> x) const {
    assert(x.size() == variables_.size());
    double sum = 0.0;
    for (const Monomial& m : terms_) {
        double v = m.coeff;
        for (std::size_t i = 0; i < m.exponents.size(); ++i) {
            for (int e = 0; e < m.exponents[i]; ++e) v *= x[i];
        }
        sum += v;
    }
    return sum;
}

Interval PolynomialExpr::enclose(std::span<const Interval> x) const {
    assert(x.size() == variables_.size());
    Interval sum = Interval::point(0.0);
    for (const Monomial& m : terms_) {
        Interval v = Interval::point(m.coeff);
        for (std::size_t i = 0; i < m.exponents.size(); ++i) {
            if (m.exponents[i] > 0) v = v * pow_int(x[i], m.exponents[i]);
        }
        sum = sum + v;
    }
    return sum;
}

PolynomialExpr PolynomialExpr::partial(std::size_t var) const {
    assert(var < variables_.size());
    std::vector<Monomial> out;
    for (const Monomial& m : terms_) {
        if (m.exponents[var] == 0) continue;
        Monomial d = m;
        d.coeff *= m.exponents[var];
        d.exponents[var] -= 1;
        out.push_back(std::move(d));
    }
    return PolynomialExpr(variables_, std::move(out));
}

std::string PolynomialExpr::to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const Monomial& m : terms_) {
        if (!first) os << (m.coeff >= 0 ? " + " : " - ");
        else if (m.coeff < 0) os << "-";
        os << std::fabs(m.coeff);
        for (std::size_t i = 0; i < m.exponents.size(); ++i) {
            if (m.exponents[i] == 0) continue;
            os << "*" << variables_[i];
            if (m.exponents[i] > 1) os << "^" << m.exponents[i];
        }
        first = false;
    }
    return os.str();
}

PolynomialExpr taylor3_power(const NetworkModel& model, int node, PowerKind kind) {
    const NodeCoupling c = NodeCoupling::of(model, node);
    const std::size_t nvars = c.dims();

    std::vector<std::string> vars;
    vars.push_back("v_own");
    for (const auto& t : c.terms()) {
        vars.push_back("theta_" + std::to_string(t.k));
        vars.push_back("v_" + std::to_string(t.k));
    }

    const double sign = (kind == PowerKind::active) ? 1.0 : -1.0;
    std::vector<PolynomialExpr::Monomial> terms;
    auto add = [&](double coeff, std::initializer_list<std::pair<std::size_t, int>> exps) {
        if (coeff == 0.0) return;
        PolynomialExpr::Monomial m;
        m.coeff = coeff;
        m.exponents.assign(nvars, 0);
        for (auto [i, e] : exps) m.exponents[i] += e;
        terms.push_back(std::move(m));
    };

    // Self term: +/- g_self * (v_nom + v_own)^2, no angle dependence.
    const double gs = (kind == PowerKind::active) ? c.g_self() : c.b_self();
    add(sign * gs * c.v_nom() * c.v_nom(), {});
    add(sign * gs * 2.0 * c.v_nom(), {{0, 1}});
    add(sign * gs, {{0, 2}});

    // Neighbor terms: (v_nom + v_own)(v_nom_k + v_k) * truncated trig factor.
    // active:   g - b*t - (g/2)*t^2 + (b/6)*t^3
    // reactive (before the overall minus): b + g*t - (b/2)*t^2 - (g/6)*t^3
    for (std::size_t j = 0; j < c.terms().size(); ++j) {
        const auto& t = c.terms()[j];
        const std::size_t ti = 1 + 2 * j;
        const std::size_t vi = 2 + 2 * j;
        double ang[4];
        if (kind == PowerKind::active) {
            ang[0] = t.g; ang[1] = -t.b; ang[2] = -t.g / 2.0; ang[3] = t.b / 6.0;
        } else {
            ang[0] = t.b; ang[1] = t.g; ang[2] = -t.b / 2.0; ang[3] = -t.g / 6.0;
        }
        const double volt[4] = {c.v_nom() * t.v_nom_k, t.v_nom_k, c.v_nom(), 1.0};
        const std::pair<int, int> vexp[4] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};  // (e_own, e_vk)
        for (int a = 0; a < 4; ++a) {
            for (int p = 0; p < 4; ++p) {
                add(sign * volt[a] * ang[p],
                    {{0, vexp[a].first}, {vi, vexp[a].second}, {ti, p}});
            }
        }
    }

    return PolynomialExpr(std::move(vars), std::move(terms));
}

double taylor_remainder_bound(const NetworkModel& model, int node, const SafetySpec& spec) {
    const NodeCoupling c = NodeCoupling::of(model, node);
    const double theta_max = std::max(std::fabs(spec.s_theta.lo), std::fabs(spec.s_theta.hi));
    const double t4 = theta_max * theta_max * theta_max * theta_max;
    auto v_mag = [&](double v_nom) {
        return std::max(std::fabs(v_nom + spec.s_v.lo), std::fabs(v_nom + spec.s_v.hi));
    };
    const double own = v_mag(c.v_nom());
    // Self entry carries no angle dependence; including it only makes the
    // bound more conservative.
    double bound = own * own * (std::fabs(c.g_self()) + std::fabs(c.b_self())) * t4 / 24.0;
    for (const auto& t : c.terms()) {
        bound += own * v_mag(t.v_nom_k) * (std::fabs(t.g) + std::fabs(t.b)) * t4 / 24.0;
    }
    return bound;
}

}  // namespace gridsafe
