#include "gridsafe/box_optimizer.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <memory>
#include <queue>

namespace gridsafe {

std::vector<Interval> DisturbanceBox::flatten() const {
    assert(theta.size() == neighbor_ids.size() && v_dev.size() == neighbor_ids.size());
    std::vector<Interval> x;
    x.reserve(dims());
    x.push_back(v_own);
    for (std::size_t j = 0; j < neighbor_ids.size(); ++j) {
        x.push_back(theta[j]);
        x.push_back(v_dev[j]);
    }
    return x;
}

DisturbanceBox DisturbanceBox::uniform(const NetworkModel& model, int node, const Interval& v_own,
                                       const Interval& theta_each, const Interval& v_each) {
    DisturbanceBox b;
    b.node = node;
    b.v_own = v_own;
    for (int k : model.neighbors(node)) {
        if (k == node) continue;
        b.neighbor_ids.push_back(k);
        b.theta.push_back(theta_each);
        b.v_dev.push_back(v_each);
    }
    return b;
}

namespace {

// Flattened layout: x[0] = v_own, x[1 + 2j] = theta_j, x[2 + 2j] = v_j.

std::size_t n_terms_of(const std::vector<Interval>& x) { return (x.size() - 1) / 2; }

// Hull-consistency propagation for the pairwise constraints
// |v_k - v_own| <= delta, padded outward so no feasible point is discarded.
// After it succeeds, every v_own in x[0] admits a feasible v_k for each k.
bool propagate_coupling(std::vector<Interval>& x, double delta) {
    if (!std::isfinite(delta)) return true;
    Interval vi = x[0];
    const std::size_t n = n_terms_of(x);
    for (std::size_t j = 0; j < n; ++j) {
        const Interval& vk = x[2 + 2 * j];
        auto m = intersect(vi, Interval(step_down(vk.lo - delta), step_up(vk.hi + delta)));
        if (!m) return false;
        vi = *m;
    }
    x[0] = vi;
    for (std::size_t j = 0; j < n; ++j) {
        auto m = intersect(x[2 + 2 * j], Interval(step_down(vi.lo - delta), step_up(vi.hi + delta)));
        if (!m) return false;
        x[2 + 2 * j] = *m;
    }
    return true;
}

std::vector<double> feasible_midpoint(const std::vector<Interval>& x, double delta) {
    std::vector<double> p(x.size());
    p[0] = x[0].mid();
    const std::size_t n = n_terms_of(x);
    for (std::size_t j = 0; j < n; ++j) {
        p[1 + 2 * j] = x[1 + 2 * j].mid();
        double v = x[2 + 2 * j].mid();
        if (std::isfinite(delta)) {
            v = std::clamp(v, p[0] - delta, p[0] + delta);
            v = std::clamp(v, x[2 + 2 * j].lo, x[2 + 2 * j].hi);
        }
        p[2 + 2 * j] = v;
    }
    return p;
}

// Objective in "maximize" orientation; sense handled by a sign flip.
class Objective {
public:
    virtual ~Objective() = default;
    virtual double value(std::span<const double> x) const = 0;
    virtual Interval enclose(std::span<const Interval> x) const = 0;
    virtual void derivative_mags(std::span<const Interval> x, std::span<double> out) const = 0;
    /// Feasible candidate point used to raise the incumbent.
    virtual std::vector<double> witness(const std::vector<Interval>& x, double delta) const {
        return feasible_midpoint(x, delta);
    }
};

class ExactObjective final : public Objective {
public:
    ExactObjective(NodeCoupling c, PowerKind kind, double sign)
        : c_(std::move(c)), kind_(kind), sign_(sign) {}

    double value(std::span<const double> x) const override {
        return sign_ * c_.eval_flat(kind_, x);
    }
    Interval enclose(std::span<const Interval> x) const override {
        const Interval e = c_.enclose_flat(kind_, x);
        return sign_ > 0 ? e : -e;
    }
    void derivative_mags(std::span<const Interval> x, std::span<double> out) const override {
        c_.derivative_mags_flat(kind_, x, out);
    }

    // Greedy per-term argmax tried at the own-voltage endpoints and midpoint;
    // the per-neighbor structure makes this near-optimal, which keeps the
    // incumbent tight and exploration shallow.
    std::vector<double> witness(const std::vector<Interval>& x, double delta) const override {
        std::vector<double> best_p;
        double best_val = -kInf;
        for (const double v_own : {x[0].lo, x[0].mid(), x[0].hi}) {
            std::vector<double> p = greedy_at(x, delta, v_own);
            const double val = value(p);
            if (val > best_val) {
                best_val = val;
                best_p = std::move(p);
            }
            if (x[0].is_point()) break;
        }
        return best_p;
    }

private:
    std::vector<double> greedy_at(const std::vector<Interval>& x, double delta,
                                  double v_own) const {
        std::vector<double> p(x.size());
        p[0] = v_own;
        const double a = c_.v_nom() + v_own;
        const double eff = sign_ * (kind_ == PowerKind::active ? a : -a);
        for (std::size_t j = 0; j < c_.terms().size(); ++j) {
            const auto& t = c_.terms()[j];
            const TrigExtrema te = (kind_ == PowerKind::active)
                                       ? trig_extrema(t.g, -t.b, x[1 + 2 * j])
                                       : trig_extrema(t.b, t.g, x[1 + 2 * j]);
            Interval vk = x[2 + 2 * j];
            if (std::isfinite(delta)) {
                vk = Interval(std::clamp(vk.lo, p[0] - delta, p[0] + delta),
                              std::clamp(vk.hi, p[0] - delta, p[0] + delta));
            }
            double best = -kInf;
            for (double v : {vk.lo, vk.hi}) {
                for (const auto& [f, arg] : {std::pair{te.min_value, te.argmin},
                                             std::pair{te.max_value, te.argmax}}) {
                    const double cand = eff * (t.v_nom_k + v) * f;
                    if (cand > best) {
                        best = cand;
                        p[1 + 2 * j] = arg;
                        p[2 + 2 * j] = v;
                    }
                }
            }
        }
        return p;
    }

    NodeCoupling c_;
    PowerKind kind_;
    double sign_;
};

class PolynomialObjective final : public Objective {
public:
    PolynomialObjective(PolynomialExpr poly, double sign) : poly_(std::move(poly)), sign_(sign) {
        for (std::size_t d = 0; d < poly_.variables().size(); ++d) {
            partials_.push_back(poly_.partial(d));
        }
    }

    double value(std::span<const double> x) const override { return sign_ * poly_.eval(x); }

    // Intersection of the monomial-wise enclosure with the mean-value form
    // f(mid) + sum_d f_d(X) * (X_d - mid_d); the latter is second-order
    // accurate on small boxes, which the branch-and-bound needs to converge.
    Interval enclose(std::span<const Interval> x) const override {
        const Interval naive = poly_.enclose(x);
        std::vector<double> mid(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) mid[d] = x[d].mid();
        Interval mv = widen(Interval::point(poly_.eval(mid)), 4);
        for (std::size_t d = 0; d < x.size(); ++d) {
            if (x[d].is_point()) continue;
            const Interval dev =
                widen(Interval(x[d].lo - mid[d], x[d].hi - mid[d]), 1);
            mv = mv + partials_[d].enclose(x) * dev;
        }
        const auto both = intersect(naive, mv);
        const Interval e = both ? *both : naive;
        return sign_ > 0 ? e : -e;
    }

    void derivative_mags(std::span<const Interval> x, std::span<double> out) const override {
        for (std::size_t d = 0; d < partials_.size(); ++d) out[d] = partials_[d].enclose(x).mag();
    }

    // Midpoint plus one coordinate-descent pass toward the better endpoint.
    std::vector<double> witness(const std::vector<Interval>& x, double delta) const override {
        std::vector<double> p = feasible_midpoint(x, delta);
        double val = value(p);
        for (std::size_t d = 0; d < x.size(); ++d) {
            if (x[d].is_point()) continue;
            // Moving the own voltage would invalidate the coupling clamps.
            if (d == 0 && std::isfinite(delta)) continue;
            const double keep = p[d];
            for (const double cand : {x[d].lo, x[d].hi}) {
                p[d] = cand;
                if (std::isfinite(delta) && d >= 2 && d % 2 == 0) {
                    p[d] = std::clamp(cand, p[0] - delta, p[0] + delta);
                }
                const double v = value(p);
                if (v > val) {
                    val = v;
                    goto next_dim;  // keep the improved coordinate
                }
                p[d] = keep;
            }
        next_dim:;
        }
        return p;
    }

private:
    PolynomialExpr poly_;
    std::vector<PolynomialExpr> partials_;
    double sign_;
};

std::unique_ptr<Objective> make_objective(const NetworkModel& model, int node, PowerKind kind,
                                          OptSense sense, PowerForm form) {
    const double sign = (sense == OptSense::maximize) ? 1.0 : -1.0;
    if (form == PowerForm::exact) {
        return std::make_unique<ExactObjective>(NodeCoupling::of(model, node), kind, sign);
    }
    return std::make_unique<PolynomialObjective>(taylor3_power(model, node, kind), sign);
}

void check_box(const NodeCoupling& c, const DisturbanceBox& box) {
    if (box.node != c.node()) {
        throw std::invalid_argument("box is for node " + std::to_string(box.node) +
                                    ", expected " + std::to_string(c.node()));
    }
    if (box.neighbor_ids.size() != c.terms().size()) {
        throw std::invalid_argument("box covers the wrong number of neighbors");
    }
    for (std::size_t j = 0; j < c.terms().size(); ++j) {
        if (box.neighbor_ids[j] != c.terms()[j].k) {
            throw std::invalid_argument("box neighbor ids do not match the node's neighbor set");
        }
    }
}

bool splittable(const Interval& v) {
    const double m = v.mid();
    return m > v.lo && m < v.hi;
}

struct HeapEntry {
    double ub;
    std::uint64_t seq;
    std::vector<Interval> x;
};

struct HeapOrder {
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
        if (a.ub != b.ub) return a.ub < b.ub;   // max-heap on the bound
        return a.seq > b.seq;                   // FIFO among equal bounds
    }
};

}  // namespace

CertifiedBound extremize_separable(const NetworkModel& model, int node, PowerKind kind,
                                   const DisturbanceBox& box, OptSense sense) {
    const NodeCoupling c = NodeCoupling::of(model, node);
    check_box(c, box);
    if (!box.v_own.is_point()) {
        throw std::invalid_argument("separable engine requires the own voltage pinned to a point");
    }
    if (box.coupled && std::isfinite(box.delta_v)) {
        throw std::invalid_argument("separable engine cannot handle coupled boxes; use branch-and-bound");
    }

    const double s = (kind == PowerKind::active) ? 1.0 : -1.0;
    const Interval a = widen(Interval::point(c.v_nom() + box.v_own.lo), 1);
    const Interval cfac = s > 0 ? a : -a;  // objective = cfac * (g_self*a + sum of terms)
    // Per-term side: maximize the inner sum when cfac >= 0 and we maximize,
    // or cfac < 0 and we minimize; otherwise take the inner minimum. When the
    // voltage factor is within rounding of zero both sides are hulled below.
    const bool ambiguous_sign = cfac.lo <= 0.0 && cfac.hi >= 0.0;
    const bool want_inner_max = (sense == OptSense::maximize) == (cfac.mid() >= 0.0);

    const double gs = (kind == PowerKind::active) ? c.g_self() : c.b_self();
    Interval inner_min = gs * a;
    Interval inner_max = inner_min;

    std::vector<double> witness(box.dims());
    witness[0] = box.v_own.lo;
    for (std::size_t j = 0; j < c.terms().size(); ++j) {
        const auto& t = c.terms()[j];
        const TrigExtrema te = (kind == PowerKind::active)
                                   ? trig_extrema(t.g, -t.b, box.theta[j])
                                   : trig_extrema(t.b, t.g, box.theta[j]);
        const Interval vk_lo = widen(Interval::point(t.v_nom_k + box.v_dev[j].lo), 1);
        const Interval vk_hi = widen(Interval::point(t.v_nom_k + box.v_dev[j].hi), 1);
        const Interval f_min = widen(Interval::point(te.min_value), 4);
        const Interval f_max = widen(Interval::point(te.max_value), 4);

        struct Candidate {
            Interval value;
            double v_choice, theta_choice;
        };
        const Candidate cands[4] = {
            {vk_lo * f_min, box.v_dev[j].lo, te.argmin},
            {vk_lo * f_max, box.v_dev[j].lo, te.argmax},
            {vk_hi * f_min, box.v_dev[j].hi, te.argmin},
            {vk_hi * f_max, box.v_dev[j].hi, te.argmax},
        };
        Interval side_min = cands[0].value;
        Interval side_max = cands[0].value;
        const Candidate* pick = &cands[0];
        for (const Candidate& cd : cands) {
            side_min = Interval(std::min(side_min.lo, cd.value.lo),
                                std::min(side_min.hi, cd.value.hi));
            side_max = Interval(std::max(side_max.lo, cd.value.lo),
                                std::max(side_max.hi, cd.value.hi));
            if (want_inner_max ? cd.value.mid() > pick->value.mid()
                               : cd.value.mid() < pick->value.mid()) {
                pick = &cd;
            }
        }
        inner_min = inner_min + side_min;
        inner_max = inner_max + side_max;
        witness[1 + 2 * j] = pick->theta_choice;
        witness[2 + 2 * j] = pick->v_choice;
    }

    Interval enc = cfac * (want_inner_max ? inner_max : inner_min);
    if (ambiguous_sign) enc = hull(enc, cfac * (want_inner_max ? inner_min : inner_max));
    CertifiedBound out;
    out.engine = CertifiedBound::Engine::analytic;
    out.boxes_explored = 1;
    out.witness = witness;
    out.witness_value = c.eval_flat(kind, witness);
    enc = hull(enc, out.witness_value);
    enc = widen(enc, 2);
    out.lo = enc.lo;
    out.hi = enc.hi;
    return out;
}

CertifiedBound extremize_bnb(const NetworkModel& model, int node, PowerKind kind,
                             const DisturbanceBox& box, OptSense sense, double tol,
                             std::uint64_t max_boxes, PowerForm form) {
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    const NodeCoupling c = NodeCoupling::of(model, node);
    check_box(c, box);
    const auto obj = make_objective(model, node, kind, sense, form);
    const double delta = box.coupled ? box.delta_v : kInf;

    std::vector<Interval> root = box.flatten();
    if (!propagate_coupling(root, delta)) {
        throw OptimizerError("infeasible disturbance box for node " + std::to_string(node) +
                             ": voltage coupling empties a neighbor interval");
    }

    double best_w = -kInf;
    std::vector<double> best_point;
    auto consider = [&](const std::vector<Interval>& x) {
        std::vector<double> p = obj->witness(x, delta);
        const double v = obj->value(p);
        if (v > best_w) {
            best_w = v;
            best_point = std::move(p);
        }
        return obj->enclose(x).hi;
    };

    std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapOrder> heap;
    std::uint64_t seq = 0;
    heap.push(HeapEntry{consider(root), seq++, root});

    double settled_ub = -kInf;  // point boxes that cannot be split further
    std::uint64_t explored = 0;
    bool converged = true;
    std::vector<double> mags(root.size());

    while (!heap.empty()) {
        const double eff_ub = std::max(heap.top().ub, settled_ub);
        if (eff_ub - best_w <= tol) break;
        if (explored >= max_boxes) {
            converged = false;
            break;
        }
        HeapEntry nd = heap.top();
        heap.pop();
        ++explored;
        if (nd.ub <= best_w) continue;

        // Bisect the dimension with the largest width * derivative score;
        // plain widest as fallback; ties go to the lowest index.
        obj->derivative_mags(nd.x, mags);
        int dim = -1;
        double best_score = 0.0;
        for (std::size_t d = 0; d < nd.x.size(); ++d) {
            if (!splittable(nd.x[d])) continue;
            const double score = nd.x[d].width() * mags[d];
            if (score > best_score) {
                best_score = score;
                dim = static_cast<int>(d);
            }
        }
        if (dim < 0) {
            double best_width = 0.0;
            for (std::size_t d = 0; d < nd.x.size(); ++d) {
                if (!splittable(nd.x[d])) continue;
                if (nd.x[d].width() > best_width) {
                    best_width = nd.x[d].width();
                    dim = static_cast<int>(d);
                }
            }
        }
        if (dim < 0) {
            // Degenerate box at float resolution; keep its claim for the
            // final upper bound instead of looping.
            settled_ub = std::max(settled_ub, nd.ub);
            continue;
        }

        const double mid = nd.x[dim].mid();
        for (int half = 0; half < 2; ++half) {
            std::vector<Interval> child = nd.x;
            child[dim] = (half == 0) ? Interval(child[dim].lo, mid) : Interval(mid, child[dim].hi);
            if (!propagate_coupling(child, delta)) continue;
            const double ub = consider(child);
            if (ub > best_w) heap.push(HeapEntry{ub, seq++, std::move(child)});
        }
    }

    double eff_ub = std::max(best_w, settled_ub);
    if (!heap.empty()) eff_ub = std::max(eff_ub, heap.top().ub);

    Interval enc = widen(Interval(best_w, std::max(best_w, eff_ub)), 4);
    CertifiedBound out;
    out.engine = CertifiedBound::Engine::branch_and_bound;
    out.boxes_explored = explored;
    out.converged = converged;
    out.witness = best_point;
    if (sense == OptSense::maximize) {
        out.lo = enc.lo;
        out.hi = enc.hi;
        out.witness_value = best_w;
    } else {
        out.lo = -enc.hi;
        out.hi = -enc.lo;
        out.witness_value = -best_w;
    }
    return out;
}

GridOracleResult grid_oracle(const NetworkModel& model, int node, PowerKind kind,
                             const DisturbanceBox& box, OptSense sense, int points_per_dim,
                             std::uint64_t budget) {
    if (points_per_dim < 2) throw std::invalid_argument("points_per_dim must be >= 2");
    const NodeCoupling c = NodeCoupling::of(model, node);
    check_box(c, box);
    const std::vector<Interval> x = box.flatten();
    const std::size_t dims = x.size();

    // Degenerate dimensions contribute a single grid value.
    std::vector<int> radix(dims, points_per_dim);
    for (std::size_t d = 0; d < dims; ++d) {
        if (x[d].width() == 0.0) radix[d] = 1;
    }
    double total_d = 1.0;
    for (std::size_t d = 0; d < dims; ++d) total_d *= radix[d];
    if (total_d > static_cast<double>(budget)) {
        throw OptimizerError("grid oracle budget exceeded: " + std::to_string(total_d) +
                             " points requested");
    }

    std::vector<std::vector<double>> grid(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        grid[d].resize(radix[d]);
        for (int i = 0; i < radix[d]; ++i) {
            grid[d][i] = radix[d] == 1
                             ? x[d].lo
                             : x[d].lo + (x[d].hi - x[d].lo) * i / (radix[d] - 1);
        }
        grid[d].front() = x[d].lo;
        grid[d].back() = x[d].hi;
    }

    // Precompute the trig factor per (term, theta grid index).
    const std::size_t n = c.terms().size();
    std::vector<std::vector<double>> factor(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& t = c.terms()[j];
        factor[j].resize(grid[1 + 2 * j].size());
        for (std::size_t i = 0; i < factor[j].size(); ++i) {
            const double th = grid[1 + 2 * j][i];
            factor[j][i] = (kind == PowerKind::active)
                               ? (t.g * std::cos(th) - t.b * std::sin(th))
                               : (t.b * std::cos(th) + t.g * std::sin(th));
        }
    }

    const double s = (kind == PowerKind::active) ? 1.0 : -1.0;
    const double sense_sign = (sense == OptSense::maximize) ? 1.0 : -1.0;
    const double delta = box.coupled ? box.delta_v : kInf;
    const double gs = (kind == PowerKind::active) ? c.g_self() : c.b_self();

    GridOracleResult out;
    out.value = -kInf;
    std::vector<int> idx(dims, 0);
    std::vector<double> point(dims);
    while (true) {
        const double v_own = grid[0][idx[0]];
        const double a = c.v_nom() + v_own;
        double sum = gs * a;
        point[0] = v_own;
        for (std::size_t j = 0; j < n; ++j) {
            double vk = grid[2 + 2 * j][idx[2 + 2 * j]];
            if (std::isfinite(delta)) vk = std::clamp(vk, v_own - delta, v_own + delta);
            point[1 + 2 * j] = grid[1 + 2 * j][idx[1 + 2 * j]];
            point[2 + 2 * j] = vk;
            sum += (c.terms()[j].v_nom_k + vk) * factor[j][idx[1 + 2 * j]];
        }
        const double val = s * a * sum;
        ++out.points;
        if (sense_sign * val > sense_sign * out.value || out.arg.empty()) {
            out.value = val;
            out.arg = point;
        }
        // Odometer increment, last dimension fastest.
        std::size_t d = dims;
        while (d > 0) {
            --d;
            if (++idx[d] < radix[d]) break;
            idx[d] = 0;
            if (d == 0) return out;
        }
    }
}

double grid_resolution_bound(const NetworkModel& model, int node, const DisturbanceBox& box,
                             int points_per_dim) {
    const NodeCoupling c = NodeCoupling::of(model, node);
    check_box(c, box);
    const std::vector<Interval> x = box.flatten();
    std::vector<double> mags(x.size());
    // Use the larger of the two kinds so one bound serves both objectives.
    std::vector<double> mags_q(x.size());
    c.derivative_mags_flat(PowerKind::active, x, mags);
    c.derivative_mags_flat(PowerKind::reactive, x, mags_q);
    for (std::size_t d = 0; d < x.size(); ++d) mags[d] = std::max(mags[d], mags_q[d]);

    double bound = 0.0;
    const double own_cell = x[0].width() / (points_per_dim - 1);
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double cell = x[d].width() / (points_per_dim - 1);
        bound += mags[d] * cell / 2.0;
        // Coupling clamps can move a v_k by up to half the own-voltage cell
        // on top of its own cell.
        if (box.coupled && std::isfinite(box.delta_v) && d >= 2 && d % 2 == 0) {
            bound += mags[d] * own_cell / 2.0;
        }
    }
    return bound + 1e-12;
}

}  // namespace gridsafe
