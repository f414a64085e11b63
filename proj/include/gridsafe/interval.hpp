#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <optional>

namespace gridsafe {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double step_down(double x) { return std::nextafter(x, -kInf); }
inline double step_up(double x) { return std::nextafter(x, kInf); }

/// Closed interval [lo, hi]. Arithmetic pads results outward by one ulp per
/// rounding so the returned interval always encloses the exact real image of
/// its operands; that is what makes downstream bounds certified rather than
/// merely approximate.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double lo_, double hi_) : lo(lo_), hi(hi_) { assert(lo <= hi); }

    static Interval point(double x) { return Interval(x, x); }

    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    double mag() const { return std::max(std::fabs(lo), std::fabs(hi)); }
    bool is_point() const { return lo == hi; }
    bool contains(double x) const { return lo <= x && x <= hi; }
    bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }

    bool operator==(const Interval&) const = default;
};

inline Interval widen(const Interval& v, int ulps = 1) {
    Interval r = v;
    for (int i = 0; i < ulps; ++i) {
        r.lo = step_down(r.lo);
        r.hi = step_up(r.hi);
    }
    return r;
}

inline Interval operator-(const Interval& a) { return Interval(-a.hi, -a.lo); }

inline Interval operator+(const Interval& a, const Interval& b) {
    return Interval(step_down(a.lo + b.lo), step_up(a.hi + b.hi));
}

inline Interval operator-(const Interval& a, const Interval& b) {
    return Interval(step_down(a.lo - b.hi), step_up(a.hi - b.lo));
}

inline Interval operator+(const Interval& a, double c) { return a + Interval::point(c); }
inline Interval operator+(double c, const Interval& a) { return a + Interval::point(c); }
inline Interval operator-(const Interval& a, double c) { return a - Interval::point(c); }

inline Interval operator*(const Interval& a, const Interval& b) {
    const double p1 = a.lo * b.lo;
    const double p2 = a.lo * b.hi;
    const double p3 = a.hi * b.lo;
    const double p4 = a.hi * b.hi;
    return Interval(step_down(std::min({p1, p2, p3, p4})),
                    step_up(std::max({p1, p2, p3, p4})));
}

inline Interval operator*(double c, const Interval& a) {
    const double x = c * a.lo;
    const double y = c * a.hi;
    return Interval(step_down(std::min(x, y)), step_up(std::max(x, y)));
}
inline Interval operator*(const Interval& a, double c) { return c * a; }

/// Range of x^2 over the interval; sharper than a * a because it keeps the
/// two occurrences of x correlated.
inline Interval square(const Interval& a) {
    const double l2 = a.lo * a.lo;
    const double h2 = a.hi * a.hi;
    if (a.contains(0.0)) return Interval(0.0, step_up(std::max(l2, h2)));
    return Interval(step_down(std::min(l2, h2)), step_up(std::max(l2, h2)));
}

/// x^n for integer n >= 0, correlated (range of the power function, not a
/// repeated product).
inline Interval pow_int(const Interval& a, int n) {
    assert(n >= 0);
    if (n == 0) return Interval::point(1.0);
    if (n == 1) return a;
    const double pl = std::pow(a.lo, n);
    const double ph = std::pow(a.hi, n);
    if (n % 2 == 0) {
        if (a.contains(0.0)) return widen(Interval(0.0, std::max(pl, ph)), 2);
        return widen(Interval(std::min(pl, ph), std::max(pl, ph)), 2);
    }
    return widen(Interval(pl, ph), 2);
}

inline std::optional<Interval> intersect(const Interval& a, const Interval& b) {
    const double lo = std::max(a.lo, b.lo);
    const double hi = std::min(a.hi, b.hi);
    if (lo > hi) return std::nullopt;
    return Interval(lo, hi);
}

inline Interval hull(const Interval& a, const Interval& b) {
    return Interval(std::min(a.lo, b.lo), std::max(a.hi, b.hi));
}

inline Interval hull(const Interval& a, double x) {
    return Interval(std::min(a.lo, x), std::max(a.hi, x));
}

/// Extremes of f(t) = a*cos(t) + b*sin(t) over a closed angle interval,
/// together with the angles attaining them. Uses the amplitude-phase form
/// f = R*cos(t - d), R = hypot(a, b), d = atan2(b, a): candidates are the two
/// endpoints plus any interior stationary angle d + m*pi. The enclosure pad
/// is absolute, scaled by |a| + |b|, because the evaluation error of the sum
/// is relative to the coefficient magnitudes rather than to the result.
struct TrigExtrema {
    double min_value = 0.0;
    double max_value = 0.0;
    double argmin = 0.0;
    double argmax = 0.0;
    Interval padded;

    Interval enclosure() const { return padded; }
};

inline TrigExtrema trig_extrema(double a, double b, const Interval& th) {
    TrigExtrema e;
    const double f_lo = a * std::cos(th.lo) + b * std::sin(th.lo);
    const double f_hi = a * std::cos(th.hi) + b * std::sin(th.hi);
    if (f_lo <= f_hi) {
        e.min_value = f_lo; e.argmin = th.lo;
        e.max_value = f_hi; e.argmax = th.hi;
    } else {
        e.min_value = f_hi; e.argmin = th.hi;
        e.max_value = f_lo; e.argmax = th.lo;
    }
    if (a != 0.0 || b != 0.0) {
        const double pi = std::acos(-1.0);
        const double r = std::hypot(a, b);
        const double d = std::atan2(b, a);
        // Stationary angles t = d + m*pi inside [lo, hi].
        const double m_first = std::ceil((th.lo - d) / pi);
        const double m_last = std::floor((th.hi - d) / pi);
        for (double m = m_first; m <= m_last; m += 1.0) {
            const double t = d + m * pi;
            const bool even = std::fabs(std::remainder(m, 2.0)) < 0.25;
            if (even && r > e.max_value) { e.max_value = r; e.argmax = t; }
            if (!even && -r < e.min_value) { e.min_value = -r; e.argmin = t; }
        }
    }
    const double pad = 1e-15 * (std::fabs(a) + std::fabs(b)) + 1e-300;
    e.padded = Interval(e.min_value - pad, e.max_value + pad);
    return e;
}

inline Interval trig_range(double a, double b, const Interval& th) {
    return trig_extrema(a, b, th).enclosure();
}

}  // namespace gridsafe
