#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace snfield {

// Adaptive Gauss-Kronrod (G7,K15) on a finite interval. Node and weight
// tables are the standard QUADPACK qk15 constants.
namespace detail {

inline constexpr double kK15Nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr double kK15Weights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

inline constexpr double kG7Weights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
void gk15(const F& f, double a, double b, double& result, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kK15Nodes[i]);
        fv[14 - i] = f(c + h * kK15Nodes[i]);
    }
    fv[7] = f(c);
    double kres = kK15Weights[7] * fv[7];
    double gres = kG7Weights[3] * fv[7];
    for (int i = 0; i < 7; ++i) {
        kres += kK15Weights[i] * (fv[i] + fv[14 - i]);
        if (i % 2 == 1) gres += kG7Weights[i / 2] * (fv[i] + fv[14 - i]);
    }
    result = kres * h;
    err = std::abs((kres - gres) * h);
}

} // namespace detail

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = false;
};

template <class F>
QuadResult integrate(const F& f, double a, double b, double rel_tol = 1e-10,
                     double abs_tol = 0.0, int max_depth = 50) {
    struct Seg {
        double a, b, value, err;
        int depth;
    };
    double v0, e0;
    detail::gk15(f, a, b, v0, e0);
    std::vector<Seg> segs{{a, b, v0, e0, 0}};
    double total = v0, total_err = e0;
    for (int iter = 0; iter < 20000; ++iter) {
        if (total_err <= abs_tol || total_err <= rel_tol * std::abs(total))
            return {total, total_err, true};
        // split the worst segment
        std::size_t worst = 0;
        for (std::size_t i = 1; i < segs.size(); ++i)
            if (segs[i].err > segs[worst].err) worst = i;
        Seg s = segs[worst];
        if (s.depth >= max_depth) return {total, total_err, false};
        const double mid = 0.5 * (s.a + s.b);
        double vl, el, vr, er;
        detail::gk15(f, s.a, mid, vl, el);
        detail::gk15(f, mid, s.b, vr, er);
        total += vl + vr - s.value;
        total_err += el + er - s.err;
        segs[worst] = {s.a, mid, vl, el, s.depth + 1};
        segs.push_back({mid, s.b, vr, er, s.depth + 1});
    }
    return {total, total_err, false};
}

// Integral over [a, infinity) of a non-negative integrand whose octave block
// integrals I_k over [a 2^k, a 2^(k+1)] eventually decay geometrically (any
// power-law or faster tail does). Blocks are summed until the ratio
// q = I_{k+1} / I_k stabilizes below 1; the remaining tail is then the
// geometric extrapolation I_last q / (1 - q), which is added to the result.
template <class F>
QuadResult integrate_to_infinity(const F& f, double a, double rel_tol = 1e-10) {
    if (a <= 0) throw std::invalid_argument("integrate_to_infinity: a must be > 0");
    double total = 0.0, total_err = 0.0;
    double lo = a;
    double prev = 0.0, prev_ratio = -1.0;
    for (int k = 0; k < 300; ++k) {
        const double hi = lo * 2.0;
        QuadResult blk = integrate(f, lo, hi, rel_tol * 0.1, 0.0);
        total += blk.value;
        total_err += blk.error;
        const double mag = std::abs(blk.value);
        if (total > 0.0 && mag <= 1e-300) return {total, total_err, true};
        if (prev > 0.0 && mag > 0.0) {
            const double ratio = mag / prev;
            if (ratio < 0.995 && prev_ratio > 0.0) {
                // guard the extrapolation with the larger of the two ratios
                const double q = std::min(0.9975, std::max(ratio, prev_ratio));
                const double tail = mag * q / (1.0 - q);
                const double ratio_drift = std::abs(ratio - prev_ratio);
                const double tail_err =
                    tail * (ratio_drift / ((1.0 - q) * (1.0 - q)) + 1e-12) +
                    mag * ratio_drift;
                if (tail_err <= rel_tol * (total + tail) || tail <= rel_tol * total) {
                    total += tail;
                    total_err += tail_err;
                    return {total, total_err, true};
                }
            }
            prev_ratio = ratio;
        }
        prev = mag;
        lo = hi;
    }
    return {total, total_err, false};
}

} // namespace snfield
