#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "snfield/quadrature.hpp"

namespace snfield {

inline constexpr double kPi = 3.14159265358979323846264338;
inline constexpr double kTwoPi = 6.28318530717958647692528677;

// Smooth cutoff: chi(s) = 1 for s <= 1/4, 0 for s >= 1/2. On (1/4, 1/2) it is
// the C-infinity partition chi = q(1-t) / (q(t) + q(1-t)) with q(t) = exp(-1/t)
// and t = 4s - 1. All derivatives vanish at both ends of the transition band.
struct Cutoff {
    static double value(double s) {
        if (s <= 0.25) return 1.0;
        if (s >= 0.5) return 0.0;
        const double t = 4.0 * s - 1.0;
        const double a = std::exp(-1.0 / (1.0 - t));
        const double b = std::exp(-1.0 / t);
        return a / (a + b);
    }

    // d(chi)/ds; chain rule through t = 4s - 1, d(q(t))/dt = q(t)/t^2.
    static double derivative(double s) {
        if (s <= 0.25 || s >= 0.5) return 0.0;
        const double t = 4.0 * s - 1.0;
        const double a = std::exp(-1.0 / (1.0 - t)); // q(1-t)
        const double b = std::exp(-1.0 / t);         // q(t)
        const double da = -a / ((1.0 - t) * (1.0 - t)); // d q(1-t)/dt
        const double db = b / (t * t);
        const double sum = a + b;
        return 4.0 * (da * sum - a * (da + db)) / (sum * sum);
    }
};

enum class KernelFamily { powerlaw, stretched_exp };
enum class TruncMode { none, truncated, residual };

inline std::string to_string(KernelFamily f) {
    return f == KernelFamily::powerlaw ? "powerlaw" : "stretchedexp";
}

// Isotropic kernel: powerlaw g(x) = (1+|x|)^(-alpha) or
// stretched-exponential g(x) = exp(-(1+|x|^2)^(beta/2)).
// `mode` selects the plain kernel, its smooth truncation g_r = g chi(|x|/r),
// or the residual g^r = g (1 - chi(|x|/r)), with g = g_r + g^r pointwise.
struct Kernel {
    KernelFamily family = KernelFamily::powerlaw;
    double shape = 3.5; // alpha (powerlaw) or beta (stretched_exp)
    TruncMode mode = TruncMode::none;
    double trunc_radius = 0.0;

    static Kernel powerlaw(double alpha) {
        if (alpha <= 2.0)
            throw std::invalid_argument("powerlaw kernel requires alpha > 2");
        return {KernelFamily::powerlaw, alpha, TruncMode::none, 0.0};
    }

    static Kernel stretched_exp(double beta) {
        if (beta <= 0.0 || beta >= 1.0)
            throw std::invalid_argument("stretched-exp kernel requires beta in (0,1)");
        return {KernelFamily::stretched_exp, beta, TruncMode::none, 0.0};
    }

    Kernel truncated(double r, TruncMode m = TruncMode::truncated) const {
        if (r <= 0.0) throw std::invalid_argument("truncation radius must be > 0");
        Kernel k = *this;
        k.mode = m;
        k.trunc_radius = r;
        return k;
    }

    // Radial profile of the plain (untruncated) kernel.
    double base_radial(double r) const {
        if (family == KernelFamily::powerlaw) return std::pow(1.0 + r, -shape);
        return std::exp(-std::pow(1.0 + r * r, 0.5 * shape));
    }

    // d/dr of the plain profile.
    double base_radial_deriv(double r) const {
        if (family == KernelFamily::powerlaw) return -shape * std::pow(1.0 + r, -shape - 1.0);
        const double u = 1.0 + r * r;
        return -shape * r * std::pow(u, 0.5 * shape - 1.0) * std::exp(-std::pow(u, 0.5 * shape));
    }

    double radial(double r) const {
        const double g = base_radial(r);
        switch (mode) {
            case TruncMode::none: return g;
            case TruncMode::truncated: return g * Cutoff::value(r / trunc_radius);
            case TruncMode::residual: return g * (1.0 - Cutoff::value(r / trunc_radius));
        }
        return g;
    }

    double radial_deriv(double r) const {
        const double g = base_radial(r);
        const double dg = base_radial_deriv(r);
        switch (mode) {
            case TruncMode::none: return dg;
            case TruncMode::truncated: {
                const double s = r / trunc_radius;
                return dg * Cutoff::value(s) + g * Cutoff::derivative(s) / trunc_radius;
            }
            case TruncMode::residual: {
                const double s = r / trunc_radius;
                return dg * (1.0 - Cutoff::value(s)) - g * Cutoff::derivative(s) / trunc_radius;
            }
        }
        return dg;
    }

    double value(double x, double y) const { return radial(std::hypot(x, y)); }

    // Gradient by analytic differentiation. The origin returns (0,0): the
    // radial symmetry fixes the value even for the powerlaw profile, whose
    // one-sided radial slope does not vanish there.
    void gradient(double x, double y, double& gx, double& gy) const {
        const double r = std::hypot(x, y);
        if (r == 0.0) {
            gx = gy = 0.0;
            return;
        }
        const double d = radial_deriv(r) / r;
        gx = d * x;
        gy = d * y;
    }

    // Support / reach of the configured kernel. Truncated kernels vanish
    // outside B(r/2); everything else has unbounded support.
    double support_radius() const {
        return mode == TruncMode::truncated ? 0.5 * trunc_radius
                                            : std::numeric_limits<double>::infinity();
    }

    // Inner radius below which the residual kernel vanishes.
    double inner_radius() const {
        return mode == TruncMode::residual ? 0.25 * trunc_radius : 0.0;
    }
};

// ---------------------------------------------------------------------------
// Kernel norms.

enum class NormTarget { g, grad_g, tilde_g, hat_g, hat_grad_g };

struct Norms {
    double l1 = 0.0;
    double l2 = 0.0;
    double linf = 0.0;
};

namespace kernel_detail {

// [x] = (1 + max(0, log|x|))^(2/beta); identically 1 when beta = infinity.
inline double log_majorant(double r, double beta_tail) {
    if (!std::isfinite(beta_tail)) return 1.0;
    const double l = r > 1.0 ? std::log(r) : 0.0;
    return std::pow(1.0 + l, 2.0 / beta_tail);
}

// |profile| of the requested target as a function of radius.
inline double target_profile(const Kernel& k, NormTarget t, double beta_tail, double r) {
    switch (t) {
        case NormTarget::g: return std::abs(k.radial(r));
        case NormTarget::grad_g: return std::abs(k.radial_deriv(r));
        case NormTarget::tilde_g: return log_majorant(r, beta_tail) * std::abs(k.radial(r));
        case NormTarget::hat_g: return log_majorant(r, beta_tail) * std::abs(k.radial(r));
        case NormTarget::hat_grad_g:
            return log_majorant(r, beta_tail) * std::abs(k.radial_deriv(r));
    }
    return 0.0;
}

inline bool is_hat(NormTarget t) {
    return t == NormTarget::hat_g || t == NormTarget::hat_grad_g;
}

// sup of the profile over [lo, hi]: dense scan plus golden-section refinement
// around the best sample. The profiles are products of a monotone kernel tail
// and a logarithmic majorant, so a scan at this density brackets every bump.
template <class P>
double interval_sup(const P& prof, double lo, double hi) {
    if (hi <= lo) return prof(lo);
    const int n = 48;
    double best_x = lo, best = prof(lo);
    for (int i = 1; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double v = prof(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    double a = std::max(lo, best_x - (hi - lo) / n);
    double b = std::min(hi, best_x + (hi - lo) / n);
    const double gr = 0.6180339887498949;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = prof(x1), f2 = prof(x2);
    for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = prof(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = prof(x1);
        }
    }
    return std::max(best, std::max(f1, f2));
}

// Profile summary for fast interval sups: the locations of all interior
// local maxima, found once by a dense log-spaced scan with local refinement.
// sup over [lo, hi] then needs only the endpoints and the bracketed maxima.
template <class P>
class ProfileSups {
public:
    ProfileSups(const P& prof, double scan_hi) : prof_(prof) {
        const int n = 4096;
        const double lo = 1e-4;
        std::vector<double> xs(n + 1), vs(n + 1);
        const double ratio = std::log(scan_hi / lo) / n;
        for (int i = 0; i <= n; ++i) {
            xs[i] = lo * std::exp(ratio * i);
            vs[i] = prof_(xs[i]);
        }
        maxima_.push_back(0.0); // radial profiles may peak at the origin
        for (int i = 1; i < n; ++i) {
            if (vs[i] >= vs[i - 1] && vs[i] >= vs[i + 1] && vs[i] > 0.0) {
                // golden refinement inside the bracketing cell
                double a = xs[i - 1], b = xs[i + 1];
                const double gr = 0.6180339887498949;
                double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
                double f1 = prof_(x1), f2 = prof_(x2);
                for (int it = 0; it < 40; ++it) {
                    if (f1 < f2) {
                        a = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = a + gr * (b - a);
                        f2 = prof_(x2);
                    } else {
                        b = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = b - gr * (b - a);
                        f1 = prof_(x1);
                    }
                }
                maxima_.push_back(0.5 * (a + b));
            }
        }
    }

    double sup(double lo, double hi) const {
        double best = std::max(prof_(lo), prof_(hi));
        for (double m : maxima_)
            if (m > lo && m < hi) best = std::max(best, prof_(m));
        return best;
    }

private:
    P prof_;
    std::vector<double> maxima_;
};

// hat evaluation: sup over y in Q = [-1/2,1/2]^2 of profile(|x+y|).
// As y sweeps Q, |x+y| covers exactly [dmin, dmax], so the planar sup
// reduces to a 1-D sup of the radial profile over that interval.
template <class P>
double hat_eval(const ProfileSups<P>& sups, double x1, double x2) {
    const double ax = std::abs(x1), ay = std::abs(x2);
    const double dmin = std::hypot(std::max(0.0, ax - 0.5), std::max(0.0, ay - 0.5));
    const double dmax = std::hypot(ax + 0.5, ay + 0.5);
    return sups.sup(dmin, dmax);
}

} // namespace kernel_detail

// L1/L2/Linf of the requested target function, by adaptive polar quadrature
// with a geometric tail certificate past the resolved range. Hat targets
// (sup over the unit square) integrate over theta in [0, pi/4] and use the
// 8-fold dihedral symmetry.
inline Norms kernel_norms(const Kernel& k, NormTarget target, double beta_tail,
                          double rel_tol = 1e-8) {
    using namespace kernel_detail;
    if (k.family == KernelFamily::powerlaw && k.mode != TruncMode::truncated) {
        const double grad_shift = (target == NormTarget::grad_g ||
                                   target == NormTarget::hat_grad_g)
                                      ? 1.0
                                      : 0.0;
        if (k.shape + grad_shift <= 2.0)
            throw std::invalid_argument("kernel_norms: L1 not integrable for alpha <= 2");
    }

    auto prof = [&](double r) { return target_profile(k, target, beta_tail, r); };

    Norms out;
    const double sup_scan_hi = std::isfinite(k.support_radius())
                                   ? k.support_radius()
                                   : std::max(64.0, 4.0 * k.trunc_radius + 64.0);
    out.linf = interval_sup(prof, 0.0, sup_scan_hi);

    if (!is_hat(target)) {
        auto f1 = [&](double r) { return kTwoPi * r * prof(r); };
        auto f2 = [&](double r) {
            const double p = prof(r);
            return kTwoPi * r * p * p;
        };
        const double support = k.support_radius();
        if (std::isfinite(support)) {
            out.l1 = integrate(f1, 0.0, support, rel_tol).value;
            out.l2 = std::sqrt(integrate(f2, 0.0, support, rel_tol).value);
        } else {
            const double head = 8.0;
            QuadResult h1 = integrate(f1, 0.0, head, rel_tol);
            QuadResult t1 = integrate_to_infinity(f1, head, rel_tol);
            if (!t1.converged)
                throw std::runtime_error("kernel_norms: L1 tail did not certify");
            QuadResult h2 = integrate(f2, 0.0, head, rel_tol);
            QuadResult t2 = integrate_to_infinity(f2, head, rel_tol);
            out.l1 = h1.value + t1.value;
            out.l2 = std::sqrt(h2.value + t2.value);
        }
        return out;
    }

    // hat targets: integrate theta by 16-point Gauss-Legendre over [0, pi/4].
    static const double gl_x[8] = {0.0950125098376374, 0.2816035507792589,
                                   0.4580167776572274, 0.6178762444026438,
                                   0.7554044083550030, 0.8656312023878318,
                                   0.9445750230732326, 0.9894009349916499};
    static const double gl_w[8] = {0.1894506104550685, 0.1826034150449236,
                                   0.1691565193950025, 0.1495959888165767,
                                   0.1246289712555339, 0.0951585116824928,
                                   0.0622535239386479, 0.0271524594117541};
    const ProfileSups<decltype(prof)> sups(prof, sup_scan_hi + 2.0);
    auto ring = [&](double r, int pow2) {
        // 8 * integral over [0, pi/4] of hat(r, theta)^p dtheta, times r
        const double half = kPi / 8.0;
        double acc = 0.0;
        for (int i = 0; i < 8; ++i) {
            for (double s : {-1.0, 1.0}) {
                const double th = half + s * half * gl_x[i];
                const double h = hat_eval(sups, r * std::cos(th), r * std::sin(th));
                acc += gl_w[i] * half * (pow2 == 1 ? h : h * h);
            }
        }
        return 8.0 * acc * r;
    };
    auto f1 = [&](double r) { return ring(r, 1); };
    auto f2 = [&](double r) { return ring(r, 2); };
    const double support = k.support_radius();
    const double hat_rel = std::max(rel_tol, 1e-7); // hat evals are costly
    if (std::isfinite(support)) {
        const double hi = support + 0.7071067811865476; // sup reaches past support
        out.l1 = integrate(f1, 0.0, hi, hat_rel).value;
        out.l2 = std::sqrt(integrate(f2, 0.0, hi, hat_rel).value);
    } else {
        const double head = 8.0;
        QuadResult h1 = integrate(f1, 0.0, head, hat_rel);
        QuadResult t1 = integrate_to_infinity(f1, head, hat_rel);
        QuadResult h2 = integrate(f2, 0.0, head, hat_rel);
        QuadResult t2 = integrate_to_infinity(f2, head, hat_rel);
        if (!t1.converged || !t2.converged)
            throw std::runtime_error("kernel_norms: hat tail did not certify");
        out.l1 = h1.value + t1.value;
        out.l2 = std::sqrt(h2.value + t2.value);
    }
    return out;
}

// Memoized norms; bound sweeps ask for the same (kernel, target) pair many
// times and hat-target quadrature is costly.
inline Norms cached_kernel_norms(const Kernel& k, NormTarget target, double beta_tail,
                                 double rel_tol = 1e-8) {
    struct Key {
        int family, mode, target;
        double shape, trunc, beta, tol;
        bool operator<(const Key& o) const {
            return std::tie(family, mode, target, shape, trunc, beta, tol) <
                   std::tie(o.family, o.mode, o.target, o.shape, o.trunc, o.beta, o.tol);
        }
    };
    static std::map<Key, Norms> cache;
    static std::mutex mutex;
    const Key key{static_cast<int>(k.family), static_cast<int>(k.mode),
                  static_cast<int>(target), k.shape, k.trunc_radius, beta_tail, rel_tol};
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    const Norms n = kernel_norms(k, target, beta_tail, rel_tol);
    std::lock_guard<std::mutex> lock(mutex);
    cache.emplace(key, n);
    return n;
}

// L2 norm of the plain kernel restricted to {|x| > R}; closed form for the
// powerlaw family, octave-certified quadrature otherwise. Used to certify
// window padding.
inline double l2_tail(const Kernel& k, double R) {
    if (k.mode == TruncMode::truncated && R >= k.support_radius()) return 0.0;
    if (k.family == KernelFamily::powerlaw) {
        // 2 pi int_R^inf r (1+r)^(-2a) dr, u = 1+r
        const double p = 2.0 * k.shape;
        const double u = 1.0 + R;
        const double iv = std::pow(u, 2.0 - p) / (p - 2.0) - std::pow(u, 1.0 - p) / (p - 1.0);
        return std::sqrt(kTwoPi * iv);
    }
    auto f = [&](double r) {
        const double g = k.base_radial(r);
        return kTwoPi * r * g * g;
    };
    QuadResult q = integrate_to_infinity(f, std::max(R, 1e-9), 1e-9);
    return std::sqrt(std::max(0.0, q.value));
}

// L1 norm of the plain kernel restricted to {|x| > R} (enters the neglected
// mean for intensity-tilted fields).
inline double l1_tail(const Kernel& k, double R) {
    if (k.mode == TruncMode::truncated && R >= k.support_radius()) return 0.0;
    if (k.family == KernelFamily::powerlaw) {
        const double a = k.shape;
        const double u = 1.0 + R;
        return kTwoPi * (std::pow(u, 2.0 - a) / (a - 2.0) - std::pow(u, 1.0 - a) / (a - 1.0));
    }
    auto f = [&](double r) { return kTwoPi * r * k.base_radial(r); };
    QuadResult q = integrate_to_infinity(f, std::max(R, 1e-9), 1e-9);
    return std::max(0.0, q.value);
}

} // namespace snfield
