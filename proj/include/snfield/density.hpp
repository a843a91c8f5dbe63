#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "snfield/experiments.hpp"
#include "snfield/field.hpp"
#include "snfield/kernel.hpp"
#include "snfield/marks.hpp"
#include "snfield/quadrature.hpp"

namespace snfield {

// Characteristic function of (f(0), grad f(0)) and its inversion to the
// density of f(0). For a symmetric mark law and isotropic kernel h(|x|),
//   -log phi(u, v) = 2 pi int_0^inf r E_Y[1 - cos(u Y h(r)) J0(|v| Y |h'(r)|)] dr,
// which is real; the angular integral of the gradient term produced the
// order-0 Bessel factor.
struct CharFnSpec {
    Kernel kernel;
    MarkDistribution mark;
    double mark_quantile = 1.0 - 1e-10; // mark integration truncated here
    double rel_tol = 1e-8;              // spatial quadrature tolerance

    CharFnSpec() = default;
    CharFnSpec(const Kernel& k, const MarkDistribution& m) : kernel(k), mark(m) {
        if (k.family == KernelFamily::powerlaw && k.shape <= 2.0)
            throw std::invalid_argument("char_fn: kernel must be integrable (alpha > 2)");
    }
};

namespace density_detail {

// Quadrature nodes for E[phi(|Y|)] with phi even: composite 16-point
// Gauss-Legendre against the mark density on [0, q], or the single atom for
// Rademacher marks.
struct MarkNodes {
    std::vector<double> m, w;
};

inline MarkNodes mark_nodes(const MarkDistribution& dist, double quantile) {
    static const double gl_x[8] = {0.0950125098376374, 0.2816035507792589,
                                   0.4580167776572274, 0.6178762444026438,
                                   0.7554044083550030, 0.8656312023878318,
                                   0.9445750230732326, 0.9894009349916499};
    static const double gl_w[8] = {0.1894506104550685, 0.1826034150449236,
                                   0.1691565193950025, 0.1495959888165767,
                                   0.1246289712555339, 0.0951585116824928,
                                   0.0622535239386479, 0.0271524594117541};
    MarkNodes nodes;
    if (!dist.has_density()) { // Rademacher: |Y| = 1
        nodes.m = {1.0};
        nodes.w = {1.0};
        return nodes;
    }
    const double q = dist.quantile(0.5 + 0.5 * quantile); // |Y| quantile
    const int panels = 8;
    for (int p = 0; p < panels; ++p) {
        const double a = q * p / panels, b = q * (p + 1) / panels;
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        for (int i = 0; i < 8; ++i) {
            for (double sgn : {-1.0, 1.0}) {
                const double x = c + sgn * h * gl_x[i];
                nodes.m.push_back(x);
                nodes.w.push_back(2.0 * *dist.pdf(x) * gl_w[i] * h);
            }
        }
    }
    return nodes;
}

} // namespace density_detail

inline std::complex<double> char_fn(const CharFnSpec& spec, double u, double v_norm) {
    if (u == 0.0 && v_norm == 0.0) return {1.0, 0.0};
    const auto nodes = density_detail::mark_nodes(spec.mark, spec.mark_quantile);
    auto integrand = [&](double r) {
        const double h = spec.kernel.radial(r);
        const double hp = v_norm != 0.0 ? std::abs(spec.kernel.radial_deriv(r)) : 0.0;
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.m.size(); ++i) {
            const double m = nodes.m[i];
            double term = 1.0 - std::cos(u * m * h) *
                                    (v_norm != 0.0 ? std::cyl_bessel_j(0.0, v_norm * m * hp)
                                                   : 1.0);
            acc += nodes.w[i] * term;
        }
        return kTwoPi * r * acc;
    };
    const QuadResult head = integrate(integrand, 0.0, 8.0, spec.rel_tol);
    const QuadResult tail = integrate_to_infinity(integrand, 8.0, spec.rel_tol);
    if (!tail.converged)
        throw std::runtime_error("char_fn: spatial quadrature did not converge");
    const double neg_log = head.value + tail.value;
    return {std::exp(-neg_log), 0.0};
}

// phi(u, 0) tabulated on a uniform u-grid extending until phi < 1e-10.
struct CharFnTable {
    double du = 0;
    std::vector<double> phi; // phi[k] = phi(k du)
};

inline CharFnTable char_fn_table(const CharFnSpec& spec, double x_extent,
                                 double decay_floor = 1e-10) {
    CharFnTable table;
    const double sd = field_sd(spec.kernel, spec.mark);
    if (!(sd > 0)) throw std::invalid_argument("char_fn_table: degenerate field");
    // reconstruction period 2 pi / du must exceed the density support plus
    // the evaluation extent (anti-aliasing)
    table.du = kPi / (8.0 * sd + x_extent);
    table.phi.push_back(1.0);
    const std::size_t max_points = 200000;
    while (table.phi.back() > decay_floor) {
        if (table.phi.size() > max_points)
            throw std::runtime_error(
                "char_fn_table: characteristic function decays too slowly; the bounded "
                "density assumption may fail for this configuration");
        const double u = table.du * static_cast<double>(table.phi.size());
        table.phi.push_back(char_fn(spec, u, 0.0).real());
    }
    return table;
}

struct DensityCurve {
    std::vector<double> x, density;
    double min_density = 0; // most negative lobe (reported, not clipped)
    double integral = 0;
    double variance = 0;
    CharFnTable table;
};

// density(x) = (1/pi) int_0^inf phi(u) cos(u x) du by trapezoid on the table.
inline DensityCurve invert_density(const CharFnSpec& spec, const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("invert_density: empty grid");
    double extent = 0.0;
    for (double x : xs) extent = std::max(extent, std::abs(x));
    DensityCurve out;
    out.table = char_fn_table(spec, extent);
    const double du = out.table.du;
    out.x = xs;
    out.density.resize(xs.size());
    for (std::size_t j = 0; j < xs.size(); ++j) {
        double acc = 0.5; // phi(0) = 1 with trapezoid half-weight
        for (std::size_t k = 1; k < out.table.phi.size(); ++k)
            acc += out.table.phi[k] * std::cos(du * static_cast<double>(k) * xs[j]);
        out.density[j] = acc * du / kPi;
        out.min_density = std::min(out.min_density, out.density[j]);
    }
    for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
        const double dx = xs[j + 1] - xs[j];
        out.integral += 0.5 * dx * (out.density[j] + out.density[j + 1]);
        out.variance += 0.5 * dx *
                        (xs[j] * xs[j] * out.density[j] + xs[j + 1] * xs[j + 1] * out.density[j + 1]);
    }
    // negative lobes are reported through min_density, never clipped
    return out;
}

inline std::vector<double> default_density_grid(const CharFnSpec& spec, int points = 513) {
    const double sd = field_sd(spec.kernel, spec.mark);
    std::vector<double> xs(points);
    for (int i = 0; i < points; ++i)
        xs[i] = -8.0 * sd + 16.0 * sd * i / (points - 1);
    return xs;
}

struct DensityCompareReport {
    double ks = 0;
    long n = 0;
    DensityCurve curve;
};

// KS distance between the CDF integrated from the inverted density and the
// empirical CDF of simulated f(0) values.
inline DensityCompareReport empirical_density_compare(const CharFnSpec& spec, long n,
                                                      std::uint64_t seed, int threads = 0,
                                                      double pad_rel_tol = 1e-3) {
    if (spec.mark.second_moment() <= 0.0 || spec.mark.param <= 0.0)
        throw std::invalid_argument(
            "empirical_density_compare: degenerate mark distribution, f is a.s. constant");
    DensityCompareReport rep;
    rep.n = n;
    rep.curve = invert_density(spec, default_density_grid(spec));

    const double reach = pad_radius(spec.kernel, spec.mark, 0.0, pad_rel_tol);
    const Window pt{0, 0, 0, 0};
    std::vector<double> sample(static_cast<std::size_t>(n));
    parallel_trials(n, threads, [&](long t) {
        const auto c = sample_poisson_cloud(pt.padded(reach), 1.0, spec.mark, seed, t);
        sample[t] = field_value_at(c, c.marks, spec.kernel, 0.0, 0.0, reach);
    });
    std::sort(sample.begin(), sample.end());

    // CDF of the inverted density by cumulative trapezoid, then sup gap
    const auto& xs = rep.curve.x;
    std::vector<double> cdf(xs.size(), 0.0);
    for (std::size_t j = 1; j < xs.size(); ++j)
        cdf[j] = cdf[j - 1] + 0.5 * (xs[j] - xs[j - 1]) *
                                  (rep.curve.density[j] + rep.curve.density[j - 1]);
    auto cdf_at = [&](double x) {
        if (x <= xs.front()) return 0.0;
        if (x >= xs.back()) return cdf.back();
        const std::size_t j =
            std::upper_bound(xs.begin(), xs.end(), x) - xs.begin() - 1;
        const double f = (x - xs[j]) / (xs[j + 1] - xs[j]);
        return cdf[j] + f * (cdf[j + 1] - cdf[j]);
    };
    double ks = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double F = std::clamp(cdf_at(sample[i]), 0.0, 1.0);
        ks = std::max(ks, std::abs(F - static_cast<double>(i) / n));
        ks = std::max(ks, std::abs(static_cast<double>(i + 1) / n - F));
    }
    rep.ks = ks;
    return rep;
}

} // namespace snfield
