#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "snfield/experiments.hpp"
#include "snfield/field.hpp"
#include "snfield/kernel.hpp"
#include "snfield/marks.hpp"
#include "snfield/quadrature.hpp"

namespace snfield {

// ---------------------------------------------------------------------------
// kappa(mu) = 2 + c2 int exp(-[x]^beta / 2) dx  (beta < inf),  2 (beta = inf),
// where [x] = (1 + max(0, log|x|))^(2/beta). Note [x]^beta = (1+max(0,log|x|))^2
// regardless of beta, so the integral is the same for every finite beta.

inline double kappa_integral(int d) {
    if (d < 1) throw std::invalid_argument("kappa_integral: d must be >= 1");
    const double surface = 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
    auto f = [&](double r) {
        const double e = 1.0 + (r > 1.0 ? std::log(r) : 0.0);
        return surface * std::pow(r, d - 1) * std::exp(-0.5 * e * e);
    };
    const QuadResult head = integrate(f, 0.0, 4.0, 1e-10);
    const QuadResult tail = integrate_to_infinity(f, 4.0, 1e-10);
    if (!tail.converged) throw std::runtime_error("kappa_integral: tail did not certify");
    return head.value + tail.value;
}

// Smallest c2 with P(|Y| >= u) <= c2 exp(-u^beta) over the quantile-clamped
// grid (up to 1 - 1e-8). Concrete distributions need a certified constant;
// for marks whose tails sit exactly at the beta class the grid clamp keeps
// the fit finite.
inline double tail_constant(const MarkDistribution& dist, int grid_points = 1000) {
    const double beta = dist.beta_tail();
    if (!std::isfinite(beta))
        throw std::invalid_argument("tail_constant: compactly supported marks have beta = inf");
    const double hi = dist.quantile(1.0 - 1e-8);
    double c2 = 0.0;
    for (int i = 0; i < grid_points; ++i) {
        const double u = hi * i / (grid_points - 1);
        const double tail = dist.survival(u) + dist.cdf(-u);
        c2 = std::max(c2, tail * std::exp(std::pow(u, beta)));
    }
    return c2;
}

inline double kappa(const MarkDistribution& dist, int d = 2) {
    if (!std::isfinite(dist.beta_tail())) return 2.0;
    return 2.0 + tail_constant(dist) * kappa_integral(d);
}

// ---------------------------------------------------------------------------
// Concentration thresholds.

enum class BoundVariant { sup, point, grad };

struct BoundInputs {
    Kernel kernel;
    MarkDistribution mark;
    double s = 1.0;
    double t = 1.0;
    BoundVariant variant = BoundVariant::sup;
    int d = 2;
};

struct BoundResult {
    double threshold = 0.0;
    double tail_probability = 0.0;
};

// Threshold and tail probability of the concentration inequality for the
// requested variant:
//   sup:   P(||f||_{sQ,inf} >= t^(1/b) (||hg||_1 + sqrt(2t) ||hg||_2 + t/3 ||hg||_inf))
//          <= (s+1)^2 kappa e^(-t/2)
//   point: P(|f(0)| >= t^(1/b) (sqrt(2t) ||tg||_2 + t/3 ||tg||_inf)) <= kappa e^(-t/2)
//   grad:  P(||f||_{sQ,inf} >= d t^(1/b) (sqrt(2t) ||tg||_2 + t/3 ||tg||_inf
//          + ||h∇g||_1 + sqrt(2t) ||h∇g||_2 + t/3 ||h∇g||_inf))
//          <= (s+1)^2 (d+1) kappa e^(-t/2)
// with hg / tg the sup-square and log majorants of the kernel. Compactly
// supported marks bounded by M rescale the threshold by M (the inequality is
// stated for support in [-1,1]).
inline BoundResult concentration_threshold(const BoundInputs& in) {
    if (in.s < 1.0 || in.t < 1.0)
        throw std::invalid_argument("concentration_threshold: needs s >= 1 and t >= 1");
    const double beta = in.mark.beta_tail();
    const double tpow = std::isfinite(beta) ? std::pow(in.t, 1.0 / beta) : 1.0;
    const double kap = kappa(in.mark, in.d);
    const double scale = std::isfinite(in.mark.support_bound()) ? in.mark.support_bound() : 1.0;
    BoundResult out;
    switch (in.variant) {
        case BoundVariant::sup: {
            const Norms hat = cached_kernel_norms(in.kernel, NormTarget::hat_g, beta);
            out.threshold =
                scale * tpow *
                (hat.l1 + std::sqrt(2.0 * in.t) * hat.l2 + in.t / 3.0 * hat.linf);
            out.tail_probability = (in.s + 1.0) * (in.s + 1.0) * kap * std::exp(-in.t / 2.0);
            break;
        }
        case BoundVariant::point: {
            const Norms til = cached_kernel_norms(in.kernel, NormTarget::tilde_g, beta);
            out.threshold = scale * tpow *
                            (std::sqrt(2.0 * in.t) * til.l2 + in.t / 3.0 * til.linf);
            out.tail_probability = kap * std::exp(-in.t / 2.0);
            break;
        }
        case BoundVariant::grad: {
            const Norms til = cached_kernel_norms(in.kernel, NormTarget::tilde_g, beta);
            const Norms hgr = cached_kernel_norms(in.kernel, NormTarget::hat_grad_g, beta);
            out.threshold = scale * in.d * tpow *
                            (std::sqrt(2.0 * in.t) * til.l2 + in.t / 3.0 * til.linf +
                             hgr.l1 + std::sqrt(2.0 * in.t) * hgr.l2 + in.t / 3.0 * hgr.linf);
            out.tail_probability =
                (in.s + 1.0) * (in.s + 1.0) * (in.d + 1.0) * kap * std::exp(-in.t / 2.0);
            break;
        }
    }
    if (!std::isfinite(out.threshold))
        throw std::runtime_error("concentration_threshold: norms are not finite");
    return out;
}

// Bound for the residual field f - f_r: the sup variant at t = (log r)^2 with
// the residual kernel's norms.
inline BoundResult truncated_bound(const Kernel& kernel, const MarkDistribution& mark,
                                   double r, double s, double t = 0.0,
                                   BoundVariant variant = BoundVariant::sup) {
    if (r < 2.0) throw std::invalid_argument("truncated_bound: r must be >= 2");
    BoundInputs in;
    in.kernel = kernel.truncated(r, TruncMode::residual);
    in.mark = mark;
    in.s = s;
    in.t = t > 0.0 ? t : std::log(r) * std::log(r);
    in.variant = variant;
    return concentration_threshold(in);
}

// ---------------------------------------------------------------------------
// Empirical comparison: frequency of threshold exceedance over n samples.

struct EmpiricalBoundRow {
    double t = 0;
    double threshold = 0;
    double tail_probability = 0;
    double empirical = 0;
    double ci = 0;
    bool holds = false;
};

inline std::vector<EmpiricalBoundRow> empirical_vs_bound(const ExperimentConfig& cfg,
                                                         const std::vector<double>& ts,
                                                         long n, double s = 1.0,
                                                         BoundVariant variant = BoundVariant::sup) {
    if (n < 1000)
        throw std::invalid_argument("empirical_vs_bound: needs n >= 1000 for stable tails");
    const double reach = pad_radius(cfg.kernel, cfg.mark, 0.0, cfg.pad_rel_tol);
    const Window win{-0.5 * s, -0.5 * s, 0.5 * s, 0.5 * s};
    const GridSpec grid = GridSpec::covering(win, cfg.grid_spacing);

    // one pass of field statistics, shared across all t rows
    std::vector<double> stat(static_cast<std::size_t>(n), 0.0);
    parallel_trials(n, cfg.threads, [&](long trial) {
        auto cloud = std::make_shared<const PointCloud>(sample_poisson_cloud(
            win.padded(reach), 1.0, cfg.mark, cfg.master_seed, trial));
        if (variant == BoundVariant::point) {
            stat[trial] = std::abs(field_value_at(*cloud, cloud->marks, cfg.kernel, 0, 0, reach));
        } else {
            const auto fs =
                synthesize(cloud, cfg.kernel, grid, win, reach, {}, {}, cfg.master_seed);
            double sup = 0.0;
            for (double v : fs.values) sup = std::max(sup, std::abs(v));
            stat[trial] = sup;
        }
    });

    std::vector<EmpiricalBoundRow> rows;
    for (double t : ts) {
        BoundInputs in;
        in.kernel = cfg.kernel;
        in.mark = cfg.mark;
        in.s = s;
        in.t = t;
        in.variant = variant;
        const BoundResult b = concentration_threshold(in);
        EmpiricalBoundRow row;
        row.t = t;
        row.threshold = b.threshold;
        row.tail_probability = b.tail_probability;
        long exceed = 0;
        for (double v : stat) exceed += v >= b.threshold ? 1 : 0;
        row.empirical = static_cast<double>(exceed) / n;
        row.ci = 1.96 * std::sqrt(std::max(row.empirical * (1 - row.empirical), 1e-12) / n);
        const double cap = std::min(1.0, row.tail_probability);
        row.holds = row.empirical <= cap + 3.0 * row.ci / 1.96;
        rows.push_back(row);
    }
    return rows;
}

} // namespace snfield
