#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "snfield/field.hpp"
#include "snfield/parallel.hpp"
#include "snfield/percolation.hpp"

namespace snfield {

struct Estimate {
    double p_hat = 0.0;
    long n = 0;
    double half_width = 0.0; // normal-approximation 95% CI
    std::uint64_t master_seed = 0;
    std::string config_digest;
};

inline Estimate make_estimate(long successes, long n, std::uint64_t seed,
                              const std::string& digest) {
    Estimate e;
    e.n = n;
    e.p_hat = n > 0 ? static_cast<double>(successes) / static_cast<double>(n) : 0.0;
    e.half_width = n > 0 ? 1.96 * std::sqrt(e.p_hat * (1.0 - e.p_hat) / n) : 0.0;
    e.master_seed = seed;
    e.config_digest = digest;
    return e;
}

struct SweepCell {
    double axis1 = 0; // level or eta
    double axis2 = 0; // R
    std::uint64_t trial_base = 0;
    Estimate estimate;
};

struct SweepTable {
    std::string axis1_name, axis2_name;
    std::vector<SweepCell> cells;
    std::map<std::string, double> fits;
};

struct ExperimentConfig {
    MarkDistribution mark;
    Kernel kernel;
    double grid_spacing = 0.25;
    double pad_rel_tol = 1e-3;
    std::uint64_t master_seed = 1;
    int threads = 0;
    std::string digest;

    double field_sd() const { return snfield::field_sd(kernel, mark); }
};

// ---------------------------------------------------------------------------

inline Estimate estimate_crossing(const ExperimentConfig& cfg, const CrossingSpec& spec,
                                  long n, const VariantSpec& variant = {},
                                  std::uint64_t trial_base = 0) {
    if (n < 1) throw std::invalid_argument("estimate_crossing: n must be >= 1");
    const double eta = variant.eta.value_or(0.0);
    const double reach = pad_radius(cfg.kernel, cfg.mark, eta, cfg.pad_rel_tol);
    const Window win = spec.kind == EventKind::arm
                           ? Window{-spec.rho2, -spec.rho2, spec.rho2, spec.rho2}
                           : Window{0, 0, spec.rho1, spec.rho2};
    const GridSpec grid = GridSpec::covering(win, cfg.grid_spacing);
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(n), 0);
    parallel_trials(n, cfg.threads, [&](long t) {
        auto cloud = std::make_shared<const PointCloud>(sample_poisson_cloud(
            win.padded(reach), 1.0, cfg.mark, cfg.master_seed, trial_base + t));
        const auto fs = synthesize(cloud, cfg.kernel, grid, win, reach, variant, {},
                                   cfg.master_seed);
        hit[t] = detect(excursion(fs, spec.level), spec) ? 1 : 0;
    });
    long succ = 0;
    for (auto h : hit) succ += h;
    return make_estimate(succ, n, cfg.master_seed, cfg.digest);
}

// Sweep of Cross_l(aspect*R, R) over levels and sizes. Levels are absolute;
// within a trial the field is shared across levels, so the per-trial
// indicator is non-decreasing along the level axis by construction (checked).
inline SweepTable level_sweep(const ExperimentConfig& cfg, std::vector<double> levels,
                              const std::vector<double>& Rs, long n, double aspect = 2.0) {
    if (!std::is_sorted(levels.begin(), levels.end()))
        throw std::invalid_argument("level_sweep: levels must be sorted ascending");
    const double reach = pad_radius(cfg.kernel, cfg.mark, 0.0, cfg.pad_rel_tol);
    SweepTable table;
    table.axis1_name = "level";
    table.axis2_name = "R";
    for (std::size_t row = 0; row < Rs.size(); ++row) {
        const double R = Rs[row];
        const Window win{0, 0, aspect * R, R};
        const GridSpec grid = GridSpec::covering(win, cfg.grid_spacing);
        const std::uint64_t base = static_cast<std::uint64_t>(row) * n;
        std::vector<long> succ_by_level(levels.size(), 0);
        std::vector<std::vector<std::uint8_t>> hits(levels.size());
        for (auto& h : hits) h.assign(static_cast<std::size_t>(n), 0);
        parallel_trials(n, cfg.threads, [&](long t) {
            auto cloud = std::make_shared<const PointCloud>(sample_poisson_cloud(
                win.padded(reach), 1.0, cfg.mark, cfg.master_seed, base + t));
            const auto fs =
                synthesize(cloud, cfg.kernel, grid, win, reach, {}, {}, cfg.master_seed);
            bool prev = false;
            for (std::size_t li = 0; li < levels.size(); ++li) {
                const bool cur = detect(excursion(fs, levels[li]),
                                        CrossingSpec::cross(aspect * R, R, levels[li]));
                if (prev && !cur)
                    throw std::logic_error("level_sweep: coupled indicators not monotone");
                hits[li][t] = cur ? 1 : 0;
                prev = cur;
            }
        });
        for (std::size_t li = 0; li < levels.size(); ++li) {
            for (auto h : hits[li]) succ_by_level[li] += h;
            SweepCell cell;
            cell.axis1 = levels[li];
            cell.axis2 = R;
            cell.trial_base = base;
            cell.estimate = make_estimate(succ_by_level[li], n, cfg.master_seed, cfg.digest);
            table.cells.push_back(cell);
        }
    }
    return table;
}

// Coupled sweep of Cross_level(aspect*R, R) in the positive-mark intensity.
// All etas share one cloud per trial via the incremental coupling, so the
// per-trial indicator is non-decreasing in eta (checked).
inline SweepTable intensity_sweep(const ExperimentConfig& cfg, const std::vector<double>& etas,
                                  const std::vector<double>& Rs, long n, double aspect = 2.0,
                                  double level = 0.0) {
    for (double e : etas)
        if (e < -0.5 || e > 0.5)
            throw std::invalid_argument("intensity_sweep: eta must lie in [-1/2, 1/2]");
    if (!std::is_sorted(etas.begin(), etas.end()))
        throw std::invalid_argument("intensity_sweep: etas must be sorted ascending");
    const double eta_max = std::max(std::abs(etas.front()), std::abs(etas.back()));
    const double reach = pad_radius(cfg.kernel, cfg.mark, eta_max, cfg.pad_rel_tol);
    SweepTable table;
    table.axis1_name = "eta";
    table.axis2_name = "R";
    for (std::size_t row = 0; row < Rs.size(); ++row) {
        const double R = Rs[row];
        const Window win{0, 0, aspect * R, R};
        const GridSpec grid = GridSpec::covering(win, cfg.grid_spacing);
        const std::uint64_t base = static_cast<std::uint64_t>(row) * n;
        std::vector<std::vector<std::uint8_t>> hits(etas.size());
        for (auto& h : hits) h.assign(static_cast<std::size_t>(n), 0);
        parallel_trials(n, cfg.threads, [&](long t) {
            auto cloud = std::make_shared<const PointCloud>(sample_poisson_cloud(
                win.padded(reach), 1.0, cfg.mark, cfg.master_seed, base + t));
            const auto family =
                intensity_family(cloud, cfg.kernel, grid, win, reach, etas, cfg.master_seed);
            bool prev = false;
            for (std::size_t ei = 0; ei < etas.size(); ++ei) {
                const bool cur = detect(excursion(family[ei], level),
                                        CrossingSpec::cross(aspect * R, R, level));
                if (prev && !cur)
                    throw std::logic_error("intensity_sweep: coupled indicators not monotone");
                hits[ei][t] = cur ? 1 : 0;
                prev = cur;
            }
        });
        for (std::size_t ei = 0; ei < etas.size(); ++ei) {
            long succ = 0;
            for (auto h : hits[ei]) succ += h;
            SweepCell cell;
            cell.axis1 = etas[ei];
            cell.axis2 = R;
            cell.trial_base = base;
            cell.estimate = make_estimate(succ, n, cfg.master_seed, cfg.digest);
            table.cells.push_back(cell);
        }
    }
    return table;
}

// Arm_level(r, R) over R in Rs, one field per trial on the largest annulus;
// the events nest pathwise (indicator non-increasing in R, checked). The fit
// is the least-squares slope of log p against log(r/R), skipped when any
// estimate sits at 0 or 1.
inline SweepTable arm_decay(const ExperimentConfig& cfg, double r_inner,
                            const std::vector<double>& Rs, long n,
                            const VariantSpec& variant = {}, double level = 0.0) {
    for (double R : Rs)
        if (r_inner >= R) throw std::invalid_argument("arm_decay: need r < every R");
    const double R_max = *std::max_element(Rs.begin(), Rs.end());
    const double eta = variant.eta.value_or(0.0);
    const double reach = pad_radius(cfg.kernel, cfg.mark, eta, cfg.pad_rel_tol);
    const Window win{-R_max, -R_max, R_max, R_max};
    const GridSpec grid = GridSpec::covering(win, cfg.grid_spacing);
    std::vector<std::vector<std::uint8_t>> hits(Rs.size());
    for (auto& h : hits) h.assign(static_cast<std::size_t>(n), 0);
    std::vector<double> sorted_R(Rs.begin(), Rs.end());
    std::sort(sorted_R.begin(), sorted_R.end());
    parallel_trials(n, cfg.threads, [&](long t) {
        auto cloud = std::make_shared<const PointCloud>(sample_poisson_cloud(
            win.padded(reach), 1.0, cfg.mark, cfg.master_seed, t));
        const auto fs =
            synthesize(cloud, cfg.kernel, grid, win, reach, variant, {}, cfg.master_seed);
        const auto bg = excursion(fs, level);
        bool prev = true;
        for (double R : sorted_R) {
            const bool cur = detect(bg, CrossingSpec::arm(r_inner, R, level));
            if (cur && !prev)
                throw std::logic_error("arm_decay: arm events failed to nest");
            for (std::size_t k = 0; k < Rs.size(); ++k)
                if (Rs[k] == R) hits[k][t] = cur ? 1 : 0;
            prev = cur;
        }
    });
    SweepTable table;
    table.axis1_name = "r_over_R";
    table.axis2_name = "R";
    bool fit_ok = true;
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < Rs.size(); ++k) {
        long succ = 0;
        for (auto h : hits[k]) succ += h;
        SweepCell cell;
        cell.axis1 = r_inner / Rs[k];
        cell.axis2 = Rs[k];
        cell.trial_base = 0;
        cell.estimate = make_estimate(succ, n, cfg.master_seed, cfg.digest);
        table.cells.push_back(cell);
        if (succ == 0 || succ == n)
            fit_ok = false;
        else {
            lx.push_back(std::log(r_inner / Rs[k]));
            ly.push_back(std::log(cell.estimate.p_hat));
        }
    }
    if (fit_ok && lx.size() >= 2) {
        const double n_ = static_cast<double>(lx.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sx += lx[i];
            sy += ly[i];
            sxx += lx[i] * lx[i];
            sxy += lx[i] * ly[i];
        }
        table.fits["arm_exponent"] = (n_ * sxy - sx * sy) / (n_ * sxx - sx * sx);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Truncation study: distribution of ||f - f_r|| over a square window.

struct TruncationRow {
    double r = 0;
    double median = 0;
    double p95 = 0;
};

struct TruncationStudy {
    std::vector<TruncationRow> rows;
    std::optional<double> slope; // log median vs log r
    std::vector<double> h_values;
    std::vector<double> h_ratio; // sup|f^h - f| / h, constant across h
    double h_ratio_rel_spread = 0.0;
};

// sup|f - f_r| = sup of the field built from the residual kernel g^r on the
// same cloud. The residual varies on the scale r/4, so it is rasterized at a
// coarser spacing than the percolation grids.
inline TruncationStudy truncation_study(const ExperimentConfig& cfg,
                                        const std::vector<double>& rs,
                                        const std::vector<double>& h_values, long n,
                                        double window_radius = 10.0,
                                        double coarse_spacing = 0.5) {
    if (!std::is_sorted(rs.begin(), rs.end()))
        throw std::invalid_argument("truncation_study: rs must be sorted ascending");
    const Window win{-window_radius, -window_radius, window_radius, window_radius};
    const GridSpec grid = GridSpec::covering(win, coarse_spacing);

    // per-r padding certified against the residual's own amplitude
    std::vector<Kernel> residuals;
    std::vector<double> reaches;
    double reach_max = 0.0;
    for (double r : rs) {
        residuals.push_back(cfg.kernel.truncated(r, TruncMode::residual));
        const double rr = pad_radius(residuals.back(), cfg.mark, 0.0, cfg.pad_rel_tol);
        reaches.push_back(rr);
        reach_max = std::max(reach_max, rr);
    }

    std::vector<std::vector<double>> sups(rs.size());
    for (auto& s : sups) s.assign(static_cast<std::size_t>(n), 0.0);
    parallel_trials(n, cfg.threads, [&](long t) {
        auto cloud = std::make_shared<const PointCloud>(sample_poisson_cloud(
            win.padded(reach_max), 1.0, cfg.mark, cfg.master_seed, t));
        for (std::size_t k = 0; k < rs.size(); ++k) {
            const auto resid = synthesize(cloud, residuals[k], grid, win, reach_max, {},
                                          {}, cfg.master_seed);
            double sup = 0.0;
            for (double v : resid.values) sup = std::max(sup, std::abs(v));
            sups[k][t] = sup;
        }
    });

    TruncationStudy out;
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < rs.size(); ++k) {
        std::vector<double> s = sups[k];
        std::sort(s.begin(), s.end());
        TruncationRow row;
        row.r = rs[k];
        row.median = s[s.size() / 2];
        row.p95 = s[static_cast<std::size_t>(0.95 * (s.size() - 1))];
        out.rows.push_back(row);
        if (row.median > 0) {
            lx.push_back(std::log(rs[k]));
            ly.push_back(std::log(row.median));
        }
    }
    if (lx.size() >= 2) {
        const double n_ = static_cast<double>(lx.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sx += lx[i];
            sy += ly[i];
            sxx += lx[i] * lx[i];
            sxy += lx[i] * ly[i];
        }
        out.slope = (n_ * sxy - sx * sy) / (n_ * sxx - sx * sx);
    }

    if (!h_values.empty()) {
        // exact identity: sup|f^h - f| = h sup sum_i g(x - p_i) on a shared cloud
        const double reach = pad_radius(cfg.kernel, cfg.mark, 0.0, cfg.pad_rel_tol);
        auto cloud = std::make_shared<const PointCloud>(sample_poisson_cloud(
            win.padded(reach), 1.0, cfg.mark, cfg.master_seed, 0));
        const auto plain =
            synthesize(cloud, cfg.kernel, grid, win, reach, {}, {}, cfg.master_seed);
        for (double h : h_values) {
            VariantSpec v;
            v.mark_shift = h;
            const auto shifted =
                synthesize(cloud, cfg.kernel, grid, win, reach, v, {}, cfg.master_seed);
            out.h_values.push_back(h);
            out.h_ratio.push_back(sup_distance(plain, shifted, win) / h);
        }
        const auto [lo, hi] = std::minmax_element(out.h_ratio.begin(), out.h_ratio.end());
        out.h_ratio_rel_spread = (*hi - *lo) / std::max(1e-300, *hi);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quasi-independence: covariance of two square crossings at given
// separations on a shared field sample.

struct QuasiIndepRow {
    double separation = 0;
    double p1 = 0, p2 = 0, p12 = 0;
    double covariance = 0;
    double ci = 0;          // 1.96 * plug-in standard error of the covariance
    bool pa_holds = false;  // positive-association soft check: cov >= -3 se
    long n = 0;
};

inline std::vector<QuasiIndepRow> quasi_independence(const ExperimentConfig& cfg,
                                                     const std::vector<double>& separations,
                                                     double R, long n, double level = 0.0) {
    const double reach = pad_radius(cfg.kernel, cfg.mark, 0.0, cfg.pad_rel_tol);
    std::vector<QuasiIndepRow> rows;
    for (std::size_t row = 0; row < separations.size(); ++row) {
        const double sep = separations[row];
        if (sep < 0) throw std::invalid_argument("quasi_independence: separation must be >= 0");
        const bool identical = sep == 0.0;
        if (!identical && sep < 2 * reach)
            throw std::invalid_argument(
                "quasi_independence: boxes closer than twice the padding radius overlap "
                "through shared points; increase the separation");
        const Window win = identical ? Window{0, 0, R, R} : Window{0, 0, 2 * R + sep, R};
        const GridSpec grid = GridSpec::covering(win, cfg.grid_spacing);
        const std::uint64_t base = static_cast<std::uint64_t>(row) * n;
        std::vector<std::uint8_t> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
        parallel_trials(n, cfg.threads, [&](long t) {
            auto cloud = std::make_shared<const PointCloud>(sample_poisson_cloud(
                win.padded(reach), 1.0, cfg.mark, cfg.master_seed, base + t));
            const auto fs =
                synthesize(cloud, cfg.kernel, grid, win, reach, {}, {}, cfg.master_seed);
            const auto bg = excursion(fs, level);
            CrossingSpec left = CrossingSpec::cross(R, R, level);
            const bool e1 = detect(bg, left);
            bool e2 = e1;
            if (!identical) {
                CrossingSpec right = CrossingSpec::cross(R, R, level);
                right.x0 = R + sep;
                e2 = detect(bg, right);
            }
            x[t] = e1 ? 1 : 0;
            y[t] = e2 ? 1 : 0;
        });
        QuasiIndepRow out;
        out.separation = sep;
        out.n = n;
        long sx = 0, sy = 0, sxy = 0;
        for (long t = 0; t < n; ++t) {
            sx += x[t];
            sy += y[t];
            sxy += x[t] & y[t];
        }
        out.p1 = static_cast<double>(sx) / n;
        out.p2 = static_cast<double>(sy) / n;
        out.p12 = static_cast<double>(sxy) / n;
        out.covariance = out.p12 - out.p1 * out.p2;
        double v = 0;
        for (long t = 0; t < n; ++t) {
            const double c = (x[t] - out.p1) * (y[t] - out.p2) - out.covariance;
            v += c * c;
        }
        v /= static_cast<double>(n - 1);
        out.ci = 1.96 * std::sqrt(v / n);
        out.pa_holds = out.covariance >= -3.0 * std::sqrt(v / n);
        rows.push_back(out);
    }
    return rows;
}

} // namespace snfield
