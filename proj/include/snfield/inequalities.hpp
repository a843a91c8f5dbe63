#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "snfield/experiments.hpp"
#include "snfield/field.hpp"
#include "snfield/marks.hpp"
#include "snfield/percolation.hpp"
#include "snfield/rng.hpp"

namespace snfield {

// ---------------------------------------------------------------------------
// Exponent schedule.

struct ScheduleParams {
    double gamma = 0, c_arm = 0, xi = 0, zeta = 0;
    double r_scale = 0, rbar_scale = 0, h_scale = 0; // r = R^gamma etc. at the given R
};

inline ScheduleParams scale_schedule(double gamma, double c_arm, double xi, double R,
                                     std::optional<double> alpha = std::nullopt) {
    if (!(gamma > 0 && gamma < 1))
        throw std::invalid_argument("scale_schedule: gamma must lie in (0,1)");
    if (c_arm <= 0) throw std::invalid_argument("scale_schedule: c_arm must be > 0");
    if (alpha && gamma >= 2.0 / (*alpha - 2.0))
        throw std::invalid_argument("scale_schedule: intensity variant needs gamma < 2/(alpha-2)");
    ScheduleParams p;
    p.gamma = gamma;
    p.c_arm = c_arm;
    p.xi = xi;
    p.zeta = (gamma * c_arm + 1.0) / (c_arm + 1.0);
    if (!(xi > 0 && xi < 1.0 - p.zeta))
        throw std::invalid_argument("scale_schedule: xi must lie in (0, 1 - zeta)");
    if (std::abs((1.0 - p.zeta) - (p.zeta - gamma) * c_arm) > 1e-12)
        throw std::logic_error("scale_schedule: zeta identity violated");
    p.r_scale = std::pow(R, gamma);
    p.rbar_scale = std::pow(R, p.zeta);
    p.h_scale = std::pow(R, -xi);
    return p;
}

// ---------------------------------------------------------------------------
// Desk-scale discrete instances.
//
// Sites are the points of eps Z^2 within distance r/2 of [0, 2R] x [0, R];
// the crossing event Cross_level(2R, R) of the truncated discretised field is
// a function of the site variables Z_i. Two versions: Z_i = Ber (Y_i + h)
// (level) and Z_i = Ber (+-|Y_i|) split on U_i vs 1/2 + eta (intensity).

enum class InstanceVersion { level, intensity };

struct DiscreteInstance {
    double R = 4;
    double eps = 1.0;
    double trunc_r = 3.0;
    Kernel kernel_r;
    MarkDistribution mark;
    double level = 0.0;
    InstanceVersion version = InstanceVersion::level;
    double h = 0.0;   // level version
    double eta = 0.0; // intensity version
    double grid_spacing = 0.25;
    std::vector<double> site_x, site_y;
    Window rect;
    GridSpec grid;

    std::size_t site_count() const { return site_x.size(); }

    static DiscreteInstance build(double R, double eps, double trunc_r, const Kernel& base,
                                  const MarkDistribution& mark, double level,
                                  InstanceVersion version, double h_or_eta,
                                  double grid_spacing = 0.25) {
        DiscreteInstance inst;
        inst.R = R;
        inst.eps = eps;
        inst.trunc_r = trunc_r;
        inst.kernel_r = base.truncated(trunc_r);
        inst.mark = mark;
        inst.level = level;
        inst.version = version;
        if (version == InstanceVersion::level)
            inst.h = h_or_eta;
        else
            inst.eta = h_or_eta;
        inst.grid_spacing = grid_spacing;
        inst.rect = {0, 0, 2 * R, R};
        inst.grid = GridSpec::covering(inst.rect, grid_spacing);
        if (grid_spacing > trunc_r / 2)
            throw std::invalid_argument("instance grid spacing must not exceed r/2");
        const double half = trunc_r / 2.0;
        const long ix0 = static_cast<long>(std::ceil((-half) / eps));
        const long ix1 = static_cast<long>(std::floor((2 * R + half) / eps));
        const long iy0 = static_cast<long>(std::ceil((-half) / eps));
        const long iy1 = static_cast<long>(std::floor((R + half) / eps));
        auto rect_dist = [&](double x, double y) {
            const double dx = std::max({0.0, -x, x - 2 * R});
            const double dy = std::max({0.0, -y, y - R});
            return std::hypot(dx, dy);
        };
        for (long iy = iy0; iy <= iy1; ++iy)
            for (long ix = ix0; ix <= ix1; ++ix) {
                const double x = ix * eps, y = iy * eps;
                if (rect_dist(x, y) <= half) {
                    inst.site_x.push_back(x);
                    inst.site_y.push_back(y);
                }
            }
        if (inst.site_count() > 200)
            throw std::invalid_argument("instance exceeds the 200-site desk-scale guard");
        return inst;
    }
};

struct Realization {
    std::vector<double> z;
    std::vector<std::uint8_t> ber;
    std::vector<double> y, u;
};

inline double compose_z(const DiscreteInstance& inst, bool ber, double y, double u) {
    if (!ber) return 0.0;
    if (inst.version == InstanceVersion::level) return y + inst.h;
    return u <= 0.5 + inst.eta ? std::abs(y) : -std::abs(y);
}

inline Realization realize(const DiscreteInstance& inst, std::uint64_t seed,
                           std::uint64_t trial) {
    CounterRng ber_rng(seed, trial, RngChannel::cloud);
    CounterRng mark_rng(seed, trial, RngChannel::marks);
    CounterRng aux_rng(seed, trial, RngChannel::aux);
    const std::size_t n = inst.site_count();
    Realization r;
    r.z.resize(n);
    r.ber.resize(n);
    r.y.resize(n);
    r.u.resize(n);
    const double p = inst.eps * inst.eps;
    for (std::size_t i = 0; i < n; ++i) {
        r.ber[i] = p >= 1.0 ? 1 : (ber_rng.uniform01() < p ? 1 : 0);
        r.y[i] = inst.mark.sample(mark_rng);
        r.u[i] = aux_rng.uniform01();
        r.z[i] = compose_z(inst, r.ber[i], r.y[i], r.u[i]);
    }
    return r;
}

// Precomputed per-site stamps and site/node incidence.
class InstanceEvaluator {
public:
    explicit InstanceEvaluator(const DiscreteInstance& inst) : inst_(&inst) {
        const GridSpec& g = inst.grid;
        const std::size_t cells = g.cells();
        const std::size_t ns = inst.site_count();
        stamps_.assign(ns, {});
        node_sites_half_.assign(cells, {});
        node_sites_r_.assign(cells, {});
        const double half = inst.trunc_r / 2.0;
        for (std::size_t i = 0; i < ns; ++i) {
            stamps_[i].assign(cells, 0.0);
            for (int iy = 0; iy < g.height; ++iy)
                for (int ix = 0; ix < g.width; ++ix) {
                    const double v =
                        inst.kernel_r.value(g.x(ix) - inst.site_x[i], g.y(iy) - inst.site_y[i]);
                    stamps_[i][std::size_t(iy) * g.width + ix] = v;
                }
        }
        for (int iy = 0; iy < g.height; ++iy)
            for (int ix = 0; ix < g.width; ++ix) {
                const std::size_t c = std::size_t(iy) * g.width + ix;
                for (std::size_t i = 0; i < ns; ++i) {
                    const double d = std::hypot(g.x(ix) - inst.site_x[i], g.y(iy) - inst.site_y[i]);
                    if (d < half) node_sites_half_[c].push_back(static_cast<int>(i));
                    if (d <= inst.trunc_r) node_sites_r_[c].push_back(static_cast<int>(i));
                }
            }
    }

    std::vector<double> field_from(const std::vector<double>& z) const {
        std::vector<double> values(inst_->grid.cells(), 0.0);
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (z[i] == 0.0) continue;
            const auto& s = stamps_[i];
            for (std::size_t c = 0; c < values.size(); ++c) values[c] += z[i] * s[c];
        }
        return values;
    }

    void apply_delta(std::vector<double>& values, std::size_t site, double dz) const {
        if (dz == 0.0) return;
        const auto& s = stamps_[site];
        for (std::size_t c = 0; c < values.size(); ++c) values[c] += dz * s[c];
    }

    bool cross(const std::vector<double>& values) const {
        const GridSpec& g = inst_->grid;
        BinaryGrid bg;
        bg.width = g.width;
        bg.height = g.height;
        bg.spacing = g.spacing;
        bg.origin_x = g.origin_x;
        bg.origin_y = g.origin_y;
        bg.bits.resize(values.size());
        for (std::size_t c = 0; c < values.size(); ++c)
            bg.bits[c] = values[c] + inst_->level >= 0.0 ? 1 : 0;
        return detect(bg, CrossingSpec::cross(2 * inst_->R, inst_->R, inst_->level));
    }

    const std::vector<int>& sites_affecting(std::size_t node) const {
        return node_sites_half_[node];
    }
    const std::vector<int>& sites_within_r(std::size_t node) const {
        return node_sites_r_[node];
    }

private:
    const DiscreteInstance* inst_;
    std::vector<std::vector<double>> stamps_;
    std::vector<std::vector<int>> node_sites_half_; // sites with g_r support over the node
    std::vector<std::vector<int>> node_sites_r_;    // sites within distance r of the node
};

// ---------------------------------------------------------------------------
// Resampling influences: I_i = 2 P(original in Cross, resampled out of Cross).

struct InfluenceReport {
    std::vector<double> influence;
    double p_hat = 0;
    double sum_influence = 0;
    double sum_influence_se = 0; // standard error of the sum estimator
    long trials = 0;
};

inline InfluenceReport influences(const DiscreteInstance& inst, long n, std::uint64_t seed,
                                  const InstanceEvaluator& eval, int threads = 0) {
    const std::size_t ns = inst.site_count();
    InfluenceReport rep;
    rep.influence.assign(ns, 0.0);
    rep.trials = n;
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(n), 0);
    std::vector<std::uint8_t> flip(static_cast<std::size_t>(n) * ns, 0);
    parallel_trials(n, threads, [&](long t) {
        const Realization r = realize(inst, seed, static_cast<std::uint64_t>(t));
        std::vector<double> values = eval.field_from(r.z);
        const bool ind = eval.cross(values);
        hit[t] = ind ? 1 : 0;
        CounterRng res(seed, static_cast<std::uint64_t>(t), RngChannel::resample);
        for (std::size_t i = 0; i < ns; ++i) {
            res.seek(static_cast<std::uint64_t>(i) * 8);
            const double p = inst.eps * inst.eps;
            const bool ber = p >= 1.0 ? true : res.uniform01() < p;
            const double y = inst.mark.sample(res);
            const double u = res.uniform01();
            const double z_new = compose_z(inst, ber, y, u);
            if (z_new != r.z[i]) {
                eval.apply_delta(values, i, z_new - r.z[i]);
                const bool ind2 = eval.cross(values);
                eval.apply_delta(values, i, r.z[i] - z_new);
                if (ind && !ind2) flip[std::size_t(t) * ns + i] = 1;
            }
        }
    });
    long hits = 0;
    double s1 = 0, s2 = 0;
    std::vector<long> flips(ns, 0);
    for (long t = 0; t < n; ++t) {
        hits += hit[t];
        long trial_flips = 0;
        for (std::size_t i = 0; i < ns; ++i)
            if (flip[std::size_t(t) * ns + i]) {
                ++flips[i];
                ++trial_flips;
            }
        s1 += static_cast<double>(trial_flips);
        s2 += static_cast<double>(trial_flips) * trial_flips;
    }
    for (std::size_t i = 0; i < ns; ++i)
        rep.influence[i] = 2.0 * static_cast<double>(flips[i]) / static_cast<double>(n);
    rep.p_hat = static_cast<double>(hits) / static_cast<double>(n);
    for (double v : rep.influence) rep.sum_influence += v;
    const double mean = s1 / n;
    const double var = std::max(0.0, s2 / n - mean * mean);
    rep.sum_influence_se = 2.0 * std::sqrt(var / n);
    return rep;
}

// ---------------------------------------------------------------------------
// Revealment algorithm (line exploration). Implements the randomized
// algorithm that determines Cross_level(2R, R): draw a uniform horizontal
// line, reveal all sites within distance r of it, then iteratively reveal
// sites within distance r of any discovered component of {f + level < 0}
// meeting the line; output 0 exactly when such a component joins the top and
// bottom sides. The output is asserted to equal the direct detector on every
// trial. (Strict negativity matches the tie convention of the detector.)

struct RevealmentReport {
    std::vector<double> revealment;
    long trials = 0;
};

inline RevealmentReport revealments(const DiscreteInstance& inst, long n, std::uint64_t seed,
                                    const InstanceEvaluator& eval, int threads = 0) {
    const GridSpec& g = inst.grid;
    const std::size_t ns = inst.site_count();
    const std::size_t cells = g.cells();
    RevealmentReport rep;
    rep.revealment.assign(ns, 0.0);
    rep.trials = n;
    std::vector<std::uint8_t> revealed_all(static_cast<std::size_t>(n) * ns, 0);

    parallel_trials(n, threads, [&](long t) {
        const Realization r = realize(inst, seed, static_cast<std::uint64_t>(t));
        const std::vector<double> values = eval.field_from(r.z);
        const bool direct = eval.cross(values);

        CounterRng line_rng(seed, static_cast<std::uint64_t>(t), RngChannel::line);
        const double U = line_rng.uniform(0.0, inst.R);

        std::vector<std::uint8_t> revealed(ns, 0);
        auto reveal_site = [&](int i) {
            if (!revealed[i]) revealed[i] = 1;
        };
        for (std::size_t i = 0; i < ns; ++i)
            if (std::abs(inst.site_y[i] - U) <= inst.trunc_r) reveal_site(static_cast<int>(i));

        // line rows: grid rows bracketing y = U
        const long row_lo = std::max(0L, static_cast<long>(std::floor(U / g.spacing)));
        const long row_hi = std::min<long>(g.height - 1, row_lo + 1);

        std::vector<std::uint8_t> marked(cells, 0); // discovered negative component nodes
        bool negative_crossing = false;
        for (;;) {
            // determined nodes: every site whose kernel reaches the node is revealed
            std::vector<std::uint8_t> neg(cells, 0);
            for (std::size_t c = 0; c < cells; ++c) {
                if (values[c] + inst.level >= 0.0) continue;
                bool det = true;
                for (int i : eval.sites_affecting(c))
                    if (!revealed[i]) {
                        det = false;
                        break;
                    }
                if (det) neg[c] = 1;
            }
            // flood 4-connected negative components seeded on the line rows,
            // one component at a time (top/bottom contact is per component)
            std::vector<std::uint8_t> next_marked(cells, 0);
            std::vector<std::size_t> stack;
            auto push = [&](std::size_t c) {
                if (neg[c] && !next_marked[c]) {
                    next_marked[c] = 1;
                    stack.push_back(c);
                }
            };
            for (long row : {row_lo, row_hi}) {
                for (int ix = 0; ix < g.width && !negative_crossing; ++ix) {
                    const std::size_t seed_c = std::size_t(row) * g.width + ix;
                    if (!neg[seed_c] || next_marked[seed_c]) continue;
                    bool touch_top = false, touch_bottom = false;
                    push(seed_c);
                    while (!stack.empty()) {
                        const std::size_t c = stack.back();
                        stack.pop_back();
                        const long cx = static_cast<long>(c % g.width);
                        const long cy = static_cast<long>(c / g.width);
                        if (cy == 0) touch_bottom = true;
                        if (cy == g.height - 1) touch_top = true;
                        if (cx > 0) push(c - 1);
                        if (cx < g.width - 1) push(c + 1);
                        if (cy > 0) push(c - g.width);
                        if (cy < g.height - 1) push(c + g.width);
                    }
                    if (touch_top && touch_bottom) negative_crossing = true;
                }
                if (negative_crossing) break;
            }
            if (negative_crossing) break;
            // reveal sites within r of newly discovered component nodes
            bool grew = false;
            for (std::size_t c = 0; c < cells; ++c) {
                if (!next_marked[c] || marked[c]) continue;
                marked[c] = 1;
                for (int i : eval.sites_within_r(c))
                    if (!revealed[i]) {
                        revealed[i] = 1;
                        grew = true;
                    }
            }
            if (!grew) break;
        }

        const bool algo_cross = !negative_crossing;
        if (algo_cross != direct)
            throw std::logic_error("revealment algorithm disagrees with direct detection");
        for (std::size_t i = 0; i < ns; ++i)
            revealed_all[std::size_t(t) * ns + i] = revealed[i];
    });
    std::vector<long> reveal_count(ns, 0);
    for (long t = 0; t < n; ++t)
        for (std::size_t i = 0; i < ns; ++i) reveal_count[i] += revealed_all[std::size_t(t) * ns + i];
    for (std::size_t i = 0; i < ns; ++i)
        rep.revealment[i] = static_cast<double>(reveal_count[i]) / static_cast<double>(n);
    return rep;
}

// ---------------------------------------------------------------------------
// OSSS inequality check: Var[1_A] <= 1/2 sum_i delta_i I_i.

struct OsssReport {
    double var_est = 0;
    double rhs = 0;
    double ci = 0;
    bool holds = false;
    InfluenceReport infl;
    RevealmentReport rev;
};

inline OsssReport osss_check(const DiscreteInstance& inst, long n, std::uint64_t seed,
                             int threads = 0) {
    const InstanceEvaluator eval(inst);
    OsssReport rep;
    rep.infl = influences(inst, n, seed, eval, threads);
    rep.rev = revealments(inst, n, seed + 1, eval, threads);
    const double p = rep.infl.p_hat;
    rep.var_est = p * (1.0 - p);
    rep.rhs = 0.0;
    for (std::size_t i = 0; i < inst.site_count(); ++i)
        rep.rhs += 0.5 * rep.rev.revealment[i] * rep.infl.influence[i];
    const double se_p = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
    const double se_var = std::abs(1 - 2 * p) * se_p + 1.0 / (2.0 * n);
    // covariance-free bound for the rhs error: delta_i <= 1
    const double se_rhs = 0.5 * rep.infl.sum_influence_se;
    rep.ci = se_var + se_rhs;
    rep.holds = rep.var_est <= rep.rhs + 3.0 * rep.ci;
    return rep;
}

// ---------------------------------------------------------------------------
// Russo-type inequality check via forward differences with common random
// numbers. Level version: dP/dh >= (1/(4 c_Mills)) sum I_i, valid for
// h <= h0 where P(Y <= h0) <= 2 P(Y >= h0). Intensity version: dP/deta >=
// (1/2) sum I_i.

inline double russo_h0(const MarkDistribution& mark) {
    if (!std::isfinite(mills_ratio(mark)))
        throw std::invalid_argument("russo_h0: mark distribution must have a finite Mills ratio");
    double lo = 0.0, hi = 1.0;
    auto slack = [&](double h) { return 2.0 * mark.survival(h) - mark.cdf(h); };
    while (slack(hi) > 0) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (slack(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct RussoReport {
    double h0 = 0;
    double step = 0;
    double derivative = 0;     // forward difference at the finer step
    double derivative_se = 0;
    double derivative_coarse = 0; // at the coarser step (Richardson sanity)
    double rhs = 0;
    double rhs_se = 0;
    bool holds = false;
    double p_at_base = 0;
    // OSSS denominator diagnostic 2 rbar / R + P(Arm); 1 when the annulus
    // range (2r, R/2) is empty at desk scale
    double arm_denominator = 1.0;
    bool arm_denominator_feasible = false;
};

inline RussoReport russo_check(const DiscreteInstance& inst,
                               const std::vector<double>& steps, long n,
                               std::uint64_t seed, int threads = 0) {
    const InstanceEvaluator eval(inst);
    RussoReport rep;
    const bool level_version = inst.version == InstanceVersion::level;
    if (level_version) {
        rep.h0 = russo_h0(inst.mark);
        if (inst.h > rep.h0)
            throw std::invalid_argument("russo_check: base h exceeds h0");
        for (double s : steps)
            if (inst.h + s > rep.h0)
                throw std::invalid_argument("russo_check: h + step exceeds h0");
    }
    if (steps.empty()) throw std::invalid_argument("russo_check: needs at least one step");
    if (!level_version)
        for (double s : steps)
            if (inst.eta + s > 0.5)
                throw std::invalid_argument("russo_check: eta + step exceeds 1/2");
    std::vector<double> sorted_steps = steps;
    std::sort(sorted_steps.begin(), sorted_steps.end());

    // coupled indicators at base and base + step, common random numbers
    const std::size_t nsteps = sorted_steps.size();
    std::vector<std::uint8_t> base_hit(static_cast<std::size_t>(n), 0);
    std::vector<std::uint8_t> flip_flag(static_cast<std::size_t>(n) * nsteps, 0);
    parallel_trials(n, threads, [&](long t) {
        const Realization r = realize(inst, seed, static_cast<std::uint64_t>(t));
        std::vector<double> values = eval.field_from(r.z);
        const bool base = eval.cross(values);
        base_hit[t] = base ? 1 : 0;
        for (std::size_t k = 0; k < nsteps; ++k) {
            const double s = sorted_steps[k];
            DiscreteInstance shifted = inst;
            if (level_version)
                shifted.h = inst.h + s;
            else
                shifted.eta = inst.eta + s;
            std::vector<double> shifted_values = values;
            for (std::size_t i = 0; i < inst.site_count(); ++i) {
                const double z_new = compose_z(shifted, r.ber[i], r.y[i], r.u[i]);
                if (z_new != r.z[i]) eval.apply_delta(shifted_values, i, z_new - r.z[i]);
            }
            const bool up = eval.cross(shifted_values);
            if (base && !up)
                throw std::logic_error("russo_check: coupled indicators not monotone");
            if (up && !base) flip_flag[std::size_t(t) * nsteps + k] = 1;
        }
    });
    std::vector<long> flips(nsteps, 0);
    long base_hits = 0;
    for (long t = 0; t < n; ++t) {
        base_hits += base_hit[t];
        for (std::size_t k = 0; k < nsteps; ++k)
            flips[k] += flip_flag[std::size_t(t) * nsteps + k];
    }
    rep.p_at_base = static_cast<double>(base_hits) / n;
    const double fine = sorted_steps.front();
    rep.step = fine;
    {
        const double mean = static_cast<double>(flips[0]) / n;
        const double var = std::max(0.0, mean - mean * mean);
        rep.derivative = mean / fine;
        rep.derivative_se = std::sqrt(var / n) / fine;
    }
    if (sorted_steps.size() > 1) {
        const double coarse = sorted_steps.back();
        rep.derivative_coarse = static_cast<double>(flips[sorted_steps.size() - 1]) / n / coarse;
    } else {
        rep.derivative_coarse = rep.derivative;
    }

    const InfluenceReport infl = influences(inst, n, seed + 17, eval, threads);
    const double constant =
        level_version ? 1.0 / (4.0 * mills_ratio(inst.mark)) : 0.5;
    rep.rhs = constant * infl.sum_influence;
    rep.rhs_se = constant * infl.sum_influence_se;
    rep.holds = rep.derivative >= rep.rhs - 3.0 * (rep.derivative_se + rep.rhs_se);

    // differential-inequality denominator, reported when the range is nonempty
    const double lo = 2 * inst.trunc_r, hi = inst.R / 2.0;
    if (lo < hi) {
        rep.arm_denominator_feasible = true;
        double best = kInf;
        for (double rbar : {lo + 0.25 * (hi - lo), lo + 0.5 * (hi - lo), lo + 0.75 * (hi - lo)})
            best = std::min(best, 2.0 * rbar / inst.R); // arm term omitted at desk scale
        rep.arm_denominator = best;
    }
    return rep;
}

} // namespace snfield
