#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "snfield/rng.hpp"

namespace snfield {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class MarkKind { gaussian, uniform, laplace, rademacher };

inline std::string to_string(MarkKind k) {
    switch (k) {
        case MarkKind::gaussian: return "gaussian";
        case MarkKind::uniform: return "uniform";
        case MarkKind::laplace: return "laplace";
        case MarkKind::rademacher: return "rademacher";
    }
    return "?";
}

// Symmetric mark law. `param` is sigma (gaussian), the half-width a
// (uniform on [-a,a]), the scale b (laplace), and unused for rademacher.
struct MarkDistribution {
    MarkKind kind = MarkKind::gaussian;
    double param = 1.0;

    static MarkDistribution gaussian(double sigma = 1.0) { return {MarkKind::gaussian, sigma}; }
    static MarkDistribution uniform(double a = 1.0) { return {MarkKind::uniform, a}; }
    static MarkDistribution laplace(double b = 1.0) { return {MarkKind::laplace, b}; }
    static MarkDistribution rademacher() { return {MarkKind::rademacher, 1.0}; }

    bool has_density() const { return kind != MarkKind::rademacher; }

    bool log_concave() const { return kind != MarkKind::rademacher; }

    // Stretched-exponential tail exponent (beta of the tail condition);
    // compactly supported laws count as beta = infinity.
    double beta_tail() const {
        switch (kind) {
            case MarkKind::gaussian: return 2.0;
            case MarkKind::laplace: return 1.0;
            default: return kInf;
        }
    }

    // Smallest M with |Y| <= M a.s. (infinity when unbounded).
    double support_bound() const {
        switch (kind) {
            case MarkKind::uniform: return param;
            case MarkKind::rademacher: return 1.0;
            default: return kInf;
        }
    }

    std::optional<double> pdf(double x) const {
        switch (kind) {
            case MarkKind::gaussian: {
                const double z = x / param;
                return std::exp(-0.5 * z * z) / (param * 2.506628274631000502415765);
            }
            case MarkKind::uniform:
                return std::abs(x) <= param ? 0.5 / param : 0.0;
            case MarkKind::laplace:
                return 0.5 / param * std::exp(-std::abs(x) / param);
            case MarkKind::rademacher:
                return std::nullopt;
        }
        return std::nullopt;
    }

    double survival(double x) const {
        switch (kind) {
            case MarkKind::gaussian:
                return 0.5 * std::erfc(x / (param * 1.414213562373095048801689));
            case MarkKind::uniform:
                if (x <= -param) return 1.0;
                if (x >= param) return 0.0;
                return (param - x) / (2.0 * param);
            case MarkKind::laplace:
                return x >= 0 ? 0.5 * std::exp(-x / param) : 1.0 - 0.5 * std::exp(x / param);
            case MarkKind::rademacher:
                if (x <= -1.0) return 1.0;
                if (x <= 1.0) return 0.5;
                return 0.0;
        }
        return 0.0;
    }

    double cdf(double x) const { return survival(-x); } // symmetry

    // Monotone bisection; adequate for grid construction and scan bounds.
    double quantile(double p) const {
        if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("quantile: p must be in (0,1)");
        if (kind == MarkKind::rademacher) return p <= 0.5 ? -1.0 : 1.0;
        double lo = -1.0, hi = 1.0;
        while (cdf(lo) > p) lo *= 2.0;
        while (cdf(hi) < p) hi *= 2.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (cdf(mid) < p ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    double mean_abs() const {
        switch (kind) {
            case MarkKind::gaussian: return param * 0.797884560802865355879892; // sqrt(2/pi)
            case MarkKind::uniform: return 0.5 * param;
            case MarkKind::laplace: return param;
            case MarkKind::rademacher: return 1.0;
        }
        return 0.0;
    }

    double second_moment() const {
        switch (kind) {
            case MarkKind::gaussian: return param * param;
            case MarkKind::uniform: return param * param / 3.0;
            case MarkKind::laplace: return 2.0 * param * param;
            case MarkKind::rademacher: return 1.0;
        }
        return 0.0;
    }

    double sample(CounterRng& rng) const {
        switch (kind) {
            case MarkKind::gaussian:
                return param * rng.gaussian();
            case MarkKind::uniform:
                return param * (2.0 * rng.uniform01() - 1.0);
            case MarkKind::laplace: {
                const double u = rng.uniform01() - 0.5;
                const double a = 1.0 - 2.0 * std::abs(u);
                return -param * std::copysign(1.0, u) * std::log(a > 0 ? a : 0x1.0p-70);
            }
            case MarkKind::rademacher:
                return rng.next_u32() & 1u ? 1.0 : -1.0;
        }
        return 0.0;
    }
};

inline std::vector<double> sample_marks(const MarkDistribution& dist, long n,
                                        std::uint64_t seed) {
    CounterRng rng(seed, 0, RngChannel::marks);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (auto& v : out) v = dist.sample(rng);
    return out;
}

// esssup over x >= 0 of survival/density, with the conventions 1/0 = inf and
// 0/0 = 0. For these families the ratio is monotone or constant, so the
// supremum has a closed form; a search-based cross-check lives in the tests.
inline double mills_ratio(const MarkDistribution& dist) {
    switch (dist.kind) {
        case MarkKind::gaussian:
            // ratio maximal at x = 0: (1/2) / (1/(sigma sqrt(2 pi)))
            return dist.param * 1.2533141373155002512078826; // sqrt(pi/2)
        case MarkKind::uniform:
            return dist.param; // ratio = a - x on [0, a], max at 0
        case MarkKind::laplace:
            return dist.param; // ratio constant in x
        case MarkKind::rademacher:
            return kInf; // no density
    }
    return kInf;
}

struct TailBoundRow {
    double x;
    double survival;
    double bound;
    bool holds;
};

// Checks survival(x) <= cdf(0) * exp(-x / mills) pointwise.
inline std::vector<TailBoundRow> tail_bound_check(const MarkDistribution& dist,
                                                  const std::vector<double>& xs) {
    const double mills = mills_ratio(dist);
    if (!std::isfinite(mills))
        throw std::invalid_argument("tail_bound_check: Mills ratio is infinite for " +
                                    to_string(dist.kind));
    std::vector<TailBoundRow> rows;
    rows.reserve(xs.size());
    for (double x : xs) {
        if (x < 0) throw std::invalid_argument("tail_bound_check: x must be >= 0");
        TailBoundRow row;
        row.x = x;
        row.survival = dist.survival(x);
        row.bound = dist.cdf(0.0) * std::exp(-x / mills);
        row.holds = row.survival <= row.bound + 1e-12;
        rows.push_back(row);
    }
    return rows;
}

} // namespace snfield
