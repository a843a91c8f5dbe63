#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "snfield/kernel.hpp"
#include "snfield/marks.hpp"
#include "snfield/rng.hpp"

namespace snfield {

struct Window {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    Window padded(double pad) const { return {x0 - pad, y0 - pad, x1 + pad, y1 + pad}; }
};

// Raster of node values: node (ix, iy) sits at origin + spacing * (ix, iy).
struct GridSpec {
    double origin_x = 0, origin_y = 0;
    double spacing = 0.25;
    int width = 0, height = 0;

    double x(int ix) const { return origin_x + spacing * ix; }
    double y(int iy) const { return origin_y + spacing * iy; }
    std::size_t cells() const { return std::size_t(width) * std::size_t(height); }

    // Nodes covering [w.x0, w.x1] x [w.y0, w.y1] inclusive. The window must
    // be (numerically) spacing-aligned.
    static GridSpec covering(const Window& w, double spacing) {
        GridSpec g;
        g.spacing = spacing;
        g.origin_x = w.x0;
        g.origin_y = w.y0;
        const double nx = w.width() / spacing;
        const double ny = w.height() / spacing;
        g.width = static_cast<int>(std::lround(nx)) + 1;
        g.height = static_cast<int>(std::lround(ny)) + 1;
        if (std::abs(nx - std::lround(nx)) > 1e-9 || std::abs(ny - std::lround(ny)) > 1e-9)
            throw std::invalid_argument("GridSpec: window is not aligned to the grid spacing");
        return g;
    }
};

enum class CloudSource { poisson, lattice };

// Points with marks and the auxiliary uniforms that drive the intensity
// coupling. Positions live in the padded window.
struct PointCloud {
    std::vector<double> xs, ys, marks, aux;
    CloudSource source = CloudSource::poisson;
    double intensity = 1.0; // Poisson intensity, or retention = eps^2 for lattice
    double epsilon = 0.0;   // lattice spacing (lattice source only)
    Window region;          // padded generation window
    std::size_t size() const { return xs.size(); }
};

inline PointCloud sample_poisson_cloud(const Window& region, double intensity,
                                       const MarkDistribution& dist, std::uint64_t seed,
                                       std::uint64_t trial) {
    if (region.width() < 0 || region.height() < 0)
        throw std::invalid_argument("sample_poisson_cloud: degenerate window");
    PointCloud c;
    c.source = CloudSource::poisson;
    c.intensity = intensity;
    c.region = region;
    CounterRng cloud_rng(seed, trial, RngChannel::cloud);
    CounterRng mark_rng(seed, trial, RngChannel::marks);
    CounterRng aux_rng(seed, trial, RngChannel::aux);
    const long n = intensity > 0 ? cloud_rng.poisson(intensity * region.area()) : 0;
    c.xs.resize(n);
    c.ys.resize(n);
    c.marks.resize(n);
    c.aux.resize(n);
    for (long i = 0; i < n; ++i) {
        c.xs[i] = cloud_rng.uniform(region.x0, region.x1);
        c.ys[i] = cloud_rng.uniform(region.y0, region.y1);
        c.marks[i] = dist.sample(mark_rng);
        c.aux[i] = aux_rng.uniform01();
    }
    return c;
}

// Bernoulli(eps^2) thinning of the lattice eps * Z^2 inside the region.
// Sites are visited in row-major order with geometric skips, so the cost is
// proportional to the number of retained sites.
inline PointCloud sample_lattice_cloud(double eps, const Window& region,
                                       const MarkDistribution& dist, std::uint64_t seed,
                                       std::uint64_t trial) {
    if (eps <= 0) throw std::invalid_argument("sample_lattice_cloud: eps must be > 0");
    PointCloud c;
    c.source = CloudSource::lattice;
    c.epsilon = eps;
    c.intensity = eps * eps;
    c.region = region;
    const long ix0 = static_cast<long>(std::ceil(region.x0 / eps));
    const long ix1 = static_cast<long>(std::floor(region.x1 / eps));
    const long iy0 = static_cast<long>(std::ceil(region.y0 / eps));
    const long iy1 = static_cast<long>(std::floor(region.y1 / eps));
    const long nx = ix1 - ix0 + 1, ny = iy1 - iy0 + 1;
    if (nx <= 0 || ny <= 0) return c;
    CounterRng cloud_rng(seed, trial, RngChannel::cloud);
    CounterRng mark_rng(seed, trial, RngChannel::marks);
    CounterRng aux_rng(seed, trial, RngChannel::aux);
    const double p = eps * eps;
    const double log_q = std::log1p(-p);
    const double total = static_cast<double>(nx) * static_cast<double>(ny);
    double k = p >= 1.0 ? 0.0 : std::floor(std::log(cloud_rng.uniform_pos()) / log_q);
    while (k < total) {
        const long idx = static_cast<long>(k);
        c.xs.push_back((ix0 + idx % nx) * eps);
        c.ys.push_back((iy0 + idx / nx) * eps);
        c.marks.push_back(dist.sample(mark_rng));
        c.aux.push_back(aux_rng.uniform01());
        k += p >= 1.0 ? 1.0 : 1.0 + std::floor(std::log(cloud_rng.uniform_pos()) / log_q);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Padding radius.
//
// The field sums over the whole plane; only points within `reach` of the
// evaluation window are generated and stamped. The neglected remainder is a
// shot noise field restricted to {|y| > reach}: its standard deviation is
// sqrt(E[Y^2]) * ||g||_{L2({|y|>reach})} and (for the intensity tilt) its mean
// is 2 eta E|Y| * ||g||_{L1({|y|>reach})}. The radius is chosen so both stay
// below rel_tol * sd(f). rel_tol = 1e-3 keeps the neglect two orders below
// Monte Carlo resolution; see acceptance notes in the README.
inline double field_sd(const Kernel& k, const MarkDistribution& dist) {
    return std::sqrt(dist.second_moment()) * l2_tail(k, 0.0);
}

inline double pad_radius(const Kernel& k, const MarkDistribution& dist, double eta = 0.0,
                         double rel_tol = 1e-3) {
    const double target = rel_tol * field_sd(k, dist);
    if (target <= 0) throw std::invalid_argument("pad_radius: degenerate field");
    const double m2 = std::sqrt(dist.second_moment());
    const double m1 = std::abs(2.0 * eta) * dist.mean_abs();
    auto neglect = [&](double R) { return m2 * l2_tail(k, R) + m1 * l1_tail(k, R); };
    double hi = 1.0;
    while (neglect(hi) > target) {
        hi *= 2.0;
        if (hi > 1e7) throw std::runtime_error("pad_radius: kernel tail too heavy");
    }
    double lo = hi * 0.5;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (neglect(mid) > target ? lo : hi) = mid;
    }
    const double sup = k.support_radius();
    return std::isfinite(sup) ? std::min(hi, sup) : hi;
}

// ---------------------------------------------------------------------------
// Stamping functors on squared radius.

namespace stamp_detail {

template <int M, bool ODD>
struct PowHalfIntR2 {
    double operator()(double r2) const {
        const double u = 1.0 + std::sqrt(r2);
        double p = u;
        for (int i = 1; i < M; ++i) p *= u;
        if constexpr (ODD) p *= std::sqrt(u);
        return 1.0 / p;
    }
};

struct PowGenericR2 {
    double alpha;
    double operator()(double r2) const { return std::pow(1.0 + std::sqrt(r2), -alpha); }
};

struct StretchedR2 {
    double beta;
    double operator()(double r2) const { return std::exp(-std::pow(1.0 + r2, 0.5 * beta)); }
};

template <class Base>
struct TruncR2 {
    Base base;
    double tr, quarter2, half2;
    TruncR2(Base b, double r) : base(b), tr(r), quarter2(r * r / 16.0), half2(r * r / 4.0) {}
    double operator()(double r2) const {
        if (r2 >= half2) return 0.0;
        const double v = base(r2);
        if (r2 <= quarter2) return v;
        return v * Cutoff::value(std::sqrt(r2) / tr);
    }
};

template <class Base>
struct ResidR2 {
    Base base;
    double tr, quarter2, half2;
    ResidR2(Base b, double r) : base(b), tr(r), quarter2(r * r / 16.0), half2(r * r / 4.0) {}
    double operator()(double r2) const {
        if (r2 <= quarter2) return 0.0;
        const double v = base(r2);
        if (r2 >= half2) return v;
        return v * (1.0 - Cutoff::value(std::sqrt(r2) / tr));
    }
};

template <class Fn>
void with_functor(const Kernel& k, Fn&& fn) {
    auto wrap = [&](auto base) {
        switch (k.mode) {
            case TruncMode::none:
                fn(base);
                return;
            case TruncMode::truncated:
                fn(TruncR2<decltype(base)>(base, k.trunc_radius));
                return;
            case TruncMode::residual:
                fn(ResidR2<decltype(base)>(base, k.trunc_radius));
                return;
        }
    };
    if (k.family == KernelFamily::stretched_exp) {
        wrap(StretchedR2{k.shape});
        return;
    }
    const double n2 = 2.0 * k.shape;
    const long n = std::lround(n2);
    if (std::abs(n2 - n) < 1e-12) {
        switch (n) { // fast exact paths for half-integer exponents
            case 5: wrap(PowHalfIntR2<2, true>{}); return;
            case 6: wrap(PowHalfIntR2<3, false>{}); return;
            case 7: wrap(PowHalfIntR2<3, true>{}); return;
            case 8: wrap(PowHalfIntR2<4, false>{}); return;
            case 9: wrap(PowHalfIntR2<4, true>{}); return;
            case 10: wrap(PowHalfIntR2<5, false>{}); return;
            case 11: wrap(PowHalfIntR2<5, true>{}); return;
            case 12: wrap(PowHalfIntR2<6, false>{}); return;
            case 13: wrap(PowHalfIntR2<6, true>{}); return;
            default: break;
        }
    }
    wrap(PowGenericR2{k.shape});
}

// Adds m_i * kernel(x - p_i) for every node within `reach` of each point.
// The per-point square [p - reach, p + reach]^2 is clipped to the grid; the
// inner loop is branch-free so it vectorizes.
template <class KF>
void stamp(const double* xs, const double* ys, const double* ms, std::size_t n,
           const KF& kf, double reach, const GridSpec& g, double* out) {
    const double inv = 1.0 / g.spacing;
    for (std::size_t i = 0; i < n; ++i) {
        const double px = xs[i], py = ys[i], m = ms[i];
        if (m == 0.0) continue;
        long ix0 = static_cast<long>(std::ceil((px - reach - g.origin_x) * inv));
        long ix1 = static_cast<long>(std::floor((px + reach - g.origin_x) * inv));
        long iy0 = static_cast<long>(std::ceil((py - reach - g.origin_y) * inv));
        long iy1 = static_cast<long>(std::floor((py + reach - g.origin_y) * inv));
        ix0 = std::max(ix0, 0L);
        iy0 = std::max(iy0, 0L);
        ix1 = std::min(ix1, static_cast<long>(g.width) - 1);
        iy1 = std::min(iy1, static_cast<long>(g.height) - 1);
        if (ix0 > ix1 || iy0 > iy1) continue;
        const double x0 = g.origin_x + ix0 * g.spacing - px;
        const long cnt = ix1 - ix0 + 1;
        for (long iy = iy0; iy <= iy1; ++iy) {
            const double dy = g.origin_y + iy * g.spacing - py;
            const double dy2 = dy * dy;
            double* row = out + iy * g.width + ix0;
            for (long j = 0; j < cnt; ++j) {
                const double dx = x0 + j * g.spacing;
                row[j] += m * kf(dx * dx + dy2);
            }
        }
    }
}

} // namespace stamp_detail

// ---------------------------------------------------------------------------
// Field samples.

struct VariantSpec {
    std::optional<double> mark_shift; // f^h: add h to every mark
    std::optional<double> eta;        // f^eta: sign_i = +1 iff U_i <= 1/2 + eta

    std::string describe() const {
        std::string s = "plain";
        if (eta) s = "intensity(" + std::to_string(*eta) + ")";
        if (mark_shift) s += "+shift(" + std::to_string(*mark_shift) + ")";
        return s;
    }
};

struct FieldSample {
    GridSpec grid;
    Window window;          // region of certified values
    std::vector<double> values;
    std::vector<double> grad_x, grad_y; // filled only when requested
    VariantSpec variant;
    double reach = 0.0;
    std::uint64_t master_seed = 0;
    std::shared_ptr<const PointCloud> cloud;

    double at(int ix, int iy) const { return values[std::size_t(iy) * grid.width + ix]; }
};

inline std::vector<double> effective_marks(const PointCloud& cloud, const VariantSpec& v) {
    if (v.eta && (*v.eta < -0.5 || *v.eta > 0.5))
        throw std::invalid_argument("eta must lie in [-1/2, 1/2]");
    std::vector<double> m = cloud.marks;
    if (v.eta) {
        const double thr = 0.5 + *v.eta;
        for (std::size_t i = 0; i < m.size(); ++i)
            m[i] = cloud.aux[i] <= thr ? std::abs(m[i]) : -std::abs(m[i]);
    }
    if (v.mark_shift)
        for (auto& x : m) x += *v.mark_shift;
    return m;
}

struct SynthOptions {
    bool gradients = false;
};

inline FieldSample synthesize(std::shared_ptr<const PointCloud> cloud, const Kernel& kernel,
                              const GridSpec& grid, const Window& window, double reach,
                              const VariantSpec& variant = {}, const SynthOptions& opts = {},
                              std::uint64_t master_seed = 0) {
    FieldSample fs;
    fs.grid = grid;
    fs.window = window;
    fs.variant = variant;
    fs.reach = reach;
    fs.master_seed = master_seed;
    fs.cloud = cloud;
    fs.values.assign(grid.cells(), 0.0);
    const std::vector<double> marks = effective_marks(*cloud, variant);
    stamp_detail::with_functor(kernel, [&](const auto& kf) {
        stamp_detail::stamp(cloud->xs.data(), cloud->ys.data(), marks.data(), cloud->size(),
                            kf, reach, grid, fs.values.data());
    });
    if (opts.gradients) {
        fs.grad_x.assign(grid.cells(), 0.0);
        fs.grad_y.assign(grid.cells(), 0.0);
        // diagnostics path: plain scalar loop over nodes in each point's square
        const double inv = 1.0 / grid.spacing;
        for (std::size_t i = 0; i < cloud->size(); ++i) {
            const double px = cloud->xs[i], py = cloud->ys[i], m = marks[i];
            long ix0 = std::max(0L, static_cast<long>(std::ceil((px - reach - grid.origin_x) * inv)));
            long ix1 = std::min<long>(grid.width - 1,
                                      static_cast<long>(std::floor((px + reach - grid.origin_x) * inv)));
            long iy0 = std::max(0L, static_cast<long>(std::ceil((py - reach - grid.origin_y) * inv)));
            long iy1 = std::min<long>(grid.height - 1,
                                      static_cast<long>(std::floor((py + reach - grid.origin_y) * inv)));
            for (long iy = iy0; iy <= iy1; ++iy) {
                for (long ix = ix0; ix <= ix1; ++ix) {
                    const double dx = grid.x(static_cast<int>(ix)) - px;
                    const double dy = grid.y(static_cast<int>(iy)) - py;
                    const double r = std::hypot(dx, dy);
                    if (r == 0.0) continue;
                    const double slope = kernel.radial_deriv(r) / r;
                    fs.grad_x[iy * grid.width + ix] += m * slope * dx;
                    fs.grad_y[iy * grid.width + ix] += m * slope * dy;
                }
            }
        }
    }
    return fs;
}

// Coupled family f^eta over a shared cloud. Built incrementally: moving from
// eta to eta' >= eta flips the sign of marks with aux in (1/2+eta, 1/2+eta'],
// which adds the non-negative field 2|Y_i| g(x - p_i). Monotonicity of the
// family is therefore exact, cell by cell.
inline std::vector<FieldSample> intensity_family(std::shared_ptr<const PointCloud> cloud,
                                                 const Kernel& kernel, const GridSpec& grid,
                                                 const Window& window, double reach,
                                                 const std::vector<double>& etas,
                                                 std::uint64_t master_seed = 0) {
    if (etas.empty()) return {};
    if (!std::is_sorted(etas.begin(), etas.end()))
        throw std::invalid_argument("intensity_family: etas must be sorted ascending");
    for (double e : etas)
        if (e < -0.5 || e > 0.5) throw std::invalid_argument("eta must lie in [-1/2, 1/2]");

    std::vector<FieldSample> family;
    family.reserve(etas.size());
    VariantSpec v0;
    v0.eta = etas.front();
    family.push_back(synthesize(cloud, kernel, grid, window, reach, v0, {}, master_seed));
    for (std::size_t j = 1; j < etas.size(); ++j) {
        FieldSample next = family.back();
        next.variant.eta = etas[j];
        const double lo = 0.5 + etas[j - 1], hi = 0.5 + etas[j];
        std::vector<double> delta(cloud->size(), 0.0);
        for (std::size_t i = 0; i < cloud->size(); ++i)
            if (cloud->aux[i] > lo && cloud->aux[i] <= hi)
                delta[i] = 2.0 * std::abs(cloud->marks[i]);
        stamp_detail::with_functor(kernel, [&](const auto& kf) {
            stamp_detail::stamp(cloud->xs.data(), cloud->ys.data(), delta.data(),
                                cloud->size(), kf, reach, grid, next.values.data());
        });
        family.push_back(std::move(next));
    }
    return family;
}

// Direct evaluation at a single location (no raster).
inline double field_value_at(const PointCloud& cloud, const std::vector<double>& marks,
                             const Kernel& kernel, double x, double y, double reach) {
    double acc = 0.0;
    const double r2max = reach * reach;
    stamp_detail::with_functor(kernel, [&](const auto& kf) {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const double dx = cloud.xs[i] - x, dy = cloud.ys[i] - y;
            const double r2 = dx * dx + dy * dy;
            if (r2 <= r2max) acc += marks[i] * kf(r2);
        }
    });
    return acc;
}

// Max |a - b| over the nodes inside `region`.
inline double sup_distance(const FieldSample& a, const FieldSample& b, const Window& region) {
    const GridSpec& g = a.grid;
    if (b.grid.width != g.width || b.grid.height != g.height ||
        b.grid.spacing != g.spacing || b.grid.origin_x != g.origin_x ||
        b.grid.origin_y != g.origin_y)
        throw std::invalid_argument("sup_distance: grid geometry mismatch");
    const double inv = 1.0 / g.spacing;
    const long ix0 = std::max(0L, static_cast<long>(std::ceil((region.x0 - g.origin_x) * inv - 1e-9)));
    const long ix1 = std::min<long>(g.width - 1,
                                    static_cast<long>(std::floor((region.x1 - g.origin_x) * inv + 1e-9)));
    const long iy0 = std::max(0L, static_cast<long>(std::ceil((region.y0 - g.origin_y) * inv - 1e-9)));
    const long iy1 = std::min<long>(g.height - 1,
                                    static_cast<long>(std::floor((region.y1 - g.origin_y) * inv + 1e-9)));
    double best = 0.0;
    for (long iy = iy0; iy <= iy1; ++iy)
        for (long ix = ix0; ix <= ix1; ++ix)
            best = std::max(best, std::abs(a.values[iy * g.width + ix] - b.values[iy * g.width + ix]));
    return best;
}

// ---------------------------------------------------------------------------
// Raster dump: "SNFRAST1", u32 width/height, f64 spacing/origin, then
// row-major f64 node values, all little-endian. A .meta.json sidecar carries
// provenance.
static_assert(std::endian::native == std::endian::little,
              "raster files are written little-endian; add byte swapping on this platform");

inline void write_raster(const FieldSample& fs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_raster: cannot open " + path);
    const char magic[8] = {'S', 'N', 'F', 'R', 'A', 'S', 'T', '1'};
    out.write(magic, 8);
    const std::uint32_t w = static_cast<std::uint32_t>(fs.grid.width);
    const std::uint32_t h = static_cast<std::uint32_t>(fs.grid.height);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(&fs.grid.spacing), 8);
    out.write(reinterpret_cast<const char*>(&fs.grid.origin_x), 8);
    out.write(reinterpret_cast<const char*>(&fs.grid.origin_y), 8);
    out.write(reinterpret_cast<const char*>(fs.values.data()),
              static_cast<std::streamsize>(fs.values.size() * 8));
    std::ofstream meta(path + ".meta.json");
    meta << "{\n  \"variant\": \"" << fs.variant.describe() << "\",\n"
         << "  \"master_seed\": " << fs.master_seed << ",\n"
         << "  \"reach\": " << fs.reach << ",\n"
         << "  \"points\": " << (fs.cloud ? fs.cloud->size() : 0) << "\n}\n";
}

inline FieldSample read_raster(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_raster: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "SNFRAST1", 8) != 0)
        throw std::runtime_error("read_raster: bad magic in " + path);
    std::uint32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    FieldSample fs;
    fs.grid.width = static_cast<int>(w);
    fs.grid.height = static_cast<int>(h);
    in.read(reinterpret_cast<char*>(&fs.grid.spacing), 8);
    in.read(reinterpret_cast<char*>(&fs.grid.origin_x), 8);
    in.read(reinterpret_cast<char*>(&fs.grid.origin_y), 8);
    fs.values.resize(fs.grid.cells());
    in.read(reinterpret_cast<char*>(fs.values.data()),
            static_cast<std::streamsize>(fs.values.size() * 8));
    if (!in) throw std::runtime_error("read_raster: truncated file " + path);
    return fs;
}

} // namespace snfield
