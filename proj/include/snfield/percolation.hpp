#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "snfield/field.hpp"

namespace snfield {

// Rasterized excursion set {f + level >= 0}; bit 1 = in the set. Ties belong
// to the primal set.
struct BinaryGrid {
    int width = 0, height = 0;
    double spacing = 0.25;
    double origin_x = 0, origin_y = 0;
    std::vector<std::uint8_t> bits;

    bool at(int ix, int iy) const { return bits[std::size_t(iy) * width + ix] != 0; }
};

inline BinaryGrid excursion(const FieldSample& fs, double level) {
    BinaryGrid bg;
    bg.width = fs.grid.width;
    bg.height = fs.grid.height;
    bg.spacing = fs.grid.spacing;
    bg.origin_x = fs.grid.origin_x;
    bg.origin_y = fs.grid.origin_y;
    bg.bits.resize(fs.values.size());
    for (std::size_t i = 0; i < fs.values.size(); ++i)
        bg.bits[i] = fs.values[i] + level >= 0.0 ? 1 : 0;
    return bg;
}

enum class EventKind {
    cross,      // left-right path of 1-nodes, 8-connected
    cross_star, // top-bottom path of 0-nodes, 4-connected
    arm         // 1-nodes, 8-connected, inner ring to outer ring of an annulus
};

// Crossing or arm event. Rect events live on [x0, x0+rho1] x [y0, y0+rho2]
// (in field coordinates, anchor defaulting to the origin); arm events on the
// annulus between the centred squares [-rho1, rho1]^2 and [-rho2, rho2]^2.
struct CrossingSpec {
    EventKind kind = EventKind::cross;
    double rho1 = 0, rho2 = 0;
    double level = 0;
    double x0 = 0, y0 = 0;

    static CrossingSpec cross(double rho1, double rho2, double level = 0) {
        if (rho1 <= 0 || rho2 <= 0) throw std::invalid_argument("rectangle sides must be > 0");
        return {EventKind::cross, rho1, rho2, level};
    }
    static CrossingSpec cross_star(double rho1, double rho2, double level = 0) {
        if (rho1 <= 0 || rho2 <= 0) throw std::invalid_argument("rectangle sides must be > 0");
        return {EventKind::cross_star, rho1, rho2, level};
    }
    static CrossingSpec arm(double rho1, double rho2, double level = 0) {
        if (!(0 < rho1 && rho1 < rho2)) throw std::invalid_argument("annulus needs 0 < rho1 < rho2");
        return {EventKind::arm, rho1, rho2, level};
    }
};

namespace perc_detail {

// Union-find with path halving and union by size; two extra virtual roots
// serve as the source/sink sides.
class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n + 2), size_(n + 2, 1) {
        std::iota(parent_.begin(), parent_.end(), 0u);
        src_ = static_cast<std::uint32_t>(n);
        snk_ = static_cast<std::uint32_t>(n + 1);
    }
    std::uint32_t source() const { return src_; }
    std::uint32_t sink() const { return snk_; }
    std::uint32_t find(std::uint32_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
    }
    bool connected(std::uint32_t a, std::uint32_t b) { return find(a) == find(b); }

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
    std::uint32_t src_ = 0, snk_ = 0;
};

inline long snap_index(double coord, double origin, double spacing, const char* what) {
    const double t = (coord - origin) / spacing;
    const long i = std::lround(t);
    if (std::abs(t - i) > 1e-6)
        throw std::invalid_argument(std::string("detect: ") + what +
                                    " does not align with the grid");
    return i;
}

// Left-right crossing by 1-nodes with 8-connectivity on the node rectangle
// [i0,i1] x [j0,j1]; with want=0, top-bottom by 0-nodes with 4-connectivity.
inline bool rect_crossing(const BinaryGrid& bg, long i0, long j0, long i1, long j1,
                          bool primal) {
    const long w = i1 - i0 + 1, h = j1 - j0 + 1;
    if (w <= 0 || h <= 0) throw std::invalid_argument("detect: empty rectangle");
    const std::uint8_t want = primal ? 1 : 0;
    UnionFind uf(static_cast<std::size_t>(w) * h);
    auto id = [&](long ix, long iy) {
        return static_cast<std::uint32_t>((iy - j0) * w + (ix - i0));
    };
    auto occ = [&](long ix, long iy) {
        return bg.bits[std::size_t(iy) * bg.width + ix] == want;
    };
    for (long iy = j0; iy <= j1; ++iy) {
        for (long ix = i0; ix <= i1; ++ix) {
            if (!occ(ix, iy)) continue;
            const std::uint32_t me = id(ix, iy);
            if (ix > i0 && occ(ix - 1, iy)) uf.unite(me, id(ix - 1, iy));
            if (iy > j0 && occ(ix, iy - 1)) uf.unite(me, id(ix, iy - 1));
            if (primal && iy > j0) { // diagonals only for 8-connectivity
                if (ix > i0 && occ(ix - 1, iy - 1)) uf.unite(me, id(ix - 1, iy - 1));
                if (ix < i1 && occ(ix + 1, iy - 1)) uf.unite(me, id(ix + 1, iy - 1));
            }
            if (primal) {
                if (ix == i0) uf.unite(me, uf.source());
                if (ix == i1) uf.unite(me, uf.sink());
            } else {
                if (iy == j0) uf.unite(me, uf.source());
                if (iy == j1) uf.unite(me, uf.sink());
            }
        }
    }
    return uf.connected(uf.source(), uf.sink());
}

} // namespace perc_detail

// Event detection on the rasterized excursion set. Conventions (fixed):
// the primal set {f + l >= 0} uses 8-connectivity, the dual set {f + l < 0}
// uses 4-connectivity, which makes Cross and Cross* an exact partition on
// the grid; arm events use the primal convention inside the annulus, with
// the inner square's outermost node ring as the inner boundary and the
// outer square's node ring as the outer boundary.
inline bool detect(const BinaryGrid& bg, const CrossingSpec& spec) {
    using namespace perc_detail;
    if (spec.kind == EventKind::cross || spec.kind == EventKind::cross_star) {
        const long i0 = snap_index(spec.x0, bg.origin_x, bg.spacing, "rectangle x0");
        const long i1 = snap_index(spec.x0 + spec.rho1, bg.origin_x, bg.spacing, "rectangle x1");
        const long j0 = snap_index(spec.y0, bg.origin_y, bg.spacing, "rectangle y0");
        const long j1 = snap_index(spec.y0 + spec.rho2, bg.origin_y, bg.spacing, "rectangle y1");
        if (i0 < 0 || j0 < 0 || i1 >= bg.width || j1 >= bg.height)
            throw std::invalid_argument("detect: rectangle exceeds the grid");
        return rect_crossing(bg, i0, j0, i1, j1, spec.kind == EventKind::cross);
    }

    // arm event on the annulus between centred squares of half-sides rho1 < rho2
    const long c_x = snap_index(0.0, bg.origin_x, bg.spacing, "annulus centre x");
    const long c_y = snap_index(0.0, bg.origin_y, bg.spacing, "annulus centre y");
    const long k1 = std::lround(spec.rho1 / bg.spacing);
    const long k2 = std::lround(spec.rho2 / bg.spacing);
    if (std::abs(spec.rho1 / bg.spacing - k1) > 1e-6 || std::abs(spec.rho2 / bg.spacing - k2) > 1e-6)
        throw std::invalid_argument("detect: annulus radii do not align with the grid");
    if (c_x - k2 < 0 || c_y - k2 < 0 || c_x + k2 >= bg.width || c_y + k2 >= bg.height)
        throw std::invalid_argument("detect: annulus exceeds the grid");
    if (k1 >= k2) throw std::invalid_argument("detect: degenerate annulus");

    const long side = 2 * k2 + 1;
    perc_detail::UnionFind uf(static_cast<std::size_t>(side) * side);
    auto id = [&](long ux, long uy) {
        return static_cast<std::uint32_t>((uy + k2) * side + (ux + k2));
    };
    auto in_annulus = [&](long ux, long uy) {
        const long m = std::max(std::labs(ux), std::labs(uy));
        return m >= k1 && m <= k2;
    };
    auto occ = [&](long ux, long uy) {
        return bg.bits[std::size_t(c_y + uy) * bg.width + (c_x + ux)] != 0;
    };
    for (long uy = -k2; uy <= k2; ++uy) {
        for (long ux = -k2; ux <= k2; ++ux) {
            if (!in_annulus(ux, uy) || !occ(ux, uy)) continue;
            const std::uint32_t me = id(ux, uy);
            static const int dx8[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
            static const int dy8[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
            for (int d = 0; d < 4; ++d) { // scan half the neighbourhood
                const long vx = ux + dx8[d], vy = uy + dy8[d];
                if (vx < -k2 || vx > k2 || vy < -k2 || vy > k2) continue;
                if (in_annulus(vx, vy) && occ(vx, vy)) uf.unite(me, id(vx, vy));
            }
            const long m = std::max(std::labs(ux), std::labs(uy));
            if (m == k1) uf.unite(me, uf.source());
            if (m == k2) uf.unite(me, uf.sink());
        }
    }
    return uf.connected(uf.source(), uf.sink());
}

// Discrete stand-in for "critical point near the level": nodes with
// |grad f| < grad_threshold and |f + level| < delta. The gradient threshold
// defaults to the grid spacing (a fixed proxy for "contains a gradient
// zero"), so the count scales linearly in the level window delta, matching
// the continuum statement. A threshold tied to delta itself would make the
// count cubic in delta.
inline long near_critical_count(const FieldSample& fs, double level, double delta,
                                double grad_threshold = 0.0) {
    if (delta <= 0) throw std::invalid_argument("near_critical_count: delta must be > 0");
    if (fs.grad_x.empty())
        throw std::invalid_argument("near_critical_count: field was synthesized without gradients");
    if (grad_threshold <= 0.0) grad_threshold = fs.grid.spacing;
    long count = 0;
    for (std::size_t i = 0; i < fs.values.size(); ++i) {
        const double gn = std::hypot(fs.grad_x[i], fs.grad_y[i]);
        if (gn < grad_threshold && std::abs(fs.values[i] + level) < delta) ++count;
    }
    return count;
}

} // namespace snfield
