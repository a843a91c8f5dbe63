#pragma once

// Test-only oracles, kept independent of the library paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <vector>

#include "snfield/percolation.hpp"

namespace testutil {

// Kolmogorov-Smirnov distance between a sample and an analytic CDF.
inline double ks_distance(std::vector<double> sample,
                          const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

// Two-sample KS distance.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                                 static_cast<double>(j) / b.size()));
    }
    return d;
}

// Golden-section maximizer on [a, b] for unimodal f.
inline double golden_max(const std::function<double(double)>& f, double a, double b,
                         int iters = 200) {
    const double gr = 0.6180339887498949;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        }
    }
    return std::max(f1, f2);
}

// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Brute-force crossing oracle: breadth-first path search under the same
// connectivity conventions as the union-find detector.
inline bool bfs_rect_crossing(const snfield::BinaryGrid& bg, bool primal) {
    const int w = bg.width, h = bg.height;
    const std::uint8_t want = primal ? 1 : 0;
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
    std::queue<std::pair<int, int>> q;
    if (primal) {
        for (int iy = 0; iy < h; ++iy)
            if (bg.bits[std::size_t(iy) * w] == want) {
                q.emplace(0, iy);
                seen[std::size_t(iy) * w] = 1;
            }
    } else {
        for (int ix = 0; ix < w; ++ix)
            if (bg.bits[ix] == want) {
                q.emplace(ix, 0);
                seen[ix] = 1;
            }
    }
    while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop();
        if (primal && x == w - 1) return true;
        if (!primal && y == h - 1) return true;
        const int lo = primal ? 0 : 4; // 8-conn for primal, 4-conn (skip diagonals) for dual
        static const int dx[8] = {-1, -1, 1, 1, -1, 1, 0, 0};
        static const int dy[8] = {-1, 1, -1, 1, 0, 0, -1, 1};
        for (int d = lo; d < 8; ++d) {
            const int nx = x + dx[d], ny = y + dy[d];
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t id = std::size_t(ny) * w + nx;
            if (seen[id] || bg.bits[id] != want) continue;
            seen[id] = 1;
            q.emplace(nx, ny);
        }
    }
    return false;
}

// Brute-force arm oracle on the annulus between centred node squares of
// half-widths k1 < k2 (grid must be (2*k2+1)^2 with the centre in the middle).
inline bool bfs_arm(const snfield::BinaryGrid& bg, int k1, int k2) {
    const int side = 2 * k2 + 1;
    auto occ = [&](int ux, int uy) {
        return bg.bits[std::size_t(uy + k2) * side + (ux + k2)] != 0;
    };
    auto ring = [&](int ux, int uy) { return std::max(std::abs(ux), std::abs(uy)); };
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(side) * side, 0);
    std::queue<std::pair<int, int>> q;
    for (int uy = -k2; uy <= k2; ++uy)
        for (int ux = -k2; ux <= k2; ++ux)
            if (ring(ux, uy) == k1 && occ(ux, uy)) {
                q.emplace(ux, uy);
                seen[std::size_t(uy + k2) * side + (ux + k2)] = 1;
            }
    while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop();
        if (ring(x, y) == k2) return true;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nx = x + dx, ny = y + dy;
                if (std::abs(nx) > k2 || std::abs(ny) > k2) continue;
                const int m = ring(nx, ny);
                if (m < k1 || m > k2) continue;
                const std::size_t id = std::size_t(ny + k2) * side + (nx + k2);
                if (seen[id] || !occ(nx, ny)) continue;
                seen[id] = 1;
                q.emplace(nx, ny);
            }
    }
    return false;
}

} // namespace testutil
