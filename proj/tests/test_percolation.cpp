#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "helpers.hpp"
#include "snfield/percolation.hpp"

using namespace snfield;

namespace {

BinaryGrid grid_from_bits(int w, int h, const std::vector<std::uint8_t>& bits,
                          double spacing = 1.0) {
    BinaryGrid bg;
    bg.width = w;
    bg.height = h;
    bg.spacing = spacing;
    bg.origin_x = 0;
    bg.origin_y = 0;
    bg.bits = bits;
    return bg;
}

BinaryGrid random_grid(int w, int h, double p, CounterRng& rng) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
    for (auto& b : bits) b = rng.uniform01() < p ? 1 : 0;
    return grid_from_bits(w, h, bits);
}

FieldSample field_on(const Window& win, double spacing, std::uint64_t seed,
                     std::uint64_t trial, const Kernel& k, const MarkDistribution& d,
                     bool gradients = false) {
    const double reach = pad_radius(k, d);
    auto cloud = std::make_shared<const PointCloud>(
        sample_poisson_cloud(win.padded(reach), 1.0, d, seed, trial));
    SynthOptions opts;
    opts.gradients = gradients;
    return synthesize(cloud, k, GridSpec::covering(win, spacing), win, reach, {}, opts);
}

} // namespace

TEST_CASE("excursion thresholding", "[percolation]") {
    FieldSample fs;
    fs.grid = GridSpec::covering({0, 0, 3, 3}, 1.0);
    fs.values.assign(fs.grid.cells(), -0.25);
    auto bg = excursion(fs, 0.25);
    for (auto b : bg.bits) REQUIRE(b == 1); // tie f + l = 0 is primal
    bg = excursion(fs, 0.2);
    for (auto b : bg.bits) REQUIRE(b == 0);

    // excursion(f, l) == excursion(f + l, 0) cellwise, and the complement is
    // the strict-negative set
    fs.values = {0.4, -0.1, 0.0, 0.3, -0.6, 0.2, 0.05, -0.05, 0.6,
                 0.4, -0.1, 0.0, 0.3, -0.6, 0.2};
    fs.values.resize(fs.grid.cells(), 0.1);
    const double level = 0.07;
    FieldSample shifted = fs;
    for (auto& v : shifted.values) v += level;
    const auto a = excursion(fs, level);
    const auto b = excursion(shifted, 0.0);
    REQUIRE(a.bits == b.bits);
    for (std::size_t i = 0; i < a.bits.size(); ++i)
        REQUIRE((a.bits[i] == 1) == !(fs.values[i] + level < 0));
}

TEST_CASE("trivial crossings", "[percolation]") {
    const auto ones = grid_from_bits(4, 4, std::vector<std::uint8_t>(16, 1));
    const auto zeros = grid_from_bits(4, 4, std::vector<std::uint8_t>(16, 0));
    REQUIRE(detect(ones, CrossingSpec::cross(3, 3)));
    REQUIRE(!detect(ones, CrossingSpec::cross_star(3, 3)));
    REQUIRE(!detect(zeros, CrossingSpec::cross(3, 3)));
    REQUIRE(detect(zeros, CrossingSpec::cross_star(3, 3)));
}

TEST_CASE("detector agrees with brute-force search", "[percolation]") {
    CounterRng rng(61, 0, RngChannel::general);
    for (int rep = 0; rep < 4000; ++rep) {
        const double p = rng.uniform(0.2, 0.8);
        const auto bg = random_grid(6, 6, p, rng);
        REQUIRE(detect(bg, CrossingSpec::cross(5, 5)) ==
                testutil::bfs_rect_crossing(bg, true));
        REQUIRE(detect(bg, CrossingSpec::cross_star(5, 5)) ==
                testutil::bfs_rect_crossing(bg, false));
    }
}

TEST_CASE("cross and cross-star partition every grid", "[percolation]") {
    CounterRng rng(62, 0, RngChannel::general);
    for (int rep = 0; rep < 2000; ++rep) {
        const int w = 2 + static_cast<int>(rng.uniform01() * 11);
        const int h = 2 + static_cast<int>(rng.uniform01() * 11);
        const auto bg = random_grid(w, h, rng.uniform(0.1, 0.9), rng);
        const bool c = detect(bg, CrossingSpec::cross(w - 1.0, h - 1.0));
        const bool s = detect(bg, CrossingSpec::cross_star(w - 1.0, h - 1.0));
        REQUIRE(c != s);
    }
}

TEST_CASE("arm detector agrees with brute force", "[percolation]") {
    CounterRng rng(63, 0, RngChannel::general);
    for (int rep = 0; rep < 2000; ++rep) {
        const int k2 = 4;
        const int side = 2 * k2 + 1;
        auto bg = random_grid(side, side, rng.uniform(0.25, 0.75), rng);
        bg.origin_x = -k2;
        bg.origin_y = -k2;
        REQUIRE(detect(bg, CrossingSpec::arm(1, k2)) == testutil::bfs_arm(bg, 1, k2));
        REQUIRE(detect(bg, CrossingSpec::arm(2, k2)) == testutil::bfs_arm(bg, 2, k2));
    }
}

TEST_CASE("symmetry equivariance", "[percolation]") {
    // Mirrors and 180-degree rotation fix the left-right crossing event
    // exactly; a 90-degree rotation fixes the arm event exactly.
    CounterRng rng(64, 0, RngChannel::general);
    for (int rep = 0; rep < 500; ++rep) {
        const int w = 3 + static_cast<int>(rng.uniform01() * 8);
        const int h = 3 + static_cast<int>(rng.uniform01() * 8);
        const auto bg = random_grid(w, h, rng.uniform(0.2, 0.8), rng);
        auto remap = [&](auto&& f) {
            std::vector<std::uint8_t> out(bg.bits.size());
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    auto [nx, ny] = f(x, y);
                    out[std::size_t(ny) * w + nx] = bg.bits[std::size_t(y) * w + x];
                }
            return grid_from_bits(w, h, out);
        };
        const auto mirror_x = remap([&](int x, int y) { return std::pair(w - 1 - x, y); });
        const auto mirror_y = remap([&](int x, int y) { return std::pair(x, h - 1 - y); });
        const auto rot180 =
            remap([&](int x, int y) { return std::pair(w - 1 - x, h - 1 - y); });
        for (auto spec : {CrossingSpec::cross(w - 1.0, h - 1.0),
                          CrossingSpec::cross_star(w - 1.0, h - 1.0)}) {
            const bool base = detect(bg, spec);
            REQUIRE(detect(mirror_x, spec) == base);
            REQUIRE(detect(mirror_y, spec) == base);
            REQUIRE(detect(rot180, spec) == base);
        }
    }
    for (int rep = 0; rep < 300; ++rep) {
        const int k2 = 4, side = 2 * k2 + 1;
        auto bg = random_grid(side, side, rng.uniform(0.25, 0.75), rng);
        bg.origin_x = bg.origin_y = -k2;
        std::vector<std::uint8_t> rot(bg.bits.size());
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                rot[std::size_t(x) * side + (side - 1 - y)] = bg.bits[std::size_t(y) * side + x];
        auto rbg = grid_from_bits(side, side, rot);
        rbg.origin_x = rbg.origin_y = -k2;
        const auto spec = CrossingSpec::arm(2, k2);
        REQUIRE(detect(bg, spec) == detect(rbg, spec));
    }
}

TEST_CASE("level monotonicity on sampled fields", "[percolation]") {
    const auto k = Kernel::powerlaw(3.5);
    const auto d = MarkDistribution::gaussian(1.0);
    const Window win{0, 0, 8, 8};
    for (int t = 0; t < 30; ++t) {
        const auto fs = field_on(win, 0.25, 301, t, k, d);
        bool prev = false;
        for (double level : {-0.6, -0.2, 0.0, 0.2, 0.6}) {
            const bool cur = detect(excursion(fs, level), CrossingSpec::cross(8, 8));
            if (prev) REQUIRE(cur); // increasing in the level
            prev = cur;
        }
    }
}

TEST_CASE("partition holds on sampled smooth fields", "[percolation]") {
    const auto k = Kernel::powerlaw(3.5);
    const auto d = MarkDistribution::gaussian(1.0);
    const Window win{0, 0, 16, 16};
    int violations = 0;
    for (int t = 0; t < 200; ++t) {
        const auto fs = field_on(win, 0.25, 302, t, k, d);
        const auto bg = excursion(fs, 0.0);
        const bool c = detect(bg, CrossingSpec::cross(16, 16));
        const bool s = detect(bg, CrossingSpec::cross_star(16, 16));
        if (c == s) ++violations;
    }
    REQUIRE(violations == 0); // exact on the grid under the (8,4) convention
}

TEST_CASE("near-critical cell counts", "[percolation]") {
    const auto k = Kernel::powerlaw(3.5);

    // constant field away from the level -> zero
    FieldSample flat;
    flat.grid = GridSpec::covering({0, 0, 4, 4}, 0.5);
    flat.values.assign(flat.grid.cells(), 1.0);
    flat.grad_x.assign(flat.grid.cells(), 0.0);
    flat.grad_y.assign(flat.grid.cells(), 0.0);
    REQUIRE(near_critical_count(flat, 0.0, 0.05) == 0);
    REQUIRE(near_critical_count(flat, -1.0, 0.05) == flat.grid.cells());

    // single-point field: the gradient vanishes only at the centre
    const Window win{-4, -4, 4, 4};
    PointCloud one;
    one.region = win;
    one.xs = {0.0};
    one.ys = {0.0};
    one.marks = {1.0};
    one.aux = {0.5};
    SynthOptions opts;
    opts.gradients = true;
    const auto fs = synthesize(std::make_shared<const PointCloud>(one), k,
                               GridSpec::covering(win, 0.25), win, 20.0, {}, opts);
    const long n = near_critical_count(fs, -1.0, 0.01); // g(0) = 1 at the peak
    REQUIRE(n <= 1);

    // shrinking the window shrinks the count roughly linearly
    const auto d = MarkDistribution::gaussian(1.0);
    const Window w2{0, 0, 10, 10};
    double counts[3] = {0, 0, 0};
    const double deltas[3] = {0.02, 0.01, 0.005};
    for (int t = 0; t < 200; ++t) {
        const auto f = field_on(w2, 0.25, 303, t, k, d, true);
        for (int j = 0; j < 3; ++j)
            counts[j] += static_cast<double>(near_critical_count(f, 0.0, deltas[j]));
    }
    REQUIRE(counts[1] < counts[0]);
    REQUIRE(counts[2] < counts[1]);
    REQUIRE(counts[1] / counts[0] > 0.3);
    REQUIRE(counts[1] / counts[0] < 0.8);
    REQUIRE(counts[2] / counts[1] > 0.3);
    REQUIRE(counts[2] / counts[1] < 0.8);
}

TEST_CASE("geometry mismatches are rejected", "[percolation]") {
    const auto bg = grid_from_bits(5, 5, std::vector<std::uint8_t>(25, 1));
    REQUIRE_THROWS_AS(detect(bg, CrossingSpec::cross(7, 4)), std::invalid_argument);
    REQUIRE_THROWS_AS(detect(bg, CrossingSpec::cross(3.3, 4)), std::invalid_argument);
    REQUIRE_THROWS_AS(detect(bg, CrossingSpec::arm(1, 4)), std::invalid_argument);
}
