#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "snfield/inequalities.hpp"

using namespace snfield;

namespace {

// One site in the middle of a small rectangle whose truncated kernel covers
// the whole rectangle with positive values: the crossing event reduces to a
// threshold event {Z >= theta}, solvable by bisection. The level is matched
// to the kernel value at the rectangle corners so theta lands in the bulk of
// the mark distribution.
DiscreteInstance single_site_instance(double level = -0.02) {
    DiscreteInstance inst;
    inst.R = 2;
    inst.eps = 1.0;
    inst.trunc_r = 12.0;
    inst.kernel_r = Kernel::powerlaw(3.5).truncated(12.0);
    inst.mark = MarkDistribution::gaussian(1.0);
    inst.level = level;
    inst.version = InstanceVersion::level;
    inst.h = 0.0;
    inst.grid_spacing = 0.25;
    inst.rect = {0, 0, 4, 2};
    inst.grid = GridSpec::covering(inst.rect, 0.25);
    inst.site_x = {2.0};
    inst.site_y = {1.0};
    return inst;
}

double threshold_of(const DiscreteInstance& inst, const InstanceEvaluator& eval) {
    double lo = 0.0, hi = 64.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (eval.cross(eval.field_from({mid})) ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

DiscreteInstance random_instance(CounterRng& rng, InstanceVersion version) {
    const double R = 3.0 + std::floor(rng.uniform01() * 4.0);
    const double level = rng.uniform(-0.3, 0.3);
    const double shift = version == InstanceVersion::level ? 0.0 : rng.uniform(-0.1, 0.1);
    return DiscreteInstance::build(R, 1.0, 3.0, Kernel::powerlaw(3.5),
                                   MarkDistribution::gaussian(1.0), level, version, shift,
                                   0.25);
}

} // namespace

TEST_CASE("scale schedule", "[inequalities]") {
    const auto p = scale_schedule(0.5, 1.0, 0.1, 100.0);
    REQUIRE(p.zeta == Catch::Approx(0.75).epsilon(1e-12));
    REQUIRE(p.r_scale == Catch::Approx(10.0).epsilon(1e-12));
    REQUIRE(p.rbar_scale == Catch::Approx(31.6227766016838).epsilon(1e-10));
    REQUIRE(p.h_scale == Catch::Approx(0.630957344480193).epsilon(1e-10));

    CounterRng rng(5, 0, RngChannel::general);
    for (int i = 0; i < 100; ++i) {
        const double gamma = rng.uniform(0.05, 0.95);
        const double c_arm = rng.uniform(0.05, 4.0);
        const double zeta = (gamma * c_arm + 1.0) / (c_arm + 1.0);
        const double xi = rng.uniform(1e-3, (1.0 - zeta) * 0.999);
        const auto q = scale_schedule(gamma, c_arm, xi, 50.0);
        REQUIRE(std::abs((1.0 - q.zeta) - (q.zeta - gamma) * c_arm) <= 1e-12);
    }

    REQUIRE_THROWS_AS(scale_schedule(0.5, 1.0, 0.25, 100.0), std::invalid_argument);
    REQUIRE_THROWS_AS(scale_schedule(0.5, 1.0, 0.3, 100.0), std::invalid_argument);
    REQUIRE_THROWS_AS(scale_schedule(1.2, 1.0, 0.1, 100.0), std::invalid_argument);
    // intensity variant: gamma < 2/(alpha-2)
    REQUIRE_THROWS_AS(scale_schedule(0.9, 1.0, 0.01, 100.0, 4.5), std::invalid_argument);
    REQUIRE_NOTHROW(scale_schedule(0.5, 1.0, 0.1, 100.0, 4.5));
}

TEST_CASE("instance construction respects the desk-scale guard", "[inequalities]") {
    const auto inst = DiscreteInstance::build(6.0, 1.0, 3.0, Kernel::powerlaw(3.5),
                                              MarkDistribution::gaussian(1.0), 0.0,
                                              InstanceVersion::level, 0.0, 0.25);
    REQUIRE(inst.site_count() <= 200);
    REQUIRE(inst.site_count() == 135); // 15 x 9 lattice sites within r/2 of the rect
    REQUIRE_THROWS_AS(DiscreteInstance::build(20.0, 1.0, 3.0, Kernel::powerlaw(3.5),
                                              MarkDistribution::gaussian(1.0), 0.0,
                                              InstanceVersion::level, 0.0, 0.25),
                      std::invalid_argument);
}

TEST_CASE("single-site influence matches the two-draw enumeration", "[inequalities]") {
    const auto inst = single_site_instance();
    const InstanceEvaluator eval(inst);
    const double theta = threshold_of(inst, eval);
    const double q = inst.mark.survival(theta); // P(Z >= theta), eps = 1, h = 0
    REQUIRE(q > 0.05);
    REQUIRE(q < 0.95);
    const long n = 20000;
    const auto rep = influences(inst, n, 71, eval, 2);
    const double oracle = 2.0 * q * (1.0 - q);
    const double se = 2.0 * std::sqrt(q * (1 - q) * (1 - q * (1 - q)) / n);
    REQUIRE(rep.influence[0] == Catch::Approx(oracle).margin(4 * se + 1e-3));
    REQUIRE(rep.p_hat == Catch::Approx(q).margin(0.02));
}

TEST_CASE("unreachable site has zero influence", "[inequalities]") {
    auto inst = single_site_instance();
    inst.site_x.push_back(100.0); // far outside the truncated kernel's reach
    inst.site_y.push_back(1.0);
    const InstanceEvaluator eval(inst);
    const auto rep = influences(inst, 2000, 72, eval, 2);
    REQUIRE(rep.influence[1] == 0.0);
}

TEST_CASE("all influences vanish for an almost-sure event", "[inequalities]") {
    auto inst = DiscreteInstance::build(4.0, 1.0, 3.0, Kernel::powerlaw(3.5),
                                        MarkDistribution::gaussian(1.0), 0.0,
                                        InstanceVersion::intensity, 0.5, 0.25);
    const InstanceEvaluator eval(inst);
    const auto rep = influences(inst, 1000, 73, eval, 2);
    REQUIRE(rep.p_hat == 1.0);
    for (double v : rep.influence) REQUIRE(v == 0.0);
}

TEST_CASE("revealments cover everything when the strip spans the instance",
          "[inequalities]") {
    auto inst = DiscreteInstance::build(3.0, 1.0, 3.0, Kernel::powerlaw(3.5),
                                        MarkDistribution::gaussian(1.0), 0.0,
                                        InstanceVersion::level, 0.0, 0.25);
    inst.trunc_r = 3.0 * inst.R; // r >= 3R: the first wave reveals every site
    inst.kernel_r = Kernel::powerlaw(3.5).truncated(inst.trunc_r);
    const InstanceEvaluator eval(inst);
    const auto rep = revealments(inst, 300, 74, eval, 2);
    for (double d : rep.revealment) REQUIRE(d == 1.0);
}

TEST_CASE("revealment band probability oracle", "[inequalities]") {
    // eta = 1/2: no negative components exist, so only the first wave
    // reveals; a site at height y is revealed iff |y - U| <= r
    auto inst = DiscreteInstance::build(6.0, 1.0, 3.0, Kernel::powerlaw(3.5),
                                        MarkDistribution::gaussian(1.0), 0.0,
                                        InstanceVersion::intensity, 0.5, 0.25);
    const InstanceEvaluator eval(inst);
    const long n = 20000;
    const auto rep = revealments(inst, n, 75, eval, 2);
    for (std::size_t i = 0; i < inst.site_count(); ++i) {
        const double y = inst.site_y[i];
        const double lo = std::max(0.0, y - inst.trunc_r);
        const double hi = std::min(inst.R, y + inst.trunc_r);
        const double band = std::max(0.0, hi - lo) / inst.R;
        const double se = std::sqrt(std::max(band * (1 - band), 1e-9) / n);
        REQUIRE(rep.revealment[i] == Catch::Approx(band).margin(4 * se + 2e-3));
    }
}

TEST_CASE("osss on the single-site instance is an equality", "[inequalities]") {
    const auto inst = single_site_instance();
    const auto rep = osss_check(inst, 20000, 76, 2);
    // Var = q(1-q), delta = 1, I = 2q(1-q): rhs = q(1-q)
    REQUIRE(rep.holds);
    REQUIRE(rep.var_est == Catch::Approx(rep.rhs).margin(3 * rep.ci + 1e-3));
    REQUIRE(rep.rev.revealment[0] == 1.0);
}

TEST_CASE("osss holds on random desk-scale instances", "[inequalities]") {
    CounterRng rng(77, 0, RngChannel::general);
    for (int k = 0; k < 4; ++k) {
        const auto inst = random_instance(rng, InstanceVersion::level);
        const auto rep = osss_check(inst, 2000, 78 + k, 2);
        INFO("instance " << k << ": var=" << rep.var_est << " rhs=" << rep.rhs
                         << " ci=" << rep.ci);
        REQUIRE(rep.holds);
    }
}

TEST_CASE("russo h0 matches the analytic gaussian value", "[inequalities]") {
    // P(Y <= h0) = 2 P(Y >= h0) forces Phi(h0) = 2/3
    REQUIRE(russo_h0(MarkDistribution::gaussian(1.0)) ==
            Catch::Approx(0.43072729929545744).margin(1e-9));
    REQUIRE_THROWS_AS(russo_h0(MarkDistribution::rademacher()), std::invalid_argument);
}

TEST_CASE("russo inequality on the single-site instance", "[inequalities]") {
    const auto inst = single_site_instance();
    const InstanceEvaluator eval(inst);
    const double theta = threshold_of(inst, eval);
    const auto rep = russo_check(inst, {0.025, 0.05}, 20000, 80, 2);
    REQUIRE(rep.holds);
    // exact forward difference: [P(Y >= theta - s) - P(Y >= theta)] / s
    const double exact =
        (inst.mark.survival(theta - 0.025) - inst.mark.survival(theta)) / 0.025;
    REQUIRE(rep.derivative == Catch::Approx(exact).margin(4 * rep.derivative_se + 1e-3));
    REQUIRE(rep.derivative_coarse > 0.0);
}

TEST_CASE("russo holds on random instances in both versions", "[inequalities]") {
    CounterRng rng(81, 0, RngChannel::general);
    for (int k = 0; k < 2; ++k) {
        const auto inst = random_instance(rng, InstanceVersion::level);
        const auto rep = russo_check(inst, {0.025, 0.05}, 3000, 82 + k, 2);
        INFO("level instance " << k << ": d=" << rep.derivative << " rhs=" << rep.rhs);
        REQUIRE(rep.holds);
    }
    for (int k = 0; k < 2; ++k) {
        const auto inst = random_instance(rng, InstanceVersion::intensity);
        const auto rep = russo_check(inst, {0.025, 0.05}, 3000, 84 + k, 2);
        INFO("intensity instance " << k << ": d=" << rep.derivative << " rhs=" << rep.rhs);
        REQUIRE(rep.holds);
    }
    // step validation
    const auto inst = single_site_instance();
    REQUIRE_THROWS_AS(russo_check(inst, {1.0}, 10, 1, 1), std::invalid_argument);
}
