#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hfde/conditions.hpp"
#include "oracles.hpp"

using namespace hfde;

namespace {
const ParamPoint th11{1.0, 1.0};

EstimatingFunction unit_weight_control(ModelPtr m) {
    auto one = [](double, const ParamPoint&) { return 1.0; };
    return non_rate_optimal_ef(m, one, one, "non-rate-unit");
}
}  // namespace

TEST_CASE("efficient quadratic passes both condition pairs") {
    auto m = builtin_model("ou");
    auto ef = catalog_ef("quad-exact-efficient", m);
    const auto grid = default_condition_grid(m, th11);
    const auto rate = check_rate_optimality(ef, m, th11, grid);
    CHECK(rate.pass());
    CHECK(rate.first.max_residual < 1e-8);
    const auto eff = check_efficiency(ef, m, th11, grid);
    CHECK(eff.pass());
    CHECK(eff.first.max_residual < 1e-6);
    CHECK(eff.second.max_residual < 1e-6);
}

TEST_CASE("unit-weight control fails the rate condition with the analytic residual") {
    auto m = builtin_model("ou");
    auto ef = unit_weight_control(m);
    const std::vector<double> grid{2.0};
    const auto rate = check_rate_optimality(ef, m, th11, grid);
    CHECK_FALSE(rate.first.pass);
    // d_y g2(0,x,x) = 2 a2 x = 2x
    CHECK(rate.first.residuals[0] == doctest::Approx(4.0).epsilon(1e-4));
}

TEST_CASE("euler pseudo-score passes both condition pairs") {
    auto m = builtin_model("ou");
    auto ef = catalog_ef("euler", m);
    const auto grid = default_condition_grid(m, th11);
    CHECK(check_rate_optimality(ef, m, th11, grid).pass());
    CHECK(check_efficiency(ef, m, th11, grid).pass());
}

TEST_CASE("constant drift weight breaks drift efficiency by the analytic amount") {
    auto m = builtin_model("ou");
    Weight2x2 w;
    w.A = [m](double x, double, const ParamPoint& th) {
        const double v = m->diffusion_sq(x, th, 0);
        return Mat2::diag(1.0, 0.5 * m->diffusion_sq_dbeta(x, th) / (v * v));
    };
    auto ef = quadratic_ef(m, w, MomentSpec::Exact(), "quad-const-a1");
    const std::vector<double> grid{2.0};
    const auto eff = check_efficiency(ef, m, th11, grid);
    CHECK_FALSE(eff.first.pass);
    CHECK(eff.first.residuals[0] == doctest::Approx(3.0).epsilon(1e-4));
    CHECK(eff.second.pass);
}

TEST_CASE("martingale-order probe with the exact transition engine") {
    auto m = builtin_model("ou");
    const std::vector<double> deltas{0.2, 0.1, 0.05, 0.025};

    auto exact = catalog_ef("quad-exact-efficient", m);
    const auto pe = probe_martingale_order(exact, m, th11, 2.0, deltas);
    CHECK(pe.g1.exact);
    CHECK(pe.g2.exact);

    auto eul = catalog_ef("euler", m);
    const auto pu = probe_martingale_order(eul, m, th11, 2.0, deltas);
    CHECK_FALSE(pu.g1.exact);
    // conditional mean of g1 at delta 0.1: |a1| x (e^{-d} - 1 + d) with a1 = -2
    CHECK(pu.g1.means[1] == doctest::Approx(2.0 * 0.0096748).epsilon(1e-4));
    CHECK(pu.g1.slope > 1.7);
    CHECK(pu.g1.slope < 2.3);
    CHECK(pu.g2.slope > 1.7);
    CHECK(pu.g2.slope < 2.3);

    auto q3 = catalog_ef("quad-expansion-k3", m);
    const auto p3 = probe_martingale_order(q3, m, th11, 2.0, deltas);
    CHECK(p3.g1.slope > 2.7);
    CHECK(p3.g1.slope < 3.3);
    CHECK(p3.g2.slope > 2.7);
    CHECK(p3.g2.slope < 3.3);
}

TEST_CASE("martingale-order probe with the simulation engine") {
    auto m = builtin_model("ou");
    auto eul = catalog_ef("euler", m);
    const std::vector<double> deltas{0.2, 0.1};
    const auto mc = probe_martingale_order(eul, m, th11, 2.0, deltas, "mc", 1000000, 5);
    const auto ex = probe_martingale_order(eul, m, th11, 2.0, deltas, "exact");
    // sqrt(phi)-scale noise of the mean over 1e6 draws
    const double se1 = 2.0 * std::sqrt(oracle::ou_phi(0.2, 1.0, 1.0) / 1e6);
    CHECK(std::abs(mc.g1.means[0] - ex.g1.means[0]) < 5.0 * se1 + 1e-4);
    CHECK(std::abs(mc.g1.means[1] - ex.g1.means[1]) < 5.0 * se1 + 1e-4);
}

TEST_CASE("expansion identities hold for the catalog and detect violations") {
    auto m = builtin_model("ou");
    const std::vector<double> grid{-1.2, -0.4, 0.3, 1.1, 2.0};

    for (const auto& name : {std::string("euler"), std::string("quad-exact-efficient"),
                             std::string("gh-quadratic"), std::string("local-gaussian")}) {
        auto ef = catalog_ef(name, m);
        const auto rep = verify_expansion_identities(ef, m, th11, grid, 1);
        INFO(name);
        CHECK(rep.max_residual_per_k[0] < 1e-6);
        CHECK(rep.max_residual_per_k[1] < 1e-6);
    }

    // an additive shift breaks the k = 0 identity by exactly the shift
    auto eul = catalog_ef("euler", m);
    EstimatingFunction shifted = eul;
    auto base = eul.eval;
    shifted.eval = [base](double d, double y, double x, const ParamPoint& th) {
        Vec2 g = base(d, y, x, th);
        g.x0 += 0.01;
        return g;
    };
    const auto rep = verify_expansion_identities(shifted, m, th11, grid, 0);
    CHECK(rep.max_residual_per_k[0] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK_FALSE(rep.pass(1e-6));
}

TEST_CASE("verdicts are stable under coordinate rescaling") {
    auto m = builtin_model("ou");
    auto eff = catalog_ef("quad-exact-efficient", m);
    auto control = unit_weight_control(m);
    const double scale = 7.0;
    auto scaled = [&](const EstimatingFunction& ef) {
        EstimatingFunction out = ef;
        auto base = ef.eval;
        out.eval = [base, scale](double d, double y, double x, const ParamPoint& th) {
            Vec2 g = base(d, y, x, th);
            g.x1 *= scale;
            return g;
        };
        return out;
    };
    const std::vector<double> grid{-1.0, 0.5, 2.0};
    // zero stays zero, nonzero scales by |scale|
    const auto r_eff = check_rate_optimality(scaled(eff), m, th11, grid, scale * 1e-6);
    CHECK(r_eff.first.pass);
    const auto r_ctrl = check_rate_optimality(scaled(control), m, th11, grid, scale * 1e-6);
    CHECK_FALSE(r_ctrl.first.pass);
    CHECK(r_ctrl.first.residuals[2] == doctest::Approx(scale * 4.0).epsilon(1e-4));
}

TEST_CASE("probe rejects unusable engines") {
    auto cir = builtin_model("cir", 1.0);
    auto eul = catalog_ef("euler", cir);
    CHECK_THROWS_AS(
        probe_martingale_order(eul, cir, {1.0, 0.5}, 1.0, {0.2, 0.1}, "exact"),
        MissingMomentsError);
    auto ou = builtin_model("ou");
    auto e2 = catalog_ef("euler", ou);
    CHECK_THROWS_AS(probe_martingale_order(e2, ou, th11, 1.0, {0.2, 0.1}, "bogus"),
                    ConfigError);
}
