#include "doctest.h"

#include <cmath>

#include "support.hpp"
#include "topomap/error.hpp"
#include "topomap/pso.hpp"
#include "topomap/rng.hpp"

using namespace topomap;

namespace {

// Independent scalar forms of the two forces.
double global_ref(double d, double dmax, double a, double b, double c) {
    const double r = d / dmax;
    return a * (1.0 - r * r * r) - b * std::exp(-d / c);
}

double local_ref(double d, double a, double b, double c) { return a / std::pow(d + 1.0, 3) - b * std::exp(-d / c); }

/// Root of the local force by bisection on [1, 100].
double local_equilibrium() {
    double lo = 1.0, hi = 100.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (local_ref(mid, 1.5, 15, 2) < 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("force values match independent scalar formulas") {
    const PsoParams p;
    Rng rng(17);
    for (int k = 0; k < 1000; ++k) {
        const double d = 2.0 * rng.uniform();
        const double dmax = 0.5 + 1.5 * rng.uniform();
        CHECK(std::abs(global_force_value(d, dmax, p.global) - global_ref(d, dmax, 1.5, 0.5, 2)) <= 1e-12);
        const double x = 5.0 * rng.uniform();
        CHECK(std::abs(local_force_value(x, p.local) - local_ref(x, 1.5, 15, 2)) <= 1e-12);
    }
    CHECK(global_force_value(2.0, 2.0, p.global) == doctest::Approx(-0.18393972058572117).epsilon(1e-15));
    CHECK(global_force_value(0.0, 2.0, p.global) == doctest::Approx(1.0));
    // max_cubed variant: a * (1 - d / max^3).
    CHECK(global_force_value(1.0, 2.0, p.global, true) ==
          doctest::Approx(1.5 * (1.0 - 1.0 / 8.0) - 0.5 * std::exp(-0.5)));
    // A distance matrix of zeros has no scale; attraction is a.
    CHECK(global_force_value(0.0, 0.0, p.global) == doctest::Approx(1.0));
}

TEST_CASE("force matrices") {
    const PsoParams p;
    Matrix d(3, 3);
    d << 0, 0.5, 1.5, 0.5, 0, 1.0, 1.5, 1.0, 0;
    const Matrix g = global_force(d, p);
    CHECK(g(0, 0) == 0.0);
    CHECK(g(0, 1) == g(1, 0));
    CHECK(g(0, 2) == doctest::Approx(global_ref(1.5, 1.5, 1.5, 0.5, 2)));
    Coords c(3, 2);
    c << 0, 0, 3, 4, 0, 1;
    const Matrix l = local_force(c, p);
    CHECK(l(0, 1) == doctest::Approx(local_ref(5, 1.5, 15, 2)));
    CHECK(l(2, 0) == doctest::Approx(local_ref(1, 1.5, 15, 2)));
    CHECK(l(1, 1) == 0.0);
}

TEST_CASE("weight schedule") {
    for (int t = 0; t <= 1000; ++t) {
        const auto [w_g, w_l] = weight_schedule(t);
        CHECK(w_g + w_l == 1.0);
        CHECK(w_g >= 0.0);
        CHECK(w_l >= 0.0);
    }
    CHECK(weight_schedule(0).second == doctest::Approx(0.002472623156634768).epsilon(1e-14));
    CHECK(weight_schedule(333).second == doctest::Approx(0.4985000044999837).epsilon(1e-14));
    CHECK(std::abs(weight_schedule(333).second - 0.5) < 0.005);
    CHECK(weight_schedule(1000).second == doctest::Approx(0.9999938558253978).epsilon(1e-14));
    CHECK(weight_schedule(333, 999).second == 0.5);
    for (int t = 1; t <= 1000; ++t) CHECK(weight_schedule(t).second > weight_schedule(t - 1).second);
    CHECK_THROWS_AS(weight_schedule(1001), Error);
}

TEST_CASE("two particles at the local equilibrium stay put") {
    const double d_star = local_equilibrium();
    CHECK(d_star == doctest::Approx(23.8925915796664).epsilon(1e-12));
    PsoParams p;
    p.mode = PsoMode::local_only;
    Coords c(2, 2);
    c << 0, 0, d_star, 0;
    Rng rng(0);
    const Coords disp = pso_displacements(c, nullptr, p, 0.0, 1.0, rng);
    CHECK(disp.norm() < 1e-9);

    // Closer than d* the pair repels, farther it attracts.
    c(1, 0) = d_star - 1.0;
    CHECK(pso_displacements(c, nullptr, p, 0.0, 1.0, rng)(1, 0) > 0.0);
    c(1, 0) = d_star + 1.0;
    CHECK(pso_displacements(c, nullptr, p, 0.0, 1.0, rng)(1, 0) < 0.0);
}

TEST_CASE("displacements") {
    PsoParams p;
    SUBCASE("coincident particles separate after one step") {
        Coords c = Coords::Constant(5, 2, 0.5);
        Rng rng(3);
        const Coords after = c + pso_displacements(c, nullptr, p, 0.0, 1.0, rng);
        for (Eigen::Index i = 0; i < 5; ++i)
            for (Eigen::Index j = i + 1; j < 5; ++j) CHECK((after.row(i) - after.row(j)).norm() > 0.0);
    }
    SUBCASE("pair updates are antisymmetric") {
        Coords c(2, 2);
        c << 0.2, 0.2, 0.2, 0.2;
        Rng rng(5);
        const Coords disp = pso_displacements(c, nullptr, p, 0.0, 1.0, rng);
        CHECK(disp(0, 0) == -disp(1, 0));
        CHECK(disp(0, 1) == -disp(1, 1));
    }
    SUBCASE("step is clamped") {
        p.step_size = 10.0;
        Coords c(2, 2);
        c << 0, 0, 0.01, 0;
        Rng rng(5);
        const Coords disp = pso_displacements(c, nullptr, p, 0.0, 1.0, rng);
        CHECK(disp.row(0).norm() == doctest::Approx(0.1));
    }
    SUBCASE("magnitude is eta * sum of half the weighted force") {
        Coords c(2, 2);
        c << 0, 0, 0.3, 0.4;
        Matrix g(2, 2);
        g << 0, 0.8, 0.8, 0;
        Rng rng(5);
        const Coords disp = pso_displacements(c, &g, p, 0.99, 0.01, rng);
        const double f = 0.5 * (0.99 * 0.8 + 0.01 * local_ref(0.5, 1.5, 15, 2));
        const double eta = 0.05 / 2;
        CHECK(disp(0, 0) == doctest::Approx(eta * f * 0.6));
        CHECK(disp(0, 1) == doctest::Approx(eta * f * 0.8));
    }
}

TEST_CASE("PSO runs") {
    const NapMatrix nap = testing::planted_nap(30, 4, 2, 0.1, 1, 20);
    MethodParams params;
    params.pso.steps = 200;

    SUBCASE("deterministic under a seed") {
        CHECK(make_layout(Method::pso, nap, params, 3).coords == make_layout(Method::pso, nap, params, 3).coords);
        CHECK(make_layout(Method::pso, nap, params, 3).coords != make_layout(Method::pso, nap, params, 4).coords);
    }
    SUBCASE("random baseline ignores the NAP features") {
        const NapMatrix other = testing::planted_nap(30, 6, 3, 0.5, 9, 20);
        CHECK(make_layout(Method::random_baseline, nap, params, 3).coords ==
              make_layout(Method::random_baseline, other, params, 3).coords);
    }
    SUBCASE("local-only refinement spreads coincident particles") {
        PsoParams p;
        p.mode = PsoMode::local_only;
        p.steps = 1;
        const Coords out = pso_run(Coords::Constant(10, 2, 0.5), nullptr, p, 1);
        for (Eigen::Index i = 0; i < 10; ++i)
            for (Eigen::Index j = i + 1; j < 10; ++j) CHECK((out.row(i) - out.row(j)).norm() > 0.0);
    }
    SUBCASE("full mode needs distances") {
        PsoParams p;
        CHECK_THROWS_AS(pso_run(Coords::Zero(3, 2), nullptr, p, 1), Error);
    }
    SUBCASE("parameter validation") {
        PsoParams p;
        p.steps = 0;
        CHECK_THROWS_AS(p.validate(), Error);
        p = PsoParams{};
        p.local.b = -1;
        CHECK_THROWS_AS(p.validate(), Error);
    }
    SUBCASE("hybrids record both stages") {
        const Layout l = make_layout(Method::umap_pso, nap, params, 2);
        CHECK(l.params.contains("base"));
        CHECK(l.params["pso"]["mode"] == "local_only");
        CHECK(hybrid_base(Method::umap_pso) == Method::umap);
        CHECK(!hybrid_base(Method::pso));
    }
}
