#include "hbs/bundle.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hbs;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

const MechanicalSystem cart = pendulum_cart(1.0, 1.0, 1.0, 9.8);
const SymmetryAction cart_translation = SymmetryAction::coordinate(2, {1});

} // namespace

TEST(MomentumMap, CoordinateGeneratorPicksComponent) {
    EXPECT_EQ(momentum_map(cart_translation, {vec({0.3, 5.0}), vec({-2.0, 7.5})}).mu, vec({7.5}));
    const auto translations = SymmetryAction::coordinate(2, {0, 1});
    EXPECT_EQ(momentum_map(translations, {vec({1.0, 2.0}), vec({3.0, 4.0})}).mu, vec({3.0, 4.0}));
}

TEST(MomentumMap, ViaLegendre) {
    const auto s = legendre_to_momentum(cart, {vec({0.0, 0.0}), vec({1.0, 0.0})});
    EXPECT_NEAR(momentum_map(cart_translation, s).mu[0], 1.0, 1e-15);
}

TEST(LockedInertia, PendulumCartIsTotalMass) {
    const auto sys = pendulum_cart(0.4, 2.5, 1.7, 9.8);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 20; ++i) {
        const Matrix inertia = locked_inertia(sys, cart_translation, vec({u(rng), u(rng)}));
        EXPECT_DOUBLE_EQ(inertia(0, 0), 2.9);
    }
    EXPECT_DOUBLE_EQ(locked_inertia(cart, cart_translation, vec({0.2, 0.0}))(0, 0), 2.0);
}

TEST(LockedInertia, FreeParticleTranslation) {
    const auto sys = free_particle_2d();
    EXPECT_EQ(locked_inertia(sys, SymmetryAction::coordinate(2, {0, 1}), vec({1.0, 1.0})), Matrix::Identity(2, 2));
}

TEST(LockedInertia, EqualsGramMatrixOfGenerators) {
    // A 3-dof system with two non-coordinate commuting generators.
    const MechanicalSystem sys("sheared", 3,
                               [](const Vector& q) -> Matrix {
                                   Matrix m(3, 3);
                                   const double c = std::cos(q[0]);
                                   m << 2.0, 0.3 * c, 0.1, 0.3 * c, 1.5, 0.2, 0.1, 0.2, 1.0;
                                   return m;
                               },
                               [](const Vector&) { return 0.0; });
    const SymmetryAction action(
        3, {[](const Vector&) -> Vector { return vec({0.0, 1.0, 1.0}); },
            [](const Vector&) -> Vector { return vec({0.0, 1.0, -2.0}); }});
    const Vector q = vec({0.7, 1.0, -1.0});
    const Matrix xi = action.generator_matrix(q);
    const Matrix direct = xi.transpose() * mass_matrix(sys, q) * xi;
    EXPECT_LE((locked_inertia(sys, action, q) - direct).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE(generator_commutator_residual(action, q), 1e-6);
    EXPECT_GT(generator_independence(action, q), 0.1);
}

TEST(Connection, Examples) {
    EXPECT_NEAR(mechanical_connection(cart, cart_translation, {vec({0.0, 0.0}), vec({1.0, 0.0})}).xi[0], 0.5, 1e-15);
    EXPECT_NEAR(mechanical_connection(cart, cart_translation, {vec({0.4, 2.0}), vec({0.0, 3.25})}).xi[0], 3.25, 1e-14);
    EXPECT_NEAR(mechanical_connection(cart, cart_translation, {vec({M_PI / 2, 0.0}), vec({5.0, 0.0})}).xi[0], 0.0, 1e-15);
}

TEST(Connection, MatchesClosedForm) {
    const oracle::PendulumCart pc{0.6, 1.9, 2.2};
    const auto sys = pendulum_cart(pc.m, pc.M, pc.l, 9.8);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const double th = u(rng), td = u(rng), xd = u(rng);
        const double a = mechanical_connection(sys, cart_translation, {vec({th, u(rng)}), vec({td, xd})}).xi[0];
        EXPECT_NEAR(a, pc.connection(th, td, xd), 1e-13);
    }
}

TEST(Connection, ReproducesGenerators) {
    const MechanicalSystem sys("sheared", 3,
                               [](const Vector& q) -> Matrix {
                                   Matrix m(3, 3);
                                   const double c = std::cos(q[0]);
                                   m << 2.0, 0.3 * c, 0.1, 0.3 * c, 1.5, 0.2, 0.1, 0.2, 1.0;
                                   return m;
                               },
                               [](const Vector&) { return 0.0; });
    const SymmetryAction action(
        3, {[](const Vector&) -> Vector { return vec({0.0, 1.0, 1.0}); },
            [](const Vector&) -> Vector { return vec({0.0, 1.0, -2.0}); }});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        const Vector q = vec({u(rng), u(rng), u(rng)});
        const Vector c = vec({u(rng), u(rng)});
        const Vector v = action.generator_matrix(q) * c;
        EXPECT_LE((mechanical_connection(sys, action, {q, v}).xi - c).norm(), 1e-12 * std::max(1.0, c.norm()));
    }
}

TEST(Connection, InvariantAlongFibers) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const double th = u(rng);
        const Vector v = vec({u(rng), u(rng)});
        const double a0 = mechanical_connection(cart, cart_translation, {vec({th, 0.0}), v}).xi[0];
        const double a1 = mechanical_connection(cart, cart_translation, {vec({th, u(rng) * 100}), v}).xi[0];
        EXPECT_EQ(a0, a1);
    }
}

TEST(Split, Examples) {
    const auto s = horizontal_vertical_split(cart, cart_translation, {vec({0.0, 0.0}), vec({1.0, 0.0})});
    EXPECT_NEAR((s.horizontal - vec({1.0, -0.5})).norm(), 0.0, 1e-15);
    EXPECT_NEAR((s.vertical - vec({0.0, 0.5})).norm(), 0.0, 1e-15);

    const auto pure = horizontal_vertical_split(cart, cart_translation, {vec({1.1, 0.0}), vec({0.0, 1.0})});
    EXPECT_NEAR(pure.horizontal.norm(), 0.0, 1e-15);
    EXPECT_NEAR((pure.vertical - vec({0.0, 1.0})).norm(), 0.0, 1e-15);

    const auto free = horizontal_vertical_split(free_particle_2d(), SymmetryAction::coordinate(2, {0}),
                                                {vec({0.0, 0.0}), vec({3.0, 4.0})});
    EXPECT_EQ(free.vertical, vec({3.0, 0.0}));
    EXPECT_EQ(free.horizontal, vec({0.0, 4.0}));
}

TEST(Split, HorizontalPartCarriesNoMomentum) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 500; ++i) {
        const VelocityState s{vec({u(rng), u(rng)}), vec({u(rng), u(rng)})};
        const auto split = horizontal_vertical_split(cart, cart_translation, s);
        EXPECT_LE((split.horizontal + split.vertical - s.v).norm(), 1e-14 * std::max(1.0, s.v.norm()));
        const MomentumState hor{s.q, mass_matrix(cart, s.q) * split.horizontal};
        EXPECT_LE(std::abs(momentum_map(cart_translation, hor).mu[0]), 1e-12);
    }
}

TEST(Invariance, GenuineAndBogusSymmetries) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<VelocityState> samples;
    for (int i = 0; i < 20; ++i) samples.push_back({vec({u(rng), u(rng)}), vec({u(rng), u(rng)})});

    EXPECT_LE(check_lagrangian_invariance(cart, cart_translation, samples).max_derivative, 1e-8);
    EXPECT_LE(check_lagrangian_invariance(free_particle_2d(), SymmetryAction::coordinate(2, {0, 1}), samples).max_derivative, 1e-12);

    // ∂L/∂θ = −m l ẋ θ̇ sin θ − m g l sin θ; at θ = 1, θ̇ = ẋ = 0 it is −9.8 sin 1.
    const auto bogus = SymmetryAction::coordinate(2, {0});
    const auto rep = check_lagrangian_invariance(cart, bogus, {{vec({1.0, 0.0}), vec({0.0, 0.0})}});
    EXPECT_NEAR(rep.max_derivative, 9.8 * std::sin(1.0), 1e-6);
    EXPECT_GT(check_lagrangian_invariance(cart, bogus, samples).max_derivative, 0.1);
}

TEST(SymmetryAction, Validation) {
    EXPECT_THROW(SymmetryAction::coordinate(2, {0, 1, 1}), Error); // k > n
    EXPECT_THROW(SymmetryAction::coordinate(2, {2}), Error);      // out of range
    EXPECT_THROW(SymmetryAction::coordinate(3, {1, 1}), Error);   // duplicate
    const SymmetryAction general(3, {[](const Vector&) -> Vector { return vec({1.0, 1.0, 0.0}); }});
    try {
        general.shape_indices();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ShapeProjectionUnavailable);
    }
    EXPECT_EQ(cart_translation.shape_indices(), std::vector<Eigen::Index>{0});
    EXPECT_EQ(cart_translation.shape_projection(vec({4.0, 5.0})), vec({4.0}));
}

TEST(SymmetryAction, NonCommutingGeneratorsAreDetected) {
    // ∂/∂x and x ∂/∂y do not commute: [∂x, x∂y] = ∂y.
    const SymmetryAction action(
        3, {[](const Vector&) -> Vector { return vec({1.0, 0.0, 0.0}); },
            [](const Vector& q) -> Vector { return vec({0.0, q[0], 0.0}); }});
    EXPECT_NEAR(generator_commutator_residual(action, vec({0.5, 0.0, 0.0})), 1.0, 1e-6);
}

TEST(LockedInertia, DegenerateGeneratorsRejected) {
    const SymmetryAction degenerate(2, {[](const Vector&) -> Vector { return vec({0.0, 0.0}); }});
    try {
        locked_inertia(cart, degenerate, vec({0.0, 0.0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotPositiveDefinite);
    }
}
