#include "hbs/impact.hpp"
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
const Guard interior = Guard::coordinate(2, 0, 0.0, Crossing::Both, "interior");
const Guard exterior = Guard::coordinate(2, 1, 0.0, Crossing::Both, "exterior");
const Guard horizontal = pendulum_cart_horizontal_guard(1.0, 1.0, 1.0, 0.0);

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::ValidationError;
}

} // namespace

TEST(ImpactMomentum, Examples) {
    const auto in = resolve_impact_momentum(cart, interior, {vec({0.0, 0.0}), vec({1.0, 1.0})});
    EXPECT_NEAR(in.alpha, -1.0, 1e-15);
    EXPECT_NEAR((in.post.p - vec({0.0, 1.0})).norm(), 0.0, 1e-15);

    const auto ex = resolve_impact_momentum(cart, exterior, {vec({0.0, 0.0}), vec({1.0, 2.0})});
    EXPECT_NEAR(ex.alpha, -2.0, 1e-15);
    EXPECT_NEAR((ex.post.p - vec({1.0, 0.0})).norm(), 0.0, 1e-15);

    const auto hz = resolve_impact_momentum(cart, horizontal, {vec({0.0, 0.0}), vec({1.0, 1.0})});
    EXPECT_NEAR(hz.alpha, -2.0, 1e-15);
    EXPECT_NEAR((hz.post.p - vec({0.0, -1.0})).norm(), 0.0, 1e-15);

    const Guard wall = Guard::coordinate(2, 0, 0.0, Crossing::Both, "wall");
    const auto fp = resolve_impact_momentum(free_particle_2d(), wall, {vec({0.0, 0.5}), vec({-3.0, 4.0})});
    EXPECT_EQ(fp.post.p, vec({3.0, 4.0}));
}

TEST(ImpactVelocity, Examples) {
    const auto in = resolve_impact_velocity(cart, interior, {vec({0.0, 0.0}), vec({1.0, 0.0})});
    EXPECT_NEAR((in.post.v - vec({-1.0, 1.0})).norm(), 0.0, 1e-14);
    const auto ex = resolve_impact_velocity(cart, exterior, {vec({0.0, 0.0}), vec({0.0, 1.0})});
    EXPECT_NEAR((ex.post.v - vec({2.0, -1.0})).norm(), 0.0, 1e-14);
    const auto hz = resolve_impact_velocity(cart, horizontal, {vec({0.0, 0.0}), vec({1.0, 0.0})});
    EXPECT_NEAR((hz.post.v - vec({1.0, -1.0})).norm(), 0.0, 1e-14);
}

TEST(ImpactMomentum, Errors) {
    EXPECT_EQ(kind_of([] { resolve_impact_momentum(cart, interior, {vec({0.1, 0.0}), vec({1.0, 1.0})}); }),
              ErrorKind::OffSurface);
    // At θ = 0, p = (1, 2) has θ̇ = 0: tangent to the wall.
    EXPECT_EQ(kind_of([] { resolve_impact_momentum(cart, interior, {vec({0.0, 0.0}), vec({1.0, 2.0})}); }),
              ErrorKind::GrazingImpact);
    EXPECT_EQ(kind_of([] {
                  const Guard g("flat", 2, [](const Vector& q) { return q[0] * q[0]; });
                  resolve_impact_momentum(cart, g, {vec({0.0, 0.0}), vec({1.0, 1.0})});
              }),
              ErrorKind::DegenerateGradient);
    EXPECT_EQ(kind_of([] { resolve_impact_momentum(cart, interior, {vec({0.0, 0.0}), vec({NAN, 1.0})}); }),
              ErrorKind::NonFiniteInput);
}

TEST(ImpactMomentum, PropertiesOnRandomStates) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (const auto* guard : {&interior, &exterior, &horizontal}) {
        for (int i = 0; i < 300; ++i) {
            const ChartPoint q = guard->project_onto_surface(vec({u(rng), u(rng)}));
            const MomentumState s{q, vec({u(rng), u(rng)})};
            const auto out = resolve_impact_momentum(cart, *guard, s);
            EXPECT_LE(std::abs(out.energy_post - out.energy_pre), 1e-10 * std::max(1.0, std::abs(out.energy_pre)));

            const Vector n = guard->gradient(q).normalized();
            const Vector dp = out.post.p - s.p;
            EXPECT_LE((dp - dp.dot(n) * n).norm(), 1e-12 * std::max(1.0, dp.norm()));

            const auto back = resolve_impact_momentum(cart, *guard, out.post);
            EXPECT_LE((back.post.p - s.p).norm(), 1e-10 * std::max(1.0, s.p.norm()));

            const auto vel = resolve_impact_velocity(cart, *guard, legendre_to_velocity(cart, s));
            EXPECT_LE((vel.post.v - legendre_to_velocity(cart, out.post).v).norm(),
                      1e-11 * std::max(1.0, vel.post.v.norm()));
        }
    }
}

TEST(ImpactMomentum, MatchesClosedFormMaps) {
    const oracle::PendulumCart pc{0.8, 3.1, 1.6};
    const auto sys = pendulum_cart(pc.m, pc.M, pc.l, 9.8);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const double th = u(rng);
        const Vector p = vec({u(rng), u(rng)});
        const Guard in = Guard::coordinate(2, 0, th, Crossing::Both, "in");
        const Vector post = resolve_impact_momentum(sys, in, {vec({th, 0.2}), p}).post.p;
        EXPECT_LE((post - Vector(pc.interior_momentum(th, p))).norm(), 1e-12 * std::max(1.0, p.norm()));

        const Guard ex = Guard::coordinate(2, 1, 0.2, Crossing::Both, "ex");
        const Vector post_ex = resolve_impact_momentum(sys, ex, {vec({th, 0.2}), p}).post.p;
        EXPECT_LE((post_ex - Vector(pc.exterior_momentum(th, p))).norm(), 1e-12 * std::max(1.0, p.norm()));
    }
}

TEST(ImpactMomentum, FlatWallIsSpecular) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g;
    for (int i = 0; i < 100; ++i) {
        const Vector n = vec({g(rng), g(rng)}).normalized();
        const Guard wall = Guard::affine(n, 0.3, Crossing::Both, "oblique");
        const Vector p = vec({g(rng), g(rng)});
        const auto out = resolve_impact_momentum(free_particle_2d(), wall, {0.3 * n, p});
        EXPECT_LE((out.post.p - oracle::specular(n, p)).norm(), 1e-12);
    }
}

TEST(Guard, FiniteDifferenceGradientFallback) {
    const Guard g("circle", 2, [](const Vector& q) { return q.squaredNorm() - 1.0; });
    const Vector grad = g.gradient(vec({0.6, 0.8}));
    EXPECT_NEAR((grad - vec({1.2, 1.6})).norm(), 0.0, 1e-8);
    const auto samples = g.surface_samples(10);
    ASSERT_EQ(samples.size(), 10u);
    for (const auto& q : samples) EXPECT_LE(std::abs(g.value(q)), 1e-13);
    EXPECT_EQ(samples, g.surface_samples(10));
}

TEST(Guard, CrossingParsing) {
    EXPECT_EQ(parse_crossing("increasing"), Crossing::Increasing);
    EXPECT_EQ(parse_crossing("decreasing"), Crossing::Decreasing);
    EXPECT_EQ(parse_crossing("both"), Crossing::Both);
    EXPECT_THROW(parse_crossing("sideways"), Error);
}

TEST(Classification, BuiltinGuards) {
    const auto in = Guard::coordinate(2, 0, 0.4, Crossing::Both, "interior");
    const auto ex = Guard::coordinate(2, 1, 1.5, Crossing::Both, "exterior");
    EXPECT_EQ(classify_guard(cart, cart_translation, in, in.surface_samples(16)).kind, GuardKind::Vertical);
    const auto ex_class = classify_guard(cart, cart_translation, ex, ex.surface_samples(16));
    EXPECT_EQ(ex_class.kind, GuardKind::Neither);
    const auto hz_class = classify_guard(cart, cart_translation, horizontal, horizontal.surface_samples(16));
    EXPECT_EQ(hz_class.kind, GuardKind::Horizontal);
    EXPECT_LE(hz_class.max_horizontal_residual, 1e-12);
    EXPECT_EQ(hz_class.samples.size(), 16u);
}

TEST(Classification, ReproducibleAndValidated) {
    const auto samples = horizontal.surface_samples(16);
    const auto a = classify_guard(cart, cart_translation, horizontal, samples);
    const auto b = classify_guard(cart, cart_translation, horizontal, samples);
    EXPECT_EQ(a.max_horizontal_residual, b.max_horizontal_residual);
    EXPECT_EQ(a.max_vertical_residual, b.max_vertical_residual);
    EXPECT_THROW(classify_guard(cart, cart_translation, interior, {}), Error);
    EXPECT_EQ(kind_of([] { classify_guard(cart, cart_translation, interior, {vec({0.5, 0.0})}); }),
              ErrorKind::OffSurface);
}

TEST(Classification, MixedVerdictsAreNeither) {
    // h = θ − x² is tangent to the fibers only where x = 0.
    const Guard g("bent", 2, [](const Vector& q) { return q[0] - q[1] * q[1]; },
                  [](const Vector& q) -> Vector { return vec({1.0, -2.0 * q[1]}); });
    const std::vector<ChartPoint> samples{vec({0.0, 0.0}), vec({1.0, 1.0})};
    const auto c = classify_guard(cart, cart_translation, g, samples);
    EXPECT_EQ(c.kind, GuardKind::Neither);
    EXPECT_FALSE(c.consistent);
    EXPECT_TRUE(c.samples[0].vertical);
    EXPECT_FALSE(c.samples[1].vertical);
}
