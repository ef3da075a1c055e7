#include "helpers.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace mixdec;
using mixdec::testing::vec;

namespace {

const double golden = (1.0 + std::sqrt(5.0)) / 2.0;

struct Cat {
    MapSystem f = make_system(models::cat());
    PeriodicOrbit fixed = find_periodic_orbits(f, 1).at(0);
};

const Cat& cat() {
    static const Cat c;
    return c;
}

struct Saddle {
    MapSystem f = make_system(models::saddle());
    PeriodicOrbit origin = find_periodic_orbits(f, 1).at(0);
};

const Saddle& saddle() {
    static const Saddle s;
    return s;
}

}  // namespace

TEST(FindPeriodicOrbits, CatFixedPoint) {
    const auto& c = cat();
    ASSERT_EQ(find_periodic_orbits(c.f, 1).size(), 1u);
    EXPECT_EQ(c.fixed.period, 1);
    EXPECT_LT(c.fixed.points[0].norm(), 1e-12);
    EXPECT_NEAR(c.fixed.multipliers[0].real(), (3.0 + std::sqrt(5.0)) / 2.0, 1e-10);
    EXPECT_NEAR(c.fixed.multipliers[1].real(), (3.0 - std::sqrt(5.0)) / 2.0, 1e-10);
    EXPECT_EQ(c.fixed.multipliers[0].imag(), 0.0);
    EXPECT_LT(c.fixed.residual, 1e-10);
}

TEST(FindPeriodicOrbits, DoublingUpToPeriodTwo) {
    const auto orbits = find_periodic_orbits(make_system(models::doubling()), 2);
    ASSERT_EQ(orbits.size(), 2u);
    EXPECT_EQ(orbits[0].period, 1);
    EXPECT_NEAR(orbits[0].points[0][0], 0.0, 1e-12);
    EXPECT_EQ(orbits[1].period, 2);
    EXPECT_NEAR(orbits[1].points[0][0], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(orbits[1].points[1][0], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(orbits[1].multipliers[0].real(), 4.0, 1e-10);
}

TEST(FindPeriodicOrbits, QuarterRotationHasOnlyPeriodFour) {
    const auto orbits = find_periodic_orbits(make_system(models::rotation(0.25)), 4);
    ASSERT_FALSE(orbits.empty());
    for (const auto& o : orbits) {
        EXPECT_EQ(o.period, 4);
        EXPECT_LT(o.residual, 1e-15);
        EXPECT_NEAR(std::abs(o.multipliers[0]), 1.0, 1e-12);
    }
}

TEST(FindPeriodicOrbits, CatLinearMultipliersAtPeriodTwo) {
    const auto orbits = find_periodic_orbits(cat().f, 2);
    const double lambda = (3.0 + std::sqrt(5.0)) / 2.0;
    for (const auto& o : orbits) {
        EXPECT_LT(o.residual, 1e-10);
        EXPECT_NEAR(o.multipliers[0].real(), std::pow(lambda, o.period), 1e-9);
    }
}

TEST(FindPeriodicOrbits, RejectsBadPeriod) { EXPECT_THROW(find_periodic_orbits(cat().f, 0), Error); }

TEST(Classify, Examples) {
    EXPECT_EQ(classify({Complex(2.0, 0.0), Complex(0.5, 0.0)}).verdict, Verdict::hyperbolic);
    EXPECT_EQ(classify({Complex(1.0, 0.0), Complex(0.5, 0.0)}).verdict, Verdict::resonant);
    const double a = 2.0 * std::numbers::pi / 3.0;
    const auto r = classify({std::polar(1.0, a), std::polar(1.0, -a)});
    EXPECT_EQ(r.verdict, Verdict::resonant);
    ASSERT_TRUE(r.relation);
    int total = 0;
    for (int k : *r.relation) total += k;
    EXPECT_EQ(total, 3);
    // An irrational angle has no relation up to K_max.
    EXPECT_EQ(classify({std::polar(1.0, std::sqrt(2.0)), std::polar(1.0, -std::sqrt(2.0))}).verdict,
              Verdict::non_resonant);
}

TEST(GrowManifold, CatUnstableBranchFollowsTheEigenline) {
    const auto& c = cat();
    const auto curve = grow_manifold(c.f, c.fixed, Stability::unstable, 1);
    ASSERT_GT(curve.points.size(), 10u);
    const double h = Tolerances{}.manifold_gap;
    // Unwrapped, the branch is the line y = x / golden through the origin.
    Vec prev = curve.points[0], pos = curve.points[0];
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const Vec step = c.f.domain().displacement(prev, curve.points[i]);
        EXPECT_LE(step.norm(), h * (1.0 + 1e-9));
        pos += step;
        prev = curve.points[i];
        EXPECT_LT(std::abs(pos[1] - pos[0] / golden) / std::sqrt(1.0 + 1.0 / (golden * golden)), h);
    }
    const Vec first = c.f.domain().displacement(curve.points[0], curve.points[1]).normalized();
    EXPECT_GT(std::abs(first.dot(curve.direction)), std::cos(10.0 * std::numbers::pi / 180.0));
}

TEST(GrowManifold, SaddleBranchesFollowTheAxes) {
    const auto& s = saddle();
    for (int b : {1, -1}) {
        const auto u = grow_manifold(s.f, s.origin, Stability::unstable, b);
        const auto st = grow_manifold(s.f, s.origin, Stability::stable, b);
        for (const auto& x : u.points) EXPECT_LT(std::abs(x[1]), 1e-12);
        for (const auto& x : st.points) EXPECT_LT(std::abs(x[0]), 1e-12);
        EXPECT_TRUE(u.complete);
        EXPECT_GT(std::abs(u.points.back()[0]), 0.49);
    }
}

TEST(GrowManifold, RejectsBadBranch) { EXPECT_THROW(grow_manifold(cat().f, cat().fixed, Stability::stable, 0), Error); }

TEST(FindCrossings, TwoSegmentsMeetingAtRightAngle) {
    const Domain box({-1.0, -1.0}, {1.0, 1.0}, {false, false});
    const std::vector<Vec> a{vec({-0.5, 0.0}), vec({0.5, 0.0})};
    const std::vector<Vec> b{vec({0.1, -0.5}), vec({0.1, 0.5})};
    const auto scan = find_crossings(box, a, b, 5.0);
    ASSERT_EQ(scan.transverse.size(), 1u);
    EXPECT_NEAR(scan.transverse[0].point[0], 0.1, 1e-15);
    EXPECT_NEAR(scan.transverse[0].point[1], 0.0, 1e-15);
}

TEST(FindCrossings, NearTangencyIsNotCounted) {
    const Domain box({-1.0, -1.0}, {1.0, 1.0}, {false, false});
    const std::vector<Vec> a{vec({-0.5, 0.0}), vec({0.5, 0.0})};
    const std::vector<Vec> b{vec({-0.5, -0.01}), vec({0.5, 0.01})};  // about 1.1 degrees
    const auto scan = find_crossings(box, a, b, 5.0);
    EXPECT_TRUE(scan.transverse.empty());
}

TEST(IntersectionTimes, CatFixedPoint) {
    const auto& c = cat();
    const auto t = intersection_times(c.f, c.fixed, c.fixed, 3);
    EXPECT_EQ(t.times, (std::vector<int>{-3, -2, -1, 0, 1, 2, 3}));
    EXPECT_EQ(t.ell, 1);
    EXPECT_FALSE(t.inconclusive);
    EXPECT_EQ(t.closure_violations, 0);
    EXPECT_EQ(t.translation_violations, 0);
    EXPECT_EQ(t.symmetry_violations, 0);
    for (int n : t.times) EXPECT_EQ(n % t.ell, 0);
}

TEST(IntersectionTimes, SaddleIsInconclusive) {
    const auto& s = saddle();
    const auto t = intersection_times(s.f, s.origin, s.origin, 2);
    EXPECT_TRUE(t.times.empty());
    EXPECT_TRUE(t.inconclusive);
    EXPECT_EQ(t.ell, 0);
}

// Distance on the torus from x to the projected segment {t v : |t| <= len}.
double distance_to_leaf(const Vec& x, const Vec& v, double len) {
    double best = 1e9;
    for (int i = -4; i <= 4; ++i)
        for (int j = -4; j <= 4; ++j) {
            const Vec y = x + vec({double(i), double(j)});
            const double t = std::clamp(y.dot(v), -len, len);
            best = std::min(best, (y - t * v).norm());
        }
    return best;
}

TEST(PointwiseClass, CatSampleLiesOnBothLinearLeaves) {
    const auto& c = cat();
    const ManifoldOptions opt;
    const auto sample = pointwise_class(c.f, c.fixed, c.fixed, opt);
    ASSERT_GE(sample.size(), 11u);
    EXPECT_LT(sample[0].norm(), 1e-12);
    // The cat manifolds through 0 are the eigenlines, wrapped around the torus.
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    const Vec vu = vec({phi, 1.0}).normalized();
    const Vec vs = vec({1.0, -phi}).normalized();
    for (const auto& x : sample) {
        EXPECT_LT(distance_to_leaf(x, vu, opt.arclength_budget + 1.0), 1e-9) << x.transpose();
        EXPECT_LT(distance_to_leaf(x, vs, opt.arclength_budget + 1.0), 1e-9) << x.transpose();
    }
}

TEST(PointwiseClass, SaddleHasNoHomoclinicPoints) {
    const auto& s = saddle();
    try {
        pointwise_class(s.f, s.origin, s.origin);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::computation);
    }
}

TEST(DetectCycle, Examples) {
    const auto& c = cat();
    EXPECT_EQ(detect_cycle(c.f, c.fixed, c.fixed).verdict, Tristate::yes);
    const auto& s = saddle();
    EXPECT_EQ(detect_cycle(s.f, s.origin, s.origin).verdict, Tristate::no);
}

TEST(DetectCycle, StandardMapSaddlesStayInconclusive) {
    const auto f = make_system(models::standard(1.2));
    std::vector<PeriodicOrbit> saddles;
    for (const auto& o : find_periodic_orbits(f, 2))
        if (classify(o).verdict == Verdict::hyperbolic) saddles.push_back(o);
    ASSERT_EQ(saddles.size(), 2u);
    EXPECT_EQ(detect_cycle(f, saddles[0], saddles[1]).verdict, Tristate::inconclusive);
}

TEST(KSet, DoublingEllTwo) {
    const auto f = make_system(models::doubling());
    const auto k = k_set(f, 2, {}, 3);
    std::multiset<int> periods;
    for (const auto& o : k) periods.insert(o.period);
    EXPECT_EQ(periods, (std::multiset<int>{1, 3, 3}));
    EXPECT_TRUE(k_set(f, 1, {}, 3).empty());
    const Box far{vec({0.6}), vec({0.62})};
    EXPECT_TRUE(k_set(f, 2, {far}, 3).empty());
}
