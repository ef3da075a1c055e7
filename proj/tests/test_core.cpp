#include "helpers.hpp"

#include <gtest/gtest.h>

using namespace mixdec;
using mixdec::testing::vec;

TEST(Evaluate, DoublingMap) {
    const auto f = make_system(models::doubling());
    EXPECT_NEAR(evaluate(f, vec({0.3}))[0], 0.6, 1e-15);
}

TEST(Evaluate, CatMapFixedPointAndHalfPoint) {
    const auto f = make_system(models::cat());
    const Vec a = evaluate(f, vec({0.0, 0.0}));
    EXPECT_EQ(a[0], 0.0);
    EXPECT_EQ(a[1], 0.0);
    const Vec b = evaluate(f, vec({0.5, 0.5}));
    EXPECT_NEAR(b[0], 0.5, 1e-15);
    EXPECT_NEAR(b[1], 0.0, 1e-15);
}

TEST(Evaluate, WrongDimensionIsUsageError) {
    const auto f = make_system(models::cat());
    try {
        evaluate(f, vec({0.1}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::usage);
    }
}

TEST(Iterate, DoublingThreeSteps) {
    const auto f = make_system(models::doubling());
    const auto seg = iterate(f, vec({0.1}), 3);
    ASSERT_EQ(seg.points.size(), 4u);
    EXPECT_NEAR(seg.last()[0], 0.8, 1e-14);
}

TEST(Iterate, ZeroStepsIsTheStartPoint) {
    const auto f = make_system(models::doubling());
    const auto seg = iterate(f, vec({0.1}), 0);
    ASSERT_EQ(seg.points.size(), 1u);
    EXPECT_EQ(seg.points[0][0], 0.1);
}

TEST(Iterate, QuarterRotationReturns) {
    const auto f = make_system(models::rotation(0.25));
    EXPECT_NEAR(iterate(f, vec({0.0}), 4).last()[0], 0.0, 1e-15);
}

TEST(Iterate, Concatenation) {
    const auto f = make_system(models::standard(0.7));
    const Vec x = vec({0.123, 0.456});
    const Vec direct = iterate(f, x, 7).last();
    const Vec split = iterate(f, iterate(f, x, 3).last(), 4).last();
    EXPECT_LT(f.domain().distance(direct, split), 1e-12);
}

TEST(Jacobian, AnalyticExamples) {
    const auto cat = make_system(models::cat());
    Mat expected(2, 2);
    expected << 2, 1, 1, 1;
    EXPECT_TRUE(jacobian(cat, vec({0.3, 0.7})).isApprox(expected));
    EXPECT_EQ(jacobian(make_system(models::doubling()), vec({0.4}))(0, 0), 2.0);
    const Mat s = jacobian(make_system(models::standard(0.0)), vec({0.2, 0.9}));
    Mat shear(2, 2);
    shear << 1, 1, 0, 1;
    EXPECT_TRUE(s.isApprox(shear));
}

TEST(Jacobian, FiniteDifferenceFallback) {
    SystemConfig sc = models::cat();
    sc.jacobian.clear();
    const auto f = make_system(sc);
    Mat expected(2, 2);
    expected << 2, 1, 1, 1;
    EXPECT_LT((jacobian(f, vec({0.3, 0.4})) - expected).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SystemCheck, BuiltInModelsPassInverseAndJacobianChecks) {
    for (const auto& sc : {models::cat(), models::rotation(0.25), models::standard(1.2), models::saddle()}) {
        const auto chk = check_system(make_system(sc));
        EXPECT_TRUE(chk.inverse_ok) << sc.map.front();
        EXPECT_TRUE(chk.jacobian_ok) << sc.map.front();
    }
}

TEST(Lipschitz, EstimateCoversOperatorNorm) {
    SystemConfig sc = models::cat();
    sc.lipschitz.reset();
    const auto f = make_system(sc);
    EXPECT_NEAR(f.lipschitz(), 1.5 * (3.0 + std::sqrt(5.0)) / 2.0, 1e-6);
}

TEST(Domain, WrapAndDisplacement) {
    const Domain t = Domain::torus(1);
    EXPECT_NEAR(t.wrap(vec({1.25}))[0], 0.25, 1e-15);
    EXPECT_NEAR(t.wrap(vec({-0.25}))[0], 0.75, 1e-15);
    EXPECT_NEAR(t.displacement(vec({0.95}), vec({0.05}))[0], 0.1, 1e-15);
}

TEST(Expression, ParsesArithmeticAndFunctions) {
    const auto f = MapSystem::from_expressions(Domain({-10.0}, {10.0}, {false}), {"2*sin(x1) + exp(0)/4 - 3*x1^2"});
    const double x = 0.3;
    EXPECT_NEAR(evaluate(f, vec({x}))[0], 2 * std::sin(x) + 0.25 - 3 * x * x, 1e-15);
}

TEST(Expression, SyntaxErrorIsUsageError) {
    try {
        MapSystem::from_expressions(Domain::torus(1), {"2*(x1"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::usage);
    }
    EXPECT_THROW(MapSystem::from_expressions(Domain::torus(1), {"x2"}), Error);
}

TEST(Config, RoundTripsModelsThroughToml) {
    for (const auto& sc : {models::cat(), models::doubling(), models::saddle()}) {
        const auto back = read_system_config(Config::parse(models::to_toml(sc)));
        EXPECT_EQ(back.map, sc.map);
        EXPECT_EQ(back.inverse, sc.inverse);
        EXPECT_EQ(back.domain.lo, sc.domain.lo);
        EXPECT_EQ(back.domain.periodic, sc.domain.periodic);
    }
}

TEST(Config, SectionsAndComments) {
    const auto cfg = Config::parse("dimension = 1 # circle\n[surgery]\ntheta = 0.25\nname = \"a#b\"\n");
    EXPECT_EQ(cfg.at("dimension").number("dimension"), 1.0);
    EXPECT_EQ(cfg.number_or("surgery.theta", 0.0), 0.25);
    EXPECT_EQ(cfg.at("surgery.name").string("surgery.name"), "a#b");
}

TEST(Config, MissingKeyIsUsageError) {
    try {
        read_system_config(Config::parse("dimension = 1\n"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::usage);
    }
}
