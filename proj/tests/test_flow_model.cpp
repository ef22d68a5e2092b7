#include "pdfflow/catalog.hpp"
#include "pdfflow/flow_model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pdfflow;

namespace {

ConditionalStatistics make_stats(RhoFn rho, std::string name = "test")
{
    ConditionalStatistics s;
    s.name = std::move(name);
    s.rho = std::move(rho);
    s.sigma = [](const Vec3&, const Vec3&, const Vec3&, double) -> Mat3 { return Mat3::Identity(); };
    return s;
}

ConditionalStatistics linear_rho(const Mat3& G)
{
    return make_stats([G](const Vec3& x, const Vec3& y, const Vec3&, double) -> Vec3 { return G * (y - x); });
}

ConditionalStatistics cubic_rho()
{
    return make_stats([](const Vec3& x, const Vec3& y, const Vec3&, double) -> Vec3 {
        const Vec3 d = y - x;
        return d * d.squaredNorm();
    });
}

ConditionalStatistics quartic_rho()
{
    return make_stats([](const Vec3& x, const Vec3& y, const Vec3&, double) -> Vec3 {
        const Vec3 d = y - x;
        return d.array().pow(4).matrix();
    });
}

const Vec3 x0(0.3, -0.4, 1.2), u0(0.5, 1.0, -0.7);

} // namespace

TEST(EvalB, DiagonalReturnsU)
{
    const auto s = catalog::quadratic_rho_statistics();
    EXPECT_EQ(eval_b(s, x0, x0, u0, 0.5), u0);
    EXPECT_EQ(eval_b(catalog::zero_statistics(), x0, Vec3(5, 5, 5), u0, 0.5), u0);
}

TEST(EvalB, LinearRho)
{
    const auto s = linear_rho(Mat3::Identity());
    const Vec3 b = eval_b(s, Vec3::Zero(), Vec3(0.1, 0, 0), Vec3(1, 2, 3), 0.0);
    EXPECT_NEAR(b[0], 1.1, 1e-15);
    EXPECT_EQ(b[1], 2.0);
    EXPECT_EQ(b[2], 3.0);
}

TEST(EvalB, NonFiniteRhoIsReported)
{
    const auto s = make_stats([](const Vec3&, const Vec3&, const Vec3&, double) -> Vec3 {
        return Vec3::Constant(std::nan(""));
    });
    EXPECT_THROW(eval_b(s, x0, x0, u0, 0.0), NumericError);
    EXPECT_THROW(eval_B(s, x0, u0, 0.0), NumericError);
}

TEST(EvalBGradient, ZeroRho)
{
    EXPECT_EQ(eval_B(catalog::zero_statistics(), x0, u0, 0.0), Mat3::Zero());
    EXPECT_EQ(eval_A(catalog::zero_statistics(), x0, u0, 0.0), Vec3::Zero());
}

TEST(EvalBGradient, LinearRhoGivesG)
{
    const Mat3 G = Vec3(1, 2, 3).asDiagonal();
    const Mat3 B = eval_B(linear_rho(G), x0, u0, 0.0);
    EXPECT_LT((B - G).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(EvalBGradient, CubicRhoVanishesAtOrderTwo)
{
    const auto s = cubic_rho();
    EXPECT_LT(eval_B(s, x0, u0, 0.0).cwiseAbs().maxCoeff(), 1e-6);
    const double e1 = eval_B(s, x0, u0, 0.0, 1e-2).cwiseAbs().maxCoeff();
    const double e2 = eval_B(s, x0, u0, 0.0, 5e-3).cwiseAbs().maxCoeff();
    EXPECT_GE(e1 / e2, 3.5);
    EXPECT_LE(e1 / e2, 4.5);
}

TEST(EvalBGradient, StepUnderflow)
{
    EXPECT_THROW(eval_B(cubic_rho(), x0, u0, 0.0, 1e-13), DomainError);
}

TEST(EvalA, QuadraticRhoGivesTwo)
{
    const Vec3 A = eval_A(catalog::quadratic_rho_statistics(), x0, u0, 0.0);
    EXPECT_LT((A - Vec3::Constant(2.0)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(EvalA, QuarticRhoConvergesAtOrderTwo)
{
    const auto s = quartic_rho();
    const double e1 = eval_A(s, x0, u0, 0.0, 1e-2).cwiseAbs().maxCoeff();
    const double e2 = eval_A(s, x0, u0, 0.0, 5e-3).cwiseAbs().maxCoeff();
    EXPECT_GE(e1 / e2, 3.5);
    EXPECT_LE(e1 / e2, 4.5);
}

TEST(EvalA, ShowcaseRhoGivesZero)
{
    EXPECT_EQ(eval_A(showcase::statistics(), x0, u0, 0.3), Vec3::Zero());
}

TEST(EvalQ, ConstantSecondMomentGivesExactZero)
{
    // rho = 0 and sigma constant: sigma + u u^T does not depend on y
    EXPECT_EQ(eval_Q(catalog::zero_statistics(), x0, u0, 0.1), Vec3::Zero());
}

TEST(EvalQ, RadialTensorVanishes)
{
    auto s = catalog::zero_statistics();
    s.sigma = [](const Vec3& x, const Vec3& y, const Vec3&, double) -> Mat3 {
        return Mat3::Identity() * std::exp(-(y - x).squaredNorm());
    };
    const QuadratureConfig q;
    EXPECT_LT(eval_Q(s, x0, u0, 0.0, q).cwiseAbs().maxCoeff(), q.tolerance);
}

TEST(EvalQ, NewtonianOracle)
{
    const auto s = catalog::anisotropic_gaussian_statistics();
    for (const Vec3& x : {Vec3(Vec3::Zero()), x0}) {
        const Vec3 q = eval_Q(s, x, Vec3::Zero(), 0.0);
        EXPECT_NEAR(q[0], -1.0, 1e-4);
        EXPECT_NEAR(q[1], 0.0, 1e-4);
        EXPECT_NEAR(q[2], 0.0, 1e-4);
    }
}

TEST(EvalQ, RadiusDoublingAgrees)
{
    QuadratureConfig q;
    q.check_radius = true;
    const auto r = eval_Q_detail(catalog::anisotropic_gaussian_statistics(), x0, Vec3::Zero(), 0.0, q);
    EXPECT_TRUE(r.converged);
}

TEST(EvalC, ShowcaseStatisticsGiveZero)
{
    FlowSpec f = showcase::flow();
    f.drift.reset();
    const auto c = eval_C(f, x0, Vec3(0.5, 0.5, 0.3), 0.5);
    EXPECT_LT(c.C.cwiseAbs().maxCoeff(), 1e-5);
    ASSERT_TRUE(c.B && c.A && c.Q);
}

TEST(EvalC, QuadraticRhoGivesMinusA)
{
    FlowSpec f;
    f.name = "q";
    f.viscosity = 1.0;
    f.statistics = catalog::quadratic_rho_statistics();
    const auto c = eval_C(f, x0, u0, 0.0);
    EXPECT_LT((c.C - Vec3::Constant(-2.0)).cwiseAbs().maxCoeff(), 1e-5);
    const DriftField closed = catalog::statistics("quadratic-rho").closed_form_drift(1.0);
    EXPECT_LT((closed(x0, u0, 0.0) - c.C).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(EvalC, InviscidCIsQ)
{
    FlowSpec f;
    f.name = "a";
    f.viscosity = 0.0;
    f.regime = Regime::inviscid;
    f.statistics = catalog::anisotropic_gaussian_statistics();
    const auto c = eval_C(f, x0, u0, 0.0);
    EXPECT_EQ(c.C, *c.Q);
}

TEST(EvalC, DirectDriftMarksCoefficientsAbsent)
{
    FlowSpec f;
    f.name = "d";
    f.drift = damping_drift(2.0);
    const auto c = eval_C(f, x0, u0, 0.0);
    EXPECT_FALSE(c.B.has_value());
    EXPECT_FALSE(c.Q.has_value());
    EXPECT_EQ(c.C, Vec3(-2.0 * u0));
}

TEST(FlowSpec, InviscidRequiresZeroViscosity)
{
    FlowSpec f;
    f.name = "bad";
    f.viscosity = 1.0;
    f.regime = Regime::inviscid;
    f.drift = zero_drift();
    EXPECT_THROW(f.validate(), ConfigError);
    f.viscosity = 0.0;
    EXPECT_NO_THROW(f.validate());
}

TEST(FlowSpec, IsotropicRequiresXIndependentDrift)
{
    FlowSpec f;
    f.name = "iso";
    f.regime = Regime::weakly_isotropic;
    LinearCModel m;
    for (auto& ax : m.axes) {
        ax.a = -1.0;
        ax.b = 0.5;
    }
    f.drift = linear_drift(m);
    EXPECT_THROW(f.validate(), ConfigError);
    f.drift = damping_drift(1.0);
    EXPECT_NO_THROW(f.validate());
}

TEST(FlowSpec, NeedsStatisticsOrDrift)
{
    FlowSpec f;
    f.name = "empty";
    EXPECT_THROW(f.validate(), ConfigError);
}

TEST(Diffusion, ZeroB)
{
    const auto d = diffusion_matrix(Mat3::Zero(), 1.0);
    EXPECT_EQ((Mat3(d.D.topLeftCorner<3, 3>())), Mat3::Zero());
    EXPECT_EQ((Mat3(d.D.bottomRightCorner<3, 3>())), Mat3::Identity());
    EXPECT_TRUE(d.symmetric);
    EXPECT_TRUE(d.psd);
}

TEST(Diffusion, IdentityBIsIndefinite)
{
    const auto d = diffusion_matrix(Mat3::Identity(), 1.0);
    EXPECT_TRUE(d.symmetric);
    EXPECT_FALSE(d.psd);
    // 2x2 blocks [[0, 1], [1, 1]]: eigenvalues (1 +- sqrt 5) / 2, each three times
    const double lo = (1.0 - std::sqrt(5.0)) / 2.0, hi = (1.0 + std::sqrt(5.0)) / 2.0;
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(d.eigenvalues[i], lo, 1e-12);
        EXPECT_NEAR(d.eigenvalues[i + 3], hi, 1e-12);
    }
}

TEST(Diffusion, SingleOffDiagonalEntryIsNotSymmetric)
{
    Mat3 B = Mat3::Zero();
    B(0, 1) = 1.0;
    const auto d = diffusion_matrix(B, 1.0);
    EXPECT_FALSE(d.symmetric);
}

namespace {

std::vector<SamplePoint> samples()
{
    return {{Vec3(0, 0, 0), Vec3(0.3, 0.2, -0.1), Vec3(0.5, 0.5, 0.3), 0.5},
            {Vec3(1, -1, 0.5), Vec3(1.4, -0.7, 0.2), Vec3(-0.2, 0.1, 1.0), 1.0}};
}

} // namespace

TEST(Classify, ZeroStatisticsAreHomogeneousAndIsotropic)
{
    const auto r = classify_flow(catalog::zero_statistics(), samples(), 1e-8);
    EXPECT_TRUE(r.weakly_homogeneous);
    EXPECT_TRUE(r.weakly_isotropic);
    EXPECT_EQ(r.tag, StatisticsClass::weakly_isotropic);
}

TEST(Classify, TracelessLinearRho)
{
    const Mat3 G = Vec3(1, -1, 0).asDiagonal();
    const auto r = classify_flow(linear_rho(G), samples(), 1e-6);
    EXPECT_FALSE(r.weakly_homogeneous);
    EXPECT_TRUE(r.divergence_free);
    EXPECT_NEAR(r.max_abs_B, 1.0, 1e-8);
}

TEST(Classify, ShowcaseIsHomogeneousButDirectional)
{
    // f is flat near 0, so the direction dependence only shows at |y - x| ~ 1
    auto pts = samples();
    pts.push_back({Vec3(0.2, 0.1, 0), Vec3(1.4, 1.0, -1.0), Vec3(0.5, 0.5, 0.3), 0.5});
    const auto r = classify_flow(showcase::statistics(), pts, 1e-8);
    EXPECT_TRUE(r.weakly_homogeneous);
    EXPECT_FALSE(r.weakly_isotropic);
    EXPECT_GT(r.sigma_rotation_deviation, 1e-8);
    bool mentions = false;
    for (const auto& n : r.notes)
        mentions = mentions || n.find("sigma depends on the direction") != std::string::npos;
    EXPECT_TRUE(mentions);
}

TEST(Classify, LocallyIsotropicRhoHasZeroB)
{
    // rho depends on |y - x| and u only
    const auto s = make_stats([](const Vec3& x, const Vec3& y, const Vec3& u, double) -> Vec3 {
        const double r2 = (y - x).squaredNorm();
        return u * r2;
    });
    const auto r = classify_flow(s, samples(), 1e-6);
    EXPECT_TRUE(r.weakly_homogeneous);
    EXPECT_LT(r.rho_rotation_deviation, 1e-12);
}

TEST(Classify, NeedsSamples)
{
    EXPECT_THROW(classify_flow(catalog::zero_statistics(), {}, 1e-8), DomainError);
}

TEST(Catalog, UnknownNameListsKnownOnes)
{
    try {
        catalog::statistics("nope");
        FAIL();
    }
    catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("anisotropic-gaussian"), std::string::npos);
    }
}

TEST(Catalog, GaussianDensityIsNormalised)
{
    const auto d = catalog::gaussian_density(Vec3(0.1, 0.2, 0.3), Vec3(0.5, 1.0, 2.0));
    EXPECT_NEAR(d(Vec3(0.1, 0.2, 0.3), Vec3::Zero()), 1.0 / (std::pow(2.0 * std::numbers::pi, 1.5)), 1e-15);
    EXPECT_THROW(catalog::gaussian_density(Vec3::Zero(), Vec3(1, 0, 1)), ConfigError);
}
