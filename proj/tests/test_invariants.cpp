#include "pdfflow/estimator.hpp"
#include "pdfflow/invariants.hpp"
#include "pdfflow/showcase_core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace pdfflow;
using showcase::alpha;

namespace {

Vec3 alpha_sd() { return showcase::spec().sigma_diag.cwiseSqrt(); }

double heat_gaussian(const Vec3& z, double var)
{
    return std::exp(-0.5 * z.squaredNorm() / var) / std::pow(2.0 * std::numbers::pi * var, 1.5);
}

bool has_note(const VerificationReport& r, const std::string& text)
{
    for (const auto& n : r.notes)
        if (n.find(text) != std::string::npos)
            return true;
    return false;
}

} // namespace

TEST(Report, FinishSemantics)
{
    VerificationReport r;
    r.tolerance = 1.0;
    r.value = 2.0;
    r.assertable = true;
    EXPECT_EQ(r.finish().status, Status::fail);
    EXPECT_FALSE(r.ok());
    r.assertable = false;
    EXPECT_EQ(r.finish().status, Status::warn);
    EXPECT_TRUE(r.ok());
    r.value = 0.5;
    EXPECT_EQ(r.finish().status, Status::pass);
    r.notes.push_back("something");
    EXPECT_EQ(r.finish().status, Status::warn);
    r.value = std::nan("");
    r.assertable = true;
    EXPECT_EQ(r.finish().status, Status::fail);
    EXPECT_THROW(r.get("missing"), Error);
}

TEST(Plans, CompositeRule)
{
    const auto ax = composite_rule({0.0, 3.0}, 2, 1.0);
    ASSERT_EQ(ax.rule.size(), 6u);
    double w = 0.0;
    for (double v : ax.rule.weights)
        w += v;
    EXPECT_NEAR(w, 3.0, 1e-14);
    EXPECT_TRUE(ax.edge[0] && ax.edge[1] && ax.edge[4] && ax.edge[5]);
    EXPECT_FALSE(ax.edge[2] || ax.edge[3]);
    EXPECT_THROW(composite_rule({1.0}, 2, 1.0), DomainError);
    EXPECT_THROW(composite_rule({1.0, 0.0}, 2, 1.0), DomainError);
}

TEST(Plans, GaussianPlanIntegratesPolynomialTimesGaussian)
{
    const Vec3 mean(0.5, -1.0, 2.0), sd(0.7, 1.3, 2.0);
    const auto plan = gaussian_plan(mean, sd, 10);
    auto g = [&](const Vec3& u) {
        double v = 1.0;
        for (int a = 0; a < 3; ++a) {
            const double z = (u[a] - mean[a]) / sd[a];
            v *= std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sd[a]);
        }
        return v;
    };
    EXPECT_NEAR(plan.integrate(g), 1.0, 1e-12);
    EXPECT_NEAR(plan.integrate([&](const Vec3& u) { return (u[1] - mean[1]) * (u[1] - mean[1]) * g(u); }),
                sd[1] * sd[1], 1e-12);
}

TEST(Mass, AlphaIsNormalised)
{
    const auto r = check_mass([](const Vec3& u) { return alpha(u); }, gaussian_plan(Vec3::Zero(), alpha_sd(), 16), 1e-8,
                              true);
    EXPECT_EQ(r.status, Status::pass);
    EXPECT_NEAR(r.get("mass"), 1.0, 1e-8);
}

TEST(Mass, ShowcaseInitialDataIsNormalised)
{
    const auto plan = showcase_plan();
    for (const Vec3& x : {Vec3(0, 0, 0), Vec3(1, -1, 0.5), Vec3(12, 12, 12)}) {
        const auto r = check_mass([&](const Vec3& u) { return showcase::example_p0(u, x); }, plan, 1e-6, true);
        EXPECT_EQ(r.status, Status::pass) << format_vec(x);
    }
}

TEST(Mass, TruncatedPlanIsFlagged)
{
    std::array<AxisRule, 3> ax;
    for (auto& a : ax)
        a = composite_rule({-2.0, 2.0}, 8, 1.0);
    const auto plan = tensor_plan(ax[0], ax[1], ax[2], "narrow box");
    const auto r = check_mass([](const Vec3& u) { return alpha(u); }, plan);
    EXPECT_EQ(r.status, Status::warn);
    EXPECT_TRUE(has_note(r, "coverage"));
}

TEST(Mass, InviscidDampingConservesMass)
{
    FlowSpec flow;
    flow.name = "damped";
    flow.viscosity = 0.0;
    flow.regime = Regime::inviscid;
    flow.drift = damping_drift(1.0);
    const auto p0 = showcase::alpha_density();
    for (double t : {0.5, 1.0, 2.0}) {
        const auto plan = gaussian_plan(Vec3::Zero(), Vec3(alpha_sd() * std::exp(t)), 16);
        const auto r = check_mass(
            [&](const Vec3& u) { return evaluate_inviscid(flow, p0, Vec3::Zero(), u, t, 1e-2).value; }, plan, 1e-6,
            true);
        EXPECT_EQ(r.status, Status::pass) << "t = " << t << " mass " << r.get("mass");
    }
}

TEST(Divergence, XIndependentIsExactlyZero)
{
    const auto plan = gaussian_plan(Vec3::Zero(), alpha_sd(), 8);
    const auto r = check_divergence_free([](const Vec3& u, const Vec3&) { return alpha(u); }, Vec3(0.1, 0.2, 0.3), 1e-2,
                                         plan);
    EXPECT_EQ(r.value, 0.0);
    EXPECT_EQ(r.status, Status::pass);
}

TEST(Divergence, CentredModulationHasNoFlux)
{
    const auto plan = gaussian_plan(Vec3::Zero(), alpha_sd(), 8);
    const auto r = check_divergence_free([](const Vec3& u, const Vec3& x) { return alpha(u) * (1.0 + 0.1 * x[0]); },
                                         Vec3::Zero(), 1e-2, plan);
    EXPECT_LT(std::abs(r.value), 1e-12);
}

TEST(Divergence, DetectsFlux)
{
    // m1 = eps x1 sigma_11, so div m = eps * 2/3
    const double eps = 0.3;
    const auto plan = gaussian_plan(Vec3::Zero(), alpha_sd(), 8);
    const auto r = check_divergence_free(
        [&](const Vec3& u, const Vec3& x) { return alpha(u) * (1.0 + eps * u[0] * x[0]); }, Vec3(0.2, 0, 0), 1e-2, plan,
        1e-6, true);
    EXPECT_NEAR(r.value, eps * 2.0 / 3.0, 1e-10);
    EXPECT_EQ(r.status, Status::fail);
    EXPECT_THROW(check_divergence_free([](const Vec3&, const Vec3&) { return 0.0; }, Vec3::Zero(), 0.0, plan),
                 DomainError);
}

TEST(PdeResidual, StationaryAlpha)
{
    const auto r = check_pde_residual([](const Vec3& u, const Vec3&, double) { return alpha(u); }, zero_drift(), 1.0,
                                      Vec3(0.5, 0.6, 0.7), Vec3(0.1, -0.2, 0.3), 0.5, 1e-2, 1e-12);
    EXPECT_EQ(r.value, 0.0);
    EXPECT_EQ(r.status, Status::pass);
}

TEST(PdeResidual, LinearInXGivesTransportTerm)
{
    const Vec3 u(0.5, 0.6, 0.7);
    const auto r = check_pde_residual([](const Vec3& v, const Vec3& x, double) { return alpha(v) * (1.0 + x[0]); },
                                      zero_drift(), 1.0, u, Vec3(0.1, -0.2, 0.3), 0.5, 1e-2, 1e-12, true);
    EXPECT_NEAR(r.get("residual_h"), u[0] * alpha(u), 1e-12);
    EXPECT_NEAR(r.get("residual_h2"), u[0] * alpha(u), 1e-12);
    EXPECT_EQ(r.status, Status::fail);
    const auto d = check_pde_residual([](const Vec3& v, const Vec3& x, double) { return alpha(v) * (1.0 + x[0]); },
                                      zero_drift(), 1.0, u, Vec3::Zero(), 0.5, 1e-2, 1e-12, false);
    EXPECT_EQ(d.status, Status::warn);
}

TEST(PdeResidual, HeatSolutionConvergesAtSecondOrder)
{
    // alpha(u) times the free-transport heat kernel started from N(0, I)
    auto p = [](const Vec3& u, const Vec3& x, double t) { return alpha(u) * heat_gaussian(x - u * t, 1.0 + 2.0 * t); };
    const auto r = check_pde_residual(p, zero_drift(), 1.0, Vec3(0.5, 0.6, 0.7), Vec3(0.1, -0.2, 0.3), 0.5, 2e-2, 1e-5);
    EXPECT_EQ(r.status, Status::pass);
    EXPECT_GT(r.get("observed_order"), 1.9);
    EXPECT_LT(r.get("observed_order"), 2.1);
}

TEST(PdeResidual, OneSidedTimeDifferenceNearZero)
{
    auto p = [](const Vec3& u, const Vec3& x, double t) { return alpha(u) * heat_gaussian(x - u * t, 1.0 + 2.0 * t); };
    const auto r = check_pde_residual(p, zero_drift(), 1.0, Vec3(0.5, 0.6, 0.7), Vec3::Zero(), 0.0, 1e-2, 1e-4);
    EXPECT_EQ(r.status, Status::pass);
    EXPECT_THROW(check_pde_residual(p, zero_drift(), 1.0, Vec3::Zero(), Vec3::Zero(), -1.0, 1e-2, 1e-4), DomainError);
}

TEST(PdeResidual, DiscontinuityIsNoted)
{
    auto p = [](const Vec3& u, const Vec3&, double) { return alpha(u); };
    const auto r = check_pde_residual(p, zero_drift(), 1.0, Vec3(0.26, 0.5, 0.5), Vec3::Zero(), 0.5, 1e-2, 1e-12, true,
                                      [](const Vec3& u) { return std::abs(u[0] - 0.25); });
    EXPECT_TRUE(has_note(r, "discontinuity"));
}

TEST(MomentIdentity, TrivialForAlpha)
{
    const auto plan = gaussian_plan(Vec3::Zero(), alpha_sd(), 8);
    const auto r = check_moment_identity(zero_drift(), [](const Vec3& u, const Vec3&) { return alpha(u); }, Vec3::Zero(),
                                         0.5, plan, 1e-2, 1e-12, true);
    EXPECT_EQ(r.get("lhs"), 0.0);
    EXPECT_LT(std::abs(r.get("rhs")), 1e-12);
    EXPECT_EQ(r.status, Status::pass);
}

TEST(MomentIdentity, InviscidLinearOracle)
{
    FlowSpec flow;
    flow.name = "damped";
    flow.viscosity = 0.0;
    flow.regime = Regime::inviscid;
    flow.drift = damping_drift(1.0);
    const double t = 0.7;
    const auto p0 = showcase::alpha_density();
    const auto plan = gaussian_plan(Vec3::Zero(), Vec3(alpha_sd() * std::exp(t)), 10);
    const auto r = check_moment_identity(
        damping_drift(1.0),
        [&](const Vec3& u, const Vec3& x) { return evaluate_inviscid(flow, p0, x, u, t, 1e-2).value; },
        Vec3(0.3, 0.1, -0.2), t, plan, 1e-2, 1e-8, true);
    EXPECT_EQ(r.status, Status::pass) << r.value;
}

TEST(MomentIdentity, DetectsNonSolution)
{
    // p = alpha(u) g(x) with C = 0: LHS = 0 but RHS = -sum sigma_ii d_ii g
    const auto plan = gaussian_plan(Vec3::Zero(), alpha_sd(), 8);
    auto p = [](const Vec3& u, const Vec3& x) { return alpha(u) * std::exp(-0.5 * x.squaredNorm()); };
    const auto r = check_moment_identity(zero_drift(), p, Vec3::Zero(), 0.0, plan, 1e-3, 1e-6, true);
    // d_ii exp(-|x|^2/2) = -1 at 0; trace sigma = 2/3 + 1 + 3/2
    EXPECT_NEAR(r.get("rhs"), 2.0 / 3.0 + 1.0 + 1.5, 1e-5);
    EXPECT_EQ(r.status, Status::fail);
}

TEST(Positivity, ShowcaseInitialDataGoesNegative)
{
    const auto r = check_positivity_bound(region_corner_grid(), {Vec3::Zero()});
    EXPECT_FALSE(r.assertable);
    EXPECT_EQ(r.status, Status::warn);
    EXPECT_NEAR(r.get("alpha_abs_u_at_inner_corner"), 1.0205e-3, 1e-7);
    EXPECT_NEAR(r.get("gamma_sup"), 3.5274e-3, 1e-7);
    EXPECT_NEAR(r.get("p0_at_inner_corner_x0"), -0.1404, 1e-4);
    EXPECT_LT(r.get("p0_min"), 0.0);
    EXPECT_GT(r.get("gamma_sup"), r.get("m_I"));
    EXPECT_TRUE(has_note(r, "negative"));
    EXPECT_THROW(check_positivity_bound({}, {Vec3::Zero()}), DomainError);
}

TEST(Positivity, CornerGridCoversAllFaces)
{
    const auto g = region_corner_grid();
    EXPECT_EQ(g.size(), 216u);
    int inside = 0;
    for (const Vec3& u : g)
        inside += showcase::in_region(u);
    EXPECT_EQ(inside, 216);
}
