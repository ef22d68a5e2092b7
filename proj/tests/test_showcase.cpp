#include "pdfflow/showcase.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace pdfflow;
using namespace pdfflow::showcase;

namespace {

SmoothingConfig gh(int order)
{
    SmoothingConfig c;
    c.gh_order = order;
    return c;
}

SmoothingConfig mc(long long n, std::uint64_t seed = 0)
{
    SmoothingConfig c;
    c.method = SmoothingMethod::mc;
    c.n_samples = n;
    c.seed = seed;
    return c;
}

FigureConfig small_figure(int n)
{
    FigureConfig c;
    c.grid.first = {-3.0, 3.0, n};
    c.grid.second = {-3.0, 3.0, n};
    c.mc_samples = 4000;
    return c;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST(ShowcaseSpec, Constants)
{
    const auto& s = spec();
    EXPECT_EQ(s.sigma_diag.prod(), 1.0);
    for (int i = 0; i < 3; ++i)
        EXPECT_DOUBLE_EQ(s.sigma_diag[i], std::pow(1.5, i - 1));
    EXPECT_EQ(s.nu, 1.0);
    EXPECT_DOUBLE_EQ(s.gamma_prefactor, 1.0 / 36.0 * std::pow(2.0 * std::numbers::pi, -1.5));
}

TEST(Region, Membership)
{
    EXPECT_TRUE(in_region(Vec3(0.25, 0.25, 2.0 / 7.0)));
    EXPECT_TRUE(in_region(Vec3(-1.0, -2.0, -3.0)));
    EXPECT_TRUE(in_region(Vec3(0.5, -0.5, 0.5)));
    EXPECT_FALSE(in_region(Vec3(0.0, 0.5, 0.5)));
    EXPECT_FALSE(in_region(Vec3(0.5, 0.5, 0.28)));
    EXPECT_FALSE(in_region(Vec3(1.01, 0.5, 0.5)));
    EXPECT_FALSE(in_region(Vec3(0.5, 2.01, 0.5)));
    EXPECT_FALSE(in_region(Vec3(0.5, 0.5, 3.01)));
    // 2/7 rounds below the rational value; the endpoint must still be inside
    EXPECT_TRUE(in_region(Vec3(0.5, 0.5, std::nextafter(2.0 / 7.0, 1.0))));
    EXPECT_TRUE(spec().region[2].contains(2.0 / 7.0));
}

TEST(Region, SymmetricUnderReflection)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-3.5, 3.5);
    for (int i = 0; i < 20000; ++i) {
        const Vec3 u(d(rng), d(rng), d(rng));
        ASSERT_EQ(in_region(u), in_region(Vec3(-u)));
        ASSERT_EQ(beta(u), -beta(Vec3(-u)));
    }
}

TEST(Region, SideClassification)
{
    EXPECT_EQ(region_side(Vec3(0.25, 0.5, 0.3)), RegionSide::boundary);
    EXPECT_EQ(region_side(Vec3(0.5, 0.5, 0.3)), RegionSide::interior);
    EXPECT_EQ(region_side(Vec3(0.2, 0.5, 0.3)), RegionSide::outside);
    EXPECT_EQ(region_side(Vec3(-1.0, 2.0, 0.3)), RegionSide::boundary);
    EXPECT_NEAR(boundary_distance(Vec3(0.3, 0.5, 0.5)), 0.05, 1e-15);
}

TEST(Example, InitialDataValues)
{
    EXPECT_NEAR(example_p0(Vec3::Zero(), Vec3(1, 2, 3)), 0.0634936, 1e-7);
    EXPECT_EQ(alpha(Vec3::Zero()), std::pow(2.0 * std::numbers::pi, -1.5));
    EXPECT_DOUBLE_EQ(beta(Vec3(0.5, 0.5, 0.5)), 8.0);
    EXPECT_EQ(beta(Vec3(0.1, 0.5, 0.5)), 0.0);
    EXPECT_NEAR(gamma_bracket(Vec3::Zero()), 2.0, 1e-15);
    EXPECT_NEAR(gamma(Vec3::Zero()), 3.5274e-3, 1e-7);
    const Vec3 u(0.5, -0.5, 0.5), x(0.3, 0.1, -0.2);
    EXPECT_DOUBLE_EQ(example_p0(u, x), alpha(u) + beta(u) * gamma(x));
}

TEST(Example, GammaVanishesAtInfinity)
{
    EXPECT_LT(std::abs(gamma(Vec3(1e3, 1e3, 1e3))), 1e-6 * gamma(Vec3::Zero()));
    EXPECT_LT(std::abs(gamma(Vec3(30, 30, 30))), std::abs(gamma(Vec3(3, 3, 3))));
}

TEST(ShapeFunction, EvenFlatAndDecaying)
{
    for (double t : {0.0, 0.5, 2.0}) {
        EXPECT_EQ(f_shape(0.0, t), 0.0);
        for (double z : {0.1, 0.7, 1.9, 3.3})
            EXPECT_EQ(f_shape(z, t), f_shape(-z, t));
        EXPECT_LT(f_shape(20.0, t), 1e-80);
    }
    EXPECT_NE(f_shape_uneven(0.7, 0.0), f_shape_uneven(-0.7, 0.0));
}

TEST(Smoothing, TimeZeroIsGamma)
{
    const Vec3 x(0.2, -0.4, 0.9), u(0.5, 0.5, 0.3);
    EXPECT_EQ(smoothed_gamma(x, u, 0.0, 1.0).value, gamma(x));
    EXPECT_EQ(smoothed_gamma(x, u, 0.0, 1.0, mc(100)).value, gamma(x));
    EXPECT_EQ(example_pdf(u, x, 0.0).value, example_p0(u, x));
    EXPECT_THROW(smoothed_gamma(x, u, -1.0, 1.0), DomainError);
}

TEST(Smoothing, GaussHermiteAgreesWithMonteCarlo)
{
    const Vec3 u(0.5, 0.5, 0.3);
    const double ref = smoothed_gamma(Vec3::Zero(), u, 0.5, 1.0, gh(30)).value;
    const auto m = smoothed_gamma(Vec3::Zero(), u, 0.5, 1.0, mc(200000));
    EXPECT_LT(std::abs(m.value - ref), 3.0 * m.std_error);
}

TEST(Smoothing, DecaysAtLongTimes)
{
    const Vec3 u(0.5, 0.5, 0.3);
    const auto early = smoothed_gamma(Vec3::Zero(), u, 0.5, 1.0, mc(200000));
    const auto late = smoothed_gamma(Vec3::Zero(), u, 40.0, 1.0, mc(200000));
    EXPECT_LT(std::abs(late.value) + 3.0 * late.std_error, std::abs(early.value) - 3.0 * early.std_error);
}

TEST(Smoothing, CellQuadratureMatchesHighOrderHermite)
{
    for (const auto& [x, t] : {std::pair{Vec3(0.1, -0.2, 0.3), 0.5}, {Vec3(1.0, 0.5, -0.5), 0.2}}) {
        const Vec3 u(0.5, 0.6, 0.7);
        const double ref = smoothed_gamma(x, u, t, 1.0, gh(60)).value;
        const double cells = smoothed_gamma_cells(Vec3(x - u * t), std::sqrt(2.0 * t));
        // both are approximations; they differ at the 1e-7 level
        EXPECT_NEAR(cells, ref, 1e-6 * std::abs(ref));
    }
    EXPECT_EQ(smoothed_gamma_cells(Vec3(0.3, 0.2, 0.1), 0.0), gamma(Vec3(0.3, 0.2, 0.1)));
}

TEST(Smoothing, MonteCarloMatchesHermiteAtRandomProbes)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ud(-2.0, 2.0), xd(-1.0, 1.0), td(0.1, 1.5);
    int checked = 0;
    for (int i = 0; i < 20; ++i) {
        const Vec3 u(ud(rng), ud(rng), ud(rng)), x(xd(rng), xd(rng), xd(rng));
        const double t = td(rng);
        const auto m = smoothed_gamma(x, u, t, 1.0, mc(20000, i));
        const double ref = smoothed_gamma(x, u, t, 1.0, gh(30)).value;
        EXPECT_LT(std::abs(m.value - ref), 3.5 * m.std_error) << "probe " << i;
        ++checked;
    }
    EXPECT_EQ(checked, 20);
}

TEST(ExamplePdf, OutsideRegionIsAlpha)
{
    for (const Vec3& u : {Vec3(0, 0, 0), Vec3(0.2, 0.5, 0.5), Vec3(1.5, 0.5, 0.5)})
        for (double t : {0.5, 40.0})
            EXPECT_EQ(example_pdf(u, Vec3(1, 2, 3), t).value, alpha(u));
}

TEST(ExamplePdf, JumpAcrossTheFace)
{
    const double eps = 1e-9;
    const Vec3 in(0.25 + eps, 0.25, 0.3), out(0.25 - eps, 0.25, 0.3);
    const double pin = example_pdf(in, Vec3::Zero(), 0.5, gh(30)).value;
    const double pout = example_pdf(out, Vec3::Zero(), 0.5, gh(30)).value;
    const double expected = beta(in) * smoothed_gamma(Vec3::Zero(), in, 0.5, 1.0, gh(30)).value;
    EXPECT_NEAR(pin - pout, expected, 1e-6 * std::abs(expected));
    EXPECT_GT(std::abs(pin - pout), 1e-2);
}

TEST(ExamplePdf, ImpactShiftsWithX)
{
    const Vec3 u(0.26, 0.26, 0.3);
    const auto far = smoothed_gamma(Vec3::Constant(12.0), u, 40.0, 1.0, mc(200000));
    const auto origin = smoothed_gamma(Vec3::Zero(), u, 40.0, 1.0, mc(200000, 1));
    EXPECT_GT(std::abs(far.value) - 3.0 * far.std_error, std::abs(origin.value) + 3.0 * origin.std_error);
}

TEST(Checks, BetaProperties)
{
    const auto r = verify_beta_properties();
    EXPECT_EQ(r.status, Status::pass);
    EXPECT_LT(std::abs(r.get("int_beta")), 1e-10);
    EXPECT_LT(std::abs(r.get("int_u1_beta")), 1e-10);
    EXPECT_LT(r.get("max_interior_div_u_beta"), 1e-10);
    const Vec3 u(0.5, 0.5, 0.5);
    const double h = 1e-3;
    const Vec3 e = h * unit(0);
    // u1 beta = 1 / (u2 u3) does not depend on u1; only rounding remains
    EXPECT_LT(std::abs((Vec3(u + e)[0] * beta(Vec3(u + e)) - Vec3(u - e)[0] * beta(Vec3(u - e))) / (2 * h)), 1e-10);
}

TEST(Checks, QVanishes)
{
    const QuadratureConfig q;
    for (double t : {0.0, 2.0}) {
        const auto r = showcase_Q_residual(Vec3(0.3, -0.2, 0.1), Vec3(0.5, 0.5, 0.3), t, q);
        EXPECT_EQ(r.status, Status::pass) << "t = " << t << " |Q| = " << r.value;
        EXPECT_LT(r.value, 1e-5);
    }
}

TEST(Checks, UnevenShapeIsANegativeControl)
{
    const QuadratureConfig q;
    const auto r = showcase_Q_residual(Vec3::Zero(), Vec3(0.5, 0.5, 0.3), 0.5, q, uneven_statistics());
    EXPECT_GT(r.value, 1e-3);
    EXPECT_EQ(r.status, Status::fail);
}

TEST(Checks, ClosedFormPdeOrder)
{
    const auto r = check_example_pde_order(Vec3(0.5, 0.6, 0.7), Vec3(0.1, -0.2, 0.3), 0.5);
    EXPECT_EQ(r.status, Status::pass) << r.get("observed_order");
    EXPECT_GT(r.get("observed_order"), 1.9);
}

TEST(Checks, ClosedFormMassAtTimeZero)
{
    const auto r = check_example_mass(Vec3::Zero(), 0.0);
    EXPECT_LT(r.value, 1e-6);
}

TEST(Checks, ClosedFormDivergenceAtTimeZero)
{
    const auto r = check_example_divergence(Vec3::Zero(), 0.0);
    EXPECT_LT(std::abs(r.value), 1e-10);
}

TEST(Figures, SettingsAndParsing)
{
    EXPECT_EQ(figure_setting(Figure::t05).t, 0.5);
    EXPECT_EQ(figure_setting(Figure::t40).x, Vec3::Zero());
    EXPECT_EQ(figure_setting(Figure::t40x12).x, Vec3::Constant(12.0));
    EXPECT_EQ(parse_figure("t40x12"), Figure::t40x12);
    EXPECT_THROW(parse_figure("t41"), ConfigError);
    const FigureConfig def;
    EXPECT_EQ(def.grid.first.count, 121);
    EXPECT_EQ(def.grid.fixed_axis, 2);
    EXPECT_EQ(def.grid.fixed_value, 0.3);
    EXPECT_EQ(figure_method(Figure::t40, def), SmoothingMethod::mc);
}

TEST(Figures, ChangeFieldSupportedOnRegion)
{
    auto cfg = small_figure(25);
    const auto d = figure_data(Figure::t05, cfg);
    ASSERT_TRUE(d.change.has_value());
    for (std::size_t k = 0; k < d.field.values.size(); ++k) {
        const Vec3 u = cfg.grid.node(k);
        if (region_side(u) == RegionSide::outside) {
            EXPECT_EQ(d.change->values[k], 0.0);
            EXPECT_EQ(d.field.values[k], alpha(u));
        }
    }
    EXPECT_FALSE(figure_data(Figure::t40, cfg).change.has_value());
}

TEST(Figures, BoundaryNodesCarryBothSides)
{
    // 25 nodes over [-3, 3]: step 0.25 puts nodes on u1, u2 = +-0.25, +-1 and +-2
    auto cfg = small_figure(25);
    const auto d = figure_data(Figure::t05, cfg);
    EXPECT_FALSE(d.field.extra_rows.empty());
    for (const auto& row : d.field.extra_rows) {
        EXPECT_EQ(row.side, Side::out);
        EXPECT_EQ(row.value, alpha(row.u));
        EXPECT_EQ(d.field.node_side[row.node], Side::in);
        EXPECT_EQ(region_side(row.u), RegionSide::boundary);
    }
    const std::string csv = density_csv(d.field, true);
    EXPECT_NE(csv.find(",out\n"), std::string::npos);
    EXPECT_NE(csv.find(",in\n"), std::string::npos);
}

TEST(Figures, WorkerInvariant)
{
    auto cfg = small_figure(13);
    cfg.workers = 1;
    const auto a = figure_data(Figure::t05, cfg);
    cfg.workers = 4;
    const auto b = figure_data(Figure::t05, cfg);
    EXPECT_EQ(density_csv(a.field, true), density_csv(b.field, true));
}

TEST(Figures, EmitWritesCsvAndMeta)
{
    const auto dir = std::filesystem::temp_directory_path() / "pdfflow_test_showcase_emit";
    std::filesystem::remove_all(dir);
    auto cfg = small_figure(9);
    cfg.seed = 42;
    emit_figure_data(Figure::t05, cfg, dir);
    ASSERT_TRUE(std::filesystem::exists(dir / "t05.csv"));
    ASSERT_TRUE(std::filesystem::exists(dir / "t05_diff.csv"));
    const auto meta = io::json::parse(slurp(dir / "t05.meta.json"));
    EXPECT_EQ(meta["seed"], 42);
    EXPECT_EQ(meta["grid"]["axes"][0]["count"], 9);
    EXPECT_EQ(meta["t"], 0.5);
    EXPECT_EQ(slurp(dir / "t05.csv").substr(0, 60), "u1,u2,u3,x1,x2,x3,t,p,stderr,side\n-3,-3,0.29999999999999999,");
    EXPECT_THROW(emit_figure_data(Figure::t05, cfg, dir), io::OverwriteError);
    EXPECT_NO_THROW(emit_figure_data(Figure::t05, cfg, dir, true));
    std::filesystem::remove_all(dir);
}
