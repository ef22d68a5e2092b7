#pragma once

// Closed-form solution of the worked example, the checks on beta and Q, and the
// slice data behind the three figures.
//
// With C = 0 the characteristics are Y = u, X(t) = x - u t + sqrt(2 nu) M_t, so
//   p(u; x, t) = alpha(u) + beta(u) E[gamma(x - u t + sqrt(2 nu t) xi)].

#include "pdfflow/estimator.hpp"
#include "pdfflow/invariants.hpp"
#include "pdfflow/io.hpp"
#include "pdfflow/quadrature.hpp"
#include "pdfflow/rng.hpp"
#include "pdfflow/showcase_core.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>
#include <filesystem>
#include <optional>
#include <string>

namespace pdfflow::showcase {

enum class SmoothingMethod { gauss_hermite, mc };

inline std::string to_string(SmoothingMethod m)
{
    return m == SmoothingMethod::mc ? "mc" : "gauss_hermite";
}

inline SmoothingMethod parse_smoothing(const std::string& s)
{
    if (s == "mc") return SmoothingMethod::mc;
    if (s == "gauss_hermite" || s == "gh") return SmoothingMethod::gauss_hermite;
    throw ConfigError("unknown smoothing method '" + s + "' (mc, gauss_hermite)");
}

struct SmoothingConfig {
    SmoothingMethod method = SmoothingMethod::gauss_hermite;
    int gh_order = 20;
    long long n_samples = 20000;
    std::uint64_t seed = 0;
    std::uint64_t substream = 0;
    unsigned workers = 0;
};

struct Smoothed {
    double value = 0.0;
    double std_error = 0.0;
    long long n_samples = 1;
};

/// E[gamma(x - u t + sqrt(2 nu t) xi)]. The Monte-Carlo branch samples X(t)
/// directly: with C = 0 the Euler-Maruyama path is exact in law and X(t) is
/// a single Gaussian draw.
inline Smoothed smoothed_gamma(const Vec3& x, const Vec3& u, double t, double nu,
                               const SmoothingConfig& cfg = {})
{
    if (!(t >= 0.0))
        throw DomainError("smoothed_gamma requires t >= 0");
    if (!(nu >= 0.0))
        throw DomainError("smoothed_gamma requires nu >= 0");
    Smoothed out;
    const Vec3 mean = x - u * t;
    const double var = 2.0 * nu * t;
    if (t == 0.0 || var == 0.0) {
        out.value = gamma(mean);
        return out;
    }
    if (cfg.method == SmoothingMethod::gauss_hermite) {
        out.value = gauss_hermite_expectation([](const Vec3& z) { return gamma(z); }, mean, var,
                                              cfg.gh_order);
        return out;
    }
    if (cfg.n_samples < 2)
        throw ConfigError("mc smoothing needs n_samples >= 2");
    const double sd = std::sqrt(var);
    const detail::Moments m = detail::chunked_moments(
        cfg.n_samples,
        [&](std::uint64_t path, detail::Moments&) {
            GaussianStream g(NoiseSpec{cfg.seed, path, cfg.substream});
            return gamma(Vec3(mean + sd * g.next3()));
        },
        cfg.workers);
    out.value = m.mean;
    out.std_error = m.std_error();
    out.n_samples = cfg.n_samples;
    return out;
}

namespace detail {

struct CellCache {
    std::array<long, 3> first{};
    std::array<long, 3> count{};
    double width = 0.0;
    int order = 0;
    std::array<std::vector<double>, 3> nodes, weights;
    std::vector<double> values;  // w_i w_j w_k gamma(y_ijk)
};

} // namespace detail

/// int gamma(y) phi(y - m; s^2 I) dy by composite Gauss-Legendre on cells
/// aligned to multiples of the cell width, covering m +- reach s. Nearby m
/// share the same nodes, so as a function of (x, t) the sum is itself an exact
/// solution of d_t + u . grad_x - nu lap_x; finite differences of it carry
/// only their own truncation error. Cost grows like (reach s / width)^3.
inline double smoothed_gamma_cells(const Vec3& m, double s, int order = 8, double reach = 9.0)
{
    if (!(s > 0.0))
        return gamma(m);
    if (order < 1 || !(reach > 0.0))
        throw DomainError("smoothed_gamma_cells needs order >= 1 and reach > 0");
    const double width = std::exp2(std::floor(std::log2(std::min(1.0, s))));
    thread_local detail::CellCache cache;
    std::array<long, 3> first, count;
    for (int a = 0; a < 3; ++a) {
        first[a] = static_cast<long>(std::floor((m[a] - reach * s) / width));
        count[a] = static_cast<long>(std::ceil((m[a] + reach * s) / width)) - first[a];
    }
    if (cache.first != first || cache.count != count || cache.width != width || cache.order != order) {
        cache.first = first;
        cache.count = count;
        cache.width = width;
        cache.order = order;
        const Rule& r = legendre_rule(order);
        for (int a = 0; a < 3; ++a) {
            cache.nodes[a].clear();
            cache.weights[a].clear();
            for (long c = 0; c < count[a]; ++c) {
                const double lo = (first[a] + c) * width;
                for (std::size_t i = 0; i < r.size(); ++i) {
                    cache.nodes[a].push_back(lo + 0.5 * width * (r.nodes[i] + 1.0));
                    cache.weights[a].push_back(0.5 * width * r.weights[i]);
                }
            }
        }
        const auto &n0 = cache.nodes[0], &n1 = cache.nodes[1], &n2 = cache.nodes[2];
        cache.values.resize(n0.size() * n1.size() * n2.size());
        std::size_t idx = 0;
        for (std::size_t i = 0; i < n0.size(); ++i)
            for (std::size_t j = 0; j < n1.size(); ++j)
                for (std::size_t k = 0; k < n2.size(); ++k)
                    cache.values[idx++] = cache.weights[0][i] * cache.weights[1][j] * cache.weights[2][k] *
                                          gamma(Vec3(n0[i], n1[j], n2[k]));
    }
    std::array<std::vector<double>, 3> kern;
    const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * s);
    for (int a = 0; a < 3; ++a) {
        kern[a].resize(cache.nodes[a].size());
        for (std::size_t i = 0; i < kern[a].size(); ++i) {
            const double z = (cache.nodes[a][i] - m[a]) / s;
            kern[a][i] = norm * std::exp(-0.5 * z * z);
        }
    }
    const std::size_t n1 = kern[1].size(), n2 = kern[2].size();
    double sum = 0.0;
    for (std::size_t i = 0; i < kern[0].size(); ++i) {
        double si = 0.0;
        for (std::size_t j = 0; j < n1; ++j) {
            const double* v = &cache.values[(i * n1 + j) * n2];
            double sj = 0.0;
            for (std::size_t k = 0; k < n2; ++k)
                sj += v[k] * kern[2][k];
            si += sj * kern[1][j];
        }
        sum += si * kern[0][i];
    }
    return sum;
}

/// alpha + beta * smoothed gamma; t = 0 gives example_p0 exactly.
inline PdfEstimate example_pdf(const Vec3& u, const Vec3& x, double t, const SmoothingConfig& cfg = {})
{
    PdfEstimate e;
    e.method = cfg.method == SmoothingMethod::mc && t > 0.0 ? Method::mc : Method::kernel_quadrature;
    const double b = beta(u);
    if (t == 0.0) {
        e.value = example_p0(u, x);
        return e;
    }
    if (b == 0.0) {
        e.value = alpha(u);
        return e;
    }
    const Smoothed g = smoothed_gamma(x, u, t, spec().nu, cfg);
    e.value = alpha(u) + b * g.value;
    e.std_error = std::abs(b) * g.std_error;
    e.n_samples = g.n_samples;
    return e;
}

// ---------------------------------------------------------------------------
// Region geometry for slice emission.

enum class RegionSide { outside, interior, boundary };

/// Classifies u against I, treating coordinates within `snap` of a face as on it.
inline RegionSide region_side(const Vec3& u, double snap = 1e-9)
{
    bool on_face = false;
    for (int a = 0; a < 3; ++a) {
        const auto& band = spec().region[a];
        const double v = std::abs(u[a]);
        const double lo = band.lo(), hi = band.hi;
        const bool near_lo = std::abs(v - lo) <= snap;
        const bool near_hi = std::abs(v - hi) <= snap;
        if (near_lo || near_hi)
            on_face = true;
        else if (!band.contains(u[a]))
            return RegionSide::outside;
    }
    return on_face ? RegionSide::boundary : RegionSide::interior;
}

/// 1 / (u1 u2 u3): the value of beta as u approaches from inside I.
inline double beta_inside(const Vec3& u) { return 1.0 / (u[0] * u[1] * u[2]); }

/// Distance from u to the nearest face plane of I (within the band closure).
inline double boundary_distance(const Vec3& u)
{
    double d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const auto& band = spec().region[a];
        const double v = std::abs(u[a]);
        d = std::min({d, std::abs(v - band.lo()), std::abs(v - band.hi)});
    }
    return d;
}

// ---------------------------------------------------------------------------
// Checks.

/// int beta, int u^i beta over the eight boxes of I with Gauss-Legendre of the
/// given order per box and axis, and d_{u^i}(u^i beta) sampled inside each box.
inline VerificationReport verify_beta_properties(int order = 24, double tolerance = 1e-10)
{
    VerificationReport r;
    r.name = "beta_properties";
    r.assertable = true;
    r.tolerance = tolerance;
    const auto& reg = spec().region;
    std::array<std::array<Rule, 2>, 3> rules;
    for (int a = 0; a < 3; ++a) {
        rules[a][0] = gauss_legendre_nodes(order, reg[a].lo(), reg[a].hi);
        rules[a][1] = gauss_legendre_nodes(order, -reg[a].hi, -reg[a].lo());
    }
    double ib = 0.0;
    Vec3 iub = Vec3::Zero();
    double identity = 0.0;
    const double h = 1e-3;
    for (int box = 0; box < 8; ++box) {
        const Rule& r0 = rules[0][box & 1];
        const Rule& r1 = rules[1][(box >> 1) & 1];
        const Rule& r2 = rules[2][(box >> 2) & 1];
        for (std::size_t i = 0; i < r0.size(); ++i)
            for (std::size_t j = 0; j < r1.size(); ++j)
                for (std::size_t k = 0; k < r2.size(); ++k) {
                    const Vec3 u(r0.nodes[i], r1.nodes[j], r2.nodes[k]);
                    const double w = r0.weights[i] * r1.weights[j] * r2.weights[k];
                    const double b = beta(u);
                    ib += w * b;
                    iub += w * b * u;
                }
        // interior samples: the box centre and points a third of the way to its corners
        Vec3 centre, half;
        for (int a = 0; a < 3; ++a) {
            const double sign = ((box >> a) & 1) ? -1.0 : 1.0;
            centre[a] = sign * 0.5 * (reg[a].lo() + reg[a].hi);
            half[a] = 0.5 * (reg[a].hi - reg[a].lo());
        }
        for (int s = 0; s < 9; ++s) {
            Vec3 u = centre;
            if (s > 0)
                for (int a = 0; a < 3; ++a)
                    u[a] += (((s - 1) >> a) & 1 ? 1.0 : -1.0) * half[a] / 3.0;
            double div = 0.0;
            for (int a = 0; a < 3; ++a) {
                const Vec3 e = h * unit(a);
                const Vec3 up = u + e, um = u - e;
                div += (up[a] * beta(up) - um[a] * beta(um)) / (2.0 * h);
            }
            identity = std::max(identity, std::abs(div));
        }
    }
    r.value = std::max({std::abs(ib), iub.cwiseAbs().maxCoeff(), identity});
    r.measured = {{"int_beta", ib},
                  {"int_u1_beta", iub[0]},
                  {"int_u2_beta", iub[1]},
                  {"int_u3_beta", iub[2]},
                  {"max_interior_div_u_beta", identity}};
    r.config = {{"gl_order", std::to_string(order)}, {"stencil_h", format_double_short(h)}};
    return r.finish();
}

/// max_i |Q^i| for the example statistics (or a variant) at (x, u, t).
inline VerificationReport showcase_Q_residual(const Vec3& x, const Vec3& u, double t,
                                              const QuadratureConfig& quad = {},
                                              const ConditionalStatistics& stats = statistics(),
                                              double tolerance = 1e-5)
{
    VerificationReport r;
    r.name = "Q_vanishing";
    r.assertable = true;
    r.tolerance = tolerance;
    const SingularIntegral q = eval_Q_detail(stats, x, u, t, quad);
    r.value = q.value.cwiseAbs().maxCoeff();
    r.measured = {{"Q1", q.value[0]}, {"Q2", q.value[1]}, {"Q3", q.value[2]}, {"max_abs_Q", r.value}};
    if (q.radius_checked)
        r.measured.emplace_back("radius_shift", q.radius_shift);
    r.config = {{"statistics", stats.name}, {"x", format_vec(x)}, {"u", format_vec(u)},
                {"t", format_double_short(t)}, {"radius", format_double_short(quad.radius)}};
    if (!q.converged)
        r.notes.push_back("doubling the truncation radius moved Q by more than the tolerance");
    return r.finish();
}

/// Plan over I only: GL of the given order on [lo, mid] and [mid, hi] of each
/// band half, mid the geometric midpoint.
inline QuadraturePlan region_plan(int order = 6)
{
    std::array<AxisRule, 3> axes;
    for (int a = 0; a < 3; ++a) {
        const auto& band = spec().region[a];
        const double lo = band.lo(), hi = band.hi, mid = std::sqrt(lo * hi);
        for (const auto& [p, q] : {std::pair{-hi, -mid}, {-mid, -lo}, {lo, mid}, {mid, hi}}) {
            const Rule r = gauss_legendre_nodes(order, p, q);
            for (std::size_t i = 0; i < r.size(); ++i) {
                axes[a].rule.nodes.push_back(r.nodes[i]);
                axes[a].rule.weights.push_back(r.weights[i]);
                axes[a].edge.push_back(false);
            }
        }
    }
    return tensor_plan(axes[0], axes[1], axes[2], "region I, gauss-legendre order " + std::to_string(order));
}

/// p(u; x, t) with the smoothing done by smoothed_gamma_cells.
inline DensityUXT example_density_cells(int order = 6, double reach = 8.0)
{
    return [order, reach](const Vec3& u, const Vec3& x, double t) {
        const double b = beta(u);
        if (t == 0.0 || b == 0.0)
            return example_p0(u, x);
        return alpha(u) + b * smoothed_gamma_cells(Vec3(x - u * t), std::sqrt(2.0 * spec().nu * t), order, reach);
    };
}

inline DensityUXT example_density(const SmoothingConfig& cfg)
{
    return [cfg](const Vec3& u, const Vec3& x, double t) { return example_pdf(u, x, t, cfg).value; };
}

/// PDE residual of the closed form at (u, x, t) with steps h and h/2. The
/// headline value is the order deficit max(0, min_order - observed order).
inline VerificationReport check_example_pde_order(const Vec3& u, const Vec3& x, double t, double h = 2e-2,
                                                  double min_order = 1.9, bool assertable = true)
{
    VerificationReport r = check_pde_residual(example_density_cells(), zero_drift(), spec().nu, u, x, t, h,
                                              0.0, assertable, boundary_distance);
    r.name = "pde_residual_order";
    const double order = r.get("observed_order");
    r.value = std::isfinite(order) ? std::max(0.0, min_order - order) : 1.0;
    r.tolerance = 0.0;
    r.config.emplace_back("min_order", format_double_short(min_order));
    r.config.emplace_back("smoothing", "cells");
    return r.finish();
}

/// |int p du - 1| for the closed form at (x, t), Gauss-Hermite smoothing.
inline VerificationReport check_example_mass(const Vec3& x, double t, int gh_order = 12, int plan_order = 8,
                                             double tolerance = 1e-6, bool assertable = false)
{
    SmoothingConfig sc;
    sc.gh_order = gh_order;
    VerificationReport r = check_mass([&](const Vec3& u) { return example_pdf(u, x, t, sc).value; },
                                      showcase_plan(plan_order), tolerance, assertable);
    r.config.emplace_back("x", format_vec(x));
    r.config.emplace_back("t", format_double_short(t));
    r.config.emplace_back("gh_order", std::to_string(gh_order));
    return r;
}

/// First-moment divergence of the closed form. Only the part of p on I depends
/// on x, so the moments are integrated over I alone.
inline VerificationReport check_example_divergence(const Vec3& x, double t, double h_x = 1e-2,
                                                   int gh_order = 12, int plan_order = 6,
                                                   double tolerance = 1e-6, bool assertable = false)
{
    SmoothingConfig sc;
    sc.gh_order = gh_order;
    VerificationReport r = check_divergence_free(
        [&](const Vec3& u, const Vec3& y) { return example_pdf(u, y, t, sc).value; }, x, h_x,
        region_plan(plan_order), tolerance, assertable);
    r.config.emplace_back("t", format_double_short(t));
    return r;
}

/// Second-moment identity for the closed form (C = 0, so the left side is 0).
inline VerificationReport check_example_moment(const Vec3& x, double t, double h_x = 1e-2, int gh_order = 12,
                                               int plan_order = 4, double tolerance = 1e-6,
                                               bool assertable = false)
{
    SmoothingConfig sc;
    sc.gh_order = gh_order;
    VerificationReport r = check_moment_identity(
        zero_drift(), [&](const Vec3& u, const Vec3& y) { return example_pdf(u, y, t, sc).value; }, x, t,
        region_plan(plan_order), h_x, tolerance, assertable);
    return r;
}

// ---------------------------------------------------------------------------
// Figures.

enum class Figure { t05, t40, t40x12 };

inline std::string to_string(Figure f)
{
    switch (f) {
    case Figure::t05: return "t05";
    case Figure::t40: return "t40";
    case Figure::t40x12: return "t40x12";
    }
    return "?";
}

inline Figure parse_figure(const std::string& s)
{
    if (s == "t05") return Figure::t05;
    if (s == "t40") return Figure::t40;
    if (s == "t40x12") return Figure::t40x12;
    throw ConfigError("unknown figure '" + s + "' (t05, t40, t40x12)");
}

struct FigureSetting {
    Vec3 x;
    double t;
};

inline FigureSetting figure_setting(Figure f)
{
    switch (f) {
    case Figure::t05: return {Vec3::Zero(), 0.5};
    case Figure::t40: return {Vec3::Zero(), 40.0};
    case Figure::t40x12: return {Vec3::Constant(12.0), 40.0};
    }
    throw ConfigError("unknown figure");
}

struct FigureConfig {
    SliceGrid grid;  // default: 121 x 121 over [-3, 3]^2 at u3 = 0.3
    // Monte Carlo by default. At t = 40 the smoothing variance is 80 and a
    // tensor Gauss-Hermite rule does not resolve the unit-scale structure of
    // gamma (a few percent bias even at order 80).
    std::optional<SmoothingMethod> method;
    int gh_order = 40;
    long long mc_samples = 20000;
    std::uint64_t seed = 0;
    unsigned workers = 0;
};

struct FigureData {
    Figure figure = Figure::t05;
    DensityField field;
    std::optional<DensityField> change;  // p(u; x, t) - p0(u; x), t05 only
    SmoothingMethod method = SmoothingMethod::gauss_hermite;
};

inline SmoothingMethod figure_method(Figure f, const FigureConfig& cfg)
{
    (void)f;
    return cfg.method.value_or(SmoothingMethod::mc);
}

/// Evaluates the closed form over the slice. Nodes on a face of I are stored
/// with their inside limit and followed by an extra `out` row (beta = 0).
inline FigureData figure_data(Figure fig, const FigureConfig& cfg = {})
{
    cfg.grid.validate();
    const FigureSetting set = figure_setting(fig);
    const SmoothingMethod method = figure_method(fig, cfg);
    const std::size_t n = cfg.grid.size();

    FigureData out;
    out.figure = fig;
    out.method = method;
    DensityField& f = out.field;
    f.grid = cfg.grid;
    f.x = set.x;
    f.t = set.t;
    f.flow_name = "showcase";
    f.seed = cfg.seed;
    f.method = to_string(method);
    f.values.assign(n, 0.0);
    f.std_errors.assign(n, 0.0);
    f.node_side.assign(n, Side::na);
    std::vector<double> smoothed(n, 0.0), smoothed_se(n, 0.0);
    std::vector<RegionSide> sides(n);

    parallel_for(
        n,
        [&](std::size_t k) {
            const Vec3 u = cfg.grid.node(k);
            sides[k] = region_side(u);
            if (sides[k] == RegionSide::outside)
                return;
            SmoothingConfig sc;
            sc.method = method;
            sc.gh_order = cfg.gh_order;
            sc.n_samples = cfg.mc_samples;
            sc.seed = cfg.seed;
            sc.substream = k;
            sc.workers = 1;
            const Smoothed g = smoothed_gamma(set.x, u, set.t, spec().nu, sc);
            smoothed[k] = g.value;
            smoothed_se[k] = g.std_error;
        },
        cfg.workers);

    DensityField change = f;
    const bool with_change = fig == Figure::t05;
    for (std::size_t k = 0; k < n; ++k) {
        const Vec3 u = cfg.grid.node(k);
        const double a = alpha(u);
        if (sides[k] == RegionSide::outside) {
            f.values[k] = a;
            change.values[k] = 0.0;
            continue;
        }
        const double b = beta_inside(u);
        f.values[k] = a + b * smoothed[k];
        f.std_errors[k] = std::abs(b) * smoothed_se[k];
        change.values[k] = b * (smoothed[k] - gamma(set.x));
        change.std_errors[k] = f.std_errors[k];
        if (sides[k] == RegionSide::boundary) {
            f.node_side[k] = Side::in;
            f.extra_rows.push_back({k, u, a, 0.0, Side::out});
            change.node_side[k] = Side::in;
            change.extra_rows.push_back({k, u, 0.0, 0.0, Side::out});
        }
    }
    if (with_change)
        out.change = std::move(change);
    return out;
}

inline io::json figure_meta(const FigureData& d, const FigureConfig& cfg, const std::string& artifact)
{
    io::json m;
    m["artifact"] = artifact;
    m["figure"] = to_string(d.figure);
    m["flow"] = "showcase";
    m["x"] = io::to_json(d.field.x);
    m["t"] = d.field.t;
    m["nu"] = spec().nu;
    m["seed"] = cfg.seed;
    m["method"] = to_string(d.method);
    m["gh_order"] = cfg.gh_order;
    m["mc_samples"] = cfg.mc_samples;
    const auto [a, b] = cfg.grid.free_axes();
    m["grid"] = {{"fixed_axis", cfg.grid.fixed_axis + 1},
                 {"fixed_value", cfg.grid.fixed_value},
                 {"axes", io::json::array({
                              {{"axis", a + 1}, {"lo", cfg.grid.first.lo}, {"hi", cfg.grid.first.hi},
                               {"count", cfg.grid.first.count}},
                              {{"axis", b + 1}, {"lo", cfg.grid.second.lo}, {"hi", cfg.grid.second.hi},
                               {"count", cfg.grid.second.count}}})}};
    m["boundary_rows"] = d.field.extra_rows.size();
    m["columns"] = io::json::array({"u1", "u2", "u3", "x1", "x2", "x3", "t", "p", "stderr", "side"});
    return m;
}

/// Computes a figure and, when out_dir is non-empty, writes <fig>.csv (plus
/// t05_diff.csv for t05) with metadata sidecars.
inline FigureData emit_figure_data(Figure fig, const FigureConfig& cfg, const std::filesystem::path& out_dir,
                                   bool force = false, const io::json& run_config = io::json())
{
    FigureData d = figure_data(fig, cfg);
    if (out_dir.empty())
        return d;
    const std::string name = to_string(fig);
    io::json meta = figure_meta(d, cfg, name + ".csv");
    if (!run_config.is_null())
        meta["config"] = run_config;
    io::write_with_meta(out_dir / (name + ".csv"), density_csv(d.field, true), meta, force);
    if (d.change) {
        io::json dm = figure_meta(d, cfg, name + "_diff.csv");
        dm["quantity"] = "p(u;x,t) - p0(u;x)";
        if (!run_config.is_null())
            dm["config"] = run_config;
        io::write_with_meta(out_dir / (name + "_diff.csv"), density_csv(*d.change, true), dm, force);
    }
    return d;
}

} // namespace pdfflow::showcase
