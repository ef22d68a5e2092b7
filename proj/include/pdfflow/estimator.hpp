#pragma once

// Density estimators built on the representation formulas:
//   weakly homogeneous   p = E[p0(Y(t); X(t)) q(t)]           (Monte Carlo)
//   inviscid             p = p0(Y(t); X(t)) q(t)              (one characteristic)
//   weakly isotropic     p = q(t) * int H(x, t, z) p0(Y(t); z) dz  (Gauss-Hermite)

#include "pdfflow/characteristics.hpp"
#include "pdfflow/flow_model.hpp"
#include "pdfflow/parallel.hpp"
#include "pdfflow/quadrature.hpp"
#include "pdfflow/rng.hpp"
#include "pdfflow/types.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace pdfflow {

enum class Method { mc, kernel_quadrature, characteristic };

inline std::string to_string(Method m)
{
    switch (m) {
    case Method::mc: return "mc";
    case Method::kernel_quadrature: return "kernel_quadrature";
    case Method::characteristic: return "characteristic";
    }
    return "?";
}

struct PdfEstimate {
    double value = 0.0;
    double std_error = 0.0;  // sample sd / sqrt(n) for mc, 0 otherwise
    long long n_samples = 1;
    double dt = 0.0;
    Method method = Method::characteristic;
    double max_abs_log_q = 0.0;
    std::vector<std::string> warnings;
};

struct EstimatorConfig {
    long long n_samples = 100000;
    double dt = 1e-2;
    std::uint64_t seed = 0;
    int gh_order = 20;
    bool antithetic = false;   // pair each path with its negated increments
    bool allow_general = false;  // expert mode: SDE form without weak homogeneity
    unsigned workers = 0;      // 0 = default_workers()
    QuadratureConfig quad;

    void validate() const
    {
        if (n_samples < 1)
            throw ConfigError("n_samples must be >= 1");
        if (antithetic && n_samples % 2 != 0)
            throw ConfigError("antithetic sampling needs an even n_samples");
        if (!(dt > 0.0))
            throw ConfigError("dt must be positive");
        if (gh_order < 2)
            throw ConfigError("gh_order must be >= 2");
        quad.validate();
    }
};

inline constexpr double log_weight_warning = 50.0;

namespace detail {

/// Running mean / M2 (Welford), merged in a fixed order.
struct Moments {
    long long n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double max_abs_log_q = 0.0;

    void add(double v)
    {
        ++n;
        const double delta = v - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (v - mean);
    }

    void merge(const Moments& o)
    {
        if (o.n == 0)
            return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
        const double delta = o.mean - mean;
        const double total = na + nb;
        mean += delta * nb / total;
        m2 += o.m2 + delta * delta * na * nb / total;
        n += o.n;
        max_abs_log_q = std::max(max_abs_log_q, o.max_abs_log_q);
    }

    double std_error() const
    {
        if (n < 2)
            return 0.0;
        const double var = m2 / static_cast<double>(n - 1);
        return std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
    }
};

inline constexpr long long chunk_paths = 1024;

/// Moments of sample(i) for i in [0, n), accumulated per fixed chunk and merged
/// in chunk order, so the result does not depend on the worker count.
template <class F>
Moments chunked_moments(long long n, F&& sample, unsigned workers)
{
    const long long n_chunks = (n + chunk_paths - 1) / chunk_paths;
    std::vector<Moments> chunk(static_cast<std::size_t>(n_chunks));
    parallel_for(
        static_cast<std::size_t>(n_chunks),
        [&](std::size_t c) {
            Moments m;
            const long long begin = static_cast<long long>(c) * chunk_paths;
            const long long end = std::min(n, begin + chunk_paths);
            for (long long i = begin; i < end; ++i)
                m.add(sample(static_cast<std::uint64_t>(i), m));
            chunk[c] = m;
        },
        workers);
    Moments total;
    for (const auto& m : chunk)
        total.merge(m);
    return total;
}

} // namespace detail

/**
 * Monte-Carlo estimate of E[p0(Y(t); X(t)) q(t)] over Euler-Maruyama paths.
 *
 * Paths are grouped in fixed chunks whose moments are merged in chunk order,
 * so the result depends only on (seed, substream, n_samples), never on the
 * worker count. With antithetic sampling the unit is a pair of paths and
 * n_samples counts paths.
 */
inline PdfEstimate estimate_homogeneous(const FlowSpec& flow, const InitialDensity& p0, const Vec3& x,
                                        const Vec3& u, double t, const EstimatorConfig& cfg,
                                        std::uint64_t substream = 0)
{
    cfg.validate();
    if (flow.regime != Regime::weakly_homogeneous && flow.regime != Regime::weakly_isotropic &&
        !(flow.regime == Regime::general && cfg.allow_general))
        throw DomainError("estimate_homogeneous needs a weakly homogeneous flow (regime is " +
                          to_string(flow.regime) + ")");
    if (!(t >= 0.0))
        throw DomainError("t must be non-negative");

    PdfEstimate est;
    est.method = Method::mc;
    est.dt = cfg.dt;
    if (flow.regime == Regime::general)
        est.warnings.push_back("general regime: representation assumes d_u(B . grad_x p) = 0, "
                               "which is not checked");
    if (t == 0.0) {
        est.value = p0(u, x);
        est.n_samples = 1;
        return est;
    }
    const DriftField C = effective_drift(flow, cfg.quad);
    if (C.identically_zero && p0.x_independent) {
        // Y = u and q = 1 on every path: the integrand does not depend on the path.
        est.value = p0(u, x);
        est.n_samples = cfg.n_samples;
        return est;
    }

    const long long units = cfg.antithetic ? cfg.n_samples / 2 : cfg.n_samples;
    const double nu = flow.viscosity;

    auto path_value = [&](std::uint64_t path, double sign, double& log_q_abs) {
        const NoiseSpec noise{cfg.seed, path, substream};
        const CharacteristicState st =
            integrate_homogeneous_path(C, nu, x, u, t, cfg.dt, noise, sign);
        log_q_abs = std::max(log_q_abs, std::abs(st.log_q));
        const double v = p0(st.Y, st.X) * st.q;
        if (!std::isfinite(v))
            throw NumericError("non-finite path contribution at path " + std::to_string(path));
        return v;
    };
    const detail::Moments total = detail::chunked_moments(
        units,
        [&](std::uint64_t path, detail::Moments& m) {
            if (!cfg.antithetic)
                return path_value(path, 1.0, m.max_abs_log_q);
            const double a = path_value(path, 1.0, m.max_abs_log_q);
            const double b = path_value(path, -1.0, m.max_abs_log_q);
            return 0.5 * (a + b);
        },
        cfg.workers);

    est.value = total.mean;
    est.std_error = total.std_error();
    est.n_samples = cfg.n_samples;
    est.max_abs_log_q = total.max_abs_log_q;
    if (total.max_abs_log_q > log_weight_warning)
        est.warnings.push_back("path weight |log q| reached " + std::to_string(total.max_abs_log_q) +
                               "; variance may be unreliable");
    return est;
}

/// p0(Y(t); X(t)) q(t) along the single inviscid characteristic.
inline PdfEstimate evaluate_inviscid(const FlowSpec& flow, const InitialDensity& p0, const Vec3& x,
                                     const Vec3& u, double t, double dt,
                                     const QuadratureConfig& quad = {})
{
    if (flow.regime != Regime::inviscid || flow.viscosity != 0.0)
        throw DomainError("evaluate_inviscid needs an inviscid flow with nu = 0");
    PdfEstimate est;
    est.method = Method::characteristic;
    est.dt = dt;
    if (t == 0.0) {
        est.value = p0(u, x);
        return est;
    }
    const DriftField Q = effective_drift(flow, quad);
    const CharacteristicState st = solve_inviscid(Q, x, u, t, dt);
    est.value = p0(st.Y, st.X) * st.q;
    est.max_abs_log_q = std::abs(st.log_q);
    return est;
}

/// Heat kernel (4 pi nu t)^{-3/2} exp(-|z - x + D|^2 / (4 nu t)).
inline double heat_kernel(const Vec3& x, double t, const Vec3& z, const Vec3& displacement, double nu)
{
    const double nt = nu * t;
    if (!(nt > 0.0))
        throw DomainError("heat_kernel requires nu * t > 0");
    const double r2 = (z - x + displacement).squaredNorm();
    return std::exp(-r2 / (4.0 * nt)) / std::pow(4.0 * std::numbers::pi * nt, 1.5);
}

/// q(t) * E[p0(Y(t); x - D + sqrt(2 nu t) xi)] with the expectation taken by
/// tensor Gauss-Hermite of the given order.
inline PdfEstimate evaluate_isotropic(const FlowSpec& flow, const InitialDensity& p0, const Vec3& x,
                                      const Vec3& u, double t, int gh_order, double dt,
                                      const QuadratureConfig& quad = {})
{
    if (flow.regime != Regime::weakly_isotropic)
        throw DomainError("evaluate_isotropic needs a weakly isotropic flow");
    if (!(flow.viscosity > 0.0))
        throw DomainError("evaluate_isotropic needs nu > 0");
    PdfEstimate est;
    est.method = Method::kernel_quadrature;
    est.dt = dt;
    if (t == 0.0) {
        est.value = p0(u, x);
        return est;
    }
    const DriftField C = effective_drift(flow, quad);
    const IsotropicCharacteristic ch = solve_isotropic(C, u, t, dt);
    const Vec3 Y = ch.Y;
    double e;
    if (p0.x_independent)
        e = p0(Y, x);
    else
        e = gauss_hermite_expectation([&](const Vec3& z) { return p0(Y, z); },
                                      Vec3(x - ch.displacement), 2.0 * flow.viscosity * t, gh_order);
    est.value = ch.q * e;
    est.max_abs_log_q = std::abs(ch.log_q);
    if (!std::isfinite(est.value))
        throw NumericError("isotropic estimate is not finite");
    return est;
}

/// Chooses the estimator from the flow's regime.
inline PdfEstimate estimate(const FlowSpec& flow, const InitialDensity& p0, const Vec3& x, const Vec3& u,
                            double t, const EstimatorConfig& cfg, std::uint64_t substream = 0)
{
    switch (flow.regime) {
    case Regime::inviscid:
        return evaluate_inviscid(flow, p0, x, u, t, cfg.dt, cfg.quad);
    case Regime::weakly_isotropic:
        return evaluate_isotropic(flow, p0, x, u, t, cfg.gh_order, cfg.dt, cfg.quad);
    case Regime::weakly_homogeneous:
    case Regime::general:
        return estimate_homogeneous(flow, p0, x, u, t, cfg, substream);
    }
    throw DomainError("unknown regime");
}

// ---------------------------------------------------------------------------
// Slices.

struct AxisRange {
    double lo = -3.0;
    double hi = 3.0;
    int count = 121;

    /// (lo (n-1-i) + hi i) / (n-1): exact for integer-friendly ranges.
    double at(int i) const
    {
        if (count == 1)
            return 0.5 * (lo + hi);
        return (lo * (count - 1 - i) + hi * i) / (count - 1);
    }
};

struct SliceGrid {
    int fixed_axis = 2;
    double fixed_value = 0.3;
    AxisRange first;   // lower-numbered free axis
    AxisRange second;  // higher-numbered free axis

    void validate() const
    {
        if (fixed_axis < 0 || fixed_axis > 2)
            throw ConfigError("slice fixed_axis must be 0, 1 or 2");
        for (const AxisRange* r : {&first, &second}) {
            if (r->count < 1)
                throw ConfigError("slice axis count must be >= 1");
            if (r->count > 1 && !(r->lo < r->hi))
                throw ConfigError("slice axis needs lo < hi");
        }
    }

    std::size_t size() const { return static_cast<std::size_t>(first.count) * second.count; }

    std::pair<int, int> free_axes() const
    {
        if (fixed_axis == 0) return {1, 2};
        if (fixed_axis == 1) return {0, 2};
        return {0, 1};
    }

    /// Node index = i * second.count + j.
    Vec3 node(std::size_t idx) const
    {
        const int i = static_cast<int>(idx / second.count);
        const int j = static_cast<int>(idx % second.count);
        const auto [a, b] = free_axes();
        Vec3 u;
        u[fixed_axis] = fixed_value;
        u[a] = first.at(i);
        u[b] = second.at(j);
        return u;
    }
};

enum class Side { na, in, out };

inline std::string to_string(Side s)
{
    switch (s) {
    case Side::na: return "na";
    case Side::in: return "in";
    case Side::out: return "out";
    }
    return "?";
}

struct DensityRow {
    std::size_t node = 0;
    Vec3 u = Vec3::Zero();
    double value = 0.0;
    double std_error = 0.0;
    Side side = Side::na;
};

struct DensityField {
    SliceGrid grid;
    Vec3 x = Vec3::Zero();
    double t = 0.0;
    std::string flow_name;
    std::uint64_t seed = 0;
    std::string method;
    std::vector<double> values;      // one per node
    std::vector<double> std_errors;  // one per node
    // Additional one-sided rows for nodes on a discontinuity surface; the node
    // value itself is the limit from inside.
    std::vector<DensityRow> extra_rows;
    std::vector<Side> node_side;     // na, or in when an extra out row exists
    std::size_t failed_nodes = 0;
    std::vector<std::string> warnings;

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * grid.second.count + j]; }
};

/// Evaluates the regime's estimator at every node. Node k draws from
/// substream k of the shared seed. Up to 1% of nodes may fail (stored as NaN).
inline DensityField density_slice(const FlowSpec& flow, const InitialDensity& p0, const SliceGrid& grid,
                                  const Vec3& x, double t, const EstimatorConfig& cfg)
{
    grid.validate();
    cfg.validate();
    DensityField field;
    field.grid = grid;
    field.x = x;
    field.t = t;
    field.flow_name = flow.name;
    field.seed = cfg.seed;
    const std::size_t n = grid.size();
    field.values.assign(n, 0.0);
    field.std_errors.assign(n, 0.0);
    field.node_side.assign(n, Side::na);
    std::vector<std::string> errors(n);

    EstimatorConfig inner = cfg;
    inner.workers = 1;
    parallel_for(
        n,
        [&](std::size_t k) {
            try {
                const PdfEstimate e = estimate(flow, p0, x, grid.node(k), t, inner, k);
                field.values[k] = e.value;
                field.std_errors[k] = e.std_error;
            }
            catch (const Error& err) {
                field.values[k] = std::numeric_limits<double>::quiet_NaN();
                field.std_errors[k] = std::numeric_limits<double>::quiet_NaN();
                errors[k] = err.what();
            }
        },
        cfg.workers);

    std::string first_error;
    for (std::size_t k = 0; k < n; ++k) {
        if (!errors[k].empty()) {
            ++field.failed_nodes;
            if (first_error.empty())
                first_error = errors[k];
        }
    }
    if (field.failed_nodes * 100 > n)
        throw NumericError(std::to_string(field.failed_nodes) + " of " + std::to_string(n) +
                           " slice nodes failed; first: " + first_error);
    if (field.failed_nodes > 0)
        field.warnings.push_back(std::to_string(field.failed_nodes) + " nodes failed; first: " +
                                 first_error);
    switch (flow.regime) {
    case Regime::inviscid: field.method = to_string(Method::characteristic); break;
    case Regime::weakly_isotropic: field.method = to_string(Method::kernel_quadrature); break;
    default: field.method = to_string(Method::mc); break;
    }
    return field;
}

// ---------------------------------------------------------------------------
// CSV.

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// u1,u2,u3,x1,x2,x3,t,p,stderr[,side] with one row per node, plus the
/// extra one-sided rows directly after their node.
inline std::string density_csv(const DensityField& field, bool with_side)
{
    std::string out = "u1,u2,u3,x1,x2,x3,t,p,stderr";
    if (with_side)
        out += ",side";
    out += '\n';
    auto row = [&](const Vec3& u, double p, double se, Side side) {
        for (int i = 0; i < 3; ++i)
            out += format_double(u[i]) + ',';
        for (int i = 0; i < 3; ++i)
            out += format_double(field.x[i]) + ',';
        out += format_double(field.t) + ',' + format_double(p) + ',' + format_double(se);
        if (with_side)
            out += ',' + to_string(side);
        out += '\n';
    };
    std::size_t extra = 0;
    for (std::size_t k = 0; k < field.values.size(); ++k) {
        const Side side = k < field.node_side.size() ? field.node_side[k] : Side::na;
        row(field.grid.node(k), field.values[k], field.std_errors[k], side);
        while (extra < field.extra_rows.size() && field.extra_rows[extra].node == k) {
            const DensityRow& r = field.extra_rows[extra++];
            row(r.u, r.value, r.std_error, r.side);
        }
    }
    return out;
}

} // namespace pdfflow
