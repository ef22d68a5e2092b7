#pragma once

/* Backward characteristics of the velocity-PDF equation.
 *
 * For s in [0, t], starting from X = x, Y = u, q = 1:
 *
 *   dX = -Y ds + sqrt(2 nu) dM
 *   dY = C(X, Y, t - s) ds
 *   dq = q * div_u C(X, Y, t - s) ds
 *
 * The weight is carried as log q. With nu = 0 the system is an ODE and is
 * integrated with classical RK4.
 */

#include "pdfflow/flow_model.hpp"
#include "pdfflow/quadrature.hpp"
#include "pdfflow/rng.hpp"
#include "pdfflow/types.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <string>

namespace pdfflow {

inline constexpr double max_log_weight = 700.0;

struct CharacteristicState {
    double s = 0.0;
    Vec3 X = Vec3::Zero();
    Vec3 Y = Vec3::Zero();
    double log_q = 0.0;
    double q = 1.0;

    static CharacteristicState start(const Vec3& x, const Vec3& u)
    {
        CharacteristicState st;
        st.X = x;
        st.Y = u;
        return st;
    }
};

using PathRecorder = std::function<void(const CharacteristicState&)>;

namespace detail {

inline void check_state(const CharacteristicState& st)
{
    if (!st.X.allFinite() || !st.Y.allFinite() || !std::isfinite(st.log_q))
        throw NumericError("characteristic became non-finite at s = " + std::to_string(st.s));
    if (std::abs(st.log_q) > max_log_weight)
        throw OverflowError("characteristic weight overflow (|log q| = " +
                            std::to_string(std::abs(st.log_q)) + ") at s = " + std::to_string(st.s));
}

inline int step_count(double t, double dt)
{
    if (!(dt > 0.0))
        throw DomainError("time step must be positive");
    if (!(t >= 0.0))
        throw DomainError("time horizon must be non-negative");
    if (t == 0.0)
        return 0;
    return std::max(1, static_cast<int>(std::ceil(t / dt - 1e-9)));
}

} // namespace detail

/// One Euler-Maruyama step; drift, divergence and noise use the pre-step state.
/// `increment` is a Brownian increment over dt (variance dt per component).
inline CharacteristicState step_homogeneous(const CharacteristicState& state, const DriftField& C,
                                            double nu, double t, double dt, const Vec3& increment)
{
    if (state.s < 0.0 || state.s + dt > t * (1.0 + 1e-12) + 1e-15)
        throw DomainError("step_homogeneous: s + dt exceeds the horizon t");
    const double tau = t - state.s;
    CharacteristicState next = state;
    next.X = state.X - state.Y * dt + std::sqrt(2.0 * nu) * increment;
    if (!C.identically_zero) {
        next.Y = state.Y + C(state.X, state.Y, tau) * dt;
        next.log_q = state.log_q + C.divergence_u(state.X, state.Y, tau) * dt;
    }
    next.s = state.s + dt;
    next.q = std::exp(next.log_q);
    detail::check_state(next);
    return next;
}

/// Integrates one stochastic characteristic over [0, t] with uniform steps no
/// larger than dt. `antithetic_sign` = -1 negates every increment.
inline CharacteristicState integrate_homogeneous_path(const DriftField& C, double nu, const Vec3& x,
                                                      const Vec3& u, double t, double dt,
                                                      const NoiseSpec& noise, double antithetic_sign = 1.0,
                                                      const PathRecorder& record = {})
{
    CharacteristicState st = CharacteristicState::start(x, u);
    if (record)
        record(st);
    const int n = detail::step_count(t, dt);
    if (n == 0)
        return st;
    const double h = t / n;
    const double sdev = std::sqrt(h);
    GaussianStream gauss(noise);
    for (int i = 0; i < n; ++i) {
        const Vec3 dM = antithetic_sign * sdev * gauss.next3();
        st = step_homogeneous(st, C, nu, t, h, dM);
        if (i == n - 1)
            st.s = t;
        if (record)
            record(st);
    }
    return st;
}

/// Deterministic characteristic of the inviscid equation by classical RK4 on
/// (X, Y, log q) with dX = -Y, dY = Q(X, Y, t - s), d log q = div_u Q.
inline CharacteristicState solve_inviscid(const DriftField& Q, const Vec3& x, const Vec3& u, double t,
                                          double dt, const PathRecorder& record = {})
{
    CharacteristicState st = CharacteristicState::start(x, u);
    if (record)
        record(st);
    const int n = detail::step_count(t, dt);
    if (n == 0)
        return st;
    const double h = t / n;

    struct Deriv {
        Vec3 dX, dY;
        double dlq;
    };
    auto rhs = [&](double s, const Vec3& X, const Vec3& Y) -> Deriv {
        const double tau = t - s;
        return {-Y, Q(X, Y, tau), Q.divergence_u(X, Y, tau)};
    };

    for (int i = 0; i < n; ++i) {
        const double s = i * h;
        const Deriv k1 = rhs(s, st.X, st.Y);
        const Deriv k2 = rhs(s + 0.5 * h, st.X + 0.5 * h * k1.dX, st.Y + 0.5 * h * k1.dY);
        const Deriv k3 = rhs(s + 0.5 * h, st.X + 0.5 * h * k2.dX, st.Y + 0.5 * h * k2.dY);
        const Deriv k4 = rhs(s + h, st.X + h * k3.dX, st.Y + h * k3.dY);
        st.X += h / 6.0 * (k1.dX + 2.0 * k2.dX + 2.0 * k3.dX + k4.dX);
        st.Y += h / 6.0 * (k1.dY + 2.0 * k2.dY + 2.0 * k3.dY + k4.dY);
        st.log_q += h / 6.0 * (k1.dlq + 2.0 * k2.dlq + 2.0 * k3.dlq + k4.dlq);
        st.s = (i == n - 1) ? t : (i + 1) * h;
        st.q = std::exp(st.log_q);
        detail::check_state(st);
        if (record)
            record(st);
    }
    return st;
}

/// Mean part of an isotropic characteristic: Y and log q are deterministic when
/// C depends on (u, t) only, and X(t) = x - D + sqrt(2 nu) M_t with
/// D = int_0^t Y(s) ds.
struct IsotropicCharacteristic {
    Vec3 Y = Vec3::Zero();
    double log_q = 0.0;
    double q = 1.0;
    Vec3 displacement = Vec3::Zero();
};

inline IsotropicCharacteristic solve_isotropic(const DriftField& C, const Vec3& u, double t, double dt)
{
    IsotropicCharacteristic out;
    out.Y = u;
    const int n = detail::step_count(t, dt);
    if (n == 0)
        return out;
    const double h = t / n;
    const Vec3 x0 = Vec3::Zero();  // C ignores x in this regime
    struct Deriv {
        Vec3 dY;
        double dlq;
        Vec3 dD;
    };
    auto rhs = [&](double s, const Vec3& Y) -> Deriv {
        const double tau = t - s;
        return {C(x0, Y, tau), C.divergence_u(x0, Y, tau), Y};
    };
    for (int i = 0; i < n; ++i) {
        const double s = i * h;
        const Deriv k1 = rhs(s, out.Y);
        const Deriv k2 = rhs(s + 0.5 * h, out.Y + 0.5 * h * k1.dY);
        const Deriv k3 = rhs(s + 0.5 * h, out.Y + 0.5 * h * k2.dY);
        const Deriv k4 = rhs(s + h, out.Y + h * k3.dY);
        out.Y += h / 6.0 * (k1.dY + 2.0 * k2.dY + 2.0 * k3.dY + k4.dY);
        out.log_q += h / 6.0 * (k1.dlq + 2.0 * k2.dlq + 2.0 * k3.dlq + k4.dlq);
        out.displacement += h / 6.0 * (k1.dD + 2.0 * k2.dD + 2.0 * k3.dD + k4.dD);
        if (!out.Y.allFinite() || !std::isfinite(out.log_q))
            throw NumericError("isotropic characteristic became non-finite at s = " + std::to_string(s + h));
        if (std::abs(out.log_q) > max_log_weight)
            throw OverflowError("isotropic characteristic weight overflow at s = " + std::to_string(s + h));
    }
    out.q = std::exp(out.log_q);
    return out;
}

// ---------------------------------------------------------------------------
// Linear drift C^i = 2 a^i u^i + b^i x^i + c^i(s), solved per axis through the
// 2x2 generator L = [[2a, b], [-1, 0]] acting on (Y^i, X^i).

struct LinearAxis {
    double a = 0.0;
    double b = 0.0;
    std::function<double(double)> c;  // forcing as a function of internal time; empty means 0

    double lambda1() const { return a + std::sqrt(a * a - b); }
    double lambda2() const { return a - std::sqrt(a * a - b); }
};

struct LinearCModel {
    std::array<LinearAxis, 3> axes;

    void validate() const
    {
        for (const LinearAxis& ax : axes)
            if (!(ax.a * ax.a - ax.b > 0.0))
                throw DomainError("linear drift requires a^2 > b on every axis");
    }
};

/// exp(L s) from the eigen-decomposition with distinct real eigenvalues.
inline Eigen::Matrix2d linear_propagator(const LinearAxis& ax, double s)
{
    if (!(ax.a * ax.a - ax.b > 0.0))
        throw DomainError("linear drift requires a^2 > b");
    const double l1 = ax.lambda1(), l2 = ax.lambda2();
    if (std::abs(l1 - l2) < 1e-10)
        throw DomainError("degenerate eigenvalues in linear drift (|l1 - l2| < 1e-10)");
    const double e1 = std::exp(l1 * s), e2 = std::exp(l2 * s);
    Eigen::Matrix2d m;
    m(0, 0) = -l1 * e1 + l2 * e2;
    m(0, 1) = ax.b * (-e1 + e2);
    m(1, 0) = e1 - e2;
    m(1, 1) = l2 * e1 - l1 * e2;
    return m / (l2 - l1);
}

struct LinearCSolution {
    Vec3 mean_Y = Vec3::Zero();
    Vec3 mean_X = Vec3::Zero();
    Vec3 sensitivity = Vec3::Zero();  // dY^i(s) / du^i
};

/// Closed-form mean characteristic of the linear drift. The noise enters X
/// additively with zero mean, so nu does not affect the returned means.
inline LinearCSolution linearC_solution(const LinearCModel& model, const Vec3& u, const Vec3& x, double s,
                                        double nu, int forcing_order = 32)
{
    model.validate();
    if (!(nu >= 0.0))
        throw DomainError("viscosity must be non-negative");
    LinearCSolution out;
    for (int i = 0; i < 3; ++i) {
        const LinearAxis& ax = model.axes[i];
        const Eigen::Matrix2d P = linear_propagator(ax, s);
        Eigen::Vector2d state = P * Eigen::Vector2d(u[i], x[i]);
        if (ax.c && s > 0.0) {
            const Rule rule = gauss_legendre_nodes(forcing_order, 0.0, s);
            for (std::size_t k = 0; k < rule.size(); ++k) {
                const double r = rule.nodes[k];
                state += rule.weights[k] * linear_propagator(ax, s - r).col(0) * ax.c(r);
            }
        }
        out.mean_Y[i] = state[0];
        out.mean_X[i] = state[1];
        out.sensitivity[i] = P(0, 0);
    }
    return out;
}

/// Internal time at which Y^i(s) stops depending on u^i:
/// ln(l2 / l1) / (l1 - l2), defined for a < 0 < b < a^2.
inline double linearC_s_star(double a, double b)
{
    if (!(a * a > b))
        throw DomainError("linearC_s_star requires a^2 > b");
    if (!(b > 0.0) || !(a < 0.0))
        throw DomainError("linearC_s_star requires a < 0 and b > 0");
    const LinearAxis ax{a, b, {}};
    const double l1 = ax.lambda1(), l2 = ax.lambda2();
    return std::log(l2 / l1) / (l1 - l2);
}

/// The linear model as a drift field, C^i(x, u, tau) = 2 a^i u^i + b^i x^i + c^i(tau).
inline DriftField linear_drift(const LinearCModel& model)
{
    DriftField d;
    d.name = "linear";
    d.value = [model](const Vec3& x, const Vec3& u, double tau) -> Vec3 {
        Vec3 c;
        for (int i = 0; i < 3; ++i) {
            const LinearAxis& ax = model.axes[i];
            c[i] = 2.0 * ax.a * u[i] + ax.b * x[i] + (ax.c ? ax.c(tau) : 0.0);
        }
        return c;
    };
    const double div = 2.0 * (model.axes[0].a + model.axes[1].a + model.axes[2].a);
    d.divergence = [div](const Vec3&, const Vec3&, double) { return div; };
    d.x_independent = model.axes[0].b == 0.0 && model.axes[1].b == 0.0 && model.axes[2].b == 0.0;
    return d;
}

} // namespace pdfflow
