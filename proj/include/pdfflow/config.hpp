#pragma once

// Run configuration: JSON schema (version 1), defaults, validation and the
// mapping onto library objects. Unknown keys are rejected with their path.

#include "pdfflow/catalog.hpp"
#include "pdfflow/estimator.hpp"
#include "pdfflow/flow_model.hpp"
#include "pdfflow/io.hpp"
#include "pdfflow/showcase.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>

namespace pdfflow::config {

using io::json;

inline constexpr int schema_version = 1;

struct FlowConfig {
    std::string statistics = "showcase";
    // catalog: closed-form C of the statistics entry; statistics: C from the
    // kernel integral at every evaluation; zero, damping, linear: explicit C.
    std::string drift = "catalog";
    double k = 1.0;  // damping rate
    Vec3 a = Vec3::Constant(-2.0), b = Vec3::Constant(1.0), c = Vec3::Zero();  // linear drift
    std::optional<Regime> regime;  // default: inviscid when nu = 0, else weakly_homogeneous
    double nu = 1.0;

    Regime effective_regime() const
    {
        return regime.value_or(nu == 0.0 ? Regime::inviscid : Regime::weakly_homogeneous);
    }
};

struct DensityConfig {
    std::string kind = "showcase";  // showcase, alpha, gaussian
    Vec3 mean = Vec3::Zero();
    Vec3 variance = Vec3::Ones();
};

struct FigureOptions {
    int n1 = 121, n2 = 121;
    double lo = -3.0, hi = 3.0;
    double u3 = 0.3;
    std::string method = "mc";
    long long mc_samples = 20000;
    int gh_order = 40;
};

/// Check classification. Assertable checks can fail a --strict run.
inline const std::map<std::string, bool>& default_assertable()
{
    static const std::map<std::string, bool> m{
        {"beta_properties", true},    {"Q_vanishing", true},      {"pde_residual", true},
        {"gaussian_mass", true},      {"mass", false},            {"divergence_free", false},
        {"moment_identity", false},   {"positivity_bound", false}, {"divergence_constraints", false},
        {"diffusion_psd", false},     {"classification", false},
    };
    return m;
}

struct RunConfig {
    int version = schema_version;
    FlowConfig flow;
    DensityConfig initial_density;
    EstimatorConfig estimator;
    FigureOptions figure;
    std::map<std::string, bool> assertable = default_assertable();
    bool strict = false;
};

namespace detail {

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> keys)
{
    if (!obj.is_object())
        throw ConfigError("config: '" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + (path.empty() ? "" : path + ".") + it.key() + "'");
}

template <class T>
T get(const json& obj, const char* key, const std::string& path, T fallback)
{
    if (!obj.contains(key))
        return fallback;
    try {
        return obj.at(key).get<T>();
    }
    catch (const json::exception&) {
        throw ConfigError("config: '" + path + "." + key + "' has the wrong type");
    }
}

inline double get_number(const json& obj, const char* key, const std::string& path, double fallback)
{
    if (!obj.contains(key))
        return fallback;
    const json& v = obj.at(key);
    if (!v.is_number())
        throw ConfigError("config: '" + path + "." + key + "' must be a number");
    return v.get<double>();
}

inline Vec3 get_vec(const json& obj, const char* key, const std::string& path, const Vec3& fallback)
{
    if (!obj.contains(key))
        return fallback;
    const json& v = obj.at(key);
    if (v.is_number())
        return Vec3::Constant(v.get<double>());
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
        throw ConfigError("config: '" + path + "." + key + "' must be a number or an array of 3 numbers");
    return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

} // namespace detail

/// Parses and validates a configuration document. Missing keys take defaults.
inline RunConfig parse_config(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text.empty() ? std::string("{}") : text);
    }
    catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    using detail::get;
    using detail::get_number;
    using detail::get_vec;
    detail::reject_unknown(doc, "", {"schema_version", "flow", "initial_density", "estimator", "quadrature",
                                     "figure", "checks", "strict"});
    RunConfig rc;
    rc.version = get<int>(doc, "schema_version", "", schema_version);
    if (rc.version != schema_version)
        throw ConfigError("config: unsupported schema_version " + std::to_string(rc.version) +
                          " (expected " + std::to_string(schema_version) + ")");

    if (doc.contains("flow")) {
        const json& f = doc["flow"];
        detail::reject_unknown(f, "flow", {"statistics", "drift", "regime", "nu", "k", "a", "b", "c"});
        rc.flow.statistics = get<std::string>(f, "statistics", "flow", rc.flow.statistics);
        rc.flow.drift = get<std::string>(f, "drift", "flow", rc.flow.drift);
        if (f.contains("regime"))
            rc.flow.regime = parse_regime(get<std::string>(f, "regime", "flow", ""));
        rc.flow.nu = get_number(f, "nu", "flow", rc.flow.nu);
        rc.flow.k = get_number(f, "k", "flow", rc.flow.k);
        rc.flow.a = get_vec(f, "a", "flow", rc.flow.a);
        rc.flow.b = get_vec(f, "b", "flow", rc.flow.b);
        rc.flow.c = get_vec(f, "c", "flow", rc.flow.c);
    }
    if (doc.contains("initial_density")) {
        const json& d = doc["initial_density"];
        if (d.is_string()) {
            rc.initial_density.kind = d.get<std::string>();
        }
        else {
            detail::reject_unknown(d, "initial_density", {"kind", "mean", "variance"});
            rc.initial_density.kind = get<std::string>(d, "kind", "initial_density", rc.initial_density.kind);
            rc.initial_density.mean = get_vec(d, "mean", "initial_density", rc.initial_density.mean);
            rc.initial_density.variance = get_vec(d, "variance", "initial_density", rc.initial_density.variance);
        }
    }
    if (doc.contains("estimator")) {
        const json& e = doc["estimator"];
        detail::reject_unknown(e, "estimator",
                               {"n_samples", "dt", "seed", "gh_order", "antithetic", "allow_general"});
        auto& est = rc.estimator;
        est.n_samples = get<long long>(e, "n_samples", "estimator", est.n_samples);
        est.dt = get_number(e, "dt", "estimator", est.dt);
        est.seed = get<std::uint64_t>(e, "seed", "estimator", est.seed);
        est.gh_order = get<int>(e, "gh_order", "estimator", est.gh_order);
        est.antithetic = get<bool>(e, "antithetic", "estimator", est.antithetic);
        est.allow_general = get<bool>(e, "allow_general", "estimator", est.allow_general);
    }
    if (doc.contains("quadrature")) {
        const json& q = doc["quadrature"];
        detail::reject_unknown(q, "quadrature",
                               {"gl_order", "gh_order", "radial_nodes", "polar_nodes", "azimuthal_nodes",
                                "radius", "tolerance", "stencil_step", "check_radius"});
        auto& qc = rc.estimator.quad;
        qc.gl_order = get<int>(q, "gl_order", "quadrature", qc.gl_order);
        qc.gh_order = get<int>(q, "gh_order", "quadrature", qc.gh_order);
        qc.radial_nodes = get<int>(q, "radial_nodes", "quadrature", qc.radial_nodes);
        qc.polar_nodes = get<int>(q, "polar_nodes", "quadrature", qc.polar_nodes);
        qc.azimuthal_nodes = get<int>(q, "azimuthal_nodes", "quadrature", qc.azimuthal_nodes);
        qc.radius = get_number(q, "radius", "quadrature", qc.radius);
        qc.tolerance = get_number(q, "tolerance", "quadrature", qc.tolerance);
        qc.stencil_step = get_number(q, "stencil_step", "quadrature", qc.stencil_step);
        qc.check_radius = get<bool>(q, "check_radius", "quadrature", qc.check_radius);
    }
    if (doc.contains("figure")) {
        const json& g = doc["figure"];
        detail::reject_unknown(g, "figure", {"n1", "n2", "lo", "hi", "u3", "method", "mc_samples", "gh_order"});
        auto& fo = rc.figure;
        fo.n1 = get<int>(g, "n1", "figure", fo.n1);
        fo.n2 = get<int>(g, "n2", "figure", fo.n2);
        fo.lo = get_number(g, "lo", "figure", fo.lo);
        fo.hi = get_number(g, "hi", "figure", fo.hi);
        fo.u3 = get_number(g, "u3", "figure", fo.u3);
        fo.method = get<std::string>(g, "method", "figure", fo.method);
        fo.mc_samples = get<long long>(g, "mc_samples", "figure", fo.mc_samples);
        fo.gh_order = get<int>(g, "gh_order", "figure", fo.gh_order);
    }
    if (doc.contains("checks")) {
        const json& c = doc["checks"];
        if (!c.is_object())
            throw ConfigError("config: 'checks' must be an object");
        for (auto it = c.begin(); it != c.end(); ++it) {
            if (!rc.assertable.count(it.key()))
                throw ConfigError("config: unknown key 'checks." + it.key() + "'");
            const std::string v = it.value().is_string() ? it.value().get<std::string>() : "";
            if (v != "assertable" && v != "diagnostic")
                throw ConfigError("config: 'checks." + it.key() + "' must be \"assertable\" or \"diagnostic\"");
            rc.assertable[it.key()] = v == "assertable";
        }
    }
    rc.strict = get<bool>(doc, "strict", "", rc.strict);

    // Consistency.
    if (rc.flow.effective_regime() == Regime::inviscid && rc.flow.nu != 0.0)
        throw ConfigError("config: regime 'inviscid' requires nu = 0 (got " + format_double(rc.flow.nu) + ")");
    if (!(rc.flow.nu >= 0.0))
        throw ConfigError("config: nu must be non-negative");
    rc.estimator.validate();
    if (rc.figure.n1 < 1 || rc.figure.n2 < 1 || !(rc.figure.lo < rc.figure.hi))
        throw ConfigError("config: figure grid needs n1, n2 >= 1 and lo < hi");
    if (rc.figure.mc_samples < 2 || rc.figure.gh_order < 2)
        throw ConfigError("config: figure needs mc_samples >= 2 and gh_order >= 2");
    showcase::parse_smoothing(rc.figure.method);
    catalog::statistics(rc.flow.statistics);  // throws on unknown names
    return rc;
}

inline json to_json(const RunConfig& rc)
{
    json j;
    j["schema_version"] = rc.version;
    j["flow"] = {{"statistics", rc.flow.statistics},
                 {"drift", rc.flow.drift},
                 {"regime", to_string(rc.flow.effective_regime())},
                 {"nu", rc.flow.nu},
                 {"k", rc.flow.k},
                 {"a", io::to_json(rc.flow.a)},
                 {"b", io::to_json(rc.flow.b)},
                 {"c", io::to_json(rc.flow.c)}};
    j["initial_density"] = {{"kind", rc.initial_density.kind},
                            {"mean", io::to_json(rc.initial_density.mean)},
                            {"variance", io::to_json(rc.initial_density.variance)}};
    const auto& e = rc.estimator;
    j["estimator"] = {{"n_samples", e.n_samples}, {"dt", e.dt},
                      {"seed", e.seed},           {"gh_order", e.gh_order},
                      {"antithetic", e.antithetic}, {"allow_general", e.allow_general}};
    const auto& q = e.quad;
    j["quadrature"] = {{"gl_order", q.gl_order},         {"gh_order", q.gh_order},
                       {"radial_nodes", q.radial_nodes}, {"polar_nodes", q.polar_nodes},
                       {"azimuthal_nodes", q.azimuthal_nodes}, {"radius", q.radius},
                       {"tolerance", q.tolerance},       {"stencil_step", q.stencil_step},
                       {"check_radius", q.check_radius}};
    const auto& f = rc.figure;
    j["figure"] = {{"n1", f.n1}, {"n2", f.n2}, {"lo", f.lo}, {"hi", f.hi}, {"u3", f.u3},
                   {"method", f.method}, {"mc_samples", f.mc_samples}, {"gh_order", f.gh_order}};
    json checks = json::object();
    for (const auto& [k, v] : rc.assertable)
        checks[k] = v ? "assertable" : "diagnostic";
    j["checks"] = checks;
    j["strict"] = rc.strict;
    return j;
}

inline FlowSpec build_flow(const RunConfig& rc)
{
    const FlowConfig& fc = rc.flow;
    const catalog::StatisticsEntry entry = catalog::statistics(fc.statistics);
    FlowSpec flow;
    flow.name = fc.statistics;
    flow.viscosity = fc.nu;
    flow.regime = fc.effective_regime();
    flow.statistics = entry.stats;
    if (fc.drift == "catalog") {
        flow.drift = entry.closed_form_drift(fc.nu);
    }
    else if (fc.drift == "statistics") {
        flow.drift.reset();
    }
    else if (fc.drift == "zero") {
        flow.drift = zero_drift();
    }
    else if (fc.drift == "damping") {
        flow.drift = damping_drift(fc.k);
    }
    else if (fc.drift == "linear") {
        LinearCModel m;
        for (int i = 0; i < 3; ++i) {
            const double ci = fc.c[i];
            m.axes[i].a = fc.a[i];
            m.axes[i].b = fc.b[i];
            if (ci != 0.0)
                m.axes[i].c = [ci](double) { return ci; };
        }
        flow.drift = linear_drift(m);
    }
    else {
        throw ConfigError("config: unknown drift '" + fc.drift +
                          "' (catalog, statistics, zero, damping, linear)");
    }
    flow.validate();
    return flow;
}

inline InitialDensity build_density(const RunConfig& rc)
{
    const DensityConfig& d = rc.initial_density;
    if (d.kind == "gaussian")
        return catalog::gaussian_density(d.mean, d.variance);
    return catalog::initial_density(d.kind);
}

inline SliceGrid figure_grid(const FigureOptions& f)
{
    SliceGrid g;
    g.fixed_axis = 2;
    g.fixed_value = f.u3;
    g.first = {f.lo, f.hi, f.n1};
    g.second = {f.lo, f.hi, f.n2};
    return g;
}

} // namespace pdfflow::config
