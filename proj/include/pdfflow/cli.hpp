#pragma once

// Command-line front end. run() takes the arguments after the program name and
// returns the process exit code:
//   0 ok, 1 configuration/domain error or refused overwrite,
//   2 numeric failure (NaN, weight overflow) or I/O error,
//   3 an assertable check failed under --strict.

#include "pdfflow/catalog.hpp"
#include "pdfflow/characteristics.hpp"
#include "pdfflow/config.hpp"
#include "pdfflow/estimator.hpp"
#include "pdfflow/flow_model.hpp"
#include "pdfflow/invariants.hpp"
#include "pdfflow/io.hpp"
#include "pdfflow/showcase.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace pdfflow::cli {

using io::json;
namespace fs = std::filesystem;

enum Exit : int { ok = 0, config_error = 1, numeric_error = 2, strict_failure = 3 };

inline Vec3 parse_vec(const std::string& s, const char* what)
{
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size())
                throw std::invalid_argument(item);
        }
        catch (const std::exception&) {
            throw ConfigError(std::string("--") + what + ": cannot parse '" + item + "'");
        }
    }
    if (v.size() != 3)
        throw ConfigError(std::string("--") + what + " expects three comma-separated numbers, got '" + s + "'");
    return Vec3(v[0], v[1], v[2]);
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json matrix_json(const Mat3& m)
{
    json a = json::array();
    for (int i = 0; i < 3; ++i)
        a.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
    return a;
}

inline json estimate_json(const PdfEstimate& e)
{
    return {{"value", io::number(e.value)},         {"stderr", io::number(e.std_error)},
            {"n_samples", e.n_samples},             {"dt", e.dt},
            {"method", to_string(e.method)},        {"max_abs_log_q", e.max_abs_log_q},
            {"warnings", e.warnings}};
}

// ---------------------------------------------------------------------------
// Verification suites.

inline const std::vector<std::string>& suite_names()
{
    static const std::vector<std::string> names{"all",  "beta",     "q",          "mass",      "divergence",
                                                "pde",  "moment",   "positivity", "diffusion", "classify"};
    return names;
}

/// Probe points shared by the flow-level suites.
inline std::vector<SamplePoint> probe_samples()
{
    return {{Vec3(0.0, 0.0, 0.0), Vec3(0.4, -0.3, 0.2), Vec3(0.5, 0.5, 0.3), 0.5},
            {Vec3(0.3, -0.7, 1.1), Vec3(0.9, -0.2, 1.5), Vec3(-0.6, 0.8, -0.4), 1.0},
            {Vec3(-1.2, 0.4, 0.0), Vec3(-0.7, 0.1, 0.6), Vec3(0.9, -1.3, 2.0), 2.0}};
}

/// Maps a report name to its check key in the config's classification.
inline std::string check_key(const std::string& report)
{
    if (report == "pde_residual_order" || report == "pde_residual_stationary")
        return "pde_residual";
    if (report == "C_closed_form")
        return "Q_vanishing";
    return report;
}

inline std::vector<VerificationReport> run_suite(const std::string& suite, const config::RunConfig& rc)
{
    const auto wants = [&](const char* s) { return suite == "all" || suite == s; };
    std::vector<VerificationReport> out;
    const FlowSpec flow = config::build_flow(rc);
    const QuadratureConfig& quad = rc.estimator.quad;
    const auto samples = probe_samples();

    if (wants("beta"))
        out.push_back(showcase::verify_beta_properties());

    if (wants("q")) {
        if (rc.flow.statistics == "showcase") {
            for (const auto& s : samples)
                out.push_back(showcase::showcase_Q_residual(s.x, s.u, s.t, quad));
        }
        else {
            // numerical C from the statistics against the catalog's closed form
            const auto entry = catalog::statistics(rc.flow.statistics);
            const DriftField closed = entry.closed_form_drift(rc.flow.nu);
            FlowSpec numeric = flow;
            numeric.drift.reset();
            for (const auto& s : samples) {
                VerificationReport r;
                r.name = "C_closed_form";
                r.assertable = true;
                r.tolerance = 1e-5;
                const Vec3 c = eval_C(numeric, s.x, s.u, s.t, quad).C;
                const Vec3 ref = closed(s.x, s.u, s.t);
                r.value = (c - ref).cwiseAbs().maxCoeff();
                r.measured = {{"C1", c[0]}, {"C2", c[1]}, {"C3", c[2]},
                              {"closed_C1", ref[0]}, {"closed_C2", ref[1]}, {"closed_C3", ref[2]}};
                r.config = {{"statistics", rc.flow.statistics}, {"x", format_vec(s.x)},
                            {"u", format_vec(s.u)}, {"t", format_double_short(s.t)}};
                out.push_back(r.finish());
            }
        }
    }

    if (wants("mass")) {
        const Vec3 sd = showcase::spec().sigma_diag.cwiseSqrt();
        VerificationReport g = check_mass([](const Vec3& u) { return showcase::alpha(u); },
                                          gaussian_plan(Vec3::Zero(), sd, 16), 1e-8, true);
        g.name = "gaussian_mass";
        out.push_back(g);
        out.push_back(showcase::check_example_mass(Vec3::Zero(), 0.5));
    }

    if (wants("divergence")) {
        out.push_back(showcase::check_example_divergence(Vec3::Zero(), 0.5));
        if (flow.statistics) {
            const ClassificationReport c = classify_flow(*flow.statistics, samples, 1e-6);
            VerificationReport r;
            r.name = "divergence_constraints";
            r.tolerance = c.tol;
            r.value = std::max({c.max_div_rho, c.max_trace_B, c.max_A_contracted});
            r.measured = {{"max_div_rho", c.max_div_rho},
                          {"max_trace_B", c.max_trace_B},
                          {"max_A_contracted", c.max_A_contracted}};
            r.config = {{"statistics", flow.statistics->name}, {"samples", std::to_string(samples.size())}};
            out.push_back(r.finish());
        }
    }

    if (wants("pde")) {
        // alpha is an exact stationary solution when C = 0
        VerificationReport s = check_pde_residual(
            [](const Vec3& u, const Vec3&, double) { return showcase::alpha(u); }, zero_drift(), rc.flow.nu,
            Vec3(0.5, 0.6, 0.7), Vec3(0.1, -0.2, 0.3), 0.5, 1e-2, 1e-12, true);
        s.name = "pde_residual_stationary";
        out.push_back(s);
        out.push_back(showcase::check_example_pde_order(Vec3(0.5, 0.6, 0.7), Vec3(0.1, -0.2, 0.3), 0.5));
    }

    if (wants("moment"))
        out.push_back(showcase::check_example_moment(Vec3::Zero(), 0.5));

    if (wants("positivity")) {
        std::vector<Vec3> xs{Vec3::Zero()};
        for (double v : {-1.0, 1.0})
            for (int k = 0; k < 3; ++k)
                xs.push_back(v * unit(k));
        out.push_back(check_positivity_bound(region_corner_grid(), xs));
    }

    if (wants("diffusion") && flow.statistics) {
        VerificationReport r;
        r.name = "diffusion_psd";
        r.tolerance = 1e-10;
        double worst = std::numeric_limits<double>::infinity(), asym = 0.0;
        for (const auto& s : samples) {
            const DiffusionReport d = diffusion_matrix(eval_B(*flow.statistics, s.x, s.u, s.t), rc.flow.nu);
            worst = std::min(worst, d.eigenvalues.minCoeff());
            asym = std::max(asym, d.asymmetry);
        }
        r.value = std::max(0.0, -worst);
        r.measured = {{"min_eigenvalue", worst}, {"max_asymmetry", asym}};
        r.config = {{"statistics", flow.statistics->name}, {"nu", format_double_short(rc.flow.nu)}};
        out.push_back(r.finish());
    }

    if (wants("classify") && flow.statistics) {
        const ClassificationReport c = classify_flow(*flow.statistics, samples, 1e-6);
        VerificationReport r;
        r.name = "classification";
        r.tolerance = c.tol;
        // distance from the regime the flow is run under
        switch (flow.regime) {
        case Regime::weakly_homogeneous: r.value = c.max_abs_B; break;
        case Regime::weakly_isotropic:
            r.value = std::max({c.rho_rotation_deviation, c.sigma_rotation_deviation, c.A_x_variation});
            break;
        default: r.value = 0.0; break;
        }
        r.measured = {{"max_abs_B", c.max_abs_B},
                      {"rho_rotation_deviation", c.rho_rotation_deviation},
                      {"sigma_rotation_deviation", c.sigma_rotation_deviation},
                      {"A_x_variation", c.A_x_variation},
                      {"lipschitz_probe", c.lipschitz_probe}};
        r.config = {{"statistics", flow.statistics->name}, {"tag", to_string(c.tag)},
                    {"regime", to_string(flow.regime)}};
        r.notes = c.notes;
        out.push_back(r.finish());
    }

    for (auto& r : out) {
        const auto it = rc.assertable.find(check_key(r.name));
        if (it != rc.assertable.end()) {
            r.assertable = it->second;
            r.finish();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace detail {

struct Common {
    std::string config_path;
    bool force = false;
    std::string out;
};

inline json run_meta(const std::string& verb, const json& args, const config::RunConfig& rc)
{
    json m;
    m["verb"] = verb;
    m["args"] = args;
    m["config"] = config::to_json(rc);
    return m;
}

/// Sends `content` to `out_path` (with a sidecar) or to the stream.
inline void emit(const std::string& out_path, const std::string& content, const json& meta, bool force,
                 std::ostream& out)
{
    if (out_path.empty()) {
        out << content;
        if (!content.empty() && content.back() != '\n')
            out << '\n';
        return;
    }
    io::write_with_meta(out_path, content, meta, force);
}

} // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"pdfflow: velocity PDF evolution by characteristics and Monte Carlo"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "pdfflow 1.0");

    detail::Common common;
    auto add_common = [&](CLI::App* sub, bool with_out) {
        sub->add_option("--config", common.config_path, "JSON run configuration");
        if (with_out) {
            sub->add_option("--out", common.out, "output path");
            sub->add_flag("--force", common.force, "overwrite existing artifacts");
        }
    };

    std::string x_s = "0,0,0", u_s = "0.5,0.5,0.3";
    double t = 0.5;

    CLI::App* coeffs = app.add_subcommand("coeffs", "B, A, Q, C and the diffusion matrix at one point");
    add_common(coeffs, true);
    coeffs->add_option("--x", x_s, "position x1,x2,x3");
    coeffs->add_option("--u", u_s, "velocity u1,u2,u3");
    coeffs->add_option("--t", t, "time");

    CLI::App* est = app.add_subcommand("estimate", "p(u; x, t) at one point");
    add_common(est, true);
    est->add_option("--x", x_s, "position x1,x2,x3");
    est->add_option("--u", u_s, "velocity u1,u2,u3");
    est->add_option("--t", t, "time");
    long long n_override = 0;
    est->add_option("--samples", n_override, "override estimator.n_samples");

    CLI::App* slice = app.add_subcommand("slice", "p over a 2-D grid of u");
    add_common(slice, true);
    slice->add_option("--x", x_s, "position x1,x2,x3");
    slice->add_option("--t", t, "time");
    int fixed_axis = 3, n1 = 21, n2 = 21;
    double fixed_value = 0.3, lo = -3.0, hi = 3.0;
    slice->add_option("--fixed-axis", fixed_axis, "held u axis (1-3)")->check(CLI::Range(1, 3));
    slice->add_option("--fixed-value", fixed_value, "value of the held axis");
    slice->add_option("--lo", lo, "lower grid bound");
    slice->add_option("--hi", hi, "upper grid bound");
    slice->add_option("--n1", n1, "nodes along the first free axis");
    slice->add_option("--n2", n2, "nodes along the second free axis");

    CLI::App* verify = app.add_subcommand("verify", "run verification checks, JSON report");
    add_common(verify, true);
    std::string suite = "all";
    bool strict_flag = false;
    verify->add_option("--suite", suite, "check suite")->check(CLI::IsMember(suite_names()));
    verify->add_flag("--strict", strict_flag, "exit 3 when an assertable check fails");

    CLI::App* example = app.add_subcommand("example", "figure data for the worked example");
    add_common(example, false);
    std::string figure = "all", out_dir, method;
    bool ex_force = false;
    example->add_option("--figure", figure, "t05, t40, t40x12 or all")
        ->check(CLI::IsMember({"t05", "t40", "t40x12", "all"}));
    example->add_option("--out", out_dir, "output directory")->required();
    example->add_flag("--force", ex_force, "overwrite existing artifacts");
    example->add_option("--method", method, "mc or gauss_hermite (overrides figure.method)");

    CLI::App* charac = app.add_subcommand("characteristic", "one characteristic path as CSV");
    add_common(charac, true);
    charac->add_option("--x", x_s, "position x1,x2,x3");
    charac->add_option("--u", u_s, "velocity u1,u2,u3");
    charac->add_option("--t", t, "horizon");
    std::uint64_t path_index = 0;
    charac->add_option("--path", path_index, "path index for the noise stream");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : config_error;
    }

    try {
        const config::RunConfig rc =
            config::parse_config(common.config_path.empty() ? std::string() : read_file(common.config_path));

        if (*coeffs) {
            const Vec3 x = parse_vec(x_s, "x"), u = parse_vec(u_s, "u");
            const FlowSpec flow = config::build_flow(rc);
            FlowSpec numeric = flow;
            if (flow.statistics)
                numeric.drift.reset();  // report the coefficients of the statistics themselves
            const CoefficientField f = eval_C(numeric, x, u, t, rc.estimator.quad);
            json j;
            j["flow"] = flow.name;
            j["x"] = io::to_json(x);
            j["u"] = io::to_json(u);
            j["t"] = t;
            if (f.B)
                j["B"] = matrix_json(*f.B);
            if (f.A)
                j["A"] = io::to_json(*f.A);
            if (f.Q)
                j["Q"] = io::to_json(*f.Q);
            if (f.div_B)
                j["div_B"] = io::to_json(*f.div_B);
            j["C"] = io::to_json(f.C);
            j["Q_converged"] = f.q_converged;
            if (flow.drift)
                j["C_used"] = io::to_json((*flow.drift)(x, u, t));
            if (f.B) {
                const DiffusionReport d = diffusion_matrix(*f.B, flow.viscosity);
                json D = json::array();
                for (int i = 0; i < 6; ++i) {
                    json row = json::array();
                    for (int k = 0; k < 6; ++k)
                        row.push_back(d.D(i, k));
                    D.push_back(row);
                }
                json ev = json::array();
                for (int i = 0; i < 6; ++i)
                    ev.push_back(d.eigenvalues[i]);
                j["diffusion"] = {{"D", D}, {"symmetric", d.symmetric}, {"psd", d.psd}, {"eigenvalues", ev}};
            }
            const json margs = {{"x", io::to_json(x)}, {"u", io::to_json(u)}, {"t", t}};
            detail::emit(common.out, io::dump(j), detail::run_meta("coeffs", margs, rc), common.force, out);
            return ok;
        }

        if (*est) {
            const Vec3 x = parse_vec(x_s, "x"), u = parse_vec(u_s, "u");
            const FlowSpec flow = config::build_flow(rc);
            const InitialDensity p0 = config::build_density(rc);
            EstimatorConfig ec = rc.estimator;
            if (n_override > 0)
                ec.n_samples = n_override;
            const PdfEstimate e = estimate(flow, p0, x, u, t, ec);
            for (const auto& w : e.warnings)
                err << "warning: " << w << '\n';
            const json margs = {{"x", io::to_json(x)}, {"u", io::to_json(u)}, {"t", t},
                                {"n_samples", ec.n_samples}};
            if (common.out.empty()) {
                out << "value " << format_double(e.value) << '\n'
                    << "stderr " << format_double(e.std_error) << '\n';
            }
            else {
                json j = estimate_json(e);
                j["x"] = io::to_json(x);
                j["u"] = io::to_json(u);
                j["t"] = t;
                io::write_with_meta(common.out, io::dump(j), detail::run_meta("estimate", margs, rc), common.force);
            }
            return ok;
        }

        if (*slice) {
            const Vec3 x = parse_vec(x_s, "x");
            const FlowSpec flow = config::build_flow(rc);
            const InitialDensity p0 = config::build_density(rc);
            SliceGrid g;
            g.fixed_axis = fixed_axis - 1;
            g.fixed_value = fixed_value;
            g.first = {lo, hi, n1};
            g.second = {lo, hi, n2};
            const DensityField field = density_slice(flow, p0, g, x, t, rc.estimator);
            for (const auto& w : field.warnings)
                err << "warning: " << w << '\n';
            const json margs = {{"x", io::to_json(x)}, {"t", t}, {"fixed_axis", fixed_axis},
                                {"fixed_value", fixed_value}, {"lo", lo}, {"hi", hi}, {"n1", n1}, {"n2", n2}};
            json meta = detail::run_meta("slice", margs, rc);
            meta["seed"] = rc.estimator.seed;
            meta["method"] = field.method;
            meta["failed_nodes"] = field.failed_nodes;
            detail::emit(common.out, density_csv(field, false), meta, common.force, out);
            return ok;
        }

        if (*verify) {
            const bool strict = strict_flag || rc.strict;
            const std::vector<VerificationReport> reports = run_suite(suite, rc);
            const json margs = {{"suite", suite}, {"strict", strict}};
            detail::emit(common.out, io::dump(io::to_json(reports)), detail::run_meta("verify", margs, rc),
                         common.force, out);
            bool failed = false;
            for (const auto& r : reports) {
                if (r.status == Status::fail) {
                    failed = true;
                    err << "check failed: " << r.name << " value " << format_double(r.value) << " tolerance "
                        << format_double(r.tolerance) << '\n';
                }
            }
            return strict && failed ? strict_failure : ok;
        }

        if (*example) {
            showcase::FigureConfig fc;
            fc.grid = config::figure_grid(rc.figure);
            fc.method = showcase::parse_smoothing(method.empty() ? rc.figure.method : method);
            fc.gh_order = rc.figure.gh_order;
            fc.mc_samples = rc.figure.mc_samples;
            fc.seed = rc.estimator.seed;
            std::vector<showcase::Figure> figs;
            if (figure == "all")
                figs = {showcase::Figure::t05, showcase::Figure::t40, showcase::Figure::t40x12};
            else
                figs = {showcase::parse_figure(figure)};
            // refuse before computing anything
            if (!ex_force) {
                for (auto f : figs) {
                    const fs::path p = fs::path(out_dir) / (showcase::to_string(f) + ".csv");
                    if (fs::exists(p) || fs::exists(io::meta_path(p)))
                        throw io::OverwriteError("refusing to overwrite " + p.string() + " (use --force)");
                }
            }
            json cfg = config::to_json(rc);
            cfg["figure"]["method"] = showcase::to_string(*fc.method);
            for (auto f : figs) {
                const auto d = showcase::emit_figure_data(f, fc, out_dir, ex_force, cfg);
                out << showcase::to_string(f) << ": " << d.field.values.size() << " nodes, "
                    << d.field.extra_rows.size() << " boundary rows\n";
            }
            return ok;
        }

        if (*charac) {
            const Vec3 x = parse_vec(x_s, "x"), u = parse_vec(u_s, "u");
            const FlowSpec flow = config::build_flow(rc);
            const DriftField C = effective_drift(flow, rc.estimator.quad);
            std::string csv = "s,X1,X2,X3,Y1,Y2,Y3,q\n";
            auto record = [&](const CharacteristicState& st) {
                csv += format_double(st.s);
                for (int k = 0; k < 3; ++k)
                    csv += ',' + format_double(st.X[k]);
                for (int k = 0; k < 3; ++k)
                    csv += ',' + format_double(st.Y[k]);
                csv += ',' + format_double(st.q) + '\n';
            };
            if (flow.regime == Regime::inviscid)
                solve_inviscid(C, x, u, t, rc.estimator.dt, record);
            else
                integrate_homogeneous_path(C, flow.viscosity, x, u, t, rc.estimator.dt,
                                           NoiseSpec{rc.estimator.seed, path_index, 0}, 1.0, record);
            const json margs = {{"x", io::to_json(x)}, {"u", io::to_json(u)}, {"t", t}, {"path", path_index}};
            detail::emit(common.out, csv, detail::run_meta("characteristic", margs, rc), common.force, out);
            return ok;
        }
    }
    catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return numeric_error;
    }
    catch (const IoError& e) {
        err << "io error: " << e.what() << '\n';
        return numeric_error;
    }
    catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return config_error;
    }
    catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return config_error;
    }
    catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return numeric_error;
    }
    return ok;
}

} // namespace pdfflow::cli
