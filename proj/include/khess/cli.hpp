#pragma once

// Command-line front end: khess <command> [--config PATH] [--set key=value]...
// Exit status: 0 success, 1 validate found a failing check, 2 input error,
// 3 convergence failure.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "khess/condh.hpp"
#include "khess/config.hpp"
#include "khess/geometry.hpp"
#include "khess/lab.hpp"
#include "khess/report.hpp"
#include "khess/solver.hpp"

namespace khess::cli {

enum ExitCode : int { ok = 0, check_failed = 1, input_error = 2, convergence_failure = 3 };

struct Streams {
    std::ostream& out;
    std::ostream& err;
    bool quiet = false;

    template <class T>
    const Streams& operator<<(const T& v) const
    {
        if (!quiet) out << v;
        return *this;
    }
};

namespace detail {

inline json solution_summary(const GridField& u)
{
    const auto c = c11_parts(u);
    return {{"c11_proxy", c.value()}, {"c11_hessian", c.hessian}, {"sup_u", c.sup_u}, {"sup_grad", c.gradient},
            {"hessian_bounds", hessian_bounds(u)}};
}

inline int cmd_solve(const RunConfig& c, json& rep, const ArtifactDir& out, const Streams& s)
{
    const auto [u, r] = solve(c.problem, c.grid, std::nullopt, solve_options(c));
    rep["solve"] = r;
    rep["solution"] = solution_summary(u);
    out.write_solution(u);
    out.write_series(std::vector<double>{c.problem.theta}, std::vector<double>{c11_parts(u).value()},
                     std::vector<double>{r.final_residual});
    for (const auto& w : r.warnings) s.err << "warning: " << w << "\n";
    s << "converged in " << r.iterations << " Newton steps, residual " << r.final_residual << " (tol " << r.tolerance
      << "), c11 proxy " << c11_parts(u).value() << "\n";
    return ok;
}

inline int cmd_path(const RunConfig& c, json& rep, const ArtifactDir& out, const Streams& s)
{
    const auto sched = c.schedule.value_or(default_schedule());
    const auto p = path(c.problem, c.grid, sched, solve_options(c));
    rep["path"] = p;
    out.write_series(p);
    if (!p.entries.empty()) out.write_solution(p.entries.back().solution);
    for (const auto& e : p.entries) {
        s << "theta " << e.theta << ": " << e.report.iterations << " steps, c11 proxy " << e.c11_proxy << ", L1 residual "
          << e.l1_residual_to_f << "\n";
    }
    if (p.failed_stage) {
        s.err << "path failed at stage " << *p.failed_stage << ": " << p.failure << "\n";
        return convergence_failure;
    }
    return ok;
}

inline int cmd_check_f(const RunConfig& c, json& rep, const Streams& s)
{
    const auto a = audit(c.problem.f, c.grid, c.c0, c.problem.domain);
    const auto r = root_regularity_probe(c.problem.f, c.grid, c.problem.domain);
    rep["audit"] = a;
    rep["root_regularity"] = r;
    s << "c0_gradient " << a.c0_gradient << "\nc0_hessian " << a.c0_hessian << "\n";
    if (a.pass) s << "condition (H) with C0 = " << *c.c0 << ": " << (*a.pass ? "pass" : "fail") << "\n";
    s << "root Lipschitz estimate " << r.lipschitz_estimate << ", c11 growth exponent " << r.c11_proxy_growth_exponent << "\n";
    return ok;
}

inline int cmd_check_domain(const RunConfig& c, json& rep, const Streams& s)
{
    const auto r = is_k1_convex(c.problem.domain, c.problem.k, c.boundary_samples);
    rep["convexity"] = r;
    s << "(k-1)-convex: " << (r.pass ? "pass" : "fail") << ", margin " << khess::detail::format17(r.margin) << "\n";
    return ok;
}

inline int cmd_lab(const RunConfig& c, json& rep, const ArtifactDir& out, const Streams& s)
{
    rep["experiment"] = c.experiment;
    if (c.experiment == "concavity") {
        const auto r = concavity_experiment(c.lab_n.value_or(c.problem.n), c.lab_k.value_or(c.problem.k), c.samples, c.seed);
        rep["result"] = r;
        s << "concavity n=" << r.n << " k=" << r.k << ": " << r.violations << " violations, worst gap " << r.worst_gap << "\n";
    } else if (c.experiment == "maclaurin") {
        const auto r = maclaurin_constant_experiment(c.lab_n.value_or(c.problem.n), c.lab_k.value_or(c.problem.k), c.samples, c.seed);
        rep["result"] = r;
        s << "maclaurin n=" << r.n << " k=" << r.k << ": min ratio " << r.min_ratio << ", bound " << r.analytic_bound << ", "
          << r.violations << " violations\n";
    } else {
        const auto sched = c.schedule.value_or(default_schedule());
        const auto dirs = c.directions.empty() ? axis_directions(c.problem.n) : c.directions;
        if (c.experiment == "interior_boundary") {
            const auto r = interior_boundary_experiment(c.problem, c.grid, dirs, sched, solve_options(c));
            rep["result"] = r;
            std::vector<double> worst;
            for (std::size_t i = 0; i < r.thetas.size(); ++i) worst.push_back(r.max_gap(i));
            auto os = std::ofstream(out.path() / "series.csv");
            os << "theta,max_gap\n";
            for (std::size_t i = 0; i < r.thetas.size(); ++i) {
                os << khess::detail::format17(r.thetas[i]) << ',' << khess::detail::format17(worst[i]) << '\n';
                s << "theta " << r.thetas[i] << ": max gap " << worst[i] << "\n";
            }
            s << "gap stable along the path: " << (r.stable ? "yes" : "no") << "\n";
        } else {
            const auto r = theta_independence_experiment(c.problem, c.grid, sched, solve_options(c));
            rep["result"] = r;
            out.write_series(r.thetas, r.c11_series, r.final_residuals);
            s << "c11 proxy max/min over the schedule: " << r.max_over_min << "\n";
        }
    }
    return ok;
}

struct Check {
    std::string name;
    double value;
    std::string target;
    bool pass;
};

/// The built-in pipeline on the closed-form example.
inline int cmd_validate(const RunConfig& c, json& rep, const ArtifactDir& out, const Streams& s)
{
    std::vector<Check> checks;
    const ProblemSpec p = worked_example(c.problem.theta);

    SolveOptions o = solve_options(c);
    bool admissible = true;
    o.on_accept = [&](const GridField& u, const IterateInfo&) { admissible = admissible && all_admissible(u, p.k, true); };
    const auto [u, r] = solve(p, c.grid, std::nullopt, o);
    double err = 0.0;
    for (std::size_t i = 0; i < u.grid.size(); ++i) {
        if (u.mask[i] == PointLabel::exterior) continue;
        const auto x = u.grid.point(i);
        const double rad = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        err = std::max(err, std::abs(u.values[i] - (rad * rad * rad - 1.0)));
    }
    out.write_solution(u);
    rep["solve"] = r;
    checks.push_back({"solve: sup |u - (r^3 - 1)|", err, "<= 1e-2", err <= 1e-2});
    checks.push_back({"solve: iterates admissible", admissible ? 1.0 : 0.0, "= 1", admissible});
    const auto hb = hessian_bounds(u);
    checks.push_back({"solve: min eig + (n-1) max eig + 10h", hb.min_eigenvalue + 2 * hb.max_eigenvalue + 10 * u.grid.max_spacing(),
                      ">= 0", hb.holds});

    const auto a = audit(p.f, c.grid, std::nullopt, p.domain);
    rep["audit"] = a;
    const double want = 6 * std::sqrt(5.0);
    checks.push_back({"audit: c0_gradient vs 6 sqrt 5 (rel)", std::abs(a.c0_gradient - want) / want, "<= 1e-3",
                      std::abs(a.c0_gradient - want) <= 1e-3 * want});
    checks.push_back({"audit: c0_hessian", a.c0_hessian, "<= 1e-9", a.c0_hessian <= 1e-9});

    const auto cv = is_k1_convex(p.domain, p.k, c.boundary_samples);
    rep["convexity"] = cv;
    checks.push_back({"domain: ball (k-1)-convexity margin - 2", cv.margin - 2, "|.| <= 1e-8", cv.pass && std::abs(cv.margin - 2) <= 1e-8});

    bool all = true;
    rep["checks"] = json::array();
    for (const auto& ch : checks) {
        all = all && ch.pass;
        rep["checks"].push_back({{"name", ch.name}, {"value", ch.value}, {"target", ch.target}, {"pass", ch.pass}});
        std::ostringstream line;
        line << std::left << std::setw(42) << ch.name << std::setw(14) << std::setprecision(6) << ch.value << std::setw(14)
             << ch.target << (ch.pass ? "PASS" : "FAIL") << "\n";
        s << line.str();
    }
    rep["pass"] = all;
    return all ? ok : check_failed;
}

}  // namespace detail

/// Parses argv, runs one command, writes artifacts. Never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Finite-difference solver and diagnostics for the Dirichlet problem of the k-Hessian equation"};
    app.require_subcommand(1);
    std::string config_path, output, experiment;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<int> grid_m;
    std::optional<double> theta;
    bool quiet = false;
    for (const auto& name : known_commands()) {
        auto* sub = app.add_subcommand(name);
        sub->fallthrough();
        if (name == "lab") sub->add_option("experiment", experiment, "concavity | maclaurin | interior_boundary | theta_independence");
    }
    app.get_subcommand("solve")->description("solve at one theta");
    app.get_subcommand("path")->description("continuation along a decreasing theta schedule");
    app.get_subcommand("check-f")->description("audit the structure condition on f and probe f^{1/k}");
    app.get_subcommand("check-domain")->description("test (k-1)-convexity of the domain");
    app.get_subcommand("validate")->description("self-check on the closed-form example");
    app.get_subcommand("lab")->description("run a numerical experiment");
    app.add_option("--config", config_path, "configuration file");
    app.add_option("--set", sets, "override key=value, e.g. problem.theta=1e-4 (repeatable)");
    app.add_option("--output", output, "output directory");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--grid-m", grid_m, "grid points per axis");
    app.add_option("--theta", theta, "regularization theta");
    app.add_flag("--quiet", quiet, "print nothing but errors");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return input_error;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    const Streams s{out, err, quiet};

    RunConfig c;
    std::vector<std::string> provenance;
    try {
        ConfigDocument doc;
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw InputError("cannot read config " + config_path);
            std::ostringstream text;
            text << is.rdbuf();
            try {
                doc = parse_document(text.str());
            } catch (const InputError& e) {
                throw InputError(config_path + ": " + e.what());
            }
        }
        for (const auto& a : sets) provenance.push_back(apply_override(doc, a));
        if (!output.empty()) provenance.push_back(apply_override(doc, "output.dir=" + json(output).dump()));
        if (seed) provenance.push_back(apply_override(doc, "run.seed=" + std::to_string(*seed)));
        if (grid_m) provenance.push_back(apply_override(doc, "grid.m=" + std::to_string(*grid_m)));
        if (theta) provenance.push_back(apply_override(doc, "problem.theta=" + json(*theta).dump()));
        if (!experiment.empty()) provenance.push_back(apply_override(doc, "lab.experiment=" + json(experiment).dump()));
        c = build_config(doc);
        c.command = command;
    } catch (const Error& e) {
        err << "input error: " << e.what() << "\n";
        return input_error;
    }
    if (!quiet) {
        for (const auto& p : provenance) err << p << "\n";
    }

    json rep = report_header(c);
    rep["overrides"] = provenance;
    int code = ok;
    try {
        const ArtifactDir dir(c.output_dir);
        try {
            if (command == "solve") code = detail::cmd_solve(c, rep, dir, s);
            if (command == "path") code = detail::cmd_path(c, rep, dir, s);
            if (command == "check-f") code = detail::cmd_check_f(c, rep, s);
            if (command == "check-domain") code = detail::cmd_check_domain(c, rep, s);
            if (command == "lab") code = detail::cmd_lab(c, rep, dir, s);
            if (command == "validate") code = detail::cmd_validate(c, rep, dir, s);
        } catch (const ConvergenceError& e) {
            err << "convergence failure: " << e.what() << "\n";
            rep["error"] = {{"kind", "convergence"}, {"message", e.what()}, {"report", e.report}};
            if (!e.last_iterate.values.empty()) dir.write_solution(e.last_iterate);
            code = convergence_failure;
        } catch (const InitializationError& e) {
            err << "convergence failure: " << e.what() << "\n";
            rep["error"] = {{"kind", "initialization"}, {"message", e.what()}};
            code = convergence_failure;
        } catch (const Error& e) {
            err << "input error: " << e.what() << "\n";
            rep["error"] = {{"kind", "input"}, {"message", e.what()}};
            code = input_error;
        }
        rep["exit_code"] = code;
        dir.write_report(rep);
    } catch (const Error& e) {
        err << "input error: " << e.what() << "\n";
        return input_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return input_error;
    }
    return code;
}

}  // namespace khess::cli
