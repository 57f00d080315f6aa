#pragma once

// JSON and CSV forms of the solver, audit, geometry and lab reports, and the
// on-disk artifact layout: solution.field, solution.mask, report.json,
// series.csv.

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "khess/condh.hpp"
#include "khess/config.hpp"
#include "khess/geometry.hpp"
#include "khess/lab.hpp"
#include "khess/solver.hpp"

namespace khess {

inline void to_json(json& j, const SolveReport& r)
{
    j = {{"iterations", r.iterations},         {"residual_history", r.residual_history},
         {"admissible", r.admissible},         {"damping_events", r.damping_events},
         {"final_residual", r.final_residual}, {"tolerance", r.tolerance},
         {"wall_time", r.wall_time},           {"converged", r.converged},
         {"failure", r.failure},               {"warnings", r.warnings}};
}

inline void to_json(json& j, const ConditionHReport& r)
{
    j = {{"c0_gradient", r.c0_gradient},
         {"c0_hessian", r.c0_hessian},
         {"worst_point_gradient", r.worst_point_gradient},
         {"worst_point_hessian", r.worst_point_hessian},
         {"points_checked", r.points_checked},
         {"degenerate_points_checked", r.degenerate_points_checked},
         {"degenerate_failures", r.degenerate_failures},
         {"spacing", r.spacing},
         {"pass", r.pass ? json(*r.pass) : json(nullptr)}};
}

inline void to_json(json& j, const RootRegularityReport& r)
{
    j = {{"lipschitz_estimate", r.lipschitz_estimate},
         {"c11_proxy_max", r.c11_proxy_max},
         {"c11_proxy_growth_exponent", r.c11_proxy_growth_exponent},
         {"fit_points", r.fit_points},
         {"fit_window", {r.fit_window_lo, r.fit_window_hi}}};
}

inline void to_json(json& j, const ConvexityReport& r)
{
    j = {{"pass", r.pass}, {"margin", std::isfinite(r.margin) ? json(r.margin) : json("inf")}, {"worst_point", r.worst_point}};
}

inline void to_json(json& j, const HessianBounds& b)
{
    j = {{"min_eigenvalue", b.min_eigenvalue}, {"max_eigenvalue", b.max_eigenvalue}, {"holds", b.holds}};
}

inline void to_json(json& j, const PathReport& r)
{
    j = json::object();
    j["stages"] = json::array();
    for (const auto& e : r.entries) {
        j["stages"].push_back({{"theta", e.theta},
                               {"c11_proxy", e.c11_proxy},
                               {"c11_hessian", e.c11.hessian},
                               {"sup_u", e.sup_u},
                               {"sup_grad", e.sup_grad},
                               {"l1_residual_to_f", e.l1_residual_to_f},
                               {"shifted", e.shifted},
                               {"solve", e.report}});
    }
    j["failed_stage"] = r.failed_stage ? json(*r.failed_stage) : json(nullptr);
    j["failure"] = r.failure;
    if (r.failed_report) j["failed_report"] = *r.failed_report;
}

inline void to_json(json& j, const ConcavityReport& r)
{
    j = {{"n", r.n}, {"k", r.k}, {"samples", r.samples}, {"violations", r.violations}, {"worst_gap", r.worst_gap}};
}

inline void to_json(json& j, const MaclaurinReport& r)
{
    j = {{"n", r.n},
         {"k", r.k},
         {"samples", r.samples},
         {"min_ratio", r.min_ratio},
         {"analytic_bound", r.analytic_bound},
         {"argmin", r.argmin},
         {"violations", r.violations}};
}

inline void to_json(json& j, const DirectionGap& d)
{
    j = {{"eta", d.eta}, {"sup_interior", d.sup_interior}, {"sup_boundary", d.sup_boundary}, {"gap", d.gap}};
}

inline void to_json(json& j, const InteriorBoundaryReport& r)
{
    j = {{"thetas", r.thetas}, {"gaps", r.gaps}, {"spacing", r.spacing}, {"stable", r.stable}};
}

inline void to_json(json& j, const ThetaIndependenceReport& r)
{
    j = {{"thetas", r.thetas},
         {"c11_series", r.c11_series},
         {"l1_residuals", r.l1_residuals},
         {"max_over_min", r.max_over_min},
         {"path", r.path}};
}

/// Report skeleton carrying the configuration and seed it was produced from.
[[nodiscard]] inline json report_header(const RunConfig& c)
{
    return {{"command", c.command}, {"seed", c.seed}, {"config", emit_config(c)}};
}

/// theta, c11_proxy, residual per stage. `residual` is the final Newton sup
/// residual of the stage.
inline void write_series_csv(std::ostream& os, const std::vector<double>& thetas, const std::vector<double>& c11,
                             const std::vector<double>& residual)
{
    os << "theta,c11_proxy,residual\n";
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        os << detail::format17(thetas[i]) << ',' << detail::format17(c11[i]) << ',' << detail::format17(residual[i]) << '\n';
    }
}

inline void write_series_csv(std::ostream& os, const PathReport& r)
{
    std::vector<double> t, c, res;
    for (const auto& e : r.entries) {
        t.push_back(e.theta);
        c.push_back(e.c11_proxy);
        res.push_back(e.report.final_residual);
    }
    write_series_csv(os, t, c, res);
}

/// Output directory with the fixed artifact names.
class ArtifactDir {
public:
    explicit ArtifactDir(std::filesystem::path dir) : dir_(std::move(dir))
    {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_)) throw InputError("output directory " + dir_.string() + " is not writable");
    }

    [[nodiscard]] const std::filesystem::path& path() const { return dir_; }

    void write_solution(const GridField& u) const
    {
        auto vs = open("solution.field");
        auto ms = open("solution.mask");
        write_values(vs, u);
        write_mask(ms, u);
    }

    void write_report(const json& j) const { open("report.json") << j.dump(2) << '\n'; }

    template <class... A>
    void write_series(const A&... args) const
    {
        auto os = open("series.csv");
        write_series_csv(os, args...);
    }

private:
    [[nodiscard]] std::ofstream open(const char* name) const
    {
        std::ofstream os(dir_ / name);
        if (!os) throw InputError("cannot write " + (dir_ / name).string());
        os.exceptions(std::ios::badbit | std::ios::failbit);
        return os;
    }

    std::filesystem::path dir_;
};

}  // namespace khess
