#pragma once

// Run configuration: a flat text document of [section] headers and
// `key = <JSON value>` lines. '#' starts a comment line.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "khess/errors.hpp"
#include "khess/solver.hpp"

namespace khess {

using json = nlohmann::json;

inline const std::vector<std::string>& known_commands()
{
    static const std::vector<std::string> c{"solve", "path", "check-f", "check-domain", "validate", "lab"};
    return c;
}

inline const std::vector<std::string>& known_experiments()
{
    static const std::vector<std::string> e{"concavity", "maclaurin", "interior_boundary", "theta_independence"};
    return e;
}

/// n = 3, k = 2 on the unit ball with f = 45|x|^2 and zero boundary data,
/// solved by u = |x|^3 - 1.
[[nodiscard]] inline ProblemSpec worked_example(double theta = 1e-6)
{
    ProblemSpec p;
    p.n = 3;
    p.k = 2;
    p.domain = DomainSpec::ball({0, 0, 0}, 1);
    p.f = RhsSpec::expression(Expression::parse("45*(x1^2+x2^2+x3^2)"), 2);
    p.phi = Expression::parse("0");
    p.theta = theta;
    return p;
}

struct RunConfig {
    std::string command = "solve";
    std::uint64_t seed = 1;
    ProblemSpec problem = worked_example();
    Grid grid = Grid::cube(3, -1.2, 1.2, 33);
    std::optional<std::vector<double>> schedule;
    std::optional<double> tol;
    int max_iter = 100;
    BoundaryClosure closure = BoundaryClosure::extrapolate;
    std::string output_dir = "khess-out";
    std::string experiment = "theta_independence";
    std::optional<int> lab_n, lab_k;             // spectrum experiments; default problem n, k
    int samples = 100000;                        // lab spectra
    int boundary_samples = 2000;                 // check-domain
    std::vector<std::vector<double>> directions; // empty: coordinate axes
    std::optional<double> c0;                    // check-f threshold
};

/// Key-by-key values with the line each came from (0 for overrides).
struct ConfigDocument {
    struct Entry {
        json value;
        int line = 0;
    };
    std::map<std::string, Entry> entries;
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

struct KeyInfo {
    const char* name;
    const char* type;   // for messages
};

inline const std::vector<KeyInfo>& config_keys()
{
    static const std::vector<KeyInfo> k{
        {"run.command", "string"},       {"run.seed", "non-negative integer"},
        {"problem.n", "integer"},        {"problem.k", "integer"},
        {"problem.domain", "object"},    {"problem.f", "string"},
        {"problem.phi", "string"},       {"problem.theta", "number"},
        {"grid.lo", "number or array"},  {"grid.hi", "number or array"},
        {"grid.m", "integer or array"},  {"schedule.values", "array or comma-separated string"},
        {"solver.tol", "number"},        {"solver.max_iter", "integer"},
        {"solver.closure", "string"},    {"output.dir", "string"},
        {"lab.experiment", "string"},    {"lab.samples", "integer"},
        {"lab.n", "integer"},            {"lab.k", "integer"},
        {"lab.directions", "array of arrays"}, {"check.samples", "integer"},
        {"check.c0", "number"},
    };
    return k;
}

inline const KeyInfo* find_key(const std::string& key)
{
    for (const auto& k : config_keys()) {
        if (key == k.name) return &k;
    }
    return nullptr;
}

[[noreturn]] inline void type_error(const std::string& key, const ConfigDocument::Entry& e)
{
    std::string where = e.line > 0 ? "line " + std::to_string(e.line) + ": " : "override: ";
    const KeyInfo* k = find_key(key);
    throw InputError(where + "key " + key + ": expected " + (k ? k->type : "array of numbers") + ", got " + e.value.dump());
}

inline double get_number(const std::string& key, const ConfigDocument::Entry& e)
{
    if (!e.value.is_number()) type_error(key, e);
    return e.value.get<double>();
}

inline long long get_integer(const std::string& key, const ConfigDocument::Entry& e)
{
    if (!e.value.is_number_integer()) type_error(key, e);
    return e.value.get<long long>();
}

inline int get_int(const std::string& key, const ConfigDocument::Entry& e)
{
    const long long v = get_integer(key, e);
    if (v < -1000000000LL || v > 1000000000LL) type_error(key, e);
    return static_cast<int>(v);
}

inline std::string get_string(const std::string& key, const ConfigDocument::Entry& e)
{
    if (!e.value.is_string()) type_error(key, e);
    return e.value.get<std::string>();
}

inline std::vector<double> get_vector(const std::string& key, const ConfigDocument::Entry& e)
{
    if (!e.value.is_array()) type_error(key, e);
    std::vector<double> v;
    for (const auto& x : e.value) {
        if (!x.is_number()) type_error(key, e);
        v.push_back(x.get<double>());
    }
    return v;
}

// Scalar broadcast to n entries, or an array of length n.
inline std::vector<double> get_per_axis(const std::string& key, const ConfigDocument::Entry& e, int n)
{
    if (e.value.is_number()) return std::vector<double>(static_cast<std::size_t>(n), e.value.get<double>());
    auto v = get_vector(key, e);
    if (static_cast<int>(v.size()) != n) {
        throw InputError("key " + key + ": expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
    }
    return v;
}

inline std::vector<double> parse_schedule(const std::string& key, const ConfigDocument::Entry& e)
{
    if (e.value.is_array()) return get_vector(key, e);
    if (!e.value.is_string()) type_error(key, e);
    std::vector<double> v;
    std::stringstream ss(e.value.get<std::string>());
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            v.push_back(parse_real(trim(tok)));
        } catch (const Error&) {
            type_error(key, e);
        }
    }
    return v;
}

inline Expression get_expression(const std::string& key, const ConfigDocument::Entry& e)
{
    const auto s = get_string(key, e);
    try {
        return Expression::parse(s);
    } catch (const Error& err) {
        throw InputError("key " + key + ": " + err.what());
    }
}

inline DomainSpec parse_domain(const std::string& key, const ConfigDocument::Entry& e)
{
    const json& v = e.value;
    if (!v.is_object() || !v.contains("kind") || !v["kind"].is_string()) type_error(key, e);
    const auto kind = v["kind"].get<std::string>();
    auto vec = [&](const char* f) {
        if (!v.contains(f)) throw InputError("key " + key + ": " + kind + " needs \"" + f + "\"");
        return get_vector(key + "." + f, {v[f], e.line});
    };
    auto allow = [&](std::initializer_list<const char*> fields) {
        for (const auto& [name, _] : v.items()) {
            bool ok = name == "kind";
            for (const char* f : fields) ok = ok || name == f;
            if (!ok) throw InputError("key " + key + ": unknown field \"" + name + "\" for " + kind);
        }
    };
    if (kind == "ball") {
        allow({"center", "radius"});
        if (!v.contains("radius") || !v["radius"].is_number()) throw InputError("key " + key + ": ball needs a numeric \"radius\"");
        return DomainSpec::ball(vec("center"), v["radius"].get<double>());
    }
    if (kind == "ellipsoid") {
        allow({"center", "axes"});
        return DomainSpec::ellipsoid(vec("center"), vec("axes"));
    }
    if (kind == "box") {
        allow({"lo", "hi"});
        return DomainSpec::box(vec("lo"), vec("hi"));
    }
    if (kind == "levelset") {
        allow({"phi", "lo", "hi"});
        if (!v.contains("phi")) throw InputError("key " + key + ": levelset needs \"phi\"");
        return DomainSpec::levelset(get_expression(key + ".phi", {v["phi"], e.line}), vec("lo"), vec("hi"));
    }
    throw InputError("key " + key + ": unknown domain kind \"" + kind + "\"");
}

inline json domain_json(const DomainSpec& d)
{
    switch (d.kind) {
    case DomainSpec::Kind::ball: return {{"kind", "ball"}, {"center", d.center}, {"radius", d.radius}};
    case DomainSpec::Kind::ellipsoid: return {{"kind", "ellipsoid"}, {"center", d.center}, {"axes", d.axes}};
    case DomainSpec::Kind::box: return {{"kind", "box"}, {"lo", d.lo}, {"hi", d.hi}};
    case DomainSpec::Kind::levelset:
        return {{"kind", "levelset"}, {"phi", d.levelset_expr.text()}, {"lo", d.lo}, {"hi", d.hi}};
    }
    return {};
}

/// Grid over the domain's bounding box widened by a fifth of its half-width
/// on each side, m points per axis.
inline Grid default_grid(const DomainSpec& d, int m)
{
    auto lo = d.box_lo(), hi = d.box_hi();
    for (std::size_t a = 0; a < lo.size(); ++a) {
        const double pad = 0.1 * (hi[a] - lo[a]);
        lo[a] -= pad;
        hi[a] += pad;
    }
    return Grid(lo, hi, std::vector<int>(lo.size(), m));
}

inline const char* closure_name(BoundaryClosure c) { return c == BoundaryClosure::project ? "project" : "extrapolate"; }

}  // namespace detail

/// Parses the text into a key map. Syntax errors and duplicate keys are
/// reported with their line number; unknown keys are collected and listed.
[[nodiscard]] inline ConfigDocument parse_document(const std::string& text)
{
    ConfigDocument doc;
    std::istringstream is(text);
    std::string raw, section;
    std::vector<std::string> unknown;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto s = detail::trim(raw);
        if (s.empty() || s[0] == '#') continue;
        const auto at = "line " + std::to_string(line) + ": ";
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3) throw InputError(at + "malformed section header \"" + s + "\"");
            section = detail::trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw InputError(at + "expected key = value");
        const auto name = detail::trim(s.substr(0, eq));
        if (name.empty()) throw InputError(at + "missing key");
        if (section.empty()) throw InputError(at + "key \"" + name + "\" outside any section");
        const auto key = section + "." + name;
        json value;
        try {
            value = json::parse(detail::trim(s.substr(eq + 1)));
        } catch (const json::parse_error&) {
            throw InputError(at + "key " + key + ": value is not valid JSON");
        }
        if (!detail::find_key(key)) {
            unknown.push_back(key + " (line " + std::to_string(line) + ")");
            continue;
        }
        if (doc.entries.contains(key)) {
            throw InputError(at + "duplicate key " + key + " (first set on line " + std::to_string(doc.entries[key].line) + ")");
        }
        doc.entries[key] = {std::move(value), line};
    }
    if (!unknown.empty()) {
        std::string msg = "unknown keys:";
        for (const auto& u : unknown) msg += " " + u;
        throw InputError(msg);
    }
    return doc;
}

/// Applies "section.key=value". The value is read as JSON when it parses,
/// otherwise as a plain string. Returns a provenance line for the log.
inline std::string apply_override(ConfigDocument& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw InputError("override \"" + assignment + "\": expected key=value");
    const auto key = detail::trim(assignment.substr(0, eq));
    const auto text = detail::trim(assignment.substr(eq + 1));
    if (!detail::find_key(key)) throw InputError("override: unknown key " + key);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    std::string prov = "override " + key + " = " + value.dump();
    if (const auto it = doc.entries.find(key); it != doc.entries.end()) {
        prov += it->second.line > 0 ? " (was " + it->second.value.dump() + " at line " + std::to_string(it->second.line) + ")"
                                    : " (was " + it->second.value.dump() + " from an earlier override)";
    } else {
        prov += " (was unset)";
    }
    doc.entries[key] = {std::move(value), 0};
    return prov;
}

/// Builds and validates a RunConfig. Keys not present keep their defaults,
/// except that a new problem needs n, k, domain and f together.
[[nodiscard]] inline RunConfig build_config(const ConfigDocument& doc)
{
    using namespace detail;
    RunConfig c;
    auto has = [&](const char* k) { return doc.entries.contains(k); };
    auto at = [&](const char* k) -> const ConfigDocument::Entry& { return doc.entries.at(k); };

    if (has("run.command")) {
        c.command = get_string("run.command", at("run.command"));
        if (std::find(known_commands().begin(), known_commands().end(), c.command) == known_commands().end()) {
            throw InputError("key run.command: unknown command \"" + c.command + "\"");
        }
    }
    if (has("run.seed")) {
        const auto& e = at("run.seed");
        if (!e.value.is_number_unsigned()) type_error("run.seed", e);
        c.seed = e.value.get<std::uint64_t>();
    }

    // theta and phi alone adjust the default problem; a new problem needs
    // n, k, domain and f together.
    const bool new_problem = has("problem.n") || has("problem.k") || has("problem.domain") || has("problem.f");
    if (new_problem) {
        std::vector<std::string> missing;
        for (const char* k : {"problem.n", "problem.k", "problem.domain", "problem.f"}) {
            if (!has(k)) missing.emplace_back(k);
        }
        if (!missing.empty()) {
            std::string msg = "missing required keys:";
            for (const auto& m : missing) msg += " " + m;
            throw InputError(msg);
        }
    }
    {
        ProblemSpec& p = c.problem;
        if (new_problem) {
            p.n = get_int("problem.n", at("problem.n"));
            p.k = get_int("problem.k", at("problem.k"));
            try {
                p.domain = parse_domain("problem.domain", at("problem.domain"));
            } catch (const DomainError& e) {
                throw InputError(std::string("key problem.domain: ") + e.what());
            }
            p.f = RhsSpec::expression(get_expression("problem.f", at("problem.f")), p.k);
            p.phi = Expression::constant(0.0);
        }
        if (has("problem.phi")) p.phi = get_expression("problem.phi", at("problem.phi"));
        if (has("problem.theta")) p.theta = get_number("problem.theta", at("problem.theta"));
        try {
            p.validate();
        } catch (const DomainError& e) {
            throw InputError(e.what());
        }
    }

    const int n = c.problem.n;
    int m = 33;
    std::vector<int> ms;
    if (has("grid.m")) {
        const auto& e = at("grid.m");
        if (e.value.is_array()) {
            for (const auto& x : e.value) {
                if (!x.is_number_integer()) type_error("grid.m", e);
                ms.push_back(x.get<int>());
            }
            if (static_cast<int>(ms.size()) != n) throw InputError("key grid.m: expected " + std::to_string(n) + " entries");
        } else {
            m = get_int("grid.m", e);
        }
    }
    if (ms.empty()) ms.assign(static_cast<std::size_t>(n), m);
    const Grid base = default_grid(c.problem.domain, 5);
    std::vector<double> glo(static_cast<std::size_t>(n)), ghi(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        glo[static_cast<std::size_t>(a)] = base.lo(a);
        ghi[static_cast<std::size_t>(a)] = base.hi(a);
    }
    if (has("grid.lo")) glo = get_per_axis("grid.lo", at("grid.lo"), n);
    if (has("grid.hi")) ghi = get_per_axis("grid.hi", at("grid.hi"), n);
    try {
        c.grid = Grid(glo, ghi, ms);
    } catch (const Error& e) {
        throw InputError(std::string("grid: ") + e.what());
    }

    if (has("schedule.values")) {
        c.schedule = parse_schedule("schedule.values", at("schedule.values"));
        const auto& s = *c.schedule;
        if (s.empty()) throw InputError("key schedule.values: empty schedule");
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!(s[i] > 0.0) || (i && !(s[i] < s[i - 1]))) {
                throw InputError("key schedule.values: values must be positive and strictly decreasing");
            }
        }
    }
    if (has("solver.tol")) {
        c.tol = get_number("solver.tol", at("solver.tol"));
        if (!(*c.tol > 0.0)) throw InputError("key solver.tol: must be positive");
    }
    if (has("solver.max_iter")) {
        c.max_iter = get_int("solver.max_iter", at("solver.max_iter"));
        if (c.max_iter < 0) throw InputError("key solver.max_iter: must be non-negative");
    }
    if (has("solver.closure")) {
        const auto s = get_string("solver.closure", at("solver.closure"));
        if (s == "extrapolate") {
            c.closure = BoundaryClosure::extrapolate;
        } else if (s == "project") {
            c.closure = BoundaryClosure::project;
        } else {
            throw InputError("key solver.closure: expected \"extrapolate\" or \"project\"");
        }
    }
    if (has("output.dir")) c.output_dir = get_string("output.dir", at("output.dir"));
    if (has("lab.experiment")) {
        c.experiment = get_string("lab.experiment", at("lab.experiment"));
        if (std::find(known_experiments().begin(), known_experiments().end(), c.experiment) == known_experiments().end()) {
            throw InputError("key lab.experiment: unknown experiment \"" + c.experiment + "\"");
        }
    }
    if (has("lab.n")) c.lab_n = get_int("lab.n", at("lab.n"));
    if (has("lab.k")) c.lab_k = get_int("lab.k", at("lab.k"));
    {
        const int ln = c.lab_n.value_or(c.problem.n), lk = c.lab_k.value_or(c.problem.k);
        if (ln < 1 || ln > 16 || lk < 1 || lk > ln) throw InputError("lab.n, lab.k: need 1 <= k <= n <= 16");
    }
    if (has("lab.samples")) {
        c.samples = get_int("lab.samples", at("lab.samples"));
        if (c.samples < 1) throw InputError("key lab.samples: must be positive");
    }
    if (has("check.samples")) {
        c.boundary_samples = get_int("check.samples", at("check.samples"));
        if (c.boundary_samples < 1) throw InputError("key check.samples: must be positive");
    }
    if (has("lab.directions")) {
        const auto& e = at("lab.directions");
        if (!e.value.is_array()) type_error("lab.directions", e);
        for (const auto& d : e.value) c.directions.push_back(get_vector("lab.directions", {d, e.line}));
    }
    if (has("check.c0")) c.c0 = get_number("check.c0", at("check.c0"));
    return c;
}

[[nodiscard]] inline RunConfig parse_config(const std::string& text) { return build_config(parse_document(text)); }

/// Writes every field, so parse_config(emit_config(c)) reproduces c.
[[nodiscard]] inline std::string emit_config(const RunConfig& c)
{
    using detail::domain_json;
    std::ostringstream os;
    auto line = [&](const char* key, const json& v) { os << key << " = " << v.dump() << "\n"; };
    const Grid& g = c.grid;
    std::vector<double> lo, hi;
    std::vector<int> m;
    for (int a = 0; a < g.dim(); ++a) {
        lo.push_back(g.lo(a));
        hi.push_back(g.hi(a));
        m.push_back(g.points(a));
    }
    os << "[run]\n";
    line("command", c.command);
    line("seed", c.seed);
    os << "\n[problem]\n";
    line("n", c.problem.n);
    line("k", c.problem.k);
    line("domain", domain_json(c.problem.domain));
    line("f", c.problem.f.expr.text());
    line("phi", c.problem.phi.text());
    line("theta", c.problem.theta);
    os << "\n[grid]\n";
    line("lo", lo);
    line("hi", hi);
    line("m", m);
    if (c.schedule) {
        os << "\n[schedule]\n";
        line("values", *c.schedule);
    }
    os << "\n[solver]\n";
    if (c.tol) line("tol", *c.tol);
    line("max_iter", c.max_iter);
    line("closure", detail::closure_name(c.closure));
    os << "\n[output]\n";
    line("dir", c.output_dir);
    os << "\n[lab]\n";
    line("experiment", c.experiment);
    if (c.lab_n) line("n", *c.lab_n);
    if (c.lab_k) line("k", *c.lab_k);
    line("samples", c.samples);
    if (!c.directions.empty()) line("directions", c.directions);
    os << "\n[check]\n";
    line("samples", c.boundary_samples);
    if (c.c0) line("c0", *c.c0);
    return os.str();
}

inline bool same_domain(const DomainSpec& a, const DomainSpec& b)
{
    return detail::domain_json(a) == detail::domain_json(b);
}

inline bool operator==(const RunConfig& a, const RunConfig& b)
{
    return a.command == b.command && a.seed == b.seed && a.problem.n == b.problem.n && a.problem.k == b.problem.k &&
           same_domain(a.problem.domain, b.problem.domain) && a.problem.f.kind == b.problem.f.kind &&
           a.problem.f.expr == b.problem.f.expr && a.problem.f.offset == b.problem.f.offset && a.problem.phi == b.problem.phi &&
           a.problem.theta == b.problem.theta && a.grid == b.grid && a.schedule == b.schedule && a.tol == b.tol &&
           a.max_iter == b.max_iter && a.closure == b.closure && a.output_dir == b.output_dir && a.experiment == b.experiment && a.lab_n == b.lab_n && a.lab_k == b.lab_k &&
           a.samples == b.samples && a.boundary_samples == b.boundary_samples && a.directions == b.directions && a.c0 == b.c0;
}

/// SolveOptions implied by the solver section.
[[nodiscard]] inline SolveOptions solve_options(const RunConfig& c)
{
    SolveOptions o;
    o.tol = c.tol;
    o.max_iter = c.max_iter;
    o.closure = c.closure;
    return o;
}

}  // namespace khess
