#pragma once

/// Convergence-study orchestration: configuration parsing (flags over an
/// optional key = value file), the per-level driver, CSV/text table emission
/// with rate columns, and legacy-VTK field export.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "icrflow/flow.hpp"

namespace icrflow {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StudyConfig {
    int case_id = 0;  // 1 or 2
    Algorithm algorithm = Algorithm::LionsMercier;
    double alpha = 1.0;
    double gamma = 1.0;
    double tau = 0.5;
    int level_min = 2;
    int level_max = 5;
    double tol_outer = 1e-5;
    double tol_newton = 1e-6;
    std::string out_path;           // empty = stdout
    std::string format = "csv";     // csv | text
    bool export_fields = false;

    void validate() const {
        if (case_id != 1 && case_id != 2) throw ConfigError("case must be 1 or 2");
        if (level_min < 1) throw ConfigError("levels: minimum level is 1");
        if (level_max > 7) throw ConfigError("levels: maximum level is 7");
        if (level_min > level_max) throw ConfigError("levels: empty range");
        if (alpha <= 0.0) throw ConfigError("alpha must be positive");
        if (gamma < 0.0) throw ConfigError("gamma must be nonnegative");
        if (algorithm == Algorithm::LionsMercier && tau <= 0.0)
            throw ConfigError("tau must be positive for the lions-mercier algorithm");
        if (tol_outer <= 0.0 || tol_newton <= 0.0) throw ConfigError("tolerances must be positive");
        if (format != "csv" && format != "text") throw ConfigError("format must be csv or text");
    }
};

namespace detail {

inline double parse_real(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("malformed value for " + key + ": '" + value + "'");
    }
    if (pos != value.size()) throw ConfigError("malformed value for " + key + ": '" + value + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw ConfigError("malformed value for " + key + ": '" + value + "'");
}

inline std::pair<int, int> parse_levels(const std::string& value) {
    const auto dots = value.find("..");
    int lo = 0, hi = 0;
    try {
        if (dots == std::string::npos) {
            lo = hi = std::stoi(value);
        } else {
            lo = std::stoi(value.substr(0, dots));
            hi = std::stoi(value.substr(dots + 2));
        }
    } catch (const std::exception&) {
        throw ConfigError("malformed levels range: '" + value + "'");
    }
    if (lo > hi) throw ConfigError("levels: empty range '" + value + "'");
    return {lo, hi};
}

inline void apply_key(StudyConfig& cfg, const std::string& key, const std::string& value,
                      bool& saw_case, bool& saw_algorithm) {
    if (key == "case") {
        cfg.case_id = static_cast<int>(parse_real(key, value));
        saw_case = true;
    } else if (key == "algorithm") {
        if (value == "lions-mercier") cfg.algorithm = Algorithm::LionsMercier;
        else if (value == "fixed-point") cfg.algorithm = Algorithm::FixedPoint;
        else throw ConfigError("unknown algorithm '" + value + "'");
        saw_algorithm = true;
    } else if (key == "alpha") {
        cfg.alpha = parse_real(key, value);
    } else if (key == "gamma") {
        cfg.gamma = parse_real(key, value);
    } else if (key == "tau") {
        cfg.tau = parse_real(key, value);
    } else if (key == "levels") {
        std::tie(cfg.level_min, cfg.level_max) = parse_levels(value);
    } else if (key == "tol-outer") {
        cfg.tol_outer = parse_real(key, value);
    } else if (key == "tol-newton") {
        cfg.tol_newton = parse_real(key, value);
    } else if (key == "out") {
        cfg.out_path = value;
    } else if (key == "format") {
        cfg.format = value;
    } else if (key == "export-fields") {
        cfg.export_fields = parse_bool(key, value);
    } else {
        throw ConfigError("unknown key '" + key + "'");
    }
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Flags override file entries; the file is line-oriented `key = value` with
/// `#` comments. Unknown keys are rejected; `case` and `algorithm` are required.
inline StudyConfig parse_config(const std::vector<std::string>& args,
                                const std::optional<std::string>& config_file = std::nullopt) {
    StudyConfig cfg;
    bool saw_case = false, saw_algorithm = false;

    std::optional<std::string> file = config_file;
    // A --config flag names the file; scan for it first so flags still win.
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw ConfigError("--config expects a path");
            file = args[i + 1];
        }
    }

    if (file) {
        std::ifstream in(*file);
        if (!in) throw ConfigError("cannot open config file '" + *file + "'");
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(*file + ":" + std::to_string(lineno) + ": expected key = value");
            detail::apply_key(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)),
                              saw_case, saw_algorithm);
        }
    }

    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--config") {
            ++i;  // handled above
            continue;
        }
        if (a.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + a + "'");
        const std::string key = a.substr(2);
        if (key == "export-fields") {
            // boolean flag; accepts an optional explicit value
            if (i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0) {
                cfg.export_fields = detail::parse_bool(key, args[++i]);
            } else {
                cfg.export_fields = true;
            }
            continue;
        }
        if (i + 1 >= args.size()) throw ConfigError("flag --" + key + " expects a value");
        detail::apply_key(cfg, key, args[++i], saw_case, saw_algorithm);
    }

    if (!saw_case) throw ConfigError("missing required key 'case'");
    if (!saw_algorithm) throw ConfigError("missing required key 'algorithm'");
    cfg.validate();
    return cfg;
}

struct TableRow {
    int n = 0;
    double h = 0.0;
    double err_T = std::numeric_limits<double>::quiet_NaN();
    double err_u = std::numeric_limits<double>::quiet_NaN();
    double err_p = std::numeric_limits<double>::quiet_NaN();
    int iters = -1;
    double seconds = 0.0;
    bool failed = false;
    std::string error;
};

struct ConvergenceTable {
    std::vector<TableRow> rows;
};

namespace detail {

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.5e", v);
    return buf;
}

}  // namespace detail

inline std::string emit_csv_header() { return "n,h,err_T,err_u,err_p,iters,seconds"; }

inline std::string emit_csv_row(const TableRow& r) {
    std::ostringstream os;
    os << r.n << ',' << detail::sci(r.h) << ',' << detail::sci(r.err_T) << ',' << detail::sci(r.err_u)
       << ',' << detail::sci(r.err_p) << ',' << r.iters << ',' << detail::sci(r.seconds);
    return os.str();
}

inline std::string emit(const ConvergenceTable& table, const std::string& format) {
    std::ostringstream os;
    if (format == "csv") {
        os << emit_csv_header() << '\n';
        for (const auto& r : table.rows) os << emit_csv_row(r) << '\n';
        return os.str();
    }
    if (format != "text") throw ConfigError("emit: unknown format '" + format + "'");

    char buf[256];
    std::snprintf(buf, sizeof(buf), "%3s %9s %12s %6s %12s %6s %12s %6s %6s %10s\n", "n", "h", "err_T",
                  "rT", "err_u", "ru", "err_p", "rp", "iters", "seconds");
    os << buf;
    const TableRow* prev = nullptr;
    for (const auto& r : table.rows) {
        const auto rate = [&](double e_prev, double e_cur) -> std::string {
            if (!prev || prev->failed || r.failed || e_prev <= 0.0 || e_cur <= 0.0) return "-";
            char rb[16];
            std::snprintf(rb, sizeof(rb), "%.2f", std::log2(e_prev / e_cur));
            return rb;
        };
        std::snprintf(buf, sizeof(buf), "%3d %9.4f %12s %6s %12s %6s %12s %6s %6d %10.2f\n", r.n, r.h,
                      detail::sci(r.err_T).c_str(), rate(prev ? prev->err_T : 0, r.err_T).c_str(),
                      detail::sci(r.err_u).c_str(), rate(prev ? prev->err_u : 0, r.err_u).c_str(),
                      detail::sci(r.err_p).c_str(), rate(prev ? prev->err_p : 0, r.err_p).c_str(),
                      r.iters, r.seconds);
        os << buf;
        prev = &r;
    }
    return os.str();
}

/// Parses one CSV data line (round-trip counterpart of emit_csv_row).
inline TableRow parse_csv_row(const std::string& line) {
    TableRow r;
    std::istringstream is(line);
    std::string tok;
    const auto next = [&]() {
        if (!std::getline(is, tok, ',')) throw ConfigError("parse_csv_row: short line '" + line + "'");
        return tok;
    };
    r.n = std::stoi(next());
    r.h = std::stod(next());
    r.err_T = std::stod(next());
    r.err_u = std::stod(next());
    r.err_p = std::stod(next());
    r.iters = std::stoi(next());
    r.seconds = std::stod(next());
    return r;
}

/// Legacy VTK (ASCII, version 3.0) export on the once-refined visualization
/// grid: each Q2 element contributes its 9 nodes (duplicated at interfaces so
/// the discontinuous stress stays discontinuous) and 4 quad cells.
inline void export_fields(const FlowState& state, const QuadMesh& mesh, const SystemSpaces& spaces,
                          const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export_fields: cannot open '" + path + "'");

    const int n_el = mesh.n_elements();
    const double half = mesh.side / 2.0;

    os << "# vtk DataFile Version 3.0\n";
    os << "icrflow fields\n";
    os << "ASCII\n";
    os << "DATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << 9 * n_el << " double\n";
    for (int e = 0; e < n_el; ++e) {
        const Point origin = mesh.element_origin(e);
        for (int l = 0; l < 9; ++l)
            os << origin.x + half * (l % 3) << ' ' << origin.y + half * (l / 3) << " 0\n";
    }

    static constexpr int kSubQuad[4][4] = {{0, 1, 4, 3}, {1, 2, 5, 4}, {3, 4, 7, 6}, {4, 5, 8, 7}};
    os << "CELLS " << 4 * n_el << ' ' << 20 * n_el << '\n';
    for (int e = 0; e < n_el; ++e)
        for (const auto& sq : kSubQuad)
            os << "4 " << 9 * e + sq[0] << ' ' << 9 * e + sq[1] << ' ' << 9 * e + sq[2] << ' '
               << 9 * e + sq[3] << '\n';
    os << "CELL_TYPES " << 4 * n_el << '\n';
    for (int i = 0; i < 4 * n_el; ++i) os << "9\n";  // VTK_QUAD

    os << "POINT_DATA " << 9 * n_el << '\n';
    os << "VECTORS velocity double\n";
    for (int e = 0; e < n_el; ++e) {
        const auto vdofs = spaces.velocity_map(e);
        for (int l = 0; l < 9; ++l)
            os << state.u[vdofs[static_cast<std::size_t>(2 * l)]] << ' '
               << state.u[vdofs[static_cast<std::size_t>(2 * l + 1)]] << " 0\n";
    }

    os << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
    for (int e = 0; e < n_el; ++e) {
        const auto pdofs = spaces.pressure_map(mesh, e);
        for (int l = 0; l < 9; ++l) {
            const Point xh = reference_node(Space::Q2, l);
            double v = 0.0;
            for (int i = 0; i < 4; ++i) v += state.p[pdofs[static_cast<std::size_t>(i)]] * shape_value(Space::Q1, i, xh);
            os << v << '\n';
        }
    }

    const auto stress_component = [&](int e, int comp, int l) {
        return state.T[SystemSpaces::stress_dof(e, comp, l)];
    };
    const char* names[3] = {"T11", "T12", "T22"};
    for (int comp = 0; comp < 3; ++comp) {
        os << "SCALARS " << names[comp] << " double 1\nLOOKUP_TABLE default\n";
        for (int e = 0; e < n_el; ++e)
            for (int l = 0; l < 9; ++l) os << stress_component(e, comp, l) << '\n';
    }
    os << "SCALARS Tmag double 1\nLOOKUP_TABLE default\n";
    for (int e = 0; e < n_el; ++e) {
        for (int l = 0; l < 9; ++l) {
            const SymTensor t{stress_component(e, 0, l), stress_component(e, 1, l), stress_component(e, 2, l)};
            os << t.norm() << '\n';
        }
    }
    if (!os) throw std::runtime_error("export_fields: write failure on '" + path + "'");
}

struct LevelResult {
    TableRow row;
    std::optional<FlowState> state;
    std::optional<OuterTrace> trace;
    std::shared_ptr<const QuadMesh> mesh;
    std::shared_ptr<const SystemSpaces> spaces;
};

/// Runs one level of a study; failures are captured in the row.
inline LevelResult run_level(const StudyConfig& cfg, int level) {
    LevelResult out;
    out.row.n = level;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        ConstitutiveModel model;
        model.alpha = cfg.alpha;
        model.gamma = cfg.gamma;
        const ManufacturedCase mcase(cfg.case_id == 1 ? CaseId::Case1 : CaseId::Case2, model);
        out.mesh = std::make_shared<const QuadMesh>(build_mesh({mcase.domain(), level}));
        const QuadMesh& mesh = *out.mesh;
        out.row.h = mesh.h;
        out.spaces = std::make_shared<const SystemSpaces>(build_spaces(mesh));
        const SystemSpaces& spaces = *out.spaces;
        const DirichletData bc = interpolate_dirichlet(mesh, spaces,
                                                       [&](const Point& x) { return mcase.velocity(x); });
        const DiscreteOperators ops = build_operators(mesh, spaces);

        SolverConfig scfg;
        scfg.tau = cfg.tau;
        scfg.outer_tol = cfg.tol_outer;
        scfg.newton_tol = cfg.tol_newton;
        scfg.algorithm = cfg.algorithm;

        auto [state, trace] = run_algorithm(ops, bc, model, mcase, scfg);
        const ErrorTriple err = compute_errors(state, mcase, ops);
        out.row.err_T = err.err_T;
        out.row.err_u = err.err_u;
        out.row.err_p = err.err_p;
        out.row.iters = trace.outer_iterations;
        out.state = std::move(state);
        out.trace = std::move(trace);
    } catch (const std::exception& err) {
        out.row.failed = true;
        out.row.error = err.what();
    }
    out.row.seconds =
        std::chrono::duration_cast<std::chrono::duration<double>>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

/// Full study across levels; `on_row` (when set) receives each row as soon as
/// it is available so partial studies survive interruption. Failed levels are
/// recorded and the remaining levels still run.
inline ConvergenceTable run_study(const StudyConfig& cfg,
                                  const std::function<void(const LevelResult&)>& on_row = {}) {
    cfg.validate();
    ConvergenceTable table;
    for (int level = cfg.level_min; level <= cfg.level_max; ++level) {
        LevelResult res = run_level(cfg, level);
        table.rows.push_back(res.row);
        if (on_row) on_row(res);
    }
    return table;
}

}  // namespace icrflow
