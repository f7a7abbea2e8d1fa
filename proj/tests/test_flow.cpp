#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "icrflow/flow.hpp"
#include "support/oracles.hpp"

using namespace icrflow;

namespace {

struct Setup {
    QuadMesh mesh;
    SystemSpaces spaces;
    DiscreteOperators ops;
    Setup(Domain dom, int level) : mesh(build_mesh({dom, level})), spaces(build_spaces(mesh)), ops(build_operators(mesh, spaces)) {}
};

DirichletData case_bc(const Setup& s, const ManufacturedCase& mcase) {
    return interpolate_dirichlet(s.mesh, s.spaces, [&](const Point& x) { return mcase.velocity(x); });
}

/// Relative residuals of the three equation blocks at a state.
struct SystemResiduals {
    double momentum;
    double constitutive;
    double continuity;
};

SystemResiduals system_residuals(const Setup& s, const DirichletData& bc, const ConstitutiveModel& model,
                                 const ManufacturedCase& mcase, const FlowState& st) {
    const Vec F = assemble_forcing(s.ops, [&](const Point& x) { return mcase.forcing(x); });
    const Vec coupling = assemble_stress_coupling_rhs(s.ops, model, st.T);
    Vec r_full = assemble_convection_residual(s.ops, st.u) + s.ops.K_dd.apply(st.u) / model.alpha +
                 s.ops.B.apply_transpose(st.p) - F - coupling;
    double mom = 0.0, mom_scale = 0.0;
    for (int f = 0; f < bc.n_free; ++f) {
        mom += r_full[bc.free_to_full[static_cast<std::size_t>(f)]] * r_full[bc.free_to_full[static_cast<std::size_t>(f)]];
        mom_scale += F[bc.free_to_full[static_cast<std::size_t>(f)]] * F[bc.free_to_full[static_cast<std::size_t>(f)]];
    }

    const auto mom_Du = stress_moments_of_Du(s.ops, st.u);
    const auto mom_g = stress_moments_of_g(s.ops, [&](const Point& x) { return mcase.g_field(x); });
    double con = 0.0, con_scale = 0.0;
    for (int e = 0; e < s.mesh.n_elements(); ++e) {
        const Eigen::VectorXd t = st.T.segment(SystemSpaces::stress_base(e), 27);
        const Eigen::VectorXd r = model.alpha * (s.ops.ctx.stress.mass * t) +
                                  model.gamma * nonlinear_moments(s.ops.ctx.stress, model.mu, t) -
                                  mom_Du[static_cast<std::size_t>(e)] - mom_g[static_cast<std::size_t>(e)];
        con += r.dot(s.ops.ctx.stress.mass_llt.solve(r));
        con_scale += mom_g[static_cast<std::size_t>(e)].dot(
            s.ops.ctx.stress.mass_llt.solve(mom_g[static_cast<std::size_t>(e)]));
    }

    Vec bu = s.ops.B.apply(st.u);
    bu.array() -= bu.mean();  // boundary-flux consistency mode
    const double div = std::sqrt(bu.dot(s.ops.M_p_factor->solve(bu)));

    return {std::sqrt(mom / std::max(mom_scale, 1e-30)), std::sqrt(con / std::max(con_scale, 1e-30)),
            div / std::max(norm_grad(s.ops, st.u), 1e-30)};
}

}  // namespace

TEST_CASE("zero data gives the zero flow in at most one Newton step", "[flow]") {
    Setup s(Domain::UnitSquare, 2);
    ConstitutiveModel model;
    const DirichletData bc = interpolate_dirichlet(s.mesh, s.spaces, [](const Point&) { return Vec2{}; });
    SolverConfig cfg;
    const auto res = solve_navier_stokes(s.ops, bc, model, Vec::Zero(s.spaces.n_u), std::nullopt, cfg);
    CHECK(res.newton_iters <= 1);
    CHECK(res.u.norm() <= 1e-12);
    CHECK(res.p.norm() <= 1e-12);
}

TEST_CASE("stokes solve matches a dense monolithic oracle", "[flow]") {
    Setup s(Domain::UnitSquare, 1);
    ConstitutiveModel model;
    model.alpha = 2.0;
    const ManufacturedCase mcase(CaseId::Case1, model);
    const DirichletData bc = case_bc(s, mcase);
    const Vec F = assemble_forcing(s.ops, [&](const Point& x) { return mcase.forcing(x); });

    SolverConfig cfg;
    cfg.krylov_rel_tol = 1e-12;
    const auto res = solve_stokes(s.ops, bc, model, F, cfg);

    // Dense saddle oracle on (free u, p) with one pressure dof pinned.
    const int nf = bc.n_free, np = s.spaces.n_p;
    const int n = nf + np;
    std::vector<std::vector<double>> A(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    Vec rhs = Vec::Zero(n);

    const SparseMatrix K_ff = s.ops.K_dd.select(bc.full_to_free, nf, bc.full_to_free, nf);
    const auto Kd = oracles::to_dense(K_ff);
    for (int i = 0; i < nf; ++i)
        for (int j = 0; j < nf; ++j) A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = Kd[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] / model.alpha;

    const auto Bd = oracles::to_dense(s.ops.B);
    for (int q = 0; q < np; ++q)
        for (int f = 0; f < nf; ++f) {
            A[static_cast<std::size_t>(nf + q)][static_cast<std::size_t>(f)] = Bd[static_cast<std::size_t>(q)][static_cast<std::size_t>(bc.free_to_full[static_cast<std::size_t>(f)])];
            A[static_cast<std::size_t>(f)][static_cast<std::size_t>(nf + q)] = A[static_cast<std::size_t>(nf + q)][static_cast<std::size_t>(f)];
        }

    Vec u_bc = Vec::Zero(s.spaces.n_u);
    bc.apply(u_bc);
    const Vec Ku = s.ops.K_dd.apply(u_bc);
    for (int f = 0; f < nf; ++f)
        rhs[f] = F[bc.free_to_full[static_cast<std::size_t>(f)]] - Ku[bc.free_to_full[static_cast<std::size_t>(f)]] / model.alpha;
    Vec G = -s.ops.B.apply(u_bc);
    G.array() -= G.mean();  // consistency fix, mirrors the solver's deflation
    for (int q = 0; q < np; ++q) rhs[nf + q] = G[q];

    // Pin the constant pressure mode by replacing the last pressure row.
    for (int j = 0; j < n; ++j) A[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(j)] = 0.0;
    for (int q = 0; q < np; ++q) A[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(nf + q)] = 1.0;
    rhs[n - 1] = 0.0;

    const Vec xo = oracles::dense_solve(A, rhs);
    for (int f = 0; f < nf; ++f)
        CHECK(res.u[bc.free_to_full[static_cast<std::size_t>(f)]] == Catch::Approx(xo[f]).margin(1e-8));
    // Pressures agree up to the gauge; compare after centering both.
    Vec p_o(np);
    for (int q = 0; q < np; ++q) p_o[q] = xo[nf + q];
    Vec p_h = res.p;
    p_o.array() -= p_o.mean();
    p_h.array() -= p_h.mean();
    for (int q = 0; q < np; ++q) CHECK(p_h[q] == Catch::Approx(p_o[q]).margin(1e-8));
}

TEST_CASE("outer metric algebra and quadrature oracle", "[flow]") {
    Setup s(Domain::UnitSquare, 2);
    std::mt19937 rng(66);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    FlowState a{Vec(s.spaces.n_T), Vec(s.spaces.n_u), Vec(s.spaces.n_p)};
    for (int i = 0; i < s.spaces.n_T; ++i) a.T[i] = unit(rng);
    for (int i = 0; i < s.spaces.n_u; ++i) a.u[i] = unit(rng);
    for (int i = 0; i < s.spaces.n_p; ++i) a.p[i] = unit(rng);

    CHECK(outer_metric(a, a, s.ops) == 0.0);

    FlowState twice = a;
    twice.T = 2.0 * a.T;
    twice.u = 2.0 * a.u;
    twice.p = 2.0 * a.p;
    CHECK(outer_metric(a, twice, s.ops) == Catch::Approx(0.5));

    // Independent quadrature for the norms in the metric.
    const QuadratureRule rule = gauss_rule(5);
    double nT = 0.0, nGu = 0.0, nP = 0.0;
    for (int e = 0; e < s.mesh.n_elements(); ++e) {
        const auto [origin, side] = element_geometry(s.mesh, e);
        const auto vdofs = s.spaces.velocity_map(e);
        const auto pdofs = s.spaces.pressure_map(s.mesh, e);
        for (int q = 0; q < rule.size(); ++q) {
            const Point xh = rule.points[static_cast<std::size_t>(q)];
            const double w = rule.weights[static_cast<std::size_t>(q)] * side * side / 4.0;
            SymTensor t;
            Mat2 g;
            double pv = 0.0;
            for (int l = 0; l < 9; ++l) {
                const double phi = shape_value(Space::Q2, l, xh);
                const Vec2 gr = shape_gradient(Space::Q2, l, xh);
                const Vec2 gp{gr.x * 2.0 / side, gr.y * 2.0 / side};
                t.t11 += a.T[SystemSpaces::stress_dof(e, 0, l)] * phi;
                t.t12 += a.T[SystemSpaces::stress_dof(e, 1, l)] * phi;
                t.t22 += a.T[SystemSpaces::stress_dof(e, 2, l)] * phi;
                g.a11 += a.u[vdofs[static_cast<std::size_t>(2 * l)]] * gp.x;
                g.a12 += a.u[vdofs[static_cast<std::size_t>(2 * l)]] * gp.y;
                g.a21 += a.u[vdofs[static_cast<std::size_t>(2 * l + 1)]] * gp.x;
                g.a22 += a.u[vdofs[static_cast<std::size_t>(2 * l + 1)]] * gp.y;
            }
            for (int i = 0; i < 4; ++i) pv += a.p[pdofs[static_cast<std::size_t>(i)]] * shape_value(Space::Q1, i, xh);
            nT += w * t.ddot(t);
            nGu += w * g.frobenius_sq();
            nP += w * pv * pv;
        }
    }
    CHECK(norm_stress(s.ops, a.T) == Catch::Approx(std::sqrt(nT)).epsilon(1e-12));
    CHECK(norm_grad(s.ops, a.u) == Catch::Approx(std::sqrt(nGu)).epsilon(1e-12));
    CHECK(norm_pressure(s.ops, a.p) == Catch::Approx(std::sqrt(nP)).epsilon(1e-12));
}

TEST_CASE("gamma=0: one splitting iteration hits the reference level-2 errors", "[flow][slow]") {
    ConstitutiveModel model;
    model.alpha = 1.0;
    model.gamma = 0.0;
    const ManufacturedCase mcase(CaseId::Case1, model);
    Setup s(Domain::UnitSquare, 2);
    const DirichletData bc = case_bc(s, mcase);
    SolverConfig cfg;
    cfg.tau = 0.01;

    const auto [state, trace] = run_lions_mercier(s.ops, bc, model, mcase, cfg);
    CHECK(trace.converged);
    CHECK(trace.outer_iterations == 1);

    const ErrorTriple err = compute_errors(state, mcase, s.ops);
    CHECK(err.err_T == Catch::Approx(6.04199e-2).epsilon(0.01));
    CHECK(err.err_u == Catch::Approx(7.51266e-2).epsilon(0.01));
    CHECK(err.err_p == Catch::Approx(3.02263e-2).epsilon(0.01));

    // Discrete divergence constraint at solver tolerance.
    Vec bu = s.ops.B.apply(state.u);
    bu.array() -= bu.mean();
    CHECK(bu.norm() / state.u.norm() <= 1e-6);
}

TEST_CASE("gamma=0 fixed point converges in at most two iterations", "[flow][slow]") {
    ConstitutiveModel model;
    model.gamma = 0.0;
    const ManufacturedCase mcase(CaseId::Case1, model);
    Setup s(Domain::UnitSquare, 2);
    const DirichletData bc = case_bc(s, mcase);
    SolverConfig cfg;
    cfg.algorithm = Algorithm::FixedPoint;
    const auto [state, trace] = run_fixed_point(s.ops, bc, model, mcase, cfg);
    CHECK(trace.converged);
    CHECK(trace.outer_iterations <= 2);
    const ErrorTriple err = compute_errors(state, mcase, s.ops);
    CHECK(err.err_T == Catch::Approx(6.04199e-2).epsilon(0.01));
}

TEST_CASE("the two algorithms agree and satisfy the residual certificate", "[flow][slow]") {
    ConstitutiveModel model;  // alpha = gamma = 1
    const ManufacturedCase mcase(CaseId::Case1, model);
    Setup s(Domain::UnitSquare, 2);
    const DirichletData bc = case_bc(s, mcase);

    SolverConfig lm_cfg;
    lm_cfg.tau = 0.5;
    const auto [lm_state, lm_trace] = run_lions_mercier(s.ops, bc, model, mcase, lm_cfg);
    SolverConfig fp_cfg;
    fp_cfg.algorithm = Algorithm::FixedPoint;
    const auto [fp_state, fp_trace] = run_fixed_point(s.ops, bc, model, mcase, fp_cfg);

    CHECK(lm_trace.converged);
    CHECK(fp_trace.converged);
    CHECK(outer_metric(lm_state, fp_state, s.ops) <= 10.0 * lm_cfg.outer_tol);

    // A priori diagnostic holds at every recorded iterate.
    CHECK(lm_trace.apriori_bound_holds(model.alpha));
    CHECK(fp_trace.apriori_bound_holds(model.alpha));

    // Residual certificate: every block residual is small at convergence.
    for (const auto& st : {lm_state, fp_state}) {
        const auto res = system_residuals(s, bc, model, mcase, st);
        CHECK(res.momentum <= 100.0 * lm_cfg.outer_tol);
        CHECK(res.constitutive <= 100.0 * lm_cfg.outer_tol);
        CHECK(res.continuity <= 100.0 * lm_cfg.outer_tol);
    }

    // The stopping sequence ends below the tolerance.
    CHECK(lm_trace.records.back().stopping <= lm_cfg.outer_tol);
    CHECK(fp_trace.records.back().stopping <= fp_cfg.outer_tol);
}

TEST_CASE("structured per-iteration monitor", "[flow][slow]") {
    ConstitutiveModel model;
    const ManufacturedCase mcase(CaseId::Case1, model);
    Setup s(Domain::UnitSquare, 2);
    const DirichletData bc = case_bc(s, mcase);
    SolverConfig cfg;
    cfg.algorithm = Algorithm::FixedPoint;
    int calls = 0;
    cfg.monitor = [&](const OuterRecord& rec) {
        ++calls;
        CHECK(rec.metric >= 0.0);
        CHECK(rec.newton_iters >= 1);
    };
    const auto [state, trace] = run_fixed_point(s.ops, bc, model, mcase, cfg);
    CHECK(calls == static_cast<int>(trace.records.size()));
}
