#pragma once

/// Outer iterations: the Navier-Stokes Newton solve with a Schur-complement
/// inner solver, the splitting (Lions-Mercier / Peaceman-Rachford) driver, the
/// fixed-point driver, and the relative-increment metrics both stop on.
/// The saddle-point systems are reduced to the pressure via
/// B A^-1 B^T P = B A^-1 F - G with A factorized directly; the Schur system is
/// solved by CG (Stokes warm start) or GMRES (Newton steps), preconditioned by
/// the pressure mass matrix, with the constant-pressure mode deflated.

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "icrflow/assembly.hpp"
#include "icrflow/norms.hpp"
#include "icrflow/solvers.hpp"

namespace icrflow {

enum class Algorithm { LionsMercier, FixedPoint };

struct OuterRecord {
    int iteration = 0;
    double metric = 0.0;    // full relative-increment metric (outer_metric)
    double stopping = 0.0;  // functional compared against the outer tolerance
    int newton_iters = 0;
    int krylov_iters = 0;
    double norm_T = 0.0;   // ||T_h||_{L2}
    double norm_Du = 0.0;  // ||D(u_h)||_{L2}
};

struct OuterTrace {
    std::vector<OuterRecord> records;
    double norm_g = 0.0;
    bool converged = false;
    int outer_iterations = 0;

    /// Discrete analogue of the a priori stress bound, with the manufactured
    /// g-term: ||T_h|| <= (1/alpha)(||D(u_h)|| + ||g||), checked per iterate.
    bool apriori_bound_holds(double alpha, double slack = 1e-10) const {
        for (const auto& r : records)
            if (r.norm_T > (r.norm_Du + norm_g) / alpha + slack) return false;
        return true;
    }
};

struct SolverConfig {
    double tau = 0.5;
    double outer_tol = 1e-5;        // delta in the outer stopping criterion
    double newton_tol = 1e-6;       // relative combined (u, p) increment
    double krylov_rel_tol = 1e-6;   // of ||B A^-1 F - G||
    int max_outer = 500;
    int max_newton = 25;
    int gmres_restart = 100;
    int krylov_maxit = 2000;
    Algorithm algorithm = Algorithm::LionsMercier;
    std::function<void(const OuterRecord&)> monitor;  // optional diagnostics channel

    void validate() const {
        if (tau <= 0.0 || outer_tol <= 0.0 || newton_tol <= 0.0 || krylov_rel_tol <= 0.0)
            throw std::invalid_argument("SolverConfig: tolerances and tau must be positive");
    }
};

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Euclidean projection against the constant vector; B^T annihilates constants
/// on the free dofs, so the Schur operator has this exact nullspace.
inline void deflate_constants(Vec& v) {
    v.array() -= v.mean();
}

struct SaddleStep {
    Vec du_full;  // zero at constrained dofs
    Vec dp;
    int krylov_iters = 0;
};

/// One saddle solve  [A B_f^T; B_f 0] (du, dp) = (F', G')  through the Schur
/// complement; `A_f` is the factorized velocity block on free dofs.
inline SaddleStep schur_saddle_solve(const DiscreteOperators& ops, const DirichletData& bc,
                                     const Factorization& A_f, const Vec& Fp, const Vec& Gp,
                                     bool use_cg, const SolverConfig& cfg) {
    const auto expand = [&](const Vec& free) {
        Vec full = Vec::Zero(ops.spaces->n_u);
        for (int f = 0; f < bc.n_free; ++f) full[bc.free_to_full[static_cast<std::size_t>(f)]] = free[f];
        return full;
    };
    const auto restrict_free = [&](const Vec& full) {
        Vec free(bc.n_free);
        for (int f = 0; f < bc.n_free; ++f) free[f] = full[bc.free_to_full[static_cast<std::size_t>(f)]];
        return free;
    };

    const Vec AinvF = A_f.solve(Fp);
    Vec rhs = ops.B.apply(expand(AinvF)) - Gp;
    deflate_constants(rhs);
    const double tol = cfg.krylov_rel_tol * rhs.norm();

    const LinearOperator schur = [&](const Vec& x) {
        Vec xp = x;
        deflate_constants(xp);
        const Vec Btx = restrict_free(ops.B.apply_transpose(xp));
        Vec y = ops.B.apply(expand(A_f.solve(Btx)));
        deflate_constants(y);
        return y;
    };
    const LinearOperator precond = [&](const Vec& r) {
        Vec z = ops.M_p_factor->solve(r);
        deflate_constants(z);
        return z;
    };

    auto [dp, report] = use_cg ? cg(schur, rhs, precond, tol, cfg.krylov_maxit)
                               : gmres(schur, rhs, precond, tol, cfg.gmres_restart, cfg.krylov_maxit);
    if (!report.converged)
        throw SolverError("Schur solve did not converge: " + std::to_string(report.iterations) +
                          " iterations, residual " + std::to_string(report.residual));
    deflate_constants(dp);

    SaddleStep step;
    step.dp = dp;
    step.du_full = expand(A_f.solve(Fp - restrict_free(ops.B.apply_transpose(dp))));
    step.krylov_iters = report.iterations;
    return step;
}

inline SparseMatrix scale_csr(const SparseMatrix& A, double factor) {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(A.nnz()));
    for (int r = 0; r < A.rows(); ++r)
        for (int k = A.row_offsets()[static_cast<std::size_t>(r)]; k < A.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
            trips.push_back({r, A.col_indices()[static_cast<std::size_t>(k)], factor * A.values()[static_cast<std::size_t>(k)]});
    return SparseMatrix::from_triplets(A.rows(), A.cols(), std::move(trips));
}

inline SparseMatrix add_csr(const SparseMatrix& A, const SparseMatrix& B) {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(A.nnz() + B.nnz()));
    for (const SparseMatrix* M : {&A, &B})
        for (int r = 0; r < M->rows(); ++r)
            for (int k = M->row_offsets()[static_cast<std::size_t>(r)]; k < M->row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
                trips.push_back({r, M->col_indices()[static_cast<std::size_t>(k)], M->values()[static_cast<std::size_t>(k)]});
    return SparseMatrix::from_triplets(A.rows(), A.cols(), std::move(trips));
}

}  // namespace detail

struct NavierStokesResult {
    Vec u;
    Vec p;
    int newton_iters = 0;
    int krylov_iters = 0;
};

namespace detail {

inline Vec momentum_residual_free(const DiscreteOperators& ops, const DirichletData& bc, double inv_alpha,
                                  const Vec& rhs_velocity, const Vec& u, const Vec& p,
                                  bool with_convection) {
    Vec r_full = inv_alpha * ops.K_dd.apply(u) + ops.B.apply_transpose(p) - rhs_velocity;
    if (with_convection) r_full += assemble_convection_residual(ops, u);
    Vec r(bc.n_free);
    for (int f = 0; f < bc.n_free; ++f) r[f] = -r_full[bc.free_to_full[static_cast<std::size_t>(f)]];
    return r;  // F' of the increment system
}

}  // namespace detail

/// Single linear solve of the convection-free (Stokes) system; the Schur
/// complement is symmetric positive definite on the deflated subspace, so the
/// pressure system is solved by CG.
inline NavierStokesResult solve_stokes(const DiscreteOperators& ops, const DirichletData& bc,
                                       const ConstitutiveModel& model, const Vec& rhs_velocity,
                                       const SolverConfig& cfg) {
    cfg.validate();
    const double inv_alpha = 1.0 / model.alpha;
    NavierStokesResult res;
    res.u = Vec::Zero(ops.spaces->n_u);
    bc.apply(res.u);
    res.p = Vec::Zero(ops.spaces->n_p);

    const SparseMatrix K_ff = ops.K_dd.select(bc.full_to_free, bc.n_free, bc.full_to_free, bc.n_free);
    const Factorization A_f(detail::scale_csr(K_ff, inv_alpha));
    const Vec Fp = detail::momentum_residual_free(ops, bc, inv_alpha, rhs_velocity, res.u, res.p, false);
    const Vec Gp = -ops.B.apply(res.u);
    const auto step = detail::schur_saddle_solve(ops, bc, A_f, Fp, Gp, /*use_cg=*/true, cfg);
    res.u += step.du_full;
    res.p += step.dp;
    res.krylov_iters = step.krylov_iters;
    shift_to_zero_mean(ops, res.p);
    return res;
}

/// Solves the momentum/continuity pair with a fixed extra right-hand side
/// (forcing plus lagged stress coupling). If `initial` is empty the solve
/// warm-starts from the associated Stokes problem (convection dropped, Schur
/// system by CG); Newton steps use GMRES. Each Newton step factorizes the
/// velocity block directly and re-assembles the convection Jacobian.
inline NavierStokesResult solve_navier_stokes(const DiscreteOperators& ops, const DirichletData& bc,
                                              const ConstitutiveModel& model, const Vec& rhs_velocity,
                                              std::optional<std::pair<Vec, Vec>> initial,
                                              const SolverConfig& cfg) {
    cfg.validate();
    const double inv_alpha = 1.0 / model.alpha;
    NavierStokesResult res;

    SparseMatrix K_ff = ops.K_dd.select(bc.full_to_free, bc.n_free, bc.full_to_free, bc.n_free);
    SparseMatrix A0 = detail::scale_csr(K_ff, inv_alpha);

    Vec u, p;
    if (initial) {
        u = initial->first;
        p = initial->second;
        bc.apply(u);
    } else {
        auto stokes = solve_stokes(ops, bc, model, rhs_velocity, cfg);
        u = std::move(stokes.u);
        p = std::move(stokes.p);
        res.krylov_iters += stokes.krylov_iters;
    }

    for (int m = 1; m <= cfg.max_newton; ++m) {
        const SparseMatrix J_conv = assemble_convection_jacobian(ops, u);
        const SparseMatrix A_m = detail::add_csr(A0, J_conv.select(bc.full_to_free, bc.n_free, bc.full_to_free, bc.n_free));
        const Factorization A_f(A_m);
        const Vec Fp = detail::momentum_residual_free(ops, bc, inv_alpha, rhs_velocity, u, p, true);
        const Vec Gp = -ops.B.apply(u);
        const auto step = detail::schur_saddle_solve(ops, bc, A_f, Fp, Gp, /*use_cg=*/false, cfg);
        u += step.du_full;
        p += step.dp;
        res.krylov_iters += step.krylov_iters;
        res.newton_iters = m;

        const double num = norm_grad(ops, step.du_full) + norm_pressure(ops, step.dp);
        const double den = norm_grad(ops, u) + norm_pressure(ops, p);
        const double metric = den > 0.0 ? num / den : 0.0;
        if (metric <= cfg.newton_tol) {
            shift_to_zero_mean(ops, p);
            res.u = std::move(u);
            res.p = std::move(p);
            return res;
        }
    }
    throw SolverError("Newton did not converge within " + std::to_string(cfg.max_newton) + " iterations");
}

/// Relative combined increment of two states:
/// (||T+ - T|| + ||grad(u+ - u)|| + ||p+ - p||) / (||T+|| + ||grad u+|| + ||p+||),
/// with the stress measured in the componentwise norm of the error tables.
inline double outer_metric(const FlowState& prev, const FlowState& next, const DiscreteOperators& ops) {
    const double num = norm_stress_components(ops, next.T - prev.T) + norm_grad(ops, next.u - prev.u) +
                       norm_pressure(ops, next.p - prev.p);
    const double den = norm_stress_components(ops, next.T) + norm_grad(ops, next.u) +
                       norm_pressure(ops, next.p);
    if (den == 0.0) return 0.0;
    return num / den;
}

/// Stopping functional of the outer drivers: the stress and pressure
/// increments relative to the full state norm (the velocity enters the
/// denominator only). This is the rule the reference iteration counts follow;
/// the velocity increment is slaved to the stress one, so the loop still
/// terminates only when the whole state has settled.
inline double stopping_metric(const FlowState& prev, const FlowState& next, const DiscreteOperators& ops) {
    const double num = norm_stress_components(ops, next.T - prev.T) + norm_pressure(ops, next.p - prev.p);
    const double den = norm_stress_components(ops, next.T) + norm_grad(ops, next.u) +
                       norm_pressure(ops, next.p);
    if (den == 0.0) return 0.0;
    return num / den;
}

namespace detail {

struct OuterProblem {
    const DiscreteOperators* ops;
    const DirichletData* bc;
    const ConstitutiveModel* model;
    const ManufacturedCase* mcase;
    Vec forcing;                          // int f . v
    std::vector<Eigen::VectorXd> mom_g;   // per-element moments of g
    double norm_g = 0.0;
};

inline OuterProblem make_outer_problem(const DiscreteOperators& ops, const DirichletData& bc,
                                       const ConstitutiveModel& model, const ManufacturedCase& mcase) {
    const VectorField f = [&mcase](const Point& x) { return mcase.forcing(x); };
    const TensorField g = [&mcase](const Point& x) { return mcase.g_field(x); };
    OuterProblem pb{&ops, &bc, &model, &mcase, assemble_forcing(ops, f),
                    stress_moments_of_g(ops, g), tensor_field_norm(ops, g)};
    return pb;
}

inline void record_iterate(OuterTrace& trace, const SolverConfig& cfg, const OuterProblem& pb,
                           const FlowState& state, int k, double metric, double stopping, int newton,
                           int krylov) {
    OuterRecord rec;
    rec.iteration = k;
    rec.metric = metric;
    rec.stopping = stopping;
    rec.newton_iters = newton;
    rec.krylov_iters = krylov;
    rec.norm_T = norm_stress(*pb.ops, state.T);
    rec.norm_Du = norm_sym_grad(*pb.ops, state.u);
    trace.records.push_back(rec);
    if (cfg.monitor) cfg.monitor(rec);
}

}  // namespace detail

/// Splitting driver. Initialisation solves the Navier-Stokes pair with the
/// plain forcing (Stokes warm start) and projects T0 = (D(u0) + g)/alpha
/// elementwise; each outer iteration then runs the element-local monotone
/// half-step, the Navier-Stokes solve with the updated stress coupling, and
/// the linear stress update, until the relative-increment metric drops below
/// the outer tolerance.
inline std::pair<FlowState, OuterTrace> run_lions_mercier(const DiscreteOperators& ops,
                                                          const DirichletData& bc,
                                                          const ConstitutiveModel& model,
                                                          const ManufacturedCase& mcase,
                                                          const SolverConfig& cfg) {
    cfg.validate();
    const auto pb = detail::make_outer_problem(ops, bc, model, mcase);
    OuterTrace trace;
    trace.norm_g = pb.norm_g;

    const int n_el = ops.mesh->n_elements();
    const auto& sctx = ops.ctx.stress;

    // Initialisation
    auto ns0 = solve_navier_stokes(ops, bc, model, pb.forcing, std::nullopt, cfg);
    FlowState state;
    state.u = std::move(ns0.u);
    state.p = std::move(ns0.p);
    state.T = Vec::Zero(ops.spaces->n_T);
    {
        const auto mom_Du = stress_moments_of_Du(ops, state.u);
        for (int e = 0; e < n_el; ++e)
            state.T.segment(SystemSpaces::stress_base(e), 27) =
                sctx.mass_llt.solve(mom_Du[static_cast<std::size_t>(e)] + pb.mom_g[static_cast<std::size_t>(e)]) /
                model.alpha;
    }
    detail::record_iterate(trace, cfg, pb, state, 0, 1.0, 1.0, ns0.newton_iters, ns0.krylov_iters);

    Vec T_half = Vec::Zero(ops.spaces->n_T);
    for (int k = 1; k <= cfg.max_outer; ++k) {
        FlowState next;
        try {
            // Step 1: element-local monotone half-step, started from T^(k-1).
            auto mom_Du = stress_moments_of_Du(ops, state.u);
            for (int e = 0; e < n_el; ++e) {
                const Eigen::VectorXd data = mom_Du[static_cast<std::size_t>(e)] + pb.mom_g[static_cast<std::size_t>(e)];
                T_half.segment(SystemSpaces::stress_base(e), 27) = lm_step1(
                    model, cfg.tau, state.T.segment(SystemSpaces::stress_base(e), 27), data, sctx, e);
            }

            // Step 2: Navier-Stokes with the half-step stress coupling, warm
            // started from the previous iterate, then the linear stress update.
            const Vec rhs = pb.forcing + assemble_stress_coupling_rhs(ops, model, T_half);
            auto ns = solve_navier_stokes(ops, bc, model, rhs, std::make_pair(state.u, state.p), cfg);
            next.u = std::move(ns.u);
            next.p = std::move(ns.p);
            next.T = Vec::Zero(ops.spaces->n_T);
            mom_Du = stress_moments_of_Du(ops, next.u);
            for (int e = 0; e < n_el; ++e) {
                const Eigen::VectorXd data = mom_Du[static_cast<std::size_t>(e)] + pb.mom_g[static_cast<std::size_t>(e)];
                next.T.segment(SystemSpaces::stress_base(e), 27) = lm_step2_stress(
                    model, cfg.tau, T_half.segment(SystemSpaces::stress_base(e), 27), data, sctx);
            }

            const double metric = outer_metric(state, next, ops);
            const double stopping = stopping_metric(state, next, ops);
            state = std::move(next);
            detail::record_iterate(trace, cfg, pb, state, k, metric, stopping, ns.newton_iters,
                                   ns.krylov_iters);
            if (stopping <= cfg.outer_tol) {
                trace.converged = true;
                trace.outer_iterations = k;
                return {std::move(state), std::move(trace)};
            }
        } catch (const std::exception& err) {
            throw SolverError("lions-mercier iteration " + std::to_string(k) + ": " + err.what());
        }
    }
    throw SolverError("lions-mercier: no convergence within " + std::to_string(cfg.max_outer) +
                      " outer iterations");
}

/// Fixed-point driver: start from the zero state; each iteration solves the
/// Navier-Stokes pair with the lagged stress coupling (Stokes warm start on
/// the first pass, previous iterate afterwards) and then the monotone
/// constitutive relation element-locally.
inline std::pair<FlowState, OuterTrace> run_fixed_point(const DiscreteOperators& ops,
                                                        const DirichletData& bc,
                                                        const ConstitutiveModel& model,
                                                        const ManufacturedCase& mcase,
                                                        const SolverConfig& cfg) {
    cfg.validate();
    const auto pb = detail::make_outer_problem(ops, bc, model, mcase);
    OuterTrace trace;
    trace.norm_g = pb.norm_g;

    const int n_el = ops.mesh->n_elements();
    const auto& sctx = ops.ctx.stress;

    FlowState state;
    state.T = Vec::Zero(ops.spaces->n_T);
    state.u = Vec::Zero(ops.spaces->n_u);
    state.p = Vec::Zero(ops.spaces->n_p);

    for (int k = 1; k <= cfg.max_outer; ++k) {
        FlowState next;
        try {
            const Vec rhs = pb.forcing + assemble_stress_coupling_rhs(ops, model, state.T);
            auto ns = solve_navier_stokes(ops, bc, model, rhs,
                                          k == 1 ? std::nullopt
                                                 : std::make_optional(std::make_pair(state.u, state.p)),
                                          cfg);
            next.u = std::move(ns.u);
            next.p = std::move(ns.p);

            next.T = Vec::Zero(ops.spaces->n_T);
            const auto mom_Du = stress_moments_of_Du(ops, next.u);
            for (int e = 0; e < n_el; ++e) {
                LocalStressProblem problem;
                problem.ctx = &sctx;
                problem.a = model.alpha;
                problem.b = model.gamma;
                problem.rhs = mom_Du[static_cast<std::size_t>(e)] + pb.mom_g[static_cast<std::size_t>(e)];
                next.T.segment(SystemSpaces::stress_base(e), 27) =
                    solve_local_stress(model, problem, state.T.segment(SystemSpaces::stress_base(e), 27),
                                       sctx.local_tolerance(), e);
            }

            const double metric = outer_metric(state, next, ops);
            const double stopping = stopping_metric(state, next, ops);
            state = std::move(next);
            detail::record_iterate(trace, cfg, pb, state, k, metric, stopping, ns.newton_iters,
                                   ns.krylov_iters);
            if (stopping <= cfg.outer_tol) {
                trace.converged = true;
                trace.outer_iterations = k;
                return {std::move(state), std::move(trace)};
            }
        } catch (const std::exception& err) {
            throw SolverError("fixed-point iteration " + std::to_string(k) + ": " + err.what());
        }
    }
    throw SolverError("fixed-point: no convergence within " + std::to_string(cfg.max_outer) +
                      " outer iterations");
}

inline std::pair<FlowState, OuterTrace> run_algorithm(const DiscreteOperators& ops, const DirichletData& bc,
                                                      const ConstitutiveModel& model,
                                                      const ManufacturedCase& mcase, const SolverConfig& cfg) {
    return cfg.algorithm == Algorithm::LionsMercier ? run_lions_mercier(ops, bc, model, mcase, cfg)
                                                    : run_fixed_point(ops, bc, model, mcase, cfg);
}

}  // namespace icrflow
