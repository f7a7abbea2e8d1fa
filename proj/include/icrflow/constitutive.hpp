#pragma once

/// The scalar viscosity function mu, the monotone tensor map
/// T -> alpha*T + gamma*mu(|T|)T, and the element-local Galerkin solves both
/// outer algorithms use for the stress. All element solves are independent;
/// the stress space is discontinuous, so every system is 27x27 (3 symmetric
/// components x 9 scalar Q2 basis functions).

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icrflow/tensor.hpp"

namespace icrflow {

inline double default_mu(double s) { return 1.0 / std::sqrt(1.0 + s * s); }
inline double default_dmu(double s) {
    const double t = 1.0 + s * s;
    return -s / (t * std::sqrt(t));
}

/// mu(s) = 1/sqrt(1+s^2) with beta = 1 fixed; the metadata constants are the
/// validated bounds for this mu: mu(s)*s <= C1 = 1, mu <= mu_max = 1, and the
/// map S -> mu(|S|)S is Lipschitz with Lambda = 1.
struct ConstitutiveModel {
    double alpha = 1.0;
    double gamma = 1.0;
    std::function<double(double)> mu = default_mu;
    std::function<double(double)> dmu = default_dmu;
    double c1_bound = 1.0;
    double mu_max = 1.0;
    double lipschitz = 1.0;
};

/// alpha*T + gamma*mu(|T|)T with |T| the Frobenius norm.
inline SymTensor apply_map(const ConstitutiveModel& model, const SymTensor& T) {
    const double s = T.norm();
    return (model.alpha + model.gamma * model.mu(s)) * T;
}

/// Derivative of apply_map in the (t11, t12, t22) parameterization:
/// alpha*I + gamma*[mu(|T|)I + (dmu(|T|)/|T|) t (W t)^T], W = diag(1,2,1).
/// The rank-one term has a removable singularity at T = 0.
inline Eigen::Matrix3d map_jacobian(const ConstitutiveModel& model, const SymTensor& T) {
    const double s = T.norm();
    Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
    const double diag = model.alpha + model.gamma * model.mu(s);
    J(0, 0) = J(1, 1) = J(2, 2) = diag;
    if (s > 1e-14) {
        const double scale = model.gamma * model.dmu(s) / s;
        const std::array<double, 3> t = {T.t11, T.t12, T.t22};
        for (int c = 0; c < 3; ++c)
            for (int d = 0; d < 3; ++d)
                J(c, d) += scale * t[static_cast<std::size_t>(c)] * kFrobeniusWeights[static_cast<std::size_t>(d)] *
                           t[static_cast<std::size_t>(d)];
    }
    return J;
}

/// Per-element quadrature data shared by all stress solves of a mesh (every
/// element is a square of the same side, so one context serves them all).
struct StressElementContext {
    std::vector<double> wdet;                  // quadrature weight x |J| per point
    std::vector<std::array<double, 9>> phi;    // Q2 values per point
    Eigen::MatrixXd mass;                      // 27x27, SPD, Frobenius weights (1,2,1)
    Eigen::LLT<Eigen::MatrixXd> mass_llt;
    Eigen::MatrixXd mass_scalar;               // 9x9 scalar Q2 mass
    double element_area = 0.0;
    double domain_area = 0.0;

    /// Default tolerance of the element Newton solves: 1e-6 sqrt(|E|/|Omega|),
    /// so that the accumulated global residual stays below 1e-6.
    double local_tolerance() const { return 1e-6 * std::sqrt(element_area / domain_area); }
};

inline SymTensor stress_at_point(const std::array<double, 9>& phi, const Eigen::VectorXd& coeffs) {
    SymTensor T;
    for (int l = 0; l < 9; ++l) {
        const double v = phi[static_cast<std::size_t>(l)];
        T.t11 += coeffs[l] * v;
        T.t12 += coeffs[9 + l] * v;
        T.t22 += coeffs[18 + l] * v;
    }
    return T;
}

/// Moment vector of the nonlinear term: N(t)_{c,l} = int_E mu(|T|) T : Phi_{c,l}.
inline Eigen::VectorXd nonlinear_moments(const StressElementContext& ctx,
                                         const std::function<double(double)>& mu,
                                         const Eigen::VectorXd& coeffs) {
    Eigen::VectorXd N = Eigen::VectorXd::Zero(27);
    for (std::size_t q = 0; q < ctx.wdet.size(); ++q) {
        const SymTensor T = stress_at_point(ctx.phi[q], coeffs);
        const double m = mu(T.norm());
        const std::array<double, 3> comp = {m * T.t11, m * T.t12, m * T.t22};
        for (int c = 0; c < 3; ++c) {
            const double wc = ctx.wdet[q] * kFrobeniusWeights[static_cast<std::size_t>(c)] * comp[static_cast<std::size_t>(c)];
            for (int l = 0; l < 9; ++l) N[9 * c + l] += wc * ctx.phi[q][static_cast<std::size_t>(l)];
        }
    }
    return N;
}

inline Eigen::MatrixXd nonlinear_moment_jacobian(const StressElementContext& ctx,
                                                 const ConstitutiveModel& model,
                                                 const Eigen::VectorXd& coeffs) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(27, 27);
    for (std::size_t q = 0; q < ctx.wdet.size(); ++q) {
        const SymTensor T = stress_at_point(ctx.phi[q], coeffs);
        const double s = T.norm();
        const double m = model.mu(s);
        // Pointwise derivative of mu(|T|)T in weighted form:
        // w_c [ mu delta_{cd} + (dmu/|T|) t_c w_d t_d ], symmetric in (c,d).
        Eigen::Matrix3d P = Eigen::Matrix3d::Zero();
        for (int c = 0; c < 3; ++c) P(c, c) = kFrobeniusWeights[static_cast<std::size_t>(c)] * m;
        if (s > 1e-14) {
            const double scale = model.dmu(s) / s;
            const std::array<double, 3> wt = {T.t11, 2.0 * T.t12, T.t22};
            for (int c = 0; c < 3; ++c)
                for (int d = 0; d < 3; ++d)
                    P(c, d) += scale * wt[static_cast<std::size_t>(c)] * wt[static_cast<std::size_t>(d)];
        }
        for (int c = 0; c < 3; ++c) {
            for (int d = 0; d < 3; ++d) {
                const double pcd = ctx.wdet[q] * P(c, d);
                if (pcd == 0.0) continue;
                for (int l = 0; l < 9; ++l) {
                    const double pl = pcd * ctx.phi[q][static_cast<std::size_t>(l)];
                    for (int k = 0; k < 9; ++k)
                        J(9 * c + l, 9 * d + k) += pl * ctx.phi[q][static_cast<std::size_t>(k)];
                }
            }
        }
    }
    return J;
}

/// One element-local monotone problem in Galerkin form:
/// find T with  a*M t + b*N(t) = rhs  (a > 0, b >= 0 gives a unique solution).
struct LocalStressProblem {
    const StressElementContext* ctx = nullptr;
    double a = 1.0;
    double b = 0.0;
    Eigen::VectorXd rhs;
};

struct LocalSolveError : std::runtime_error {
    LocalSolveError(int element_id, double residual, int iterations)
        : std::runtime_error("local stress solve failed on element " + std::to_string(element_id) +
                             " after " + std::to_string(iterations) +
                             " iterations, residual " + std::to_string(residual)),
          element(element_id),
          final_residual(residual) {}
    int element;
    double final_residual;
};

/// Newton (analytic Jacobian, residual-halving damping) on the 27 coupled
/// coefficients; the convergence norm is the L2(E) norm of the Riesz
/// representative of the Galerkin residual, sqrt(r^T M^-1 r).
inline Eigen::VectorXd solve_local_stress(const ConstitutiveModel& model, const LocalStressProblem& problem,
                                          const Eigen::VectorXd& initial_guess, double tol_scaled,
                                          int element_id = -1) {
    const StressElementContext& ctx = *problem.ctx;
    if (problem.b == 0.0) {
        return ctx.mass_llt.solve(problem.rhs) / problem.a;
    }

    const auto residual = [&](const Eigen::VectorXd& t) -> Eigen::VectorXd {
        return problem.a * (ctx.mass * t) + problem.b * nonlinear_moments(ctx, model.mu, t) - problem.rhs;
    };
    const auto riesz_norm = [&](const Eigen::VectorXd& r) {
        return std::sqrt(std::max(0.0, r.dot(ctx.mass_llt.solve(r))));
    };

    Eigen::VectorXd t = initial_guess;
    Eigen::VectorXd r = residual(t);
    double rnorm = riesz_norm(r);

    constexpr int kMaxNewton = 50;
    constexpr int kMaxHalvings = 30;
    for (int it = 0; it < kMaxNewton; ++it) {
        if (rnorm <= tol_scaled) return t;
        Eigen::MatrixXd J = problem.a * ctx.mass + problem.b * nonlinear_moment_jacobian(ctx, model, t);
        const Eigen::VectorXd dt = J.ldlt().solve(-r);

        double step = 1.0;
        for (int halving = 0; halving <= kMaxHalvings; ++halving) {
            const Eigen::VectorXd t_new = t + step * dt;
            const Eigen::VectorXd r_new = residual(t_new);
            const double rnorm_new = riesz_norm(r_new);
            if (rnorm_new < rnorm || rnorm_new <= tol_scaled) {
                t = t_new;
                r = r_new;
                rnorm = rnorm_new;
                break;
            }
            if (halving == kMaxHalvings) throw LocalSolveError(element_id, rnorm, it + 1);
            step *= 0.5;
        }
    }
    if (rnorm <= tol_scaled) return t;
    throw LocalSolveError(element_id, rnorm, kMaxNewton);
}

/// Step 1 of the splitting: the zero of
/// F(T) = T + tau*gamma*mu(|T|)T - tau*(D(u^k) + g) - (1 - alpha*tau) T^k,
/// started from T^k. `mom_data` holds the moments of D(u^k) + g.
inline Eigen::VectorXd lm_step1(const ConstitutiveModel& model, double tau,
                                const Eigen::VectorXd& t_k, const Eigen::VectorXd& mom_data,
                                const StressElementContext& ctx, int element_id = -1) {
    if (tau <= 0.0) throw std::invalid_argument("lm_step1: tau must be positive");
    LocalStressProblem problem;
    problem.ctx = &ctx;
    problem.a = 1.0;
    problem.b = tau * model.gamma;
    problem.rhs = tau * mom_data + (1.0 - model.alpha * tau) * (ctx.mass * t_k);
    return solve_local_stress(model, problem, t_k, ctx.local_tolerance(), element_id);
}

/// Step 2 stress update (linear):
/// (1/tau + alpha) T^{k+1} = (1/tau) T^{k+1/2} + D(u^{k+1}) + g - gamma*mu(|T^{k+1/2}|)T^{k+1/2}.
inline Eigen::VectorXd lm_step2_stress(const ConstitutiveModel& model, double tau,
                                       const Eigen::VectorXd& t_half, const Eigen::VectorXd& mom_data,
                                       const StressElementContext& ctx) {
    if (tau <= 0.0) throw std::invalid_argument("lm_step2_stress: tau must be positive");
    const Eigen::VectorXd rhs = (1.0 / tau) * (ctx.mass * t_half) + mom_data -
                                model.gamma * nonlinear_moments(ctx, model.mu, t_half);
    return ctx.mass_llt.solve(rhs) / (1.0 / tau + model.alpha);
}

}  // namespace icrflow
