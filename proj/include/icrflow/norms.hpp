#pragma once

/// The three error measures of the convergence tables, computed by 5x5
/// quadrature per element against the analytic fields. The velocity error is
/// the H1 seminorm of the full gradient (not the symmetric gradient).

#include <cmath>
#include <stdexcept>
#include <vector>

#include "icrflow/assembly.hpp"
#include "icrflow/manufactured.hpp"

namespace icrflow {

struct ErrorTriple {
    double err_T = 0.0;
    double err_u = 0.0;
    double err_p = 0.0;
};

struct FlowState {
    Vec T;  // n_T stress coefficients
    Vec u;  // n_u velocity coefficients (constrained dofs hold boundary values)
    Vec p;  // n_p pressure coefficients (zero mean after post-shift)
};

inline ErrorTriple compute_errors(const FlowState& state, const ManufacturedCase& mcase,
                                  const DiscreteOperators& ops) {
    if (state.u.size() != ops.spaces->n_u || state.p.size() != ops.spaces->n_p ||
        state.T.size() != ops.spaces->n_T)
        throw std::invalid_argument("compute_errors: state does not match the discretization");

    Vec p_h = state.p;
    shift_to_zero_mean(ops, p_h);

    double accT = 0.0, accU = 0.0, accP = 0.0;
    for (int e = 0; e < ops.mesh->n_elements(); ++e) {
        const Point origin = ops.mesh->element_origin(e);
        const auto pdofs = ops.spaces->pressure_map(*ops.mesh, e);
        for (std::size_t q = 0; q < ops.ctx.wdet_data.size(); ++q) {
            const double w = ops.ctx.wdet_data[q];
            const Point x{origin.x + ops.ctx.offset_data[q].x, origin.y + ops.ctx.offset_data[q].y};

            // err_T is the componentwise L2 distance of the stored
            // (T11, T12, T22) fields; see norm_stress_components.
            const SymTensor dT = stress_at(ops, e, q, state.T, true) - mcase.stress_deviator(x);
            accT += w * (dT.t11 * dT.t11 + dT.t12 * dT.t12 + dT.t22 * dT.t22);

            const Mat2 gh = velocity_gradient_at(ops, e, q, state.u, true);
            const Mat2 gx = mcase.velocity_gradient(x);
            const Mat2 dg{gh.a11 - gx.a11, gh.a12 - gx.a12, gh.a21 - gx.a21, gh.a22 - gx.a22};
            accU += w * dg.frobenius_sq();

            double ph = 0.0;
            const auto& pv = ops.ctx.q1_data.values[q];
            for (int i = 0; i < 4; ++i) ph += p_h[pdofs[static_cast<std::size_t>(i)]] * pv[static_cast<std::size_t>(i)];
            const double dp = ph - mcase.pressure(x);
            accP += w * dp * dp;
        }
    }
    return {std::sqrt(accT), std::sqrt(accU), std::sqrt(accP)};
}

/// rate_k = log2(err_k / err_{k+1}) for a sequence over uniformly refined levels.
inline std::vector<double> convergence_rate(const std::vector<double>& errors) {
    if (errors.size() < 2) throw std::invalid_argument("convergence_rate: need at least two levels");
    std::vector<double> rates;
    for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
        if (errors[k] <= 0.0 || errors[k + 1] <= 0.0)
            throw std::invalid_argument("convergence_rate: errors must be positive");
        rates.push_back(std::log2(errors[k] / errors[k + 1]));
    }
    return rates;
}

// --- nodal interpolants of the exact fields (tests and diagnostics) -----------

inline Vec interpolate_velocity(const SystemSpaces& spaces, const ManufacturedCase& mcase) {
    Vec u = Vec::Zero(spaces.n_u);
    for (std::size_t n = 0; n < spaces.q2_nodes.size(); ++n) {
        const Vec2 val = mcase.velocity(spaces.q2_nodes[n]);
        u[SystemSpaces::velocity_dof(static_cast<int>(n), 0)] = val.x;
        u[SystemSpaces::velocity_dof(static_cast<int>(n), 1)] = val.y;
    }
    return u;
}

inline Vec interpolate_pressure(const QuadMesh& mesh, const SystemSpaces& spaces,
                                const ManufacturedCase& mcase) {
    Vec p = Vec::Zero(spaces.n_p);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) p[static_cast<int>(v)] = mcase.pressure(mesh.vertices[v]);
    return p;
}

inline Vec interpolate_stress(const QuadMesh& mesh, const SystemSpaces& spaces,
                              const ManufacturedCase& mcase) {
    Vec T = Vec::Zero(spaces.n_T);
    const double half = mesh.side / 2.0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const Point origin = mesh.element_origin(e);
        const int base = SystemSpaces::stress_base(e);
        for (int l = 0; l < 9; ++l) {
            const Point node{origin.x + half * (l % 3), origin.y + half * (l / 3)};
            const SymTensor t = mcase.stress_deviator(node);
            T[base + l] = t.t11;
            T[base + 9 + l] = t.t12;
            T[base + 18 + l] = t.t22;
        }
    }
    return T;
}

}  // namespace icrflow
