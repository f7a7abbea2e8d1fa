#pragma once

/// Element kernels and global assembly for every discrete form of the mixed
/// system, plus the Gram matrices used for norms. Quadrature: 4x4 Gauss for
/// all assembled bilinear/trilinear forms (exact for every polynomial
/// integrand on affine square elements, including the convection term); 5x5
/// for the manufactured data (forcing f and the tensor g).

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "icrflow/basis.hpp"
#include "icrflow/constitutive.hpp"
#include "icrflow/mesh.hpp"
#include "icrflow/solvers.hpp"
#include "icrflow/sparse.hpp"
#include "icrflow/spaces.hpp"

namespace icrflow {

using VectorField = std::function<Vec2(const Point&)>;
using TensorField = std::function<SymTensor(const Point&)>;

using Mat18 = Eigen::Matrix<double, 18, 18>;

/// Per-mesh reference data: every element is an axis-aligned square of the
/// same side, so one set of tables and element matrices serves the mesh.
struct AssemblyContext {
    QuadratureRule rule_assembly;  // 4x4
    QuadratureRule rule_data;      // 5x5

    ShapeTable q2_assembly;
    ShapeTable q1_assembly;
    ShapeTable q2_data;
    ShapeTable q1_data;

    std::vector<std::array<Vec2, 9>> q2_grad_assembly;  // physical gradients
    std::vector<std::array<Vec2, 9>> q2_grad_data;

    std::vector<double> wdet_assembly;  // weight x side^2/4
    std::vector<double> wdet_data;

    std::vector<Vec2> offset_assembly;  // physical offset from element origin
    std::vector<Vec2> offset_data;

    Mat18 visc18 = Mat18::Zero();   // int D(phi_i):D(phi_j)
    Mat18 grad18 = Mat18::Zero();   // int grad(phi_i):grad(phi_j)
    Eigen::Matrix<double, 4, 18> div18 = Eigen::Matrix<double, 4, 18>::Zero();  // -int q div(phi)
    Eigen::Matrix4d mass_q1 = Eigen::Matrix4d::Zero();

    StressElementContext stress;

    double side = 0.0;
};

inline AssemblyContext build_assembly_context(const QuadMesh& mesh) {
    AssemblyContext ctx;
    ctx.side = mesh.side;
    ctx.rule_assembly = gauss_rule(4);
    ctx.rule_data = gauss_rule(5);
    ctx.q2_assembly = tabulate(Space::Q2, ctx.rule_assembly);
    ctx.q1_assembly = tabulate(Space::Q1, ctx.rule_assembly);
    ctx.q2_data = tabulate(Space::Q2, ctx.rule_data);
    ctx.q1_data = tabulate(Space::Q1, ctx.rule_data);
    ctx.q2_grad_assembly = physical_gradients(ctx.q2_assembly, mesh.side);
    ctx.q2_grad_data = physical_gradients(ctx.q2_data, mesh.side);

    const double det = mesh.side * mesh.side / 4.0;
    for (int q = 0; q < ctx.rule_assembly.size(); ++q) {
        ctx.wdet_assembly.push_back(ctx.rule_assembly.weights[static_cast<std::size_t>(q)] * det);
        const Point xh = ctx.rule_assembly.points[static_cast<std::size_t>(q)];
        ctx.offset_assembly.push_back({0.5 * mesh.side * (xh.x + 1.0), 0.5 * mesh.side * (xh.y + 1.0)});
    }
    for (int q = 0; q < ctx.rule_data.size(); ++q) {
        ctx.wdet_data.push_back(ctx.rule_data.weights[static_cast<std::size_t>(q)] * det);
        const Point xh = ctx.rule_data.points[static_cast<std::size_t>(q)];
        ctx.offset_data.push_back({0.5 * mesh.side * (xh.x + 1.0), 0.5 * mesh.side * (xh.y + 1.0)});
    }

    // Element-constant blocks on the 4x4 rule. Velocity local dof = 2*l + c.
    for (std::size_t q = 0; q < ctx.wdet_assembly.size(); ++q) {
        const double w = ctx.wdet_assembly[q];
        const auto& g = ctx.q2_grad_assembly[q];
        const auto& pv = ctx.q1_assembly.values[q];
        for (int l = 0; l < 9; ++l) {
            const Vec2 gl = g[static_cast<std::size_t>(l)];
            for (int k = 0; k < 9; ++k) {
                const Vec2 gk = g[static_cast<std::size_t>(k)];
                // D(e_0 N) = [[Nx, Ny/2],[Ny/2, 0]], D(e_1 N) = [[0, Nx/2],[Nx/2, Ny]]
                ctx.visc18(2 * l, 2 * k) += w * (gl.x * gk.x + 0.5 * gl.y * gk.y);
                ctx.visc18(2 * l, 2 * k + 1) += w * 0.5 * gl.y * gk.x;
                ctx.visc18(2 * l + 1, 2 * k) += w * 0.5 * gl.x * gk.y;
                ctx.visc18(2 * l + 1, 2 * k + 1) += w * (gl.y * gk.y + 0.5 * gl.x * gk.x);

                const double gg = w * gl.dot(gk);
                ctx.grad18(2 * l, 2 * k) += gg;
                ctx.grad18(2 * l + 1, 2 * k + 1) += gg;
            }
            for (int i = 0; i < 4; ++i) {
                ctx.div18(i, 2 * l) -= w * pv[static_cast<std::size_t>(i)] * gl.x;
                ctx.div18(i, 2 * l + 1) -= w * pv[static_cast<std::size_t>(i)] * gl.y;
            }
        }
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                ctx.mass_q1(i, j) += w * pv[static_cast<std::size_t>(i)] * pv[static_cast<std::size_t>(j)];
    }

    // Stress context: 27x27 mass with Frobenius weights (1,2,1) per component.
    ctx.stress.wdet = ctx.wdet_assembly;
    ctx.stress.phi.resize(ctx.wdet_assembly.size());
    for (std::size_t q = 0; q < ctx.wdet_assembly.size(); ++q) ctx.stress.phi[q] = ctx.q2_assembly.values[q];
    ctx.stress.mass = Eigen::MatrixXd::Zero(27, 27);
    ctx.stress.mass_scalar = Eigen::MatrixXd::Zero(9, 9);
    for (std::size_t q = 0; q < ctx.wdet_assembly.size(); ++q) {
        for (int l = 0; l < 9; ++l)
            for (int k = 0; k < 9; ++k)
                ctx.stress.mass_scalar(l, k) +=
                    ctx.wdet_assembly[q] * ctx.stress.phi[q][static_cast<std::size_t>(l)] * ctx.stress.phi[q][static_cast<std::size_t>(k)];
    }
    for (int c = 0; c < 3; ++c)
        ctx.stress.mass.block(9 * c, 9 * c, 9, 9) =
            kFrobeniusWeights[static_cast<std::size_t>(c)] * ctx.stress.mass_scalar;
    ctx.stress.mass_llt.compute(ctx.stress.mass);
    ctx.stress.element_area = mesh.side * mesh.side;
    ctx.stress.domain_area = mesh.area();
    return ctx;
}

/// Global operators built once per (mesh, spaces): Gram matrices for norms,
/// the divergence block, and the pressure mass with its factorization.
struct DiscreteOperators {
    const QuadMesh* mesh = nullptr;
    const SystemSpaces* spaces = nullptr;
    AssemblyContext ctx;

    SparseMatrix K_dd;    // n_u x n_u, int D(u):D(v) (unscaled by 1/alpha)
    SparseMatrix G_grad;  // n_u x n_u, int grad(u):grad(v)
    SparseMatrix B;       // n_p x n_u, -int q div(v)
    SparseMatrix M_p;     // n_p x n_p pressure mass
    std::unique_ptr<Factorization> M_p_factor;
    Vec mp_ones;          // M_p * 1, so that integral(p_h) = mp_ones . p
    double domain_area = 0.0;
};

inline DiscreteOperators build_operators(const QuadMesh& mesh, const SystemSpaces& spaces) {
    DiscreteOperators ops;
    ops.mesh = &mesh;
    ops.spaces = &spaces;
    ops.ctx = build_assembly_context(mesh);
    ops.domain_area = mesh.area();

    std::vector<Triplet> tk, tg, tb, tm;
    tk.reserve(static_cast<std::size_t>(mesh.n_elements()) * 324);
    tg.reserve(static_cast<std::size_t>(mesh.n_elements()) * 324);
    tb.reserve(static_cast<std::size_t>(mesh.n_elements()) * 72);
    tm.reserve(static_cast<std::size_t>(mesh.n_elements()) * 16);
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto vdofs = spaces.velocity_map(e);
        const auto pdofs = spaces.pressure_map(mesh, e);
        for (int i = 0; i < 18; ++i) {
            for (int j = 0; j < 18; ++j) {
                tk.push_back({vdofs[static_cast<std::size_t>(i)], vdofs[static_cast<std::size_t>(j)], ops.ctx.visc18(i, j)});
                tg.push_back({vdofs[static_cast<std::size_t>(i)], vdofs[static_cast<std::size_t>(j)], ops.ctx.grad18(i, j)});
            }
        }
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 18; ++j)
                tb.push_back({pdofs[static_cast<std::size_t>(i)], vdofs[static_cast<std::size_t>(j)], ops.ctx.div18(i, j)});
            for (int j = 0; j < 4; ++j)
                tm.push_back({pdofs[static_cast<std::size_t>(i)], pdofs[static_cast<std::size_t>(j)], ops.ctx.mass_q1(i, j)});
        }
    }
    ops.K_dd = SparseMatrix::from_triplets(spaces.n_u, spaces.n_u, std::move(tk));
    ops.G_grad = SparseMatrix::from_triplets(spaces.n_u, spaces.n_u, std::move(tg));
    ops.B = SparseMatrix::from_triplets(spaces.n_p, spaces.n_u, std::move(tb));
    ops.M_p = SparseMatrix::from_triplets(spaces.n_p, spaces.n_p, std::move(tm));
    ops.M_p_factor = std::make_unique<Factorization>(ops.M_p);
    ops.mp_ones = ops.M_p.apply(Vec::Ones(spaces.n_p));
    return ops;
}

inline SparseMatrix assemble_pressure_mass(const QuadMesh& mesh, const SystemSpaces& spaces) {
    AssemblyContext ctx = build_assembly_context(mesh);
    std::vector<Triplet> tm;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto pdofs = spaces.pressure_map(mesh, e);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                tm.push_back({pdofs[static_cast<std::size_t>(i)], pdofs[static_cast<std::size_t>(j)], ctx.mass_q1(i, j)});
    }
    return SparseMatrix::from_triplets(spaces.n_p, spaces.n_p, std::move(tm));
}

// --- field evaluation from coefficient vectors -----------------------------

inline Vec2 velocity_at(const DiscreteOperators& ops, int e, std::size_t q, const Vec& u, bool data_rule = false) {
    const auto& nv = data_rule ? ops.ctx.q2_data.values[q] : ops.ctx.q2_assembly.values[q];
    const auto vdofs = ops.spaces->velocity_map(e);
    Vec2 val;
    for (int l = 0; l < 9; ++l) {
        val.x += u[vdofs[static_cast<std::size_t>(2 * l)]] * nv[static_cast<std::size_t>(l)];
        val.y += u[vdofs[static_cast<std::size_t>(2 * l + 1)]] * nv[static_cast<std::size_t>(l)];
    }
    return val;
}

inline Mat2 velocity_gradient_at(const DiscreteOperators& ops, int e, std::size_t q, const Vec& u,
                                 bool data_rule = false) {
    const auto& g = data_rule ? ops.ctx.q2_grad_data[q] : ops.ctx.q2_grad_assembly[q];
    const auto vdofs = ops.spaces->velocity_map(e);
    Mat2 grad;
    for (int l = 0; l < 9; ++l) {
        const double ux = u[vdofs[static_cast<std::size_t>(2 * l)]];
        const double uy = u[vdofs[static_cast<std::size_t>(2 * l + 1)]];
        const Vec2 gl = g[static_cast<std::size_t>(l)];
        grad.a11 += ux * gl.x;
        grad.a12 += ux * gl.y;
        grad.a21 += uy * gl.x;
        grad.a22 += uy * gl.y;
    }
    return grad;
}

inline SymTensor stress_at(const DiscreteOperators& ops, int e, std::size_t q, const Vec& T,
                           bool data_rule = false) {
    const auto& nv = data_rule ? ops.ctx.q2_data.values[q] : ops.ctx.q2_assembly.values[q];
    const int base = SystemSpaces::stress_base(e);
    SymTensor t;
    for (int l = 0; l < 9; ++l) {
        const double v = nv[static_cast<std::size_t>(l)];
        t.t11 += T[base + l] * v;
        t.t12 += T[base + 9 + l] * v;
        t.t22 += T[base + 18 + l] * v;
    }
    return t;
}

// --- saddle-point system view -------------------------------------------------

struct SaddleSystem {
    SparseMatrix A;  // free x free velocity block
    SparseMatrix B;  // n_p x n_u divergence block
    Vec F;           // free-length velocity load (boundary lift)
    Vec G;           // n_p pressure load (boundary lift)
};

/// Viscous/divergence part of the system with the Dirichlet lift folded into
/// (F, G): A0 = (1/alpha) int D(u):D(v) on free dofs.
inline SaddleSystem assemble_viscous_divergence(const DiscreteOperators& ops, const DirichletData& bc,
                                                double alpha) {
    SaddleSystem sys;
    std::vector<int> identity(static_cast<std::size_t>(ops.spaces->n_p));
    for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);

    SparseMatrix K_ff = ops.K_dd.select(bc.full_to_free, bc.n_free, bc.full_to_free, bc.n_free);
    std::vector<Triplet> scaled;
    scaled.reserve(static_cast<std::size_t>(K_ff.nnz()));
    for (int r = 0; r < K_ff.rows(); ++r)
        for (int k = K_ff.row_offsets()[static_cast<std::size_t>(r)]; k < K_ff.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
            scaled.push_back({r, K_ff.col_indices()[static_cast<std::size_t>(k)], K_ff.values()[static_cast<std::size_t>(k)] / alpha});
    sys.A = SparseMatrix::from_triplets(bc.n_free, bc.n_free, std::move(scaled));
    sys.B = ops.B;

    Vec u_bc = Vec::Zero(ops.spaces->n_u);
    bc.apply(u_bc);
    const Vec Ku = ops.K_dd.apply(u_bc);
    sys.F = Vec::Zero(bc.n_free);
    for (int f = 0; f < bc.n_free; ++f) sys.F[f] = -Ku[bc.free_to_full[static_cast<std::size_t>(f)]] / alpha;
    sys.G = -ops.B.apply(u_bc);
    return sys;
}

// --- convection --------------------------------------------------------------

/// Residual vector of the skew-symmetrized convection form: entries
/// d(u; u, v_i) over all velocity dofs.
inline Vec assemble_convection_residual(const DiscreteOperators& ops, const Vec& u) {
    Vec res = Vec::Zero(ops.spaces->n_u);
    for (int e = 0; e < ops.mesh->n_elements(); ++e) {
        const auto vdofs = ops.spaces->velocity_map(e);
        for (std::size_t q = 0; q < ops.ctx.wdet_assembly.size(); ++q) {
            const double w = ops.ctx.wdet_assembly[q];
            const auto& nv = ops.ctx.q2_assembly.values[q];
            const auto& g = ops.ctx.q2_grad_assembly[q];
            const Vec2 uv = velocity_at(ops, e, q, u);
            const Mat2 gu = velocity_gradient_at(ops, e, q, u);
            const Vec2 conv{uv.x * gu.a11 + uv.y * gu.a12, uv.x * gu.a21 + uv.y * gu.a22};
            for (int l = 0; l < 9; ++l) {
                const double adv_l = uv.x * g[static_cast<std::size_t>(l)].x + uv.y * g[static_cast<std::size_t>(l)].y;
                const double nl = nv[static_cast<std::size_t>(l)];
                res[vdofs[static_cast<std::size_t>(2 * l)]] += 0.5 * w * (conv.x * nl - adv_l * uv.x);
                res[vdofs[static_cast<std::size_t>(2 * l + 1)]] += 0.5 * w * (conv.y * nl - adv_l * uv.y);
            }
        }
    }
    return res;
}

/// Newton linearization of the convection residual:
/// J(u) dv = d(dv; u, v) + d(u; dv, v), assembled on all velocity dofs.
inline SparseMatrix assemble_convection_jacobian(const DiscreteOperators& ops, const Vec& u) {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(ops.mesh->n_elements()) * 324);
    Mat18 local;
    for (int e = 0; e < ops.mesh->n_elements(); ++e) {
        const auto vdofs = ops.spaces->velocity_map(e);
        local.setZero();
        for (std::size_t q = 0; q < ops.ctx.wdet_assembly.size(); ++q) {
            const double w = ops.ctx.wdet_assembly[q];
            const auto& nv = ops.ctx.q2_assembly.values[q];
            const auto& g = ops.ctx.q2_grad_assembly[q];
            const Vec2 uv = velocity_at(ops, e, q, u);
            const Mat2 gu = velocity_gradient_at(ops, e, q, u);
            std::array<double, 9> adv{};
            for (int l = 0; l < 9; ++l)
                adv[static_cast<std::size_t>(l)] =
                    uv.x * g[static_cast<std::size_t>(l)].x + uv.y * g[static_cast<std::size_t>(l)].y;
            const std::array<std::array<double, 2>, 2> gmat = {{{gu.a11, gu.a12}, {gu.a21, gu.a22}}};
            const std::array<double, 2> uc = {uv.x, uv.y};
            for (int l = 0; l < 9; ++l) {
                const double nl = nv[static_cast<std::size_t>(l)];
                const Vec2 gl = g[static_cast<std::size_t>(l)];
                const std::array<double, 2> gl2 = {gl.x, gl.y};
                for (int k = 0; k < 9; ++k) {
                    const double nk = nv[static_cast<std::size_t>(k)];
                    const double skew = 0.5 * w * (adv[static_cast<std::size_t>(k)] * nl - adv[static_cast<std::size_t>(l)] * nk);
                    for (int c = 0; c < 2; ++c) {
                        for (int d = 0; d < 2; ++d) {
                            double val = 0.5 * w * nk * (nl * gmat[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] -
                                                         gl2[static_cast<std::size_t>(d)] * uc[static_cast<std::size_t>(c)]);
                            if (c == d) val += skew;
                            local(2 * l + c, 2 * k + d) += val;
                        }
                    }
                }
            }
        }
        for (int i = 0; i < 18; ++i)
            for (int j = 0; j < 18; ++j)
                trips.push_back({vdofs[static_cast<std::size_t>(i)], vdofs[static_cast<std::size_t>(j)], local(i, j)});
    }
    return SparseMatrix::from_triplets(ops.spaces->n_u, ops.spaces->n_u, std::move(trips));
}

// --- right-hand sides ---------------------------------------------------------

/// (gamma/alpha) int mu(|T_h|) T_h : D(v_i) over all velocity dofs.
inline Vec assemble_stress_coupling_rhs(const DiscreteOperators& ops, const ConstitutiveModel& model,
                                        const Vec& T) {
    Vec rhs = Vec::Zero(ops.spaces->n_u);
    if (model.gamma == 0.0) return rhs;
    const double scale = model.gamma / model.alpha;
    for (int e = 0; e < ops.mesh->n_elements(); ++e) {
        const auto vdofs = ops.spaces->velocity_map(e);
        for (std::size_t q = 0; q < ops.ctx.wdet_assembly.size(); ++q) {
            const double w = ops.ctx.wdet_assembly[q] * scale;
            const auto& g = ops.ctx.q2_grad_assembly[q];
            const SymTensor t = stress_at(ops, e, q, T);
            const SymTensor mt = model.mu(t.norm()) * t;
            for (int l = 0; l < 9; ++l) {
                const Vec2 gl = g[static_cast<std::size_t>(l)];
                // T : D(e_0 N) = T11 Nx + T12 Ny ; T : D(e_1 N) = T12 Nx + T22 Ny
                rhs[vdofs[static_cast<std::size_t>(2 * l)]] += w * (mt.t11 * gl.x + mt.t12 * gl.y);
                rhs[vdofs[static_cast<std::size_t>(2 * l + 1)]] += w * (mt.t12 * gl.x + mt.t22 * gl.y);
            }
        }
    }
    return rhs;
}

/// int f . v_i with the 5x5 data rule.
inline Vec assemble_forcing(const DiscreteOperators& ops, const VectorField& forcing) {
    Vec rhs = Vec::Zero(ops.spaces->n_u);
    for (int e = 0; e < ops.mesh->n_elements(); ++e) {
        const auto vdofs = ops.spaces->velocity_map(e);
        const Point origin = ops.mesh->element_origin(e);
        for (std::size_t q = 0; q < ops.ctx.wdet_data.size(); ++q) {
            const double w = ops.ctx.wdet_data[q];
            const Point x{origin.x + ops.ctx.offset_data[q].x, origin.y + ops.ctx.offset_data[q].y};
            const Vec2 f = forcing(x);
            const auto& nv = ops.ctx.q2_data.values[q];
            for (int l = 0; l < 9; ++l) {
                rhs[vdofs[static_cast<std::size_t>(2 * l)]] += w * f.x * nv[static_cast<std::size_t>(l)];
                rhs[vdofs[static_cast<std::size_t>(2 * l + 1)]] += w * f.y * nv[static_cast<std::size_t>(l)];
            }
        }
    }
    return rhs;
}

// --- element-local stress data -------------------------------------------------

/// Per-element moment vectors against the stress basis; the element mass and
/// tolerances live in the shared StressElementContext.
struct StressLocalLoads {
    std::vector<Eigen::VectorXd> mom_Du;  // int Phi : D(u_h), 4x4 rule (exact)
    std::vector<Eigen::VectorXd> mom_g;   // int Phi : g, 5x5 rule
};

inline std::vector<Eigen::VectorXd> stress_moments_of_Du(const DiscreteOperators& ops, const Vec& u) {
    std::vector<Eigen::VectorXd> mom(static_cast<std::size_t>(ops.mesh->n_elements()));
    for (int e = 0; e < ops.mesh->n_elements(); ++e) {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(27);
        for (std::size_t q = 0; q < ops.ctx.wdet_assembly.size(); ++q) {
            const double w = ops.ctx.wdet_assembly[q];
            const SymTensor D = sym_part(velocity_gradient_at(ops, e, q, u));
            const std::array<double, 3> comp = {D.t11, D.t12, D.t22};
            const auto& nv = ops.ctx.q2_assembly.values[q];
            for (int c = 0; c < 3; ++c) {
                const double wc = w * kFrobeniusWeights[static_cast<std::size_t>(c)] * comp[static_cast<std::size_t>(c)];
                for (int l = 0; l < 9; ++l) m[9 * c + l] += wc * nv[static_cast<std::size_t>(l)];
            }
        }
        mom[static_cast<std::size_t>(e)] = std::move(m);
    }
    return mom;
}

inline std::vector<Eigen::VectorXd> stress_moments_of_g(const DiscreteOperators& ops,
                                                        const TensorField& g_field) {
    std::vector<Eigen::VectorXd> mom(static_cast<std::size_t>(ops.mesh->n_elements()));
    for (int e = 0; e < ops.mesh->n_elements(); ++e) {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(27);
        const Point origin = ops.mesh->element_origin(e);
        for (std::size_t q = 0; q < ops.ctx.wdet_data.size(); ++q) {
            const double w = ops.ctx.wdet_data[q];
            const Point x{origin.x + ops.ctx.offset_data[q].x, origin.y + ops.ctx.offset_data[q].y};
            const SymTensor g = g_field(x);
            const std::array<double, 3> comp = {g.t11, g.t12, g.t22};
            const auto& nv = ops.ctx.q2_data.values[q];
            for (int c = 0; c < 3; ++c) {
                const double wc = w * kFrobeniusWeights[static_cast<std::size_t>(c)] * comp[static_cast<std::size_t>(c)];
                for (int l = 0; l < 9; ++l) m[9 * c + l] += wc * nv[static_cast<std::size_t>(l)];
            }
        }
        mom[static_cast<std::size_t>(e)] = std::move(m);
    }
    return mom;
}

inline StressLocalLoads compute_stress_local_loads(const DiscreteOperators& ops, const Vec& u,
                                                   const TensorField& g_field) {
    return {stress_moments_of_Du(ops, u), stress_moments_of_g(ops, g_field)};
}

// --- norms of discrete fields ---------------------------------------------------

/// L2 norm of a stress field in the tensor (Frobenius) sense, shear counted
/// with weight 2.
inline double norm_stress(const DiscreteOperators& ops, const Vec& T) {
    double acc = 0.0;
    for (int e = 0; e < ops.spaces->n_elements; ++e) {
        const Eigen::VectorXd t = T.segment(SystemSpaces::stress_base(e), 27);
        acc += t.dot(ops.ctx.stress.mass * t);
    }
    return std::sqrt(std::max(0.0, acc));
}

/// Componentwise L2 norm of the stored (T11, T12, T22) fields: the measure
/// the error tables and the stopping metric are expressed in.
inline double norm_stress_components(const DiscreteOperators& ops, const Vec& T) {
    double acc = 0.0;
    for (int e = 0; e < ops.spaces->n_elements; ++e) {
        for (int c = 0; c < 3; ++c) {
            const Eigen::VectorXd t = T.segment(SystemSpaces::stress_base(e) + 9 * c, 9);
            acc += t.dot(ops.ctx.stress.mass_scalar * t);
        }
    }
    return std::sqrt(std::max(0.0, acc));
}

inline double norm_grad(const DiscreteOperators& ops, const Vec& u) {
    return std::sqrt(std::max(0.0, ops.G_grad.quadratic_form(u)));
}

inline double norm_sym_grad(const DiscreteOperators& ops, const Vec& u) {
    return std::sqrt(std::max(0.0, ops.K_dd.quadratic_form(u)));
}

inline double norm_pressure(const DiscreteOperators& ops, const Vec& p) {
    return std::sqrt(std::max(0.0, ops.M_p.quadratic_form(p)));
}

inline double pressure_integral(const DiscreteOperators& ops, const Vec& p) { return ops.mp_ones.dot(p); }

/// Shift p to zero integral mean (the discrete realization of Q = L^2_0).
inline void shift_to_zero_mean(const DiscreteOperators& ops, Vec& p) {
    p.array() -= pressure_integral(ops, p) / ops.domain_area;
}

/// L2 norm of a tensor field over the mesh (5x5 rule); used by the a priori
/// diagnostic with the manufactured g.
inline double tensor_field_norm(const DiscreteOperators& ops, const TensorField& field) {
    double acc = 0.0;
    for (int e = 0; e < ops.mesh->n_elements(); ++e) {
        const Point origin = ops.mesh->element_origin(e);
        for (std::size_t q = 0; q < ops.ctx.wdet_data.size(); ++q) {
            const Point x{origin.x + ops.ctx.offset_data[q].x, origin.y + ops.ctx.offset_data[q].y};
            const SymTensor g = field(x);
            acc += ops.ctx.wdet_data[q] * g.ddot(g);
        }
    }
    return std::sqrt(acc);
}

/// Assembled skew-symmetrized trilinear form d(a; b, c); antisymmetric in its
/// last two arguments at the quadrature level.
inline double convection_form(const DiscreteOperators& ops, const Vec& a, const Vec& b, const Vec& c) {
    double acc = 0.0;
    for (int e = 0; e < ops.mesh->n_elements(); ++e) {
        for (std::size_t q = 0; q < ops.ctx.wdet_assembly.size(); ++q) {
            const Vec2 av = velocity_at(ops, e, q, a);
            const Vec2 bv = velocity_at(ops, e, q, b);
            const Vec2 cv = velocity_at(ops, e, q, c);
            const Mat2 gb = velocity_gradient_at(ops, e, q, b);
            const Mat2 gc = velocity_gradient_at(ops, e, q, c);
            const Vec2 adv_b{av.x * gb.a11 + av.y * gb.a12, av.x * gb.a21 + av.y * gb.a22};
            const Vec2 adv_c{av.x * gc.a11 + av.y * gc.a12, av.x * gc.a21 + av.y * gc.a22};
            acc += 0.5 * ops.ctx.wdet_assembly[q] * (adv_b.dot(cv) - adv_c.dot(bv));
        }
    }
    return acc;
}

}  // namespace icrflow
