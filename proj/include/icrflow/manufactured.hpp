#pragma once

/// Closed-form exact fields for the two verification cases and the derived
/// right-hand sides. Both cases share the deviatoric stress
///   T^d = diag(c, -c),  c(x,y) = (cos(2 pi x) - cos(2 pi y))/4,
/// and the pressure p = -(cos(2 pi x) + cos(2 pi y))/4; they differ in the
/// velocity: a smooth trigonometric field on the unit square (Case 1) and
/// u = (y r^{2/3}, -x r^{2/3}) on the L-shape (Case 2), whose gradient is
/// singular at the reentrant corner.

#include <array>
#include <cmath>
#include <stdexcept>

#include "icrflow/constitutive.hpp"
#include "icrflow/mesh.hpp"
#include "icrflow/tensor.hpp"

namespace icrflow {

enum class CaseId { Case1 = 1, Case2 = 2 };

class ManufacturedCase {
  public:
    ManufacturedCase(CaseId id, const ConstitutiveModel& model)
        : id_(id), model_(model), domain_(id == CaseId::Case1 ? Domain::UnitSquare : Domain::LShape) {}

    CaseId id() const { return id_; }
    Domain domain() const { return domain_; }
    const ConstitutiveModel& model() const { return model_; }

    bool in_domain(const Point& x) const {
        const double eps = 1e-12;
        if (domain_ == Domain::UnitSquare)
            return x.x >= -eps && x.x <= 1.0 + eps && x.y >= -eps && x.y <= 1.0 + eps;
        const bool in_box = x.x >= -1.0 - eps && x.x <= 1.0 + eps && x.y >= -1.0 - eps && x.y <= 1.0 + eps;
        return in_box && !(x.x > eps && x.y > eps);
    }

    Vec2 velocity(const Point& x) const {
        if (id_ == CaseId::Case1)
            return {-std::cos(kPi * x.x) * std::sin(kPi * x.y), std::sin(kPi * x.x) * std::cos(kPi * x.y)};
        const double sigma = std::cbrt(x.x * x.x + x.y * x.y);
        return {x.y * sigma, -x.x * sigma};
    }

    /// grad(u)_{ij} = du_i/dx_j; Case 2 is singular at the corner (0,0).
    Mat2 velocity_gradient(const Point& x) const {
        if (id_ == CaseId::Case1) {
            const double sx = std::sin(kPi * x.x), cx = std::cos(kPi * x.x);
            const double sy = std::sin(kPi * x.y), cy = std::cos(kPi * x.y);
            return {kPi * sx * sy, -kPi * cx * cy, kPi * cx * cy, -kPi * sx * sy};
        }
        const double s = x.x * x.x + x.y * x.y;
        if (s == 0.0) throw std::domain_error("velocity_gradient: singular at the reentrant corner");
        const double sigma = std::cbrt(s);
        const double inv3s = 2.0 / (3.0 * sigma * sigma);  // d(s^{1/3})/ds * 2 = (2/3) s^{-2/3}
        return {x.y * inv3s * x.x, sigma + x.y * inv3s * x.y, -sigma - x.x * inv3s * x.x, -x.x * inv3s * x.y};
    }

    Vec2 velocity_laplacian(const Point& x) const {
        if (id_ == CaseId::Case1) {
            const Vec2 u = velocity(x);
            return {-2.0 * kPi * kPi * u.x, -2.0 * kPi * kPi * u.y};
        }
        const double s = x.x * x.x + x.y * x.y;
        if (s == 0.0) throw std::domain_error("velocity_laplacian: singular at the reentrant corner");
        const double sigma = std::cbrt(s);
        const double scale = (16.0 / 9.0) / (sigma * sigma);  // (16/9) r^{-4/3}
        return {scale * x.y, -scale * x.x};
    }

    Vec2 convective_term(const Point& x) const {  // (u . grad) u
        if (id_ == CaseId::Case1)
            return {-0.5 * kPi * std::sin(2.0 * kPi * x.x), -0.5 * kPi * std::sin(2.0 * kPi * x.y)};
        const double s = x.x * x.x + x.y * x.y;
        const double sigma2 = std::cbrt(s) * std::cbrt(s);
        return {-sigma2 * x.x, -sigma2 * x.y};
    }

    double pressure(const Point& x) const {
        return -(std::cos(2.0 * kPi * x.x) + std::cos(2.0 * kPi * x.y)) / 4.0;
    }

    Vec2 pressure_gradient(const Point& x) const {
        return {0.5 * kPi * std::sin(2.0 * kPi * x.x), 0.5 * kPi * std::sin(2.0 * kPi * x.y)};
    }

    SymTensor stress_deviator(const Point& x) const {
        const double c = scalar_c(x);
        return {c, 0.0, -c};
    }

    /// (d/dx T^d, d/dy T^d)
    std::array<SymTensor, 2> stress_deviator_gradient(const Point& x) const {
        const double dcx = -0.5 * kPi * std::sin(2.0 * kPi * x.x);
        const double dcy = 0.5 * kPi * std::sin(2.0 * kPi * x.y);
        return {SymTensor{dcx, 0.0, -dcx}, SymTensor{dcy, 0.0, -dcy}};
    }

    SymTensor sym_velocity_gradient(const Point& x) const { return sym_part(velocity_gradient(x)); }

    /// g = alpha T^d + gamma mu(|T^d|) T^d - D(u), the manufactured defect of
    /// the constitutive relation.
    SymTensor g_field(const Point& x) const {
        return apply_map(model_, stress_deviator(x)) - sym_velocity_gradient(x);
    }

    /// div(mu(|T|)T)_i = sum_j [ mu d_j T_ij + T_ij dmu(|T|) (T : d_j T)/|T| ],
    /// with the chain-rule term dropped where |T| vanishes (dmu(0) = 0 for the
    /// shipped mu, so the limit is zero).
    Vec2 mu_stress_divergence(const Point& x) const {
        const SymTensor T = stress_deviator(x);
        const auto dT = stress_deviator_gradient(x);
        const double s = T.norm();
        const double m = model_.mu(s);
        Vec2 div{m * (dT[0].t11 + dT[1].t12), m * (dT[0].t12 + dT[1].t22)};
        if (s > 1e-14) {
            const double dm = model_.dmu(s);
            const double dsx = T.ddot(dT[0]) / s;  // d|T|/dx
            const double dsy = T.ddot(dT[1]) / s;
            div.x += dm * (T.t11 * dsx + T.t12 * dsy);
            div.y += dm * (T.t12 * dsx + T.t22 * dsy);
        }
        return div;
    }

    /// f = (u.grad)u - (1/alpha) div D(u) + grad p + (gamma/alpha) div(mu(|T^d|) T^d).
    /// div D(u) = Laplacian(u)/2 since u is divergence-free.
    Vec2 forcing(const Point& x) const {
        if (id_ == CaseId::Case2 && x.x * x.x + x.y * x.y < 1e-28)
            throw std::domain_error("forcing: evaluation at the reentrant corner is undefined");
        const Vec2 conv = convective_term(x);
        const Vec2 lap = velocity_laplacian(x);
        const Vec2 gp = pressure_gradient(x);
        const Vec2 dmu_term = mu_stress_divergence(x);
        const double ia = 1.0 / model_.alpha;
        const double ga = model_.gamma / model_.alpha;
        return {conv.x - 0.5 * ia * lap.x + gp.x + ga * dmu_term.x,
                conv.y - 0.5 * ia * lap.y + gp.y + ga * dmu_term.y};
    }

  private:
    double scalar_c(const Point& x) const {
        return (std::cos(2.0 * kPi * x.x) - std::cos(2.0 * kPi * x.y)) / 4.0;
    }

    CaseId id_;
    ConstitutiveModel model_;
    Domain domain_;
};

struct ExactTriple {
    Vec2 u;
    double p;
    SymTensor Td;
};

inline ExactTriple eval_exact(const ManufacturedCase& mc, const Point& x) {
    if (!mc.in_domain(x)) throw std::domain_error("eval_exact: point outside the case domain");
    return {mc.velocity(x), mc.pressure(x), mc.stress_deviator(x)};
}

inline SymTensor eval_g(const ManufacturedCase& mc, const Point& x) { return mc.g_field(x); }
inline Vec2 eval_f(const ManufacturedCase& mc, const Point& x) { return mc.forcing(x); }

}  // namespace icrflow
