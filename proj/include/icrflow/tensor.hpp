#pragma once

/// Small fixed-size value types shared across the library: 2D points/vectors,
/// 2x2 gradients and symmetric 2x2 tensors stored as (t11, t12, t22).

#include <array>
#include <cmath>

namespace icrflow {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double a) const { return {a * x, a * y}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

inline Vec2 operator*(double a, const Vec2& v) { return v * a; }

using Point = Vec2;

/// 2x2 matrix with rows (a11 a12; a21 a22); used for velocity gradients,
/// with the convention grad(u)_{ij} = du_i/dx_j.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0;
    double a21 = 0.0, a22 = 0.0;

    double frobenius_sq() const { return a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22; }
};

/// Symmetric 2x2 tensor in component order (t11, t12, t22). The Frobenius
/// product for symmetric tensors carries weight 2 on the shear component:
/// A:B = a11*b11 + 2*a12*b12 + a22*b22.
struct SymTensor {
    double t11 = 0.0;
    double t12 = 0.0;
    double t22 = 0.0;

    SymTensor operator+(const SymTensor& o) const { return {t11 + o.t11, t12 + o.t12, t22 + o.t22}; }
    SymTensor operator-(const SymTensor& o) const { return {t11 - o.t11, t12 - o.t12, t22 - o.t22}; }
    SymTensor operator*(double a) const { return {a * t11, a * t12, a * t22}; }

    double ddot(const SymTensor& o) const { return t11 * o.t11 + 2.0 * t12 * o.t12 + t22 * o.t22; }
    double norm() const { return std::sqrt(ddot(*this)); }
    double trace() const { return t11 + t22; }
};

inline SymTensor operator*(double a, const SymTensor& t) { return t * a; }

/// Symmetric part of a gradient, D(u) = (grad u + grad u^T)/2.
inline SymTensor sym_part(const Mat2& grad) {
    return {grad.a11, 0.5 * (grad.a12 + grad.a21), grad.a22};
}

/// Frobenius weights of the (t11, t12, t22) parameterization.
inline constexpr std::array<double, 3> kFrobeniusWeights = {1.0, 2.0, 1.0};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace icrflow
