#pragma once

/// Reference-element machinery on [-1,1]^2: tensor-product Gauss rules and
/// Lagrange shape tables for Q2 (nodes {-1,0,1}^2) and Q1 (nodes {-1,1}^2).
/// Local node ordering is lexicographic by (y_hat, x_hat).

#include <array>
#include <stdexcept>
#include <vector>

#include "icrflow/tensor.hpp"

namespace icrflow {

struct QuadratureRule {
    std::vector<Point> points;
    std::vector<double> weights;  // sum to 4, the area of [-1,1]^2

    int size() const { return static_cast<int>(points.size()); }
};

/// k x k tensor Gauss-Legendre rule, exact for per-variable degree <= 2k-1.
inline QuadratureRule gauss_rule(int k) {
    if (k < 1 || k > 6) throw std::invalid_argument("gauss_rule: supported orders are 1..6");

    std::vector<double> x, w;
    switch (k) {
        case 1:
            x = {0.0};
            w = {2.0};
            break;
        case 2:
            x = {-0.5773502691896257645, 0.5773502691896257645};
            w = {1.0, 1.0};
            break;
        case 3:
            x = {-0.7745966692414833770, 0.0, 0.7745966692414833770};
            w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
            break;
        case 4:
            x = {-0.8611363115940525752, -0.3399810435848562648,
                 0.3399810435848562648, 0.8611363115940525752};
            w = {0.3478548451374538574, 0.6521451548625461426,
                 0.6521451548625461426, 0.3478548451374538574};
            break;
        case 5:
            x = {-0.9061798459386639928, -0.5384693101056830910, 0.0,
                 0.5384693101056830910, 0.9061798459386639928};
            w = {0.2369268850561890875, 0.4786286704993664680, 0.5688888888888888889,
                 0.4786286704993664680, 0.2369268850561890875};
            break;
        case 6:
            x = {-0.9324695142031520278, -0.6612093864662645137, -0.2386191860831969086,
                 0.2386191860831969086, 0.6612093864662645137, 0.9324695142031520278};
            w = {0.1713244923791703450, 0.3607615730481386076, 0.4679139345726910474,
                 0.4679139345726910474, 0.3607615730481386076, 0.1713244923791703450};
            break;
    }

    QuadratureRule rule;
    rule.points.reserve(static_cast<std::size_t>(k) * k);
    rule.weights.reserve(static_cast<std::size_t>(k) * k);
    for (int j = 0; j < k; ++j) {
        for (int i = 0; i < k; ++i) {
            rule.points.push_back({x[i], x[j]});
            rule.weights.push_back(w[i] * w[j]);
        }
    }
    return rule;
}

enum class Space { Q2, Q1 };

namespace detail {

inline double lagrange_q2(int a, double t) {
    switch (a) {
        case 0: return 0.5 * t * (t - 1.0);
        case 1: return 1.0 - t * t;
        default: return 0.5 * t * (t + 1.0);
    }
}

inline double lagrange_q2_d(int a, double t) {
    switch (a) {
        case 0: return t - 0.5;
        case 1: return -2.0 * t;
        default: return t + 0.5;
    }
}

inline double lagrange_q1(int a, double t) { return a == 0 ? 0.5 * (1.0 - t) : 0.5 * (1.0 + t); }
inline double lagrange_q1_d(int a) { return a == 0 ? -0.5 : 0.5; }

}  // namespace detail

inline int space_size(Space s) { return s == Space::Q2 ? 9 : 4; }

inline double shape_value(Space s, int i, const Point& xhat) {
    if (s == Space::Q2) {
        return detail::lagrange_q2(i % 3, xhat.x) * detail::lagrange_q2(i / 3, xhat.y);
    }
    return detail::lagrange_q1(i % 2, xhat.x) * detail::lagrange_q1(i / 2, xhat.y);
}

inline Vec2 shape_gradient(Space s, int i, const Point& xhat) {
    if (s == Space::Q2) {
        const int a = i % 3, b = i / 3;
        return {detail::lagrange_q2_d(a, xhat.x) * detail::lagrange_q2(b, xhat.y),
                detail::lagrange_q2(a, xhat.x) * detail::lagrange_q2_d(b, xhat.y)};
    }
    const int a = i % 2, b = i / 2;
    return {detail::lagrange_q1_d(a) * detail::lagrange_q1(b, xhat.y),
            detail::lagrange_q1(a, xhat.x) * detail::lagrange_q1_d(b)};
}

/// Reference node coordinates in local (lexicographic by y,x) order.
inline Point reference_node(Space s, int i) {
    if (s == Space::Q2) return {static_cast<double>(i % 3 - 1), static_cast<double>(i / 3 - 1)};
    return {static_cast<double>(2 * (i % 2) - 1), static_cast<double>(2 * (i / 2) - 1)};
}

/// Per-quadrature-point values and reference gradients of every basis
/// function: values[q][i], gradients[q][i].
struct ShapeTable {
    Space space = Space::Q2;
    std::vector<std::array<double, 9>> values;
    std::vector<std::array<Vec2, 9>> gradients;
    int n_basis = 0;
    int n_points = 0;
};

inline ShapeTable tabulate(Space space, const QuadratureRule& rule) {
    ShapeTable table;
    table.space = space;
    table.n_basis = space_size(space);
    table.n_points = rule.size();
    table.values.resize(rule.points.size());
    table.gradients.resize(rule.points.size());
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        for (int i = 0; i < table.n_basis; ++i) {
            table.values[q][static_cast<std::size_t>(i)] = shape_value(space, i, rule.points[q]);
            table.gradients[q][static_cast<std::size_t>(i)] = shape_gradient(space, i, rule.points[q]);
        }
    }
    return table;
}

/// Physical gradients on an affine square element of the given side:
/// grad_phys = (2/side) * grad_ref componentwise.
inline std::vector<std::array<Vec2, 9>> physical_gradients(const ShapeTable& table, double side) {
    if (side <= 0.0) throw std::invalid_argument("physical_gradients: side must be positive");
    const double scale = 2.0 / side;
    auto grads = table.gradients;
    for (auto& row : grads) {
        for (int i = 0; i < table.n_basis; ++i) row[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(i)] * scale;
    }
    return grads;
}

}  // namespace icrflow
