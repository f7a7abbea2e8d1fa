#pragma once

/// Global DOF numbering for the three fields on a QuadMesh:
///   velocity  - continuous vector Q2, dof = 2*node + component,
///   pressure  - continuous Q1 on the mesh vertices,
///   stress    - element-discontinuous symmetric Q2 tensor, 27 dofs per
///               element laid out as component blocks (T11, T12, T22) of 9.
/// Velocity Dirichlet data is imposed by nodal interpolation + elimination.

#include <algorithm>
#include <array>
#include <functional>
#include <vector>

#include "icrflow/basis.hpp"
#include "icrflow/mesh.hpp"

namespace icrflow {

class SystemSpaces {
  public:
    std::vector<Point> q2_nodes;                      // global Q2 node coordinates
    std::vector<std::array<int, 9>> elem_q2_nodes;    // per element, local (y,x)-lexicographic
    std::vector<int> boundary_q2_nodes;               // sorted, nodes on the domain boundary

    int n_u = 0;  // 2 * #Q2 nodes
    int n_p = 0;  // #Q1 vertices
    int n_T = 0;  // 27 * #elements

    int n_elements = 0;

    static int velocity_dof(int q2_node, int comp) { return 2 * q2_node + comp; }

    /// 18 velocity dofs of element e: local index l*2 + comp, l = Q2 local node.
    std::array<int, 18> velocity_map(int e) const {
        std::array<int, 18> dofs{};
        const auto& nodes = elem_q2_nodes[static_cast<std::size_t>(e)];
        for (int l = 0; l < 9; ++l) {
            dofs[static_cast<std::size_t>(2 * l)] = velocity_dof(nodes[static_cast<std::size_t>(l)], 0);
            dofs[static_cast<std::size_t>(2 * l + 1)] = velocity_dof(nodes[static_cast<std::size_t>(l)], 1);
        }
        return dofs;
    }

    /// 4 pressure dofs of element e (the mesh vertex ids, CCW -> local Q1 order).
    std::array<int, 4> pressure_map(const QuadMesh& mesh, int e) const {
        const auto& v = mesh.elements[static_cast<std::size_t>(e)];
        // mesh stores (v00, v10, v11, v01); Q1 local order is (v00, v10, v01, v11)
        return {v[0], v[1], v[3], v[2]};
    }

    /// First of the 27 stress dofs of element e; dof = base + comp*9 + local.
    static int stress_base(int e) { return 27 * e; }
    static int stress_dof(int e, int comp, int local) { return 27 * e + 9 * comp + local; }
};

inline SystemSpaces build_spaces(const QuadMesh& mesh) {
    SystemSpaces spaces;
    spaces.n_elements = mesh.n_elements();
    spaces.n_T = 27 * mesh.n_elements();
    spaces.n_p = static_cast<int>(mesh.vertices.size());

    // Q2 nodes live on the twice-refined lattice; enumerate lexicographically
    // by (y, x), keeping points touched by at least one element.
    const int fx = 2 * mesh.cells_x + 1;
    const int fy = 2 * mesh.cells_y + 1;
    std::vector<int> node_id(static_cast<std::size_t>(fx) * fy, -1);
    const auto cell_at = [&](int cx, int cy) { return mesh.element_at_cell(cx, cy) >= 0; };
    const auto touched = [&](int i, int j) {
        // Fine-lattice point (i,j) belongs to cell (i/2, j/2) and, when on a
        // cell edge, to the neighboring cells as well.
        const int cx_hi = i / 2, cy_hi = j / 2;
        const int cx_lo = (i % 2 == 0) ? cx_hi - 1 : cx_hi;
        const int cy_lo = (j % 2 == 0) ? cy_hi - 1 : cy_hi;
        for (int cy : {cy_lo, cy_hi})
            for (int cx : {cx_lo, cx_hi})
                if (cell_at(cx, cy)) return true;
        return false;
    };
    const double half = mesh.side / 2.0;
    for (int j = 0; j < fy; ++j) {
        for (int i = 0; i < fx; ++i) {
            if (touched(i, j)) {
                node_id[static_cast<std::size_t>(j) * fx + i] = static_cast<int>(spaces.q2_nodes.size());
                spaces.q2_nodes.push_back({mesh.grid_origin.x + half * i, mesh.grid_origin.y + half * j});
            }
        }
    }
    spaces.n_u = 2 * static_cast<int>(spaces.q2_nodes.size());

    spaces.elem_q2_nodes.resize(static_cast<std::size_t>(mesh.n_elements()));
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto [cx, cy] = mesh.element_cell[static_cast<std::size_t>(e)];
        for (int b = 0; b < 3; ++b) {
            for (int a = 0; a < 3; ++a) {
                const int i = 2 * cx + a, j = 2 * cy + b;
                spaces.elem_q2_nodes[static_cast<std::size_t>(e)][static_cast<std::size_t>(3 * b + a)] =
                    node_id[static_cast<std::size_t>(j) * fx + i];
            }
        }
    }

    // Q2 local nodes lying on each reference edge (bottom, right, top, left).
    static constexpr std::array<std::array<int, 3>, 4> kEdgeNodes = {{{0, 1, 2}, {2, 5, 8}, {6, 7, 8}, {0, 3, 6}}};
    std::vector<char> on_boundary(spaces.q2_nodes.size(), 0);
    for (const auto& be : mesh.boundary_edges) {
        const auto& nodes = spaces.elem_q2_nodes[static_cast<std::size_t>(be.element)];
        for (int l : kEdgeNodes[static_cast<std::size_t>(be.local_edge)])
            on_boundary[static_cast<std::size_t>(nodes[static_cast<std::size_t>(l)])] = 1;
    }
    for (std::size_t n = 0; n < on_boundary.size(); ++n)
        if (on_boundary[n]) spaces.boundary_q2_nodes.push_back(static_cast<int>(n));

    return spaces;
}

/// Constrained velocity dofs with prescribed values, plus the free-dof
/// renumbering used by the saddle-point solves.
struct DirichletData {
    std::vector<int> constrained_dofs;  // sorted
    std::vector<double> values;         // aligned with constrained_dofs
    std::vector<int> full_to_free;      // -1 for constrained dofs
    std::vector<int> free_to_full;
    int n_free = 0;

    bool is_constrained(int dof) const { return full_to_free[static_cast<std::size_t>(dof)] < 0; }

    /// Overwrites the constrained entries of a full-length velocity vector.
    template <class Vector>
    void apply(Vector& u) const {
        for (std::size_t k = 0; k < constrained_dofs.size(); ++k)
            u[constrained_dofs[k]] = values[k];
    }
};

inline DirichletData interpolate_dirichlet(const QuadMesh& /*mesh*/, const SystemSpaces& spaces,
                                           const std::function<Vec2(const Point&)>& u_exact) {
    DirichletData bc;
    bc.full_to_free.assign(static_cast<std::size_t>(spaces.n_u), 0);
    std::vector<char> constrained(static_cast<std::size_t>(spaces.n_u), 0);
    for (int node : spaces.boundary_q2_nodes) {
        const Vec2 val = u_exact(spaces.q2_nodes[static_cast<std::size_t>(node)]);
        bc.constrained_dofs.push_back(SystemSpaces::velocity_dof(node, 0));
        bc.values.push_back(val.x);
        bc.constrained_dofs.push_back(SystemSpaces::velocity_dof(node, 1));
        bc.values.push_back(val.y);
        constrained[static_cast<std::size_t>(SystemSpaces::velocity_dof(node, 0))] = 1;
        constrained[static_cast<std::size_t>(SystemSpaces::velocity_dof(node, 1))] = 1;
    }
    for (int dof = 0; dof < spaces.n_u; ++dof) {
        if (constrained[static_cast<std::size_t>(dof)]) {
            bc.full_to_free[static_cast<std::size_t>(dof)] = -1;
        } else {
            bc.full_to_free[static_cast<std::size_t>(dof)] = static_cast<int>(bc.free_to_full.size());
            bc.free_to_full.push_back(dof);
        }
    }
    bc.n_free = static_cast<int>(bc.free_to_full.size());
    return bc;
}

}  // namespace icrflow
