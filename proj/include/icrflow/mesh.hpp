#pragma once

/// Structured conforming meshes of the two computational domains, built from
/// axis-aligned square elements of side 1/2^n. Element and vertex orderings
/// are lexicographic by (y, x) so that runs are reproducible.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "icrflow/tensor.hpp"

namespace icrflow {

enum class Domain { UnitSquare, LShape };

struct MeshSpec {
    Domain domain = Domain::UnitSquare;
    int level = 1;  // n >= 1; element side 1/2^n, diameter sqrt(2)/2^n
};

/// Edge local indices follow the reference square [-1,1]^2:
/// 0 = bottom (y_hat=-1), 1 = right, 2 = top, 3 = left.
struct BoundaryEdge {
    int element;
    int local_edge;
};

class QuadMesh {
  public:
    Domain domain = Domain::UnitSquare;
    int level = 1;
    double side = 0.0;  // element side length, identical for every element
    double h = 0.0;     // element diameter, side * sqrt(2)

    std::vector<Point> vertices;
    std::vector<std::array<int, 4>> elements;  // CCW: (v00, v10, v11, v01)
    std::vector<BoundaryEdge> boundary_edges;

    // Structured-grid bookkeeping: cell lattice spans [0, cells_x) x [0, cells_y)
    // starting at `grid_origin`; cell_index is -1 for cells outside the domain.
    Point grid_origin;
    int cells_x = 0;
    int cells_y = 0;
    std::vector<int> cell_index;          // lattice cell -> element id or -1
    std::vector<std::array<int, 2>> element_cell;  // element id -> (cx, cy)

    int n_elements() const { return static_cast<int>(elements.size()); }

    bool cell_in_grid(int cx, int cy) const {
        return cx >= 0 && cx < cells_x && cy >= 0 && cy < cells_y;
    }

    int element_at_cell(int cx, int cy) const {
        return cell_in_grid(cx, cy) ? cell_index[static_cast<std::size_t>(cy) * cells_x + cx] : -1;
    }

    /// Lower-left corner of element e; the affine reference map is
    /// x = origin + (side/2) * (x_hat + 1), with Jacobian determinant side^2/4.
    Point element_origin(int e) const {
        const auto& c = element_cell.at(static_cast<std::size_t>(e));
        return {grid_origin.x + side * c[0], grid_origin.y + side * c[1]};
    }

    double area() const { return side * side * n_elements(); }
};

namespace detail {

inline bool lshape_cell_included(int cx, int cy, int m) {
    // Grid covers (-1,1)^2 with 2m x 2m cells; the excluded quadrant [0,1)^2
    // is exactly the cells with cx >= m and cy >= m.
    return !(cx >= m && cy >= m);
}

}  // namespace detail

inline QuadMesh build_mesh(const MeshSpec& spec) {
    if (spec.level < 1) throw std::invalid_argument("build_mesh: level must be >= 1");

    const int m = 1 << spec.level;
    QuadMesh mesh;
    mesh.domain = spec.domain;
    mesh.level = spec.level;
    mesh.side = 1.0 / m;
    mesh.h = std::sqrt(2.0) / m;

    if (spec.domain == Domain::UnitSquare) {
        mesh.grid_origin = {0.0, 0.0};
        mesh.cells_x = m;
        mesh.cells_y = m;
    } else {
        mesh.grid_origin = {-1.0, -1.0};
        mesh.cells_x = 2 * m;
        mesh.cells_y = 2 * m;
    }

    const auto included = [&](int cx, int cy) {
        if (!mesh.cell_in_grid(cx, cy)) return false;
        if (spec.domain == Domain::UnitSquare) return true;
        return detail::lshape_cell_included(cx, cy, m);
    };

    // Vertices: lattice points touched by at least one retained cell,
    // numbered lexicographically by (y, x).
    const int vx = mesh.cells_x + 1;
    const int vy = mesh.cells_y + 1;
    std::vector<int> vertex_id(static_cast<std::size_t>(vx) * vy, -1);
    const auto touches_cell = [&](int i, int j) {
        return included(i, j) || included(i - 1, j) || included(i, j - 1) || included(i - 1, j - 1);
    };
    for (int j = 0; j < vy; ++j) {
        for (int i = 0; i < vx; ++i) {
            if (touches_cell(i, j)) {
                vertex_id[static_cast<std::size_t>(j) * vx + i] = static_cast<int>(mesh.vertices.size());
                mesh.vertices.push_back({mesh.grid_origin.x + mesh.side * i,
                                         mesh.grid_origin.y + mesh.side * j});
            }
        }
    }

    mesh.cell_index.assign(static_cast<std::size_t>(mesh.cells_x) * mesh.cells_y, -1);
    const auto vid = [&](int i, int j) { return vertex_id[static_cast<std::size_t>(j) * vx + i]; };
    for (int cy = 0; cy < mesh.cells_y; ++cy) {
        for (int cx = 0; cx < mesh.cells_x; ++cx) {
            if (!included(cx, cy)) continue;
            mesh.cell_index[static_cast<std::size_t>(cy) * mesh.cells_x + cx] =
                static_cast<int>(mesh.elements.size());
            mesh.elements.push_back({vid(cx, cy), vid(cx + 1, cy), vid(cx + 1, cy + 1), vid(cx, cy + 1)});
            mesh.element_cell.push_back({cx, cy});
        }
    }

    // Boundary edges: element edges with no retained neighbor across them.
    static constexpr std::array<std::array<int, 2>, 4> kNeighborOffset = {{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto [cx, cy] = mesh.element_cell[static_cast<std::size_t>(e)];
        for (int le = 0; le < 4; ++le) {
            const int nx = cx + kNeighborOffset[le][0];
            const int ny = cy + kNeighborOffset[le][1];
            if (!included(nx, ny)) mesh.boundary_edges.push_back({e, le});
        }
    }
    return mesh;
}

/// (origin, side) of element e; see QuadMesh::element_origin for the map.
inline std::pair<Point, double> element_geometry(const QuadMesh& mesh, int e) {
    if (e < 0 || e >= mesh.n_elements()) throw std::out_of_range("element_geometry: element index out of range");
    return {mesh.element_origin(e), mesh.side};
}

/// Element containing point x (boundary ties resolved to the lower-left cell).
inline int locate_element(const QuadMesh& mesh, const Point& x) {
    const auto clamp = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
    int cx = clamp(static_cast<int>((x.x - mesh.grid_origin.x) / mesh.side), 0, mesh.cells_x - 1);
    int cy = clamp(static_cast<int>((x.y - mesh.grid_origin.y) / mesh.side), 0, mesh.cells_y - 1);
    return mesh.element_at_cell(cx, cy);
}

inline std::string domain_name(Domain d) {
    return d == Domain::UnitSquare ? "unit-square" : "l-shape";
}

}  // namespace icrflow
