#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "icrflow/mesh.hpp"

using namespace icrflow;

TEST_CASE("unit square mesh counts and geometry", "[mesh]") {
    const QuadMesh m2 = build_mesh({Domain::UnitSquare, 2});
    CHECK(m2.n_elements() == 16);
    CHECK(m2.vertices.size() == 25);
    CHECK(m2.h == Catch::Approx(std::sqrt(2.0) / 4.0));  // Table row "2 & 0.354"

    const QuadMesh m1 = build_mesh({Domain::UnitSquare, 1});
    CHECK(m1.n_elements() == 4);
    CHECK(m1.boundary_edges.size() == 8);
}

TEST_CASE("l-shape mesh counts", "[mesh]") {
    const QuadMesh m = build_mesh({Domain::LShape, 1});
    CHECK(m.n_elements() == 12);  // 3 quadrants x 4 cells of side 1/2
    CHECK(m.boundary_edges.size() == 16);

    // The reentrant corner (0,0) is a regular mesh vertex shared by 3 elements.
    int corner = -1;
    for (std::size_t v = 0; v < m.vertices.size(); ++v)
        if (std::abs(m.vertices[v].x) < 1e-15 && std::abs(m.vertices[v].y) < 1e-15) corner = static_cast<int>(v);
    REQUIRE(corner >= 0);
    int incident = 0;
    for (const auto& el : m.elements)
        if (std::count(el.begin(), el.end(), corner) > 0) ++incident;
    CHECK(incident == 3);
}

TEST_CASE("element geometry and location", "[mesh]") {
    const QuadMesh m1 = build_mesh({Domain::UnitSquare, 1});
    const int e = locate_element(m1, {0.25, 0.25});
    const auto [origin, side] = element_geometry(m1, e);
    CHECK(origin.x == Catch::Approx(0.0).margin(1e-15));
    CHECK(origin.y == Catch::Approx(0.0).margin(1e-15));
    CHECK(side == Catch::Approx(0.5));
    CHECK(side * side / 4.0 > 0.0);

    const QuadMesh lm = build_mesh({Domain::LShape, 1});
    const int el = locate_element(lm, {-0.75, 0.75});
    const auto [lo, ls] = element_geometry(lm, el);
    CHECK(lo.x == Catch::Approx(-1.0));
    CHECK(lo.y == Catch::Approx(0.5));
    CHECK(ls == Catch::Approx(0.5));

    CHECK_THROWS_AS(element_geometry(m1, 99), std::out_of_range);
}

TEST_CASE("element location and domain names", "[mesh]") {
    const QuadMesh m = build_mesh({Domain::LShape, 2});
    for (const Point p : {Point{-0.99, -0.99}, Point{0.99, -0.01}, Point{-0.01, 0.99}}) {
        const int e = locate_element(m, p);
        REQUIRE(e >= 0);
        const auto [origin, side] = element_geometry(m, e);
        CHECK(p.x >= origin.x - 1e-12);
        CHECK(p.x <= origin.x + side + 1e-12);
        CHECK(p.y >= origin.y - 1e-12);
        CHECK(p.y <= origin.y + side + 1e-12);
    }
    CHECK(locate_element(m, {0.5, 0.5}) == -1);  // excluded quadrant
    CHECK(domain_name(Domain::UnitSquare) == "unit-square");
    CHECK(domain_name(Domain::LShape) == "l-shape");
    CHECK_THROWS_AS(build_mesh({Domain::UnitSquare, 0}), std::invalid_argument);
}

TEST_CASE("mesh area, edge incidence and refinement nesting", "[mesh]") {
    for (const Domain dom : {Domain::UnitSquare, Domain::LShape}) {
        const double expected_area = dom == Domain::UnitSquare ? 1.0 : 3.0;
        for (int n = 1; n <= 3; ++n) {
            const QuadMesh m = build_mesh({dom, n});
            CHECK(m.area() == Catch::Approx(expected_area).epsilon(1e-14));
            CHECK(m.n_elements() == (dom == Domain::UnitSquare ? 1 : 3) * (1 << (2 * n)));

            // Every interior edge shared by exactly 2 elements, boundary by 1.
            std::map<std::pair<int, int>, int> edge_count;
            static constexpr int kEdgeVerts[4][2] = {{0, 1}, {1, 2}, {3, 2}, {0, 3}};
            for (const auto& el : m.elements) {
                for (const auto& ev : kEdgeVerts) {
                    auto key = std::minmax(el[static_cast<std::size_t>(ev[0])], el[static_cast<std::size_t>(ev[1])]);
                    edge_count[{key.first, key.second}]++;
                }
            }
            std::size_t boundary = 0;
            for (const auto& [edge, count] : edge_count) {
                REQUIRE((count == 1 || count == 2));
                if (count == 1) ++boundary;
            }
            CHECK(boundary == m.boundary_edges.size());
        }

        // Vertex nesting under refinement.
        const QuadMesh coarse = build_mesh({dom, 2});
        const QuadMesh fine = build_mesh({dom, 3});
        std::set<std::pair<long, long>> fine_keys;
        const auto key = [](const Point& p) {
            return std::pair<long, long>{std::lround(p.x * 1024), std::lround(p.y * 1024)};
        };
        for (const auto& v : fine.vertices) fine_keys.insert(key(v));
        for (const auto& v : coarse.vertices) CHECK(fine_keys.count(key(v)) == 1);
    }
}

TEST_CASE("elements are CCW axis-aligned squares of constant side", "[mesh]") {
    const QuadMesh m = build_mesh({Domain::LShape, 2});
    for (int e = 0; e < m.n_elements(); ++e) {
        const auto& el = m.elements[static_cast<std::size_t>(e)];
        const Point a = m.vertices[static_cast<std::size_t>(el[0])];
        const Point b = m.vertices[static_cast<std::size_t>(el[1])];
        const Point c = m.vertices[static_cast<std::size_t>(el[2])];
        const Point d = m.vertices[static_cast<std::size_t>(el[3])];
        CHECK(b.x - a.x == Catch::Approx(m.side));
        CHECK(b.y == Catch::Approx(a.y).margin(1e-15));
        CHECK(c.x - d.x == Catch::Approx(m.side));
        CHECK(d.y - a.y == Catch::Approx(m.side));
        CHECK(c.y - b.y == Catch::Approx(m.side));
    }
}
