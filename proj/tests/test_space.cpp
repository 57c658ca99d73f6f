#include <doctest.h>

#include <cmath>
#include <set>

#include "fenn/space.hpp"
#include "helpers.hpp"

using namespace fenn;
using fenn::testing::make_domain;

TEST_CASE("degree-of-freedom counts on frozen configurations") {
  struct Row {
    DomainSpec spec;
    int edges, nu, np;
  };
  const Row rows[] = {
      {make_domain(1, 1, 1), 5, 18, 4},
      {make_domain(2, 1, 2), 30, 90, 15},
      {make_domain(5, 5, 4), 1240, 3362, 441},
      {fenn::testing::desk_domain(2), 312, 864, 120},
      {fenn::testing::desk_domain(3), 684, 1872, 252},
      {fenn::testing::desk_domain(4), 1200, 3264, 432},
  };
  for (const auto& row : rows) {
    const TaylorHoodSpace space = build_space(generate_structured(row.spec));
    CAPTURE(row.spec.width);
    CAPTURE(row.spec.resolution);
    CHECK(space.n_edges == row.edges);
    CHECK(space.num_velocity_dofs() == row.nu);
    CHECK(space.num_pressure_dofs() == row.np);
    CHECK(static_cast<int>(space.nodes.size()) == space.num_scalar_nodes());
  }
}

TEST_CASE("edge midpoints sit between their vertices") {
  const TaylorHoodSpace space = fenn::testing::desk_space(2);
  const int nv = space.mesh.num_vertices();
  for (int e = 0; e < space.n_edges; ++e) {
    const auto [a, b] = space.edge_vertices[e];
    CHECK(a < b);
    const Eigen::Vector2d mid = 0.5 * (space.mesh.vertices[a] + space.mesh.vertices[b]);
    CHECK((space.nodes[nv + e] - mid).norm() <= 1e-14);
  }
  for (int v = 0; v < nv; ++v) CHECK(space.nodes[v] == space.mesh.vertices[v]);
}

TEST_CASE("triangle DOF maps are consistent") {
  const TaylorHoodSpace space = fenn::testing::desk_space(2);
  for (int t = 0; t < space.mesh.num_triangles(); ++t) {
    const auto scalars = space.triangle_scalar_nodes(t);
    const auto vel = space.triangle_velocity_dofs(t);
    for (int i = 0; i < 6; ++i) {
      CHECK(vel[2 * i] == 2 * scalars[i]);
      CHECK(vel[2 * i + 1] == 2 * scalars[i] + 1);
    }
    // First three scalar nodes are the triangle's vertices.
    for (int i = 0; i < 3; ++i) CHECK(scalars[i] == space.mesh.triangles[t][i]);
  }
}

TEST_CASE("dirichlet set covers inflow and obstacle nodes, sorted") {
  const TaylorHoodSpace space = fenn::testing::desk_space(2);
  std::set<int> seen;
  int prev = -1;
  for (const auto& d : space.dirichlet) {
    CHECK(d.dof > prev);
    prev = d.dof;
    seen.insert(d.dof);
    CHECK(d.dof == 2 * ((d.dof) / 2) + d.component);
    if (d.tag == BoundaryTag::Inflow) {
      CHECK((d.node.x() == 0 || d.node.y() == 0));
    } else {
      REQUIRE(d.tag == BoundaryTag::Obstacle);
      CHECK(d.node.x() >= 2.0);
      CHECK(d.node.x() <= 3.0);
      CHECK(d.node.y() >= 2.0);
      CHECK(d.node.y() <= 3.0);
    }
  }
  // Inflow: two sides of 10 edges each -> 41 nodes; obstacle ring: 8 edges ->
  // 16 nodes; two constrained components per node.
  CHECK(space.dirichlet.size() == 2 * (41 + 16));
  CHECK(seen.size() == space.dirichlet.size());
}

TEST_CASE("unit square space has the minimal counts") {
  const TaylorHoodSpace space = build_space(generate_structured(make_domain(1, 1, 1)));
  CHECK(space.num_velocity_dofs() == 18);
  CHECK(space.num_pressure_dofs() == 4);
  // Inflow sides x=0 and y=0: 3 vertices + 2 midpoints constrained.
  CHECK(space.dirichlet.size() == 10);
}

TEST_CASE("inflow velocity is the unit vector at the given attack angle") {
  CHECK(inflow_velocity(0.0) == Eigen::Vector2d(1, 0));
  const Eigen::Vector2d v45 = inflow_velocity(45.0);
  CHECK(std::abs(v45.x() - std::sqrt(0.5)) <= 1e-15);
  CHECK(std::abs(v45.y() - std::sqrt(0.5)) <= 1e-15);
  CHECK(std::abs(inflow_velocity(30.0).norm() - 1.0) <= 1e-15);
}

TEST_CASE("dirichlet values: inflow follows the angle, obstacle is no-slip") {
  const TaylorHoodSpace space = fenn::testing::desk_space(2);
  const double lambda = 17.0;
  const Eigen::Vector2d vin = inflow_velocity(lambda);
  for (const auto& d : space.dirichlet) {
    const double value = dirichlet_value(d, lambda);
    if (d.tag == BoundaryTag::Obstacle) {
      CHECK(value == 0.0);
    } else {
      CHECK(value == vin[d.component]);
    }
  }
}
