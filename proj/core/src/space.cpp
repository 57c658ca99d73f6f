#include "fenn/space.hpp"

#include <cmath>
#include <map>
#include <set>

namespace fenn {

std::array<int, 6> TaylorHoodSpace::triangle_scalar_nodes(int t) const {
  const auto& tri = mesh.triangles[t];
  const auto& te = tri_edges[t];
  const int nv = mesh.num_vertices();
  return {tri[0], tri[1], tri[2], nv + te[0], nv + te[1], nv + te[2]};
}

std::array<int, 12> TaylorHoodSpace::triangle_velocity_dofs(int t) const {
  const auto sn = triangle_scalar_nodes(t);
  std::array<int, 12> dofs;
  for (int n = 0; n < 6; ++n) {
    dofs[2 * n] = velocity_dof(sn[n], 0);
    dofs[2 * n + 1] = velocity_dof(sn[n], 1);
  }
  return dofs;
}

TaylorHoodSpace build_space(const Mesh& mesh) {
  mesh.validate();
  TaylorHoodSpace space;
  space.mesh = mesh;

  std::map<std::array<int, 2>, int> edge_index;
  auto edge_key = [](int a, int b) {
    return a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a};
  };
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      edge_index.try_emplace(edge_key(tri[e], tri[(e + 1) % 3]), 0);
    }
  }
  // std::map iteration gives the deterministic (min,max)-sorted ordering.
  int next = 0;
  for (auto& [key, idx] : edge_index) idx = next++;
  space.n_edges = next;
  space.edge_vertices.resize(space.n_edges);
  for (const auto& [key, idx] : edge_index) space.edge_vertices[idx] = key;

  space.tri_edges.reserve(mesh.num_triangles());
  for (const auto& tri : mesh.triangles) {
    space.tri_edges.push_back({edge_index.at(edge_key(tri[0], tri[1])),
                               edge_index.at(edge_key(tri[1], tri[2])),
                               edge_index.at(edge_key(tri[2], tri[0]))});
  }

  space.nodes.reserve(space.num_scalar_nodes());
  for (const auto& v : mesh.vertices) space.nodes.push_back(v);
  for (const auto& ev : space.edge_vertices) {
    space.nodes.push_back(0.5 * (mesh.vertices[ev[0]] + mesh.vertices[ev[1]]));
  }

  // Dirichlet velocity DOFs: all P2 nodes (endpoints and midpoint) of Inflow
  // and Obstacle boundary edges. Inflow wins at nodes shared with an
  // obstacle edge only if such a mesh is ever built; tags are recorded per
  // node with Obstacle taking precedence so no-slip is never overwritten.
  std::map<int, BoundaryTag> node_tag;
  auto mark = [&](int node, BoundaryTag tag) {
    auto [it, inserted] = node_tag.try_emplace(node, tag);
    if (!inserted && tag == BoundaryTag::Obstacle) it->second = tag;
  };
  for (const BoundaryEdge& be : mesh.boundary_edges) {
    if (be.tag == BoundaryTag::Outflow) continue;
    mark(be.a, be.tag);
    mark(be.b, be.tag);
    mark(mesh.num_vertices() + edge_index.at(edge_key(be.a, be.b)), be.tag);
  }
  for (const auto& [node, tag] : node_tag) {
    for (int c = 0; c < 2; ++c) {
      DirichletDof d;
      d.dof = space.velocity_dof(node, c);
      d.component = c;
      d.node = space.nodes[node];
      d.tag = tag;
      space.dirichlet.push_back(d);
    }
  }
  return space;
}

Eigen::Vector2d inflow_velocity(double lambda_deg) {
  const double rad = lambda_deg * M_PI / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

double dirichlet_value(const DirichletDof& d, double lambda_deg) {
  if (d.tag == BoundaryTag::Obstacle) return 0.0;
  return inflow_velocity(lambda_deg)[d.component];
}

}  // namespace fenn
