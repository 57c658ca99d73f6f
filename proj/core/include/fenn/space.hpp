#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "fenn/mesh.hpp"

namespace fenn {

struct DirichletDof {
  int dof = -1;                 // velocity DOF index
  int component = 0;            // 0 = x, 1 = y
  Eigen::Vector2d node;         // Lagrange node coordinates
  BoundaryTag tag = BoundaryTag::Inflow;
};

/// P2 velocity / P1 pressure DOF maps over a mesh.
///
/// Scalar P2 nodes are ordered vertices first, then edge midpoints; edges are
/// sorted by (min vertex, max vertex). A velocity DOF is 2*node + component,
/// so x precedes y at every node. Pressure DOFs coincide with vertex indices.
struct TaylorHoodSpace {
  Mesh mesh;

  int n_edges = 0;
  std::vector<std::array<int, 2>> edge_vertices;  // sorted pairs, ascending
  std::vector<std::array<int, 3>> tri_edges;      // per triangle: local edges (0,1),(1,2),(2,0)
  std::vector<Eigen::Vector2d> nodes;             // scalar P2 nodes

  std::vector<DirichletDof> dirichlet;            // sorted by DOF index

  int num_scalar_nodes() const { return mesh.num_vertices() + n_edges; }
  int num_velocity_dofs() const { return 2 * num_scalar_nodes(); }
  int num_pressure_dofs() const { return mesh.num_vertices(); }
  int velocity_dof(int node, int component) const { return 2 * node + component; }

  /// The twelve velocity DOFs touching triangle t: x/y components of the
  /// three vertex nodes and three edge-midpoint nodes.
  std::array<int, 12> triangle_velocity_dofs(int t) const;
  std::array<int, 6> triangle_scalar_nodes(int t) const;
};

TaylorHoodSpace build_space(const Mesh& mesh);

/// Inflow velocity [cos(lambda*pi/180), sin(lambda*pi/180)].
Eigen::Vector2d inflow_velocity(double lambda_deg);

/// Prescribed boundary value for a Dirichlet DOF at angle of attack lambda:
/// inflow value at Inflow nodes, zero at Obstacle (no-slip) nodes.
double dirichlet_value(const DirichletDof& d, double lambda_deg);

}  // namespace fenn
