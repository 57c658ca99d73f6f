#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fenn {

enum class BoundaryTag { Inflow = 1, Outflow = 2, Obstacle = 3 };

const char* to_string(BoundaryTag tag);

struct BoundaryEdge {
  int a = -1;
  int b = -1;
  BoundaryTag tag = BoundaryTag::Inflow;
};

/// Conforming triangulation of a 2D domain with tagged boundary edges.
/// Immutable after construction; triangles are counterclockwise.
struct Mesh {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double triangle_area(int t) const;
  double total_area() const;

  /// Checks all structural invariants (orientation, index ranges, boundary
  /// edges belonging to exactly one triangle, tag coverage). Throws
  /// std::runtime_error with a description on the first violation.
  void validate() const;
};

/// Axis-aligned rectangle, used for the optional obstacle cut-out.
struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

struct DomainSpec {
  double width = 5.0;
  double height = 5.0;
  std::optional<Rect> obstacle;
  int resolution = 1;  // grid cells per unit length

  void validate() const;
};

/// Structured triangulation of the rectangle minus the (optional) obstacle.
/// Each grid cell is split into two triangles along the (0,0)-(1,1) diagonal;
/// cells whose closed rectangle intersects the obstacle are removed.
/// Boundary tags: x=0 or y=0 -> Inflow, x=width or y=height -> Outflow,
/// edges exposed by obstacle removal -> Obstacle.
Mesh generate_structured(const DomainSpec& spec);

/// Reads a subset of the Gmsh MSH 2.2 ASCII format: $Nodes plus $Elements
/// with 2-node lines (physical tag = boundary tag) and 3-node triangles.
/// Throws std::runtime_error carrying the offending line number.
Mesh parse_gmsh(std::istream& in);
Mesh parse_gmsh_file(const std::string& path);

void write_gmsh(const Mesh& mesh, std::ostream& out);
void write_gmsh_file(const Mesh& mesh, const std::string& path);

struct PointLocation {
  int triangle = -1;
  std::array<double, 3> bary{};  // w.r.t. the triangle's vertices, sums to 1
};

/// Finds a triangle containing x (within 1e-10 in barycentric coordinates).
/// Throws std::runtime_error if the point is outside the mesh.
PointLocation locate_point(const Mesh& mesh, const Eigen::Vector2d& x);

/// Vertex count, triangle count and boundary-tag histogram as a JSON string.
std::string mesh_summary_json(const Mesh& mesh);

}  // namespace fenn
