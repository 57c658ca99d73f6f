#include "fenn/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fenn {

namespace {

using Json = nlohmann::json;

std::array<int, 2> sorted_edge(int a, int b) {
  return a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a};
}

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

const char* to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::Inflow: return "inflow";
    case BoundaryTag::Outflow: return "outflow";
    case BoundaryTag::Obstacle: return "obstacle";
  }
  return "?";
}

double Mesh::triangle_area(int t) const {
  const auto& tri = triangles[t];
  const Eigen::Vector2d& p0 = vertices[tri[0]];
  const Eigen::Vector2d& p1 = vertices[tri[1]];
  const Eigen::Vector2d& p2 = vertices[tri[2]];
  return 0.5 * ((p1.x() - p0.x()) * (p2.y() - p0.y()) -
                (p2.x() - p0.x()) * (p1.y() - p0.y()));
}

double Mesh::total_area() const {
  double a = 0;
  for (int t = 0; t < num_triangles(); ++t) a += triangle_area(t);
  return a;
}

void Mesh::validate() const {
  const int nv = num_vertices();
  std::map<std::array<int, 2>, int> edge_use;
  for (int t = 0; t < num_triangles(); ++t) {
    for (int v : triangles[t]) {
      if (v < 0 || v >= nv) fail("triangle " + std::to_string(t) + " has out-of-range vertex index");
    }
    if (triangle_area(t) <= 0.0) {
      fail("triangle " + std::to_string(t) + " has non-positive signed area");
    }
    for (int e = 0; e < 3; ++e) {
      edge_use[sorted_edge(triangles[t][e], triangles[t][(e + 1) % 3])]++;
    }
  }
  std::set<std::array<int, 2>> tagged;
  for (const BoundaryEdge& be : boundary_edges) {
    if (be.a < 0 || be.a >= nv || be.b < 0 || be.b >= nv) {
      fail("boundary edge has out-of-range vertex index");
    }
    auto key = sorted_edge(be.a, be.b);
    auto it = edge_use.find(key);
    if (it == edge_use.end()) fail("boundary edge not part of any triangle");
    if (it->second != 1) fail("boundary edge shared by more than one triangle");
    if (!tagged.insert(key).second) fail("boundary edge tagged more than once");
  }
  for (const auto& [key, count] : edge_use) {
    if (count == 1 && !tagged.count(key)) {
      fail("untagged boundary edge (" + std::to_string(key[0]) + "," +
           std::to_string(key[1]) + ")");
    }
    if (count > 2) fail("edge shared by more than two triangles");
  }
}

void DomainSpec::validate() const {
  if (width <= 0 || height <= 0) fail("domain dimensions must be positive");
  if (resolution < 1) fail("resolution must be at least 1");
  if (obstacle) {
    const Rect& r = *obstacle;
    if (r.width() <= 0 || r.height() <= 0) fail("obstacle must have positive extent");
    if (r.x0 <= 0 || r.y0 <= 0 || r.x1 >= width || r.y1 >= height) {
      fail("obstacle must lie strictly inside the domain");
    }
  }
}

Mesh generate_structured(const DomainSpec& spec) {
  spec.validate();
  const int nx = static_cast<int>(std::lround(spec.width * spec.resolution));
  const int ny = static_cast<int>(std::lround(spec.height * spec.resolution));
  const double dx = spec.width / nx;
  const double dy = spec.height / ny;

  auto cell_removed = [&](int i, int j) {
    if (!spec.obstacle) return false;
    const Rect& r = *spec.obstacle;
    const double x0 = i * dx, x1 = (i + 1) * dx;
    const double y0 = j * dy, y1 = (j + 1) * dy;
    // Positive-area overlap: cells only touching the obstacle boundary stay,
    // so a grid-aligned obstacle is removed exactly.
    const double eps = 1e-12;
    return x1 > r.x0 + eps && x0 < r.x1 - eps && y1 > r.y0 + eps && y0 < r.y1 - eps;
  };

  std::vector<std::pair<int, int>> kept;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (!cell_removed(i, j)) kept.emplace_back(i, j);
  if (kept.empty()) fail("obstacle removal leaves no cells");

  // Connectivity check over kept cells (4-neighborhood is enough: two cells
  // sharing a grid edge share a triangle edge after splitting).
  {
    std::map<std::pair<int, int>, int> index;
    for (size_t c = 0; c < kept.size(); ++c) index[kept[c]] = static_cast<int>(c);
    std::vector<char> seen(kept.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    size_t reached = 1;
    while (!stack.empty()) {
      auto [i, j] = kept[stack.back()];
      stack.pop_back();
      for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        auto it = index.find({i + di, j + dj});
        if (it != index.end() && !seen[it->second]) {
          seen[it->second] = 1;
          ++reached;
          stack.push_back(it->second);
        }
      }
    }
    if (reached != kept.size()) {
      fail("obstacle removal disconnects the domain (" + std::to_string(reached) +
           " of " + std::to_string(kept.size()) + " cells reachable)");
    }
  }

  Mesh mesh;
  std::map<std::pair<int, int>, int> vid;
  auto vertex = [&](int i, int j) {
    auto [it, inserted] = vid.try_emplace({i, j}, static_cast<int>(mesh.vertices.size()));
    if (inserted) mesh.vertices.emplace_back(i * dx, j * dy);
    return it->second;
  };

  std::map<std::array<int, 2>, int> edge_count;
  for (auto [i, j] : kept) {
    const int v00 = vertex(i, j);
    const int v10 = vertex(i + 1, j);
    const int v11 = vertex(i + 1, j + 1);
    const int v01 = vertex(i, j + 1);
    mesh.triangles.push_back({v00, v10, v11});
    mesh.triangles.push_back({v00, v11, v01});
    for (const auto& tri : {std::array{v00, v10, v11}, std::array{v00, v11, v01}}) {
      for (int e = 0; e < 3; ++e) edge_count[sorted_edge(tri[e], tri[(e + 1) % 3])]++;
    }
  }

  const double tol = 1e-12 * std::max(spec.width, spec.height);
  auto on_line = [&](int v, int axis, double value) {
    return std::abs(mesh.vertices[v][axis] - value) <= tol;
  };
  for (const auto& [e, count] : edge_count) {
    if (count != 1) continue;
    BoundaryEdge be;
    be.a = e[0];
    be.b = e[1];
    if ((on_line(e[0], 0, 0) && on_line(e[1], 0, 0)) ||
        (on_line(e[0], 1, 0) && on_line(e[1], 1, 0))) {
      be.tag = BoundaryTag::Inflow;
    } else if ((on_line(e[0], 0, spec.width) && on_line(e[1], 0, spec.width)) ||
               (on_line(e[0], 1, spec.height) && on_line(e[1], 1, spec.height))) {
      be.tag = BoundaryTag::Outflow;
    } else {
      be.tag = BoundaryTag::Obstacle;
    }
    mesh.boundary_edges.push_back(be);
  }
  return mesh;
}

namespace {

class GmshReader {
 public:
  explicit GmshReader(std::istream& in) : in_(in) {}

  Mesh read() {
    std::string line;
    while (next_line(line)) {
      if (line == "$MeshFormat") {
        read_format();
      } else if (line == "$Nodes") {
        read_nodes();
      } else if (line == "$Elements") {
        read_elements();
      } else if (!line.empty() && line[0] == '$') {
        skip_section(line);
      }
    }
    if (nodes_.empty()) error("missing $Nodes section");
    if (mesh_.triangles.empty()) error("no triangle elements found");
    renumber();
    mesh_.validate();
    return std::move(mesh_);
  }

 private:
  bool next_line(std::string& line) {
    while (std::getline(in_, line)) {
      ++lineno_;
      while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void error(const std::string& msg) const {
    fail("gmsh parse error at line " + std::to_string(lineno_) + ": " + msg);
  }

  void expect_end(const std::string& tag) {
    std::string line;
    if (!next_line(line) || line != tag) error("expected " + tag);
  }

  void read_format() {
    std::string line;
    if (!next_line(line)) error("truncated $MeshFormat");
    std::istringstream ss(line);
    double version = 0;
    int file_type = -1, data_size = 0;
    if (!(ss >> version >> file_type >> data_size)) error("malformed $MeshFormat header");
    if (version < 2.0 || version >= 3.0) error("unsupported MSH version (need 2.x ASCII)");
    if (file_type != 0) error("binary MSH files are not supported");
    expect_end("$EndMeshFormat");
  }

  void read_nodes() {
    std::string line;
    if (!next_line(line)) error("truncated $Nodes");
    long count = -1;
    try {
      count = std::stol(line);
    } catch (...) {
      error("malformed node count");
    }
    if (count < 0) error("negative node count");
    for (long n = 0; n < count; ++n) {
      if (!next_line(line)) error("truncated $Nodes");
      std::istringstream ss(line);
      long id;
      double x, y, z;
      if (!(ss >> id >> x >> y >> z)) error("malformed node line");
      nodes_[id] = Eigen::Vector2d(x, y);
    }
    expect_end("$EndNodes");
  }

  void read_elements() {
    std::string line;
    if (!next_line(line)) error("truncated $Elements");
    long count = -1;
    try {
      count = std::stol(line);
    } catch (...) {
      error("malformed element count");
    }
    for (long n = 0; n < count; ++n) {
      if (!next_line(line)) error("truncated $Elements");
      std::istringstream ss(line);
      long id;
      int type, ntags;
      if (!(ss >> id >> type >> ntags)) error("malformed element line");
      std::vector<int> tags(ntags);
      for (int& t : tags)
        if (!(ss >> t)) error("malformed element tags");
      if (type == 1) {  // 2-node line
        long a, b;
        if (!(ss >> a >> b)) error("malformed line element");
        if (tags.empty()) error("line element without physical tag");
        BoundaryEdge be;
        be.a = static_cast<int>(a);  // resolved in renumber()
        be.b = static_cast<int>(b);
        switch (tags[0]) {
          case 1: be.tag = BoundaryTag::Inflow; break;
          case 2: be.tag = BoundaryTag::Outflow; break;
          case 3: be.tag = BoundaryTag::Obstacle; break;
          default: error("unknown physical tag " + std::to_string(tags[0]));
        }
        mesh_.boundary_edges.push_back(be);
      } else if (type == 2) {  // 3-node triangle
        long a, b, c;
        if (!(ss >> a >> b >> c)) error("malformed triangle element");
        mesh_.triangles.push_back({static_cast<int>(a), static_cast<int>(b), static_cast<int>(c)});
      } else {
        error("unsupported element type " + std::to_string(type) +
              " (only 2-node lines and 3-node triangles)");
      }
    }
    expect_end("$EndElements");
  }

  void skip_section(const std::string& header) {
    const std::string end = "$End" + header.substr(1);
    std::string line;
    while (next_line(line)) {
      if (line == end) return;
    }
    error("unterminated section " + header);
  }

  // Translates gmsh node ids to dense zero-based indices, dropping
  // unreferenced nodes.
  void renumber() {
    std::map<long, int> remap;
    auto resolve = [&](int gmsh_id) {
      auto node = nodes_.find(gmsh_id);
      if (node == nodes_.end()) fail("gmsh parse error: element references unknown node " + std::to_string(gmsh_id));
      auto [it, inserted] = remap.try_emplace(gmsh_id, static_cast<int>(mesh_.vertices.size()));
      if (inserted) mesh_.vertices.push_back(node->second);
      return it->second;
    };
    for (auto& tri : mesh_.triangles)
      for (int& v : tri) v = resolve(v);
    for (auto& be : mesh_.boundary_edges) {
      be.a = resolve(be.a);
      be.b = resolve(be.b);
    }
  }

  std::istream& in_;
  long lineno_ = 0;
  std::map<long, Eigen::Vector2d> nodes_;
  Mesh mesh_;
};

}  // namespace

Mesh parse_gmsh(std::istream& in) { return GmshReader(in).read(); }

Mesh parse_gmsh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open mesh file: " + path);
  return parse_gmsh(in);
}

void write_gmsh(const Mesh& mesh, std::ostream& out) {
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << mesh.num_vertices() << "\n";
  out.precision(17);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    out << (v + 1) << " " << mesh.vertices[v].x() << " " << mesh.vertices[v].y() << " 0\n";
  }
  out << "$EndNodes\n$Elements\n"
      << (mesh.boundary_edges.size() + mesh.triangles.size()) << "\n";
  long id = 1;
  for (const BoundaryEdge& be : mesh.boundary_edges) {
    out << id++ << " 1 2 " << static_cast<int>(be.tag) << " 0 " << (be.a + 1) << " "
        << (be.b + 1) << "\n";
  }
  for (const auto& tri : mesh.triangles) {
    out << id++ << " 2 2 0 0 " << (tri[0] + 1) << " " << (tri[1] + 1) << " " << (tri[2] + 1)
        << "\n";
  }
  out << "$EndElements\n";
}

void write_gmsh_file(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open output file: " + path);
  write_gmsh(mesh, out);
}

PointLocation locate_point(const Mesh& mesh, const Eigen::Vector2d& x) {
  const double tol = 1e-10;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector2d& p0 = mesh.vertices[tri[0]];
    const Eigen::Vector2d& p1 = mesh.vertices[tri[1]];
    const Eigen::Vector2d& p2 = mesh.vertices[tri[2]];
    const double area2 = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                         (p2.x() - p0.x()) * (p1.y() - p0.y());
    const double l1 = ((p2.y() - p0.y()) * (x.x() - p0.x()) -
                       (p2.x() - p0.x()) * (x.y() - p0.y())) /
                      area2;
    const double l2 = (-(p1.y() - p0.y()) * (x.x() - p0.x()) +
                       (p1.x() - p0.x()) * (x.y() - p0.y())) /
                      area2;
    const double l0 = 1.0 - l1 - l2;
    if (l0 >= -tol && l1 >= -tol && l2 >= -tol) {
      return PointLocation{t, {l0, l1, l2}};
    }
  }
  fail("point (" + std::to_string(x.x()) + ", " + std::to_string(x.y()) +
       ") lies outside the mesh");
}

std::string mesh_summary_json(const Mesh& mesh) {
  Json tags;
  tags["inflow"] = 0;
  tags["outflow"] = 0;
  tags["obstacle"] = 0;
  for (const BoundaryEdge& be : mesh.boundary_edges) {
    tags[to_string(be.tag)] = tags[to_string(be.tag)].get<int>() + 1;
  }
  Json j;
  j["vertices"] = mesh.num_vertices();
  j["triangles"] = mesh.num_triangles();
  j["boundary_edges"] = mesh.boundary_edges.size();
  j["tags"] = tags;
  j["area"] = mesh.total_area();
  return j.dump(2);
}

}  // namespace fenn
