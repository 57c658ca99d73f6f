#include "fenn/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "fenn/quadrature.hpp"

namespace fenn {

namespace {

struct TriangleGeometry {
  Eigen::Matrix2d jac_inv_t;  // J^{-T}, maps reference gradients to physical
  double area2;               // |det J| = 2 * area
};

TriangleGeometry triangle_geometry(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  const Eigen::Vector2d& p0 = mesh.vertices[tri[0]];
  const Eigen::Vector2d& p1 = mesh.vertices[tri[1]];
  const Eigen::Vector2d& p2 = mesh.vertices[tri[2]];
  Eigen::Matrix2d jac;
  jac.col(0) = p1 - p0;
  jac.col(1) = p2 - p0;
  const double det = jac.determinant();
  if (det <= 0 || !std::isfinite(det)) {
    throw std::runtime_error("assembly: degenerate triangle " + std::to_string(t));
  }
  TriangleGeometry geo;
  geo.jac_inv_t = jac.inverse().transpose();
  geo.area2 = det;
  return geo;
}

}  // namespace

void StokesSystem::zero_dirichlet(Eigen::VectorXd& v) const {
  for (int d : dirichlet_dofs) v[d] = 0.0;
}

void StokesSystem::set_angle(const TaylorHoodSpace& space, double new_lambda_deg) {
  lambda_deg = new_lambda_deg;
  const int nd = static_cast<int>(dirichlet_dofs.size());
  bc_values.resize(nd);
  for (int d = 0; d < nd; ++d) {
    bc_values[d] = dirichlet_value(space.dirichlet[d], lambda_deg);
  }
  // Source terms are zero; the right-hand side carries only the lifted
  // boundary data.
  f = -(A_bc * bc_values);
  for (int d = 0; d < nd; ++d) f[dirichlet_dofs[d]] = bc_values[d];
  g = -(B_bc * bc_values);
}

StokesSystem assemble_stokes(const TaylorHoodSpace& space, double eta, double lambda_deg) {
  if (eta <= 0) throw std::runtime_error("assemble_stokes: eta must be positive");
  const int nu = space.num_velocity_dofs();
  const int np = space.num_pressure_dofs();

  std::vector<Eigen::Triplet<double>> a_trip, b_trip;
  a_trip.reserve(space.mesh.num_triangles() * 84);
  b_trip.reserve(space.mesh.num_triangles() * 36);

  for (int t = 0; t < space.mesh.num_triangles(); ++t) {
    const TriangleGeometry geo = triangle_geometry(space.mesh, t);
    const auto vdofs = space.triangle_velocity_dofs(t);
    const auto& tri = space.mesh.triangles[t];

    // Scalar P2 stiffness; the vector Laplacian is block diagonal per
    // component.
    Eigen::Matrix<double, 6, 6> k = Eigen::Matrix<double, 6, 6>::Zero();
    // Divergence coupling: b(v, q) = -int q div(v).
    Eigen::Matrix<double, 3, 12> bdiv = Eigen::Matrix<double, 3, 12>::Zero();
    for (const QuadPoint& qp : kQuadDegree4) {
      const auto gref = p2_grad(qp.x, qp.y);
      std::array<Eigen::Vector2d, 6> g;
      for (int n = 0; n < 6; ++n) {
        g[n] = geo.jac_inv_t * Eigen::Vector2d(gref[n][0], gref[n][1]);
      }
      const auto q1 = p1_basis(qp.x, qp.y);
      const double w = qp.w * geo.area2;
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) k(i, j) += w * g[i].dot(g[j]);
      }
      for (int r = 0; r < 3; ++r) {
        for (int n = 0; n < 6; ++n) {
          bdiv(r, 2 * n) -= w * q1[r] * g[n].x();
          bdiv(r, 2 * n + 1) -= w * q1[r] * g[n].y();
        }
      }
    }
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        const double v = eta * k(i, j);
        a_trip.emplace_back(vdofs[2 * i], vdofs[2 * j], v);
        a_trip.emplace_back(vdofs[2 * i + 1], vdofs[2 * j + 1], v);
      }
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 12; ++c) {
        b_trip.emplace_back(tri[r], vdofs[c], bdiv(r, c));
      }
    }
  }

  StokesSystem sys;
  sys.eta = eta;
  sys.A.resize(nu, nu);
  sys.A.setFromTriplets(a_trip.begin(), a_trip.end());
  sys.B.resize(np, nu);
  sys.B.setFromTriplets(b_trip.begin(), b_trip.end());

  sys.dirichlet_dofs.reserve(space.dirichlet.size());
  for (const DirichletDof& d : space.dirichlet) sys.dirichlet_dofs.push_back(d.dof);
  const int nd = static_cast<int>(sys.dirichlet_dofs.size());

  // Keep the raw constrained columns before elimination; they define the
  // angle-dependent right-hand side.
  std::vector<Eigen::Triplet<double>> abc_trip, bbc_trip;
  std::vector<int> col_of(nu, -1);
  for (int d = 0; d < nd; ++d) col_of[sys.dirichlet_dofs[d]] = d;
  for (int c = 0; c < nu; ++c) {
    if (col_of[c] < 0) continue;
    for (SparseMat::InnerIterator it(sys.A, c); it; ++it) {
      abc_trip.emplace_back(static_cast<int>(it.row()), col_of[c], it.value());
    }
    for (SparseMat::InnerIterator it(sys.B, c); it; ++it) {
      bbc_trip.emplace_back(static_cast<int>(it.row()), col_of[c], it.value());
    }
  }
  sys.A_bc.resize(nu, nd);
  sys.A_bc.setFromTriplets(abc_trip.begin(), abc_trip.end());
  sys.B_bc.resize(np, nd);
  sys.B_bc.setFromTriplets(bbc_trip.begin(), bbc_trip.end());

  // Symmetric elimination: unit rows/columns in A, zero columns in B.
  std::vector<char> is_bc(nu, 0);
  for (int d : sys.dirichlet_dofs) is_bc[d] = 1;
  std::vector<Eigen::Triplet<double>> a_elim, b_elim;
  a_elim.reserve(a_trip.size());
  for (int c = 0; c < nu; ++c) {
    for (SparseMat::InnerIterator it(sys.A, c); it; ++it) {
      const int r = static_cast<int>(it.row());
      if (is_bc[r] || is_bc[c]) continue;
      a_elim.emplace_back(r, c, it.value());
    }
  }
  for (int d : sys.dirichlet_dofs) a_elim.emplace_back(d, d, 1.0);
  sys.A.setFromTriplets(a_elim.begin(), a_elim.end());
  for (int c = 0; c < nu; ++c) {
    if (is_bc[c]) continue;
    for (SparseMat::InnerIterator it(sys.B, c); it; ++it) {
      b_elim.emplace_back(static_cast<int>(it.row()), c, it.value());
    }
  }
  sys.B.setFromTriplets(b_elim.begin(), b_elim.end());

  sys.set_angle(space, lambda_deg);
  return sys;
}

Eigen::VectorXd ConvectionTensor::contract(const Eigen::VectorXd& u,
                                           const Eigen::VectorXd& w) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  for (const Entry& e : entries_) out[e.i] += e.v * u[e.j] * w[e.k];
  return out;
}

Eigen::VectorXd ConvectionTensor::adjoint_u(const Eigen::VectorXd& a,
                                            const Eigen::VectorXd& w) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  for (const Entry& e : entries_) out[e.j] += e.v * a[e.i] * w[e.k];
  return out;
}

Eigen::VectorXd ConvectionTensor::adjoint_w(const Eigen::VectorXd& a,
                                            const Eigen::VectorXd& u) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  for (const Entry& e : entries_) out[e.k] += e.v * a[e.i] * u[e.j];
  return out;
}

Eigen::MatrixXd ConvectionTensor::materialize(const Eigen::VectorXd& w) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, n_);
  for (const Entry& e : entries_) out(e.i, e.j) += e.v * w[e.k];
  return out;
}

ConvectionTensor assemble_convection(const TaylorHoodSpace& space) {
  // Velocity fields are componentwise: field 2n+c is basis n in component c.
  // (v_k . grad v_j) . v_i couples i and j in the same component and sums the
  // advective derivative over the component of k:
  //   int phi_k d_{c_k} phi_j phi_i   with c_i == c_j.
  std::vector<ConvectionTensor::Entry> entries;
  for (int t = 0; t < space.mesh.num_triangles(); ++t) {
    const TriangleGeometry geo = triangle_geometry(space.mesh, t);
    const auto vdofs = space.triangle_velocity_dofs(t);

    // accum[i][j][k][ck]: int phi_i phi_k d_{ck} phi_j over scalar basis
    double accum[6][6][6][2] = {};
    for (const QuadPoint& qp : kQuadDegree6) {
      const auto phi = p2_basis(qp.x, qp.y);
      const auto gref = p2_grad(qp.x, qp.y);
      std::array<Eigen::Vector2d, 6> grad;
      for (int n = 0; n < 6; ++n) {
        grad[n] = geo.jac_inv_t * Eigen::Vector2d(gref[n][0], gref[n][1]);
      }
      const double w = qp.w * geo.area2;
      for (int i = 0; i < 6; ++i) {
        const double wi = w * phi[i];
        for (int k = 0; k < 6; ++k) {
          const double wik = wi * phi[k];
          for (int j = 0; j < 6; ++j) {
            accum[i][j][k][0] += wik * grad[j].x();
            accum[i][j][k][1] += wik * grad[j].y();
          }
        }
      }
    }
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        for (int k = 0; k < 6; ++k) {
          for (int ck = 0; ck < 2; ++ck) {
            const double v = accum[i][j][k][ck];
            if (v == 0.0) continue;
            for (int c = 0; c < 2; ++c) {
              entries.push_back({vdofs[2 * i + c], vdofs[2 * j + c], vdofs[2 * k + ck], v});
            }
          }
        }
      }
    }
  }
  // Deterministic ordering and duplicate merging.
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.i, a.j, a.k) < std::tie(b.i, b.j, b.k);
  });
  std::vector<ConvectionTensor::Entry> merged;
  merged.reserve(entries.size());
  for (const auto& e : entries) {
    if (!merged.empty() && merged.back().i == e.i && merged.back().j == e.j &&
        merged.back().k == e.k) {
      merged.back().v += e.v;
    } else {
      merged.push_back(e);
    }
  }
  return ConvectionTensor(space.num_velocity_dofs(), std::move(merged));
}

Eigen::VectorXd mask_dirichlet(const StokesSystem& sys, const Eigen::VectorXd& u) {
  Eigen::VectorXd uhat = u;
  for (size_t d = 0; d < sys.dirichlet_dofs.size(); ++d) {
    uhat[sys.dirichlet_dofs[d]] = sys.bc_values[static_cast<int>(d)];
  }
  return uhat;
}

ResidualPair residual_stokes(const StokesSystem& sys, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& p) {
  if (u.size() != sys.A.rows() || p.size() != sys.B.rows()) {
    throw std::runtime_error("residual_stokes: dimension mismatch");
  }
  return {sys.A * u + sys.B.transpose() * p - sys.f, sys.B * u - sys.g};
}

ResidualPair residual_navier_stokes(const StokesSystem& sys, const ConvectionTensor& ct,
                                    const Eigen::VectorXd& u, const Eigen::VectorXd& p) {
  auto [ru, rp] = residual_stokes(sys, u, p);
  if (!ct.empty()) {
    const Eigen::VectorXd uhat = mask_dirichlet(sys, u);
    Eigen::VectorXd conv = ct.contract(u, uhat);
    sys.zero_dirichlet(conv);  // BC rows stay u_i - u_BC(x_i)
    ru += conv;
  }
  return {std::move(ru), std::move(rp)};
}

ResidualPair ns_jacobian_action(const StokesSystem& sys, const ConvectionTensor& ct,
                                const Eigen::VectorXd& u, const Eigen::VectorXd& du,
                                const Eigen::VectorXd& dp) {
  Eigen::VectorXd dru = sys.A * du + sys.B.transpose() * dp;
  Eigen::VectorXd drp = sys.B * du;
  if (!ct.empty()) {
    const Eigen::VectorXd uhat = mask_dirichlet(sys, u);
    Eigen::VectorXd duhat = du;
    sys.zero_dirichlet(duhat);  // boundary values do not vary with u
    Eigen::VectorXd conv = ct.contract(du, uhat) + ct.contract(u, duhat);
    sys.zero_dirichlet(conv);
    dru += conv;
  }
  return {std::move(dru), std::move(drp)};
}

ResidualPair ns_jacobian_adjoint(const StokesSystem& sys, const ConvectionTensor& ct,
                                 const Eigen::VectorXd& u, const Eigen::VectorXd& a_u,
                                 const Eigen::VectorXd& a_p) {
  Eigen::VectorXd gu = sys.A * a_u + sys.B.transpose() * a_p;  // A symmetric
  Eigen::VectorXd gp = sys.B * a_u;
  if (!ct.empty()) {
    const Eigen::VectorXd uhat = mask_dirichlet(sys, u);
    Eigen::VectorXd a_masked = a_u;
    sys.zero_dirichlet(a_masked);
    Eigen::VectorXd via_w = ct.adjoint_w(a_masked, u);
    sys.zero_dirichlet(via_w);
    gu += ct.adjoint_u(a_masked, uhat) + via_w;
  }
  return {std::move(gu), std::move(gp)};
}

SparseMat assemble_p2_mass(const TaylorHoodSpace& space) {
  const int n = space.num_scalar_nodes();
  std::vector<Eigen::Triplet<double>> trip;
  for (int t = 0; t < space.mesh.num_triangles(); ++t) {
    const TriangleGeometry geo = triangle_geometry(space.mesh, t);
    const auto sn = space.triangle_scalar_nodes(t);
    Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Zero();
    for (const QuadPoint& qp : kQuadDegree4) {
      const auto phi = p2_basis(qp.x, qp.y);
      const double w = qp.w * geo.area2;
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) m(i, j) += w * phi[i] * phi[j];
    }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) trip.emplace_back(sn[i], sn[j], m(i, j));
  }
  SparseMat mass(n, n);
  mass.setFromTriplets(trip.begin(), trip.end());
  return mass;
}

SparseMat assemble_p1_mass(const TaylorHoodSpace& space) {
  const int n = space.num_pressure_dofs();
  std::vector<Eigen::Triplet<double>> trip;
  for (int t = 0; t < space.mesh.num_triangles(); ++t) {
    const TriangleGeometry geo = triangle_geometry(space.mesh, t);
    const auto& tri = space.mesh.triangles[t];
    for (const QuadPoint& qp : kQuadDegree4) {
      const auto phi = p1_basis(qp.x, qp.y);
      const double w = qp.w * geo.area2;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) trip.emplace_back(tri[i], tri[j], w * phi[i] * phi[j]);
    }
  }
  SparseMat mass(n, n);
  mass.setFromTriplets(trip.begin(), trip.end());
  return mass;
}

void write_matrix_market(const SparseMat& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
  out.precision(17);
  for (int c = 0; c < m.outerSize(); ++c) {
    for (SparseMat::InnerIterator it(m, c); it; ++it) {
      out << (it.row() + 1) << " " << (it.col() + 1) << " " << it.value() << "\n";
    }
  }
}

}  // namespace fenn
