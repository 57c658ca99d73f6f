#include "fenn/reference.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/SparseLU>
#include <json.hpp>

namespace fenn {

namespace {

double residual_inf_norm(const ResidualPair& r) {
  return std::max(r.first.lpNorm<Eigen::Infinity>(), r.second.lpNorm<Eigen::Infinity>());
}

// Exact Navier-Stokes Jacobian at u, assembled sparse: [[A + dConv/du, B^T],
// [B, 0]]. Convection derivative rows are zeroed at Dirichlet DOFs and the
// mask derivative drops Dirichlet columns of the advecting leg.
SparseMat assemble_ns_jacobian(const StokesSystem& sys, const ConvectionTensor& ct,
                               const Eigen::VectorXd& u) {
  const int nu = sys.num_velocity_dofs();
  const int np = sys.num_pressure_dofs();
  std::vector<char> is_bc(nu, 0);
  for (int d : sys.dirichlet_dofs) is_bc[d] = 1;
  const Eigen::VectorXd uhat = mask_dirichlet(sys, u);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(sys.A.nonZeros() + 2 * sys.B.nonZeros() + 2 * ct.entries().size());
  for (int c = 0; c < sys.A.outerSize(); ++c) {
    for (SparseMat::InnerIterator it(sys.A, c); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()), c, it.value());
    }
  }
  for (int c = 0; c < sys.B.outerSize(); ++c) {
    for (SparseMat::InnerIterator it(sys.B, c); it; ++it) {
      trip.emplace_back(nu + static_cast<int>(it.row()), c, it.value());
      trip.emplace_back(c, nu + static_cast<int>(it.row()), it.value());
    }
  }
  for (const auto& e : ct.entries()) {
    if (is_bc[e.i]) continue;
    trip.emplace_back(e.i, e.j, e.v * uhat[e.k]);
    if (!is_bc[e.k]) trip.emplace_back(e.i, e.k, e.v * u[e.j]);
  }
  SparseMat jac(nu + np, nu + np);
  jac.setFromTriplets(trip.begin(), trip.end());
  return jac;
}

// Damped Newton from the given initial guess; updates (u, p) in place and
// returns the iteration count.
int newton_iterate(const StokesSystem& sys, const ConvectionTensor& ct, Eigen::VectorXd& u,
                   Eigen::VectorXd& p, double tol, int max_iterations) {
  const int nu = sys.num_velocity_dofs();
  const int np = sys.num_pressure_dofs();
  double rnorm = residual_inf_norm(residual_navier_stokes(sys, ct, u, p));
  const double initial = rnorm;
  int iterations = 0;
  while (rnorm > tol && iterations < max_iterations) {
    const auto [ru, rp] = residual_navier_stokes(sys, ct, u, p);
    Eigen::VectorXd rhs(nu + np);
    rhs.head(nu) = -ru;
    rhs.tail(np) = -rp;

    Eigen::SparseLU<SparseMat> lu(assemble_ns_jacobian(sys, ct, u));
    if (lu.info() != Eigen::Success) {
      throw std::runtime_error("solve_ns_newton: Jacobian factorization failed");
    }
    const Eigen::VectorXd delta = lu.solve(rhs);

    double step = 1.0;
    Eigen::VectorXd u_new, p_new;
    double rnorm_new;
    for (int halving = 0;; ++halving) {
      u_new = u + step * delta.head(nu);
      p_new = p + step * delta.tail(np);
      rnorm_new = residual_inf_norm(residual_navier_stokes(sys, ct, u_new, p_new));
      if (rnorm_new < rnorm || halving >= 30) break;
      step *= 0.5;
    }
    u = std::move(u_new);
    p = std::move(p_new);
    rnorm = rnorm_new;
    ++iterations;
    if (rnorm > 10.0 * initial) {
      throw std::runtime_error(
          "solve_ns_newton: residual diverged; consider viscosity continuation "
          "(solve_ns_continuation)");
    }
  }
  if (rnorm > tol) {
    throw std::runtime_error("solve_ns_newton: no convergence within iteration budget");
  }
  return iterations;
}

}  // namespace

ReferenceSolution solve_stokes_direct(const StokesSystem& sys, const Preconditioner& pre) {
  const Eigen::VectorXd a_inv_f = pre.solve_Lt(pre.solve_L(sys.f));
  const Eigen::VectorXd p = pre.solve_Mt(pre.solve_M(sys.B * a_inv_f - sys.g));
  const Eigen::VectorXd u = pre.solve_Lt(pre.solve_L(sys.f - sys.B.transpose() * p));

  ReferenceSolution ref;
  ref.lambda_deg = sys.lambda_deg;
  ref.eta = sys.eta;
  ref.u = u;
  ref.p = p;
  ref.residual_norm = residual_inf_norm(residual_stokes(sys, u, p));
  return ref;
}

ReferenceSolution solve_ns_newton(const StokesSystem& sys, const ConvectionTensor& ct,
                                  const Preconditioner& pre, double tol,
                                  int max_iterations) {
  ReferenceSolution ref = solve_stokes_direct(sys, pre);
  ref.newton_iterations = newton_iterate(sys, ct, ref.u, ref.p, tol, max_iterations);
  ref.residual_norm = residual_inf_norm(residual_navier_stokes(sys, ct, ref.u, ref.p));
  return ref;
}

ReferenceSolution solve_ns_continuation(const TaylorHoodSpace& space,
                                        const ConvectionTensor& ct, double eta_target,
                                        double lambda_deg, double tol, int max_stages) {
  if (eta_target <= 0) throw std::runtime_error("solve_ns_continuation: eta must be positive");

  std::vector<double> etas;
  if (eta_target >= 1.0) {
    etas.push_back(eta_target);
  } else {
    // Geometric path from 1 down to the target.
    const int stages = std::min(
        max_stages, std::max(1, static_cast<int>(std::ceil(std::log10(1.0 / eta_target) * 2))));
    for (int s = 1; s <= stages; ++s) {
      etas.push_back(std::pow(eta_target, static_cast<double>(s) / stages));
    }
  }

  ReferenceSolution ref;
  bool warm = false;
  for (double eta : etas) {
    const StokesSystem sys = assemble_stokes(space, eta, lambda_deg);
    if (!warm) {
      const Preconditioner pre = build_preconditioner(sys);
      ref = solve_ns_newton(sys, ct, pre, tol);
      warm = true;
    } else {
      ref.newton_iterations += newton_iterate(sys, ct, ref.u, ref.p, tol, 50);
      ref.eta = eta;
      ref.residual_norm = residual_inf_norm(residual_navier_stokes(sys, ct, ref.u, ref.p));
    }
  }
  ref.lambda_deg = lambda_deg;
  return ref;
}

void save_reference(const ReferenceSolution& ref, const std::string& path) {
  nlohmann::json header;
  header["lambda_deg"] = ref.lambda_deg;
  header["eta"] = ref.eta;
  header["residual_norm"] = ref.residual_norm;
  header["newton_iterations"] = ref.newton_iterations;
  header["n_u"] = ref.u.size();
  header["n_p"] = ref.p.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open reference file for writing: " + path);
  out << header.dump() << "\n";
  const std::uint64_t count = static_cast<std::uint64_t>(ref.u.size() + ref.p.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  out.write(reinterpret_cast<const char*>(ref.u.data()),
            static_cast<std::streamsize>(ref.u.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(ref.p.data()),
            static_cast<std::streamsize>(ref.p.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failure on reference file: " + path);
}

ReferenceSolution load_reference(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open reference file: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw std::runtime_error("missing reference header");
  nlohmann::json header = nlohmann::json::parse(header_line);

  ReferenceSolution ref;
  ref.lambda_deg = header.at("lambda_deg").get<double>();
  ref.eta = header.at("eta").get<double>();
  ref.residual_norm = header.at("residual_norm").get<double>();
  ref.newton_iterations = header.at("newton_iterations").get<int>();
  const Eigen::Index nu = header.at("n_u").get<Eigen::Index>();
  const Eigen::Index np = header.at("n_p").get<Eigen::Index>();

  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || count != static_cast<std::uint64_t>(nu + np)) {
    throw std::runtime_error("reference blob size mismatch");
  }
  ref.u.resize(nu);
  ref.p.resize(np);
  in.read(reinterpret_cast<char*>(ref.u.data()), static_cast<std::streamsize>(nu * sizeof(double)));
  in.read(reinterpret_cast<char*>(ref.p.data()), static_cast<std::streamsize>(np * sizeof(double)));
  if (!in) throw std::runtime_error("truncated reference blob");
  return ref;
}

}  // namespace fenn
