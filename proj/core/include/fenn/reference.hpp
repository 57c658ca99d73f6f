#pragma once

#include <string>

#include <Eigen/Dense>

#include "fenn/assembly.hpp"
#include "fenn/precond.hpp"

namespace fenn {

struct ReferenceSolution {
  double lambda_deg = 0;
  double eta = 1;
  Eigen::VectorXd u;
  Eigen::VectorXd p;
  double residual_norm = 0;   // infinity norm at the returned coefficients
  int newton_iterations = 0;  // 0 for Stokes
};

/// Direct saddle-point solve by Schur reduction through the preconditioner
/// factors: M M^T p = B A^{-1} f - g, then A u = f - B^T p.
ReferenceSolution solve_stokes_direct(const StokesSystem& sys, const Preconditioner& pre);

/// Newton iteration with the exact (assembled) Jacobian, damped by step
/// halving on residual increase, started from the Stokes solution.
/// Throws when the residual grows tenfold over its initial value.
ReferenceSolution solve_ns_newton(const StokesSystem& sys, const ConvectionTensor& ct,
                                  const Preconditioner& pre, double tol = 1e-11,
                                  int max_iterations = 50);

/// Newton with viscosity continuation for advection-dominated targets:
/// solves a short geometric sequence of eta values ending at eta_target,
/// each stage warm-started from the previous solution.
ReferenceSolution solve_ns_continuation(const TaylorHoodSpace& space,
                                        const ConvectionTensor& ct, double eta_target,
                                        double lambda_deg, double tol = 1e-11,
                                        int max_stages = 3);

void save_reference(const ReferenceSolution& ref, const std::string& path);
ReferenceSolution load_reference(const std::string& path);

}  // namespace fenn
