#pragma once

#include <vector>

#include <Eigen/Dense>

#include "anchorplace/convex_solver.hpp"

namespace anchorplace::detail {

/// Nondimensional form of one subproblem. Lengths are divided by L, b by L^6,
/// s by L^8 and w, v by L^6, L^4 so that the surrogate matrix keeps its value.
///
/// Variable layout: [x_0, y_0, ..., x_{M-1}, y_{M-1}, b(0,0), ..., b(M-1,K-1), s(...)].
/// With frozen auxiliaries only the 2M horizontal coordinates are free.
class ScaledSubproblem {
 public:
  ScaledSubproblem(const SubproblemSpec& spec, bool freeze_auxiliaries);

  std::size_t size() const { return n_; }
  std::size_t num_constraints() const { return 2 * M_ * K_; }
  double length_scale() const { return L_; }

  /// Strictly feasible first iterate: the linearization with auxiliaries lifted by
  /// (1 + margin). Throws NumericalError if the linearization is infeasible.
  Eigen::VectorXd start(double margin) const;

  Mat3 matrix(const Eigen::VectorXd& x) const;
  const std::vector<Mat3>& sensitivities() const { return sens_; }

  /// Fills g_j = b^(1/3) - |a|^2 and s^(1/4) - |a|^2 (b block first). False if any g_j <= 0.
  bool constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g) const;

  /// Adds gradient and Hessian of -sum log g_j; returns the barrier value.
  double add_constraint_barrier(const Eigen::VectorXd& x, const Eigen::VectorXd& g, Eigen::VectorXd& grad,
                                Eigen::MatrixXd& hess) const;

  SubproblemVars unscale(const Eigen::VectorXd& x) const;

  /// Multipliers of the power constraints in SI units for an objective measured in
  /// units of f_unit, from the central-path relation mu_j = f_unit / (t g_j).
  void duals(const Eigen::VectorXd& g, double t, double f_unit, Grid<double>& dual_b, Grid<double>& dual_s) const;

 private:
  Vec3 offset(const Eigen::VectorXd& x, std::size_t m, std::size_t k) const;
  double aux_b(const Eigen::VectorXd& x, std::size_t m, std::size_t k) const;
  double aux_s(const Eigen::VectorXd& x, std::size_t m, std::size_t k) const;
  std::size_t idx_b(std::size_t m, std::size_t k) const { return 2 * M_ + m * K_ + k; }
  std::size_t idx_s(std::size_t m, std::size_t k) const { return 2 * M_ + M_ * K_ + m * K_ + k; }

  std::size_t M_, K_, n_;
  bool frozen_;
  double L_;
  double w_;
  std::vector<double> v_, probs_;
  std::vector<Vec2> loc_xy_;
  Grid<double> dz_;
  Grid<Vec3> a0_;
  Grid<double> b0_, s0_;
  Mat3 f_prior_;
  std::vector<Mat3> sens_;
};

/// tr(X Y) for 3x3 matrices.
inline double trace_product(const Mat3& X, const Mat3& Y) { return X.cwiseProduct(Y.transpose()).sum(); }

}  // namespace anchorplace::detail
