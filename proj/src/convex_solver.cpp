#include "anchorplace/convex_solver.hpp"

#include <cmath>
#include <limits>

#include "anchorplace/detail/scaled_subproblem.hpp"

namespace anchorplace {

namespace {

double squared(double x) { return x * x; }

Mat3 sym_outer(const Vec3& a, const Vec3& b) { return a * b.transpose() + b * a.transpose(); }

void check_shapes(const ProblemData& p, const SubproblemVars& vars) {
  const std::size_t M = p.anchors(), K = p.locations_count();
  if (vars.xy.size() != M || vars.b.rows() != M || vars.b.cols() != K || vars.s.rows() != M || vars.s.cols() != K)
    throw ValidationError("subproblem variables do not match the problem dimensions");
}

double trace_inverse_or_inf(const Mat3& B) {
  try {
    return trace_inverse(B);
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

ProblemData ProblemData::from(const Scenario& s, const FimMatrix& f_prior) {
  const DerivedConstants d = derived_constants(s);
  ProblemData p;
  p.locations = s.prior.locations;
  p.probs = s.prior.probs;
  p.heights = s.heights();
  p.w = d.w;
  p.v = d.v;
  p.f_prior = f_prior.value;
  double extent = 0.0;
  for (std::size_t i = 0; i < p.locations.size(); ++i)
    for (std::size_t j = i + 1; j < p.locations.size(); ++j)
      extent = std::max(extent, (p.locations[i] - p.locations[j]).norm());
  p.scale = std::max(extent, 1.0);
  return p;
}

SurrogatePoint SurrogatePoint::tight(const ProblemData& p, const std::vector<Vec2>& xy) {
  const std::size_t M = p.anchors(), K = p.locations_count();
  if (xy.size() != M) throw ValidationError("surrogate point: expected one position per anchor");
  SurrogatePoint pt{Grid<Vec3>(M, K), Grid<double>(M, K), Grid<double>(M, K)};
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t k = 0; k < K; ++k) {
      const Vec3 a = p.offset(m, k, xy[m]);
      const double rho = a.squaredNorm();
      pt.a(m, k) = a;
      pt.b(m, k) = rho * rho * rho;
      pt.s(m, k) = squared(rho * rho);
    }
  }
  return pt;
}

std::vector<Vec2> SurrogatePoint::xy(const ProblemData& p) const {
  std::vector<Vec2> out(a.rows());
  for (std::size_t m = 0; m < a.rows(); ++m)
    out[m] = Vec2(a(m, 0).x() + p.locations[0].x(), a(m, 0).y() + p.locations[0].y());
  return out;
}

bool SurrogatePoint::is_feasible(double rel_tol) const {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double rho = a.data()[i].squaredNorm();
    const double bi = b.data()[i], si = s.data()[i];
    if (!(bi > 0.0 && si > 0.0)) return false;
    if (bi < (1.0 - rel_tol) * rho * rho * rho) return false;
    if (si < (1.0 - rel_tol) * squared(rho * rho)) return false;
  }
  return true;
}

SubproblemVars SubproblemVars::from(const ProblemData& p, const SurrogatePoint& point) {
  return {point.xy(p), point.b, point.s};
}

Mat3 surrogate_matrix(const SubproblemVars& vars, const SubproblemSpec& spec) {
  const ProblemData& p = spec.problem;
  check_shapes(p, vars);
  const auto& lin = spec.linearization;
  Mat3 B = p.f_prior;
  for (std::size_t k = 0; k < p.locations_count(); ++k) {
    Mat3 per = Mat3::Zero();
    for (std::size_t m = 0; m < p.anchors(); ++m) {
      const Vec3 a = p.offset(m, k, vars.xy[m]);
      const Vec3& a0 = lin.a(m, k);
      const double b0 = lin.b(m, k), s0 = lin.s(m, k);
      const Mat3 cross = sym_outer(a, a0);
      const Mat3 base = a0 * a0.transpose();
      per += p.v[m] * (cross / b0 - vars.b(m, k) * base / (b0 * b0));
      per += p.w * (cross / s0 - vars.s(m, k) * base / (s0 * s0));
    }
    B += p.probs[k] * per;
  }
  return B;
}

Mat3 relaxed_matrix(const ProblemData& p, const SubproblemVars& vars) {
  check_shapes(p, vars);
  Mat3 B = p.f_prior;
  for (std::size_t k = 0; k < p.locations_count(); ++k) {
    Mat3 per = Mat3::Zero();
    for (std::size_t m = 0; m < p.anchors(); ++m) {
      const Vec3 a = p.offset(m, k, vars.xy[m]);
      per += (p.w / vars.s(m, k) + p.v[m] / vars.b(m, k)) * (a * a.transpose());
    }
    B += p.probs[k] * per;
  }
  return B;
}

Mat3 true_matrix(const ProblemData& p, const std::vector<Vec2>& xy) {
  if (xy.size() != p.anchors()) throw ValidationError("placement: expected one position per anchor");
  Mat3 B = p.f_prior;
  for (std::size_t k = 0; k < p.locations_count(); ++k) {
    Mat3 per = Mat3::Zero();
    for (std::size_t m = 0; m < p.anchors(); ++m) {
      const Vec3 a = p.offset(m, k, xy[m]);
      const double rho = a.squaredNorm();
      const double rho3 = rho * rho * rho;
      per += (p.w / (rho3 * rho) + p.v[m] / rho3) * (a * a.transpose());
    }
    B += p.probs[k] * per;
  }
  return B;
}

double surrogate_objective(const SubproblemVars& vars, const SubproblemSpec& spec) {
  return trace_inverse_or_inf(surrogate_matrix(vars, spec));
}

double relaxed_objective(const ProblemData& p, const SubproblemVars& vars) {
  return trace_inverse_or_inf(relaxed_matrix(p, vars));
}

double true_objective(const ProblemData& p, const std::vector<Vec2>& xy) {
  return trace_inverse_or_inf(true_matrix(p, xy));
}

VarsGradient objective_gradient(const SubproblemVars& vars, const SubproblemSpec& spec) {
  const ProblemData& p = spec.problem;
  const auto& lin = spec.linearization;
  const Mat3 P = inverse3(surrogate_matrix(vars, spec));
  const Mat3 P2 = P * P;
  const std::size_t M = p.anchors(), K = p.locations_count();
  VarsGradient g{std::vector<Vec2>(M, Vec2::Zero()), Grid<double>(M, K), Grid<double>(M, K)};
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t k = 0; k < K; ++k) {
      const Vec3& a0 = lin.a(m, k);
      const double b0 = lin.b(m, k), s0 = lin.s(m, k);
      const double c = p.v[m] / b0 + p.w / s0;
      const Vec3 P2a0 = P2 * a0;
      g.xy[m] -= 2.0 * p.probs[k] * c * P2a0.head<2>();
      const double q = a0.dot(P2a0);
      g.b(m, k) = p.probs[k] * p.v[m] * q / (b0 * b0);
      g.s(m, k) = p.probs[k] * p.w * q / (s0 * s0);
    }
  }
  return g;
}

VarsGradient relaxed_gradient(const ProblemData& p, const SubproblemVars& vars) {
  const Mat3 P = inverse3(relaxed_matrix(p, vars));
  const Mat3 P2 = P * P;
  const std::size_t M = p.anchors(), K = p.locations_count();
  VarsGradient g{std::vector<Vec2>(M, Vec2::Zero()), Grid<double>(M, K), Grid<double>(M, K)};
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t k = 0; k < K; ++k) {
      const Vec3 a = p.offset(m, k, vars.xy[m]);
      const double b = vars.b(m, k), s = vars.s(m, k);
      const Vec3 P2a = P2 * a;
      g.xy[m] -= 2.0 * p.probs[k] * (p.v[m] / b + p.w / s) * P2a.head<2>();
      const double q = a.dot(P2a);
      g.b(m, k) = p.probs[k] * p.v[m] * q / (b * b);
      g.s(m, k) = p.probs[k] * p.w * q / (s * s);
    }
  }
  return g;
}

std::vector<Vec2> true_gradient(const ProblemData& p, const std::vector<Vec2>& xy) {
  const Mat3 P = inverse3(true_matrix(p, xy));
  const Mat3 P2 = P * P;
  std::vector<Vec2> g(p.anchors(), Vec2::Zero());
  for (std::size_t m = 0; m < p.anchors(); ++m) {
    for (std::size_t k = 0; k < p.locations_count(); ++k) {
      const Vec3 a = p.offset(m, k, xy[m]);
      const double rho = a.squaredNorm();
      const double rho3 = rho * rho * rho;
      const double xi = p.w / (rho3 * rho) + p.v[m] / rho3;
      const double dxi = -8.0 * p.w / (rho3 * rho * rho) - 6.0 * p.v[m] / (rho3 * rho);
      const Vec3 P2a = P2 * a;
      g[m] -= p.probs[k] * (2.0 * xi * P2a.head<2>() + dxi * a.dot(P2a) * a.head<2>());
    }
  }
  return g;
}

namespace detail {

ScaledSubproblem::ScaledSubproblem(const SubproblemSpec& spec, bool freeze_auxiliaries)
    : M_(spec.problem.anchors()), K_(spec.problem.locations_count()), frozen_(freeze_auxiliaries) {
  const ProblemData& p = spec.problem;
  const auto& lin = spec.linearization;
  if (lin.a.rows() != M_ || lin.a.cols() != K_) throw ValidationError("linearization does not match the problem");
  n_ = frozen_ ? 2 * M_ : 2 * M_ + 2 * M_ * K_;
  L_ = p.scale;
  const double L2 = L_ * L_, L4 = L2 * L2, L6 = L4 * L2, L8 = L4 * L4;
  w_ = p.w / L6;
  for (double vm : p.v) v_.push_back(vm / L4);
  probs_ = p.probs;
  for (const auto& u : p.locations) loc_xy_.emplace_back(u.x() / L_, u.y() / L_);
  dz_ = Grid<double>(M_, K_);
  a0_ = Grid<Vec3>(M_, K_);
  b0_ = Grid<double>(M_, K_);
  s0_ = Grid<double>(M_, K_);
  for (std::size_t m = 0; m < M_; ++m) {
    for (std::size_t k = 0; k < K_; ++k) {
      dz_(m, k) = (p.heights[m] - p.locations[k].z()) / L_;
      a0_(m, k) = lin.a(m, k) / L_;
      b0_(m, k) = lin.b(m, k) / L6;
      s0_(m, k) = lin.s(m, k) / L8;
      if (!(b0_(m, k) > 0.0 && s0_(m, k) > 0.0)) throw NumericalError("linearization auxiliaries must be positive");
    }
  }
  f_prior_ = p.f_prior;

  sens_.assign(n_, Mat3::Zero());
  for (std::size_t m = 0; m < M_; ++m) {
    for (std::size_t k = 0; k < K_; ++k) {
      const Vec3& a0 = a0_(m, k);
      const double c = v_[m] / b0_(m, k) + w_ / s0_(m, k);
      sens_[2 * m] += probs_[k] * c * sym_outer(Vec3::UnitX(), a0);
      sens_[2 * m + 1] += probs_[k] * c * sym_outer(Vec3::UnitY(), a0);
      if (!frozen_) {
        const Mat3 base = a0 * a0.transpose();
        sens_[idx_b(m, k)] = -probs_[k] * v_[m] / squared(b0_(m, k)) * base;
        sens_[idx_s(m, k)] = -probs_[k] * w_ / squared(s0_(m, k)) * base;
      }
    }
  }
}

Vec3 ScaledSubproblem::offset(const Eigen::VectorXd& x, std::size_t m, std::size_t k) const {
  return {x[2 * m] - loc_xy_[k].x(), x[2 * m + 1] - loc_xy_[k].y(), dz_(m, k)};
}

double ScaledSubproblem::aux_b(const Eigen::VectorXd& x, std::size_t m, std::size_t k) const {
  return frozen_ ? b0_(m, k) : x[idx_b(m, k)];
}

double ScaledSubproblem::aux_s(const Eigen::VectorXd& x, std::size_t m, std::size_t k) const {
  return frozen_ ? s0_(m, k) : x[idx_s(m, k)];
}

Eigen::VectorXd ScaledSubproblem::start(double margin) const {
  Eigen::VectorXd x(n_);
  for (std::size_t m = 0; m < M_; ++m) {
    x[2 * m] = a0_(m, 0).x() + loc_xy_[0].x();
    x[2 * m + 1] = a0_(m, 0).y() + loc_xy_[0].y();
  }
  constexpr double kSlack = 1e-6;
  for (std::size_t m = 0; m < M_; ++m) {
    for (std::size_t k = 0; k < K_; ++k) {
      const double rho = a0_(m, k).squaredNorm();
      const double b_tight = rho * rho * rho, s_tight = squared(rho * rho);
      if (b0_(m, k) < (1.0 - kSlack) * b_tight || s0_(m, k) < (1.0 - kSlack) * s_tight)
        throw NumericalError("infeasible start: linearization violates the power constraints");
      if (frozen_) {
        if (!(std::cbrt(b0_(m, k)) > rho && std::sqrt(std::sqrt(s0_(m, k))) > rho))
          throw NumericalError("infeasible start: frozen auxiliaries leave no interior");
        continue;
      }
      x[idx_b(m, k)] = std::max(b0_(m, k), b_tight) * (1.0 + margin);
      x[idx_s(m, k)] = std::max(s0_(m, k), s_tight) * (1.0 + margin);
    }
  }
  return x;
}

Mat3 ScaledSubproblem::matrix(const Eigen::VectorXd& x) const {
  Mat3 B = f_prior_;
  for (std::size_t k = 0; k < K_; ++k) {
    Mat3 per = Mat3::Zero();
    for (std::size_t m = 0; m < M_; ++m) {
      const Vec3 a = offset(x, m, k);
      const Vec3& a0 = a0_(m, k);
      const double b0 = b0_(m, k), s0 = s0_(m, k);
      const Mat3 cross = sym_outer(a, a0);
      const Mat3 base = a0 * a0.transpose();
      per += v_[m] * (cross / b0 - aux_b(x, m, k) * base / (b0 * b0));
      per += w_ * (cross / s0 - aux_s(x, m, k) * base / (s0 * s0));
    }
    B += probs_[k] * per;
  }
  return B;
}

bool ScaledSubproblem::constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
  const std::size_t MK = M_ * K_;
  g.resize(2 * MK);
  bool ok = true;
  for (std::size_t m = 0; m < M_; ++m) {
    for (std::size_t k = 0; k < K_; ++k) {
      const double rho = offset(x, m, k).squaredNorm();
      const double b = aux_b(x, m, k), s = aux_s(x, m, k);
      const std::size_t j = m * K_ + k;
      g[j] = b > 0.0 ? std::cbrt(b) - rho : -1.0;
      g[MK + j] = s > 0.0 ? std::sqrt(std::sqrt(s)) - rho : -1.0;
      ok = ok && g[j] > 0.0 && g[MK + j] > 0.0;
    }
  }
  return ok;
}

double ScaledSubproblem::add_constraint_barrier(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                                Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
  const std::size_t MK = M_ * K_;
  double value = 0.0;
  for (std::size_t m = 0; m < M_; ++m) {
    for (std::size_t k = 0; k < K_; ++k) {
      const Vec3 a = offset(x, m, k);
      const std::size_t ix = 2 * m, iy = 2 * m + 1;
      for (int kind = 0; kind < 2; ++kind) {
        const std::size_t j = kind * MK + m * K_ + k;
        const double gj = g[j];
        value -= std::log(gj);
        // d g / d(x, y, aux) and the nonzero second derivatives.
        const double gx = -2.0 * a.x(), gy = -2.0 * a.y();
        double gaux = 0.0, haux = 0.0;
        std::size_t iaux = 0;
        if (!frozen_) {
          if (kind == 0) {
            const double b = x[idx_b(m, k)];
            gaux = std::cbrt(b) / (3.0 * b);
            haux = -2.0 * gaux / (3.0 * b);
            iaux = idx_b(m, k);
          } else {
            const double s = x[idx_s(m, k)];
            gaux = std::sqrt(std::sqrt(s)) / (4.0 * s);
            haux = -3.0 * gaux / (4.0 * s);
            iaux = idx_s(m, k);
          }
        }
        const double inv = 1.0 / gj, inv2 = inv * inv;
        grad[ix] -= gx * inv;
        grad[iy] -= gy * inv;
        hess(ix, ix) += gx * gx * inv2 + 2.0 * inv;
        hess(iy, iy) += gy * gy * inv2 + 2.0 * inv;
        hess(ix, iy) += gx * gy * inv2;
        hess(iy, ix) += gx * gy * inv2;
        if (!frozen_) {
          grad[iaux] -= gaux * inv;
          hess(iaux, iaux) += gaux * gaux * inv2 - haux * inv;
          hess(ix, iaux) += gx * gaux * inv2;
          hess(iaux, ix) += gx * gaux * inv2;
          hess(iy, iaux) += gy * gaux * inv2;
          hess(iaux, iy) += gy * gaux * inv2;
        }
      }
    }
  }
  return value;
}

SubproblemVars ScaledSubproblem::unscale(const Eigen::VectorXd& x) const {
  const double L2 = L_ * L_, L4 = L2 * L2, L6 = L4 * L2, L8 = L4 * L4;
  SubproblemVars v{std::vector<Vec2>(M_), Grid<double>(M_, K_), Grid<double>(M_, K_)};
  for (std::size_t m = 0; m < M_; ++m) {
    v.xy[m] = Vec2(x[2 * m] * L_, x[2 * m + 1] * L_);
    for (std::size_t k = 0; k < K_; ++k) {
      v.b(m, k) = aux_b(x, m, k) * L6;
      v.s(m, k) = aux_s(x, m, k) * L8;
    }
  }
  return v;
}

void ScaledSubproblem::duals(const Eigen::VectorXd& g, double t, double f_unit, Grid<double>& dual_b,
                             Grid<double>& dual_s) const {
  const std::size_t MK = M_ * K_;
  dual_b = Grid<double>(M_, K_);
  dual_s = Grid<double>(M_, K_);
  const double unit = f_unit / (t * L_ * L_);
  for (std::size_t m = 0; m < M_; ++m) {
    for (std::size_t k = 0; k < K_; ++k) {
      dual_b(m, k) = unit / g[m * K_ + k];
      dual_s(m, k) = unit / g[MK + m * K_ + k];
    }
  }
}

}  // namespace detail

namespace {

/// Barrier objective t f / f0 - log det B - sum log g with gradient and Hessian.
struct BarrierEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

bool factor_pd(const Mat3& B, Eigen::LLT<Mat3>& llt) {
  llt.compute(B);
  return llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
}

/// Value only; +inf outside the domain.
double barrier_value(const detail::ScaledSubproblem& sp, const Eigen::VectorXd& x, double t, double f0) {
  Eigen::VectorXd g;
  if (!sp.constraints(x, g)) return std::numeric_limits<double>::infinity();
  Eigen::LLT<Mat3> llt;
  const Mat3 B = sp.matrix(x);
  if (!factor_pd(B, llt)) return std::numeric_limits<double>::infinity();
  const Mat3 P = llt.solve(Mat3::Identity());
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return t * P.trace() / f0 - logdet - g.array().log().sum();
}

BarrierEval barrier_eval(const detail::ScaledSubproblem& sp, const Eigen::VectorXd& x, double t, double f0) {
  const std::size_t n = sp.size();
  BarrierEval e;
  e.grad = Eigen::VectorXd::Zero(n);
  e.hess = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd g;
  sp.constraints(x, g);
  const Mat3 B = sp.matrix(x);
  Eigen::LLT<Mat3> llt(B);
  const Mat3 P = llt.solve(Mat3::Identity());
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  e.value = t * P.trace() / f0 - logdet;

  const auto& A = sp.sensitivities();
  std::vector<Mat3> S(n), SP(n);
  for (std::size_t i = 0; i < n; ++i) {
    S[i] = P * A[i];
    SP[i] = S[i] * P;
  }
  const double tf = t / f0;
  for (std::size_t i = 0; i < n; ++i) {
    e.grad[i] = -tf * SP[i].trace() - S[i].trace();
    for (std::size_t j = i; j < n; ++j) {
      const double h = 2.0 * tf * detail::trace_product(S[i], SP[j]) + detail::trace_product(S[i], S[j]);
      e.hess(i, j) = h;
      e.hess(j, i) = h;
    }
  }
  e.value += sp.add_constraint_barrier(x, g, e.grad, e.hess);
  return e;
}

Eigen::VectorXd newton_direction(const Eigen::MatrixXd& H, const Eigen::VectorXd& grad) {
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() == Eigen::Success) return llt.solve(-grad);
  // Fall back to a diagonally shifted system if rounding spoiled definiteness.
  const double shift = 1e-12 * std::max(H.diagonal().cwiseAbs().maxCoeff(), 1.0);
  Eigen::MatrixXd Hs = H;
  for (int attempt = 0; attempt < 20; ++attempt) {
    Hs.diagonal().array() += shift * std::pow(10.0, attempt);
    llt.compute(Hs);
    if (llt.info() == Eigen::Success) return llt.solve(-grad);
  }
  throw NumericalError("Newton system is not positive definite");
}

}  // namespace

SubproblemSolution solve_subproblem(const SubproblemSpec& spec, const SolverOptions& opt) {
  if (!(opt.tol > 0.0 && opt.t0 > 0.0 && opt.mu > 1.0)) throw ValidationError("solver options out of range");
  const detail::ScaledSubproblem sp(spec, opt.freeze_auxiliaries);
  Eigen::VectorXd x = sp.start(opt.start_margin);

  const double f0 = trace_inverse_or_inf(sp.matrix(x));
  if (!std::isfinite(f0)) throw NumericalError("infeasible start: surrogate matrix is not positive definite");
  const double nu = static_cast<double>(sp.num_constraints() + 3);

  SubproblemSolution sol;
  double t = opt.t0;
  bool budget_exhausted = false;
  auto center = [&](double newton_tol) {
    for (int it = 0; it < opt.max_newton_per_stage; ++it) {
      if (sol.diagnostics.newton_iters >= opt.max_newton_total) {
        budget_exhausted = true;
        return;
      }
      const BarrierEval e = barrier_eval(sp, x, t, f0);
      const Eigen::VectorXd dx = newton_direction(e.hess, e.grad);
      const double lambda2 = -e.grad.dot(dx);
      if (lambda2 / 2.0 <= newton_tol) return;
      double step = 1.0;
      double trial = barrier_value(sp, x + dx, t, f0);
      while (!(trial <= e.value - opt.ls_alpha * step * lambda2) && step > 1e-14) {
        step *= opt.ls_beta;
        trial = barrier_value(sp, x + step * dx, t, f0);
      }
      if (!(trial <= e.value - opt.ls_alpha * step * lambda2)) return;  // no representable progress left
      x += step * dx;
      ++sol.diagnostics.newton_iters;
    }
  };
  while (true) {
    center(opt.newton_tol);
    ++sol.diagnostics.barrier_stages;
    sol.diagnostics.final_gap = nu / t;
    if (budget_exhausted) break;
    if (nu / t < opt.tol) {
      sol.converged = true;
      break;
    }
    t *= opt.mu;
  }

  Eigen::VectorXd g;
  sp.constraints(x, g);
  sp.duals(g, t, f0, sol.dual_b, sol.dual_s);
  sol.vars = sp.unscale(x);
  sol.objective = surrogate_objective(sol.vars, spec);
  return sol;
}

}  // namespace anchorplace
