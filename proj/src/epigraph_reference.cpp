#include <cmath>
#include <limits>

#include "anchorplace/detail/scaled_subproblem.hpp"
#include "anchorplace/epigraph.hpp"

namespace anchorplace {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;

constexpr int kTriu[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};

Mat3 unpack_T(const Eigen::VectorXd& z, std::size_t off) {
  Mat3 T;
  for (int e = 0; e < 6; ++e) {
    T(kTriu[e][0], kTriu[e][1]) = z[off + e];
    T(kTriu[e][1], kTriu[e][0]) = z[off + e];
  }
  return T;
}

Mat6 block(const Mat3& B, const Mat3& T) {
  Mat6 G;
  G << B, Mat3::Identity(), Mat3::Identity(), T;
  return G;
}

struct Lmi {
  Eigen::LLT<Mat6> llt;
  bool ok = false;
};

Lmi factor(const Mat6& G) {
  Lmi l;
  l.llt.compute(G);
  l.ok = l.llt.info() == Eigen::Success && l.llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
  return l;
}

double logdet(const Lmi& l) { return 2.0 * l.llt.matrixL().toDenseMatrix().diagonal().array().log().sum(); }

class EpigraphBarrier {
 public:
  EpigraphBarrier(const detail::ScaledSubproblem& sp) : sp_(sp), nx_(sp.size()) {
    const auto& A = sp.sensitivities();
    for (std::size_t i = 0; i < nx_; ++i) {
      Mat6 Gi = Mat6::Zero();
      Gi.topLeftCorner<3, 3>() = A[i];
      sens_.push_back(Gi);
    }
    for (int e = 0; e < 6; ++e) {
      Mat6 Gi = Mat6::Zero();
      Gi(3 + kTriu[e][0], 3 + kTriu[e][1]) = 1.0;
      Gi(3 + kTriu[e][1], 3 + kTriu[e][0]) = 1.0;
      sens_.push_back(Gi);
    }
  }

  std::size_t size() const { return nx_ + 6; }
  double nu() const { return static_cast<double>(sp_.num_constraints() + 6); }

  double value(const Eigen::VectorXd& z, double t, double f0) const {
    Eigen::VectorXd g;
    if (!sp_.constraints(z.head(nx_), g)) return std::numeric_limits<double>::infinity();
    const Mat3 T = unpack_T(z, nx_);
    const Lmi l = factor(block(sp_.matrix(z.head(nx_)), T));
    if (!l.ok) return std::numeric_limits<double>::infinity();
    return t * T.trace() / f0 - logdet(l) - g.array().log().sum();
  }

  double eval(const Eigen::VectorXd& z, double t, double f0, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
    const std::size_t n = size();
    grad = Eigen::VectorXd::Zero(n);
    hess = Eigen::MatrixXd::Zero(n, n);
    const Eigen::VectorXd x = z.head(nx_);
    const Mat3 T = unpack_T(z, nx_);
    const Lmi l = factor(block(sp_.matrix(x), T));
    const Mat6 Ginv = l.llt.solve(Mat6::Identity());
    std::vector<Mat6> S(n);
    for (std::size_t i = 0; i < n; ++i) S[i] = Ginv * sens_[i];
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = -S[i].trace();
      for (std::size_t j = i; j < n; ++j) {
        const double h = S[i].cwiseProduct(S[j].transpose()).sum();
        hess(i, j) = h;
        hess(j, i) = h;
      }
    }
    for (int d = 0; d < 3; ++d) grad[nx_ + d] += t / f0;
    Eigen::VectorXd g;
    sp_.constraints(x, g);
    Eigen::VectorXd gx = Eigen::VectorXd::Zero(nx_);
    Eigen::MatrixXd hx = Eigen::MatrixXd::Zero(nx_, nx_);
    const double cb = sp_.add_constraint_barrier(x, g, gx, hx);
    grad.head(nx_) += gx;
    hess.topLeftCorner(nx_, nx_) += hx;
    return t * T.trace() / f0 - logdet(l) + cb;
  }

 private:
  const detail::ScaledSubproblem& sp_;
  std::size_t nx_;
  std::vector<Mat6> sens_;
};

}  // namespace

EpigraphSolution solve_subproblem_epigraph(const SubproblemSpec& spec, const SolverOptions& opt) {
  const detail::ScaledSubproblem sp(spec, opt.freeze_auxiliaries);
  const EpigraphBarrier barrier(sp);
  const std::size_t nx = sp.size();

  Eigen::VectorXd z(barrier.size());
  z.head(nx) = sp.start(opt.start_margin);
  const Mat3 B0 = sp.matrix(z.head(nx));
  const Mat3 T0 = 2.0 * inverse3(B0);
  for (int e = 0; e < 6; ++e) z[nx + e] = T0(kTriu[e][0], kTriu[e][1]);
  const double f0 = 0.5 * T0.trace();

  EpigraphSolution sol;
  double t = opt.t0;
  while (true) {
    for (int it = 0; it < opt.max_newton_per_stage && sol.diagnostics.newton_iters < opt.max_newton_total; ++it) {
      Eigen::VectorXd grad;
      Eigen::MatrixXd hess;
      const double phi = barrier.eval(z, t, f0, grad, hess);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      const Eigen::VectorXd dz = ldlt.solve(-grad);
      const double lambda2 = -grad.dot(dz);
      if (!(lambda2 > 0.0) || lambda2 / 2.0 <= opt.newton_tol) break;
      double step = 1.0;
      double trial = barrier.value(z + dz, t, f0);
      while (!(trial <= phi - opt.ls_alpha * step * lambda2) && step > 1e-14) {
        step *= opt.ls_beta;
        trial = barrier.value(z + step * dz, t, f0);
      }
      if (!(trial <= phi - opt.ls_alpha * step * lambda2)) break;
      z += step * dz;
      ++sol.diagnostics.newton_iters;
    }
    ++sol.diagnostics.barrier_stages;
    sol.diagnostics.final_gap = barrier.nu() / t;
    if (barrier.nu() / t < opt.tol) {
      sol.converged = true;
      break;
    }
    if (sol.diagnostics.newton_iters >= opt.max_newton_total) break;
    t *= opt.mu;
  }

  sol.vars = sp.unscale(z.head(nx));
  sol.T = unpack_T(z, nx);
  sol.trace_T = sol.T.trace();
  sol.objective = surrogate_objective(sol.vars, spec);
  return sol;
}

}  // namespace anchorplace
