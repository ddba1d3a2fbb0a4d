#include "voltlab/powerflow.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace voltlab {

double Mismatch::inf_norm() const {
  if (!dp.allFinite() || !dq.allFinite()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  if (dp.size() > 0) m = dp.cwiseAbs().maxCoeff();
  if (dq.size() > 0) m = std::max(m, dq.cwiseAbs().maxCoeff());
  return m;
}

Injections bus_injections(const Eigen::MatrixXcd& y, const Eigen::VectorXd& v_mag,
                          const Eigen::VectorXd& v_ang) {
  const Eigen::Index n = v_mag.size();
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(v_mag(i), v_ang(i));
  const Eigen::VectorXcd s = v.cwiseProduct((y * v).conjugate());
  return {s.real(), s.imag()};
}

double total_losses(const Eigen::MatrixXcd& y, const Eigen::VectorXd& v_mag,
                    const Eigen::VectorXd& v_ang) {
  return bus_injections(y, v_mag, v_ang).p.sum();
}

PowerflowSolver::PowerflowSolver(const Grid& grid)
    : y_(admittance_matrix(grid)), slack_(grid.slack_bus()) {
  v_slack_ = grid.buses()[slack_].v_setpoint;
  for (int i = 0; i < grid.bus_count(); ++i)
    if (i != slack_) pq_.push_back(i);
}

Mismatch PowerflowSolver::mismatch(const Injections& inj, const Eigen::VectorXd& v_mag,
                                   const Eigen::VectorXd& v_ang) const {
  const Eigen::Index n = y_.rows();
  if (inj.p.size() != n || inj.q.size() != n || v_mag.size() != n || v_ang.size() != n)
    throw std::invalid_argument("mismatch: vector sizes must equal the bus count");
  const Injections calc = bus_injections(y_, v_mag, v_ang);
  Mismatch m{inj.p - calc.p, inj.q - calc.q};
  m.dp(slack_) = 0.0;
  m.dq(slack_) = 0.0;
  return m;
}

Eigen::MatrixXd PowerflowSolver::jacobian(const Eigen::VectorXd& v_mag,
                                          const Eigen::VectorXd& v_ang) const {
  const Eigen::Index m = static_cast<Eigen::Index>(pq_.size());
  const Eigen::Index n = y_.rows();
  const Injections calc = bus_injections(y_, v_mag, v_ang);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * m, 2 * m);

  // Column index of each bus in the state vector, -1 for the slack.
  std::vector<Eigen::Index> col(static_cast<size_t>(n), -1);
  for (Eigen::Index a = 0; a < m; ++a) col[pq_[a]] = a;

  for (Eigen::Index a = 0; a < m; ++a) {
    const int i = pq_[a];
    const double vi = v_mag(i);
    const double gii = y_(i, i).real();
    const double bii = y_(i, i).imag();
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index c = col[k];
      if (c < 0) continue;
      if (k == i) {
        jac(a, a) = -calc.q(i) - bii * vi * vi;
        jac(a, m + a) = calc.p(i) / vi + gii * vi;
        jac(m + a, a) = calc.p(i) - gii * vi * vi;
        jac(m + a, m + a) = calc.q(i) / vi - bii * vi;
        continue;
      }
      const double g = y_(i, k).real();
      const double b = y_(i, k).imag();
      if (g == 0.0 && b == 0.0) continue;
      const double theta = v_ang(i) - v_ang(k);
      const double ct = std::cos(theta);
      const double st = std::sin(theta);
      const double vk = v_mag(k);
      jac(a, c) = vi * vk * (g * st - b * ct);
      jac(a, m + c) = vi * (g * ct + b * st);
      jac(m + a, c) = -vi * vk * (g * ct + b * st);
      jac(m + a, m + c) = vi * (g * st - b * ct);
    }
  }
  return jac;
}

PowerflowResult PowerflowSolver::solve(const Injections& inj, const PowerflowOptions& options,
                                       const PowerflowResult* warm_start) const {
  const Eigen::Index n = y_.rows();
  if (inj.p.size() != n || inj.q.size() != n)
    throw std::invalid_argument("solve: injection vector size must equal the bus count");

  PowerflowResult r;
  if (options.flat_start || warm_start == nullptr) {
    if (!options.flat_start && warm_start == nullptr)
      throw std::invalid_argument("solve: flat_start = false needs a starting point");
    r.v_mag = Eigen::VectorXd::Ones(n);
    r.v_ang = Eigen::VectorXd::Zero(n);
  } else {
    r.v_mag = warm_start->v_mag;
    r.v_ang = warm_start->v_ang;
  }
  r.v_mag(slack_) = v_slack_;
  r.v_ang(slack_) = 0.0;

  const Eigen::Index m = static_cast<Eigen::Index>(pq_.size());
  Eigen::VectorXd rhs(2 * m);
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Mismatch mis = mismatch(inj, r.v_mag, r.v_ang);
    r.iterations = it;
    r.mismatch_inf_norm = mis.inf_norm();
    if (!std::isfinite(r.mismatch_inf_norm)) return r;
    if (r.mismatch_inf_norm <= options.tolerance) {
      r.converged = true;
      return r;
    }
    if (it == options.max_iterations) break;

    for (Eigen::Index a = 0; a < m; ++a) {
      rhs(a) = mis.dp(pq_[a]);
      rhs(m + a) = mis.dq(pq_[a]);
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jacobian(r.v_mag, r.v_ang));
    const double rcond = lu.rcond();
    if (!(rcond >= options.min_rcond)) return r;
    const Eigen::VectorXd dx = lu.solve(rhs);
    for (Eigen::Index a = 0; a < m; ++a) {
      r.v_ang(pq_[a]) += dx(a);
      r.v_mag(pq_[a]) += dx(m + a);
    }
  }
  return r;
}

PowerflowResult solve(const Grid& grid, const Injections& injections,
                      const PowerflowOptions& options) {
  return PowerflowSolver(grid).solve(injections, options);
}

Mismatch mismatch(const Grid& grid, const Injections& injections, const Eigen::VectorXd& v_mag,
                  const Eigen::VectorXd& v_ang) {
  return PowerflowSolver(grid).mismatch(injections, v_mag, v_ang);
}

}  // namespace voltlab
