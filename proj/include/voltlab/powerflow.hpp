#pragma once

#include <Eigen/Dense>

#include "voltlab/grid.hpp"

namespace voltlab {

// Net per-unit bus injections, generation positive. The slack entry is
// ignored by the solver.
struct Injections {
  Eigen::VectorXd p;
  Eigen::VectorXd q;

  static Injections zero(int n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)}; }
};

struct PowerflowOptions {
  double tolerance = 1e-8;
  int max_iterations = 30;
  bool flat_start = true;
  // Jacobians with a reciprocal condition estimate below this are treated
  // as singular.
  double min_rcond = 1e-12;
};

struct PowerflowResult {
  Eigen::VectorXd v_mag;
  Eigen::VectorXd v_ang;
  bool converged = false;
  // Number of mismatch evaluations; an exact starting point reports 1.
  int iterations = 0;
  double mismatch_inf_norm = 0.0;
};

struct Mismatch {
  Eigen::VectorXd dp;
  Eigen::VectorXd dq;

  // Largest entry over all buses (slack entries are always zero).
  double inf_norm() const;
};

// Computed complex injections S_i = V_i conj(sum_k Y_ik V_k), split in P and Q.
Injections bus_injections(const Eigen::MatrixXcd& y, const Eigen::VectorXd& v_mag,
                          const Eigen::VectorXd& v_ang);

// Polar Newton-Raphson on a dense Jacobian. Keeps the admittance matrix so
// repeated solves on the same grid skip rebuilding it. Divergence and
// singular Jacobians are reported through PowerflowResult::converged.
class PowerflowSolver {
 public:
  explicit PowerflowSolver(const Grid& grid);

  PowerflowResult solve(const Injections& injections, const PowerflowOptions& options = {},
                        const PowerflowResult* warm_start = nullptr) const;

  // Specified minus computed injection at every non-slack bus.
  Mismatch mismatch(const Injections& injections, const Eigen::VectorXd& v_mag,
                    const Eigen::VectorXd& v_ang) const;

  // d(computed P,Q at pq buses)/d(angle, magnitude at pq buses). Rows and
  // columns follow pq_buses(): first all angles, then all magnitudes.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_ang) const;

  const Eigen::MatrixXcd& admittance() const { return y_; }
  const std::vector<int>& pq_buses() const { return pq_; }
  int slack_bus() const { return slack_; }
  double slack_setpoint() const { return v_slack_; }

 private:
  Eigen::MatrixXcd y_;
  std::vector<int> pq_;
  int slack_ = 0;
  double v_slack_ = 1.0;
};

PowerflowResult solve(const Grid& grid, const Injections& injections,
                      const PowerflowOptions& options = {});

Mismatch mismatch(const Grid& grid, const Injections& injections, const Eigen::VectorXd& v_mag,
                  const Eigen::VectorXd& v_ang);

// Active power lost in branches (sum of all computed injections).
double total_losses(const Eigen::MatrixXcd& y, const Eigen::VectorXd& v_mag,
                    const Eigen::VectorXd& v_ang);

}  // namespace voltlab
