#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "voltlab/powerflow.hpp"

using namespace voltlab;

namespace {

// Slack + one pq bus joined by a lossless line of reactance x (pu).
Grid two_bus(double x_pu, double b_pu = 0.0) {
  std::vector<Bus> buses = {{0, BusKind::kSlack, 20.0}, {1, BusKind::kPQ, 20.0}};
  Branch br;
  br.from = 0;
  br.to = 1;
  br.x_ohm_per_km = x_pu * 400.0;
  br.b_us_per_km = b_pu / 400.0 * 1e6;
  return Grid::create("two-bus", 1.0, buses, {br}, {}, {});
}

Injections load_at_bus1(double p, double q = 0.0) {
  Injections inj = Injections::zero(2);
  inj.p[1] = -p;
  inj.q[1] = -q;
  return inj;
}

Grid cigre() { return load_grid_file(std::string(VOLTLAB_SOURCE_DIR) + "/data/grids/cigre_mv.json"); }

Injections cigre_injections(const Grid& g, double pv_mw) {
  Injections inj = Injections::zero(g.bus_count());
  for (const auto& l : g.loads())
    if (!l.profile_key) {
      inj.p[l.bus] -= l.p_mw;
      inj.q[l.bus] -= l.q_mvar;
    }
  for (const auto& u : g.units()) inj.p[u.bus] += pv_mw;
  return inj;
}

}  // namespace

TEST_CASE("zero injections give the flat solution in one evaluation") {
  const PowerflowResult r = solve(two_bus(0.1), Injections::zero(2));
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK(r.v_mag[0] == 1.0);
  CHECK(r.v_mag[1] == 1.0);
  CHECK(r.v_ang[0] == 0.0);
  CHECK(r.v_ang[1] == 0.0);
}

TEST_CASE("two-bus load matches the quartic root") {
  const double x = 0.1;
  for (double p : {0.1, 0.5, 2.0, 4.0, 4.9}) {
    CAPTURE(p);
    const PowerflowResult r = solve(two_bus(x), load_at_bus1(p));
    REQUIRE(r.converged);
    CHECK(std::abs(r.v_mag[1] - oracle::two_bus_voltage(p, x)) <= 1e-9);
    // Power delivered over a lossless line: P = V sin(-theta) / x.
    CHECK(r.v_mag[1] * std::sin(-r.v_ang[1]) / x == doctest::Approx(p).epsilon(1e-9));
  }
}

TEST_CASE("load beyond the nose point diverges without throwing") {
  // Nose of V^4 - V^2 + (P x)^2 = 0 lies at P = 1 / (2 x) = 5.
  const Grid g = two_bus(0.1);
  PowerflowResult r;
  CHECK_NOTHROW(r = solve(g, load_at_bus1(6.0)));
  CHECK_FALSE(r.converged);
  CHECK(r.iterations >= 1);
  CHECK(solve(g, load_at_bus1(4.9)).converged);
}

TEST_CASE("converged results satisfy the tolerance and hold the slack setpoint") {
  const Grid g = cigre();
  for (double pv : {0.0, 0.45, 0.9}) {
    const PowerflowResult r = solve(g, cigre_injections(g, pv));
    REQUIRE(r.converged);
    CHECK(r.mismatch_inf_norm <= 1e-8);
    CHECK(r.v_mag[g.slack_bus()] == g.buses()[0].v_setpoint);
    CHECK(r.v_ang[g.slack_bus()] == 0.0);
    CHECK(mismatch(g, cigre_injections(g, pv), r.v_mag, r.v_ang).inf_norm() <= 1e-8);
  }
}

TEST_CASE("flat start mismatch on a lossless line is minus the load") {
  const Grid g = two_bus(0.2);
  const Mismatch m = mismatch(g, load_at_bus1(0.7, 0.3), Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2));
  CHECK(m.dp[1] == doctest::Approx(-0.7).epsilon(1e-14));
  CHECK(m.dq[1] == doctest::Approx(-0.3).epsilon(1e-14));
  CHECK(m.dp[0] == 0.0);
  CHECK(m.dq[0] == 0.0);
}

TEST_CASE("analytic jacobian matches central differences of the mismatch") {
  const Grid g = cigre();
  const PowerflowSolver solver(g);
  const Injections inj = cigre_injections(g, 0.5);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dv(0.9, 1.1), da(-0.2, 0.2);
  const auto& pq = solver.pq_buses();
  const Eigen::Index m = static_cast<Eigen::Index>(pq.size());
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd vm = Eigen::VectorXd::Ones(g.bus_count());
    Eigen::VectorXd va = Eigen::VectorXd::Zero(g.bus_count());
    for (int b : pq) {
      vm[b] = dv(rng);
      va[b] = da(rng);
    }
    const Eigen::MatrixXd j = solver.jacobian(vm, va);
    REQUIRE(j.rows() == 2 * m);
    const double h = 1e-6;
    for (Eigen::Index c = 0; c < 2 * m; ++c) {
      const int bus = pq[static_cast<size_t>(c % m)];
      Eigen::VectorXd vmp = vm, vmm = vm, vap = va, vam = va;
      if (c < m) {
        vap[bus] += h;
        vam[bus] -= h;
      } else {
        vmp[bus] += h;
        vmm[bus] -= h;
      }
      const Mismatch plus = solver.mismatch(inj, vmp, vap);
      const Mismatch minus = solver.mismatch(inj, vmm, vam);
      for (Eigen::Index r = 0; r < 2 * m; ++r) {
        const int rb = pq[static_cast<size_t>(r % m)];
        const double dplus = r < m ? plus.dp[rb] : plus.dq[rb];
        const double dminus = r < m ? minus.dp[rb] : minus.dq[rb];
        // Mismatch is specified minus computed, so its slope is -J.
        const double fd = -(dplus - dminus) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(j(r, c)), 1.0});
        CHECK(std::abs(fd - j(r, c)) / scale <= 1e-6);
      }
    }
  }
}

TEST_CASE("one newton step from a perturbed solution shrinks the error quadratically") {
  const Grid g = cigre();
  const PowerflowSolver solver(g);
  const Injections inj = cigre_injections(g, 0.3);
  const PowerflowResult exact = solver.solve(inj);
  REQUIRE(exact.converged);
  const auto& pq = solver.pq_buses();
  const Eigen::Index m = static_cast<Eigen::Index>(pq.size());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Eigen::VectorXd dir(2 * m);
  for (Eigen::Index i = 0; i < 2 * m; ++i) dir[i] = nd(rng);
  dir.normalize();

  auto newton_error = [&](double eps) {
    Eigen::VectorXd vm = exact.v_mag, va = exact.v_ang;
    for (Eigen::Index k = 0; k < m; ++k) {
      va[pq[static_cast<size_t>(k)]] += eps * dir[k];
      vm[pq[static_cast<size_t>(k)]] += eps * dir[m + k];
    }
    const Mismatch mm = solver.mismatch(inj, vm, va);
    CHECK(mm.inf_norm() > 0.0);
    Eigen::VectorXd rhs(2 * m);
    for (Eigen::Index k = 0; k < m; ++k) {
      rhs[k] = mm.dp[pq[static_cast<size_t>(k)]];
      rhs[m + k] = mm.dq[pq[static_cast<size_t>(k)]];
    }
    const Eigen::VectorXd dx = solver.jacobian(vm, va).partialPivLu().solve(rhs);
    double err = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      const int b = pq[static_cast<size_t>(k)];
      err = std::max(err, std::abs(va[b] + dx[k] - exact.v_ang[b]));
      err = std::max(err, std::abs(vm[b] + dx[m + k] - exact.v_mag[b]));
    }
    return err;
  };
  const double e1 = newton_error(1e-3);
  const double e2 = newton_error(1e-4);
  CHECK(e1 < 1e-3);
  // Tenfold smaller perturbation: error shrinks by roughly a hundred.
  CHECK(e2 / e1 < 0.02);
  CHECK(e2 / e1 > 0.005);
}

TEST_CASE("power balance: slack covers load plus nonnegative losses") {
  const Grid g = cigre();
  const PowerflowSolver solver(g);
  for (double pv : {0.0, 0.5, 0.9}) {
    const Injections inj = cigre_injections(g, pv);
    const PowerflowResult r = solver.solve(inj);
    REQUIRE(r.converged);
    const Injections s = bus_injections(solver.admittance(), r.v_mag, r.v_ang);
    const double losses = total_losses(solver.admittance(), r.v_mag, r.v_ang);
    CHECK(losses >= 0.0);
    double net_pq = 0.0;
    for (int b : solver.pq_buses()) net_pq += inj.p[b];
    CHECK(std::abs(s.p[g.slack_bus()] + net_pq - losses) <= 1e-8);
  }
}

TEST_CASE("solver is bit-for-bit deterministic") {
  const Grid g = cigre();
  const Injections inj = cigre_injections(g, 0.7);
  const PowerflowResult a = solve(g, inj);
  const PowerflowResult b = solve(g, inj);
  CHECK(a.iterations == b.iterations);
  CHECK((a.v_mag.array() == b.v_mag.array()).all());
  CHECK((a.v_ang.array() == b.v_ang.array()).all());
}

TEST_CASE("small random networks agree with the mismatch-minimization oracle") {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 20; ++k) {
    oracle::RandomCase c = oracle::random_case(rng);
    Injections inj = Injections::zero(c.grid.bus_count());
    for (int i = 0; i < c.grid.bus_count(); ++i) {
      inj.p[i] = c.p[static_cast<size_t>(i)];
      inj.q[i] = c.q[static_cast<size_t>(i)];
    }
    const PowerflowResult r = solve(c.grid, inj);
    const oracle::Solution o = oracle::minimize_mismatch(c.grid, c.p, c.q);
    REQUIRE(r.converged);
    REQUIRE(o.residual < 1e-10);
    for (int i = 0; i < c.grid.bus_count(); ++i) {
      CHECK(std::abs(r.v_mag[i] - o.vm[static_cast<size_t>(i)]) <= 1e-6);
      CHECK(std::abs(r.v_ang[i] - o.va[static_cast<size_t>(i)]) <= 1e-6);
    }
  }
}

TEST_CASE("iteration cap and non-finite inputs report divergence") {
  const Grid g = two_bus(0.1);
  PowerflowOptions opts;
  opts.max_iterations = 1;
  CHECK_FALSE(solve(g, load_at_bus1(2.0), opts).converged);
  Injections bad = load_at_bus1(1.0);
  bad.p[1] = std::nan("");
  CHECK_FALSE(solve(g, bad).converged);
}

TEST_CASE("wrong-sized injections are a programming error") {
  CHECK_THROWS_AS(solve(two_bus(0.1), Injections::zero(3)), std::invalid_argument);
}
