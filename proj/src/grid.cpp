#include "voltlab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "voltlab/errors.hpp"
#include "voltlab/json_fields.hpp"

namespace voltlab {

using json = nlohmann::json;

double q_available(double s_rated, double p_now) {
  const double rest = s_rated * s_rated - p_now * p_now;
  return rest > 0.0 ? std::sqrt(rest) : 0.0;
}

double Grid::z_base(int bus) const {
  const double kv = buses_.at(static_cast<size_t>(bus)).base_kv;
  return kv * kv / s_base_mva_;
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

bool connected(int n, const std::vector<Branch>& branches) {
  std::vector<int> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& br : branches) parent[find(br.from)] = find(br.to);
  for (int i = 1; i < n; ++i)
    if (find(i) != find(0)) return false;
  return true;
}

}  // namespace

Grid Grid::create(std::string name, double s_base_mva, std::vector<Bus> buses,
                  std::vector<Branch> branches, std::vector<Load> loads,
                  std::vector<InverterUnit> units) {
  require(s_base_mva > 0.0, "s_base_mva must be positive");
  require(!buses.empty(), "grid has no buses");
  const int n = static_cast<int>(buses.size());

  int slack = -1;
  for (int i = 0; i < n; ++i) {
    const Bus& b = buses[i];
    const std::string where = "bus " + std::to_string(b.id);
    require(b.id == i, where + ": bus ids must equal their position (expected " +
                           std::to_string(i) + ")");
    require(b.base_kv > 0.0, where + ": base_voltage must be > 0");
    require(b.v_min < 1.0 && 1.0 < b.v_max, where + ": band must satisfy v_min < 1 < v_max");
    if (b.kind == BusKind::kSlack) {
      require(slack < 0, "exactly one slack bus required (found a second at bus " +
                             std::to_string(b.id) + ")");
      require(b.v_setpoint > 0.0, where + ": slack setpoint must be positive");
      slack = i;
    }
  }
  require(slack >= 0, "exactly one slack bus required (found none)");

  auto bus_exists = [n](int id) { return id >= 0 && id < n; };
  for (size_t k = 0; k < branches.size(); ++k) {
    const Branch& br = branches[k];
    const std::string where = "branch " + std::to_string(k) + " (" +
                              std::to_string(br.from) + "-" + std::to_string(br.to) + ")";
    require(bus_exists(br.from) && bus_exists(br.to), where + ": references unknown bus");
    require(br.from != br.to, where + ": from and to must differ");
    require(br.length_km > 0.0, where + ": length must be positive");
    require(std::hypot(br.r_ohm_per_km, br.x_ohm_per_km) > 0.0,
            where + ": impedance magnitude must be > 0");
    if (br.kind == BranchKind::kLine) {
      require(buses[br.from].base_kv == buses[br.to].base_kv,
              where + ": line connects buses of different base voltage");
      require(br.tap_ratio == 1.0, where + ": tap_ratio only applies to transformers");
    } else {
      require(br.tap_ratio > 0.0, where + ": tap_ratio must be positive");
    }
  }
  require(connected(n, branches), "grid graph is not connected");

  for (const auto& ld : loads)
    require(bus_exists(ld.bus), "load references unknown bus " + std::to_string(ld.bus));
  for (const auto& u : units) {
    require(bus_exists(u.bus), "unit references unknown bus " + std::to_string(u.bus));
    require(u.s_rated_mva > 0.0, "unit at bus " + std::to_string(u.bus) +
                                     ": s_rated must be positive");
  }

  Grid g;
  g.name_ = std::move(name);
  g.s_base_mva_ = s_base_mva;
  g.buses_ = std::move(buses);
  g.branches_ = std::move(branches);
  g.loads_ = std::move(loads);
  g.units_ = std::move(units);
  g.slack_ = slack;
  return g;
}

Grid load_grid(std::string_view document) {
  const json doc = parse_json_document(document, "grid");
  detail::FieldReader root(doc, "grid");

  std::vector<Bus> buses;
  for (const auto& [i, node] : root.array("buses")) {
    detail::FieldReader f(node, "buses[" + std::to_string(i) + "]");
    Bus b;
    b.id = f.integer("id");
    const std::string kind = f.string("kind");
    if (kind == "slack") {
      b.kind = BusKind::kSlack;
    } else if (kind == "pq") {
      b.kind = BusKind::kPQ;
    } else {
      f.fail("kind", "expected \"slack\" or \"pq\"");
    }
    b.base_kv = f.number("base_kv");
    b.v_min = f.number_or("v_min", 0.9);
    b.v_max = f.number_or("v_max", 1.1);
    b.v_setpoint = f.number_or("v_setpoint", 1.0);
    buses.push_back(b);
  }

  std::vector<Branch> branches;
  for (const auto& [i, node] : root.array("branches")) {
    detail::FieldReader f(node, "branches[" + std::to_string(i) + "]");
    Branch br;
    br.from = f.integer("from");
    br.to = f.integer("to");
    const std::string kind = f.string_or("kind", "line");
    if (kind == "line") {
      br.kind = BranchKind::kLine;
    } else if (kind == "transformer") {
      br.kind = BranchKind::kTransformer;
    } else {
      f.fail("kind", "expected \"line\" or \"transformer\"");
    }
    br.r_ohm_per_km = f.number("r_ohm_per_km");
    br.x_ohm_per_km = f.number("x_ohm_per_km");
    br.b_us_per_km = f.number_or("b_us_per_km", 0.0);
    br.length_km = f.number_or("length_km", 1.0);
    br.tap_ratio = f.number_or("tap_ratio", 1.0);
    br.rated_mva = f.number_or("rated_mva", 0.0);
    branches.push_back(br);
  }

  std::vector<Load> loads;
  if (root.has("loads")) {
    for (const auto& [i, node] : root.array("loads")) {
      detail::FieldReader f(node, "loads[" + std::to_string(i) + "]");
      Load ld;
      ld.bus = f.integer("bus");
      ld.p_mw = f.number_or("p_mw", 0.0);
      ld.q_mvar = f.number_or("q_mvar", 0.0);
      if (f.has("profile_key")) ld.profile_key = f.string("profile_key");
      loads.push_back(ld);
    }
  }

  std::vector<InverterUnit> units;
  if (root.has("units")) {
    for (const auto& [i, node] : root.array("units")) {
      detail::FieldReader f(node, "units[" + std::to_string(i) + "]");
      InverterUnit u;
      u.bus = f.integer("bus");
      u.s_rated_mva = f.number("s_rated_mva");
      const std::string role = f.string_or("controller", "none");
      if (role == "voltvar") {
        u.controller = UnitRole::kVoltVar;
      } else if (role == "attacker") {
        u.controller = UnitRole::kAttacker;
      } else if (role == "none") {
        u.controller = UnitRole::kNone;
      } else {
        f.fail("controller", "expected \"voltvar\", \"attacker\" or \"none\"");
      }
      units.push_back(u);
    }
  }

  return Grid::create(root.string_or("name", "grid"), root.number_or("s_base_mva", 1.0),
                      std::move(buses), std::move(branches), std::move(loads),
                      std::move(units));
}

Grid load_grid_file(const std::filesystem::path& path) {
  return load_grid(read_text_file(path));
}

BranchAdmittance branch_admittance(const Grid& grid, const Branch& br) {
  const double zb = grid.z_base(br.to);
  const std::complex<double> z{br.r_ohm_per_km * br.length_km / zb,
                               br.x_ohm_per_km * br.length_km / zb};
  return {1.0 / z, br.b_us_per_km * 1e-6 * br.length_km * zb};
}

void stamp_branch(Eigen::MatrixXcd& y, const Grid& grid, const Branch& br, double sign) {
  const auto [ys, b] = branch_admittance(grid, br);
  const std::complex<double> half_shunt{0.0, b / 2.0};
  const double t = br.tap_ratio;
  y(br.from, br.from) += sign * ((ys + half_shunt) / (t * t));
  y(br.to, br.to) += sign * (ys + half_shunt);
  y(br.from, br.to) -= sign * (ys / t);
  y(br.to, br.from) -= sign * (ys / t);
}

Eigen::MatrixXcd admittance_matrix(const Grid& grid) {
  const int n = grid.bus_count();
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : grid.branches()) stamp_branch(y, grid, br);
  return y;
}

std::string_view to_string(UnitRole role) {
  switch (role) {
    case UnitRole::kVoltVar:
      return "voltvar";
    case UnitRole::kAttacker:
      return "attacker";
    case UnitRole::kNone:
      break;
  }
  return "none";
}

}  // namespace voltlab
