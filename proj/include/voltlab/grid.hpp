#pragma once

#include <complex>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace voltlab {

enum class BusKind { kSlack, kPQ };
enum class BranchKind { kLine, kTransformer };
enum class UnitRole { kVoltVar, kAttacker, kNone };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::kPQ;
  double base_kv = 0.0;
  double v_min = 0.9;
  double v_max = 1.1;
  // Only meaningful for the slack bus.
  double v_setpoint = 1.0;
};

// Lines carry per-km parameters. Transformers use the same fields with
// length_km = 1 and impedance in ohm referred to the `to` (secondary) side;
// the tap sits on the `from` side.
struct Branch {
  int from = 0;
  int to = 0;
  BranchKind kind = BranchKind::kLine;
  double r_ohm_per_km = 0.0;
  double x_ohm_per_km = 0.0;
  double b_us_per_km = 0.0;
  double length_km = 1.0;
  double tap_ratio = 1.0;
  double rated_mva = 0.0;
};

struct Load {
  int bus = 0;
  double p_mw = 0.0;
  double q_mvar = 0.0;
  std::optional<std::string> profile_key;
};

struct InverterUnit {
  int bus = 0;
  double s_rated_mva = 0.0;
  UnitRole controller = UnitRole::kNone;
};

// Reactive headroom of an inverter on its capability circle.
double q_available(double s_rated, double p_now);

// Immutable, validated network. Construct through Grid::create or load_grid.
class Grid {
 public:
  static Grid create(std::string name, double s_base_mva, std::vector<Bus> buses,
                     std::vector<Branch> branches, std::vector<Load> loads,
                     std::vector<InverterUnit> units);

  const std::string& name() const { return name_; }
  double s_base_mva() const { return s_base_mva_; }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<Load>& loads() const { return loads_; }
  const std::vector<InverterUnit>& units() const { return units_; }
  int bus_count() const { return static_cast<int>(buses_.size()); }
  int slack_bus() const { return slack_; }

  // Impedance base of a bus in ohm.
  double z_base(int bus) const;

 private:
  Grid() = default;

  std::string name_;
  double s_base_mva_ = 1.0;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<Load> loads_;
  std::vector<InverterUnit> units_;
  int slack_ = 0;
};

// Parses a grid-definition document (JSON with comments). Throws ParseError
// with line context for malformed text and ValidationError for invariant
// violations.
Grid load_grid(std::string_view document);
Grid load_grid_file(const std::filesystem::path& path);

// Per-unit series admittance and total shunt susceptance of a branch.
struct BranchAdmittance {
  std::complex<double> series;
  double shunt = 0.0;
};
BranchAdmittance branch_admittance(const Grid& grid, const Branch& branch);

// Adds (sign = +1) or removes (sign = -1) the pi-model stamp of one branch.
void stamp_branch(Eigen::MatrixXcd& y, const Grid& grid, const Branch& branch,
                  double sign = 1.0);

// Nodal admittance matrix in per-unit on the grid's power base.
Eigen::MatrixXcd admittance_matrix(const Grid& grid);

std::string_view to_string(UnitRole role);

}  // namespace voltlab
