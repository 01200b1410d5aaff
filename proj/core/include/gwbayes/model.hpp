#pragma once

// Forward-model data structures: structured grid, zone map, boundary
// conditions, wells and the uncertain parameter vector.
//
// Cells are addressed by (layer, row, col), zero-based. Layer 0 is the top
// layer; +x runs along increasing column, +y along increasing row and +z
// points upward (towards layer 0).

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gwbayes {

struct CellIndex {
  int layer = 0;
  int row = 0;
  int col = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

class Grid {
 public:
  Grid() = default;
  Grid(int n_layers, int n_rows, int n_cols, double cell_dx, double cell_dy);

  int n_layers() const noexcept { return n_layers_; }
  int n_rows() const noexcept { return n_rows_; }
  int n_cols() const noexcept { return n_cols_; }
  double cell_dx() const noexcept { return dx_; }
  double cell_dy() const noexcept { return dy_; }
  double cell_area() const noexcept { return dx_ * dy_; }

  std::size_t n_cells() const noexcept {
    return static_cast<std::size_t>(n_layers_) * n_rows_ * n_cols_;
  }
  std::size_t n_columns() const noexcept {
    return static_cast<std::size_t>(n_rows_) * n_cols_;
  }

  bool contains(const CellIndex& c) const noexcept {
    return c.layer >= 0 && c.layer < n_layers_ && c.row >= 0 && c.row < n_rows_ &&
           c.col >= 0 && c.col < n_cols_;
  }
  std::size_t index(const CellIndex& c) const noexcept {
    return (static_cast<std::size_t>(c.layer) * n_rows_ + c.row) * n_cols_ + c.col;
  }
  std::size_t index(int layer, int row, int col) const noexcept {
    return index(CellIndex{layer, row, col});
  }
  CellIndex cell(std::size_t idx) const noexcept;
  std::size_t column(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * n_cols_ + col;
  }

  // Per-column land surface (top of layer 0).
  std::vector<double>& surface_elev() noexcept { return surface_; }
  const std::vector<double>& surface_elev() const noexcept { return surface_; }
  // Per-cell bottom elevation.
  std::vector<double>& layer_bottoms() noexcept { return bottoms_; }
  const std::vector<double>& layer_bottoms() const noexcept { return bottoms_; }
  std::vector<std::uint8_t>& active() noexcept { return active_; }
  const std::vector<std::uint8_t>& active() const noexcept { return active_; }

  bool is_active(std::size_t idx) const noexcept { return active_[idx] != 0; }
  double top(const CellIndex& c) const noexcept;
  double bottom(const CellIndex& c) const noexcept { return bottoms_[index(c)]; }
  double thickness(const CellIndex& c) const noexcept { return top(c) - bottom(c); }

  /// Topmost active layer of a column, or -1 when the column is fully inactive.
  int top_active_layer(int row, int col) const noexcept;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int n_layers_ = 0;
  int n_rows_ = 0;
  int n_cols_ = 0;
  double dx_ = 0.0;
  double dy_ = 0.0;
  std::vector<double> surface_;
  std::vector<double> bottoms_;
  std::vector<std::uint8_t> active_;
};

/// Per-cell zone label in {1,2,3}; 0 marks inactive cells.
struct ZoneMap {
  std::vector<int> zone_id;
  friend bool operator==(const ZoneMap&, const ZoneMap&) = default;
};

struct ParameterVector {
  static constexpr std::size_t kSize = 4;

  double k_zone1 = 0.0;  // m/s
  double k_zone2 = 0.0;  // m/s
  double k_zone3 = 0.0;  // m/s
  double r_irrig = 0.0;  // m/s

  double operator[](std::size_t i) const noexcept;
  double& operator[](std::size_t i) noexcept;

  std::array<double, kSize> as_array() const noexcept {
    return {k_zone1, k_zone2, k_zone3, r_irrig};
  }
  static ParameterVector from_array(const std::array<double, kSize>& a) noexcept {
    return {a[0], a[1], a[2], a[3]};
  }
  double conductivity_for_zone(int zone) const noexcept;

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

  /// Synthetic "true" parameters of the reference valley.
  static ParameterVector base_case() noexcept { return {6.5e-5, 4.5e-4, 5.0e-3, 2.5e-8}; }
};

inline constexpr std::array<const char*, ParameterVector::kSize> kParameterNames = {
    "k_zone1", "k_zone2", "k_zone3", "r_irrig"};

struct Interval {
  double low = 0.0;
  double high = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Uniform prior support, one interval per parameter.
struct PriorBox {
  std::array<Interval, ParameterVector::kSize> bounds{};

  bool contains(const ParameterVector& p) const noexcept;
  /// Variance of the uniform distribution on each interval, (b - a)^2 / 12.
  double uniform_variance(std::size_t j) const noexcept;

  static PriorBox reference() noexcept {
    return {{Interval{5.0e-5, 1.0e-3}, Interval{5.0e-5, 1.0e-3}, Interval{1.0e-4, 1.0e-2},
             Interval{1.0e-10, 1.0e-6}}};
  }
  friend bool operator==(const PriorBox&, const PriorBox&) = default;
};

struct ChdCell {
  CellIndex cell;
  double head = 0.0;
  friend bool operator==(const ChdCell&, const ChdCell&) = default;
};

struct GhbCell {
  CellIndex cell;
  double head = 0.0;
  double conductance = 0.0;  // m^2/s
  friend bool operator==(const GhbCell&, const GhbCell&) = default;
};

struct DrnCell {
  CellIndex cell;
  double elevation = 0.0;
  double conductance = 0.0;  // m^2/s
  friend bool operator==(const DrnCell&, const DrnCell&) = default;
};

inline constexpr double kDefaultDrainConductance = 100.0;

struct BoundaryConditionSet {
  std::vector<ChdCell> chd;
  std::vector<GhbCell> ghb;
  std::vector<DrnCell> drn;
  std::vector<double> rch_base;           // per column, m/s
  std::vector<std::uint8_t> irrigated;    // per column, receives r_irrig when non-zero

  friend bool operator==(const BoundaryConditionSet&, const BoundaryConditionSet&) = default;
};

struct Well {
  std::string id;
  CellIndex cell;
  std::optional<double> observed_head;
  friend bool operator==(const Well&, const Well&) = default;
};

using WellSet = std::vector<Well>;

struct ExpertTarget {
  double h_pas_star = 1.0;   // percent
  double sigma_hpas = 0.33;  // percent
  friend bool operator==(const ExpertTarget&, const ExpertTarget&) = default;
};

struct Scenario {
  std::string name;
  Grid grid;
  ZoneMap zones;
  BoundaryConditionSet bc;
  WellSet wells;
  double porosity = 0.2;
  ExpertTarget expert;
  double anisotropy_ratio = 1.0;  // Kv / Kh
  PriorBox prior = PriorBox::reference();

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Throws ValidationError naming the first violated invariant.
void validate(const Scenario& scenario);

/// True iff k_zone1 <= k_zone2 <= k_zone3.
bool validate_ordering(const ParameterVector& p) noexcept;

bool all_positive(const ParameterVector& p) noexcept;

struct ConductivityField {
  std::vector<double> horizontal;  // Kxx = Kyy, m/s; 0 on inactive cells
  std::vector<double> vertical;    // Kzz, m/s
};

ConductivityField conductivity_field(const Scenario& scenario, const ParameterVector& p);

/// Per-cell role flags derived from the boundary-condition lists.
struct CellRoles {
  std::vector<std::uint8_t> is_chd;
  std::vector<double> chd_head;
  std::vector<int> ghb_index;  // -1 when absent
  std::vector<int> drn_index;  // -1 when absent
};

CellRoles cell_roles(const Scenario& scenario);

/// Total recharge rate (m/s) applied to a column at parameters `p`.
double column_recharge(const Scenario& scenario, const ParameterVector& p, std::size_t column);

}  // namespace gwbayes
