#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stwind/geometry.hpp"

namespace stwind {

using Index = Eigen::Index;

struct Farm {
  std::string id;
  Point location;   // km, planar projection
  double capacity;  // MW, > 0

  friend bool operator==(const Farm&, const Farm&) = default;
};

/// Farms x regular time grid of normalized power in [0, 1]. Immutable once
/// constructed; the constructor enforces the invariants.
class Portfolio {
 public:
  Portfolio(std::vector<Farm> farms, std::vector<std::int64_t> times,
            Eigen::MatrixXd power);

  const std::vector<Farm>& farms() const { return farms_; }
  /// Unix seconds, strictly increasing with a constant step.
  const std::vector<std::int64_t>& times() const { return times_; }
  const Eigen::MatrixXd& power() const { return power_; }

  Index n_farms() const { return static_cast<Index>(farms_.size()); }
  Index n_times() const { return static_cast<Index>(times_.size()); }
  std::int64_t step_seconds() const;

  std::vector<Point> locations() const;
  Eigen::VectorXd capacities() const;

  Portfolio select_farms(const std::vector<Index>& rows) const;
  Portfolio slice_times(Index begin, Index count) const;

 private:
  std::vector<Farm> farms_;
  std::vector<std::int64_t> times_;
  Eigen::MatrixXd power_;
};

struct Window {
  Index offset = 0;  // first training step in the source portfolio
  Portfolio train;   // L steps
  Eigen::MatrixXd truth;  // farms x H, the steps right after `train`
  std::vector<std::int64_t> horizon_times;

  Index length() const { return train.n_times(); }
  Index horizon() const { return truth.cols(); }
};

enum class CoordinateSystem {
  kPlanarKm,       // lat_or_x / lon_or_y already in km
  kGeographicDeg,  // latitude / longitude in degrees, projected at load
};

struct CsvSchema {
  CoordinateSystem coordinates = CoordinateSystem::kPlanarKm;
};

/// Long-format CSV: farm_id, lat_or_x, lon_or_y, capacity, timestamp, power_mw.
Portfolio load_portfolio(const std::filesystem::path& path, const CsvSchema& schema = {});
Portfolio parse_portfolio(std::istream& in, const CsvSchema& schema = {});

/// Writes the long format back out (power in MW = normalized * capacity).
void write_portfolio(const Portfolio& p, std::ostream& out);
void write_portfolio(const Portfolio& p, const std::filesystem::path& path);

Portfolio filter_farms(const Portfolio& p, double max_zero_fraction);

std::vector<Window> make_windows(const Portfolio& p, Index length, Index horizon,
                                 Index stride);

/// RFC 3339 timestamp <-> unix seconds (UTC).
std::int64_t parse_rfc3339(std::string_view text);
std::string format_rfc3339(std::int64_t unix_seconds);

}  // namespace stwind
