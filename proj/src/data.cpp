#include "stwind/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "stwind/error.hpp"

namespace stwind {

namespace {

constexpr double kEarthRadiusKm = 6371.0;
constexpr double kCapacityTolerance = 0.01;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& value) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(value);
}

int parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) throw ParseError("truncated timestamp");
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') throw ParseError("invalid digit in timestamp");
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

}  // namespace

std::int64_t parse_rfc3339(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)
  if (s.size() < 20 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    throw ParseError("malformed RFC 3339 timestamp '" + std::string(s) + "'");
  using namespace std::chrono;
  const int year = parse_fixed_int(s, 0, 4);
  const int month = parse_fixed_int(s, 5, 2);
  const int day = parse_fixed_int(s, 8, 2);
  const int hour = parse_fixed_int(s, 11, 2);
  const int minute = parse_fixed_int(s, 14, 2);
  const int second = parse_fixed_int(s, 17, 2);
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60)
    throw ParseError("out-of-range field in timestamp '" + std::string(s) + "'");
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;  // sub-second part dropped
  }
  if (pos >= s.size()) throw ParseError("timestamp without offset '" + std::string(s) + "'");
  std::int64_t offset = 0;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    if (pos + 6 != s.size() || s[pos + 3] != ':')
      throw ParseError("malformed offset in timestamp '" + std::string(s) + "'");
    const int oh = parse_fixed_int(s, pos + 1, 2);
    const int om = parse_fixed_int(s, pos + 4, 2);
    offset = (s[pos] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
    pos += 6;
  }
  if (pos != s.size()) throw ParseError("trailing characters in timestamp '" + std::string(s) + "'");
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hour * 3600 + minute * 60 + second - offset;
}

std::string format_rfc3339(std::int64_t t) {
  using namespace std::chrono;
  const auto days = static_cast<int>(std::floor(static_cast<double>(t) / 86400.0));
  std::int64_t rem = t - static_cast<std::int64_t>(days) * 86400;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                static_cast<int>(rem % 60));
  return buf;
}

Portfolio::Portfolio(std::vector<Farm> farms, std::vector<std::int64_t> times, Eigen::MatrixXd power)
    : farms_(std::move(farms)), times_(std::move(times)), power_(std::move(power)) {
  if (power_.rows() != n_farms() || power_.cols() != n_times())
    throw DimensionError("power matrix must be farms x times");
  std::set<std::string> ids;
  for (const auto& f : farms_) {
    if (!(f.capacity > 0.0) || !std::isfinite(f.capacity))
      throw RangeError("farm '" + f.id + "' has non-positive capacity");
    if (!std::isfinite(f.location.x) || !std::isfinite(f.location.y))
      throw RangeError("farm '" + f.id + "' has a non-finite location");
    if (!ids.insert(f.id).second) throw DuplicateError("duplicate farm id '" + f.id + "'");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (times_[i] - times_[i - 1] != times_[1] - times_[0] || times_[i] <= times_[i - 1])
      throw GapError("time grid is not regular at " + format_rfc3339(times_[i]));
  }
  if (power_.size() > 0 && (power_.minCoeff() < 0.0 || power_.maxCoeff() > 1.0 || !power_.allFinite()))
    throw RangeError("normalized power outside [0, 1]");
}

std::int64_t Portfolio::step_seconds() const {
  return times_.size() >= 2 ? times_[1] - times_[0] : 0;
}

std::vector<Point> Portfolio::locations() const {
  std::vector<Point> out;
  out.reserve(farms_.size());
  for (const auto& f : farms_) out.push_back(f.location);
  return out;
}

Eigen::VectorXd Portfolio::capacities() const {
  Eigen::VectorXd c(n_farms());
  for (Index j = 0; j < n_farms(); ++j) c[j] = farms_[static_cast<std::size_t>(j)].capacity;
  return c;
}

Portfolio Portfolio::select_farms(const std::vector<Index>& rows) const {
  std::vector<Farm> farms;
  Eigen::MatrixXd power(static_cast<Index>(rows.size()), n_times());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= n_farms()) throw DimensionError("farm index out of range");
    farms.push_back(farms_[static_cast<std::size_t>(rows[i])]);
    power.row(static_cast<Index>(i)) = power_.row(rows[i]);
  }
  return Portfolio(std::move(farms), times_, std::move(power));
}

Portfolio Portfolio::slice_times(Index begin, Index count) const {
  if (begin < 0 || count < 0 || begin + count > n_times()) throw DimensionError("time slice out of range");
  std::vector<std::int64_t> times(times_.begin() + begin, times_.begin() + begin + count);
  return Portfolio(farms_, std::move(times), power_.middleCols(begin, count));
}

Portfolio parse_portfolio(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty input: missing header");
  ++line_no;
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = split_csv(line);
  const std::vector<std::string> wanted = {"farm_id", "lat_or_x", "lon_or_y", "capacity", "timestamp",
                                           "power_mw"};
  std::vector<std::size_t> col(wanted.size(), header.size());
  for (std::size_t w = 0; w < wanted.size(); ++w) {
    for (std::size_t h = 0; h < header.size(); ++h)
      if (header[h] == wanted[w]) col[w] = h;
    if (col[w] == header.size()) throw ParseError("line 1: missing column '" + wanted[w] + "'");
  }

  struct RawFarm {
    double a, b, capacity;
    std::map<std::int64_t, double> power;
  };
  std::map<std::string, RawFarm> raw;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != header.size())
      throw ParseError(where + "expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    const std::string id(fields[col[0]]);
    if (id.empty()) throw ParseError(where + "empty farm_id");
    double a, b, cap, mw;
    if (!parse_double(fields[col[1]], a) || !parse_double(fields[col[2]], b))
      throw ParseError(where + "invalid coordinate");
    if (!parse_double(fields[col[3]], cap) || cap <= 0.0) throw ParseError(where + "invalid capacity");
    if (!parse_double(fields[col[5]], mw)) throw ParseError(where + "invalid power_mw");
    std::int64_t t;
    try {
      t = parse_rfc3339(fields[col[4]]);
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    if (mw < 0.0) throw RangeError(where + "negative power_mw for farm '" + id + "'");
    if (mw > cap * (1.0 + kCapacityTolerance))
      throw RangeError(where + "power_mw exceeds capacity of farm '" + id + "' by more than 1%");

    auto [it, inserted] = raw.try_emplace(id, RawFarm{a, b, cap, {}});
    if (!inserted && (it->second.a != a || it->second.b != b || it->second.capacity != cap))
      throw ParseError(where + "inconsistent location or capacity for farm '" + id + "'");
    if (!it->second.power.emplace(t, std::min(mw / cap, 1.0)).second)
      throw DuplicateError(where + "duplicated (farm, timestamp) = ('" + id + "', " +
                           std::string(fields[col[4]]) + ")");
  }
  if (raw.empty()) throw EmptyPortfolioError("no data rows");

  std::set<std::int64_t> grid_set;
  for (const auto& [id, f] : raw)
    for (const auto& [t, v] : f.power) grid_set.insert(t);
  std::vector<std::int64_t> grid(grid_set.begin(), grid_set.end());
  if (grid.size() >= 2) {
    std::int64_t step = grid[1] - grid[0];
    for (std::size_t i = 1; i < grid.size(); ++i) step = std::min(step, grid[i] - grid[i - 1]);
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (grid[i] - grid[i - 1] != step)
        throw GapError("gap in the time grid after " + format_rfc3339(grid[i - 1]) + " (all farms)");
  }

  double lat0 = 0.0, lon0 = 0.0;
  if (schema.coordinates == CoordinateSystem::kGeographicDeg) {
    for (const auto& [id, f] : raw) {
      lat0 += f.a;
      lon0 += f.b;
    }
    lat0 /= static_cast<double>(raw.size());
    lon0 /= static_cast<double>(raw.size());
  }

  std::vector<Farm> farms;
  Eigen::MatrixXd power(static_cast<Index>(raw.size()), static_cast<Index>(grid.size()));
  Index row = 0;
  for (const auto& [id, f] : raw) {  // std::map iterates in id order
    for (std::size_t k = 0; k < grid.size(); ++k) {
      auto it = f.power.find(grid[k]);
      if (it == f.power.end())
        throw GapError("farm '" + id + "' has no observation at " + format_rfc3339(grid[k]));
      power(row, static_cast<Index>(k)) = it->second;
    }
    Point loc{f.a, f.b};
    if (schema.coordinates == CoordinateSystem::kGeographicDeg) {
      constexpr double deg = std::numbers::pi / 180.0;
      loc = {kEarthRadiusKm * (f.b - lon0) * deg * std::cos(lat0 * deg), kEarthRadiusKm * (f.a - lat0) * deg};
    }
    farms.push_back({id, loc, f.capacity});
    ++row;
  }
  return Portfolio(std::move(farms), std::move(grid), std::move(power));
}

Portfolio load_portfolio(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return parse_portfolio(in, schema);
}

void write_portfolio(const Portfolio& p, std::ostream& out) {
  out << "farm_id,lat_or_x,lon_or_y,capacity,timestamp,power_mw\n";
  out << std::setprecision(17);
  for (Index j = 0; j < p.n_farms(); ++j) {
    const auto& f = p.farms()[static_cast<std::size_t>(j)];
    for (Index t = 0; t < p.n_times(); ++t) {
      out << f.id << ',' << f.location.x << ',' << f.location.y << ',' << f.capacity << ','
          << format_rfc3339(p.times()[static_cast<std::size_t>(t)]) << ',' << p.power()(j, t) * f.capacity
          << '\n';
    }
  }
}

void write_portfolio(const Portfolio& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  write_portfolio(p, out);
}

Portfolio filter_farms(const Portfolio& p, double max_zero_fraction) {
  if (!(max_zero_fraction >= 0.0 && max_zero_fraction <= 1.0))
    throw ArgumentError("max_zero_fraction must lie in [0, 1]");
  std::vector<Index> keep;
  for (Index j = 0; j < p.n_farms(); ++j) {
    const auto zeros = (p.power().row(j).array() == 0.0).count();
    if (static_cast<double>(zeros) <= max_zero_fraction * static_cast<double>(p.n_times())) keep.push_back(j);
  }
  if (keep.empty()) throw EmptyPortfolioError("no farm passes the zero-fraction filter");
  return p.select_farms(keep);
}

std::vector<Window> make_windows(const Portfolio& p, Index length, Index horizon, Index stride) {
  if (length < 2 || horizon < 1 || stride < 1)
    throw ArgumentError("window requires L >= 2, H >= 1, stride >= 1");
  if (length + horizon > p.n_times())
    throw InsufficientDataError("series of " + std::to_string(p.n_times()) + " steps is shorter than L + H = " +
                                std::to_string(length + horizon));
  std::vector<Window> out;
  for (Index off = 0; off + length + horizon <= p.n_times(); off += stride) {
    std::vector<std::int64_t> ht(p.times().begin() + off + length, p.times().begin() + off + length + horizon);
    out.push_back(Window{off, p.slice_times(off, length), p.power().middleCols(off + length, horizon),
                         std::move(ht)});
  }
  return out;
}

}  // namespace stwind
