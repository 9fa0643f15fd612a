#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "skfnav/errors.hpp"
#include "skfnav/io.hpp"
#include "skfnav/scenarios.hpp"

namespace skfnav {

namespace {

void check_axis(const std::vector<double>& axis, const char* name) {
  if (axis.size() < 2) {
    throw ConfigError(std::string("gridded field axis '") + name +
                      "' needs at least two nodes");
  }
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (!(axis[i] > axis[i - 1])) {
      throw ConfigError(std::string("gridded field axis '") + name +
                        "' must be strictly increasing");
    }
  }
}

// Cell index and fractional offset of `x` on `axis`.
std::pair<std::size_t, double> locate(const std::vector<double>& axis,
                                      double x, const char* name) {
  if (!(x >= axis.front() && x <= axis.back())) {
    std::ostringstream msg;
    msg << "velocity field query outside grid: " << name << "=" << x;
    throw DomainError(msg.str());
  }
  auto it = std::upper_bound(axis.begin(), axis.end(), x);
  std::size_t i = static_cast<std::size_t>(it - axis.begin());
  i = std::clamp<std::size_t>(i, 1, axis.size() - 1) - 1;
  const double w = (x - axis[i]) / (axis[i + 1] - axis[i]);
  return {i, w};
}

}  // namespace

void GriddedField::validate() const {
  check_axis(lon, "lon");
  check_axis(lat, "lat");
  check_axis(time, "t");
  const std::size_t n = lon.size() * lat.size() * time.size();
  if (u.size() != n || v.size() != n) {
    throw ConfigError("gridded field values do not fill the lattice");
  }
}

VelocityField VelocityField::constant(double u0, double v0) {
  VelocityField f;
  f.kind = Kind::Analytic;
  f.analytic = AnalyticField{u0, v0, 0.0, 0.0, 1.0, 0.0};
  return f;
}

Eigen::Vector2d field_eval(const VelocityField& field, double lon, double lat,
                           double t) {
  if (field.kind == VelocityField::Kind::Analytic) {
    const auto& a = field.analytic;
    const double k = 2.0 * std::numbers::pi / a.wavelength;
    return {a.u0 + a.amp_u * std::sin(k * lat + a.omega * t),
            a.v0 + a.amp_v * std::cos(k * lon + a.omega * t)};
  }

  const auto& g = field.grid;
  const auto [ix, wx] = locate(g.lon, lon, "lon");
  const auto [iy, wy] = locate(g.lat, lat, "lat");
  const auto [it, wt] = locate(g.time, t, "t");

  Eigen::Vector2d out = Eigen::Vector2d::Zero();
  for (int dt = 0; dt < 2; ++dt) {
    const double ct = dt ? wt : 1.0 - wt;
    if (ct == 0.0) continue;
    for (int dy = 0; dy < 2; ++dy) {
      const double cy = dy ? wy : 1.0 - wy;
      if (cy == 0.0) continue;
      for (int dx = 0; dx < 2; ++dx) {
        const double cx = dx ? wx : 1.0 - wx;
        if (cx == 0.0) continue;
        const std::size_t n = g.index(it + dt, iy + dy, ix + dx);
        out(0) += ct * cy * cx * g.u[n];
        out(1) += ct * cy * cx * g.v[n];
      }
    }
  }
  return out;
}

GriddedField parse_gridded_field_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty gridded field file");
  const auto header = io::split_csv_line(line);
  const std::vector<std::string> expected = {"lon", "lat", "t", "u", "v"};
  if (header != expected) {
    throw ConfigError("gridded field header must be lon,lat,t,u,v");
  }

  std::map<std::tuple<double, double, double>, std::pair<double, double>> nodes;
  std::set<double> lon, lat, time;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = io::split_csv_line(line);
    if (f.size() != 5) {
      throw ConfigError("gridded field row " + std::to_string(row) +
                        " does not have 5 columns");
    }
    const std::string ctx = "gridded field row " + std::to_string(row);
    const double x = io::parse_double(f[0], ctx);
    const double y = io::parse_double(f[1], ctx);
    const double t = io::parse_double(f[2], ctx);
    if (!nodes.emplace(std::make_tuple(t, y, x),
                       std::make_pair(io::parse_double(f[3], ctx),
                                      io::parse_double(f[4], ctx)))
             .second) {
      throw ConfigError("duplicate node in " + ctx);
    }
    lon.insert(x);
    lat.insert(y);
    time.insert(t);
  }

  GriddedField g;
  g.lon.assign(lon.begin(), lon.end());
  g.lat.assign(lat.begin(), lat.end());
  g.time.assign(time.begin(), time.end());
  if (nodes.size() != g.lon.size() * g.lat.size() * g.time.size()) {
    throw ConfigError("gridded field is not a complete lattice");
  }
  // The map iterates in (t, lat, lon) order, which is the storage order.
  for (const auto& [key, uv] : nodes) {
    g.u.push_back(uv.first);
    g.v.push_back(uv.second);
  }
  g.validate();
  return g;
}

GriddedField load_gridded_field_csv(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read gridded field '" + path.string() + "'");
  }
  return parse_gridded_field_csv(text);
}

VelocityField velocity_field_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("field must be a JSON object");
  const std::string kind = j.value("kind", std::string("analytic"));
  VelocityField f;
  if (kind == "analytic") {
    static const std::set<std::string> known = {
        "kind", "u0", "v0", "amp_u", "amp_v", "wavelength", "omega"};
    for (const auto& item : j.items()) {
      if (!known.count(item.key())) {
        throw ConfigError("unknown field parameter '" + item.key() + "'");
      }
    }
    auto& a = f.analytic;
    a.u0 = j.value("u0", a.u0);
    a.v0 = j.value("v0", a.v0);
    a.amp_u = j.value("amp_u", a.amp_u);
    a.amp_v = j.value("amp_v", a.amp_v);
    a.wavelength = j.value("wavelength", a.wavelength);
    a.omega = j.value("omega", a.omega);
    if (!(a.wavelength > 0.0)) throw ConfigError("field wavelength must be > 0");
  } else if (kind == "gridded") {
    if (!j.contains("path") || !j.at("path").is_string()) {
      throw ConfigError("gridded field needs a 'path'");
    }
    std::filesystem::path p = j.at("path").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    f.kind = VelocityField::Kind::Gridded;
    f.grid = load_gridded_field_csv(p);
  } else {
    throw ConfigError("unknown field kind '" + kind + "'");
  }
  return f;
}

}  // namespace skfnav
