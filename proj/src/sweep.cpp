#include "skfnav/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "skfnav/errors.hpp"
#include "skfnav/io.hpp"

namespace skfnav {

namespace {

const std::set<std::string>& axis_names() {
  static const std::set<std::string> names = {"q_x", "q_p", "r", "A", "B", "C", "delta"};
  return names;
}

std::string short_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::size_t SweepGrid::cell_count() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

void SweepGrid::validate() const {
  if (axes.empty()) throw ConfigError("sweep needs at least one axis");
  if (replications < 1) throw ConfigError("replications must be >= 1");
  std::set<std::string> seen;
  for (const auto& a : axes) {
    if (!axis_names().count(a.name)) throw ConfigError("unknown sweep axis '" + a.name + "'");
    if (!seen.insert(a.name).second) throw ConfigError("duplicate sweep axis '" + a.name + "'");
    if (a.values.empty()) throw ConfigError("sweep axis '" + a.name + "' is empty");
  }
  if (q_x_over_r && seen.count("q_x")) {
    throw ConfigError("q_x cannot be both an axis and tied to r");
  }
  if (!base.is_object()) throw ConfigError("sweep base config must be an object");
}

SweepGrid sweep_grid_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir) {
  io::check_keys(j, {"sweep_id", "base", "base_config", "axes", "replications", "seed",
                     "q_x_over_r", "count_yellow", "branches", "description"},
                 "sweep config");
  SweepGrid g;
  g.base_dir = base_dir;
  try {
    g.id = j.value("sweep_id", g.id);
    if (j.contains("base") == j.contains("base_config")) {
      throw ConfigError("sweep needs exactly one of 'base' or 'base_config'");
    }
    if (j.contains("base")) {
      g.base = j.at("base");
    } else {
      std::filesystem::path p = j.at("base_config").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      g.base = io::read_json_file(p);
      g.base_dir = p.parent_path();
    }
    if (!j.contains("axes") || !j.at("axes").is_object()) {
      throw ConfigError("sweep needs an 'axes' object");
    }
    for (const auto& item : j.at("axes").items()) {
      g.axes.push_back({item.key(), item.value().get<std::vector<double>>()});
    }
    g.replications = j.value("replications", g.replications);
    g.seed = j.value("seed", g.seed);
    if (j.contains("q_x_over_r")) g.q_x_over_r = j.at("q_x_over_r").get<double>();
    g.count_yellow = j.value("count_yellow", g.count_yellow);
    if (j.contains("branches")) g.branches = j.at("branches").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed sweep config: ") + e.what());
  }
  g.validate();
  return g;
}

SweepGrid load_sweep_grid(const std::filesystem::path& path) {
  return sweep_grid_from_json(io::read_json_file(path), path.parent_path());
}

std::vector<SweepCell> expand(const SweepGrid& grid) {
  grid.validate();
  std::vector<SweepCell> cells;
  const std::size_t n = grid.cell_count();
  cells.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    nlohmann::json j = grid.base;
    std::size_t rest = c;
    std::vector<double> values(grid.axes.size());
    for (std::size_t a = grid.axes.size(); a-- > 0;) {
      const auto& axis = grid.axes[a];
      values[a] = axis.values[rest % axis.values.size()];
      rest /= axis.values.size();
    }
    std::string name = grid.id + "[";
    for (std::size_t a = 0; a < grid.axes.size(); ++a) {
      const std::string& key = grid.axes[a].name;
      const double v = values[a];
      if (key == "A" || key == "B" || key == "C") {
        if (!j.contains("bias")) j["bias"] = nlohmann::json::object();
        j["bias"][key] = v;
        j["bias"]["kind"] = "quadratic";
      } else if (key == "delta") {
        j["delta"] = static_cast<int>(v);
      } else {
        j[key] = v;
      }
      name += (a ? ";" : "") + key + "=" + short_double(v);
    }
    name += "]";
    if (grid.q_x_over_r) j["q_x"] = *grid.q_x_over_r * j.value("r", 0.0);
    if (grid.branches) j["branches"] = *grid.branches;
    j["name"] = name;
    cells.push_back({values, case_config_from_json(j, grid.base_dir, name)});
  }
  return cells;
}

unsigned worker_threads(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SKFNAV_THREADS")) {
    char* end = nullptr;
    const long requested = std::strtol(env, &end, 10);
    if (end != env && requested >= 1) n = static_cast<unsigned>(requested);
  }
  return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(n, jobs)));
}

std::vector<RunRecord> run_parallel(
    const std::vector<std::pair<CaseConfig, std::uint64_t>>& jobs) {
  std::vector<RunRecord> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        out[i] = run_case(jobs[i].first, jobs[i].second).record;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n = worker_threads(jobs.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

SweepResult run_sweep(const SweepGrid& grid, std::optional<std::uint64_t> seed_override) {
  const std::uint64_t base_seed = seed_override.value_or(grid.seed);
  std::vector<std::pair<CaseConfig, std::uint64_t>> jobs;
  for (auto& cell : expand(grid)) {
    const std::uint64_t cell_seed = io::mix_seed(base_seed, io::fnv1a(cell.config.name));
    for (int rep = 0; rep < grid.replications; ++rep) {
      jobs.emplace_back(cell.config, io::mix_seed(cell_seed, static_cast<std::uint64_t>(rep)));
    }
  }
  SweepResult result;
  result.records = run_parallel(jobs);
  sort_records(result.records);
  std::vector<std::string> axes;
  for (const auto& a : grid.axes) axes.push_back(a.name);
  result.aggregates = aggregate(result.records, axes, grid.count_yellow);
  return result;
}

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(),
                              [](double v) { return !std::isfinite(v); }),
               values.end());
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records,
                                    const std::vector<std::string>& axes,
                                    bool count_yellow) {
  std::vector<AggregateRow> rows;
  if (records.empty()) return rows;
  const std::size_t n_states = records.front().state_names.size();
  const bool has_qp = std::find(axes.begin(), axes.end(), "q_p") != axes.end();
  std::set<double> qps;
  for (const auto& r : records) qps.insert(r.q_p);

  auto fold = [&](const std::string& axis, double value, std::optional<double> qp) {
    AggregateRow row;
    row.axis = axis;
    row.value = value;
    row.q_p = qp;
    std::vector<std::vector<double>> per_state(n_states);
    for (const auto& r : records) {
      if (r.axis_value(axis) != value) continue;
      if (qp && r.q_p != *qp) continue;
      ++row.count;
      if (r.success(count_yellow)) ++row.successes;
      if (!r.ok) continue;
      for (std::size_t s = 0; s < n_states && s < r.rmse.size(); ++s) {
        per_state[s].push_back(r.rmse[s]);
      }
    }
    for (const auto& r : records) {
      if (r.axis_value(axis) == value && (!qp || r.q_p == *qp) && !r.ok) ++row.failed;
    }
    row.success_rate =
        row.count ? static_cast<double>(row.successes) / static_cast<double>(row.count) : 0.0;
    for (auto& v : per_state) row.median_rmse.push_back(median(std::move(v)));
    return row;
  };

  for (const auto& axis : axes) {
    std::set<double> values;
    for (const auto& r : records) values.insert(r.axis_value(axis));
    for (double v : values) {
      rows.push_back(fold(axis, v, std::nullopt));
      if (has_qp && axis != "q_p") {
        for (double qp : qps) rows.push_back(fold(axis, v, qp));
      }
    }
  }
  return rows;
}

std::string aggregates_csv(const std::vector<AggregateRow>& rows,
                           const std::vector<std::string>& state_names) {
  std::vector<std::string> header = {"axis", "value", "q_p", "count", "successes",
                                     "failed", "success_rate"};
  for (const auto& n : state_names) header.push_back("median_rmse_" + n);
  std::ostringstream out;
  out << io::join(header) << '\n';
  for (const auto& r : rows) {
    std::vector<std::string> row = {r.axis,
                                    io::format_double(r.value),
                                    r.q_p ? io::format_double(*r.q_p) : "all",
                                    std::to_string(r.count),
                                    std::to_string(r.successes),
                                    std::to_string(r.failed),
                                    io::format_double(r.success_rate)};
    for (double v : r.median_rmse) row.push_back(io::format_double(v));
    out << io::join(row) << '\n';
  }
  return out.str();
}

Suite load_suite(const std::filesystem::path& path) {
  const nlohmann::json j = io::read_json_file(path);
  io::check_keys(j, {"suite_id", "cases", "select", "replications", "description"},
                 "suite config");
  Suite s;
  try {
    s.id = j.value("suite_id", path.stem().string());
    s.select = j.value("select", s.select);
    s.replications = j.value("replications", s.replications);
    if (s.replications < 1) throw ConfigError("replications must be >= 1");
    if (!j.contains("cases") || !j.at("cases").is_array() || j.at("cases").empty()) {
      throw ConfigError("suite needs a non-empty 'cases' list");
    }
    for (const auto& c : j.at("cases")) {
      std::filesystem::path p = c.get<std::string>();
      if (p.is_relative()) p = path.parent_path() / p;
      s.cases.push_back(load_case_config(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed suite config: ") + e.what());
  }
  return s;
}

std::vector<RunRecord> run_suite(const Suite& suite,
                                 std::optional<std::uint64_t> seed_override,
                                 std::optional<int> branches) {
  std::vector<std::pair<CaseConfig, std::uint64_t>> jobs;
  for (CaseConfig c : suite.cases) {
    if (branches) c.branches = *branches;
    const std::uint64_t seed = seed_override.value_or(c.seed());
    for (int rep = 0; rep < suite.replications; ++rep) {
      jobs.emplace_back(c, rep == 0 ? seed
                                    : io::mix_seed(seed, static_cast<std::uint64_t>(rep)));
    }
  }
  return run_parallel(jobs);
}

// ---------------------------------------------------------------- report

namespace {

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
}

}  // namespace

std::vector<std::pair<std::string, nlohmann::json>> plot_documents(
    const std::vector<AggregateRow>& rows, const std::vector<std::string>& axes,
    const std::vector<std::string>& state_names) {
  std::vector<std::pair<std::string, nlohmann::json>> docs;
  for (const auto& axis : axes) {
    std::vector<double> xs;
    std::vector<const AggregateRow*> pooled;
    std::set<double> qps;
    for (const auto& r : rows) {
      if (r.axis != axis) continue;
      if (r.q_p) {
        qps.insert(*r.q_p);
      } else {
        xs.push_back(r.value);
        pooled.push_back(&r);
      }
    }
    if (xs.empty()) continue;

    nlohmann::json success = {{"kind", "success_rate"}, {"axis", axis}, {"x", xs}};
    success["series"] = nlohmann::json::array();
    nlohmann::json all_y = nlohmann::json::array();
    for (const auto* r : pooled) all_y.push_back(r->success_rate);
    success["series"].push_back({{"label", "all"}, {"y", all_y}});
    for (double qp : qps) {
      nlohmann::json y = nlohmann::json::array();
      for (double x : xs) {
        double v = std::numeric_limits<double>::quiet_NaN();
        for (const auto& r : rows) {
          if (r.axis == axis && r.q_p && *r.q_p == qp && r.value == x) v = r.success_rate;
        }
        y.push_back(number_or_null(v));
      }
      success["series"].push_back(
          {{"label", "q_p=" + short_double(qp)}, {"q_p", qp}, {"y", y}});
    }
    docs.emplace_back("success_" + axis + ".json", success);

    nlohmann::json rmse_doc = {{"kind", "median_rmse"}, {"axis", axis}, {"x", xs}};
    rmse_doc["series"] = nlohmann::json::array();
    for (std::size_t s = 0; s < state_names.size(); ++s) {
      nlohmann::json y = nlohmann::json::array();
      for (const auto* r : pooled) {
        y.push_back(number_or_null(s < r->median_rmse.size()
                                       ? r->median_rmse[s]
                                       : std::numeric_limits<double>::quiet_NaN()));
      }
      rmse_doc["series"].push_back({{"label", state_names[s]}, {"y", y}});
    }
    docs.emplace_back("rmse_" + axis + ".json", rmse_doc);
  }
  return docs;
}

std::string validate_plot_json(const nlohmann::json& doc) {
  if (!doc.is_object()) return "document is not an object";
  for (const auto& item : doc.items()) {
    if (item.key() != "kind" && item.key() != "axis" && item.key() != "x" &&
        item.key() != "series") {
      return "unexpected key '" + item.key() + "'";
    }
  }
  if (!doc.contains("kind") || !doc["kind"].is_string()) return "missing kind";
  const std::string kind = doc["kind"];
  if (kind != "success_rate" && kind != "median_rmse") return "unknown kind '" + kind + "'";
  if (!doc.contains("axis") || !doc["axis"].is_string()) return "missing axis";
  if (!doc.contains("x") || !doc["x"].is_array() || doc["x"].empty()) return "missing x";
  for (const auto& x : doc["x"]) {
    if (!x.is_number()) return "x holds a non-number";
  }
  if (!doc.contains("series") || !doc["series"].is_array() || doc["series"].empty()) {
    return "missing series";
  }
  for (const auto& s : doc["series"]) {
    if (!s.is_object()) return "series entry is not an object";
    if (!s.contains("label") || !s["label"].is_string()) return "series without label";
    if (!s.contains("y") || !s["y"].is_array()) return "series without y";
    if (s["y"].size() != doc["x"].size()) return "series length differs from x";
    for (const auto& y : s["y"]) {
      if (!y.is_number() && !y.is_null()) return "y holds a non-number";
      if (kind == "success_rate" && y.is_number() &&
          (y.get<double>() < 0.0 || y.get<double>() > 1.0)) {
        return "success rate outside [0, 1]";
      }
    }
  }
  return "";
}

std::string report_table(const std::vector<RunRecord>& records, const std::string& select) {
  std::vector<const RunRecord*> chosen;
  for (const auto& r : records) {
    if (r.name.find(select) != std::string::npos) chosen.push_back(&r);
  }
  if (chosen.empty()) throw ConfigError("report selection '" + select + "' matched no runs");
  const ScenarioKind kind = chosen.front()->scenario;
  std::ostringstream out;
  auto rm = [](const RunRecord& r, std::size_t i) {
    return i < r.rmse.size() ? io::format_double(r.rmse[i]) : std::string("nan");
  };
  auto opt = [](const std::optional<double>& v) {
    return v ? io::format_double(*v) : std::string("none");
  };
  if (kind == ScenarioKind::Balloon) {
    out << "test,r,q_x,q_p,delta,A,B,C,true_switch,estimated_switch,rmse_lat,rmse_lon,"
           "outcome\n";
  } else {
    out << "test,A,B,C,q_x,q_p,r,estimated_switch,rmse_h,rmse_L,rmse_lambda,rmse_v,"
           "rmse_gamma,rmse_alpha,outcome\n";
  }
  for (const auto* p : chosen) {
    const RunRecord& r = *p;
    if (r.scenario != kind) throw ContractError("report mixes scenarios");
    std::vector<std::string> row;
    if (kind == ScenarioKind::Balloon) {
      row = {r.name,
             io::format_double(r.r),
             io::format_double(r.q_x),
             io::format_double(r.q_p),
             std::to_string(r.delta),
             io::format_double(r.bias.A),
             io::format_double(r.bias.B),
             io::format_double(r.bias.C),
             opt(r.true_switch),
             opt(r.estimated_switch),
             rm(r, 1),
             rm(r, 0),
             to_string(r.outcome)};
    } else {
      row = {r.name,
             io::format_double(r.bias.A),
             io::format_double(r.bias.B),
             io::format_double(r.bias.C),
             io::format_double(r.q_x),
             io::format_double(r.q_p),
             io::format_double(r.r),
             opt(r.estimated_switch)};
      for (std::size_t i = 0; i < 6; ++i) row.push_back(rm(r, i));
      row.push_back(to_string(r.outcome));
    }
    out << io::join(row) << '\n';
  }
  return out.str();
}

void write_outputs(const std::filesystem::path& dir, const nlohmann::json& config_echo,
                   const std::vector<RunRecord>& records,
                   const std::vector<AggregateRow>& aggregates,
                   const std::vector<std::string>& axes) {
  const std::vector<std::string> names =
      records.empty() ? std::vector<std::string>{} : records.front().state_names;
  io::write_text_file(dir / "records.csv", records_csv(records));
  io::write_text_file(dir / "timings.csv", timings_csv(records));
  io::write_text_file(dir / "aggregates.csv", aggregates_csv(aggregates, names));
  for (const auto& [file, doc] : plot_documents(aggregates, axes, names)) {
    const std::string problem = validate_plot_json(doc);
    if (!problem.empty()) throw ContractError("plot " + file + ": " + problem);
    io::write_text_file(dir / "plots" / file, doc.dump(2) + "\n");
  }
  io::write_text_file(dir / "config.json", config_echo.dump(2) + "\n");
  io::write_text_file(dir / "config_hash.txt", io::fnv1a_hex(config_echo.dump()) + "\n");
}

}  // namespace skfnav
