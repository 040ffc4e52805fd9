#include "eslab/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "eslab/common.hpp"

namespace eslab {

namespace {

std::vector<double> parse_csv_row(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    out.push_back(std::stod(field));
  }
  return out;
}

Json tolerances_to_json(const Tolerances& t) {
  return Json{{"esl_closed_form", t.esl_closed_form},
              {"esl_grid", t.esl_grid},
              {"dissipation_closed_form", t.dissipation_closed_form},
              {"dissipation_grid", t.dissipation_grid},
              {"tightness_closed_form", t.tightness_closed_form},
              {"tightness_grid", t.tightness_grid},
              {"scaling_closed_form", t.scaling_closed_form},
              {"scaling_grid", t.scaling_grid}};
}

Tolerances tolerances_from_json(const Json& j) {
  Tolerances t;
  t.esl_closed_form = j.value("esl_closed_form", t.esl_closed_form);
  t.esl_grid = j.value("esl_grid", t.esl_grid);
  t.dissipation_closed_form = j.value("dissipation_closed_form", t.dissipation_closed_form);
  t.dissipation_grid = j.value("dissipation_grid", t.dissipation_grid);
  t.tightness_closed_form = j.value("tightness_closed_form", t.tightness_closed_form);
  t.tightness_grid = j.value("tightness_grid", t.tightness_grid);
  t.scaling_closed_form = j.value("scaling_closed_form", t.scaling_closed_form);
  t.scaling_grid = j.value("scaling_grid", t.scaling_grid);
  return t;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<long>(i)] = j[i].get<double>();
  return v;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (long i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    out.push_back(row);
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  const long rows = static_cast<long>(j.size());
  if (rows == 0) throw InputError("config: empty matrix");
  const long cols = static_cast<long>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    if (static_cast<long>(j[static_cast<std::size_t>(i)].size()) != cols) {
      throw InputError("config: ragged matrix");
    }
    for (long c = 0; c < cols; ++c) {
      m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

Json potential_to_json(const Potential& p) {
  Json out;
  out["kind"] = p.kind_name();
  out["dim"] = p.dim();
  switch (p.kind()) {
    case PotentialKind::Quadratic:
      out["k"] = p.stiffness();
      break;
    case PotentialKind::DoubleWell:
      out["a"] = p.well_location();
      break;
    case PotentialKind::GaussianMixtureWell: {
      out["kappa"] = p.kappa();
      Json bumps = Json::array();
      for (const auto& b : p.bumps()) {
        bumps.push_back(Json{{"w", b.weight}, {"c", vector_to_json(b.center)}, {"rho", b.rho}});
      }
      out["bumps"] = bumps;
      break;
    }
  }
  return out;
}

Potential potential_from_json(const Json& j) {
  if (!j.contains("kind")) throw InputError("config: potential needs a 'kind'");
  const std::string kind = j["kind"].get<std::string>();
  const int dim = j.value("dim", 1);
  if (kind == "quadratic") {
    if (!j.contains("k")) throw InputError("config: quadratic potential needs 'k'");
    return Potential::quadratic(dim, j["k"].get<double>());
  }
  if (kind == "double_well") {
    if (!j.contains("a")) throw InputError("config: double_well potential needs 'a'");
    return Potential::double_well(dim, j["a"].get<double>());
  }
  if (kind == "gaussian_mixture_well") {
    if (!j.contains("kappa")) throw InputError("config: gaussian_mixture_well needs 'kappa'");
    std::vector<GaussianBump> bumps;
    for (const Json& b : j.value("bumps", Json::array())) {
      GaussianBump bump;
      if (!b.contains("w") || !b.contains("c") || !b.contains("rho")) {
        throw InputError("config: each bump needs 'w', 'c', 'rho'");
      }
      bump.weight = b["w"].get<double>();
      bump.center = vector_from_json(b["c"]);
      bump.rho = b["rho"].get<double>();
      bumps.push_back(std::move(bump));
    }
    return Potential::gaussian_mixture_well(dim, j["kappa"].get<double>(), std::move(bumps));
  }
  throw InputError("config: unknown potential kind '" + kind + "'");
}

}  // namespace

std::string particles_to_csv(const ParticleEnsemble& e) {
  std::string out;
  for (int a = 0; a < e.dim(); ++a) {
    out += "theta_" + std::to_string(a + 1) + ",";
  }
  out += "weight\n";
  for (long i = 0; i < e.count(); ++i) {
    for (int a = 0; a < e.dim(); ++a) {
      out += fmt_double(e.positions(i, a)) + ",";
    }
    out += fmt_double(e.weights[i]) + "\n";
  }
  return out;
}

ParticleEnsemble particles_from_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw InputError("particles: empty CSV");
  std::vector<std::vector<double>> rows;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_csv_row(line));
  }
  if (rows.size() < 2) throw InputError("particles: need at least 2 rows");
  const std::size_t cols = rows.front().size();
  if (cols < 2) throw InputError("particles: need theta columns and a weight column");
  ParticleEnsemble e;
  e.positions.resize(static_cast<long>(rows.size()), static_cast<long>(cols) - 1);
  e.weights.resize(static_cast<long>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw InputError("particles: ragged CSV");
    for (std::size_t a = 0; a + 1 < cols; ++a) {
      e.positions(static_cast<long>(i), static_cast<long>(a)) = rows[i][a];
    }
    e.weights[static_cast<long>(i)] = rows[i][cols - 1];
  }
  e.validate();
  return e;
}

Json grid_header_to_json(const GridDensity& g) {
  Json domain = Json::array();
  for (const auto& [lo, hi] : g.domain) domain.push_back(Json::array({lo, hi}));
  Json cells = Json::array();
  for (long c : g.cells) cells.push_back(c);
  return Json{{"domain", domain}, {"cells", cells}, {"cell_volume", g.cell_volume}};
}

std::string grid_values_to_csv(const GridDensity& g) {
  std::string out;
  if (g.dim() == 1) {
    for (long i = 0; i < g.values.size(); ++i) out += fmt_double(g.values[i]) + "\n";
    return out;
  }
  const long nx = g.cells[0];
  const long ny = g.cells[1];
  for (long iy = 0; iy < ny; ++iy) {
    for (long ix = 0; ix < nx; ++ix) {
      out += fmt_double(g.values[iy * nx + ix]);
      out += (ix + 1 == nx) ? "\n" : ",";
    }
  }
  return out;
}

GridDensity grid_from_parts(const Json& header, const std::string& values_csv) {
  std::vector<std::pair<double, double>> domain;
  for (const Json& axis : header.at("domain")) {
    domain.emplace_back(axis.at(0).get<double>(), axis.at(1).get<double>());
  }
  std::vector<long> cells;
  for (const Json& c : header.at("cells")) cells.push_back(c.get<long>());
  GridDensity g = GridDensity::zeros(std::move(domain), std::move(cells));
  std::stringstream ss(values_csv);
  std::string line;
  long flat = 0;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    for (double v : parse_csv_row(line)) {
      if (flat >= g.values.size()) throw InputError("grid: more values than cells");
      g.values[flat++] = v;
    }
  }
  if (flat != g.values.size()) throw InputError("grid: value count does not match cells");
  g.validate();
  return g;
}

Json gaussian_to_json(const GaussianDensity& g) {
  return Json{{"mean", vector_to_json(g.mean)}, {"covariance", matrix_to_json(g.covariance)}};
}

GaussianDensity gaussian_from_json(const Json& j) {
  GaussianDensity g;
  g.mean = vector_from_json(j.at("mean"));
  g.covariance = matrix_from_json(j.at("covariance"));
  g.validate();
  return g;
}

DensityState load_density(const std::string& path) {
  const std::string text = read_file(path);
  if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
    return particles_from_csv(text);
  }
  Json j = Json::parse(text);
  if (j.contains("mean")) return gaussian_from_json(j);
  if (j.contains("domain")) {
    std::string values_path = path;
    values_path.replace(values_path.rfind(".json"), 5, ".csv");
    return grid_from_parts(j, read_file(values_path));
  }
  throw InputError("load_density: unrecognized density file " + path);
}

std::vector<std::string> write_density(const std::string& path_base, const DensityState& q) {
  if (const auto* e = std::get_if<ParticleEnsemble>(&q)) {
    const std::string path = path_base + ".csv";
    write_file(path, particles_to_csv(*e));
    return {path};
  }
  if (const auto* g = std::get_if<GridDensity>(&q)) {
    const std::string header = path_base + ".json";
    const std::string values = path_base + ".csv";
    write_file(header, grid_header_to_json(*g).dump(2) + "\n");
    write_file(values, grid_values_to_csv(*g));
    return {header, values};
  }
  const auto& g = std::get<GaussianDensity>(q);
  const std::string path = path_base + ".json";
  write_file(path, gaussian_to_json(g).dump(2) + "\n");
  return {path};
}

std::string trajectory_to_csv(const TrajectoryRecord& traj) {
  std::string out = "s,F,H,E_phi,sigma\n";
  for (std::size_t k = 0; k < traj.s.size(); ++k) {
    const ThermoReport r =
        free_energy(traj.snapshots[k], traj.potential, traj.temperature, traj.s[k]);
    const double sigma =
        traj.sigma.empty() ? std::numeric_limits<double>::quiet_NaN() : traj.sigma[k];
    out += fmt_double(traj.s[k]) + "," + fmt_double(r.free_energy) + "," + fmt_double(r.entropy) +
           "," + fmt_double(r.mean_objective) + "," + fmt_double(sigma) + "\n";
  }
  return out;
}

Json ledger_to_json(const DissipationLedger& ledger) {
  Json series = Json::array();
  for (const auto& [s, sigma] : ledger.sigma_series) {
    series.push_back(Json::array({s, sigma}));
  }
  return Json{{"sigma_series", series},
              {"Sigma", ledger.sigma_integral},
              {"F_drop", ledger.free_energy_drop},
              {"residual", ledger.residual},
              {"horizon", ledger.horizon}};
}

Json report_to_json(const EslReport& report) {
  Json rows = Json::array();
  for (const SweepRow& row : report.scaling_rows) {
    rows.push_back(Json{{"horizon", row.horizon},
                        {"Sigma_physical", row.sigma_physical},
                        {"Sigma_physical_x_horizon", row.sigma_physical_times_horizon},
                        {"W2_squared_over_horizon", row.w2_squared_over_horizon},
                        {"F_drop", row.f_drop},
                        {"pass", row.pass}});
  }
  return Json{{"scenario", report.scenario},
              {"T", report.temperature},
              {"horizon", report.horizon},
              {"Sigma", report.sigma_total},
              {"W2_squared", report.w2_squared},
              {"slack", report.slack},
              {"F_drop", report.f_drop},
              {"residual", report.dissipation_residual},
              {"objective_gap", report.objective_gap},
              {"entropy_term", report.entropy_term},
              {"backend", report.backend},
              {"tolerances", tolerances_to_json(report.tolerances)},
              {"seed", report.seed},
              {"pass",
               Json{{"dissipation", report.dissipation.pass},
                    {"esl", report.esl.pass},
                    {"objective", report.objective.pass},
                    {"scaling", report.scaling.pass},
                    {"tightness", report.tightness.pass}}},
              {"applicable",
               Json{{"dissipation", report.dissipation.applicable},
                    {"esl", report.esl.applicable},
                    {"objective", report.objective.applicable},
                    {"scaling", report.scaling.applicable},
                    {"tightness", report.tightness.applicable}}},
              {"scaling_rows", rows},
              {"notes", report.notes}};
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "horizon,Sigma_physical,Sigma_physical_x_horizon,W2_squared_over_horizon,F_drop,pass\n";
  for (const SweepRow& row : rows) {
    out += fmt_double(row.horizon) + "," + fmt_double(row.sigma_physical) + "," +
           fmt_double(row.sigma_physical_times_horizon) + "," +
           fmt_double(row.w2_squared_over_horizon) + "," + fmt_double(row.f_drop) + "," +
           (row.pass ? "1" : "0") + "\n";
  }
  return out;
}

std::string plan_to_csv(const TransportPlan& plan) {
  std::string out = "i,j,mass\n";
  for (long i = 0; i < plan.coupling.rows(); ++i) {
    for (long j = 0; j < plan.coupling.cols(); ++j) {
      if (plan.coupling(i, j) <= 1e-15) continue;
      out += std::to_string(i) + "," + std::to_string(j) + "," + fmt_double(plan.coupling(i, j)) +
             "\n";
    }
  }
  return out;
}

Json scenario_to_json(const ScenarioConfig& cfg) {
  Json j;
  j["name"] = cfg.name;
  j["carrier"] = carrier_name(cfg.carrier);
  j["potential"] = potential_to_json(cfg.potential);
  j["temperature"] = cfg.temperature;
  j["horizon"] = cfg.horizon;
  j["steps"] = cfg.steps;
  j["record_every"] = cfg.record_every;
  j["initial"] = Json{{"mean", vector_to_json(cfg.mean0)}, {"covariance", matrix_to_json(cfg.cov0)}};
  if (cfg.mean1.size() > 0) {
    j["target"] =
        Json{{"mean", vector_to_json(cfg.mean1)}, {"covariance", matrix_to_json(cfg.cov1)}};
  }
  if (!cfg.domain.empty()) {
    Json domain = Json::array();
    for (const auto& [lo, hi] : cfg.domain) domain.push_back(Json::array({lo, hi}));
    j["domain"] = domain;
    Json cells = Json::array();
    for (long c : cfg.cells) cells.push_back(c);
    j["cells"] = cells;
  }
  j["particles"] = cfg.particles;
  j["seed"] = cfg.seed;
  j["backend"] = cfg.backend;
  j["tolerances"] = tolerances_to_json(cfg.tolerances);
  j["workers"] = cfg.workers;
  j["flux"] = cfg.flux == FluxScheme::Upwind ? "upwind" : "exponential_fit";
  return j;
}

ScenarioConfig scenario_from_json(const Json& j) {
  ScenarioConfig cfg;
  cfg.name = j.value("name", std::string("custom"));
  cfg.carrier = carrier_from_name(j.value("carrier", std::string("gaussian")));
  if (j.contains("potential")) cfg.potential = potential_from_json(j["potential"]);
  cfg.temperature = j.value("temperature", 1.0);
  cfg.horizon = j.value("horizon", 1.0);
  cfg.steps = j.value("steps", 0L);
  cfg.record_every = j.value("record_every", 0L);
  if (j.contains("initial")) {
    cfg.mean0 = vector_from_json(j["initial"].at("mean"));
    cfg.cov0 = matrix_from_json(j["initial"].at("covariance"));
  }
  if (j.contains("target")) {
    cfg.mean1 = vector_from_json(j["target"].at("mean"));
    cfg.cov1 = matrix_from_json(j["target"].at("covariance"));
  }
  if (j.contains("domain")) {
    for (const Json& axis : j["domain"]) {
      cfg.domain.emplace_back(axis.at(0).get<double>(), axis.at(1).get<double>());
    }
    for (const Json& c : j.at("cells")) cfg.cells.push_back(c.get<long>());
  }
  cfg.particles = j.value("particles", 100000L);
  cfg.seed = j.value("seed", static_cast<std::uint64_t>(1));
  cfg.backend = j.value("backend", std::string("auto"));
  if (j.contains("tolerances")) cfg.tolerances = tolerances_from_json(j["tolerances"]);
  cfg.workers = j.value("workers", 1);
  const std::string flux = j.value("flux", std::string("exponential_fit"));
  if (flux == "upwind") {
    cfg.flux = FluxScheme::Upwind;
  } else if (flux == "exponential_fit") {
    cfg.flux = FluxScheme::ExponentialFit;
  } else {
    throw InputError("config: unknown flux scheme '" + flux + "'");
  }
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
}

}  // namespace eslab
