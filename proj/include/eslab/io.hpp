#ifndef ESLAB_IO_HPP
#define ESLAB_IO_HPP

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eslab/density.hpp"
#include "eslab/thermo.hpp"
#include "eslab/transport.hpp"
#include "eslab/verify.hpp"

namespace eslab {

using Json = nlohmann::json;

// Particle ensembles: CSV with columns theta_1..theta_d, weight.
std::string particles_to_csv(const ParticleEnsemble& e);
ParticleEnsemble particles_from_csv(const std::string& text);

// Grids: a JSON header (domain, cells) plus row-major CSV values.
Json grid_header_to_json(const GridDensity& g);
std::string grid_values_to_csv(const GridDensity& g);
GridDensity grid_from_parts(const Json& header, const std::string& values_csv);

Json gaussian_to_json(const GaussianDensity& g);
GaussianDensity gaussian_from_json(const Json& j);

// Loads a density file: .csv -> particles; .json with "mean" -> Gaussian;
// .json with "domain" -> grid (values in the sibling .csv).
DensityState load_density(const std::string& path);

// Writes a density; returns the file paths written (grids produce two files).
std::vector<std::string> write_density(const std::string& path_base, const DensityState& q);

// Trajectory CSV: one row (s, F, H, E_phi, sigma) per snapshot.
std::string trajectory_to_csv(const TrajectoryRecord& traj);

Json ledger_to_json(const DissipationLedger& ledger);
Json report_to_json(const EslReport& report);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);
std::string plan_to_csv(const TransportPlan& plan);

Json scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const Json& j);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace eslab

#endif
