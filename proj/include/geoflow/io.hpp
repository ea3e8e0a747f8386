#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "geoflow/approx.hpp"
#include "geoflow/eulerian.hpp"
#include "geoflow/flow.hpp"
#include "geoflow/solver.hpp"
#include "json.hpp"

namespace geoflow {

using json = nlohmann::ordered_json;

// Malformed or inconsistent input files.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string read_text(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, const std::string& s);
json read_json(const std::filesystem::path& p);
void write_json(const std::filesystem::path& p, const json& j);
std::string fnv1a_hex(const std::string& bytes);

json grid_to_json(const DomainGrid& g);
DomainGrid grid_from_json(const json& j);

json flow_to_json(const PathMeasure& eta);
PathMeasure flow_from_json(const json& j);

// {grid, matrix: [[...], ...]} with rows = labels
json plan_to_json(const DomainGrid& g, const TransportPlan& p);
TransportPlan plan_from_json(const json& j, DomainGrid* grid = nullptr);

// k, i0[, i1], value
std::string pressure_to_csv(const DomainGrid& g, const PressureField& p);
PressureField pressure_from_csv(const DomainGrid& g, const std::string& text);
std::string density_to_csv(const DomainGrid& g, const DensityField& rho);

json euler_to_json(const EulerianFlow& ef);
EulerianFlow euler_from_json(const json& j);

json maps_to_json(const MPMapFlow& f);
MPMapFlow maps_from_json(const json& j);

// Problem file. Plan references are resolved against base_dir.
GeodesicProblem problem_from_json(const json& j, const std::filesystem::path& base_dir);
json diagnostics_to_json(const GeodesicSolution& s);

}  // namespace geoflow
