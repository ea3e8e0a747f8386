#pragma once

#include <vector>

#include "geoflow/flow.hpp"
#include "geoflow/solver.hpp"

namespace geoflow {

// x -> -x on the torus
std::vector<int> reflection_map(const DomainGrid& g);
// x -> x + shift along axis 0
std::vector<int> translation_map(const DomainGrid& g, int shift);

// identity -> reflection
GeodesicProblem reflection_problem(const DomainGrid& g);
// identity -> translation by half the domain
GeodesicProblem translation_problem(const DomainGrid& g);

// Cube, K = 1: every label keeps half its mass and sends half to the neighbour across axis 0.
PathMeasure half_swap_flow(int d, int n);

}  // namespace geoflow
