#pragma once

#include <cstdint>
#include <string>

#include "nedsim/types.hpp"

namespace nedsim {

// Proxy compatibility score w = 1 / (1 + dist(rider, driver)); in (0, 1].
double score(const Rider& rider, const Driver& driver);

// Samples a static spatial snapshot: positions i.i.d. 2-D normal with the
// given per-coordinate sigma, driver acceptance levels drawn from type_mix,
// arrival times all zero. Pairs farther apart than max_radius get no weight
// (max_radius <= 0 disables pruning). Deterministic given seed.
Scenario sample_scenario(int n_riders, int n_drivers, double sigma,
                         const TypeMix& type_mix, std::uint64_t seed,
                         double max_radius = 0.0);

// Loads a scenario from the two-file CSV trace format:
//   riders:  id,arrival_time_s,x,y
//   drivers: id,arrival_time_s,x,y,accept_prob
// Header row required. Weights are computed with `score` for every pair
// within max_radius (<= 0 means all pairs).
Scenario load_trace(const std::string& riders_csv_path,
                    const std::string& drivers_csv_path,
                    double max_radius = 0.0);

// Recomputes scenario.weights from positions (used after editing agents).
void recompute_weights(Scenario& scenario, double max_radius = 0.0);

}  // namespace nedsim
