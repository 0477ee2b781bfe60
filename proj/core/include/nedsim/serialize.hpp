#pragma once

#include <string>
#include <vector>

#include "nedsim/fixpoint.hpp"
#include "nedsim/fluid.hpp"
#include "nedsim/sim.hpp"

namespace nedsim::serialize {

// Deterministic "%.17g"-style formatting; round-trips doubles exactly.
std::string format_double(double v);

// Per-ride CSV: rider_id,outcome,match_time_s,driver_id,score
std::string per_ride_csv(const sim::SimResult& result);

// One SimResult as a JSON document (avg_score, avg_match_time_s,
// match_count, q_profile, per_ride).
std::string sim_result_json(const sim::SimResult& result);

// Aggregate of a Monte-Carlo batch: mean/std per metric plus per-instance rows.
std::string monte_carlo_json(const sim::MonteCarloResult& mc);
std::string instances_csv(const sim::MonteCarloResult& mc);

// Equilibrium + absorption output: r0, r[], a[], d0, d[], match_prob[],
// cond_match_time[], residual_inf.
std::string fluid_json(const fluid::FluidState& state,
                       const fluid::AbsorptionMetrics& metrics,
                       double residual_inf);

std::string fixpoint_trace_json(const fixpoint::FixpointTrace& trace);
// CSV rows: iter,q0..qU,R0,D0,gap
std::string fixpoint_trace_csv(const fixpoint::FixpointTrace& trace);

}  // namespace nedsim::serialize
