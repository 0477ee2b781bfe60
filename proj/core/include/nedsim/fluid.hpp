#pragma once

#include <cstdint>
#include <vector>

#include "nedsim/types.hpp"
#include "nedsim/valuation.hpp"

namespace nedsim::fluid {

// Steady-state masses of the macro model. For FA the accepted-state vector
// `a` is empty and d[l-1] = l * r[l-1]; for BA the couplings are
// A~_l = a[l-2] and D_l = sum_{j>=l} R_j + sum_{j>l} A_j.
struct FluidState {
    double r0 = 0.0;        // waiting riders R_0
    std::vector<double> r;  // R_1..R_U
    std::vector<double> a;  // A_2..A_U (BA only)
    double d0 = 0.0;        // idle drivers D_0
    std::vector<double> d;  // D_1..D_U
};

// Rider-lifecycle absorbing CTMC. States are ordered
//   FA: [R_0, R_1, ..., R_U]                     (m = U+1)
//   BA: [R_0, R_1, ..., R_U, A_U, ..., A_2]      (m = 2U)
// q_abs column 0 is reneging, column 1 is matching.
struct AbsorptionModel {
    int m = 0;
    std::vector<std::vector<double>> M;      // m x m transient rate matrix
    std::vector<std::vector<double>> q_abs;  // m x 2 absorption rates
    std::vector<std::string> state_names;
};

struct AbsorptionMetrics {
    std::vector<double> match_prob;        // per start state
    std::vector<double> renege_prob;       // per start state
    std::vector<double> cond_match_time;   // E[time | matched]; NaN where match_prob = 0
};

// LHS - RHS of every balance equation, evaluated at `state`:
// FA rows: rider l = 1..U, then the R_0 equation, then driver balance.
std::vector<double> fa_flow_residual(const MarketParams& params,
                                     const NotificationProfile& q,
                                     const FluidState& state);

// BA rows: rider l = 1..U, R_0 equation, accepted-state l = 2..U, driver balance.
std::vector<double> ba_flow_residual(const MarketParams& params,
                                     const NotificationProfile& q,
                                     const FluidState& state);

// Closed-form equilibria. Both throw on a degenerate no-absorption system,
// on eta_idle <= 0, and on supply-infeasible parameters (D_0 < 0).
FluidState fa_equilibrium(const MarketParams& params, const NotificationProfile& q);
FluidState ba_equilibrium(const MarketParams& params, const NotificationProfile& q);

// Independent oracle: assembles the protocol's flow equations as a dense
// linear system in the unknown masses and solves directly.
FluidState solve_flow_linear(const valuation::Protocol& protocol,
                             const MarketParams& params,
                             const NotificationProfile& q);

// Transient/absorption generator of the rider lifecycle CTMC.
AbsorptionModel build_generator(const valuation::Protocol& protocol,
                                const MarketParams& params,
                                const NotificationProfile& q);

// Fundamental-matrix metrics: N = -M^{-1}, P = N Q,
// cond_match_time_i = (N^2 Q)_{i,match} / (N Q)_{i,match}.
AbsorptionMetrics absorption_metrics(const AbsorptionModel& model);

}  // namespace nedsim::fluid
