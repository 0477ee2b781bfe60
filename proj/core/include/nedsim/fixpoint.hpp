#pragma once

#include <cstdint>
#include <vector>

#include "nedsim/fluid.hpp"
#include "nedsim/packing.hpp"
#include "nedsim/rng.hpp"
#include "nedsim/types.hpp"

namespace nedsim::fixpoint {

struct FixpointConfig {
    int n_snapshot_samples = 1000;
    double damping = 0.5;   // gamma in (0, 1]
    double tol = 1e-3;      // inf-norm convergence tolerance on q
    int max_iter = 50;
    std::uint64_t seed = 0;
    int jobs = 1;

    void validate() const;
};

struct FixpointIteration {
    NotificationProfile q;        // belief at the start of the iteration
    double r0 = 0.0;
    double d0 = 0.0;
    NotificationProfile q_emp;    // q' measured by the snapshot simulation
    double gap = 0.0;             // inf-norm(q' - q)
};

struct FixpointTrace {
    std::vector<FixpointIteration> iterations;
    bool converged = false;
    NotificationProfile q_final;
    double r0_final = 0.0;
    double d0_final = 0.0;
};

// Returns ceil(x) with probability x - floor(x), else floor(x); E[...] = x.
int probabilistic_round(double x, Rng& rng);

struct SnapshotQ {
    NotificationProfile profile;
    std::int64_t rider_epochs = 0;  // total rider observations pooled
};

// Empirical notification profile of one packing epoch on sampled snapshots:
// each sample draws probabilistic_round(r0) riders / round(d0) drivers at
// standard-normal positions with homogeneous acceptance params.p, packs
// once, and records every rider's set size. Zero riders across all samples
// yields the degenerate profile q_0 = 1.
SnapshotQ snapshot_q(double r0, double d0, const packing::PackerFn& packer,
                     const valuation::Protocol& protocol, const MarketParams& params,
                     int n_samples, std::uint64_t seed, int jobs = 1);

// Damped fixed-point iteration coupling the closed-form fluid equilibrium
// with snapshot simulations:
//   (R_0, D_0) <- equilibrium(params, q_t); q' <- snapshot_q(R_0, D_0, ...);
//   q_{t+1} <- (1 - gamma) q_t + gamma q'.
// Stops when inf-norm(q' - q_t) <= tol or after max_iter iterations.
FixpointTrace find_equilibrium(const valuation::Protocol& protocol,
                               const MarketParams& params,
                               const packing::PackerFn& packer,
                               const FixpointConfig& cfg,
                               const NotificationProfile& q_init);

struct FrozenGraphScore {
    double avg_score = 0.0;        // mean realized score over all matches
    double matches_per_sample = 0.0;
};

// Post-convergence scoring pass: freezes snapshot samples at (r0, d0) and
// repeatedly packs + resolves responses on the fixed graph (no arrivals;
// riders renege between rounds with probability eta / mu, evaluated pairs
// never retried) until no viable edges remain.
FrozenGraphScore frozen_graph_score(double r0, double d0,
                                    const packing::PackerFn& packer,
                                    const valuation::Protocol& protocol,
                                    const MarketParams& params, int n_samples,
                                    std::uint64_t seed, int jobs = 1);

}  // namespace nedsim::fixpoint
