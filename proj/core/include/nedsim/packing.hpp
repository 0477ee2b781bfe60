#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nedsim/matching.hpp"
#include "nedsim/rng.hpp"
#include "nedsim/types.hpp"
#include "nedsim/valuation.hpp"

namespace nedsim::packing {

// One dispatch cycle's view: waiting riders, idle drivers, the weight
// restriction, and the acceptance probabilities the optimizer is allowed to
// see (true p_d, homogeneous p-bar, or AR-GAP-scaled).
struct CycleSnapshot {
    std::vector<int> riders;
    std::vector<int> drivers;
    std::map<std::pair<int, int>, double> weights;
    std::map<int, double> probs;  // driver id -> optimizer-visible p_d
};

struct PackOptions {
    int component_cap = 24;        // max nodes (riders+drivers) per component for exact search
    bool fallback_greedy = false;  // solve oversized components greedily instead of erroring
    double rej_threshold = 0.8;    // Rejection-aware stop condition Rej(d) < rej_threshold
    int min_commit_size = 2;       // Rejection-aware commits a batch only if |set| >= this
};

// Exclusive dispatch: singleton sets from a maximum-weight matching on the
// snapshot weights.
NotificationPlan pack_ed(const CycleSnapshot& snap);

// Exact welfare maximization per connected component (branch and bound over
// per-ride candidate sets), subject to disjointness, |S_r| <= U and the
// theta-threshold filter. Degree-one drivers are losslessly pruned to the
// top-U per acceptance-probability class. Components larger than
// opts.component_cap throw unless opts.fallback_greedy is set.
NotificationPlan pack_opt(const CycleSnapshot& snap, const MarketParams& params,
                          const valuation::Protocol& protocol, Rng& rng,
                          const PackOptions& opts = {});

// Driver-sequential greedy: each driver (in seeded random order) goes to the
// ride with the highest marginal gain, committed iff the gain exceeds
// theta * p_d.
NotificationPlan pack_greedy(const CycleSnapshot& snap, const MarketParams& params,
                             const valuation::Protocol& protocol, Rng& rng);

// Ride-sequential heuristic: batch top-weight drivers until one with
// rejection likelihood below rej_threshold is included (or the batch hits U);
// batches of size >= 2 commit, everyone left goes through plain ED matching.
NotificationPlan pack_rejection_aware(const CycleSnapshot& snap,
                                      const MarketParams& params,
                                      const valuation::Protocol& protocol, Rng& rng,
                                      const PackOptions& opts = {});

// ED plus an optional second driver per matched ride when
// F({d*, d'}) >= F({d*}) + theta * p_{d'}.
NotificationPlan pack_ed_plus(const CycleSnapshot& snap, const MarketParams& params,
                              const valuation::Protocol& protocol, Rng& rng);

using PackerFn = std::function<NotificationPlan(
    const CycleSnapshot&, const MarketParams&, const valuation::Protocol&, Rng&)>;

// Packer registry for the CLI / experiment harness. Known names:
// "ed", "opt", "greedy", "rejection_aware", "ed_plus". The "opt" packer is
// configured with per-component greedy fallback for oversized components.
PackerFn make_packer(const std::string& name, const PackOptions& opts = {});

}  // namespace nedsim::packing
