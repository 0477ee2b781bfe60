#pragma once

#include <string>
#include <vector>

#include "nedsim/types.hpp"
#include "nedsim/valuation.hpp"

namespace nedsim {

enum class ViolationKind { disjointness, cardinality, threshold };

struct Violation {
    ViolationKind kind;
    int rider_id = -1;
    int driver_id = -1;
    std::string detail;
};

// Checks the packing constraints on a plan: pairwise-disjoint sets,
// |S_r| <= U, and the marginal-efficiency condition
// F_r(S_r) - F_r(S_r \ {d}) >= theta * p_d under the given protocol.
// Unknown rider/driver ids throw; constraint failures are returned.
std::vector<Violation> validate_plan(const NotificationPlan& plan,
                                     const Scenario& scenario,
                                     const MarketParams& params,
                                     const valuation::Protocol& protocol);

}  // namespace nedsim
