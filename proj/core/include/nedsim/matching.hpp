#pragma once

#include <map>
#include <utility>
#include <vector>

namespace nedsim::matching {

// Sparse bipartite instance; absent edge = infeasible pair.
struct BipartiteInstance {
    std::map<std::pair<int, int>, double> weights;  // (left id, right id) -> w >= 0

    void add(int left, int right, double w) { weights[{left, right}] = w; }
};

struct Matching {
    std::vector<std::pair<int, int>> pairs;  // sorted by (left, right)
    double total_weight = 0.0;
};

// Exact maximum-weight matching (not necessarily perfect; leaving nodes
// unmatched is allowed since weights are nonnegative). Deterministic:
// ties during the search resolve toward lower ids.
Matching max_weight_matching(const BipartiteInstance& inst);

}  // namespace nedsim::matching
