#include "nedsim/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "nedsim/error.hpp"

namespace nedsim::matching {

namespace {

// Row-by-row shortest-augmenting-path assignment with potentials (square
// cost matrix, minimization, every row assigned). Ties resolve toward the
// lowest column index. Returns row -> column.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = int(cost.size());
    const int m = n == 0 ? 0 : int(cost[0].size());
    constexpr double kInf = std::numeric_limits<double>::infinity();

    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

}  // namespace

Matching max_weight_matching(const BipartiteInstance& inst) {
    Matching out;
    if (inst.weights.empty()) return out;

    std::vector<int> lefts, rights;
    for (const auto& [key, w] : inst.weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw Error("matching", "max_weight_matching",
                        "weights must be finite and >= 0");
        lefts.push_back(key.first);
        rights.push_back(key.second);
    }
    auto dedupe = [](std::vector<int>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    dedupe(lefts);
    dedupe(rights);

    const int nl = int(lefts.size());
    const int nr = int(rights.size());
    // Columns: the real right nodes, then one private "stay unmatched" dummy
    // per row. Absent edges cost 0 like a dummy; they are filtered from the
    // output, so an optimum routed through one is still reported unmatched.
    const int nc = nr + nl;
    std::vector<std::vector<double>> cost(nl, std::vector<double>(nc, 0.0));
    for (const auto& [key, w] : inst.weights) {
        const int i = int(std::lower_bound(lefts.begin(), lefts.end(), key.first) - lefts.begin());
        const int j = int(std::lower_bound(rights.begin(), rights.end(), key.second) - rights.begin());
        cost[i][j] = -w;
    }

    const auto row_to_col = solve_assignment(cost);
    for (int i = 0; i < nl; ++i) {
        const int j = row_to_col[i];
        if (j < 0 || j >= nr) continue;
        const auto it = inst.weights.find({lefts[i], rights[j]});
        if (it == inst.weights.end()) continue;  // routed through an absent edge
        out.pairs.emplace_back(lefts[i], rights[j]);
    }
    std::sort(out.pairs.begin(), out.pairs.end());
    for (const auto& pr : out.pairs) out.total_weight += inst.weights.at(pr);
    return out;
}

}  // namespace nedsim::matching
