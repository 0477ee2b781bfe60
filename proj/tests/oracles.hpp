// Independent test oracles: straight-from-definition enumerations kept
// deliberately separate from the library implementations they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "nedsim/fluid.hpp"
#include "nedsim/packing.hpp"
#include "nedsim/rng.hpp"
#include "nedsim/valuation.hpp"

namespace oracles {

using nedsim::valuation::Offer;
using nedsim::valuation::OfferSet;

// --- valuation -------------------------------------------------------------

inline double subset_prob(const std::vector<Offer>& e, unsigned mask) {
    double prob = 1.0;
    for (std::size_t i = 0; i < e.size(); ++i)
        prob *= (mask >> i) & 1u ? e[i].accept_prob : 1.0 - e[i].accept_prob;
    return prob;
}

inline double enum_fa(const OfferSet& s) {
    const auto& e = s.entries;
    double total = 0.0;
    for (unsigned mask = 1; mask < (1u << e.size()); ++mask) {
        double sum = 0.0;
        int cnt = 0;
        for (std::size_t i = 0; i < e.size(); ++i)
            if ((mask >> i) & 1u) {
                sum += e[i].weight;
                ++cnt;
            }
        total += subset_prob(e, mask) * sum / cnt;
    }
    return total;
}

inline double enum_ba(const OfferSet& s) {
    const auto& e = s.entries;
    double total = 0.0;
    for (unsigned mask = 1; mask < (1u << e.size()); ++mask) {
        double best = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i)
            if ((mask >> i) & 1u) best = std::max(best, e[i].weight);
        total += subset_prob(e, mask) * best;
    }
    return total;
}

// Average of max over all m-subsets, by direct combination enumeration.
inline double avg_max_of_subsets(const std::vector<double>& w, int m) {
    double total = 0.0;
    std::int64_t count = 0;
    std::vector<int> comb(m);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == m) {
            double best = 0.0;
            for (int idx : comb) best = std::max(best, w[idx]);
            total += best;
            ++count;
            return;
        }
        for (int i = start; i < int(w.size()); ++i) {
            comb[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return total / double(count);
}

inline double enum_k_accept(const OfferSet& s, int k) {
    const auto& e = s.entries;
    double total = 0.0;
    for (unsigned mask = 1; mask < (1u << e.size()); ++mask) {
        std::vector<double> w;
        for (std::size_t i = 0; i < e.size(); ++i)
            if ((mask >> i) & 1u) w.push_back(e[i].weight);
        total += subset_prob(e, mask) * avg_max_of_subsets(w, std::min<int>(k, int(w.size())));
    }
    return total;
}

inline OfferSet random_offer_set(nedsim::Rng& rng, int max_size = 6) {
    std::uniform_int_distribution<int> size_d(0, max_size);
    std::uniform_real_distribution<double> wd(0.0, 2.0), pd(0.0, 1.0);
    OfferSet s;
    const int n = size_d(rng);
    for (int i = 0; i < n; ++i) s.entries.push_back({wd(rng), pd(rng)});
    return s;
}

// --- matching --------------------------------------------------------------

// Maximum total weight over all matchings, by recursion over left nodes.
inline double brute_force_matching_value(
    const std::map<std::pair<int, int>, double>& weights) {
    std::vector<int> lefts, rights;
    for (const auto& [k, w] : weights) {
        lefts.push_back(k.first);
        rights.push_back(k.second);
    }
    auto dedupe = [](std::vector<int>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    dedupe(lefts);
    dedupe(rights);
    std::vector<bool> used(rights.size(), false);
    std::function<double(std::size_t)> rec = [&](std::size_t i) -> double {
        if (i == lefts.size()) return 0.0;
        double best = rec(i + 1);  // leave lefts[i] unmatched
        for (std::size_t j = 0; j < rights.size(); ++j) {
            if (used[j]) continue;
            auto it = weights.find({lefts[i], rights[j]});
            if (it == weights.end()) continue;
            used[j] = true;
            best = std::max(best, it->second + rec(i + 1));
            used[j] = false;
        }
        return best;
    };
    return rec(0);
}

// --- packing ---------------------------------------------------------------

// Exact welfare maximum by enumerating every driver -> (ride | none)
// assignment, honoring |S_r| <= U and the theta-threshold filter.
inline double brute_force_packing_value(const nedsim::packing::CycleSnapshot& snap,
                                        const nedsim::MarketParams& params,
                                        const nedsim::valuation::Protocol& protocol) {
    using nedsim::valuation::value;
    const auto& riders = snap.riders;
    const auto& drivers = snap.drivers;

    std::vector<std::vector<int>> assignment(riders.size());
    double best = 0.0;

    auto feasible_and_value = [&]() -> double {
        double total = 0.0;
        for (std::size_t r = 0; r < riders.size(); ++r) {
            const auto& set = assignment[r];
            if (int(set.size()) > params.cap_u) return -1.0;
            if (set.empty()) continue;
            OfferSet offers;
            for (int d : set)
                offers.entries.push_back({snap.weights.at({riders[r], d}), snap.probs.at(d)});
            const double full = value(protocol, offers);
            for (std::size_t i = 0; i < set.size(); ++i) {
                OfferSet without = offers;
                without.entries.erase(without.entries.begin() + long(i));
                if (full - value(protocol, without) < params.theta * snap.probs.at(set[i]))
                    return -1.0;
            }
            total += full;
        }
        return total;
    };

    std::function<void(std::size_t)> rec = [&](std::size_t di) {
        if (di == drivers.size()) {
            best = std::max(best, feasible_and_value());
            return;
        }
        rec(di + 1);  // driver unassigned
        for (std::size_t r = 0; r < riders.size(); ++r) {
            if (!snap.weights.count({riders[r], drivers[di]})) continue;
            assignment[r].push_back(drivers[di]);
            rec(di + 1);
            assignment[r].pop_back();
        }
    };
    rec(0);
    return best;
}

inline double plan_value(const nedsim::NotificationPlan& plan,
                         const nedsim::packing::CycleSnapshot& snap,
                         const nedsim::valuation::Protocol& protocol) {
    double total = 0.0;
    for (const auto& [r, set] : plan.sets) {
        OfferSet offers;
        for (int d : set)
            offers.entries.push_back({snap.weights.at({r, d}), snap.probs.at(d)});
        total += nedsim::valuation::value(protocol, offers);
    }
    return total;
}

// Random bipartite snapshot; probs drawn from the four-level mix unless
// continuous_p is set.
inline nedsim::packing::CycleSnapshot random_snapshot(nedsim::Rng& rng, int n_riders,
                                                      int n_drivers, double edge_prob,
                                                      bool continuous_p = false) {
    nedsim::packing::CycleSnapshot snap;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    static const double levels[4] = {0.1, 0.33, 0.66, 0.9};
    static const double cum[4] = {0.1, 0.4, 0.7, 1.0};
    for (int r = 0; r < n_riders; ++r) snap.riders.push_back(r);
    for (int d = 0; d < n_drivers; ++d) {
        snap.drivers.push_back(d);
        if (continuous_p) {
            snap.probs[d] = unit(rng);
        } else {
            const double u = unit(rng);
            for (int t = 0; t < 4; ++t)
                if (u <= cum[t]) {
                    snap.probs[d] = levels[t];
                    break;
                }
        }
    }
    for (int r = 0; r < n_riders; ++r)
        for (int d = 0; d < n_drivers; ++d)
            if (unit(rng) < edge_prob) snap.weights[{r, d}] = unit(rng);
    return snap;
}

// --- fluid -----------------------------------------------------------------

struct RandomMarket {
    nedsim::MarketParams params;
    nedsim::NotificationProfile q;
};

// Random rates plus a random simplex profile; lambda_d is lifted until the
// equilibrium is supply-feasible (D_0 is affine in lambda_d with slope
// 1/eta_idle, so one probe call pins the feasibility point).
inline RandomMarket random_market(nedsim::Rng& rng, int cap_u, bool ba,
                                  bool eta_zero = false) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    nedsim::MarketParams m;
    m.cap_u = cap_u;
    m.lambda_r = 0.1 + 3.0 * unit(rng);
    m.mu = 0.05 + 1.5 * unit(rng);
    m.p = 0.05 + 0.95 * unit(rng);
    m.eta = eta_zero ? 0.0 : 0.001 + 0.8 * unit(rng);
    m.eta_idle = 0.01 + unit(rng);
    m.eta_notified = unit(rng) < 0.4 ? 0.0 : 0.5 * unit(rng);

    nedsim::NotificationProfile q;
    q.q.resize(cap_u + 1);
    double sum = 0.0;
    for (auto& qi : q.q) {
        qi = unit(rng);
        sum += qi;
    }
    for (auto& qi : q.q) qi /= sum;

    m.lambda_d = 1.0e6;
    const auto probe =
        ba ? nedsim::fluid::ba_equilibrium(m, q) : nedsim::fluid::fa_equilibrium(m, q);
    const double d0_target = 0.5 + 20.0 * unit(rng);
    m.lambda_d = 1.0e6 - (probe.d0 - d0_target) * m.eta_idle;

    return {m, q};
}

// Tiny Gaussian elimination with partial pivoting (test-side; independent of
// the library's linear algebra). Solves A x = b.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
    const int n = int(a.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= a[r][c] * x[c];
        x[r] = acc / a[r][r];
    }
    return x;
}

// Expected time spent in each transient state per unit arrival into state 0:
// solves y^T M = -e_0^T. With arrivals at rate lambda into R_0, the fluid
// masses must equal lambda * y.
inline std::vector<double> occupancy_from_generator(
    const nedsim::fluid::AbsorptionModel& model) {
    const int m = model.m;
    std::vector<std::vector<double>> mt(m, std::vector<double>(m));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) mt[i][j] = model.M[j][i];
    std::vector<double> rhs(m, 0.0);
    rhs[0] = -1.0;
    return dense_solve(mt, rhs);
}

// --- CTMC trajectories -------------------------------------------------------

struct TrajectoryStats {
    double match_prob = 0.0;
    double match_prob_se = 0.0;
    double mean_match_time = 0.0;
    double mean_match_time_se = 0.0;
};

inline TrajectoryStats simulate_trajectories(const nedsim::fluid::AbsorptionModel& model,
                                             int start_state, int n_paths,
                                             std::uint64_t seed) {
    nedsim::Rng rng = nedsim::make_rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::int64_t matched = 0;
    double time_sum = 0.0, time_sq = 0.0;
    for (int path = 0; path < n_paths; ++path) {
        int s = start_state;
        double t = 0.0;
        while (true) {
            const double total = -model.M[s][s];
            t += -std::log(1.0 - unit(rng)) / total;
            double u = unit(rng) * total;
            int next = -1;
            bool absorbed_match = false, absorbed = false;
            for (int j = 0; j < model.m && next < 0 && !absorbed; ++j) {
                if (j == s) continue;
                if (u < model.M[s][j]) {
                    next = j;
                    break;
                }
                u -= model.M[s][j];
            }
            if (next < 0) {
                if (u < model.q_abs[s][0]) {
                    absorbed = true;  // reneged
                } else {
                    absorbed = true;
                    absorbed_match = true;
                }
            }
            if (absorbed) {
                if (absorbed_match) {
                    ++matched;
                    time_sum += t;
                    time_sq += t * t;
                }
                break;
            }
            s = next;
        }
    }
    TrajectoryStats st;
    st.match_prob = double(matched) / n_paths;
    st.match_prob_se = std::sqrt(st.match_prob * (1.0 - st.match_prob) / n_paths);
    if (matched > 1) {
        st.mean_match_time = time_sum / double(matched);
        const double var =
            std::max(0.0, (time_sq - time_sum * time_sum / double(matched)) / double(matched - 1));
        st.mean_match_time_se = std::sqrt(var / double(matched));
    }
    return st;
}

}  // namespace oracles
