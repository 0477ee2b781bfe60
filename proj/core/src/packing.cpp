#include "nedsim/packing.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <set>

#include "nedsim/error.hpp"

namespace nedsim::packing {

namespace {

struct Cand {
    int driver;
    double w;
    double p;
};

// Descending weight, ties toward the lower driver id.
bool better_cand(const Cand& a, const Cand& b) {
    if (a.w != b.w) return a.w > b.w;
    return a.driver < b.driver;
}

// Per-rider candidate lists from the snapshot, weight-ordered.
std::map<int, std::vector<Cand>> build_candidates(const CycleSnapshot& snap) {
    std::set<int> riders(snap.riders.begin(), snap.riders.end());
    std::set<int> drivers(snap.drivers.begin(), snap.drivers.end());
    std::map<int, std::vector<Cand>> by_rider;
    for (int r : snap.riders) by_rider[r];  // keep riders with no candidates
    for (const auto& [key, w] : snap.weights) {
        if (!riders.count(key.first) || !drivers.count(key.second))
            throw Error("packing", "snapshot",
                        "weight key references id outside the snapshot");
        by_rider[key.first].push_back({key.second, w, snap.probs.at(key.second)});
    }
    for (auto& [r, cands] : by_rider) std::sort(cands.begin(), cands.end(), better_cand);
    return by_rider;
}

valuation::OfferSet offers_of(const std::vector<Cand>& members) {
    valuation::OfferSet s;
    s.entries.reserve(members.size());
    for (const auto& c : members) s.entries.push_back({c.w, c.p});
    return s;
}

void emit_set(NotificationPlan& plan, int rider, std::vector<Cand> members) {
    if (members.empty()) return;
    std::sort(members.begin(), members.end(), better_cand);
    auto& out = plan.sets[rider];
    for (const auto& c : members) out.push_back(c.driver);
}

// Fisher-Yates over an index range; uses the run's RNG stream.
template <typename T>
void shuffle_ids(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(v[i - 1], v[pick(rng)]);
    }
}

NotificationPlan ed_on(const std::map<std::pair<int, int>, double>& weights,
                       const std::set<int>& riders, const std::set<int>& drivers) {
    matching::BipartiteInstance inst;
    for (const auto& [key, w] : weights)
        if (riders.count(key.first) && drivers.count(key.second)) inst.weights[key] = w;
    NotificationPlan plan;
    for (const auto& [r, d] : max_weight_matching(inst).pairs) plan.sets[r] = {d};
    return plan;
}

}  // namespace

NotificationPlan pack_ed(const CycleSnapshot& snap) {
    std::set<int> riders(snap.riders.begin(), snap.riders.end());
    std::set<int> drivers(snap.drivers.begin(), snap.drivers.end());
    return ed_on(snap.weights, riders, drivers);
}

NotificationPlan pack_greedy(const CycleSnapshot& snap, const MarketParams& params,
                             const valuation::Protocol& protocol, Rng& rng) {
    auto by_rider = build_candidates(snap);
    // Driver-side view, riders ascending.
    std::map<int, std::vector<std::pair<int, double>>> by_driver;
    for (const auto& [r, cands] : by_rider)
        for (const auto& c : cands) by_driver[c.driver].emplace_back(r, c.w);

    std::vector<int> order = snap.drivers;
    shuffle_ids(order, rng);

    std::map<int, std::vector<Cand>> sets;
    std::map<int, double> current_value;
    for (int r : snap.riders) {
        sets[r];
        current_value[r] = 0.0;
    }

    for (int d : order) {
        auto edges = by_driver.find(d);
        if (edges == by_driver.end()) continue;
        const double p_d = snap.probs.at(d);
        int best_rider = -1;
        double best_gain = -std::numeric_limits<double>::infinity();
        double best_trial_value = 0.0;
        for (const auto& [r, w] : edges->second) {
            if (int(sets[r].size()) >= params.cap_u) continue;
            valuation::OfferSet trial = offers_of(sets[r]);
            trial.entries.push_back({w, p_d});
            const double trial_value = valuation::value(protocol, trial);
            const double gain = trial_value - current_value[r];
            if (gain > best_gain) {  // ties keep the lowest rider id
                best_gain = gain;
                best_rider = r;
                best_trial_value = trial_value;
            }
        }
        if (best_rider >= 0 && best_gain > params.theta * p_d) {
            const double w = snap.weights.at({best_rider, d});
            sets[best_rider].push_back({d, w, p_d});
            current_value[best_rider] = best_trial_value;
        }
    }

    NotificationPlan plan;
    for (auto& [r, members] : sets) emit_set(plan, r, members);
    return plan;
}

NotificationPlan pack_rejection_aware(const CycleSnapshot& snap,
                                      const MarketParams& params,
                                      const valuation::Protocol& protocol, Rng& rng,
                                      const PackOptions& opts) {
    (void)protocol;  // batches are weight-ordered; the protocol plays no role here
    auto by_rider = build_candidates(snap);

    std::vector<int> ride_order = snap.riders;
    shuffle_ids(ride_order, rng);

    std::set<int> available(snap.drivers.begin(), snap.drivers.end());
    std::set<int> open_riders(snap.riders.begin(), snap.riders.end());

    NotificationPlan plan;
    for (int r : ride_order) {
        std::vector<Cand> batch;
        for (const auto& c : by_rider[r]) {
            if (!available.count(c.driver)) continue;
            batch.push_back(c);
            const double rejection = 1.0 - c.p;
            if (rejection < opts.rej_threshold || int(batch.size()) >= params.cap_u) break;
        }
        if (int(batch.size()) >= opts.min_commit_size) {
            for (const auto& c : batch) available.erase(c.driver);
            open_riders.erase(r);
            emit_set(plan, r, std::move(batch));
        }
    }

    // Everyone left goes through plain exclusive dispatch.
    NotificationPlan ed = ed_on(snap.weights, open_riders, available);
    for (auto& [r, set] : ed.sets) plan.sets[r] = std::move(set);
    return plan;
}

NotificationPlan pack_ed_plus(const CycleSnapshot& snap, const MarketParams& params,
                              const valuation::Protocol& protocol, Rng& rng) {
    auto by_rider = build_candidates(snap);

    matching::BipartiteInstance inst;
    inst.weights = snap.weights;
    const auto phase1 = max_weight_matching(inst);

    std::set<int> available(snap.drivers.begin(), snap.drivers.end());
    for (const auto& [r, d] : phase1.pairs) available.erase(d);

    std::vector<int> matched_rides;
    std::map<int, int> primary;
    for (const auto& [r, d] : phase1.pairs) {
        matched_rides.push_back(r);
        primary[r] = d;
    }
    shuffle_ids(matched_rides, rng);

    NotificationPlan plan;
    const bool may_extend = params.cap_u >= 2;
    for (int r : matched_rides) {
        const int d_star = primary[r];
        const double w_star = snap.weights.at({r, d_star});
        std::vector<Cand> members{{d_star, w_star, snap.probs.at(d_star)}};
        if (may_extend) {
            const Cand* extra = nullptr;
            for (const auto& c : by_rider[r]) {  // weight-ordered; first available wins
                if (c.driver == d_star || !available.count(c.driver)) continue;
                extra = &c;
                break;
            }
            if (extra) {
                valuation::OfferSet pair = offers_of(members);
                pair.entries.push_back({extra->w, extra->p});
                const double with_extra = valuation::value(protocol, pair);
                const double base = valuation::value(protocol, offers_of(members));
                if (with_extra >= base + params.theta * extra->p) {
                    members.push_back(*extra);
                    available.erase(extra->driver);
                }
            }
        }
        emit_set(plan, r, std::move(members));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Exact packing (branch and bound over per-ride candidate sets)
// ---------------------------------------------------------------------------

namespace {

struct RideChoice {
    std::uint64_t mask = 0;  // component-local driver bits
    double value = 0.0;
    std::vector<Cand> members;
};

struct ComponentProblem {
    std::vector<int> riders;                    // ascending
    std::vector<int> drivers;                   // ascending; index = mask bit
    std::map<int, std::vector<Cand>> cands;     // rider -> feasible candidates
};

// Feasible sets for one ride: every subset of its candidates with size <= U
// whose members all clear the theta-threshold. The empty set is always first
// after sorting only if nothing beats value 0; it is always present.
std::vector<RideChoice> enumerate_ride_choices(const ComponentProblem& comp, int rider,
                                               const MarketParams& params,
                                               const valuation::Protocol& protocol) {
    const auto& cands = comp.cands.at(rider);
    std::map<int, int> local_index;
    for (std::size_t i = 0; i < comp.drivers.size(); ++i) local_index[comp.drivers[i]] = int(i);

    std::vector<RideChoice> out;
    out.push_back({});  // empty set, value 0

    std::vector<int> chosen;
    auto evaluate = [&]() {
        RideChoice rc;
        for (int idx : chosen) {
            rc.members.push_back(cands[idx]);
            rc.mask |= std::uint64_t(1) << local_index.at(cands[idx].driver);
        }
        valuation::OfferSet offers = offers_of(rc.members);
        rc.value = valuation::value(protocol, offers);
        // Threshold filter on the final set, per member.
        for (std::size_t i = 0; i < rc.members.size(); ++i) {
            valuation::OfferSet without = offers;
            without.entries.erase(without.entries.begin() + long(i));
            const double marginal = rc.value - valuation::value(protocol, without);
            if (marginal < params.theta * rc.members[i].p) return;
        }
        out.push_back(std::move(rc));
    };

    // DFS over combinations of size 1..U.
    auto rec = [&](auto&& self, int start) -> void {
        for (int i = start; i < int(cands.size()); ++i) {
            chosen.push_back(i);
            evaluate();
            if (int(chosen.size()) < params.cap_u) self(self, i + 1);
            chosen.pop_back();
        }
    };
    rec(rec, 0);

    std::sort(out.begin(), out.end(), [](const RideChoice& a, const RideChoice& b) {
        return a.value > b.value;
    });
    return out;
}

std::vector<std::pair<int, int>> canonical_pairs(
    const std::vector<const RideChoice*>& chosen, const std::vector<int>& riders) {
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t i = 0; i < riders.size(); ++i)
        for (const auto& c : chosen[i]->members) pairs.emplace_back(riders[i], c.driver);
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

struct ComponentSolution {
    double value = 0.0;
    std::map<int, std::vector<Cand>> sets;
};

ComponentSolution solve_component(const ComponentProblem& comp, const MarketParams& params,
                                  const valuation::Protocol& protocol) {
    const int n = int(comp.riders.size());
    std::vector<std::vector<RideChoice>> choices(n);
    for (int i = 0; i < n; ++i)
        choices[i] = enumerate_ride_choices(comp, comp.riders[i], params, protocol);

    std::vector<double> suffix_best(n + 1, 0.0);
    for (int i = n - 1; i >= 0; --i)
        suffix_best[i] = suffix_best[i + 1] + choices[i].front().value;

    constexpr double kEps = 1e-12;
    double best_value = -1.0;
    std::vector<std::pair<int, int>> best_pairs;
    std::vector<const RideChoice*> best_chosen;

    std::vector<const RideChoice*> current(n, nullptr);
    auto dfs = [&](auto&& self, int i, std::uint64_t used, double value) -> void {
        if (value + suffix_best[i] < best_value - kEps) return;
        if (i == n) {
            if (value > best_value + kEps) {
                best_value = value;
                best_chosen.assign(current.begin(), current.end());
                best_pairs = canonical_pairs(best_chosen, comp.riders);
            } else if (value >= best_value - kEps) {
                auto pairs = canonical_pairs(current, comp.riders);
                if (std::lexicographical_compare(pairs.begin(), pairs.end(),
                                                 best_pairs.begin(), best_pairs.end())) {
                    best_pairs = std::move(pairs);
                    best_chosen.assign(current.begin(), current.end());
                }
            }
            return;
        }
        for (const auto& rc : choices[i]) {
            if (rc.mask & used) continue;
            current[i] = &rc;
            self(self, i + 1, used | rc.mask, value + rc.value);
        }
        current[i] = nullptr;
    };
    dfs(dfs, 0, 0, 0.0);

    ComponentSolution sol;
    sol.value = best_value;
    for (int i = 0; i < n; ++i)
        sol.sets[comp.riders[i]] = best_chosen[i]->members;
    return sol;
}

}  // namespace

NotificationPlan pack_opt(const CycleSnapshot& snap, const MarketParams& params,
                          const valuation::Protocol& protocol, Rng& rng,
                          const PackOptions& opts) {
    auto by_rider = build_candidates(snap);

    // Degree-one pruning: a rider's exclusive drivers are dominated within
    // their acceptance-probability class, so only the top-U per class can
    // appear in an optimum.
    std::map<int, int> degree;
    for (const auto& [r, cands] : by_rider)
        for (const auto& c : cands) ++degree[c.driver];
    std::set<int> excluded;
    for (const auto& [r, cands] : by_rider) {
        std::map<double, int> kept_per_class;
        for (const auto& c : cands) {  // already ordered by descending weight
            if (degree[c.driver] != 1) continue;
            if (++kept_per_class[c.p] > params.cap_u) excluded.insert(c.driver);
        }
    }

    // Connected components of the pruned bipartite graph.
    std::map<int, std::vector<int>> rider_adj;   // rider -> drivers
    std::map<int, std::vector<int>> driver_adj;  // driver -> riders
    for (const auto& [r, cands] : by_rider)
        for (const auto& c : cands) {
            if (excluded.count(c.driver)) continue;
            rider_adj[r].push_back(c.driver);
            driver_adj[c.driver].push_back(r);
        }

    std::set<int> visited_riders;
    std::vector<ComponentProblem> components;
    for (int r0 : snap.riders) {
        if (visited_riders.count(r0) || rider_adj[r0].empty()) continue;
        ComponentProblem comp;
        std::set<int> comp_riders{r0}, comp_drivers;
        std::vector<int> stack{r0};
        visited_riders.insert(r0);
        std::set<int> seen_drivers;
        while (!stack.empty()) {
            const int r = stack.back();
            stack.pop_back();
            for (int d : rider_adj[r]) {
                if (!seen_drivers.insert(d).second) continue;
                comp_drivers.insert(d);
                for (int r2 : driver_adj[d]) {
                    if (visited_riders.insert(r2).second) {
                        comp_riders.insert(r2);
                        stack.push_back(r2);
                    }
                }
            }
        }
        comp.riders.assign(comp_riders.begin(), comp_riders.end());
        comp.drivers.assign(comp_drivers.begin(), comp_drivers.end());
        for (int r : comp.riders) {
            auto& kept = comp.cands[r];
            for (const auto& c : by_rider[r])
                if (!excluded.count(c.driver)) kept.push_back(c);
        }
        components.push_back(std::move(comp));
    }

    NotificationPlan plan;
    for (const auto& comp : components) {
        const int nodes = int(comp.riders.size() + comp.drivers.size());
        if (nodes > opts.component_cap) {
            if (!opts.fallback_greedy)
                throw Error("packing", "pack_opt",
                            "component too large: " + std::to_string(nodes) + " nodes > cap " +
                                std::to_string(opts.component_cap));
            CycleSnapshot sub;
            sub.riders = comp.riders;
            sub.drivers = comp.drivers;
            for (int r : comp.riders)
                for (const auto& c : comp.cands.at(r)) {
                    sub.weights[{r, c.driver}] = c.w;
                    sub.probs[c.driver] = c.p;
                }
            NotificationPlan sub_plan = pack_greedy(sub, params, protocol, rng);
            for (auto& [r, set] : sub_plan.sets) plan.sets[r] = std::move(set);
            continue;
        }
        ComponentSolution sol = solve_component(comp, params, protocol);
        for (auto& [r, members] : sol.sets) emit_set(plan, r, std::move(members));
    }
    return plan;
}

PackerFn make_packer(const std::string& name, const PackOptions& opts) {
    if (name == "ed")
        return [](const CycleSnapshot& s, const MarketParams&, const valuation::Protocol&,
                  Rng&) { return pack_ed(s); };
    if (name == "opt")
        return [opts](const CycleSnapshot& s, const MarketParams& p,
                      const valuation::Protocol& pr, Rng& rng) {
            return pack_opt(s, p, pr, rng, opts);
        };
    if (name == "greedy")
        return [](const CycleSnapshot& s, const MarketParams& p, const valuation::Protocol& pr,
                  Rng& rng) { return pack_greedy(s, p, pr, rng); };
    if (name == "rejection_aware")
        return [opts](const CycleSnapshot& s, const MarketParams& p,
                      const valuation::Protocol& pr, Rng& rng) {
            return pack_rejection_aware(s, p, pr, rng, opts);
        };
    if (name == "ed_plus")
        return [](const CycleSnapshot& s, const MarketParams& p, const valuation::Protocol& pr,
                  Rng& rng) { return pack_ed_plus(s, p, pr, rng); };
    throw Error("packing", "make_packer", "unknown packer '" + name + "'");
}

}  // namespace nedsim::packing
