#include "nedsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "nedsim/error.hpp"
#include "nedsim/parallel.hpp"
#include "nedsim/rng.hpp"

namespace nedsim::sim {

void SimConfig::validate() const {
    auto bad = [](const std::string& msg) { throw Error("sim", "config", msg); };
    if (!(cycle_seconds > 0)) bad("cycle_seconds must be > 0");
    if (response_window_cycles < 1) bad("response_window_cycles must be >= 1");
    auto prob_ok = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!prob_ok(rider_renege_prob) || !prob_ok(idle_driver_exit_prob) ||
        !prob_ok(notified_driver_exit_prob))
        bad("per-cycle probabilities must be in [0,1]");
    if (horizon_cycles < 1) bad("horizon_cycles must be >= 1");
    if (!(ar_gap >= 0.0 && ar_gap < 1.0)) bad("ar_gap must be in [0,1)");
    if (homogeneous_p && !prob_ok(*homogeneous_p)) bad("homogeneous_p must be in [0,1]");
    if (protocol.kind == valuation::ProtocolKind::KAccept && protocol.k < 1)
        bad("k must be >= 1");
}

NotificationProfile q_profile_of(const SimResult& result) {
    NotificationProfile prof;
    std::int64_t total = 0;
    for (auto c : result.notify_size_counts) total += c;
    if (result.notify_size_counts.empty() || total == 0) {
        prof.q = {1.0};
        return prof;
    }
    prof.q.resize(result.notify_size_counts.size());
    for (std::size_t i = 0; i < prof.q.size(); ++i)
        prof.q[i] = double(result.notify_size_counts[i]) / double(total);
    return prof;
}

namespace {

struct PendingResponse {
    int driver = -1;   // index into scenario.drivers
    int due_cycle = 0;
    bool accepts = false;
    double weight = 0.0;
};

struct Acceptance {
    int driver = -1;
    double weight = 0.0;
};

// Rank order used for BA withdrawal/finalization: higher weight first,
// ties toward the lower driver id.
bool outranks(double w_a, int id_a, double w_b, int id_b) {
    if (w_a != w_b) return w_a > w_b;
    return id_a < id_b;
}

struct Attempt {
    std::vector<PendingResponse> pending;  // ascending driver index
    std::vector<Acceptance> collected;     // held acceptances (accepted-pending drivers)
};

struct Engine {
    const Scenario& scenario;
    const packing::PackerFn& packer;
    const SimConfig& cfg;
    const MarketParams& params;

    Rng rng;
    std::vector<RiderState> rider_state;
    std::vector<DriverState> driver_state;
    std::vector<int> rider_arrival_cycle, driver_arrival_cycle;
    std::vector<int> driver_available_from;  // first cycle an idle driver may be packed
    std::vector<Attempt> attempts;           // indexed by rider
    std::map<int, int> rider_index, driver_index;

    SimResult result;
    int matched_riders = 0, matched_drivers = 0;

    Engine(const Scenario& s, const packing::PackerFn& pk, const SimConfig& c,
           const MarketParams& p)
        : scenario(s), packer(pk), cfg(c), params(p), rng(make_rng(c.seed)) {}

    int arrival_cycle_of(double t_s) const { return int(std::floor(t_s / cfg.cycle_seconds)); }

    void init() {
        cfg.validate();
        params.validate();
        const int nr = int(scenario.riders.size());
        const int nd = int(scenario.drivers.size());
        rider_state.assign(nr, RiderState::waiting);
        driver_state.assign(nd, DriverState::idle);
        rider_arrival_cycle.resize(nr);
        driver_arrival_cycle.resize(nd);
        driver_available_from.assign(nd, 0);
        attempts.assign(nr, {});
        for (int i = 0; i < nr; ++i) {
            rider_index[scenario.riders[i].id] = i;
            rider_arrival_cycle[i] = arrival_cycle_of(scenario.riders[i].arrival_time_s);
            if (rider_arrival_cycle[i] >= cfg.horizon_cycles)
                throw Error("sim", "run_simulation",
                            "rider " + std::to_string(scenario.riders[i].id) +
                                " arrives beyond the horizon");
        }
        for (int i = 0; i < nd; ++i) {
            driver_index[scenario.drivers[i].id] = i;
            driver_arrival_cycle[i] = arrival_cycle_of(scenario.drivers[i].arrival_time_s);
            if (driver_arrival_cycle[i] >= cfg.horizon_cycles)
                throw Error("sim", "run_simulation",
                            "driver " + std::to_string(scenario.drivers[i].id) +
                                " arrives beyond the horizon");
        }
        result.notify_size_counts.assign(std::size_t(params.cap_u) + 1, 0);
    }

    bool arrived_rider(int i, int cycle) const { return rider_arrival_cycle[i] <= cycle; }
    bool arrived_driver(int i, int cycle) const { return driver_arrival_cycle[i] <= cycle; }

    // Releases a driver back to the idle pool, effective next cycle.
    void release_driver(int d, int cycle) {
        driver_state[d] = DriverState::idle;
        driver_available_from[d] = cycle + 1;
    }

    void abandon_attempt(int r, int cycle) {
        for (const auto& p : attempts[r].pending) release_driver(p.driver, cycle);
        for (const auto& a : attempts[r].collected) release_driver(a.driver, cycle);
        attempts[r] = {};
    }

    void record_ride(int r, RideOutcome outcome, double match_time_s, int driver_id,
                     double w) {
        result.per_ride.push_back(
            {scenario.riders[r].id, outcome, match_time_s, driver_id, w});
    }

    void finalize(int r, const Acceptance& winner, int cycle) {
        // Losers: held acceptances other than the winner, plus anything pending.
        for (const auto& a : attempts[r].collected)
            if (a.driver != winner.driver) release_driver(a.driver, cycle);
        for (const auto& p : attempts[r].pending) release_driver(p.driver, cycle);

        if (cfg.record_events) {
            FinalizeEvent ev;
            ev.cycle = cycle;
            ev.rider_id = scenario.riders[r].id;
            ev.winner_driver_id = scenario.drivers[winner.driver].id;
            ev.winner_weight = winner.weight;
            for (const auto& a : attempts[r].collected)
                ev.acceptances.emplace_back(scenario.drivers[a.driver].id, a.weight);
            result.events.push_back(std::move(ev));
        }

        attempts[r] = {};
        rider_state[r] = RiderState::matched;
        driver_state[winner.driver] = DriverState::matched;
        ++matched_riders;
        ++matched_drivers;
        const double match_time_s =
            double(cycle) * cfg.cycle_seconds - scenario.riders[r].arrival_time_s;
        record_ride(r, RideOutcome::matched, match_time_s,
                    scenario.drivers[winner.driver].id, winner.weight);
    }

    // Step 2: abandonment draws, riders before drivers, ascending index.
    void abandonment(int cycle) {
        std::bernoulli_distribution renege(cfg.rider_renege_prob);
        for (int r = 0; r < int(rider_state.size()); ++r) {
            if (!arrived_rider(r, cycle) || rider_state[r] != RiderState::waiting) continue;
            if (cfg.rider_renege_prob > 0 && renege(rng)) {
                rider_state[r] = RiderState::reneged;
                record_ride(r, RideOutcome::reneged, 0.0, -1, 0.0);
            }
        }
        for (int r = 0; r < int(rider_state.size()); ++r) {
            if (rider_state[r] != RiderState::notified) continue;
            if (cfg.rider_renege_prob > 0 && renege(rng)) {
                abandon_attempt(r, cycle);
                rider_state[r] = RiderState::reneged;
                record_ride(r, RideOutcome::reneged, 0.0, -1, 0.0);
            }
        }
        std::bernoulli_distribution idle_exit(cfg.idle_driver_exit_prob);
        for (int d = 0; d < int(driver_state.size()); ++d) {
            if (!arrived_driver(d, cycle) || driver_state[d] != DriverState::idle) continue;
            if (cfg.idle_driver_exit_prob > 0 && idle_exit(rng))
                driver_state[d] = DriverState::departed;
        }
        if (cfg.notified_driver_exit_prob > 0) {
            std::bernoulli_distribution notif_exit(cfg.notified_driver_exit_prob);
            for (int d = 0; d < int(driver_state.size()); ++d) {
                if (driver_state[d] != DriverState::notified) continue;
                if (notif_exit(rng)) {
                    driver_state[d] = DriverState::departed;
                    drop_pending(d);
                }
            }
        }
    }

    // Removes a departed driver's pending response from its ride.
    void drop_pending(int d) {
        for (auto& att : attempts) {
            auto& pend = att.pending;
            for (std::size_t i = 0; i < pend.size(); ++i) {
                if (pend[i].driver == d) {
                    pend.erase(pend.begin() + long(i));
                    return;
                }
            }
        }
    }

    // Step 3: responses due this cycle, then finalization / withdrawal.
    void process_responses(int cycle) {
        for (int r = 0; r < int(rider_state.size()); ++r) {
            if (rider_state[r] != RiderState::notified) continue;
            auto& att = attempts[r];
            bool finalized = false;

            std::vector<PendingResponse> due;
            for (const auto& p : att.pending)
                if (p.due_cycle == cycle) due.push_back(p);

            for (const auto& resp : due) {
                if (finalized) break;
                // A withdrawal processed earlier this cycle may have removed it.
                auto it = std::find_if(att.pending.begin(), att.pending.end(),
                                       [&](const PendingResponse& p) {
                                           return p.driver == resp.driver;
                                       });
                if (it == att.pending.end()) continue;
                att.pending.erase(it);

                if (!resp.accepts) {
                    release_driver(resp.driver, cycle);
                    continue;
                }

                switch (cfg.protocol.kind) {
                    case valuation::ProtocolKind::FA: {
                        att.collected.push_back({resp.driver, resp.weight});
                        finalize(r, {resp.driver, resp.weight}, cycle);
                        finalized = true;
                        break;
                    }
                    case valuation::ProtocolKind::BA: {
                        // Keep only the best acceptance; withdraw outranked pending.
                        driver_state[resp.driver] = DriverState::accepted_pending;
                        if (att.collected.empty()) {
                            att.collected.push_back({resp.driver, resp.weight});
                        } else {
                            Acceptance& best = att.collected.front();
                            const int resp_id = scenario.drivers[resp.driver].id;
                            const int best_id = scenario.drivers[best.driver].id;
                            if (outranks(resp.weight, resp_id, best.weight, best_id)) {
                                release_driver(best.driver, cycle);
                                best = {resp.driver, resp.weight};
                            } else {
                                release_driver(resp.driver, cycle);
                            }
                        }
                        const Acceptance& best = att.collected.front();
                        const int best_id = scenario.drivers[best.driver].id;
                        for (std::size_t i = att.pending.size(); i-- > 0;) {
                            const auto& p = att.pending[i];
                            const int p_id = scenario.drivers[p.driver].id;
                            if (outranks(best.weight, best_id, p.weight, p_id)) {
                                release_driver(p.driver, cycle);
                                att.pending.erase(att.pending.begin() + long(i));
                            }
                        }
                        break;
                    }
                    case valuation::ProtocolKind::KAccept: {
                        driver_state[resp.driver] = DriverState::accepted_pending;
                        att.collected.push_back({resp.driver, resp.weight});
                        if (int(att.collected.size()) >= cfg.protocol.k) {
                            finalize(r, best_collected(att), cycle);
                            finalized = true;
                        }
                        break;
                    }
                }
            }

            if (finalized) continue;
            if (!att.pending.empty()) continue;
            if (!att.collected.empty()) {
                finalize(r, best_collected(att), cycle);  // exhaustion under BA / k-Accept
            } else {
                rider_state[r] = RiderState::waiting;  // timeout: back to the pool
                attempts[r] = {};
            }
        }
    }

    Acceptance best_collected(const Attempt& att) const {
        const Acceptance* best = &att.collected.front();
        for (const auto& a : att.collected) {
            const int a_id = scenario.drivers[a.driver].id;
            const int b_id = scenario.drivers[best->driver].id;
            if (outranks(a.weight, a_id, best->weight, b_id)) best = &a;
        }
        return *best;
    }

    // Step 4: snapshot, packing, notification draws.
    void pack_and_notify(int cycle) {
        packing::CycleSnapshot snap;
        for (int r = 0; r < int(rider_state.size()); ++r)
            if (arrived_rider(r, cycle) && rider_state[r] == RiderState::waiting)
                snap.riders.push_back(scenario.riders[r].id);
        for (int d = 0; d < int(driver_state.size()); ++d)
            if (arrived_driver(d, cycle) && driver_state[d] == DriverState::idle &&
                driver_available_from[d] <= cycle)
                snap.drivers.push_back(scenario.drivers[d].id);
        if (snap.riders.empty() || snap.drivers.empty()) {
            result.notify_size_counts[0] += std::int64_t(snap.riders.size());
            return;
        }

        std::set<int> rider_set(snap.riders.begin(), snap.riders.end());
        std::set<int> driver_set(snap.drivers.begin(), snap.drivers.end());
        for (const auto& [key, w] : scenario.weights)
            if (rider_set.count(key.first) && driver_set.count(key.second))
                snap.weights[key] = w;
        for (int id : snap.drivers) {
            const double base = cfg.homogeneous_p
                                    ? *cfg.homogeneous_p
                                    : scenario.drivers[driver_index.at(id)].accept_prob;
            snap.probs[id] = base;
        }

        NotificationPlan plan;
        try {
            plan = packer(snap, params, cfg.protocol, rng);
        } catch (const std::exception& e) {
            throw Error("sim", "run_simulation",
                        "cycle " + std::to_string(cycle) + ": " + e.what());
        }

        for (int rid : snap.riders) {
            auto it = plan.sets.find(rid);
            const int size = it == plan.sets.end() ? 0 : int(it->second.size());
            if (size > params.cap_u)
                throw Error("sim", "run_simulation",
                            "packer emitted a set larger than U for rider " +
                                std::to_string(rid));
            result.notify_size_counts[size] += 1;
            if (size == 0) continue;

            const int r = rider_index.at(rid);
            rider_state[r] = RiderState::notified;
            Attempt att;
            // Response draws per driver in ascending driver id.
            std::vector<int> members = it->second;
            std::sort(members.begin(), members.end());
            std::uniform_int_distribution<int> delay(1, cfg.response_window_cycles);
            for (int did : members) {
                const int d = driver_index.at(did);
                const double p_true = scenario.drivers[d].accept_prob;
                const double p_eff = size > 1 ? (1.0 - cfg.ar_gap) * p_true : p_true;
                PendingResponse pr;
                pr.driver = d;
                pr.due_cycle = cycle + delay(rng);
                pr.accepts = std::bernoulli_distribution(p_eff)(rng);
                pr.weight = scenario.weights.at({rid, did});
                att.pending.push_back(pr);
                driver_state[d] = DriverState::notified;
            }
            attempts[r] = std::move(att);
        }
    }

    void check_conservation(int cycle) const {
        if (matched_riders != matched_drivers)
            throw Error("sim", "run_simulation",
                        "cycle " + std::to_string(cycle) + ": matched rider/driver mismatch");
        // Each live notification/acceptance must point at a driver in the
        // matching state, and no driver may appear twice.
        std::set<int> referenced;
        for (int r = 0; r < int(rider_state.size()); ++r) {
            const auto& att = attempts[r];
            const bool active = !att.pending.empty() || !att.collected.empty();
            if (active && rider_state[r] != RiderState::notified)
                throw Error("sim", "run_simulation",
                            "cycle " + std::to_string(cycle) + ": attempt on inactive rider");
            for (const auto& p : att.pending) {
                if (driver_state[p.driver] != DriverState::notified)
                    throw Error("sim", "run_simulation",
                                "cycle " + std::to_string(cycle) + ": stale pending driver");
                if (!referenced.insert(p.driver).second)
                    throw Error("sim", "run_simulation",
                                "cycle " + std::to_string(cycle) + ": driver notified twice");
            }
            for (const auto& a : att.collected) {
                if (driver_state[a.driver] != DriverState::accepted_pending)
                    throw Error("sim", "run_simulation",
                                "cycle " + std::to_string(cycle) + ": stale acceptance");
                if (!referenced.insert(a.driver).second)
                    throw Error("sim", "run_simulation",
                                "cycle " + std::to_string(cycle) + ": driver held twice");
            }
        }
        for (int d = 0; d < int(driver_state.size()); ++d)
            if ((driver_state[d] == DriverState::notified ||
                 driver_state[d] == DriverState::accepted_pending) &&
                !referenced.count(d))
                throw Error("sim", "run_simulation",
                            "cycle " + std::to_string(cycle) + ": orphaned notified driver");
    }

    SimResult run(const CycleObserver& observer) {
        init();
        for (int cycle = 0; cycle < cfg.horizon_cycles; ++cycle) {
            abandonment(cycle);
            process_responses(cycle);
            pack_and_notify(cycle);
            check_conservation(cycle);
            if (observer) observer({cycle, rider_state, driver_state});
        }
        for (int r = 0; r < int(rider_state.size()); ++r) {
            if (rider_state[r] == RiderState::waiting && arrived_rider(r, cfg.horizon_cycles - 1))
                record_ride(r, RideOutcome::unresolved, 0.0, -1, 0.0);
            else if (rider_state[r] == RiderState::notified)
                record_ride(r, RideOutcome::unresolved, 0.0, -1, 0.0);
        }

        std::sort(result.per_ride.begin(), result.per_ride.end(),
                  [](const RideRecord& a, const RideRecord& b) { return a.rider_id < b.rider_id; });
        double sum_score = 0.0, sum_time = 0.0;
        int matches = 0;
        for (const auto& rec : result.per_ride) {
            if (rec.outcome != RideOutcome::matched) continue;
            ++matches;
            sum_score += rec.score;
            sum_time += rec.match_time_s;
        }
        result.match_count = matches;
        if (matches > 0) {
            result.avg_score = sum_score / matches;
            result.avg_match_time_s = sum_time / matches;
        }
        return result;
    }
};

}  // namespace

SimResult run_simulation(const Scenario& scenario, const packing::PackerFn& packer,
                         const SimConfig& config, const MarketParams& params,
                         const CycleObserver& observer) {
    Engine engine(scenario, packer, config, params);
    return engine.run(observer);
}

MonteCarloResult run_monte_carlo(const ScenarioSource& source,
                                 const packing::PackerFn& packer,
                                 const SimConfig& config, const MarketParams& params,
                                 int n_instances, int jobs) {
    if (n_instances < 1)
        throw Error("sim", "run_monte_carlo", "n_instances must be >= 1");
    MonteCarloResult mc;
    mc.instances.resize(n_instances);
    parallel_for(jobs, n_instances, [&](std::int64_t i) {
        Scenario scenario = source(derive_seed(config.seed, 2 * std::uint64_t(i)));
        SimConfig inst_cfg = config;
        inst_cfg.seed = derive_seed(config.seed, 2 * std::uint64_t(i) + 1);
        mc.instances[i] = run_simulation(scenario, packer, inst_cfg, params);
    });

    auto mean_std = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= xs.empty() ? 1.0 : double(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        const double std_dev = xs.size() > 1 ? std::sqrt(ss / double(xs.size() - 1)) : 0.0;
        return std::pair<double, double>(mean, std_dev);
    };

    std::vector<double> scores, times, counts;
    for (const auto& inst : mc.instances) {
        counts.push_back(double(inst.match_count));
        if (inst.match_count > 0) {  // conditional metrics skip empty instances
            scores.push_back(inst.avg_score);
            times.push_back(inst.avg_match_time_s);
        }
    }
    std::tie(mc.stats.mean_score, mc.stats.std_score) = mean_std(scores);
    std::tie(mc.stats.mean_match_time_s, mc.stats.std_match_time_s) = mean_std(times);
    std::tie(mc.stats.mean_match_count, mc.stats.std_match_count) = mean_std(counts);
    return mc;
}

}  // namespace nedsim::sim
