#include "nedsim/fixpoint.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nedsim/error.hpp"
#include "nedsim/parallel.hpp"

namespace nedsim::fixpoint {

void FixpointConfig::validate() const {
    auto bad = [](const std::string& msg) { throw Error("fixpoint", "config", msg); };
    if (n_snapshot_samples < 1) bad("n_snapshot_samples must be >= 1");
    if (!(damping > 0.0 && damping <= 1.0)) bad("damping must be in (0,1]");
    if (!(tol > 0.0)) bad("tol must be > 0");
    if (max_iter < 1) bad("max_iter must be >= 1");
}

int probabilistic_round(double x, Rng& rng) {
    if (!(x >= 0.0))
        throw Error("fixpoint", "probabilistic_round", "x must be >= 0");
    const double fl = std::floor(x);
    const double frac = x - fl;
    int out = int(fl);
    if (frac > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < frac) ++out;
    return out;
}

namespace {

struct Agent {
    double x, y;
};

// One standard-normal snapshot with homogeneous acceptance; returns the
// per-size notification counts of a single packing epoch.
std::vector<std::int64_t> one_snapshot(double r0, double d0,
                                       const packing::PackerFn& packer,
                                       const valuation::Protocol& protocol,
                                       const MarketParams& params, Rng& rng) {
    std::vector<std::int64_t> counts(std::size_t(params.cap_u) + 1, 0);
    const int nr = probabilistic_round(r0, rng);
    const int nd = probabilistic_round(d0, rng);
    if (nr == 0) return counts;

    std::normal_distribution<double> coord(0.0, 1.0);
    std::vector<Agent> riders(nr), drivers(nd);
    for (auto& a : riders) a = {coord(rng), coord(rng)};
    for (auto& a : drivers) a = {coord(rng), coord(rng)};

    packing::CycleSnapshot snap;
    for (int i = 0; i < nr; ++i) snap.riders.push_back(i);
    for (int j = 0; j < nd; ++j) {
        snap.drivers.push_back(j);
        snap.probs[j] = params.p;
    }
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nd; ++j) {
            const double dist = std::hypot(riders[i].x - drivers[j].x,
                                           riders[i].y - drivers[j].y);
            snap.weights[{i, j}] = 1.0 / (1.0 + dist);
        }

    NotificationPlan plan = packer(snap, params, protocol, rng);
    for (int i = 0; i < nr; ++i) {
        auto it = plan.sets.find(i);
        const int size = it == plan.sets.end() ? 0 : int(it->second.size());
        counts[std::min<std::size_t>(size, counts.size() - 1)] += 1;
    }
    return counts;
}

}  // namespace

SnapshotQ snapshot_q(double r0, double d0, const packing::PackerFn& packer,
                     const valuation::Protocol& protocol, const MarketParams& params,
                     int n_samples, std::uint64_t seed, int jobs) {
    if (r0 < 0.0 || d0 < 0.0)
        throw Error("fixpoint", "snapshot_q", "pool sizes must be >= 0");
    if (n_samples < 1)
        throw Error("fixpoint", "snapshot_q", "n_samples must be >= 1");

    std::vector<std::vector<std::int64_t>> per_sample(n_samples);
    parallel_for(jobs, n_samples, [&](std::int64_t i) {
        Rng rng = make_rng(seed, std::uint64_t(i));
        per_sample[i] = one_snapshot(r0, d0, packer, protocol, params, rng);
    });

    std::vector<std::int64_t> counts(std::size_t(params.cap_u) + 1, 0);
    std::int64_t total = 0;
    for (const auto& c : per_sample)
        for (std::size_t k = 0; k < counts.size(); ++k) {
            counts[k] += c[k];
            total += c[k];
        }

    SnapshotQ out;
    out.rider_epochs = total;
    out.profile.q.assign(counts.size(), 0.0);
    if (total == 0) {
        out.profile.q[0] = 1.0;  // empty-pool convention
    } else {
        for (std::size_t k = 0; k < counts.size(); ++k)
            out.profile.q[k] = double(counts[k]) / double(total);
    }
    return out;
}

FixpointTrace find_equilibrium(const valuation::Protocol& protocol,
                               const MarketParams& params,
                               const packing::PackerFn& packer,
                               const FixpointConfig& cfg,
                               const NotificationProfile& q_init) {
    cfg.validate();
    q_init.validate();
    if (q_init.cap_u() != params.cap_u)
        throw Error("fixpoint", "find_equilibrium", "q_init length does not match U");
    const bool ba = protocol.kind == valuation::ProtocolKind::BA;
    if (!ba && protocol.kind != valuation::ProtocolKind::FA)
        throw Error("fixpoint", "find_equilibrium", "protocol must be FA or BA");

    auto equilibrium = [&](const NotificationProfile& q) {
        return ba ? fluid::ba_equilibrium(params, q) : fluid::fa_equilibrium(params, q);
    };

    FixpointTrace trace;
    NotificationProfile q = q_init;
    for (int t = 0; t < cfg.max_iter; ++t) {
        fluid::FluidState st;
        try {
            st = equilibrium(q);
        } catch (const Error& e) {
            throw Error("fixpoint", "find_equilibrium",
                        "iteration " + std::to_string(t) + ": " + e.what());
        }
        const SnapshotQ sq =
            snapshot_q(st.r0, st.d0, packer, protocol, params, cfg.n_snapshot_samples,
                       derive_seed(cfg.seed, std::uint64_t(t)), cfg.jobs);

        double gap = 0.0;
        for (std::size_t k = 0; k < q.q.size(); ++k)
            gap = std::max(gap, std::abs(sq.profile.q[k] - q.q[k]));
        trace.iterations.push_back({q, st.r0, st.d0, sq.profile, gap});

        NotificationProfile next;
        next.q.resize(q.q.size());
        for (std::size_t k = 0; k < q.q.size(); ++k)
            next.q[k] = (1.0 - cfg.damping) * q.q[k] + cfg.damping * sq.profile.q[k];

        q = next;
        if (gap <= cfg.tol) {
            trace.converged = true;
            break;
        }
    }

    trace.q_final = q;
    try {
        const fluid::FluidState st = equilibrium(q);
        trace.r0_final = st.r0;
        trace.d0_final = st.d0;
    } catch (const Error& e) {
        throw Error("fixpoint", "find_equilibrium",
                    std::string("final state: ") + e.what());
    }
    return trace;
}

namespace {

struct FrozenTotals {
    double score_sum = 0.0;
    std::int64_t matches = 0;
};

FrozenTotals frozen_sample(double r0, double d0, const packing::PackerFn& packer,
                           const valuation::Protocol& protocol,
                           const MarketParams& params, Rng& rng) {
    FrozenTotals totals;
    const int nr = probabilistic_round(r0, rng);
    const int nd = probabilistic_round(d0, rng);
    if (nr == 0 || nd == 0) return totals;

    std::normal_distribution<double> coord(0.0, 1.0);
    std::vector<Agent> riders(nr), drivers(nd);
    for (auto& a : riders) a = {coord(rng), coord(rng)};
    for (auto& a : drivers) a = {coord(rng), coord(rng)};

    std::vector<bool> rider_active(nr, true), driver_active(nd, true);
    std::set<std::pair<int, int>> dead_edges;  // evaluated (rejected) pairs
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double renege_prob =
        params.mu > 0.0 ? std::min(1.0, params.eta / params.mu) : 0.0;

    const int max_rounds = 100000;
    for (int round = 0; round < max_rounds; ++round) {
        packing::CycleSnapshot snap;
        for (int i = 0; i < nr; ++i)
            if (rider_active[i]) snap.riders.push_back(i);
        for (int j = 0; j < nd; ++j)
            if (driver_active[j]) {
                snap.drivers.push_back(j);
                snap.probs[j] = params.p;
            }
        if (snap.riders.empty() || snap.drivers.empty()) break;
        bool any_edge = false;
        for (int i : snap.riders)
            for (int j : snap.drivers) {
                if (dead_edges.count({i, j})) continue;
                const double dist = std::hypot(riders[i].x - drivers[j].x,
                                               riders[i].y - drivers[j].y);
                snap.weights[{i, j}] = 1.0 / (1.0 + dist);
                any_edge = true;
            }
        if (!any_edge) break;

        NotificationPlan plan = packer(snap, params, protocol, rng);
        if (plan.sets.empty()) break;  // packer refuses everything; no progress possible

        std::set<int> matched_this_round;
        for (const auto& [rid, set] : plan.sets) {
            // Response order is uniform over the set; acceptance draws are
            // homogeneous-p. The protocol picks the winner.
            std::vector<int> order = set;
            for (std::size_t i = order.size(); i > 1; --i) {
                std::uniform_int_distribution<std::size_t> pick(0, i - 1);
                std::swap(order[i - 1], order[pick(rng)]);
            }
            int winner = -1;
            double winner_w = -1.0;
            int acceptances = 0;
            for (int did : order) {
                if (unit(rng) >= params.p) continue;  // rejected
                ++acceptances;
                const double w = snap.weights.at({rid, did});
                switch (protocol.kind) {
                    case valuation::ProtocolKind::FA:
                        if (winner < 0) {
                            winner = did;
                            winner_w = w;
                        }
                        break;
                    case valuation::ProtocolKind::BA:
                    case valuation::ProtocolKind::KAccept:
                        if (w > winner_w) {
                            winner = did;
                            winner_w = w;
                        }
                        break;
                }
                if (protocol.kind == valuation::ProtocolKind::FA) break;
                if (protocol.kind == valuation::ProtocolKind::KAccept &&
                    acceptances >= protocol.k)
                    break;
            }
            if (winner >= 0) {
                rider_active[rid] = false;
                driver_active[winner] = false;
                matched_this_round.insert(rid);
                totals.score_sum += winner_w;
                ++totals.matches;
            } else {
                for (int did : set) dead_edges.insert({rid, did});
            }
        }

        for (int i = 0; i < nr; ++i) {
            if (!rider_active[i]) continue;
            if (renege_prob > 0.0 && unit(rng) < renege_prob) rider_active[i] = false;
        }
    }
    return totals;
}

}  // namespace

FrozenGraphScore frozen_graph_score(double r0, double d0,
                                    const packing::PackerFn& packer,
                                    const valuation::Protocol& protocol,
                                    const MarketParams& params, int n_samples,
                                    std::uint64_t seed, int jobs) {
    if (n_samples < 1)
        throw Error("fixpoint", "frozen_graph_score", "n_samples must be >= 1");
    std::vector<FrozenTotals> per_sample(n_samples);
    parallel_for(jobs, n_samples, [&](std::int64_t i) {
        Rng rng = make_rng(seed ^ 0xf60f3ull, std::uint64_t(i));
        per_sample[i] = frozen_sample(r0, d0, packer, protocol, params, rng);
    });
    double score_sum = 0.0;
    std::int64_t matches = 0;
    for (const auto& t : per_sample) {
        score_sum += t.score_sum;
        matches += t.matches;
    }
    FrozenGraphScore out;
    out.avg_score = matches > 0 ? score_sum / double(matches) : 0.0;
    out.matches_per_sample = double(matches) / double(n_samples);
    return out;
}

}  // namespace nedsim::fixpoint
