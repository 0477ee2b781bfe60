#include <set>

#include "doctest.h"
#include "nedsim/scenario.hpp"
#include "nedsim/sim.hpp"
#include "oracles.hpp"

using namespace nedsim;
using namespace nedsim::sim;
using valuation::Protocol;

namespace {

Scenario tiny_scenario(const std::vector<std::pair<Vec2, double>>& rider_specs,
                       const std::vector<std::tuple<Vec2, double, double>>& driver_specs) {
    Scenario s;
    int id = 0;
    for (const auto& [pos, arrival] : rider_specs) {
        Rider r;
        r.id = id++;
        r.pos = pos;
        r.arrival_time_s = arrival;
        s.riders.push_back(r);
    }
    id = 0;
    for (const auto& [pos, p, arrival] : driver_specs) {
        Driver d;
        d.id = id++;
        d.pos = pos;
        d.accept_prob = p;
        d.arrival_time_s = arrival;
        s.drivers.push_back(d);
    }
    recompute_weights(s);
    return s;
}

SimConfig quiet_config(Protocol protocol, int horizon, int window = 1) {
    SimConfig cfg;
    cfg.protocol = protocol;
    cfg.horizon_cycles = horizon;
    cfg.response_window_cycles = window;
    cfg.rider_renege_prob = 0.0;
    cfg.idle_driver_exit_prob = 0.0;
    cfg.record_events = true;
    cfg.seed = 7;
    return cfg;
}

MarketParams params_u(int u) {
    MarketParams p;
    p.cap_u = u;
    return p;
}

const packing::PackOptions kFallback{24, true, 0.8, 2};

}  // namespace

TEST_CASE("single rider and driver with p=1 match one window after notification") {
    auto s = tiny_scenario({{{0, 0}, 0.0}}, {{{1, 0}, 1.0, 0.0}});
    const auto cfg = quiet_config(Protocol::fa(), 10);
    const auto res = run_simulation(s, packing::make_packer("ed"), cfg, params_u(1));
    CHECK(res.match_count == 1);
    CHECK(res.avg_match_time_s == doctest::Approx(3.0));  // (cycle 0 + delay 1) * 3s
    CHECK(res.avg_score == doctest::Approx(0.5));
    REQUIRE(res.per_ride.size() == 1);
    CHECK(res.per_ride[0].outcome == RideOutcome::matched);
    CHECK(res.per_ride[0].driver_id == 0);

    // A mid-cycle arrival shifts the recorded match time accordingly.
    auto s2 = tiny_scenario({{{0, 0}, 1.0}}, {{{1, 0}, 1.0, 0.0}});
    const auto res2 = run_simulation(s2, packing::make_packer("ed"), cfg, params_u(1));
    CHECK(res2.avg_match_time_s == doctest::Approx(2.0));
}

TEST_CASE("no drivers: riders renege or end unresolved") {
    auto s = tiny_scenario({{{0, 0}, 0.0}, {{1, 1}, 3.0}}, {});
    SimConfig cfg = quiet_config(Protocol::fa(), 50);
    cfg.rider_renege_prob = 0.05;
    const auto res = run_simulation(s, packing::make_packer("ed"), cfg, params_u(1));
    CHECK(res.match_count == 0);
    for (const auto& rec : res.per_ride)
        CHECK(rec.outcome != RideOutcome::matched);
}

TEST_CASE("p=0 everywhere: no matches, riders unresolved, drivers idle at horizon") {
    // One driver: each attempt resolves on the odd cycle, so the driver is
    // back to idle when the even-length horizon ends.
    auto s = tiny_scenario({{{0, 0}, 0.0}}, {{{1, 0}, 0.0, 0.0}});
    std::vector<DriverState> final_states;
    const auto cfg = quiet_config(Protocol::ba(), 4);
    const auto res = run_simulation(
        s, packing::make_packer("ed"), cfg, params_u(1),
        [&](const CycleView& view) {
            if (view.cycle == 3) final_states = view.driver_states;
        });
    CHECK(res.match_count == 0);
    REQUIRE(res.per_ride.size() == 1);
    CHECK(res.per_ride[0].outcome == RideOutcome::unresolved);
    for (auto st : final_states) CHECK(st == DriverState::idle);
}

TEST_CASE("FA takes the first responder, BA the best, k=2 the best of both") {
    // Driver 0: low weight (0.5); driver 1: weight 1.0. Both accept and both
    // respond in the same cycle (window 1); FA ties break toward driver 0.
    auto s = tiny_scenario({{{0, 0}, 0.0}},
                           {{{1, 0}, 1.0, 0.0}, {{0, 0}, 1.0, 0.0}});
    auto both = [](const packing::CycleSnapshot& snap, const MarketParams&,
                   const valuation::Protocol&, Rng&) {
        NotificationPlan plan;
        if (snap.riders.size() == 1 && snap.drivers.size() == 2)
            plan.sets[snap.riders[0]] = {1, 0};  // descending weight
        return plan;
    };

    for (auto protocol : {Protocol::fa(), Protocol::ba(), Protocol::k_accept(2)}) {
        const auto res = run_simulation(s, both, quiet_config(protocol, 5), params_u(2));
        REQUIRE(res.match_count == 1);
        const int want = protocol.kind == valuation::ProtocolKind::FA ? 0 : 1;
        CHECK(res.per_ride[0].driver_id == want);
        REQUIRE(res.events.size() == 1);
        for (const auto& [driver, w] : res.events[0].acceptances)
            CHECK(res.events[0].winner_weight >= w);
        if (protocol.kind == valuation::ProtocolKind::FA)
            CHECK(res.events[0].acceptances.size() == 1);
    }
}

TEST_CASE("singleton plans make the protocols trace-identical") {
    Rng seeds = make_rng(2211);
    for (int trial = 0; trial < 10; ++trial) {
        Scenario s = sample_scenario(6, 8, 1.0, TypeMix::paper_default(), seeds());
        for (std::size_t i = 0; i < s.riders.size(); ++i)
            s.riders[i].arrival_time_s = double(i) * 2.0;
        SimConfig cfg = quiet_config(Protocol::fa(), 60, 4);
        cfg.rider_renege_prob = 0.01;
        cfg.idle_driver_exit_prob = 0.001;
        cfg.seed = seeds();

        const auto packer = packing::make_packer("ed");
        const auto fa = run_simulation(s, packer, cfg, params_u(1));
        cfg.protocol = Protocol::ba();
        const auto ba = run_simulation(s, packer, cfg, params_u(1));
        cfg.protocol = Protocol::k_accept(1);
        const auto ka = run_simulation(s, packer, cfg, params_u(1));

        auto same = [](const SimResult& a, const SimResult& b) {
            REQUIRE(a.per_ride.size() == b.per_ride.size());
            for (std::size_t i = 0; i < a.per_ride.size(); ++i) {
                CHECK(a.per_ride[i].rider_id == b.per_ride[i].rider_id);
                CHECK(a.per_ride[i].outcome == b.per_ride[i].outcome);
                CHECK(a.per_ride[i].match_time_s == b.per_ride[i].match_time_s);
                CHECK(a.per_ride[i].driver_id == b.per_ride[i].driver_id);
            }
            CHECK(a.notify_size_counts == b.notify_size_counts);
        };
        same(fa, ba);
        same(fa, ka);
    }
}

TEST_CASE("ar_gap scales acceptance only for non-exclusive sets") {
    // Singleton sets keep the raw p even with a large ar_gap.
    auto s = tiny_scenario({{{0, 0}, 0.0}}, {{{1, 0}, 1.0, 0.0}});
    SimConfig cfg = quiet_config(Protocol::fa(), 5);
    cfg.ar_gap = 0.9;
    const auto res = run_simulation(s, packing::make_packer("ed"), cfg, params_u(1));
    CHECK(res.match_count == 1);

    // Two-driver sets at p=1, ar_gap=0.5: P(any accept) = 0.75. One attempt
    // per instance (horizon 2, window 1).
    auto s2 = tiny_scenario({{{0, 0}, 0.0}},
                            {{{1, 0}, 1.0, 0.0}, {{0, 1}, 1.0, 0.0}});
    auto both = [](const packing::CycleSnapshot& snap, const MarketParams&,
                   const valuation::Protocol&, Rng&) {
        NotificationPlan plan;
        if (snap.riders.size() == 1 && snap.drivers.size() == 2)
            plan.sets[snap.riders[0]] = {0, 1};
        return plan;
    };
    SimConfig cfg2 = quiet_config(Protocol::ba(), 2);
    cfg2.ar_gap = 0.5;
    cfg2.seed = 99;
    const auto mc = run_monte_carlo([&](std::uint64_t) { return s2; }, both, cfg2,
                                    params_u(2), 400, 2);
    CHECK(mc.stats.mean_match_count == doctest::Approx(0.75).epsilon(0.12));
}

TEST_CASE("homogeneous_p blinds the optimizer but not the accept draws") {
    // Optimizer-visible probabilities become p-bar; a probe packer records them.
    auto s = tiny_scenario({{{0, 0}, 0.0}}, {{{1, 0}, 0.9, 0.0}, {{0, 1}, 0.1, 0.0}});
    std::map<int, double> seen;
    auto probe = [&](const packing::CycleSnapshot& snap, const MarketParams& mp,
                     const valuation::Protocol& pr, Rng& rng) {
        for (const auto& [d, p] : snap.probs) seen[d] = p;
        return packing::pack_ed(snap);
    };
    SimConfig cfg = quiet_config(Protocol::fa(), 3);
    cfg.homogeneous_p = 0.4;
    run_simulation(s, probe, cfg, params_u(1));
    REQUIRE(seen.size() == 2);
    CHECK(seen.at(0) == doctest::Approx(0.4));
    CHECK(seen.at(1) == doctest::Approx(0.4));
}

TEST_CASE("q_profile counts epochs of waiting riders") {
    SimResult hand;
    hand.notify_size_counts = {1, 0, 1, 1};
    const auto q = q_profile_of(hand);
    REQUIRE(q.q.size() == 4);
    CHECK(q.q[0] == doctest::Approx(1.0 / 3.0));
    CHECK(q.q[1] == doctest::Approx(0.0));
    CHECK(q.q[2] == doctest::Approx(1.0 / 3.0));
    CHECK(q.q[3] == doctest::Approx(1.0 / 3.0));

    SimResult empty;
    empty.notify_size_counts = {0, 0};
    CHECK(q_profile_of(empty).q == std::vector<double>{1.0});

    // ED produces only singletons: q has mass on sizes 0 and 1 only.
    auto s = sample_scenario(6, 6, 1.0, TypeMix::paper_default(), 3);
    const auto res = run_simulation(s, packing::make_packer("ed"),
                                    quiet_config(Protocol::fa(), 40, 3), params_u(3));
    const auto prof = q_profile_of(res);
    REQUIRE(prof.q.size() == 4);
    CHECK(prof.q[2] == 0.0);
    CHECK(prof.q[3] == 0.0);
    CHECK(prof.q[0] + prof.q[1] == doctest::Approx(1.0));
}

TEST_CASE("conservation invariants hold across random runs") {
    Rng seeds = make_rng(31337);
    for (int trial = 0; trial < 20; ++trial) {
        Scenario s = sample_scenario(10, 12, 1.0, TypeMix::paper_default(), seeds());
        for (std::size_t i = 0; i < s.riders.size(); ++i)
            s.riders[i].arrival_time_s = double(seeds() % 90);
        for (std::size_t i = 0; i < s.drivers.size(); ++i)
            s.drivers[i].arrival_time_s = double(seeds() % 60);
        SimConfig cfg;
        cfg.protocol = trial % 2 ? Protocol::ba() : Protocol::k_accept(2);
        cfg.horizon_cycles = 60;
        cfg.response_window_cycles = 7;
        cfg.seed = seeds();
        MarketParams params = params_u(3);

        int max_matched = 0;
        const auto res = run_simulation(
            s, packing::make_packer("opt", kFallback), cfg, params,
            [&](const CycleView& view) {
                int matched_r = 0, matched_d = 0;
                for (auto st : view.rider_states)
                    if (st == RiderState::matched) ++matched_r;
                for (auto st : view.driver_states)
                    if (st == DriverState::matched) ++matched_d;
                CHECK(matched_r == matched_d);
                CHECK(matched_r >= max_matched);  // matches never cancel
                max_matched = matched_r;
            });
        CHECK(res.match_count == max_matched);

        // Per-ride records cover every arrived rider exactly once.
        std::set<int> seen;
        for (const auto& rec : res.per_ride) CHECK(seen.insert(rec.rider_id).second);
        CHECK(seen.size() == s.riders.size());
    }
}

TEST_CASE("run_monte_carlo aggregates and is reproducible") {
    auto source = [](std::uint64_t seed) {
        return sample_scenario(5, 6, 1.0, TypeMix::paper_default(), seed);
    };
    SimConfig cfg = quiet_config(Protocol::fa(), 30, 3);
    cfg.rider_renege_prob = 0.01;
    cfg.seed = 5150;
    const auto packer = packing::make_packer("greedy");

    const auto single = run_monte_carlo(source, packer, cfg, params_u(2), 1);
    CHECK(single.stats.mean_match_count == doctest::Approx(single.instances[0].match_count));
    CHECK(single.stats.std_score == 0.0);

    const auto a = run_monte_carlo(source, packer, cfg, params_u(2), 8, 1);
    const auto b = run_monte_carlo(source, packer, cfg, params_u(2), 8, 2);
    CHECK(a.stats.mean_score == b.stats.mean_score);
    CHECK(a.stats.mean_match_count == b.stats.mean_match_count);
    for (std::size_t i = 0; i < a.instances.size(); ++i)
        CHECK(a.instances[i].match_count == b.instances[i].match_count);
}

TEST_CASE("arrivals beyond the horizon are rejected") {
    auto s = tiny_scenario({{{0, 0}, 1000.0}}, {{{1, 0}, 1.0, 0.0}});
    CHECK_THROWS_AS(
        run_simulation(s, packing::make_packer("ed"), quiet_config(Protocol::fa(), 5),
                       params_u(1)),
        Error);
}
