#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nedsim/packing.hpp"
#include "nedsim/types.hpp"
#include "nedsim/valuation.hpp"

namespace nedsim::sim {

struct SimConfig {
    double cycle_seconds = 3.0;
    int response_window_cycles = 7;
    double rider_renege_prob = 0.01;          // per cycle, waiting or mid-attempt
    double idle_driver_exit_prob = 0.001;     // per cycle
    double notified_driver_exit_prob = 0.0;   // per cycle
    int horizon_cycles = 400;
    double ar_gap = 0.0;                      // accept prob scaled to (1-x)p when |S_r| > 1
    std::optional<double> homogeneous_p;      // optimizer-visible p-bar (draws stay truthful)
    valuation::Protocol protocol = valuation::Protocol::fa();
    std::uint64_t seed = 0;
    bool record_events = false;

    void validate() const;
};

enum class RideOutcome { matched, reneged, unresolved };

struct RideRecord {
    int rider_id = -1;
    RideOutcome outcome = RideOutcome::unresolved;
    double match_time_s = 0.0;  // match wall time - arrival time; 0 unless matched
    int driver_id = -1;         // -1 unless matched
    double score = 0.0;         // w of the realized match; 0 unless matched
};

// Finalization event, kept only when record_events is set. `acceptances`
// lists every collected (driver, weight) acceptance at finalization time.
struct FinalizeEvent {
    int cycle = 0;
    int rider_id = -1;
    int winner_driver_id = -1;
    double winner_weight = 0.0;
    std::vector<std::pair<int, double>> acceptances;
};

struct SimResult {
    double avg_score = 0.0;
    double avg_match_time_s = 0.0;
    int match_count = 0;
    std::vector<RideRecord> per_ride;              // ordered by rider id
    std::vector<std::int64_t> notify_size_counts;  // index i = set size i, per packer epoch
    std::vector<FinalizeEvent> events;             // empty unless record_events
};

// Empirical notification-size profile q' from the per-epoch counts.
// All-zero counts yield the degenerate profile q_0 = 1.
NotificationProfile q_profile_of(const SimResult& result);

// Per-cycle observer invoked after each cycle's bookkeeping; used by tests
// to audit conservation invariants mid-run.
struct CycleView {
    int cycle;
    const std::vector<RiderState>& rider_states;    // indexed like scenario.riders
    const std::vector<DriverState>& driver_states;  // indexed like scenario.drivers
};
using CycleObserver = std::function<void(const CycleView&)>;

// Discrete-event, cycle-based marketplace simulation of the rider/driver
// lifecycle under FA / BA / k-Accept. Deterministic given config.seed.
SimResult run_simulation(const Scenario& scenario, const packing::PackerFn& packer,
                         const SimConfig& config, const MarketParams& params,
                         const CycleObserver& observer = nullptr);

struct MetricStats {
    double mean_score = 0.0, std_score = 0.0;
    double mean_match_time_s = 0.0, std_match_time_s = 0.0;
    double mean_match_count = 0.0, std_match_count = 0.0;
};

struct MonteCarloResult {
    std::vector<SimResult> instances;
    MetricStats stats;
};

using ScenarioSource = std::function<Scenario(std::uint64_t instance_seed)>;

// Runs n independent seeded instances (instance i gets seed derived from
// (config.seed, i)) and aggregates mean / sample std of the three metrics.
// Instances may run in parallel; results are identical for any job count.
MonteCarloResult run_monte_carlo(const ScenarioSource& source,
                                 const packing::PackerFn& packer,
                                 const SimConfig& config, const MarketParams& params,
                                 int n_instances, int jobs = 1);

}  // namespace nedsim::sim
