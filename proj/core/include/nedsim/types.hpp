#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace nedsim {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double euclidean_distance(const Vec2& a, const Vec2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Fluid-model rates and dispatch bounds. Rates are per unit time; cap_u and
// theta are the packing constraints U and the opportunity-cost threshold.
struct MarketParams {
    double lambda_r = 1.0;      // rider arrival rate
    double lambda_d = 1.0;      // driver arrival rate
    double mu = 0.1;            // driver response rate
    double p = 0.4;             // homogeneous acceptance probability
    double eta = 0.01;          // rider abandonment rate
    double eta_idle = 0.01;     // idle-driver abandonment rate
    double eta_notified = 0.0;  // notified-driver abandonment rate
    int cap_u = 3;              // max notification-set size U
    double theta = 0.0;         // marginal-efficiency threshold

    void validate() const;  // throws Error("core", "market_params", ...)
};

enum class DriverState { idle, notified, accepted_pending, matched, departed };
enum class RiderState { waiting, notified, matched, reneged };

struct Driver {
    int id = 0;
    Vec2 pos;
    double accept_prob = 1.0;
    double arrival_time_s = 0.0;
    DriverState state = DriverState::idle;
};

struct Rider {
    int id = 0;
    double arrival_time_s = 0.0;
    Vec2 pos;
    RiderState state = RiderState::waiting;
};

struct ScenarioMeta {
    std::uint64_t seed = 0;
    double sigma = 1.0;
};

// A spatial snapshot or timed trace of riders and drivers. Weights are
// sparse: a missing (rider, driver) key means the pair is infeasible.
struct Scenario {
    std::vector<Rider> riders;
    std::vector<Driver> drivers;
    std::map<std::pair<int, int>, double> weights;  // (rider id, driver id) -> w >= 0
    ScenarioMeta meta;

    std::optional<double> weight(int rider_id, int driver_id) const {
        auto it = weights.find({rider_id, driver_id});
        if (it == weights.end()) return std::nullopt;
        return it->second;
    }
};

// Distribution of notification-set sizes per dispatch epoch:
// q[i] = probability a waiting rider is notified to exactly i drivers,
// i = 0..U (q[0] covers "present but not notified").
struct NotificationProfile {
    std::vector<double> q;

    int cap_u() const { return int(q.size()) - 1; }
    void validate() const;  // nonneg, sums to 1 within 1e-9
};

// Disjoint notification sets; each driver list is ordered by descending
// weight w_rd (ties by ascending driver id).
struct NotificationPlan {
    std::map<int, std::vector<int>> sets;  // rider id -> [driver ids]
};

// Discrete distribution over driver acceptance-probability levels.
struct TypeMix {
    std::vector<double> levels;
    std::vector<double> weights;

    static TypeMix paper_default() {
        return TypeMix{{0.1, 0.33, 0.66, 0.9}, {0.1, 0.3, 0.3, 0.3}};
    }
    void validate() const;  // throws on malformed distribution
};

}  // namespace nedsim
