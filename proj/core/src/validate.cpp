#include "nedsim/validate.hpp"

#include <map>
#include <set>

#include "nedsim/error.hpp"

namespace nedsim {

std::vector<Violation> validate_plan(const NotificationPlan& plan,
                                     const Scenario& scenario,
                                     const MarketParams& params,
                                     const valuation::Protocol& protocol) {
    std::set<int> rider_ids, driver_ids;
    std::map<int, double> driver_p;
    for (const auto& r : scenario.riders) rider_ids.insert(r.id);
    for (const auto& d : scenario.drivers) {
        driver_ids.insert(d.id);
        driver_p[d.id] = d.accept_prob;
    }

    std::vector<Violation> out;
    std::map<int, int> seen_driver;  // driver -> first rider that claimed it
    for (const auto& [rider, set] : plan.sets) {
        if (!rider_ids.count(rider))
            throw Error("core", "validate_plan", "unknown rider id " + std::to_string(rider));
        for (int d : set) {
            if (!driver_ids.count(d))
                throw Error("core", "validate_plan", "unknown driver id " + std::to_string(d));
            auto [it, fresh] = seen_driver.emplace(d, rider);
            if (!fresh)
                out.push_back({ViolationKind::disjointness, rider, d,
                               "driver also notified for rider " + std::to_string(it->second)});
        }
        if (int(set.size()) > params.cap_u)
            out.push_back({ViolationKind::cardinality, rider, -1,
                           "set size " + std::to_string(set.size()) + " exceeds U=" +
                               std::to_string(params.cap_u)});

        valuation::OfferSet offers;
        for (int d : set) {
            auto w = scenario.weight(rider, d);
            if (!w)
                throw Error("core", "validate_plan",
                            "pair (" + std::to_string(rider) + "," + std::to_string(d) +
                                ") has no weight (infeasible)");
            offers.entries.push_back({*w, driver_p.at(d)});
        }
        if (offers.entries.empty()) continue;
        const double full = valuation::value(protocol, offers);
        for (std::size_t i = 0; i < set.size(); ++i) {
            valuation::OfferSet without = offers;
            without.entries.erase(without.entries.begin() + long(i));
            const double marginal = full - valuation::value(protocol, without);
            const double required = params.theta * driver_p.at(set[i]);
            if (marginal < required)
                out.push_back({ViolationKind::threshold, rider, set[i],
                               "marginal " + std::to_string(marginal) + " < theta*p " +
                                   std::to_string(required)});
        }
    }
    return out;
}

}  // namespace nedsim
