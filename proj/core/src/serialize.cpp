#include "nedsim/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace nedsim::serialize {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

const char* outcome_name(sim::RideOutcome o) {
    switch (o) {
        case sim::RideOutcome::matched: return "matched";
        case sim::RideOutcome::reneged: return "reneged";
        case sim::RideOutcome::unresolved: return "unresolved";
    }
    return "?";
}

ordered_json result_to_json(const sim::SimResult& r) {
    ordered_json j;
    j["avg_score"] = r.avg_score;
    j["avg_match_time_s"] = r.avg_match_time_s;
    j["match_count"] = r.match_count;
    j["q_profile"] = sim::q_profile_of(r).q;
    ordered_json rides = ordered_json::array();
    for (const auto& rec : r.per_ride) {
        ordered_json row;
        row["rider_id"] = rec.rider_id;
        row["outcome"] = outcome_name(rec.outcome);
        row["match_time_s"] = rec.match_time_s;
        row["driver_id"] = rec.driver_id;
        row["score"] = rec.score;
        rides.push_back(std::move(row));
    }
    j["per_ride"] = std::move(rides);
    return j;
}

}  // namespace

std::string per_ride_csv(const sim::SimResult& result) {
    std::ostringstream out;
    out << "rider_id,outcome,match_time_s,driver_id,score\n";
    for (const auto& rec : result.per_ride) {
        out << rec.rider_id << ',' << outcome_name(rec.outcome) << ','
            << format_double(rec.match_time_s) << ',' << rec.driver_id << ','
            << format_double(rec.score) << '\n';
    }
    return out.str();
}

std::string sim_result_json(const sim::SimResult& result) {
    return result_to_json(result).dump(2) + "\n";
}

std::string monte_carlo_json(const sim::MonteCarloResult& mc) {
    ordered_json j;
    j["n_instances"] = mc.instances.size();
    ordered_json stats;
    stats["mean_score"] = mc.stats.mean_score;
    stats["std_score"] = mc.stats.std_score;
    stats["mean_match_time_s"] = mc.stats.mean_match_time_s;
    stats["std_match_time_s"] = mc.stats.std_match_time_s;
    stats["mean_match_count"] = mc.stats.mean_match_count;
    stats["std_match_count"] = mc.stats.std_match_count;
    j["stats"] = std::move(stats);
    ordered_json rows = ordered_json::array();
    for (const auto& inst : mc.instances) {
        ordered_json row;
        row["avg_score"] = inst.avg_score;
        row["avg_match_time_s"] = inst.avg_match_time_s;
        row["match_count"] = inst.match_count;
        rows.push_back(std::move(row));
    }
    j["instances"] = std::move(rows);
    return j.dump(2) + "\n";
}

std::string instances_csv(const sim::MonteCarloResult& mc) {
    std::ostringstream out;
    out << "instance,avg_score,avg_match_time_s,match_count\n";
    for (std::size_t i = 0; i < mc.instances.size(); ++i) {
        const auto& inst = mc.instances[i];
        out << i << ',' << format_double(inst.avg_score) << ','
            << format_double(inst.avg_match_time_s) << ',' << inst.match_count << '\n';
    }
    return out.str();
}

std::string fluid_json(const fluid::FluidState& state,
                       const fluid::AbsorptionMetrics& metrics, double residual_inf) {
    ordered_json j;
    j["r0"] = state.r0;
    j["r"] = state.r;
    j["a"] = state.a;
    j["d0"] = state.d0;
    j["d"] = state.d;
    j["match_prob"] = metrics.match_prob;
    j["renege_prob"] = metrics.renege_prob;
    // NaN (undefined conditional time) serializes as null.
    j["cond_match_time"] = metrics.cond_match_time;
    j["residual_inf"] = residual_inf;
    return j.dump(2) + "\n";
}

std::string fixpoint_trace_json(const fixpoint::FixpointTrace& trace) {
    ordered_json j;
    ordered_json iters = ordered_json::array();
    for (const auto& it : trace.iterations) {
        ordered_json row;
        row["q"] = it.q.q;
        row["r0"] = it.r0;
        row["d0"] = it.d0;
        row["q_emp"] = it.q_emp.q;
        row["gap"] = it.gap;
        iters.push_back(std::move(row));
    }
    j["iterations"] = std::move(iters);
    j["converged"] = trace.converged;
    j["q_final"] = trace.q_final.q;
    j["r0_final"] = trace.r0_final;
    j["d0_final"] = trace.d0_final;
    return j.dump(2) + "\n";
}

std::string fixpoint_trace_csv(const fixpoint::FixpointTrace& trace) {
    std::ostringstream out;
    const int cap_u =
        trace.iterations.empty() ? trace.q_final.cap_u() : trace.iterations[0].q.cap_u();
    out << "iter";
    for (int i = 0; i <= cap_u; ++i) out << ",q" << i;
    out << ",R0,D0,gap\n";
    for (std::size_t t = 0; t < trace.iterations.size(); ++t) {
        const auto& it = trace.iterations[t];
        out << t;
        for (double qi : it.q.q) out << ',' << format_double(qi);
        out << ',' << format_double(it.r0) << ',' << format_double(it.d0) << ','
            << format_double(it.gap) << '\n';
    }
    return out.str();
}

}  // namespace nedsim::serialize
