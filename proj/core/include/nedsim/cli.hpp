#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nedsim/fixpoint.hpp"
#include "nedsim/packing.hpp"
#include "nedsim/sim.hpp"
#include "nedsim/types.hpp"

namespace nedsim::cli {

struct SyntheticSpec {
    int n_riders = 50;
    int n_drivers = 50;
    double sigma = 1.0;
    TypeMix type_mix = TypeMix::paper_default();
    double radius = 0.0;            // <= 0: no pruning
    double rider_window_s = 1080.0; // arrivals uniform in [0, window)
    double driver_window_s = 600.0;
};

struct TraceSpec {
    std::string riders_path;
    std::string drivers_path;
    double radius = 0.0;
};

struct SweepGrid {
    std::vector<int> cap_u;
    std::vector<double> theta;
    std::vector<int> k;  // expands KAccept entries in `protocols`
    std::vector<std::string> protocols;
    std::vector<std::string> packers;
};

// Parsed union of everything a command needs. Built from a single JSON
// config document; unknown keys are rejected.
struct RunConfig {
    MarketParams market;
    valuation::Protocol protocol = valuation::Protocol::fa();
    std::string packer_name = "opt";
    packing::PackOptions pack_opts;
    sim::SimConfig sim_cfg;
    int n_instances = 1;
    bool per_ride_csv = false;
    std::optional<SyntheticSpec> synthetic;
    std::optional<TraceSpec> trace;
    fixpoint::FixpointConfig fix_cfg;
    std::optional<std::vector<double>> fluid_q;  // for `fluid`; also fixpoint q_init
    SweepGrid sweep;
    std::uint64_t seed = 0;
    int jobs = 1;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& json_text);

// Commands. `out_dir` is created if missing; every command is deterministic
// given the config seed.
void cmd_gen(const RunConfig& cfg, const std::string& out_dir);
void cmd_simulate(const RunConfig& cfg, const std::string& out_dir);
void cmd_sweep(const RunConfig& cfg, const std::string& out_dir);
void cmd_fluid(const RunConfig& cfg, const std::string& out_dir);
void cmd_fixpoint(const RunConfig& cfg, const std::string& out_dir);

// argv entry point used by the binary; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace nedsim::cli
