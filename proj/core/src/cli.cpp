#include "nedsim/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "json.hpp"

#include "nedsim/error.hpp"
#include "nedsim/scenario.hpp"
#include "nedsim/serialize.hpp"

namespace nedsim::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& msg) {
    throw Error("cli", "config", msg);
}

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            config_error("unknown key '" + it.key() + "' in " + where);
}

double num(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) config_error(std::string(key) + " must be a number");
    return obj[key].get<double>();
}

int integer(const json& obj, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer()) config_error(std::string(key) + " must be an integer");
    return obj[key].get<int>();
}

bool boolean(const json& obj, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) config_error(std::string(key) + " must be a boolean");
    return obj[key].get<bool>();
}

std::string text(const json& obj, const char* key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) config_error(std::string(key) + " must be a string");
    return obj[key].get<std::string>();
}

std::vector<double> num_list(const json& arr, const std::string& where) {
    if (!arr.is_array()) config_error(where + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : arr) {
        if (!v.is_number()) config_error(where + " must contain only numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

valuation::Protocol parse_protocol_name(const std::string& name, int k) {
    if (name == "FA") return valuation::Protocol::fa();
    if (name == "BA") return valuation::Protocol::ba();
    if (name == "KAccept") return valuation::Protocol::k_accept(k);
    config_error("unknown protocol '" + name + "' (expected FA, BA, or KAccept)");
}

void parse_market(const json& j, MarketParams& m) {
    check_keys(j, {"lambda_r", "lambda_d", "mu", "p", "eta", "eta_idle", "eta_notified",
                   "cap_u", "theta"},
               "market");
    m.lambda_r = num(j, "lambda_r", m.lambda_r);
    m.lambda_d = num(j, "lambda_d", m.lambda_d);
    m.mu = num(j, "mu", m.mu);
    m.p = num(j, "p", m.p);
    m.eta = num(j, "eta", m.eta);
    m.eta_idle = num(j, "eta_idle", m.eta_idle);
    m.eta_notified = num(j, "eta_notified", m.eta_notified);
    m.cap_u = integer(j, "cap_u", m.cap_u);
    m.theta = num(j, "theta", m.theta);
    m.validate();
}

void parse_sim(const json& j, RunConfig& cfg) {
    check_keys(j, {"cycle_seconds", "response_window_cycles", "rider_renege_prob",
                   "idle_driver_exit_prob", "notified_driver_exit_prob", "horizon_cycles",
                   "ar_gap", "homogeneous_p", "n_instances", "per_ride_csv"},
               "sim");
    auto& s = cfg.sim_cfg;
    s.cycle_seconds = num(j, "cycle_seconds", s.cycle_seconds);
    s.response_window_cycles = integer(j, "response_window_cycles", s.response_window_cycles);
    s.rider_renege_prob = num(j, "rider_renege_prob", s.rider_renege_prob);
    s.idle_driver_exit_prob = num(j, "idle_driver_exit_prob", s.idle_driver_exit_prob);
    s.notified_driver_exit_prob =
        num(j, "notified_driver_exit_prob", s.notified_driver_exit_prob);
    s.horizon_cycles = integer(j, "horizon_cycles", s.horizon_cycles);
    s.ar_gap = num(j, "ar_gap", s.ar_gap);
    if (j.contains("homogeneous_p") && !j["homogeneous_p"].is_null())
        s.homogeneous_p = num(j, "homogeneous_p", 0.4);
    cfg.n_instances = integer(j, "n_instances", cfg.n_instances);
    cfg.per_ride_csv = boolean(j, "per_ride_csv", cfg.per_ride_csv);
}

void parse_scenario(const json& j, RunConfig& cfg) {
    const std::string type = text(j, "type", "");
    if (type == "synthetic") {
        check_keys(j, {"type", "n_riders", "n_drivers", "sigma", "radius",
                       "rider_window_s", "driver_window_s", "type_mix"},
                   "scenario");
        SyntheticSpec spec;
        spec.n_riders = integer(j, "n_riders", spec.n_riders);
        spec.n_drivers = integer(j, "n_drivers", spec.n_drivers);
        spec.sigma = num(j, "sigma", spec.sigma);
        spec.radius = num(j, "radius", spec.radius);
        spec.rider_window_s = num(j, "rider_window_s", spec.rider_window_s);
        spec.driver_window_s = num(j, "driver_window_s", spec.driver_window_s);
        if (j.contains("type_mix")) {
            check_keys(j["type_mix"], {"levels", "weights"}, "scenario.type_mix");
            spec.type_mix.levels = num_list(j["type_mix"]["levels"], "type_mix.levels");
            spec.type_mix.weights = num_list(j["type_mix"]["weights"], "type_mix.weights");
        }
        if (!(spec.sigma > 0.0)) config_error("scenario.sigma must be > 0");
        spec.type_mix.validate();
        cfg.synthetic = spec;
    } else if (type == "trace") {
        check_keys(j, {"type", "riders", "drivers", "radius"}, "scenario");
        TraceSpec spec;
        spec.riders_path = text(j, "riders", "");
        spec.drivers_path = text(j, "drivers", "");
        spec.radius = num(j, "radius", spec.radius);
        if (spec.riders_path.empty() || spec.drivers_path.empty())
            config_error("scenario.trace requires 'riders' and 'drivers' paths");
        cfg.trace = spec;
    } else {
        config_error("scenario.type must be 'synthetic' or 'trace'");
    }
}

void parse_fixpoint(const json& j, RunConfig& cfg) {
    check_keys(j, {"n_snapshot_samples", "damping", "tol", "max_iter", "q_init"},
               "fixpoint");
    auto& f = cfg.fix_cfg;
    f.n_snapshot_samples = integer(j, "n_snapshot_samples", f.n_snapshot_samples);
    f.damping = num(j, "damping", f.damping);
    f.tol = num(j, "tol", f.tol);
    f.max_iter = integer(j, "max_iter", f.max_iter);
    if (j.contains("q_init")) cfg.fluid_q = num_list(j["q_init"], "fixpoint.q_init");
}

void parse_sweep(const json& j, SweepGrid& g) {
    check_keys(j, {"cap_u", "theta", "k", "protocol", "packer"}, "sweep");
    if (j.contains("cap_u"))
        for (const auto& v : j["cap_u"]) g.cap_u.push_back(v.get<int>());
    if (j.contains("theta")) g.theta = num_list(j["theta"], "sweep.theta");
    if (j.contains("k"))
        for (const auto& v : j["k"]) g.k.push_back(v.get<int>());
    if (j.contains("protocol"))
        for (const auto& v : j["protocol"]) g.protocols.push_back(v.get<std::string>());
    if (j.contains("packer"))
        for (const auto& v : j["packer"]) g.packers.push_back(v.get<std::string>());
}

RunConfig parse_config_json(const json& root) {
    if (!root.is_object()) config_error("config root must be a JSON object");
    check_keys(root,
               {"seed", "jobs", "market", "protocol", "packer", "scenario", "sim",
                "fluid", "fixpoint", "sweep"},
               "config root");
    RunConfig cfg;
    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer())
            config_error("seed must be an integer");
        cfg.seed = root["seed"].get<std::uint64_t>();
    }
    cfg.jobs = integer(root, "jobs", cfg.jobs);
    if (cfg.jobs < 1) config_error("jobs must be >= 1");
    if (root.contains("market")) parse_market(root["market"], cfg.market);
    if (root.contains("protocol")) {
        const auto& pj = root["protocol"];
        check_keys(pj, {"kind", "k"}, "protocol");
        cfg.protocol = parse_protocol_name(text(pj, "kind", "FA"), integer(pj, "k", 1));
    }
    if (root.contains("packer")) {
        const auto& pj = root["packer"];
        check_keys(pj, {"name", "component_cap", "fallback", "rej_threshold",
                        "min_commit_size"},
                   "packer");
        cfg.packer_name = text(pj, "name", cfg.packer_name);
        cfg.pack_opts.component_cap = integer(pj, "component_cap", cfg.pack_opts.component_cap);
        const std::string fb = text(pj, "fallback", "greedy");
        if (fb == "greedy")
            cfg.pack_opts.fallback_greedy = true;
        else if (fb == "error")
            cfg.pack_opts.fallback_greedy = false;
        else
            config_error("packer.fallback must be 'greedy' or 'error'");
        cfg.pack_opts.rej_threshold = num(pj, "rej_threshold", cfg.pack_opts.rej_threshold);
        cfg.pack_opts.min_commit_size =
            integer(pj, "min_commit_size", cfg.pack_opts.min_commit_size);
    } else {
        cfg.pack_opts.fallback_greedy = true;
    }
    if (root.contains("scenario")) parse_scenario(root["scenario"], cfg);
    if (root.contains("sim")) parse_sim(root["sim"], cfg);
    if (root.contains("fixpoint")) parse_fixpoint(root["fixpoint"], cfg);
    if (root.contains("fluid")) {
        check_keys(root["fluid"], {"q"}, "fluid");
        if (root["fluid"].contains("q"))
            cfg.fluid_q = num_list(root["fluid"]["q"], "fluid.q");
    }
    if (root.contains("sweep")) parse_sweep(root["sweep"], cfg.sweep);
    return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cli", "write", "cannot open " + path.string());
    out << content;
    if (!out) throw Error("cli", "write", "write failed for " + path.string());
}

// Synthetic scenario with arrival times spread over the configured windows.
Scenario synthesize(const SyntheticSpec& spec, std::uint64_t seed) {
    Scenario s = sample_scenario(spec.n_riders, spec.n_drivers, spec.sigma,
                                 spec.type_mix, seed, spec.radius);
    Rng rng = make_rng(seed, 0xa771);
    std::uniform_real_distribution<double> rw(0.0, spec.rider_window_s);
    std::uniform_real_distribution<double> dw(0.0, spec.driver_window_s);
    for (auto& r : s.riders) r.arrival_time_s = spec.rider_window_s > 0 ? rw(rng) : 0.0;
    for (auto& d : s.drivers) d.arrival_time_s = spec.driver_window_s > 0 ? dw(rng) : 0.0;
    return s;
}

sim::ScenarioSource make_source(const RunConfig& cfg) {
    if (cfg.synthetic) {
        const SyntheticSpec spec = *cfg.synthetic;
        return [spec](std::uint64_t instance_seed) { return synthesize(spec, instance_seed); };
    }
    if (cfg.trace) {
        auto shared = std::make_shared<Scenario>(
            load_trace(cfg.trace->riders_path, cfg.trace->drivers_path, cfg.trace->radius));
        return [shared](std::uint64_t) { return *shared; };
    }
    config_error("a 'scenario' section is required for this command");
}

sim::SimConfig sim_config_of(const RunConfig& cfg) {
    sim::SimConfig s = cfg.sim_cfg;
    s.protocol = cfg.protocol;
    s.seed = cfg.seed;
    if (cfg.protocol.kind == valuation::ProtocolKind::KAccept &&
        (cfg.protocol.k < 1 || cfg.protocol.k > cfg.market.cap_u))
        config_error("protocol k must be in [1, U]");
    s.validate();
    return s;
}

NotificationProfile profile_from(const std::vector<double>& q, int cap_u) {
    NotificationProfile prof;
    prof.q = q;
    prof.validate();
    if (prof.cap_u() != cap_u)
        config_error("q has " + std::to_string(q.size()) + " entries, expected U+1 = " +
                     std::to_string(cap_u + 1));
    return prof;
}

std::string csv_safe(std::string msg) {
    for (auto& c : msg)
        if (c == ',' || c == '\n') c = ';';
    return msg;
}

}  // namespace

RunConfig parse_config_text(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        config_error(std::string("invalid JSON: ") + e.what());
    }
    return parse_config_json(root);
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cli", "config", "cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void cmd_gen(const RunConfig& cfg, const std::string& out_dir) {
    if (!cfg.synthetic) throw Error("cli", "gen", "gen requires a synthetic scenario");
    Scenario s = synthesize(*cfg.synthetic, cfg.seed);

    std::ostringstream riders;
    riders << "id,arrival_time_s,x,y\n";
    for (const auto& r : s.riders)
        riders << r.id << ',' << serialize::format_double(r.arrival_time_s) << ','
               << serialize::format_double(r.pos.x) << ','
               << serialize::format_double(r.pos.y) << '\n';
    std::ostringstream drivers;
    drivers << "id,arrival_time_s,x,y,accept_prob\n";
    for (const auto& d : s.drivers)
        drivers << d.id << ',' << serialize::format_double(d.arrival_time_s) << ','
                << serialize::format_double(d.pos.x) << ','
                << serialize::format_double(d.pos.y) << ','
                << serialize::format_double(d.accept_prob) << '\n';
    write_file(fs::path(out_dir) / "riders.csv", riders.str());
    write_file(fs::path(out_dir) / "drivers.csv", drivers.str());
}

void cmd_simulate(const RunConfig& cfg, const std::string& out_dir) {
    const sim::SimConfig sc = sim_config_of(cfg);
    const auto packer = packing::make_packer(cfg.packer_name, cfg.pack_opts);
    const auto source = make_source(cfg);
    const auto mc = sim::run_monte_carlo(source, packer, sc, cfg.market,
                                         cfg.n_instances, cfg.jobs);
    write_file(fs::path(out_dir) / "sim_aggregate.json", serialize::monte_carlo_json(mc));
    write_file(fs::path(out_dir) / "instances.csv", serialize::instances_csv(mc));
    if (cfg.n_instances == 1)
        write_file(fs::path(out_dir) / "sim_result.json",
                   serialize::sim_result_json(mc.instances[0]));
    if (cfg.per_ride_csv) {
        for (std::size_t i = 0; i < mc.instances.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "per_ride_%03zu.csv", i);
            write_file(fs::path(out_dir) / name, serialize::per_ride_csv(mc.instances[i]));
        }
    }
}

void cmd_sweep(const RunConfig& cfg, const std::string& out_dir) {
    SweepGrid grid = cfg.sweep;
    if (grid.cap_u.empty()) grid.cap_u = {cfg.market.cap_u};
    if (grid.theta.empty()) grid.theta = {cfg.market.theta};
    if (grid.k.empty()) grid.k = {1};
    if (grid.protocols.empty()) grid.protocols = {"FA"};
    if (grid.packers.empty()) grid.packers = {cfg.packer_name};

    struct Cell {
        std::string packer, protocol;
        int k, cap_u;
        double theta;
        bool operator<(const Cell& o) const {
            return std::tie(packer, protocol, k, cap_u, theta) <
                   std::tie(o.packer, o.protocol, o.k, o.cap_u, o.theta);
        }
    };
    std::set<Cell> cells;  // duplicates collapse; k pinned to 0 unless KAccept
    for (const auto& packer : grid.packers)
        for (const auto& proto : grid.protocols)
            for (int k : grid.k)
                for (int u : grid.cap_u)
                    for (double th : grid.theta)
                        cells.insert({packer, proto, proto == "KAccept" ? k : 0, u, th});
    if (cells.empty()) throw Error("cli", "sweep", "empty sweep grid");

    std::ostringstream out;
    out << "packer,protocol,k,U,theta,mean_score,std_score,mean_match_time_s,"
           "std_match_time_s,mean_match_count,std_match_count,error\n";
    const auto source = make_source(cfg);
    for (const auto& cell : cells) {
        out << cell.packer << ',' << cell.protocol << ',' << cell.k << ',' << cell.cap_u
            << ',' << serialize::format_double(cell.theta) << ',';
        try {
            RunConfig cell_cfg = cfg;
            cell_cfg.market.cap_u = cell.cap_u;
            cell_cfg.market.theta = cell.theta;
            cell_cfg.packer_name = cell.packer;
            cell_cfg.protocol = parse_protocol_name(cell.protocol, std::max(1, cell.k));
            const sim::SimConfig sc = sim_config_of(cell_cfg);
            const auto packer = packing::make_packer(cell.packer, cfg.pack_opts);
            const auto mc = sim::run_monte_carlo(source, packer, sc, cell_cfg.market,
                                                 cfg.n_instances, cfg.jobs);
            out << serialize::format_double(mc.stats.mean_score) << ','
                << serialize::format_double(mc.stats.std_score) << ','
                << serialize::format_double(mc.stats.mean_match_time_s) << ','
                << serialize::format_double(mc.stats.std_match_time_s) << ','
                << serialize::format_double(mc.stats.mean_match_count) << ','
                << serialize::format_double(mc.stats.std_match_count) << ",\n";
        } catch (const std::exception& e) {
            out << ",,,,,," << csv_safe(e.what()) << '\n';
        }
    }
    write_file(fs::path(out_dir) / "sweep.csv", out.str());
}

void cmd_fluid(const RunConfig& cfg, const std::string& out_dir) {
    if (!cfg.fluid_q) throw Error("cli", "fluid", "config needs fluid.q");
    const NotificationProfile q = profile_from(*cfg.fluid_q, cfg.market.cap_u);
    const bool ba = cfg.protocol.kind == valuation::ProtocolKind::BA;
    if (!ba && cfg.protocol.kind != valuation::ProtocolKind::FA)
        throw Error("cli", "fluid", "fluid command supports FA or BA only");

    const fluid::FluidState state =
        ba ? fluid::ba_equilibrium(cfg.market, q) : fluid::fa_equilibrium(cfg.market, q);
    const auto residual = ba ? fluid::ba_flow_residual(cfg.market, q, state)
                             : fluid::fa_flow_residual(cfg.market, q, state);
    double res_inf = 0.0;
    for (double v : residual) res_inf = std::max(res_inf, std::abs(v));
    const auto model = fluid::build_generator(cfg.protocol, cfg.market, q);
    const auto metrics = fluid::absorption_metrics(model);
    write_file(fs::path(out_dir) / "fluid.json",
               serialize::fluid_json(state, metrics, res_inf));
}

void cmd_fixpoint(const RunConfig& cfg, const std::string& out_dir) {
    fixpoint::FixpointConfig fc = cfg.fix_cfg;
    fc.seed = cfg.seed;
    fc.jobs = cfg.jobs;
    NotificationProfile q_init;
    if (cfg.fluid_q) {
        q_init = profile_from(*cfg.fluid_q, cfg.market.cap_u);
    } else {
        q_init.q.assign(std::size_t(cfg.market.cap_u) + 1, 0.0);
        q_init.q[0] = 1.0;  // cold start: nobody notified
    }
    const auto packer = packing::make_packer(cfg.packer_name, cfg.pack_opts);
    const auto trace =
        fixpoint::find_equilibrium(cfg.protocol, cfg.market, packer, fc, q_init);
    const auto frozen = fixpoint::frozen_graph_score(
        trace.r0_final, trace.d0_final, packer, cfg.protocol, cfg.market,
        fc.n_snapshot_samples, derive_seed(fc.seed, 0xf502e), fc.jobs);

    std::string json_text = serialize::fixpoint_trace_json(trace);
    // Append the frozen-graph block inside the same document.
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(json_text);
    j["frozen_graph"] = {{"avg_score", frozen.avg_score},
                         {"matches_per_sample", frozen.matches_per_sample}};
    write_file(fs::path(out_dir) / "fixpoint.json", j.dump(2) + "\n");
    write_file(fs::path(out_dir) / "fixpoint_trace.csv",
               serialize::fixpoint_trace_csv(trace));
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Non-exclusive dispatch simulation and analysis toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    int jobs_override = 0;

    app.add_option("--config", config_path, "JSON config file")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });
    app.add_option("--jobs", jobs_override, "parallel workers");

    auto* gen = app.add_subcommand("gen", "write a synthetic trace (riders/drivers CSV)");
    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo marketplace simulation");
    auto* sweep = app.add_subcommand("sweep", "grid sweep over U/theta/k/protocol/packer");
    auto* fluid_cmd = app.add_subcommand("fluid", "closed-form equilibrium + CTMC metrics");
    auto* fixpoint_cmd = app.add_subcommand("fixpoint", "simulation-coupled fixed point");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunConfig cfg = parse_config_file(config_path);
        if (seed_given) cfg.seed = seed_override;
        if (jobs_override > 0) cfg.jobs = jobs_override;
        if (gen->parsed()) cmd_gen(cfg, out_dir);
        if (simulate->parsed()) cmd_simulate(cfg, out_dir);
        if (sweep->parsed()) cmd_sweep(cfg, out_dir);
        if (fluid_cmd->parsed()) cmd_fluid(cfg, out_dir);
        if (fixpoint_cmd->parsed()) cmd_fixpoint(cfg, out_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace nedsim::cli
