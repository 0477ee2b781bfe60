#include "nedsim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "nedsim/error.hpp"
#include "nedsim/rng.hpp"

namespace nedsim {

void MarketParams::validate() const {
    auto bad = [](const std::string& msg) { throw Error("core", "market_params", msg); };
    if (!(lambda_r >= 0) || !(lambda_d >= 0) || !(mu >= 0) || !(eta >= 0) ||
        !(eta_idle >= 0) || !(eta_notified >= 0))
        bad("all rates must be >= 0");
    if (!(p >= 0.0 && p <= 1.0)) bad("p must be in [0,1]");
    if (cap_u < 1) bad("cap_u must be >= 1");
    if (!(theta >= 0.0)) bad("theta must be >= 0");
}

void NotificationProfile::validate() const {
    auto bad = [](const std::string& msg) { throw Error("core", "notification_profile", msg); };
    if (q.empty()) bad("profile must have at least q_0");
    double sum = 0.0;
    for (double qi : q) {
        if (!(qi >= 0.0) || !std::isfinite(qi)) bad("entries must be finite and >= 0");
        sum += qi;
    }
    if (std::abs(sum - 1.0) > 1e-9) bad("entries must sum to 1 within 1e-9");
}

void TypeMix::validate() const {
    auto bad = [](const std::string& msg) { throw Error("core", "type_mix", msg); };
    if (levels.empty() || levels.size() != weights.size())
        bad("levels and weights must be nonempty and the same length");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) bad("weights must be >= 0");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) bad("weights must sum to 1 within 1e-9");
    for (double lv : levels)
        if (!(lv >= 0.0 && lv <= 1.0)) bad("acceptance levels must be in [0,1]");
}

double score(const Rider& rider, const Driver& driver) {
    return 1.0 / (1.0 + euclidean_distance(rider.pos, driver.pos));
}

void recompute_weights(Scenario& scenario, double max_radius) {
    scenario.weights.clear();
    for (const auto& r : scenario.riders) {
        for (const auto& d : scenario.drivers) {
            if (max_radius > 0.0 && euclidean_distance(r.pos, d.pos) > max_radius) continue;
            scenario.weights[{r.id, d.id}] = score(r, d);
        }
    }
}

Scenario sample_scenario(int n_riders, int n_drivers, double sigma,
                         const TypeMix& type_mix, std::uint64_t seed,
                         double max_radius) {
    if (n_riders < 0 || n_drivers < 0)
        throw Error("core", "sample_scenario", "counts must be >= 0");
    if (!(sigma > 0.0))
        throw Error("core", "sample_scenario", "sigma must be > 0");
    type_mix.validate();

    Rng rng = make_rng(seed);
    std::normal_distribution<double> coord(0.0, sigma);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Scenario s;
    s.meta = {seed, sigma};
    s.riders.reserve(n_riders);
    // Draw order: rider coordinates in id order, then per driver
    // (coordinates, acceptance level) in id order.
    for (int i = 0; i < n_riders; ++i) {
        Rider r;
        r.id = i;
        r.pos = {coord(rng), coord(rng)};
        s.riders.push_back(r);
    }
    s.drivers.reserve(n_drivers);
    for (int i = 0; i < n_drivers; ++i) {
        Driver d;
        d.id = i;
        d.pos = {coord(rng), coord(rng)};
        double u = unit(rng);
        double cum = 0.0;
        d.accept_prob = type_mix.levels.back();
        for (std::size_t t = 0; t < type_mix.levels.size(); ++t) {
            cum += type_mix.weights[t];
            if (u < cum) {
                d.accept_prob = type_mix.levels[t];
                break;
            }
        }
        s.drivers.push_back(d);
    }
    recompute_weights(s, max_radius);
    return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& file, int line_no) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e)
        throw Error("core", "load_trace",
                    file + " line " + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
}

int parse_int(const std::string& s, const std::string& file, int line_no) {
    int v = 0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e)
        throw Error("core", "load_trace",
                    file + " line " + std::to_string(line_no) + ": bad integer '" + s + "'");
    return v;
}

std::vector<std::vector<std::string>> read_rows(const std::string& path,
                                                std::size_t n_fields,
                                                std::vector<int>* line_numbers) {
    std::ifstream in(path);
    if (!in) throw Error("core", "load_trace", "cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {  // header row required
            saw_header = true;
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != n_fields)
            throw Error("core", "load_trace",
                        path + " line " + std::to_string(line_no) + ": expected " +
                            std::to_string(n_fields) + " fields, got " +
                            std::to_string(fields.size()));
        rows.push_back(std::move(fields));
        line_numbers->push_back(line_no);
    }
    if (!saw_header) throw Error("core", "load_trace", path + ": missing header row");
    return rows;
}

}  // namespace

Scenario load_trace(const std::string& riders_csv_path,
                    const std::string& drivers_csv_path, double max_radius) {
    Scenario s;

    std::vector<int> rider_lines;
    auto rider_rows = read_rows(riders_csv_path, 4, &rider_lines);
    std::set<int> rider_ids;
    for (std::size_t i = 0; i < rider_rows.size(); ++i) {
        const auto& f = rider_rows[i];
        const int line_no = rider_lines[i];
        Rider r;
        r.id = parse_int(f[0], riders_csv_path, line_no);
        r.arrival_time_s = parse_double(f[1], riders_csv_path, line_no);
        r.pos = {parse_double(f[2], riders_csv_path, line_no),
                 parse_double(f[3], riders_csv_path, line_no)};
        if (r.id < 0)
            throw Error("core", "load_trace",
                        riders_csv_path + " line " + std::to_string(line_no) + ": id must be >= 0");
        if (r.arrival_time_s < 0)
            throw Error("core", "load_trace",
                        riders_csv_path + " line " + std::to_string(line_no) +
                            ": arrival_time_s must be >= 0");
        if (!std::isfinite(r.pos.x) || !std::isfinite(r.pos.y))
            throw Error("core", "load_trace",
                        riders_csv_path + " line " + std::to_string(line_no) +
                            ": coordinates must be finite");
        if (!rider_ids.insert(r.id).second)
            throw Error("core", "load_trace",
                        riders_csv_path + " line " + std::to_string(line_no) +
                            ": duplicate rider id " + std::to_string(r.id));
        s.riders.push_back(r);
    }

    std::vector<int> driver_lines;
    auto driver_rows = read_rows(drivers_csv_path, 5, &driver_lines);
    std::set<int> driver_ids;
    for (std::size_t i = 0; i < driver_rows.size(); ++i) {
        const auto& f = driver_rows[i];
        const int line_no = driver_lines[i];
        Driver d;
        d.id = parse_int(f[0], drivers_csv_path, line_no);
        d.arrival_time_s = parse_double(f[1], drivers_csv_path, line_no);
        d.pos = {parse_double(f[2], drivers_csv_path, line_no),
                 parse_double(f[3], drivers_csv_path, line_no)};
        d.accept_prob = parse_double(f[4], drivers_csv_path, line_no);
        if (d.id < 0)
            throw Error("core", "load_trace",
                        drivers_csv_path + " line " + std::to_string(line_no) + ": id must be >= 0");
        if (d.arrival_time_s < 0)
            throw Error("core", "load_trace",
                        drivers_csv_path + " line " + std::to_string(line_no) +
                            ": arrival_time_s must be >= 0");
        if (!std::isfinite(d.pos.x) || !std::isfinite(d.pos.y))
            throw Error("core", "load_trace",
                        drivers_csv_path + " line " + std::to_string(line_no) +
                            ": coordinates must be finite");
        if (!(d.accept_prob >= 0.0 && d.accept_prob <= 1.0))
            throw Error("core", "load_trace",
                        drivers_csv_path + " line " + std::to_string(line_no) +
                            ": accept_prob " + f[4] + " outside [0,1]");
        if (!driver_ids.insert(d.id).second)
            throw Error("core", "load_trace",
                        drivers_csv_path + " line " + std::to_string(line_no) +
                            ": duplicate driver id " + std::to_string(d.id));
        s.drivers.push_back(d);
    }

    std::sort(s.riders.begin(), s.riders.end(),
              [](const Rider& a, const Rider& b) { return a.id < b.id; });
    std::sort(s.drivers.begin(), s.drivers.end(),
              [](const Driver& a, const Driver& b) { return a.id < b.id; });
    recompute_weights(s, max_radius);
    return s;
}

}  // namespace nedsim
