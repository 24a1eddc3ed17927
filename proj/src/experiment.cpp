#include "popvote/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace popvote {

namespace {

std::string trim(std::string_view s)
{
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(const std::string& value)
{
    std::vector<std::string> items;
    std::string current;
    for (const char ch : value) {
        if (ch == ',') {
            items.push_back(trim(current));
            current.clear();
        } else {
            current += ch;
        }
    }
    items.push_back(trim(current));
    items.erase(std::remove(items.begin(), items.end(), std::string{}), items.end());
    return items;
}

[[noreturn]] void fail(const std::string& origin, const std::string& message)
{
    throw std::runtime_error(origin + ": " + message);
}

double parse_double(const std::string& origin, const std::string& key, const std::string& value)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(origin, "invalid number for '" + key + "': " + value);
    }
}

std::uint64_t parse_u64(const std::string& origin, const std::string& key, const std::string& value)
{
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(origin, "invalid integer for '" + key + "': " + value);
    }
}

bool parse_bool(const std::string& origin, const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    fail(origin, "invalid boolean for '" + key + "': " + value);
}

/// Value lists for numeric axes accept "a,b,c" or "start:stop:step".
std::vector<double> parse_double_axis(const std::string& origin, const std::string& key,
                                      const std::string& value)
{
    if (value.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(value);
        std::string part;
        while (std::getline(ss, part, ':')) parts.push_back(trim(part));
        if (parts.size() != 3) {
            fail(origin, "'" + key + "' range must be start:stop:step");
        }
        const double start = parse_double(origin, key, parts[0]);
        const double stop = parse_double(origin, key, parts[1]);
        const double step = parse_double(origin, key, parts[2]);
        if (!(step > 0.0) || stop < start) {
            fail(origin, "'" + key + "' range must have positive step and stop >= start");
        }
        std::vector<double> values;
        for (int i = 0;; ++i) {
            const double v = start + i * step;
            if (v > stop + 1e-12) break;
            values.push_back(v);
        }
        return values;
    }
    std::vector<double> values;
    for (const std::string& item : split_list(value)) {
        values.push_back(parse_double(origin, key, item));
    }
    return values;
}

} // namespace

void ExperimentSpec::validate() const
{
    if (replicas < 1) {
        throw std::runtime_error("experiment: replicas must be at least 1");
    }
    if (protocols.empty()) {
        throw std::runtime_error("experiment: no protocols listed");
    }
    if (topologies.empty()) {
        throw std::runtime_error("experiment: no topologies listed");
    }
    if (sizes.empty()) {
        throw std::runtime_error("experiment: no agent counts listed");
    }
    if (rho2.empty() == rho.empty()) {
        throw std::runtime_error("experiment: exactly one of 'rho2' and 'rho' must be given");
    }
    if (!rho2.empty() && num_choices != 2) {
        throw std::runtime_error("experiment: a rho2 sweep requires K = 2");
    }
    for (const double r : rho2) {
        if (!(r > 0.5) || !(r < 1.0)) {
            throw std::runtime_error("experiment: rho2 values must lie in (0.5, 1)");
        }
    }
}

ExperimentSpec parse_experiment_text(const std::string& text, const std::string& origin)
{
    ExperimentSpec spec;
    spec.protocols.clear();

    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const std::string where = origin + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') {
                fail(where, "unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "experiment" && section != "sweep") {
                fail(where, "unknown section '" + section + "'");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(where, "expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section == "experiment") {
            if (key == "seed") {
                spec.seed = parse_u64(where, key, value);
            } else if (key == "replicas") {
                spec.replicas = static_cast<std::uint32_t>(parse_u64(where, key, value));
            } else if (key == "max_interactions") {
                spec.max_interactions = parse_u64(where, key, value);
            } else if (key == "record_census") {
                spec.record_census = parse_bool(where, key, value);
            } else {
                fail(where, "unknown key '" + key + "' in [experiment]");
            }
        } else if (section == "sweep") {
            if (key == "protocol") {
                for (const std::string& item : split_list(value)) {
                    const auto p = protocol_from_name(item);
                    if (!p) fail(where, "unknown protocol '" + item + "'");
                    spec.protocols.push_back(*p);
                }
            } else if (key == "topology") {
                for (const std::string& item : split_list(value)) {
                    const auto t = topology_from_name(item);
                    if (!t) fail(where, "unknown topology '" + item + "'");
                    spec.topologies.push_back(*t);
                }
            } else if (key == "n") {
                for (const std::string& item : split_list(value)) {
                    spec.sizes.push_back(static_cast<std::uint32_t>(parse_u64(where, key, item)));
                }
            } else if (key == "rho2") {
                spec.rho2 = parse_double_axis(where, key, value);
            } else if (key == "rho") {
                for (const std::string& item : split_list(value)) {
                    spec.rho.push_back(parse_double(where, key, item));
                }
                spec.num_choices = static_cast<int>(spec.rho.size());
            } else if (key == "K") {
                spec.num_choices = static_cast<int>(parse_u64(where, key, value));
            } else if (key == "er_p") {
                spec.er_p = parse_double(where, key, value);
            } else {
                fail(where, "unknown key '" + key + "' in [sweep]");
            }
        } else {
            fail(where, "key outside of a section");
        }
    }
    spec.validate();
    return spec;
}

ExperimentSpec parse_experiment_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("experiment: cannot open spec file " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_text(buffer.str(), path);
}

std::string format_double(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

namespace {

std::string axis_label(double rho2)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", rho2);
    std::string s = buf;
    for (char& ch : s) {
        if (ch == '.') ch = 'p';
    }
    return s;
}

} // namespace

std::vector<Cell> expand_cells(const ExperimentSpec& spec)
{
    spec.validate();
    std::vector<Cell> cells;
    std::uint64_t index = 0;
    const std::vector<double> rho2_axis =
        spec.rho2.empty() ? std::vector<double>{std::numeric_limits<double>::quiet_NaN()}
                          : spec.rho2;
    for (const Protocol protocol : spec.protocols) {
        for (const TopologyKind topology : spec.topologies) {
            for (const std::uint32_t n : spec.sizes) {
                for (const double rho2 : rho2_axis) {
                    Cell cell;
                    cell.protocol = protocol;
                    cell.topology = topology;
                    cell.agents = n;
                    cell.rho2 = rho2;
                    cell.config.protocol = protocol;
                    cell.config.topology = TopologySpec{topology, n, spec.er_p};
                    if (spec.rho2.empty()) {
                        cell.config.num_choices = spec.num_choices;
                        cell.config.fractions = spec.rho;
                    } else {
                        cell.config.set_rho2(rho2);
                    }
                    cell.config.seed = derive_seed(spec.seed, index);
                    cell.config.max_interactions = spec.max_interactions;
                    cell.config.record_census = spec.record_census && cell.config.num_choices == 2;
                    cell.label = std::string(protocol_name(protocol)) + "_" +
                                 std::string(topology_name(topology)) + "_n" + std::to_string(n) +
                                 (spec.rho2.empty() ? std::string("_rhovec")
                                                    : "_rho2_" + axis_label(rho2));
                    cells.push_back(std::move(cell));
                    ++index;
                }
            }
        }
    }
    return cells;
}

void write_mean_trajectory_csv(std::ostream& out, const MeanTrajectories& traj)
{
    out << "time,v1_mean,v1_se,wrong_mean,wrong_se,m1_mean,m1_se\n";
    for (std::size_t i = 0; i < traj.time.size(); ++i) {
        out << format_double(traj.time[i]) << ',' << format_double(traj.v1_mean[i]) << ','
            << format_double(traj.v1_se[i]) << ',' << format_double(traj.wrong_mean[i]) << ','
            << format_double(traj.wrong_se[i]) << ',' << format_double(traj.m1_mean[i]) << ','
            << format_double(traj.m1_se[i]) << '\n';
    }
}

void write_meanfield_csv(std::ostream& out, const meanfield::Trajectory& traj)
{
    out << "time,value\n";
    for (const auto& point : traj) {
        out << format_double(point.t) << ',' << format_double(point.value) << '\n';
    }
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir,
                                int threads)
{
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    ExperimentResult result;
    const std::vector<Cell> cells = expand_cells(spec);
    for (const Cell& cell : cells) {
        const std::vector<RunMetrics> runs = run_replicas_parallel(cell.config, spec.replicas, threads);
        CellOutcome outcome{cell, summarize_replicas(cell.config, runs)};
        result.truncated_total += outcome.summary.truncated;

        const std::uint32_t n = cell.config.topology.agents;
        std::ofstream out(fs::path(out_dir) / ("runs_" + cell.label + ".csv"), std::ios::binary);
        if (!out) {
            throw std::runtime_error("experiment: cannot write to " + out_dir);
        }
        out << "seed,interactions,runtime,messages,phase1_end_runtime,phase2_runtime,converged\n";
        for (std::uint32_t r = 0; r < runs.size(); ++r) {
            const RunMetrics& m = runs[r];
            out << derive_seed(cell.config.seed, r) << ',' << m.interactions << ','
                << format_double(m.runtime) << ',' << m.messages << ','
                << format_double(m.phase1_runtime(n)) << ','
                << format_double(m.phase2_runtime(n)) << ',' << (m.converged ? 1 : 0) << '\n';
        }

        if (cell.config.record_census) {
            std::ofstream traj(fs::path(out_dir) / ("traj_" + cell.label + ".csv"),
                               std::ios::binary);
            write_mean_trajectory_csv(traj, outcome.summary.trajectory);
            std::ofstream traj2(fs::path(out_dir) / ("traj2_" + cell.label + ".csv"),
                                std::ios::binary);
            write_mean_trajectory_csv(traj2, outcome.summary.phase2_trajectory);
        }
        result.cells.push_back(std::move(outcome));
    }

    std::ofstream summary(fs::path(out_dir) / "summary.csv", std::ios::binary);
    summary << "protocol,topology,n,rho2,replicas,truncated,"
               "runtime_mean,runtime_std,messages_mean,messages_std,"
               "phase1_runtime_mean,phase1_runtime_std,phase2_runtime_mean,phase2_runtime_std\n";
    for (const CellOutcome& outcome : result.cells) {
        const ReplicateSummary& s = outcome.summary;
        summary << protocol_name(outcome.cell.protocol) << ',' << topology_name(outcome.cell.topology)
                << ',' << outcome.cell.agents << ',' << format_double(outcome.cell.rho2) << ','
                << s.replicas << ',' << s.truncated << ',' << format_double(s.runtime.mean) << ','
                << format_double(s.runtime.stddev) << ',' << format_double(s.messages.mean) << ','
                << format_double(s.messages.stddev) << ',' << format_double(s.phase1_runtime.mean)
                << ',' << format_double(s.phase1_runtime.stddev) << ','
                << format_double(s.phase2_runtime.mean) << ','
                << format_double(s.phase2_runtime.stddev) << '\n';
    }
    return result;
}

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    }
};

CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("overlay: cannot open " + path);
    }
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(trim(field));
        if (first) {
            table.header = fields;
            first = false;
            continue;
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (const std::string& f : fields) {
            try {
                row.push_back(std::stod(f));
            } catch (const std::exception&) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace

OverlayReport overlay_compare(const std::string& sim_csv_path, const std::string& bound_csv_path,
                              const std::string& quantity)
{
    const CsvTable sim = read_csv(sim_csv_path);
    const CsvTable bound = read_csv(bound_csv_path);

    const int sim_time = sim.column("time");
    const int sim_mean = sim.column(quantity + "_mean");
    const int sim_se = sim.column(quantity + "_se");
    if (sim_time < 0 || sim_mean < 0 || sim_se < 0) {
        throw std::runtime_error("overlay: " + sim_csv_path +
                                 " lacks columns time/" + quantity + "_mean/" + quantity + "_se");
    }
    const int bound_time = bound.column("time");
    const int bound_value = bound.column("value");
    if (bound_time < 0 || bound_value < 0) {
        throw std::runtime_error("overlay: " + bound_csv_path + " lacks columns time/value");
    }

    std::map<std::int64_t, double> bound_at;
    for (const auto& row : bound.rows) {
        bound_at[std::llround(row[bound_time] * 1e9)] = row[bound_value];
    }

    OverlayReport report;
    for (const auto& row : sim.rows) {
        const auto it = bound_at.find(std::llround(row[sim_time] * 1e9));
        if (it == bound_at.end()) {
            continue;
        }
        ++report.points;
        const double slack = 2.0 * row[sim_se];
        const double violation = row[sim_mean] - (it->second + slack);
        if (violation <= 1e-9) {
            ++report.satisfied;
        } else {
            report.max_violation = std::max(report.max_violation, violation);
        }
    }
    if (report.points == 0) {
        throw std::runtime_error("overlay: no common time points between inputs");
    }
    return report;
}

int threads_from_env()
{
    const char* env = std::getenv("POPVOTE_THREADS");
    if (env == nullptr) {
        return 0;
    }
    const int value = std::atoi(env);
    return value > 0 ? value : 0;
}

} // namespace popvote
