#include "popvote/engine.hpp"
#include "popvote/experiment.hpp"
#include "popvote/meanfield.hpp"
#include "popvote/topology.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace {

constexpr int kExitError = 1;
constexpr int kExitCheckFailed = 2;

std::ostream& open_output(const std::string& path, std::ofstream& file)
{
    if (path.empty() || path == "-") {
        return std::cout;
    }
    file.open(path, std::ios::binary);
    if (!file) {
        throw std::runtime_error("cannot open output file " + path);
    }
    return file;
}

int cmd_run(const std::string& spec_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed, std::optional<std::uint32_t> replicas,
            int threads, bool check)
{
    popvote::ExperimentSpec spec = popvote::parse_experiment_file(spec_path);
    if (seed) {
        spec.seed = *seed;
    }
    if (replicas) {
        spec.replicas = *replicas;
    }
    const popvote::ExperimentResult result = popvote::run_experiment(spec, out_dir, threads);
    std::cout << "cells: " << result.cells.size() << "  replicas/cell: " << spec.replicas
              << "  truncated runs: " << result.truncated_total << '\n';
    for (const popvote::CellOutcome& cell : result.cells) {
        std::cout << cell.cell.label << "  runtime " << popvote::format_double(cell.summary.runtime.mean)
                  << " +- " << popvote::format_double(cell.summary.runtime.stddev) << "  messages "
                  << popvote::format_double(cell.summary.messages.mean) << '\n';
    }
    if (check && result.truncated_total > 0) {
        std::cerr << "check failed: " << result.truncated_total << " truncated runs\n";
        return kExitCheckFailed;
    }
    return 0;
}

int cmd_meanfield(const std::string& which, std::uint32_t n, std::uint32_t d, double rho2,
                  double t_end, double dt, double z0, const std::string& out_path)
{
    popvote::meanfield::Params params{n, d, 1.0 - rho2, rho2};
    params.validate();

    std::ofstream file;
    std::ostream& out = open_output(out_path, file);

    if (which == "phase1") {
        double horizon = t_end;
        if (horizon <= 0.0) {
            horizon = params.rho1 > 0.0 ? std::ceil(popvote::meanfield::t_c1_bound(params)) : 100.0;
        }
        popvote::write_meanfield_csv(out, popvote::meanfield::phase1_ode(params, horizon, dt));
    } else if (which == "phase2") {
        double start = z0;
        if (start < 0.0) {
            start = params.minority_count();
        }
        double horizon = t_end;
        if (horizon <= 0.0) {
            horizon = params.minority_count() > 1.0
                          ? std::ceil(popvote::meanfield::t_c2_bound(params))
                          : 100.0;
        }
        popvote::write_meanfield_csv(out, popvote::meanfield::phase2_ode(params, start, horizon, dt));
    } else if (which == "bounds") {
        out << "t_c1 = " << popvote::format_double(popvote::meanfield::t_c1_bound(params))
            << "  t_c2 = " << popvote::format_double(popvote::meanfield::t_c2_bound(params)) << '\n';
    } else if (which == "drift") {
        out << "m1,m2,v2,drift,polynomial\n";
        for (std::uint32_t m1 = 0; m1 <= n; ++m1) {
            for (std::uint32_t m2 = 0; m1 + m2 <= n; ++m2) {
                const popvote::GroupCensus groups{0, n - m1 - m2, m1, m2};
                out << m1 << ',' << m2 << ',' << groups.v2 << ','
                    << popvote::format_double(popvote::meanfield::expected_m1_drift(groups, n, d))
                    << ',' << popvote::format_double(popvote::meanfield::drift_polynomial(groups))
                    << '\n';
            }
        }
    } else {
        throw std::runtime_error("unknown meanfield mode '" + which + "'");
    }
    return 0;
}

int cmd_overlay(const std::string& sim, const std::string& bound, const std::string& quantity,
                bool check, double min_fraction)
{
    const popvote::OverlayReport report = popvote::overlay_compare(sim, bound, quantity);
    std::cout << "points: " << report.points << "  satisfied: " << report.satisfied
              << "  fraction: " << popvote::format_double(report.fraction())
              << "  max_violation: " << popvote::format_double(report.max_violation) << '\n';
    if (check && report.fraction() < min_fraction) {
        std::cerr << "check failed: bound satisfied at " << popvote::format_double(report.fraction())
                  << " of points, required " << popvote::format_double(min_fraction) << '\n';
        return kExitCheckFailed;
    }
    return 0;
}

int cmd_topology_export(const std::string& kind_name, std::uint32_t n, double p,
                        std::uint64_t seed, const std::string& out_path)
{
    const auto kind = popvote::topology_from_name(kind_name);
    if (!kind) {
        throw std::runtime_error("unknown topology '" + kind_name + "'");
    }
    popvote::TopologySpec spec{*kind, n, p};
    popvote::Rng rng(seed);
    const popvote::Topology topo = spec.build(rng);

    std::ofstream file;
    std::ostream& out = open_output(out_path, file);
    topo.write_edge_list(out);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulator and analysis toolkit for multi-choice majority voting in pairwise "
                 "and broadcasting population protocols"};
    app.require_subcommand(1);

    // run
    auto* run_cmd = app.add_subcommand("run", "Run an experiment sweep and write CSV results");
    std::string spec_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed_override;
    std::optional<std::uint32_t> replicas_override;
    int threads = popvote::threads_from_env();
    bool run_check = false;
    run_cmd->add_option("--spec", spec_path, "Experiment spec file")->required();
    run_cmd->add_option("--out", out_dir, "Output directory");
    run_cmd->add_option("--seed", seed_override, "Override the spec seed");
    run_cmd->add_option("--replicas", replicas_override, "Override replicas per cell");
    run_cmd->add_option("--threads", threads, "Concurrency cap (default from POPVOTE_THREADS)");
    run_cmd->add_flag("--check", run_check, "Exit nonzero if any run was truncated");

    // meanfield
    auto* mf_cmd = app.add_subcommand("meanfield", "Evaluate drift predictions and time bounds");
    std::string which;
    std::uint32_t mf_n = 100;
    std::uint32_t mf_d = 4;
    double mf_rho2 = 0.7;
    double mf_t_end = 0.0;
    double mf_dt = 0.01;
    double mf_z0 = -1.0;
    std::string mf_out;
    mf_cmd->add_option("--which", which, "phase1|phase2|bounds|drift")->required();
    mf_cmd->add_option("--n", mf_n, "Number of agents");
    mf_cmd->add_option("--d", mf_d, "Uniform degree");
    mf_cmd->add_option("--rho2", mf_rho2, "Majority fraction (rho1 = 1 - rho2)");
    mf_cmd->add_option("--t-end", mf_t_end, "Time horizon (default: the matching bound)");
    mf_cmd->add_option("--dt", mf_dt, "Integrator step");
    mf_cmd->add_option("--z0", mf_z0, "Phase-2 start value (default n*rho1)");
    mf_cmd->add_option("--out", mf_out, "Output file (default stdout)");

    // overlay
    auto* ov_cmd = app.add_subcommand("overlay", "Compare a simulated mean trajectory to a bound");
    std::string ov_sim, ov_bound, ov_quantity = "v1";
    bool ov_check = false;
    double ov_min_fraction = 0.95;
    ov_cmd->add_option("--sim", ov_sim, "Simulated trajectory CSV")->required();
    ov_cmd->add_option("--bound", ov_bound, "Bound trajectory CSV (time,value)")->required();
    ov_cmd->add_option("--quantity", ov_quantity, "v1|wrong|m1");
    ov_cmd->add_flag("--check", ov_check, "Exit nonzero when the bound fraction is too low");
    ov_cmd->add_option("--min-fraction", ov_min_fraction, "Required satisfied fraction");

    // topology-export
    auto* topo_cmd = app.add_subcommand("topology-export", "Write an edge list");
    std::string topo_kind = "mesh";
    std::uint32_t topo_n = 100;
    double topo_p = 0.0;
    std::uint64_t topo_seed = 1;
    std::string topo_out;
    topo_cmd->add_option("--kind", topo_kind, "mesh|grid|complete|er");
    topo_cmd->add_option("--n", topo_n, "Number of agents");
    topo_cmd->add_option("--p", topo_p, "Edge probability for er (default 2 ln(n)/n)");
    topo_cmd->add_option("--seed", topo_seed, "Seed for er sampling");
    topo_cmd->add_option("--out", topo_out, "Output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            return cmd_run(spec_path, out_dir, seed_override, replicas_override, threads, run_check);
        }
        if (*mf_cmd) {
            return cmd_meanfield(which, mf_n, mf_d, mf_rho2, mf_t_end, mf_dt, mf_z0, mf_out);
        }
        if (*ov_cmd) {
            return cmd_overlay(ov_sim, ov_bound, ov_quantity, ov_check, ov_min_fraction);
        }
        if (*topo_cmd) {
            return cmd_topology_export(topo_kind, topo_n, topo_p, topo_seed, topo_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return 0;
}
