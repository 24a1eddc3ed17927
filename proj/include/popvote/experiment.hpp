#pragma once

#include "popvote/engine.hpp"
#include "popvote/meanfield.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace popvote {

/// Parsed experiment description: sweep axes, replication, seeding.
/// The on-disk format is plain text key = value lines grouped under
/// [experiment] and [sweep] headers; see the README for the schema.
struct ExperimentSpec {
    std::uint64_t seed = 1;
    std::uint32_t replicas = 1;
    std::uint64_t max_interactions = 0;
    bool record_census = false;

    std::vector<Protocol> protocols;
    std::vector<TopologyKind> topologies;
    std::vector<std::uint32_t> sizes;
    std::vector<double> rho2;  // binary sweep axis
    std::vector<double> rho;   // explicit fraction vector (single cell)
    int num_choices = 2;
    double er_p = 0.0;

    void validate() const;
};

ExperimentSpec parse_experiment_file(const std::string& path);
ExperimentSpec parse_experiment_text(const std::string& text, const std::string& origin);

/// One sweep cell: a concrete run configuration plus the axis values it
/// was expanded from. Cell c uses seed derive_seed(spec.seed, c); its
/// replicas then derive from that per-cell seed.
struct Cell {
    RunConfig config;
    std::string label;
    Protocol protocol;
    TopologyKind topology;
    std::uint32_t agents = 0;
    double rho2 = 0.0;  // NaN when an explicit rho vector is used
};

std::vector<Cell> expand_cells(const ExperimentSpec& spec);

struct CellOutcome {
    Cell cell;
    ReplicateSummary summary;
};

struct ExperimentResult {
    std::vector<CellOutcome> cells;
    std::uint32_t truncated_total = 0;
};

/// Runs every cell, writing one runs_<label>.csv per cell (plus
/// traj_<label>.csv / traj2_<label>.csv when the census is recorded) and
/// a summary.csv, all under out_dir. Output is byte-identical across
/// reruns of the same spec and seed.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir,
                                int threads);

/// Pointwise bound comparison between a simulated mean trajectory CSV
/// (columns time, <quantity>_mean, <quantity>_se) and a bound CSV
/// (columns time, value). A sampled point is violated when
/// mean > bound + 2 * se. Throws std::runtime_error when either schema
/// is missing its columns or the time grids do not intersect.
struct OverlayReport {
    std::size_t points = 0;
    std::size_t satisfied = 0;
    double max_violation = 0.0;

    double fraction() const
    {
        return points == 0 ? 0.0 : static_cast<double>(satisfied) / static_cast<double>(points);
    }
};

OverlayReport overlay_compare(const std::string& sim_csv_path, const std::string& bound_csv_path,
                              const std::string& quantity);

/// Doubles rendered with 12 significant digits ("%.12g"); NaN as "nan".
std::string format_double(double value);

/// Concurrency cap from POPVOTE_THREADS (0 when unset/invalid: let the
/// OpenMP runtime decide).
int threads_from_env();

void write_mean_trajectory_csv(std::ostream& out, const MeanTrajectories& traj);
void write_meanfield_csv(std::ostream& out, const meanfield::Trajectory& traj);

} // namespace popvote
