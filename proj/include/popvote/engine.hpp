#pragma once

#include "popvote/protocol.hpp"
#include "popvote/topology.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace popvote {

enum class Protocol { Pairwise, Bdmv, Acc1, Acc2 };

std::string_view protocol_name(Protocol p);
std::optional<Protocol> protocol_from_name(std::string_view name);

enum class TopologyKind { Mesh, Grid, Complete, ErdosRenyi };

std::string_view topology_name(TopologyKind k);
std::optional<TopologyKind> topology_from_name(std::string_view name);

/// Parameters of the interaction graph. Mesh and grid interpret `agents`
/// as side*side and require a perfect square; the Erdos-Renyi edge
/// probability defaults to 2 ln(n) / n when left at 0.
struct TopologySpec {
    TopologyKind kind = TopologyKind::Mesh;
    std::uint32_t agents = 0;
    double er_p = 0.0;

    double effective_er_p() const;
    Topology build(Rng& rng) const;
};

/// Complete description of one simulation run. Initial votes come either
/// from `votes` (one choice per agent, used as given) or from the
/// fraction vector `fractions` (sums to 1; realized counts by largest
/// remainder, placement shuffled from the run's seed). The realized vote
/// counts must have a unique majority.
struct RunConfig {
    Protocol protocol = Protocol::Bdmv;
    TopologySpec topology;
    int num_choices = 2;
    std::vector<double> fractions;
    std::vector<Choice> votes;
    std::uint64_t seed = 1;
    std::uint64_t max_interactions = 0;  // 0: 10^4 * n * K
    bool stop_at_convergence = true;
    bool record_census = false;      // binary voting only
    bool record_initiators = false;  // per-interaction initiator log

    /// Convenience for binary sweeps: fractions = (1 - rho2, rho2).
    void set_rho2(double rho2);

    std::uint64_t interaction_cap() const;
};

/// Census snapshot taken every n interactions (one runtime unit), plus a
/// final snapshot when the run stops off-grid. wrong_memories counts
/// agents whose memory differs from the true majority.
struct CensusSample {
    std::uint64_t interactions = 0;
    GroupCensus groups;
    std::uint32_t wrong_memories = 0;
};

struct RunMetrics {
    std::uint64_t interactions = 0;
    double runtime = 0.0;  // interactions / n
    std::uint64_t messages = 0;
    /// First interaction index after which the configuration is stable
    /// and carries no minority singleton (0 when the initial
    /// configuration already qualifies).
    std::optional<std::uint64_t> phase1_end;
    /// First interaction index at which every memory equals the majority.
    std::optional<std::uint64_t> converged_at;
    bool converged = false;
    Choice majority = 0;
    std::vector<CensusSample> census_trajectory;
    std::vector<std::uint32_t> initiators;

    double phase1_runtime(std::uint32_t n) const;
    double phase2_runtime(std::uint32_t n) const;
};

struct RunResult {
    RunMetrics metrics;
    Configuration final_config;
};

/// Executes one run: repeatedly draws a uniform initiator (one bounded
/// draw), applies the protocol's interaction (pairwise draws one uniform
/// neighbor; broadcast interacts with the full neighborhood), accrues 2
/// messages per pairwise and degree+2 per broadcast interaction, and
/// stops once every memory equals the true majority or at the cap.
/// Deterministic: identical configs produce identical results.
RunResult run(const RunConfig& config);

struct Stat {
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::uint32_t count = 0;

    double stderr_mean() const;
};

/// Mean and standard error of the census quantities on the sampling
/// grid (one runtime unit apart), averaged across replicas; runs that
/// end early contribute their final state to later grid points.
struct MeanTrajectories {
    std::vector<double> time;
    std::vector<double> v1_mean, v1_se;
    std::vector<double> wrong_mean, wrong_se;
    std::vector<double> m1_mean, m1_se;

    bool empty() const { return time.empty(); }
};

struct ReplicateSummary {
    std::uint32_t replicas = 0;
    std::uint32_t truncated = 0;
    std::uint32_t phase1_defined = 0;
    Stat runtime;
    Stat messages;
    Stat phase1_runtime;  // over runs where phase 1 completed
    Stat phase2_runtime;  // over converged runs with phase 1 completed
    MeanTrajectories trajectory;         // absolute time
    MeanTrajectories phase2_trajectory;  // aligned at each run's first
                                         // sample after phase-1 end
};

/// Replica r runs with seed derive_seed(config.seed, r); the base seed
/// itself is never used for a replica, so a replicate never aliases the
/// plain run() with the same config.
std::vector<RunMetrics> run_replicas_serial(const RunConfig& config, std::uint32_t replicas);

/// OpenMP version of run_replicas_serial. Results are indexed by replica
/// and independent, so the output is identical to the serial path for
/// any thread count. threads <= 0 picks the runtime default.
std::vector<RunMetrics> run_replicas_parallel(const RunConfig& config, std::uint32_t replicas,
                                              int threads);

ReplicateSummary summarize_replicas(const RunConfig& config, const std::vector<RunMetrics>& runs);

/// run_replicas_parallel + summarize_replicas.
ReplicateSummary replicate(const RunConfig& config, std::uint32_t replicas, int threads = 0);

} // namespace popvote
