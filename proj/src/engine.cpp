#include "popvote/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace popvote {

std::string_view protocol_name(Protocol p)
{
    switch (p) {
    case Protocol::Pairwise: return "pairwise";
    case Protocol::Bdmv: return "bdmv";
    case Protocol::Acc1: return "acc1";
    case Protocol::Acc2: return "acc2";
    }
    return "?";
}

std::optional<Protocol> protocol_from_name(std::string_view name)
{
    if (name == "pairwise" || name == "pairwise-dmvr") return Protocol::Pairwise;
    if (name == "bdmv") return Protocol::Bdmv;
    if (name == "acc1") return Protocol::Acc1;
    if (name == "acc2") return Protocol::Acc2;
    return std::nullopt;
}

std::string_view topology_name(TopologyKind k)
{
    switch (k) {
    case TopologyKind::Mesh: return "mesh";
    case TopologyKind::Grid: return "grid";
    case TopologyKind::Complete: return "complete";
    case TopologyKind::ErdosRenyi: return "er";
    }
    return "?";
}

std::optional<TopologyKind> topology_from_name(std::string_view name)
{
    if (name == "mesh") return TopologyKind::Mesh;
    if (name == "grid") return TopologyKind::Grid;
    if (name == "complete") return TopologyKind::Complete;
    if (name == "er" || name == "erdos-renyi") return TopologyKind::ErdosRenyi;
    return std::nullopt;
}

namespace {

std::uint32_t square_side(std::uint32_t n, const char* what, std::uint32_t min_side)
{
    const auto side = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(n))));
    if (side * side != n) {
        throw std::invalid_argument(std::string(what) + ": agent count " + std::to_string(n) +
                                    " is not a perfect square");
    }
    if (side < min_side) {
        throw std::invalid_argument(std::string(what) + ": side " + std::to_string(side) +
                                    " below minimum " + std::to_string(min_side));
    }
    return side;
}

} // namespace

double TopologySpec::effective_er_p() const
{
    if (er_p > 0.0) {
        return er_p;
    }
    return 2.0 * std::log(static_cast<double>(agents)) / static_cast<double>(agents);
}

Topology TopologySpec::build(Rng& rng) const
{
    switch (kind) {
    case TopologyKind::Mesh: return Topology::mesh(square_side(agents, "mesh", 3));
    case TopologyKind::Grid: return Topology::grid(square_side(agents, "grid", 2));
    case TopologyKind::Complete: return Topology::complete(agents);
    case TopologyKind::ErdosRenyi: return Topology::erdos_renyi(agents, effective_er_p(), rng);
    }
    throw std::invalid_argument("topology: unknown kind");
}

void RunConfig::set_rho2(double rho2)
{
    num_choices = 2;
    fractions = {1.0 - rho2, rho2};
    votes.clear();
}

std::uint64_t RunConfig::interaction_cap() const
{
    if (max_interactions != 0) {
        return max_interactions;
    }
    return 10000ULL * topology.agents * static_cast<std::uint64_t>(num_choices);
}

double RunMetrics::phase1_runtime(std::uint32_t n) const
{
    if (!phase1_end) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return static_cast<double>(*phase1_end) / n;
}

double RunMetrics::phase2_runtime(std::uint32_t n) const
{
    if (!phase1_end || !converged_at) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return static_cast<double>(*converged_at - *phase1_end) / n;
}

namespace {

struct VoteSetup {
    std::vector<Choice> votes;
    Choice majority = 0;
};

VoteSetup make_votes(const RunConfig& cfg, Rng& rng)
{
    const std::uint32_t n = cfg.topology.agents;
    const int k = cfg.num_choices;
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(k), 0);
    VoteSetup setup;

    if (!cfg.votes.empty()) {
        if (cfg.votes.size() != n) {
            throw std::invalid_argument("run: votes size does not match agent count");
        }
        for (const Choice v : cfg.votes) {
            if (v >= k) {
                throw std::invalid_argument("run: vote index out of range");
            }
            ++counts[v];
        }
        setup.votes = cfg.votes;
    } else {
        if (cfg.fractions.size() != static_cast<std::size_t>(k)) {
            throw std::invalid_argument("run: fractions size does not match num_choices");
        }
        double sum = 0.0;
        double top = -1.0;
        int top_hits = 0;
        for (const double f : cfg.fractions) {
            if (f < 0.0) {
                throw std::invalid_argument("run: fractions must be nonnegative");
            }
            sum += f;
            if (f > top) {
                top = f;
                top_hits = 1;
            } else if (f == top) {
                ++top_hits;
            }
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument("run: fractions must sum to 1");
        }
        if (top_hits != 1) {
            throw std::invalid_argument("run: fractions have no unique majority");
        }
        // Largest-remainder apportionment of n agents to the fractions.
        std::vector<double> remainder(static_cast<std::size_t>(k));
        std::uint32_t assigned = 0;
        for (int c = 0; c < k; ++c) {
            const double exact = cfg.fractions[c] * n;
            counts[c] = static_cast<std::uint32_t>(std::floor(exact + 1e-9));
            remainder[c] = exact - counts[c];
            assigned += counts[c];
        }
        std::vector<int> order(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) order[c] = c;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return remainder[a] != remainder[b] ? remainder[a] > remainder[b] : a < b;
        });
        for (std::size_t i = 0; assigned < n; ++i) {
            ++counts[order[i % order.size()]];
            ++assigned;
        }
        setup.votes.reserve(n);
        for (int c = 0; c < k; ++c) {
            setup.votes.insert(setup.votes.end(), counts[c], static_cast<Choice>(c));
        }
        shuffle_values(setup.votes, rng);
    }

    std::uint32_t best = 0;
    int best_choice = -1;
    bool unique = false;
    for (int c = 0; c < k; ++c) {
        if (counts[c] > best) {
            best = counts[c];
            best_choice = c;
            unique = true;
        } else if (counts[c] == best && best > 0) {
            unique = false;
        }
    }
    if (best_choice < 0 || !unique) {
        throw std::invalid_argument("run: initial votes have no unique majority");
    }
    setup.majority = static_cast<Choice>(best_choice);
    return setup;
}

/// Incremental configuration monitors: per-pattern value-set counts, the
/// number of agents holding a minority singleton, chain stability of the
/// distinct patterns, and the wrong-memory count. Stability is
/// recomputed only when the set of distinct patterns changes.
class Monitors {
public:
    Monitors(const Configuration& agents, Choice majority)
        : majority_(majority)
    {
        for (const AgentState& a : agents) {
            add_pattern(a.value);
            wrong_ += a.memory != majority_;
        }
        refresh_stability();
        set_changed_ = false;
    }

    void on_agent_change(AgentState before, AgentState after)
    {
        if (!(before.value == after.value)) {
            remove_pattern(before.value);
            add_pattern(after.value);
        }
        if (before.memory != after.memory) {
            wrong_ += after.memory != majority_;
            wrong_ -= before.memory != majority_;
        }
    }

    void settle()
    {
        if (set_changed_) {
            refresh_stability();
            set_changed_ = false;
        }
    }

    bool stable() const noexcept { return stable_; }
    bool phase1_done() const noexcept { return stable_ && minority_singleton_agents_ == 0; }
    std::uint32_t wrong_memories() const noexcept { return wrong_; }

private:
    void add_pattern(ChoiceSet v)
    {
        auto [it, inserted] = patterns_.try_emplace(v.bits(), 0u);
        ++it->second;
        if (inserted) {
            set_changed_ = true;
        }
        if (v.cardinality() == 1 && v.sole_member() != majority_) {
            ++minority_singleton_agents_;
        }
    }

    void remove_pattern(ChoiceSet v)
    {
        auto it = patterns_.find(v.bits());
        if (--it->second == 0) {
            patterns_.erase(it);
            set_changed_ = true;
        }
        if (v.cardinality() == 1 && v.sole_member() != majority_) {
            --minority_singleton_agents_;
        }
    }

    void refresh_stability()
    {
        distinct_.clear();
        for (const auto& [bits, count] : patterns_) {
            distinct_.push_back(bits);
        }
        std::sort(distinct_.begin(), distinct_.end(), [](std::uint64_t a, std::uint64_t b) {
            const int ca = std::popcount(a);
            const int cb = std::popcount(b);
            return ca != cb ? ca < cb : a < b;
        });
        stable_ = true;
        for (std::size_t i = 1; i < distinct_.size(); ++i) {
            if ((distinct_[i - 1] & ~distinct_[i]) != 0) {
                stable_ = false;
                break;
            }
        }
    }

    Choice majority_;
    std::unordered_map<std::uint64_t, std::uint32_t> patterns_;
    std::vector<std::uint64_t> distinct_;
    std::uint32_t minority_singleton_agents_ = 0;
    std::uint32_t wrong_ = 0;
    bool stable_ = false;
    bool set_changed_ = false;
};

} // namespace

RunResult run(const RunConfig& cfg)
{
    if (cfg.num_choices < 2 || cfg.num_choices > kMaxChoices) {
        throw std::invalid_argument("run: num_choices must lie in [2, 64]");
    }
    if (cfg.topology.agents < 2) {
        throw std::invalid_argument("run: need at least 2 agents");
    }
    if (cfg.record_census && cfg.num_choices != 2) {
        throw std::invalid_argument("run: census recording requires binary voting");
    }

    // One RNG stream per run, consumed in a fixed order: topology
    // sampling (Erdos-Renyi only), vote placement (fraction mode only),
    // then the interaction loop.
    Rng rng(cfg.seed);
    const Topology topo = cfg.topology.build(rng);
    const std::uint32_t n = topo.size();

    const VoteSetup setup = make_votes(cfg, rng);
    RunResult result;
    result.metrics.majority = setup.majority;

    Configuration& agents = result.final_config;
    agents.reserve(n);
    for (const Choice v : setup.votes) {
        agents.push_back(AgentState{ChoiceSet::single(v), v});
    }

    Monitors monitors(agents, setup.majority);
    RunMetrics& metrics = result.metrics;

    const std::uint64_t cap = cfg.interaction_cap();
    std::uint64_t interactions = 0;

    auto note_progress = [&](std::uint64_t now) {
        if (!metrics.phase1_end && monitors.phase1_done()) {
            metrics.phase1_end = now;
        }
        if (!metrics.converged_at && monitors.wrong_memories() == 0) {
            metrics.converged_at = now;
        }
    };
    auto sample_census = [&](std::uint64_t now) {
        metrics.census_trajectory.push_back(
            CensusSample{now, census(agents, cfg.num_choices), monitors.wrong_memories()});
    };

    note_progress(0);
    if (cfg.record_census) {
        sample_census(0);
    }

    BroadcastScratch scratch;
    std::vector<AgentState> participants;
    std::vector<std::uint32_t> participant_ids;
    const MemoryRule rule = cfg.protocol == Protocol::Acc1   ? MemoryRule::CmaxValues
                            : cfg.protocol == Protocol::Acc2 ? MemoryRule::CmaxThenMemory
                                                             : MemoryRule::Bdmv;

    while (interactions < cap && !(cfg.stop_at_convergence && metrics.converged_at)) {
        const auto initiator = static_cast<std::uint32_t>(rng.bounded(n));
        if (cfg.record_initiators) {
            metrics.initiators.push_back(initiator);
        }
        const auto nbrs = topo.neighbors(initiator);

        if (cfg.protocol == Protocol::Pairwise) {
            const std::uint32_t responder = nbrs[rng.bounded(nbrs.size())];
            const auto [a, b] = dmvr_pairwise_step(agents[initiator], agents[responder]);
            monitors.on_agent_change(agents[initiator], a);
            monitors.on_agent_change(agents[responder], b);
            agents[initiator] = a;
            agents[responder] = b;
            metrics.messages += 2;
        } else {
            participant_ids.clear();
            participant_ids.push_back(initiator);
            participant_ids.insert(participant_ids.end(), nbrs.begin(), nbrs.end());
            participants.clear();
            for (const std::uint32_t id : participant_ids) {
                participants.push_back(agents[id]);
            }
            broadcast_step(participants, rule, rng, scratch);
            for (std::size_t u = 0; u < participant_ids.size(); ++u) {
                const std::uint32_t id = participant_ids[u];
                monitors.on_agent_change(agents[id], participants[u]);
                agents[id] = participants[u];
            }
            metrics.messages += nbrs.size() + 2;
        }

        monitors.settle();
        ++interactions;
        note_progress(interactions);
        if (cfg.record_census && interactions % n == 0) {
            sample_census(interactions);
        }
    }

    metrics.interactions = interactions;
    metrics.runtime = static_cast<double>(interactions) / n;
    metrics.converged = metrics.converged_at.has_value();
    if (cfg.record_census &&
        (metrics.census_trajectory.empty() ||
         metrics.census_trajectory.back().interactions != interactions)) {
        sample_census(interactions);
    }
    return result;
}

double Stat::stderr_mean() const
{
    return count > 1 ? stddev / std::sqrt(static_cast<double>(count)) : 0.0;
}

namespace {

Stat make_stat(const std::vector<double>& values)
{
    Stat s;
    s.count = static_cast<std::uint32_t>(values.size());
    if (values.empty()) {
        s.mean = s.stddev = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    double sum = 0.0;
    s.min = values.front();
    s.max = values.front();
    for (const double v : values) {
        sum += v;
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }
    s.mean = sum / values.size();
    double sq = 0.0;
    for (const double v : values) {
        sq += (v - s.mean) * (v - s.mean);
    }
    s.stddev = values.size() > 1 ? std::sqrt(sq / (values.size() - 1)) : 0.0;
    return s;
}

struct ReplicaTrack {
    // Census values on the sampling grid plus the final state used to
    // extend a finished run to later grid points.
    std::vector<double> v1, wrong, m1;
    double v1_final = 0.0, wrong_final = 0.0, m1_final = 0.0;
    std::optional<std::size_t> phase2_start;  // grid index

    double at_v1(std::size_t g) const { return g < v1.size() ? v1[g] : v1_final; }
    double at_wrong(std::size_t g) const { return g < wrong.size() ? wrong[g] : wrong_final; }
    double at_m1(std::size_t g) const { return g < m1.size() ? m1[g] : m1_final; }
};

void accumulate(MeanTrajectories& out, const std::vector<ReplicaTrack>& tracks,
                std::size_t length, bool phase2_aligned)
{
    std::vector<double> v1s, wrongs, m1s;
    for (std::size_t g = 0; g < length; ++g) {
        v1s.clear();
        wrongs.clear();
        m1s.clear();
        for (const ReplicaTrack& t : tracks) {
            std::size_t idx = g;
            if (phase2_aligned) {
                if (!t.phase2_start) {
                    continue;
                }
                idx = *t.phase2_start + g;
            }
            v1s.push_back(t.at_v1(idx));
            wrongs.push_back(t.at_wrong(idx));
            m1s.push_back(t.at_m1(idx));
        }
        if (v1s.empty()) {
            break;
        }
        const Stat sv = make_stat(v1s);
        const Stat sw = make_stat(wrongs);
        const Stat sm = make_stat(m1s);
        out.time.push_back(static_cast<double>(g));
        out.v1_mean.push_back(sv.mean);
        out.v1_se.push_back(sv.stderr_mean());
        out.wrong_mean.push_back(sw.mean);
        out.wrong_se.push_back(sw.stderr_mean());
        out.m1_mean.push_back(sm.mean);
        out.m1_se.push_back(sm.stderr_mean());
    }
}

} // namespace

std::vector<RunMetrics> run_replicas_serial(const RunConfig& cfg, std::uint32_t replicas)
{
    if (replicas < 1) {
        throw std::invalid_argument("replicate: need at least one replica");
    }
    std::vector<RunMetrics> out(replicas);
    for (std::uint32_t r = 0; r < replicas; ++r) {
        RunConfig child = cfg;
        child.seed = derive_seed(cfg.seed, r);
        out[r] = run(child).metrics;
    }
    return out;
}

std::vector<RunMetrics> run_replicas_parallel(const RunConfig& cfg, std::uint32_t replicas,
                                              int threads)
{
    if (replicas < 1) {
        throw std::invalid_argument("replicate: need at least one replica");
    }
    std::vector<RunMetrics> out(replicas);
#ifdef _OPENMP
    const int requested = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(requested)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(replicas); ++r) {
        RunConfig child = cfg;
        child.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
        out[static_cast<std::size_t>(r)] = run(child).metrics;
    }
#else
    (void)threads;
    out = run_replicas_serial(cfg, replicas);
#endif
    return out;
}

ReplicateSummary summarize_replicas(const RunConfig& cfg, const std::vector<RunMetrics>& runs)
{
    const std::uint32_t n = cfg.topology.agents;
    ReplicateSummary summary;
    summary.replicas = static_cast<std::uint32_t>(runs.size());

    std::vector<double> runtimes, messages, p1, p2;
    for (const RunMetrics& m : runs) {
        runtimes.push_back(m.runtime);
        messages.push_back(static_cast<double>(m.messages));
        if (!m.converged) {
            ++summary.truncated;
        }
        if (m.phase1_end) {
            ++summary.phase1_defined;
            p1.push_back(m.phase1_runtime(n));
            if (m.converged_at) {
                p2.push_back(m.phase2_runtime(n));
            }
        }
    }
    summary.runtime = make_stat(runtimes);
    summary.messages = make_stat(messages);
    summary.phase1_runtime = make_stat(p1);
    summary.phase2_runtime = make_stat(p2);

    if (cfg.record_census) {
        std::vector<ReplicaTrack> tracks;
        tracks.reserve(runs.size());
        std::size_t grid_len = 0;
        std::size_t phase2_len = 0;
        for (const RunMetrics& m : runs) {
            ReplicaTrack t;
            for (const CensusSample& s : m.census_trajectory) {
                if (s.interactions % n == 0) {
                    t.v1.push_back(s.groups.v1);
                    t.wrong.push_back(s.wrong_memories);
                    t.m1.push_back(s.groups.m1);
                }
            }
            if (!m.census_trajectory.empty()) {
                const CensusSample& last = m.census_trajectory.back();
                t.v1_final = last.groups.v1;
                t.wrong_final = last.wrong_memories;
                t.m1_final = last.groups.m1;
            }
            if (m.phase1_end) {
                t.phase2_start = static_cast<std::size_t>((*m.phase1_end + n - 1) / n);
                const std::size_t avail =
                    t.v1.size() > *t.phase2_start ? t.v1.size() - *t.phase2_start : 1;
                phase2_len = std::max(phase2_len, avail);
            }
            grid_len = std::max(grid_len, t.v1.size());
            tracks.push_back(std::move(t));
        }
        accumulate(summary.trajectory, tracks, grid_len, false);
        accumulate(summary.phase2_trajectory, tracks, phase2_len, true);
    }
    return summary;
}

ReplicateSummary replicate(const RunConfig& cfg, std::uint32_t replicas, int threads)
{
    return summarize_replicas(cfg, run_replicas_parallel(cfg, replicas, threads));
}

} // namespace popvote
