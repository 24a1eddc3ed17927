#pragma once

#include "popvote/choice_set.hpp"
#include "popvote/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace popvote {

/// Full state of one agent: the value set driving the set dynamics and
/// the memory holding the agent's current output guess. The memory is
/// always exactly one choice; every rule below writes singletons only.
struct AgentState {
    ChoiceSet value;
    Choice memory = 0;

    friend constexpr bool operator==(AgentState, AgentState) noexcept = default;
};

using Configuration = std::vector<AgentState>;

/// Binary-voting group sizes: agents with value set {c1} (v1), value set
/// {c2} (v2), and the remaining agents split by memory (m1, m2). The four
/// groups partition the population when there are exactly two choices.
struct GroupCensus {
    std::uint32_t v1 = 0;
    std::uint32_t v2 = 0;
    std::uint32_t m1 = 0;
    std::uint32_t m2 = 0;

    friend constexpr bool operator==(GroupCensus, GroupCensus) noexcept = default;
};

/// One pairwise voting interaction. The agent with the smaller value set
/// (the initiator on ties) takes the union, the other the intersection;
/// an agent whose new value set is a singleton copies it into memory.
/// Per-choice membership counts across the pair are conserved.
std::pair<AgentState, AgentState> dmvr_pairwise_step(AgentState initiator, AgentState responder);

/// Deterministic consolidation at the heart of every broadcast step.
/// Counts per-choice occurrences across the inputs and rebuilds the same
/// number of sets as a nested chain, largest first: output u contains
/// every choice still carrying a positive residual count. Per-choice
/// counts are conserved. Throws std::invalid_argument on empty input.
void consolidate_values(std::span<const ChoiceSet> sets, std::vector<ChoiceSet>& out);
std::vector<ChoiceSet> consolidate_values(std::span<const ChoiceSet> sets);

/// Uniformly random bijection between produced sets and participants;
/// result[u] is the set assigned to participants[u]. Consumes exactly
/// outputs.size()-1 bounded draws (Fisher-Yates over the participant
/// slots). Throws std::invalid_argument on size mismatch.
std::vector<ChoiceSet> assign_randomly(std::span<const ChoiceSet> outputs,
                                       std::span<const std::uint32_t> participants,
                                       Rng& rng);

/// Memory update of the basic broadcast protocol: value becomes newset;
/// memory is overwritten only when newset is a singleton.
AgentState bdmv_memory_rule(ChoiceSet newset, AgentState old);

/// The unique strict plurality choice among the given value sets, if one
/// exists: c with occurrence count strictly above every other choice's.
/// Empty on ties and when all counts are zero.
std::optional<Choice> cmax_of_values(std::span<const ChoiceSet> sets);

/// Unique strict plurality among single choices (used for the
/// memory-based fallback). Empty input or a tie yields nothing.
std::optional<Choice> strict_plurality(std::span<const Choice> choices);

/// Which memory-update rule a broadcast interaction applies on top of
/// the shared consolidate-and-assign value dynamics.
enum class MemoryRule {
    Bdmv,           ///< singleton rule only
    CmaxValues,     ///< plurality of value sets, else singleton rule
    CmaxThenMemory, ///< value plurality, else memory plurality, else singleton rule
};

/// Core of a broadcast interaction with the randomness factored out:
/// outputs[u] is written to states[assignment[u]] and memories are
/// updated per `rule`, with pluralities computed from the pre-interaction
/// states. `assignment` must be a permutation of the state indices.
/// Exposed separately so exhaustive tests can enumerate assignments.
void apply_broadcast_assignment(std::span<AgentState> states,
                                std::span<const ChoiceSet> outputs,
                                std::span<const std::uint32_t> assignment,
                                MemoryRule rule);

/// Scratch buffers for the in-place broadcast step; reusable across
/// interactions to keep the simulation loop allocation-free.
struct BroadcastScratch {
    std::vector<ChoiceSet> values;
    std::vector<ChoiceSet> outputs;
    std::vector<std::uint32_t> assignment;
};

/// One full broadcast interaction over the participant states (initiator
/// plus neighbors), in place. Consumes exactly states.size()-1 bounded
/// draws for the assignment; the memory rules draw nothing, so protocols
/// differing only in `rule` share value trajectories seed-for-seed.
void broadcast_step(std::span<AgentState> states, MemoryRule rule, Rng& rng,
                    BroadcastScratch& scratch);

void bdmv_broadcast_step(std::span<AgentState> states, Rng& rng);
void acc1_broadcast_step(std::span<AgentState> states, Rng& rng);
void acc2_broadcast_step(std::span<AgentState> states, Rng& rng);

/// True iff the multiset of value sets is totally ordered by inclusion.
bool is_stable(std::span<const ChoiceSet> sets);
bool is_stable(std::span<const AgentState> agents);

/// Lyapunov function n*K^2 - sum |v_i|^2; strictly decreases under
/// consolidation of any non-stable collection.
std::int64_t lyapunov_v(std::span<const ChoiceSet> sets, int num_choices);
std::int64_t lyapunov_v(std::span<const AgentState> agents, int num_choices);

/// Group census for binary voting. Throws std::invalid_argument unless
/// num_choices == 2.
GroupCensus census(std::span<const AgentState> agents, int num_choices);

} // namespace popvote
