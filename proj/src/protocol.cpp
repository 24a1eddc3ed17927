#include "popvote/protocol.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <stdexcept>

namespace popvote {

std::pair<AgentState, AgentState> dmvr_pairwise_step(AgentState initiator, AgentState responder)
{
    const ChoiceSet unon = initiator.value | responder.value;
    const ChoiceSet inter = initiator.value & responder.value;
    if (initiator.value.cardinality() <= responder.value.cardinality()) {
        initiator.value = unon;
        responder.value = inter;
    } else {
        initiator.value = inter;
        responder.value = unon;
    }
    if (initiator.value.cardinality() == 1) {
        initiator.memory = initiator.value.sole_member();
    }
    if (responder.value.cardinality() == 1) {
        responder.memory = responder.value.sole_member();
    }
    return {initiator, responder};
}

namespace {

void count_occurrences(std::span<const ChoiceSet> sets,
                       std::array<std::uint32_t, kMaxChoices>& counts,
                       std::uint64_t& present)
{
    counts.fill(0);
    present = 0;
    for (const ChoiceSet s : sets) {
        present |= s.bits();
        for (std::uint64_t m = s.bits(); m != 0; m &= m - 1) {
            ++counts[std::countr_zero(m)];
        }
    }
}

std::optional<Choice> strict_argmax(const std::array<std::uint32_t, kMaxChoices>& counts,
                                    std::uint64_t present)
{
    std::uint32_t best = 0;
    int best_choice = -1;
    bool unique = false;
    for (std::uint64_t m = present; m != 0; m &= m - 1) {
        const int c = std::countr_zero(m);
        if (counts[c] > best) {
            best = counts[c];
            best_choice = c;
            unique = true;
        } else if (counts[c] == best) {
            unique = false;
        }
    }
    if (best_choice < 0 || !unique || best == 0) {
        return std::nullopt;
    }
    return static_cast<Choice>(best_choice);
}

} // namespace

void consolidate_values(std::span<const ChoiceSet> sets, std::vector<ChoiceSet>& out)
{
    if (sets.empty()) {
        throw std::invalid_argument("consolidate_values: empty input");
    }
    std::array<std::uint32_t, kMaxChoices> counts;
    std::uint64_t remaining = 0;
    count_occurrences(sets, counts, remaining);

    out.clear();
    out.reserve(sets.size());
    for (std::size_t u = 0; u < sets.size(); ++u) {
        // Choices with a positive residual count form the next set.
        out.push_back(ChoiceSet::from_bits(remaining));
        for (std::uint64_t m = remaining; m != 0; m &= m - 1) {
            const int c = std::countr_zero(m);
            if (--counts[c] == 0) {
                remaining &= ~(std::uint64_t{1} << c);
            }
        }
    }
}

std::vector<ChoiceSet> consolidate_values(std::span<const ChoiceSet> sets)
{
    std::vector<ChoiceSet> out;
    consolidate_values(sets, out);
    return out;
}

std::vector<ChoiceSet> assign_randomly(std::span<const ChoiceSet> outputs,
                                       std::span<const std::uint32_t> participants,
                                       Rng& rng)
{
    if (outputs.size() != participants.size()) {
        throw std::invalid_argument("assign_randomly: outputs/participants size mismatch");
    }
    const auto perm = random_permutation(static_cast<std::uint32_t>(outputs.size()), rng);
    std::vector<ChoiceSet> result(outputs.size());
    for (std::size_t u = 0; u < outputs.size(); ++u) {
        result[perm[u]] = outputs[u];
    }
    return result;
}

AgentState bdmv_memory_rule(ChoiceSet newset, AgentState old)
{
    old.value = newset;
    if (newset.cardinality() == 1) {
        old.memory = newset.sole_member();
    }
    return old;
}

std::optional<Choice> cmax_of_values(std::span<const ChoiceSet> sets)
{
    std::array<std::uint32_t, kMaxChoices> counts;
    std::uint64_t present = 0;
    count_occurrences(sets, counts, present);
    return strict_argmax(counts, present);
}

std::optional<Choice> strict_plurality(std::span<const Choice> choices)
{
    std::array<std::uint32_t, kMaxChoices> counts{};
    std::uint64_t present = 0;
    for (const Choice c : choices) {
        ++counts[c];
        present |= std::uint64_t{1} << c;
    }
    return strict_argmax(counts, present);
}

void apply_broadcast_assignment(std::span<AgentState> states,
                                std::span<const ChoiceSet> outputs,
                                std::span<const std::uint32_t> assignment,
                                MemoryRule rule)
{
    if (outputs.size() != states.size() || assignment.size() != states.size()) {
        throw std::invalid_argument("apply_broadcast_assignment: size mismatch");
    }

    std::optional<Choice> forced;
    if (rule != MemoryRule::Bdmv) {
        // Pluralities come from the pre-interaction states.
        std::array<std::uint32_t, kMaxChoices> counts{};
        std::uint64_t present = 0;
        for (const AgentState& s : states) {
            present |= s.value.bits();
            for (std::uint64_t m = s.value.bits(); m != 0; m &= m - 1) {
                ++counts[std::countr_zero(m)];
            }
        }
        forced = strict_argmax(counts, present);
        if (!forced && rule == MemoryRule::CmaxThenMemory) {
            counts.fill(0);
            present = 0;
            for (const AgentState& s : states) {
                ++counts[s.memory];
                present |= std::uint64_t{1} << s.memory;
            }
            forced = strict_argmax(counts, present);
        }
    }

    for (std::size_t u = 0; u < outputs.size(); ++u) {
        AgentState& target = states[assignment[u]];
        if (forced) {
            target.value = outputs[u];
            target.memory = *forced;
        } else {
            target = bdmv_memory_rule(outputs[u], target);
        }
    }
}

void broadcast_step(std::span<AgentState> states, MemoryRule rule, Rng& rng,
                    BroadcastScratch& scratch)
{
    const auto count = static_cast<std::uint32_t>(states.size());
    scratch.values.clear();
    for (const AgentState& s : states) {
        scratch.values.push_back(s.value);
    }
    consolidate_values(scratch.values, scratch.outputs);

    scratch.assignment.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        scratch.assignment[i] = i;
    }
    for (std::uint32_t i = count; i > 1; --i) {
        const auto j = static_cast<std::uint32_t>(rng.bounded(i));
        std::swap(scratch.assignment[i - 1], scratch.assignment[j]);
    }

    apply_broadcast_assignment(states, scratch.outputs, scratch.assignment, rule);
}

void bdmv_broadcast_step(std::span<AgentState> states, Rng& rng)
{
    BroadcastScratch scratch;
    broadcast_step(states, MemoryRule::Bdmv, rng, scratch);
}

void acc1_broadcast_step(std::span<AgentState> states, Rng& rng)
{
    BroadcastScratch scratch;
    broadcast_step(states, MemoryRule::CmaxValues, rng, scratch);
}

void acc2_broadcast_step(std::span<AgentState> states, Rng& rng)
{
    BroadcastScratch scratch;
    broadcast_step(states, MemoryRule::CmaxThenMemory, rng, scratch);
}

bool is_stable(std::span<const ChoiceSet> sets)
{
    std::vector<std::uint64_t> distinct;
    distinct.reserve(sets.size());
    for (const ChoiceSet s : sets) {
        distinct.push_back(s.bits());
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::sort(distinct.begin(), distinct.end(), [](std::uint64_t a, std::uint64_t b) {
        const int ca = std::popcount(a);
        const int cb = std::popcount(b);
        return ca != cb ? ca < cb : a < b;
    });
    for (std::size_t i = 1; i < distinct.size(); ++i) {
        // Distinct sets of equal size are never nested, so this also
        // rejects equal-cardinality violations.
        if ((distinct[i - 1] & ~distinct[i]) != 0) {
            return false;
        }
    }
    return true;
}

bool is_stable(std::span<const AgentState> agents)
{
    std::vector<ChoiceSet> sets;
    sets.reserve(agents.size());
    for (const AgentState& a : agents) {
        sets.push_back(a.value);
    }
    return is_stable(std::span<const ChoiceSet>(sets));
}

std::int64_t lyapunov_v(std::span<const ChoiceSet> sets, int num_choices)
{
    std::int64_t sum = 0;
    for (const ChoiceSet s : sets) {
        const std::int64_t c = s.cardinality();
        sum += c * c;
    }
    const auto n = static_cast<std::int64_t>(sets.size());
    return n * num_choices * num_choices - sum;
}

std::int64_t lyapunov_v(std::span<const AgentState> agents, int num_choices)
{
    std::int64_t sum = 0;
    for (const AgentState& a : agents) {
        const std::int64_t c = a.value.cardinality();
        sum += c * c;
    }
    const auto n = static_cast<std::int64_t>(agents.size());
    return n * num_choices * num_choices - sum;
}

GroupCensus census(std::span<const AgentState> agents, int num_choices)
{
    if (num_choices != 2) {
        throw std::invalid_argument("census: defined for exactly two choices");
    }
    const ChoiceSet c1 = ChoiceSet::single(0);
    const ChoiceSet c2 = ChoiceSet::single(1);
    GroupCensus g;
    for (const AgentState& a : agents) {
        if (a.value == c1) {
            ++g.v1;
        } else if (a.value == c2) {
            ++g.v2;
        } else if (a.memory == 0) {
            ++g.m1;
        } else {
            ++g.m2;
        }
    }
    return g;
}

} // namespace popvote
