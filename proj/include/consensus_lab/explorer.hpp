#pragma once

// Bounded depth-first search over delivery orders, timeouts and Byzantine
// emissions. A violating schedule comes back as an explicit-delivery scenario
// that `run` replays to the same verdict.

#include "consensus_lab/checker.hpp"
#include "consensus_lab/core.hpp"
#include "consensus_lab/scenario.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace consensus_lab::explorer
{
  inline constexpr std::uint32_t default_max_steps = 8;
  inline constexpr std::uint32_t default_max_byz_messages = 4;

  struct ExploreSpec
  {
    Config config;
    SeqNum seq;
    /// At most two values. The first is what a correct view-1 primary (f = 0)
    /// proposes and what a FaB view-2 primary falls back to.
    std::vector<Value> value_universe{Value{"a"}, Value{"b"}};
    std::uint32_t max_steps = default_max_steps;
    std::uint32_t max_byz_messages = default_max_byz_messages;
    /// Symmetry-aware state-hash pruning.
    bool dedup = true;
    /// Skip states from which no conflicting commit fits in the remaining
    /// steps (a lower bound from the commit quorum).
    bool prune = true;
  };

  /// Throws std::invalid_argument for zero bounds or a bad universe.
  void validate(const ExploreSpec& spec);

  /// Default cluster for a protocol: minimum n, replica 0 leads view 1 and
  /// replica 1 view 2, replica 0 Byzantine when f > 0.
  ExploreSpec default_spec(Protocol protocol, std::uint32_t f);
  ExploreSpec default_spec(Protocol protocol, std::uint32_t f, std::uint32_t n);

  /// One scheduler decision.
  struct Choice
  {
    enum class Kind
    {
      Deliver,
      Timeout,
      Inject,
    };

    Kind kind = Kind::Deliver;
    /// Deliver: sender; Timeout: the replica timing out.
    ReplicaId replica;
    /// Deliver: recipient.
    ReplicaId to;
    View view;
    /// Deliver and Inject.
    std::optional<Payload> payload;
    /// Inject: every recipient gets the payload at once.
    std::vector<ReplicaId> recipients;

    friend bool operator==(const Choice&, const Choice&) = default;
  };

  std::string to_string(const Choice& choice);

  struct ExploreStats
  {
    /// Distinct nodes expanded.
    std::uint64_t states = 0;
    /// Leaves reached: no choice left or depth bound hit.
    std::uint64_t traces = 0;
    /// Children dropped because they changed nothing.
    std::uint64_t pruned = 0;
    /// Nodes skipped because an equal state was seen at no greater depth.
    std::uint64_t dedup_hits = 0;
    /// Leaves cut off by max_steps.
    std::uint64_t bound_hits = 0;
    std::uint64_t validity_violations = 0;

    friend bool operator==(const ExploreStats&, const ExploreStats&) = default;
  };

  struct ExploreResult
  {
    bool found = false;
    /// Minimized violating schedule.
    std::vector<Choice> witness_choices;
    std::optional<Scenario> witness;
    std::optional<checker::Verdict> witness_verdict;
    ExploreStats stats;
  };

  ExploreResult explore(const ExploreSpec& spec);

  /// Replays choices from the initial state. nullopt when a choice does not
  /// apply (its message is not in flight, its recipient already got it).
  std::optional<std::vector<CommitEvent>> replay(
    const ExploreSpec& spec, const std::vector<Choice>& choices);

  Scenario to_scenario(const ExploreSpec& spec, const std::vector<Choice>& choices);
}
