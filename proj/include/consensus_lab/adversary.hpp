#pragma once

// Scripted Byzantine replicas. A Byzantine replica keeps no protocol state: it
// emits whatever its script says when a trigger matches, always under its own
// identity (the simulator refuses anything else).

#include "consensus_lab/core.hpp"

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace consensus_lab::adversary
{
  class ScriptError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  enum class TriggerKind
  {
    Start,   ///< simulation start
    Timeout, ///< a timeout fired at the Byzantine replica
    Deliver, ///< a message was delivered to the Byzantine replica
  };

  /// Unset fields match anything. `message_type` and `from` only apply to
  /// Deliver; `view` applies to Timeout and Deliver (VIEW-CHANGE matches on
  /// its new view).
  struct Trigger
  {
    TriggerKind on = TriggerKind::Start;
    std::optional<std::string> message_type;
    std::optional<View> view;
    std::optional<ReplicaId> from;

    friend bool operator==(const Trigger&, const Trigger&) = default;
  };

  struct Emission
  {
    std::vector<ReplicaId> to;
    Payload payload;

    friend bool operator==(const Emission&, const Emission&) = default;
  };

  struct ScriptAction
  {
    Trigger trigger;
    std::vector<Emission> emit;

    friend bool operator==(const ScriptAction&, const ScriptAction&) = default;
  };

  struct ByzantineScript
  {
    ReplicaId replica;
    std::vector<ScriptAction> actions;

    friend bool operator==(const ByzantineScript&, const ByzantineScript&) =
      default;
  };

  /// Something that happened at a Byzantine replica.
  struct ScriptEvent
  {
    TriggerKind kind = TriggerKind::Start;
    std::optional<View> view;
    std::optional<Message> message;
  };

  bool matches(const Trigger& trigger, const ScriptEvent& event);

  /// True if some event could match both triggers.
  bool overlap(const Trigger& a, const Trigger& b);

  /// Throws ScriptError on overlapping triggers or out-of-range recipients.
  void validate(const ByzantineScript& script, const Config& config);

  /// Index of the action whose trigger matches, if any (at most one can after
  /// validation).
  std::optional<std::size_t> match_action(
    const ByzantineScript& script, const ScriptEvent& event);

  /// Runs a script. Each action fires at most once.
  class ByzantineReplica
  {
  public:
    explicit ByzantineReplica(ByzantineScript script);

    ReplicaId id() const { return script_.replica; }
    const ByzantineScript& script() const { return script_; }

    /// Emissions for this event; empty when no unfired action matches.
    std::vector<Emission> apply(const ScriptEvent& event);

    std::string digest() const;

  private:
    ByzantineScript script_;
    std::set<std::size_t> fired_;
  };
}
