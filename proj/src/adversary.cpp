#include "consensus_lab/adversary.hpp"

namespace consensus_lab::adversary
{
  namespace
  {
    template <typename T>
    bool compatible(const std::optional<T>& a, const std::optional<T>& b)
    {
      return !a || !b || *a == *b;
    }

    std::string kind_name(TriggerKind k)
    {
      switch (k)
      {
        case TriggerKind::Start:
          return "start";
        case TriggerKind::Timeout:
          return "timeout";
        case TriggerKind::Deliver:
          return "deliver";
      }
      return "?";
    }
  }

  bool matches(const Trigger& trigger, const ScriptEvent& event)
  {
    if (trigger.on != event.kind)
      return false;
    switch (trigger.on)
    {
      case TriggerKind::Start:
        return true;
      case TriggerKind::Timeout:
        return !trigger.view || trigger.view == event.view;
      case TriggerKind::Deliver:
      {
        if (!event.message)
          return false;
        const auto& msg = *event.message;
        if (
          trigger.message_type && *trigger.message_type != type_name(msg.payload))
          return false;
        if (trigger.view && *trigger.view != view_of(msg.payload))
          return false;
        return !trigger.from || *trigger.from == msg.sender;
      }
    }
    return false;
  }

  bool overlap(const Trigger& a, const Trigger& b)
  {
    if (a.on != b.on)
      return false;
    return compatible(a.message_type, b.message_type) &&
      compatible(a.view, b.view) && compatible(a.from, b.from);
  }

  void validate(const ByzantineScript& script, const Config& config)
  {
    if (!config.contains(script.replica))
      throw ScriptError("script replica out of range");
    if (!config.is_byzantine(script.replica))
    {
      throw ScriptError(
        "script given for correct replica " + display_name(script.replica));
    }
    for (std::size_t i = 0; i < script.actions.size(); ++i)
    {
      for (std::size_t j = i + 1; j < script.actions.size(); ++j)
      {
        if (overlap(script.actions[i].trigger, script.actions[j].trigger))
        {
          throw ScriptError(
            "actions " + std::to_string(i) + " and " + std::to_string(j) +
            " of " + display_name(script.replica) + " have overlapping " +
            kind_name(script.actions[i].trigger.on) + " triggers");
        }
      }
      for (const auto& e : script.actions[i].emit)
      {
        for (auto r : e.to)
        {
          if (!config.contains(r))
            throw ScriptError(
              "emission recipient " + std::to_string(r.index) + " out of range");
        }
      }
    }
  }

  std::optional<std::size_t> match_action(
    const ByzantineScript& script, const ScriptEvent& event)
  {
    for (std::size_t i = 0; i < script.actions.size(); ++i)
    {
      if (matches(script.actions[i].trigger, event))
        return i;
    }
    return std::nullopt;
  }

  ByzantineReplica::ByzantineReplica(ByzantineScript script) :
    script_(std::move(script))
  {}

  std::vector<Emission> ByzantineReplica::apply(const ScriptEvent& event)
  {
    auto idx = match_action(script_, event);
    if (!idx || !fired_.insert(*idx).second)
      return {};
    return script_.actions[*idx].emit;
  }

  std::string ByzantineReplica::digest() const
  {
    std::string out = "byz";
    for (auto i : fired_)
      out += " fired" + std::to_string(i);
    return out;
  }
}
