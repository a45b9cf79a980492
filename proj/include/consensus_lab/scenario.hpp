#pragma once

// Scenario files: the JSON documents `run` replays and `explore` writes.
// Schema: scenarios/scenario.schema.json.

#include "consensus_lab/adversary.hpp"
#include "consensus_lab/core.hpp"
#include "consensus_lab/net_sim.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace consensus_lab
{
  inline constexpr int scenario_version = 1;

  /// Carries a field path ("schedule[3].timeout.replica") or a line number.
  class ScenarioError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  enum class DeliveryMode
  {
    /// Run to quiescence after every schedule entry.
    Auto,
    /// Only `deliver` entries move messages.
    Explicit,
  };

  struct ProposalSpec
  {
    View view;
    std::optional<std::vector<ReplicaId>> to;
    Value value;

    friend bool operator==(const ProposalSpec&, const ProposalSpec&) = default;
  };

  struct DeliverEntry
  {
    sim::Selector selector;
    bool all = false;

    friend bool operator==(const DeliverEntry&, const DeliverEntry&) = default;
  };

  struct HoldEntry
  {
    sim::Selector selector;

    friend bool operator==(const HoldEntry&, const HoldEntry&) = default;
  };

  struct ReleaseEntry
  {
    sim::Selector selector;

    friend bool operator==(const ReleaseEntry&, const ReleaseEntry&) = default;
  };

  struct ScheduleAtEntry
  {
    sim::Selector selector;
    std::uint64_t at_step = 0;

    friend bool operator==(const ScheduleAtEntry&, const ScheduleAtEntry&) =
      default;
  };

  struct TimeoutEntry
  {
    ReplicaId replica;
    View view;
    SeqNum seq;

    friend bool operator==(const TimeoutEntry&, const TimeoutEntry&) = default;
  };

  using ScheduleEntry = std::
    variant<DeliverEntry, HoldEntry, ReleaseEntry, ScheduleAtEntry, TimeoutEntry>;

  struct Scenario
  {
    int version = scenario_version;
    std::string name;
    std::string description;
    Protocol protocol = Protocol::Hbft;
    std::uint32_t f = 0;
    std::uint32_t n_replicas = 1;
    std::set<ReplicaId> byzantine;
    std::map<View, ReplicaId> primary_map;
    SeqNum seq;
    DeliveryMode delivery = DeliveryMode::Auto;
    std::vector<ProposalSpec> initial_proposals;
    std::vector<ScheduleEntry> schedule;
    std::vector<adversary::ByzantineScript> scripts;

    /// Throws ScenarioError when the cluster parameters are inconsistent.
    Config config() const;

    friend bool operator==(const Scenario&, const Scenario&) = default;
  };

  Scenario parse_scenario(std::string_view json_text);
  Scenario load_scenario(const std::filesystem::path& path);
  /// Pretty-printed JSON, stable key order, trailing newline.
  std::string dump_scenario(const Scenario& scenario);
}
