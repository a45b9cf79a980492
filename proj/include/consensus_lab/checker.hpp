#pragma once

// Agreement and Validity over traces, plus the exhaustive quorum-intersection
// check behind the 5f+1 bound.

#include "consensus_lab/core.hpp"
#include "consensus_lab/json_io.hpp"
#include "consensus_lab/net_sim.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace consensus_lab::checker
{
  struct AgreementVerdict
  {
    /// Two correct replicas, same seq, different values.
    std::optional<std::pair<CommitEvent, CommitEvent>> witness;

    bool holds() const { return !witness; }
  };

  struct ValidityVerdict
  {
    std::optional<CommitEvent> witness;

    bool holds() const { return !witness; }
  };

  struct VerdictMetadata
  {
    bool incomplete_delivery = false;
    bool step_limit_exceeded = false;
    std::uint64_t steps = 0;
  };

  struct Verdict
  {
    AgreementVerdict agreement;
    ValidityVerdict validity;
    VerdictMetadata metadata;

    bool holds() const { return agreement.holds() && validity.holds(); }
  };

  /// Witness is the first conflicting pair with events ordered by
  /// (step, replica). Commits by Byzantine replicas are ignored.
  AgreementVerdict check_agreement(
    const std::vector<CommitEvent>& commits, const Config& config);
  AgreementVerdict check_agreement(const sim::Trace& trace, const Config& config);

  /// `proposed` holds values sent as PREPARE or NEW-VIEW by the primary of
  /// the view they belong to. NULL commits are always valid.
  ValidityVerdict check_validity(
    const std::vector<CommitEvent>& commits,
    const std::set<Value>& proposed,
    const Config& config);
  ValidityVerdict check_validity(const sim::Trace& trace, const Config& config);

  Verdict check(const sim::Trace& trace, const Config& config);

  /// {"record": "verdict", "agreement": ..., "validity": ..., "metadata": ...}
  json_io::Json to_json(const Verdict& verdict);
  std::string describe(const Verdict& verdict);

  // Quorum intersection -------------------------------------------------

  inline constexpr std::uint32_t max_quorum_check_f = 2;

  /// One enumerated case that broke the property.
  struct QuorumCase
  {
    std::set<ReplicaId> committed;
    std::set<ReplicaId> byzantine;
    /// Report of every replica; NULL means an empty report.
    std::vector<Value> reports;
    std::vector<ReplicaId> certificate;
    std::size_t votes_m = 0;
    std::size_t votes_other = 0;
    Value chosen;
  };

  struct QuorumReport
  {
    Protocol protocol = Protocol::Fab;
    std::uint32_t f = 0;
    std::uint32_t n = 0;
    std::size_t commit_quorum = 0;
    std::size_t certificate_size = 0;
    std::uint64_t cases_checked = 0;
    std::uint64_t counterexamples = 0;
    std::optional<QuorumCase> first_counterexample;
  };

  /// The committed value is labelled "m", the only other value "m'".
  Value quorum_m();
  Value quorum_other();

  /// Enumerates committed sets (n-f replicas accepted m), Byzantine sets of at
  /// most f replicas, reports in {m, m', empty} for every replica that is
  /// Byzantine or outside the committed set (correct committed replicas
  /// report m), and every certificate of n-f reports.
  ///
  /// FaB (n = 5f+1): a case fails if m has fewer than 2f+1 reports or the
  /// certificate vouches for m'.
  /// hBFT (n = 3f+1): a case fails if select_value does not return m.
  ///
  /// Throws std::invalid_argument for f > max_quorum_check_f.
  QuorumReport check_quorum_intersection(Protocol protocol, std::uint32_t f);
  QuorumReport check_fab_quorum_intersection(std::uint32_t f);

  std::string describe(const QuorumReport& report);
}
