#pragma once

// hBFT agreement and view-change sub-protocols as a per-replica state machine.
// Checkpoints, client suspicion and speculative execution are not modelled.

#include "consensus_lab/core.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace consensus_lab::hbft
{
  enum class Mode
  {
    InView,
    ViewChanging,
  };

  struct Slot
  {
    std::optional<Accepted> accepted;
    /// view -> value -> replicas attesting (COMMIT senders, the primary's
    /// PREPARE or NEW-VIEW, and this replica's own acceptance).
    std::map<View, std::map<Value, std::set<ReplicaId>>> commit_log;
    std::optional<CommitCertificate> committed;

    friend bool operator==(const Slot&, const Slot&) = default;
  };

  /// Reports needed by a correct replica to join someone else's view change.
  std::size_t join_threshold(const Config& config);

  /// Accepted-votes needed for a value to be selected without a certificate.
  std::size_t selection_threshold(const Config& config);

  /// Distinct in-range reporters for (new_view, seq) and at least
  /// progress_quorum(config) of them.
  bool validate_progress_certificate(
    const ProgressCertificate& cert, const Config& config);

  /// New-primary value selection: a value with a valid commit certificate
  /// wins; otherwise a value accepted by at least f+1 reporters
  /// (lexicographically smallest on ties); otherwise NULL.
  /// Throws std::invalid_argument for an invalid certificate.
  Value select_value(const ProgressCertificate& cert, const Config& config);

  class Replica
  {
  public:
    Replica(ReplicaId id, Config config, View initial_view = View{1});

    ReplicaId id() const { return id_; }
    View view() const { return view_; }
    Mode mode() const { return mode_; }
    std::optional<View> pending_view() const { return pending_view_; }
    const Slot* slot(SeqNum seq) const;

    /// Client proposal by the primary of the current view: records the
    /// primary's own acceptance and broadcasts PREPARE.
    Effects propose(SeqNum seq, const Value& value);

    Effects on_prepare(ReplicaId sender, const Prepare& msg);
    Effects on_commit(ReplicaId sender, const Commit& msg);
    Effects on_timeout(SeqNum seq, View view);
    Effects on_view_change(ReplicaId sender, const ViewChange& msg);
    Effects on_new_view(ReplicaId sender, const NewView& msg);

    Effects handle(const Message& msg);

    /// View the replica is currently working toward: its view when InView,
    /// the pending target when ViewChanging.
    View participating_view() const;
    /// True when handling msg could never change this replica again.
    bool is_stale(const Message& msg) const;

    /// Canonical text of the full state; equal states give equal digests.
    std::string digest() const;
    void digest_into(DigestBuilder& b) const;
    /// Same mutable state as `other` (id and config are not compared).
    bool same_state(const Replica& other) const;

  private:
    void start_view_change(SeqNum seq, View target, Effects& fx);
    void maybe_send_new_view(View target, SeqNum seq, Effects& fx);
    void enter_view(
      View v, SeqNum seq, const Value& value, ReplicaId primary, Effects& fx);
    void check_commit(SeqNum seq, Effects& fx);
    void check_conflict_trigger(SeqNum seq, Effects& fx);
    void note(Effects& fx, const std::string& text) const;

    ReplicaId id_;
    Config config_;
    View view_;
    Mode mode_ = Mode::InView;
    std::optional<View> pending_view_;
    std::map<SeqNum, Slot> slots_;
    /// (new_view, seq) -> reports in arrival order, one per reporter.
    std::map<std::pair<View, SeqNum>, std::vector<ViewChangeReport>> vc_buffer_;
    std::set<View> new_view_sent_;
  };
}
