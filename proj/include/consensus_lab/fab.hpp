#pragma once

// FaB Paxos common case and view change, with proposer/acceptor/learner roles
// collapsed into primary and backups.

#include "consensus_lab/core.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace consensus_lab::fab
{
  enum class Mode
  {
    InView,
    ViewChanging,
  };

  struct Slot
  {
    std::optional<Accepted> accepted;
    std::map<View, std::map<Value, std::set<ReplicaId>>> commit_log;
    /// First value committed; never changes afterwards.
    std::optional<Accepted> committed;
    std::set<View> committed_views;

    friend bool operator==(const Slot&, const Slot&) = default;
  };

  /// Occurrences of another value that block vouching, 2f+1.
  std::size_t vouch_threshold(const Config& config);

  /// Distinct in-range reporters for (new_view, seq), at least n-f of them.
  bool validate_progress_certificate(
    const ProgressCertificate& cert, const Config& config);

  /// True iff no value other than m is reported by 2f+1 or more reporters.
  /// Empty reports never block. Throws std::invalid_argument when the
  /// certificate is undersized or has repeated reporters.
  bool vouches(
    const ProgressCertificate& cert, const Value& m, const Config& config);

  /// Value a new primary proposes: among reported values the certificate
  /// vouches for, the most reported one (smallest label on ties). When no
  /// reported value is vouched for (all reports empty) returns fresh.
  Value choose_proposal(
    const ProgressCertificate& cert, const Config& config, const Value& fresh);

  class Replica
  {
  public:
    Replica(ReplicaId id, Config config, View initial_view = View{1});

    ReplicaId id() const { return id_; }
    View view() const { return view_; }
    Mode mode() const { return mode_; }
    const Slot* slot(SeqNum seq) const;

    /// Value this replica proposes as primary of `view` when no reported value
    /// constrains it.
    void set_fresh_value(View view, Value value);

    Effects propose(SeqNum seq, const Value& value);

    Effects on_prepare(ReplicaId sender, const Prepare& msg);
    Effects on_commit(ReplicaId sender, const Commit& msg);
    /// Sends the signed report only to the primary of the next view.
    Effects on_timeout(SeqNum seq, View view);
    /// Reports are only collected by the primary of the reported view.
    Effects on_view_change(ReplicaId sender, const ViewChange& msg);
    Effects on_new_view(ReplicaId sender, const NewView& msg);

    Effects handle(const Message& msg);

    View participating_view() const;
    /// True when handling msg could never change this replica again.
    bool is_stale(const Message& msg) const;
    std::string digest() const;
    void digest_into(DigestBuilder& b) const;
    /// Same mutable state as `other` (id and config are not compared).
    bool same_state(const Replica& other) const;

  private:
    void maybe_send_new_view(View target, SeqNum seq, Effects& fx);
    void enter_view(View v, SeqNum seq, const Value& value, ReplicaId primary);
    void check_commit(SeqNum seq, Effects& fx);
    void note(Effects& fx, const std::string& text) const;

    ReplicaId id_;
    Config config_;
    View view_;
    Mode mode_ = Mode::InView;
    std::optional<View> pending_view_;
    std::map<SeqNum, Slot> slots_;
    std::map<std::pair<View, SeqNum>, std::vector<ViewChangeReport>> reports_;
    std::set<View> new_view_sent_;
    std::map<View, Value> fresh_values_;
  };
}
