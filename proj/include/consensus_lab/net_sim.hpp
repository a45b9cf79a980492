#pragma once

// Deterministic discrete-event simulator with authenticated, reliable,
// asynchronous point-to-point channels. Delivery order and timing belong to
// the scenario (the adversary owns the scheduler); there is no wall clock.

#include "consensus_lab/adversary.hpp"
#include "consensus_lab/core.hpp"
#include "consensus_lab/fab.hpp"
#include "consensus_lab/hbft.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

namespace consensus_lab
{
  struct Scenario;
}

namespace consensus_lab::sim
{
  using MessageId = std::uint64_t;

  inline constexpr std::uint64_t default_step_limit = 10'000;

  /// A replica tried to send under another identity, or to embed a report or
  /// attestation its claimed author never signed.
  class ForgeryError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  /// Unknown or already-delivered message ids, steps in the past, bad ids.
  class SimulationError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  /// Filter over in-flight messages. Unset fields match anything; `value` is
  /// the PREPARE/COMMIT value, the VIEW-CHANGE accepted value, or the
  /// NEW-VIEW selection; `view` is the new view for VIEW-CHANGE.
  struct Selector
  {
    std::optional<std::string> type;
    std::optional<View> view;
    std::optional<SeqNum> seq;
    std::optional<Value> value;
    std::set<ReplicaId> from;
    std::set<ReplicaId> to;
    std::optional<Payload> payload;

    bool matches(const Message& msg, ReplicaId recipient) const;

    friend bool operator==(const Selector&, const Selector&) = default;
  };

  struct PendingMessage
  {
    MessageId id = 0;
    Message message;
    ReplicaId to;
    std::uint64_t step = 0;  ///< earliest delivery step
    std::uint64_t order = 0; ///< insertion index, breaks ties
    bool held = false;
    /// Hash of sender, recipient and payload, once per symmetry renaming
    /// (identity first).
    /// Filled on first use by Simulator::fingerprint.
    mutable std::shared_ptr<const std::vector<std::uint64_t>> fingerprints;
  };

  enum class RecordKind
  {
    Send,
    Deliver,
    Timeout,
    Adversary,
    Commit,
    Note,
  };

  std::string to_string(RecordKind kind);

  struct TraceRecord
  {
    std::uint64_t step = 0;
    RecordKind kind = RecordKind::Note;
    std::optional<ReplicaId> from;
    std::optional<ReplicaId> to;
    std::optional<Payload> payload;
    std::optional<MessageId> message_id;
    std::optional<CommitEvent> commit;
    std::string replica_state_digest;
    std::string text;
  };

  struct TraceMeta
  {
    /// Messages addressed to correct replicas were still in flight at the end.
    bool incomplete_delivery = false;
    bool step_limit_exceeded = false;
    std::uint64_t steps = 0;
    std::uint64_t events = 0;
  };

  struct Trace
  {
    std::vector<TraceRecord> records;
    TraceMeta meta;

    std::vector<CommitEvent> commit_events() const;
  };

  struct SimOptions
  {
    bool record_trace = true;
    std::uint64_t step_limit = default_step_limit;
    /// Keep the signature registry and reject forged certificates. The
    /// explorer turns this off: its adversary never embeds certificates.
    bool authenticate = true;
    /// Replica renamings under which state_hash is made invariant. Each must
    /// fix the Byzantine replicas and every primary that can matter. Null
    /// means identity only.
    std::shared_ptr<const std::vector<Renaming>> symmetry;
  };

  using ReplicaState =
    std::variant<hbft::Replica, fab::Replica, adversary::ByzantineReplica>;

  class Simulator
  {
  public:
    /// Byzantine replicas without a script stay silent. Throws
    /// adversary::ScriptError for invalid scripts.
    explicit Simulator(
      Config config,
      std::vector<adversary::ByzantineScript> scripts = {},
      SimOptions options = {});

    const Config& config() const { return config_; }
    std::uint64_t now() const { return now_; }
    bool step_limit_exceeded() const { return limit_hit_; }

    /// Enqueues msg from `from` to `to`. Throws ForgeryError when
    /// msg.sender != from or an embedded certificate is not authentic.
    MessageId send(ReplicaId from, ReplicaId to, const Message& msg);
    /// Sends to every other replica.
    std::vector<MessageId> broadcast(ReplicaId from, const Payload& payload);

    void schedule_delivery(MessageId id, std::uint64_t at_step);
    void hold(MessageId id);
    /// A released message becomes deliverable at the next step.
    void release(MessageId id);

    /// Holds every matching in-flight message and every future matching send
    /// until a release with an equal selector (or an empty one).
    void add_hold_rule(const Selector& selector);
    void release_matching(const Selector& selector);

    void fire_timeout(ReplicaId at, SeqNum seq, View view);

    /// Fires Byzantine start triggers.
    void start();
    /// Proposal by the primary of `view`. A correct primary must be in that
    /// view and broadcasts; a Byzantine primary sends to `to` (default all).
    void propose(
      View view,
      SeqNum seq,
      const Value& value,
      std::optional<std::vector<ReplicaId>> to = std::nullopt);
    void set_fresh_value(View view, const Value& value);
    void record_adversary_action(const std::string& text);

    /// Delivers a specific in-flight message now, held or not. Returns false
    /// when the delivery left the recipient unchanged and produced nothing.
    bool deliver(MessageId id);
    /// Whether delivering msg to `to` would change anything, computed on a
    /// copy of that replica alone.
    bool would_change(ReplicaId to, const Message& msg) const;

    struct Probe
    {
      bool changed = false;
      /// What the recipient would emit; sim_step is left 0.
      Effects effects;
    };
    /// would_change plus the effects themselves. Nothing is sent or recorded.
    Probe probe(ReplicaId to, const Message& msg) const;
    /// Delivers the next unheld message in (step, insertion) order. Returns
    /// false when none is deliverable or the step limit is reached.
    bool step();
    void run_until_quiescent();

    std::vector<MessageId> find(const Selector& selector) const;
    const std::vector<PendingMessage>& pending() const { return pending_; }
    const PendingMessage* pending_message(MessageId id) const;

    const ReplicaState& replica(ReplicaId r) const;
    /// View a correct replica would time out in; nullopt for Byzantine ones.
    std::optional<View> timeout_view(ReplicaId r) const;
    std::string replica_digest(ReplicaId r) const;
    /// 64-bit hash of replica_digest(r) (identity renaming).
    std::uint64_t replica_hash(ReplicaId r) const;
    /// Hash of sender, recipient and payload under a symmetry renaming.
    std::uint64_t fingerprint(const PendingMessage& p, std::size_t renaming = 0) const;

    const std::vector<CommitEvent>& commit_events() const { return commits_; }
    /// Values proposed (PREPARE or NEW-VIEW) by the primary of their view.
    const std::set<Value>& proposed_values() const { return proposed_; }

    /// Replica states plus the in-flight multiset to correct replicas, in a
    /// canonical order independent of message ids.
    /// Stale messages (see Replica::is_stale) are left out: they can never
    /// change anything.
    std::string state_key() const;
    /// 64-bit digest of the same information, from cached replica digests.
    /// With SimOptions::symmetry set, the minimum over all renamings, so
    /// states equal up to renaming hash alike.
    std::uint64_t state_hash() const;
    /// Hash of the state renamed by SimOptions::symmetry[renaming]; equal to
    /// state_hash(0) when that renaming is an automorphism of this state.
    std::uint64_t state_hash(std::size_t renaming) const;

    /// Snapshot of the trace with end-of-run metadata filled in.
    Trace finish() const;
    const Trace& trace() const { return trace_; }

  private:
    void process(PendingMessage msg);
    void apply_effects(ReplicaId from, Effects fx);
    void emit(ReplicaId from, const std::vector<adversary::Emission>& emissions);
    void sign(ReplicaId from, const Payload& payload);
    void verify(ReplicaId from, const Payload& payload) const;
    bool tick();
    void record(TraceRecord rec);
    std::vector<PendingMessage>::iterator find_pending(MessageId id);
    void refresh_digest(ReplicaId r);
    const std::uint64_t* digest_hash(ReplicaId r) const;
    ReplicaState& mutable_replica(ReplicaId r);
    std::vector<const PendingMessage*> live_pending() const;
    std::uint64_t hash_under(
      std::size_t k, const std::vector<const PendingMessage*>& live) const;
    bool stale(const PendingMessage& p) const;

    Config config_;
    SimOptions options_;
    /// Copy-on-write: copies of a simulator share replica states until one
    /// side changes them, so a copy is not safe to use from another thread.
    std::vector<std::shared_ptr<ReplicaState>> replicas_;
    /// [replica * renamings_ + renaming], recomputed lazily.
    mutable std::vector<std::uint64_t> digest_hashes_;
    mutable std::vector<bool> digest_stale_;
    std::size_t renamings_ = 1;
    struct FingerprintCache;
    /// Shared by copies, like replicas_.
    std::shared_ptr<FingerprintCache> fingerprint_cache_;
    /// inverse_[k][new] = old
    std::vector<Renaming> inverse_;
    std::vector<PendingMessage> pending_;
    std::vector<Selector> hold_rules_;
    std::uint64_t now_ = 0;
    std::uint64_t events_ = 0;
    MessageId next_id_ = 0;
    std::uint64_t next_order_ = 0;
    bool limit_hit_ = false;

    std::set<std::pair<std::uint32_t, std::string>> signed_reports_;
    std::set<std::tuple<std::uint32_t, std::uint64_t, std::uint64_t, Value>>
      attestations_;

    std::vector<CommitEvent> commits_;
    std::set<Value> proposed_;
    Trace trace_;
  };

  /// Runs a scenario to completion. Deterministic: equal scenarios give
  /// byte-identical traces. Throws ScenarioError on selectors that do not
  /// resolve, and ForgeryError / ScriptError from bad scripts.
  Trace run(const Scenario& scenario, SimOptions options = {});

  /// CONSENSUS_LAB_STEP_LIMIT or the default.
  std::uint64_t step_limit_from_env();
}
