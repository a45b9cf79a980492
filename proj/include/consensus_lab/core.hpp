#pragma once

// Protocol-agnostic domain types shared by the replica state machines, the
// simulator and the checker.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace consensus_lab
{
  struct ReplicaId
  {
    std::uint32_t index = 0;

    friend auto operator<=>(const ReplicaId&, const ReplicaId&) = default;
  };

  struct View
  {
    std::uint64_t number = 0;

    friend auto operator<=>(const View&, const View&) = default;
  };

  struct SeqNum
  {
    std::uint64_t number = 1;

    friend auto operator<=>(const SeqNum&, const SeqNum&) = default;
  };

  /// Opaque value label. The default-constructed value is NULL, the reserved
  /// "nothing was decided" sentinel a new primary may select.
  class Value
  {
  public:
    Value() = default;
    explicit Value(std::string label);

    static Value null() { return Value{}; }
    static constexpr const char* null_label = "NULL";

    bool is_null() const { return label_ == null_label; }
    const std::string& label() const { return label_; }

    friend auto operator<=>(const Value&, const Value&) = default;

  private:
    std::string label_ = null_label;
  };

  enum class Protocol
  {
    Hbft,
    Fab,
  };

  std::string to_string(Protocol p);
  std::optional<Protocol> parse_protocol(const std::string& s);

  /// Smallest cluster for which the protocol is claimed to be safe.
  std::uint32_t min_replicas(Protocol p, std::uint32_t f);

  /// Lower bound on replicas for any two-step protocol tolerating f Byzantine
  /// faults: the new primary's quorum of n-f reports must hold more than 2f
  /// votes for a committed value, so n - f = 2f + 2f + 1.
  std::uint32_t min_replicas_two_step(std::uint32_t f);

  class Config
  {
  public:
    /// Throws std::invalid_argument when n is below the protocol bound, the
    /// Byzantine set is larger than f, or any replica id is out of range.
    Config(
      Protocol protocol,
      std::uint32_t f,
      std::uint32_t n_replicas,
      std::set<ReplicaId> byzantine = {},
      std::map<View, ReplicaId> primary_overrides = {});

    Protocol protocol() const { return protocol_; }
    std::uint32_t f() const { return f_; }
    std::uint32_t n() const { return n_; }
    const std::set<ReplicaId>& byzantine() const { return byzantine_; }
    const std::map<View, ReplicaId>& primary_overrides() const
    {
      return primary_overrides_;
    }

    bool contains(ReplicaId r) const { return r.index < n_; }
    bool is_byzantine(ReplicaId r) const { return byzantine_.contains(r); }
    std::vector<ReplicaId> replicas() const;
    std::vector<ReplicaId> correct_replicas() const;

  private:
    Protocol protocol_;
    std::uint32_t f_;
    std::uint32_t n_;
    std::set<ReplicaId> byzantine_;
    std::map<View, ReplicaId> primary_overrides_;
  };

  ReplicaId primary_of(View view, const Config& config);

  /// Every replica except self, in index order.
  std::vector<ReplicaId> peers_of(ReplicaId self, const Config& config);

  /// Matching attestations needed to commit, n - f (2f+1 for hBFT at 3f+1,
  /// 4f+1 for FaB at 5f+1).
  std::size_t commit_quorum(const Config& config);

  /// View-change reports a new primary waits for before proposing.
  std::size_t progress_quorum(const Config& config);

  struct Accepted
  {
    View view;
    Value value;

    friend auto operator<=>(const Accepted&, const Accepted&) = default;
  };

  struct CommitCertificate
  {
    View view;
    SeqNum seq;
    Value value;
    std::vector<ReplicaId> attestations;

    friend bool operator==(const CommitCertificate&, const CommitCertificate&) =
      default;
  };

  bool validate_commit_certificate(
    const CommitCertificate& cc, const Config& config);

  struct Prepare
  {
    View view;
    SeqNum seq;
    Value value;

    friend bool operator==(const Prepare&, const Prepare&) = default;
  };

  struct Commit
  {
    View view;
    SeqNum seq;
    Value value;

    friend bool operator==(const Commit&, const Commit&) = default;
  };

  /// hBFT broadcasts this with its commit certificate; FaB sends it to the
  /// next primary only and never fills commit_cert.
  struct ViewChange
  {
    View new_view;
    SeqNum seq;
    std::optional<Accepted> accepted;
    std::optional<CommitCertificate> commit_cert;

    friend bool operator==(const ViewChange&, const ViewChange&) = default;
  };

  struct ViewChangeReport
  {
    ReplicaId reporter;
    ViewChange report;

    friend bool operator==(const ViewChangeReport&, const ViewChangeReport&) =
      default;
  };

  struct ProgressCertificate
  {
    View new_view;
    SeqNum seq;
    std::vector<ViewChangeReport> reports;

    friend bool operator==(
      const ProgressCertificate&, const ProgressCertificate&) = default;
  };

  /// Reporters are distinct, in range, and every report targets
  /// (new_view, seq). Size is checked separately by each protocol.
  bool well_formed(const ProgressCertificate& cert, const Config& config);

  struct NewView
  {
    View view;
    SeqNum seq;
    Value selected;
    ProgressCertificate progress_cert;

    friend bool operator==(const NewView&, const NewView&) = default;
  };

  using Payload = std::variant<Prepare, Commit, ViewChange, NewView>;

  struct Message
  {
    ReplicaId sender;
    Payload payload;

    friend bool operator==(const Message&, const Message&) = default;
  };

  /// "prepare", "commit", "view_change" or "new_view".
  std::string type_name(const Payload& payload);
  /// View the payload belongs to (new_view for VIEW-CHANGE).
  View view_of(const Payload& payload);
  SeqNum seq_of(const Payload& payload);

  struct CommitEvent
  {
    ReplicaId replica;
    View view;
    SeqNum seq;
    Value value;
    std::uint64_t sim_step = 0;

    friend bool operator==(const CommitEvent&, const CommitEvent&) = default;
  };

  /// Messages a replica wants sent plus what it decided while handling one
  /// event. The simulator stamps the sender and the step.
  struct Outbound
  {
    std::vector<ReplicaId> to;
    Payload payload;
  };

  struct Effects
  {
    std::vector<Outbound> sends;
    std::vector<CommitEvent> commits;
    std::vector<std::string> notes;
  };

  // Compact canonical text forms. Used for trace digests, state hashing and
  // lexicographic ordering of adversary payloads.
  std::string display_name(ReplicaId r);
  std::string to_string(const Accepted& a);
  std::string to_string(const CommitCertificate& cc);
  std::string to_string(const Payload& payload);
  std::string to_string(const CommitEvent& e);

  /// Replica ids renamed: rename[old index] = new index. Empty is identity.
  using Renaming = std::vector<std::uint32_t>;

  /// Builds a state digest twice over: as text for traces, and as a token
  /// sequence where replica ids stay symbolic so the digest can be hashed
  /// under any renaming without rebuilding it.
  class DigestBuilder
  {
  public:
    /// keep_text = false skips building str(); hashes are unaffected.
    explicit DigestBuilder(bool keep_text = true) : keep_text_(keep_text) {}

    void text(std::string_view s);
    void id(ReplicaId r);
    /// Order-free: hashed as a bit set.
    void ids(const std::set<ReplicaId>& rs);
    void ids(const std::vector<ReplicaId>& rs);
    /// Same text as to_string(payload).
    void payload(const Payload& p);

    const std::string& str() const { return text_; }
    std::uint64_t hash(const Renaming& rename = {}) const;
    /// hash(renamings[k]) into out[k] for every k, in one pass.
    void hash_all(const std::vector<Renaming>& renamings, std::uint64_t* out) const;

  private:
    void flush();

    // (tag, value): 1 = text hash, 2 = replica id, 3 = id bit set.
    std::vector<std::pair<std::uint8_t, std::uint64_t>> words_;
    std::string text_;
    bool keep_text_;
    // FNV-1a over text since the last id token.
    std::uint64_t run_ = 0xcbf29ce484222325ULL;
    bool dirty_ = false;
  };

}
