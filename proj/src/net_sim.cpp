#include "consensus_lab/net_sim.hpp"

#include "consensus_lab/scenario.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>

namespace consensus_lab::sim
{
  namespace
  {
    std::optional<Value> selector_value(const Payload& payload)
    {
      struct
      {
        std::optional<Value> operator()(const Prepare& p) const
        {
          return p.value;
        }
        std::optional<Value> operator()(const Commit& c) const
        {
          return c.value;
        }
        std::optional<Value> operator()(const ViewChange& vc) const
        {
          if (vc.accepted)
            return vc.accepted->value;
          return std::nullopt;
        }
        std::optional<Value> operator()(const NewView& nv) const
        {
          return nv.selected;
        }
      } visitor;
      return std::visit(visitor, payload);
    }

    std::uint64_t mix(std::uint64_t x)
    {
      // splitmix64 finalizer
      x ^= x >> 30;
      x *= 0xbf58476d1ce4e5b9ULL;
      x ^= x >> 27;
      x *= 0x94d049bb133111ebULL;
      x ^= x >> 31;
      return x;
    }

    bool is_proposal(const Payload& p)
    {
      return std::holds_alternative<Prepare>(p) ||
        std::holds_alternative<NewView>(p);
    }

    Value proposal_value(const Payload& p)
    {
      if (const auto* prep = std::get_if<Prepare>(&p))
        return prep->value;
      return std::get<NewView>(p).selected;
    }
  }

  bool Selector::matches(const Message& msg, ReplicaId recipient) const
  {
    if (type && *type != type_name(msg.payload))
      return false;
    if (view && *view != view_of(msg.payload))
      return false;
    if (seq && *seq != seq_of(msg.payload))
      return false;
    if (value && selector_value(msg.payload) != value)
      return false;
    if (!from.empty() && !from.contains(msg.sender))
      return false;
    if (!to.empty() && !to.contains(recipient))
      return false;
    return !payload || *payload == msg.payload;
  }

  std::string to_string(RecordKind kind)
  {
    switch (kind)
    {
      case RecordKind::Send:
        return "send";
      case RecordKind::Deliver:
        return "deliver";
      case RecordKind::Timeout:
        return "timeout";
      case RecordKind::Adversary:
        return "adversary";
      case RecordKind::Commit:
        return "commit";
      case RecordKind::Note:
        return "note";
    }
    return "?";
  }

  std::vector<CommitEvent> Trace::commit_events() const
  {
    std::vector<CommitEvent> out;
    for (const auto& r : records)
    {
      if (r.kind == RecordKind::Commit && r.commit)
        out.push_back(*r.commit);
    }
    return out;
  }

  struct Simulator::FingerprintCache
  {
    std::optional<Payload> payload;
    std::vector<std::uint64_t> hashes;
  };

  Simulator::Simulator(
    Config config,
    std::vector<adversary::ByzantineScript> scripts,
    SimOptions options) :
    config_(std::move(config)),
    options_(options)
  {
    std::map<ReplicaId, adversary::ByzantineScript> by_replica;
    for (auto& s : scripts)
    {
      adversary::validate(s, config_);
      if (by_replica.contains(s.replica))
      {
        throw adversary::ScriptError(
          "two scripts for " + display_name(s.replica));
      }
      by_replica.emplace(s.replica, std::move(s));
    }
    replicas_.reserve(config_.n());
    for (auto r : config_.replicas())
    {
      if (config_.is_byzantine(r))
      {
        auto it = by_replica.find(r);
        replicas_.push_back(std::make_shared<ReplicaState>(adversary::ByzantineReplica(
          it == by_replica.end() ? adversary::ByzantineScript{r, {}} :
                                   it->second)));
      }
      else if (config_.protocol() == Protocol::Hbft)
        replicas_.push_back(std::make_shared<ReplicaState>(hbft::Replica(r, config_)));
      else
        replicas_.push_back(std::make_shared<ReplicaState>(fab::Replica(r, config_)));
    }
    if (options_.symmetry)
    {
      for (const auto& ren : *options_.symmetry)
      {
        if (ren.size() != config_.n())
          throw SimulationError("symmetry renaming has the wrong size");
        Renaming inv(ren.size());
        for (std::uint32_t i = 0; i < ren.size(); ++i)
          inv.at(ren[i]) = i;
        inverse_.push_back(std::move(inv));
      }
    }
    renamings_ = options_.symmetry ? options_.symmetry->size() : 1;
    fingerprint_cache_ = std::make_shared<FingerprintCache>();
    digest_hashes_.assign(replicas_.size() * renamings_, 0);
    digest_stale_.assign(replicas_.size(), true);
    for (auto r : config_.replicas())
      refresh_digest(r);
  }

  ReplicaState& Simulator::mutable_replica(ReplicaId r)
  {
    auto& slot = replicas_.at(r.index);
    if (slot.use_count() > 1)
      slot = std::make_shared<ReplicaState>(*slot);
    return *slot;
  }

  std::uint64_t Simulator::fingerprint(const PendingMessage& p, std::size_t renaming) const
  {
    if (!p.fingerprints)
    {
      // Broadcasts repeat one payload; hash it once per renaming.
      auto& cache = *fingerprint_cache_;
      if (!cache.payload || !(*cache.payload == p.message.payload))
      {
        DigestBuilder b(false);
        b.payload(p.message.payload);
        cache.payload = p.message.payload;
        cache.hashes.resize(renamings_);
        if (!options_.symmetry)
          cache.hashes[0] = b.hash();
        else
          b.hash_all(*options_.symmetry, cache.hashes.data());
      }
      const auto from = p.message.sender.index;
      auto fp = std::make_shared<std::vector<std::uint64_t>>(renamings_);
      for (std::size_t k = 0; k < renamings_; ++k)
      {
        const auto f = options_.symmetry ? (*options_.symmetry)[k][from] : from;
        const auto t = options_.symmetry ? (*options_.symmetry)[k][p.to.index] : p.to.index;
        (*fp)[k] = mix(cache.hashes[k] + mix((std::uint64_t{f} << 32 | t) + 1));
      }
      p.fingerprints = std::move(fp);
    }
    return (*p.fingerprints).at(renaming);
  }

  void Simulator::refresh_digest(ReplicaId r)
  {
    digest_stale_[r.index] = true;
  }

  const std::uint64_t* Simulator::digest_hash(ReplicaId r) const
  {
    auto* out = digest_hashes_.data() + r.index * renamings_;
    if (!digest_stale_[r.index])
      return out;
    digest_stale_[r.index] = false;
    DigestBuilder b(false);
    const bool correct = std::visit(
      [&](const auto& s) -> bool {
        if constexpr (std::is_same_v<
                        std::decay_t<decltype(s)>,
                        adversary::ByzantineReplica>)
          return false;
        else
        {
          s.digest_into(b);
          return true;
        }
      },
      *replicas_[r.index]);
    if (!correct)
      std::fill(out, out + renamings_, 0);
    else if (!options_.symmetry)
      out[0] = b.hash();
    else
      b.hash_all(*options_.symmetry, out);
    return out;
  }

  bool Simulator::stale(const PendingMessage& p) const
  {
    return std::visit(
      [&](const auto& s) -> bool {
        if constexpr (std::is_same_v<
                        std::decay_t<decltype(s)>,
                        adversary::ByzantineReplica>)
          return false;
        else
          return s.is_stale(p.message);
      },
      *replicas_[p.to.index]);
  }

  void Simulator::record(TraceRecord rec)
  {
    if (options_.record_trace)
      trace_.records.push_back(std::move(rec));
  }

  void Simulator::sign(ReplicaId from, const Payload& payload)
  {
    if (const auto* vc = std::get_if<ViewChange>(&payload))
      signed_reports_.emplace(from.index, to_string(Payload{*vc}));
    else if (const auto* c = std::get_if<Commit>(&payload))
      attestations_.emplace(from.index, c->view.number, c->seq.number, c->value);
    else if (primary_of(view_of(payload), config_) == from)
    {
      const auto value = proposal_value(payload);
      attestations_.emplace(
        from.index,
        view_of(payload).number,
        seq_of(payload).number,
        value);
    }
  }

  void Simulator::verify(ReplicaId from, const Payload& payload) const
  {
    auto check_cc = [&](const CommitCertificate& cc) {
      for (auto r : cc.attestations)
      {
        if (!attestations_.contains(
              {r.index, cc.view.number, cc.seq.number, cc.value}))
        {
          throw ForgeryError(
            display_name(from) + " embeds an attestation " + display_name(r) +
            " never made for " + to_string(cc));
        }
      }
    };
    if (const auto* vc = std::get_if<ViewChange>(&payload))
    {
      if (vc->commit_cert)
        check_cc(*vc->commit_cert);
    }
    else if (const auto* nv = std::get_if<NewView>(&payload))
    {
      for (const auto& r : nv->progress_cert.reports)
      {
        if (r.reporter == from)
        {
          if (r.report.commit_cert)
            check_cc(*r.report.commit_cert);
          continue;
        }
        if (!signed_reports_.contains(
              {r.reporter.index, to_string(Payload{r.report})}))
        {
          throw ForgeryError(
            display_name(from) + " embeds a VIEW-CHANGE " +
            display_name(r.reporter) + " never sent");
        }
      }
    }
  }

  MessageId Simulator::send(ReplicaId from, ReplicaId to, const Message& msg)
  {
    if (!config_.contains(from) || !config_.contains(to))
      throw SimulationError("send between unknown replicas");
    if (msg.sender != from)
    {
      throw ForgeryError(
        display_name(from) + " tried to send as " + display_name(msg.sender));
    }
    if (options_.authenticate)
    {
      verify(from, msg.payload);
      sign(from, msg.payload);
    }
    if (is_proposal(msg.payload) && primary_of(view_of(msg.payload), config_) == from)
      proposed_.insert(proposal_value(msg.payload));

    PendingMessage p{next_id_++, msg, to, now_ + 1, next_order_++, false, {}};
    p.held = std::any_of(hold_rules_.begin(), hold_rules_.end(), [&](const auto& s) {
      return s.matches(p.message, to);
    });
    record(TraceRecord{
      now_, RecordKind::Send, from, to, msg.payload, p.id, {}, {}, {}});
    pending_.push_back(std::move(p));
    return pending_.back().id;
  }

  std::vector<MessageId> Simulator::broadcast(
    ReplicaId from, const Payload& payload)
  {
    std::vector<MessageId> ids;
    for (auto r : peers_of(from, config_))
      ids.push_back(send(from, r, Message{from, payload}));
    return ids;
  }

  std::vector<PendingMessage>::iterator Simulator::find_pending(MessageId id)
  {
    auto it = std::find_if(pending_.begin(), pending_.end(), [&](const auto& p) {
      return p.id == id;
    });
    if (it == pending_.end())
    {
      throw SimulationError(
        "message " + std::to_string(id) + " is unknown or already delivered");
    }
    return it;
  }

  const PendingMessage* Simulator::pending_message(MessageId id) const
  {
    for (const auto& p : pending_)
    {
      if (p.id == id)
        return &p;
    }
    return nullptr;
  }

  void Simulator::schedule_delivery(MessageId id, std::uint64_t at_step)
  {
    auto it = find_pending(id);
    if (at_step <= now_)
    {
      throw SimulationError(
        "cannot schedule message " + std::to_string(id) + " at past step " +
        std::to_string(at_step));
    }
    it->step = at_step;
    it->held = false;
  }

  void Simulator::hold(MessageId id)
  {
    find_pending(id)->held = true;
  }

  void Simulator::release(MessageId id)
  {
    auto it = find_pending(id);
    it->held = false;
    it->step = std::max(it->step, now_ + 1);
  }

  void Simulator::add_hold_rule(const Selector& selector)
  {
    for (auto& p : pending_)
    {
      if (selector.matches(p.message, p.to))
        p.held = true;
    }
    hold_rules_.push_back(selector);
  }

  void Simulator::release_matching(const Selector& selector)
  {
    if (selector == Selector{})
      hold_rules_.clear();
    else
      std::erase(hold_rules_, selector);
    for (auto& p : pending_)
    {
      if (p.held && selector.matches(p.message, p.to))
      {
        p.held = false;
        p.step = std::max(p.step, now_ + 1);
      }
    }
  }

  bool Simulator::tick()
  {
    if (events_ >= options_.step_limit)
    {
      limit_hit_ = true;
      return false;
    }
    ++events_;
    return true;
  }

  void Simulator::record_adversary_action(const std::string& text)
  {
    ++now_;
    record(TraceRecord{
      now_, RecordKind::Adversary, {}, {}, {}, {}, {}, {}, text});
  }

  void Simulator::emit(
    ReplicaId from, const std::vector<adversary::Emission>& emissions)
  {
    for (const auto& e : emissions)
    {
      for (auto to : e.to)
        send(from, to, Message{from, e.payload});
    }
  }

  void Simulator::apply_effects(ReplicaId from, Effects fx)
  {
    for (auto& n : fx.notes)
    {
      record(TraceRecord{
        now_, RecordKind::Note, from, {}, {}, {}, {}, {}, std::move(n)});
    }
    for (const auto& out : fx.sends)
    {
      if (options_.authenticate)
        sign(from, out.payload);
      if (
        is_proposal(out.payload) &&
        primary_of(view_of(out.payload), config_) == from)
        proposed_.insert(proposal_value(out.payload));
      for (auto to : out.to)
        send(from, to, Message{from, out.payload});
    }
    for (auto& c : fx.commits)
    {
      c.sim_step = now_;
      commits_.push_back(c);
      record(TraceRecord{
        now_, RecordKind::Commit, from, {}, {}, {}, c, replica_digest(from), {}});
    }
  }

  void Simulator::fire_timeout(ReplicaId at, SeqNum seq, View view)
  {
    if (!config_.contains(at))
      throw SimulationError("timeout at unknown replica");
    if (!tick())
      return;
    ++now_;
    const auto rec_index = trace_.records.size();
    record(TraceRecord{
      now_,
      RecordKind::Timeout,
      {},
      at,
      {},
      {},
      {},
      {},
      "timeout v" + std::to_string(view.number) + " s" +
        std::to_string(seq.number)});

    auto& state = mutable_replica(at);
    if (auto* byz = std::get_if<adversary::ByzantineReplica>(&state))
    {
      emit(at, byz->apply({adversary::TriggerKind::Timeout, view, {}}));
    }
    else
    {
      auto fx = std::visit(
        [&](auto& r) -> Effects {
          if constexpr (std::is_same_v<
                          std::decay_t<decltype(r)>,
                          adversary::ByzantineReplica>)
            return {};
          else
            return r.on_timeout(seq, view);
        },
        state);
      apply_effects(at, std::move(fx));
    }
    refresh_digest(at);
    if (options_.record_trace)
      trace_.records[rec_index].replica_state_digest = replica_digest(at);
  }

  void Simulator::start()
  {
    for (auto r : config_.replicas())
    {
      auto& state = mutable_replica(r);
      if (auto* byz = std::get_if<adversary::ByzantineReplica>(&state))
        emit(byz->id(), byz->apply({adversary::TriggerKind::Start, {}, {}}));
    }
  }

  void Simulator::propose(
    View view,
    SeqNum seq,
    const Value& value,
    std::optional<std::vector<ReplicaId>> to)
  {
    const auto primary = primary_of(view, config_);
    auto& state = mutable_replica(primary);
    if (std::holds_alternative<adversary::ByzantineReplica>(state))
    {
      for (auto r : to.value_or(peers_of(primary, config_)))
        send(primary, r, Message{primary, Prepare{view, seq, value}});
      return;
    }
    if (to && *to != peers_of(primary, config_))
    {
      throw SimulationError(
        "correct primary " + display_name(primary) +
        " must propose to every other replica");
    }
    auto fx = std::visit(
      [&](auto& r) -> Effects {
        if constexpr (std::is_same_v<
                        std::decay_t<decltype(r)>,
                        adversary::ByzantineReplica>)
          return {};
        else
        {
          if (r.view() != view)
          {
            throw SimulationError(
              display_name(primary) + " is not in view " +
              std::to_string(view.number));
          }
          return r.propose(seq, value);
        }
      },
      state);
    apply_effects(primary, std::move(fx));
    refresh_digest(primary);
  }

  void Simulator::set_fresh_value(View view, const Value& value)
  {
    auto& state = mutable_replica(primary_of(view, config_));
    if (auto* r = std::get_if<fab::Replica>(&state))
      r->set_fresh_value(view, value);
  }

  void Simulator::process(PendingMessage msg)
  {
    const auto to = msg.to;
    const auto rec_index = trace_.records.size();
    record(TraceRecord{
      now_,
      RecordKind::Deliver,
      msg.message.sender,
      to,
      msg.message.payload,
      msg.id,
      {},
      {},
      {}});

    auto& state = mutable_replica(to);
    if (auto* byz = std::get_if<adversary::ByzantineReplica>(&state))
    {
      emit(
        to,
        byz->apply(
          {adversary::TriggerKind::Deliver,
           view_of(msg.message.payload),
           msg.message}));
    }
    else
    {
      auto fx = std::visit(
        [&](auto& r) -> Effects {
          if constexpr (std::is_same_v<
                          std::decay_t<decltype(r)>,
                          adversary::ByzantineReplica>)
            return {};
          else
            return r.handle(msg.message);
        },
        state);
      apply_effects(to, std::move(fx));
    }
    refresh_digest(to);
    if (options_.record_trace)
      trace_.records[rec_index].replica_state_digest = replica_digest(to);
  }

  bool Simulator::deliver(MessageId id)
  {
    auto it = find_pending(id);
    if (!tick())
      return false;
    PendingMessage msg = std::move(*it);
    pending_.erase(it);
    ++now_;
    // Holding the old state also makes the delivery copy it first.
    const auto before = replicas_[msg.to.index];
    const auto sends_before = next_id_;
    const auto commits_before = commits_.size();
    const auto to = msg.to;
    process(std::move(msg));
    if (next_id_ != sends_before || commits_.size() != commits_before)
      return true;
    return std::visit(
      [&](const auto& now) -> bool {
        using T = std::decay_t<decltype(now)>;
        if constexpr (std::is_same_v<T, adversary::ByzantineReplica>)
          return true;
        else
          return !now.same_state(std::get<T>(*before));
      },
      *replicas_[to.index]);
  }

  bool Simulator::would_change(ReplicaId to, const Message& msg) const
  {
    return probe(to, msg).changed;
  }

  Simulator::Probe Simulator::probe(ReplicaId to, const Message& msg) const
  {
    Probe out;
    auto copy = replica(to);
    if (std::holds_alternative<adversary::ByzantineReplica>(copy))
      return out;
    if (stale(PendingMessage{0, msg, to, 0, 0, false, {}}))
      return out;
    out.effects = std::visit(
      [&](auto& r) -> Effects {
        if constexpr (std::is_same_v<
                        std::decay_t<decltype(r)>,
                        adversary::ByzantineReplica>)
          return {};
        else
          return r.handle(msg);
      },
      copy);
    out.changed = !out.effects.sends.empty() || !out.effects.commits.empty() ||
      std::visit(
        [&](const auto& r) -> bool {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, adversary::ByzantineReplica>)
            return false;
          else
            return !r.same_state(std::get<T>(replica(to)));
        },
        copy);
    return out;
  }

  bool Simulator::step()
  {
    auto best = pending_.end();
    for (auto it = pending_.begin(); it != pending_.end(); ++it)
    {
      if (it->held)
        continue;
      if (
        best == pending_.end() ||
        std::tie(it->step, it->order) < std::tie(best->step, best->order))
        best = it;
    }
    if (best == pending_.end())
      return false;
    if (!tick())
      return false;
    PendingMessage msg = std::move(*best);
    pending_.erase(best);
    now_ = std::max(now_, msg.step);
    process(std::move(msg));
    return true;
  }

  void Simulator::run_until_quiescent()
  {
    while (step())
    {
    }
  }

  std::vector<MessageId> Simulator::find(const Selector& selector) const
  {
    std::vector<MessageId> ids;
    for (const auto& p : pending_)
    {
      if (selector.matches(p.message, p.to))
        ids.push_back(p.id);
    }
    return ids;
  }

  const ReplicaState& Simulator::replica(ReplicaId r) const
  {
    if (!config_.contains(r))
      throw SimulationError("unknown replica " + std::to_string(r.index));
    return *replicas_[r.index];
  }

  std::optional<View> Simulator::timeout_view(ReplicaId r) const
  {
    return std::visit(
      [](const auto& s) -> std::optional<View> {
        if constexpr (std::is_same_v<
                        std::decay_t<decltype(s)>,
                        adversary::ByzantineReplica>)
          return std::nullopt;
        else
          return s.participating_view();
      },
      replica(r));
  }

  std::uint64_t Simulator::replica_hash(ReplicaId r) const
  {
    if (!config_.contains(r))
      throw SimulationError("unknown replica " + std::to_string(r.index));
    return digest_hash(r)[0];
  }

  std::string Simulator::replica_digest(ReplicaId r) const
  {
    return std::visit([](const auto& s) { return s.digest(); }, replica(r));
  }

  std::string Simulator::state_key() const
  {
    std::string key;
    for (auto r : config_.replicas())
    {
      if (!config_.is_byzantine(r))
        key += replica_digest(r) + "\n";
    }
    std::vector<std::string> in_flight;
    for (const auto& p : pending_)
    {
      if (config_.is_byzantine(p.to) || stale(p))
        continue;
      in_flight.push_back(
        std::to_string(p.message.sender.index) + ">" +
        std::to_string(p.to.index) + (p.held ? "h " : " ") +
        to_string(p.message.payload));
    }
    std::sort(in_flight.begin(), in_flight.end());
    for (const auto& s : in_flight)
      key += s + "\n";
    return key;
  }

  std::vector<const PendingMessage*> Simulator::live_pending() const
  {
    std::vector<const PendingMessage*> live;
    for (const auto& p : pending_)
    {
      if (!config_.is_byzantine(p.to) && !stale(p))
        live.push_back(&p);
    }
    return live;
  }

  std::uint64_t Simulator::hash_under(
    std::size_t k, const std::vector<const PendingMessage*>& live) const
  {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::uint32_t j = 0; j < config_.n(); ++j)
    {
      // Whoever lands on position j under renaming k.
      const auto i = options_.symmetry ? inverse_[k][j] : j;
      if (!config_.is_byzantine(ReplicaId{i}))
        h = mix(h ^ digest_hash(ReplicaId{i})[k]) + j;
    }
    // Order-free multiset hash of the in-flight messages.
    std::uint64_t flight = 0;
    for (const auto* p : live)
      flight += mix(fingerprint(*p, k) ^ (p->held ? 0x5bd1e995ULL : 0));
    return mix(h ^ mix(flight + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t Simulator::state_hash() const
  {
    const auto live = live_pending();
    std::uint64_t best = ~std::uint64_t{0};
    for (std::size_t k = 0; k < renamings_; ++k)
      best = std::min(best, hash_under(k, live));
    return best;
  }

  std::uint64_t Simulator::state_hash(std::size_t renaming) const
  {
    if (renaming >= renamings_)
      throw SimulationError("no such symmetry renaming");
    return hash_under(renaming, live_pending());
  }

  Trace Simulator::finish() const
  {
    Trace out = trace_;
    out.meta.incomplete_delivery =
      std::any_of(pending_.begin(), pending_.end(), [&](const auto& p) {
        return !config_.is_byzantine(p.to);
      });
    out.meta.step_limit_exceeded = limit_hit_;
    out.meta.steps = now_;
    out.meta.events = events_;
    return out;
  }

  std::uint64_t step_limit_from_env()
  {
    if (const char* env = std::getenv("CONSENSUS_LAB_STEP_LIMIT"))
    {
      try
      {
        std::size_t used = 0;
        const auto v = std::stoull(env, &used);
        if (used == std::string(env).size() && v > 0)
          return v;
      }
      catch (const std::exception&)
      {}
      throw std::invalid_argument(
        std::string("CONSENSUS_LAB_STEP_LIMIT must be a positive integer, got '") +
        env + "'");
    }
    return default_step_limit;
  }

  namespace
  {
    std::string describe(const Selector& s)
    {
      std::string out = s.type.value_or("any");
      if (s.view)
        out += " v" + std::to_string(s.view->number);
      if (s.value)
        out += " " + s.value->label();
      if (!s.from.empty())
      {
        out += " from";
        for (auto r : s.from)
          out += " " + display_name(r);
      }
      if (!s.to.empty())
      {
        out += " to";
        for (auto r : s.to)
          out += " " + display_name(r);
      }
      if (s.payload)
        out += " " + to_string(*s.payload);
      return out;
    }

    struct EntryRunner
    {
      Simulator& sim;
      std::size_t index;

      std::string where() const
      {
        return "schedule[" + std::to_string(index) + "]";
      }

      void operator()(const DeliverEntry& e) const
      {
        auto ids = sim.find(e.selector);
        if (ids.empty())
        {
          throw ScenarioError(
            where() + ".deliver: no in-flight message matches " +
            describe(e.selector));
        }
        if (!e.all && ids.size() > 1)
        {
          throw ScenarioError(
            where() + ".deliver: " + std::to_string(ids.size()) +
            " messages match " + describe(e.selector) +
            " (set \"all\": true to deliver every match)");
        }
        for (auto id : ids)
          sim.deliver(id);
      }

      void operator()(const HoldEntry& e) const
      {
        sim.record_adversary_action("hold " + describe(e.selector));
        sim.add_hold_rule(e.selector);
      }

      void operator()(const ReleaseEntry& e) const
      {
        sim.record_adversary_action("release " + describe(e.selector));
        sim.release_matching(e.selector);
      }

      void operator()(const ScheduleAtEntry& e) const
      {
        sim.record_adversary_action(
          "schedule " + describe(e.selector) + " at step " +
          std::to_string(e.at_step));
        auto ids = sim.find(e.selector);
        if (ids.empty())
        {
          throw ScenarioError(
            where() + ".schedule: no in-flight message matches " +
            describe(e.selector));
        }
        try
        {
          for (auto id : ids)
            sim.schedule_delivery(id, e.at_step);
        }
        catch (const SimulationError& err)
        {
          throw ScenarioError(where() + ".schedule: " + err.what());
        }
      }

      void operator()(const TimeoutEntry& e) const
      {
        sim.fire_timeout(e.replica, e.seq, e.view);
      }
    };
  }

  Trace run(const Scenario& scenario, SimOptions options)
  {
    Simulator sim(scenario.config(), scenario.scripts, options);
    const View first_view{1};
    sim.start();
    for (const auto& p : scenario.initial_proposals)
    {
      if (p.view == first_view)
      {
        try
        {
          sim.propose(p.view, scenario.seq, p.value, p.to);
        }
        catch (const SimulationError& err)
        {
          throw ScenarioError(std::string("initial_proposals: ") + err.what());
        }
      }
      else
        sim.set_fresh_value(p.view, p.value);
    }

    const bool quiesce = scenario.delivery == DeliveryMode::Auto;
    for (std::size_t i = 0; i < scenario.schedule.size(); ++i)
    {
      if (sim.step_limit_exceeded())
        break;
      std::visit(EntryRunner{sim, i}, scenario.schedule[i]);
      if (quiesce)
        sim.run_until_quiescent();
    }
    if (quiesce && scenario.schedule.empty())
      sim.run_until_quiescent();
    return sim.finish();
  }
}
