#include "consensus_lab/explorer.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <type_traits>
#include <unordered_map>

namespace consensus_lab::explorer
{
  namespace
  {
    const View view1{1};
    const View view2{2};

    std::optional<ReplicaId> byzantine_of(const Config& config)
    {
      if (config.byzantine().empty())
        return std::nullopt;
      return *config.byzantine().begin();
    }

    /// Payloads a Byzantine replica may emit, with the replicas each may go
    /// to, sorted by canonical text.
    struct UniverseEntry
    {
      Payload payload;
      std::vector<ReplicaId> recipients;
    };

    std::vector<UniverseEntry> build_universe(const ExploreSpec& spec)
    {
      std::vector<UniverseEntry> out;
      const auto byz = byzantine_of(spec.config);
      if (!byz)
        return out;
      const auto& config = spec.config;
      const auto correct = config.correct_replicas();
      std::vector<Payload> payloads;
      for (const auto& x : spec.value_universe)
      {
        if (primary_of(view1, config) == *byz)
          payloads.push_back(Prepare{view1, spec.seq, x});
        payloads.push_back(Commit{view1, spec.seq, x});
        payloads.push_back(Commit{view2, spec.seq, x});
        payloads.push_back(ViewChange{view2, spec.seq, Accepted{view1, x}, std::nullopt});
      }
      payloads.push_back(ViewChange{view2, spec.seq, std::nullopt, std::nullopt});

      for (auto& p : payloads)
      {
        std::vector<ReplicaId> to = correct;
        // FaB reports only ever reach the next primary.
        if (config.protocol() == Protocol::Fab && std::holds_alternative<ViewChange>(p))
        {
          const auto next = primary_of(view2, config);
          to.clear();
          if (!config.is_byzantine(next))
            to.push_back(next);
        }
        if (!to.empty())
          out.push_back({std::move(p), std::move(to)});
      }
      std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return to_string(a.payload) < to_string(b.payload);
      });
      return out;
    }

    /// Every permutation of the correct replicas that are not a view-1 or
    /// view-2 primary. Nothing reachable tells those replicas apart (no view
    /// above 2 is reachable), so states equal up to such a renaming are
    /// explored once.
    std::shared_ptr<const std::vector<Renaming>> symmetry_of(const Config& config)
    {
      std::vector<std::uint32_t> movable;
      for (auto r : config.correct_replicas())
      {
        if (r != primary_of(view1, config) && r != primary_of(view2, config))
          movable.push_back(r.index);
      }
      auto out = std::make_shared<std::vector<Renaming>>();
      auto perm = movable;
      do
      {
        Renaming ren(config.n());
        for (std::uint32_t i = 0; i < config.n(); ++i)
          ren[i] = i;
        for (std::size_t i = 0; i < movable.size(); ++i)
          ren[movable[i]] = perm[i];
        out->push_back(std::move(ren));
      } while (std::next_permutation(perm.begin(), perm.end()));
      return out;
    }

    sim::Simulator initial_simulator(
      const ExploreSpec& spec,
      std::shared_ptr<const std::vector<Renaming>> symmetry = nullptr)
    {
      sim::SimOptions options{false, sim::default_step_limit, false, std::move(symmetry)};
      sim::Simulator s(spec.config, {}, options);
      s.start();
      s.set_fresh_value(view2, spec.value_universe.front());
      if (!spec.config.is_byzantine(primary_of(view1, spec.config)))
        s.propose(view1, spec.seq, spec.value_universe.front());
      return s;
    }

    constexpr std::uint32_t unreachable = 1u << 20;

    enum class Conflict
    {
      None,
      /// One side committed NULL.
      Null,
      /// Two client values.
      Values,
    };

    Conflict conflict_in(const std::vector<CommitEvent>& commits, const Config& config)
    {
      if (checker::check_agreement(commits, config).holds())
        return Conflict::None;
      std::vector<CommitEvent> values;
      for (const auto& e : commits)
        if (!e.value.is_null())
          values.push_back(e);
      return checker::check_agreement(values, config).holds() ? Conflict::Null : Conflict::Values;
    }

    /// Lower bound on further events a correct replica must handle before
    /// it commits again at `seq`. An accepting PREPARE or NEW-VIEW adds at
    /// most two attestations (primary and self), any other event at most
    /// one, and entering a view starts its log afresh. Views above 2 are
    /// out of reach.
    template <typename R>
    std::uint32_t commit_distance(const R& r, SeqNum seq, std::uint32_t quorum)
    {
      const auto* s = r.slot(seq);
      bool committed_here = false;
      if constexpr (std::is_same_v<R, hbft::Replica>)
      {
        if (s && s->committed)
          return unreachable;
      }
      else
        committed_here = s && s->committed_views.contains(r.view());

      using M = decltype(r.mode());
      std::uint32_t best = unreachable;
      if (r.mode() == M::InView && !committed_here)
      {
        std::uint32_t have = 0;
        const bool accepted = s && s->accepted && s->accepted->view == r.view();
        if (s)
        {
          if (auto it = s->commit_log.find(r.view()); it != s->commit_log.end())
          {
            if (accepted)
            {
              if (auto v = it->second.find(s->accepted->value); v != it->second.end())
                have = static_cast<std::uint32_t>(v->second.size());
            }
            else
            {
              for (const auto& [_, who] : it->second)
                have = std::max(have, static_cast<std::uint32_t>(who.size()));
            }
          }
        }
        if (accepted)
          best = quorum > have ? quorum - have : 0;
        else
          best = std::max<std::uint32_t>(1, quorum > have + 1 ? quorum - have - 1 : 0);
      }
      const bool can_move = r.mode() == M::ViewChanging || r.view() < view2;
      if (can_move)
        best = std::min(best, 1 + (quorum > 2 ? quorum - 2 : 0));
      return best;
    }

    struct Node
    {
      sim::Simulator sim;
      std::uint32_t byz_sent = 0;
    };

    class Search
    {
    public:
      explicit Search(const ExploreSpec& spec) :
        spec_(spec),
        byz_(byzantine_of(spec.config)),
        universe_(build_universe(spec))
      {
        if (!spec.dedup)
          return;
        symmetry_ = symmetry_of(spec.config);
        // Index of each transposition among the renamings.
        for (std::size_t k = 0; k < symmetry_->size(); ++k)
        {
          const auto& ren = (*symmetry_)[k];
          std::vector<std::uint32_t> moved;
          for (std::uint32_t i = 0; i < ren.size(); ++i)
            if (ren[i] != i)
              moved.push_back(i);
          if (moved.size() == 2)
            swaps_.push_back({moved[0], moved[1], k});
        }
      }

      std::optional<std::vector<Choice>> run(ExploreStats& stats)
      {
        Node root{initial_simulator(spec_, symmetry_), 0};
        stats_ = &stats;
        if (!checker::check_agreement(root.sim.commit_events(), spec_.config).holds())
          return path_;
        if (dfs(root, 0))
          return path_;
        return null_path_;
      }

    private:
      struct Swap
      {
        std::uint32_t a;
        std::uint32_t b;
        std::size_t renaming;
      };

      /// Replicas that swapping leaves the whole state unchanged: choices
      /// differing only by such a swap lead to equivalent states.
      struct Twins
      {
        /// twin_of[r] = smallest replica r is interchangeable with.
        std::vector<std::uint32_t> first;
        std::vector<std::size_t> swaps;
      };

      Twins twins_of(const Node& node) const
      {
        Twins t;
        t.first.resize(spec_.config.n());
        for (std::uint32_t i = 0; i < t.first.size(); ++i)
          t.first[i] = i;
        if (swaps_.empty())
          return t;
        const auto h = node.sim.state_hash(0);
        for (std::size_t s = 0; s < swaps_.size(); ++s)
        {
          const auto& sw = swaps_[s];
          if (node.sim.state_hash(sw.renaming) != h)
            continue;
          t.swaps.push_back(s);
          t.first[sw.b] = std::min(t.first[sw.b], t.first[sw.a]);
        }
        return t;
      }

      /// A NULL-against-value conflict is kept as a fallback while the
      /// search goes on for two conflicting client values.
      bool record(const std::vector<CommitEvent>& commits, const sim::Simulator& s)
      {
        if (!checker::check_validity(commits, s.proposed_values(), spec_.config).holds())
          ++stats_->validity_violations;
        const auto c = conflict_in(commits, spec_.config);
        if (c == Conflict::Null && !null_path_)
          null_path_ = path_;
        return c == Conflict::Values;
      }

      bool violated(const Node& node, std::size_t commits_before)
      {
        const auto& commits = node.sim.commit_events();
        if (commits.size() == commits_before)
          return false;
        return record(commits, node.sim);
      }

      /// Explores `child` reached by `choice`. True once a violation is found.
      bool descend(Node& child, Choice choice, std::uint32_t depth, std::size_t commits_before)
      {
        path_.push_back(std::move(choice));
        for (auto r : spec_.config.correct_replicas())
        {
          if (auto v = child.sim.timeout_view(r); v && v->number > view2.number)
            throw std::logic_error("explorer reached a view above 2; symmetry no longer holds");
        }
        if (violated(child, commits_before))
          return true;
        if (dfs(child, depth + 1))
          return true;
        path_.pop_back();
        return false;
      }

      /// Seen at no greater depth with no more Byzantine messages spent.
      bool dominated(const Node& node, std::uint32_t depth)
      {
        auto& front = seen_[node.sim.state_hash()];
        for (const auto& [d, b] : front)
        {
          if (d <= depth && b <= node.byz_sent)
            return true;
        }
        std::erase_if(front, [&](const auto& e) {
          return depth <= e.first && node.byz_sent <= e.second;
        });
        front.emplace_back(depth, node.byz_sent);
        return false;
      }

      /// Positions in `effective` whose subsets need exploring: a subset
      /// that skips a twin listed earlier is a renaming of one that does not.
      static bool canonical_subset(
        std::uint32_t mask, const std::vector<ReplicaId>& effective, const Twins& twins)
      {
        for (std::size_t i = 0; i < effective.size(); ++i)
        {
          if (!(mask & (1u << i)))
            continue;
          const auto first = twins.first[effective[i].index];
          for (std::size_t j = 0; j < i; ++j)
          {
            if (
              twins.first[effective[j].index] == first && !(mask & (1u << j)))
              return false;
          }
        }
        return true;
      }

      /// Fewest further steps before two correct replicas can hold
      /// conflicting commits.
      std::uint32_t violation_distance(const Node& node) const
      {
        const auto& config = spec_.config;
        const auto quorum = static_cast<std::uint32_t>(commit_quorum(config));
        std::set<ReplicaId> committed;
        for (const auto& e : node.sim.commit_events())
          if (!config.is_byzantine(e.replica))
            committed.insert(e.replica);
        std::vector<std::uint32_t> distances;
        std::uint32_t best = unreachable;
        for (auto r : config.correct_replicas())
        {
          const auto d = std::visit(
            [&](const auto& state) -> std::uint32_t {
              using T = std::decay_t<decltype(state)>;
              if constexpr (std::is_same_v<T, adversary::ByzantineReplica>)
                return unreachable;
              else
                return commit_distance(state, spec_.seq, quorum);
            },
            node.sim.replica(r));
          distances.push_back(d);
          // With a single committed replica the conflict must come from
          // someone else.
          if (committed.size() != 1 || !committed.contains(r))
            best = std::min(best, d);
        }
        if (!committed.empty())
          return best;
        // Nobody has committed: two replicas must.
        if (distances.size() < 2)
          return unreachable;
        std::sort(distances.begin(), distances.end());
        return distances[1];
      }

      bool dfs(Node& node, std::uint32_t depth)
      {
        if (spec_.prune && violation_distance(node) > spec_.max_steps - depth)
        {
          ++stats_->pruned;
          ++stats_->traces;
          return false;
        }
        if (spec_.dedup && dominated(node, depth))
        {
          ++stats_->dedup_hits;
          return false;
        }
        ++stats_->states;
        if (depth >= spec_.max_steps)
        {
          ++stats_->traces;
          ++stats_->bound_hits;
          return false;
        }
        if (depth + 1 == spec_.max_steps)
          return last_step(node);

        bool any_child = false;
        const auto commits_before = node.sim.commit_events().size();
        const auto& config = spec_.config;
        const auto twins = twins_of(node);

        // Deliveries to correct replicas, in queue order. A message that a
        // twin swap (or nothing) turns into one earlier in the queue is
        // skipped: its child is a renaming of that one's.
        std::vector<const sim::PendingMessage*> deliverable;
        for (const auto& p : node.sim.pending())
        {
          if (!config.is_byzantine(p.to))
            deliverable.push_back(&p);
        }
        std::vector<sim::PendingMessage> to_deliver;
        for (std::size_t i = 0; i < deliverable.size(); ++i)
        {
          const auto& p = *deliverable[i];
          bool repeat = false;
          for (std::size_t j = 0; j < i && !repeat; ++j)
          {
            const auto& q = *deliverable[j];
            if (q.held != p.held)
              continue;
            const auto qf = node.sim.fingerprint(q);
            repeat = qf == node.sim.fingerprint(p);
            for (auto s : twins.swaps)
            {
              repeat = repeat || qf == node.sim.fingerprint(p, swaps_[s].renaming);
            }
          }
          if (repeat)
            ++stats_->pruned;
          else
            to_deliver.push_back(p);
        }
        for (const auto& p : to_deliver)
        {
          Node child = node;
          if (!child.sim.deliver(p.id))
          {
            ++stats_->pruned;
            continue;
          }
          any_child = true;
          Choice c;
          c.kind = Choice::Kind::Deliver;
          c.replica = p.message.sender;
          c.to = p.to;
          c.view = view_of(p.message.payload);
          c.payload = p.message.payload;
          if (descend(child, std::move(c), depth, commits_before))
            return true;
        }

        // Timeouts in view 1 only; later views are out of bounds.
        for (auto r : config.correct_replicas())
        {
          if (node.sim.timeout_view(r) != view1 || twins.first[r.index] != r.index)
            continue;
          Node child = node;
          const auto before = child.sim.replica_hash(r);
          child.sim.fire_timeout(r, spec_.seq, view1);
          if (child.sim.replica_hash(r) == before && child.sim.pending().size() == node.sim.pending().size())
          {
            ++stats_->pruned;
            continue;
          }
          any_child = true;
          Choice c;
          c.kind = Choice::Kind::Timeout;
          c.replica = r;
          c.view = view1;
          if (descend(child, std::move(c), depth, commits_before))
            return true;
        }

        // Byzantine emissions: payload in canonical order, then recipient
        // subsets in bitmask order. A recipient the payload would not change
        // is never included; the smaller subset covers it.
        if (byz_ && node.byz_sent < spec_.max_byz_messages)
        {
          for (std::size_t u = 0; u < universe_.size(); ++u)
          {
            const auto& entry = universe_[u];
            const Message msg{*byz_, entry.payload};
            std::vector<ReplicaId> effective;
            for (auto r : entry.recipients)
            {
              if (probe(node, r, msg, injection_key(u)).changed)
                effective.push_back(r);
              else
                ++stats_->pruned;
            }
            const std::uint32_t subsets = 1u << effective.size();
            for (std::uint32_t mask = 1; mask < subsets; ++mask)
            {
              if (!canonical_subset(mask, effective, twins))
              {
                ++stats_->pruned;
                continue;
              }
              Node child = node;
              ++child.byz_sent;
              Choice c;
              c.kind = Choice::Kind::Inject;
              c.replica = *byz_;
              c.view = view_of(entry.payload);
              c.payload = entry.payload;
              for (std::size_t i = 0; i < effective.size(); ++i)
              {
                if (!(mask & (1u << i)))
                  continue;
                const auto r = effective[i];
                child.sim.deliver(child.sim.send(*byz_, r, msg));
                c.recipients.push_back(r);
              }
              any_child = true;
              if (descend(child, std::move(c), depth, commits_before))
                return true;
            }
          }
        }

        if (!any_child)
          ++stats_->traces;
        return false;
      }

      static std::uint64_t injection_key(std::size_t u)
      {
        // Apart from message fingerprints.
        return ~std::uint64_t{u} * 0xff51afd7ed558ccdULL;
      }

      /// Leaf probes repeat a lot: the outcome depends only on the
      /// recipient's state and the message.
      struct LeafOutcome
      {
        bool changed = false;
        std::vector<CommitEvent> commits;
      };

      const LeafOutcome& probe(
        const Node& node, ReplicaId to, const Message& msg, std::uint64_t msg_key)
      {
        const auto key =
          node.sim.replica_hash(to) * 0x9e3779b97f4a7c15ULL ^ (msg_key + to.index);
        if (auto it = probes_.find(key); it != probes_.end())
          return it->second;
        if (probes_.size() > max_cached_probes)
          probes_.clear();
        auto pr = node.sim.probe(to, msg);
        return probes_
          .emplace(key, LeafOutcome{pr.changed, std::move(pr.effects.commits)})
          .first->second;
      }

      /// Children on the depth bound. Only a new commit can break agreement
      /// there and timeouts never commit, so each delivery is probed on a copy
      /// of its recipient instead of a copy of the whole simulator.
      bool last_step(const Node& node)
      {
        const auto& config = spec_.config;
        // `c` is on the path while its commits are judged.
        auto check = [&](const std::vector<CommitEvent>& fresh, Choice& c) {
          ++stats_->traces;
          ++stats_->bound_hits;
          if (fresh.empty())
            return false;
          auto commits = node.sim.commit_events();
          commits.insert(commits.end(), fresh.begin(), fresh.end());
          path_.push_back(std::move(c));
          if (record(commits, node.sim))
            return true;
          c = std::move(path_.back());
          path_.pop_back();
          return false;
        };

        for (const auto& p : node.sim.pending())
        {
          if (config.is_byzantine(p.to))
            continue;
          const auto& pr = probe(node, p.to, p.message, node.sim.fingerprint(p));
          if (!pr.changed)
          {
            ++stats_->pruned;
            continue;
          }
          Choice c;
          c.kind = Choice::Kind::Deliver;
          c.replica = p.message.sender;
          c.to = p.to;
          c.view = view_of(p.message.payload);
          c.payload = p.message.payload;
          if (check(pr.commits, c))
            return true;
        }

        if (!byz_ || node.byz_sent >= spec_.max_byz_messages)
          return false;
        for (std::size_t u = 0; u < universe_.size(); ++u)
        {
          const auto& entry = universe_[u];
          const Message msg{*byz_, entry.payload};
          std::vector<ReplicaId> effective;
          std::vector<std::vector<CommitEvent>> commits_of;
          for (auto r : entry.recipients)
          {
            const auto& pr = probe(node, r, msg, injection_key(u));
            if (!pr.changed)
            {
              ++stats_->pruned;
              continue;
            }
            effective.push_back(r);
            commits_of.push_back(pr.commits);
          }
          const std::uint32_t subsets = 1u << effective.size();
          for (std::uint32_t mask = 1; mask < subsets; ++mask)
          {
            std::vector<CommitEvent> fresh;
            Choice c;
            c.kind = Choice::Kind::Inject;
            c.replica = *byz_;
            c.view = view_of(entry.payload);
            c.payload = entry.payload;
            for (std::size_t i = 0; i < effective.size(); ++i)
            {
              if (!(mask & (1u << i)))
                continue;
              fresh.insert(fresh.end(), commits_of[i].begin(), commits_of[i].end());
              c.recipients.push_back(effective[i]);
            }
            if (check(fresh, c))
              return true;
          }
        }
        return false;
      }

      const ExploreSpec& spec_;
      std::optional<ReplicaId> byz_;
      std::vector<UniverseEntry> universe_;
      std::shared_ptr<const std::vector<Renaming>> symmetry_;
      std::vector<Swap> swaps_;
      std::unordered_map<std::uint64_t, std::vector<std::pair<std::uint32_t, std::uint32_t>>>
        seen_;
      static constexpr std::size_t max_cached_probes = 1u << 22;
      std::unordered_map<std::uint64_t, LeafOutcome> probes_;
      std::vector<Choice> path_;
      std::optional<std::vector<Choice>> null_path_;
      ExploreStats* stats_ = nullptr;
    };

    /// Applies one choice; false when it does not apply.
    bool apply(sim::Simulator& s, const ExploreSpec& spec, const Choice& c)
    {
      switch (c.kind)
      {
        case Choice::Kind::Deliver:
        {
          for (const auto& p : s.pending())
          {
            if (p.message.sender == c.replica && p.to == c.to && p.message.payload == *c.payload)
            {
              s.deliver(p.id);
              return true;
            }
          }
          return false;
        }
        case Choice::Kind::Timeout:
          if (s.timeout_view(c.replica) != c.view)
            return false;
          s.fire_timeout(c.replica, spec.seq, c.view);
          return true;
        case Choice::Kind::Inject:
          for (auto r : c.recipients)
            s.deliver(s.send(c.replica, r, Message{c.replica, *c.payload}));
          return true;
      }
      return false;
    }

    Conflict conflict_of(const ExploreSpec& spec, const std::vector<Choice>& choices)
    {
      auto commits = replay(spec, choices);
      return commits ? conflict_in(*commits, spec.config) : Conflict::None;
    }

    /// Greedy single-choice deletion until no deletion keeps the violation.
    /// A conflict between two values stays one.
    std::vector<Choice> minimize(const ExploreSpec& spec, std::vector<Choice> choices)
    {
      const auto kind = conflict_of(spec, choices);
      auto violates = [&](const ExploreSpec& spec, const std::vector<Choice>& c) {
        const auto k = conflict_of(spec, c);
        return k == kind || k == Conflict::Values;
      };
      bool changed = true;
      while (changed)
      {
        changed = false;
        for (std::size_t i = 0; i < choices.size();)
        {
          auto shorter = choices;
          shorter.erase(shorter.begin() + static_cast<std::ptrdiff_t>(i));
          if (violates(spec, shorter))
          {
            choices = std::move(shorter);
            changed = true;
          }
          else
            ++i;
        }
      }
      return choices;
    }
  }

  void validate(const ExploreSpec& spec)
  {
    if (spec.max_steps == 0)
      throw std::invalid_argument("max_steps must be positive");
    if (spec.max_byz_messages == 0)
      throw std::invalid_argument("max_byz_messages must be positive");
    if (spec.value_universe.empty() || spec.value_universe.size() > 2)
      throw std::invalid_argument("value universe must hold one or two values");
    for (const auto& v : spec.value_universe)
    {
      if (v.is_null())
        throw std::invalid_argument("NULL cannot be in the value universe");
    }
    if (spec.config.byzantine().size() > 1)
      throw std::invalid_argument("the explorer drives at most one Byzantine replica");
  }

  ExploreSpec default_spec(Protocol protocol, std::uint32_t f)
  {
    return default_spec(protocol, f, min_replicas(protocol, f));
  }

  ExploreSpec default_spec(Protocol protocol, std::uint32_t f, std::uint32_t n)
  {
    std::set<ReplicaId> byz;
    if (f > 0)
      byz.insert(ReplicaId{0});
    // Replica 0 leads view 1 and replica 1 view 2, as in the bundled scenarios.
    std::map<View, ReplicaId> primaries{{view1, ReplicaId{0}}};
    if (n > 1)
      primaries.emplace(view2, ReplicaId{1});
    return ExploreSpec{Config(protocol, f, n, byz, primaries), SeqNum{}};
  }

  std::string to_string(const Choice& c)
  {
    switch (c.kind)
    {
      case Choice::Kind::Deliver:
        return "deliver " + display_name(c.replica) + "->" + display_name(c.to) +
          " " + consensus_lab::to_string(*c.payload);
      case Choice::Kind::Timeout:
        return "timeout " + display_name(c.replica) + " v" + std::to_string(c.view.number);
      case Choice::Kind::Inject:
      {
        std::string out = display_name(c.replica) + " sends " +
          consensus_lab::to_string(*c.payload) + " to";
        for (auto r : c.recipients)
          out += " " + display_name(r);
        return out;
      }
    }
    return "?";
  }

  std::optional<std::vector<CommitEvent>> replay(
    const ExploreSpec& spec, const std::vector<Choice>& choices)
  {
    auto s = initial_simulator(spec);
    for (const auto& c : choices)
    {
      if (!apply(s, spec, c))
        return std::nullopt;
    }
    return s.commit_events();
  }

  Scenario to_scenario(const ExploreSpec& spec, const std::vector<Choice>& choices)
  {
    const auto& config = spec.config;
    Scenario s;
    s.name = "explore_" + consensus_lab::to_string(config.protocol()) + "_f" +
      std::to_string(config.f()) + "_n" + std::to_string(config.n());
    s.description = "Schedule found by explore. Byzantine messages are emitted "
                    "at start and delivered by the schedule.";
    s.protocol = config.protocol();
    s.f = config.f();
    s.n_replicas = config.n();
    s.byzantine = config.byzantine();
    s.primary_map = config.primary_overrides();
    s.seq = spec.seq;
    s.delivery = DeliveryMode::Explicit;
    if (!config.is_byzantine(primary_of(view1, config)))
      s.initial_proposals.push_back({view1, std::nullopt, spec.value_universe.front()});
    if (config.protocol() == Protocol::Fab)
      s.initial_proposals.push_back({view2, std::nullopt, spec.value_universe.front()});

    adversary::ScriptAction at_start;
    at_start.trigger.on = adversary::TriggerKind::Start;
    auto deliver = [&](ReplicaId from, ReplicaId to, const Payload& p) {
      sim::Selector sel;
      sel.from = {from};
      sel.to = {to};
      sel.payload = p;
      s.schedule.push_back(DeliverEntry{sel, false});
    };
    for (const auto& c : choices)
    {
      switch (c.kind)
      {
        case Choice::Kind::Deliver:
          deliver(c.replica, c.to, *c.payload);
          break;
        case Choice::Kind::Timeout:
          s.schedule.push_back(TimeoutEntry{c.replica, c.view, spec.seq});
          break;
        case Choice::Kind::Inject:
          at_start.emit.push_back({c.recipients, *c.payload});
          for (auto r : c.recipients)
            deliver(c.replica, r, *c.payload);
          break;
      }
    }
    if (!at_start.emit.empty())
      s.scripts.push_back({*byzantine_of(config), {at_start}});
    return s;
  }

  ExploreResult explore(const ExploreSpec& spec)
  {
    validate(spec);
    ExploreResult result;
    Search search(spec);
    auto path = search.run(result.stats);
    if (!path)
      return result;

    result.found = true;
    result.witness_choices = minimize(spec, *path);
    result.witness = to_scenario(spec, result.witness_choices);
    result.witness_verdict = checker::check(sim::run(*result.witness), result.witness->config());
    return result;
  }
}
