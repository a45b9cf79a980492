#pragma once

// Independent oracles shared by the unit and acceptance tests: direct
// counting rules and a random Byzantine script generator.

#include "consensus_lab/adversary.hpp"
#include "consensus_lab/core.hpp"
#include "consensus_lab/net_sim.hpp"
#include "consensus_lab/scenario.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace oracle
{
  using namespace consensus_lab;

  using Votes = std::vector<std::optional<Value>>;

  inline ProgressCertificate cert_of(const Votes& values)
  {
    ProgressCertificate cert{View{2}, SeqNum{1}, {}};
    for (std::uint32_t i = 0; i < values.size(); ++i)
    {
      ViewChange vc{View{2}, SeqNum{1}, std::nullopt, std::nullopt};
      if (values[i])
        vc.accepted = Accepted{View{1}, *values[i]};
      cert.reports.push_back({ReplicaId{i}, vc});
    }
    return cert;
  }

  /// Every multiset of size k over {a, b, empty}.
  inline std::vector<Votes> multisets(std::size_t k)
  {
    std::vector<Votes> out;
    for (std::size_t na = 0; na <= k; ++na)
    {
      for (std::size_t nb = 0; na + nb <= k; ++nb)
      {
        Votes m;
        m.insert(m.end(), na, Value{"a"});
        m.insert(m.end(), nb, Value{"b"});
        m.insert(m.end(), k - na - nb, std::nullopt);
        out.push_back(std::move(m));
      }
    }
    return out;
  }

  inline std::size_t count(const Votes& votes, const Value& v)
  {
    return static_cast<std::size_t>(std::count(votes.begin(), votes.end(), std::optional<Value>{v}));
  }

  /// Certified value first, then f+1 accepted votes (a before b), else NULL.
  inline Value select(const Votes& votes, std::uint32_t f, std::optional<Value> certified)
  {
    if (certified)
      return *certified;
    if (count(votes, Value{"a"}) >= f + 1)
      return Value{"a"};
    if (count(votes, Value{"b"}) >= f + 1)
      return Value{"b"};
    return Value::null();
  }

  /// No value other than m reported 2f+1 times.
  inline bool vouches(const Votes& votes, const Value& m, std::uint32_t f)
  {
    for (const char* other : {"a", "b", "c"})
    {
      if (Value{other} != m && count(votes, Value{other}) >= 2 * f + 1)
        return false;
    }
    return true;
  }

  /// Tally per index; nothing out of range, nothing twice, enough of them.
  inline bool certificate_valid(const CommitCertificate& cc, const Config& config)
  {
    std::vector<int> tally(config.n() + 1, 0);
    for (auto r : cc.attestations)
      ++tally[std::min(r.index, config.n())];
    if (tally[config.n()] != 0)
      return false;
    int distinct = 0;
    for (std::uint32_t i = 0; i < config.n(); ++i)
    {
      if (tally[i] > 1)
        return false;
      distinct += tally[i];
    }
    const int f = static_cast<int>(config.f());
    return distinct >= (config.protocol() == Protocol::Fab ? 4 * f + 1 : 2 * f + 1);
  }

  struct ScriptGen
  {
    std::mt19937_64 rng;
    std::uint32_t n = 4;

    explicit ScriptGen(std::uint64_t seed) : rng(seed) {}

    bool coin() { return rng() % 2; }
    Value value() { return coin() ? Value{"a"} : Value{"b"}; }

    std::vector<ReplicaId> recipients()
    {
      std::vector<ReplicaId> out;
      while (out.empty())
        for (std::uint32_t i = 1; i < n; ++i)
          if (coin())
            out.push_back(ReplicaId{i});
      return out;
    }

    ViewChange view_change()
    {
      ViewChange vc{View{2}, SeqNum{1}, std::nullopt, std::nullopt};
      if (coin())
        vc.accepted = Accepted{View{1}, value()};
      if (rng() % 4 == 0)
      {
        CommitCertificate cc{View{1}, SeqNum{1}, value(), {}};
        for (std::uint32_t i = 0; i < n; ++i)
          if (coin())
            cc.attestations.push_back(ReplicaId{i});
        vc.commit_cert = cc;
      }
      return vc;
    }

    Payload payload()
    {
      switch (rng() % 5)
      {
        case 0:
          return Prepare{View{1 + rng() % 2}, SeqNum{1}, value()};
        case 1:
        case 2:
          return Commit{View{1 + rng() % 2}, SeqNum{1}, value()};
        case 3:
          return view_change();
        default:
        {
          // Reports claimed from replicas chosen at random, most of them
          // never sent.
          NewView nv{View{2}, SeqNum{1}, value(), {View{2}, SeqNum{1}, {}}};
          std::vector<std::uint32_t> ids(n);
          std::iota(ids.begin(), ids.end(), 0u);
          std::shuffle(ids.begin(), ids.end(), rng);
          for (std::uint32_t i = 0; i + 1 < n; ++i)
            nv.progress_cert.reports.push_back({ReplicaId{ids[i]}, view_change()});
          return nv;
        }
      }
    }

    adversary::ScriptAction action(adversary::TriggerKind on)
    {
      adversary::ScriptAction a;
      a.trigger.on = on;
      const auto k = 1 + rng() % 3;
      for (std::size_t i = 0; i < k; ++i)
        a.emit.push_back({recipients(), payload()});
      return a;
    }

    /// i1 Byzantine and leading view 1, random emissions at start, on its
    /// timeout and on deliveries, random timeouts at the others.
    Scenario scenario()
    {
      const bool fab = coin();
      Scenario s;
      s.name = "random";
      s.protocol = fab ? Protocol::Fab : Protocol::Hbft;
      s.f = 1;
      s.n_replicas = n = fab ? 6 : 4;
      s.byzantine = {ReplicaId{0}};
      s.primary_map = {{View{1}, ReplicaId{0}}, {View{2}, ReplicaId{1}}};
      adversary::ByzantineScript script{ReplicaId{0}, {action(adversary::TriggerKind::Start)}};
      if (coin())
      {
        auto a = action(adversary::TriggerKind::Timeout);
        a.trigger.view = View{1};
        script.actions.push_back(a);
      }
      for (const char* type : {"view_change", "new_view", "commit"})
      {
        if (coin())
        {
          auto a = action(adversary::TriggerKind::Deliver);
          a.trigger.message_type = type;
          script.actions.push_back(a);
        }
      }
      s.scripts.push_back(script);
      std::vector<std::uint32_t> order(s.n_replicas);
      std::iota(order.begin(), order.end(), 0u);
      std::shuffle(order.begin(), order.end(), rng);
      for (auto r : order)
        if (coin() || r == 0)
          s.schedule.push_back(TimeoutEntry{ReplicaId{r}, View{1}, SeqNum{1}});
      return s;
    }
  };

  /// Every send is made by the replica whose event is being handled (the
  /// Byzantine replica at start, which has no proposal from anyone else),
  /// and every delivery carries the sender, recipient and payload of the
  /// send with the same id. Returns the first offending record index.
  inline std::optional<std::size_t> misattributed(const sim::Trace& trace, ReplicaId start_actor)
  {
    std::map<sim::MessageId, const sim::TraceRecord*> sent;
    ReplicaId actor = start_actor;
    for (std::size_t i = 0; i < trace.records.size(); ++i)
    {
      const auto& rec = trace.records[i];
      switch (rec.kind)
      {
        case sim::RecordKind::Deliver:
        {
          if (!rec.message_id)
            return i;
          const auto it = sent.find(*rec.message_id);
          if (
            it == sent.end() || it->second->from != rec.from || it->second->to != rec.to ||
            it->second->payload != rec.payload)
            return i;
          actor = *rec.to;
          break;
        }
        case sim::RecordKind::Timeout:
          actor = *rec.to;
          break;
        case sim::RecordKind::Send:
          if (rec.from != actor || !rec.message_id)
            return i;
          sent[*rec.message_id] = &rec;
          break;
        default:
          break;
      }
    }
    return std::nullopt;
  }
}
