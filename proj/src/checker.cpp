#include "consensus_lab/checker.hpp"

#include "consensus_lab/fab.hpp"
#include "consensus_lab/hbft.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <sstream>
#include <stdexcept>

namespace consensus_lab::checker
{
  using json_io::Json;

  namespace
  {
    std::vector<CommitEvent> correct_commits(
      const std::vector<CommitEvent>& commits, const Config& config)
    {
      std::vector<CommitEvent> out;
      for (const auto& e : commits)
        if (!config.is_byzantine(e.replica))
          out.push_back(e);
      std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.sim_step, a.replica) < std::tie(b.sim_step, b.replica);
      });
      return out;
    }

    std::set<Value> proposals_in(const sim::Trace& trace, const Config& config)
    {
      std::set<Value> out;
      for (const auto& r : trace.records)
      {
        if (r.kind != sim::RecordKind::Send || !r.payload || !r.from)
          continue;
        if (*r.from != primary_of(view_of(*r.payload), config))
          continue;
        if (const auto* p = std::get_if<Prepare>(&*r.payload))
          out.insert(p->value);
        else if (const auto* nv = std::get_if<NewView>(&*r.payload))
          out.insert(nv->selected);
      }
      return out;
    }
  }

  AgreementVerdict check_agreement(
    const std::vector<CommitEvent>& commits, const Config& config)
  {
    const auto events = correct_commits(commits, config);
    for (std::size_t i = 0; i < events.size(); ++i)
    {
      for (std::size_t j = i + 1; j < events.size(); ++j)
      {
        const auto& a = events[i];
        const auto& b = events[j];
        if (a.replica != b.replica && a.seq == b.seq && a.value != b.value)
          return {std::make_pair(a, b)};
      }
    }
    return {};
  }

  AgreementVerdict check_agreement(const sim::Trace& trace, const Config& config)
  {
    return check_agreement(trace.commit_events(), config);
  }

  ValidityVerdict check_validity(
    const std::vector<CommitEvent>& commits,
    const std::set<Value>& proposed,
    const Config& config)
  {
    for (const auto& e : correct_commits(commits, config))
    {
      if (!e.value.is_null() && !proposed.contains(e.value))
        return {e};
    }
    return {};
  }

  ValidityVerdict check_validity(const sim::Trace& trace, const Config& config)
  {
    return check_validity(
      trace.commit_events(), proposals_in(trace, config), config);
  }

  Verdict check(const sim::Trace& trace, const Config& config)
  {
    return Verdict{
      check_agreement(trace, config),
      check_validity(trace, config),
      {trace.meta.incomplete_delivery,
       trace.meta.step_limit_exceeded,
       trace.meta.steps}};
  }

  Json to_json(const Verdict& v)
  {
    Json agreement{{"status", v.agreement.holds() ? "HOLDS" : "VIOLATED"}};
    if (v.agreement.witness)
    {
      agreement["witness"] = Json::array(
        {json_io::to_json(v.agreement.witness->first),
         json_io::to_json(v.agreement.witness->second)});
    }
    Json validity{{"status", v.validity.holds() ? "HOLDS" : "VIOLATED"}};
    if (v.validity.witness)
      validity["witness"] = json_io::to_json(*v.validity.witness);
    return Json{
      {"record", "verdict"},
      {"agreement", agreement},
      {"validity", validity},
      {"metadata",
       Json{
         {"incomplete_delivery", v.metadata.incomplete_delivery},
         {"step_limit_exceeded", v.metadata.step_limit_exceeded},
         {"steps", v.metadata.steps}}}};
  }

  std::string describe(const Verdict& v)
  {
    std::ostringstream out;
    out << "agreement: ";
    if (v.agreement.holds())
      out << "HOLDS";
    else
    {
      out << "VIOLATED " << to_string(v.agreement.witness->first) << " vs "
          << to_string(v.agreement.witness->second);
    }
    out << "\nvalidity: ";
    if (v.validity.holds())
      out << "HOLDS";
    else
      out << "VIOLATED " << to_string(*v.validity.witness);
    out << "\nsteps: " << v.metadata.steps;
    if (v.metadata.incomplete_delivery)
      out << " (incomplete delivery)";
    if (v.metadata.step_limit_exceeded)
      out << " (step limit exceeded)";
    out << "\n";
    return out.str();
  }

  // Quorum intersection -------------------------------------------------

  Value quorum_m() { return Value{"m"}; }
  Value quorum_other() { return Value{"m'"}; }

  namespace
  {
    /// All k-subsets of {0..n-1} in lexicographic order.
    std::vector<std::vector<std::uint32_t>> combinations(
      std::uint32_t n, std::uint32_t k)
    {
      std::vector<std::vector<std::uint32_t>> out;
      std::vector<std::uint32_t> cur;
      auto rec = [&](auto&& self, std::uint32_t start) -> void {
        if (cur.size() == k)
        {
          out.push_back(cur);
          return;
        }
        for (std::uint32_t i = start; i < n; ++i)
        {
          cur.push_back(i);
          self(self, i + 1);
          cur.pop_back();
        }
      };
      rec(rec, 0);
      return out;
    }

    std::set<ReplicaId> as_set(const std::vector<std::uint32_t>& v)
    {
      std::set<ReplicaId> out;
      for (auto i : v)
        out.insert(ReplicaId{i});
      return out;
    }

    struct Outcome
    {
      bool fails = false;
      Value chosen;
    };

    /// Both rules only see the value partition of a certificate, so each
    /// (m, m', empty) count triple is evaluated once through the real
    /// protocol functions.
    class Evaluator
    {
    public:
      Evaluator(Protocol protocol, const Config& config) :
        protocol_(protocol),
        config_(config)
      {}

      Outcome operator()(std::size_t votes_m, std::size_t votes_other, std::size_t empty)
      {
        const std::array<std::size_t, 3> key{votes_m, votes_other, empty};
        if (auto it = cache_.find(key); it != cache_.end())
          return it->second;

        ProgressCertificate cert{View{2}, SeqNum{}, {}};
        std::uint32_t reporter = 0;
        auto add = [&](std::size_t count, const std::optional<Value>& v) {
          for (std::size_t i = 0; i < count; ++i)
          {
            ViewChange vc{View{2}, SeqNum{}, std::nullopt, std::nullopt};
            if (v)
              vc.accepted = Accepted{View{1}, *v};
            cert.reports.push_back({ReplicaId{reporter++}, vc});
          }
        };
        add(votes_m, quorum_m());
        add(votes_other, quorum_other());
        add(empty, std::nullopt);

        Outcome out;
        if (protocol_ == Protocol::Fab)
        {
          out.chosen = fab::choose_proposal(cert, config_, Value::null());
          out.fails = votes_m < fab::vouch_threshold(config_) ||
                      fab::vouches(cert, quorum_other(), config_);
        }
        else
        {
          out.chosen = hbft::select_value(cert, config_);
          out.fails = out.chosen != quorum_m();
        }
        cache_.emplace(key, out);
        return out;
      }

    private:
      Protocol protocol_;
      const Config& config_;
      std::map<std::array<std::size_t, 3>, Outcome> cache_;
    };
  }

  QuorumReport check_quorum_intersection(Protocol protocol, std::uint32_t f)
  {
    if (f > max_quorum_check_f)
    {
      throw std::invalid_argument(
        "f = " + std::to_string(f) + " is too large for exhaustive enumeration (max " +
        std::to_string(max_quorum_check_f) + ")");
    }
    const auto n = min_replicas(protocol, f);
    const Config config(protocol, f, n);
    QuorumReport report;
    report.protocol = protocol;
    report.f = f;
    report.n = n;
    report.commit_quorum = commit_quorum(config);
    report.certificate_size = progress_quorum(config);

    Evaluator evaluate(protocol, config);
    const auto committed_sets =
      combinations(n, static_cast<std::uint32_t>(report.commit_quorum));
    const auto certificates =
      combinations(n, static_cast<std::uint32_t>(report.certificate_size));
    std::vector<std::vector<std::uint32_t>> byzantine_sets;
    for (std::uint32_t k = 0; k <= f; ++k)
    {
      auto c = combinations(n, k);
      byzantine_sets.insert(byzantine_sets.end(), c.begin(), c.end());
    }

    // 0 = m, 1 = m', 2 = empty.
    const std::array<std::optional<Value>, 3> universe{
      quorum_m(), quorum_other(), std::nullopt};

    for (const auto& committed : committed_sets)
    {
      const auto c_set = as_set(committed);
      for (const auto& byz : byzantine_sets)
      {
        const auto b_set = as_set(byz);
        std::vector<std::uint32_t> free;
        for (std::uint32_t r = 0; r < n; ++r)
          if (b_set.contains(ReplicaId{r}) || !c_set.contains(ReplicaId{r}))
            free.push_back(r);

        std::vector<int> reports(n, 0);
        std::vector<std::size_t> odometer(free.size(), 0);
        while (true)
        {
          for (std::size_t i = 0; i < free.size(); ++i)
            reports[free[i]] = static_cast<int>(odometer[i]);

          for (const auto& cert : certificates)
          {
            std::array<std::size_t, 3> counts{0, 0, 0};
            for (auto r : cert)
              ++counts[reports[r]];
            ++report.cases_checked;
            const auto outcome = evaluate(counts[0], counts[1], counts[2]);
            if (!outcome.fails)
              continue;
            ++report.counterexamples;
            if (!report.first_counterexample)
            {
              QuorumCase c;
              c.committed = c_set;
              c.byzantine = b_set;
              for (std::uint32_t r = 0; r < n; ++r)
                c.reports.push_back(universe[reports[r]].value_or(Value::null()));
              for (auto r : cert)
                c.certificate.push_back(ReplicaId{r});
              c.votes_m = counts[0];
              c.votes_other = counts[1];
              c.chosen = outcome.chosen;
              report.first_counterexample = c;
            }
          }

          // Last free replica turns fastest.
          std::size_t i = free.size();
          while (i > 0 && ++odometer[i - 1] == universe.size())
            odometer[--i] = 0;
          if (i == 0)
            break;
        }
      }
    }
    return report;
  }

  QuorumReport check_fab_quorum_intersection(std::uint32_t f)
  {
    return check_quorum_intersection(Protocol::Fab, f);
  }

  std::string describe(const QuorumReport& r)
  {
    std::ostringstream out;
    out << to_string(r.protocol) << " f=" << r.f << " n=" << r.n
        << " commit quorum=" << r.commit_quorum
        << " certificate size=" << r.certificate_size << "\n";
    out << "  values reduced to two labels (m committed, m' other) plus empty: "
           "both rules depend only on the partition of reports by value\n";
    if (r.protocol == Protocol::Fab)
      out << "  property: m has >= 2f+1 reports and the certificate does not vouch for m'\n";
    else
      out << "  property: select_value returns m\n";
    out << "  cases checked: " << r.cases_checked << "\n";
    out << "  counterexamples: " << r.counterexamples << "\n";
    if (r.first_counterexample)
    {
      const auto& c = *r.first_counterexample;
      out << "  first counterexample: committed {";
      const char* sep = "";
      for (auto x : c.committed)
      {
        out << sep << display_name(x);
        sep = ",";
      }
      out << "} byzantine {";
      sep = "";
      for (auto x : c.byzantine)
      {
        out << sep << display_name(x);
        sep = ",";
      }
      out << "} certificate {";
      sep = "";
      for (auto x : c.certificate)
      {
        const auto& v = c.reports[x.index];
        out << sep << display_name(x) << ":" << (v.is_null() ? "-" : v.label());
        sep = ", ";
      }
      out << "} -> " << c.votes_m << "x m, " << c.votes_other
          << "x m', chosen " << c.chosen.label() << "\n";
    }
    return out.str();
  }
}
