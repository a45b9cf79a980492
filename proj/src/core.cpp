#include "consensus_lab/core.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace consensus_lab
{
  Value::Value(std::string label) : label_(std::move(label)) {}

  std::string to_string(Protocol p)
  {
    return p == Protocol::Hbft ? "hbft" : "fab";
  }

  std::optional<Protocol> parse_protocol(const std::string& s)
  {
    if (s == "hbft")
      return Protocol::Hbft;
    if (s == "fab")
      return Protocol::Fab;
    return std::nullopt;
  }

  std::uint32_t min_replicas(Protocol p, std::uint32_t f)
  {
    return p == Protocol::Hbft ? 3 * f + 1 : min_replicas_two_step(f);
  }

  std::uint32_t min_replicas_two_step(std::uint32_t f)
  {
    return 5 * f + 1;
  }

  Config::Config(
    Protocol protocol,
    std::uint32_t f,
    std::uint32_t n_replicas,
    std::set<ReplicaId> byzantine,
    std::map<View, ReplicaId> primary_overrides) :
    protocol_(protocol),
    f_(f),
    n_(n_replicas),
    byzantine_(std::move(byzantine)),
    primary_overrides_(std::move(primary_overrides))
  {
    if (n_ == 0)
      throw std::invalid_argument("n_replicas must be positive");
    if (n_ < min_replicas(protocol_, f_))
    {
      throw std::invalid_argument(
        to_string(protocol_) + " needs n >= " +
        std::to_string(min_replicas(protocol_, f_)) + " for f=" +
        std::to_string(f_) + ", got n=" + std::to_string(n_));
    }
    if (byzantine_.size() > f_)
    {
      throw std::invalid_argument(
        "byzantine set has " + std::to_string(byzantine_.size()) +
        " members but f=" + std::to_string(f_));
    }
    for (auto r : byzantine_)
    {
      if (!contains(r))
        throw std::invalid_argument(
          "byzantine replica " + std::to_string(r.index) + " out of range");
    }
    for (const auto& [view, r] : primary_overrides_)
    {
      if (!contains(r))
        throw std::invalid_argument(
          "primary of view " + std::to_string(view.number) + " out of range");
    }
  }

  std::vector<ReplicaId> Config::replicas() const
  {
    std::vector<ReplicaId> out;
    out.reserve(n_);
    for (std::uint32_t i = 0; i < n_; ++i)
      out.push_back(ReplicaId{i});
    return out;
  }

  std::vector<ReplicaId> Config::correct_replicas() const
  {
    std::vector<ReplicaId> out;
    for (std::uint32_t i = 0; i < n_; ++i)
    {
      if (!is_byzantine(ReplicaId{i}))
        out.push_back(ReplicaId{i});
    }
    return out;
  }

  ReplicaId primary_of(View view, const Config& config)
  {
    const auto& overrides = config.primary_overrides();
    if (auto it = overrides.find(view); it != overrides.end())
      return it->second;
    return ReplicaId{static_cast<std::uint32_t>(view.number % config.n())};
  }

  std::vector<ReplicaId> peers_of(ReplicaId self, const Config& config)
  {
    std::vector<ReplicaId> out;
    for (std::uint32_t i = 0; i < config.n(); ++i)
    {
      if (i != self.index)
        out.push_back(ReplicaId{i});
    }
    return out;
  }

  std::size_t commit_quorum(const Config& config)
  {
    return config.n() - config.f();
  }

  std::size_t progress_quorum(const Config& config)
  {
    return config.n() - config.f();
  }

  bool validate_commit_certificate(
    const CommitCertificate& cc, const Config& config)
  {
    if (cc.attestations.size() < commit_quorum(config))
      return false;
    std::set<ReplicaId> seen;
    for (auto r : cc.attestations)
    {
      if (!config.contains(r) || !seen.insert(r).second)
        return false;
    }
    return true;
  }

  bool well_formed(const ProgressCertificate& cert, const Config& config)
  {
    std::set<ReplicaId> seen;
    for (const auto& r : cert.reports)
    {
      if (!config.contains(r.reporter) || !seen.insert(r.reporter).second)
        return false;
      if (r.report.new_view != cert.new_view || r.report.seq != cert.seq)
        return false;
    }
    return true;
  }

  std::string type_name(const Payload& payload)
  {
    struct
    {
      std::string operator()(const Prepare&) const { return "prepare"; }
      std::string operator()(const Commit&) const { return "commit"; }
      std::string operator()(const ViewChange&) const { return "view_change"; }
      std::string operator()(const NewView&) const { return "new_view"; }
    } visitor;
    return std::visit(visitor, payload);
  }

  View view_of(const Payload& payload)
  {
    struct
    {
      View operator()(const Prepare& p) const { return p.view; }
      View operator()(const Commit& c) const { return c.view; }
      View operator()(const ViewChange& vc) const { return vc.new_view; }
      View operator()(const NewView& nv) const { return nv.view; }
    } visitor;
    return std::visit(visitor, payload);
  }

  SeqNum seq_of(const Payload& payload)
  {
    return std::visit([](const auto& p) { return p.seq; }, payload);
  }

  std::string display_name(ReplicaId r)
  {
    return "i" + std::to_string(r.index + 1);
  }

  std::string to_string(const Accepted& a)
  {
    return "(v" + std::to_string(a.view.number) + "," + a.value.label() + ")";
  }

  std::string to_string(const CommitCertificate& cc)
  {
    std::ostringstream out;
    out << "CC(v" << cc.view.number << ",s" << cc.seq.number << ","
        << cc.value.label() << "|";
    for (std::size_t i = 0; i < cc.attestations.size(); ++i)
      out << (i ? "," : "") << cc.attestations[i].index;
    out << ")";
    return out.str();
  }

  namespace
  {
    std::string view_change_text(const ViewChange& vc)
    {
      std::string s = "VIEW-CHANGE(v" + std::to_string(vc.new_view.number) +
        ",s" + std::to_string(vc.seq.number) + ",";
      s += vc.accepted ? to_string(*vc.accepted) : "-";
      if (vc.commit_cert)
        s += "," + to_string(*vc.commit_cert);
      return s + ")";
    }
  }

  std::string to_string(const Payload& payload)
  {
    struct
    {
      std::string operator()(const Prepare& p) const
      {
        return "PREPARE(v" + std::to_string(p.view.number) + ",s" +
          std::to_string(p.seq.number) + "," + p.value.label() + ")";
      }
      std::string operator()(const Commit& c) const
      {
        return "COMMIT(v" + std::to_string(c.view.number) + ",s" +
          std::to_string(c.seq.number) + "," + c.value.label() + ")";
      }
      std::string operator()(const ViewChange& vc) const
      {
        return view_change_text(vc);
      }
      std::string operator()(const NewView& nv) const
      {
        std::string s = "NEW-VIEW(v" + std::to_string(nv.view.number) + ",s" +
          std::to_string(nv.seq.number) + "," + nv.selected.label() + "|";
        for (std::size_t i = 0; i < nv.progress_cert.reports.size(); ++i)
        {
          const auto& r = nv.progress_cert.reports[i];
          s += (i ? ";" : "") + std::to_string(r.reporter.index) + ":" +
            view_change_text(r.report);
        }
        return s + ")";
      }
    } visitor;
    return std::visit(visitor, payload);
  }

  std::string to_string(const CommitEvent& e)
  {
    return display_name(e.replica) + "@v" + std::to_string(e.view.number) +
      ",s" + std::to_string(e.seq.number) + "=" + e.value.label();
  }

  namespace
  {
    std::uint64_t mix64(std::uint64_t x)
    {
      x ^= x >> 30;
      x *= 0xbf58476d1ce4e5b9ULL;
      x ^= x >> 27;
      x *= 0x94d049bb133111ebULL;
      x ^= x >> 31;
      return x;
    }

    std::uint64_t mask_of(const std::set<ReplicaId>& rs)
    {
      std::uint64_t m = 0;
      for (auto r : rs)
        m |= std::uint64_t{1} << (r.index % 64);
      return m;
    }
  }

  void DigestBuilder::flush()
  {
    if (dirty_)
    {
      words_.emplace_back(1, run_);
      run_ = 0xcbf29ce484222325ULL;
      dirty_ = false;
    }
  }

  void DigestBuilder::text(std::string_view s)
  {
    for (unsigned char c : s)
    {
      run_ ^= c;
      run_ *= 0x100000001b3ULL;
    }
    dirty_ = dirty_ || !s.empty();
    if (keep_text_)
      text_ += s;
  }

  void DigestBuilder::id(ReplicaId r)
  {
    flush();
    words_.emplace_back(2, r.index);
    if (keep_text_)
      text_ += std::to_string(r.index);
  }

  void DigestBuilder::ids(const std::set<ReplicaId>& rs)
  {
    flush();
    words_.emplace_back(3, mask_of(rs));
    if (!keep_text_)
      return;
    const char* sep = "";
    for (auto r : rs)
    {
      text_ += sep + std::to_string(r.index);
      sep = ",";
    }
  }

  void DigestBuilder::ids(const std::vector<ReplicaId>& rs)
  {
    ids(std::set<ReplicaId>(rs.begin(), rs.end()));
  }

  void DigestBuilder::payload(const Payload& p)
  {
    auto vc_text = [this](const ViewChange& vc) {
      text(
        "VIEW-CHANGE(v" + std::to_string(vc.new_view.number) + ",s" +
        std::to_string(vc.seq.number) + ",");
      text(vc.accepted ? to_string(*vc.accepted) : "-");
      if (vc.commit_cert)
      {
        const auto& cc = *vc.commit_cert;
        text(
          ",CC(v" + std::to_string(cc.view.number) + ",s" +
          std::to_string(cc.seq.number) + "," + cc.value.label() + "|");
        ids(cc.attestations);
        text(")");
      }
      text(")");
    };
    if (const auto* vc = std::get_if<ViewChange>(&p))
      vc_text(*vc);
    else if (const auto* nv = std::get_if<NewView>(&p))
    {
      text(
        "NEW-VIEW(v" + std::to_string(nv->view.number) + ",s" +
        std::to_string(nv->seq.number) + "," + nv->selected.label() + "|");
      for (std::size_t i = 0; i < nv->progress_cert.reports.size(); ++i)
      {
        const auto& r = nv->progress_cert.reports[i];
        if (i)
          text(";");
        id(r.reporter);
        text(":");
        vc_text(r.report);
      }
      text(")");
    }
    else
      text(to_string(p));
  }

  namespace
  {
    std::uint64_t rename_mask(std::uint64_t v, const Renaming& rename)
    {
      std::uint64_t m = 0;
      for (std::uint32_t i = 0; i < 64 && (v >> i); ++i)
      {
        if (v & (std::uint64_t{1} << i))
          m |= std::uint64_t{1} << rename[i];
      }
      return m;
    }

    void absorb(std::uint64_t& h, std::uint64_t tag, std::uint64_t v)
    {
      h = mix64(h ^ (v + tag * 0x9e3779b97f4a7c15ULL));
    }

    constexpr std::uint64_t digest_seed = 0x2545f4914f6cdd1dULL;
  }

  std::uint64_t DigestBuilder::hash(const Renaming& rename) const
  {
    std::uint64_t h = digest_seed;
    for (const auto& [tag, v] : words_)
    {
      if (rename.empty() || tag == 1)
        absorb(h, tag, v);
      else if (tag == 2)
        absorb(h, tag, rename[v]);
      else
        absorb(h, tag, rename_mask(v, rename));
    }
    if (dirty_)
      absorb(h, 1, run_);
    return h;
  }

  void DigestBuilder::hash_all(
    const std::vector<Renaming>& renamings, std::uint64_t* out) const
  {
    const auto count = renamings.size();
    std::fill(out, out + count, digest_seed);
    for (const auto& [tag, v] : words_)
    {
      for (std::size_t k = 0; k < count; ++k)
      {
        const auto& rename = renamings[k];
        if (rename.empty() || tag == 1)
          absorb(out[k], tag, v);
        else if (tag == 2)
          absorb(out[k], tag, rename[v]);
        else
          absorb(out[k], tag, rename_mask(v, rename));
      }
    }
    if (dirty_)
    {
      for (std::size_t k = 0; k < count; ++k)
        absorb(out[k], 1, run_);
    }
  }
}
