#include "consensus_lab/fab.hpp"

#include <algorithm>
#include <stdexcept>

namespace consensus_lab::fab
{
  namespace
  {
    std::map<Value, std::size_t> report_counts(const ProgressCertificate& cert)
    {
      std::map<Value, std::size_t> counts;
      for (const auto& r : cert.reports)
      {
        if (r.report.accepted)
          ++counts[r.report.accepted->value];
      }
      return counts;
    }
  }

  std::size_t vouch_threshold(const Config& config)
  {
    return 2 * static_cast<std::size_t>(config.f()) + 1;
  }

  bool validate_progress_certificate(
    const ProgressCertificate& cert, const Config& config)
  {
    return cert.reports.size() >= progress_quorum(config) &&
      well_formed(cert, config);
  }

  bool vouches(
    const ProgressCertificate& cert, const Value& m, const Config& config)
  {
    if (!validate_progress_certificate(cert, config))
      throw std::invalid_argument("invalid FaB progress certificate");
    for (const auto& [value, count] : report_counts(cert))
    {
      if (value != m && count >= vouch_threshold(config))
        return false;
    }
    return true;
  }

  Value choose_proposal(
    const ProgressCertificate& cert, const Config& config, const Value& fresh)
  {
    std::optional<Value> best;
    std::size_t best_count = 0;
    for (const auto& [value, count] : report_counts(cert))
    {
      if (!vouches(cert, value, config))
        continue;
      // Label order iteration: strict > keeps the smallest label on ties.
      if (!best || count > best_count)
      {
        best = value;
        best_count = count;
      }
    }
    return best.value_or(fresh);
  }

  Replica::Replica(ReplicaId id, Config config, View initial_view) :
    id_(id),
    config_(std::move(config)),
    view_(initial_view)
  {}

  const Slot* Replica::slot(SeqNum seq) const
  {
    auto it = slots_.find(seq);
    return it == slots_.end() ? nullptr : &it->second;
  }

  void Replica::set_fresh_value(View view, Value value)
  {
    fresh_values_[view] = std::move(value);
  }

  View Replica::participating_view() const
  {
    return mode_ == Mode::InView ? view_ : *pending_view_;
  }

  bool Replica::is_stale(const Message& msg) const
  {
    return std::visit(
      [&](const auto& p) -> bool {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Prepare>)
          return msg.sender != primary_of(p.view, config_) ||
            p.view < participating_view();
        else if constexpr (std::is_same_v<T, Commit>)
          return p.view < participating_view();
        else if constexpr (std::is_same_v<T, ViewChange>)
          return primary_of(p.new_view, config_) != id_ ||
            p.new_view <= view_ || new_view_sent_.contains(p.new_view);
        else
          return msg.sender != primary_of(p.view, config_) || p.view <= view_;
      },
      msg.payload);
  }

  void Replica::note(Effects& fx, const std::string& text) const
  {
    fx.notes.push_back(display_name(id_) + ": " + text);
  }

  Effects Replica::propose(SeqNum seq, const Value& value)
  {
    Effects fx;
    if (primary_of(view_, config_) != id_ || mode_ != Mode::InView)
    {
      note(fx, "not the primary of the current view, proposal ignored");
      return fx;
    }
    auto& s = slots_[seq];
    if (s.accepted && s.accepted->view == view_)
    {
      note(fx, "already proposed in this view");
      return fx;
    }
    s.accepted = Accepted{view_, value};
    s.commit_log[view_][value].insert(id_);
    fx.sends.push_back({peers_of(id_, config_), Prepare{view_, seq, value}});
    check_commit(seq, fx);
    return fx;
  }

  Effects Replica::on_prepare(ReplicaId sender, const Prepare& msg)
  {
    Effects fx;
    if (sender != primary_of(msg.view, config_))
    {
      note(fx, "PREPARE from non-primary " + display_name(sender) + " ignored");
      return fx;
    }
    if (msg.view != view_ || mode_ != Mode::InView)
    {
      note(fx, "PREPARE for inactive view ignored");
      return fx;
    }
    auto& s = slots_[msg.seq];
    if (s.accepted && s.accepted->view == view_)
    {
      if (s.accepted->value != msg.value)
        note(fx, "second value in view ignored: " + msg.value.label());
      return fx;
    }
    s.accepted = Accepted{view_, msg.value};
    auto& attesting = s.commit_log[view_][msg.value];
    attesting.insert(sender);
    attesting.insert(id_);
    fx.sends.push_back(
      {peers_of(id_, config_), Commit{view_, msg.seq, msg.value}});
    check_commit(msg.seq, fx);
    return fx;
  }

  Effects Replica::on_commit(ReplicaId sender, const Commit& msg)
  {
    Effects fx;
    if (msg.view != view_ || mode_ != Mode::InView)
    {
      note(fx, "COMMIT for inactive view dropped");
      return fx;
    }
    slots_[msg.seq].commit_log[view_][msg.value].insert(sender);
    check_commit(msg.seq, fx);
    return fx;
  }

  Effects Replica::on_timeout(SeqNum seq, View view)
  {
    Effects fx;
    if (view != participating_view())
    {
      note(fx, "stale timeout ignored");
      return fx;
    }
    const View target{view.number + 1};
    mode_ = Mode::ViewChanging;
    pending_view_ = target;

    ViewChange report{target, seq, std::nullopt, std::nullopt};
    if (auto it = slots_.find(seq); it != slots_.end())
      report.accepted = it->second.accepted;

    const auto next_primary = primary_of(target, config_);
    if (next_primary == id_)
    {
      auto& reports = reports_[{target, seq}];
      if (std::none_of(reports.begin(), reports.end(), [&](const auto& r) {
            return r.reporter == id_;
          }))
        reports.push_back({id_, report});
      maybe_send_new_view(target, seq, fx);
    }
    else
    {
      fx.sends.push_back({{next_primary}, report});
    }
    return fx;
  }

  Effects Replica::on_view_change(ReplicaId sender, const ViewChange& msg)
  {
    Effects fx;
    if (primary_of(msg.new_view, config_) != id_)
    {
      note(fx, "report for a view this replica does not lead, dropped");
      return fx;
    }
    if (msg.new_view <= view_ || new_view_sent_.contains(msg.new_view))
    {
      note(fx, "report for stale view dropped");
      return fx;
    }
    auto& reports = reports_[{msg.new_view, msg.seq}];
    for (const auto& r : reports)
    {
      if (r.reporter == sender)
      {
        note(fx, "duplicate report from " + display_name(sender));
        return fx;
      }
    }
    reports.push_back({sender, msg});
    maybe_send_new_view(msg.new_view, msg.seq, fx);
    return fx;
  }

  Effects Replica::on_new_view(ReplicaId sender, const NewView& msg)
  {
    Effects fx;
    if (sender != primary_of(msg.view, config_))
    {
      note(fx, "NEW-VIEW from non-primary " + display_name(sender) + " rejected");
      return fx;
    }
    if (msg.view <= view_)
    {
      note(fx, "NEW-VIEW for stale view dropped");
      return fx;
    }
    const auto& cert = msg.progress_cert;
    if (
      cert.new_view != msg.view || cert.seq != msg.seq ||
      !validate_progress_certificate(cert, config_))
    {
      note(fx, "NEW-VIEW with invalid progress certificate rejected");
      return fx;
    }
    if (!vouches(cert, msg.selected, config_))
    {
      note(
        fx,
        "progress certificate does not vouch for " + msg.selected.label() +
          ", NEW-VIEW rejected");
      return fx;
    }
    enter_view(msg.view, msg.seq, msg.selected, sender);
    fx.sends.push_back(
      {peers_of(id_, config_), Commit{view_, msg.seq, msg.selected}});
    check_commit(msg.seq, fx);
    return fx;
  }

  Effects Replica::handle(const Message& msg)
  {
    return std::visit(
      [&](const auto& p) -> Effects {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Prepare>)
          return on_prepare(msg.sender, p);
        else if constexpr (std::is_same_v<T, Commit>)
          return on_commit(msg.sender, p);
        else if constexpr (std::is_same_v<T, ViewChange>)
          return on_view_change(msg.sender, p);
        else
          return on_new_view(msg.sender, p);
      },
      msg.payload);
  }

  void Replica::maybe_send_new_view(View target, SeqNum seq, Effects& fx)
  {
    if (target <= view_ || new_view_sent_.contains(target))
      return;
    const auto& reports = reports_[{target, seq}];
    const auto quorum = progress_quorum(config_);
    if (reports.size() < quorum)
      return;

    ProgressCertificate cert{
      target, seq, {reports.begin(), reports.begin() + quorum}};
    auto fresh_it = fresh_values_.find(target);
    const auto fresh =
      fresh_it == fresh_values_.end() ? Value::null() : fresh_it->second;
    const auto selected = choose_proposal(cert, config_, fresh);
    new_view_sent_.insert(target);
    fx.sends.push_back(
      {peers_of(id_, config_), NewView{target, seq, selected, cert}});
    enter_view(target, seq, selected, id_);
    check_commit(seq, fx);
  }

  void Replica::enter_view(
    View v, SeqNum seq, const Value& value, ReplicaId primary)
  {
    view_ = v;
    mode_ = Mode::InView;
    pending_view_.reset();
    auto& s = slots_[seq];
    s.accepted = Accepted{v, value};
    auto& attesting = s.commit_log[v][value];
    attesting.insert(primary);
    attesting.insert(id_);
    std::erase_if(reports_, [&](const auto& kv) { return kv.first.first <= v; });
    for (auto& [_, other] : slots_)
    {
      std::erase_if(
        other.commit_log, [&](const auto& kv) { return kv.first < v; });
    }
  }

  void Replica::check_commit(SeqNum seq, Effects& fx)
  {
    auto& s = slots_[seq];
    if (mode_ != Mode::InView || !s.accepted || s.accepted->view != view_)
      return;
    if (s.committed_views.contains(view_))
      return;
    const auto& attesting = s.commit_log[view_][s.accepted->value];
    if (attesting.size() < commit_quorum(config_))
      return;
    s.committed_views.insert(view_);
    if (!s.committed)
      s.committed = *s.accepted;
    fx.commits.push_back(CommitEvent{id_, view_, seq, s.accepted->value, 0});
  }

  bool Replica::same_state(const Replica& o) const
  {
    return view_ == o.view_ && mode_ == o.mode_ && pending_view_ == o.pending_view_ &&
      slots_ == o.slots_ && reports_ == o.reports_ &&
      new_view_sent_ == o.new_view_sent_ &&
      fresh_values_ == o.fresh_values_;
  }

  std::string Replica::digest() const
  {
    DigestBuilder b;
    digest_into(b);
    return b.str();
  }

  void Replica::digest_into(DigestBuilder& b) const
  {
    b.text("v" + std::to_string(view_.number));
    if (mode_ == Mode::ViewChanging)
      b.text("->v" + std::to_string(pending_view_->number));
    for (const auto& [seq, s] : slots_)
    {
      b.text(" s" + std::to_string(seq.number) + "[");
      b.text(s.accepted ? "acc" + to_string(*s.accepted) : "acc-");
      for (const auto& [v, by_value] : s.commit_log)
      {
        b.text(" log" + std::to_string(v.number) + "{");
        for (const auto& [value, who] : by_value)
        {
          b.text(value.label() + ":");
          b.ids(who);
          b.text(";");
        }
        b.text("}");
      }
      if (s.committed)
        b.text(" com" + to_string(*s.committed));
      for (auto v : s.committed_views)
        b.text(" c" + std::to_string(v.number));
      b.text("]");
    }
    // Arrival order matters to the selection rules, so reporters stay in order.
    for (const auto& [key, reports] : reports_)
    {
      b.text(" rep" + std::to_string(key.first.number) + "{");
      for (const auto& r : reports)
      {
        b.id(r.reporter);
        b.text("=");
        b.payload(Payload{r.report});
        b.text(";");
      }
      b.text("}");
    }
    if (!new_view_sent_.empty())
      b.text(" nv" + std::to_string(new_view_sent_.rbegin()->number));
  }
}
