#include "consensus_lab/hbft.hpp"

#include <algorithm>
#include <stdexcept>

namespace consensus_lab::hbft
{
  std::size_t join_threshold(const Config& config)
  {
    return config.f() + 1;
  }

  std::size_t selection_threshold(const Config& config)
  {
    return config.f() + 1;
  }

  bool validate_progress_certificate(
    const ProgressCertificate& cert, const Config& config)
  {
    return cert.reports.size() >= progress_quorum(config) &&
      well_formed(cert, config);
  }

  Value select_value(const ProgressCertificate& cert, const Config& config)
  {
    if (!validate_progress_certificate(cert, config))
      throw std::invalid_argument("invalid hBFT progress certificate");

    const CommitCertificate* best = nullptr;
    for (const auto& r : cert.reports)
    {
      const auto& cc = r.report.commit_cert;
      if (
        !cc || cc->seq != cert.seq || !validate_commit_certificate(*cc, config))
        continue;
      if (
        best == nullptr || cc->view > best->view ||
        (cc->view == best->view && cc->value < best->value))
        best = &*cc;
    }
    if (best != nullptr)
      return best->value;

    std::map<Value, std::size_t> votes;
    for (const auto& r : cert.reports)
    {
      if (r.report.accepted && !r.report.accepted->value.is_null())
        ++votes[r.report.accepted->value];
    }
    // std::map iterates in label order, so the first hit is the smallest.
    for (const auto& [value, count] : votes)
    {
      if (count >= selection_threshold(config))
        return value;
    }
    return Value::null();
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
          return p.new_view <= view_;
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
    if (s.accepted)
    {
      note(fx, "slot already holds a value, proposal ignored");
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
    if (s.accepted)
    {
      if (s.accepted->value != msg.value)
        note(fx, "conflicting PREPARE for " + msg.value.label() + " ignored");
      return fx;
    }
    s.accepted = Accepted{view_, msg.value};
    auto& attesting = s.commit_log[view_][msg.value];
    attesting.insert(sender);
    attesting.insert(id_);
    fx.sends.push_back(
      {peers_of(id_, config_), Commit{view_, msg.seq, msg.value}});
    check_commit(msg.seq, fx);
    check_conflict_trigger(msg.seq, fx);
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
    check_conflict_trigger(msg.seq, fx);
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
    start_view_change(seq, View{view.number + 1}, fx);
    return fx;
  }

  Effects Replica::on_view_change(ReplicaId sender, const ViewChange& msg)
  {
    Effects fx;
    if (msg.new_view <= view_)
    {
      note(fx, "VIEW-CHANGE for stale view dropped");
      return fx;
    }
    auto& reports = vc_buffer_[{msg.new_view, msg.seq}];
    for (const auto& r : reports)
    {
      if (r.reporter == sender)
      {
        note(fx, "duplicate VIEW-CHANGE from " + display_name(sender));
        return fx;
      }
    }
    reports.push_back({sender, msg});

    const auto foreign = std::count_if(
      reports.begin(), reports.end(), [&](const ViewChangeReport& r) {
        return r.reporter != id_;
      });
    const bool behind = mode_ == Mode::InView || *pending_view_ < msg.new_view;
    if (static_cast<std::size_t>(foreign) >= join_threshold(config_) && behind)
      start_view_change(msg.seq, msg.new_view, fx);
    else
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
    const auto expected = select_value(cert, config_);
    if (expected != msg.selected)
    {
      note(
        fx,
        "NEW-VIEW selects " + msg.selected.label() + " but certificate gives " +
          expected.label() + ", rejected");
      return fx;
    }
    enter_view(msg.view, msg.seq, msg.selected, sender, fx);
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

  void Replica::start_view_change(SeqNum seq, View target, Effects& fx)
  {
    mode_ = Mode::ViewChanging;
    pending_view_ = target;

    ViewChange vc{target, seq, std::nullopt, std::nullopt};
    if (auto it = slots_.find(seq); it != slots_.end())
    {
      vc.accepted = it->second.accepted;
      vc.commit_cert = it->second.committed;
    }
    fx.sends.push_back({peers_of(id_, config_), vc});

    auto& reports = vc_buffer_[{target, seq}];
    const bool have_own = std::any_of(
      reports.begin(), reports.end(), [&](const ViewChangeReport& r) {
        return r.reporter == id_;
      });
    if (!have_own)
      reports.push_back({id_, vc});
    maybe_send_new_view(target, seq, fx);
  }

  void Replica::maybe_send_new_view(View target, SeqNum seq, Effects& fx)
  {
    if (
      primary_of(target, config_) != id_ || target <= view_ ||
      new_view_sent_.contains(target))
      return;
    const auto& reports = vc_buffer_[{target, seq}];
    const auto quorum = progress_quorum(config_);
    if (reports.size() < quorum)
      return;

    ProgressCertificate cert{
      target, seq, {reports.begin(), reports.begin() + quorum}};
    const auto selected = select_value(cert, config_);
    new_view_sent_.insert(target);
    fx.sends.push_back(
      {peers_of(id_, config_), NewView{target, seq, selected, cert}});
    enter_view(target, seq, selected, id_, fx);
    check_commit(seq, fx);
  }

  void Replica::enter_view(
    View v, SeqNum seq, const Value& value, ReplicaId primary, Effects&)
  {
    view_ = v;
    mode_ = Mode::InView;
    pending_view_.reset();
    auto& s = slots_[seq];
    s.accepted = Accepted{v, value};
    auto& attesting = s.commit_log[v][value];
    attesting.insert(primary);
    attesting.insert(id_);
    std::erase_if(
      vc_buffer_, [&](const auto& kv) { return kv.first.first <= v; });
    for (auto& [_, other] : slots_)
    {
      std::erase_if(
        other.commit_log, [&](const auto& kv) { return kv.first < v; });
    }
  }

  void Replica::check_commit(SeqNum seq, Effects& fx)
  {
    auto& s = slots_[seq];
    if (mode_ != Mode::InView || s.committed || !s.accepted)
      return;
    if (s.accepted->view != view_)
      return;
    const auto& attesting = s.commit_log[view_][s.accepted->value];
    if (attesting.size() < commit_quorum(config_))
      return;
    s.committed = CommitCertificate{
      view_,
      seq,
      s.accepted->value,
      {attesting.begin(), attesting.end()}};
    fx.commits.push_back(CommitEvent{id_, view_, seq, s.accepted->value, 0});
  }

  void Replica::check_conflict_trigger(SeqNum seq, Effects& fx)
  {
    auto& s = slots_[seq];
    if (mode_ != Mode::InView || !s.accepted || s.accepted->view != view_)
      return;
    for (const auto& [value, senders] : s.commit_log[view_])
    {
      if (value != s.accepted->value && senders.size() >= config_.f() + 1)
      {
        note(fx, "f+1 COMMITs for " + value.label() + " conflict with PREPARE");
        start_view_change(seq, View{view_.number + 1}, fx);
        return;
      }
    }
  }

  bool Replica::same_state(const Replica& o) const
  {
    return view_ == o.view_ && mode_ == o.mode_ && pending_view_ == o.pending_view_ &&
      slots_ == o.slots_ && vc_buffer_ == o.vc_buffer_ &&
      new_view_sent_ == o.new_view_sent_;
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
        b.text(" " + to_string(*s.committed));
      b.text("]");
    }
    // Arrival order matters to the selection rules, so reporters stay in order.
    for (const auto& [key, reports] : vc_buffer_)
    {
      b.text(" vc" + std::to_string(key.first.number) + "{");
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
