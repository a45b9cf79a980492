#include "consensus_lab/json_io.hpp"

#include "consensus_lab/scenario.hpp"
#include "json_read.hpp"

namespace consensus_lab::json_io
{
  using detail::read_replica;
  using detail::read_string;
  using detail::read_uint;
  using detail::require;
  using detail::require_keys;

  namespace
  {
    Json accepted_json(const std::optional<Accepted>& a)
    {
      if (!a)
        return nullptr;
      return Json{{"view", a->view.number}, {"value", a->value.label()}};
    }

    Json view_change_json(const ViewChange& vc)
    {
      Json j{
        {"type", "view_change"},
        {"new_view", vc.new_view.number},
        {"seq", vc.seq.number},
        {"accepted", accepted_json(vc.accepted)}};
      if (vc.commit_cert)
        j["commit_cert"] = to_json(*vc.commit_cert);
      return j;
    }

    CommitCertificate cc_from_json(
      const nlohmann::json& j, const std::string& path)
    {
      require_keys(j, path, {"view", "seq", "value", "attestations"});
      CommitCertificate cc{
        View{read_uint(require(j, "view", path), path + ".view")},
        SeqNum{read_uint(require(j, "seq", path), path + ".seq")},
        Value{read_string(require(j, "value", path), path + ".value")},
        {}};
      const auto& att = require(j, "attestations", path);
      if (!att.is_array())
        throw ScenarioError(path + ".attestations: expected array");
      for (std::size_t i = 0; i < att.size(); ++i)
      {
        cc.attestations.push_back(read_replica(
          att[i], path + ".attestations[" + std::to_string(i) + "]"));
      }
      return cc;
    }

    ViewChange view_change_from_json(
      const nlohmann::json& j, const std::string& path)
    {
      require_keys(j, path, {"type", "new_view", "seq", "accepted", "commit_cert"});
      ViewChange vc{
        View{read_uint(require(j, "new_view", path), path + ".new_view")},
        SeqNum{read_uint(require(j, "seq", path), path + ".seq")},
        std::nullopt,
        std::nullopt};
      if (auto it = j.find("accepted"); it != j.end() && !it->is_null())
      {
        const auto p = path + ".accepted";
        require_keys(*it, p, {"view", "value"});
        vc.accepted = Accepted{
          View{read_uint(require(*it, "view", p), p + ".view")},
          Value{read_string(require(*it, "value", p), p + ".value")}};
      }
      if (auto it = j.find("commit_cert"); it != j.end() && !it->is_null())
        vc.commit_cert = cc_from_json(*it, path + ".commit_cert");
      return vc;
    }
  }

  Json to_json(const CommitCertificate& cc)
  {
    Json att = Json::array();
    for (auto r : cc.attestations)
      att.push_back(r.index);
    return Json{
      {"view", cc.view.number},
      {"seq", cc.seq.number},
      {"value", cc.value.label()},
      {"attestations", att}};
  }

  Json to_json(const Payload& payload)
  {
    struct
    {
      Json operator()(const Prepare& p) const
      {
        return Json{
          {"type", "prepare"},
          {"view", p.view.number},
          {"seq", p.seq.number},
          {"value", p.value.label()}};
      }
      Json operator()(const Commit& c) const
      {
        return Json{
          {"type", "commit"},
          {"view", c.view.number},
          {"seq", c.seq.number},
          {"value", c.value.label()}};
      }
      Json operator()(const ViewChange& vc) const
      {
        return view_change_json(vc);
      }
      Json operator()(const NewView& nv) const
      {
        Json reports = Json::array();
        for (const auto& r : nv.progress_cert.reports)
        {
          reports.push_back(Json{
            {"reporter", r.reporter.index},
            {"report", view_change_json(r.report)}});
        }
        return Json{
          {"type", "new_view"},
          {"view", nv.view.number},
          {"seq", nv.seq.number},
          {"selected", nv.selected.label()},
          {"progress_cert",
           Json{
             {"new_view", nv.progress_cert.new_view.number},
             {"seq", nv.progress_cert.seq.number},
             {"reports", reports}}}};
      }
    } visitor;
    return std::visit(visitor, payload);
  }

  Json to_json(const CommitEvent& e)
  {
    return Json{
      {"replica", e.replica.index},
      {"view", e.view.number},
      {"seq", e.seq.number},
      {"value", e.value.label()},
      {"sim_step", e.sim_step}};
  }

  Json to_json(const sim::Selector& s)
  {
    Json j = Json::object();
    if (s.type)
      j["type"] = *s.type;
    if (s.view)
      j["view"] = s.view->number;
    if (s.seq)
      j["seq"] = s.seq->number;
    if (s.value)
      j["value"] = s.value->label();
    auto ids = [](const std::set<ReplicaId>& rs) {
      Json a = Json::array();
      for (auto r : rs)
        a.push_back(r.index);
      return a;
    };
    if (!s.from.empty())
      j["from"] = ids(s.from);
    if (!s.to.empty())
      j["to"] = ids(s.to);
    if (s.payload)
      j["payload"] = to_json(*s.payload);
    return j;
  }

  Payload payload_from_json(const nlohmann::json& j, const std::string& path)
  {
    if (!j.is_object())
      throw ScenarioError(path + ": expected object");
    const auto type = read_string(require(j, "type", path), path + ".type");
    if (type == "prepare" || type == "commit")
    {
      require_keys(j, path, {"type", "view", "seq", "value"});
      const View view{read_uint(require(j, "view", path), path + ".view")};
      const SeqNum seq{read_uint(require(j, "seq", path), path + ".seq")};
      const Value value{
        read_string(require(j, "value", path), path + ".value")};
      if (type == "prepare")
        return Prepare{view, seq, value};
      return Commit{view, seq, value};
    }
    if (type == "view_change")
      return view_change_from_json(j, path);
    if (type == "new_view")
    {
      require_keys(j, path, {"type", "view", "seq", "selected", "progress_cert"});
      NewView nv{
        View{read_uint(require(j, "view", path), path + ".view")},
        SeqNum{read_uint(require(j, "seq", path), path + ".seq")},
        Value{read_string(require(j, "selected", path), path + ".selected")},
        {}};
      const auto cp = path + ".progress_cert";
      const auto& cert = require(j, "progress_cert", path);
      require_keys(cert, cp, {"new_view", "seq", "reports"});
      nv.progress_cert.new_view =
        View{read_uint(require(cert, "new_view", cp), cp + ".new_view")};
      nv.progress_cert.seq =
        SeqNum{read_uint(require(cert, "seq", cp), cp + ".seq")};
      const auto& reports = require(cert, "reports", cp);
      if (!reports.is_array())
        throw ScenarioError(cp + ".reports: expected array");
      for (std::size_t i = 0; i < reports.size(); ++i)
      {
        const auto rp = cp + ".reports[" + std::to_string(i) + "]";
        require_keys(reports[i], rp, {"reporter", "report"});
        nv.progress_cert.reports.push_back(
          {read_replica(require(reports[i], "reporter", rp), rp + ".reporter"),
           view_change_from_json(
             require(reports[i], "report", rp), rp + ".report")});
      }
      return nv;
    }
    throw ScenarioError(
      path + ".type: unknown message type '" + type +
      "' (expected prepare, commit, view_change or new_view)");
  }

  sim::Selector selector_from_json(
    const nlohmann::json& j,
    const std::string& path,
    std::initializer_list<const char*> extra_keys)
  {
    if (!j.is_object())
      throw ScenarioError(path + ": expected object");
    std::vector<const char*> keys{
      "type", "view", "seq", "value", "from", "to", "payload"};
    keys.insert(keys.end(), extra_keys.begin(), extra_keys.end());
    detail::require_keys(j, path, keys);

    sim::Selector s;
    if (auto it = j.find("type"); it != j.end())
    {
      s.type = read_string(*it, path + ".type");
      static const std::set<std::string> known{
        "prepare", "commit", "view_change", "new_view"};
      if (!known.contains(*s.type))
        throw ScenarioError(path + ".type: unknown message type '" + *s.type + "'");
    }
    if (auto it = j.find("view"); it != j.end())
      s.view = View{read_uint(*it, path + ".view")};
    if (auto it = j.find("seq"); it != j.end())
      s.seq = SeqNum{read_uint(*it, path + ".seq")};
    if (auto it = j.find("value"); it != j.end())
      s.value = Value{read_string(*it, path + ".value")};
    auto read_set = [&](const char* key, std::set<ReplicaId>& out) {
      auto it = j.find(key);
      if (it == j.end())
        return;
      const auto p = path + "." + key;
      if (it->is_array())
      {
        for (std::size_t i = 0; i < it->size(); ++i)
          out.insert(read_replica((*it)[i], p + "[" + std::to_string(i) + "]"));
      }
      else
        out.insert(read_replica(*it, p));
    };
    read_set("from", s.from);
    read_set("to", s.to);
    if (auto it = j.find("payload"); it != j.end())
      s.payload = payload_from_json(*it, path + ".payload");
    return s;
  }

  Json to_json(const sim::TraceRecord& r, std::size_t index)
  {
    Json j{
      {"index", index},
      {"step", r.step},
      {"kind", sim::to_string(r.kind)},
      {"from", r.from ? Json(r.from->index) : Json(nullptr)},
      {"to", r.to ? Json(r.to->index) : Json(nullptr)},
      {"payload", r.payload ? to_json(*r.payload) : Json(nullptr)},
      {"replica_state_digest", r.replica_state_digest}};
    if (r.message_id)
      j["message_id"] = *r.message_id;
    if (r.commit)
      j["commit"] = to_json(*r.commit);
    if (!r.text.empty())
      j["note"] = r.text;
    return j;
  }

  std::string trace_to_jsonl(const sim::Trace& trace)
  {
    std::string out;
    for (std::size_t i = 0; i < trace.records.size(); ++i)
      out += to_json(trace.records[i], i).dump() + "\n";
    return out;
  }
}
