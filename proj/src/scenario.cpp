#include "consensus_lab/scenario.hpp"

#include "consensus_lab/json_io.hpp"
#include "json_read.hpp"

#include <fstream>
#include <sstream>

namespace consensus_lab
{
  using detail::read_replica;
  using detail::read_string;
  using detail::read_uint;
  using detail::require;
  using detail::require_keys;
  using json_io::Json;

  Config Scenario::config() const
  {
    try
    {
      return Config(protocol, f, n_replicas, byzantine, primary_map);
    }
    catch (const std::invalid_argument& err)
    {
      throw ScenarioError(err.what());
    }
  }

  namespace
  {
    std::string idx(const std::string& path, std::size_t i)
    {
      return path + "[" + std::to_string(i) + "]";
    }

    const nlohmann::json& require_array(
      const nlohmann::json& obj, const char* key, const std::string& path)
    {
      const auto& a = require(obj, key, path);
      if (!a.is_array())
        throw ScenarioError(path + "." + key + ": expected array");
      return a;
    }

    std::vector<ReplicaId> read_recipients(
      const nlohmann::json& j, const std::string& path, const Scenario& s,
      ReplicaId self)
    {
      std::vector<ReplicaId> out;
      if (j.is_string() && j.get<std::string>() == "all")
      {
        for (std::uint32_t i = 0; i < s.n_replicas; ++i)
          if (i != self.index)
            out.push_back(ReplicaId{i});
        return out;
      }
      if (!j.is_array())
        throw ScenarioError(path + ": expected array of replica indices or \"all\"");
      for (std::size_t i = 0; i < j.size(); ++i)
      {
        auto r = read_replica(j[i], idx(path, i));
        if (r.index >= s.n_replicas)
          throw ScenarioError(idx(path, i) + ": replica index out of range");
        out.push_back(r);
      }
      return out;
    }

    adversary::ByzantineScript read_script(
      const nlohmann::json& j, const std::string& path, const Scenario& s)
    {
      require_keys(j, path, {"replica", "actions"});
      adversary::ByzantineScript script{
        read_replica(require(j, "replica", path), path + ".replica"), {}};
      const auto& actions = require_array(j, "actions", path);
      for (std::size_t i = 0; i < actions.size(); ++i)
      {
        const auto ap = idx(path + ".actions", i);
        const auto& a = actions[i];
        require_keys(a, ap, {"on", "type", "view", "from", "emit"});
        adversary::ScriptAction action;
        const auto on = read_string(require(a, "on", ap), ap + ".on");
        if (on == "start")
          action.trigger.on = adversary::TriggerKind::Start;
        else if (on == "timeout")
          action.trigger.on = adversary::TriggerKind::Timeout;
        else if (on == "deliver")
          action.trigger.on = adversary::TriggerKind::Deliver;
        else
        {
          throw ScenarioError(
            ap + ".on: unknown trigger '" + on +
            "' (expected start, timeout or deliver)");
        }
        if (auto it = a.find("type"); it != a.end())
          action.trigger.message_type = read_string(*it, ap + ".type");
        if (auto it = a.find("view"); it != a.end())
          action.trigger.view = View{read_uint(*it, ap + ".view")};
        if (auto it = a.find("from"); it != a.end())
          action.trigger.from = read_replica(*it, ap + ".from");
        const auto& emit = require_array(a, "emit", ap);
        for (std::size_t k = 0; k < emit.size(); ++k)
        {
          const auto ep = idx(ap + ".emit", k);
          require_keys(emit[k], ep, {"to", "payload"});
          action.emit.push_back(
            {read_recipients(require(emit[k], "to", ep), ep + ".to", s, script.replica),
             json_io::payload_from_json(
               require(emit[k], "payload", ep), ep + ".payload")});
        }
        script.actions.push_back(std::move(action));
      }
      return script;
    }

    ScheduleEntry read_entry(const nlohmann::json& j, const std::string& path)
    {
      if (!j.is_object() || j.size() == 0)
        throw ScenarioError(path + ": expected object with one entry kind");
      // "all" and "at_step" sit inside their entry object.
      if (j.size() != 1)
      {
        throw ScenarioError(
          path + ": expected exactly one of deliver, hold, release, schedule, "
                 "timeout");
      }
      const auto& [key, body] = *j.items().begin();
      const auto p = path + "." + key;
      if (key == "deliver")
      {
        DeliverEntry e{json_io::selector_from_json(body, p, {"all"}), false};
        if (auto it = body.find("all"); it != body.end())
        {
          if (!it->is_boolean())
            throw ScenarioError(p + ".all: expected boolean");
          e.all = it->get<bool>();
        }
        return e;
      }
      if (key == "hold")
        return HoldEntry{json_io::selector_from_json(body, p)};
      if (key == "release")
        return ReleaseEntry{json_io::selector_from_json(body, p)};
      if (key == "schedule")
      {
        return ScheduleAtEntry{
          json_io::selector_from_json(body, p, {"at_step"}),
          read_uint(require(body, "at_step", p), p + ".at_step")};
      }
      if (key == "timeout")
      {
        require_keys(body, p, {"replica", "view", "seq"});
        TimeoutEntry e{
          read_replica(require(body, "replica", p), p + ".replica"),
          View{read_uint(require(body, "view", p), p + ".view")},
          SeqNum{}};
        if (auto it = body.find("seq"); it != body.end())
          e.seq = SeqNum{read_uint(*it, p + ".seq")};
        return e;
      }
      throw ScenarioError(
        p + ": unknown schedule entry (expected deliver, hold, release, "
            "schedule or timeout)");
    }

    std::string line_col(std::string_view text, std::size_t byte)
    {
      std::size_t line = 1, col = 1;
      for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i)
      {
        if (text[i] == '\n')
        {
          ++line;
          col = 1;
        }
        else
          ++col;
      }
      return "line " + std::to_string(line) + ", column " + std::to_string(col);
    }

    Scenario from_json(const nlohmann::json& j)
    {
      const std::string root = "$";
      require_keys(
        j, root,
        {"version", "name", "description", "protocol", "f", "n_replicas",
         "byzantine", "primary_map", "seq", "delivery", "initial_proposals",
         "schedule", "scripts"});
      Scenario s;
      s.version = static_cast<int>(
        read_uint(require(j, "version", root), "version"));
      if (s.version != scenario_version)
      {
        throw ScenarioError(
          "version: unsupported scenario version " + std::to_string(s.version) +
          " (expected " + std::to_string(scenario_version) + ")");
      }
      s.name = read_string(require(j, "name", root), "name");
      if (auto it = j.find("description"); it != j.end())
      {
        if (!it->is_string())
          throw ScenarioError("description: expected string");
        s.description = it->get<std::string>();
      }
      const auto proto = read_string(require(j, "protocol", root), "protocol");
      auto parsed = parse_protocol(proto);
      if (!parsed)
        throw ScenarioError("protocol: unknown protocol '" + proto + "' (expected hbft or fab)");
      s.protocol = *parsed;
      s.f = static_cast<std::uint32_t>(read_uint(require(j, "f", root), "f"));
      s.n_replicas = static_cast<std::uint32_t>(
        read_uint(require(j, "n_replicas", root), "n_replicas"));

      if (auto it = j.find("byzantine"); it != j.end())
      {
        if (!it->is_array())
          throw ScenarioError("byzantine: expected array");
        for (std::size_t i = 0; i < it->size(); ++i)
          s.byzantine.insert(read_replica((*it)[i], idx("byzantine", i)));
      }
      if (auto it = j.find("primary_map"); it != j.end())
      {
        if (!it->is_object())
          throw ScenarioError("primary_map: expected object");
        for (const auto& item : it->items())
        {
          const auto p = "primary_map." + item.key();
          std::uint64_t view = 0;
          try
          {
            std::size_t used = 0;
            view = std::stoull(item.key(), &used);
            if (used != item.key().size())
              throw std::invalid_argument("");
          }
          catch (const std::exception&)
          {
            throw ScenarioError(p + ": key must be a view number");
          }
          s.primary_map[View{view}] = read_replica(item.value(), p);
        }
      }
      if (auto it = j.find("seq"); it != j.end())
        s.seq = SeqNum{read_uint(*it, "seq")};
      if (auto it = j.find("delivery"); it != j.end())
      {
        const auto d = read_string(*it, "delivery");
        if (d == "auto")
          s.delivery = DeliveryMode::Auto;
        else if (d == "explicit")
          s.delivery = DeliveryMode::Explicit;
        else
          throw ScenarioError("delivery: expected \"auto\" or \"explicit\"");
      }
      // Checked here so later errors can assume a well-formed cluster.
      (void)s.config();

      if (auto it = j.find("initial_proposals"); it != j.end())
      {
        if (!it->is_array())
          throw ScenarioError("initial_proposals: expected array");
        for (std::size_t i = 0; i < it->size(); ++i)
        {
          const auto p = idx("initial_proposals", i);
          const auto& e = (*it)[i];
          require_keys(e, p, {"view", "value", "to"});
          ProposalSpec spec{
            View{read_uint(require(e, "view", p), p + ".view")},
            std::nullopt,
            Value{read_string(require(e, "value", p), p + ".value")}};
          if (spec.value.is_null())
            throw ScenarioError(p + ".value: \"NULL\" is reserved");
          if (auto t = e.find("to"); t != e.end())
          {
            const auto primary = primary_of(spec.view, s.config());
            spec.to = read_recipients(*t, p + ".to", s, primary);
          }
          s.initial_proposals.push_back(std::move(spec));
        }
      }
      if (auto it = j.find("schedule"); it != j.end())
      {
        if (!it->is_array())
          throw ScenarioError("schedule: expected array");
        for (std::size_t i = 0; i < it->size(); ++i)
          s.schedule.push_back(read_entry((*it)[i], idx("schedule", i)));
      }
      if (auto it = j.find("scripts"); it != j.end())
      {
        if (!it->is_array())
          throw ScenarioError("scripts: expected array");
        for (std::size_t i = 0; i < it->size(); ++i)
        {
          const auto p = idx("scripts", i);
          auto script = read_script((*it)[i], p, s);
          if (!s.byzantine.contains(script.replica))
          {
            throw ScenarioError(
              p + ".replica: " + display_name(script.replica) +
              " is not Byzantine; correct replicas cannot be scripted");
          }
          try
          {
            adversary::validate(script, s.config());
          }
          catch (const adversary::ScriptError& err)
          {
            throw ScenarioError(p + ": " + err.what());
          }
          s.scripts.push_back(std::move(script));
        }
      }
      return s;
    }

    Json ids_json(const std::vector<ReplicaId>& ids)
    {
      Json a = Json::array();
      for (auto r : ids)
        a.push_back(r.index);
      return a;
    }

    struct EntryWriter
    {
      Json operator()(const DeliverEntry& e) const
      {
        auto body = json_io::to_json(e.selector);
        if (e.all)
          body["all"] = true;
        return Json{{"deliver", body}};
      }
      Json operator()(const HoldEntry& e) const
      {
        return Json{{"hold", json_io::to_json(e.selector)}};
      }
      Json operator()(const ReleaseEntry& e) const
      {
        return Json{{"release", json_io::to_json(e.selector)}};
      }
      Json operator()(const ScheduleAtEntry& e) const
      {
        auto body = json_io::to_json(e.selector);
        body["at_step"] = e.at_step;
        return Json{{"schedule", body}};
      }
      Json operator()(const TimeoutEntry& e) const
      {
        return Json{
          {"timeout",
           Json{
             {"replica", e.replica.index},
             {"view", e.view.number},
             {"seq", e.seq.number}}}};
      }
    };

    std::string trigger_name(adversary::TriggerKind k)
    {
      switch (k)
      {
        case adversary::TriggerKind::Start:
          return "start";
        case adversary::TriggerKind::Timeout:
          return "timeout";
        case adversary::TriggerKind::Deliver:
          return "deliver";
      }
      return "start";
    }
  }

  Scenario parse_scenario(std::string_view text)
  {
    nlohmann::json j;
    try
    {
      j = nlohmann::json::parse(text.begin(), text.end());
    }
    catch (const nlohmann::json::parse_error& err)
    {
      throw ScenarioError(
        "invalid JSON at " + line_col(text, err.byte) + ": " + err.what());
    }
    return from_json(j);
  }

  Scenario load_scenario(const std::filesystem::path& path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw ScenarioError(path.string() + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    try
    {
      return parse_scenario(buf.str());
    }
    catch (const ScenarioError& err)
    {
      throw ScenarioError(path.string() + ": " + err.what());
    }
  }

  std::string dump_scenario(const Scenario& s)
  {
    Json j{
      {"version", s.version},
      {"name", s.name},
      {"description", s.description},
      {"protocol", to_string(s.protocol)},
      {"f", s.f},
      {"n_replicas", s.n_replicas}};
    Json byz = Json::array();
    for (auto r : s.byzantine)
      byz.push_back(r.index);
    j["byzantine"] = byz;
    Json pm = Json::object();
    for (const auto& [v, r] : s.primary_map)
      pm[std::to_string(v.number)] = r.index;
    j["primary_map"] = pm;
    j["seq"] = s.seq.number;
    j["delivery"] = s.delivery == DeliveryMode::Auto ? "auto" : "explicit";

    Json props = Json::array();
    for (const auto& p : s.initial_proposals)
    {
      Json e{{"view", p.view.number}, {"value", p.value.label()}};
      if (p.to)
        e["to"] = ids_json(*p.to);
      props.push_back(e);
    }
    j["initial_proposals"] = props;

    Json sched = Json::array();
    for (const auto& e : s.schedule)
      sched.push_back(std::visit(EntryWriter{}, e));
    j["schedule"] = sched;

    Json scripts = Json::array();
    for (const auto& script : s.scripts)
    {
      Json actions = Json::array();
      for (const auto& a : script.actions)
      {
        Json aj{{"on", trigger_name(a.trigger.on)}};
        if (a.trigger.message_type)
          aj["type"] = *a.trigger.message_type;
        if (a.trigger.view)
          aj["view"] = a.trigger.view->number;
        if (a.trigger.from)
          aj["from"] = a.trigger.from->index;
        Json emit = Json::array();
        for (const auto& e : a.emit)
          emit.push_back(Json{{"to", ids_json(e.to)}, {"payload", json_io::to_json(e.payload)}});
        aj["emit"] = emit;
        actions.push_back(aj);
      }
      scripts.push_back(Json{{"replica", script.replica.index}, {"actions", actions}});
    }
    j["scripts"] = scripts;
    return j.dump(2) + "\n";
  }
}
