#include "consensus_lab/checker.hpp"
#include "consensus_lab/json_io.hpp"
#include "consensus_lab/net_sim.hpp"
#include "consensus_lab/scenario.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cstdlib>
#include <map>
#include <random>

using namespace test;

namespace
{
  std::vector<std::filesystem::path> bundled()
  {
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(scenario_dir()))
    {
      if (e.path().extension() == ".json" && e.path().filename() != "scenario.schema.json")
        out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  struct Run
  {
    Scenario scenario;
    sim::Trace trace;
    checker::Verdict verdict;
  };

  Run run_file(const std::string& name)
  {
    Run r{load_scenario(scenario_dir() / name), {}, {}};
    r.trace = sim::run(r.scenario);
    r.verdict = checker::check(r.trace, r.scenario.config());
    return r;
  }

  std::vector<const NewView*> new_views(const sim::Trace& trace)
  {
    std::vector<const NewView*> out;
    for (const auto& rec : trace.records)
    {
      if (rec.kind == sim::RecordKind::Deliver && rec.payload)
        if (const auto* nv = std::get_if<NewView>(&*rec.payload))
          out.push_back(nv);
    }
    return out;
  }
}

TEST_CASE("equivocation scenario: i3 commits a, the view-2 certificate selects b, i2 and i4 commit b")
{
  const auto r = run_file("hbft_paper_violation.json");
  const auto commits = r.trace.commit_events();
  std::vector<std::tuple<std::uint32_t, std::uint64_t, std::string>> got;
  for (const auto& c : commits)
    got.emplace_back(c.replica.index, c.view.number, c.value.label());
  using T = decltype(got)::value_type;
  CHECK(got == std::vector<T>{{2, 1, "a"}, {3, 2, "b"}, {1, 2, "b"}});

  const auto nvs = new_views(r.trace);
  REQUIRE_FALSE(nvs.empty());
  const auto& nv = *nvs.front();
  CHECK(nv.selected == V("b"));
  std::map<std::uint32_t, std::string> reports;
  for (const auto& rep : nv.progress_cert.reports)
    reports[rep.reporter.index] = rep.report.accepted ? rep.report.accepted->value.label() : "";
  CHECK(reports == std::map<std::uint32_t, std::string>{{0, "b"}, {1, "a"}, {3, "b"}});

  REQUIRE_FALSE(r.verdict.agreement.holds());
  CHECK(r.verdict.agreement.witness->first.replica == R(2));
  CHECK(r.verdict.agreement.witness->first.value == V("a"));
  CHECK(r.verdict.agreement.witness->second.replica == R(3));
  CHECK(r.verdict.agreement.witness->second.value == V("b"));
  CHECK(r.verdict.validity.holds());
}

TEST_CASE("FaB baseline: the view-2 primary re-proposes the view-1 commit")
{
  const auto r = run_file("fab_baseline.json");
  CHECK(r.verdict.holds());
  const auto commits = r.trace.commit_events();
  REQUIRE_FALSE(commits.empty());
  for (const auto& c : commits)
    CHECK(c.value == V("a"));
  CHECK(commits.front().view == View{1});
  const auto nvs = new_views(r.trace);
  REQUIRE_FALSE(nvs.empty());
  for (const auto* nv : nvs)
    CHECK(nv->selected == V("a"));
}

TEST_CASE("no-fault run: every replica commits the proposal")
{
  const auto r = run_file("hbft_no_fault.json");
  CHECK(r.verdict.holds());
  CHECK(r.trace.commit_events().size() == 4);
  for (const auto& c : r.trace.commit_events())
    CHECK(c.value == V("a"));
}

TEST_CASE("a commit certificate outranks f+1 votes in the view-2 selection")
{
  const auto r = run_file("hbft_commit_cert_precedence.json");
  CHECK(r.verdict.holds());
  const auto nvs = new_views(r.trace);
  REQUIRE_FALSE(nvs.empty());
  const auto& cert = nvs.front()->progress_cert;
  int b_votes = 0, certified = 0;
  for (const auto& rep : cert.reports)
  {
    b_votes += rep.report.accepted && rep.report.accepted->value == V("b");
    certified += rep.report.commit_cert.has_value();
  }
  CHECK(b_votes == 2);
  CHECK(certified == 1);
  CHECK(nvs.front()->selected == V("a"));
}

TEST_CASE("every bundled scenario replays to byte-identical traces")
{
  const auto files = bundled();
  CHECK(files.size() >= 4);
  for (const auto& f : files)
  {
    CAPTURE(f.filename().string());
    const auto s = load_scenario(f);
    const auto first = json_io::trace_to_jsonl(sim::run(s));
    for (int i = 0; i < 2; ++i)
      CHECK(json_io::trace_to_jsonl(sim::run(load_scenario(f))) == first);
    CHECK(checker::check(sim::run(s), s.config()).validity.holds());
  }
}

TEST_CASE("scenario files round-trip through dump and parse")
{
  for (const auto& f : bundled())
  {
    const auto s = load_scenario(f);
    CHECK(parse_scenario(dump_scenario(s)) == s);
  }
}

TEST_CASE("scenario errors name the field")
{
  auto text = dump_scenario(load_scenario(scenario_dir() / "hbft_paper_violation.json"));
  auto broken = text;
  broken.replace(broken.find("\"hbft\""), 6, "\"raft\"");
  CHECK_THROWS_WITH_AS(parse_scenario(broken), doctest::Contains("protocol"), ScenarioError);

  broken = text;
  broken.replace(broken.find("\"timeout\": {"), 12, "\"timeout\": {\"bogus\": 1, ");
  CHECK_THROWS_WITH_AS(parse_scenario(broken), doctest::Contains("schedule[2]"), ScenarioError);

  CHECK_THROWS_WITH_AS(parse_scenario("{\n  \"version\": 1,\n  oops\n}"), doctest::Contains("line 3"), ScenarioError);
}

TEST_CASE("a replica cannot send under another identity")
{
  sim::Simulator s(Config(Protocol::Hbft, 1, 4, {R(0)}));
  CHECK_THROWS_AS(
    s.send(R(0), R(2), Message{R(1), Commit{View{1}, SeqNum{1}, V("a")}}), sim::ForgeryError);
  // Attestations i2 and i3 never made.
  ViewChange vc{View{2}, SeqNum{1}, Accepted{View{1}, V("a")},
                CommitCertificate{View{1}, SeqNum{1}, V("a"), {R(0), R(1), R(2)}}};
  CHECK_THROWS_AS(s.send(R(0), R(1), Message{R(0), vc}), sim::ForgeryError);
  // A report i4 never sent.
  NewView nv{View{2}, SeqNum{1}, V("b"), cert_of({V("b"), V("a"), V("a"), V("b")})};
  CHECK_THROWS_AS(s.send(R(0), R(2), Message{R(0), nv}), sim::ForgeryError);
}

TEST_CASE("step limit comes from the environment")
{
  ::setenv("CONSENSUS_LAB_STEP_LIMIT", "3", 1);
  CHECK(sim::step_limit_from_env() == 3);
  sim::SimOptions options;
  options.step_limit = sim::step_limit_from_env();
  const auto t = sim::run(load_scenario(scenario_dir() / "hbft_paper_violation.json"), options);
  CHECK(t.meta.step_limit_exceeded);
  ::setenv("CONSENSUS_LAB_STEP_LIMIT", "x", 1);
  CHECK_THROWS_AS(sim::step_limit_from_env(), std::invalid_argument);
  ::unsetenv("CONSENSUS_LAB_STEP_LIMIT");
  CHECK(sim::step_limit_from_env() == sim::default_step_limit);
}

TEST_CASE("the attribution oracle flags a relabelled delivery")
{
  auto trace = sim::run(load_scenario(scenario_dir() / "hbft_paper_violation.json"));
  CHECK_FALSE(oracle::misattributed(trace, R(0)));
  for (auto& rec : trace.records)
  {
    if (rec.kind == sim::RecordKind::Deliver && rec.from == R(0))
    {
      rec.from = R(2);
      break;
    }
  }
  CHECK(oracle::misattributed(trace, R(0)));
}

TEST_CASE("randomized Byzantine scripts never get a forged sender delivered")
{
  oracle::ScriptGen g(2024);
  int accepted = 0, refused = 0, forged_refused = 0;
  for (int i = 0; i < 1000; ++i)
  {
    const auto s = g.scenario();
    CAPTURE(i);
    try
    {
      const auto trace = sim::run(s);
      CHECK_FALSE(oracle::misattributed(trace, R(0)));
      std::size_t from_byz = 0;
      for (const auto& rec : trace.records)
        from_byz += rec.kind == sim::RecordKind::Send && rec.from == R(0);
      std::size_t emitted_max = 0;
      for (const auto& a : s.scripts[0].actions)
        for (const auto& e : a.emit)
          emitted_max += e.to.size();
      CHECK(from_byz <= emitted_max);
      ++accepted;
    }
    catch (const sim::ForgeryError&)
    {
      ++forged_refused;
      ++refused;
    }
    catch (const adversary::ScriptError&)
    {
      ++refused;
    }
  }
  CHECK(accepted > 100);
  CHECK(forged_refused > 100);
  MESSAGE("accepted " << accepted << ", refused " << refused << " (" << forged_refused << " forgeries)");
}
