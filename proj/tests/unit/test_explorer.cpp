#include "consensus_lab/checker.hpp"
#include "consensus_lab/explorer.hpp"
#include "consensus_lab/scenario.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace test;
using explorer::ExploreSpec;

namespace
{
  /// hBFT f=1 with a single value: the cheapest setting that still breaks.
  ExploreSpec small_hbft(bool dedup = true, bool prune = true)
  {
    auto spec = explorer::default_spec(Protocol::Hbft, 1);
    spec.value_universe = {V("a")};
    spec.max_steps = 8;
    spec.max_byz_messages = 2;
    spec.dedup = dedup;
    spec.prune = prune;
    return spec;
  }

  ExploreSpec bounded(Protocol p, std::uint32_t steps, std::uint32_t byz)
  {
    auto spec = explorer::default_spec(p, 1);
    spec.max_steps = steps;
    spec.max_byz_messages = byz;
    return spec;
  }

  bool conflicts(const ExploreSpec& spec, const std::vector<explorer::Choice>& choices)
  {
    const auto commits = explorer::replay(spec, choices);
    return commits && !checker::check_agreement(*commits, spec.config).holds();
  }
}

TEST_CASE("default cluster: Byzantine i1 leads view 1, i2 leads view 2")
{
  const auto spec = explorer::default_spec(Protocol::Hbft, 1);
  CHECK(spec.config.n() == 4);
  CHECK(spec.config.byzantine() == std::set<ReplicaId>{R(0)});
  CHECK(primary_of(View{1}, spec.config) == R(0));
  CHECK(primary_of(View{2}, spec.config) == R(1));
  CHECK(explorer::default_spec(Protocol::Fab, 1).config.n() == 6);
  CHECK(explorer::default_spec(Protocol::Fab, 0).config.byzantine().empty());
}

TEST_CASE("spec validation")
{
  auto spec = explorer::default_spec(Protocol::Hbft, 1);
  spec.max_steps = 0;
  CHECK_THROWS_AS(explorer::explore(spec), std::invalid_argument);
  spec = explorer::default_spec(Protocol::Hbft, 1);
  spec.max_byz_messages = 0;
  CHECK_THROWS_AS(explorer::explore(spec), std::invalid_argument);
  spec = explorer::default_spec(Protocol::Hbft, 1);
  spec.value_universe = {};
  CHECK_THROWS_AS(explorer::explore(spec), std::invalid_argument);
  spec.value_universe = {V("a"), V("b"), V("c")};
  CHECK_THROWS_AS(explorer::explore(spec), std::invalid_argument);
  spec.value_universe = {Value::null()};
  CHECK_THROWS_AS(explorer::explore(spec), std::invalid_argument);
}

TEST_CASE("without a Byzantine replica nothing is found")
{
  for (auto p : {Protocol::Hbft, Protocol::Fab})
  {
    for (auto n : {min_replicas(p, 0), min_replicas(p, 1)})
    {
      CAPTURE(n);
      auto spec = explorer::default_spec(p, 0, n);
      const auto r = explorer::explore(spec);
      CHECK_FALSE(r.found);
      CHECK(r.stats.validity_violations == 0);
    }
  }
}

TEST_CASE("small bounds: hBFT breaks, the witness replays and is minimal")
{
  const auto spec = small_hbft();
  const auto r = explorer::explore(spec);
  REQUIRE(r.found);
  CHECK(r.stats.validity_violations == 0);
  REQUIRE(r.witness);
  REQUIRE(r.witness_verdict);
  CHECK_FALSE(r.witness_verdict->agreement.holds());
  CHECK(r.witness_verdict->validity.holds());

  // Self-certifying: the scenario file gives the same verdict when re-run.
  const auto reparsed = parse_scenario(dump_scenario(*r.witness));
  const auto verdict = checker::check(sim::run(reparsed), reparsed.config());
  CHECK(checker::to_json(verdict).dump() == checker::to_json(*r.witness_verdict).dump());

  CHECK(conflicts(spec, r.witness_choices));
  for (std::size_t i = 0; i < r.witness_choices.size(); ++i)
  {
    auto shorter = r.witness_choices;
    shorter.erase(shorter.begin() + static_cast<std::ptrdiff_t>(i));
    CHECK_FALSE(conflicts(spec, shorter));
  }
}

TEST_CASE("equal specs give equal stats and witnesses")
{
  const auto a = explorer::explore(small_hbft());
  const auto b = explorer::explore(small_hbft());
  CHECK(a.stats == b.stats);
  CHECK(a.witness_choices == b.witness_choices);
  CHECK(a.witness == b.witness);
}

TEST_CASE("pruning on and off agree")
{
  CHECK(explorer::explore(small_hbft(true, false)).found);
  for (auto p : {Protocol::Hbft, Protocol::Fab})
  {
    auto spec = bounded(p, 6, 2);
    const auto on = explorer::explore(spec);
    spec.prune = false;
    const auto off = explorer::explore(spec);
    CHECK(on.found == off.found);
    CHECK_FALSE(on.found);
  }
}

TEST_CASE("dedup on and off agree where nothing is found")
{
  auto spec = bounded(Protocol::Hbft, 6, 2);
  const auto on = explorer::explore(spec);
  spec.dedup = false;
  const auto off = explorer::explore(spec);
  CHECK_FALSE(on.found);
  CHECK_FALSE(off.found);
  CHECK(off.stats.dedup_hits == 0);
  CHECK(on.stats.states < off.stats.states);

  auto fab = bounded(Protocol::Fab, 5, 2);
  const auto fab_on = explorer::explore(fab);
  fab.dedup = false;
  CHECK(explorer::explore(fab).found == fab_on.found);
}

TEST_CASE("FaB holds at small bounds" * doctest::timeout(120))
{
  const auto r = explorer::explore(bounded(Protocol::Fab, 6, 3));
  CHECK_FALSE(r.found);
  CHECK(r.stats.validity_violations == 0);
}

TEST_CASE("choices render in display names")
{
  explorer::Choice c;
  c.kind = explorer::Choice::Kind::Inject;
  c.replica = R(0);
  c.payload = Prepare{View{1}, SeqNum{1}, V("a")};
  c.recipients = {R(1), R(2)};
  CHECK(explorer::to_string(c) == "i1 sends PREPARE(v1,s1,a) to i2 i3");
  c.kind = explorer::Choice::Kind::Timeout;
  c.replica = R(2);
  c.view = View{1};
  CHECK(explorer::to_string(c) == "timeout i3 v1");
}
