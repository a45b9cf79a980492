#include "consensus_lab/explorer.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace test;

// Slow: without dedup the search visits about thirty times as many states.
TEST_CASE("dedup on and off agree where a violation exists")
{
  auto spec = explorer::default_spec(Protocol::Hbft, 1);
  spec.value_universe = {V("a")};
  spec.max_steps = 8;
  spec.max_byz_messages = 2;
  const auto on = explorer::explore(spec);
  spec.dedup = false;
  const auto off = explorer::explore(spec);
  CHECK(on.found);
  CHECK(off.found);
  CHECK(on.stats.states < off.stats.states);
}
