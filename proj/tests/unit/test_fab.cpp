#include "consensus_lab/fab.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace test;

namespace
{
  Config six()
  {
    return Config(Protocol::Fab, 1, 6, {R(0)}, {{View{1}, R(0)}, {View{2}, R(1)}});
  }
}

TEST_CASE("vouching on the fixed examples")
{
  const auto config = six();
  const auto split = cert_of({V("a"), V("a"), V("a"), V("b"), V("b")});
  CHECK(fab::vouches(split, V("a"), config));
  CHECK_FALSE(fab::vouches(split, V("b"), config));
  CHECK_FALSE(fab::vouches(split, V("c"), config));

  const auto unanimous = cert_of({V("a"), V("a"), V("a"), V("a"), V("a")});
  CHECK(fab::vouches(unanimous, V("a"), config));
  CHECK_FALSE(fab::vouches(unanimous, V("b"), config));

  CHECK_THROWS_AS(fab::vouches(cert_of({V("a"), V("a")}), V("a"), config), std::invalid_argument);
}

TEST_CASE("vouches agrees with a counting oracle on every report multiset up to 5")
{
  std::size_t cases = 0;
  for (std::uint32_t f = 0; f <= 1; ++f)
  {
    const Config config(Protocol::Fab, f, 5 * f + 1);
    for (std::size_t k = 4 * f + 1; k <= std::min<std::size_t>(config.n(), 5); ++k)
    {
      for (const auto& votes : multisets(k))
      {
        for (const char* m : {"a", "b", "c"})
        {
          CHECK(fab::vouches(cert_of(votes), V(m), config) == oracle::vouches(votes, V(m), f));
          ++cases;
        }
      }
    }
  }
  CHECK(cases > 50);
}

TEST_CASE("the new primary proposes the vouched value")
{
  const auto config = six();
  CHECK(fab::choose_proposal(cert_of({V("a"), V("a"), V("a"), V("a"), V("b")}), config, V("z")) == V("a"));
  CHECK(fab::choose_proposal(cert_of({V("a"), V("a"), V("a"), V("b"), V("b")}), config, V("z")) == V("a"));
  CHECK(
    fab::choose_proposal(
      cert_of({std::nullopt, std::nullopt, std::nullopt, std::nullopt, std::nullopt}), config,
      V("z")) == V("z"));
}

TEST_CASE("five attestations commit, four do not")
{
  fab::Replica r(R(2), six());
  r.on_prepare(R(0), Prepare{View{1}, SeqNum{1}, V("a")});
  r.on_commit(R(1), Commit{View{1}, SeqNum{1}, V("a")});
  auto fx = r.on_commit(R(3), Commit{View{1}, SeqNum{1}, V("a")});
  CHECK(fx.commits.empty());
  fx = r.on_commit(R(4), Commit{View{1}, SeqNum{1}, V("a")});
  REQUIRE(fx.commits.size() == 1);
  CHECK(fx.commits[0].value == V("a"));
}

TEST_CASE("a 3/3 split never commits in the view")
{
  fab::Replica r(R(2), six());
  r.on_prepare(R(0), Prepare{View{1}, SeqNum{1}, V("a")});
  std::size_t commits = 0;
  commits += r.on_commit(R(1), Commit{View{1}, SeqNum{1}, V("a")}).commits.size();
  for (std::uint32_t i : {3u, 4u, 5u})
    commits += r.on_commit(R(i), Commit{View{1}, SeqNum{1}, V("b")}).commits.size();
  CHECK(commits == 0);
}

TEST_CASE("reports go to the next primary only")
{
  fab::Replica r(R(3), six());
  r.on_prepare(R(0), Prepare{View{1}, SeqNum{1}, V("a")});
  const auto fx = r.on_timeout(SeqNum{1}, View{1});
  REQUIRE(fx.sends.size() == 1);
  CHECK(fx.sends[0].to == std::vector<ReplicaId>{R(1)});
  CHECK(std::get<ViewChange>(fx.sends[0].payload).accepted == Accepted{View{1}, V("a")});
}

TEST_CASE("new view for a value the certificate blocks is rejected")
{
  const auto cert = cert_of({V("a"), V("a"), V("a"), V("a"), V("b")});
  fab::Replica r(R(4), six());
  r.on_timeout(SeqNum{1}, View{1});
  r.on_new_view(R(1), NewView{View{2}, SeqNum{1}, V("b"), cert});
  CHECK(r.view() == View{1});
  r.on_new_view(R(2), NewView{View{2}, SeqNum{1}, V("a"), cert});
  CHECK(r.view() == View{1});
  r.on_new_view(R(1), NewView{View{2}, SeqNum{1}, V("a"), cert});
  CHECK(r.view() == View{2});
}
