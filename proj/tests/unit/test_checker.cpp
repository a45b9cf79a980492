#include "consensus_lab/checker.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <functional>

using namespace test;

namespace
{
  CommitEvent commit(std::uint32_t r, std::uint64_t view, const char* v, std::uint64_t step)
  {
    return {R(r), View{view}, SeqNum{1}, V(v), step};
  }

  const Config hbft4(Protocol::Hbft, 1, 4, {R(0)});

  /// Independent enumeration: does some case let a certificate of n-f
  /// reports lose a value accepted by n-f replicas? `lost` decides from the
  /// report counts (m, other).
  bool any_loss(
    std::uint32_t f, std::uint32_t n,
    const std::function<bool(int m, int other)>& lost)
  {
    const std::uint32_t quorum = n - f;
    bool found = false;
    // 0 = m, 1 = other, 2 = empty, per replica.
    std::vector<int> report(n);
    for (std::uint32_t committed = 0; committed < (1u << n); ++committed)
    {
      if (static_cast<std::uint32_t>(__builtin_popcount(committed)) != quorum)
        continue;
      for (std::uint32_t byz = 0; byz < (1u << n); ++byz)
      {
        if (static_cast<std::uint32_t>(__builtin_popcount(byz)) > f)
          continue;
        std::vector<std::uint32_t> free;
        for (std::uint32_t i = 0; i < n; ++i)
        {
          if ((byz >> i & 1) || !(committed >> i & 1))
            free.push_back(i);
          else
            report[i] = 0;
        }
        std::uint32_t combos = 1;
        for (std::size_t i = 0; i < free.size(); ++i)
          combos *= 3;
        for (std::uint32_t c = 0; c < combos; ++c)
        {
          auto x = c;
          for (auto i : free)
          {
            report[i] = static_cast<int>(x % 3);
            x /= 3;
          }
          for (std::uint32_t cert = 0; cert < (1u << n); ++cert)
          {
            if (static_cast<std::uint32_t>(__builtin_popcount(cert)) != quorum)
              continue;
            int m = 0, other = 0;
            for (std::uint32_t i = 0; i < n; ++i)
            {
              if (cert >> i & 1)
              {
                m += report[i] == 0;
                other += report[i] == 1;
              }
            }
            found = found || lost(m, other);
          }
        }
      }
    }
    return found;
  }
}

TEST_CASE("agreement: conflicting commits at correct replicas")
{
  const auto v = checker::check_agreement(
    {commit(2, 1, "a", 2), commit(3, 2, "b", 12), commit(1, 2, "b", 14)}, hbft4);
  REQUIRE_FALSE(v.holds());
  CHECK(v.witness->first == commit(2, 1, "a", 2));
  CHECK(v.witness->second == commit(3, 2, "b", 12));
}

TEST_CASE("agreement: equal values hold, Byzantine commits are ignored")
{
  CHECK(checker::check_agreement({commit(1, 1, "a", 1), commit(2, 2, "a", 5)}, hbft4).holds());
  CHECK(checker::check_agreement({commit(0, 1, "b", 1), commit(2, 1, "a", 2)}, hbft4).holds());
  CHECK(checker::check_agreement(std::vector<CommitEvent>{}, hbft4).holds());
}

TEST_CASE("agreement: different sequence numbers never conflict")
{
  auto later = commit(2, 1, "b", 3);
  later.seq = SeqNum{2};
  CHECK(checker::check_agreement({commit(1, 1, "a", 1), later}, hbft4).holds());
}

TEST_CASE("validity")
{
  const std::set<Value> proposed{V("a"), V("b")};
  CHECK(checker::check_validity({commit(1, 1, "a", 1), commit(2, 2, "b", 2)}, proposed, hbft4).holds());
  const auto bad = checker::check_validity({commit(1, 1, "c", 1)}, proposed, hbft4);
  REQUIRE_FALSE(bad.holds());
  CHECK(bad.witness->value == V("c"));
  CHECK(checker::check_validity({commit(1, 2, "NULL", 4)}, {}, hbft4).holds());
  CHECK(checker::check_validity(std::vector<CommitEvent>{}, {}, hbft4).holds());
}

TEST_CASE("quorum intersection: FaB sizing never loses a committed value")
{
  const auto fab = checker::check_fab_quorum_intersection(1);
  CHECK(fab.n == 6);
  CHECK(fab.certificate_size == 5);
  CHECK(fab.cases_checked > 0);
  CHECK(fab.counterexamples == 0);
  CHECK_FALSE(any_loss(1, 6, [](int m, int other) { return m < 3 || other >= 3; }));

  CHECK(checker::check_fab_quorum_intersection(0).counterexamples == 0);
  CHECK(checker::check_fab_quorum_intersection(2).counterexamples == 0);
}

TEST_CASE("quorum intersection: hBFT sizing breaks with a {m, m', m'} certificate")
{
  const auto hbft = checker::check_quorum_intersection(Protocol::Hbft, 1);
  CHECK(hbft.n == 4);
  CHECK(hbft.certificate_size == 3);
  CHECK(hbft.counterexamples > 0);
  REQUIRE(hbft.first_counterexample);
  CHECK(hbft.first_counterexample->votes_m == 1);
  CHECK(hbft.first_counterexample->votes_other == 2);
  CHECK(hbft.first_counterexample->chosen == checker::quorum_other());

  // Same question asked by brute force: n-f accepted m, and a certificate
  // where m' reaches f+1 while m stays below it.
  CHECK(any_loss(1, 4, [](int m, int other) { return other >= 2 && m < 2; }));
}

TEST_CASE("quorum check refuses large f")
{
  CHECK_THROWS_AS(checker::check_fab_quorum_intersection(3), std::invalid_argument);
}
