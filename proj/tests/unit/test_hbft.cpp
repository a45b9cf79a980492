#include "consensus_lab/hbft.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>

using namespace test;

namespace
{
  Config four()
  {
    return Config(Protocol::Hbft, 1, 4, {R(0)}, {{View{1}, R(0)}, {View{2}, R(1)}});
  }

  bool sends(const Effects& fx, const std::string& type)
  {
    return std::any_of(fx.sends.begin(), fx.sends.end(), [&](const Outbound& o) {
      return type_name(o.payload) == type;
    });
  }

  CommitCertificate cc_for(const Value& v, std::vector<ReplicaId> who)
  {
    return {View{1}, SeqNum{1}, v, std::move(who)};
  }
}

TEST_CASE("prepare from the primary is accepted and answered with a commit")
{
  hbft::Replica i2(R(1), four());
  auto fx = i2.on_prepare(R(0), Prepare{View{1}, SeqNum{1}, V("a")});
  REQUIRE(i2.slot(SeqNum{1}));
  CHECK(i2.slot(SeqNum{1})->accepted == Accepted{View{1}, V("a")});
  CHECK(sends(fx, "commit"));

  const auto again = i2.on_prepare(R(0), Prepare{View{1}, SeqNum{1}, V("a")});
  CHECK(again.sends.empty());

  const auto other = i2.on_prepare(R(0), Prepare{View{1}, SeqNum{1}, V("b")});
  CHECK(other.sends.empty());
  CHECK(i2.slot(SeqNum{1})->accepted == Accepted{View{1}, V("a")});
}

TEST_CASE("prepare from a backup is ignored")
{
  hbft::Replica i3(R(2), four());
  const auto fx = i3.on_prepare(R(3), Prepare{View{1}, SeqNum{1}, V("a")});
  CHECK(fx.sends.empty());
  CHECK((i3.slot(SeqNum{1}) == nullptr || !i3.slot(SeqNum{1})->accepted));
}

TEST_CASE("three attestations commit, two do not")
{
  hbft::Replica i3(R(2), four());
  i3.on_prepare(R(0), Prepare{View{1}, SeqNum{1}, V("a")});
  CHECK_FALSE(i3.slot(SeqNum{1})->committed);
  const auto fx = i3.on_commit(R(1), Commit{View{1}, SeqNum{1}, V("a")});
  REQUIRE(fx.commits.size() == 1);
  CHECK(fx.commits[0].replica == R(2));
  CHECK(fx.commits[0].value == V("a"));
  CHECK(fx.commits[0].view == View{1});
}

TEST_CASE("f+1 commits for another value start a view change")
{
  hbft::Replica i4(R(3), four());
  i4.on_prepare(R(0), Prepare{View{1}, SeqNum{1}, V("a")});
  auto fx = i4.on_commit(R(1), Commit{View{1}, SeqNum{1}, V("b")});
  CHECK_FALSE(sends(fx, "view_change"));
  fx = i4.on_commit(R(2), Commit{View{1}, SeqNum{1}, V("b")});
  CHECK(sends(fx, "view_change"));
  CHECK(i4.mode() == hbft::Mode::ViewChanging);
}

TEST_CASE("timeout reports the accepted value and any certificate")
{
  hbft::Replica i2(R(1), four());
  i2.on_prepare(R(0), Prepare{View{1}, SeqNum{1}, V("a")});
  const auto fx = i2.on_timeout(SeqNum{1}, View{1});
  REQUIRE(fx.sends.size() == 1);
  const auto& vc = std::get<ViewChange>(fx.sends[0].payload);
  CHECK(vc.new_view == View{2});
  CHECK(vc.accepted == Accepted{View{1}, V("a")});
  CHECK_FALSE(vc.commit_cert);

  hbft::Replica fresh(R(3), four());
  const auto empty = fresh.on_timeout(SeqNum{1}, View{1});
  CHECK_FALSE(std::get<ViewChange>(empty.sends[0].payload).accepted);
}

TEST_CASE("a backup joins after f+1 foreign reports, not after one")
{
  hbft::Replica i3(R(2), four());
  auto fx = i3.on_view_change(R(3), report(3, V("b")).report);
  CHECK_FALSE(sends(fx, "view_change"));
  fx = i3.on_view_change(R(0), report(0, V("b")).report);
  CHECK(sends(fx, "view_change"));
}

TEST_CASE("the new primary builds the certificate from itself, i1 and i4 and picks b")
{
  hbft::Replica i2(R(1), four());
  i2.on_prepare(R(0), Prepare{View{1}, SeqNum{1}, V("a")});
  i2.on_timeout(SeqNum{1}, View{1});
  i2.on_view_change(R(3), report(3, V("b")).report);
  const auto fx = i2.on_view_change(R(0), report(0, V("b")).report);
  const auto it = std::find_if(fx.sends.begin(), fx.sends.end(), [](const Outbound& o) {
    return std::holds_alternative<NewView>(o.payload);
  });
  REQUIRE(it != fx.sends.end());
  const auto& nv = std::get<NewView>(it->payload);
  CHECK(nv.selected == V("b"));
  CHECK(nv.progress_cert.reports.size() == 3);
}

TEST_CASE("select_value on the fixed examples")
{
  const auto config = four();
  CHECK(hbft::select_value(cert_of({V("a"), V("b"), V("b")}), config) == V("b"));
  CHECK(hbft::select_value(cert_of({std::nullopt, std::nullopt, std::nullopt}), config).is_null());

  auto cert = cert_of({V("a"), V("b"), V("b")});
  cert.reports[0].report.commit_cert = cc_for(V("a"), {R(0), R(1), R(2)});
  CHECK(hbft::select_value(cert, config) == V("a"));

  // An undersized certificate does not count.
  cert.reports[0].report.commit_cert = cc_for(V("a"), {R(0), R(2)});
  CHECK(hbft::select_value(cert, config) == V("b"));

  CHECK_THROWS_AS(hbft::select_value(cert_of({V("a"), V("b")}), config), std::invalid_argument);
}

TEST_CASE("select_value agrees with a counting oracle on every report multiset up to 5")
{
  std::size_t cases = 0;
  for (std::uint32_t f = 0; f <= 2; ++f)
  {
    const Config config(Protocol::Hbft, f, 3 * f + 1);
    for (std::size_t k = 2 * f + 1; k <= std::min<std::size_t>(config.n(), 5); ++k)
    {
      for (const auto& votes : multisets(k))
      {
        CHECK(hbft::select_value(cert_of(votes), config) == oracle::select(votes, f, std::nullopt));

        // A valid certificate on the first report, for either value.
        std::vector<ReplicaId> quorum;
        for (std::uint32_t i = 0; i < 2 * f + 1; ++i)
          quorum.push_back(R(i));
        for (const char* certified : {"a", "b"})
        {
          auto cert = cert_of(votes);
          cert.reports[0].report.commit_cert = cc_for(V(certified), quorum);
          CHECK(hbft::select_value(cert, config) == oracle::select(votes, f, V(certified)));
        }
        cases += 3;
      }
    }
  }
  CHECK(cases > 50);
}

TEST_CASE("new view with a selection the certificate does not give is rejected")
{
  hbft::Replica i3(R(2), four());
  i3.on_timeout(SeqNum{1}, View{1});
  const auto cert = cert_of({V("a"), V("a"), V("b")});
  i3.on_new_view(R(1), NewView{View{2}, SeqNum{1}, V("b"), cert});
  CHECK(i3.view() == View{1});

  i3.on_new_view(R(3), NewView{View{2}, SeqNum{1}, V("a"), cert});
  CHECK(i3.view() == View{1});

  const auto fx = i3.on_new_view(R(1), NewView{View{2}, SeqNum{1}, V("a"), cert});
  CHECK(i3.view() == View{2});
  CHECK(sends(fx, "commit"));
}
