#include "consensus_lab/cli.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace test;

namespace
{
  struct Out
  {
    int code;
    std::string out;
    std::string err;
  };

  Out invoke(std::vector<std::string> args)
  {
    args.insert(args.begin(), "consensus_lab");
    std::vector<const char*> argv;
    for (const auto& a : args)
      argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = consensus_lab::cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
  }

  std::string scenario(const char* name) { return (scenario_dir() / name).string(); }

  std::string slurp(const std::filesystem::path& p)
  {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
  }
}

TEST_CASE("run: exit codes follow the verdict")
{
  const auto attack = invoke({"run", "--scenario", scenario("hbft_paper_violation.json")});
  CHECK(attack.code == 2);
  CHECK(attack.out.find("VIOLATED i3@v1,s1=a vs i4@v2,s1=b") != std::string::npos);
  CHECK(invoke({"run", "--scenario", scenario("fab_baseline.json")}).code == 0);
  CHECK(invoke({"run", "--scenario", scenario("hbft_no_fault.json")}).code == 0);
}

TEST_CASE("run: trace and verdict files")
{
  const auto dir = std::filesystem::temp_directory_path() / "consensus_lab_cli_test";
  std::filesystem::create_directories(dir);
  const auto trace = (dir / "t.jsonl").string();
  const auto verdict = (dir / "v.json").string();
  const auto r = invoke({"run", "--scenario", scenario("hbft_paper_violation.json"), "--trace", trace,
                      "--verdict", verdict});
  CHECK(r.code == 2);
  const auto t = slurp(trace);
  const auto v = slurp(verdict);
  CHECK(v.find("\"record\":\"verdict\"") != std::string::npos);
  CHECK(t.size() > v.size());
  CHECK(t.substr(t.size() - v.size()) == v);

  invoke({"run", "--scenario", scenario("hbft_paper_violation.json"), "--trace", trace});
  CHECK(slurp(trace) == t);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run --pretty narrates the flow")
{
  const auto r = invoke({"run", "--scenario", scenario("hbft_paper_violation.json"), "--pretty"});
  CHECK(r.out.find("i1 -> i4  PREPARE(v1,s1,b)") != std::string::npos);
  CHECK(r.out.find("*** i3 commits a at view 1, seq 1") != std::string::npos);
}

TEST_CASE("input errors exit 1")
{
  CHECK(invoke({"run", "--scenario", "/nonexistent.json"}).code == 1);
  CHECK(invoke({"run"}).code == 1);
  CHECK(invoke({}).code == 1);
  CHECK(invoke({"explore", "--protocol", "raft"}).code == 1);
  CHECK(invoke({"explore", "--protocol", "hbft", "--f", "1", "--n", "3"}).code == 1);
  CHECK(invoke({"explore", "--protocol", "hbft", "--max-steps", "0"}).code == 1);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("check-quorum")
{
  const auto one = invoke({"check-quorum", "--f", "1"});
  CHECK(one.code == 0);
  CHECK(one.out.find("counterexamples: 0") != std::string::npos);
  CHECK(invoke({"check-quorum", "--f", "0"}).code == 0);
  const auto big = invoke({"check-quorum", "--f", "3"});
  CHECK(big.code == 1);
  CHECK(big.err.find("too large") != std::string::npos);
}

TEST_CASE("explore without faults is clean")
{
  CHECK(invoke({"explore", "--protocol", "hbft", "--f", "0"}).code == 0);
  const auto fab = invoke({"explore", "--protocol", "fab", "--f", "0"});
  CHECK(fab.code == 0);
  CHECK(fab.out.find("NONE_WITHIN_BOUNDS") != std::string::npos);
}
