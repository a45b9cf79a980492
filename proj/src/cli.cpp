#include "consensus_lab/cli.hpp"

#include "consensus_lab/checker.hpp"
#include "consensus_lab/explorer.hpp"
#include "consensus_lab/json_io.hpp"
#include "consensus_lab/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace consensus_lab::cli
{
  namespace
  {
    struct InputError : std::runtime_error
    {
      using std::runtime_error::runtime_error;
    };

    void write_file(const std::string& path, const std::string& text)
    {
      std::ofstream f(path, std::ios::binary);
      if (!f)
        throw InputError(path + ": cannot open for writing");
      f << text;
      if (!f)
        throw InputError(path + ": write failed");
    }

    struct RunArgs
    {
      std::string scenario;
      std::string trace;
      std::string verdict;
      bool pretty = false;
    };

    int cmd_run(const RunArgs& a, std::ostream& out)
    {
      const auto scenario = load_scenario(a.scenario);
      sim::SimOptions options;
      options.step_limit = sim::step_limit_from_env();
      const auto trace = sim::run(scenario, options);
      const auto verdict = checker::check(trace, scenario.config());
      const auto verdict_line = checker::to_json(verdict).dump() + "\n";

      if (!a.trace.empty())
        write_file(a.trace, json_io::trace_to_jsonl(trace) + verdict_line);
      if (!a.verdict.empty())
        write_file(a.verdict, verdict_line);

      if (a.pretty)
        out << narrate(trace) << "\n";
      out << "scenario: " << scenario.name << "\n" << checker::describe(verdict);
      out << verdict_line;
      return verdict.holds() ? exit_ok : exit_violation;
    }

    struct ExploreArgs
    {
      std::string protocol;
      std::uint32_t f = 1;
      std::uint32_t n = 0;
      std::uint32_t max_steps = explorer::default_max_steps;
      std::uint32_t max_byz = explorer::default_max_byz_messages;
      std::string out;
      bool no_dedup = false;
    };

    int cmd_explore(const ExploreArgs& a, std::ostream& out)
    {
      const auto protocol = parse_protocol(a.protocol);
      if (!protocol)
        throw InputError("--protocol: expected hbft or fab, got '" + a.protocol + "'");
      const auto n = a.n == 0 ? min_replicas(*protocol, a.f) : a.n;
      auto spec = explorer::default_spec(*protocol, a.f, n);
      spec.max_steps = a.max_steps;
      spec.max_byz_messages = a.max_byz;
      spec.dedup = !a.no_dedup;

      const auto result = explorer::explore(spec);
      const auto& s = result.stats;
      out << "explore " << a.protocol << " f=" << a.f << " n=" << n
          << " max_steps=" << spec.max_steps << " max_byz_messages=" << spec.max_byz_messages
          << (spec.dedup ? "" : " dedup=off") << "\n";
      out << "states=" << s.states << " traces=" << s.traces << " pruned=" << s.pruned
          << " dedup_hits=" << s.dedup_hits << " bound_hits=" << s.bound_hits
          << " validity_violations=" << s.validity_violations << "\n";
      if (s.bound_hits > 0)
        out << "note: " << s.bound_hits << " traces were cut off by max_steps\n";
      if (!result.found)
      {
        out << "NONE_WITHIN_BOUNDS\n";
        return exit_ok;
      }
      out << "FOUND\nwitness (" << result.witness_choices.size() << " events):\n";
      for (const auto& c : result.witness_choices)
        out << "  " << explorer::to_string(c) << "\n";
      out << checker::describe(*result.witness_verdict);
      if (!a.out.empty())
      {
        write_file(a.out, dump_scenario(*result.witness));
        out << "witness scenario written to " << a.out << "\n";
      }
      return exit_violation;
    }

    int cmd_check_quorum(std::uint32_t f, std::ostream& out)
    {
      if (f > checker::max_quorum_check_f)
      {
        throw InputError(
          "--f " + std::to_string(f) + " is too large to enumerate at desk scale (max " +
          std::to_string(checker::max_quorum_check_f) + ")");
      }
      const auto fab = checker::check_quorum_intersection(Protocol::Fab, f);
      const auto hbft = checker::check_quorum_intersection(Protocol::Hbft, f);
      out << checker::describe(fab) << checker::describe(hbft);
      // With f = 0 nothing can be lost, under either sizing.
      const bool ok = fab.counterexamples == 0 && (f == 0 || hbft.counterexamples > 0);
      out << (ok ? "quorum check: FaB safe, hBFT sizing breaks\n" : "quorum check: unexpected result\n");
      return ok ? exit_ok : exit_violation;
    }
  }

  std::string narrate(const sim::Trace& trace)
  {
    std::ostringstream out;
    for (const auto& r : trace.records)
    {
      std::ostringstream line;
      switch (r.kind)
      {
        case sim::RecordKind::Send:
          continue;
        case sim::RecordKind::Deliver:
          line << display_name(*r.from) << " -> " << display_name(*r.to) << "  "
               << to_string(*r.payload);
          break;
        case sim::RecordKind::Timeout:
          line << display_name(*r.to) << " times out";
          break;
        case sim::RecordKind::Adversary:
          line << "adversary: " << r.text;
          break;
        case sim::RecordKind::Commit:
          line << "*** " << display_name(r.commit->replica) << " commits "
               << r.commit->value.label() << " at view " << r.commit->view.number
               << ", seq " << r.commit->seq.number;
          break;
        case sim::RecordKind::Note:
          line << r.text;
          break;
      }
      out << "step " << std::setw(3) << r.step << "  " << line.str() << "\n";
    }
    return out.str();
  }

  int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
  {
    CLI::App app{"Deterministic simulation lab for two-step BFT consensus", "consensus_lab"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Replay a scenario and check Agreement and Validity");
    run->add_option("--scenario", run_args.scenario, "Scenario file")->required();
    run->add_option("--trace", run_args.trace, "Write the trace as JSON lines");
    run->add_option("--verdict", run_args.verdict, "Write the verdict as JSON");
    run->add_flag("--pretty", run_args.pretty, "Print a message-flow narrative");

    ExploreArgs ex;
    auto* explore = app.add_subcommand("explore", "Bounded search for an agreement violation");
    explore->add_option("--protocol", ex.protocol, "hbft or fab")->required();
    explore->add_option("--f", ex.f, "Byzantine replicas tolerated");
    explore->add_option("--n", ex.n, "Replicas (default: protocol minimum)");
    explore->add_option("--max-steps", ex.max_steps, "Scheduler events per trace")
      ->check(CLI::PositiveNumber);
    explore->add_option("--max-byz-messages", ex.max_byz, "Byzantine emissions per trace")
      ->check(CLI::PositiveNumber);
    explore->add_option("--out", ex.out, "Write the witness scenario here");
    explore->add_flag("--no-dedup", ex.no_dedup, "Disable state-hash pruning");

    std::uint32_t quorum_f = 1;
    auto* quorum = app.add_subcommand("check-quorum", "Exhaustive quorum-intersection check");
    quorum->add_option("--f", quorum_f, "Byzantine replicas tolerated");

    try
    {
      app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
      const int code = app.exit(e, out, err);
      return code == 0 ? exit_ok : exit_input_error;
    }

    try
    {
      if (*run)
        return cmd_run(run_args, out);
      if (*explore)
        return cmd_explore(ex, out);
      return cmd_check_quorum(quorum_f, out);
    }
    catch (const ScenarioError& e)
    {
      err << "error: " << e.what() << "\n";
    }
    catch (const InputError& e)
    {
      err << "error: " << e.what() << "\n";
    }
    catch (const std::invalid_argument& e)
    {
      err << "error: " << e.what() << "\n";
    }
    catch (const sim::SimulationError& e)
    {
      err << "error: " << e.what() << "\n";
    }
    catch (const adversary::ScriptError& e)
    {
      err << "error: " << e.what() << "\n";
    }
    return exit_input_error;
  }
}
