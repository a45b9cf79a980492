#pragma once

// Subcommands run, explore and check-quorum. Exit codes: 0 properties hold or
// search clean, 1 usage or input error, 2 violation found.

#include "consensus_lab/net_sim.hpp"

#include <iosfwd>
#include <string>

namespace consensus_lab::cli
{
  inline constexpr int exit_ok = 0;
  inline constexpr int exit_input_error = 1;
  inline constexpr int exit_violation = 2;

  int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

  /// Message-flow narrative of a trace, one event per line.
  std::string narrate(const sim::Trace& trace);
}
