#pragma once

#include "consensus_lab/core.hpp"

#include "../common/oracles.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace test
{
  using namespace consensus_lab;
  using oracle::cert_of;
  using oracle::multisets;

  inline ReplicaId R(std::uint32_t i) { return ReplicaId{i}; }
  inline Value V(const char* s) { return Value{s}; }

  inline std::filesystem::path scenario_dir()
  {
    return std::filesystem::path(CONSENSUS_LAB_SOURCE_DIR) / "scenarios";
  }

  /// Report of `reporter` for view 2, seq 1: accepted value or empty.
  inline ViewChangeReport report(
    std::uint32_t reporter, std::optional<Value> accepted,
    std::optional<CommitCertificate> cc = std::nullopt)
  {
    ViewChange vc{View{2}, SeqNum{1}, std::nullopt, std::move(cc)};
    if (accepted)
      vc.accepted = Accepted{View{1}, *accepted};
    return {ReplicaId{reporter}, vc};
  }
}
