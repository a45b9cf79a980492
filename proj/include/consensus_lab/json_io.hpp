#pragma once

// JSON encodings shared by scenario files, trace records and verdicts.

#include "consensus_lab/core.hpp"
#include "consensus_lab/net_sim.hpp"

#include <json.hpp>

#include <string>

namespace consensus_lab::json_io
{
  using Json = nlohmann::ordered_json;

  Json to_json(const Payload& payload);
  Json to_json(const CommitEvent& event);
  Json to_json(const CommitCertificate& cc);
  Json to_json(const sim::Selector& selector);

  /// `path` prefixes error messages ("scripts[0].actions[1].emit[0].payload").
  /// Throws ScenarioError.
  Payload payload_from_json(const nlohmann::json& j, const std::string& path);
  sim::Selector selector_from_json(
    const nlohmann::json& j,
    const std::string& path,
    std::initializer_list<const char*> extra_keys = {});

  /// {index, step, kind, from, to, payload, replica_state_digest, ...}.
  Json to_json(const sim::TraceRecord& record, std::size_t index);

  /// One JSON object per line, in record order.
  std::string trace_to_jsonl(const sim::Trace& trace);
}
