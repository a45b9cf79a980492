#pragma once

// Path-aware accessors for hand-written JSON input.

#include "consensus_lab/core.hpp"
#include "consensus_lab/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

namespace consensus_lab::detail
{
  inline const nlohmann::json& require(
    const nlohmann::json& obj, const char* key, const std::string& path)
  {
    if (!obj.is_object())
      throw ScenarioError(path + ": expected object");
    auto it = obj.find(key);
    if (it == obj.end())
      throw ScenarioError(path + "." + key + ": missing required field");
    return *it;
  }

  inline void require_keys(
    const nlohmann::json& obj,
    const std::string& path,
    const std::vector<const char*>& allowed)
  {
    if (!obj.is_object())
      throw ScenarioError(path + ": expected object");
    for (const auto& item : obj.items())
    {
      bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) {
        return item.key() == a;
      });
      if (!ok)
        throw ScenarioError(path + "." + item.key() + ": unknown field");
    }
  }

  inline void require_keys(
    const nlohmann::json& obj,
    const std::string& path,
    std::initializer_list<const char*> allowed)
  {
    require_keys(obj, path, std::vector<const char*>(allowed));
  }

  inline std::uint64_t read_uint(const nlohmann::json& j, const std::string& path)
  {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
      throw ScenarioError(path + ": expected non-negative integer");
    return j.get<std::uint64_t>();
  }

  inline std::string read_string(const nlohmann::json& j, const std::string& path)
  {
    if (!j.is_string())
      throw ScenarioError(path + ": expected string");
    auto s = j.get<std::string>();
    if (s.empty())
      throw ScenarioError(path + ": empty string");
    return s;
  }

  inline ReplicaId read_replica(const nlohmann::json& j, const std::string& path)
  {
    auto v = read_uint(j, path);
    if (v > 0xffffffffu)
      throw ScenarioError(path + ": replica index out of range");
    return ReplicaId{static_cast<std::uint32_t>(v)};
  }
}
