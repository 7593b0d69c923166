#pragma once

#include <map>
#include <string>
#include <vector>

namespace geoldp::detail {

// Parsed "name{k=v, k=[v,v], ...}" builtin-family string.
struct FamilySpec {
  std::string name;
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<double>> vectors;

  double get(const std::string& key, double fallback) const {
    auto it = scalars.find(key);
    return it == scalars.end() ? fallback : it->second;
  }
  double require(const std::string& key) const;
};

// Whitespace-insensitive; throws ContractViolationError on malformed input.
FamilySpec parse_family(const std::string& text);

}  // namespace geoldp::detail
