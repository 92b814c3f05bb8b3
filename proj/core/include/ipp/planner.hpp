#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ipp/mapping.hpp"

namespace ipp {

struct PlanningContext {
  const GridMapBelief& belief;
  int pose = 0;             // current lattice action
  double budget = 0.0;      // remaining effective time, seconds
};

/// Common interface of every planner run by the mission executor. A planner
/// may keep state between calls of one mission; reset() starts a new one.
class Planner {
 public:
  virtual ~Planner() = default;
  virtual std::string name() const = 0;
  virtual void reset(std::uint64_t seed) = 0;
  /// Next lattice action, or nullopt when nothing is reachable.
  virtual std::optional<int> plan(const PlanningContext& ctx) = 0;
};

}  // namespace ipp
