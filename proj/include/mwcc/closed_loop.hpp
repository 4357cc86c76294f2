#pragma once

#include <cstddef>

#include "mwcc/model.hpp"

namespace mwcc {

/// A controller as seen by forward evaluators and simulators. The controller
/// carries an internal node (the stage for Markov policies, a belief-tree node
/// for augmented ones) that advances deterministically with every step.
class ClosedLoopPolicy {
 public:
  virtual ~ClosedLoopPolicy() = default;

  virtual std::size_t root() const = 0;
  virtual ActionIndex action(std::size_t node, StateIndex s) const = 0;
  virtual std::size_t next(std::size_t node, StateIndex s) const = 0;
  // Node followed by trajectories already absorbed in the fail state.
  virtual std::size_t fail_next(std::size_t node) const = 0;
};

class MarkovClosedLoop final : public ClosedLoopPolicy {
 public:
  explicit MarkovClosedLoop(const Policy& pi) : pi_(pi) {}

  std::size_t root() const override { return 0; }
  ActionIndex action(std::size_t stage, StateIndex s) const override { return pi_.rules[stage][s]; }
  std::size_t next(std::size_t stage, StateIndex) const override { return stage + 1; }
  std::size_t fail_next(std::size_t stage) const override { return stage + 1; }

 private:
  const Policy& pi_;
};

}  // namespace mwcc
