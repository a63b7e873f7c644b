#pragma once

#include <string>

#include "crlprune/network.hpp"

namespace crlprune {

struct BatchSummary {
  int size = 0;
};

// Budget function f evaluated on the candidate masks. Built-ins measure
// remaining parameters or MACs in percent; "external:CMD" runs CMD with a
// JSON description of the masks and network on stdin and reads one real
// from its stdout, so the budget can be anything the user can measure.
class CostFunction {
 public:
  static CostFunction parse(const std::string& id);

  double evaluate(const Network& net, const Masks& masks, const BatchSummary& batch) const;

  const std::string& id() const { return id_; }
  bool is_external() const { return !command_.empty(); }

 private:
  std::string id_;
  std::string command_;
};

// runs `/bin/sh -c command`, writes input to its stdin, parses one real
// from its stdout; throws on spawn failure, nonzero exit or unparsable output
double run_external_evaluator(const std::string& command, const std::string& input);

}  // namespace crlprune
