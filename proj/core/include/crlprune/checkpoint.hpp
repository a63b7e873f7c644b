#pragma once

#include <string>

#include "crlprune/network.hpp"
#include "crlprune/policy.hpp"

namespace crlprune {

// Versioned JSON checkpoints. Parameter arrays round-trip exactly (shortest
// round-trip double encoding), so identical training runs produce identical
// files.

void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

struct AgentCheckpoint {
  GaussianPolicy policy;
  ValueNet value_r;
  ValueNet value_c;
};

void save_agent(const GaussianPolicy& policy, const ValueNet& value_r, const ValueNet& value_c,
                const std::string& path);
AgentCheckpoint load_agent(const std::string& path);

}  // namespace crlprune
