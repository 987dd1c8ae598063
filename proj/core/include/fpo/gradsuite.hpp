#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpo/model.hpp"

namespace fpo {

struct GradSuiteRow {
  std::string target;  // loglik, dpo, fpo_token_sigmoid, fpo_sequence_sigmoid
  int instance = 0;
  double max_rel_error = 0.0;
  std::size_t coords = 0;
};

// Central-difference checks of the sequence log-likelihood and of each
// preference loss on `instances` random models and pairs. Every parameter
// coordinate of the small check model is probed.
std::vector<GradSuiteRow> gradient_suite(int instances, double h, std::uint64_t seed);

}  // namespace fpo
