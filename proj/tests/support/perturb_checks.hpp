#pragma once

#include <string>
#include <vector>

#include "vrh/video.hpp"

namespace checks {

// Runs every perturbation invariant on `clip` and returns the violations
// (empty when all hold). The clip must come from fixtures::random_clip so
// zero and grey pixels can be attributed to the perturbation.
std::vector<std::string> perturbation_invariants(const vrh::VideoClip& clip);

}  // namespace checks
