#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gsverse/assets.hpp"
#include "gsverse/bundle.hpp"

namespace gsverse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitSimulation = 3;

// Static splats followed by every object propagated from its rest pose. Mixed
// SH degrees are widened to the largest with zero coefficients.
GaussianCloud materialize(const SceneBundle& bundle);
GaussianCloud materialize(const SceneBundle& bundle, const std::vector<std::vector<Eigen::Vector3f>>& vertices);

// Entry point shared by the binary and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gsverse::cli
