#pragma once

#include "ropetrack/model.hpp"
#include "ropetrack/splat.hpp"

#include <cstdint>
#include <vector>

namespace ropetrack::gradcheck {

/// A small random scene: a node chain, its splats, cameras, and observed
/// frames rendered from a perturbed copy of the chain.
struct Scene {
    NodeChain chain;
    splat::SplatSet splats;
    std::vector<CameraModel> cameras;
    std::vector<Frame> observed;
};

struct SceneSpec {
    int nodes = 10;
    int gaussians_per_segment = 2;
    int cameras = 2;
    int width = 64;
    int height = 64;
};

Scene random_scene(std::uint64_t seed, const SceneSpec& spec = {});

struct Result {
    double worst_relative_error = 0.0;  // over components with magnitude > abs_threshold
    double worst_absolute_error = 0.0;  // over the remaining components
    std::size_t checked = 0;
    std::size_t failures = 0;
    /// Components whose stencil at the nominal step changed the depth order of
    /// some camera; these were re-measured with a smaller step.
    std::size_t order_changes = 0;
    /// Components still straddling an order change at the smallest step.
    std::size_t unresolved = 0;
    bool passed() const { return failures == 0; }
};

/// Analytic node gradient against fourth-order central finite differences
/// (x +- h, x +- 2h) of the loss computed by the forward renderer alone. Steps
/// h/10, h/100 and h/1000 are tried only for components whose stencil crosses a
/// depth-order change.
Result check_gradient(const Scene& scene, double h = 1e-4, double rel_tol = 1e-3,
                      double abs_threshold = 1e-6);

}  // namespace ropetrack::gradcheck
