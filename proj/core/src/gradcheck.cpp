#include "ropetrack/gradcheck.hpp"

#include "ropetrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ropetrack::gradcheck {

namespace {

double forward_loss(const Scene& scene, const Positions& nodes) {
    const auto splats = splat::reattach(scene.splats, nodes);
    double total = 0.0;
    for (std::size_t k = 0; k < scene.cameras.size(); ++k)
        total += splat::render_loss(scene.observed[k], splat::render(splats, scene.cameras[k]));
    return total;
}

std::vector<std::vector<std::size_t>> render_orders(const Scene& scene, const Positions& nodes) {
    const auto splats = splat::reattach(scene.splats, nodes);
    std::vector<std::vector<std::size_t>> orders;
    for (const auto& camera : scene.cameras) {
        const auto projected = splat::project_all(splats, camera);
        orders.push_back(splat::depth_order(splats, projected));
    }
    return orders;
}

}  // namespace

Scene random_scene(std::uint64_t seed, const SceneSpec& spec) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    Scene scene;
    scene.chain.segment_rest_length = 0.03;
    scene.chain.node_mass = 0.001;
    Vec3 x(0.0, 0.0, 0.02);
    Vec3 dir = Vec3(normal(rng), normal(rng), 0.2 * normal(rng)).normalized();
    Vec3 centroid = Vec3::Zero();
    for (int i = 0; i < spec.nodes; ++i) {
        scene.chain.positions.push_back(x);
        centroid += x;
        dir = (dir + 0.5 * Vec3(normal(rng), normal(rng), 0.3 * normal(rng))).normalized();
        x += scene.chain.segment_rest_length * dir;
    }
    centroid /= spec.nodes;
    for (auto& p : scene.chain.positions) p -= centroid;

    SplatConfig config;
    config.gaussians_per_segment = spec.gaussians_per_segment;
    config.rope_diameter = 0.03;
    config.opacity = 0.9;
    scene.splats = splat::build_splats(scene.chain, config);
    for (std::size_t j = 0; j < scene.splats.size(); ++j) {
        scene.splats.colors[j] = Vec3(unit(rng), unit(rng), unit(rng));
        scene.splats.opacities[j] = 0.4 + 0.55 * unit(rng);
    }

    const double fov = std::numbers::pi / 4.0;
    const double focal = 0.5 * spec.width / std::tan(0.5 * fov);
    for (int k = 0; k < spec.cameras; ++k) {
        const double azimuth = 2.0 * std::numbers::pi * unit(rng);
        const double elevation = (30.0 + 40.0 * unit(rng)) * std::numbers::pi / 180.0;
        const Vec3 eye = 0.5 * Vec3(std::cos(elevation) * std::cos(azimuth),
                                    std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
        const Vec3 background(unit(rng), unit(rng), unit(rng));
        scene.cameras.push_back(synth::look_at_camera(eye, Vec3::Zero(), focal, spec.width,
                                                      spec.height, background));
    }

    Positions truth = scene.chain.positions;
    for (auto& p : truth) p += 0.004 * Vec3(normal(rng), normal(rng), normal(rng));
    const auto true_splats = splat::reattach(scene.splats, truth);
    for (std::size_t k = 0; k < scene.cameras.size(); ++k) {
        Frame f = splat::render(true_splats, scene.cameras[k]);
        for (double& v : f.pixels) v = std::clamp(v + 0.02 * normal(rng), 0.0, 1.0);
        f.camera_index = static_cast<int>(k);
        scene.observed.push_back(std::move(f));
    }
    return scene;
}

Result check_gradient(const Scene& scene, double h, double rel_tol, double abs_threshold) {
    const auto analytic = splat::loss_gradient_nodes(scene.chain.positions, scene.splats,
                                                     scene.observed, scene.cameras);
    Result out;
    Positions probe = scene.chain.positions;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            const double base = probe[i](c);
            // A stencil straddling a change of compositing order measures a jump,
            // not a derivative; shrink the step until it no longer does.
            double step = h;
            double fd = 0.0;
            bool smooth = false;
            for (int attempt = 0; attempt < 4 && !smooth; ++attempt, step *= 0.1) {
                double f[4];
                std::vector<std::vector<std::size_t>> order[4];
                const double offsets[4] = {2.0, 1.0, -1.0, -2.0};
                for (int e = 0; e < 4; ++e) {
                    probe[i](c) = base + offsets[e] * step;
                    f[e] = forward_loss(scene, probe);
                    order[e] = render_orders(scene, probe);
                }
                probe[i](c) = base;
                fd = (8.0 * (f[1] - f[2]) - (f[0] - f[3])) / (12.0 * step);
                smooth = order[0] == order[1] && order[1] == order[2] && order[2] == order[3];
                if (!smooth && attempt == 0) ++out.order_changes;
            }
            const double an = analytic.gradient[i](c);
            ++out.checked;
            if (!smooth) {
                ++out.unresolved;
                ++out.failures;
                continue;
            }
            const double magnitude = std::max(std::abs(fd), std::abs(an));
            if (magnitude > abs_threshold) {
                const double rel = std::abs(fd - an) / magnitude;
                out.worst_relative_error = std::max(out.worst_relative_error, rel);
                if (!(rel < rel_tol)) ++out.failures;
            } else {
                const double err = std::abs(fd - an);
                out.worst_absolute_error = std::max(out.worst_absolute_error, err);
                if (!(err < abs_threshold)) ++out.failures;
            }
        }
    }
    return out;
}

}  // namespace ropetrack::gradcheck
