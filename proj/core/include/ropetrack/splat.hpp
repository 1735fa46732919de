#pragma once

#include "ropetrack/model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ropetrack::splat {

inline constexpr int kTileSize = 16;
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr double kCovarianceFloor = 1e-6;
/// Squared Mahalanobis radius of the footprint (3 standard deviations).
inline constexpr double kCutoffSq = 9.0;
/// The alpha falloff is tapered to zero between this squared radius and the
/// cutoff so that alpha stays C2 in the Gaussian mean.
inline constexpr double kTaperStartSq = 4.0;

/// Gaussian j sits at (1 - s) x_i + s x_{i+1}.
struct Attachment {
    std::size_t segment = 0;
    double s = 0.0;
};

/// Spherical Gaussians bound to the segments of a node chain.
struct SplatSet {
    std::vector<Vec3> means;
    double sigma_world = 0.0;
    std::vector<Vec3> colors;
    std::vector<double> opacities;
    std::vector<Attachment> attachment;

    std::size_t size() const noexcept { return means.size(); }
};

/// Inclusive pixel index range. Empty when x1 < x0 or y1 < y0.
struct PixelRect {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
    bool empty() const noexcept { return x1 < x0 || y1 < y0; }
};

struct Projected2D {
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Identity();
    Mat2 conic = Mat2::Identity();
    double depth = 0.0;
    PixelRect footprint;
    /// d(mean2d)/d(world mean), 2x3.
    Eigen::Matrix<double, 2, 3> jacobian = Eigen::Matrix<double, 2, 3>::Zero();
    /// Homogeneous w at the mean; needed by the covariance backward pass.
    double w = 1.0;
    bool floored = false;
};

SplatSet build_splats(const NodeChain& chain, const SplatConfig& config);

/// Recomputes every mean from its attachment; other fields are untouched.
SplatSet reattach(SplatSet splats, std::span<const Vec3> nodes);

/// Perspective projection of a spherical Gaussian with the local affine
/// covariance approximation. Returns nullopt when culled (behind the camera or
/// footprint entirely outside the image).
std::optional<Projected2D> project_gaussian(const Vec3& mean, double sigma_world,
                                            const CameraModel& camera);

/// Squared Mahalanobis distance of u from the projected mean.
double mahalanobis_sq(const Projected2D& g, const Vec2& u);

/// Footprint taper w(q); 1 inside kTaperStartSq, 0 beyond kCutoffSq.
double footprint_taper(double q);
double footprint_taper_derivative(double q);

/// Blending factor of g at pixel position u.
double alpha_at(const Projected2D& g, double opacity, const Vec2& u);

/// Storage-order-independent front-to-back order of the visible Gaussians.
std::vector<std::size_t> depth_order(const SplatSet& splats,
                                     std::span<const std::optional<Projected2D>> projected);

std::vector<std::optional<Projected2D>> project_all(const SplatSet& splats,
                                                    const CameraModel& camera);

/// Per-pixel blending bookkeeping alongside the rendered image.
struct RenderDetail {
    Frame image;
    std::vector<double> transmittance;       // residual T after compositing
    std::vector<double> accumulated_weight;  // sum of alpha_j * T_j
};

/// Tiled rasterizer: 16x16 tiles, per-tile depth-sorted lists from footprints.
Frame render(const SplatSet& splats, const CameraModel& camera);
RenderDetail render_detailed(const SplatSet& splats, const CameraModel& camera);

/// Naive reference: every pixel walks every visible Gaussian in depth order.
Frame render_oracle(const SplatSet& splats, const CameraModel& camera);
RenderDetail render_oracle_detailed(const SplatSet& splats, const CameraModel& camera);

/// Knobs shared by render_loss and loss_gradient_nodes.
struct LossOptions {
    /// Per-camera masks restricting the loss; empty means full image.
    std::span<const Mask> masks;
    /// Keep probability for random pixel subsampling; 1 disables it.
    double pixel_fraction = 1.0;
    std::uint64_t seed = 0;
};

/// L2 norm of the residual image, optionally restricted to `mask`.
double render_loss(const Frame& observed, const Frame& rendered, const Mask* mask = nullptr);

/// Sum over cameras of render_loss.
double multi_view_loss(std::span<const Frame> observed, std::span<const Frame> rendered,
                       const LossOptions& options = {});

struct LossGradient {
    double loss = 0.0;
    Positions gradient;  // dL/dx_i
    /// dL/d(mean_j), world frame, one per Gaussian.
    std::vector<Vec3> mean_gradient;
};

/// Exact gradient of the summed multi-view loss with respect to node positions,
/// including the dependence of the projected covariance on the mean.
LossGradient loss_gradient_nodes(std::span<const Vec3> nodes, const SplatSet& splats,
                                 std::span<const Frame> frames,
                                 std::span<const CameraModel> cameras,
                                 const LossOptions& options = {});

/// Mean color over all masked pixels of all cameras, broadcast to every Gaussian.
std::vector<Vec3> fit_colors(std::span<const Frame> frames, std::span<const Mask> masks,
                             std::size_t gaussian_count);

/// Binary dilation with a square structuring element of the given radius.
Mask dilate(const Mask& mask, int radius);

}  // namespace ropetrack::splat
