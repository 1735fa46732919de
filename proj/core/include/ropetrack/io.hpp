#pragma once

#include "ropetrack/dataset.hpp"
#include "ropetrack/eval.hpp"
#include "ropetrack/model.hpp"
#include "ropetrack/synth.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace ropetrack::io {

namespace fs = std::filesystem;

/// Malformed or inconsistent files. The message names the file and, for
/// text formats, the 1-based line.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dataset directory:
///   scene.json                  manifest (rope, physics, splat, cameras, run info)
///   cameras/cam_<k>.txt         12 row-major projection numbers, then "W H"
///   gripper.csv                 t,x,y,z
///   frames/cam_<k>/<t:06>.png   8-bit RGB
///   masks/cam_<k>/<t:06>.png    8-bit gray, 0 or 255
///   truth.csv                   t,node,x,y,z (synthetic data only)
void save_dataset(const fs::path& dir, const Dataset& dataset);
Dataset load_dataset(const fs::path& dir);

/// Standalone scene manifest (cameras inline) used to seed `simulate`.
void save_scene(const fs::path& path, const synth::Scene& scene);
synth::Scene load_scene(const fs::path& path);

void save_camera(const fs::path& path, const CameraModel& camera);
CameraModel load_camera(const fs::path& path);

/// Waypoint CSV with header t,x,y,z.
synth::MotionScript load_script(const fs::path& path);

struct Trajectory {
    std::vector<double> times;
    std::vector<Positions> estimates;
    std::vector<double> losses;
    std::vector<int> iterations;
    std::vector<double> millis;

    eval::TrajectoryView view() const { return {times, estimates, losses, millis}; }
};

/// estimates.csv (t,node,x,y,z) and losses.csv (t,loss,iters,millis).
void save_trajectory(const fs::path& dir, const Trajectory& trajectory);
Trajectory load_trajectory(const fs::path& dir);

/// Per-step CSV plus a JSON summary at <path>.summary.json.
void save_report(const fs::path& path, const eval::Report& report);

/// Node positions in the t,node,x,y,z layout.
void write_node_csv(const fs::path& path, const std::vector<double>& times,
                    const std::vector<Positions>& states);
std::vector<Positions> read_node_csv(const fs::path& path, std::vector<double>* times = nullptr);

void write_frame_png(const fs::path& path, const Frame& frame);
Frame read_frame_png(const fs::path& path);
void write_mask_png(const fs::path& path, const Mask& mask);
Mask read_mask_png(const fs::path& path);

/// 17 significant digits, which reads back to the same double.
std::string format_real(double v);

}  // namespace ropetrack::io
