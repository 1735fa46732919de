#include "ropetrack/io.hpp"

#include "png_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ropetrack::io {

using nlohmann::json;

namespace {

constexpr const char* kDatasetFormat = "ropetrack-dataset/1";
constexpr const char* kSceneFormat = "ropetrack-scene/1";

[[noreturn]] void fail(const fs::path& path, std::size_t line, const std::string& what) {
    std::ostringstream os;
    os << path.string();
    if (line > 0) os << ":" << line;
    os << ": " << what;
    throw FormatError(os.str());
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const fs::path& path) {
    if (!fs::exists(path)) throw FormatError("missing file " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return in;
}

double parse_real(std::string_view text, const fs::path& path, std::size_t line) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        fail(path, line, "malformed number '" + std::string(text) + "'");
    return v;
}

/// Rows of a CSV with a fixed header; every row must have the header's width.
std::vector<std::vector<double>> read_csv(const fs::path& path, const std::string& header) {
    auto in = open_in(path);
    std::string line;
    std::size_t number = 0;
    if (!std::getline(in, line)) fail(path, 1, "empty file, expected header '" + header + "'");
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) fail(path, 1, "expected header '" + header + "', got '" + line + "'");
    const auto width = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::string_view rest = line;
        while (true) {
            const auto comma = rest.find(',');
            row.push_back(parse_real(rest.substr(0, comma), path, number));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (row.size() != width)
            fail(path, number,
                 "expected " + std::to_string(width) + " fields, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json physics_json(const PhysicsParams& p) {
    return {{"gravity", p.gravity},
            {"friction_coefficient", p.friction_coefficient},
            {"dt", p.dt},
            {"constraint_iterations", p.constraint_iterations},
            {"damping", p.damping},
            {"smoothness", p.smoothness},
            {"reselect_grasp", p.reselect_grasp}};
}

PhysicsParams physics_from(const json& j) {
    PhysicsParams p;
    p.gravity = j.value("gravity", p.gravity);
    p.friction_coefficient = j.value("friction_coefficient", p.friction_coefficient);
    p.dt = j.value("dt", p.dt);
    p.constraint_iterations = j.value("constraint_iterations", p.constraint_iterations);
    p.damping = j.value("damping", p.damping);
    p.smoothness = j.value("smoothness", p.smoothness);
    p.reselect_grasp = j.value("reselect_grasp", p.reselect_grasp);
    return p;
}

json splat_json(const SplatConfig& s) {
    json colors = json::array();
    for (const auto& c : s.colors) colors.push_back(to_json(c));
    return {{"gaussians_per_segment", s.gaussians_per_segment},
            {"rope_diameter", s.rope_diameter},
            {"opacity", s.opacity},
            {"colors", colors}};
}

SplatConfig splat_from(const json& j) {
    SplatConfig s;
    s.gaussians_per_segment = j.value("gaussians_per_segment", s.gaussians_per_segment);
    s.rope_diameter = j.value("rope_diameter", s.rope_diameter);
    s.opacity = j.value("opacity", s.opacity);
    if (j.contains("colors"))
        for (const auto& c : j.at("colors")) s.colors.push_back(vec3_from(c));
    return s;
}

json chain_json(const NodeChain& chain) {
    json nodes = json::array();
    for (const auto& x : chain.positions) nodes.push_back(to_json(x));
    return {{"nodes", chain.size()},
            {"segment_rest_length", chain.segment_rest_length},
            {"node_mass", chain.node_mass},
            {"total_mass", chain.node_mass * static_cast<double>(chain.size())},
            {"initial_chain", nodes}};
}

NodeChain chain_from(const json& j) {
    NodeChain chain;
    chain.segment_rest_length = j.at("segment_rest_length").get<double>();
    chain.node_mass = j.at("node_mass").get<double>();
    for (const auto& x : j.at("initial_chain")) chain.positions.push_back(vec3_from(x));
    if (j.contains("nodes") && j.at("nodes").get<std::size_t>() != chain.size())
        throw FormatError("rope.nodes disagrees with the initial chain length");
    return chain;
}

json read_json(const fs::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

std::string step_name(std::size_t t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06zu.png", t);
    return buf;
}

fs::path camera_file(std::size_t k) { return fs::path("cameras") / ("cam_" + std::to_string(k) + ".txt"); }
fs::path frame_dir(const fs::path& root, const char* kind, std::size_t k) {
    return root / kind / ("cam_" + std::to_string(k));
}

std::size_t count_pngs(const fs::path& dir) {
    if (!fs::is_directory(dir)) return 0;
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ".png";
    return n;
}

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    if (ec != std::errc()) throw std::runtime_error("format_real: conversion failed");
    return std::string(buf, ptr);
}

void save_camera(const fs::path& path, const CameraModel& camera) {
    auto out = open_out(path);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c)
            out << (r + c == 0 ? "" : " ") << format_real(camera.projection(r, c));
    out << "\n" << camera.width << " " << camera.height << "\n";
}

CameraModel load_camera(const fs::path& path) {
    auto in = open_in(path);
    std::vector<std::string> tokens;
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    if (tokens.size() != 14)
        fail(path, 0, "expected 12 projection entries and 'W H', got " +
                          std::to_string(tokens.size()) + " values");
    CameraModel cam;
    for (int i = 0; i < 12; ++i) cam.projection(i / 4, i % 4) = parse_real(tokens[i], path, 1);
    const double w = parse_real(tokens[12], path, 2);
    const double h = parse_real(tokens[13], path, 2);
    if (w != std::floor(w) || h != std::floor(h) || w < 1 || h < 1)
        fail(path, 2, "image size must be positive integers");
    cam.width = static_cast<int>(w);
    cam.height = static_cast<int>(h);
    return cam;
}

void write_frame_png(const fs::path& path, const Frame& frame) {
    detail::RasterImage img;
    img.width = frame.width;
    img.height = frame.height;
    img.channels = 3;
    img.bytes.resize(frame.pixels.size());
    std::transform(frame.pixels.begin(), frame.pixels.end(), img.bytes.begin(), quantize);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    detail::write_png(path, img);
}

Frame read_frame_png(const fs::path& path) {
    if (!fs::exists(path)) throw FormatError("missing file " + path.string());
    const auto img = detail::read_png(path, 3);
    Frame f;
    f.width = img.width;
    f.height = img.height;
    f.pixels.resize(img.bytes.size());
    std::transform(img.bytes.begin(), img.bytes.end(), f.pixels.begin(),
                   [](std::uint8_t b) { return b / 255.0; });
    return f;
}

void write_mask_png(const fs::path& path, const Mask& mask) {
    detail::RasterImage img;
    img.width = mask.width;
    img.height = mask.height;
    img.channels = 1;
    img.bytes.resize(mask.data.size());
    std::transform(mask.data.begin(), mask.data.end(), img.bytes.begin(),
                   [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    detail::write_png(path, img);
}

Mask read_mask_png(const fs::path& path) {
    if (!fs::exists(path)) throw FormatError("missing file " + path.string());
    const auto img = detail::read_png(path, 1);
    Mask m(img.width, img.height);
    std::transform(img.bytes.begin(), img.bytes.end(), m.data.begin(),
                   [](std::uint8_t b) -> std::uint8_t { return b >= 128; });
    return m;
}

void write_node_csv(const fs::path& path, const std::vector<double>& times,
                    const std::vector<Positions>& states) {
    if (times.size() != states.size())
        throw std::invalid_argument("write_node_csv: times and states misaligned");
    auto out = open_out(path);
    out << "t,node,x,y,z\n";
    for (std::size_t t = 0; t < states.size(); ++t)
        for (std::size_t i = 0; i < states[t].size(); ++i)
            out << format_real(times[t]) << ',' << i << ',' << format_real(states[t][i].x()) << ','
                << format_real(states[t][i].y()) << ',' << format_real(states[t][i].z()) << '\n';
}

std::vector<Positions> read_node_csv(const fs::path& path, std::vector<double>* times) {
    const auto rows = read_csv(path, "t,node,x,y,z");
    std::vector<Positions> states;
    std::vector<double> ts;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const double node = row[1];
        if (node < 0 || node != std::floor(node))
            fail(path, r + 2, "node index must be a non-negative integer");
        const auto i = static_cast<std::size_t>(node);
        if (i == 0) {
            if (!ts.empty() && !(row[0] > ts.back()))
                fail(path, r + 2, "timestamps must be strictly increasing");
            ts.push_back(row[0]);
            states.emplace_back();
        } else if (states.empty() || row[0] != ts.back() || i != states.back().size()) {
            fail(path, r + 2, "rows must list nodes 0..N-1 in order for each time");
        }
        states.back().emplace_back(row[2], row[3], row[4]);
    }
    for (std::size_t t = 1; t < states.size(); ++t)
        if (states[t].size() != states[0].size())
            fail(path, 0, "time " + format_real(ts[t]) + " has " +
                              std::to_string(states[t].size()) + " nodes, expected " +
                              std::to_string(states[0].size()));
    if (times) *times = std::move(ts);
    return states;
}

void save_dataset(const fs::path& dir, const Dataset& d) {
    fs::create_directories(dir);
    if (d.frames.size() != d.gripper.size())
        throw std::invalid_argument("save_dataset: " + std::to_string(d.frames.size()) +
                                    " frame steps but " + std::to_string(d.gripper.size()) +
                                    " gripper rows");

    json cameras = json::array();
    for (std::size_t k = 0; k < d.cameras.size(); ++k) {
        save_camera(dir / camera_file(k), d.cameras[k]);
        cameras.push_back({{"file", camera_file(k).generic_string()},
                           {"background", to_json(d.cameras[k].background)}});
    }
    json manifest = {{"format", kDatasetFormat},
                     {"rope", chain_json(d.initial_chain)},
                     {"rope_diameter", d.splat.rope_diameter},
                     {"physics", physics_json(d.physics)},
                     {"splat", splat_json(d.splat)},
                     {"cameras", cameras},
                     {"steps", d.steps()},
                     {"script", d.script_name},
                     {"noise_std", d.noise_std},
                     {"seed", d.seed},
                     {"substeps", d.substeps},
                     {"has_truth", !d.truth.empty()}};
    manifest["grasp_hint"] = d.grasp_hint ? json(*d.grasp_hint) : json(nullptr);
    write_json(dir / "scene.json", manifest);

    {
        auto out = open_out(dir / "gripper.csv");
        out << "t,x,y,z\n";
        for (const auto& s : d.gripper.samples)
            out << format_real(s.time) << ',' << format_real(s.position.x()) << ','
                << format_real(s.position.y()) << ',' << format_real(s.position.z()) << '\n';
    }
    for (std::size_t t = 0; t < d.frames.size(); ++t) {
        for (std::size_t k = 0; k < d.frames[t].size(); ++k)
            write_frame_png(frame_dir(dir, "frames", k) / step_name(t), d.frames[t][k]);
        if (t < d.masks.size())
            for (std::size_t k = 0; k < d.masks[t].size(); ++k)
                write_mask_png(frame_dir(dir, "masks", k) / step_name(t), d.masks[t][k]);
    }
    if (!d.truth.empty()) {
        std::vector<double> times;
        for (const auto& s : d.gripper.samples) times.push_back(s.time);
        write_node_csv(dir / "truth.csv", times, d.truth);
    }
}

Dataset load_dataset(const fs::path& dir) {
    const fs::path manifest_path = dir / "scene.json";
    const json m = read_json(manifest_path);
    if (m.value("format", std::string()) != kDatasetFormat)
        fail(manifest_path, 0, "unsupported format '" + m.value("format", std::string()) + "'");

    Dataset d;
    try {
        d.initial_chain = chain_from(m.at("rope"));
        d.physics = physics_from(m.at("physics"));
        d.splat = splat_from(m.at("splat"));
        d.script_name = m.value("script", std::string());
        d.noise_std = m.value("noise_std", 0.0);
        d.seed = m.value("seed", std::uint64_t{0});
        d.substeps = m.value("substeps", 0);
        if (m.contains("grasp_hint") && !m.at("grasp_hint").is_null())
            d.grasp_hint = m.at("grasp_hint").get<std::size_t>();
        for (const auto& c : m.at("cameras")) {
            CameraModel cam = load_camera(dir / c.at("file").get<std::string>());
            cam.background = vec3_from(c.at("background"));
            d.cameras.push_back(cam);
        }
    } catch (const json::exception& e) {
        fail(manifest_path, 0, e.what());
    }
    if (auto issues = check(d.initial_chain); !issues.empty())
        fail(manifest_path, 0, ValidationError(issues).what());
    for (std::size_t k = 0; k < d.cameras.size(); ++k)
        if (auto issues = check(d.cameras[k], static_cast<int>(k)); !issues.empty())
            fail(manifest_path, 0, ValidationError(issues).what());

    const fs::path gripper_path = dir / "gripper.csv";
    const auto rows = read_csv(gripper_path, "t,x,y,z");
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r > 0 && !(rows[r][0] > rows[r - 1][0]))
            fail(gripper_path, r + 2, "timestamps must be strictly increasing");
        d.gripper.samples.push_back({rows[r][0], Vec3(rows[r][1], rows[r][2], rows[r][3])});
    }
    const std::size_t steps = d.gripper.size();

    for (std::size_t k = 0; k < d.cameras.size(); ++k) {
        const auto fdir = frame_dir(dir, "frames", k);
        const std::size_t n = count_pngs(fdir);
        if (n != steps)
            throw FormatError(fdir.string() + ": " + std::to_string(n) + " frames but " +
                              std::to_string(steps) + " gripper rows in " + gripper_path.string());
    }
    const bool has_masks = fs::is_directory(dir / "masks");
    d.frames.resize(steps);
    if (has_masks) d.masks.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t k = 0; k < d.cameras.size(); ++k) {
            const auto path = frame_dir(dir, "frames", k) / step_name(t);
            Frame f = read_frame_png(path);
            if (f.width != d.cameras[k].width || f.height != d.cameras[k].height)
                throw FormatError(path.string() + ": size " + std::to_string(f.width) + "x" +
                                  std::to_string(f.height) + " does not match camera " +
                                  std::to_string(k) + " (" + std::to_string(d.cameras[k].width) +
                                  "x" + std::to_string(d.cameras[k].height) + ")");
            f.camera_index = static_cast<int>(k);
            f.timestamp = d.gripper.samples[t].time;
            d.frames[t].push_back(std::move(f));
            if (has_masks) {
                const auto mpath = frame_dir(dir, "masks", k) / step_name(t);
                Mask mask = read_mask_png(mpath);
                if (mask.width != d.cameras[k].width || mask.height != d.cameras[k].height)
                    throw FormatError(mpath.string() + ": mask size does not match camera " +
                                      std::to_string(k));
                d.masks[t].push_back(std::move(mask));
            }
        }
    }

    if (fs::exists(dir / "truth.csv")) {
        std::vector<double> times;
        d.truth = read_node_csv(dir / "truth.csv", &times);
        if (d.truth.size() != steps)
            throw FormatError((dir / "truth.csv").string() + ": " +
                              std::to_string(d.truth.size()) + " steps but " +
                              std::to_string(steps) + " gripper rows");
        if (!d.truth.empty() && d.truth[0].size() != d.initial_chain.size())
            throw FormatError((dir / "truth.csv").string() + ": node count " +
                              std::to_string(d.truth[0].size()) + " does not match the rope (" +
                              std::to_string(d.initial_chain.size()) + ")");
    }
    return d;
}

void save_scene(const fs::path& path, const synth::Scene& scene) {
    json cameras = json::array();
    for (const auto& c : scene.cameras) {
        json p = json::array();
        for (int r = 0; r < 3; ++r)
            for (int col = 0; col < 4; ++col) p.push_back(c.projection(r, col));
        cameras.push_back({{"projection", p},
                           {"width", c.width},
                           {"height", c.height},
                           {"background", to_json(c.background)}});
    }
    write_json(path, {{"format", kSceneFormat},
                      {"rope", chain_json(scene.chain0)},
                      {"physics", physics_json(scene.physics)},
                      {"splat", splat_json(scene.splat)},
                      {"cameras", cameras}});
}

synth::Scene load_scene(const fs::path& path) {
    const json m = read_json(path);
    synth::Scene scene;
    try {
        scene.chain0 = chain_from(m.at("rope"));
        scene.physics = physics_from(m.at("physics"));
        scene.splat = splat_from(m.at("splat"));
        for (const auto& c : m.at("cameras")) {
            CameraModel cam;
            if (c.contains("file")) {
                cam = load_camera(path.parent_path() / c.at("file").get<std::string>());
            } else {
                const auto& p = c.at("projection");
                if (p.size() != 12) fail(path, 0, "camera projection needs 12 entries");
                for (int i = 0; i < 12; ++i) cam.projection(i / 4, i % 4) = p[i].get<double>();
                cam.width = c.at("width").get<int>();
                cam.height = c.at("height").get<int>();
            }
            cam.background = vec3_from(c.at("background"));
            scene.cameras.push_back(cam);
        }
    } catch (const json::exception& e) {
        fail(path, 0, e.what());
    }
    std::vector<std::string> issues = check(scene.chain0);
    for (std::size_t k = 0; k < scene.cameras.size(); ++k) {
        auto c = check(scene.cameras[k], static_cast<int>(k));
        issues.insert(issues.end(), c.begin(), c.end());
    }
    auto p = check(scene.physics);
    issues.insert(issues.end(), p.begin(), p.end());
    auto s = check(scene.splat);
    issues.insert(issues.end(), s.begin(), s.end());
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return scene;
}

synth::MotionScript load_script(const fs::path& path) {
    const auto rows = read_csv(path, "t,x,y,z");
    synth::MotionScript script;
    script.name = path.stem().string();
    for (const auto& r : rows) script.waypoints.push_back({r[0], Vec3(r[1], r[2], r[3])});
    if (auto issues = synth::check(script); !issues.empty()) fail(path, 0, issues.front());
    return script;
}

void save_trajectory(const fs::path& dir, const Trajectory& traj) {
    write_node_csv(dir / "estimates.csv", traj.times, traj.estimates);
    auto out = open_out(dir / "losses.csv");
    out << "t,loss,iters,millis\n";
    for (std::size_t t = 0; t < traj.times.size(); ++t) {
        out << format_real(traj.times[t]) << ','
            << format_real(t < traj.losses.size() ? traj.losses[t] : 0.0) << ','
            << (t < traj.iterations.size() ? traj.iterations[t] : 0) << ','
            << format_real(t < traj.millis.size() ? traj.millis[t] : 0.0) << '\n';
    }
}

Trajectory load_trajectory(const fs::path& dir) {
    Trajectory traj;
    traj.estimates = read_node_csv(dir / "estimates.csv", &traj.times);
    const fs::path losses_path = dir / "losses.csv";
    const auto rows = read_csv(losses_path, "t,loss,iters,millis");
    if (rows.size() != traj.times.size())
        throw FormatError(losses_path.string() + ": " + std::to_string(rows.size()) +
                          " rows but " + std::to_string(traj.times.size()) + " estimate steps");
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r][0] != traj.times[r])
            fail(losses_path, r + 2, "time does not match estimates.csv");
        traj.losses.push_back(rows[r][1]);
        traj.iterations.push_back(static_cast<int>(rows[r][2]));
        traj.millis.push_back(rows[r][3]);
    }
    return traj;
}

void save_report(const fs::path& path, const eval::Report& report) {
    {
        auto out = open_out(path);
        out << "t,mean_error,tip_error,max_length_violation,mean_length_violation,loss,millis\n";
        for (const auto& r : report.rows)
            out << format_real(r.time) << ',' << format_real(r.mean_error) << ','
                << format_real(r.tip_error) << ',' << format_real(r.max_length_violation) << ','
                << format_real(r.mean_length_violation) << ',' << format_real(r.loss) << ','
                << format_real(r.millis) << '\n';
    }
    const auto& s = report.summary;
    json j = {{"steps", s.steps},
              {"mean_error", s.mean_error},
              {"max_error", s.max_error},
              {"mean_tip_error", s.mean_tip_error},
              {"max_tip_error", s.max_tip_error},
              {"max_length_violation", s.max_length_violation},
              {"steps_per_second", s.steps_per_second}};
    if (s.baseline_mean_error) j["baseline_mean_error"] = *s.baseline_mean_error;
    if (s.error_ratio) j["error_ratio"] = *s.error_ratio;
    if (s.error_reduction) j["error_reduction"] = *s.error_reduction;
    write_json(fs::path(path.string() + ".summary.json"), j);
}

}  // namespace ropetrack::io
