#include "tomo/commands.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tomo/io.hpp"
#include "tomo/metrics.hpp"

namespace tomo {

namespace {

using nlohmann::json;

// Ground-truth simulation oversamples the reconstruction quadrature to avoid
// an exact inverse crime.
constexpr int kSimulationOversampling = 2;

json psnr_to_json(const PsnrResult& p) {
  json j;
  j["identical"] = p.identical;
  j["psnr_db"] = p.identical ? json(nullptr) : json(*p.db);
  return j;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

Scene load_scene(const RunConfig& config, const std::filesystem::path& projections_dir,
                 const std::optional<std::filesystem::path>& truth_payload,
                 bool needs_supervision) {
  Scene scene;
  scene.sigma_stack = io::read_stack(projections_dir / "sigma.f32");
  const auto alpha_path = projections_dir / "alpha.f32";
  const auto beta_path = projections_dir / "beta.f32";
  if (std::filesystem::exists(alpha_path) && std::filesystem::exists(beta_path)) {
    scene.alpha_stack = io::read_stack(alpha_path);
    scene.beta_stack = io::read_stack(beta_path);
  } else if (needs_supervision) {
    throw std::invalid_argument("reconstruct: mode needs alpha.f32/beta.f32 targets in " +
                                projections_dir.string());
  }
  if (truth_payload) {
    scene.ground_truth = io::read_volume(*truth_payload);
    scene.recon_extent = scene.ground_truth.extent;
  } else {
    scene.recon_extent = config.recon_extent();
  }
  return scene;
}

void write_run_summary(const std::filesystem::path& out_dir, const std::string& method,
                       int views, std::uint64_t seed, int iterations, double seconds,
                       bool deterministic, const std::string& status) {
  json j{{"method", method},     {"views", views},
         {"seed", seed},         {"iterations", iterations},
         {"seconds", deterministic ? 0.0 : seconds},
         {"status", status},     {"version", 1}};
  io::write_text_atomic(out_dir / "run.json", j.dump(2) + "\n");
}

}  // namespace

void cmd_phantom(const RunConfig& config, const std::filesystem::path& out_dir) {
  config.phantom.validate();
  std::filesystem::create_directories(out_dir);
  const auto [volume, masks] = generate_head_phantom(config.phantom);
  io::write_volume(out_dir / "volume.f32", volume, "volume");
  io::write_volume(out_dir / "alpha_mask.f32", masks.alpha, "alpha");
  io::write_volume(out_dir / "beta_mask.f32", masks.beta, "beta");
}

void cmd_project(const RunConfig& config, const std::filesystem::path& volume_payload,
                 const std::filesystem::path& out_dir) {
  const Volume volume = io::read_volume(volume_payload);
  const ScannerGeometry geom = config.geometry_with_trajectory();
  const int n_samples = kSimulationOversampling * config.train.n_samples;

  std::filesystem::create_directories(out_dir);
  io::write_stack(out_dir / "sigma.f32", project_volume(volume, geom, n_samples));

  const TissueMasks masks =
      threshold_masks(volume, config.train.t_alpha, config.train.t_beta);
  const auto [alpha, beta] = project_masks(masks, geom, n_samples);
  io::write_stack(out_dir / "alpha.f32", alpha);
  io::write_stack(out_dir / "beta.f32", beta);
}

void cmd_reconstruct(const RunConfig& config, const std::string& method,
                     const std::filesystem::path& projections_dir,
                     const std::optional<std::filesystem::path>& truth_payload,
                     const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Timer timer;

  if (method == "sart" || method == "fdk") {
    const Scene scene = load_scene(config, projections_dir, truth_payload, false);
    const Volume recon = method == "sart"
                             ? sart(scene.sigma_stack, scene.recon_extent, config.sart)
                             : fdk(scene.sigma_stack, scene.recon_extent, config.fdk);
    io::write_volume(out_dir / "recon.f32", recon, "volume");
    write_run_summary(out_dir, method, scene.sigma_stack.geom.n_views(), 0,
                      method == "sart" ? config.sart.n_iterations : 0, timer.seconds(),
                      config.deterministic, "ok");
    return;
  }

  TrainConfig train_cfg = config.train;
  train_cfg.mode = train_mode_from_string(method);
  if (!truth_payload)
    throw std::invalid_argument("reconstruct: neural methods need --truth for the log");
  const Scene scene = load_scene(config, projections_dir, truth_payload,
                                 mode_uses_tissue_supervision(train_cfg.mode));

  try {
    TrainResult result = train(scene, train_cfg);
    const Volume recon = std::visit(
        [&](const auto& f) { return extract_volume(f, scene.recon_extent); }, result.field);
    io::write_volume(out_dir / "recon.f32", recon, "volume");
    io::write_checkpoint(out_dir / "checkpoint.ckpt", result.field);
    io::write_train_log(out_dir / "log.jsonl", result.log, !config.deterministic);
    write_run_summary(out_dir, method, scene.sigma_stack.geom.n_views(), train_cfg.seed,
                      train_cfg.total_iterations, timer.seconds(), config.deterministic,
                      "ok");
  } catch (const TrainingDiverged& d) {
    io::write_checkpoint(out_dir / "checkpoint.ckpt", d.last_field);
    io::write_train_log(out_dir / "log.jsonl", d.log, !config.deterministic);
    write_run_summary(out_dir, method, scene.sigma_stack.geom.n_views(), train_cfg.seed,
                      d.at_iteration, timer.seconds(), config.deterministic, "diverged");
    throw;
  }
}

void cmd_eval(const std::filesystem::path& recon_payload,
              const std::filesystem::path& truth_payload,
              const std::filesystem::path& out_file) {
  const Volume recon = io::read_volume(recon_payload);
  const Volume truth = io::read_volume(truth_payload);

  EvalReport report;
  report.method = "unknown";
  const auto summary_path = recon_payload.parent_path() / "run.json";
  if (std::filesystem::exists(summary_path)) {
    const json run = json::parse(io::read_text(summary_path));
    report.method = run.value("method", "unknown");
    report.view_count = run.value("views", 0);
    report.seed = run.value("seed", std::uint64_t{0});
    report.seconds = run.value("seconds", 0.0);
    report.iterations = run.value("iterations", 0);
  }
  report.psnr = psnr(recon, truth, 1.0);
  report.ssim = ssim(recon, truth, 1.0);

  json j = psnr_to_json(report.psnr);
  j["method"] = report.method;
  j["views"] = report.view_count;
  j["seed"] = report.seed;
  j["ssim"] = report.ssim;
  j["seconds"] = report.seconds;
  j["iterations"] = report.iterations;
  j["version"] = 1;
  if (out_file.has_parent_path()) std::filesystem::create_directories(out_file.parent_path());
  io::write_text_atomic(out_file, j.dump(2) + "\n");
}

void cmd_slice(const std::filesystem::path& volume_payload, const std::string& axis,
               int index, double window, double level,
               const std::filesystem::path& out_file) {
  const Volume vol = io::read_volume(volume_payload);
  const VolumeExtent& e = vol.extent;

  int rows = 0, cols = 0;
  if (axis == "z") {
    rows = e.ny;
    cols = e.nx;
    if (index < 0 || index >= e.nz) throw std::invalid_argument("slice: index out of range");
  } else if (axis == "y") {
    rows = e.nz;
    cols = e.nx;
    if (index < 0 || index >= e.ny) throw std::invalid_argument("slice: index out of range");
  } else if (axis == "x") {
    rows = e.nz;
    cols = e.ny;
    if (index < 0 || index >= e.nx) throw std::invalid_argument("slice: index out of range");
  } else {
    throw std::invalid_argument("slice: axis must be x, y or z");
  }

  std::vector<float> image(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      float v = 0.0f;
      if (axis == "z")
        v = vol.at(c, r, index);
      else if (axis == "y")
        v = vol.at(c, index, r);
      else
        v = vol.at(index, c, r);
      image[static_cast<std::size_t>(r) * cols + c] = v;
    }

  if (out_file.has_parent_path()) std::filesystem::create_directories(out_file.parent_path());
  io::write_pgm16(out_file, image, rows, cols, io::SliceMeta{axis, index, window, level});
}

void cmd_matrix(const RunConfig& config, const std::vector<int>& view_counts,
                const std::vector<std::string>& methods,
                const std::vector<std::uint64_t>& seeds,
                const std::filesystem::path& out_dir) {
  if (view_counts.empty()) throw std::invalid_argument("matrix: no view counts");
  if (methods.empty()) throw std::invalid_argument("matrix: no methods");
  if (seeds.empty()) throw std::invalid_argument("matrix: no seeds");

  std::filesystem::create_directories(out_dir);
  const auto phantom_dir = out_dir / "phantom";
  cmd_phantom(config, phantom_dir);
  const auto truth_path = phantom_dir / "volume.f32";

  json rows = json::array();
  for (int views : view_counts) {
    RunConfig view_cfg = config;
    view_cfg.n_views = views;
    const auto proj_dir = out_dir / ("proj_" + std::to_string(views) + "v");
    cmd_project(view_cfg, truth_path, proj_dir);

    for (const std::string& method : methods) {
      const bool classical = method == "sart" || method == "fdk";
      const std::vector<std::uint64_t> run_seeds =
          classical ? std::vector<std::uint64_t>{0} : seeds;
      for (std::uint64_t seed : run_seeds) {
        RunConfig run_cfg = view_cfg;
        run_cfg.train.seed = seed;
        std::ostringstream cell_name;
        cell_name << method << "_" << views << "v_s" << seed;
        const auto cell_dir = out_dir / "cells" / cell_name.str();
        cmd_reconstruct(run_cfg, method, proj_dir, truth_path, cell_dir);
        cmd_eval(cell_dir / "recon.f32", truth_path, cell_dir / "report.json");
        json row = json::parse(io::read_text(cell_dir / "report.json"));
        rows.push_back(row);
      }
    }
  }

  json table{{"config", json::parse(to_json_text(config))},
             {"views", view_counts},
             {"methods", methods},
             {"seeds", seeds},
             {"rows", rows},
             {"version", 1}};
  io::write_text_atomic(out_dir / "matrix.json", table.dump(2) + "\n");

  // companion plain-text table
  std::ostringstream txt;
  txt << "method            views  seed  psnr_db   ssim\n";
  for (const json& row : rows) {
    char line[128];
    const double db = row["psnr_db"].is_null() ? std::numeric_limits<double>::infinity()
                                               : row["psnr_db"].get<double>();
    std::snprintf(line, sizeof(line), "%-16s %6d %5llu  %7.2f  %6.4f\n",
                  row["method"].get<std::string>().c_str(), row["views"].get<int>(),
                  static_cast<unsigned long long>(row["seed"].get<std::uint64_t>()), db,
                  row["ssim"].get<double>());
    txt << line;
  }
  io::write_text_atomic(out_dir / "matrix.txt", txt.str());
}

}  // namespace tomo
