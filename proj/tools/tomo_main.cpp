// Command-line front end: thin argument parsing over tomo::cmd_* functions.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tomo/commands.hpp"
#include "tomo/io.hpp"

namespace {

struct GlobalOpts {
  std::string config_path;
  bool deterministic = false;
  bool desk_scale = false;
  bool full_scale = false;
  std::optional<std::uint64_t> seed;
};

tomo::RunConfig load_config(const GlobalOpts& g) {
  nlohmann::json j = nlohmann::json::object();
  if (!g.config_path.empty())
    j = nlohmann::json::parse(tomo::io::read_text(g.config_path));
  if (g.desk_scale) j["scale"] = "desk";
  if (g.full_scale) j["scale"] = "full";

  tomo::RunConfig cfg = tomo::parse_run_config(j.dump());
  if (g.seed) cfg.train.seed = *g.seed;
  if (g.deterministic) cfg.deterministic = true;
  return cfg;
}

void add_global_opts(CLI::App* app, GlobalOpts& g) {
  app->add_option("--config", g.config_path, "Run-config JSON file");
  app->add_option("--seed", g.seed, "Override the training seed");
  app->add_flag("--deterministic", g.deterministic,
                "Bit-reproducible outputs (timing fields zeroed)");
  auto* desk = app->add_flag("--desk-scale", g.desk_scale, "Desk-scale preset");
  app->add_flag("--full-scale", g.full_scale, "Full-scale preset")->excludes(desk);
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string tok = csv.substr(pos, comma == std::string::npos ? csv.size() - pos
                                                                       : comma - pos);
    out.push_back(std::stoi(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string> parse_str_list(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    out.push_back(csv.substr(pos, comma == std::string::npos ? csv.size() - pos
                                                             : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-view cone-beam CT reconstruction toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic head phantom");
  std::string phantom_out;
  add_global_opts(phantom, g);
  phantom->add_option("--out", phantom_out, "Output directory")->required();

  // project
  auto* project = app.add_subcommand("project", "Simulate projections of a volume");
  std::string project_volume, project_out;
  add_global_opts(project, g);
  project->add_option("--volume", project_volume, "Volume payload (.f32)")->required();
  project->add_option("--out", project_out, "Output directory")->required();

  // reconstruct
  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct a volume");
  std::string rec_method, rec_proj, rec_truth, rec_out;
  add_global_opts(reconstruct, g);
  reconstruct
      ->add_option("--method", rec_method,
                   "tnt | tnt-const-lambda | tnt-nosup | mlp | mlp-thresh-sup | sart | fdk")
      ->required();
  reconstruct->add_option("--projections", rec_proj, "Projected scene directory")
      ->required();
  reconstruct->add_option("--truth", rec_truth, "Ground-truth volume payload");
  reconstruct->add_option("--out", rec_out, "Output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a reconstruction");
  std::string eval_recon, eval_truth, eval_out;
  add_global_opts(eval, g);
  eval->add_option("--recon", eval_recon, "Reconstructed volume payload")->required();
  eval->add_option("--truth", eval_truth, "Ground-truth volume payload")->required();
  eval->add_option("--out", eval_out, "Report output file")->required();

  // slice
  auto* slice = app.add_subcommand("slice", "Export a 16-bit PGM slice");
  std::string slice_volume, slice_axis = "z", slice_out;
  int slice_index = 0;
  double slice_window = 1.0, slice_level = 0.5;
  add_global_opts(slice, g);
  slice->add_option("--volume", slice_volume, "Volume payload")->required();
  slice->add_option("--axis", slice_axis, "x | y | z");
  slice->add_option("--index", slice_index, "Slice index")->required();
  slice->add_option("--window", slice_window, "Display window width");
  slice->add_option("--level", slice_level, "Display window center");
  slice->add_option("--out", slice_out, "Output .pgm file")->required();

  // matrix
  auto* matrix = app.add_subcommand("matrix", "Run the view-sweep comparison grid");
  std::string mat_views = "10,15,20,30,40,60";
  std::string mat_methods = "tnt,mlp,sart,fdk";
  std::string mat_seeds;
  std::string mat_out;
  add_global_opts(matrix, g);
  matrix->add_option("--views", mat_views, "Comma-separated view counts");
  matrix->add_option("--methods", mat_methods, "Comma-separated method names");
  matrix->add_option("--seeds", mat_seeds, "Comma-separated training seeds");
  matrix->add_option("--out", mat_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const tomo::RunConfig cfg = load_config(g);
    if (phantom->parsed()) {
      tomo::cmd_phantom(cfg, phantom_out);
    } else if (project->parsed()) {
      tomo::cmd_project(cfg, project_volume, project_out);
    } else if (reconstruct->parsed()) {
      std::optional<std::filesystem::path> truth;
      if (!rec_truth.empty()) truth = rec_truth;
      tomo::cmd_reconstruct(cfg, rec_method, rec_proj, truth, rec_out);
    } else if (eval->parsed()) {
      tomo::cmd_eval(eval_recon, eval_truth, eval_out);
    } else if (slice->parsed()) {
      tomo::cmd_slice(slice_volume, slice_axis, slice_index, slice_window, slice_level,
                      slice_out);
    } else if (matrix->parsed()) {
      std::vector<std::uint64_t> seeds;
      if (mat_seeds.empty()) {
        seeds.push_back(load_config(g).train.seed);
      } else {
        for (int s : parse_int_list(mat_seeds)) seeds.push_back(static_cast<std::uint64_t>(s));
      }
      tomo::cmd_matrix(cfg, parse_int_list(mat_views), parse_str_list(mat_methods), seeds,
                       mat_out);
    }
  } catch (const std::exception& e) {
    const nlohmann::json record{{"error", e.what()}, {"command", command}};
    std::cerr << record.dump() << "\n";
    return 1;
  }
  return 0;
}
