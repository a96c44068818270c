// gncpose command-line front end: solve, synth-bench, sweep, weights, scene.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gncpose/gncpose.hpp"

namespace {

using namespace gncpose;

struct SceneFlags {
  int n_points = 100;
  double extent = 0.2;
  std::string model;
  double z_min = 0.5;
  double z_max = 1.0;
  double pixel_noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  OutlierModel outlier_model = OutlierModel::UniformPixel;
  double pattern_period = 0.008;
  SwapPairing swap_pairing = SwapPairing::Random;
  OutlierTarget outlier_target = OutlierTarget::Any;
  int n_clusters = 0;
  double cluster_radius = 0.01;
  double background_fraction = 0.1;
  CameraIntrinsics intrinsics;
};

const std::map<std::string, OutlierModel> kOutlierModels{{"uniform-pixel", OutlierModel::UniformPixel},
                                                         {"wrong-association", OutlierModel::WrongAssociation},
                                                         {"repeated-pattern", OutlierModel::RepeatedPattern}};
const std::map<std::string, SwapPairing> kSwapPairings{{"random", SwapPairing::Random},
                                                       {"nearest", SwapPairing::Nearest}};
const std::map<std::string, OutlierTarget> kOutlierTargets{{"any", OutlierTarget::Any},
                                                           {"background", OutlierTarget::Background}};
const std::map<std::string, MinimalSolver> kSolvers{{"p3p", MinimalSolver::P3P}, {"dlt", MinimalSolver::DLT}};
const std::map<std::string, Arm> kArms{{"full", Arm::Full},
                                       {"no-geom-weights", Arm::NoGeomWeights},
                                       {"no-gnc", Arm::NoGnc},
                                       {"ransac-only", Arm::RansacOnly}};

void add_gnc_flags(CLI::App* app, GncConfig& g) {
  app->add_option("--kappa", g.kappa, "mu_0 = kappa * median(r) + epsilon")->capture_default_str();
  app->add_option("--epsilon", g.epsilon, "mu_0 floor offset, squared pixels")->capture_default_str();
  app->add_option("--gamma", g.gamma, "anneal factor in (0, 1)")->capture_default_str();
  app->add_option("--mu-final", g.mu_final, "terminal mu, squared pixels")->capture_default_str();
  app->add_option("--tau-gnc", g.tau_gnc, "GNC score threshold")->capture_default_str();
  app->add_option("--tau-geom", g.tau_geom, "geometry weight threshold")->capture_default_str();
  app->add_option("--min-inliers", g.min_inliers)->capture_default_str();
  app->add_option("--max-iterations", g.max_iterations, "outer GNC iterations")->capture_default_str();
  app->add_option("--inner-max-iterations", g.inner_max_iterations)->capture_default_str();
  app->add_option("--inner-tolerance", g.inner_tolerance)->capture_default_str();
}

void add_ransac_flags(CLI::App* app, RansacConfig& r) {
  app->add_option("--ransac-max-iterations", r.max_iterations)->capture_default_str();
  app->add_option("--inlier-threshold", r.inlier_threshold, "pixels, unsquared")->capture_default_str();
  app->add_option("--solver", r.solver, "minimal solver")
      ->transform(CLI::CheckedTransformer(kSolvers, CLI::ignore_case))
      ->capture_default_str();
  app->add_option("--sample-size", r.sample_size)->capture_default_str();
  app->add_option("--confidence", r.confidence)->capture_default_str();
  app->add_option("--refit-rounds", r.refit_rounds)->capture_default_str();
}

void add_voxel_flags(CLI::App* app, VoxelGridConfig& v) {
  app->add_option("--voxel-size", v.voxel_size, "meters")->capture_default_str();
  app->add_option("--w-min", v.w_min)->capture_default_str();
}

void add_intrinsics_flags(CLI::App* app, CameraIntrinsics& k) {
  app->add_option("--fx", k.fx)->capture_default_str();
  app->add_option("--fy", k.fy)->capture_default_str();
  app->add_option("--cx", k.cx)->capture_default_str();
  app->add_option("--cy", k.cy)->capture_default_str();
  app->add_option("--width", k.image_width)->capture_default_str();
  app->add_option("--height", k.image_height)->capture_default_str();
}

void add_scene_flags(CLI::App* app, SceneFlags& s) {
  app->add_option("--n-points", s.n_points)->capture_default_str();
  app->add_option("--extent", s.extent, "uniform box edge, meters")->capture_default_str();
  app->add_option("--model", s.model, "sample scene points from this PLY/CSV model instead of a box");
  app->add_option("--z-min", s.z_min)->capture_default_str();
  app->add_option("--z-max", s.z_max)->capture_default_str();
  app->add_option("--pixel-noise-sigma", s.pixel_noise_sigma)->capture_default_str();
  app->add_option("--outlier-fraction", s.outlier_fraction)->capture_default_str();
  app->add_option("--outlier-model", s.outlier_model)
      ->transform(CLI::CheckedTransformer(kOutlierModels, CLI::ignore_case))
      ->capture_default_str();
  app->add_option("--pattern-period", s.pattern_period, "meters, repeated-pattern outliers")->capture_default_str();
  app->add_option("--swap-pairing", s.swap_pairing, "wrong-association partner choice")
      ->transform(CLI::CheckedTransformer(kSwapPairings, CLI::ignore_case))
      ->capture_default_str();
  app->add_option("--outlier-target", s.outlier_target)
      ->transform(CLI::CheckedTransformer(kOutlierTargets, CLI::ignore_case))
      ->capture_default_str();
  app->add_option("--n-clusters", s.n_clusters, "0 disables clustered structure")->capture_default_str();
  app->add_option("--cluster-radius", s.cluster_radius)->capture_default_str();
  app->add_option("--background-fraction", s.background_fraction)->capture_default_str();
  add_intrinsics_flags(app, s.intrinsics);
}

SceneConfig to_scene(const SceneFlags& s) {
  SceneConfig c;
  c.n_points = s.n_points;
  if (s.model.empty()) {
    c.point_source = UniformBox{s.extent};
  } else {
    c.point_source = LoadedModel{load_model_points(s.model)};
  }
  c.z_min = s.z_min;
  c.z_max = s.z_max;
  c.pixel_noise_sigma = s.pixel_noise_sigma;
  c.outlier_fraction = s.outlier_fraction;
  c.outlier_model = s.outlier_model;
  c.pattern_period = s.pattern_period;
  c.swap_pairing = s.swap_pairing;
  c.outlier_target = s.outlier_target;
  if (s.n_clusters > 0) c.cluster_spec = ClusterSpec{s.n_clusters, s.cluster_radius, s.background_fraction};
  c.intrinsics = s.intrinsics;
  return c;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::InvalidConfig, "cannot write " + path);
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) fail(ErrorKind::InvalidConfig, "bad grid value \"" + item + "\"");
    out.push_back(v);
  }
  if (out.empty()) fail(ErrorKind::InvalidConfig, "outlier fraction grid is empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-aware GNC-PnP pose estimation toolkit"};
  app.require_subcommand(1);

  GncConfig gnc;
  RansacConfig ransac;
  VoxelGridConfig voxel;
  SceneFlags scene;
  Arm mode = Arm::Full;
  std::uint64_t seed = 0;
  int trials = 1;
  std::string input, model, output, summary, timing, arms_text = "full,no-geom-weights", grid_text = "0,0.1,0.2,0.3,0.4,0.5,0.6";
  std::vector<std::string> inputs;
  bool strict = false;

  auto* solve = app.add_subcommand("solve", "estimate a pose from a correspondence JSON file, print pose JSON");
  solve->add_option("--input", input, "correspondence JSON")->required()->check(CLI::ExistingFile);
  solve->add_option("--mode", mode)->transform(CLI::CheckedTransformer(kArms, CLI::ignore_case))->capture_default_str();
  solve->add_option("--seed", seed, "RANSAC seed")->capture_default_str();
  solve->add_option("--output", output, "write pose JSON here instead of stdout");
  add_gnc_flags(solve, gnc);
  add_ransac_flags(solve, ransac);
  add_voxel_flags(solve, voxel);

  auto* bench = app.add_subcommand("synth-bench", "run one arm over seeded trials; summary CSV on stdout");
  bench->add_option("--mode", mode)->transform(CLI::CheckedTransformer(kArms, CLI::ignore_case))->capture_default_str();
  bench->add_option("--trials", trials)->capture_default_str();
  bench->add_option("--base-seed", seed)->capture_default_str();
  bench->add_option("--input", inputs, "correspondence JSON files instead of synthetic scenes")->check(CLI::ExistingFile);
  bench->add_option("--eval-model", model, "model points for ADD with --input");
  bench->add_option("--output", output, "per-trial CSV");
  bench->add_option("--summary", summary, "summary CSV (default stdout)");
  bench->add_option("--timing", timing, "per-trial wall time CSV");
  bench->add_flag("--strict", strict, "exit 1 if any trial failed");
  add_scene_flags(bench, scene);
  add_gnc_flags(bench, gnc);
  add_ransac_flags(bench, ransac);
  add_voxel_flags(bench, voxel);

  auto* sweep = app.add_subcommand("sweep", "summary rows over an outlier-fraction grid for several arms");
  sweep->add_option("--arms", arms_text, "comma-separated arms")->capture_default_str();
  sweep->add_option("--grid", grid_text, "comma-separated outlier fractions")->capture_default_str();
  sweep->add_option("--trials", trials)->capture_default_str();
  sweep->add_option("--base-seed", seed)->capture_default_str();
  sweep->add_option("--output", output, "summary CSV (default stdout)");
  sweep->add_flag("--strict", strict, "exit 1 if any trial failed");
  add_scene_flags(sweep, scene);
  add_gnc_flags(sweep, gnc);
  add_ransac_flags(sweep, ransac);
  add_voxel_flags(sweep, voxel);

  auto* weights = app.add_subcommand("weights", "dump voxel-support geometry weights for a correspondence file");
  weights->add_option("--input", input, "correspondence JSON")->required()->check(CLI::ExistingFile);
  weights->add_option("--output", output, "CSV (default stdout)");
  add_voxel_flags(weights, voxel);

  auto* export_scene = app.add_subcommand("scene", "write one synthetic scene as correspondence JSON with truth");
  export_scene->add_option("--seed", seed)->capture_default_str();
  export_scene->add_option("--output", output, "JSON (default stdout)");
  add_scene_flags(export_scene, scene);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      const CorrespondenceFile file = load_correspondences(input);
      ExperimentSpec spec;
      spec.mode = mode;
      spec.gnc = gnc;
      spec.ransac = ransac;
      spec.voxel = voxel;
      spec.input_paths = {input};
      spec.base_seed = seed;
      validate(spec);
      const TrialResult r = run_trial(spec, 0);
      if (!r.ok) fail(ErrorKind::NumericalFailure, "solve failed: " + r.error);
      json out = pose_to_json(r.pose);
      out["converged"] = r.converged;
      out["n_inliers"] = r.n_inliers;
      if (r.has_truth) {
        out["rotation_error_deg"] = r.rotation_error_deg;
        out["translation_error_m"] = r.translation_error_m;
      }
      const std::string text = out.dump(2) + "\n";
      if (output.empty()) {
        std::cout << text;
      } else {
        open_out(output) << text;
      }
      return 0;
    }

    if (*bench) {
      ExperimentSpec spec;
      spec.mode = mode;
      spec.scene = to_scene(scene);
      spec.input_paths = inputs;
      spec.model_path = model;
      spec.trials = trials;
      spec.base_seed = seed;
      spec.gnc = gnc;
      spec.ransac = ransac;
      spec.voxel = voxel;
      const ExperimentResult result = run_experiment(spec);
      if (!output.empty()) {
        auto out = open_out(output);
        write_trial_csv(out, result.trials);
      }
      if (!timing.empty()) {
        auto out = open_out(timing);
        write_timing_csv(out, result.trials);
      }
      if (summary.empty()) {
        write_summary_csv(std::cout, {result.summary});
      } else {
        auto out = open_out(summary);
        write_summary_csv(out, {result.summary});
      }
      return strict && result.summary.failed > 0 ? 1 : 0;
    }

    if (*sweep) {
      std::vector<Arm> arms;
      std::stringstream ss(arms_text);
      for (std::string item; std::getline(ss, item, ',');) arms.push_back(parse_arm(item));
      ExperimentSpec spec;
      spec.scene = to_scene(scene);
      spec.trials = trials;
      spec.base_seed = seed;
      spec.gnc = gnc;
      spec.ransac = ransac;
      spec.voxel = voxel;
      const SweepResult result = emit_sweep(spec, arms, parse_grid(grid_text));
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      if (output.empty()) {
        write_summary_csv(std::cout, result.rows);
      } else {
        auto out = open_out(output);
        write_summary_csv(out, result.rows);
      }
      const bool any_failed = std::any_of(result.rows.begin(), result.rows.end(),
                                          [](const ExperimentSummary& s) { return s.failed > 0; });
      return strict && any_failed ? 1 : 0;
    }

    if (*weights) {
      const CorrespondenceFile file = load_correspondences(input);
      const GeometryWeights w = compute_weights(file.correspondences, voxel);
      std::ostringstream os;
      os << "index,support,weight\n";
      for (std::size_t i = 0; i < w.weight.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.10g", w.weight[i]);
        os << i << ',' << w.support[i] << ',' << buf << '\n';
      }
      if (output.empty()) {
        std::cout << os.str();
      } else {
        open_out(output) << os.str();
      }
      return 0;
    }

    if (*export_scene) {
      SceneConfig cfg = to_scene(scene);
      cfg.rng_seed = seed;
      const SyntheticScene s = generate(cfg);
      const std::string text = correspondences_to_json(s.intrinsics, s.correspondences, s.truth).dump(2) + "\n";
      if (output.empty()) {
        std::cout << text;
      } else {
        open_out(output) << text;
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
