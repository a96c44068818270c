#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gncpose/geom_weight.hpp"
#include "gncpose/gnc.hpp"
#include "gncpose/io.hpp"
#include "gncpose/metrics.hpp"
#include "gncpose/synth.hpp"

namespace gncpose {

enum class Arm { Full, NoGeomWeights, NoGnc, RansacOnly };

inline const char* to_string(Arm arm) {
  switch (arm) {
    case Arm::Full: return "full";
    case Arm::NoGeomWeights: return "no-geom-weights";
    case Arm::NoGnc: return "no-gnc";
    case Arm::RansacOnly: return "ransac-only";
  }
  return "unknown";
}

inline Arm parse_arm(const std::string& name) {
  for (Arm a : {Arm::Full, Arm::NoGeomWeights, Arm::NoGnc, Arm::RansacOnly})
    if (name == to_string(a)) return a;
  fail(ErrorKind::InvalidConfig, "unknown mode \"" + name + "\"");
}

/// A synthetic scene config, or a list of correspondence files. With files,
/// trial i reads input_paths[i % size]; ADD uses model_path if given and the
/// file's 3D points otherwise, and needs a "truth" pose in the file.
struct ExperimentSpec {
  Arm mode = Arm::Full;
  SceneConfig scene;
  std::vector<std::string> input_paths;
  std::string model_path;
  int trials = 1;
  std::uint64_t base_seed = 0;
  GncConfig gnc;
  RansacConfig ransac;
  VoxelGridConfig voxel;
};

inline void validate(const ExperimentSpec& spec) {
  if (spec.trials < 1) fail(ErrorKind::InvalidConfig, "trials must be >= 1");
  validate(spec.gnc);
  validate(spec.voxel);
  RansacConfig r = spec.ransac;
  validate(r);
}

struct TrialResult {
  int trial_index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  bool converged = false;
  int n_inliers = 0;
  bool has_truth = false;
  double rotation_error_deg = std::numeric_limits<double>::quiet_NaN();
  double translation_error_m = std::numeric_limits<double>::quiet_NaN();
  double add_m = std::numeric_limits<double>::quiet_NaN();
  double add_s_m = std::numeric_limits<double>::quiet_NaN();
  double diameter_m = std::numeric_limits<double>::quiet_NaN();
  double inlier_precision = std::numeric_limits<double>::quiet_NaN();
  double inlier_recall = std::numeric_limits<double>::quiet_NaN();
  Pose pose;
  double wall_time_ms = 0.0;
};

/// Aggregates over one arm. The four ablation-table columns come first; they and the
/// 10 cm AUCs are percentages over all trials, a failed trial counting as an
/// infinite error. Means and medians cover successful trials only.
struct ExperimentSummary {
  Arm arm = Arm::Full;
  double outlier_fraction = 0.0;
  int trials = 0;
  int failed = 0;
  bool has_truth = false;
  double add_auc_0p1d = 0.0;
  double add_s_auc_0p1d = 0.0;
  double add_lt_0p1d_pct = 0.0;
  double add_s_lt_0p1d_pct = 0.0;
  double add_auc_10cm = 0.0;
  double add_s_auc_10cm = 0.0;
  double mean_rotation_error_deg = 0.0, median_rotation_error_deg = 0.0;
  double mean_translation_error_m = 0.0, median_translation_error_m = 0.0;
  double mean_add_m = 0.0, median_add_m = 0.0;
  double mean_add_s_m = 0.0, median_add_s_m = 0.0;
  double mean_inlier_precision = 0.0, mean_inlier_recall = 0.0;
  double converged_pct = 0.0;
};

struct ExperimentResult {
  std::vector<TrialResult> trials;
  ExperimentSummary summary;
};

namespace detail {

struct TrialInput {
  CameraIntrinsics intrinsics;
  CorrespondenceSet correspondences;
  std::optional<Pose> truth;
  std::optional<std::vector<bool>> outlier_mask;
  std::optional<ModelPoints> model;
};

inline TrialInput trial_input(const ExperimentSpec& spec, int trial, std::uint64_t seed,
                              const std::optional<ModelPoints>& file_model) {
  TrialInput in;
  if (spec.input_paths.empty()) {
    SceneConfig sc = spec.scene;
    sc.rng_seed = seed;
    SyntheticScene scene = generate(sc);
    in.intrinsics = scene.intrinsics;
    in.correspondences = std::move(scene.correspondences);
    in.truth = scene.truth;
    in.outlier_mask = std::move(scene.outlier_truth_mask);
    in.model = std::move(scene.model_points);
    return in;
  }
  const auto& path = spec.input_paths[static_cast<std::size_t>(trial) % spec.input_paths.size()];
  CorrespondenceFile file = load_correspondences(path);
  in.intrinsics = file.intrinsics;
  in.correspondences = std::move(file.correspondences);
  in.truth = file.truth;
  if (in.truth) {
    if (file_model) {
      in.model = *file_model;
    } else {
      std::vector<Vec3> points;
      for (const auto& item : in.correspondences) points.push_back(item.point);
      in.model = make_model_points(std::move(points));
    }
  }
  return in;
}

/// Per-correspondence weights from the file when any are given, voxel support otherwise.
inline std::vector<double> geometry_weights(const CorrespondenceSet& c, const VoxelGridConfig& voxel) {
  const bool supplied = std::any_of(c.begin(), c.end(), [](const Correspondence& x) { return x.geom_weight.has_value(); });
  if (!supplied) return compute_weights(c, voxel).weight;
  std::vector<double> w;
  w.reserve(c.size());
  for (const auto& item : c) w.push_back(item.weight());
  return w;
}

struct ArmOutput {
  Pose pose;
  std::vector<bool> inlier_mask;
  bool converged = false;
};

inline ArmOutput run_arm(const ExperimentSpec& spec, const TrialInput& in, std::uint64_t seed) {
  RansacConfig rc = spec.ransac;
  rc.rng_seed = seed;
  const auto& k = in.intrinsics;
  const auto& c = in.correspondences;
  switch (spec.mode) {
    case Arm::Full: {
      const auto w = geometry_weights(c, spec.voxel);
      const PoseEstimate e = gnc_pnp(k, c, w, spec.gnc, rc);
      return {e.pose, e.inlier_mask, e.converged};
    }
    case Arm::NoGeomWeights: {
      const PoseEstimate e = gnc_pnp_unweighted(k, c, spec.gnc, rc);
      return {e.pose, e.inlier_mask, e.converged};
    }
    case Arm::NoGnc: {
      const SolveReport init = ransac_pnp(k, c, rc);
      const SolveReport refined = refine_lm(k, c, mask_to_indices(init.inlier_mask), init.pose);
      return {refined.pose, init.inlier_mask, true};
    }
    case Arm::RansacOnly: {
      const SolveReport init = ransac_pnp(k, c, rc);
      return {init.pose, init.inlier_mask, true};
    }
  }
  fail(ErrorKind::InvalidConfig, "unknown mode");
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

inline TrialResult run_trial(const ExperimentSpec& spec, int trial, const std::optional<ModelPoints>& file_model = {}) {
  TrialResult r;
  r.trial_index = trial;
  r.seed = spec.base_seed + static_cast<std::uint64_t>(trial);
  try {
    const detail::TrialInput in = detail::trial_input(spec, trial, r.seed, file_model);
    r.has_truth = in.truth && in.model;
    const auto start = std::chrono::steady_clock::now();
    const detail::ArmOutput out = detail::run_arm(spec, in, r.seed);
    r.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    r.ok = true;
    r.pose = out.pose;
    r.converged = out.converged;
    r.n_inliers = static_cast<int>(std::count(out.inlier_mask.begin(), out.inlier_mask.end(), true));
    if (r.has_truth) {
      r.rotation_error_deg = rotation_geodesic_error(out.pose, *in.truth) * 180.0 / std::numbers::pi;
      r.translation_error_m = (out.pose.translation - in.truth->translation).norm();
      r.add_m = add(*in.model, out.pose, *in.truth);
      r.add_s_m = add_s(*in.model, out.pose, *in.truth);
      r.diameter_m = in.model->diameter;
    }
    if (in.outlier_mask) {
      std::size_t selected = 0, true_positive = 0, clean = 0;
      for (std::size_t i = 0; i < out.inlier_mask.size(); ++i) {
        const bool inlier = !(*in.outlier_mask)[i];
        clean += inlier;
        selected += out.inlier_mask[i];
        true_positive += inlier && out.inlier_mask[i];
      }
      r.inlier_precision = selected ? static_cast<double>(true_positive) / static_cast<double>(selected) : 0.0;
      r.inlier_recall = clean ? static_cast<double>(true_positive) / static_cast<double>(clean) : 0.0;
    }
  } catch (const Error& e) {
    r.ok = false;
    r.error = to_string(e.kind());
  }
  return r;
}

inline ExperimentSummary summarize(Arm arm, double outlier_fraction, const std::vector<TrialResult>& trials,
                                   bool expect_truth) {
  ExperimentSummary s;
  s.has_truth = expect_truth;
  s.arm = arm;
  s.outlier_fraction = outlier_fraction;
  s.trials = static_cast<int>(trials.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> add_norm, add_s_norm, add_abs, add_s_abs;
  std::vector<double> rot, trans, add_ok, add_s_ok, precision, recall;
  int converged = 0;
  for (const TrialResult& t : trials) {
    if (!t.ok) {
      ++s.failed;
      add_norm.push_back(inf);
      add_s_norm.push_back(inf);
      add_abs.push_back(inf);
      add_s_abs.push_back(inf);
      continue;
    }
    converged += t.converged;
    if (!std::isnan(t.inlier_precision)) precision.push_back(t.inlier_precision);
    if (!std::isnan(t.inlier_recall)) recall.push_back(t.inlier_recall);
    if (!t.has_truth) continue;
    s.has_truth = true;
    const double tenth = 0.1 * t.diameter_m;
    add_norm.push_back(t.add_m / tenth);
    add_s_norm.push_back(t.add_s_m / tenth);
    add_abs.push_back(t.add_m);
    add_s_abs.push_back(t.add_s_m);
    rot.push_back(t.rotation_error_deg);
    trans.push_back(t.translation_error_m);
    add_ok.push_back(t.add_m);
    add_s_ok.push_back(t.add_s_m);
  }
  if (s.has_truth) {
    s.add_auc_0p1d = 100.0 * auc(add_norm, 1.0);
    s.add_s_auc_0p1d = 100.0 * auc(add_s_norm, 1.0);
    s.add_lt_0p1d_pct = 100.0 * accuracy_at(add_norm, 1.0);
    s.add_s_lt_0p1d_pct = 100.0 * accuracy_at(add_s_norm, 1.0);
    s.add_auc_10cm = 100.0 * auc(add_abs, kDefaultAucMaxThreshold);
    s.add_s_auc_10cm = 100.0 * auc(add_s_abs, kDefaultAucMaxThreshold);
  }
  s.mean_rotation_error_deg = detail::mean_of(rot);
  s.median_rotation_error_deg = detail::median_of(rot);
  s.mean_translation_error_m = detail::mean_of(trans);
  s.median_translation_error_m = detail::median_of(trans);
  s.mean_add_m = detail::mean_of(add_ok);
  s.median_add_m = detail::median_of(add_ok);
  s.mean_add_s_m = detail::mean_of(add_s_ok);
  s.median_add_s_m = detail::median_of(add_s_ok);
  s.mean_inlier_precision = detail::mean_of(precision);
  s.mean_inlier_recall = detail::mean_of(recall);
  s.converged_pct = s.trials ? 100.0 * converged / s.trials : 0.0;
  if (!s.has_truth) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.add_auc_0p1d = s.add_s_auc_0p1d = s.add_lt_0p1d_pct = s.add_s_lt_0p1d_pct = nan;
    s.add_auc_10cm = s.add_s_auc_10cm = nan;
  }
  return s;
}

/// Trials run in index order with seed = base_seed + index. A failing trial
/// becomes a row with ok = false; the run itself does not abort.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  std::optional<ModelPoints> file_model;
  if (!spec.model_path.empty()) file_model = load_model_points(spec.model_path);
  ExperimentResult out;
  out.trials.reserve(static_cast<std::size_t>(spec.trials));
  for (int i = 0; i < spec.trials; ++i) out.trials.push_back(run_trial(spec, i, file_model));
  const bool synthetic = spec.input_paths.empty();
  const bool with_truth =
      synthetic || std::any_of(out.trials.begin(), out.trials.end(), [](const TrialResult& t) { return t.has_truth; });
  out.summary = summarize(spec.mode, synthetic ? spec.scene.outlier_fraction : 0.0, out.trials, with_truth);
  return out;
}

struct SweepResult {
  std::vector<ExperimentSummary> rows;
  std::vector<std::string> warnings;
};

/// One summary row per (arm, outlier fraction), arms outermost. Warns when the
/// full arm's ADD < 0.1d rate rises with the outlier fraction.
inline SweepResult emit_sweep(const ExperimentSpec& base, const std::vector<Arm>& arms,
                              const std::vector<double>& fractions) {
  if (fractions.empty()) fail(ErrorKind::InvalidConfig, "outlier fraction grid is empty");
  if (arms.empty()) fail(ErrorKind::InvalidConfig, "no arms given");
  if (!base.input_paths.empty()) fail(ErrorKind::InvalidConfig, "sweeps need a synthetic scene");
  SweepResult out;
  for (Arm arm : arms) {
    for (double f : fractions) {
      ExperimentSpec spec = base;
      spec.mode = arm;
      spec.scene.outlier_fraction = f;
      out.rows.push_back(run_experiment(spec).summary);
    }
  }
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    const auto& prev = out.rows[i - 1];
    const auto& cur = out.rows[i];
    if (cur.arm != Arm::Full || prev.arm != Arm::Full || !(cur.outlier_fraction > prev.outlier_fraction)) continue;
    if (cur.add_lt_0p1d_pct > prev.add_lt_0p1d_pct) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "full arm: ADD<0.1d rate rises from %.1f%% at %.3g to %.1f%% at %.3g",
                    prev.add_lt_0p1d_pct, prev.outlier_fraction, cur.add_lt_0p1d_pct, cur.outlier_fraction);
      out.warnings.emplace_back(buf);
    }
  }
  return out;
}

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

inline const char* kTrialCsvHeader =
    "trial,seed,status,error,converged,n_inliers,rotation_error_deg,translation_error_m,add_m,add_s_m,"
    "inlier_precision,inlier_recall,rx,ry,rz,tx,ty,tz";

inline const char* kSummaryCsvHeader =
    "arm,outlier_fraction,trials,failed,add_auc_0p1d,add_s_auc_0p1d,add_lt_0p1d_pct,add_s_lt_0p1d_pct,"
    "add_auc_10cm,add_s_auc_10cm,mean_rotation_error_deg,median_rotation_error_deg,mean_translation_error_m,"
    "median_translation_error_m,mean_add_m,median_add_m,mean_add_s_m,median_add_s_m,mean_inlier_precision,"
    "mean_inlier_recall,converged_pct";

/// Pose columns are the axis-angle rotation (rx, ry, rz) and the translation.
inline void write_trial_csv(std::ostream& os, const std::vector<TrialResult>& trials) {
  using detail::fmt;
  os << kTrialCsvHeader << '\n';
  for (const TrialResult& t : trials) {
    os << t.trial_index << ',' << t.seed << ',' << (t.ok ? "ok" : "failed") << ',' << t.error << ',';
    if (!t.ok) {
      os << ",,,,,,,,,,,,,\n";
      continue;
    }
    const Vec3 w = log_so3(t.pose.rotation);
    os << (t.converged ? 1 : 0) << ',' << t.n_inliers << ',' << fmt(t.rotation_error_deg) << ','
       << fmt(t.translation_error_m) << ',' << fmt(t.add_m) << ',' << fmt(t.add_s_m) << ','
       << fmt(t.inlier_precision) << ',' << fmt(t.inlier_recall) << ',' << fmt(w.x()) << ',' << fmt(w.y()) << ','
       << fmt(w.z()) << ',' << fmt(t.pose.translation.x()) << ',' << fmt(t.pose.translation.y()) << ','
       << fmt(t.pose.translation.z()) << '\n';
  }
}

inline void write_summary_row(std::ostream& os, const ExperimentSummary& s) {
  using detail::fmt;
  os << to_string(s.arm) << ',' << fmt(s.outlier_fraction) << ',' << s.trials << ',' << s.failed << ','
     << fmt(s.add_auc_0p1d) << ',' << fmt(s.add_s_auc_0p1d) << ',' << fmt(s.add_lt_0p1d_pct) << ','
     << fmt(s.add_s_lt_0p1d_pct) << ',' << fmt(s.add_auc_10cm) << ',' << fmt(s.add_s_auc_10cm) << ','
     << fmt(s.mean_rotation_error_deg) << ',' << fmt(s.median_rotation_error_deg) << ','
     << fmt(s.mean_translation_error_m) << ',' << fmt(s.median_translation_error_m) << ',' << fmt(s.mean_add_m)
     << ',' << fmt(s.median_add_m) << ',' << fmt(s.mean_add_s_m) << ',' << fmt(s.median_add_s_m) << ','
     << fmt(s.mean_inlier_precision) << ',' << fmt(s.mean_inlier_recall) << ',' << fmt(s.converged_pct) << '\n';
}

inline void write_summary_csv(std::ostream& os, const std::vector<ExperimentSummary>& rows) {
  os << kSummaryCsvHeader << '\n';
  for (const auto& s : rows) write_summary_row(os, s);
}

/// Wall time is kept out of the result CSVs so that they stay byte-identical across runs.
inline void write_timing_csv(std::ostream& os, const std::vector<TrialResult>& trials) {
  os << "trial,wall_time_ms\n";
  for (const TrialResult& t : trials) os << t.trial_index << ',' << detail::fmt(t.wall_time_ms) << '\n';
}

}  // namespace gncpose
