#pragma once

#include <cstdint>
#include <vector>

#include "psog/common.hpp"
#include "psog/image.hpp"
#include "psog/rng.hpp"

namespace psog {

/// Camera geometry of the rendered frames. The scale ties millimetre
/// quantities (shifts, head offsets, anatomy) to pixels.
struct ImageSpec {
  int width = 640;
  int height = 480;
  double scale_px_per_mm = 20.0;

  void validate() const;
};

/// Anatomy and optical properties of one synthetic eye. Reflectivities are
/// gray intensities in [0, 1]; the iris/pupil track gaze linearly through the
/// per-axis gains while the sclera stays fixed relative to the head.
struct EyeModelParams {
  double center_x_px = 320.0;
  double center_y_px = 240.0;
  double sclera_a_px = 160.0;   // horizontal semi-axis
  double sclera_b_px = 110.0;   // vertical semi-axis
  double iris_radius_mm = 4.0;
  double pupil_radius_mm = 2.0;
  double gain_x_px_per_deg = 3.5;
  double gain_y_px_per_deg = 3.0;
  double refl_skin = 0.55;
  double refl_sclera = 0.85;
  double refl_iris = 0.35;
  double refl_pupil = 0.05;
  double edge_softness_px = 1.5;
  double noise_std = 0.01;        // temporal white noise, per frame
  double texture_std = 0.0;       // static structured pattern, fixed per subject
  double texture_scale_px = 24.0; // correlation length of that pattern
  std::uint64_t texture_seed = 0; // pattern identity

  void validate(const ImageSpec& spec) const;
};

/// Fixation grid and per-fixation sampling plan for one recording session.
struct StimulusSpec {
  int grid_x = 5;
  int grid_y = 5;
  double range_x_deg = kOperatingRangeXDeg;
  double range_y_deg = kOperatingRangeYDeg;
  int min_samples_per_fixation = 2;
  int max_samples_per_fixation = 8;
  double gaze_jitter_deg = 0.25;     // fixational scatter, clamped at 3 sigma
  double head_walk_step_mm = 0.05;   // per-sample random-walk increment
  double head_max_mm = 0.45;         // walk clamp; keeps windows in frame at 5 mm shift

  void validate() const;
};

/// Fixation targets in row-major grid order (y outer, x inner); endpoints hit
/// the range extremes exactly and odd grids include 0.
std::vector<GazeSample> stimulus_targets(const StimulusSpec& spec);

/// Everything needed to re-render one sample deterministically.
struct PlannedSample {
  GazeSample gaze;           // target + jitter, degrees
  int fixation_index = 0;
  double head_dx_mm = 0.0;
  double head_dy_mm = 0.0;
  int head_dx_px = 0;        // realized (rounded) offset used by the renderer
  int head_dy_px = 0;
  std::uint64_t noise_seed = 0;
};

/// Deterministic session description: cheap to hold, images are rendered on
/// demand from it (a full session at double precision is too large to keep).
struct SessionPlan {
  int subject_id = 0;
  EyeModelParams eye;
  ImageSpec image;
  std::vector<PlannedSample> samples;
};

SessionPlan plan_session(int subject_id, const EyeModelParams& eye, const ImageSpec& image,
                         const StimulusSpec& stimulus, std::uint64_t seed);

/// Renders one frame: skin background, sclera ellipse, gaze-driven iris and
/// pupil discs, linear edge anti-aliasing, and deterministic pixel noise tied
/// to scene coordinates so an integer-pixel head offset is an exact
/// translation of the whole frame.
Image render_eye(const EyeModelParams& eye, const ImageSpec& spec, GazeSample gaze,
                 int head_dx_px, int head_dy_px, std::uint64_t noise_seed);

Image render_sample(const SessionPlan& plan, const PlannedSample& s);

/// Materialized session (small sessions and CLI dumps only).
struct Session {
  SessionPlan plan;
  std::vector<Image> images;
};

Session generate_session(const SessionPlan& plan);

/// Draws per-subject anatomy from documented ranges; distinct subjects give
/// the inter-subject variation the cross-subject experiments rely on.
EyeModelParams make_subject(int subject_id, std::uint64_t master_seed);

}  // namespace psog
