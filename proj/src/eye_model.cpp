#include "psog/eye_model.hpp"

#include <algorithm>
#include <cmath>

#include "psog/shift.hpp"

namespace psog {
namespace {

// Linear edge coverage: 1 inside, 0 outside, ramping over `softness` px
// centered on the boundary. d is signed distance past the radius.
double edge_coverage(double d, double softness) {
  double t = 0.5 - d / softness;
  return std::clamp(t, 0.0, 1.0);
}

// Exact at both endpoints: t = 1 yields b itself, so fully covered pixels
// carry the layer reflectivity with no rounding residue.
double lerp(double a, double b, double t) { return a * (1.0 - t) + b * t; }

// Offset applied to scene coordinates before hashing so they stay positive
// for every head offset the planner can produce.
constexpr std::int64_t kNoiseCoordBias = 4096;

// Smoothly interpolated Gaussian lattice noise: the static skin/iris pattern
// that makes two subjects with identical anatomy still look different to the
// sensors. C1-continuous, zero mean, unit-ish variance.
double value_noise(std::uint64_t seed, double u, double v) {
  double fu = std::floor(u);
  double fv = std::floor(v);
  auto iu = static_cast<std::uint64_t>(static_cast<std::int64_t>(fu) + kNoiseCoordBias);
  auto iv = static_cast<std::uint64_t>(static_cast<std::int64_t>(fv) + kNoiseCoordBias);
  double tu = u - fu;
  double tv = v - fv;
  tu = tu * tu * (3.0 - 2.0 * tu);
  tv = tv * tv * (3.0 - 2.0 * tv);
  double n00 = normal_at(seed, iu, iv);
  double n10 = normal_at(seed, iu + 1, iv);
  double n01 = normal_at(seed, iu, iv + 1);
  double n11 = normal_at(seed, iu + 1, iv + 1);
  return lerp(lerp(n00, n10, tu), lerp(n01, n11, tu), tv);
}

}  // namespace

void ImageSpec::validate() const {
  if (width < 1 || height < 1) throw ConfigError("image dimensions must be positive");
  if (scale_px_per_mm <= 0.0) throw ConfigError("image scale must be positive");
}

void EyeModelParams::validate(const ImageSpec& spec) const {
  spec.validate();
  if (iris_radius_mm <= 0.0 || pupil_radius_mm <= 0.0)
    throw ConfigError("iris and pupil radii must be positive");
  if (pupil_radius_mm >= iris_radius_mm)
    throw ConfigError("pupil must be smaller than iris");
  if (sclera_a_px <= 0.0 || sclera_b_px <= 0.0)
    throw ConfigError("sclera semi-axes must be positive");
  if (edge_softness_px <= 0.0) throw ConfigError("edge softness must be positive");
  if (noise_std < 0.0) throw ConfigError("noise std must be non-negative");
  if (texture_std < 0.0) throw ConfigError("texture std must be non-negative");
  if (texture_std > 0.0 && texture_scale_px <= 0.0)
    throw ConfigError("texture scale must be positive");
  for (double r : {refl_skin, refl_sclera, refl_iris, refl_pupil}) {
    if (r < 0.0 || r > 1.0) throw ConfigError("reflectivities must lie in [0,1]");
  }
  if (center_x_px < 0.0 || center_x_px >= spec.width || center_y_px < 0.0 ||
      center_y_px >= spec.height)
    throw ConfigError("eye center must lie inside the image");
}

void StimulusSpec::validate() const {
  if (grid_x < 1 || grid_y < 1) throw ConfigError("fixation grid must be at least 1x1");
  if (range_x_deg < 0.0 || range_y_deg < 0.0) throw ConfigError("gaze ranges must be non-negative");
  if (min_samples_per_fixation < 1 || max_samples_per_fixation < min_samples_per_fixation)
    throw ConfigError("samples-per-fixation bounds are invalid");
  if (gaze_jitter_deg < 0.0) throw ConfigError("gaze jitter must be non-negative");
  if (head_walk_step_mm < 0.0 || head_max_mm < 0.0)
    throw ConfigError("head walk parameters must be non-negative");
  if (head_max_mm > 1.0) throw ConfigError("head walk clamp above 1 mm breaks frame margins");
}

std::vector<GazeSample> stimulus_targets(const StimulusSpec& spec) {
  spec.validate();
  auto axis = [](int n, double range) {
    std::vector<double> v(static_cast<std::size_t>(n));
    if (n == 1) {
      v[0] = 0.0;
    } else {
      for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = range * (2.0 * i / (n - 1) - 1.0);
    }
    return v;
  };
  auto xs = axis(spec.grid_x, spec.range_x_deg);
  auto ys = axis(spec.grid_y, spec.range_y_deg);
  std::vector<GazeSample> out;
  out.reserve(xs.size() * ys.size());
  for (double y : ys) {
    for (double x : xs) out.push_back(GazeSample{x, y});
  }
  return out;
}

SessionPlan plan_session(int subject_id, const EyeModelParams& eye, const ImageSpec& image,
                         const StimulusSpec& stimulus, std::uint64_t seed) {
  eye.validate(image);
  SessionPlan plan;
  plan.subject_id = subject_id;
  plan.eye = eye;
  plan.image = image;

  auto targets = stimulus_targets(stimulus);
  Rng counts_rng(derive_seed(seed, {0}));
  Rng jitter_rng(derive_seed(seed, {1}));
  Rng head_rng(derive_seed(seed, {2}));

  double head_x = 0.0;
  double head_y = 0.0;
  std::uint64_t sample_index = 0;
  double jclamp = 3.0 * stimulus.gaze_jitter_deg;
  for (std::size_t f = 0; f < targets.size(); ++f) {
    auto n = counts_rng.uniform_int(stimulus.min_samples_per_fixation,
                                    stimulus.max_samples_per_fixation);
    for (std::int64_t k = 0; k < n; ++k) {
      PlannedSample s;
      s.fixation_index = static_cast<int>(f);
      double jx = std::clamp(jitter_rng.normal(0.0, stimulus.gaze_jitter_deg), -jclamp, jclamp);
      double jy = std::clamp(jitter_rng.normal(0.0, stimulus.gaze_jitter_deg), -jclamp, jclamp);
      if (stimulus.gaze_jitter_deg == 0.0) jx = jy = 0.0;
      s.gaze = GazeSample{targets[f].x_deg + jx, targets[f].y_deg + jy};
      head_x = std::clamp(head_x + head_rng.normal(0.0, stimulus.head_walk_step_mm),
                          -stimulus.head_max_mm, stimulus.head_max_mm);
      head_y = std::clamp(head_y + head_rng.normal(0.0, stimulus.head_walk_step_mm),
                          -stimulus.head_max_mm, stimulus.head_max_mm);
      s.head_dx_mm = head_x;
      s.head_dy_mm = head_y;
      s.head_dx_px = round_mm_to_px(head_x, image.scale_px_per_mm);
      s.head_dy_px = round_mm_to_px(head_y, image.scale_px_per_mm);
      s.noise_seed = derive_seed(seed, {3, sample_index});
      plan.samples.push_back(s);
      ++sample_index;
    }
  }
  return plan;
}

Image render_eye(const EyeModelParams& eye, const ImageSpec& spec, GazeSample gaze,
                 int head_dx_px, int head_dy_px, std::uint64_t noise_seed) {
  eye.validate(spec);
  Image img(spec.width, spec.height);

  double iris_r = eye.iris_radius_mm * spec.scale_px_per_mm;
  double pupil_r = eye.pupil_radius_mm * spec.scale_px_per_mm;
  double iris_cx = eye.center_x_px + eye.gain_x_px_per_deg * gaze.x_deg;
  double iris_cy = eye.center_y_px + eye.gain_y_px_per_deg * gaze.y_deg;
  double sclera_min = std::min(eye.sclera_a_px, eye.sclera_b_px);

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      // Scene coordinates: all features and the noise field live here, so a
      // head offset translates the whole frame pixel-for-pixel.
      double sx = x - head_dx_px;
      double sy = y - head_dy_px;

      double val = eye.refl_skin;

      double qx = (sx - eye.center_x_px) / eye.sclera_a_px;
      double qy = (sy - eye.center_y_px) / eye.sclera_b_px;
      double q = std::sqrt(qx * qx + qy * qy);
      val = lerp(val, eye.refl_sclera, edge_coverage((q - 1.0) * sclera_min, eye.edge_softness_px));

      double di = std::hypot(sx - iris_cx, sy - iris_cy);
      val = lerp(val, eye.refl_iris, edge_coverage(di - iris_r, eye.edge_softness_px));
      val = lerp(val, eye.refl_pupil, edge_coverage(di - pupil_r, eye.edge_softness_px));

      if (eye.texture_std > 0.0) {
        val += eye.texture_std *
               value_noise(eye.texture_seed, sx / eye.texture_scale_px, sy / eye.texture_scale_px);
      }

      if (eye.noise_std > 0.0) {
        auto ny = static_cast<std::uint64_t>(y - head_dy_px + kNoiseCoordBias);
        auto nx = static_cast<std::uint64_t>(x - head_dx_px + kNoiseCoordBias);
        val += eye.noise_std * normal_at(noise_seed, ny, nx);
      }
      img.at(y, x) = std::clamp(val, 0.0, 1.0);
    }
  }
  return img;
}

Image render_sample(const SessionPlan& plan, const PlannedSample& s) {
  return render_eye(plan.eye, plan.image, s.gaze, s.head_dx_px, s.head_dy_px, s.noise_seed);
}

Session generate_session(const SessionPlan& plan) {
  Session session;
  session.plan = plan;
  session.images.resize(plan.samples.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(plan.samples.size()); ++i) {
    session.images[static_cast<std::size_t>(i)] =
        render_sample(plan, plan.samples[static_cast<std::size_t>(i)]);
  }
  return session;
}

EyeModelParams make_subject(int subject_id, std::uint64_t master_seed) {
  Rng rng(derive_seed(master_seed, {0x5b, static_cast<std::uint64_t>(subject_id)}));
  EyeModelParams p;
  // Ranges are deliberately wide: inter-subject variability is what makes
  // pooled pre-training a compromised starting point for any one subject.
  p.center_x_px = 320.0 + rng.uniform(-15.0, 15.0);
  p.center_y_px = 240.0 + rng.uniform(-15.0, 15.0);
  p.sclera_a_px = rng.uniform(140.0, 180.0);
  p.sclera_b_px = rng.uniform(95.0, 125.0);
  p.iris_radius_mm = rng.uniform(3.4, 4.6);
  p.pupil_radius_mm = rng.uniform(1.5, 2.5);
  p.gain_x_px_per_deg = rng.uniform(2.8, 4.2);
  p.gain_y_px_per_deg = rng.uniform(2.4, 3.6);
  p.refl_skin = rng.uniform(0.45, 0.65);
  // Iris straddles skin: infrared iris reflectivity varies with pigmentation,
  // so the sign of the iris-skin contrast is subject-specific.
  p.refl_iris = rng.uniform(0.20, 0.60);
  // Dark- vs bright-pupil dichotomy: retroreflection under IR illumination
  // makes some subjects' pupils brighter than their iris, others darker. The
  // sclera level is drawn per mode so the pupil stays the intensity extreme
  // (a bright pupil crossing an equally bright sclera would be unsensable).
  if (rng.uniform(0.0, 1.0) < 0.5) {
    p.refl_sclera = rng.uniform(0.60, 0.75);
    p.refl_pupil = rng.uniform(0.85, 0.95);
  } else {
    p.refl_sclera = rng.uniform(0.75, 0.92);
    p.refl_pupil = rng.uniform(0.02, 0.10);
  }
  p.edge_softness_px = rng.uniform(1.0, 2.0);
  p.noise_std = rng.uniform(0.006, 0.018);
  return p;
}

}  // namespace psog
