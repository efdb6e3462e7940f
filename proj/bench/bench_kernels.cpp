// Timing comparison of the production kernels against their serial reference
// implementations, with a correctness delta for each pair. Run manually; not
// part of the test suite.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "psog/dataset.hpp"
#include "psog/eye_model.hpp"
#include "psog/network.hpp"
#include "psog/reference.hpp"
#include "psog/rng.hpp"
#include "psog/sensor_array.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace psog;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled (serial build)\n");
#endif

  const ImageSpec spec;
  const ArrayLayout layout;
  const auto kernel = receptive_kernel(layout.window_side_px);
  const EyeModelParams eye = make_subject(1, 1);

  // Frame rendering: the OpenMP session path against per-sample calls.
  {
    StimulusSpec stim;
    stim.grid_x = 4;
    stim.grid_y = 4;
    stim.min_samples_per_fixation = 2;
    stim.max_samples_per_fixation = 2;
    const auto plan = plan_session(1, eye, spec, stim, 7);
    auto t0 = Clock::now();
    const auto session = generate_session(plan);
    const double par_ms = ms_since(t0);

    t0 = Clock::now();
    std::vector<Image> serial(plan.samples.size());
    for (std::size_t i = 0; i < plan.samples.size(); ++i)
      serial[i] = render_sample(plan, plan.samples[i]);
    const double ser_ms = ms_since(t0);

    double max_delta = 0.0;
    for (std::size_t i = 0; i < serial.size(); ++i)
      for (std::size_t p = 0; p < serial[i].pix.size(); ++p)
        max_delta = std::max(max_delta, std::abs(serial[i].pix[p] - session.images[i].pix[p]));
    std::printf("%-22s  reps %4zu  parallel %8.2f ms  serial %8.2f ms  speedup %5.2fx  "
                "max |delta| %.2e\n",
                "render session", plan.samples.size(), par_ms, ser_ms, ser_ms / par_ms,
                max_delta);
  }

  // Sensor readout: shared-kernel fast path against the naive per-pixel oracle.
  {
    const Image img = render_eye(eye, spec, GazeSample{5.0, -3.0}, 0, 0, 11);
    Rng rng(3);
    std::vector<Shift2D> shifts;
    for (int i = 0; i < 50; ++i) {
      Shift2D s;
      s.dx_mm = rng.uniform(-5.0, 5.0);
      s.dy_mm = rng.uniform(-5.0, 5.0);
      shifts.push_back(mm_to_px(s, spec.scale_px_per_mm));
    }

    auto t0 = Clock::now();
    std::vector<SensorFrame> fast;
    for (const auto& s : shifts) fast.push_back(simulate_frame(img, spec, layout, kernel, s));
    const double fast_ms = ms_since(t0);

    t0 = Clock::now();
    std::vector<SensorFrame> ref;
    for (const auto& s : shifts) ref.push_back(ref_simulate_frame(img, spec, layout, s));
    const double ref_ms = ms_since(t0);

    double max_delta = 0.0;
    for (std::size_t i = 0; i < shifts.size(); ++i)
      for (int v = 0; v < layout.sensor_count(); ++v)
        max_delta = std::max(max_delta, std::abs(fast[i].values[static_cast<std::size_t>(v)] -
                                                 ref[i].values[static_cast<std::size_t>(v)]));
    std::printf("%-22s  reps %4zu  fast %8.2f ms  reference %8.2f ms  speedup %5.2fx  "
                "max |delta| %.2e\n",
                "sensor readout", shifts.size(), fast_ms, ref_ms, ref_ms / fast_ms, max_delta);
  }

  // Batch gradient: blocked parallel reduction against finite differences is
  // meaningless for speed, so the reference here is the same routine forced
  // serial; the delta must be exactly zero (bit-stable reduction).
  {
    Rng rng(9);
    const auto params = nn::init_params(5);
    const int n = 512;
    std::vector<double> inputs, targets;
    std::vector<std::size_t> rows;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < nn::kInSize; ++j) inputs.push_back(rng.normal());
      targets.push_back(rng.uniform(-20, 20));
      targets.push_back(rng.uniform(-16, 16));
      rows.push_back(static_cast<std::size_t>(i));
    }
    std::vector<double> g1, g2;
    nn::BatchScratch s1, s2;
    const int reps = 50;

#ifdef _OPENMP
    omp_set_num_threads(omp_get_max_threads());
#endif
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) nn::batch_loss_grad(params, inputs, targets, rows, g1, s1);
    const double fast_ms = ms_since(t0);

#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) nn::batch_loss_grad(params, inputs, targets, rows, g2, s2);
    const double ser_ms = ms_since(t0);

    double max_delta = 0.0;
    for (std::size_t i = 0; i < g1.size(); ++i)
      max_delta = std::max(max_delta, std::abs(g1[i] - g2[i]));
    std::printf("%-22s  reps %4d  parallel %8.2f ms  serial %8.2f ms  speedup %5.2fx  "
                "max |delta| %.2e\n",
                "batch gradient (512)", reps, fast_ms, ser_ms, ser_ms / fast_ms, max_delta);
  }

  return 0;
}
