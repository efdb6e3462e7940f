#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "psog/dataset.hpp"
#include "psog/image.hpp"

namespace psog {

/// Binary graymap out; intensities clamped to [0,1] and quantized to maxval
/// (255 or 65535).
void write_pgm(const std::string& path, const Image& img, int maxval = 255);

/// Reads binary (P5) or ASCII (P2) graymaps, any maxval up to 65535;
/// intensities scaled to [0,1].
Image read_pgm(const std::string& path);

/// Versioned textual checkpoint: layer table, optional normalization stats,
/// flat parameters at full precision. Layout:
///   PSOG-CHECKPOINT v1
///   meta <key> <value>           (0+ lines)
///   param_count <n>
///   layers <k>
///   layer <name> <offset> <size> (k lines)
///   norm <m>
///   norm_mean <m values>         (omitted when m = 0)
///   norm_stddev <m values>
///   params
///   <n lines, one %.17g value each>
///   end
struct Checkpoint {
  std::vector<double> params;
  NormStats norm;  // empty vectors when the checkpoint carries no stats
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::string& path, const std::vector<double>& params,
                     const NormStats& norm, const std::map<std::string, std::string>& meta = {});
Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a over bytes; used for config hashes and dataset fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed_state);

/// Order-sensitive hash of every record at full precision.
std::uint64_t dataset_fingerprint(const Dataset& dataset);

/// Builds a dataset from pre-rendered graymap frames listed in a manifest
/// CSV. Required columns: image,subject,x_deg,y_deg,dx_mm,dy_mm; optional:
/// head_dx_px,head_dy_px. A "# scale_px_per_mm=<v>" comment line sets the
/// mm-to-px conversion. Image paths resolve relative to the manifest.
Dataset ingest_image_dataset(const std::string& manifest_csv, const ArrayLayout& layout,
                             const ReceptiveKernel& kernel);

}  // namespace psog
