#include "psog/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "psog/network.hpp"
#include "psog/sensor_array.hpp"

namespace psog {
namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

// Skips whitespace and '#' comment lines between PGM header tokens.
int next_pgm_int(std::istream& in) {
  for (;;) {
    int ch = in.peek();
    if (ch == std::char_traits<char>::eof()) throw std::runtime_error("truncated graymap header");
    if (ch == '#') {
      std::string junk;
      std::getline(in, junk);
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  if (!in || v < 0) throw std::runtime_error("malformed graymap header");
  return v;
}

struct LayerEntry {
  const char* name;
  int offset;
  int size;
};

std::vector<LayerEntry> layer_table() {
  using L = nn::Layout;
  return {
      {"conv1.weight", L::conv1_w, L::conv1_b - L::conv1_w},
      {"conv1.bias", L::conv1_b, L::conv2_w - L::conv1_b},
      {"conv2.weight", L::conv2_w, L::conv2_b - L::conv2_w},
      {"conv2.bias", L::conv2_b, L::fc1_w - L::conv2_b},
      {"fc1.weight", L::fc1_w, L::fc1_b - L::fc1_w},
      {"fc1.bias", L::fc1_b, L::fc2_w - L::fc1_b},
      {"fc2.weight", L::fc2_w, L::fc2_b - L::fc2_w},
      {"fc2.bias", L::fc2_b, L::fc3_w - L::fc2_b},
      {"fc3.weight", L::fc3_w, L::fc3_b - L::fc3_w},
      {"fc3.bias", L::fc3_b, L::fc4_w - L::fc3_b},
      {"fc4.weight", L::fc4_w, L::fc4_b - L::fc4_w},
      {"fc4.bias", L::fc4_b, L::head_w - L::fc4_b},
      {"head.weight", L::head_w, L::head_b - L::head_w},
      {"head.bias", L::head_b, L::total - L::head_b},
  };
}

void hash_append(std::uint64_t& h, std::string_view bytes) { h = fnv1a64(bytes, h); }

}  // namespace

void write_pgm(const std::string& path, const Image& img, int maxval) {
  if (maxval != 255 && maxval != 65535) throw ConfigError("graymap maxval must be 255 or 65535");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
  for (double v : img.pix) {
    auto q = static_cast<long>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (maxval > 255) out.put(static_cast<char>((q >> 8) & 0xff));
    out.put(static_cast<char>(q & 0xff));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  bool binary = false;
  if (m0 == 'P' && m1 == '5') {
    binary = true;
  } else if (m0 == 'P' && m1 == '2') {
    binary = false;
  } else {
    throw std::runtime_error("not a P2/P5 graymap: " + path);
  }
  int width = next_pgm_int(in);
  int height = next_pgm_int(in);
  int maxval = next_pgm_int(in);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
    throw std::runtime_error("unsupported graymap geometry: " + path);

  Image img(width, height);
  if (binary) {
    in.get();  // single whitespace after maxval
    std::size_t n = img.pix.size() * (maxval > 255 ? 2 : 1);
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw std::runtime_error("truncated graymap: " + path);
    for (std::size_t i = 0; i < img.pix.size(); ++i) {
      unsigned v = maxval > 255 ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1]
                                : raw[i];
      img.pix[i] = static_cast<double>(v) / maxval;
    }
  } else {
    for (auto& px : img.pix) px = static_cast<double>(next_pgm_int(in)) / maxval;
  }
  return img;
}

void save_checkpoint(const std::string& path, const std::vector<double>& params,
                     const NormStats& norm, const std::map<std::string, std::string>& meta) {
  if (norm.mean.size() != norm.stddev.size())
    throw ConfigError("normalization stats have mismatched lengths");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "PSOG-CHECKPOINT v1\n";
  for (const auto& [k, v] : meta) out << "meta " << k << " " << v << "\n";
  out << "param_count " << params.size() << "\n";
  auto table = layer_table();
  out << "layers " << table.size() << "\n";
  for (const auto& e : table) out << "layer " << e.name << " " << e.offset << " " << e.size << "\n";
  char buf[64];
  out << "norm " << norm.mean.size() << "\n";
  if (!norm.mean.empty()) {
    out << "norm_mean";
    for (double v : norm.mean) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      out << buf;
    }
    out << "\nnorm_stddev";
    for (double v : norm.stddev) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      out << buf;
    }
    out << "\n";
  }
  out << "params\n";
  for (double p : params) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", p);
    out << buf;
  }
  out << "end\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "PSOG-CHECKPOINT v1")
    throw std::runtime_error("not a v1 checkpoint: " + path);

  Checkpoint ck;
  std::size_t param_count = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "meta") {
      std::string key;
      ss >> key;
      std::string value;
      std::getline(ss, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ck.meta[key] = value;
    } else if (tag == "param_count") {
      ss >> param_count;
    } else if (tag == "layers") {
      std::size_t k = 0;
      ss >> k;
      for (std::size_t i = 0; i < k; ++i) {
        if (!std::getline(in, line) || line.rfind("layer ", 0) != 0)
          throw std::runtime_error("malformed layer table: " + path);
      }
    } else if (tag == "norm") {
      std::size_t m = 0;
      ss >> m;
      if (m > 0) {
        auto read_row = [&](const char* expect, std::vector<double>& dst) {
          if (!std::getline(in, line)) throw std::runtime_error("truncated checkpoint: " + path);
          std::istringstream rs(line);
          std::string name;
          rs >> name;
          if (name != expect) throw std::runtime_error("malformed norm section: " + path);
          dst.resize(m);
          for (auto& v : dst) {
            if (!(rs >> v)) throw std::runtime_error("malformed norm section: " + path);
          }
        };
        read_row("norm_mean", ck.norm.mean);
        read_row("norm_stddev", ck.norm.stddev);
      }
    } else if (tag == "params") {
      ck.params.resize(param_count);
      for (auto& p : ck.params) {
        if (!(in >> p)) throw std::runtime_error("truncated parameter list: " + path);
      }
      std::getline(in, line);  // trailing newline after the last value
      if (!std::getline(in, line) || line != "end")
        throw std::runtime_error("missing checkpoint terminator: " + path);
      return ck;
    } else if (tag.empty()) {
      continue;
    } else {
      throw std::runtime_error("unknown checkpoint section '" + tag + "': " + path);
    }
  }
  throw std::runtime_error("checkpoint has no parameter section: " + path);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed_state) {
  std::uint64_t h = seed_state;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view bytes) { return fnv1a64(bytes, kFnvOffset); }

std::uint64_t dataset_fingerprint(const Dataset& dataset) {
  std::uint64_t h = kFnvOffset;
  char buf[512];
  int n = std::snprintf(buf, sizeof(buf), "grid %d %d norm %d\n", dataset.sensor_rows,
                        dataset.sensor_cols, dataset.normalized ? 1 : 0);
  hash_append(h, std::string_view(buf, static_cast<std::size_t>(n)));
  for (const auto& rec : dataset.records) {
    n = std::snprintf(buf, sizeof(buf), "%d %.17g %.17g %.17g %.17g %s", rec.subject_id,
                      rec.gaze.x_deg, rec.gaze.y_deg, rec.shift.dx_mm, rec.shift.dy_mm,
                      bin_label(rec.bin));
    hash_append(h, std::string_view(buf, static_cast<std::size_t>(n)));
    for (double v : rec.sensors) {
      n = std::snprintf(buf, sizeof(buf), " %.17g", v);
      hash_append(h, std::string_view(buf, static_cast<std::size_t>(n)));
    }
    hash_append(h, "\n");
  }
  return h;
}

Dataset ingest_image_dataset(const std::string& manifest_csv, const ArrayLayout& layout,
                             const ReceptiveKernel& kernel) {
  std::ifstream in(manifest_csv);
  if (!in) throw std::runtime_error("cannot open for read: " + manifest_csv);
  auto base = std::filesystem::path(manifest_csv).parent_path();

  std::string line;
  double scale = 0.0;
  std::vector<std::string> columns;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto pos = line.find("scale_px_per_mm=");
      if (pos != std::string::npos) scale = std::strtod(line.c_str() + pos + 16, nullptr);
      continue;
    }
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) columns.push_back(col);
    break;
  }
  auto col_index = [&](const std::string& name) {
    auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
  };
  int c_image = col_index("image"), c_subject = col_index("subject");
  int c_x = col_index("x_deg"), c_y = col_index("y_deg");
  int c_dx = col_index("dx_mm"), c_dy = col_index("dy_mm");
  int c_hx = col_index("head_dx_px"), c_hy = col_index("head_dy_px");
  if (c_image < 0 || c_subject < 0 || c_x < 0 || c_y < 0 || c_dx < 0 || c_dy < 0)
    throw std::runtime_error("manifest is missing a required column");
  if (scale <= 0.0)
    throw std::runtime_error("manifest must carry a '# scale_px_per_mm=<v>' comment line");

  Dataset ds;
  ds.sensor_rows = layout.rows;
  ds.sensor_cols = layout.cols;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::vector<std::string> fields;
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < columns.size()) throw std::runtime_error("truncated manifest row");

    Image img = read_pgm((base / fields[static_cast<std::size_t>(c_image)]).string());
    ImageSpec spec;
    spec.width = img.width;
    spec.height = img.height;
    spec.scale_px_per_mm = scale;

    Shift2D shift;
    shift.dx_mm = std::strtod(fields[static_cast<std::size_t>(c_dx)].c_str(), nullptr);
    shift.dy_mm = std::strtod(fields[static_cast<std::size_t>(c_dy)].c_str(), nullptr);
    shift = mm_to_px(shift, scale);
    int head_dx = c_hx >= 0 ? std::stoi(fields[static_cast<std::size_t>(c_hx)]) : 0;
    int head_dy = c_hy >= 0 ? std::stoi(fields[static_cast<std::size_t>(c_hy)]) : 0;

    SensorFrame frame = simulate_frame(img, spec, layout, kernel, shift, head_dx, head_dy, true);
    Record rec;
    rec.sensors = std::move(frame.values);
    rec.gaze.x_deg = std::strtod(fields[static_cast<std::size_t>(c_x)].c_str(), nullptr);
    rec.gaze.y_deg = std::strtod(fields[static_cast<std::size_t>(c_y)].c_str(), nullptr);
    rec.subject_id = std::stoi(fields[static_cast<std::size_t>(c_subject)]);
    rec.shift = shift;
    rec.bin = bin_shift(shift);
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace psog
