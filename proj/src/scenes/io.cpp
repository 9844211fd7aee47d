#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "mfsr/scenes/scene.hpp"

namespace mfsr::scenes {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(Band band) {
  switch (band) {
    case Band::red: return "RED";
    case Band::nir: return "NIR";
    case Band::synthetic: return "synthetic";
    case Band::unknown: break;
  }
  return "unknown";
}

Band parse_band(const std::string& text) {
  if (text == "RED") return Band::red;
  if (text == "NIR") return Band::nir;
  if (text == "synthetic") return Band::synthetic;
  return Band::unknown;
}

Tensor Scene::target_mask() const {
  if (hr_mask) return *hr_mask;
  if (!hr) throw DataError("scene '" + id + "' has no HR image");
  return Tensor::full(hr->shape(), 1.0);
}

void validate(const Scene& scene) {
  const std::string where = "scene '" + scene.id + "': ";
  if (scene.lr_views.empty()) throw DataError(where + "no low-res views");
  if (scene.lr_views.size() != scene.quality_maps.size()) throw DataError(where + "views and quality maps differ in count");
  const auto& shape = scene.lr_views[0].shape();
  if (shape.size() != 3 || shape[0] != 1) throw DataError(where + "views must be [1,h,w]");
  for (std::size_t i = 0; i < scene.lr_views.size(); ++i) {
    if (scene.lr_views[i].shape() != shape || scene.quality_maps[i].shape() != shape) {
      throw DataError(where + "view " + std::to_string(i) + " has shape " +
                      ndgrad::to_string(scene.lr_views[i].shape()) + ", expected " + ndgrad::to_string(shape));
    }
  }
  if (scene.zoom == 0) throw DataError(where + "zoom must be positive");
  const ndgrad::Shape hr_shape{1, shape[1] * scene.zoom, shape[2] * scene.zoom};
  if (scene.hr && scene.hr->shape() != hr_shape) {
    throw DataError(where + "HR shape " + ndgrad::to_string(scene.hr->shape()) + " does not match zoom " +
                    std::to_string(scene.zoom));
  }
  if (scene.hr_mask && scene.hr_mask->shape() != hr_shape) throw DataError(where + "SM shape does not match HR");
  if (!scene.oracle_shifts.empty() && scene.oracle_shifts.size() != scene.lr_views.size()) {
    throw DataError(where + "oracle shift count differs from view count");
  }
}

// ---- PNG ------------------------------------------------------------------------

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw DataError(std::string("libpng: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

}  // namespace

Tensor read_png(const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) throw DataError("libpng initialization failed");
  struct Guard {
    png_structp& p;
    png_infop& i;
    ~Guard() { png_destroy_read_struct(&p, &i, nullptr); }
  } guard{png, info};

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) throw DataError(path.string() + ": only grayscale PNG is supported");
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_swap(png);  // host order on little-endian readers below
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> buf(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = buf.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  Tensor out({1, height, width});
  const double maxval = depth == 16 ? 65535.0 : depth == 8 ? 255.0 : static_cast<double>((1 << depth) - 1);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double v;
      if (depth == 16) {
        const png_byte* p = rows[y] + 2 * x;
        v = static_cast<double>(p[0] | (p[1] << 8));
      } else {
        v = rows[y][x];
        // Expanded low-depth samples keep their original range.
        if (depth < 8) v = std::round(v * maxval / 255.0);
      }
      out[y * width + x] = v / maxval;
    }
  }
  return out;
}

void write_png(const Tensor& img, const fs::path& path) {
  if (img.rank() != 3 || img.dim(0) != 1) throw ndgrad::ShapeError("write_png: image must be [1,h,w]");
  const std::size_t h = img.dim(1), w = img.dim(2);
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) throw DataError("libpng initialization failed");
  struct Guard {
    png_structp& p;
    png_infop& i;
    ~Guard() { png_destroy_write_struct(&p, &i); }
  } guard{png, info};
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(2 * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto v = static_cast<unsigned>(std::lround(std::clamp(img[y * w + x], 0.0, 1.0) * 65535.0));
      row[2 * x] = static_cast<png_byte>(v >> 8);
      row[2 * x + 1] = static_cast<png_byte>(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

// ---- PGM ------------------------------------------------------------------------

Tensor read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    while (in >> std::ws && in.peek() == '#') in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    in >> t;
    return t;
  };
  if (token() != "P5") throw DataError(path.string() + " is not a binary PGM (P5)");
  std::size_t w = 0, h = 0;
  unsigned maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = static_cast<unsigned>(std::stoul(token()));
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed PGM header");
  }
  if (maxval == 0 || maxval > 65535) throw DataError(path.string() + ": bad PGM maxval");
  in.get();  // single whitespace before the raster
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(w * h * bytes);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw DataError(path.string() + ": truncated PGM raster");
  }
  Tensor out({1, h, w});
  for (std::size_t i = 0; i < w * h; ++i) {
    const unsigned v = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
    out[i] = static_cast<double>(v) / maxval;
  }
  return out;
}

void write_pgm(const Tensor& img, const fs::path& path) {
  if (img.rank() != 3 || img.dim(0) != 1) throw ndgrad::ShapeError("write_pgm: image must be [1,h,w]");
  const std::size_t h = img.dim(1), w = img.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << w << ' ' << h << "\n65535\n";
  std::vector<unsigned char> raw(2 * w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    const auto v = static_cast<unsigned>(std::lround(std::clamp(img[i], 0.0, 1.0) * 65535.0));
    raw[2 * i] = static_cast<unsigned char>(v >> 8);
    raw[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Tensor read_image(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm") return read_pgm(path);
  throw DataError("unsupported image extension: " + path.string());
}

void write_image(const Tensor& img, const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png") return write_png(img, path);
  if (ext == ".pgm") return write_pgm(img, path);
  throw DataError("unsupported image extension: " + path.string());
}

// ---- scenes -----------------------------------------------------------------------

namespace {

std::string indexed(const char* stem, std::size_t i, const std::string& ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%s%03zu", stem, i);
  return buf + ext;
}

std::string detect_extension(const fs::path& dir) {
  for (const char* ext : {".png", ".pgm"}) {
    if (fs::exists(dir / ("LR000" + std::string(ext)))) return ext;
  }
  throw DataError("no LR000.png or LR000.pgm in " + dir.string());
}

Tensor binarize(Tensor m) {
  for (double& v : m.values()) v = v != 0.0 ? 1.0 : 0.0;
  return m;
}

}  // namespace

Scene load_scene(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a scene directory: " + dir.string());
  const std::string ext = detect_extension(dir);
  Scene scene;
  scene.id = dir.filename().string();
  if (scene.id.empty()) scene.id = dir.parent_path().filename().string();
  for (std::size_t i = 0;; ++i) {
    const auto lr = dir / indexed("LR", i, ext);
    if (!fs::exists(lr)) break;
    const auto qm = dir / indexed("QM", i, ext);
    if (!fs::exists(qm)) throw DataError("missing quality map " + qm.string() + " for " + lr.filename().string());
    scene.lr_views.push_back(read_image(lr));
    scene.quality_maps.push_back(binarize(read_image(qm)));
  }
  if (fs::exists(dir / ("HR" + ext))) scene.hr = read_image(dir / ("HR" + ext));
  if (fs::exists(dir / ("SM" + ext))) scene.hr_mask = binarize(read_image(dir / ("SM" + ext)));

  const auto manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw DataError(manifest.string() + ": " + e.what());
    }
    scene.id = j.value("id", scene.id);
    scene.band = parse_band(j.value("band", std::string("unknown")));
    scene.zoom = j.value("zoom", std::size_t{3});
    if (j.contains("oracle_shifts")) {
      for (const auto& s : j["oracle_shifts"]) scene.oracle_shifts.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
    }
  } else {
    // PROBA-V keeps bands in RED/ and NIR/ parents.
    scene.band = parse_band(dir.parent_path().filename().string());
    if (scene.hr && !scene.lr_views.empty() && scene.lr_views[0].dim(1) > 0) {
      scene.zoom = scene.hr->dim(1) / scene.lr_views[0].dim(1);
    }
  }
  validate(scene);
  return scene;
}

std::vector<Scene> load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    if (fs::exists(entry.path() / "LR000.png") || fs::exists(entry.path() / "LR000.pgm")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DataError("no scenes under " + root.string());
  std::vector<Scene> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(load_scene(d));
  return out;
}

void write_scene(const Scene& scene, const fs::path& dir) {
  validate(scene);
  fs::create_directories(dir);
  for (std::size_t i = 0; i < scene.lr_views.size(); ++i) {
    write_pgm(scene.lr_views[i], dir / indexed("LR", i, ".pgm"));
    write_pgm(scene.quality_maps[i], dir / indexed("QM", i, ".pgm"));
  }
  if (scene.hr) write_pgm(*scene.hr, dir / "HR.pgm");
  if (scene.hr_mask) write_pgm(*scene.hr_mask, dir / "SM.pgm");
  json j;
  j["id"] = scene.id;
  j["band"] = to_string(scene.band);
  j["zoom"] = scene.zoom;
  j["views"] = scene.lr_views.size();
  json shifts = json::array();
  for (const auto& s : scene.oracle_shifts) shifts.push_back({s.dx, s.dy});
  j["oracle_shifts"] = shifts;
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("cannot write manifest in " + dir.string());
}

}  // namespace mfsr::scenes
