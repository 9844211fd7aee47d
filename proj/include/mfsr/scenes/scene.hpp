#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfsr/ndgrad/tensor.hpp"
#include "mfsr/shiftlanczos/lanczos.hpp"

namespace mfsr::scenes {

using ndgrad::Tensor;
using shiftlanczos::Shift;

/// Raised for missing, unreadable or inconsistent dataset files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Band { red, nir, synthetic, unknown };
std::string to_string(Band band);
Band parse_band(const std::string& text);

/// One site: K low-res views with quality maps (1 = clear), optional
/// high-res target and its status map. Images are [1, h, w] in [0, 1].
struct Scene {
  std::string id;
  std::vector<Tensor> lr_views;
  std::vector<Tensor> quality_maps;
  std::optional<Tensor> hr;
  std::optional<Tensor> hr_mask;
  Band band = Band::unknown;
  std::size_t zoom = 3;
  /// Per-view translation in low-res pixels (synthetic scenes only).
  std::vector<Shift> oracle_shifts;

  std::size_t num_views() const { return lr_views.size(); }
  std::size_t height() const { return lr_views.at(0).dim(1); }
  std::size_t width() const { return lr_views.at(0).dim(2); }
  /// hr_mask if present, otherwise all clear.
  Tensor target_mask() const;
};

/// Throws DataError if the scene breaks its shape invariants.
void validate(const Scene& scene);

// ---- file I/O ---------------------------------------------------------------

/// Grayscale PNG (1/2/4/8/16 bit) as [1, h, w], scaled to [0, 1].
Tensor read_png(const std::filesystem::path& path);
/// 16-bit grayscale PNG; values are clamped to [0, 1] and scaled by 65535.
void write_png(const Tensor& img, const std::filesystem::path& path);
/// Binary PGM (P5), 8- or 16-bit big-endian, as [1, h, w] in [0, 1].
Tensor read_pgm(const std::filesystem::path& path);
void write_pgm(const Tensor& img, const std::filesystem::path& path);
/// Dispatches on the extension (.png or .pgm).
Tensor read_image(const std::filesystem::path& path);
void write_image(const Tensor& img, const std::filesystem::path& path);

/// Reads LR%03d / QM%03d pairs plus optional HR and SM, as PNG or PGM. An
/// optional manifest.json supplies band, zoom and oracle shifts. Quality
/// maps are binarized (nonzero = clear).
Scene load_scene(const std::filesystem::path& dir);

/// Every immediate subdirectory holding an LR000 file, sorted by name.
std::vector<Scene> load_dataset(const std::filesystem::path& root);

/// Writes `scene` as 16-bit PGM files plus manifest.json.
void write_scene(const Scene& scene, const std::filesystem::path& dir);

// ---- views ------------------------------------------------------------------

/// Clear-pixel count of each quality map. Throws on non-binary values.
std::vector<std::size_t> clearance(const Scene& scene);

inline constexpr double kBetaInfinity = std::numeric_limits<double>::infinity();

/// Draws k distinct indices without replacement with p(i) proportional to
/// exp(beta * c_i) over the remaining views, where c_i is the clearance
/// divided by `pixels`. beta = +inf yields the k clearest views (ties by
/// index). The result is in draw order.
std::vector<std::size_t> sample_views(const std::vector<std::size_t>& clearances, std::size_t pixels,
                                      std::size_t k, double beta, std::uint64_t seed);
std::vector<std::size_t> sample_views(const Scene& scene, std::size_t k, double beta, std::uint64_t seed);

/// Indices ordered clearest first, ties by index.
std::vector<std::size_t> clearest_first(const std::vector<std::size_t>& clearances);

enum class ReferenceMode { median, mean, none };
std::string to_string(ReferenceMode mode);
ReferenceMode parse_reference_mode(const std::string& text);

/// Per-pixel median (lower median for an even count) or mean of the views;
/// `none` gives zeros.
Tensor reference_frame(const std::vector<Tensor>& views, ReferenceMode mode = ReferenceMode::median);

std::size_t next_power_of_two(std::size_t n);

struct PaddedSet {
  std::vector<Tensor> views;
  std::vector<std::uint8_t> alpha;  ///< 1 for real views, 0 for zero padding
};

/// Appends zero views up to target_k. Throws if there are more views than that.
PaddedSet pad_imageset(const std::vector<Tensor>& views, std::size_t target_k);

/// Crop of every view, quality map, HR and HR mask to a patch x patch low-res
/// window with a random origin drawn from `seed`. The HR window starts at
/// zoom times the low-res origin.
struct Patch {
  Scene scene;
  std::size_t top = 0;
  std::size_t left = 0;
};
Patch patchify(const Scene& scene, std::size_t patch, std::uint64_t seed);
Patch crop_scene(const Scene& scene, std::size_t top, std::size_t left, std::size_t patch);

// ---- synthetic data ---------------------------------------------------------

struct SynthConfig {
  std::size_t lr_size = 48;
  std::size_t views = 16;
  std::size_t zoom = 3;
  double noise_sigma = 0.02;
  /// Expected occluded fraction of a view.
  double cloud_rate = 0.1;
  /// Per-axis shifts are uniform in [-max_shift, max_shift] low-res pixels.
  double max_shift = 1.5;
  /// Blur of the band-limited field, in high-res pixels.
  double field_sigma = 2.5;
  std::size_t polygons = 6;
};

/// Procedural scene: smooth random field plus filled polygons at high
/// resolution; each view is a Lanczos-shifted copy, box-averaged by zoom,
/// with Gaussian noise and bright occluding blobs marked in its quality map.
Scene synth_scene(const SynthConfig& cfg, std::uint64_t seed, const std::string& id = "synthetic");

/// Generates `count` scenes named scene000, scene001, ... under `root`, plus
/// a root manifest.json. Scene i uses seed + i.
std::vector<Scene> synth_dataset(const std::filesystem::path& root, std::size_t count, const SynthConfig& cfg,
                                 std::uint64_t seed);

// ---- splits -----------------------------------------------------------------

std::uint64_t fnv1a(const std::string& text);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Scene ids whose FNV-1a hash falls in the last `val_percent` of 100
/// buckets go to validation.
Split split_by_id(const std::vector<Scene>& scenes, std::size_t val_percent = 10);

}  // namespace mfsr::scenes
