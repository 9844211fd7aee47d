#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace mfsr::cli {

struct Parallax {
  double ratio = 1.0;     ///< apparent ground-displacement ratio of the object top vs the ground
  double motion_lag = 0;  ///< metres the object top lags behind for the given ground motion
};

/// Satellite at `altitude_m` above ground, object of `height_m`: its top is
/// closer by `height_m`, so its displacement scales by altitude/(altitude -
/// height). Throws std::invalid_argument for non-physical inputs.
Parallax parallax_ratio(double altitude_m, double height_m, double ground_motion_m = 0.0);

/// sin(2 pi w(t) t) with w(t) = omega + slope t, times amplitude.
struct ChirpConfig {
  double hr_rate = 40.0;  ///< samples per second
  double lr_rate = 6.0;
  double duration = 4.0;  ///< seconds; samples cover [0, duration)
  double omega = 5.0;     ///< Hz at t = 0
  double slope = 0.0;     ///< Hz per second
  double amplitude = 1.0;
  double dense_rate = 0.0;  ///< grid of the continuous curve; 0 = 20 x max(hr_rate, lr_rate)
};

double chirp_value(const ChirpConfig& cfg, double t);

struct SampleTrain {
  std::vector<double> t;
  std::vector<double> value;
};

struct ChirpDemo {
  SampleTrain dense, hr, lr;
};

/// Samples t_n = n / rate for n < duration * rate. Throws on non-positive
/// rates or duration.
SampleTrain sample_chirp(const ChirpConfig& cfg, double rate);
ChirpDemo chirp_demo(const ChirpConfig& cfg);

/// Columns t,chirp,hr_samples,lr_samples; one row per distinct time, cells
/// left empty where a train has no sample at that time.
void write_chirp_csv(const ChirpDemo& demo, std::ostream& out);
ChirpDemo chirp_demo(const std::filesystem::path& out_csv, const ChirpConfig& cfg);

/// Frequency (Hz) of the largest non-DC DFT bin of a mean-removed sample
/// train. A signal is identified correctly only when rate > 2 x its highest
/// frequency.
double dominant_frequency(const std::vector<double>& samples, double rate);

}  // namespace mfsr::cli
