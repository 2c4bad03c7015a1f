#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "respscl/manifest.h"

namespace respscl {

struct Waveform {
  std::vector<float> samples;
  int rate_hz = 16000;

  double duration_s() const {
    return rate_hz > 0 ? static_cast<double>(samples.size()) / rate_hz : 0.0;
  }
};

enum class ShortCycle { Tile, ZeroPad };

struct MelParams {
  int n_mels = 64;
  int win = 1024;  // STFT window, power of two
  int hop = 512;
  double f_min = 50.0;
  double f_max = 2000.0;
  int rate = 16000;
  double max_cycle_s = 8.0;  // hard cap on cycle duration
  double min_cycle_s = 8.0;  // short cycles are extended to this length
  double log_floor = 1e-10;
  bool center_pad = true;    // reflect-pad by win/2 on both sides
  bool standardize = true;   // per-spectrogram zero mean / unit variance
  ShortCycle short_cycle = ShortCycle::Tile;

  void validate() const;       // throws std::invalid_argument
  uint64_t fingerprint() const;
};

using MelGrid =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Log-mel grid, rows = mel bins, cols = frames.
struct MelGram {
  MelGrid grid;
  MelParams params;

  int n_mels() const { return static_cast<int>(grid.rows()); }
  int n_frames() const { return static_cast<int>(grid.cols()); }
};

// Band-limited (windowed-sinc) resampling. Identity passthrough when the
// rates already match; empty input stays empty.
Waveform resample(const Waveform& w, int target_hz);

// Cuts [start_s, end_s) out of a recording, caps at max_cycle_s and extends
// short cycles to min_cycle_s by tiling (or zero padding). Boundaries outside
// the recording are clamped with a warning; an empty result is an error.
Waveform slice_cycle(const Waveform& recording, const CycleRecord& rec,
                     const MelParams& p);

int frame_count(int64_t n_samples, const MelParams& p);

// Triangular mel filterbank rows over [f_min, f_max], HTK mel scale,
// [n_mels x (win/2 + 1)].
Eigen::MatrixXd mel_filterbank(const MelParams& p);
std::vector<double> mel_center_freqs(const MelParams& p);

// STFT magnitude -> mel filterbank -> log(x + log_floor), then optional
// per-spectrogram standardization.
MelGram melgram(const Waveform& w, const MelParams& p);

// In-place radix-2 complex FFT; x.size() must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& x, bool inverse = false);

// Feature cache: `<stem>.f32` raw little-endian float32 row-major payload and
// `<stem>.hdr` text sidecar (dims + params hash).
void write_feature(const std::filesystem::path& stem, const MelGram& m);
MelGram read_feature(const std::filesystem::path& stem, const MelParams& expected);

}  // namespace respscl
