#include "respscl/dsp.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "respscl/common.h"

namespace respscl {

namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Mirror an index into [0, n) without repeating the edge sample.
int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) {
    return 0;
  }
  const int64_t period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

}  // namespace

void MelParams::validate() const {
  if (n_mels <= 0) throw std::invalid_argument("mel.n_mels must be positive");
  if (!is_pow2(win)) throw std::invalid_argument("mel.win must be a power of two");
  if (hop <= 0) throw std::invalid_argument("mel.hop must be positive");
  if (win < hop) throw std::invalid_argument("mel.win must be >= mel.hop");
  if (rate <= 0) throw std::invalid_argument("mel.rate must be positive");
  if (!(f_min >= 0 && f_min < f_max && f_max <= rate / 2.0)) {
    throw std::invalid_argument("mel range must satisfy 0 <= f_min < f_max <= rate/2");
  }
  if (max_cycle_s <= 0) throw std::invalid_argument("mel.max_cycle_s must be positive");
  if (min_cycle_s < 0) throw std::invalid_argument("mel.min_cycle_s must be >= 0");
  if (log_floor <= 0) throw std::invalid_argument("mel.log_floor must be positive");
}

uint64_t MelParams::fingerprint() const {
  std::ostringstream os;
  os << n_mels << '|' << win << '|' << hop << '|' << f_min << '|' << f_max << '|'
     << rate << '|' << max_cycle_s << '|' << min_cycle_s << '|' << log_floor << '|'
     << center_pad << '|' << standardize << '|'
     << (short_cycle == ShortCycle::Tile ? "tile" : "zeropad");
  return fnv1a64(os.str());
}

Waveform resample(const Waveform& w, int target_hz) {
  if (target_hz <= 0) {
    throw std::invalid_argument("resample: target rate must be positive");
  }
  if (w.samples.empty()) {
    return Waveform{{}, target_hz};
  }
  if (w.rate_hz == target_hz) {
    return w;
  }

  const double ratio = static_cast<double>(w.rate_hz) / target_hz;
  const int64_t in_len = static_cast<int64_t>(w.samples.size());
  const int64_t out_len =
      std::max<int64_t>(1, llround(static_cast<double>(in_len) / ratio));

  // Kernel: sinc low-passed at the narrower Nyquist, Hann-windowed,
  // 32 zero crossings per side at the scaled rate.
  const double scale = std::min(1.0, 1.0 / ratio);
  const double half_width = 32.0 / scale;

  Waveform out;
  out.rate_hz = target_hz;
  out.samples.resize(out_len);
  for (int64_t n = 0; n < out_len; ++n) {
    const double center = n * ratio;
    const int64_t k0 = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(center - half_width)));
    const int64_t k1 = std::min<int64_t>(in_len - 1, static_cast<int64_t>(std::floor(center + half_width)));
    double acc = 0;
    for (int64_t k = k0; k <= k1; ++k) {
      const double x = k - center;
      const double sx = scale * x;
      const double sinc = sx == 0.0 ? 1.0 : std::sin(std::numbers::pi * sx) / (std::numbers::pi * sx);
      const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * x / half_width);
      acc += w.samples[static_cast<size_t>(k)] * scale * sinc * win;
    }
    out.samples[static_cast<size_t>(n)] = static_cast<float>(acc);
  }
  return out;
}

Waveform slice_cycle(const Waveform& recording, const CycleRecord& rec,
                     const MelParams& p) {
  const int64_t len = static_cast<int64_t>(recording.samples.size());
  const int rate = recording.rate_hz;
  int64_t i0 = llround(rec.start_s * rate);
  int64_t i1 = llround(rec.end_s * rate);
  if (i0 < 0 || i1 > len) {
    std::cerr << "warning: cycle " << rec.cycle_id
              << " boundaries clamped to recording length\n";
  }
  i0 = std::clamp<int64_t>(i0, 0, len);
  i1 = std::clamp<int64_t>(i1, 0, len);
  i1 = std::min(i1, i0 + llround(p.max_cycle_s * rate));
  if (i1 <= i0) {
    throw std::runtime_error("empty cycle: " + rec.cycle_id);
  }

  Waveform out;
  out.rate_hz = rate;
  out.samples.assign(recording.samples.begin() + i0, recording.samples.begin() + i1);

  const int64_t min_len = llround(p.min_cycle_s * rate);
  if (static_cast<int64_t>(out.samples.size()) < min_len) {
    const int64_t base = static_cast<int64_t>(out.samples.size());
    out.samples.resize(static_cast<size_t>(min_len));
    for (int64_t k = base; k < min_len; ++k) {
      out.samples[static_cast<size_t>(k)] =
          p.short_cycle == ShortCycle::Tile ? out.samples[static_cast<size_t>(k % base)]
                                            : 0.0f;
    }
  }
  return out;
}

int frame_count(int64_t n_samples, const MelParams& p) {
  if (p.center_pad) {
    return static_cast<int>(1 + n_samples / p.hop);
  }
  if (n_samples < p.win) {
    return 0;
  }
  return static_cast<int>(1 + (n_samples - p.win) / p.hop);
}

Eigen::MatrixXd mel_filterbank(const MelParams& p) {
  const int n_bins = p.win / 2 + 1;
  const double bin_hz = static_cast<double>(p.rate) / p.win;
  const double m_lo = hz_to_mel(p.f_min);
  const double m_hi = hz_to_mel(p.f_max);

  std::vector<double> edges(static_cast<size_t>(p.n_mels) + 2);
  for (int i = 0; i < p.n_mels + 2; ++i) {
    edges[static_cast<size_t>(i)] =
        mel_to_hz(m_lo + (m_hi - m_lo) * i / (p.n_mels + 1));
  }

  Eigen::MatrixXd bank = Eigen::MatrixXd::Zero(p.n_mels, n_bins);
  for (int m = 0; m < p.n_mels; ++m) {
    const double f0 = edges[static_cast<size_t>(m)];
    const double f1 = edges[static_cast<size_t>(m) + 1];
    const double f2 = edges[static_cast<size_t>(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0;
      if (f > f0 && f < f1) {
        w = (f - f0) / (f1 - f0);
      } else if (f >= f1 && f < f2) {
        w = (f2 - f) / (f2 - f1);
      } else if (f == f1) {
        w = 1.0;
      }
      bank(m, k) = w;
    }
  }
  return bank;
}

std::vector<double> mel_center_freqs(const MelParams& p) {
  const double m_lo = hz_to_mel(p.f_min);
  const double m_hi = hz_to_mel(p.f_max);
  std::vector<double> out(static_cast<size_t>(p.n_mels));
  for (int m = 0; m < p.n_mels; ++m) {
    out[static_cast<size_t>(m)] = mel_to_hz(m_lo + (m_hi - m_lo) * (m + 1) / (p.n_mels + 1));
  }
  return out;
}

void fft_radix2(std::vector<std::complex<double>>& x, bool inverse) {
  const size_t n = x.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw std::invalid_argument("fft_radix2: size must be a power of two");
  }
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) {
      j ^= bit;
    }
    j ^= bit;
    if (i < j) {
      std::swap(x[i], x[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1 : -1);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& v : x) {
      v /= static_cast<double>(n);
    }
  }
}

MelGram melgram(const Waveform& w, const MelParams& p) {
  p.validate();
  if (w.rate_hz != p.rate) {
    throw std::invalid_argument("melgram: waveform rate " + std::to_string(w.rate_hz) +
                                " does not match configured rate " +
                                std::to_string(p.rate));
  }
  const int64_t len = static_cast<int64_t>(w.samples.size());
  if (len == 0) {
    throw std::runtime_error("melgram: empty signal");
  }
  if (!p.center_pad && len < p.win) {
    throw std::runtime_error("melgram: signal shorter than window (" +
                             std::to_string(len) + " < " + std::to_string(p.win) + ")");
  }
  const int frames = frame_count(len, p);
  const int n_bins = p.win / 2 + 1;

  std::vector<double> window(static_cast<size_t>(p.win));
  for (int i = 0; i < p.win; ++i) {
    window[static_cast<size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / p.win);
  }

  const Eigen::MatrixXd bank = mel_filterbank(p);

  auto sample_at = [&](int64_t i) -> double {
    if (p.center_pad) {
      return w.samples[static_cast<size_t>(reflect_index(i, len))];
    }
    return (i >= 0 && i < len) ? w.samples[static_cast<size_t>(i)] : 0.0;
  };
  const int64_t offset = p.center_pad ? -p.win / 2 : 0;

  MelGram out;
  out.params = p;
  out.grid.resize(p.n_mels, frames);

  std::vector<std::complex<double>> buf(static_cast<size_t>(p.win));
  Eigen::VectorXd mag(n_bins);
  for (int f = 0; f < frames; ++f) {
    const int64_t start = offset + static_cast<int64_t>(f) * p.hop;
    for (int i = 0; i < p.win; ++i) {
      buf[static_cast<size_t>(i)] = {sample_at(start + i) * window[static_cast<size_t>(i)], 0.0};
    }
    fft_radix2(buf);
    for (int k = 0; k < n_bins; ++k) {
      mag(k) = std::abs(buf[static_cast<size_t>(k)]);
    }
    const Eigen::VectorXd mel = bank * mag;
    for (int m = 0; m < p.n_mels; ++m) {
      out.grid(m, f) = static_cast<float>(std::log(mel(m) + p.log_floor));
    }
  }

  if (p.standardize) {
    const double mean = out.grid.cast<double>().mean();
    const double var =
        (out.grid.cast<double>().array() - mean).square().sum() /
        static_cast<double>(out.grid.size());
    const double sd = std::sqrt(var);
    if (sd > 1e-12) {
      out.grid = ((out.grid.cast<double>().array() - mean) / sd).cast<float>();
    } else {
      out.grid.setZero();
    }
  }
  return out;
}

namespace {
constexpr const char* kFeatureMagic = "respscl.mel.v1";
}

void write_feature(const std::filesystem::path& stem, const MelGram& m) {
  const std::filesystem::path data = stem.string() + ".f32";
  const std::filesystem::path hdr = stem.string() + ".hdr";
  {
    std::ofstream out(data, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write feature file: " + data.string());
    }
    out.write(reinterpret_cast<const char*>(m.grid.data()),
              static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(m.grid.size())));
  }
  std::ofstream out(hdr, std::ios::trunc);
  out << kFeatureMagic << ' ' << m.grid.rows() << ' ' << m.grid.cols() << ' '
      << hex64(m.params.fingerprint()) << "\n";
}

MelGram read_feature(const std::filesystem::path& stem, const MelParams& expected) {
  const std::filesystem::path data = stem.string() + ".f32";
  const std::filesystem::path hdr = stem.string() + ".hdr";
  std::ifstream hin(hdr);
  if (!hin) {
    throw std::runtime_error("cannot open feature header: " + hdr.string());
  }
  std::string magic, hash;
  int64_t rows = 0, cols = 0;
  hin >> magic >> rows >> cols >> hash;
  if (magic != kFeatureMagic || rows <= 0 || cols <= 0) {
    throw std::runtime_error("bad feature header: " + hdr.string());
  }
  if (hash != hex64(expected.fingerprint())) {
    throw std::runtime_error("feature params hash mismatch: " + hdr.string());
  }
  MelGram m;
  m.params = expected;
  m.grid.resize(rows, cols);
  std::ifstream din(data, std::ios::binary);
  if (!din) {
    throw std::runtime_error("cannot open feature file: " + data.string());
  }
  din.read(reinterpret_cast<char*>(m.grid.data()),
           static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(rows * cols)));
  if (din.gcount() != static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(rows * cols))) {
    throw std::runtime_error("truncated feature file: " + data.string());
  }
  return m;
}

}  // namespace respscl
