#pragma once

#include <filesystem>
#include <vector>

namespace respscl {

struct AudioData {
  std::vector<float> samples;  // mono, [-1, 1]
  int rate_hz = 0;
};

// Reads a RIFF/WAVE file. Supports PCM 16/24/32-bit and IEEE float32.
// Multi-channel input is downmixed to mono by averaging.
AudioData read_wav(const std::filesystem::path& path);

// Writes mono 16-bit PCM. Samples are clipped to [-1, 1] before quantizing.
void write_wav16(const std::filesystem::path& path,
                 const std::vector<float>& samples, int rate_hz);

}  // namespace respscl
