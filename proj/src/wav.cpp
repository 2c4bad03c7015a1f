#include "respscl/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace respscl {

namespace {

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open wav file: " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw std::runtime_error("not a RIFF/WAVE file: " + path.string());
  }

  int channels = 0;
  int rate = 0;
  int bits = 0;
  int format = 0;
  size_t data_off = 0;
  size_t data_len = 0;

  size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + off);
    const uint32_t len = read_u32(bytes.data() + off + 4);
    const size_t body = off + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (body + 16 > bytes.size()) {
        throw std::runtime_error("truncated fmt chunk: " + path.string());
      }
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = static_cast<int>(read_u32(bytes.data() + body + 4));
      bits = read_u16(bytes.data() + body + 14);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = body;
      data_len = std::min<size_t>(len, bytes.size() - body);
    }
    off = body + len + (len & 1);
  }

  if (channels <= 0 || rate <= 0 || data_off == 0) {
    throw std::runtime_error("malformed wav file: " + path.string());
  }
  if (format != 1 && format != 3) {
    throw std::runtime_error("unsupported wav format tag " + std::to_string(format) +
                             ": " + path.string());
  }

  const int bytes_per_sample = bits / 8;
  if (bytes_per_sample <= 0) {
    throw std::runtime_error("bad bits-per-sample in " + path.string());
  }
  const size_t frame_size = static_cast<size_t>(bytes_per_sample) * channels;
  const size_t n_frames = data_len / frame_size;

  AudioData out;
  out.rate_hz = rate;
  out.samples.resize(n_frames);

  const unsigned char* d = bytes.data() + data_off;
  for (size_t f = 0; f < n_frames; ++f) {
    double acc = 0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* s = d + f * frame_size + static_cast<size_t>(c) * bytes_per_sample;
      double v = 0;
      if (format == 3 && bits == 32) {
        float fv;
        std::memcpy(&fv, s, 4);
        v = fv;
      } else if (format == 1 && bits == 16) {
        int16_t iv = static_cast<int16_t>(s[0] | (s[1] << 8));
        v = iv / 32768.0;
      } else if (format == 1 && bits == 24) {
        int32_t iv = s[0] | (s[1] << 8) | (s[2] << 16);
        if (iv & 0x800000) {
          iv |= ~0xffffff;
        }
        v = iv / 8388608.0;
      } else if (format == 1 && bits == 32) {
        int32_t iv;
        std::memcpy(&iv, s, 4);
        v = iv / 2147483648.0;
      } else {
        throw std::runtime_error("unsupported wav sample width " + std::to_string(bits) +
                                 ": " + path.string());
      }
      acc += v;
    }
    out.samples[f] = static_cast<float>(acc / channels);
  }
  return out;
}

void write_wav16(const std::filesystem::path& path,
                 const std::vector<float>& samples, int rate_hz) {
  if (rate_hz <= 0) {
    throw std::invalid_argument("write_wav16: rate must be positive");
  }
  std::string out;
  const uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(rate_hz));
  put_u32(out, static_cast<uint32_t>(rate_hz * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  out.append("data");
  put_u32(out, data_len);
  for (float s : samples) {
    const float clipped = std::clamp(s, -1.0f, 1.0f);
    const int v = static_cast<int>(std::lrintf(clipped * 32767.0f));
    put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw std::runtime_error("cannot write wav file: " + path.string());
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace respscl
