#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace diar {

// Mono PCM audio, samples in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
};

// Reads 16-bit linear PCM WAV, mono only.
inline AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_wav: cannot open '" + path + "'");

  char riff[4], wave[4];
  std::uint32_t riff_size = 0;
  in.read(riff, 4);
  in.read(reinterpret_cast<char*>(&riff_size), 4);
  in.read(wave, 4);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    throw std::runtime_error("read_wav: '" + path + "' is not a RIFF/WAVE file");

  AudioBuffer audio;
  std::uint16_t format = 0, channels = 0, bits = 0;
  bool have_fmt = false;
  while (in) {
    char id[4];
    std::uint32_t size = 0;
    in.read(id, 4);
    in.read(reinterpret_cast<char*>(&size), 4);
    if (!in) break;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      std::vector<char> fmt(size);
      in.read(fmt.data(), size);
      if (size < 16) throw std::runtime_error("read_wav: malformed fmt chunk");
      std::memcpy(&format, fmt.data(), 2);
      std::memcpy(&channels, fmt.data() + 2, 2);
      std::uint32_t rate = 0;
      std::memcpy(&rate, fmt.data() + 4, 4);
      std::memcpy(&bits, fmt.data() + 14, 2);
      audio.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("read_wav: data before fmt chunk");
      if (format != 1 || bits != 16)
        throw std::runtime_error("read_wav: only 16-bit linear PCM supported");
      if (channels != 1)
        throw std::runtime_error("read_wav: only mono supported (got " +
                                 std::to_string(channels) + " channels)");
      const std::size_t count = size / 2;
      std::vector<std::int16_t> raw(count);
      in.read(reinterpret_cast<char*>(raw.data()),
              static_cast<std::streamsize>(size));
      audio.samples.resize(count);
      for (std::size_t i = 0; i < count; ++i)
        audio.samples[i] = static_cast<double>(raw[i]) / 32768.0;
      return audio;
    } else {
      in.seekg(size + (size & 1u), std::ios::cur);
    }
  }
  throw std::runtime_error("read_wav: no data chunk in '" + path + "'");
}

inline void write_wav(const std::string& path, const AudioBuffer& audio) {
  if (audio.sample_rate <= 0)
    throw std::invalid_argument("write_wav: sample_rate must be > 0");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_wav: cannot open '" + path + "'");

  const std::uint32_t data_size =
      static_cast<std::uint32_t>(audio.samples.size() * 2);
  const std::uint32_t riff_size = 36 + data_size;
  const std::uint32_t rate = static_cast<std::uint32_t>(audio.sample_rate);
  const std::uint32_t byte_rate = rate * 2;
  const std::uint16_t fmt = 1, channels = 1, block = 2, bits = 16;
  const std::uint32_t fmt_size = 16;

  out.write("RIFF", 4);
  out.write(reinterpret_cast<const char*>(&riff_size), 4);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  out.write(reinterpret_cast<const char*>(&fmt_size), 4);
  out.write(reinterpret_cast<const char*>(&fmt), 2);
  out.write(reinterpret_cast<const char*>(&channels), 2);
  out.write(reinterpret_cast<const char*>(&rate), 4);
  out.write(reinterpret_cast<const char*>(&byte_rate), 4);
  out.write(reinterpret_cast<const char*>(&block), 2);
  out.write(reinterpret_cast<const char*>(&bits), 2);
  out.write("data", 4);
  out.write(reinterpret_cast<const char*>(&data_size), 4);
  for (double s : audio.samples) {
    const double clipped = std::max(-1.0, std::min(1.0, s));
    const auto v = static_cast<std::int16_t>(std::lround(clipped * 32767.0));
    out.write(reinterpret_cast<const char*>(&v), 2);
  }
}

}  // namespace diar
