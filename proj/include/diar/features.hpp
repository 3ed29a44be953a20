#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "diar/audio.hpp"
#include "diar/log.hpp"

namespace diar {

enum class FeatureKind { LFCC, LFCC_CMN };

// T x D cepstral feature frames.
struct FeatureMatrix {
  Eigen::MatrixXd frames;
  double frame_shift = 0.0;   // seconds
  double frame_length = 0.0;  // seconds
  FeatureKind kind = FeatureKind::LFCC;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

struct LfccConfig {
  double frame_length = 0.025;
  double frame_shift = 0.010;
  int num_filters = 30;
  int num_coeffs = 20;
  double preemphasis = 0.97;  // 0 disables
  double log_floor = 1e-10;
};

namespace detail {

// In-place radix-2 Cooley-Tukey FFT. Size must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  if (n <= 1) return;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (j > i) std::swap(x[i], x[j]);
    std::size_t m = n >> 1;
    while (m >= 1 && j >= m) {
      j -= m;
      m >>= 1;
    }
    j += m;
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> t = w * x[i + k + len / 2];
        x[i + k] = u + t;
        x[i + k + len / 2] = u - t;
        w *= wlen;
      }
    }
  }
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Triangular filterbank with linearly spaced center frequencies over
// [0, nyquist], evaluated at FFT bin centers. Rows: filters, cols: bins.
inline Eigen::MatrixXd linear_filterbank(int num_filters, std::size_t fft_size,
                                         int sample_rate) {
  const auto num_bins = static_cast<Eigen::Index>(fft_size / 2 + 1);
  const double nyquist = sample_rate / 2.0;
  std::vector<double> edges(static_cast<std::size_t>(num_filters) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = nyquist * static_cast<double>(i) /
               static_cast<double>(num_filters + 1);

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(num_filters, num_bins);
  for (int m = 0; m < num_filters; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double c = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    for (Eigen::Index k = 0; k < num_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate /
                       static_cast<double>(fft_size);
      if (f > lo && f <= c)
        fb(m, k) = (f - lo) / (c - lo);
      else if (f > c && f < hi)
        fb(m, k) = (hi - f) / (hi - c);
    }
  }
  return fb;
}

// Orthonormal DCT-II basis, rows: coefficients, cols: filterbank channels.
inline Eigen::MatrixXd dct_basis(int num_coeffs, int num_filters) {
  Eigen::MatrixXd dct(num_coeffs, num_filters);
  const double m = static_cast<double>(num_filters);
  for (int k = 0; k < num_coeffs; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / m);
    for (int i = 0; i < num_filters; ++i)
      dct(k, i) = scale * std::cos(std::numbers::pi * k * (2 * i + 1) / (2.0 * m));
  }
  return dct;
}

}  // namespace detail

// Linear frequency cepstral coefficients: framing, Hamming window, magnitude
// spectrum, linearly spaced triangular filterbank, log, truncated DCT-II.
// Pre-emphasis runs on the whole signal before framing.
inline FeatureMatrix extract_lfcc(const AudioBuffer& audio,
                                  const LfccConfig& config = {}) {
  if (audio.sample_rate <= 0)
    throw std::invalid_argument("extract_lfcc: sample_rate must be > 0");
  if (config.num_coeffs <= 0 || config.num_filters < config.num_coeffs)
    throw std::invalid_argument(
        "extract_lfcc: need 0 < num_coeffs <= num_filters");
  if (!(config.frame_length > 0.0) || !(config.frame_shift > 0.0))
    throw std::invalid_argument("extract_lfcc: frame geometry must be > 0");

  const auto win =
      static_cast<std::size_t>(std::lround(config.frame_length * audio.sample_rate));
  const auto hop =
      static_cast<std::size_t>(std::lround(config.frame_shift * audio.sample_rate));
  if (win == 0 || hop == 0)
    throw std::invalid_argument("extract_lfcc: frame geometry below one sample");
  if (audio.samples.size() < win)
    throw std::invalid_argument(
        "extract_lfcc: audio shorter than one frame; feature matrix would be empty");

  const std::size_t num_frames = (audio.samples.size() - win) / hop + 1;

  std::vector<double> signal = audio.samples;
  if (config.preemphasis != 0.0)
    for (std::size_t i = signal.size(); i-- > 1;)
      signal[i] -= config.preemphasis * signal[i - 1];

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i /
                                       static_cast<double>(win - 1));

  const std::size_t fft_size = detail::next_pow2(win);
  const auto num_bins = static_cast<Eigen::Index>(fft_size / 2 + 1);
  const Eigen::MatrixXd fb =
      detail::linear_filterbank(config.num_filters, fft_size, audio.sample_rate);
  const Eigen::MatrixXd dct = detail::dct_basis(config.num_coeffs, config.num_filters);

  FeatureMatrix out;
  out.frame_shift = config.frame_shift;
  out.frame_length = config.frame_length;
  out.kind = FeatureKind::LFCC;
  out.frames.resize(static_cast<Eigen::Index>(num_frames), config.num_coeffs);

  std::vector<std::complex<double>> buf(fft_size);
  Eigen::VectorXd magnitude(num_bins);
  for (std::size_t f = 0; f < num_frames; ++f) {
    const std::size_t begin = f * hop;
    for (std::size_t i = 0; i < win; ++i)
      buf[i] = std::complex<double>(signal[begin + i] * window[i], 0.0);
    std::fill(buf.begin() + static_cast<std::ptrdiff_t>(win), buf.end(),
              std::complex<double>(0.0, 0.0));
    detail::fft_inplace(buf);
    for (Eigen::Index k = 0; k < num_bins; ++k)
      magnitude(k) = std::abs(buf[static_cast<std::size_t>(k)]);
    const Eigen::VectorXd energies =
        (fb * magnitude).cwiseMax(config.log_floor).array().log().matrix();
    out.frames.row(static_cast<Eigen::Index>(f)) = (dct * energies).transpose();
  }
  return out;
}

// Per-conversation cepstral mean normalization: every column of the output
// has zero mean.
inline FeatureMatrix apply_cmn(const FeatureMatrix& features) {
  if (features.kind != FeatureKind::LFCC)
    throw std::invalid_argument("apply_cmn: input must be raw LFCC");
  FeatureMatrix out = features;
  if (features.frames.rows() == 0) {
    warn("apply_cmn: empty feature matrix; no-op");
    return out;
  }
  const Eigen::RowVectorXd mean = features.frames.colwise().mean();
  out.frames.rowwise() -= mean;
  out.kind = FeatureKind::LFCC_CMN;
  return out;
}

}  // namespace diar
