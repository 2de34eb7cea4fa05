#pragma once

// Memoryless channel simulation: received = h * sent + n with complex Gaussian
// noise of variance 10^(-snr_db/10) per symbol, h = 1 (AWGN) or a unit-power
// complex Gaussian gain (Rayleigh). BPSK and Gray-mapped 16-QAM, hard decisions.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "semrd/prob.hpp"

namespace semrd {

enum class ChannelKind { awgn, rayleigh };
enum class Csi { perfect, none };
enum class Modulation { bpsk, qam16 };

struct ChannelConfig {
  ChannelKind kind = ChannelKind::awgn;
  double snr_db = 20.0;
  std::uint64_t seed = 0;
  Csi csi = Csi::perfect;
  bool per_symbol_fading = false;  // default: one gain per block

  double noise_variance() const {
    if (!std::isfinite(snr_db)) throw invalid_input("channel: snr_db must be finite");
    return std::pow(10.0, -snr_db / 10.0);
  }
};

using cplx = std::complex<double>;

struct ComplexSymbolBlock {
  std::vector<cplx> symbols;
};

struct Transmission {
  ComplexSymbolBlock received;
  std::vector<cplx> gains;  // empty for AWGN; one entry per block, or per symbol
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for trial `index` of a Monte-Carlo run; partitions the seed space deterministically.
inline std::uint64_t trial_seed(std::uint64_t base, std::uint64_t index) { return splitmix64(base ^ splitmix64(index)); }

inline Transmission transmit(const ComplexSymbolBlock& block, const ChannelConfig& cfg) {
  const double n0 = cfg.noise_variance();
  std::mt19937_64 rng(cfg.seed);
  detail::StandardNormal normal;
  const double noise_sd = std::sqrt(n0 / 2.0);
  const double gain_sd = std::sqrt(0.5);
  Transmission out;
  out.received.symbols.resize(block.symbols.size());
  if (cfg.kind == ChannelKind::rayleigh && !cfg.per_symbol_fading) {
    const double re = normal(rng), im = normal(rng);
    out.gains.emplace_back(gain_sd * re, gain_sd * im);
  }
  for (std::size_t i = 0; i < block.symbols.size(); ++i) {
    cplx h{1.0, 0.0};
    if (cfg.kind == ChannelKind::rayleigh) {
      if (cfg.per_symbol_fading) {
        const double re = normal(rng), im = normal(rng);
        out.gains.emplace_back(gain_sd * re, gain_sd * im);
        h = out.gains.back();
      } else {
        h = out.gains.front();
      }
    }
    const double nr = normal(rng), ni = normal(rng);
    out.received.symbols[i] = h * block.symbols[i] + cplx(noise_sd * nr, noise_sd * ni);
  }
  return out;
}

inline int bits_per_symbol(Modulation m) { return m == Modulation::bpsk ? 1 : 4; }

namespace detail {

inline constexpr double kQamScale = 0.31622776601683794;  // 1 / sqrt(10)

// Gray-coded 4-PAM: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
inline double pam4_level(std::uint8_t b0, std::uint8_t b1) {
  if (b0 == 0) return b1 == 0 ? -3.0 : -1.0;
  return b1 == 0 ? 3.0 : 1.0;
}

inline void pam4_bits(double v, std::uint8_t& b0, std::uint8_t& b1) {
  if (v < -2.0) {
    b0 = 0, b1 = 0;
  } else if (v < 0.0) {
    b0 = 0, b1 = 1;
  } else if (v < 2.0) {
    b0 = 1, b1 = 1;
  } else {
    b0 = 1, b1 = 0;
  }
}

inline void check_bits(std::span<const std::uint8_t> bits, Modulation m) {
  if (bits.size() % static_cast<std::size_t>(bits_per_symbol(m)) != 0)
    throw invalid_input("modulate: bit count is not a multiple of bits per symbol");
  for (std::uint8_t b : bits)
    if (b > 1) throw invalid_input("modulate: bits must be 0 or 1");
}

}  // namespace detail

inline ComplexSymbolBlock modulate_bpsk(std::span<const std::uint8_t> bits) {
  detail::check_bits(bits, Modulation::bpsk);
  ComplexSymbolBlock b;
  b.symbols.reserve(bits.size());
  for (std::uint8_t bit : bits) b.symbols.emplace_back(bit ? -1.0 : 1.0, 0.0);
  return b;
}

inline ComplexSymbolBlock modulate_qam16(std::span<const std::uint8_t> bits) {
  detail::check_bits(bits, Modulation::qam16);
  ComplexSymbolBlock b;
  b.symbols.reserve(bits.size() / 4);
  for (std::size_t i = 0; i < bits.size(); i += 4)
    b.symbols.emplace_back(detail::kQamScale * detail::pam4_level(bits[i], bits[i + 1]),
                           detail::kQamScale * detail::pam4_level(bits[i + 2], bits[i + 3]));
  return b;
}

inline ComplexSymbolBlock modulate(Modulation m, std::span<const std::uint8_t> bits) {
  return m == Modulation::bpsk ? modulate_bpsk(bits) : modulate_qam16(bits);
}

namespace detail {

inline cplx equalize(const cplx& r, std::span<const cplx> gains, std::size_t i, Csi csi) {
  if (gains.empty() || csi == Csi::none) return r;
  const cplx h = gains.size() == 1 ? gains[0] : gains[i];
  return r / h;
}

}  // namespace detail

/// Hard decisions; with perfect CSI the received symbol is divided by its gain first.
inline std::vector<std::uint8_t> demodulate_bpsk(const ComplexSymbolBlock& rx, std::span<const cplx> gains = {}, Csi csi = Csi::perfect) {
  std::vector<std::uint8_t> bits;
  bits.reserve(rx.symbols.size());
  for (std::size_t i = 0; i < rx.symbols.size(); ++i) bits.push_back(detail::equalize(rx.symbols[i], gains, i, csi).real() < 0.0 ? 1 : 0);
  return bits;
}

inline std::vector<std::uint8_t> demodulate_qam16(const ComplexSymbolBlock& rx, std::span<const cplx> gains = {}, Csi csi = Csi::perfect) {
  std::vector<std::uint8_t> bits;
  bits.reserve(rx.symbols.size() * 4);
  for (std::size_t i = 0; i < rx.symbols.size(); ++i) {
    const cplx s = detail::equalize(rx.symbols[i], gains, i, csi) / detail::kQamScale;
    std::uint8_t b[4];
    detail::pam4_bits(s.real(), b[0], b[1]);
    detail::pam4_bits(s.imag(), b[2], b[3]);
    bits.insert(bits.end(), b, b + 4);
  }
  return bits;
}

inline std::vector<std::uint8_t> demodulate(Modulation m, const ComplexSymbolBlock& rx, std::span<const cplx> gains = {},
                                            Csi csi = Csi::perfect) {
  return m == Modulation::bpsk ? demodulate_bpsk(rx, gains, csi) : demodulate_qam16(rx, gains, csi);
}

// ---------------------------------------------------------------------------
// Closed-form error rates

inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Q(sqrt(2 snr)).
inline double bpsk_awgn_ber(double snr_linear) { return q_function(std::sqrt(2.0 * snr_linear)); }

/// 1/2 (1 - sqrt(snr / (1 + snr))), averaged over i.i.d. Rayleigh gains.
inline double bpsk_rayleigh_ber(double mean_snr_linear) {
  return 0.5 * (1.0 - std::sqrt(mean_snr_linear / (1.0 + mean_snr_linear)));
}

/// Exact symbol error rate of square 16-QAM with unit average energy.
inline double qam16_awgn_ser(double snr_linear) {
  const double p = 1.5 * q_function(std::sqrt(snr_linear / 5.0));
  return 1.0 - (1.0 - p) * (1.0 - p);
}

// ---------------------------------------------------------------------------
// Monte-Carlo error-rate measurement

struct ErrorRateMeasurement {
  Modulation modulation = Modulation::bpsk;
  ChannelKind kind = ChannelKind::awgn;
  double snr_db = 0.0;
  std::uint64_t symbols = 0;
  std::uint64_t symbol_errors = 0;
  std::uint64_t bits = 0;
  std::uint64_t bit_errors = 0;

  double ser() const { return symbols ? static_cast<double>(symbol_errors) / static_cast<double>(symbols) : 0.0; }
  double ber() const { return bits ? static_cast<double>(bit_errors) / static_cast<double>(bits) : 0.0; }
};

/// Sends `n_symbols` random symbols in blocks of `block_length`, each block with its own
/// partitioned seed. Rayleigh gains are per block unless cfg.per_symbol_fading.
inline ErrorRateMeasurement measure_error_rates(Modulation mod, const ChannelConfig& cfg, std::uint64_t n_symbols,
                                                std::size_t block_length = 4096) {
  if (block_length == 0) throw invalid_input("measure_error_rates: block_length must be >= 1");
  ErrorRateMeasurement m;
  m.modulation = mod;
  m.kind = cfg.kind;
  m.snr_db = cfg.snr_db;
  const int bps = bits_per_symbol(mod);
  std::mt19937_64 bit_rng(trial_seed(cfg.seed, ~std::uint64_t{0}));
  std::vector<std::uint8_t> bits;
  std::uint64_t sent = 0;
  for (std::uint64_t blk = 0; sent < n_symbols; ++blk) {
    const std::size_t len = static_cast<std::size_t>(std::min<std::uint64_t>(block_length, n_symbols - sent));
    bits.resize(len * static_cast<std::size_t>(bps));
    for (auto& b : bits) b = static_cast<std::uint8_t>(bit_rng() >> 63);
    ChannelConfig c = cfg;
    c.seed = trial_seed(cfg.seed, blk);
    const Transmission t = transmit(modulate(mod, bits), c);
    const auto rx = demodulate(mod, t.received, t.gains, cfg.csi);
    for (std::size_t s = 0; s < len; ++s) {
      bool wrong = false;
      for (int k = 0; k < bps; ++k) {
        const std::size_t i = s * static_cast<std::size_t>(bps) + static_cast<std::size_t>(k);
        if (rx[i] != bits[i]) {
          wrong = true;
          ++m.bit_errors;
        }
      }
      if (wrong) ++m.symbol_errors;
    }
    sent += len;
  }
  m.symbols = n_symbols;
  m.bits = n_symbols * static_cast<std::uint64_t>(bps);
  return m;
}

// ---------------------------------------------------------------------------
// Index-level channel for the discrete pipeline

inline void check_flip_prob(double flip_prob) {
  if (!(flip_prob >= 0.0 && flip_prob < 1.0)) throw invalid_input("index_channel: flip_prob must be in [0, 1)");
}

/// Each index is replaced, with probability flip_prob, by a uniformly chosen different index.
inline std::vector<std::size_t> index_channel(std::span<const std::size_t> indices, std::size_t alphabet, double flip_prob,
                                              std::uint64_t seed) {
  check_flip_prob(flip_prob);
  if (alphabet < 2 && flip_prob > 0.0) throw invalid_input("index_channel: need at least 2 symbols to flip");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out(indices.begin(), indices.end());
  for (auto& v : out) {
    if (v >= alphabet) throw invalid_input("index_channel: index outside alphabet");
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u < flip_prob) {
      std::size_t other = static_cast<std::size_t>(detail::uniform_below(rng, alphabet - 1));
      if (other >= v) ++other;
      v = other;
    }
  }
  return out;
}

/// Transition matrix of index_channel.
inline ConditionalDistribution index_channel_matrix(std::size_t alphabet, double flip_prob) {
  check_flip_prob(flip_prob);
  if (alphabet == 1) return ConditionalDistribution::identity(1);
  Matrix t(alphabet, alphabet, flip_prob / static_cast<double>(alphabet - 1));
  for (std::size_t i = 0; i < alphabet; ++i) t(i, i) = 1.0 - flip_prob;
  return ConditionalDistribution(std::move(t));
}

/// Probability that a uniformly packed index of `alphabet` symbols arrives with at least one bit error.
inline double flip_prob_for_snr(double snr_db, std::size_t alphabet, ChannelKind kind) {
  const double g = db_to_linear(snr_db);
  const double ber = kind == ChannelKind::awgn ? bpsk_awgn_ber(g) : bpsk_rayleigh_ber(g);
  int bits = 0;
  while ((std::size_t{1} << bits) < alphabet) ++bits;
  return std::min(1.0 - std::pow(1.0 - ber, bits), std::nextafter(1.0, 0.0));
}

}  // namespace semrd
