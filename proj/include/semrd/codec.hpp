#pragma once

// Quantization, Gaussian-mixture integer PMF, rate estimation and a bit-exact
// range coder for integer symbol streams.
//
// Payload layout (all integers and floats big-endian):
//   "SRDC" | version u8 | M u8 | M x (weight f64, mean f64, scale f64)
//   | z_min i32 | z_max i32 | count u64 | crc32 u32 | range-coded body
// The crc covers every header byte before it and the body. The body's trailing
// zero bytes are not stored; the decoder reads zeros past the end.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "semrd/error.hpp"

namespace semrd {

struct GmmPmfModel {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> scales;

  std::size_t components() const noexcept { return weights.size(); }

  void validate() const {
    if (weights.empty()) throw invalid_input("gmm: needs at least one component");
    if (weights.size() != means.size() || weights.size() != scales.size()) throw dimension_error("gmm: parameter arrays differ in length");
    if (weights.size() > 255) throw invalid_input("gmm: at most 255 components");
    double sum = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) {
      if (!(weights[m] >= 0.0) || !std::isfinite(means[m]) || !std::isfinite(scales[m]))
        throw invalid_input("gmm: invalid parameter in component " + std::to_string(m));
      if (!(scales[m] >= 1e-6)) throw invalid_input("gmm: scale below 1e-6 in component " + std::to_string(m));
      sum += weights[m];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw invalid_input("gmm: weights do not sum to 1");
  }

  double max_scale() const { return *std::max_element(scales.begin(), scales.end()); }
};

struct SymbolStream {
  std::vector<std::int32_t> values;
  std::int32_t z_min = 0;
  std::int32_t z_max = 0;

  void validate() const {
    if (z_min > z_max && !values.empty()) throw invalid_input("symbol stream: z_min > z_max");
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] < z_min || values[i] > z_max) throw invalid_input("symbol stream: value out of bounds at index " + std::to_string(i));
  }

  static SymbolStream from_values(std::vector<std::int32_t> v) {
    SymbolStream s;
    if (!v.empty()) {
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      s.z_min = *lo;
      s.z_max = *hi;
    }
    s.values = std::move(v);
    return s;
  }

  bool operator==(const SymbolStream&) const = default;
};

struct BitPayload {
  std::vector<std::uint8_t> bytes;  // header + body
  std::size_t bit_length = 0;       // 8 * bytes.size()
  std::size_t header_bytes = 0;
};

// ---------------------------------------------------------------------------
// Quantization

/// Training-time proxy: e + U(-1/2, 1/2), seeded.
inline std::vector<double> quantize_train_proxy(std::span<const double> e, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out(e.begin(), e.end());
  for (double& v : out) {
    if (!std::isfinite(v)) throw invalid_input("quantize_train_proxy: non-finite input");
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    v += u;
  }
  return out;
}

/// Round half to even; bounds set to the observed range.
inline SymbolStream quantize_inference(std::span<const double> e) {
  std::vector<std::int32_t> v;
  v.reserve(e.size());
  for (double x : e) {
    if (!std::isfinite(x) || std::abs(x) > 2147483647.0) throw invalid_input("quantize_inference: value not representable");
    const double r = x - std::remainder(x, 1.0);  // nearest integer, ties to even
    v.push_back(static_cast<std::int32_t>(r));
  }
  return SymbolStream::from_values(std::move(v));
}

// ---------------------------------------------------------------------------
// Integer PMF of a Gaussian mixture

namespace detail {

// P(a < Z <= b) for a standard normal, accurate in both tails.
inline double normal_interval(double a, double b) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  if (a >= 0.0) return 0.5 * (std::erfc(a * inv_sqrt2) - std::erfc(b * inv_sqrt2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * inv_sqrt2) - std::erfc(-a * inv_sqrt2));
  return 1.0 - 0.5 * (std::erfc(-a * inv_sqrt2) + std::erfc(b * inv_sqrt2));
}

}  // namespace detail

/// Mixture mass on [z - 1/2, z + 1/2].
inline double pmf_integrate(const GmmPmfModel& model, std::int64_t z) {
  double p = 0.0;
  for (std::size_t m = 0; m < model.components(); ++m) {
    const double a = (static_cast<double>(z) - 0.5 - model.means[m]) / model.scales[m];
    const double b = (static_cast<double>(z) + 0.5 - model.means[m]) / model.scales[m];
    p += model.weights[m] * detail::normal_interval(a, b);
  }
  return p;
}

// Coder constants.
inline constexpr unsigned kFreqBits = 16;
inline constexpr std::uint32_t kFreqTotal = 1u << kFreqBits;
inline constexpr unsigned kEscapeRawBits = 32;
inline constexpr std::int64_t kMaxTableSize = 1 << 15;
inline constexpr double kTableHalfWidthSigmas = 12.0;
/// Probability charged to an escaped symbol: one frequency unit, then 32 raw bits.
inline constexpr double kEscapeLog2Cost = kFreqBits + kEscapeRawBits;

enum class EscapePolicy { charge_escape, none };

/// -sum log2 p(z_i). Symbols whose model mass underflows to zero are charged the escape cost,
/// or rejected when no escape is available.
inline double rate_loss(const GmmPmfModel& model, const SymbolStream& stream, EscapePolicy escape = EscapePolicy::charge_escape) {
  model.validate();
  double bits = 0.0;
  for (std::size_t i = 0; i < stream.values.size(); ++i) {
    const double p = pmf_integrate(model, stream.values[i]);
    if (p > 0.0) {
      bits -= std::log2(p);
    } else if (escape == EscapePolicy::charge_escape) {
      bits += kEscapeLog2Cost;
    } else {
      throw invalid_input("rate_loss: zero-probability symbol at index " + std::to_string(i));
    }
  }
  return bits;
}

// ---------------------------------------------------------------------------
// EM fit

struct EmConfig {
  int max_iters = 200;
  double tol = 1e-8;  // on mean log-likelihood
  std::uint64_t seed = 0;
};

inline constexpr double kEmScaleFloor = 1e-3;

struct GmmFit {
  GmmPmfModel model;
  bool degenerate = false;  // some scale hit the floor
  int iterations = 0;
  std::vector<double> log_likelihood;  // mean per-sample LL before each M-step, then final
};

namespace detail {

inline double log_normal_pdf(double x, double mean, double scale) {
  const double t = (x - mean) / scale;
  return -0.5 * t * t - std::log(scale) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double mixture_mean_ll(std::span<const double> xs, const GmmPmfModel& m, std::vector<double>* resp) {
  const std::size_t k = m.components();
  double total = 0.0;
  std::vector<double> lp(k);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      lp[c] = m.weights[c] > 0.0 ? std::log(m.weights[c]) + log_normal_pdf(xs[i], m.means[c], m.scales[c])
                                 : -std::numeric_limits<double>::infinity();
      best = std::max(best, lp[c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(lp[c] - best);
    const double lse = best + std::log(z);
    total += lse;
    if (resp)
      for (std::size_t c = 0; c < k; ++c) (*resp)[i * k + c] = std::exp(lp[c] - lse);
  }
  return total / static_cast<double>(xs.size());
}

}  // namespace detail

/// Expectation-maximization with k-means++ seeding.
inline GmmFit fit_gmm_pmf(std::span<const double> samples, std::size_t components, const EmConfig& cfg = {}) {
  if (components < 1 || components > 255) throw invalid_input("fit_gmm_pmf: components must be in [1, 255]");
  if (samples.size() < 10 * components) throw invalid_input("fit_gmm_pmf: need at least 10 samples per component");
  for (double v : samples)
    if (!std::isfinite(v)) throw invalid_input("fit_gmm_pmf: non-finite sample");
  const std::size_t n = samples.size(), k = components;

  std::mt19937_64 rng(cfg.seed);
  auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<double> centers;
  centers.push_back(samples[static_cast<std::size_t>(unit() * static_cast<double>(n)) % n]);
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (samples[i] - c) * (samples[i] - c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = unit() * total;
      for (pick = 0; pick + 1 < n && target >= d2[pick]; ++pick) target -= d2[pick];
    }
    centers.push_back(samples[pick]);
  }

  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);

  GmmFit fit;
  fit.model.weights.assign(k, 1.0 / static_cast<double>(k));
  fit.model.means = centers;
  fit.model.scales.assign(k, std::max(std::sqrt(var), kEmScaleFloor));
  if (std::sqrt(var) < kEmScaleFloor) fit.degenerate = true;

  std::vector<double> resp(n * k);
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iters; ++it) {
    const double ll = detail::mixture_mean_ll(samples, fit.model, &resp);
    fit.log_likelihood.push_back(ll);
    if (ll - prev < cfg.tol && it > 0) break;
    prev = ll;
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * k + c];
        sx += resp[i * k + c] * samples[i];
      }
      if (nk <= 0.0) {
        fit.model.weights[c] = 0.0;
        continue;
      }
      const double mu = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < n; ++i) sv += resp[i * k + c] * (samples[i] - mu) * (samples[i] - mu);
      double sd = std::sqrt(sv / nk);
      if (sd < kEmScaleFloor) {
        sd = kEmScaleFloor;
        fit.degenerate = true;
      }
      fit.model.weights[c] = nk / static_cast<double>(n);
      fit.model.means[c] = mu;
      fit.model.scales[c] = sd;
    }
    const double wsum = std::accumulate(fit.model.weights.begin(), fit.model.weights.end(), 0.0);
    for (double& w : fit.model.weights) w /= wsum;
    fit.iterations = it + 1;
  }
  if (fit.log_likelihood.size() == static_cast<std::size_t>(fit.iterations))
    fit.log_likelihood.push_back(detail::mixture_mean_ll(samples, fit.model, nullptr));
  // renormalize exactly so validate() holds to 1e-12
  const double wsum = std::accumulate(fit.model.weights.begin(), fit.model.weights.end(), 0.0);
  for (double& w : fit.model.weights) w /= wsum;
  return fit;
}

// ---------------------------------------------------------------------------
// Frequency table

struct FrequencyTable {
  std::int64_t lo = 0;                // value of table index 0
  std::vector<std::uint32_t> freq;    // modeled symbols, then the escape symbol last
  std::vector<std::uint32_t> cum;     // size freq.size() + 1, cum.back() == kFreqTotal

  std::size_t escape_index() const noexcept { return freq.size() - 1; }
  std::int64_t hi() const noexcept { return lo + static_cast<std::int64_t>(freq.size()) - 2; }
};

/// Quantizes the model PMF to 16-bit frequencies, every modeled symbol at least 1 and the escape exactly 1.
inline FrequencyTable build_frequency_table(const GmmPmfModel& model) {
  model.validate();
  const double smax = model.max_scale();
  const double mlo = *std::min_element(model.means.begin(), model.means.end());
  const double mhi = *std::max_element(model.means.begin(), model.means.end());
  std::int64_t lo = static_cast<std::int64_t>(std::floor(mlo - kTableHalfWidthSigmas * smax));
  std::int64_t hi = static_cast<std::int64_t>(std::ceil(mhi + kTableHalfWidthSigmas * smax));
  if (hi - lo + 1 > kMaxTableSize) {
    double center = 0.0;
    for (std::size_t m = 0; m < model.components(); ++m) center += model.weights[m] * model.means[m];
    lo = static_cast<std::int64_t>(std::llround(center)) - kMaxTableSize / 2;
    hi = lo + kMaxTableSize - 1;
  }
  const std::size_t n = static_cast<std::size_t>(hi - lo + 1);

  std::vector<double> p(n);
  double psum = 0.0;
  for (std::size_t i = 0; i < n; ++i) psum += (p[i] = pmf_integrate(model, lo + static_cast<std::int64_t>(i)));

  FrequencyTable t;
  t.lo = lo;
  t.freq.assign(n + 1, 1);
  const double budget = static_cast<double>(kFreqTotal - 1 - n);
  std::vector<double> frac(n);
  std::uint32_t used = static_cast<std::uint32_t>(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double share = psum > 0.0 ? p[i] / psum * budget : 0.0;
    const double whole = std::floor(share);
    t.freq[i] += static_cast<std::uint32_t>(whole);
    used += static_cast<std::uint32_t>(whole);
    frac[i] = share - whole;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; used < kFreqTotal; ++k, ++used) ++t.freq[order[k % n]];

  t.cum.assign(n + 2, 0);
  for (std::size_t i = 0; i <= n; ++i) t.cum[i + 1] = t.cum[i] + t.freq[i];
  return t;
}

// ---------------------------------------------------------------------------
// Range coder: 56-bit window in a 64-bit state, carry propagated through pending 0xFF bytes.

class RangeEncoder {
 public:
  void encode(std::uint32_t cum, std::uint32_t freq) {
    const std::uint64_t r = range_ >> kFreqBits;
    low_ += r * cum;
    range_ = r * freq;
    while (range_ < kTop) {
      range_ <<= 8;
      shift_low();
    }
  }

  /// Emits the shortest byte string that identifies the final interval.
  std::vector<std::uint8_t> finish() {
    // pick the point in [low, low + range) with the most trailing zero bits
    for (int k = kWindowBits; k >= 0; --k) {
      const std::uint64_t unit = std::uint64_t{1} << k;
      const std::uint64_t v = (low_ + unit - 1) & ~(unit - 1);
      if (v >= low_ && v - low_ < range_) {
        low_ = v;
        break;
      }
    }
    for (int i = 0; i < kWindowBits / 8 + 1; ++i) shift_low();
    while (!out_.empty() && out_.back() == 0) out_.pop_back();
    return std::move(out_);
  }

 private:
  static constexpr int kWindowBits = 56;
  static constexpr std::uint64_t kTop = std::uint64_t{1} << 48;
  static constexpr std::uint64_t kLowMask = kTop - 1;

  void shift_low() {
    if ((low_ & ((std::uint64_t{1} << kWindowBits) - 1)) < (std::uint64_t{0xFF} << 48) || (low_ >> kWindowBits) != 0) {
      const auto carry = static_cast<std::uint8_t>(low_ >> kWindowBits);
      std::uint8_t temp = cache_;
      do {
        put(static_cast<std::uint8_t>(temp + carry));
        temp = 0xFF;
      } while (--pending_ != 0);
      cache_ = static_cast<std::uint8_t>((low_ >> 48) & 0xFF);
    }
    ++pending_;
    low_ = (low_ & kLowMask) << 8;
  }

  void put(std::uint8_t b) {
    // the very first byte is always the initial zero cache
    if (first_) {
      first_ = false;
      return;
    }
    out_.push_back(b);
  }

  std::uint64_t low_ = 0;
  std::uint64_t range_ = (std::uint64_t{1} << kWindowBits) - 1;
  std::uint8_t cache_ = 0;
  std::uint64_t pending_ = 1;
  bool first_ = true;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> body) : body_(body) {
    for (int i = 0; i < 7; ++i) code_ = (code_ << 8) | next();
  }

  /// Returns the target frequency in [0, kFreqTotal); the caller maps it to a symbol then calls consume().
  std::uint32_t peek(std::size_t symbol_index) {
    r_ = range_ >> kFreqBits;
    const std::uint64_t v = code_ / r_;
    if (v >= kFreqTotal) throw Error(ErrorKind::corrupt, "codec: corrupt body while decoding symbol " + std::to_string(symbol_index));
    return static_cast<std::uint32_t>(v);
  }

  void consume(std::uint32_t cum, std::uint32_t freq) {
    code_ -= r_ * cum;
    range_ = r_ * freq;
    while (range_ < kTop) {
      code_ = (code_ << 8) | next();
      range_ <<= 8;
    }
  }

  std::size_t position() const noexcept { return pos_; }

 private:
  static constexpr std::uint64_t kTop = std::uint64_t{1} << 48;

  std::uint8_t next() { return pos_ < body_.size() ? body_[pos_++] : (++pos_, std::uint8_t{0}); }

  std::span<const std::uint8_t> body_;
  std::size_t pos_ = 0;
  std::uint64_t code_ = 0;
  std::uint64_t range_ = (std::uint64_t{1} << 56) - 1;
  std::uint64_t r_ = 0;
};

// ---------------------------------------------------------------------------
// Payload

namespace detail {

inline void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint64_t be(int bytes, const char* field) {
    if (pos_ + static_cast<std::size_t>(bytes) > b_.size())
      throw Error(ErrorKind::corrupt, std::string("codec: truncated header at byte ") + std::to_string(pos_) + " (" + field + ")");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v = (v << 8) | b_[pos_++];
    return v;
  }
  double f64(const char* field) { return std::bit_cast<double>(be(8, field)); }
  std::size_t pos() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> head, std::span<const std::uint8_t> body) {
  uLong c = ::crc32(0L, head.data(), static_cast<uInt>(head.size()));
  c = ::crc32(c, body.data(), static_cast<uInt>(body.size()));
  return static_cast<std::uint32_t>(c);
}

}  // namespace detail

inline constexpr std::array<std::uint8_t, 4> kPayloadMagic = {'S', 'R', 'D', 'C'};
inline constexpr std::uint8_t kPayloadVersion = 1;

inline std::size_t payload_header_size(std::size_t components) { return 4 + 1 + 1 + 24 * components + 4 + 4 + 8 + 4; }

inline BitPayload arithmetic_encode(const SymbolStream& stream, const GmmPmfModel& model) {
  model.validate();
  stream.validate();
  const FrequencyTable table = build_frequency_table(model);
  RangeEncoder enc;
  for (std::int32_t z : stream.values) {
    const std::int64_t idx = static_cast<std::int64_t>(z) - table.lo;
    if (idx >= 0 && idx < static_cast<std::int64_t>(table.escape_index())) {
      const auto i = static_cast<std::size_t>(idx);
      enc.encode(table.cum[i], table.freq[i]);
    } else {
      const std::size_t e = table.escape_index();
      enc.encode(table.cum[e], table.freq[e]);
      const auto raw = static_cast<std::uint32_t>(z);
      enc.encode(raw >> 16, 1);
      enc.encode(raw & 0xFFFF, 1);
    }
  }
  const std::vector<std::uint8_t> body = enc.finish();

  BitPayload p;
  p.bytes.assign(kPayloadMagic.begin(), kPayloadMagic.end());
  p.bytes.push_back(kPayloadVersion);
  p.bytes.push_back(static_cast<std::uint8_t>(model.components()));
  for (std::size_t m = 0; m < model.components(); ++m) {
    detail::put_be(p.bytes, std::bit_cast<std::uint64_t>(model.weights[m]), 8);
    detail::put_be(p.bytes, std::bit_cast<std::uint64_t>(model.means[m]), 8);
    detail::put_be(p.bytes, std::bit_cast<std::uint64_t>(model.scales[m]), 8);
  }
  detail::put_be(p.bytes, static_cast<std::uint32_t>(stream.z_min), 4);
  detail::put_be(p.bytes, static_cast<std::uint32_t>(stream.z_max), 4);
  detail::put_be(p.bytes, stream.values.size(), 8);
  detail::put_be(p.bytes, detail::crc32_of(p.bytes, body), 4);
  p.header_bytes = p.bytes.size();
  p.bytes.insert(p.bytes.end(), body.begin(), body.end());
  p.bit_length = 8 * p.bytes.size();
  return p;
}

struct DecodedPayload {
  SymbolStream stream;
  GmmPmfModel model;
};

inline DecodedPayload arithmetic_decode(std::span<const std::uint8_t> bytes) {
  detail::ByteReader rd(bytes);
  for (std::size_t i = 0; i < kPayloadMagic.size(); ++i)
    if (rd.be(1, "magic") != kPayloadMagic[i]) throw Error(ErrorKind::corrupt, "codec: bad magic at byte " + std::to_string(i));
  if (const auto v = rd.be(1, "version"); v != kPayloadVersion)
    throw Error(ErrorKind::corrupt, "codec: unsupported version " + std::to_string(v) + " at byte 4");
  DecodedPayload out;
  const auto m = static_cast<std::size_t>(rd.be(1, "components"));
  if (m == 0) throw Error(ErrorKind::corrupt, "codec: zero mixture components at byte 5");
  for (std::size_t c = 0; c < m; ++c) {
    out.model.weights.push_back(rd.f64("weight"));
    out.model.means.push_back(rd.f64("mean"));
    out.model.scales.push_back(rd.f64("scale"));
  }
  try {
    out.model.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::corrupt, std::string("codec: invalid model in header (bytes 6..") + std::to_string(rd.pos()) + "): " + e.what());
  }
  out.stream.z_min = static_cast<std::int32_t>(static_cast<std::uint32_t>(rd.be(4, "z_min")));
  out.stream.z_max = static_cast<std::int32_t>(static_cast<std::uint32_t>(rd.be(4, "z_max")));
  const std::uint64_t count = rd.be(8, "count");
  const std::size_t crc_at = rd.pos();
  const auto crc = static_cast<std::uint32_t>(rd.be(4, "crc"));
  const std::size_t header = rd.pos();
  const auto body = bytes.subspan(header);
  if (detail::crc32_of(bytes.first(crc_at), body) != crc)
    throw Error(ErrorKind::corrupt, "codec: checksum mismatch over bytes 0.." + std::to_string(bytes.size()) + " (crc at byte " +
                                        std::to_string(crc_at) + ")");
  if (count > 0 && out.stream.z_min > out.stream.z_max) throw Error(ErrorKind::corrupt, "codec: z_min > z_max in header");

  const FrequencyTable table = build_frequency_table(out.model);
  RangeDecoder dec(body);
  out.stream.values.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t target = dec.peek(i);
    const auto it = std::upper_bound(table.cum.begin(), table.cum.end(), target);
    const auto s = static_cast<std::size_t>(it - table.cum.begin()) - 1;
    dec.consume(table.cum[s], table.freq[s]);
    std::int32_t z;
    if (s == table.escape_index()) {
      const std::uint32_t hi = dec.peek(i);
      dec.consume(hi, 1);
      const std::uint32_t lo = dec.peek(i);
      dec.consume(lo, 1);
      z = static_cast<std::int32_t>((hi << 16) | lo);
    } else {
      z = static_cast<std::int32_t>(table.lo + static_cast<std::int64_t>(s));
    }
    if (z < out.stream.z_min || z > out.stream.z_max)
      throw Error(ErrorKind::corrupt, "codec: decoded symbol " + std::to_string(i) + " outside header bounds (body byte " +
                                          std::to_string(header + dec.position()) + ")");
    out.stream.values.push_back(z);
  }
  return out;
}

}  // namespace semrd
