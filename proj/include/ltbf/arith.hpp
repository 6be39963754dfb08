// Finite-precision arithmetic emulation: FP64, FP32 and saturating Qm.f
// fixed point, plus the quantized complex kernels every matrix routine
// routes through.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ltbf {

using cxd = std::complex<double>;

enum class NumKind { FP64, FP32, Fixed };

// How inner products accumulate: WIDE keeps products and partial sums in
// double and quantizes once at the end; NARROW quantizes after every
// multiply and every add.
enum class AccumulatorPolicy { Wide, Narrow };

struct Profile {
  NumKind kind = NumKind::FP64;
  int int_bits = 0;   // m (Fixed only)
  int frac_bits = 0;  // f (Fixed only)

  static Profile fp64() { return {NumKind::FP64, 0, 0}; }
  static Profile fp32() { return {NumKind::FP32, 0, 0}; }
  static Profile fixed(int m, int f) {
    if (m < 1 || f < 1) throw std::invalid_argument("fixed profile needs m,f >= 1");
    return {NumKind::Fixed, m, f};
  }
  static Profile q15_16() { return fixed(15, 16); }
  static Profile q7_16() { return fixed(7, 16); }

  bool is_fp64() const { return kind == NumKind::FP64; }

  double grid_step() const { return std::ldexp(1.0, -frac_bits); }
  double max_value() const { return std::ldexp(1.0, int_bits) - grid_step(); }
  double min_value() const { return -std::ldexp(1.0, int_bits); }

  std::string name() const {
    switch (kind) {
      case NumKind::FP64: return "fp64";
      case NumKind::FP32: return "fp32";
      case NumKind::Fixed:
        return "q" + std::to_string(int_bits) + "." + std::to_string(frac_bits);
    }
    return "?";
  }

  // Accepts "fp64", "fp32", "q15.16", "q7.16" and generic "qM.F".
  static Profile parse(const std::string& s) {
    if (s == "fp64") return fp64();
    if (s == "fp32") return fp32();
    if (s.size() >= 4 && s[0] == 'q') {
      auto dot = s.find('.');
      if (dot != std::string::npos && dot > 1 && dot + 1 < s.size()) {
        int m = std::stoi(s.substr(1, dot - 1));
        int f = std::stoi(s.substr(dot + 1));
        return fixed(m, f);
      }
    }
    throw std::invalid_argument("unknown precision profile: " + s);
  }

  bool operator==(const Profile&) const = default;
};

// Round-to-nearest-even onto the profile's grid, saturating at the range
// boundary. FP64 is the identity.
inline double quantize(double x, const Profile& p) {
  if (!std::isfinite(x)) throw std::domain_error("quantize: non-finite input");
  switch (p.kind) {
    case NumKind::FP64: return x;
    case NumKind::FP32: return static_cast<double>(static_cast<float>(x));
    case NumKind::Fixed: {
      // nearbyint under the default FE_TONEAREST mode is half-to-even.
      double scaled = std::nearbyint(std::ldexp(x, p.frac_bits));
      double lo = -std::ldexp(1.0, p.int_bits + p.frac_bits);
      double hi = std::ldexp(1.0, p.int_bits + p.frac_bits) - 1.0;
      if (scaled < lo) scaled = lo;
      if (scaled > hi) scaled = hi;
      return std::ldexp(scaled, -p.frac_bits);
    }
  }
  return x;
}

inline cxd quantize(cxd z, const Profile& p) {
  return {quantize(z.real(), p), quantize(z.imag(), p)};
}

// Per-worker tally of complex multiply-adds. Merged explicitly by whoever
// owns the workers; no shared mutable counter.
inline std::uint64_t& flop_counter() {
  thread_local std::uint64_t count = 0;
  return count;
}
inline void flops_reset() { flop_counter() = 0; }
inline void flops_add(std::uint64_t n) { flop_counter() += n; }
inline std::uint64_t flops_read() { return flop_counter(); }

// Elementary ops: exact arithmetic on the operand values in a wide
// (double) intermediate, then one quantize of each component.
inline cxd qadd(cxd a, cxd b, const Profile& p) { return quantize(a + b, p); }
inline cxd qsub(cxd a, cxd b, const Profile& p) { return quantize(a - b, p); }

inline cxd qmul(cxd a, cxd b, const Profile& p) {
  flops_add(1);
  return quantize(a * b, p);
}

inline cxd qdiv(cxd a, cxd b, const Profile& p) {
  if (b == cxd{0.0, 0.0}) throw std::domain_error("qdiv: division by exact zero");
  flops_add(1);
  return quantize(a / b, p);
}

// Inner product sum(conj(a[i]) * b[i]) under the profile.
inline cxd qdot(std::span<const cxd> a, std::span<const cxd> b, const Profile& p,
                AccumulatorPolicy acc = AccumulatorPolicy::Wide) {
  if (a.size() != b.size()) throw std::invalid_argument("qdot: length mismatch");
  flops_add(a.size());
  if (acc == AccumulatorPolicy::Wide || p.is_fp64()) {
    cxd s{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return quantize(s, p);
  }
  cxd s{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    cxd prod = quantize(std::conj(a[i]) * b[i], p);
    s = quantize(s + prod, p);
  }
  return s;
}

inline cxd qdot(const std::vector<cxd>& a, const std::vector<cxd>& b, const Profile& p,
                AccumulatorPolicy acc = AccumulatorPolicy::Wide) {
  return qdot(std::span<const cxd>(a), std::span<const cxd>(b), p, acc);
}

}  // namespace ltbf
