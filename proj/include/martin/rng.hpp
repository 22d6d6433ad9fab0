#pragma once

// Counter-based Philox4x32-10. A draw is a pure function of (key, counter),
// so each path/step pair gets its own stream without shared state.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace martin {

struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
      ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
             std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
      key[0] += W0;
      key[1] += W1;
    }
    return ctr;
  }
};

/// Standard normals for (seed, stream, step). The normals of a stream form one
/// sequence: step s with n per step uses entries s*n .. s*n+n-1, and block b
/// (Philox counter {b, stream}) supplies entries 4b .. 4b+3 through two
/// Box-Muller pairs. The last block is cached, so a path drawing in step
/// order evaluates each block once.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)}, stream_(stream) {}

  template <typename Out>
  void normals(std::uint64_t step, int n, Out& out) {
    const std::uint64_t first = step * static_cast<std::uint64_t>(n);
    for (int i = 0; i < n; ++i) {
      const std::uint64_t g = first + static_cast<std::uint64_t>(i);
      const std::uint64_t b = g >> 2;
      if (b != cached_ || !have_) fill(b);
      out[i] = z_[g & 3];
    }
  }

 private:
  void fill(std::uint64_t b) {
    const auto r = Philox4x32::block({std::uint32_t(b), std::uint32_t(b >> 32),
                                      std::uint32_t(stream_), std::uint32_t(stream_ >> 32)},
                                     key_);
    box_muller(r[0], r[1], z_[0], z_[1]);
    box_muller(r[2], r[3], z_[2], z_[3]);
    cached_ = b;
    have_ = true;
  }
  static double open_unit(std::uint32_t v) { return (double(v) + 0.5) * 0x1p-32; }
  static void box_muller(std::uint32_t a, std::uint32_t b, double& z0, double& z1) {
    const double rad = std::sqrt(-2.0 * std::log(open_unit(a)));
    const double ang = 2.0 * std::numbers::pi * open_unit(b);
    z0 = rad * std::cos(ang);
    z1 = rad * std::sin(ang);
  }

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t cached_ = 0;
  bool have_ = false;
  double z_[4] = {0, 0, 0, 0};
};

}  // namespace martin
