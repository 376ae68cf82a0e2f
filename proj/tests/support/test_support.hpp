#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "fcnbc/field.hpp"
#include "fcnbc/tensor.hpp"

namespace fcnbc::testing {

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fcnbc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng_); }

  template <typename Scalar = double>
  Field2<Scalar> field(Index h, Index w, double lo = -1.0, double hi = 1.0) {
    Field2<Scalar> f(h, w);
    for (Index i = 0; i < f.size(); ++i) f.data()[i] = static_cast<Scalar>(uniform(lo, hi));
    return f;
  }

  template <typename Scalar = double>
  Tensor<Scalar> tensor(const Shape4& s, double lo = -1.0, double hi = 1.0) {
    Tensor<Scalar> t(s);
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(uniform(lo, hi));
    return t;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// max |a - b| / max(|a|, |b|, floor) elementwise.
template <typename A, typename B>
double max_rel_error(const A& a, const B& b, double floor = 1e-8) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a.data()[i]);
    const double y = static_cast<double>(b.data()[i]);
    const double scale = std::max({std::abs(x), std::abs(y), floor});
    worst = std::max(worst, std::abs(x - y) / scale);
  }
  return worst;
}

}  // namespace fcnbc::testing
