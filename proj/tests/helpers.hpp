#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "sepclr/diff/tape.hpp"
#include "sepclr/matrix.hpp"
#include "sepclr/random.hpp"

namespace testing {

inline sepclr::Matrix random_matrix(std::uint64_t seed, std::size_t r, std::size_t c, double lo = -1.0,
                                    double hi = 1.0) {
  sepclr::Rng rng({seed, 0x7465737400ULL});
  sepclr::Matrix m(r, c);
  for (auto& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

inline sepclr::Matrix unit_rows(sepclr::Matrix m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double n = 0.0;
    for (double v : m.row(i)) n += v * v;
    n = std::sqrt(n);
    for (auto& v : m.row(i)) v /= n;
  }
  return m;
}

inline sepclr::Matrix random_unit(std::uint64_t seed, std::size_t r, std::size_t c) {
  return unit_rows(random_matrix(seed, r, c));
}

inline sepclr::Matrix permute_rows(const sepclr::Matrix& m, const std::vector<std::size_t>& perm) {
  return m.gather_rows(perm);
}

inline std::vector<std::size_t> permutation(std::uint64_t seed, std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  sepclr::Rng rng(seed);
  rng.shuffle(p);
  return p;
}

/// Fresh empty directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sepclr_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
