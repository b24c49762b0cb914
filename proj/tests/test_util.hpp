#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lmtp/data_model.hpp"

namespace testutil {

// Nonlinear longitudinal data with p covariates per time.
inline lmtp::LongitudinalDataset random_dataset(std::mt19937_64& rng, std::size_t n, int tau, int p) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<Eigen::MatrixXd> l(static_cast<std::size_t>(tau), Eigen::MatrixXd(n, p));
  Eigen::MatrixXd a(n, tau), y(n, tau);
  for (std::size_t i = 0; i < n; ++i) {
    double prev = 0.0;
    for (int t = 0; t < tau; ++t) {
      double s = 0.0;
      for (int j = 0; j < p; ++j) {
        l[t](i, j) = z(rng) + 0.3 * prev;
        s += l[t](i, j);
      }
      a(i, t) = 0.5 * s + z(rng);
      y(i, t) = std::sin(s) + 0.2 * a(i, t) * a(i, t) + prev + z(rng);
      prev = 0.5 * y(i, t);
    }
  }
  return lmtp::LongitudinalDataset(std::move(l), std::move(a), std::move(y));
}

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / (name + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
