#pragma once

#include "medbal/data.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace fixture {

/// Small dataset with one binary mediator and `p` covariates, treatment from a logit in x1.
inline medbal::Dataset toy(int n, int p, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  medbal::Dataset data;
  data.y.resize(n);
  data.d.resize(n);
  data.m.resize(n, 1);
  data.x.resize(n, p);
  data.mediator_names = {"m"};
  for (int j = 0; j < p; ++j) data.covariate_names.push_back("x" + std::to_string(j + 1));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) data.x(i, j) = normal(eng);
    const double lin = p > 0 ? 0.5 * data.x(i, 0) : 0.0;
    data.d[i] = unif(eng) < 1.0 / (1.0 + std::exp(-lin)) ? 1.0 : 0.0;
    data.m(i, 0) = unif(eng) < 1.0 / (1.0 + std::exp(-(lin - 0.5 * data.d[i]))) ? 1.0 : 0.0;
    data.y[i] = 1.0 + data.d[i] + data.m(i, 0) + (p > 0 ? data.x(i, 0) : 0.0) + normal(eng);
  }
  // keep both groups present
  data.d[0] = 1.0;
  data.d[1] = 0.0;
  return data;
}

inline std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "medbal_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

inline std::filesystem::path write_text(const std::string& name, const std::string& text) {
  auto path = temp_path(name);
  std::ofstream(path) << text;
  return path;
}

}  // namespace fixture
