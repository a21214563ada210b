#pragma once

#include "cmf/grid.hpp"

#include <cstdint>
#include <random>

namespace testsupport {

using cmf::cplx;

// Seeded generator for property tests; every case derives its own stream.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double a = 0.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(eng_); }
  double normal() { return std::normal_distribution<double>()(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  cplx cnormal() { return {normal(), normal()}; }

  Eigen::VectorXcd cvector(Eigen::Index n) {
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cnormal();
    return v;
  }

  Eigen::VectorXcd unit(Eigen::Index n) {
    Eigen::VectorXcd v = cvector(n);
    return v / v.norm();
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace testsupport
