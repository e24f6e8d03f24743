#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "slicebench/rng.hpp"

namespace slicebench {

// Adam over a flat parameter vector. Keeping every model's parameters in one
// contiguous vector also gives the finite-difference tests a single surface.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Eigen::VectorXd m, v;
  long long step = 0;

  void init(Eigen::Index n) {
    m = Eigen::VectorXd::Zero(n);
    v = Eigen::VectorXd::Zero(n);
    step = 0;
  }

  void update(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (m.size() != params.size()) init(params.size());
    ++step;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    params.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

// He-style normal init, deterministic per seed.
inline void init_weights_normal(Eigen::Ref<Eigen::VectorXd> w, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, stddev);
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = d(rng);
}

inline bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace slicebench
