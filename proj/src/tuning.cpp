#include "medbal/tuning.hpp"

#include "medbal/parallel.hpp"
#include "medbal/rng.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace medbal {

std::vector<double> tolerance_grid(int size, double upper) {
  if (size < 1) throw std::invalid_argument("grid size must be >= 1");
  if (size == 1) return {0.0};
  std::vector<double> g(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) g[static_cast<std::size_t>(i)] = upper * i / (size - 1);
  g.back() = upper;
  return g;
}

std::vector<int> bootstrap_counts(Eigen::Index n, std::uint64_t seed, std::uint64_t candidate,
                                  std::uint64_t replicate) {
  auto eng = make_stream(seed, {candidate, replicate});
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::vector<int> counts(static_cast<std::size_t>(n), 0);
  for (Eigen::Index k = 0; k < n; ++k) ++counts[static_cast<std::size_t>(pick(eng))];
  return counts;
}

namespace {

double full_sd(const Eigen::VectorXd& x) {
  const double mean = x.mean();
  const double ss = (x.array() - mean).square().sum();
  return x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
}

bool is_constant(const Eigen::VectorXd& x) {
  return x.maxCoeff() - x.minCoeff() <= 1e-12 * (1.0 + std::abs(x.maxCoeff()));
}

Eigen::VectorXd as_vector(const std::vector<int>& counts) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i) v[static_cast<Eigen::Index>(i)] = counts[i];
  return v;
}

double imbalance(const DesignMatrix& basis, const Eigen::VectorXd& resampled_weights,
                 const Eigen::VectorXd& target) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    const Eigen::VectorXd col = basis.values.col(j);
    if (is_constant(col)) continue;
    const double sd = full_sd(col);
    total += std::abs(resampled_weights.dot(col) - target[j]) / sd;
  }
  return total;
}

std::size_t argmin_first(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[best]) best = i;
  }
  return best;
}

}  // namespace

double step1_imbalance(const DesignMatrix& c_basis, const Eigen::VectorXd& w1,
                       const std::vector<int>& counts) {
  const Eigen::VectorXd target = c_basis.values.colwise().mean().transpose();
  return imbalance(c_basis, w1.cwiseProduct(as_vector(counts)), target);
}

double step2_imbalance(const DesignMatrix& b_basis, const Eigen::VectorXd& w1,
                       const Eigen::VectorXd& w2, const std::vector<int>& counts) {
  const Eigen::VectorXd target = b_basis.values.transpose() * w1;
  return imbalance(b_basis, w2.cwiseProduct(as_vector(counts)), target);
}

TuningResult tune_tolerances(const Dataset& data, const DesignMatrix& c_basis,
                             const DesignMatrix& b_basis, const Penalty& penalty,
                             const TuningOptions& opts) {
  data.validate();
  if (opts.bootstrap_reps < 1) throw std::invalid_argument("bootstrap reps must be >= 1");
  const auto n = data.n();
  const auto nn = static_cast<double>(n);
  TuningResult res;
  res.bootstrap_reps = opts.bootstrap_reps;
  res.seed = opts.seed;
  res.orientation = opts.orientation;
  const auto k = static_cast<double>(std::max<Eigen::Index>(1, c_basis.non_constant_cols()));
  const auto l = static_cast<double>(std::max<Eigen::Index>(1, b_basis.non_constant_cols()));
  res.grid_eps = opts.grid_eps ? *opts.grid_eps : tolerance_grid(opts.grid_size, 1.0 / std::sqrt(nn * k));
  res.grid_delta =
      opts.grid_delta ? *opts.grid_delta : tolerance_grid(opts.grid_size, 1.0 / std::sqrt(nn * l));
  if (res.grid_eps.empty() || res.grid_delta.empty()) throw std::invalid_argument("empty tolerance grid");
  const auto inf = std::numeric_limits<double>::infinity();
  const auto reps = static_cast<std::uint64_t>(opts.bootstrap_reps);
  const auto mask1 = group_mask(data, step1_level(opts.orientation));

  // Step 1: fit once per candidate, score across bootstrap index multisets.
  res.score_eps.assign(res.grid_eps.size(), inf);
  std::vector<std::string> fail1(res.grid_eps.size());
  parallel_for(res.grid_eps.size(), opts.workers, [&](std::size_t c) {
    try {
      const DualSolution sol = fit_step1(data, c_basis, broadcast_tolerance(c_basis, res.grid_eps[c]),
                                         penalty, opts.orientation, opts.solver);
      if (!sol.converged()) {
        fail1[c] = to_string(sol.status);
        return;
      }
      Eigen::VectorXd w1 = scatter(mask1, sol.weights);
      w1 /= w1.sum();
      double total = 0.0;
      for (std::uint64_t r = 0; r < reps; ++r) {
        total += step1_imbalance(c_basis, w1, bootstrap_counts(n, opts.seed, c, r));
      }
      res.score_eps[c] = total / static_cast<double>(reps);
    } catch (const std::exception& e) {
      fail1[c] = e.what();
    }
  });
  const std::size_t best_eps = argmin_first(res.score_eps);
  if (!std::isfinite(res.score_eps[best_eps])) {
    throw NumericalError("tuning: every step-1 candidate failed");
  }
  res.eps_star = res.grid_eps[best_eps];

  const DualSolution step1 = fit_step1(data, c_basis, broadcast_tolerance(c_basis, res.eps_star),
                                       penalty, opts.orientation, opts.solver);
  Eigen::VectorXd w1 = scatter(mask1, step1.weights);
  w1 /= w1.sum();

  // Step 2 candidates use the step-1 weights at eps*. Their bootstrap streams
  // are offset past the step-1 candidates.
  const auto offset = static_cast<std::uint64_t>(res.grid_eps.size());
  const auto mask2 = group_mask(data, 1 - step1_level(opts.orientation));
  res.score_delta.assign(res.grid_delta.size(), inf);
  std::vector<std::string> fail2(res.grid_delta.size());
  parallel_for(res.grid_delta.size(), opts.workers, [&](std::size_t c) {
    try {
      const DualSolution sol =
          fit_step2(data, b_basis, w1, broadcast_tolerance(b_basis, res.grid_delta[c]), penalty,
                    opts.orientation, opts.solver);
      if (!sol.converged()) {
        fail2[c] = to_string(sol.status);
        return;
      }
      Eigen::VectorXd w2 = scatter(mask2, sol.weights);
      w2 /= w2.sum();
      double total = 0.0;
      for (std::uint64_t r = 0; r < reps; ++r) {
        total += step2_imbalance(b_basis, w1, w2, bootstrap_counts(n, opts.seed, offset + c, r));
      }
      res.score_delta[c] = total / static_cast<double>(reps);
    } catch (const std::exception& e) {
      fail2[c] = e.what();
    }
  });
  const std::size_t best_delta = argmin_first(res.score_delta);
  if (!std::isfinite(res.score_delta[best_delta])) {
    throw NumericalError("tuning: every step-2 candidate failed");
  }
  res.delta_star = res.grid_delta[best_delta];

  auto report_failures = [&](const std::vector<std::string>& fails, const std::vector<double>& grid,
                             const char* which) {
    for (std::size_t c = 0; c < fails.size(); ++c) {
      if (fails[c].empty()) continue;
      std::ostringstream msg;
      msg << which << " candidate " << grid[c] << " failed: " << fails[c];
      res.notes.push_back(msg.str());
    }
  };
  report_failures(fail1, res.grid_eps, "eps");
  report_failures(fail2, res.grid_delta, "delta");
  if (res.score_delta[best_delta] > 10.0 * res.score_eps[best_eps]) {
    std::ostringstream msg;
    msg << "step-2 imbalance at delta* (" << res.score_delta[best_delta]
        << ") exceeds 10x the step-1 imbalance at eps* (" << res.score_eps[best_eps]
        << "); the sequential fit may be at a poor local choice";
    res.notes.push_back(msg.str());
  }
  return res;
}

}  // namespace medbal
