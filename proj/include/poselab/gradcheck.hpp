#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "poselab/tape.hpp"

namespace poselab {

/// Result of a finite-difference comparison.
struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  double max_abs_analytic = 0.0;  // guards against vacuously-zero gradients
  long checked = 0;
};

/// Central finite-difference check of a tape-built scalar function.
///
/// `build` receives a tape plus the current parameter values and must return
/// the scalar loss var along with the leaf vars it created for the
/// parameters, in order. The same builder is used for the analytic pass and
/// for every perturbed forward evaluation, so stop-gradient contents are
/// recomputed; freeze them by baking constants into the builder when
/// checking straight-through estimators.
template <typename S>
GradCheckReport check_gradients(
    const std::function<std::pair<Var<S>, std::vector<Var<S>>>(
        Tape<S>&, const std::vector<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>>&)>& build,
    std::vector<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> params, S h = S(1e-5),
    long max_coords_per_param = 0, unsigned sample_seed = 12345) {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  Tape<S> tape;
  auto [loss, leaves] = build(tape, params);
  tape.backward(loss);
  std::vector<Mat> analytic;
  analytic.reserve(leaves.size());
  for (Var<S> v : leaves) analytic.push_back(tape.grad(v));

  const auto eval = [&](const std::vector<Mat>& p) -> S {
    Tape<S> t;
    auto [l, unused] = build(t, p);
    (void)unused;
    return t.val(l)(0, 0);
  };

  std::mt19937_64 rng(sample_seed);
  GradCheckReport rep;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const long n = params[pi].size();
    std::vector<long> coords(n);
    for (long i = 0; i < n; ++i) coords[i] = i;
    if (max_coords_per_param > 0 && n > max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords_per_param);
    }
    for (long c : coords) {
      std::vector<Mat> p = params;
      const S orig = p[pi].data()[c];
      p[pi].data()[c] = orig + h;
      const S fp = eval(p);
      p[pi].data()[c] = orig - h;
      const S fm = eval(p);
      const double fd = static_cast<double>((fp - fm) / (S(2) * h));
      const double an = static_cast<double>(analytic[pi].data()[c]);
      const double abs_err = std::abs(fd - an);
      const double rel = abs_err / std::max({1.0, std::abs(fd), std::abs(an)});
      rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
      rep.max_rel_err = std::max(rep.max_rel_err, rel);
      rep.max_abs_analytic = std::max(rep.max_abs_analytic, std::abs(an));
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace poselab
