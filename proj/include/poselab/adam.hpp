#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "poselab/errors.hpp"

namespace poselab {

/// Adam optimizer state over a fixed list of parameter matrices.
template <typename S>
class Adam {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  S learning_rate;
  S beta1;
  S beta2;
  S eps;
  long step_count = 0;

  explicit Adam(std::vector<Mat*> params, S lr = S(1e-3), S b1 = S(0.9), S b2 = S(0.999),
                S epsilon = S(1e-8))
      : learning_rate(lr), beta1(b1), beta2(b2), eps(epsilon), params_(std::move(params)) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Mat* p : params_) {
      m_.push_back(Mat::Zero(p->rows(), p->cols()));
      v_.push_back(Mat::Zero(p->rows(), p->cols()));
    }
  }

  /// One update from gradients matching the parameter list order.
  void step(const std::vector<Mat>& grads) {
    if (grads.size() != params_.size())
      throw ShapeError("adam: got " + std::to_string(grads.size()) + " gradients for " +
                       std::to_string(params_.size()) + " parameters");
    ++step_count;
    const S bc1 = S(1) - std::pow(beta1, S(step_count));
    const S bc2 = S(1) - std::pow(beta2, S(step_count));
    for (size_t i = 0; i < params_.size(); ++i) {
      Mat& p = *params_[i];
      const Mat& g = grads[i];
      if (g.rows() != p.rows() || g.cols() != p.cols())
        throw ShapeError("adam: gradient shape " + std::to_string(g.rows()) + "x" +
                         std::to_string(g.cols()) + " does not match parameter " +
                         std::to_string(p.rows()) + "x" + std::to_string(p.cols()));
      m_[i] = beta1 * m_[i] + (S(1) - beta1) * g;
      v_[i] = beta2 * v_[i] + (S(1) - beta2) * g.cwiseProduct(g);
      const Mat mhat = m_[i] / bc1;
      const Mat vhat = v_[i] / bc2;
      const Mat denom = vhat.cwiseSqrt() + Mat::Constant(p.rows(), p.cols(), eps);
      p -= learning_rate * mhat.cwiseQuotient(denom);
    }
  }

  size_t parameter_count() const { return params_.size(); }

 private:
  std::vector<Mat*> params_;
  std::vector<Mat> m_, v_;
};

}  // namespace poselab
