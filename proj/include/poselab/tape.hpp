#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "poselab/errors.hpp"

namespace poselab {

template <typename S>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid for its tape's
/// lifetime.
template <typename S>
struct Var {
  int id = -1;
  Tape<S>* tape = nullptr;

  long rows() const;
  long cols() const;
};

namespace detail {
inline std::string shape_str(long r, long c) {
  return std::to_string(r) + "x" + std::to_string(c);
}
}  // namespace detail

/// Reverse-mode tape over dense 2D matrices. Nodes are appended in forward
/// order; backward() walks them in reverse. One tape per computation; not
/// thread-safe, but independent tapes may run concurrently.
template <typename S>
class Tape {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::function<void(Tape&, const Mat&)> backprop;  // empty for leaves/constants
  };

  /// When set, every op verifies its output is finite and throws otherwise.
  bool check_finite = false;

  int size() const { return static_cast<int>(nodes_.size()); }
  const Mat& val(Var<S> v) const { return nodes_[v.id].value; }
  /// Gradient of the last backward() seed w.r.t. v (zeros if untouched).
  Mat grad(Var<S> v) const {
    const Node& n = nodes_[v.id];
    if (n.has_grad) return n.grad;
    return Mat::Zero(n.value.rows(), n.value.cols());
  }

  Var<S> constant(Mat v) { return push(std::move(v), false, {}); }
  Var<S> input(Mat v) { return push(std::move(v), true, {}); }

  // ---- arithmetic -------------------------------------------------------

  Var<S> add(Var<S> a, Var<S> b) {
    same_shape("add", a, b);
    return push(val(a) + val(b), needs(a, b), [a, b](Tape& t, const Mat& g) {
      t.accum(a, g);
      t.accum(b, g);
    });
  }

  Var<S> sub(Var<S> a, Var<S> b) {
    same_shape("sub", a, b);
    return push(val(a) - val(b), needs(a, b), [a, b](Tape& t, const Mat& g) {
      t.accum(a, g);
      t.accum(b, Mat(-g));
    });
  }

  Var<S> mul(Var<S> a, Var<S> b) {  // elementwise
    same_shape("mul", a, b);
    return push(val(a).cwiseProduct(val(b)), needs(a, b), [a, b](Tape& t, const Mat& g) {
      t.accum(a, g.cwiseProduct(t.val(b)));
      t.accum(b, g.cwiseProduct(t.val(a)));
    });
  }

  Var<S> div(Var<S> a, Var<S> b) {  // elementwise
    same_shape("div", a, b);
    return push(val(a).cwiseQuotient(val(b)), needs(a, b), [a, b](Tape& t, const Mat& g) {
      const Mat& bv = t.val(b);
      t.accum(a, g.cwiseQuotient(bv));
      t.accum(b, Mat(-g.cwiseProduct(t.val(a)).cwiseQuotient(bv.cwiseProduct(bv))));
    });
  }

  Var<S> neg(Var<S> a) {
    return push(-val(a), needs(a), [a](Tape& t, const Mat& g) { t.accum(a, Mat(-g)); });
  }

  Var<S> scale(Var<S> a, S c) {
    return push(c * val(a), needs(a), [a, c](Tape& t, const Mat& g) { t.accum(a, Mat(c * g)); });
  }

  Var<S> add_const(Var<S> a, S c) {
    return push(val(a).array() + c, needs(a), [a](Tape& t, const Mat& g) { t.accum(a, g); });
  }

  /// y = s * a where s is a 1x1 node.
  Var<S> scale_by(Var<S> a, Var<S> s) {
    scalar_only("scale_by", s);
    return push(val(s)(0, 0) * val(a), needs(a, s), [a, s](Tape& t, const Mat& g) {
      t.accum(a, Mat(t.val(s)(0, 0) * g));
      Mat gs(1, 1);
      gs(0, 0) = g.cwiseProduct(t.val(a)).sum();
      t.accum(s, gs);
    });
  }

  // ---- linear algebra ---------------------------------------------------

  Var<S> matmul(Var<S> a, Var<S> b) {
    if (val(a).cols() != val(b).rows())
      throw ShapeError("matmul: inner dimensions differ (" + shape(a) + " vs " + shape(b) + ")");
    return push(val(a) * val(b), needs(a, b), [a, b](Tape& t, const Mat& g) {
      t.accum(a, g * t.val(b).transpose());
      t.accum(b, t.val(a).transpose() * g);
    });
  }

  Var<S> transpose(Var<S> a) {
    return push(val(a).transpose(), needs(a),
                [a](Tape& t, const Mat& g) { t.accum(a, g.transpose()); });
  }

  Var<S> block(Var<S> a, long i, long j, long r, long c) {
    if (i < 0 || j < 0 || i + r > val(a).rows() || j + c > val(a).cols())
      throw ShapeError("block: region out of range on " + shape(a));
    return push(val(a).block(i, j, r, c), needs(a), [a, i, j, r, c](Tape& t, const Mat& g) {
      Mat full = Mat::Zero(t.val(a).rows(), t.val(a).cols());
      full.block(i, j, r, c) = g;
      t.accum(a, full);
    });
  }

  Var<S> reshape(Var<S> a, long r, long c) {
    const Mat& v = val(a);
    if (r * c != v.rows() * v.cols())
      throw ShapeError("reshape: cannot view " + shape(a) + " as " + detail::shape_str(r, c));
    Mat out = Eigen::Map<const Mat>(v.data(), r, c);
    const long ar = v.rows(), ac = v.cols();
    return push(std::move(out), needs(a), [a, ar, ac](Tape& t, const Mat& g) {
      t.accum(a, Mat(Eigen::Map<const Mat>(g.data(), ar, ac)));
    });
  }

  Var<S> hstack(const std::vector<Var<S>>& parts) {
    if (parts.empty()) throw std::invalid_argument("hstack: no inputs");
    long rows = val(parts[0]).rows(), cols = 0;
    bool rg = false;
    for (Var<S> p : parts) {
      if (val(p).rows() != rows)
        throw ShapeError("hstack: row mismatch (" + shape(parts[0]) + " vs " + shape(p) + ")");
      cols += val(p).cols();
      rg = rg || nodes_[p.id].requires_grad;
    }
    Mat out(rows, cols);
    long at = 0;
    for (Var<S> p : parts) {
      out.middleCols(at, val(p).cols()) = val(p);
      at += val(p).cols();
    }
    std::vector<Var<S>> ps = parts;
    return push(std::move(out), rg, [ps](Tape& t, const Mat& g) {
      long at = 0;
      for (Var<S> p : ps) {
        const long w = t.val(p).cols();
        t.accum(p, g.middleCols(at, w));
        at += w;
      }
    });
  }

  Var<S> vstack(const std::vector<Var<S>>& parts) {
    std::vector<Var<S>> tr;
    tr.reserve(parts.size());
    for (Var<S> p : parts) tr.push_back(transpose(p));
    return transpose(hstack(tr));
  }

  /// Gathers rows of a (e.g. codebook lookups); repeated indices accumulate
  /// in the backward scatter.
  Var<S> row_gather(Var<S> a, std::vector<int> idx) {
    const Mat& v = val(a);
    Mat out(static_cast<long>(idx.size()), v.cols());
    for (size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= v.rows())
        throw std::invalid_argument("row_gather: index out of range");
      out.row(static_cast<long>(i)) = v.row(idx[i]);
    }
    return push(std::move(out), needs(a), [a, idx = std::move(idx)](Tape& t, const Mat& g) {
      Mat full = Mat::Zero(t.val(a).rows(), t.val(a).cols());
      for (size_t i = 0; i < idx.size(); ++i) full.row(idx[i]) += g.row(static_cast<long>(i));
      t.accum(a, full);
    });
  }

  // ---- reductions -------------------------------------------------------

  Var<S> sum(Var<S> a) {
    Mat out(1, 1);
    out(0, 0) = val(a).sum();
    const long r = val(a).rows(), c = val(a).cols();
    return push(std::move(out), needs(a), [a, r, c](Tape& t, const Mat& g) {
      t.accum(a, Mat(Mat::Constant(r, c, g(0, 0))));
    });
  }

  Var<S> mean(Var<S> a) { return scale(sum(a), S(1) / S(val(a).size())); }

  /// Frobenius norm with a zero-safe gradient (returns zero gradient at the
  /// origin instead of dividing by zero).
  Var<S> norm2(Var<S> a) {
    Mat out(1, 1);
    const S n = val(a).norm();
    out(0, 0) = n;
    return push(std::move(out), needs(a), [a, n](Tape& t, const Mat& g) {
      if (n > S(1e-12)) t.accum(a, Mat((g(0, 0) / n) * t.val(a)));
    });
  }

  // ---- elementwise functions -------------------------------------------

  Var<S> abs(Var<S> a) {
    return push(val(a).cwiseAbs(), needs(a), [a](Tape& t, const Mat& g) {
      t.accum(a, g.cwiseProduct(t.val(a).unaryExpr([](S x) {
        return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0));
      })));
    });
  }

  Var<S> square(Var<S> a) {
    return push(val(a).cwiseProduct(val(a)), needs(a), [a](Tape& t, const Mat& g) {
      t.accum(a, Mat(S(2) * g.cwiseProduct(t.val(a))));
    });
  }

  Var<S> sqrt(Var<S> a) {
    Mat out = val(a).cwiseSqrt();
    const int id = next_id();
    return push(std::move(out), needs(a), [a, id](Tape& t, const Mat& g) {
      t.accum(a, g.cwiseQuotient(Mat(S(2) * t.nodes_[id].value.cwiseMax(S(1e-30)))));
    });
  }

  Var<S> exp(Var<S> a) {
    Mat out = val(a).array().exp();
    const int id = next_id();
    return push(std::move(out), needs(a), [a, id](Tape& t, const Mat& g) {
      t.accum(a, g.cwiseProduct(t.nodes_[id].value));
    });
  }

  Var<S> relu(Var<S> a) {
    return push(val(a).cwiseMax(S(0)), needs(a), [a](Tape& t, const Mat& g) {
      t.accum(a, g.cwiseProduct(t.val(a).unaryExpr([](S x) { return x > S(0) ? S(1) : S(0); })));
    });
  }

  Var<S> gelu(Var<S> a) {
    const Mat& x = val(a);
    Mat out = x.unaryExpr([](S v) { return gelu_fwd(v); });
    return push(std::move(out), needs(a), [a](Tape& t, const Mat& g) {
      t.accum(a, g.cwiseProduct(t.val(a).unaryExpr([](S v) { return gelu_grad(v); })));
    });
  }

  /// Row-wise softmax (each row sums to 1).
  Var<S> softmax_rows(Var<S> a) {
    const Mat& x = val(a);
    Mat y(x.rows(), x.cols());
    for (long i = 0; i < x.rows(); ++i) {
      const S m = x.row(i).maxCoeff();
      Eigen::Array<S, 1, Eigen::Dynamic> e = (x.row(i).array() - m).exp();
      y.row(i) = e / e.sum();
    }
    const int id = next_id();
    return push(std::move(y), needs(a), [a, id](Tape& t, const Mat& g) {
      const Mat& yv = t.nodes_[id].value;
      Mat dx(yv.rows(), yv.cols());
      for (long i = 0; i < yv.rows(); ++i) {
        const S dot = g.row(i).cwiseProduct(yv.row(i)).sum();
        dx.row(i) = yv.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
      }
      t.accum(a, dx);
    });
  }

  Var<S> stop_gradient(Var<S> a) { return push(val(a), false, {}); }

  // ---- small-vector geometry (3x1 columns) ------------------------------

  Var<S> dot(Var<S> a, Var<S> b) {
    same_shape("dot", a, b);
    Mat out(1, 1);
    out(0, 0) = val(a).cwiseProduct(val(b)).sum();
    return push(std::move(out), needs(a, b), [a, b](Tape& t, const Mat& g) {
      t.accum(a, Mat(g(0, 0) * t.val(b)));
      t.accum(b, Mat(g(0, 0) * t.val(a)));
    });
  }

  Var<S> cross3(Var<S> a, Var<S> b) {
    vec3_only("cross3", a);
    vec3_only("cross3", b);
    using V3 = Eigen::Matrix<S, 3, 1>;
    const V3 av = val(a), bv = val(b);
    Mat out = av.cross(bv);
    return push(std::move(out), needs(a, b), [a, b](Tape& t, const Mat& g) {
      const V3 av = t.val(a), bv = t.val(b), gv = g;
      t.accum(a, Mat(bv.cross(gv)));
      t.accum(b, Mat(gv.cross(av)));
    });
  }

  /// v / max(|v|, 1e-8): clamped so near-degenerate inputs yield finite
  /// values and gradients inside a training graph.
  Var<S> normalize3(Var<S> a) {
    vec3_only("normalize3", a);
    using V3 = Eigen::Matrix<S, 3, 1>;
    const V3 v = val(a);
    const S n = std::max(v.norm(), S(1e-8));
    Mat out = v / n;
    return push(std::move(out), needs(a), [a, n](Tape& t, const Mat& g) {
      const V3 y = t.val(a) / n;  // recompute normalized value
      const V3 gv = g;
      t.accum(a, Mat((gv - y * y.dot(gv)) / n));
    });
  }

  // ---- 1D convolution ----------------------------------------------------

  /// Same-padded 1D convolution over the length axis. x is channels x length,
  /// w is out_channels x (k * in_channels) with tap-major columns (column
  /// tap*in_channels + ci reads x(ci, l + tap - pad)), b is out_channels x 1;
  /// k odd.
  Var<S> conv1d_same(Var<S> x, Var<S> w, Var<S> b, int k) {
    const Mat& xv = val(x);
    const long cin = xv.rows(), len = xv.cols();
    const long cout = val(w).rows();
    if (k % 2 != 1) throw std::invalid_argument("conv1d_same: kernel size must be odd");
    if (val(w).cols() != cin * k)
      throw ShapeError("conv1d_same: weight is " + shape(w) + ", expected " +
                       detail::shape_str(cout, cin * k));
    if (val(b).rows() != cout || val(b).cols() != 1)
      throw ShapeError("conv1d_same: bias is " + shape(b) + ", expected " +
                       detail::shape_str(cout, 1));
    const int pad = k / 2;
    Mat cols = Mat::Zero(cin * k, len);
    for (int t = 0; t < k; ++t) {
      const long src0 = std::max<long>(0, pad - t);
      const long src1 = std::min<long>(len, len + pad - t);
      if (src1 <= src0) continue;
      // column l of `cols` holds x(:, l + t - pad)
      cols.middleRows(t * cin, cin).middleCols(src0, src1 - src0) =
          xv.middleCols(src0 + t - pad, src1 - src0);
    }
    Mat y = val(w) * cols;
    y.colwise() += Eigen::Matrix<S, Eigen::Dynamic, 1>(val(b));
    return push(std::move(y), needs(x, w) || nodes_[b.id].requires_grad,
                [x, w, b, k, pad, cin, len, cols = std::move(cols)](Tape& t, const Mat& g) {
                  t.accum(w, g * cols.transpose());
                  t.accum(b, Mat(g.rowwise().sum()));
                  if (t.nodes_[x.id].requires_grad) {
                    const Mat dcols = t.val(w).transpose() * g;
                    Mat dx = Mat::Zero(cin, len);
                    for (int tt = 0; tt < k; ++tt) {
                      const long src0 = std::max<long>(0, pad - tt);
                      const long src1 = std::min<long>(len, len + pad - tt);
                      if (src1 <= src0) continue;
                      dx.middleCols(src0 + tt - pad, src1 - src0) +=
                          dcols.middleRows(tt * cin, cin).middleCols(src0, src1 - src0);
                    }
                    t.accum(x, dx);
                  }
                });
  }

  // ---- losses ------------------------------------------------------------

  Var<S> l1_loss(Var<S> a, Var<S> b) { return mean(abs(sub(a, b))); }
  Var<S> l2sq_loss(Var<S> a, Var<S> b) { return mean(square(sub(a, b))); }

  // ---- backward ----------------------------------------------------------

  void backward(Var<S> out) {
    if (val(out).rows() != 1 || val(out).cols() != 1)
      throw std::invalid_argument("backward: output is not scalar (" + shape(out) +
                                  "); pass an explicit seed");
    Mat seed(1, 1);
    seed(0, 0) = S(1);
    backward(out, seed);
  }

  void backward(Var<S> out, const Mat& seed) {
    if (seed.rows() != val(out).rows() || seed.cols() != val(out).cols())
      throw ShapeError("backward: seed shape " + detail::shape_str(seed.rows(), seed.cols()) +
                       " does not match output " + shape(out));
    for (Node& n : nodes_) {
      n.has_grad = false;
      n.grad.resize(0, 0);
    }
    accum(out, seed);
    for (int i = out.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.has_grad && n.backprop) n.backprop(*this, n.grad);
    }
  }

 private:
  std::vector<Node> nodes_;

  int next_id() const { return static_cast<int>(nodes_.size()); }

  static S gelu_fwd(S x) {
    return S(0.5) * x * (S(1) + std::erf(x * S(std::numbers::sqrt2 / 2.0)));
  }
  static S gelu_grad(S x) {
    const S phi_cdf = S(0.5) * (S(1) + std::erf(x * S(std::numbers::sqrt2 / 2.0)));
    const S phi_pdf = std::exp(S(-0.5) * x * x) * S(0.3989422804014326779);
    return phi_cdf + x * phi_pdf;
  }

  bool needs(Var<S> a) const { return nodes_[a.id].requires_grad; }
  bool needs(Var<S> a, Var<S> b) const {
    return nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  }

  std::string shape(Var<S> a) const {
    return detail::shape_str(val(a).rows(), val(a).cols());
  }

  void same_shape(const char* op, Var<S> a, Var<S> b) const {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw ShapeError(std::string(op) + ": shape mismatch (" + shape(a) + " vs " + shape(b) + ")");
  }
  void scalar_only(const char* op, Var<S> a) const {
    if (val(a).rows() != 1 || val(a).cols() != 1)
      throw ShapeError(std::string(op) + ": expected 1x1, got " + shape(a));
  }
  void vec3_only(const char* op, Var<S> a) const {
    if (val(a).rows() != 3 || val(a).cols() != 1)
      throw ShapeError(std::string(op) + ": expected 3x1, got " + shape(a));
  }

  Var<S> push(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> backprop) {
    if (check_finite && !value.allFinite())
      throw Error("tape: non-finite value produced at node " + std::to_string(nodes_.size()));
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var<S>{static_cast<int>(nodes_.size()) - 1, this};
  }

  void accum(Var<S> v, const Mat& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }
};

template <typename S>
long Var<S>::rows() const {
  return tape->val(*this).rows();
}
template <typename S>
long Var<S>::cols() const {
  return tape->val(*this).cols();
}

// Free-function sugar so expressions read naturally.
template <typename S>
Var<S> operator+(Var<S> a, Var<S> b) {
  return a.tape->add(a, b);
}
template <typename S>
Var<S> operator-(Var<S> a, Var<S> b) {
  return a.tape->sub(a, b);
}
template <typename S>
Var<S> operator*(S c, Var<S> a) {
  return a.tape->scale(a, c);
}

}  // namespace poselab
