#pragma once

#include <vector>

#include "poselab/skeleton.hpp"
#include "poselab/tape.hpp"

namespace poselab {

/// Tape-side twin of rot6d_to_rotmat. `col6` is a 6x1 node [a; b]; the
/// normalizations are clamped (see Tape::normalize3) so early-training
/// garbage stays finite instead of throwing.
template <typename S>
Var<S> rot6d_to_rotmat_graph(Tape<S>& t, Var<S> col6) {
  Var<S> a = t.block(col6, 0, 0, 3, 1);
  Var<S> b = t.block(col6, 3, 0, 3, 1);
  Var<S> c1 = t.normalize3(a);
  Var<S> proj = t.dot(c1, b);
  Var<S> c2 = t.normalize3(t.sub(b, t.scale_by(c1, proj)));
  Var<S> c3 = t.cross3(c1, c2);
  return t.hstack({c1, c2, c3});
}

/// Forward kinematics on the tape. `feats` is a 6 x (J-1) node, one [a;b]
/// column per non-root joint; `orient` a 3x3 node; `root` a 3x1 node.
/// Returns joint positions as a 3 x J node in skeleton order.
template <typename S>
Var<S> forward_kinematics_graph(Tape<S>& t, const Skeleton& skel, Var<S> feats, Var<S> orient,
                                Var<S> root) {
  using Mat = typename Tape<S>::Mat;
  const int n = skel.size();
  if (feats.cols() != n - 1)
    throw ShapeError("forward_kinematics_graph: feature columns " + std::to_string(feats.cols()) +
                     " do not match skeleton joints " + std::to_string(n) + " - 1");
  std::vector<Var<S>> world_rot(n);
  std::vector<Var<S>> world_pos(n);
  world_rot[0] = orient;
  world_pos[0] = root;
  for (int j = 1; j < n; ++j) {
    const int p = skel.joints[j].parent;
    Var<S> local = rot6d_to_rotmat_graph(t, t.block(feats, 0, j - 1, 6, 1));
    world_rot[j] = t.matmul(world_rot[p], local);
    Mat off(3, 1);
    off << S(skel.joints[j].offset.x()), S(skel.joints[j].offset.y()),
        S(skel.joints[j].offset.z());
    world_pos[j] = t.add(world_pos[p], t.matmul(world_rot[p], t.constant(off)));
  }
  return t.hstack(world_pos);
}

/// Perspective projection on the tape: rigid transform by (rot const, trans
/// node), then pinhole divide. `j3d` is 3 x J; returns 2 x J pixels.
template <typename S>
Var<S> project_perspective_graph(Tape<S>& t, Var<S> j3d, const Mat3d& rotation, Var<S> translation,
                                 S focal, S cx, S cy) {
  using Mat = typename Tape<S>::Mat;
  const long n = j3d.cols();
  Mat rot = rotation.cast<S>();
  Var<S> cam = t.matmul(t.constant(rot), j3d);
  Var<S> ones = t.constant(Mat::Ones(1, n));
  cam = t.add(cam, t.matmul(translation, ones));
  Var<S> x = t.block(cam, 0, 0, 1, n);
  Var<S> y = t.block(cam, 1, 0, 1, n);
  Var<S> z = t.block(cam, 2, 0, 1, n);
  Var<S> u = t.add_const(t.scale(t.div(x, z), focal), cx);
  Var<S> v = t.add_const(t.scale(t.div(y, z), focal), cy);
  return t.vstack({u, v});
}

}  // namespace poselab
