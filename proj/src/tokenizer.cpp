#include "poselab/tokenizer.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "poselab/adam.hpp"
#include "poselab/errors.hpp"
#include "poselab/fk_graph.hpp"
#include "poselab/metrics.hpp"
#include "poselab/parallel.hpp"

namespace poselab {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config

std::string TokenizerConfig::to_json() const {
  json j;
  j["num_tokens"] = num_tokens;
  j["codebook_size"] = codebook_size;
  j["code_dim"] = code_dim;
  j["hidden_dim"] = hidden_dim;
  j["lambda_re"] = lambda_re;
  j["lambda_embed"] = lambda_embed;
  j["lambda_commit"] = lambda_commit;
  j["noise_start"] = noise_start;
  j["noise_growth_interval"] = noise_growth_interval;
  j["noise_growth_factor"] = noise_growth_factor;
  j["ema_decay"] = ema_decay;
  j["reset_threshold"] = reset_threshold;
  j["reset_interval"] = reset_interval;
  j["use_ema"] = use_ema;
  j["iterations"] = iterations;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["val_fraction"] = val_fraction;
  j["val_cap"] = val_cap;
  j["eval_interval"] = eval_interval;
  j["log_interval"] = log_interval;
  j["seed"] = seed;
  j["dtype"] = dtype;
  return j.dump();
}

TokenizerConfig TokenizerConfig::from_json(const std::string& text) {
  return from_json(text, TokenizerConfig());
}

TokenizerConfig TokenizerConfig::from_json(const std::string& text, const TokenizerConfig& base) {
  const json j = json::parse(text);
  TokenizerConfig c = base;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("num_tokens", c.num_tokens);
  get("codebook_size", c.codebook_size);
  get("code_dim", c.code_dim);
  get("hidden_dim", c.hidden_dim);
  get("lambda_re", c.lambda_re);
  get("lambda_embed", c.lambda_embed);
  get("lambda_commit", c.lambda_commit);
  get("noise_start", c.noise_start);
  get("noise_growth_interval", c.noise_growth_interval);
  get("noise_growth_factor", c.noise_growth_factor);
  get("ema_decay", c.ema_decay);
  get("reset_threshold", c.reset_threshold);
  get("reset_interval", c.reset_interval);
  get("use_ema", c.use_ema);
  get("iterations", c.iterations);
  get("batch_size", c.batch_size);
  get("learning_rate", c.learning_rate);
  get("val_fraction", c.val_fraction);
  get("val_cap", c.val_cap);
  get("eval_interval", c.eval_interval);
  get("log_interval", c.log_interval);
  get("seed", c.seed);
  get("dtype", c.dtype);
  return c;
}

// ---------------------------------------------------------------------------
// Codebook

CodebookState CodebookState::init(int k, int d, std::mt19937_64& rng, double scale) {
  if (k < 2) throw std::invalid_argument("codebook needs at least 2 entries");
  std::normal_distribution<double> n(0.0, scale);
  CodebookState cb;
  cb.codes.resize(k, d);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < d; ++j) cb.codes(i, j) = n(rng);
  cb.ema_cluster_size = Eigen::VectorXd::Ones(k);
  cb.ema_embed_sum = cb.codes;  // consistent with cluster size 1
  cb.usage_count = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>::Zero(k);
  return cb;
}

QuantizeResult quantize(const Eigen::MatrixXd& z, const CodebookState& cb) {
  if (cb.size() == 0) throw std::invalid_argument("quantize: empty codebook");
  if (z.cols() != cb.dim())
    throw ShapeError("quantize: latent dim " + std::to_string(z.cols()) +
                     " does not match code dim " + std::to_string(cb.dim()));
  QuantizeResult out;
  out.indices.resize(static_cast<size_t>(z.rows()));
  out.selected.resize(z.rows(), z.cols());
  for (long i = 0; i < z.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (int k = 0; k < cb.size(); ++k) {
      const double d = (z.row(i) - cb.codes.row(k)).squaredNorm();
      if (d < best) {
        best = d;
        best_k = k;
      }
    }
    out.indices[static_cast<size_t>(i)] = best_k;
    out.selected.row(i) = cb.codes.row(best_k);
  }
  return out;
}

Eigen::MatrixXd soft_quantize(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& codes) {
  if (logits.cols() != codes.rows())
    throw ShapeError("soft_quantize: logits are " + std::to_string(logits.rows()) + "x" +
                     std::to_string(logits.cols()) + " but codebook has " +
                     std::to_string(codes.rows()) + " rows");
  Eigen::MatrixXd weights(logits.rows(), logits.cols());
  for (long i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    weights.row(i) = e / e.sum();
  }
  return weights * codes;
}

void ema_update(CodebookState& cb, const Eigen::MatrixXd& z, const std::vector<int>& indices,
                double decay, double eps) {
  if (static_cast<long>(indices.size()) != z.rows())
    throw std::invalid_argument("ema_update: index count does not match latent rows");
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(cb.size());
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(cb.size(), cb.dim());
  for (long i = 0; i < z.rows(); ++i) {
    const int k = indices[static_cast<size_t>(i)];
    if (k < 0 || k >= cb.size()) throw std::invalid_argument("ema_update: index out of range");
    counts(k) += 1.0;
    sums.row(k) += z.row(i);
    cb.usage_count(k) += 1;
  }
  cb.ema_cluster_size = decay * cb.ema_cluster_size + counts;
  cb.ema_embed_sum = decay * cb.ema_embed_sum + sums;
  for (int k = 0; k < cb.size(); ++k)
    cb.codes.row(k) = cb.ema_embed_sum.row(k) / std::max(cb.ema_cluster_size(k), eps);
}

int code_reset(CodebookState& cb, const Eigen::MatrixXd& z_batch, double reset_threshold,
               std::mt19937_64& rng) {
  if (z_batch.rows() == 0) throw std::invalid_argument("code_reset: empty batch");
  std::uniform_int_distribution<long> pick(0, z_batch.rows() - 1);
  int resets = 0;
  for (int k = 0; k < cb.size(); ++k) {
    if (cb.ema_cluster_size(k) >= reset_threshold) continue;
    const long row = pick(rng);
    cb.codes.row(k) = z_batch.row(row);
    cb.ema_embed_sum.row(k) = z_batch.row(row);
    cb.ema_cluster_size(k) = 1.0;
    ++resets;
  }
  return resets;
}

BodyPose noise_augment(const BodyPose& pose, double sigma, std::mt19937_64& rng) {
  if (sigma < 0) throw std::invalid_argument("noise_augment: sigma must be non-negative");
  if (sigma == 0) return pose;
  BodyPose out = pose;
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, sigma);
  for (int j = 0; j < pose.joint_count(); ++j) {
    if (!coin(rng)) continue;
    Rot6d r6 = out.rotations.row(j).transpose();
    for (int c = 0; c < 6; ++c) r6(c) += noise(rng);
    try {
      out.set_joint_rotation(j, rot6d_to_rotmat<double>(r6));
    } catch (const DegenerateRotationError&) {
      // keep the original rotation if the perturbation collapsed the frame
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

namespace {

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> randn(long r, long c, double stddev,
                                                       std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> m(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) m(i, j) = static_cast<S>(n(rng));
  return m;
}

constexpr int kKernel = 3;

}  // namespace

template <typename S>
TokenizerModel<S> TokenizerModel<S>::init(const TokenizerConfig& cfg, std::mt19937_64& rng,
                                          int body_joints) {
  TokenizerModel<S> m;
  m.cfg = cfg;
  m.body_joints = body_joints;
  const int h = cfg.hidden(), d = cfg.code_dim, mt = cfg.num_tokens, j = body_joints;

  auto conv = [&](int cin, int cout) {
    typename TokenizerModel<S>::Conv c;
    c.w = randn<S>(cout, cin * kKernel, std::sqrt(2.0 / (cin * kKernel)), rng);
    c.b = Mat::Zero(cout, 1);
    return c;
  };

  m.enc_expand = randn<S>(mt, j, std::sqrt(1.0 / j), rng);
  m.enc_in = conv(6, h);
  m.enc_mid = conv(h, h);
  m.enc_res_a = conv(h, h);
  m.enc_res_b = conv(h, h);
  m.enc_pre = conv(h, h);
  m.enc_out = conv(h, d);
  m.dec_contract = randn<S>(j, mt, std::sqrt(1.0 / mt), rng);
  m.dec_in = conv(d, h);
  m.dec_mid = conv(h, h);
  m.dec_res_a = conv(h, h);
  m.dec_res_b = conv(h, h);
  m.dec_pre = conv(h, h);
  m.dec_out = conv(h, 6);
  return m;
}

template <typename S>
std::vector<typename TokenizerModel<S>::Mat*> TokenizerModel<S>::parameters() {
  std::vector<Mat*> p{&enc_expand};
  for (Conv* c : {&enc_in, &enc_mid, &enc_res_a, &enc_res_b, &enc_pre, &enc_out}) {
    p.push_back(&c->w);
    p.push_back(&c->b);
  }
  p.push_back(&dec_contract);
  for (Conv* c : {&dec_in, &dec_mid, &dec_res_a, &dec_res_b, &dec_pre, &dec_out}) {
    p.push_back(&c->w);
    p.push_back(&c->b);
  }
  return p;
}

template <typename S>
std::vector<std::string> TokenizerModel<S>::parameter_names() const {
  std::vector<std::string> names{"enc.expand"};
  for (const char* stem : {"enc.in", "enc.mid", "enc.res_a", "enc.res_b", "enc.pre", "enc.out"}) {
    names.push_back(std::string(stem) + ".w");
    names.push_back(std::string(stem) + ".b");
  }
  names.push_back("dec.contract");
  for (const char* stem : {"dec.in", "dec.mid", "dec.res_a", "dec.res_b", "dec.pre", "dec.out"}) {
    names.push_back(std::string(stem) + ".w");
    names.push_back(std::string(stem) + ".b");
  }
  return names;
}

template <typename S>
template <typename T>
TokenizerModel<T> TokenizerModel<S>::cast() const {
  TokenizerModel<T> out;
  out.cfg = cfg;
  out.body_joints = body_joints;
  auto* self = const_cast<TokenizerModel<S>*>(this);
  auto src = self->parameters();
  auto dst = out.parameters();
  for (size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<T>();
  return out;
}

template <typename S>
Var<S> encoder_forward(Tape<S>& t, const TokenizerModel<S>& model, const ModelVars<S>& mv,
                       Var<S> feats) {
  if (feats.rows() != 6 || feats.cols() != model.body_joints)
    throw ShapeError("encoder_forward: features are " + std::to_string(feats.rows()) + "x" +
                     std::to_string(feats.cols()) + ", expected 6x" +
                     std::to_string(model.body_joints));
  Var<S> x = t.matmul(feats, t.transpose(mv.enc_expand));  // 6 x M
  Var<S> h = t.gelu(t.conv1d_same(x, mv.enc_in.w, mv.enc_in.b, kKernel));
  h = t.gelu(t.conv1d_same(h, mv.enc_mid.w, mv.enc_mid.b, kKernel));
  Var<S> r = t.conv1d_same(t.gelu(t.conv1d_same(h, mv.enc_res_a.w, mv.enc_res_a.b, kKernel)),
                           mv.enc_res_b.w, mv.enc_res_b.b, kKernel);
  h = t.add(h, r);
  h = t.gelu(t.conv1d_same(h, mv.enc_pre.w, mv.enc_pre.b, kKernel));
  return t.conv1d_same(h, mv.enc_out.w, mv.enc_out.b, kKernel);  // d_c x M
}

template <typename S>
Var<S> decoder_forward(Tape<S>& t, const TokenizerModel<S>& model, const ModelVars<S>& mv,
                       Var<S> zq) {
  if (zq.rows() != model.cfg.code_dim || zq.cols() != model.cfg.num_tokens)
    throw ShapeError("decoder_forward: latents are " + std::to_string(zq.rows()) + "x" +
                     std::to_string(zq.cols()) + ", expected " +
                     std::to_string(model.cfg.code_dim) + "x" +
                     std::to_string(model.cfg.num_tokens));
  Var<S> h = t.gelu(t.conv1d_same(zq, mv.dec_in.w, mv.dec_in.b, kKernel));
  h = t.gelu(t.conv1d_same(h, mv.dec_mid.w, mv.dec_mid.b, kKernel));
  Var<S> r = t.conv1d_same(t.gelu(t.conv1d_same(h, mv.dec_res_a.w, mv.dec_res_a.b, kKernel)),
                           mv.dec_res_b.w, mv.dec_res_b.b, kKernel);
  h = t.add(h, r);
  h = t.gelu(t.conv1d_same(h, mv.dec_pre.w, mv.dec_pre.b, kKernel));
  Var<S> y = t.conv1d_same(h, mv.dec_out.w, mv.dec_out.b, kKernel);  // 6 x M
  return t.matmul(y, t.transpose(mv.dec_contract));                  // 6 x J
}

namespace {

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> pose_features(const BodyPose& pose) {
  return pose.rotations.transpose().cast<S>();
}

/// Forward-only bind: parameters enter as constants, so no gradient
/// bookkeeping happens for plain encode/decode evaluation.
template <typename S>
ModelVars<S> bind_model_const(Tape<S>& t, TokenizerModel<S>& model) {
  ModelVars<S> v;
  for (auto* p : model.parameters()) v.leaves.push_back(t.constant(*p));
  size_t i = 0;
  auto next = [&] { return v.leaves[i++]; };
  v.enc_expand = next();
  for (auto* c : {&v.enc_in, &v.enc_mid, &v.enc_res_a, &v.enc_res_b, &v.enc_pre, &v.enc_out}) {
    c->w = next();
    c->b = next();
  }
  v.dec_contract = next();
  for (auto* c : {&v.dec_in, &v.dec_mid, &v.dec_res_a, &v.dec_res_b, &v.dec_pre, &v.dec_out}) {
    c->w = next();
    c->b = next();
  }
  return v;
}

Mat3d rot6d_to_rotmat_clamped(const Rot6d& r6) {
  try {
    return rot6d_to_rotmat<double>(r6);
  } catch (const DegenerateRotationError&) {
    return Mat3d::Identity();
  }
}

}  // namespace

template <typename S>
Eigen::MatrixXd encode_pose(TokenizerModel<S>& model, const BodyPose& pose) {
  Tape<S> t;
  ModelVars<S> mv = bind_model_const(t, model);
  Var<S> z = encoder_forward(t, model, mv, t.constant(pose_features<S>(pose)));
  return t.val(z).transpose().template cast<double>();  // M x d_c rows
}

template <typename S>
BodyPose decode_features(TokenizerModel<S>& model, const Eigen::MatrixXd& zq) {
  if (zq.rows() != model.cfg.num_tokens || zq.cols() != model.cfg.code_dim)
    throw ShapeError("decode_features: latents are " + std::to_string(zq.rows()) + "x" +
                     std::to_string(zq.cols()) + ", expected " +
                     std::to_string(model.cfg.num_tokens) + "x" +
                     std::to_string(model.cfg.code_dim));
  Tape<S> t;
  ModelVars<S> mv = bind_model_const(t, model);
  using MatS = typename TokenizerModel<S>::Mat;
  const MatS zq_s = zq.transpose().cast<S>();
  Var<S> out = decoder_forward(t, model, mv, t.constant(zq_s));
  BodyPose pose;
  pose.rotations = t.val(out).transpose().template cast<double>();
  return pose;
}

VqLossParts vq_loss_value(const BodyPose& pose_gt, const BodyPose& recon,
                          const Eigen::MatrixXd& z, const Eigen::MatrixXd& z_hat,
                          const Skeleton& skel, const TokenizerConfig& cfg) {
  if (z.rows() != z_hat.rows() || z.cols() != z_hat.cols())
    throw ShapeError("vq_loss: latent shapes differ");
  VqLossParts parts;
  const double l1_pose =
      (pose_gt.rotations - recon.rotations).cwiseAbs().mean();
  BodyPose gt_centered = pose_gt, rec_centered = recon;
  gt_centered.global_orient = Mat3d::Identity();
  gt_centered.root_translation.setZero();
  rec_centered.global_orient = Mat3d::Identity();
  rec_centered.root_translation.setZero();
  const Joints3D jg = forward_kinematics(gt_centered, skel);
  const Joints3D jr = forward_kinematics(rec_centered, skel);
  const double l1_joints = (jg - jr).cwiseAbs().mean();
  parts.reconstruction = l1_pose + l1_joints;
  parts.embedding = (z - z_hat).array().square().mean();
  parts.commitment = parts.embedding;
  parts.total = cfg.lambda_re * parts.reconstruction + cfg.lambda_embed * parts.embedding +
                cfg.lambda_commit * parts.commitment;
  return parts;
}

// ---------------------------------------------------------------------------
// Training

std::vector<size_t> validation_indices(size_t dataset_size, const TokenizerConfig& cfg) {
  std::vector<size_t> val;
  if (dataset_size == 0 || cfg.val_fraction <= 0) return val;
  const size_t stride =
      std::max<size_t>(2, static_cast<size_t>(std::llround(1.0 / cfg.val_fraction)));
  for (size_t i = 0; i < dataset_size; i += stride) {
    val.push_back(i);
    if (cfg.val_cap > 0 && static_cast<int>(val.size()) >= cfg.val_cap) break;
  }
  return val;
}

namespace {

template <typename S>
struct SampleJob {
  using MatS = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  MatS noisy_feats;   // 6 x J encoder input
  MatS target_feats;  // 6 x J clean reconstruction target
  MatS target_j3d;    // 3 x (J+1)
  // outputs
  std::vector<MatS> grads;
  Eigen::MatrixXd z_rows;  // M x d_c, for EMA
  std::vector<int> indices;
  double rec = 0, embed = 0, commit = 0, total = 0;
};

template <typename S>
void run_sample(TokenizerModel<S>& model, const CodebookState& cb,
                const Eigen::MatrixXd* codes_dbl, const Skeleton& skel,
                const TokenizerConfig& cfg, SampleJob<S>& job) {
  using MatS = typename TokenizerModel<S>::Mat;
  Tape<S> t;
  ModelVars<S> mv = bind_model(t, model);
  Var<S> cb_leaf{-1, nullptr};
  if (!cfg.use_ema) cb_leaf = t.input(codes_dbl->cast<S>());

  Var<S> feats = t.constant(job.noisy_feats);
  Var<S> z = encoder_forward(t, model, mv, feats);  // d_c x M

  job.z_rows = t.val(z).transpose().template cast<double>();
  QuantizeResult q = quantize(job.z_rows, cb);
  job.indices = q.indices;

  // Straight-through: value from the selected codes, gradient through z.
  Var<S> zhat = cfg.use_ema ? t.constant(MatS(q.selected.transpose().cast<S>()))
                            : t.transpose(t.row_gather(cb_leaf, q.indices));
  Var<S> zq = t.add(z, t.stop_gradient(t.sub(zhat, z)));

  Var<S> dec = decoder_forward(t, model, mv, zq);
  Var<S> l_pose = t.l1_loss(dec, t.constant(job.target_feats));

  using M3 = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  M3 ident = M3::Identity(3, 3), zero = M3::Zero(3, 1);
  Var<S> j3d = forward_kinematics_graph(t, skel, dec, t.constant(ident), t.constant(zero));
  Var<S> l_j3d = t.l1_loss(j3d, t.constant(job.target_j3d));
  Var<S> l_re = t.add(l_pose, l_j3d);

  Var<S> commit = t.l2sq_loss(z, t.stop_gradient(zhat));
  Var<S> loss = t.add(t.scale(l_re, S(cfg.lambda_re)), t.scale(commit, S(cfg.lambda_commit)));

  double embed_value;
  if (!cfg.use_ema) {
    Var<S> emb = t.l2sq_loss(t.stop_gradient(z), zhat);
    loss = t.add(loss, t.scale(emb, S(cfg.lambda_embed)));
    embed_value = static_cast<double>(t.val(emb)(0, 0));
  } else {
    embed_value = (job.z_rows - q.selected).array().square().mean();
  }

  t.backward(loss);

  job.grads.clear();
  for (Var<S> leaf : mv.leaves) job.grads.push_back(t.grad(leaf));
  if (!cfg.use_ema) job.grads.push_back(t.grad(cb_leaf));

  job.rec = static_cast<double>(t.val(l_re)(0, 0));
  job.commit = static_cast<double>(t.val(commit)(0, 0));
  job.embed = embed_value;
  job.total = cfg.lambda_re * job.rec + cfg.lambda_embed * job.embed +
              cfg.lambda_commit * job.commit;
}

}  // namespace

template <typename S>
double eval_geodesic(TokenizerModel<S>& model, const CodebookState& cb, const PoseDataset& data,
                     const std::vector<size_t>& indices) {
  if (indices.empty()) return 0.0;
  double sum = 0.0;
  long joints = 0;
  for (size_t idx : indices) {
    const BodyPose gt = data.body_pose(idx);
    const Eigen::MatrixXd z = encode_pose(model, gt);
    const QuantizeResult q = quantize(z, cb);
    const BodyPose rec = decode_features(model, q.selected);
    for (int j = 0; j < gt.joint_count(); ++j) {
      const Mat3d rg = gt.joint_rotation(j);
      const Mat3d rr = rot6d_to_rotmat_clamped(rec.rotations.row(j).transpose());
      sum += geodesic_distance(rg, rr);
      ++joints;
    }
  }
  return sum / static_cast<double>(joints);
}

template <typename S>
double eval_utilization(TokenizerModel<S>& model, const CodebookState& cb, const PoseDataset& data,
                        const std::vector<size_t>& indices) {
  std::vector<bool> used(static_cast<size_t>(cb.size()), false);
  for (size_t idx : indices) {
    const Eigen::MatrixXd z = encode_pose(model, data.body_pose(idx));
    for (int k : quantize(z, cb).indices) used[static_cast<size_t>(k)] = true;
  }
  long count = 0;
  for (bool b : used) count += b ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(cb.size());
}

template <typename S>
double eval_mpjpe(TokenizerModel<S>& model, const CodebookState& cb, const PoseDataset& data,
                  const std::vector<size_t>& indices, const Skeleton& skel) {
  if (indices.empty()) return 0.0;
  double sum = 0.0;
  for (size_t idx : indices) {
    const BodyPose gt = data.body_pose(idx);
    const Eigen::MatrixXd z = encode_pose(model, gt);
    BodyPose rec = decode_features(model, quantize(z, cb).selected);
    // decoded rows may be mildly degenerate early on; clamp through SO(3)
    for (int j = 0; j < rec.joint_count(); ++j)
      rec.set_joint_rotation(j, rot6d_to_rotmat_clamped(rec.rotations.row(j).transpose()));
    sum += mpjpe(forward_kinematics(rec, skel), forward_kinematics(gt, skel));
  }
  return sum / static_cast<double>(indices.size());
}

template <typename S>
TrainResult train_tokenizer(TokenizerModel<S>& model, CodebookState& cb, const PoseDataset& data,
                            const Skeleton& skel, const TokenizerConfig& cfg,
                            std::vector<TrainLogRow>* log, int threads) {
  using MatS = typename TokenizerModel<S>::Mat;
  if (data.size() == 0) throw DataError("train_tokenizer: empty dataset", 0);
  if (data.joint_count != model.body_joints)
    throw std::invalid_argument("train_tokenizer: dataset has " +
                                std::to_string(data.joint_count) + " joints, model expects " +
                                std::to_string(model.body_joints));
  if (skel.size() != model.body_joints + 1)
    throw std::invalid_argument("train_tokenizer: skeleton joint count mismatch");

  // Deterministic split and per-purpose RNG streams.
  const std::vector<size_t> val_idx = validation_indices(data.size(), cfg);
  std::vector<bool> is_val(data.size(), false);
  for (size_t i : val_idx) is_val[i] = true;
  std::vector<size_t> train_idx;
  for (size_t i = 0; i < data.size(); ++i)
    if (!is_val[i]) train_idx.push_back(i);
  if (train_idx.empty()) train_idx.assign(val_idx.begin(), val_idx.end());

  std::mt19937_64 batch_rng(cfg.seed * 6364136223846793005ULL + 1442695040888963407ULL);
  std::mt19937_64 noise_rng(cfg.seed * 6364136223846793005ULL + 1013904223ULL);
  std::mt19937_64 reset_rng(cfg.seed * 6364136223846793005ULL + 11400714819323198485ULL);

  // Clean caches: body poses, features, FK targets.
  std::vector<BodyPose> poses;
  std::vector<MatS> feats, j3d;
  poses.reserve(data.size());
  feats.reserve(data.size());
  j3d.reserve(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    poses.push_back(data.body_pose(i));
    feats.push_back(pose_features<S>(poses.back()));
    BodyPose centered = poses.back();
    centered.global_orient = Mat3d::Identity();
    centered.root_translation.setZero();
    j3d.push_back(forward_kinematics(centered, skel).cast<S>());
  }

  std::vector<MatS*> params = model.parameters();
  MatS codes_s = cb.codes.cast<S>();
  std::vector<MatS*> opt_params = params;
  if (!cfg.use_ema) opt_params.push_back(&codes_s);
  Adam<S> adam(opt_params, static_cast<S>(cfg.learning_rate));

  TrainResult result;
  result.initial_val_geodesic = eval_geodesic(model, cb, data, val_idx);
  if (log)
    log->push_back({0, 0, 0, 0, 0, result.initial_val_geodesic});

  std::vector<SampleJob<S>> jobs(static_cast<size_t>(cfg.batch_size));
  std::uniform_int_distribution<size_t> pick(0, train_idx.size() - 1);

  double last_total = 0.0;
  for (long iter = 1; iter <= cfg.iterations; ++iter) {
    const double sigma =
        cfg.noise_start * std::pow(cfg.noise_growth_factor,
                                   static_cast<double>((iter - 1) / cfg.noise_growth_interval));
    // Sequential sampling/augmentation keeps results independent of threads.
    for (int b = 0; b < cfg.batch_size; ++b) {
      const size_t di = train_idx[pick(batch_rng)];
      const BodyPose noisy = noise_augment(poses[di], sigma, noise_rng);
      jobs[static_cast<size_t>(b)].noisy_feats = pose_features<S>(noisy);
      jobs[static_cast<size_t>(b)].target_feats = feats[di];
      jobs[static_cast<size_t>(b)].target_j3d = j3d[di];
    }

    Eigen::MatrixXd codes_dbl;
    if (!cfg.use_ema) {
      codes_dbl = codes_s.template cast<double>();
      cb.codes = codes_dbl;
    }
    parallel_for(cfg.batch_size, threads, [&](int b) {
      run_sample(model, cb, &codes_dbl, skel, cfg, jobs[static_cast<size_t>(b)]);
    });

    // Fixed-order reduction: gradients averaged sample-by-sample.
    std::vector<MatS> grads;
    grads.reserve(opt_params.size());
    for (size_t p = 0; p < opt_params.size(); ++p) grads.push_back(jobs[0].grads[p]);
    for (int b = 1; b < cfg.batch_size; ++b)
      for (size_t p = 0; p < opt_params.size(); ++p) grads[p] += jobs[static_cast<size_t>(b)].grads[p];
    const S inv_batch = S(1) / static_cast<S>(cfg.batch_size);
    for (auto& g : grads) g *= inv_batch;
    adam.step(grads);

    if (cfg.use_ema) {
      Eigen::MatrixXd z_all(static_cast<long>(cfg.batch_size) * cfg.num_tokens, cfg.code_dim);
      std::vector<int> idx_all;
      idx_all.reserve(static_cast<size_t>(cfg.batch_size) * cfg.num_tokens);
      for (int b = 0; b < cfg.batch_size; ++b) {
        z_all.middleRows(static_cast<long>(b) * cfg.num_tokens, cfg.num_tokens) =
            jobs[static_cast<size_t>(b)].z_rows;
        for (int k : jobs[static_cast<size_t>(b)].indices) idx_all.push_back(k);
      }
      ema_update(cb, z_all, idx_all, cfg.ema_decay);
      if (cfg.reset_interval > 0 && iter % cfg.reset_interval == 0)
        code_reset(cb, z_all, cfg.reset_threshold, reset_rng);
      codes_s = cb.codes.cast<S>();
    } else {
      cb.codes = codes_s.template cast<double>();
      for (int b = 0; b < cfg.batch_size; ++b)
        for (int k : jobs[static_cast<size_t>(b)].indices) cb.usage_count(k) += 1;
    }

    double total = 0, rec = 0, embed = 0, commit = 0;
    for (const auto& jb : jobs) {
      total += jb.total;
      rec += jb.rec;
      embed += jb.embed;
      commit += jb.commit;
    }
    const double nb = static_cast<double>(cfg.batch_size);
    total /= nb;
    rec /= nb;
    embed /= nb;
    commit /= nb;
    last_total = total;

    if (log && (iter % cfg.log_interval == 0 || iter == cfg.iterations)) {
      TrainLogRow row{iter, total, rec, embed, commit, -1.0};
      if (iter % cfg.eval_interval == 0 || iter == cfg.iterations)
        row.val_geodesic = eval_geodesic(model, cb, data, val_idx);
      log->push_back(row);
    }
  }

  result.final_val_geodesic = eval_geodesic(model, cb, data, val_idx);
  result.codebook_utilization = eval_utilization(model, cb, data, val_idx);
  result.final_loss = last_total;
  result.iterations = cfg.iterations;
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

template <typename S>
Checkpoint tokenizer_checkpoint(TokenizerModel<S>& model, const CodebookState& cb) {
  Checkpoint ckpt;
  const std::string dtype = std::is_same_v<S, float> ? "f32" : "f64";
  const auto names = model.parameter_names();
  auto params = model.parameters();
  for (size_t i = 0; i < params.size(); ++i)
    ckpt.add(names[i], params[i]->template cast<double>(), dtype);
  ckpt.add("cb.codes", cb.codes, "f64");
  ckpt.add("cb.cluster_size", cb.ema_cluster_size, "f64");
  ckpt.add("cb.embed_sum", cb.ema_embed_sum, "f64");
  ckpt.add("cb.usage", cb.usage_count.cast<double>(), "f64");
  json extra;
  extra["config"] = json::parse(model.cfg.to_json());
  extra["body_joints"] = model.body_joints;
  ckpt.extra_json = extra.dump();
  return ckpt;
}

void load_tokenizer_checkpoint(const Checkpoint& ckpt, TokenizerModel<double>& model,
                               CodebookState& cb, TokenizerConfig* cfg_out) {
  if (ckpt.extra_json.empty()) throw Error("tokenizer checkpoint is missing its config");
  const json extra = json::parse(ckpt.extra_json);
  TokenizerConfig cfg = TokenizerConfig::from_json(extra.at("config").dump());
  const int body_joints = extra.value("body_joints", 21);

  std::mt19937_64 dummy(0);
  model = TokenizerModel<double>::init(cfg, dummy, body_joints);
  const auto names = model.parameter_names();
  auto params = model.parameters();
  for (size_t i = 0; i < params.size(); ++i) {
    const CheckpointTensor* t = ckpt.find(names[i]);
    if (!t) throw Error("tokenizer checkpoint is missing tensor " + names[i]);
    if (t->data.rows() != params[i]->rows() || t->data.cols() != params[i]->cols())
      throw ShapeError("tokenizer checkpoint tensor " + names[i] + " has wrong shape");
    *params[i] = t->data;
  }
  const CheckpointTensor* codes = ckpt.find("cb.codes");
  const CheckpointTensor* cluster = ckpt.find("cb.cluster_size");
  const CheckpointTensor* sums = ckpt.find("cb.embed_sum");
  const CheckpointTensor* usage = ckpt.find("cb.usage");
  if (!codes || !cluster || !sums || !usage) throw Error("tokenizer checkpoint is missing codebook state");
  cb.codes = codes->data;
  cb.ema_cluster_size = cluster->data;
  cb.ema_embed_sum = sums->data;
  cb.usage_count = usage->data.cast<std::int64_t>();
  if (cfg_out) *cfg_out = cfg;
}

// ---------------------------------------------------------------------------
// Explicit instantiations

template struct TokenizerModel<float>;
template struct TokenizerModel<double>;
template TokenizerModel<double> TokenizerModel<float>::cast<double>() const;
template TokenizerModel<float> TokenizerModel<double>::cast<float>() const;
template TokenizerModel<double> TokenizerModel<double>::cast<double>() const;

template Var<float> encoder_forward(Tape<float>&, const TokenizerModel<float>&,
                                    const ModelVars<float>&, Var<float>);
template Var<double> encoder_forward(Tape<double>&, const TokenizerModel<double>&,
                                     const ModelVars<double>&, Var<double>);
template Var<float> decoder_forward(Tape<float>&, const TokenizerModel<float>&,
                                    const ModelVars<float>&, Var<float>);
template Var<double> decoder_forward(Tape<double>&, const TokenizerModel<double>&,
                                     const ModelVars<double>&, Var<double>);

template Eigen::MatrixXd encode_pose(TokenizerModel<float>&, const BodyPose&);
template Eigen::MatrixXd encode_pose(TokenizerModel<double>&, const BodyPose&);
template BodyPose decode_features(TokenizerModel<float>&, const Eigen::MatrixXd&);
template BodyPose decode_features(TokenizerModel<double>&, const Eigen::MatrixXd&);

template double eval_geodesic(TokenizerModel<float>&, const CodebookState&, const PoseDataset&,
                              const std::vector<size_t>&);
template double eval_geodesic(TokenizerModel<double>&, const CodebookState&, const PoseDataset&,
                              const std::vector<size_t>&);
template double eval_utilization(TokenizerModel<float>&, const CodebookState&, const PoseDataset&,
                                 const std::vector<size_t>&);
template double eval_utilization(TokenizerModel<double>&, const CodebookState&, const PoseDataset&,
                                 const std::vector<size_t>&);
template double eval_mpjpe(TokenizerModel<float>&, const CodebookState&, const PoseDataset&,
                           const std::vector<size_t>&, const Skeleton&);
template double eval_mpjpe(TokenizerModel<double>&, const CodebookState&, const PoseDataset&,
                           const std::vector<size_t>&, const Skeleton&);

template TrainResult train_tokenizer(TokenizerModel<float>&, CodebookState&, const PoseDataset&,
                                     const Skeleton&, const TokenizerConfig&,
                                     std::vector<TrainLogRow>*, int);
template TrainResult train_tokenizer(TokenizerModel<double>&, CodebookState&, const PoseDataset&,
                                     const Skeleton&, const TokenizerConfig&,
                                     std::vector<TrainLogRow>*, int);

template Checkpoint tokenizer_checkpoint(TokenizerModel<float>&, const CodebookState&);
template Checkpoint tokenizer_checkpoint(TokenizerModel<double>&, const CodebookState&);

}  // namespace poselab
