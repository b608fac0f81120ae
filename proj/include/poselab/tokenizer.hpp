#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "poselab/checkpoint.hpp"
#include "poselab/dataset.hpp"
#include "poselab/skeleton.hpp"
#include "poselab/tape.hpp"

namespace poselab {

/// Hyperparameters of the pose tokenizer. Defaults are the full-size
/// configuration; desk_scale() is the small CPU-friendly variant used by
/// tests and most experiments here.
struct TokenizerConfig {
  int num_tokens = 160;      // M
  int codebook_size = 2048;  // K
  int code_dim = 256;        // d_c
  int hidden_dim = 0;        // conv width; 0 means code_dim
  double lambda_re = 50.0;
  double lambda_embed = 1.0;
  double lambda_commit = 1.0;
  double noise_start = 1e-3;
  long noise_growth_interval = 5000;  // iterations between noise increases
  double noise_growth_factor = 2.0;
  double ema_decay = 0.99;
  double reset_threshold = 1.0;
  long reset_interval = 1;  // iterations between dead-code sweeps; 0 disables
  bool use_ema = true;      // EMA codebook; false learns it by gradient
  long iterations = 150000;
  int batch_size = 256;
  double learning_rate = 2e-4;
  double val_fraction = 0.1;
  int val_cap = 512;
  long eval_interval = 500;
  long log_interval = 50;
  std::uint64_t seed = 0;
  std::string dtype = "f32";  // training precision; tests use f64

  int hidden() const { return hidden_dim > 0 ? hidden_dim : code_dim; }

  static TokenizerConfig desk_scale() {
    TokenizerConfig c;
    c.num_tokens = 32;
    c.codebook_size = 256;
    c.code_dim = 64;
    c.iterations = 20000;
    c.batch_size = 8;
    c.learning_rate = 1e-3;
    return c;
  }

  std::string to_json() const;
  /// Overlays any keys present in `text` onto `base` (missing keys keep the
  /// base values), so partial configs and full resolved configs both work.
  static TokenizerConfig from_json(const std::string& text, const TokenizerConfig& base);
  static TokenizerConfig from_json(const std::string& text);
};

/// Learnable code table plus the EMA statistics that maintain it.
struct CodebookState {
  Eigen::MatrixXd codes;             // K x d_c
  Eigen::VectorXd ema_cluster_size;  // K
  Eigen::MatrixXd ema_embed_sum;     // K x d_c
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> usage_count;  // K

  int size() const { return static_cast<int>(codes.rows()); }
  int dim() const { return static_cast<int>(codes.cols()); }

  static CodebookState init(int k, int d, std::mt19937_64& rng, double scale = 0.02);
};

/// Nearest-code assignment (Euclidean, ties to the lowest index).
/// z is M x d_c; returns indices plus the selected rows.
struct QuantizeResult {
  std::vector<int> indices;
  Eigen::MatrixXd selected;  // M x d_c
};
QuantizeResult quantize(const Eigen::MatrixXd& z, const CodebookState& cb);

/// Softmax(Q) * CB: differentiable soft code selection. Value-domain form.
Eigen::MatrixXd soft_quantize(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& codes);

/// Tape form of soft_quantize for gradient work.
template <typename S>
Var<S> soft_quantize_graph(Tape<S>& t, Var<S> logits, Var<S> codes) {
  if (logits.cols() != codes.rows())
    throw ShapeError("soft_quantize: logits are " + std::to_string(logits.rows()) + "x" +
                     std::to_string(logits.cols()) + " but codebook has " +
                     std::to_string(codes.rows()) + " rows");
  return t.matmul(t.softmax_rows(logits), codes);
}

/// EMA codebook update from one batch of latents and their assignments.
void ema_update(CodebookState& cb, const Eigen::MatrixXd& z, const std::vector<int>& indices,
                double decay, double eps = 1e-8);

/// Reseeds codes whose EMA cluster size fell below the threshold with random
/// rows of the batch latents. Returns how many codes were reset.
int code_reset(CodebookState& cb, const Eigen::MatrixXd& z_batch, double reset_threshold,
               std::mt19937_64& rng);

/// Perturbs a random half of the joints with Gaussian noise in 6D rotation
/// space, then re-orthonormalizes through the rotation-matrix round trip.
BodyPose noise_augment(const BodyPose& pose, double sigma, std::mt19937_64& rng);

/// Encoder/decoder parameters. The encoder maps pose features, laid out as a
/// 6 x J channel/sequence matrix, through a learned expansion to M sequence
/// positions and a conv stack (four convolutions around one residual block);
/// the decoder mirrors it back to 6 x J.
template <typename S>
struct TokenizerModel {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  struct Conv {
    Mat w, b;
  };

  TokenizerConfig cfg;
  int body_joints = 21;

  Mat enc_expand;  // M x J sequence expansion
  Conv enc_in, enc_mid, enc_res_a, enc_res_b, enc_pre, enc_out;
  Mat dec_contract;  // J x M sequence contraction
  Conv dec_in, dec_mid, dec_res_a, dec_res_b, dec_pre, dec_out;

  static TokenizerModel init(const TokenizerConfig& cfg, std::mt19937_64& rng,
                             int body_joints = 21);

  /// Learnable parameters in a fixed order (codebook excluded; it is managed
  /// separately so EMA and gradient modes share the model).
  std::vector<Mat*> parameters();
  std::vector<std::string> parameter_names() const;

  template <typename T>
  TokenizerModel<T> cast() const;
};

/// Leaf bindings of a model's parameters on a tape. `leaves` follows
/// parameters() order for gradient extraction; the named handles mirror the
/// model layout for readable forward code.
template <typename S>
struct ModelVars {
  struct ConvV {
    Var<S> w, b;
  };
  Var<S> enc_expand;
  ConvV enc_in, enc_mid, enc_res_a, enc_res_b, enc_pre, enc_out;
  Var<S> dec_contract;
  ConvV dec_in, dec_mid, dec_res_a, dec_res_b, dec_pre, dec_out;
  std::vector<Var<S>> leaves;
};

template <typename S>
ModelVars<S> bind_model(Tape<S>& t, TokenizerModel<S>& model) {
  ModelVars<S> v;
  for (auto* p : model.parameters()) v.leaves.push_back(t.input(*p));
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

/// Encoder forward: feats is 6 x J; returns d_c x M.
template <typename S>
Var<S> encoder_forward(Tape<S>& t, const TokenizerModel<S>& model, const ModelVars<S>& mv,
                       Var<S> feats);

/// Decoder forward: zq is d_c x M; returns 6 x J.
template <typename S>
Var<S> decoder_forward(Tape<S>& t, const TokenizerModel<S>& model, const ModelVars<S>& mv,
                       Var<S> zq);

/// Value-domain encode of one pose (no gradients); z as M x d_c rows.
template <typename S>
Eigen::MatrixXd encode_pose(TokenizerModel<S>& model, const BodyPose& pose);

/// Value-domain decode of quantized features (M x d_c rows) back to a
/// BodyPose. The decoder emits only the body rotations; global orientation
/// and root translation stay identity/zero.
template <typename S>
BodyPose decode_features(TokenizerModel<S>& model, const Eigen::MatrixXd& zq);

/// Per-part values of the composite tokenizer objective.
struct VqLossParts {
  double reconstruction = 0.0;  // L1 pose features + L1 FK joints
  double embedding = 0.0;       // mean squared sg[z] vs codes
  double commitment = 0.0;      // mean squared z vs sg[codes]
  double total = 0.0;
};

/// Value-domain composite loss for reporting/tests.
VqLossParts vq_loss_value(const BodyPose& pose_gt, const BodyPose& recon,
                          const Eigen::MatrixXd& z, const Eigen::MatrixXd& z_hat,
                          const Skeleton& skel, const TokenizerConfig& cfg);

/// Training artifacts reported by train_tokenizer.
struct TrainResult {
  double initial_val_geodesic = 0.0;
  double final_val_geodesic = 0.0;
  double final_loss = 0.0;
  double codebook_utilization = 0.0;  // fraction of codes used on validation
  long iterations = 0;
};

struct TrainLogRow {
  long iter = 0;
  double total = 0, rec = 0, embed = 0, commit = 0;
  double val_geodesic = -1.0;  // -1 when not evaluated at this row
};

/// Trains the tokenizer on a pose dataset. Deterministic per config seed and
/// thread-count independent (per-sample gradients are reduced in index
/// order). `log` receives periodic rows for CSV emission; may be null.
template <typename S>
TrainResult train_tokenizer(TokenizerModel<S>& model, CodebookState& cb, const PoseDataset& data,
                            const Skeleton& skel, const TokenizerConfig& cfg,
                            std::vector<TrainLogRow>* log, int threads = 1);

/// Deterministic validation split: every k-th pose up to the config cap.
std::vector<size_t> validation_indices(size_t dataset_size, const TokenizerConfig& cfg);

/// Mean per-joint geodesic reconstruction error (radians) over poses.
template <typename S>
double eval_geodesic(TokenizerModel<S>& model, const CodebookState& cb,
                     const PoseDataset& data, const std::vector<size_t>& indices);

/// Fraction of codebook entries selected at least once over poses.
template <typename S>
double eval_utilization(TokenizerModel<S>& model, const CodebookState& cb,
                        const PoseDataset& data, const std::vector<size_t>& indices);

/// Mean FK-joint MPJPE (mm) of reconstructions over poses.
template <typename S>
double eval_mpjpe(TokenizerModel<S>& model, const CodebookState& cb, const PoseDataset& data,
                  const std::vector<size_t>& indices, const Skeleton& skel);

/// Checkpoint holding model, codebook and config (as a manifest extra).
template <typename S>
Checkpoint tokenizer_checkpoint(TokenizerModel<S>& model, const CodebookState& cb);

/// Rebuilds model and codebook from a checkpoint; dtype comes from the
/// manifest config.
void load_tokenizer_checkpoint(const Checkpoint& ckpt, TokenizerModel<double>& model,
                               CodebookState& cb, TokenizerConfig* cfg_out = nullptr);

}  // namespace poselab
