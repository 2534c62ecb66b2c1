#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmtlab/fusion/graph.hpp"
#include "mmtlab/fusion/tensor.hpp"

namespace mmtlab::fusion {

inline constexpr double kLayerNormEpsilon = 1e-6;
inline constexpr double kDefaultPeBase = 10000.0;

/// Toy dimensions used by demos and `fuse-check`.
struct Dims {
  std::size_t d = 32;
  std::size_t heads = 4;
  std::size_t d_img = 48;
  std::size_t m = 5;  // text positions
  std::size_t n = 9;  // image patches

  std::size_t d_k() const noexcept { return heads ? d / heads : 0; }
};

/// Query/key/value projections, each d x d. Head h uses columns
/// [h*d_k, (h+1)*d_k) of every projection.
struct AttentionWeights {
  Tensor2 query;
  Tensor2 key;
  Tensor2 value;
};

struct FusionParams {
  std::size_t d = 0;
  std::size_t d_k = 0;
  std::size_t heads = 1;
  AttentionWeights attention;  // Q, K, V of the fusion attention
  Tensor2 gate_text;           // W_t, d x d
  Tensor2 gate_image;          // W_i, d x d
  Tensor2 visual_projection;   // W_img, d_img x d
  double pe_base = kDefaultPeBase;

  /// Throws Error(Errc::invalid_argument) on inconsistent shapes or
  /// non-finite weights.
  void validate() const;

  /// Weights uniform on [-0.1, 0.1] from `seed`.
  static FusionParams random(const Dims& dims, std::uint64_t seed);
};

struct LayerNormParams {
  Tensor2 gamma;  // 1 x d, initialised to 1
  Tensor2 beta;   // 1 x d, initialised to 0
};

struct EncoderParams {
  AttentionWeights self_attention;
  FusionParams fusion;
  Tensor2 ffn_in;        // d x d_ff
  Tensor2 ffn_in_bias;   // 1 x d_ff
  Tensor2 ffn_out;       // d_ff x d
  Tensor2 ffn_out_bias;  // 1 x d
  LayerNormParams attention_norm;
  LayerNormParams output_norm;

  void validate() const;
  static EncoderParams random(const Dims& dims, std::uint64_t seed, std::size_t d_ff = 0);
  /// Every weight, bias and norm parameter zero except the norm scales (1).
  static EncoderParams zeros(const Dims& dims, std::size_t d_ff = 0);
};

enum class EncoderMode { text_only, selective, concat };

EncoderMode parse_encoder_mode(std::string_view name);

struct EncoderOptions {
  /// Add sinusoidal position encodings to the text input first.
  bool add_positions = false;
  /// Skip the final layer normalization (identity instead).
  bool bypass_output_norm = false;
};

// ---- plain forward ------------------------------------------------------

/// L x d table, P(k, 2i) = sin(k / base^(2i/d)), P(k, 2i+1) = cos(...).
Tensor2 positional_encoding(std::size_t length, std::size_t d, double base = kDefaultPeBase);

/// softmax((queries Q)(keys K)^T / sqrt(d_k)) per head, row-wise over keys.
std::vector<Tensor2> attention_weights(const Tensor2& queries, const Tensor2& keys,
                                       const AttentionWeights& w, std::size_t heads);

/// Text states attend over (already projected) image states.
Tensor2 selective_attention(const Tensor2& h_text, const Tensor2& h_img, const FusionParams& params);

struct GatedFusion {
  Tensor2 enc_out;
  Tensor2 lambda;
};

/// lambda = sigmoid(h_text W_t + h_attn W_i); out = (1 - lambda) h_text + lambda h_attn.
GatedFusion gated_fusion(const Tensor2& h_text, const Tensor2& h_attn, const FusionParams& params);

Tensor2 project_visual(const Tensor2& x_img, const Tensor2& w_img);

/// [x_text; x_img_proj] queries attending over x_text keys/values;
/// (m + n) x d.
Tensor2 concat_fusion_attention(const Tensor2& x_text, const Tensor2& x_img_proj, const FusionParams& params);

/// One encoder layer: attention (per mode), residual + norm, ReLU feed-forward,
/// residual + norm. Selective mode gates the self-attended states with
/// attention over the projected image before the feed-forward sublayer; concat
/// mode returns (m + n) rows.
Tensor2 encoder_block(const Tensor2& x, const EncoderParams& params, const std::optional<Tensor2>& image,
                      EncoderMode mode, const EncoderOptions& options = {});

// ---- graph builders -----------------------------------------------------

struct AttentionVars {
  Var query, key, value;
};

Var multi_head_attention(Graph& g, Var queries, Var keys_values, const AttentionVars& w, std::size_t heads);
Var gated_fusion(Graph& g, Var h_text, Var h_attn, Var gate_text, Var gate_image, Var* lambda_out = nullptr);
Var layer_norm(Graph& g, Var x, Var gamma, Var beta);

// ---- recorded graphs and backward --------------------------------------

/// Gradients keyed by leaf name ("h_text", "Q", "W_t", "ffn_in", ...).
using Gradients = std::map<std::string, Tensor2>;
using Leaves = std::map<std::string, Tensor2>;

/// A forward pass recorded on a Graph, with its named inputs and parameters.
class RecordedOp {
 public:
  using Builder = std::function<Var(Graph&, const std::map<std::string, Var>&)>;

  RecordedOp() = default;
  RecordedOp(std::string name, Leaves leaves, Builder builder);

  bool recorded() const noexcept { return output_.has_value(); }
  const std::string& name() const noexcept { return name_; }
  const Tensor2& output() const;
  const Leaves& leaves() const noexcept { return leaves_; }

  /// Re-runs the forward pass with some leaves replaced.
  Tensor2 evaluate(const Leaves& overrides) const;

  /// Reverse-mode gradients of sum(upstream .* output) for every leaf.
  /// Throws Error(Errc::state) if nothing was recorded.
  Gradients backward(const Tensor2& upstream);

 private:
  std::string name_;
  Leaves leaves_;
  Builder builder_;
  Graph graph_;
  std::map<std::string, Var> vars_;
  std::optional<Var> output_;
};

Gradients backward(RecordedOp& op, const Tensor2& upstream);

/// x + positional_encoding(rows(x), cols(x)); leaf "x".
RecordedOp record_positional_input(const Tensor2& x, double pe_base = kDefaultPeBase);
/// Leaves "h_text", "h_img", "Q", "K", "V".
RecordedOp record_selective_attention(const Tensor2& h_text, const Tensor2& h_img, const FusionParams& params);
/// Leaves "h_text", "h_attn", "W_t", "W_i"; output is enc_out.
RecordedOp record_gated_fusion(const Tensor2& h_text, const Tensor2& h_attn, const FusionParams& params);
/// Leaves "x_img", "W_img".
RecordedOp record_project_visual(const Tensor2& x_img, const Tensor2& w_img);
/// Leaves "x_text", "x_img_proj", "Q", "K", "V".
RecordedOp record_concat_fusion_attention(const Tensor2& x_text, const Tensor2& x_img_proj,
                                          const FusionParams& params);
/// Leaves "x", "image" (unless text_only), "self_Q", "self_K", "self_V",
/// "Q", "K", "V", "W_t", "W_i", "W_img" (as used by the mode), "ffn_in",
/// "ffn_in_bias", "ffn_out", "ffn_out_bias", "norm1_gamma", "norm1_beta",
/// "norm2_gamma", "norm2_beta".
RecordedOp record_encoder_block(const Tensor2& x, const EncoderParams& params, const std::optional<Tensor2>& image,
                                EncoderMode mode, const EncoderOptions& options = {});

}  // namespace mmtlab::fusion
