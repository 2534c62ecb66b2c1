#include "mmtlab/fusion/fusion.hpp"

#include <cmath>

#include "mmtlab/error.hpp"

namespace mmtlab::fusion {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(Errc::invalid_argument, message);
}

void require_shape(const Tensor2& t, std::size_t rows, std::size_t cols, const char* name) {
  require(t.rows() == rows && t.cols() == cols, std::string(name) + " must be " + std::to_string(rows) + "x" +
                                                    std::to_string(cols) + ", got " + t.shape_string());
  require(t.all_finite(), std::string(name) + " has non-finite entries");
}

void require_inputs(const Tensor2& t, std::size_t d, const char* name, bool allow_empty = false) {
  require(t.cols() == d, std::string(name) + " must have " + std::to_string(d) + " columns, got " + t.shape_string());
  require(allow_empty || t.rows() > 0, std::string(name) + " has no rows");
  require(t.all_finite(), std::string(name) + " has non-finite entries");
}

void check_attention(const AttentionWeights& w, std::size_t d, const char* prefix) {
  require_shape(w.query, d, d, (std::string(prefix) + "Q").c_str());
  require_shape(w.key, d, d, (std::string(prefix) + "K").c_str());
  require_shape(w.value, d, d, (std::string(prefix) + "V").c_str());
}

const Var& at(const std::map<std::string, Var>& vars, const std::string& name) {
  const auto it = vars.find(name);
  if (it == vars.end()) throw Error(Errc::invalid_argument, "missing graph input '" + name + "'");
  return it->second;
}

std::size_t ffn_width(const Dims& dims, std::size_t d_ff) { return d_ff ? d_ff : 4 * dims.d; }

Var encoder_graph(Graph& g, const std::map<std::string, Var>& v, EncoderMode mode, const EncoderOptions& options,
                  std::size_t heads, double pe_base) {
  Var x = at(v, "x");
  if (options.add_positions) {
    const Tensor2& xv = g.value(x);
    x = g.add(x, g.constant(positional_encoding(xv.rows(), xv.cols(), pe_base)));
  }

  Var hidden;
  if (mode == EncoderMode::concat) {
    const Var img = g.matmul(at(v, "image"), at(v, "W_img"));
    const Var combined = g.concat_rows(x, img);
    const Var attn = multi_head_attention(g, combined, x, {at(v, "Q"), at(v, "K"), at(v, "V")}, heads);
    hidden = layer_norm(g, g.add(combined, attn), at(v, "norm1_gamma"), at(v, "norm1_beta"));
  } else {
    const Var self = multi_head_attention(g, x, x, {at(v, "self_Q"), at(v, "self_K"), at(v, "self_V")}, heads);
    hidden = layer_norm(g, g.add(x, self), at(v, "norm1_gamma"), at(v, "norm1_beta"));
    if (mode == EncoderMode::selective) {
      const Var img = g.matmul(at(v, "image"), at(v, "W_img"));
      const Var attended = multi_head_attention(g, hidden, img, {at(v, "Q"), at(v, "K"), at(v, "V")}, heads);
      hidden = gated_fusion(g, hidden, attended, at(v, "W_t"), at(v, "W_i"));
    }
  }

  const Var inner = g.relu(g.add_row(g.matmul(hidden, at(v, "ffn_in")), at(v, "ffn_in_bias")));
  const Var ffn = g.add_row(g.matmul(inner, at(v, "ffn_out")), at(v, "ffn_out_bias"));
  const Var sum = g.add(hidden, ffn);
  if (options.bypass_output_norm) return sum;
  return layer_norm(g, sum, at(v, "norm2_gamma"), at(v, "norm2_beta"));
}

}  // namespace

void FusionParams::validate() const {
  require(d > 0 && heads > 0, "d and heads must be positive");
  require(d == heads * d_k, "d (" + std::to_string(d) + ") must equal heads * d_k (" + std::to_string(heads) +
                                " * " + std::to_string(d_k) + ")");
  check_attention(attention, d, "");
  require_shape(gate_text, d, d, "W_t");
  require_shape(gate_image, d, d, "W_i");
  if (visual_projection.size() > 0) {
    require(visual_projection.cols() == d, "W_img must have d columns, got " + visual_projection.shape_string());
    require(visual_projection.all_finite(), "W_img has non-finite entries");
  }
  require(pe_base > 0.0 && std::isfinite(pe_base), "pe_base must be positive");
}

FusionParams FusionParams::random(const Dims& dims, std::uint64_t seed) {
  require(dims.heads > 0 && dims.d % dims.heads == 0, "d must be divisible by heads");
  FusionParams p;
  p.d = dims.d;
  p.heads = dims.heads;
  p.d_k = dims.d_k();
  p.attention = {Tensor2::uniform(dims.d, dims.d, seed * 16 + 1), Tensor2::uniform(dims.d, dims.d, seed * 16 + 2),
                 Tensor2::uniform(dims.d, dims.d, seed * 16 + 3)};
  p.gate_text = Tensor2::uniform(dims.d, dims.d, seed * 16 + 4);
  p.gate_image = Tensor2::uniform(dims.d, dims.d, seed * 16 + 5);
  p.visual_projection = Tensor2::uniform(dims.d_img, dims.d, seed * 16 + 6);
  return p;
}

void EncoderParams::validate() const {
  fusion.validate();
  const std::size_t d = fusion.d;
  check_attention(self_attention, d, "self_");
  const std::size_t d_ff = ffn_in.cols();
  require(d_ff > 0, "feed-forward width must be positive");
  require_shape(ffn_in, d, d_ff, "ffn_in");
  require_shape(ffn_in_bias, 1, d_ff, "ffn_in_bias");
  require_shape(ffn_out, d_ff, d, "ffn_out");
  require_shape(ffn_out_bias, 1, d, "ffn_out_bias");
  for (const auto* ln : {&attention_norm, &output_norm}) {
    require_shape(ln->gamma, 1, d, "layer-norm gamma");
    require_shape(ln->beta, 1, d, "layer-norm beta");
  }
}

EncoderParams EncoderParams::random(const Dims& dims, std::uint64_t seed, std::size_t d_ff) {
  const std::size_t f = ffn_width(dims, d_ff);
  EncoderParams p;
  p.fusion = FusionParams::random(dims, seed);
  const std::uint64_t base = seed * 16 + 7;
  p.self_attention = {Tensor2::uniform(dims.d, dims.d, base * 31 + 1), Tensor2::uniform(dims.d, dims.d, base * 31 + 2),
                      Tensor2::uniform(dims.d, dims.d, base * 31 + 3)};
  p.ffn_in = Tensor2::uniform(dims.d, f, base * 31 + 4);
  p.ffn_in_bias = Tensor2::uniform(1, f, base * 31 + 5);
  p.ffn_out = Tensor2::uniform(f, dims.d, base * 31 + 6);
  p.ffn_out_bias = Tensor2::uniform(1, dims.d, base * 31 + 7);
  p.attention_norm = {Tensor2(1, dims.d, 1.0), Tensor2(1, dims.d, 0.0)};
  p.output_norm = {Tensor2(1, dims.d, 1.0), Tensor2(1, dims.d, 0.0)};
  return p;
}

EncoderParams EncoderParams::zeros(const Dims& dims, std::size_t d_ff) {
  const std::size_t f = ffn_width(dims, d_ff);
  const std::size_t d = dims.d;
  EncoderParams p;
  p.fusion.d = d;
  p.fusion.heads = dims.heads;
  p.fusion.d_k = dims.d_k();
  p.fusion.attention = {Tensor2(d, d), Tensor2(d, d), Tensor2(d, d)};
  p.fusion.gate_text = Tensor2(d, d);
  p.fusion.gate_image = Tensor2(d, d);
  p.fusion.visual_projection = Tensor2(dims.d_img, d);
  p.self_attention = {Tensor2(d, d), Tensor2(d, d), Tensor2(d, d)};
  p.ffn_in = Tensor2(d, f);
  p.ffn_in_bias = Tensor2(1, f);
  p.ffn_out = Tensor2(f, d);
  p.ffn_out_bias = Tensor2(1, d);
  p.attention_norm = {Tensor2(1, d, 1.0), Tensor2(1, d, 0.0)};
  p.output_norm = {Tensor2(1, d, 1.0), Tensor2(1, d, 0.0)};
  return p;
}

EncoderMode parse_encoder_mode(std::string_view name) {
  if (name == "text_only") return EncoderMode::text_only;
  if (name == "selective") return EncoderMode::selective;
  if (name == "concat") return EncoderMode::concat;
  throw Error(Errc::invalid_argument, "unknown encoder mode '" + std::string(name) + "'");
}

// ---- graph builders -----------------------------------------------------

Var multi_head_attention(Graph& g, Var queries, Var keys_values, const AttentionVars& w, std::size_t heads) {
  const Var q = g.matmul(queries, w.query);
  const Var k = g.matmul(keys_values, w.key);
  const Var v = g.matmul(keys_values, w.value);
  const std::size_t d = g.value(q).cols();
  require(heads > 0 && d % heads == 0, "model dimension must be divisible by heads");
  const std::size_t d_k = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_k));
  std::vector<Var> outputs;
  for (std::size_t h = 0; h < heads; ++h) {
    const Var qh = heads == 1 ? q : g.slice_cols(q, h * d_k, d_k);
    const Var kh = heads == 1 ? k : g.slice_cols(k, h * d_k, d_k);
    const Var vh = heads == 1 ? v : g.slice_cols(v, h * d_k, d_k);
    const Var weights = g.softmax_rows(g.scale(g.matmul_nt(qh, kh), inv_sqrt));
    outputs.push_back(g.matmul(weights, vh));
  }
  return heads == 1 ? outputs.front() : g.concat_cols(outputs);
}

Var gated_fusion(Graph& g, Var h_text, Var h_attn, Var gate_text, Var gate_image, Var* lambda_out) {
  const Var lambda = g.sigmoid(g.add(g.matmul(h_text, gate_text), g.matmul(h_attn, gate_image)));
  if (lambda_out) *lambda_out = lambda;
  return g.add(g.hadamard(g.one_minus(lambda), h_text), g.hadamard(lambda, h_attn));
}

Var layer_norm(Graph& g, Var x, Var gamma, Var beta) {
  return g.add_row(g.mul_row(g.normalize_rows(x, kLayerNormEpsilon), gamma), beta);
}

// ---- recorded ops -------------------------------------------------------

RecordedOp::RecordedOp(std::string name, Leaves leaves, Builder builder)
    : name_(std::move(name)), leaves_(std::move(leaves)), builder_(std::move(builder)) {
  for (const auto& [key, value] : leaves_) vars_[key] = graph_.leaf(value);
  output_ = builder_(graph_, vars_);
}

const Tensor2& RecordedOp::output() const {
  if (!output_) throw Error(Errc::state, "graph not recorded");
  return graph_.value(*output_);
}

Tensor2 RecordedOp::evaluate(const Leaves& overrides) const {
  if (!builder_) throw Error(Errc::state, "graph not recorded");
  Graph g;
  std::map<std::string, Var> vars;
  for (const auto& [key, value] : leaves_) {
    const auto it = overrides.find(key);
    vars[key] = g.leaf(it == overrides.end() ? value : it->second);
  }
  return g.value(builder_(g, vars));
}

Gradients RecordedOp::backward(const Tensor2& upstream) {
  if (!output_) throw Error(Errc::state, "graph not recorded");
  graph_.backward(*output_, upstream);
  Gradients grads;
  for (const auto& [key, var] : vars_) grads[key] = graph_.grad(var);
  return grads;
}

Gradients backward(RecordedOp& op, const Tensor2& upstream) { return op.backward(upstream); }

RecordedOp record_positional_input(const Tensor2& x, double pe_base) {
  require(x.rows() > 0, "x has no rows");
  Tensor2 table = positional_encoding(x.rows(), x.cols(), pe_base);
  return RecordedOp("positional_input", {{"x", x}}, [table](Graph& g, const std::map<std::string, Var>& v) {
    return g.add(at(v, "x"), g.constant(table));
  });
}

RecordedOp record_selective_attention(const Tensor2& h_text, const Tensor2& h_img, const FusionParams& params) {
  params.validate();
  require_inputs(h_text, params.d, "H_text");
  require_inputs(h_img, params.d, "H_img");
  const std::size_t heads = params.heads;
  return RecordedOp("selective_attention",
                    {{"h_text", h_text}, {"h_img", h_img}, {"Q", params.attention.query},
                     {"K", params.attention.key}, {"V", params.attention.value}},
                    [heads](Graph& g, const std::map<std::string, Var>& v) {
                      return multi_head_attention(g, at(v, "h_text"), at(v, "h_img"),
                                                  {at(v, "Q"), at(v, "K"), at(v, "V")}, heads);
                    });
}

RecordedOp record_gated_fusion(const Tensor2& h_text, const Tensor2& h_attn, const FusionParams& params) {
  require(params.gate_text.rows() == params.d && params.gate_text.cols() == params.d &&
              params.gate_image.same_shape(params.gate_text),
          "W_t and W_i must be d x d");
  require_inputs(h_text, params.d, "H_text");
  require(h_attn.same_shape(h_text), "H_attn shape " + h_attn.shape_string() + " differs from H_text " +
                                         h_text.shape_string());
  require(h_attn.all_finite(), "H_attn has non-finite entries");
  return RecordedOp("gated_fusion",
                    {{"h_text", h_text}, {"h_attn", h_attn}, {"W_t", params.gate_text}, {"W_i", params.gate_image}},
                    [](Graph& g, const std::map<std::string, Var>& v) {
                      return gated_fusion(g, at(v, "h_text"), at(v, "h_attn"), at(v, "W_t"), at(v, "W_i"));
                    });
}

RecordedOp record_project_visual(const Tensor2& x_img, const Tensor2& w_img) {
  require(x_img.cols() == w_img.rows(), "project_visual: " + x_img.shape_string() + " * " + w_img.shape_string());
  require(x_img.all_finite() && w_img.all_finite(), "project_visual: non-finite input");
  return RecordedOp("project_visual", {{"x_img", x_img}, {"W_img", w_img}},
                    [](Graph& g, const std::map<std::string, Var>& v) {
                      return g.matmul(at(v, "x_img"), at(v, "W_img"));
                    });
}

RecordedOp record_concat_fusion_attention(const Tensor2& x_text, const Tensor2& x_img_proj,
                                          const FusionParams& params) {
  params.validate();
  require_inputs(x_text, params.d, "x_text");
  require_inputs(x_img_proj, params.d, "x_img_proj", /*allow_empty=*/true);
  const std::size_t heads = params.heads;
  return RecordedOp("concat_fusion_attention",
                    {{"x_text", x_text}, {"x_img_proj", x_img_proj}, {"Q", params.attention.query},
                     {"K", params.attention.key}, {"V", params.attention.value}},
                    [heads](Graph& g, const std::map<std::string, Var>& v) {
                      const Var text = at(v, "x_text");
                      const Var combined = g.concat_rows(text, at(v, "x_img_proj"));
                      return multi_head_attention(g, combined, text, {at(v, "Q"), at(v, "K"), at(v, "V")}, heads);
                    });
}

RecordedOp record_encoder_block(const Tensor2& x, const EncoderParams& params, const std::optional<Tensor2>& image,
                                EncoderMode mode, const EncoderOptions& options) {
  params.validate();
  const std::size_t d = params.fusion.d;
  require_inputs(x, d, "x");
  if (mode != EncoderMode::text_only) {
    require(image.has_value(), "image features are required unless mode is text_only");
    require(params.fusion.visual_projection.size() > 0, "W_img is required for image modes");
    require_inputs(*image, params.fusion.visual_projection.rows(), "image", mode == EncoderMode::concat);
  } else {
    require(!image.has_value(), "text_only mode takes no image");
  }

  Leaves leaves = {{"x", x},
                   {"ffn_in", params.ffn_in},
                   {"ffn_in_bias", params.ffn_in_bias},
                   {"ffn_out", params.ffn_out},
                   {"ffn_out_bias", params.ffn_out_bias},
                   {"norm1_gamma", params.attention_norm.gamma},
                   {"norm1_beta", params.attention_norm.beta}};
  if (!options.bypass_output_norm) {
    leaves["norm2_gamma"] = params.output_norm.gamma;
    leaves["norm2_beta"] = params.output_norm.beta;
  }
  if (mode != EncoderMode::concat) {
    leaves["self_Q"] = params.self_attention.query;
    leaves["self_K"] = params.self_attention.key;
    leaves["self_V"] = params.self_attention.value;
  }
  if (mode != EncoderMode::text_only) {
    leaves["image"] = *image;
    leaves["W_img"] = params.fusion.visual_projection;
    leaves["Q"] = params.fusion.attention.query;
    leaves["K"] = params.fusion.attention.key;
    leaves["V"] = params.fusion.attention.value;
  }
  if (mode == EncoderMode::selective) {
    leaves["W_t"] = params.fusion.gate_text;
    leaves["W_i"] = params.fusion.gate_image;
  }
  const std::size_t heads = params.fusion.heads;
  const double pe_base = params.fusion.pe_base;
  return RecordedOp("encoder_block", std::move(leaves),
                    [mode, options, heads, pe_base](Graph& g, const std::map<std::string, Var>& v) {
                      return encoder_graph(g, v, mode, options, heads, pe_base);
                    });
}

// ---- plain forward ------------------------------------------------------

Tensor2 positional_encoding(std::size_t length, std::size_t d, double base) {
  require(length >= 1, "sequence length must be >= 1");
  require(d > 0 && d % 2 == 0, "positional encoding dimension must be even, got " + std::to_string(d));
  require(base > 0.0, "positional encoding base must be positive");
  Tensor2 p(length, d);
  for (std::size_t k = 0; k < length; ++k) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double angle = static_cast<double>(k) / std::pow(base, 2.0 * double(i) / double(d));
      p(k, 2 * i) = std::sin(angle);
      p(k, 2 * i + 1) = std::cos(angle);
    }
  }
  return p;
}

std::vector<Tensor2> attention_weights(const Tensor2& queries, const Tensor2& keys, const AttentionWeights& w,
                                       std::size_t heads) {
  const std::size_t d = w.query.cols();
  require(heads > 0 && d % heads == 0, "model dimension must be divisible by heads");
  require_inputs(queries, w.query.rows(), "queries");
  require_inputs(keys, w.key.rows(), "keys");
  const Tensor2 q = matmul(queries, w.query), k = matmul(keys, w.key);
  const std::size_t d_k = d / heads;
  std::vector<Tensor2> out;
  for (std::size_t h = 0; h < heads; ++h) {
    Graph g;
    const Var qh = g.slice_cols(g.constant(q), h * d_k, d_k);
    const Var kh = g.slice_cols(g.constant(k), h * d_k, d_k);
    out.push_back(g.value(g.softmax_rows(g.scale(g.matmul_nt(qh, kh), 1.0 / std::sqrt(double(d_k))))));
  }
  return out;
}

Tensor2 selective_attention(const Tensor2& h_text, const Tensor2& h_img, const FusionParams& params) {
  return record_selective_attention(h_text, h_img, params).output();
}

GatedFusion gated_fusion(const Tensor2& h_text, const Tensor2& h_attn, const FusionParams& params) {
  RecordedOp op = record_gated_fusion(h_text, h_attn, params);
  Tensor2 lambda(h_text.rows(), h_text.cols());
  {
    Graph g;
    const Var out = g.sigmoid(g.add(g.matmul(g.constant(h_text), g.constant(params.gate_text)),
                                    g.matmul(g.constant(h_attn), g.constant(params.gate_image))));
    lambda = g.value(out);
  }
  return {op.output(), std::move(lambda)};
}

Tensor2 project_visual(const Tensor2& x_img, const Tensor2& w_img) {
  return record_project_visual(x_img, w_img).output();
}

Tensor2 concat_fusion_attention(const Tensor2& x_text, const Tensor2& x_img_proj, const FusionParams& params) {
  return record_concat_fusion_attention(x_text, x_img_proj, params).output();
}

Tensor2 encoder_block(const Tensor2& x, const EncoderParams& params, const std::optional<Tensor2>& image,
                      EncoderMode mode, const EncoderOptions& options) {
  return record_encoder_block(x, params, image, mode, options).output();
}

}  // namespace mmtlab::fusion
