#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mmtlab/error.hpp"
#include "mmtlab/fusion/check.hpp"
#include "mmtlab/fusion/fusion.hpp"
#include "oracles.hpp"

using namespace mmtlab::fusion;

namespace {

oracle::Mat to_mat(const Tensor2& t) {
  oracle::Mat m = oracle::zeros(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

std::vector<double> row0(const Tensor2& t) { return {t.values().begin(), t.values().begin() + t.cols()}; }

double max_diff(const Tensor2& a, const oracle::Mat& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - b[i][j]));
  return worst;
}

oracle::EncoderWeights weights_of(const EncoderParams& p) {
  oracle::EncoderWeights w;
  w.self_q = to_mat(p.self_attention.query);
  w.self_k = to_mat(p.self_attention.key);
  w.self_v = to_mat(p.self_attention.value);
  w.q = to_mat(p.fusion.attention.query);
  w.k = to_mat(p.fusion.attention.key);
  w.v = to_mat(p.fusion.attention.value);
  w.w_t = to_mat(p.fusion.gate_text);
  w.w_i = to_mat(p.fusion.gate_image);
  w.w_img = to_mat(p.fusion.visual_projection);
  w.ffn_in = to_mat(p.ffn_in);
  w.ffn_out = to_mat(p.ffn_out);
  w.ffn_in_bias = row0(p.ffn_in_bias);
  w.ffn_out_bias = row0(p.ffn_out_bias);
  w.g1 = row0(p.attention_norm.gamma);
  w.b1 = row0(p.attention_norm.beta);
  w.g2 = row0(p.output_norm.gamma);
  w.b2 = row0(p.output_norm.beta);
  w.heads = p.fusion.heads;
  return w;
}

FusionParams unit_params(std::size_t d) {
  FusionParams p;
  p.d = p.d_k = d;
  p.heads = 1;
  p.attention = {Tensor2::identity(d), Tensor2::identity(d), Tensor2::identity(d)};
  p.gate_text = Tensor2(d, d);
  p.gate_image = Tensor2(d, d);
  p.visual_projection = Tensor2::identity(d);
  return p;
}

}  // namespace

TEST(Positional, FirstRowAlternates) {
  const auto p = positional_encoding(3, 6);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(p(0, j), j % 2 == 0 ? 0.0 : 1.0);
  EXPECT_NEAR(max_diff(p, oracle::positional(3, 6, 10000.0)), 0.0, 1e-12);
  EXPECT_THROW(positional_encoding(3, 5), mmtlab::Error);
}

TEST(SelectiveAttention, HandComputedScalarCase) {
  const auto p = unit_params(1);
  const auto out = selective_attention(Tensor2::from_rows({{1}}), Tensor2::from_rows({{2}, {0}}), p);
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(out(0, 0), 2.0 * e2 / (e2 + 1.0), 1e-12);
  EXPECT_NEAR(out(0, 0), 1.7616, 1e-4);
  const auto w = attention_weights(Tensor2::from_rows({{1}}), Tensor2::from_rows({{2}, {0}}), p.attention, 1);
  EXPECT_NEAR(w[0](0, 0), 0.8808, 1e-4);
  EXPECT_NEAR(w[0](0, 1), 0.1192, 1e-4);
}

TEST(SelectiveAttention, IdenticalImageRowsReturnThatRow) {
  auto p = FusionParams::random({4, 2, 4, 3, 5}, 3);
  p.attention.value = Tensor2::identity(4);
  Tensor2 img(5, 4);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) img(i, j) = 0.5 * double(j) - 0.3;
  const auto out = selective_attention(Tensor2::uniform(3, 4, 9, -1, 1), img, p);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out(i, j), img(0, j), 1e-12);
}

TEST(SelectiveAttention, ZeroQueryGivesUniformWeights) {
  auto p = FusionParams::random({4, 2, 4, 3, 5}, 3);
  p.attention.query = Tensor2(4, 4);
  const auto w = attention_weights(Tensor2::uniform(3, 4, 1), Tensor2::uniform(5, 4, 2), p.attention, 2);
  for (const auto& head : w)
    for (double v : head.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 5.0);
}

TEST(SelectiveAttention, SoftmaxRowsSumToOne) {
  const auto p = FusionParams::random({8, 2, 8, 4, 6}, 5);
  for (const auto& head : attention_weights(Tensor2::uniform(4, 8, 1, -3, 3), Tensor2::uniform(6, 8, 2, -3, 3),
                                            p.attention, 2))
    for (std::size_t i = 0; i < head.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < head.cols(); ++j) s += head(i, j);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(SelectiveAttention, MatchesOracle) {
  const auto p = FusionParams::random({8, 2, 8, 4, 6}, 11);
  const auto ht = Tensor2::uniform(4, 8, 1, -1, 1), hi = Tensor2::uniform(6, 8, 2, -1, 1);
  const auto expect = oracle::attention(to_mat(ht), to_mat(hi), to_mat(p.attention.query), to_mat(p.attention.key),
                                        to_mat(p.attention.value), 2);
  EXPECT_LT(max_diff(selective_attention(ht, hi, p), expect), 1e-12);
}

TEST(SelectiveAttention, EmptyImageSetRejected) {
  const auto p = FusionParams::random({4, 1, 4, 2, 2}, 1);
  EXPECT_THROW(selective_attention(Tensor2::uniform(2, 4, 1), Tensor2(0, 4), p), mmtlab::Error);
}

TEST(GatedFusion, ZeroGateIsMidpoint) {
  auto p = FusionParams::random({4, 1, 4, 3, 3}, 2);
  p.gate_text = Tensor2(4, 4);
  p.gate_image = Tensor2(4, 4);
  const auto a = Tensor2::uniform(3, 4, 1), b = Tensor2::uniform(3, 4, 2);
  const auto r = gated_fusion(a, b, p);
  for (double v : r.lambda.values()) EXPECT_EQ(v, 0.5);
  EXPECT_LT(max_abs_diff(r.enc_out, 0.5 * (a + b)), 1e-15);
}

TEST(GatedFusion, SaturatedGateKeepsText) {
  auto p = FusionParams::random({4, 1, 4, 3, 3}, 2);
  const auto a = Tensor2::uniform(3, 4, 1, 0.5, 1.0), b = Tensor2::uniform(3, 4, 2);
  p.gate_text = Tensor2(4, 4, -100.0);
  p.gate_image = Tensor2(4, 4);
  const auto r = gated_fusion(a, b, p);
  for (double v : r.lambda.values()) EXPECT_LT(v, 1e-20);
  EXPECT_LT(max_abs_diff(r.enc_out, a), 1e-12);
}

TEST(GatedFusion, OutputBetweenInputs) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto p = FusionParams::random({4, 1, 4, 3, 3}, s);
    const auto a = Tensor2::uniform(3, 4, 2 * s + 1, -2, 2), b = Tensor2::uniform(3, 4, 2 * s + 2, -2, 2);
    const auto r = gated_fusion(a, b, p);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_GE(r.enc_out[i], std::min(a[i], b[i]) - 1e-15);
      EXPECT_LE(r.enc_out[i], std::max(a[i], b[i]) + 1e-15);
    }
  }
}

TEST(ProjectVisual, IdentityAndZero) {
  const auto x = Tensor2::uniform(5, 4, 3);
  EXPECT_EQ(project_visual(x, Tensor2::identity(4)), x);
  const auto z = project_visual(x, Tensor2(4, 6));
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(ConcatFusion, ImageQueryRowMatchesHandComputation) {
  const auto p = unit_params(1);
  const auto out = concat_fusion_attention(Tensor2::from_rows({{1}, {0}}), Tensor2::from_rows({{3}}), p);
  ASSERT_EQ(out.rows(), 3u);
  // query 3 against keys (1, 0): weights softmax(3, 0), values (1, 0)
  const double e3 = std::exp(3.0);
  EXPECT_NEAR(out(2, 0), e3 / (e3 + 1.0), 1e-12);
  // query 1: softmax(1, 0)
  EXPECT_NEAR(out(0, 0), std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-12);
  EXPECT_NEAR(out(1, 0), 0.5, 1e-12);
}

TEST(Encoder, ZeroWeightTextOnlyIsNormalizedInput) {
  const Dims dims{8, 2, 8, 4, 3};
  const auto x = Tensor2::uniform(4, 8, 5, -1, 1);
  const auto out = encoder_block(x, EncoderParams::zeros(dims), std::nullopt, EncoderMode::text_only, {false, true});
  for (std::size_t i = 0; i < 4; ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 8; ++j) mean += x(i, j) / 8.0;
    for (std::size_t j = 0; j < 8; ++j) var += (x(i, j) - mean) * (x(i, j) - mean) / 8.0;
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(out(i, j), (x(i, j) - mean) / std::sqrt(var + 1e-6), 1e-12);
  }
}

TEST(Encoder, SaturatedGateCollapsesToTextOnly) {
  const Dims dims{8, 2, 6, 4, 3};
  auto p = EncoderParams::random(dims, 4);
  // LN1 output has zero mean and unit variance per row, so with beta = 1 and
  // W_t = -100/d everywhere every gate logit is -100.
  p.attention_norm.gamma = Tensor2(1, 8, 1.0);
  p.attention_norm.beta = Tensor2(1, 8, 1.0);
  p.fusion.gate_text = Tensor2(8, 8, -100.0 / 8.0);
  p.fusion.gate_image = Tensor2(8, 8);
  const auto x = Tensor2::uniform(4, 8, 2, -1, 1);
  const auto img = Tensor2::uniform(3, 6, 3, -1, 1);
  const auto sel = encoder_block(x, p, img, EncoderMode::selective);
  const auto txt = encoder_block(x, p, std::nullopt, EncoderMode::text_only);
  EXPECT_LT(max_abs_diff(sel, txt), 1e-10);
}

TEST(Encoder, MatchesReferenceForwardInEveryMode) {
  const Dims dims{8, 2, 6, 4, 3};
  const auto p = EncoderParams::random(dims, 9);
  const auto w = weights_of(p);
  const auto x = Tensor2::uniform(4, 8, 12, -1, 1);
  const auto img = Tensor2::uniform(3, 6, 13, -1, 1);
  const auto xm = to_mat(x), im = to_mat(img);
  for (bool pos : {false, true}) {
    EXPECT_LT(max_diff(encoder_block(x, p, std::nullopt, EncoderMode::text_only, {pos, false}),
                       oracle::encoder(xm, nullptr, w, oracle::Mode::text_only, pos, 10000.0)),
              1e-10);
    EXPECT_LT(max_diff(encoder_block(x, p, img, EncoderMode::selective, {pos, false}),
                       oracle::encoder(xm, &im, w, oracle::Mode::selective, pos, 10000.0)),
              1e-10);
    const auto concat = encoder_block(x, p, img, EncoderMode::concat, {pos, false});
    EXPECT_EQ(concat.rows(), 7u);
    EXPECT_LT(max_diff(concat, oracle::encoder(xm, &im, w, oracle::Mode::concat, pos, 10000.0)), 1e-10);
  }
}

TEST(Encoder, ImageModesNeedAnImage) {
  const Dims dims{8, 2, 6, 4, 3};
  const auto p = EncoderParams::random(dims, 9);
  EXPECT_THROW(encoder_block(Tensor2::uniform(4, 8, 1), p, std::nullopt, EncoderMode::selective), mmtlab::Error);
  EXPECT_THROW(parse_encoder_mode("fancy"), mmtlab::Error);
  EXPECT_EQ(parse_encoder_mode("concat"), EncoderMode::concat);
}

TEST(Encoder, ImagePermutationInvariance) {
  // Selective attention pools over image rows, so their order cannot matter.
  const Dims dims{8, 2, 6, 4, 3};
  const auto p = EncoderParams::random(dims, 2);
  const auto x = Tensor2::uniform(4, 8, 1, -1, 1);
  const auto img = Tensor2::uniform(3, 6, 2, -1, 1);
  Tensor2 shuffled(3, 6);
  for (std::size_t j = 0; j < 6; ++j) {
    shuffled(0, j) = img(2, j);
    shuffled(1, j) = img(0, j);
    shuffled(2, j) = img(1, j);
  }
  EXPECT_LT(max_abs_diff(encoder_block(x, p, img, EncoderMode::selective),
                         encoder_block(x, p, shuffled, EncoderMode::selective)),
            1e-12);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const Dims dims{8, 2, 6, 4, 3};
  auto op = record_encoder_block(Tensor2::uniform(4, 8, 1), EncoderParams::random(dims, 1),
                                 Tensor2::uniform(3, 6, 2), EncoderMode::selective);
  const auto grads = op.backward(Tensor2(4, 8));
  EXPECT_EQ(grads.size(), op.leaves().size());
  for (const auto& [name, g] : grads)
    for (double v : g.values()) EXPECT_EQ(v, 0.0) << name;
}

TEST(Backward, LeafSetsFollowMode) {
  const Dims dims{8, 2, 6, 4, 3};
  const auto p = EncoderParams::random(dims, 1);
  const auto x = Tensor2::uniform(4, 8, 1);
  const auto img = Tensor2::uniform(3, 6, 2);
  const auto text = record_encoder_block(x, p, std::nullopt, EncoderMode::text_only);
  EXPECT_FALSE(text.leaves().contains("image"));
  EXPECT_FALSE(text.leaves().contains("W_t"));
  const auto concat = record_encoder_block(x, p, img, EncoderMode::concat);
  EXPECT_FALSE(concat.leaves().contains("self_Q"));
  EXPECT_TRUE(concat.leaves().contains("W_img"));
  const auto bypass = record_encoder_block(x, p, img, EncoderMode::selective, {false, true});
  EXPECT_FALSE(bypass.leaves().contains("norm2_gamma"));
  EXPECT_TRUE(bypass.leaves().contains("W_t"));
}

TEST(Backward, FiniteDifferencesOnSmallInstances) {
  const Dims small{4, 2, 4, 3, 2};
  const Dims wide{8, 2, 6, 4, 3};
  for (const Dims& dims : {small, wide}) {
    const auto fp = FusionParams::random(dims, 3);
    const auto ep = EncoderParams::random(dims, 3);
    const auto x = Tensor2::uniform(dims.m, dims.d, 31, -1, 1);
    const auto h = Tensor2::uniform(dims.n, dims.d, 32, -1, 1);
    const auto raw = Tensor2::uniform(dims.n, dims.d_img, 33, -1, 1);
    std::vector<RecordedOp> ops;
    ops.push_back(record_positional_input(x));
    ops.push_back(record_selective_attention(x, h, fp));
    ops.push_back(record_gated_fusion(x, Tensor2::uniform(dims.m, dims.d, 34, -1, 1), fp));
    ops.push_back(record_project_visual(raw, Tensor2::uniform(dims.d_img, dims.d, 35)));
    ops.push_back(record_concat_fusion_attention(x, h, fp));
    for (auto mode : {EncoderMode::text_only, EncoderMode::selective, EncoderMode::concat})
      ops.push_back(record_encoder_block(x, ep, mode == EncoderMode::text_only ? std::nullopt : std::optional(raw), mode,
                                         {true, false}));
    for (auto& op : ops) {
      const auto& out = op.output();
      const auto upstream = Tensor2::uniform(out.rows(), out.cols(), 77, -1, 1);
      for (const auto& e : gradient_errors(op, upstream, 1e-5, 0, 1))
        EXPECT_LT(e.error, 1e-4) << op.name() << " " << e.leaf;
    }
  }
}

TEST(Check, DefaultSuitePasses) {
  const auto results = run_fusion_checks({});
  for (const auto& r : results) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
  EXPECT_NE(format_check_table(results).find("passed"), std::string::npos);
}

TEST(Check, DimsParsing) {
  const auto d = parse_dims("16,4,20,3,5");
  EXPECT_EQ(d.d, 16u);
  EXPECT_EQ(d.n, 5u);
  EXPECT_THROW(parse_dims("16,3,20,3,5"), mmtlab::Error);
  EXPECT_THROW(parse_dims("16,4"), mmtlab::Error);
  EXPECT_THROW(parse_dims("7,1,2,3,4"), mmtlab::Error);
}

TEST(Check, RelativeError) {
  EXPECT_EQ(relative_error({1, 2}, {1, 2}), 0.0);
  EXPECT_NEAR(relative_error({1, 0}, {0, 1}), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(relative_error({0, 0}, {0, 0}), 0.0);
}
