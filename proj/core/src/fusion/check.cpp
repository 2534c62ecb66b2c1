#include "mmtlab/fusion/check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mmtlab/error.hpp"
#include "mmtlab/keyed_rng.hpp"

namespace mmtlab::fusion {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

Tensor2 draw(std::size_t rows, std::size_t cols, std::uint64_t seed, std::uint64_t tag, double lo = -1.0,
             double hi = 1.0) {
  return Tensor2::uniform(rows, cols, KeyedRng(seed).bits({tag}), lo, hi);
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

double weighted_sum(const Tensor2& upstream, const Tensor2& out) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += upstream[i] * out[i];
  return s;
}

std::vector<std::size_t> probe_indices(std::size_t size, std::size_t max_entries, std::uint64_t seed,
                                       const std::string& leaf) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  if (max_entries == 0 || size <= max_entries) return idx;
  const KeyedRng rng(seed);
  const std::uint64_t key = fnv1a(leaf);
  for (std::size_t i = 0; i < max_entries; ++i) {
    const std::size_t j = i + rng.below(size - i, key, i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max_entries);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Row-wise layer norm with unit scale and zero shift, coded directly.
Tensor2 plain_layer_norm(const Tensor2& x) {
  Tensor2 out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) mean += x(r, c);
    mean /= double(x.cols());
    double var = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= double(x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean) / std::sqrt(var + kLayerNormEpsilon);
  }
  return out;
}

CheckResult softmax_check(const std::vector<Tensor2>& weights, const std::string& name) {
  double worst = 0.0;
  bool in_range = true;
  for (const Tensor2& w : weights) {
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < w.cols(); ++c) {
        s += w(r, c);
        in_range = in_range && w(r, c) >= 0.0 && w(r, c) <= 1.0;
      }
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  return {name, worst <= 1e-9 && in_range,
          "max |row sum - 1| " + fmt("%.2e", worst) + (in_range ? "" : ", weight outside [0,1]")};
}

CheckResult gradient_check(const std::string& name, RecordedOp op, const CheckConfig& cfg, std::uint64_t tag) {
  const Tensor2 upstream = draw(op.output().rows(), op.output().cols(), cfg.seed, tag);
  const auto errors = gradient_errors(op, upstream, cfg.step, cfg.max_entries, cfg.seed ^ tag);
  double worst = 0.0;
  std::string worst_leaf;
  std::size_t probed = 0;
  for (const auto& e : errors) {
    probed += e.probed;
    if (e.error >= worst) {
      worst = e.error;
      worst_leaf = e.leaf;
    }
  }
  const bool ok = std::isfinite(worst) && worst < cfg.tolerance;
  return {"gradient " + name, ok,
          "max rel err " + fmt("%.2e", worst) + " (" + worst_leaf + "), " + std::to_string(errors.size()) +
              " leaves, " + std::to_string(probed) + " entries"};
}

}  // namespace

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  if (analytic.size() != numeric.size()) throw Error(Errc::invalid_argument, "relative_error: size mismatch");
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-7});
}

std::vector<LeafGradientError> gradient_errors(RecordedOp& op, const Tensor2& upstream, double step,
                                               std::size_t max_entries, std::uint64_t seed) {
  const Gradients grads = op.backward(upstream);
  std::vector<LeafGradientError> out;
  for (const auto& [name, value] : op.leaves()) {
    const Tensor2& g = grads.at(name);
    std::vector<double> analytic, numeric;
    for (std::size_t i : probe_indices(value.size(), max_entries, seed, name)) {
      Tensor2 plus = value, minus = value;
      plus[i] += step;
      minus[i] -= step;
      const double fp = weighted_sum(upstream, op.evaluate({{name, plus}}));
      const double fm = weighted_sum(upstream, op.evaluate({{name, minus}}));
      analytic.push_back(g[i]);
      numeric.push_back((fp - fm) / (2.0 * step));
    }
    out.push_back({name, analytic.size(), relative_error(analytic, numeric)});
  }
  return out;
}

void validate_dims(const Dims& dims) {
  auto bad = [](const std::string& m) { throw Error(Errc::invalid_argument, "dims: " + m); };
  if (dims.d == 0 || dims.heads == 0 || dims.d_img == 0 || dims.m == 0 || dims.n == 0)
    bad("all dimensions must be positive");
  if (dims.d % dims.heads != 0) bad("d must be divisible by heads");
  if (dims.d % 2 != 0) bad("d must be even (positional encoding)");
}

Dims parse_dims(const std::string& spec) {
  std::vector<std::size_t> v;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t used = 0;
    unsigned long long x = 0;
    try {
      x = std::stoull(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (part.empty() || used != part.size() || part[0] == '-')
      throw Error(Errc::invalid_argument, "dims: expected d,heads,dimg,m,n, got '" + spec + "'");
    v.push_back(static_cast<std::size_t>(x));
  }
  if (v.size() != 5) throw Error(Errc::invalid_argument, "dims: expected d,heads,dimg,m,n, got '" + spec + "'");
  Dims d{v[0], v[1], v[2], v[3], v[4]};
  validate_dims(d);
  return d;
}

std::vector<CheckResult> run_fusion_checks(const CheckConfig& cfg) {
  const Dims& dims = cfg.dims;
  validate_dims(dims);
  const std::uint64_t seed = cfg.seed;
  std::vector<CheckResult> results;

  const FusionParams fp = FusionParams::random(dims, seed);
  const EncoderParams ep = EncoderParams::random(dims, seed);
  const Tensor2 x = draw(dims.m, dims.d, seed, 101);
  const Tensor2 image = draw(dims.n, dims.d_img, seed, 102);
  const Tensor2 h_img = draw(dims.n, dims.d, seed, 103);
  const Tensor2 h_attn = draw(dims.m, dims.d, seed, 104);

  {
    std::vector<Tensor2> all = attention_weights(x, h_img, fp.attention, fp.heads);
    const Tensor2 combined = [&] {
      Graph g;
      return g.value(g.concat_rows(g.constant(x), g.constant(h_img)));
    }();
    for (auto& w : attention_weights(combined, x, fp.attention, fp.heads)) all.push_back(std::move(w));
    results.push_back(softmax_check(all, "softmax rows"));
  }

  {
    bool convex = true, lambda_ok = true;
    double worst = 0.0;
    for (std::size_t t = 0; t < cfg.convexity_draws; ++t) {
      FusionParams p = fp;
      p.gate_text = draw(dims.d, dims.d, seed, 1000 + 4 * t);
      p.gate_image = draw(dims.d, dims.d, seed, 1001 + 4 * t);
      const Tensor2 ht = draw(dims.m, dims.d, seed, 1002 + 4 * t);
      const Tensor2 ha = draw(dims.m, dims.d, seed, 1003 + 4 * t);
      const GatedFusion out = gated_fusion(ht, ha, p);
      for (std::size_t i = 0; i < ht.size(); ++i) {
        const double lo = std::min(ht[i], ha[i]), hi = std::max(ht[i], ha[i]);
        worst = std::max({worst, lo - out.enc_out[i], out.enc_out[i] - hi});
        convex = convex && out.enc_out[i] >= lo && out.enc_out[i] <= hi;
        lambda_ok = lambda_ok && out.lambda[i] >= 0.0 && out.lambda[i] <= 1.0;
      }
    }
    const std::string draws = std::to_string(cfg.convexity_draws) + " draws";
    results.push_back({"gated convexity", convex, draws + ", max excursion " + fmt("%.2e", std::max(worst, 0.0))});
    results.push_back({"gate range", lambda_ok, draws + ", lambda in [0,1]"});
  }

  {
    Dims one = dims;
    one.heads = 1;
    const FusionParams p = FusionParams::random(one, seed + 1);
    const Tensor2 out = selective_attention(x, h_img, p);
    const Tensor2 values = matmul(h_img, p.attention.value);
    bool ok = true;
    for (std::size_t c = 0; c < dims.d; ++c) {
      double lo = values(0, c), hi = values(0, c);
      for (std::size_t r = 1; r < values.rows(); ++r) {
        lo = std::min(lo, values(r, c));
        hi = std::max(hi, values(r, c));
      }
      for (std::size_t r = 0; r < out.rows(); ++r) ok = ok && out(r, c) >= lo - 1e-12 && out(r, c) <= hi + 1e-12;
    }
    results.push_back({"attention hull", ok, "heads=1, outputs within value-row range"});
  }

  {
    Tensor2 reversed(h_img.rows(), h_img.cols());
    for (std::size_t r = 0; r < h_img.rows(); ++r)
      for (std::size_t c = 0; c < h_img.cols(); ++c) reversed(r, c) = h_img(h_img.rows() - 1 - r, c);
    const double diff = max_abs_diff(selective_attention(x, h_img, fp), selective_attention(x, reversed, fp));
    results.push_back({"image permutation", diff <= 1e-12, "max diff " + fmt("%.2e", diff)});
  }

  {
    EncoderParams p = ep;
    p.attention_norm.gamma = Tensor2(1, dims.d, 1.0);
    p.attention_norm.beta = Tensor2(1, dims.d, 1.0);
    p.fusion.gate_text = Tensor2(dims.d, dims.d, -100.0 / double(dims.d));
    p.fusion.gate_image = Tensor2(dims.d, dims.d, 0.0);
    const Tensor2 selective = encoder_block(x, p, image, EncoderMode::selective);
    const Tensor2 text = encoder_block(x, p, std::nullopt, EncoderMode::text_only);
    const double diff = max_abs_diff(selective, text);
    results.push_back({"lambda collapse", diff <= 1e-10, "max diff " + fmt("%.2e", diff)});
  }

  {
    const Tensor2 out =
        encoder_block(x, EncoderParams::zeros(dims), std::nullopt, EncoderMode::text_only, {false, true});
    const double diff = max_abs_diff(out, plain_layer_norm(x));
    results.push_back({"zero-weight encoder", diff <= 1e-12, "max diff from layer norm " + fmt("%.2e", diff)});
  }

  results.push_back(gradient_check("positional_input", record_positional_input(x), cfg, 201));
  results.push_back(gradient_check("selective_attention", record_selective_attention(x, h_img, fp), cfg, 202));
  results.push_back(gradient_check("gated_fusion", record_gated_fusion(x, h_attn, fp), cfg, 203));
  results.push_back(
      gradient_check("project_visual", record_project_visual(image, fp.visual_projection), cfg, 204));
  results.push_back(gradient_check("concat_fusion_attention",
                                   record_concat_fusion_attention(x, h_img, fp), cfg, 205));
  results.push_back(gradient_check("encoder text_only",
                                   record_encoder_block(x, ep, std::nullopt, EncoderMode::text_only, {true, false}),
                                   cfg, 206));
  results.push_back(gradient_check("encoder selective",
                                   record_encoder_block(x, ep, image, EncoderMode::selective, {true, false}), cfg,
                                   207));
  results.push_back(
      gradient_check("encoder concat", record_encoder_block(x, ep, image, EncoderMode::concat, {true, false}), cfg,
                     208));

  {
    RecordedOp op = record_encoder_block(x, ep, image, EncoderMode::selective);
    const Gradients grads = op.backward(Tensor2(op.output().rows(), op.output().cols()));
    bool zero = true;
    for (const auto& [name, g] : grads)
      for (double v : g.values()) zero = zero && v == 0.0;
    results.push_back({"zero upstream", zero, std::to_string(grads.size()) + " leaves exactly zero"});
  }
  return results;
}

std::string format_check_table(const std::vector<CheckResult>& results) {
  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::ostringstream out;
  auto row = [&](const std::string& a, const std::string& b, const std::string& c) {
    out << a << std::string(width - a.size() + 2, ' ') << b << std::string(8 - b.size(), ' ') << c << '\n';
  };
  row("check", "result", "detail");
  std::size_t failed = 0;
  for (const auto& r : results) {
    row(r.name, r.passed ? "pass" : "FAIL", r.detail);
    failed += r.passed ? 0 : 1;
  }
  out << results.size() - failed << "/" << results.size() << " checks passed\n";
  return out.str();
}

}  // namespace mmtlab::fusion
