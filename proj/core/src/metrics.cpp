#include "mmtlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "mmtlab/error.hpp"
#include "mmtlab/text.hpp"

namespace mmtlab::metrics {
namespace {

void check_corpus(std::span<const std::string> hyps, std::span<const std::string> refs) {
  if (hyps.size() != refs.size())
    throw Error(Errc::invalid_argument, "hypothesis/reference count mismatch: " +
                                            std::to_string(hyps.size()) + " vs " + std::to_string(refs.size()));
  if (hyps.empty()) throw Error(Errc::invalid_argument, "empty corpus");
}

// n-gram key: tokens joined by an ASCII unit separator.
std::unordered_map<std::string, std::uint64_t> word_ngrams(std::span<const std::string> tokens, std::size_t n) {
  std::unordered_map<std::string, std::uint64_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      key += '\x1f';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

std::unordered_map<std::u32string, std::uint64_t> char_ngrams(const std::u32string& chars, std::size_t n) {
  std::unordered_map<std::u32string, std::uint64_t> counts;
  if (chars.size() < n) return counts;
  for (std::size_t i = 0; i + n <= chars.size(); ++i) ++counts[chars.substr(i, n)];
  return counts;
}

std::u32string strip_spaces(std::string_view s) {
  std::u32string out;
  for (char32_t c : text::decode_utf8(s)) {
    if (!text::is_unicode_space(c)) out.push_back(c);
  }
  return out;
}

std::string prepare(std::string_view s, const MetricOptions& options) {
  return options.lowercase ? text::ascii_lower(s) : std::string(s);
}

}  // namespace

Tokenizer parse_tokenizer(std::string_view name) {
  if (name == "whitespace") return Tokenizer::whitespace;
  if (name == "intl") return Tokenizer::intl;
  throw Error(Errc::invalid_argument, "unknown tokenizer '" + std::string(name) + "'");
}

std::vector<std::string> tokenize(std::string_view s, const MetricOptions& options) {
  const std::string prepared = prepare(s, options);
  return options.tokenizer == Tokenizer::intl ? text::split_international(prepared)
                                              : text::split_whitespace(prepared);
}

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

BleuStats bleu_stats(std::span<const std::string> hyp, std::span<const std::string> ref) {
  BleuStats s;
  s.hyp_len = hyp.size();
  s.ref_len = ref.size();
  for (std::size_t n = 1; n <= kBleuOrder; ++n) {
    const auto h = word_ngrams(hyp, n);
    const auto r = word_ngrams(ref, n);
    for (const auto& [gram, count] : h) {
      s.totals[n - 1] += count;
      if (const auto it = r.find(gram); it != r.end()) s.matches[n - 1] += std::min(count, it->second);
    }
  }
  return s;
}

double bleu_from_stats(const BleuStats& stats, bool smoothing) {
  if (stats.hyp_len == 0) return stats.ref_len == 0 ? 100.0 : 0.0;
  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    if (stats.totals[n] == 0) continue;
    double m = static_cast<double>(stats.matches[n]);
    if (m == 0.0) {
      if (!smoothing) return 0.0;
      m = 0.1;
    }
    log_sum += std::log(m / static_cast<double>(stats.totals[n]));
    ++orders;
  }
  const double hyp = static_cast<double>(stats.hyp_len), ref = static_cast<double>(stats.ref_len);
  const double bp = hyp < ref ? std::exp(1.0 - ref / hyp) : 1.0;
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(orders));
}

double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
            const MetricOptions& options) {
  check_corpus(hypotheses, references);
  BleuStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i)
    total += bleu_stats(tokenize(hypotheses[i], options), tokenize(references[i], options));
  return bleu_from_stats(total, options.bleu_smoothing);
}

ChrfStats& ChrfStats::operator+=(const ChrfStats& o) {
  for (std::size_t n = 0; n < kChrfOrder; ++n) {
    matches[n] += o.matches[n];
    hyp_totals[n] += o.hyp_totals[n];
    ref_totals[n] += o.ref_totals[n];
  }
  return *this;
}

ChrfStats chrf_stats(std::string_view hyp, std::string_view ref) {
  const std::u32string h = strip_spaces(hyp), r = strip_spaces(ref);
  ChrfStats s;
  for (std::size_t n = 1; n <= kChrfOrder; ++n) {
    const auto hg = char_ngrams(h, n);
    const auto rg = char_ngrams(r, n);
    s.hyp_totals[n - 1] = h.size() >= n ? h.size() - n + 1 : 0;
    s.ref_totals[n - 1] = r.size() >= n ? r.size() - n + 1 : 0;
    for (const auto& [gram, count] : hg) {
      if (const auto it = rg.find(gram); it != rg.end()) s.matches[n - 1] += std::min(count, it->second);
    }
  }
  return s;
}

double chrf_from_stats(const ChrfStats& stats) {
  double precision = 0.0, recall = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < kChrfOrder; ++n) {
    if (stats.hyp_totals[n] == 0 && stats.ref_totals[n] == 0) continue;
    const double m = static_cast<double>(stats.matches[n]);
    if (stats.hyp_totals[n] > 0) precision += m / static_cast<double>(stats.hyp_totals[n]);
    if (stats.ref_totals[n] > 0) recall += m / static_cast<double>(stats.ref_totals[n]);
    ++orders;
  }
  if (orders == 0) return 100.0;
  precision /= static_cast<double>(orders);
  recall /= static_cast<double>(orders);
  const double b2 = kChrfBeta * kChrfBeta;
  const double denom = b2 * precision + recall;
  if (denom == 0.0) return 0.0;
  return 100.0 * (1.0 + b2) * precision * recall / denom;
}

double chrf2(std::span<const std::string> hypotheses, std::span<const std::string> references,
             const MetricOptions& options) {
  check_corpus(hypotheses, references);
  ChrfStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i)
    total += chrf_stats(prepare(hypotheses[i], options), prepare(references[i], options));
  return chrf_from_stats(total);
}

double ter(std::span<const std::string> hypotheses, std::span<const std::string> references,
           const MetricOptions& options) {
  check_corpus(hypotheses, references);
  std::uint64_t edits = 0, ref_words = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto r = ter_segment(tokenize(hypotheses[i], options), tokenize(references[i], options),
                               options.ter_beam);
    edits += r.total();
    ref_words += r.ref_len;
  }
  if (ref_words == 0) return edits == 0 ? 0.0 : 100.0;
  return 100.0 * static_cast<double>(edits) / static_cast<double>(ref_words);
}

MetricReport evaluate(std::span<const std::string> hypotheses, std::span<const std::string> references,
                      const MetricOptions& options, bool per_segment) {
  check_corpus(hypotheses, references);
  MetricReport report;
  report.segment_count = hypotheses.size();
  report.bleu_smoothed = options.bleu_smoothing;
  if (per_segment) report.per_segment.emplace();

  BleuStats bleu_total;
  ChrfStats chrf_total;
  std::uint64_t ter_edits = 0, ter_ref_words = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto hyp_tokens = tokenize(hypotheses[i], options);
    const auto ref_tokens = tokenize(references[i], options);
    const auto b = bleu_stats(hyp_tokens, ref_tokens);
    const auto c = chrf_stats(prepare(hypotheses[i], options), prepare(references[i], options));
    const auto t = ter_segment(hyp_tokens, ref_tokens, options.ter_beam);
    bleu_total += b;
    chrf_total += c;
    ter_edits += t.total();
    ter_ref_words += t.ref_len;
    if (per_segment) {
      const double seg_ter = t.ref_len == 0 ? (t.total() == 0 ? 0.0 : 100.0)
                                            : 100.0 * double(t.total()) / double(t.ref_len);
      report.per_segment->push_back({bleu_from_stats(b, options.bleu_smoothing), chrf_from_stats(c), seg_ter});
    }
  }
  report.bleu = bleu_from_stats(bleu_total, options.bleu_smoothing);
  report.chrf2 = chrf_from_stats(chrf_total);
  report.ter = ter_ref_words == 0 ? (ter_edits == 0 ? 0.0 : 100.0)
                                  : 100.0 * double(ter_edits) / double(ter_ref_words);
  return report;
}

std::string format_report_line(const MetricReport& report) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.2f\t%.2f\t%.2f\t%zu", report.bleu, report.chrf2, report.ter,
                report.segment_count);
  return buf;
}

}  // namespace mmtlab::metrics
