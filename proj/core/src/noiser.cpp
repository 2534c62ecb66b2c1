#include "mmtlab/noiser.hpp"

#include <algorithm>
#include <thread>

#include <json.hpp>

#include "mmtlab/error.hpp"
#include "mmtlab/text.hpp"

namespace mmtlab::noise {
namespace {

using nlohmann::json;

struct WordState {
  std::string text;
  bool removed = false;
};

std::string assemble(const std::vector<text::Token>& tokens, const std::vector<WordState>& words,
                     std::string_view trailing) {
  std::string out;
  bool first = true;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i].removed || words[i].text.empty()) continue;
    out += first ? tokens.front().leading : tokens[i].leading;
    out += words[i].text;
    first = false;
  }
  if (first) return {};
  out += trailing;
  return out;
}

}  // namespace

void validate(const NoiseConfig& config) {
  for (double p : {config.p_article, config.p_vowel, config.p_dupe}) {
    if (!(p >= 0.0 && p <= 1.0))
      throw Error(Errc::invalid_argument, "noise probability " + std::to_string(p) + " outside [0, 1]");
  }
}

const char* to_string(EditKind kind) noexcept {
  switch (kind) {
    case EditKind::drop_article: return "drop_article";
    case EditKind::drop_vowel: return "drop_vowel";
    case EditKind::drop_dupe: return "drop_dupe";
  }
  return "drop_article";
}

EditKind parse_edit_kind(std::string_view name) {
  if (name == "drop_article") return EditKind::drop_article;
  if (name == "drop_vowel") return EditKind::drop_vowel;
  if (name == "drop_dupe") return EditKind::drop_dupe;
  throw Error(Errc::data, "unknown edit kind '" + std::string(name) + "'");
}

bool is_article(std::string_view word) noexcept {
  if (word.size() > 3) return false;
  const std::string lower = text::ascii_lower(word);
  return lower == "a" || lower == "an" || lower == "the";
}

bool is_vowel(char c) noexcept {
  switch (c) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
    case 'A': case 'E': case 'I': case 'O': case 'U':
      return true;
    default:
      return false;
  }
}

CorruptionTrace corrupt_sentence(std::string_view sentence, const NoiseConfig& config,
                                 const NoiseStream& stream) {
  validate(config);
  std::string_view trailing;
  const auto tokens = text::tokenize_preserving(sentence, &trailing);

  CorruptionTrace trace;
  trace.original = std::string(sentence);
  if (tokens.empty()) {
    trace.corrupted = trace.original;
    return trace;
  }

  std::vector<WordState> words;
  words.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    WordState w{std::string(tokens[i].word), false};
    const bool article = is_article(w.text);

    if (article && stream.draw(i, EditKind::drop_article, 0) < config.p_article) {
      w.removed = true;
      trace.edits.push_back({i, EditKind::drop_article, std::nullopt});
      words.push_back(std::move(w));
      continue;
    }

    if (!article || config.vowel_secondary_pass) {
      std::string kept;
      kept.reserve(w.text.size());
      for (std::size_t c = 0; c < w.text.size(); ++c) {
        if (is_vowel(w.text[c]) && stream.draw(i, EditKind::drop_vowel, c) < config.p_vowel) {
          trace.edits.push_back({i, EditKind::drop_vowel, kept.size()});
          continue;
        }
        kept.push_back(w.text[c]);
      }
      w.text = std::move(kept);

      // Single left-to-right pass; after a drop the scan resumes past the
      // dropped position, so overlapping pairs are not re-examined.
      for (std::size_t j = 1; j < w.text.size(); ++j) {
        const auto ch = static_cast<unsigned char>(w.text[j]);
        if (ch < 0x80 && w.text[j] == w.text[j - 1] &&
            stream.draw(i, EditKind::drop_dupe, j) < config.p_dupe) {
          w.text.erase(j, 1);
          trace.edits.push_back({i, EditKind::drop_dupe, j});
        }
      }
    }
    words.push_back(std::move(w));
  }
  trace.corrupted = assemble(tokens, words, trailing);
  return trace;
}

CorruptionTrace corrupt_sentence(std::string_view sentence, const NoiseConfig& config) {
  return corrupt_sentence(sentence, config, NoiseStream(config.seed, 0));
}

std::string replay(std::string_view original, const std::vector<Edit>& edits) {
  std::string_view trailing;
  const auto tokens = text::tokenize_preserving(original, &trailing);
  if (tokens.empty()) {
    if (!edits.empty()) throw Error(Errc::data, "edits refer to words of an empty sentence");
    return std::string(original);
  }
  std::vector<WordState> words;
  for (const auto& t : tokens) words.push_back({std::string(t.word), false});
  for (const Edit& e : edits) {
    if (e.word_index >= words.size())
      throw Error(Errc::data, "edit refers to word " + std::to_string(e.word_index) + " of " +
                                  std::to_string(words.size()));
    WordState& w = words[e.word_index];
    if (w.removed) throw Error(Errc::data, "edit targets an already removed word");
    if (e.kind == EditKind::drop_article) {
      w.removed = true;
      continue;
    }
    if (!e.char_index || *e.char_index >= w.text.size())
      throw Error(Errc::data, "character edit out of range in word " + std::to_string(e.word_index));
    w.text.erase(*e.char_index, 1);
  }
  return assemble(tokens, words, trailing);
}

CorruptedCorpus corrupt_corpus(const corpus::CorpusSplit& split, const NoiseConfig& config,
                               unsigned threads) {
  validate(config);
  CorruptedCorpus result{split, std::vector<CorruptionTrace>(split.size())};
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& record = split.records[i];
      result.traces[i] = corrupt_sentence(record.source, config, NoiseStream(config.seed, record.id));
      result.split.records[i].source = result.traces[i].corrupted;
    }
  };
  const std::size_t n = split.size();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    work(0, n);
    return result;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk, end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back(work, begin, end);
  }
  return result;
}

std::string trace_to_json(const CorruptionTrace& trace) {
  json edits = json::array();
  for (const Edit& e : trace.edits) {
    json j = {{"word", e.word_index}, {"kind", to_string(e.kind)}};
    j["char"] = e.char_index ? json(*e.char_index) : json(nullptr);
    edits.push_back(std::move(j));
  }
  return json{{"original", trace.original}, {"corrupted", trace.corrupted}, {"edits", edits}}.dump();
}

CorruptionTrace trace_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    CorruptionTrace trace;
    trace.original = j.at("original").get<std::string>();
    trace.corrupted = j.at("corrupted").get<std::string>();
    for (const json& e : j.at("edits")) {
      Edit edit;
      edit.word_index = e.at("word").get<std::size_t>();
      edit.kind = parse_edit_kind(e.at("kind").get<std::string>());
      if (e.contains("char") && !e["char"].is_null()) edit.char_index = e["char"].get<std::size_t>();
      trace.edits.push_back(edit);
    }
    return trace;
  } catch (const json::exception& e) {
    throw Error(Errc::data, std::string("malformed trace line: ") + e.what());
  }
}

}  // namespace mmtlab::noise
