#include "synthetic.hpp"

#include <array>
#include <random>

namespace oracle {

namespace {

constexpr std::array kNouns = {"man",   "woman", "dog",    "cat",   "bike",  "street", "tree",   "building",
                               "shirt", "table", "window", "sky",   "grass", "car",    "bottle", "wall",
                               "sign",  "horse", "train",  "plate", "ball",  "sheep",  "door",   "boat"};
constexpr std::array kAdjectives = {"red",  "green", "tall",  "small", "white", "black",
                                    "blue", "wooden", "large", "yellow", "old",  "green"};
constexpr std::array kVerbs = {"riding", "holding", "standing", "sitting", "looking", "wearing", "walking", "feeding"};
constexpr std::array kPrepositions = {"on", "in", "near", "under", "behind", "with", "of", "at"};
constexpr std::array kArticles = {"a", "the", "the", "an", "A", "The"};

template <class Array, class Rng>
const char* pick(const Array& a, Rng& rng) {
  return a[std::uniform_int_distribution<std::size_t>(0, a.size() - 1)(rng)];
}

template <class Rng>
std::string phrase(Rng& rng) {
  std::string out;
  if (rng() % 4 != 0) out += std::string(pick(kArticles, rng)) + ' ';
  if (rng() % 2 == 0) out += std::string(pick(kAdjectives, rng)) + ' ';
  out += pick(kNouns, rng);
  return out;
}

}  // namespace

std::vector<std::string> synthetic_sentences(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string s = phrase(rng);
    switch (rng() % 3) {
      case 0:
        s += std::string(" ") + pick(kVerbs, rng) + ' ' + phrase(rng);
        break;
      case 1:
        s += std::string(" ") + pick(kPrepositions, rng) + ' ' + phrase(rng);
        break;
      default:
        s += std::string(" ") + pick(kVerbs, rng) + ' ' + phrase(rng) + ' ' + pick(kPrepositions, rng) + ' ' +
             phrase(rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> random_sentences(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t words = 1 + rng() % 12;
    std::string s;
    for (std::size_t w = 0; w < words; ++w) {
      if (w) s += rng() % 5 == 0 ? "  " : " ";
      if (rng() % 6 == 0) {
        s += pick(kArticles, rng);
        continue;
      }
      const std::size_t len = 1 + rng() % 8;
      for (std::size_t c = 0; c < len; ++c) {
        // vowel-heavy alphabet so vowel and duplicate edits are frequent
        static constexpr char kLetters[] = "aeiouaeioubcdfgllmnopprssttee";
        s += kLetters[rng() % (sizeof(kLetters) - 1)];
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace oracle
