#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spbs/dataset.hpp"

namespace spbs {

inline constexpr const char* kLangSeparator = "[/s]";
inline constexpr const char* kMaskToken = "[MASK]";

// Ablation switches for sequence construction. Dropping synonyms removes the
// synonym list and the vertical-bar/colon separators; dropping glosses removes
// the gloss and the colon. Both together yield the empty segment.
struct SegmentOptions {
  bool drop_synonyms = false;
  bool drop_gloss = false;
};

struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool empty() const { return begin == end; }
  std::size_t size() const { return end - begin; }
};

struct LanguageSpans {
  std::string language;
  ByteSpan segment;  // the whole "[/s] ... [/s]" segment
  std::optional<ByteSpan> synonym_region;
  std::optional<ByteSpan> gloss_region;
};

// The separator-delimited text fed to the encoder, with per-language byte
// spans into the canonical UTF-8 string.
struct MultilingualSequence {
  std::string text;
  std::vector<LanguageSpans> language_spans;  // in inclusion order

  std::vector<std::string> included_languages() const;
  const LanguageSpans* spans_for(const std::string& language) const;
};

struct MaskTarget {
  std::size_t position = 0;  // byte offset of the mask token in the masked text
  std::set<int> sememes;
};

struct MaskedSequence {
  std::string text;
  std::vector<MaskTarget> targets;
};

// "[/s] syn1 | syn2 : gloss [/s]". Returns nullopt when the language must be
// omitted (no gloss in normal mode, or nothing left under ablation).
std::optional<std::string> build_monolingual_segment(const MonolingualEntry& entry,
                                                     const SegmentOptions& options = {});

// Concatenates eligible language segments in the given order, one space
// between segments, and records the synonym/gloss byte spans.
MultilingualSequence build_multilingual_sequence(const Synset& synset,
                                                 const std::vector<std::string>& language_order,
                                                 const SegmentOptions& options = {});

// Replaces lexicon words inside en/zh gloss regions with the mask token, each
// independently with probability `rate`. English words are found by
// whitespace/punctuation tokenization, Chinese words by longest lexicon match.
MaskedSequence apply_mcsp_mask(const MultilingualSequence& seq, const WordSememeLexicon& lexicon,
                               double rate, std::uint64_t rng_seed);

std::size_t utf8_advance(const std::string& s, std::size_t pos);

}  // namespace spbs
