#include "spbs/sequencing.hpp"

#include <algorithm>
#include <cctype>

namespace spbs {

namespace {

struct SegmentLayout {
  std::string text;
  std::optional<ByteSpan> synonym_region;  // relative to segment start
  std::optional<ByteSpan> gloss_region;
};

// Builds one language segment and the relative spans of its regions.
std::optional<SegmentLayout> build_segment_layout(const MonolingualEntry& entry,
                                                  const SegmentOptions& options) {
  const std::vector<std::string> empty_synonyms;
  const std::vector<std::string>& synonyms = options.drop_synonyms ? empty_synonyms : entry.synonyms;
  std::optional<std::string> gloss = options.drop_gloss ? std::nullopt : entry.gloss;
  // Without the gloss ablation, a language lacking a gloss is omitted as a
  // whole; the gloss-only form covers entries without synonyms.
  if (!options.drop_gloss && !gloss) return std::nullopt;
  if (synonyms.empty() && !gloss) return std::nullopt;

  SegmentLayout out;
  out.text = std::string(kLangSeparator) + " ";
  if (!synonyms.empty()) {
    ByteSpan span;
    span.begin = out.text.size();
    for (std::size_t i = 0; i < synonyms.size(); ++i) {
      if (i > 0) out.text += " | ";
      out.text += synonyms[i];
    }
    span.end = out.text.size();
    out.synonym_region = span;
    if (gloss) out.text += " : ";
  }
  if (gloss) {
    ByteSpan span;
    span.begin = out.text.size();
    out.text += *gloss;
    span.end = out.text.size();
    out.gloss_region = span;
  }
  out.text += std::string(" ") + kLangSeparator;
  return out;
}

}  // namespace

std::vector<std::string> MultilingualSequence::included_languages() const {
  std::vector<std::string> out;
  out.reserve(language_spans.size());
  for (const auto& spans : language_spans) out.push_back(spans.language);
  return out;
}

const LanguageSpans* MultilingualSequence::spans_for(const std::string& language) const {
  for (const auto& spans : language_spans)
    if (spans.language == language) return &spans;
  return nullptr;
}

std::optional<std::string> build_monolingual_segment(const MonolingualEntry& entry,
                                                     const SegmentOptions& options) {
  auto layout = build_segment_layout(entry, options);
  if (!layout) return std::nullopt;
  return layout->text;
}

MultilingualSequence build_multilingual_sequence(const Synset& synset,
                                                 const std::vector<std::string>& language_order,
                                                 const SegmentOptions& options) {
  if (language_order.empty()) throw ContractError("language_order must be nonempty");
  MultilingualSequence seq;
  for (const auto& lang : language_order) {
    auto it = synset.entries.find(lang);
    if (it == synset.entries.end()) continue;
    auto layout = build_segment_layout(it->second, options);
    if (!layout) continue;
    if (!seq.text.empty()) seq.text += " ";
    std::size_t base = seq.text.size();
    seq.text += layout->text;
    LanguageSpans spans;
    spans.language = lang;
    spans.segment = ByteSpan{base, seq.text.size()};
    if (layout->synonym_region)
      spans.synonym_region =
          ByteSpan{base + layout->synonym_region->begin, base + layout->synonym_region->end};
    if (layout->gloss_region)
      spans.gloss_region =
          ByteSpan{base + layout->gloss_region->begin, base + layout->gloss_region->end};
    seq.language_spans.push_back(std::move(spans));
  }
  if (seq.language_spans.empty())
    throw ValidationError("synset '" + synset.id + "' has no encodable language segment");
  return seq;
}

std::size_t utf8_advance(const std::string& s, std::size_t pos) {
  unsigned char c = static_cast<unsigned char>(s[pos]);
  std::size_t len = 1;
  if ((c & 0x80) == 0x00) len = 1;
  else if ((c & 0xE0) == 0xC0) len = 2;
  else if ((c & 0xF0) == 0xE0) len = 3;
  else if ((c & 0xF8) == 0xF0) len = 4;
  return std::min(pos + len, s.size());
}

namespace {

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c == '_' || c == '\'' || c >= 0x80;
}

struct Candidate {
  std::size_t begin = 0;
  std::size_t end = 0;
  const std::set<int>* sememes = nullptr;
};

// English candidates: whitespace/punctuation-delimited words found in the
// lexicon.
void collect_en_candidates(const std::string& text, const ByteSpan& gloss,
                           const WordSememeLexicon& lexicon, std::vector<Candidate>* out) {
  std::size_t i = gloss.begin;
  while (i < gloss.end) {
    while (i < gloss.end && !is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < gloss.end && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      std::string word = text.substr(start, i - start);
      if (const std::set<int>* sememes = lexicon.lookup(word, "en"))
        out->push_back({start, i, sememes});
    }
  }
}

// Chinese candidates: greedy longest match against the lexicon keys; the
// gloss has no whitespace word boundaries.
void collect_zh_candidates(const std::string& text, const ByteSpan& gloss,
                           const WordSememeLexicon& lexicon, std::vector<Candidate>* out) {
  std::vector<const std::string*> keys;
  for (const auto& [key, _] : lexicon.entries())
    if (key.second == "zh") keys.push_back(&key.first);
  std::sort(keys.begin(), keys.end(),
            [](const std::string* a, const std::string* b) { return a->size() > b->size(); });

  std::size_t i = gloss.begin;
  while (i < gloss.end) {
    const std::string* best = nullptr;
    for (const std::string* key : keys) {
      if (key->size() > gloss.end - i) continue;
      if (text.compare(i, key->size(), *key) == 0) {
        best = key;
        break;
      }
    }
    if (best != nullptr) {
      out->push_back({i, i + best->size(), lexicon.lookup(*best, "zh")});
      i += best->size();
    } else {
      i = utf8_advance(text, i);
    }
  }
}

}  // namespace

MaskedSequence apply_mcsp_mask(const MultilingualSequence& seq, const WordSememeLexicon& lexicon,
                               double rate, std::uint64_t rng_seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ContractError("mask rate must be in (0, 1]");

  std::vector<Candidate> candidates;
  for (const auto& spans : seq.language_spans) {
    if (!spans.gloss_region) continue;
    if (spans.language == "en")
      collect_en_candidates(seq.text, *spans.gloss_region, lexicon, &candidates);
    else if (spans.language == "zh")
      collect_zh_candidates(seq.text, *spans.gloss_region, lexicon, &candidates);
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.begin < b.begin; });

  Rng rng(rng_seed);
  std::vector<const Candidate*> selected;
  for (const auto& c : candidates)
    if (rng.bernoulli(rate)) selected.push_back(&c);

  MaskedSequence masked;
  std::size_t cursor = 0;
  for (const Candidate* c : selected) {
    masked.text.append(seq.text, cursor, c->begin - cursor);
    MaskTarget target;
    target.position = masked.text.size();
    target.sememes = *c->sememes;
    masked.targets.push_back(std::move(target));
    masked.text += kMaskToken;
    cursor = c->end;
  }
  masked.text.append(seq.text, cursor, seq.text.size() - cursor);
  return masked;
}

}  // namespace spbs
