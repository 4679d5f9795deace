#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "spbs/fixture.hpp"
#include "spbs/sequencing.hpp"

using namespace spbs;

namespace {

Synset example_synset() {
  Synset s;
  s.id = "bn:example";
  s.entries["en"] = {"en", {"husband", "hubby"}, std::string("A woman's partner in marriage")};
  s.entries["fr"] = {"fr", {"mari", "époux", "marié"},
                     std::string("Partenaire masculin dans un mariage")};
  return s;
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

TEST_CASE("monolingual segment grammar is byte-exact") {
  MonolingualEntry en{"en", {"husband", "hubby"}, std::string("A woman's partner in marriage")};
  CHECK(*build_monolingual_segment(en) ==
        "[/s] husband | hubby : A woman's partner in marriage [/s]");

  MonolingualEntry single{"en", {"x"}, std::string("g")};
  CHECK(*build_monolingual_segment(single) == "[/s] x : g [/s]");

  MonolingualEntry three{"en", {"a", "b", "c"}, std::string("g")};
  CHECK(*build_monolingual_segment(three) == "[/s] a | b | c : g [/s]");
}

TEST_CASE("gloss-only and missing-gloss entries") {
  MonolingualEntry no_synonyms{"en", {}, std::string("just a gloss")};
  CHECK(*build_monolingual_segment(no_synonyms) == "[/s] just a gloss [/s]");

  MonolingualEntry no_gloss{"en", {"word"}, std::nullopt};
  CHECK(!build_monolingual_segment(no_gloss).has_value());
}

TEST_CASE("multilingual sequence matches the two-language reference string") {
  MultilingualSequence seq = build_multilingual_sequence(example_synset(), {"en", "fr"});
  CHECK(seq.text ==
        "[/s] husband | hubby : A woman's partner in marriage [/s] "
        "[/s] mari | époux | marié : Partenaire masculin dans un mariage [/s]");
  CHECK(seq.included_languages() == std::vector<std::string>{"en", "fr"});
  REQUIRE(seq.spans_for("fr") != nullptr);
  const LanguageSpans& fr = *seq.spans_for("fr");
  CHECK(seq.text.substr(fr.gloss_region->begin, fr.gloss_region->size()) ==
        "Partenaire masculin dans un mariage");
  CHECK(seq.text.substr(fr.synonym_region->begin, fr.synonym_region->size()) ==
        "mari | époux | marié");
}

TEST_CASE("language order permutes segments and spans stay consistent") {
  Synset s = example_synset();
  MultilingualSequence ab = build_multilingual_sequence(s, {"en", "fr"});
  MultilingualSequence ba = build_multilingual_sequence(s, {"fr", "en"});
  CHECK(ab.text != ba.text);
  for (const auto* seq : {&ab, &ba}) {
    for (const auto& spans : seq->language_spans) {
      const std::string segment =
          seq->text.substr(spans.segment.begin, spans.segment.end - spans.segment.begin);
      // Recompute the gloss span by direct string search inside the segment.
      const std::string& gloss = *s.entries.at(spans.language).gloss;
      std::size_t found = seq->text.find(gloss);
      CHECK(found == spans.gloss_region->begin);
      CHECK(segment.rfind("[/s] ", 0) == 0);
      CHECK(segment.substr(segment.size() - 5) == " [/s]");
    }
  }
}

TEST_CASE("single-language synset yields that segment alone") {
  Synset s = example_synset();
  s.entries.erase("fr");
  MultilingualSequence seq = build_multilingual_sequence(s, {"en", "fr", "zh"});
  CHECK(seq.text == "[/s] husband | hubby : A woman's partner in marriage [/s]");
}

TEST_CASE("a synset with no eligible language is unencodable") {
  Synset s;
  s.id = "empty";
  s.entries["en"] = {"en", {"word"}, std::nullopt};  // gloss missing
  CHECK_THROWS_AS(build_multilingual_sequence(s, {"en"}), ValidationError);
  CHECK_THROWS_AS(build_multilingual_sequence(s, {}), ContractError);
}

TEST_CASE("ablation flags reshape segments and compose to omission") {
  MonolingualEntry en{"en", {"a", "b"}, std::string("the gloss")};
  SegmentOptions no_syn;
  no_syn.drop_synonyms = true;
  CHECK(*build_monolingual_segment(en, no_syn) == "[/s] the gloss [/s]");

  SegmentOptions no_gloss;
  no_gloss.drop_gloss = true;
  CHECK(*build_monolingual_segment(en, no_gloss) == "[/s] a | b [/s]");

  SegmentOptions both;
  both.drop_synonyms = true;
  both.drop_gloss = true;
  CHECK(!build_monolingual_segment(en, both).has_value());
}

TEST_CASE("separator-count grammar invariant holds over fixture synsets") {
  FixtureParams params;
  params.synsets = 40;
  params.sememes = 8;
  params.seed = 11;
  FixtureOutput fixture = generate_fixture(params);
  for (const auto& synset : fixture.corpus.synsets) {
    MultilingualSequence seq = build_multilingual_sequence(synset, {"en", "fr", "zh"});
    CHECK(count_occurrences(seq.text, "[/s]") == 2 * seq.language_spans.size());

    SegmentOptions no_syn;
    no_syn.drop_synonyms = true;
    MultilingualSequence gloss_only = build_multilingual_sequence(synset, {"en", "fr", "zh"}, no_syn);
    CHECK(gloss_only.text.find(" | ") == std::string::npos);
    CHECK(gloss_only.text.find(" : ") == std::string::npos);

    SegmentOptions no_gloss;
    no_gloss.drop_gloss = true;
    MultilingualSequence syn_only = build_multilingual_sequence(synset, {"en", "fr", "zh"}, no_gloss);
    CHECK(syn_only.text.find(" : ") == std::string::npos);
  }
}

TEST_CASE("forced masking replaces exactly the lexicon word") {
  Synset s;
  s.id = "m";
  s.entries["en"] = {"en", {"alpha"}, std::string("the target word here")};
  MultilingualSequence seq = build_multilingual_sequence(s, {"en"});

  WordSememeLexicon lexicon;
  lexicon.add("target", "en", {3});
  MaskedSequence masked = apply_mcsp_mask(seq, lexicon, 1.0, 0);
  CHECK(masked.text == "[/s] alpha : the [MASK] word here [/s]");
  REQUIRE(masked.targets.size() == 1);
  CHECK(masked.targets[0].sememes == std::set<int>{3});
  CHECK(masked.text.substr(masked.targets[0].position, 6) == "[MASK]");
}

TEST_CASE("masking is deterministic for a fixed seed") {
  Synset s;
  s.id = "m";
  s.entries["en"] = {"en", {"w"}, std::string("one two three four five six seven eight nine ten")};
  MultilingualSequence seq = build_multilingual_sequence(s, {"en"});
  WordSememeLexicon lexicon;
  for (const char* w : {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"})
    lexicon.add(w, "en", {1});
  MaskedSequence a = apply_mcsp_mask(seq, lexicon, 0.4, 123);
  MaskedSequence b = apply_mcsp_mask(seq, lexicon, 0.4, 123);
  CHECK(a.text == b.text);
  REQUIRE(a.targets.size() == b.targets.size());
  for (std::size_t i = 0; i < a.targets.size(); ++i)
    CHECK(a.targets[i].position == b.targets[i].position);
}

TEST_CASE("empirical mask rate over 1000 seeds") {
  Synset s;
  s.id = "m";
  s.entries["en"] = {"en", {"w"}, std::string("one two three four five six seven eight nine ten")};
  MultilingualSequence seq = build_multilingual_sequence(s, {"en"});
  WordSememeLexicon lexicon;
  for (const char* w : {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"})
    lexicon.add(w, "en", {1});
  long masked_total = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed)
    masked_total += static_cast<long>(apply_mcsp_mask(seq, lexicon, 0.15, seed).targets.size());
  double rate = static_cast<double>(masked_total) / (1000.0 * 10.0);
  CHECK(rate > 0.12);
  CHECK(rate < 0.18);
}

TEST_CASE("masking never touches synonyms, separators, or non-en/zh glosses") {
  Synset s;
  s.id = "m";
  s.entries["en"] = {"en", {"target"}, std::string("plain filler words")};
  s.entries["fr"] = {"fr", {"cible"}, std::string("target encore target")};
  MultilingualSequence seq = build_multilingual_sequence(s, {"en", "fr"});
  WordSememeLexicon lexicon;
  lexicon.add("target", "en", {0});
  MaskedSequence masked = apply_mcsp_mask(seq, lexicon, 1.0, 7);
  // "target" appears as an en synonym and inside the fr gloss; neither is a
  // candidate, so nothing gets masked.
  CHECK(masked.targets.empty());
  CHECK(masked.text == seq.text);
}

TEST_CASE("chinese masking uses longest lexicon match over the gloss") {
  Synset s;
  s.id = "zh";
  s.entries["zh"] = {"zh", {"同义"}, std::string("一二三四五")};
  MultilingualSequence seq = build_multilingual_sequence(s, {"zh"});
  WordSememeLexicon lexicon;
  lexicon.add("二三", "zh", {4});
  lexicon.add("二", "zh", {9});
  MaskedSequence masked = apply_mcsp_mask(seq, lexicon, 1.0, 0);
  REQUIRE(masked.targets.size() == 1);
  CHECK(masked.targets[0].sememes == std::set<int>{4});  // longest match wins
  CHECK(masked.text == "[/s] 同义 : 一[MASK]四五 [/s]");
}

TEST_CASE("mask rate outside (0,1] is a contract error") {
  Synset s;
  s.id = "m";
  s.entries["en"] = {"en", {"w"}, std::string("g")};
  MultilingualSequence seq = build_multilingual_sequence(s, {"en"});
  WordSememeLexicon lexicon;
  lexicon.add("g", "en", {0});
  CHECK_THROWS_AS(apply_mcsp_mask(seq, lexicon, 0.0, 0), ContractError);
  CHECK_THROWS_AS(apply_mcsp_mask(seq, lexicon, 1.5, 0), ContractError);
}
