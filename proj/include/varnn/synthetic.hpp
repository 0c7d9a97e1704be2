#pragma once

#include <string>
#include <vector>

#include "varnn/corpus.hpp"
#include "varnn/rng.hpp"

namespace varnn {

// Deterministic grammar producing travel-request sentences with dept, arr,
// date and airline slots over a ~60 word vocabulary and 9 IOB labels. A few
// templates open with a bare city whose role is only resolved by the token
// after it, so context from the right genuinely helps.
namespace synth {

struct SlotValue {
  std::vector<std::string> words;
};

inline const std::vector<SlotValue>& cities() {
  static const std::vector<SlotValue> v = {
      {{"boston"}},       {{"denver"}},        {{"atlanta"}},
      {{"dallas"}},       {{"seattle"}},       {{"pittsburgh"}},
      {{"philadelphia"}}, {{"baltimore"}},     {{"orlando"}},
      {{"new", "york"}},  {{"san", "francisco"}}, {{"los", "angeles"}},
  };
  return v;
}

inline const std::vector<SlotValue>& dates() {
  static const std::vector<SlotValue> v = {
      {{"monday"}},   {{"tuesday"}},  {{"wednesday"}},      {{"thursday"}},
      {{"friday"}},   {{"saturday"}}, {{"sunday"}},         {{"tomorrow"}},
      {{"today"}},    {{"next", "monday"}}, {{"next", "friday"}},
  };
  return v;
}

inline const std::vector<SlotValue>& airlines() {
  static const std::vector<SlotValue> v = {
      {{"delta"}}, {{"united"}}, {{"lufthansa"}}, {{"american", "airlines"}},
      {{"air", "canada"}},
  };
  return v;
}

// Template tokens: plain filler words, or slot placeholders.
enum class Tok { word, dept, arr, date, airline };

struct Piece {
  Tok kind;
  const char* text = nullptr;
};

inline const std::vector<std::vector<Piece>>& templates() {
  using P = Piece;
  static const std::vector<std::vector<P>> v = {
      {{Tok::word, "i"}, {Tok::word, "want"}, {Tok::word, "to"}, {Tok::word, "fly"},
       {Tok::word, "from"}, {Tok::dept}, {Tok::word, "to"}, {Tok::arr},
       {Tok::word, "on"}, {Tok::date}},
      {{Tok::word, "show"}, {Tok::word, "me"}, {Tok::word, "flights"}, {Tok::word, "from"},
       {Tok::dept}, {Tok::word, "to"}, {Tok::arr}},
      {{Tok::word, "book"}, {Tok::word, "a"}, {Tok::word, "flight"}, {Tok::word, "from"},
       {Tok::dept}, {Tok::word, "to"}, {Tok::arr}, {Tok::word, "on"}, {Tok::date},
       {Tok::word, "with"}, {Tok::airline}},
      {{Tok::word, "what"}, {Tok::word, "are"}, {Tok::word, "the"}, {Tok::word, "cheapest"},
       {Tok::word, "flights"}, {Tok::word, "from"}, {Tok::dept}, {Tok::word, "to"},
       {Tok::arr}},
      // openers whose first city is only disambiguated by the word after it;
      // departure openers outnumber arrival openers 2:1, so a left-to-right
      // model converges to one majority policy while a bi-directional one can
      // resolve every opener
      {{Tok::dept}, {Tok::word, "to"}, {Tok::arr}, {Tok::word, "on"}, {Tok::date},
       {Tok::word, "please"}},
      {{Tok::dept}, {Tok::word, "to"}, {Tok::arr}, {Tok::word, "with"}, {Tok::airline}},
      {{Tok::arr}, {Tok::word, "from"}, {Tok::dept}, {Tok::word, "on"}, {Tok::date},
       {Tok::word, "please"}},
      {{Tok::word, "flights"}, {Tok::word, "to"}, {Tok::arr}, {Tok::word, "from"},
       {Tok::dept}, {Tok::word, "with"}, {Tok::airline}},
      {{Tok::word, "list"}, {Tok::word, "all"}, {Tok::word, "flights"}, {Tok::word, "on"},
       {Tok::date}, {Tok::word, "with"}, {Tok::airline}},
      {{Tok::word, "i"}, {Tok::word, "need"}, {Tok::word, "a"}, {Tok::word, "flight"},
       {Tok::word, "leaving"}, {Tok::dept}, {Tok::word, "for"}, {Tok::arr},
       {Tok::word, "on"}, {Tok::date}},
  };
  return v;
}

inline void append_slot(TaggedSentence& s, const SlotValue& value, const std::string& type) {
  for (std::size_t i = 0; i < value.words.size(); ++i)
    s.push_back({value.words[i], (i == 0 ? "B-" : "I-") + type});
}

}  // namespace synth

/// One deterministic travel-request sentence per draw sequence.
inline TaggedSentence synthetic_sentence(Rng& rng) {
  const auto& tpl = synth::templates()[rng.next_index(synth::templates().size())];
  TaggedSentence s;
  for (const auto& piece : tpl) {
    switch (piece.kind) {
      case synth::Tok::word:
        s.push_back({piece.text, "O"});
        break;
      case synth::Tok::dept:
        synth::append_slot(s, synth::cities()[rng.next_index(synth::cities().size())], "dept");
        break;
      case synth::Tok::arr:
        synth::append_slot(s, synth::cities()[rng.next_index(synth::cities().size())], "arr");
        break;
      case synth::Tok::date:
        synth::append_slot(s, synth::dates()[rng.next_index(synth::dates().size())], "date");
        break;
      case synth::Tok::airline:
        synth::append_slot(s, synth::airlines()[rng.next_index(synth::airlines().size())],
                           "airline");
        break;
    }
  }
  return s;
}

inline RawCorpus synthetic_corpus(std::size_t n_sentences, Rng& rng) {
  RawCorpus corpus;
  corpus.sentences.reserve(n_sentences);
  for (std::size_t i = 0; i < n_sentences; ++i)
    corpus.sentences.push_back(synthetic_sentence(rng));
  return corpus;
}

inline RawCorpus synthetic_corpus(std::size_t n_sentences, std::uint64_t seed) {
  Rng rng(seed);
  return synthetic_corpus(n_sentences, rng);
}

}  // namespace varnn
