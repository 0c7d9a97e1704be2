#pragma once

#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "varnn/rng.hpp"

namespace varnn {

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Checkpoint/data conventions disagree (unknown label, dimension clash...).
struct schema_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TaggedToken {
  std::string word;
  std::string label;
};

using TaggedSentence = std::vector<TaggedToken>;

struct RawCorpus {
  std::vector<TaggedSentence> sentences;

  std::size_t size() const { return sentences.size(); }
};

/// Token/label index pair lists, aligned per position.
struct Sequence {
  std::vector<int> tokens;
  std::vector<int> labels;
};

inline bool valid_iob_label(const std::string& l) {
  if (l == "O") return true;
  return l.size() > 2 && (l[0] == 'B' || l[0] == 'I') && l[1] == '-';
}

/// CoNLL-style text: one `word<spaces-or-tab>label` pair per line, blank line
/// between sentences. Trailing blank lines are ignored.
inline RawCorpus parse_conll(std::istream& in) {
  RawCorpus corpus;
  TaggedSentence current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string word, label, extra;
    if (!(fields >> word)) {  // blank line: sentence boundary
      if (!current.empty()) {
        corpus.sentences.push_back(std::move(current));
        current.clear();
      }
      continue;
    }
    if (!(fields >> label) || (fields >> extra))
      throw parse_error("line " + std::to_string(line_no) +
                        ": expected `word label`, got: " + line);
    if (!valid_iob_label(label))
      throw parse_error("line " + std::to_string(line_no) + ": label `" + label +
                        "` is not O, B-<type> or I-<type>");
    current.push_back({std::move(word), std::move(label)});
  }
  if (!current.empty()) corpus.sentences.push_back(std::move(current));
  if (corpus.sentences.empty()) throw parse_error("empty corpus");
  return corpus;
}

inline RawCorpus parse_conll_text(const std::string& text) {
  std::istringstream in(text);
  return parse_conll(in);
}

inline RawCorpus parse_conll_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);
  return parse_conll(in);
}

inline void write_conll(const RawCorpus& corpus, std::ostream& out) {
  for (const auto& sentence : corpus.sentences) {
    for (const auto& tok : sentence) out << tok.word << '\t' << tok.label << '\n';
    out << '\n';
  }
}

inline std::string ascii_lower(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

/// Case folding is off by default; slot corpora can carry meaningful casing.
inline void lowercase_corpus(RawCorpus& corpus) {
  for (auto& sentence : corpus.sentences)
    for (auto& tok : sentence) tok.word = ascii_lower(tok.word);
}

/// Word and label indexing built from a corpus. Index 0 is reserved for
/// <unk>; words below min_count encode to it. Iteration order is the order
/// of first occurrence, so two builds over the same corpus agree exactly.
class Vocabulary {
 public:
  static constexpr int unk_index = 0;

  static Vocabulary build(const RawCorpus& corpus, std::size_t min_count = 1) {
    if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
    Vocabulary v;
    v.words_.push_back("<unk>");
    v.word_to_index_["<unk>"] = 0;

    std::unordered_map<std::string, std::size_t> counts;
    std::vector<std::string> word_order;
    for (const auto& sentence : corpus.sentences) {
      for (const auto& tok : sentence) {
        if (counts[tok.word]++ == 0) word_order.push_back(tok.word);
        if (v.label_to_index_.find(tok.label) == v.label_to_index_.end()) {
          v.label_to_index_[tok.label] = static_cast<int>(v.labels_.size());
          v.labels_.push_back(tok.label);
        }
      }
    }
    for (const auto& w : word_order) {
      if (counts[w] < min_count) continue;
      v.word_to_index_[w] = static_cast<int>(v.words_.size());
      v.words_.push_back(w);
    }
    return v;
  }

  int word_index(const std::string& w) const {
    auto it = word_to_index_.find(w);
    return it == word_to_index_.end() ? unk_index : it->second;
  }

  /// Throws schema_error for labels this vocabulary has never seen.
  int label_index(const std::string& l) const {
    auto it = label_to_index_.find(l);
    if (it == label_to_index_.end()) throw schema_error("unknown label `" + l + "`");
    return it->second;
  }

  bool has_label(const std::string& l) const {
    return label_to_index_.find(l) != label_to_index_.end();
  }

  const std::string& word_name(std::size_t i) const { return words_.at(i); }
  const std::string& label_name(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t word_count() const { return words_.size(); }
  std::size_t label_count() const { return labels_.size(); }

  /// Rebuilds the lookup maps from the index-ordered name lists (checkpoint
  /// load path).
  static Vocabulary from_lists(std::vector<std::string> words, std::vector<std::string> labels) {
    Vocabulary v;
    v.words_ = std::move(words);
    v.labels_ = std::move(labels);
    for (std::size_t i = 0; i < v.words_.size(); ++i)
      v.word_to_index_[v.words_[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < v.labels_.size(); ++i)
      v.label_to_index_[v.labels_[i]] = static_cast<int>(i);
    return v;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> word_to_index_;
  std::unordered_map<std::string, int> label_to_index_;
};

inline Sequence encode_sentence(const TaggedSentence& sentence, const Vocabulary& vocab) {
  Sequence s;
  s.tokens.reserve(sentence.size());
  s.labels.reserve(sentence.size());
  for (const auto& tok : sentence) {
    s.tokens.push_back(vocab.word_index(tok.word));
    s.labels.push_back(vocab.label_index(tok.label));
  }
  return s;
}

inline std::vector<Sequence> encode_corpus(const RawCorpus& corpus, const Vocabulary& vocab) {
  std::vector<Sequence> out;
  out.reserve(corpus.size());
  for (const auto& sentence : corpus.sentences) out.push_back(encode_sentence(sentence, vocab));
  return out;
}

/// Seeded shuffle, then floor(n * fraction) sentences to train and the rest
/// to validation. Sentence-level, disjoint and exhaustive.
inline std::pair<RawCorpus, RawCorpus> split_train_val(const RawCorpus& corpus, double fraction,
                                                       std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split_train_val: fraction must be in (0,1)");
  if (corpus.size() < 2) throw std::invalid_argument("split_train_val: need >= 2 sentences");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);
  const std::size_t n_train =
      static_cast<std::size_t>(static_cast<double>(corpus.size()) * fraction);
  RawCorpus train, val;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? train : val).sentences.push_back(corpus.sentences[order[i]]);
  return {std::move(train), std::move(val)};
}

}  // namespace varnn
