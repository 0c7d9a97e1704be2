#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "varnn/corpus.hpp"

namespace varnn {

/// Maximal typed span, token indices inclusive and 0-based.
struct Chunk {
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Chunk& a, const Chunk& b) {
    return a.type == b.type && a.start == b.start && a.end == b.end;
  }
  friend bool operator<(const Chunk& a, const Chunk& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.type < b.type;
  }
};

/// IOB chunk extraction, lenient: B-X starts a chunk, I-X of the same type
/// extends the open one, an orphan I-X just starts a new chunk, O closes.
/// Never rejects model output as long as labels are well-formed.
inline std::vector<Chunk> extract_chunks(const std::vector<std::string>& labels) {
  std::vector<Chunk> chunks;
  bool open = false;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const std::string& l = labels[t];
    if (!valid_iob_label(l))
      throw parse_error("extract_chunks: malformed label `" + l + "` at position " +
                        std::to_string(t));
    if (l == "O") {
      open = false;
      continue;
    }
    const std::string type = l.substr(2);
    if (l[0] == 'I' && open && chunks.back().type == type) {
      chunks.back().end = t;
    } else {
      chunks.push_back({type, t, t});
      open = true;
    }
  }
  return chunks;
}

/// Inverse of extract_chunks for well-separated chunks.
inline std::vector<std::string> render_iob(const std::vector<Chunk>& chunks, std::size_t len) {
  std::vector<std::string> labels(len, "O");
  for (const auto& c : chunks) {
    labels[c.start] = "B-" + c.type;
    for (std::size_t t = c.start + 1; t <= c.end; ++t) labels[t] = "I-" + c.type;
  }
  return labels;
}

struct EvalReport {
  std::size_t true_positives = 0;
  std::size_t predicted_count = 0;
  std::size_t gold_count = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  double token_accuracy = 0.0;
};

/// Exact-match (type, start, end) chunk scoring with per-token accuracy.
/// 0/0 ratios score 0.
inline EvalReport score(const std::vector<std::vector<std::string>>& gold,
                        const std::vector<std::vector<std::string>>& predicted) {
  if (gold.size() != predicted.size())
    throw std::invalid_argument("score: " + std::to_string(gold.size()) + " gold vs " +
                                std::to_string(predicted.size()) + " predicted sentences");
  EvalReport r;
  std::size_t tokens = 0, correct_tokens = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != predicted[s].size())
      throw std::invalid_argument("score: length mismatch in sentence " + std::to_string(s));
    for (std::size_t t = 0; t < gold[s].size(); ++t) {
      ++tokens;
      if (gold[s][t] == predicted[s][t]) ++correct_tokens;
    }
    std::vector<Chunk> g = extract_chunks(gold[s]);
    std::vector<Chunk> p = extract_chunks(predicted[s]);
    r.gold_count += g.size();
    r.predicted_count += p.size();
    std::sort(g.begin(), g.end());
    std::sort(p.begin(), p.end());
    std::vector<Chunk> both;
    std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(both));
    r.true_positives += both.size();
  }
  r.precision = r.predicted_count ? static_cast<double>(r.true_positives) / r.predicted_count : 0.0;
  r.recall = r.gold_count ? static_cast<double>(r.true_positives) / r.gold_count : 0.0;
  r.f_measure = (r.precision + r.recall) > 0.0
                    ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                    : 0.0;
  r.token_accuracy = tokens ? static_cast<double>(correct_tokens) / tokens : 0.0;
  return r;
}

inline std::vector<std::string> to_label_strings(const std::vector<int>& indices,
                                                 const std::vector<std::string>& names) {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(names.at(static_cast<std::size_t>(i)));
  return out;
}

/// `P R F token_acc`, tab-separated, 4 decimals.
inline std::string report_line(const EvalReport& r) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.4f\t%.4f\t%.4f\t%.4f", r.precision, r.recall, r.f_measure,
                r.token_accuracy);
  return buf;
}

}  // namespace varnn
