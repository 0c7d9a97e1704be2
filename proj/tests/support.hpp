#pragma once

// Test-only helpers: random model builders and an independent brute-force
// chunk scorer used as the oracle for the fast scorer.

#include <filesystem>
#include <string>
#include <vector>

#include "varnn/cells.hpp"
#include "varnn/eval.hpp"
#include "varnn/network.hpp"
#include "varnn/rng.hpp"

namespace testsupport {

inline varnn::Vector random_vector(std::size_t n, varnn::Rng& rng, double scale = 0.5) {
  varnn::Vector v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

inline varnn::Matrix random_matrix(std::size_t r, std::size_t c, varnn::Rng& rng,
                                   double scale = 0.5) {
  varnn::Matrix m(r, c);
  for (double& x : m.data()) x = rng.uniform(-scale, scale);
  return m;
}

inline varnn::CellWeights random_cell(varnn::CellKind kind, std::size_t e, std::size_t h,
                                      varnn::Rng& rng, double scale = 0.5) {
  varnn::CellWeights w = varnn::make_cell_weights(kind, e, h);
  for (auto& ref : [&]() {
         std::vector<varnn::TensorRef> refs;
         varnn::detail::collect_cell_tensors(refs, w, "");
         return refs;
       }()) {
    if (ref.mat)
      for (double& x : ref.mat->data()) x = rng.uniform(-scale, scale);
    else
      for (double& x : *ref.vec) x = rng.uniform(-scale, scale);
  }
  return w;
}

// Independent chunk scorer: enumerates every (start, end, type) span and
// tests it directly against the lenient IOB reading, instead of running a
// left-to-right state machine. O(n^2) and deliberately different code.
struct BruteScore {
  std::size_t tp = 0, pred = 0, gold = 0, tokens = 0, correct = 0;
  double precision = 0, recall = 0, f = 0, token_accuracy = 0;
};

inline bool continues_type(const std::string& label, const std::string& type) {
  return label == "B-" + type || label == "I-" + type;
}

inline std::vector<varnn::Chunk> brute_chunks(const std::vector<std::string>& labels) {
  std::vector<varnn::Chunk> out;
  const std::size_t n = labels.size();
  for (std::size_t s = 0; s < n; ++s) {
    if (labels[s] == "O") continue;
    const std::string type = labels[s].substr(2);
    const bool starts = labels[s][0] == 'B' || s == 0 || !continues_type(labels[s - 1], type);
    if (!starts) continue;
    std::size_t e = s;
    while (e + 1 < n && labels[e + 1] == "I-" + type) ++e;
    out.push_back({type, s, e});
  }
  return out;
}

inline BruteScore brute_force_score(const std::vector<std::vector<std::string>>& gold,
                                    const std::vector<std::vector<std::string>>& pred) {
  BruteScore r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      ++r.tokens;
      if (gold[i][t] == pred[i][t]) ++r.correct;
    }
    auto g = brute_chunks(gold[i]);
    auto p = brute_chunks(pred[i]);
    r.gold += g.size();
    r.pred += p.size();
    for (const auto& gc : g)
      for (const auto& pc : p)
        if (gc == pc) ++r.tp;
  }
  r.precision = r.pred ? static_cast<double>(r.tp) / r.pred : 0.0;
  r.recall = r.gold ? static_cast<double>(r.tp) / r.gold : 0.0;
  r.f = (r.precision + r.recall) > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall)
                                     : 0.0;
  r.token_accuracy = r.tokens ? static_cast<double>(r.correct) / r.tokens : 0.0;
  return r;
}

/// Random IOB sequence including orphan I- labels.
inline std::vector<std::string> random_iob(std::size_t len, varnn::Rng& rng) {
  static const std::vector<std::string> pool = {"O",     "O",     "B-arr",  "I-arr", "B-dept",
                                                "I-dept", "B-date", "I-date"};
  std::vector<std::string> out(len);
  for (auto& l : out) l = pool[rng.next_index(pool.size())];
  return out;
}

/// Unique scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("varnn_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
