#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "varnn/corpus.hpp"
#include "varnn/network.hpp"
#include "varnn/training.hpp"

namespace varnn {

/// Versioned binary model file. Everything is explicit little-endian, doubles
/// travel as raw IEEE-754 bits, and tensors follow the registry order, so
/// save -> load -> save reproduces the file byte for byte and a loaded model
/// infers bit-identically to the one that was saved.
struct Checkpoint {
  static constexpr char magic[7] = "VARNN1";

  ModelConfig model_config;
  TrainConfig train_config;
  std::uint64_t seed = 0;
  double best_val_f = 0.0;
  bool lowercase = false;  // word normalization applied when the model was trained
  Vocabulary vocab;
  ModelParams params;
};

namespace io {

inline void write_u8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint8_t read_u8(std::istream& in) {
  int c = in.get();
  if (c == EOF) throw schema_error("checkpoint: truncated file");
  return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32(std::istream& in) {
  char b[4];
  if (!in.read(b, 4)) throw schema_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  char b[8];
  if (!in.read(b, 8)) throw schema_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in) {
  std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline std::string read_string(std::istream& in) {
  std::uint32_t len = read_u32(in);
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw schema_error("checkpoint: truncated string");
  return s;
}

}  // namespace io

inline void save_checkpoint(const Checkpoint& ck, std::ostream& out) {
  out.write(Checkpoint::magic, 6);

  const ModelConfig& mc = ck.model_config;
  io::write_u8(out, static_cast<std::uint8_t>(mc.cell_kind));
  io::write_u8(out, static_cast<std::uint8_t>(mc.direction));
  io::write_u8(out, static_cast<std::uint8_t>(mc.regime));
  io::write_u8(out, mc.mask_gru_candidate_hidden ? 1 : 0);
  io::write_u64(out, mc.vocab_size);
  io::write_u64(out, mc.embed_dim);
  io::write_u64(out, mc.hidden_dim);
  io::write_u64(out, mc.label_count);
  io::write_f64(out, mc.drop_prob);

  const TrainConfig& tc = ck.train_config;
  io::write_f64(out, tc.learning_rate);
  io::write_u64(out, tc.epochs);
  io::write_f64(out, tc.weight_decay);
  io::write_f64(out, tc.clip_norm);
  io::write_u64(out, tc.seed);
  io::write_u64(out, tc.patience);

  io::write_u64(out, ck.seed);
  io::write_f64(out, ck.best_val_f);
  io::write_u8(out, ck.lowercase ? 1 : 0);

  io::write_u64(out, ck.vocab.word_count());
  for (const auto& w : ck.vocab.words()) io::write_string(out, w);
  io::write_u64(out, ck.vocab.label_count());
  for (const auto& l : ck.vocab.labels()) io::write_string(out, l);

  auto refs = tensor_refs(ck.params);
  io::write_u32(out, static_cast<std::uint32_t>(refs.size()));
  for (const auto& ref : refs) {
    io::write_string(out, ref.name);
    if (ref.mat) {
      io::write_u32(out, 2);
      io::write_u64(out, ref.mat->rows());
      io::write_u64(out, ref.mat->cols());
      for (double v : ref.mat->data()) io::write_f64(out, v);
    } else {
      io::write_u32(out, 1);
      io::write_u64(out, ref.vec->size());
      for (double v : *ref.vec) io::write_f64(out, v);
    }
  }
}

inline Checkpoint load_checkpoint(std::istream& in) {
  char magic[6];
  if (!in.read(magic, 6) || std::memcmp(magic, Checkpoint::magic, 6) != 0)
    throw schema_error("checkpoint: bad magic, not a VARNN1 file");

  Checkpoint ck;
  ModelConfig& mc = ck.model_config;
  mc.cell_kind = static_cast<CellKind>(io::read_u8(in));
  mc.direction = static_cast<Direction>(io::read_u8(in));
  mc.regime = static_cast<DropoutRegime>(io::read_u8(in));
  mc.mask_gru_candidate_hidden = io::read_u8(in) != 0;
  mc.vocab_size = io::read_u64(in);
  mc.embed_dim = io::read_u64(in);
  mc.hidden_dim = io::read_u64(in);
  mc.label_count = io::read_u64(in);
  mc.drop_prob = io::read_f64(in);

  TrainConfig& tc = ck.train_config;
  tc.learning_rate = io::read_f64(in);
  tc.epochs = io::read_u64(in);
  tc.weight_decay = io::read_f64(in);
  tc.clip_norm = io::read_f64(in);
  tc.seed = io::read_u64(in);
  tc.patience = io::read_u64(in);

  ck.seed = io::read_u64(in);
  ck.best_val_f = io::read_f64(in);
  ck.lowercase = io::read_u8(in) != 0;

  std::vector<std::string> words(io::read_u64(in));
  for (auto& w : words) w = io::read_string(in);
  std::vector<std::string> labels(io::read_u64(in));
  for (auto& l : labels) l = io::read_string(in);
  ck.vocab = Vocabulary::from_lists(std::move(words), std::move(labels));

  if (ck.vocab.word_count() != mc.vocab_size)
    throw schema_error("checkpoint: vocabulary size disagrees with model config");
  if (ck.vocab.label_count() > mc.label_count)
    throw schema_error("checkpoint: label map larger than decoder");

  ck.params = make_zero_params(mc);
  auto refs = tensor_refs(ck.params);
  std::uint32_t count = io::read_u32(in);
  if (count != refs.size()) throw schema_error("checkpoint: tensor count mismatch");
  for (auto& ref : refs) {
    std::string name = io::read_string(in);
    if (name != ref.name)
      throw schema_error("checkpoint: expected tensor " + ref.name + ", found " + name);
    std::uint32_t ndims = io::read_u32(in);
    if (ref.mat) {
      if (ndims != 2 || io::read_u64(in) != ref.mat->rows() || io::read_u64(in) != ref.mat->cols())
        throw schema_error("checkpoint: shape mismatch for tensor " + name);
      for (double& v : ref.mat->data()) v = io::read_f64(in);
    } else {
      if (ndims != 1 || io::read_u64(in) != ref.vec->size())
        throw schema_error("checkpoint: shape mismatch for tensor " + name);
      for (double& v : *ref.vec) v = io::read_f64(in);
    }
  }
  if (ck.params.decoder.rows() != mc.label_count)
    throw schema_error("checkpoint: decoder rows disagree with label count");
  return ck;
}

inline void save_checkpoint_file(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_checkpoint(ck, out);
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return load_checkpoint(in);
}

}  // namespace varnn
