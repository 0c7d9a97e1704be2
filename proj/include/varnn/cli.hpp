#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "varnn/checkpoint.hpp"
#include "varnn/corpus.hpp"
#include "varnn/eval.hpp"
#include "varnn/gradcheck.hpp"
#include "varnn/network.hpp"
#include "varnn/synthetic.hpp"
#include "varnn/training.hpp"

namespace varnn::cli {

// Exit codes: 0 ok, 1 usage, 2 I/O, 3 numeric failure, 4 schema mismatch,
// 5 gradcheck failure.
enum ExitCode : int {
  exit_ok = 0,
  exit_usage = 1,
  exit_io = 2,
  exit_numeric = 3,
  exit_schema = 4,
  exit_gradcheck = 5,
};

namespace detail {

inline const std::map<std::string, CellKind>& cell_names() {
  static const std::map<std::string, CellKind> m = {
      {"vanilla", CellKind::vanilla}, {"lstm", CellKind::lstm}, {"gru", CellKind::gru}};
  return m;
}

inline const std::map<std::string, Direction>& direction_names() {
  static const std::map<std::string, Direction> m = {{"uni", Direction::uni},
                                                     {"bi", Direction::bi}};
  return m;
}

inline const std::map<std::string, DropoutRegime>& regime_names() {
  static const std::map<std::string, DropoutRegime> m = {
      {"none", DropoutRegime::none},
      {"naive", DropoutRegime::naive},
      {"variational", DropoutRegime::variational}};
  return m;
}

inline std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace detail

struct TrainCommand {
  std::string train_path;
  std::string val_path;
  std::string out_path = "model.varnn";
  double split_fraction = 0.8;
  std::size_t runs = 1;
  std::size_t min_count = 1;
  bool lowercase = false;
  ModelConfig model;
  TrainConfig train;
};

inline int cmd_train(const TrainCommand& cmd, std::ostream& out) {
  if (cmd.runs < 1) throw std::invalid_argument("--runs must be at least 1");
  RawCorpus train_raw, val_raw;
  if (!cmd.val_path.empty()) {
    train_raw = parse_conll_file(cmd.train_path);
    val_raw = parse_conll_file(cmd.val_path);
  } else {
    RawCorpus whole = parse_conll_file(cmd.train_path);
    auto parts = split_train_val(whole, cmd.split_fraction, cmd.train.seed);
    train_raw = std::move(parts.first);
    val_raw = std::move(parts.second);
  }
  if (cmd.lowercase) {
    lowercase_corpus(train_raw);
    lowercase_corpus(val_raw);
  }

  Vocabulary vocab = Vocabulary::build(train_raw, cmd.min_count);
  ModelConfig mc = cmd.model;
  mc.vocab_size = vocab.word_count();
  if (vocab.label_count() > mc.label_count)
    throw schema_error("corpus has " + std::to_string(vocab.label_count()) +
                       " labels but the decoder only has " + std::to_string(mc.label_count) +
                       " rows (raise --label-count)");
  mc.validate();

  std::vector<Sequence> train_set = encode_corpus(train_raw, vocab);
  std::vector<Sequence> val_set = encode_corpus(val_raw, vocab);

  double best_f = -1.0, sum_f = 0.0;
  for (std::size_t run = 0; run < cmd.runs; ++run) {
    TrainConfig tc = cmd.train;
    tc.seed = cmd.train.seed + run;
    Rng rng(tc.seed);
    TrainResult result = varnn::train(mc, train_set, val_set, vocab.labels(), tc, rng);

    const std::string path =
        cmd.runs == 1 ? cmd.out_path : cmd.out_path + ".run" + std::to_string(run);
    Checkpoint ck;
    ck.model_config = mc;
    ck.train_config = tc;
    ck.seed = tc.seed;
    ck.best_val_f = result.best_val_f;
    ck.lowercase = cmd.lowercase;
    ck.vocab = vocab;
    ck.params = result.best_params;
    save_checkpoint_file(ck, path);
    std::ofstream history(path + ".history");
    if (!history) throw std::runtime_error("cannot write " + path + ".history");
    history << result.history.to_tsv();

    out << "run\t" << run << "\tseed\t" << tc.seed << "\tbest_epoch\t" << result.best_epoch
        << "\tval_f\t" << detail::format4(result.best_val_f) << "\tcheckpoint\t" << path
        << "\n";
    best_f = std::max(best_f, result.best_val_f);
    sum_f += result.best_val_f;
  }
  out << "summary\tbest_f\t" << detail::format4(best_f) << "\tavg_f\t"
      << detail::format4(sum_f / static_cast<double>(cmd.runs)) << "\n";
  return exit_ok;
}

inline int cmd_eval(const std::string& model_path, const std::string& data_path,
                    std::ostream& out) {
  Checkpoint ck = load_checkpoint_file(model_path);
  RawCorpus data = parse_conll_file(data_path);
  if (ck.lowercase) lowercase_corpus(data);

  std::vector<std::vector<std::string>> gold, predicted;
  gold.reserve(data.size());
  predicted.reserve(data.size());
  for (const auto& sentence : data.sentences) {
    Sequence seq = encode_sentence(sentence, ck.vocab);  // unknown label -> schema_error
    gold.push_back(to_label_strings(seq.labels, ck.vocab.labels()));
    predicted.push_back(to_label_strings(
        predict_labels(ck.params, ck.model_config, seq.tokens, ck.vocab.label_count()),
        ck.vocab.labels()));
  }
  out << report_line(score(gold, predicted)) << "\n";
  return exit_ok;
}

inline int cmd_tag(const std::string& model_path, const std::string& input_path,
                   std::ostream& out, std::ostream& err) {
  Checkpoint ck = load_checkpoint_file(model_path);
  std::ifstream in(input_path);
  if (!in) throw std::runtime_error("cannot read " + input_path);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream words(line);
    std::vector<std::string> sentence;
    std::string w;
    while (words >> w) sentence.push_back(w);
    if (sentence.empty()) {
      err << "warning: skipping empty input line " << line_no << "\n";
      continue;
    }
    std::vector<int> tokens;
    tokens.reserve(sentence.size());
    for (const auto& word : sentence)
      tokens.push_back(ck.vocab.word_index(ck.lowercase ? ascii_lower(word) : word));
    std::vector<int> labels =
        predict_labels(ck.params, ck.model_config, tokens, ck.vocab.label_count());
    for (std::size_t t = 0; t < sentence.size(); ++t)
      out << sentence[t] << '\t' << ck.vocab.label_name(static_cast<std::size_t>(labels[t]))
          << '\n';
    out << '\n';
  }
  return exit_ok;
}

struct GradcheckCommand {
  std::size_t seq_len = 4;
  std::size_t vocab_size = 7;
  std::size_t embed_dim = 5;
  std::size_t hidden_dim = 5;
  std::size_t label_count = 3;
  double drop_prob = 0.5;
  double weight_decay = 0.01;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
  std::string only_cell, only_direction, only_regime;
};

inline int cmd_gradcheck(const GradcheckCommand& cmd, std::ostream& out, std::ostream& err) {
  bool all_ok = true;
  std::string first_failure;
  for (const auto& [cell_name, cell] : detail::cell_names()) {
    if (!cmd.only_cell.empty() && cmd.only_cell != cell_name) continue;
    for (const auto& [dir_name, dir] : detail::direction_names()) {
      if (!cmd.only_direction.empty() && cmd.only_direction != dir_name) continue;
      for (const auto& [regime_name, regime] : detail::regime_names()) {
        if (!cmd.only_regime.empty() && cmd.only_regime != regime_name) continue;
        GradCheckSpec spec;
        spec.config.cell_kind = cell;
        spec.config.direction = dir;
        spec.config.regime = regime;
        spec.config.vocab_size = cmd.vocab_size;
        spec.config.embed_dim = cmd.embed_dim;
        spec.config.hidden_dim = cmd.hidden_dim;
        spec.config.label_count = cmd.label_count;
        spec.config.drop_prob = cmd.drop_prob;
        spec.seq_len = cmd.seq_len;
        spec.weight_decay = cmd.weight_decay;
        spec.seed = cmd.seed;
        GradCheckReport report = check_gradients(spec);
        const bool ok = report.passed(cmd.tolerance);
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s\t%s\t%s\tmax_rel_err\t%.3e\t%s\n",
                      cell_name.c_str(), dir_name.c_str(), regime_name.c_str(),
                      report.max_rel_err, ok ? "PASS" : "FAIL");
        out << buf;
        if (!ok) {
          all_ok = false;
          if (first_failure.empty())
            first_failure = report.worst_tensor + " (" + cell_name + " " + dir_name + " " +
                            regime_name + ")";
        }
      }
    }
  }
  if (!all_ok) {
    err << "gradcheck failed on tensor " << first_failure << "\n";
    return exit_gradcheck;
  }
  return exit_ok;
}

struct SynthCommand {
  std::string out_dir;
  std::size_t n_train = 2000;
  std::size_t n_val = 500;
  std::size_t n_test = 500;
  std::uint64_t seed = 7;
};

inline int cmd_synth(const SynthCommand& cmd, std::ostream& out) {
  std::filesystem::create_directories(cmd.out_dir);
  auto emit = [&](const std::string& name, std::size_t n, std::uint64_t seed) {
    const std::string path = cmd.out_dir + "/" + name;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    write_conll(synthetic_corpus(n, seed), f);
    out << path << "\t" << n << " sentences\n";
  };
  emit("train.conll", cmd.n_train, cmd.seed);
  emit("val.conll", cmd.n_val, cmd.seed + 1);
  emit("test.conll", cmd.n_test, cmd.seed + 2);
  return exit_ok;
}

/// Parses and dispatches one invocation. `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recurrent sequence labeler with naive and per-sequence shared "
               "(variational) dropout"};
  app.require_subcommand(1);

  TrainCommand train_cmd;
  GradcheckCommand grad_cmd;
  SynthCommand synth_cmd;
  std::string model_path, data_path, input_path;

  auto add_model_flags = [](CLI::App* sub, ModelConfig& mc) {
    sub->add_option("--cell", mc.cell_kind, "Cell kind")
        ->transform(CLI::CheckedTransformer(detail::cell_names(), CLI::ignore_case));
    sub->add_option("--direction", mc.direction, "Recurrence direction")
        ->transform(CLI::CheckedTransformer(detail::direction_names(), CLI::ignore_case));
    sub->add_option("--regime", mc.regime, "Dropout regime")
        ->transform(CLI::CheckedTransformer(detail::regime_names(), CLI::ignore_case));
    sub->add_option("--p", mc.drop_prob, "Drop probability");
    sub->add_option("--embed-dim", mc.embed_dim, "Embedding width");
    sub->add_option("--hidden-dim", mc.hidden_dim, "Recurrent width");
    sub->add_option("--label-count", mc.label_count, "Decoder rows");
    sub->add_flag("--mask-gru-candidate-hidden", mc.mask_gru_candidate_hidden,
                  "Also mask the GRU candidate's hidden path");
  };

  CLI::App* train_sub = app.add_subcommand("train", "Train and write checkpoints");
  train_sub->add_option("--train", train_cmd.train_path, "Training corpus (CoNLL)")->required();
  auto* val_opt = train_sub->add_option("--val", train_cmd.val_path, "Validation corpus");
  train_sub->add_option("--split", train_cmd.split_fraction,
                        "Train fraction when no --val file is given")
      ->excludes(val_opt);
  train_sub->add_option("--out", train_cmd.out_path, "Checkpoint path");
  train_sub->add_option("--runs", train_cmd.runs, "Seeded runs (seed, seed+1, ...)");
  train_sub->add_option("--min-count", train_cmd.min_count, "Words below this become <unk>");
  train_sub->add_flag("--lowercase", train_cmd.lowercase, "Case-fold words before indexing");
  add_model_flags(train_sub, train_cmd.model);
  train_sub->add_option("--lr", train_cmd.train.learning_rate, "Learning rate");
  train_sub->add_option("--weight-decay", train_cmd.train.weight_decay, "L2 coefficient");
  train_sub->add_option("--clip", train_cmd.train.clip_norm, "Gradient norm cap (0 disables)");
  train_sub->add_option("--epochs", train_cmd.train.epochs, "Max epochs");
  train_sub->add_option("--patience", train_cmd.train.patience,
                        "Epochs without validation improvement before stopping");
  train_sub->add_option("--seed", train_cmd.train.seed, "Base rng seed");

  CLI::App* eval_sub = app.add_subcommand("eval", "Score a checkpoint on a CoNLL file");
  eval_sub->add_option("--model", model_path, "Checkpoint")->required();
  eval_sub->add_option("--data", data_path, "Gold CoNLL file")->required();

  CLI::App* tag_sub = app.add_subcommand("tag", "Tag whitespace-tokenized sentences");
  tag_sub->add_option("--model", model_path, "Checkpoint")->required();
  tag_sub->add_option("--input", input_path, "One sentence per line")->required();

  CLI::App* grad_sub = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  grad_sub->add_option("--seq-len", grad_cmd.seq_len, "Sequence length");
  grad_sub->add_option("--vocab-size", grad_cmd.vocab_size, "Vocabulary size");
  grad_sub->add_option("--embed-dim", grad_cmd.embed_dim, "Embedding width");
  grad_sub->add_option("--hidden-dim", grad_cmd.hidden_dim, "Recurrent width");
  grad_sub->add_option("--label-count", grad_cmd.label_count, "Decoder rows");
  grad_sub->add_option("--p", grad_cmd.drop_prob, "Drop probability");
  grad_sub->add_option("--weight-decay", grad_cmd.weight_decay, "L2 coefficient");
  grad_sub->add_option("--tolerance", grad_cmd.tolerance, "Max relative error");
  grad_sub->add_option("--seed", grad_cmd.seed, "Rng seed");
  grad_sub->add_option("--cell", grad_cmd.only_cell, "Check only this cell");
  grad_sub->add_option("--direction", grad_cmd.only_direction, "Check only this direction");
  grad_sub->add_option("--regime", grad_cmd.only_regime, "Check only this regime");

  CLI::App* synth_sub = app.add_subcommand("synth", "Write a synthetic slot-filling corpus");
  synth_sub->add_option("--out-dir", synth_cmd.out_dir, "Output directory")->required();
  synth_sub->add_option("--train", synth_cmd.n_train, "Training sentences");
  synth_sub->add_option("--val", synth_cmd.n_val, "Validation sentences");
  synth_sub->add_option("--test", synth_cmd.n_test, "Test sentences");
  synth_sub->add_option("--seed", synth_cmd.seed, "Rng seed");

  std::reverse(args.begin(), args.end());  // CLI11 vector parse wants reversed args
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return exit_ok;
    }
    err << e.what() << "\n";
    return exit_usage;
  }

  try {
    if (app.got_subcommand(train_sub)) return cmd_train(train_cmd, out);
    if (app.got_subcommand(eval_sub)) return cmd_eval(model_path, data_path, out);
    if (app.got_subcommand(tag_sub)) return cmd_tag(model_path, input_path, out, err);
    if (app.got_subcommand(grad_sub)) return cmd_gradcheck(grad_cmd, out, err);
    if (app.got_subcommand(synth_sub)) return cmd_synth(synth_cmd, out);
  } catch (const numeric_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_numeric;
  } catch (const schema_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_schema;
  } catch (const parse_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_io;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_io;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }
  return exit_usage;
}

}  // namespace varnn::cli
