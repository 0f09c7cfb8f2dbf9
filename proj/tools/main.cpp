#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seqforge/decoder.hpp"
#include "seqforge/errors.hpp"
#include "seqforge/metrics.hpp"
#include "seqforge/text.hpp"
#include "seqforge/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace seqforge;

namespace {

struct CommonFlags {
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool strict = false;
};

void apply_overrides(TrainingConfig& config, const CommonFlags& flags) {
  if (flags.seed_set) config.seed = flags.seed;
  if (flags.strict) config.strict = true;
}

void print_stats_summary(const ParallelCorpus& corpus, const LengthStats& stats, const Vocabulary& src_vocab,
                         const Vocabulary& tgt_vocab) {
  std::cout << "pairs: " << corpus.size() << "  (skipped lines: " << corpus.skipped_lines
            << ", filtered pairs: " << corpus.filtered_pairs << ")\n";
  std::cout << "                       source      target\n";
  std::cout << "total words        " << std::setw(10) << stats.source.total_tokens << "  " << std::setw(10)
            << stats.target.total_tokens << '\n';
  std::cout << "vocabulary size    " << std::setw(10) << src_vocab.size() << "  " << std::setw(10) << tgt_vocab.size()
            << "   (incl. 4 specials)\n";
  std::cout << "length mean        " << std::setw(10) << stats.source.mean << "  " << std::setw(10)
            << stats.target.mean << '\n';
  std::cout << "length min/max     " << std::setw(6) << stats.source.min << "/" << stats.source.max << "  "
            << std::setw(8) << stats.target.min << "/" << stats.target.max << '\n';
  std::cout << "length p50/p90/p99 " << stats.source.p50 << "/" << stats.source.p90 << "/" << stats.source.p99
            << "  " << stats.target.p50 << "/" << stats.target.p90 << "/" << stats.target.p99 << '\n';
}

int cmd_stats(const std::string& corpus_path, const std::string& out_dir) {
  auto corpus = load_corpus(corpus_path);
  if (corpus.pairs.empty()) {
    std::cerr << "warning: corpus has no usable pairs: " << corpus_path << "\n";
    std::cout << "pairs: 0  (skipped lines: " << corpus.skipped_lines << ", filtered pairs: " << corpus.filtered_pairs
              << ")\n";
    return 0;
  }
  auto stats = corpus_stats(corpus);
  auto src_vocab = build_vocab(corpus, Side::kSource, 1);
  auto tgt_vocab = build_vocab(corpus, Side::kTarget, 1);
  print_stats_summary(corpus, stats, src_vocab, tgt_vocab);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_stats_csv(stats, (fs::path(out_dir) / "length_histogram.csv").string());
    src_vocab.save((fs::path(out_dir) / "vocab_source.txt").string());
    tgt_vocab.save((fs::path(out_dir) / "vocab_target.txt").string());
    std::cout << "wrote " << out_dir << "/length_histogram.csv and vocabulary dumps\n";
  }
  return 0;
}

void write_run_outputs(const TrainingRun& run, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_history_csv(run.history, (fs::path(out_dir) / "history.csv").string());
  run.src_vocab.save((fs::path(out_dir) / "vocab_source.txt").string());
  run.tgt_vocab.save((fs::path(out_dir) / "vocab_target.txt").string());
}

int cmd_train(const std::string& config_path, const std::string& corpus_path, const std::string& out_dir,
              const std::string& resume_path, int epochs_override, const CommonFlags& flags) {
  auto corpus = load_corpus(corpus_path);
  TrainingRun run;
  if (!resume_path.empty()) {
    run = load_checkpoint(resume_path);
    if (epochs_override > 0) run.config.epochs = epochs_override;
    apply_overrides(run.config, flags);
  } else {
    TrainingConfig config = config_path.empty() ? TrainingConfig{} : load_config(config_path);
    if (epochs_override > 0) config.epochs = epochs_override;
    apply_overrides(config, flags);
    run = start_run(corpus, config);
  }
  fs::create_directories(out_dir);
  const auto checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
  train_epochs(run, corpus, checkpoint_path);
  write_run_outputs(run, out_dir);
  const auto& last = run.history.epochs.back();
  std::cout << "trained " << run.completed_epochs << " epochs; final loss " << last.mean_loss;
  if (last.has_bleu) std::cout << ", validation BLEU " << last.bleu;
  std::cout << "\ncheckpoint: " << checkpoint_path << "\n";
  return 0;
}

std::string json_scalar(const json& value) {
  return value.is_string() ? value.get<std::string>() : value.dump();
}

int cmd_sweep(const std::string& manifest_path, const CommonFlags& flags) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest: " + manifest_path);
  json manifest = json::parse(in);

  const std::string corpus_path = manifest.at("corpus").get<std::string>();
  const std::string out_dir = manifest.at("out_dir").get<std::string>();
  if (!fs::exists(corpus_path)) throw IoError("manifest corpus does not exist: " + corpus_path);

  std::string base_text;
  if (manifest.contains("base"))
    for (auto& [key, value] : manifest["base"].items()) base_text += key + "=" + json_scalar(value) + "\n";

  auto corpus = load_corpus(corpus_path);
  fs::create_directories(out_dir);

  struct Row {
    std::string name;
    double final_loss = 0.0;
    bool has_bleu = false;
    double bleu = 0.0;
    double median_epoch_seconds = 0.0;
    std::int64_t cell_params = 0;
    std::int64_t total_params = 0;
  };
  std::vector<Row> rows;

  for (auto& [name, overrides] : manifest.at("variants").items()) {
    std::string text = base_text;
    for (auto& [key, value] : overrides.items()) text += key + "=" + json_scalar(value) + "\n";
    TrainingConfig config = parse_config_text(text);
    apply_overrides(config, flags);

    std::cout << "=== variant " << name << " ===" << std::endl;
    auto run = start_run(corpus, config);
    const auto variant_dir = (fs::path(out_dir) / name).string();
    fs::create_directories(variant_dir);
    train_epochs(run, corpus, (fs::path(variant_dir) / "checkpoint.bin").string());
    write_run_outputs(run, variant_dir);

    Row row;
    row.name = name;
    row.final_loss = run.history.epochs.back().mean_loss;
    for (auto it = run.history.epochs.rbegin(); it != run.history.epochs.rend(); ++it) {
      if (it->has_bleu) {
        row.has_bleu = true;
        row.bleu = it->bleu;
        break;
      }
    }
    std::vector<double> secs;
    for (const auto& e : run.history.epochs) secs.push_back(e.seconds);
    std::sort(secs.begin(), secs.end());
    row.median_epoch_seconds = secs[secs.size() / 2];
    // Encoder plus decoder recurrent blocks; embeddings and projection are
    // excluded so the GRU/LSTM 3:4 ratio stays visible.
    row.cell_params = param_count(config.cell(), config.embed_dim, config.hidden_dim) +
                      param_count(config.cell(), run.model.arch.decoder_input_dim(), config.hidden_dim);
    row.total_params = run.model.total_param_count();
    rows.push_back(row);
    std::cout << "variant " << name << ": loss " << row.final_loss << ", median s/epoch " << row.median_epoch_seconds
              << std::endl;
  }

  const auto table_path = (fs::path(out_dir) / "comparison.csv").string();
  std::ofstream table(table_path, std::ios::binary);
  if (!table) throw IoError("cannot write comparison table: " + table_path);
  table.precision(17);
  table << "variant,final_loss,bleu,median_epoch_seconds,cell_param_count,total_param_count\n";
  for (const auto& r : rows) {
    table << r.name << ',' << r.final_loss << ',';
    if (r.has_bleu) table << r.bleu;
    table << ',' << r.median_epoch_seconds << ',' << r.cell_params << ',' << r.total_params << '\n';
  }
  std::cout << "comparison table: " << table_path << "\n";
  return 0;
}

TranslateOptions::Strategy parse_strategy(const std::string& name) {
  if (name == "greedy") return TranslateOptions::Strategy::kGreedy;
  if (name == "beam") return TranslateOptions::Strategy::kBeam;
  throw ConfigError("unknown strategy: " + name + " (expected greedy or beam)");
}

int cmd_translate(const std::string& checkpoint_path, const std::string& input_path, const std::string& output_path,
                  const std::string& strategy, int beam_width, double alpha, const std::string& align_dir) {
  auto run = load_checkpoint(checkpoint_path);
  TranslateOptions options;
  options.strategy = parse_strategy(strategy);
  options.beam_width = beam_width;
  options.alpha = alpha;
  options.max_len = run.config.max_len;
  options.threads = worker_threads();
  if (!align_dir.empty()) {
    fs::create_directories(align_dir);
    options.alignment_dir = align_dir;
  }
  translate_file(input_path, run.model, run.src_vocab, run.tgt_vocab, options, output_path);
  std::cout << "translations written to " << output_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& corpus_path, const std::string& out_dir,
                 const std::string& strategy, int beam_width, double alpha) {
  auto run = load_checkpoint(checkpoint_path);
  auto corpus = load_corpus(corpus_path);
  if (corpus.pairs.empty()) throw std::domain_error("evaluation corpus has no usable pairs");

  const auto strat = parse_strategy(strategy);
  std::vector<TokenSeq> candidates(corpus.size());
  std::vector<std::vector<TokenSeq>> references(corpus.size());
  std::vector<double> sentence_chrf(corpus.size());
  std::vector<std::int64_t> cand_lengths(corpus.size()), ref_lengths(corpus.size());

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& [src_tokens, tgt_tokens] = corpus.pairs[i];
    auto ids = encode(src_tokens, run.src_vocab, run.config.max_len);
    auto t = strat == TranslateOptions::Strategy::kGreedy
                 ? greedy_translate(ids, run.model, run.config.max_len)
                 : beam_translate(ids, run.model, beam_width, run.config.max_len, alpha);
    for (TokenId id : t.tokens) candidates[i].push_back(run.tgt_vocab.token(id));
    references[i] = {tgt_tokens};
    sentence_chrf[i] = char_fscore(candidates[i], tgt_tokens);
    cand_lengths[i] = static_cast<std::int64_t>(candidates[i].size());
    ref_lengths[i] = static_cast<std::int64_t>(tgt_tokens.size());
  }

  auto report = corpus_bleu(candidates, references);
  double chrf_sum = 0.0;
  for (double c : sentence_chrf) chrf_sum += c;
  const double corpus_chrf = chrf_sum / static_cast<double>(sentence_chrf.size());

  fs::create_directories(out_dir);
  write_bleu_report_csv(report, sentence_chrf, cand_lengths, ref_lengths, corpus_chrf,
                        (fs::path(out_dir) / "evaluation.csv").string());
  write_score_histogram_csv(report.sentence_scores, (fs::path(out_dir) / "bleu_histogram.csv").string());
  {
    std::ofstream preds((fs::path(out_dir) / "predictions.txt").string(), std::ios::binary);
    for (const auto& cand : candidates) {
      for (std::size_t k = 0; k < cand.size(); ++k) preds << (k ? " " : "") << cand[k];
      preds << '\n';
    }
  }

  std::cout << "sentences: " << corpus.size() << "\n";
  std::cout << "p1..p4: " << report.precisions[0] << ' ' << report.precisions[1] << ' ' << report.precisions[2] << ' '
            << report.precisions[3] << "\n";
  std::cout << "brevity penalty: " << report.brevity_penalty << "\n";
  std::cout << "BLEU: " << report.score << "\n";
  std::cout << "chrF: " << corpus_chrf << "\n";
  std::cout << "report: " << (fs::path(out_dir) / "evaluation.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqforge: recurrent encoder-decoder translation toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* stats = app.add_subcommand("stats", "corpus length statistics and vocabulary sizes");
  std::string stats_corpus, stats_out;
  stats->add_option("--corpus", stats_corpus, "tab-separated bilingual corpus")->required();
  stats->add_option("--out", stats_out, "output directory for CSV and vocabulary dumps");

  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint + history");
  std::string train_config, train_corpus, train_out, train_resume;
  int train_epochs_override = 0;
  train_cmd->add_option("--config", train_config, "key=value training configuration file");
  train_cmd->add_option("--corpus", train_corpus, "tab-separated bilingual corpus")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");
  train_cmd->add_option("--epochs", train_epochs_override, "override the configured epoch count");

  auto* sweep = app.add_subcommand("sweep", "train every variant in a manifest and tabulate results");
  std::string sweep_manifest;
  sweep->add_option("--manifest", sweep_manifest, "JSON manifest of config variants")->required();

  auto* translate = app.add_subcommand("translate", "translate a file of sentences with a checkpoint");
  std::string tr_checkpoint, tr_input, tr_output, tr_align;
  std::string tr_strategy = "greedy";
  int tr_beam_width = 5;
  double tr_alpha = 0.0;
  translate->add_option("--checkpoint", tr_checkpoint, "model checkpoint")->required();
  translate->add_option("--input", tr_input, "input file, one sentence per line")->required();
  translate->add_option("--out", tr_output, "output file, aligned by line")->required();
  translate->add_option("--strategy", tr_strategy, "greedy|beam")->check(CLI::IsMember({"greedy", "beam"}));
  translate->add_option("--beam-width", tr_beam_width, "beam width (beam strategy)");
  translate->add_option("--alpha", tr_alpha, "length-normalization exponent (0 = pure sum)");
  translate->add_option("--align-dir", tr_align, "directory for per-sentence alignment CSVs");

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint against a test corpus");
  std::string ev_checkpoint, ev_corpus, ev_out;
  std::string ev_strategy = "greedy";
  int ev_beam_width = 5;
  double ev_alpha = 0.0;
  evaluate->add_option("--checkpoint", ev_checkpoint, "model checkpoint")->required();
  evaluate->add_option("--corpus", ev_corpus, "tab-separated test corpus")->required();
  evaluate->add_option("--out", ev_out, "output directory")->required();
  evaluate->add_option("--strategy", ev_strategy, "greedy|beam")->check(CLI::IsMember({"greedy", "beam"}));
  evaluate->add_option("--beam-width", ev_beam_width, "beam width (beam strategy)");
  evaluate->add_option("--alpha", ev_alpha, "length-normalization exponent");

  for (auto* cmd : {train_cmd, sweep}) {
    cmd->add_option("--seed", flags.seed, "master random seed")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
    cmd->add_flag("--strict", flags.strict, "strict-deterministic mode");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (*stats) return cmd_stats(stats_corpus, stats_out);
    if (*train_cmd) return cmd_train(train_config, train_corpus, train_out, train_resume, train_epochs_override, flags);
    if (*sweep) return cmd_sweep(sweep_manifest, flags);
    if (*translate)
      return cmd_translate(tr_checkpoint, tr_input, tr_output, tr_strategy, tr_beam_width, tr_alpha, tr_align);
    if (*evaluate) return cmd_evaluate(ev_checkpoint, ev_corpus, ev_out, ev_strategy, ev_beam_width, ev_alpha);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
