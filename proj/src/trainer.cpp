#include "seqforge/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "seqforge/decoder.hpp"
#include "seqforge/errors.hpp"
#include "seqforge/metrics.hpp"

namespace seqforge {

namespace {

constexpr std::uint64_t kInitStream = 0x494E4954;     // model init
constexpr std::uint64_t kShuffleStream = 0x53485546;  // per-epoch batch order
constexpr std::uint64_t kDropoutStream = 0x44524F50;  // per-epoch dropout masks

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("config key '" + key + "' expects a boolean, got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) throw ConfigError("config key '" + key + "' has malformed value '" + value + "'");
  return out;
}

}  // namespace

void TrainingConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout_rate must lie in [0, 1)");
  if (embed_dim < 1 || hidden_dim < 1) throw ConfigError("embed_dim and hidden_dim must be >= 1");
  if (att_dim < 0) throw ConfigError("att_dim must be >= 0");
  if (max_len < 3) throw ConfigError("max_len must be >= 3");
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0");
  if (test_size < 0) throw ConfigError("test_size must be >= 0");
  if (val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction >= 1.0)
    throw ConfigError("val_fraction and test_fraction must be nonnegative and sum below 1");
  cell();
  attention();
}

CellKind TrainingConfig::cell() const {
  if (cell_kind == "lstm") return CellKind::kLstm;
  if (cell_kind == "gru") return CellKind::kGru;
  throw ConfigError("unknown cell_kind: " + cell_kind);
}

AttentionKind TrainingConfig::attention() const { return attention_kind_from_name(attention_kind); }

TrainingConfig parse_config_text(const std::string& text) {
  TrainingConfig config;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line is not key=value: '" + line + "'");
    const auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "epochs") config.epochs = parse_number<int>(key, value);
    else if (key == "batch_size") config.batch_size = parse_number<int>(key, value);
    else if (key == "learning_rate") config.learning_rate = parse_number<double>(key, value);
    else if (key == "dropout_rate") config.dropout_rate = parse_number<double>(key, value);
    else if (key == "cell_kind") config.cell_kind = value;
    else if (key == "attention_kind") config.attention_kind = value;
    else if (key == "embed_dim") config.embed_dim = parse_number<int>(key, value);
    else if (key == "hidden_dim") config.hidden_dim = parse_number<int>(key, value);
    else if (key == "att_dim") config.att_dim = parse_number<int>(key, value);
    else if (key == "max_len") config.max_len = parse_number<int>(key, value);
    else if (key == "seed") config.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "eval_every") config.eval_every = parse_number<int>(key, value);
    else if (key == "min_count") config.min_count = parse_number<int>(key, value);
    else if (key == "grad_clip") config.grad_clip = parse_number<double>(key, value);
    else if (key == "strict") config.strict = parse_bool(key, value);
    else if (key == "bucket_batching") config.bucket_batching = parse_bool(key, value);
    else if (key == "forget_bias_one") config.forget_bias_one = parse_bool(key, value);
    else if (key == "project_context") config.project_context = parse_bool(key, value);
    else if (key == "test_size") config.test_size = parse_number<int>(key, value);
    else if (key == "val_fraction") config.val_fraction = parse_number<double>(key, value);
    else if (key == "test_fraction") config.test_fraction = parse_number<double>(key, value);
    else throw ConfigError("unknown config key: '" + key + "'");
  }
  config.validate();
  return config;
}

TrainingConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const TrainingConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "epochs=" << c.epochs << '\n'
      << "batch_size=" << c.batch_size << '\n'
      << "learning_rate=" << c.learning_rate << '\n'
      << "dropout_rate=" << c.dropout_rate << '\n'
      << "cell_kind=" << c.cell_kind << '\n'
      << "attention_kind=" << c.attention_kind << '\n'
      << "embed_dim=" << c.embed_dim << '\n'
      << "hidden_dim=" << c.hidden_dim << '\n'
      << "att_dim=" << c.att_dim << '\n'
      << "max_len=" << c.max_len << '\n'
      << "seed=" << c.seed << '\n'
      << "eval_every=" << c.eval_every << '\n'
      << "min_count=" << c.min_count << '\n'
      << "grad_clip=" << c.grad_clip << '\n'
      << "strict=" << (c.strict ? 1 : 0) << '\n'
      << "bucket_batching=" << (c.bucket_batching ? 1 : 0) << '\n'
      << "forget_bias_one=" << (c.forget_bias_one ? 1 : 0) << '\n'
      << "project_context=" << (c.project_context ? 1 : 0) << '\n'
      << "test_size=" << c.test_size << '\n'
      << "val_fraction=" << c.val_fraction << '\n'
      << "test_fraction=" << c.test_fraction << '\n';
  return out.str();
}

void write_history_csv(const TrainingHistory& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write history file: " + path);
  out.precision(17);
  out << "epoch,loss,bleu,seconds\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << e.mean_loss << ',';
    if (e.has_bleu) out << e.bleu;
    out << ',' << e.seconds << '\n';
  }
  if (!out) throw IoError("short write on history file: " + path);
}

namespace {

Architecture architecture_from(const TrainingConfig& config, Index src_vocab, Index tgt_vocab) {
  Architecture arch;
  arch.cell_kind = config.cell();
  arch.attention_kind = config.attention();
  arch.embed_dim = config.embed_dim;
  arch.hidden_dim = config.hidden_dim;
  arch.att_dim = config.att_dim;
  arch.src_vocab = src_vocab;
  arch.tgt_vocab = tgt_vocab;
  arch.max_len = config.max_len;
  arch.project_context = config.project_context;
  return arch;
}

/// <sos> + ids + <eos> without padding; batches pad to their own maximum.
std::vector<TokenId> encode_snug(const std::vector<std::string>& tokens, const Vocabulary& vocab, int max_len) {
  auto ids = encode(tokens, vocab, max_len);
  while (ids.size() > 2 && ids.back() == Specials::kPad) ids.pop_back();
  return ids;
}

double validation_bleu(const TrainingRun& run, const ParallelCorpus& corpus, const std::vector<std::size_t>& val) {
  std::vector<TokenSeq> candidates;
  std::vector<std::vector<TokenSeq>> references;
  candidates.reserve(val.size());
  references.reserve(val.size());
  for (std::size_t idx : val) {
    const auto& [src_tokens, tgt_tokens] = corpus.pairs[idx];
    const auto ids = encode_snug(src_tokens, run.src_vocab, run.config.max_len);
    const auto t = greedy_translate(ids, run.model, run.config.max_len);
    TokenSeq cand;
    for (TokenId id : t.tokens) cand.push_back(run.tgt_vocab.token(id));
    candidates.push_back(std::move(cand));
    references.push_back({tgt_tokens});
  }
  return corpus_bleu(candidates, references).score;
}

}  // namespace

TrainingRun start_run(const ParallelCorpus& corpus, const TrainingConfig& config) {
  config.validate();
  if (corpus.pairs.empty()) throw std::domain_error("cannot train on an empty corpus");
  TrainingRun run;
  run.config = config;
  run.src_vocab = build_vocab(corpus, Side::kSource, config.min_count);
  run.tgt_vocab = build_vocab(corpus, Side::kTarget, config.min_count);
  Rng init_rng(Rng::derive(config.seed, kInitStream, 0));
  run.model = Seq2SeqModel::init(architecture_from(config, run.src_vocab.size(), run.tgt_vocab.size()), init_rng,
                                 config.forget_bias_one);
  run.optimizer = Adam(run.model.params(), config.learning_rate);
  return run;
}

void train_epochs(TrainingRun& run, const ParallelCorpus& corpus, const std::string& checkpoint_path) {
  const TrainingConfig& config = run.config;
  const auto split = split_corpus(corpus.size(), config.seed, config.val_fraction, config.test_fraction,
                                  static_cast<std::size_t>(config.test_size));
  if (split.train.empty()) throw std::domain_error("train split is empty");

  // Snug encodings once; batches re-pad to their own maximum length.
  std::vector<std::vector<TokenId>> src_ids(corpus.size()), tgt_ids(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    src_ids[i] = encode_snug(corpus.pairs[i].first, run.src_vocab, config.max_len);
    tgt_ids[i] = encode_snug(corpus.pairs[i].second, run.tgt_vocab, config.max_len);
  }

  for (int epoch = run.completed_epochs + 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    Rng shuffle_rng(Rng::derive(config.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    Rng dropout_rng(Rng::derive(config.seed, kDropoutStream, static_cast<std::uint64_t>(epoch)));

    auto order = split.train;
    shuffle_rng.shuffle(order);
    if (config.bucketing_active()) {
      // Group similar lengths to cut pad waste, then shuffle whole batches.
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return src_ids[a].size() + tgt_ids[a].size() < src_ids[b].size() + tgt_ids[b].size();
      });
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(order.size(), i + static_cast<std::size_t>(config.batch_size));
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (config.bucketing_active()) shuffle_rng.shuffle(batches);

    RunContext ctx;
    ctx.training = true;
    ctx.dropout_rate = config.dropout_rate;
    ctx.rng = &dropout_rng;

    double epoch_loss_sum = 0.0;
    std::int64_t epoch_positions = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      // Equal-pad the batch so its members share one length.
      std::size_t src_max = 0, tgt_max = 0;
      for (std::size_t idx : batch) {
        src_max = std::max(src_max, src_ids[idx].size());
        tgt_max = std::max(tgt_max, tgt_ids[idx].size());
      }
      Tensor total = Tensor::zeros(1, 1);
      std::int64_t positions = 0;
      for (std::size_t idx : batch) {
        auto src = src_ids[idx];
        auto tgt = tgt_ids[idx];
        src.resize(src_max, Specials::kPad);
        tgt.resize(tgt_max, Specials::kPad);
        auto parts = teacher_forced_parts(src, tgt, run.model, ctx);
        total = total + parts.total;
        positions += parts.positions;
      }
      // Loss averages over every non-pad token position in the batch.
      auto loss = scale(total, 1.0 / static_cast<double>(positions));
      if (!all_finite(loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(b));
      backward(loss);
      if (config.grad_clip > 0.0) run.optimizer.clip_global_norm(config.grad_clip);
      run.optimizer.step();
      run.optimizer.zero_grad();
      epoch_loss_sum += total.scalar();
      epoch_positions += positions;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = epoch_loss_sum / static_cast<double>(epoch_positions);
    if (config.eval_every > 0 && !split.val.empty() &&
        (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      record.has_bleu = true;
      record.bleu = validation_bleu(run, corpus, split.val);
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    run.history.epochs.push_back(record);
    run.completed_epochs = epoch;
    if (!checkpoint_path.empty()) save_checkpoint(run, checkpoint_path);
  }
}

TrainingRun train(const ParallelCorpus& corpus, const TrainingConfig& config) {
  TrainingRun run = start_run(corpus, config);
  train_epochs(run, corpus);
  return run;
}

}  // namespace seqforge
