#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqforge/adam.hpp"
#include "seqforge/seq2seq.hpp"
#include "seqforge/text.hpp"

namespace seqforge {

/// Flat training configuration. The key=value config file uses exactly these
/// field names as keys.
struct TrainingConfig {
  int epochs = 30;
  int batch_size = 32;        // tuned batch; the architecture-table value 128 also works
  double learning_rate = 1e-3;
  double dropout_rate = 0.5;
  std::string cell_kind = "lstm";
  std::string attention_kind = "dot";
  int embed_dim = 256;
  int hidden_dim = 1024;
  int att_dim = 0;            // 0 -> hidden_dim
  int max_len = 40;
  std::uint64_t seed = 42;
  int eval_every = 0;         // validation BLEU cadence; 0 disables
  int min_count = 1;
  double grad_clip = 0.0;     // global-norm clip; 0 disables
  bool strict = false;        // strict-deterministic mode: disables bucketing
  bool bucket_batching = true;
  bool forget_bias_one = true;
  bool project_context = true;
  int test_size = 0;          // 0 -> test_fraction
  double val_fraction = 0.1;
  double test_fraction = 0.1;

  void validate() const;
  CellKind cell() const;
  AttentionKind attention() const;
  bool bucketing_active() const { return bucket_batching && !strict; }
};

/// Parses flat key=value text; '#' lines and blanks are ignored. Unknown keys
/// and malformed values raise ConfigError naming the key.
TrainingConfig parse_config_text(const std::string& text);
TrainingConfig load_config(const std::string& path);
std::string serialize_config(const TrainingConfig& config);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  bool has_bleu = false;
  double bleu = 0.0;
  double seconds = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
};

/// CSV columns: epoch,loss,bleu,seconds (bleu blank on epochs without an
/// evaluation pass).
void write_history_csv(const TrainingHistory& history, const std::string& path);

/// A training run in flight: everything a checkpoint persists.
struct TrainingRun {
  TrainingConfig config;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  Seq2SeqModel model;
  Adam optimizer;
  TrainingHistory history;
  int completed_epochs = 0;
};

/// Builds vocabularies (over the full corpus, mirroring the benchmark
/// vocabulary statistics) and the seeded initial model.
TrainingRun start_run(const ParallelCorpus& corpus, const TrainingConfig& config);

/// Runs epochs completed_epochs+1 .. config.epochs: seeded shuffle, batch,
/// teacher-forced loss, backward, Adam, zero grads. Every eval_every epochs
/// the validation split is greedy-decoded for BLEU. When checkpoint_path is
/// set, the run checkpoints after each epoch (atomic rename). Aborts with a
/// diagnostic naming the batch if the loss stops being finite.
void train_epochs(TrainingRun& run, const ParallelCorpus& corpus, const std::string& checkpoint_path = "");

TrainingRun train(const ParallelCorpus& corpus, const TrainingConfig& config);

// --- checkpointing --------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned, section-length-prefixed binary with little-endian 64-bit
/// floats; vocabularies travel inside, so a checkpoint translates on its own.
void save_checkpoint(const TrainingRun& run, const std::string& path);
TrainingRun load_checkpoint(const std::string& path);

}  // namespace seqforge
