#pragma once

#include <string>
#include <vector>

#include "seqforge/attention.hpp"
#include "seqforge/seq2seq.hpp"
#include "seqforge/text.hpp"

namespace seqforge {

/// Partial decode: emitted content tokens plus the accumulated per-step log
/// probability. A finished hypothesis is never extended.
struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  RnnState state;
  TokenId last_token = Specials::kSos;
  std::vector<Eigen::VectorXd> alignment_rows;
  bool finished = false;
};

struct Translation {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  AlignmentMap alignment;
};

/// Everything the beam retained, for search-property checks: best is the
/// normalized-score argmax over completed.
struct BeamResult {
  Translation best;
  std::vector<Translation> completed;
};

/// Emits the argmax token at each step, feeding it back as the next input.
/// Ties break toward the lowest token id; <pad> and <sos> never compete and
/// <unk> is withheld from output. Stops at <eos> or after max_len tokens.
Translation greedy_translate(const std::vector<TokenId>& src_ids, const Seq2SeqModel& model, int max_len);

/// Beam search over summed log probabilities. At every step the top
/// beam_width expansions across the whole beam survive; expansions choosing
/// <eos> retire to the completed pool. The final answer maximizes
/// log_prob / max(1, length)^alpha, so alpha = 0 is the pure sum.
BeamResult beam_search(const std::vector<TokenId>& src_ids, const Seq2SeqModel& model, int beam_width, int max_len,
                       double alpha = 0.0);

Translation beam_translate(const std::vector<TokenId>& src_ids, const Seq2SeqModel& model, int beam_width,
                           int max_len, double alpha = 0.0);

struct TranslateOptions {
  enum class Strategy { kGreedy, kBeam };
  Strategy strategy = Strategy::kGreedy;
  int beam_width = 5;
  double alpha = 0.0;
  int max_len = 40;
  int threads = 1;             // sentence-level parallelism; output order is fixed
  std::string alignment_dir;   // when set, one alignment CSV per sentence
};

/// Translates a file of one source sentence per line, preserving line order.
/// Unknown source tokens pass through <unk>.
void translate_file(const std::string& input_path, const Seq2SeqModel& model, const Vocabulary& src_vocab,
                    const Vocabulary& tgt_vocab, const TranslateOptions& options, const std::string& output_path);

/// Worker cap: SEQFORGE_THREADS when set, else the hardware concurrency.
int worker_threads();

}  // namespace seqforge
