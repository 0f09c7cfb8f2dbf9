#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace seqforge {

using TokenSeq = std::vector<std::string>;

enum class Smoothing { kNone, kAddK };

/// BLEU decomposition. score = BP * exp(mean of ln p_n) over the orders that
/// have candidate n-grams (effective order); any p_n = 0 without smoothing
/// zeroes the score.
struct BleuReport {
  std::array<std::int64_t, 4> matches{};  // clipped, per order
  std::array<std::int64_t, 4> totals{};   // candidate n-grams, per order
  std::array<double, 4> precisions{};
  double brevity_penalty = 1.0;
  double score = 0.0;
  std::int64_t candidate_length = 0;
  std::int64_t reference_length = 0;  // effective (closest) reference length
  bool empty_candidate = false;
  std::vector<double> sentence_scores;  // populated by corpus_bleu
};

/// Clipped n-gram matches and total candidate n-grams against one reference.
std::pair<std::int64_t, std::int64_t> modified_ngram_precision(const TokenSeq& candidate, const TokenSeq& reference,
                                                               int n);

/// Papineni BLEU-4 for one sentence against one or more references. add_k
/// smoothing adds one to matches and totals for orders above 1.
BleuReport sentence_bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int max_n = 4,
                         Smoothing smoothing = Smoothing::kNone);

/// Corpus BLEU with precisions pooled over all pairs before the geometric
/// mean; per-sentence scores are kept for distribution plots.
BleuReport corpus_bleu(const std::vector<TokenSeq>& candidates, const std::vector<std::vector<TokenSeq>>& references,
                       int max_n = 4, Smoothing smoothing = Smoothing::kNone);

/// Character F-beta over code-point n-grams of orders 1..6 (averaged), with
/// tokens joined by single spaces. beta defaults to 2 per chrF practice.
double char_fscore(const std::string& candidate, const std::string& reference, double beta = 2.0);
double char_fscore(const TokenSeq& candidate, const TokenSeq& reference, double beta = 2.0);

/// Per-sentence rows (index, lengths, bleu, chrf) followed by a summary
/// block with p1..p4, BP, BLEU and chrF.
void write_bleu_report_csv(const BleuReport& report, const std::vector<double>& sentence_chrf,
                           const std::vector<std::int64_t>& candidate_lengths,
                           const std::vector<std::int64_t>& reference_lengths, double corpus_chrf,
                           const std::string& path);

/// Histogram of per-sentence scores in ten [0,1] buckets:
/// bucket_start,bucket_end,count.
void write_score_histogram_csv(const std::vector<double>& sentence_scores, const std::string& path);

}  // namespace seqforge
