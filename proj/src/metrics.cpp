#include "seqforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "seqforge/errors.hpp"
#include "seqforge/unicode.hpp"

namespace seqforge {

namespace {

// n-grams keyed by their tokens joined with an unprintable separator.
std::map<std::string, std::int64_t> ngram_counts(const TokenSeq& tokens, int n) {
  std::map<std::string, std::int64_t> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      if (j > 0) key += '\x1f';
      key += tokens[i + static_cast<std::size_t>(j)];
    }
    ++counts[key];
  }
  return counts;
}

std::pair<std::int64_t, std::int64_t> clipped_matches(const TokenSeq& candidate,
                                                      const std::vector<TokenSeq>& references, int n) {
  auto cand = ngram_counts(candidate, n);
  std::int64_t total = 0;
  for (const auto& [key, count] : cand) total += count;

  std::map<std::string, std::int64_t> ref_max;
  for (const auto& ref : references)
    for (const auto& [key, count] : ngram_counts(ref, n)) ref_max[key] = std::max(ref_max[key], count);

  std::int64_t matches = 0;
  for (const auto& [key, count] : cand) {
    auto it = ref_max.find(key);
    if (it != ref_max.end()) matches += std::min(count, it->second);
  }
  return {matches, total};
}

std::int64_t effective_reference_length(std::int64_t candidate_length, const std::vector<TokenSeq>& references) {
  std::int64_t best = -1;
  for (const auto& ref : references) {
    const auto len = static_cast<std::int64_t>(ref.size());
    if (best < 0 || std::llabs(len - candidate_length) < std::llabs(best - candidate_length) ||
        (std::llabs(len - candidate_length) == std::llabs(best - candidate_length) && len < best)) {
      best = len;
    }
  }
  return best;
}

// Finishes a report whose match/total/length fields are filled in.
void finalize_bleu(BleuReport& report, int max_n, Smoothing smoothing) {
  report.brevity_penalty =
      (report.candidate_length == 0)
          ? 0.0
          : (report.candidate_length >= report.reference_length
                 ? 1.0
                 : std::exp(1.0 - static_cast<double>(report.reference_length) /
                                      static_cast<double>(report.candidate_length)));
  double log_sum = 0.0;
  int included = 0;
  bool zero_precision = false;
  for (int n = 1; n <= max_n; ++n) {
    auto matches = report.matches[static_cast<std::size_t>(n - 1)];
    auto total = report.totals[static_cast<std::size_t>(n - 1)];
    if (smoothing == Smoothing::kAddK && n > 1 && total > 0) {
      matches += 1;
      total += 1;
    }
    const double p = total > 0 ? static_cast<double>(matches) / static_cast<double>(total) : 0.0;
    report.precisions[static_cast<std::size_t>(n - 1)] = p;
    if (report.totals[static_cast<std::size_t>(n - 1)] == 0) continue;  // no n-grams of this order
    ++included;
    if (p <= 0.0) {
      zero_precision = true;
    } else {
      log_sum += std::log(p);
    }
  }
  if (report.candidate_length == 0 || included == 0 || zero_precision) {
    report.score = 0.0;
  } else {
    report.score = report.brevity_penalty * std::exp(log_sum / included);
  }
}

}  // namespace

std::pair<std::int64_t, std::int64_t> modified_ngram_precision(const TokenSeq& candidate, const TokenSeq& reference,
                                                               int n) {
  if (n < 1) throw ConfigError("n-gram order must be >= 1");
  return clipped_matches(candidate, {reference}, n);
}

BleuReport sentence_bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int max_n,
                         Smoothing smoothing) {
  if (references.empty()) throw std::domain_error("sentence_bleu needs at least one reference");
  if (max_n < 1 || max_n > 4) throw ConfigError("max_n must lie in 1..4");
  BleuReport report;
  report.candidate_length = static_cast<std::int64_t>(candidate.size());
  report.reference_length = effective_reference_length(report.candidate_length, references);
  report.empty_candidate = candidate.empty();
  for (int n = 1; n <= max_n; ++n) {
    auto [matches, total] = clipped_matches(candidate, references, n);
    report.matches[static_cast<std::size_t>(n - 1)] = matches;
    report.totals[static_cast<std::size_t>(n - 1)] = total;
  }
  finalize_bleu(report, max_n, smoothing);
  return report;
}

BleuReport corpus_bleu(const std::vector<TokenSeq>& candidates, const std::vector<std::vector<TokenSeq>>& references,
                       int max_n, Smoothing smoothing) {
  if (candidates.size() != references.size())
    throw ContractError("corpus_bleu got " + std::to_string(candidates.size()) + " candidates vs " +
                        std::to_string(references.size()) + " reference sets");
  if (max_n < 1 || max_n > 4) throw ConfigError("max_n must lie in 1..4");
  BleuReport pooled;
  pooled.sentence_scores.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw std::domain_error("reference set " + std::to_string(i) + " is empty");
    pooled.candidate_length += static_cast<std::int64_t>(candidates[i].size());
    pooled.reference_length +=
        effective_reference_length(static_cast<std::int64_t>(candidates[i].size()), references[i]);
    for (int n = 1; n <= max_n; ++n) {
      auto [matches, total] = clipped_matches(candidates[i], references[i], n);
      pooled.matches[static_cast<std::size_t>(n - 1)] += matches;
      pooled.totals[static_cast<std::size_t>(n - 1)] += total;
    }
    pooled.sentence_scores.push_back(sentence_bleu(candidates[i], references[i], max_n, smoothing).score);
  }
  pooled.empty_candidate = pooled.candidate_length == 0;
  finalize_bleu(pooled, max_n, smoothing);
  return pooled;
}

namespace {

std::map<std::u32string, std::int64_t> char_ngram_counts(const std::vector<char32_t>& cps, int n) {
  std::map<std::u32string, std::int64_t> counts;
  if (static_cast<int>(cps.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= cps.size(); ++i)
    ++counts[std::u32string(cps.begin() + static_cast<std::ptrdiff_t>(i),
                            cps.begin() + static_cast<std::ptrdiff_t>(i + static_cast<std::size_t>(n)))];
  return counts;
}

}  // namespace

double char_fscore(const std::string& candidate, const std::string& reference, double beta) {
  if (reference.empty()) throw std::domain_error("char_fscore needs a non-empty reference");
  const auto cand = uni::decode_utf8(candidate);
  const auto ref = uni::decode_utf8(reference);
  constexpr int kMaxOrder = 6;
  double precision_sum = 0.0, recall_sum = 0.0;
  int included = 0;
  for (int n = 1; n <= kMaxOrder; ++n) {
    auto cand_counts = char_ngram_counts(cand, n);
    auto ref_counts = char_ngram_counts(ref, n);
    std::int64_t cand_total = 0, ref_total = 0, matches = 0;
    for (const auto& [key, count] : cand_counts) cand_total += count;
    for (const auto& [key, count] : ref_counts) ref_total += count;
    if (cand_total == 0 && ref_total == 0) continue;  // both too short for this order
    for (const auto& [key, count] : cand_counts) {
      auto it = ref_counts.find(key);
      if (it != ref_counts.end()) matches += std::min(count, it->second);
    }
    precision_sum += cand_total > 0 ? static_cast<double>(matches) / static_cast<double>(cand_total) : 0.0;
    recall_sum += ref_total > 0 ? static_cast<double>(matches) / static_cast<double>(ref_total) : 0.0;
    ++included;
  }
  if (included == 0) return 0.0;
  const double precision = precision_sum / included;
  const double recall = recall_sum / included;
  const double b2 = beta * beta;
  const double denom = b2 * precision + recall;
  return denom > 0.0 ? (1.0 + b2) * precision * recall / denom : 0.0;
}

double char_fscore(const TokenSeq& candidate, const TokenSeq& reference, double beta) {
  const auto join = [](const TokenSeq& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) out += ' ';
      out += tokens[i];
    }
    return out;
  };
  return char_fscore(join(candidate), join(reference), beta);
}

void write_bleu_report_csv(const BleuReport& report, const std::vector<double>& sentence_chrf,
                           const std::vector<std::int64_t>& candidate_lengths,
                           const std::vector<std::int64_t>& reference_lengths, double corpus_chrf,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write evaluation report: " + path);
  out.precision(17);
  out << "sentence,candidate_length,reference_length,bleu,chrf\n";
  for (std::size_t i = 0; i < report.sentence_scores.size(); ++i) {
    out << i << ',' << (i < candidate_lengths.size() ? candidate_lengths[i] : 0) << ','
        << (i < reference_lengths.size() ? reference_lengths[i] : 0) << ',' << report.sentence_scores[i] << ','
        << (i < sentence_chrf.size() ? sentence_chrf[i] : 0.0) << '\n';
  }
  out << "summary,metric,value\n";
  for (int n = 1; n <= 4; ++n)
    out << "summary,p" << n << ',' << report.precisions[static_cast<std::size_t>(n - 1)] << '\n';
  out << "summary,brevity_penalty," << report.brevity_penalty << '\n';
  out << "summary,bleu," << report.score << '\n';
  out << "summary,chrf," << corpus_chrf << '\n';
  out << "summary,candidate_tokens," << report.candidate_length << '\n';
  out << "summary,reference_tokens," << report.reference_length << '\n';
  if (!out) throw IoError("short write on evaluation report: " + path);
}

void write_score_histogram_csv(const std::vector<double>& sentence_scores, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write histogram file: " + path);
  constexpr int kBuckets = 10;
  std::array<std::int64_t, kBuckets> counts{};
  for (double s : sentence_scores) {
    auto b = static_cast<int>(s * kBuckets);
    b = std::clamp(b, 0, kBuckets - 1);  // score 1.0 lands in the top bucket
    ++counts[static_cast<std::size_t>(b)];
  }
  out << "bucket_start,bucket_end,count\n";
  for (int b = 0; b < kBuckets; ++b)
    out << static_cast<double>(b) / kBuckets << ',' << static_cast<double>(b + 1) / kBuckets << ','
        << counts[static_cast<std::size_t>(b)] << '\n';
  if (!out) throw IoError("short write on histogram file: " + path);
}

}  // namespace seqforge
