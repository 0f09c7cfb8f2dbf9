#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace seqforge {

using TokenId = std::int32_t;

/// Reserved vocabulary slots. Ids 0..3 are fixed across every vocabulary.
struct Specials {
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kSos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::array<std::string_view, 4> kTokens = {"<pad>", "<sos>", "<eos>", "<unk>"};
};

/// Lowercases (Unicode-aware), strips punctuation and ASCII digits, and
/// splits on whitespace. Dot-diacritic sequences are composed first so byte
/// variants of the same grapheme land on one token.
std::vector<std::string> tokenize(std::string_view text);

/// Aligned sentence pairs, already tokenized, in file order.
struct ParallelCorpus {
  using Pair = std::pair<std::vector<std::string>, std::vector<std::string>>;
  std::vector<Pair> pairs;
  std::string provenance;
  std::size_t skipped_lines = 0;   // lines without a tab separator
  std::size_t filtered_pairs = 0;  // pairs with an empty side after tokenization

  std::size_t size() const { return pairs.size(); }
};

/// Reads a tab-separated bilingual file, one pair per line, source first.
/// Blank lines are skipped; tabless lines are counted as diagnostics.
ParallelCorpus load_corpus(const std::string& path);

enum class Side { kSource, kTarget };

/// Bijective token<->id map with the four reserved specials at ids 0..3.
class Vocabulary {
 public:
  Vocabulary();

  /// Appends a token with the next dense id. Rejects duplicates and the
  /// special token spellings.
  TokenId add(const std::string& token);

  TokenId id(const std::string& token) const;  // <unk> when absent
  bool contains(const std::string& token) const;
  const std::string& token(TokenId id) const;  // throws out_of_range
  TokenId size() const { return static_cast<TokenId>(id_to_token_.size()); }

  /// Text dump: one token per line, line number = id, specials first.
  std::string dump() const;
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
  static Vocabulary from_dump(std::string_view text);

 private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Collects tokens of one corpus side with frequency >= min_count, ordered
/// by descending frequency with first-occurrence order breaking ties.
Vocabulary build_vocab(const ParallelCorpus& corpus, Side side, int min_count);

/// <sos> + ids + <eos>, right-padded with <pad> to exactly max_len. Unknown
/// tokens map to <unk>; over-long inputs are truncated to keep the <eos>.
std::vector<TokenId> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, int max_len);

/// Inverse of encode up to vocabulary coverage: drops specials, maps ids back.
std::vector<std::string> decode_tokens(const std::vector<TokenId>& ids, const Vocabulary& vocab);

struct LengthStats {
  struct SideStats {
    std::size_t sentences = 0;
    std::size_t total_tokens = 0;
    int min = 0;
    int max = 0;
    double mean = 0.0;
    int p25 = 0, p50 = 0, p75 = 0, p90 = 0, p99 = 0;
  };
  struct Bucket {
    int start = 0;  // inclusive
    int end = 0;    // exclusive
    std::size_t count_source = 0;
    std::size_t count_target = 0;
  };
  SideStats source;
  SideStats target;
  std::vector<Bucket> buckets;
  int bucket_width = 5;
};

/// Per-side token-length distributions. Throws domain_error on an empty corpus.
LengthStats corpus_stats(const ParallelCorpus& corpus, int bucket_width = 5);

/// CSV columns: bucket_start,bucket_end,count_source,count_target.
void write_stats_csv(const LengthStats& stats, const std::string& path);

/// Deterministic seeded shuffle split. test_size_override, when nonzero,
/// fixes the test set to that many pairs before the val/train split.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};
SplitIndices split_corpus(std::size_t pair_count, std::uint64_t seed, double val_fraction = 0.1,
                          double test_fraction = 0.1, std::size_t test_size_override = 0);

}  // namespace seqforge
