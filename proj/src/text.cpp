#include "seqforge/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "seqforge/errors.hpp"
#include "seqforge/rng.hpp"
#include "seqforge/unicode.hpp"

namespace seqforge {

std::vector<std::string> tokenize(std::string_view text) {
  auto cps = uni::compose_dots(uni::decode_utf8(text));
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (char32_t cp : cps) {
    if (uni::is_space(cp) || uni::is_punct(cp) || uni::is_ascii_digit(cp)) {
      // Filtered characters act as separators, matching split-on-filter
      // tokenizers, so "end.start" yields two tokens.
      flush();
      continue;
    }
    uni::append_utf8(current, uni::to_lower(cp));
  }
  flush();
  return tokens;
}

ParallelCorpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path);
  ParallelCorpus corpus;
  corpus.provenance = path;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      ++corpus.skipped_lines;
      continue;
    }
    auto src = tokenize(std::string_view(line).substr(0, tab));
    auto tgt = tokenize(std::string_view(line).substr(tab + 1));
    if (src.empty() || tgt.empty()) {
      ++corpus.filtered_pairs;
      continue;
    }
    corpus.pairs.emplace_back(std::move(src), std::move(tgt));
  }
  return corpus;
}

Vocabulary::Vocabulary() {
  for (auto sv : Specials::kTokens) {
    id_to_token_.emplace_back(sv);
    token_to_id_.emplace(std::string(sv), static_cast<TokenId>(id_to_token_.size() - 1));
  }
}

TokenId Vocabulary::add(const std::string& token) {
  if (token.empty()) throw ConfigError("cannot add an empty token");
  auto [it, inserted] = token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
  if (!inserted) throw ConfigError("token already present: " + token);
  id_to_token_.push_back(token);
  return it->second;
}

TokenId Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? Specials::kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return token_to_id_.count(token) != 0; }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::dump() const {
  std::string out;
  for (const auto& t : id_to_token_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary file: " + path);
  out << dump();
  if (!out) throw IoError("short write on vocabulary file: " + path);
}

Vocabulary Vocabulary::from_dump(std::string_view text) {
  Vocabulary vocab;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string token(text.substr(start, end - start));
    if (line_no < Specials::kTokens.size()) {
      if (token != Specials::kTokens[line_no])
        throw IntegrityError("vocabulary dump line " + std::to_string(line_no) + " is not the expected special");
    } else {
      vocab.add(token);
    }
    ++line_no;
    start = end + 1;
  }
  if (line_no < Specials::kTokens.size()) throw IntegrityError("vocabulary dump shorter than the special block");
  return vocab;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_dump(buf.str());
}

Vocabulary build_vocab(const ParallelCorpus& corpus, Side side, int min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1, got " + std::to_string(min_count));
  if (corpus.pairs.empty()) throw std::domain_error("cannot build a vocabulary from an empty corpus");

  struct Entry {
    std::size_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, Entry> freq;
  std::size_t position = 0;
  for (const auto& pair : corpus.pairs) {
    const auto& tokens = side == Side::kSource ? pair.first : pair.second;
    for (const auto& t : tokens) {
      auto [it, inserted] = freq.try_emplace(t);
      if (inserted) it->second.first_seen = position;
      ++it->second.count;
      ++position;
    }
  }

  std::vector<std::pair<std::string, Entry>> entries(freq.begin(), freq.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_seen < b.second.first_seen;
  });

  Vocabulary vocab;
  for (const auto& [token, entry] : entries) {
    if (entry.count < static_cast<std::size_t>(min_count)) break;
    if (vocab.contains(token)) continue;  // a literal special spelling in the corpus
    vocab.add(token);
  }
  return vocab;
}

std::vector<TokenId> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, int max_len) {
  if (max_len < 3) throw ConfigError("max_len must be >= 3, got " + std::to_string(max_len));
  const std::size_t content_budget = static_cast<std::size_t>(max_len) - 2;
  std::vector<TokenId> ids;
  ids.reserve(static_cast<std::size_t>(max_len));
  ids.push_back(Specials::kSos);
  for (std::size_t i = 0; i < tokens.size() && i < content_budget; ++i) ids.push_back(vocab.id(tokens[i]));
  ids.push_back(Specials::kEos);
  ids.resize(static_cast<std::size_t>(max_len), Specials::kPad);
  return ids;
}

std::vector<std::string> decode_tokens(const std::vector<TokenId>& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (TokenId id : ids) {
    if (id == Specials::kPad || id == Specials::kSos || id == Specials::kEos) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

namespace {

LengthStats::SideStats side_stats(std::vector<int>& lengths) {
  LengthStats::SideStats s;
  std::sort(lengths.begin(), lengths.end());
  s.sentences = lengths.size();
  s.min = lengths.front();
  s.max = lengths.back();
  std::size_t total = 0;
  for (int len : lengths) total += static_cast<std::size_t>(len);
  s.total_tokens = total;
  s.mean = static_cast<double>(total) / static_cast<double>(lengths.size());
  const auto nearest_rank = [&](double p) {
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(lengths.size())));
    return lengths[std::min(lengths.size() - 1, rank == 0 ? 0 : rank - 1)];
  };
  s.p25 = nearest_rank(25);
  s.p50 = nearest_rank(50);
  s.p75 = nearest_rank(75);
  s.p90 = nearest_rank(90);
  s.p99 = nearest_rank(99);
  return s;
}

}  // namespace

LengthStats corpus_stats(const ParallelCorpus& corpus, int bucket_width) {
  if (corpus.pairs.empty()) throw std::domain_error("corpus_stats on an empty corpus");
  if (bucket_width < 1) throw ConfigError("bucket_width must be >= 1");

  std::vector<int> src_lengths, tgt_lengths;
  src_lengths.reserve(corpus.size());
  tgt_lengths.reserve(corpus.size());
  for (const auto& pair : corpus.pairs) {
    src_lengths.push_back(static_cast<int>(pair.first.size()));
    tgt_lengths.push_back(static_cast<int>(pair.second.size()));
  }

  LengthStats stats;
  stats.bucket_width = bucket_width;
  const int global_max = std::max(*std::max_element(src_lengths.begin(), src_lengths.end()),
                                  *std::max_element(tgt_lengths.begin(), tgt_lengths.end()));
  const int bucket_count = global_max / bucket_width + 1;
  stats.buckets.resize(static_cast<std::size_t>(bucket_count));
  for (int b = 0; b < bucket_count; ++b) {
    stats.buckets[static_cast<std::size_t>(b)].start = b * bucket_width;
    stats.buckets[static_cast<std::size_t>(b)].end = (b + 1) * bucket_width;
  }
  for (int len : src_lengths) ++stats.buckets[static_cast<std::size_t>(len / bucket_width)].count_source;
  for (int len : tgt_lengths) ++stats.buckets[static_cast<std::size_t>(len / bucket_width)].count_target;

  stats.source = side_stats(src_lengths);
  stats.target = side_stats(tgt_lengths);
  return stats;
}

void write_stats_csv(const LengthStats& stats, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write stats file: " + path);
  out << "bucket_start,bucket_end,count_source,count_target\n";
  for (const auto& b : stats.buckets)
    out << b.start << ',' << b.end << ',' << b.count_source << ',' << b.count_target << '\n';
  if (!out) throw IoError("short write on stats file: " + path);
}

SplitIndices split_corpus(std::size_t pair_count, std::uint64_t seed, double val_fraction, double test_fraction,
                          std::size_t test_size_override) {
  if (val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction >= 1.0)
    throw ConfigError("val/test fractions must be nonnegative and sum below 1");
  std::vector<std::size_t> order(pair_count);
  for (std::size_t i = 0; i < pair_count; ++i) order[i] = i;
  Rng rng(Rng::derive(seed, /*stream=*/0x53504C49ULL, /*index=*/0));
  rng.shuffle(order);

  std::size_t n_test = test_size_override > 0
                           ? std::min(test_size_override, pair_count)
                           : static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(pair_count)));
  std::size_t n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(pair_count)));
  if (n_test + n_val > pair_count) n_val = pair_count - n_test;

  SplitIndices split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                   order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
  return split;
}

}  // namespace seqforge
