#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "seqforge/metrics.hpp"
#include "seqforge/rng.hpp"

using namespace seqforge;

namespace {

TokenSeq words(std::initializer_list<const char*> list) {
  TokenSeq out;
  for (const char* w : list) out.emplace_back(w);
  return out;
}

TokenSeq random_sentence(Rng& rng, int min_len, int max_len, int alphabet) {
  TokenSeq out;
  const int n = min_len + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_len - min_len + 1)));
  for (int i = 0; i < n; ++i) out.push_back("w" + std::to_string(rng.uniform_int(static_cast<std::uint64_t>(alphabet))));
  return out;
}

}  // namespace

TEST_CASE("modified n-gram precision clips against the reference") {
  SUBCASE("identical sentences match fully for every order") {
    const auto s = words({"the", "quick", "brown", "fox"});
    for (int n = 1; n <= 4; ++n) {
      auto [matches, total] = modified_ngram_precision(s, s, n);
      CHECK(matches == total);
      CHECK(total == static_cast<std::int64_t>(s.size()) - n + 1);
    }
  }
  SUBCASE("disjoint vocabularies match nothing") {
    auto [matches, total] = modified_ngram_precision(words({"a", "b"}), words({"c", "d"}), 1);
    CHECK(matches == 0);
    CHECK(total == 2);
  }
  SUBCASE("the canonical clipping example: the the the vs the cat") {
    auto [matches, total] = modified_ngram_precision(words({"the", "the", "the"}), words({"the", "cat"}), 1);
    CHECK(matches == 1);
    CHECK(total == 3);
  }
}

TEST_CASE("sentence BLEU closed forms") {
  SUBCASE("perfect match scores exactly one") {
    const auto s = words({"ọkụ", "kalifornia", "na", "abụọ"});
    auto r = sentence_bleu(s, {s});
    CHECK(r.score == 1.0);
    CHECK(r.brevity_penalty == 1.0);
  }
  SUBCASE("no unigram overlap scores zero") {
    auto r = sentence_bleu(words({"a", "b"}), {words({"c", "d"})});
    CHECK(r.score == 0.0);
  }
  SUBCASE("brevity penalty on a half-length candidate") {
    // Candidate matches a reference prefix exactly; precisions are all one,
    // so the score is the bare brevity penalty e^(1 - 4/2).
    auto r = sentence_bleu(words({"a", "b"}), {words({"a", "b", "c", "d"})});
    CHECK(r.brevity_penalty == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(r.score == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  }
  SUBCASE("empty candidate scores zero with the flag set, no throw") {
    auto r = sentence_bleu({}, {words({"a"})});
    CHECK(r.score == 0.0);
    CHECK(r.empty_candidate);
  }
  SUBCASE("empty reference set is a domain error") {
    CHECK_THROWS_AS(sentence_bleu(words({"a"}), {}), std::domain_error);
  }
}

TEST_CASE("corpus BLEU pools counts rather than averaging sentences") {
  SUBCASE("all pairs identical -> 1.0") {
    std::vector<TokenSeq> cands = {words({"a", "b"}), words({"c", "d", "e"})};
    std::vector<std::vector<TokenSeq>> refs = {{cands[0]}, {cands[1]}};
    CHECK(corpus_bleu(cands, refs).score == 1.0);
  }
  SUBCASE("singleton corpus equals sentence BLEU") {
    const auto cand = words({"a", "b", "x", "d"});
    const auto ref = words({"a", "b", "c", "d"});
    CHECK(corpus_bleu({cand}, {{ref}}).score == doctest::Approx(sentence_bleu(cand, {ref}).score).epsilon(1e-15));
  }
  SUBCASE("length mismatch is a contract error") {
    CHECK_THROWS_AS(corpus_bleu({words({"a"})}, {}), ContractError);
  }
  SUBCASE("pooling differs from sentence averaging") {
    std::vector<TokenSeq> cands = {words({"a", "b", "c", "d"}), words({"x", "y", "z", "w"})};
    std::vector<std::vector<TokenSeq>> refs = {{cands[0]}, {words({"x", "q", "r", "s"})}};
    auto pooled = corpus_bleu(cands, refs);
    const double avg = (pooled.sentence_scores[0] + pooled.sentence_scores[1]) / 2;
    CHECK(pooled.score != doctest::Approx(avg).epsilon(1e-6));
  }
}

TEST_CASE("corpus BLEU and chrF agree exactly with the brute-force oracles") {
  Rng rng(99);
  std::vector<TokenSeq> cands;
  std::vector<std::vector<TokenSeq>> refs;
  std::vector<TokenSeq> flat_refs;
  for (int i = 0; i < 50; ++i) {
    // Small alphabet so higher-order n-grams overlap often.
    auto ref = random_sentence(rng, 1, 12, 6);
    auto cand = random_sentence(rng, 1, 12, 6);
    if (i % 3 == 0) cand = ref;  // include exact pairs
    if (i % 5 == 0 && cand.size() > 2) cand.resize(cand.size() - 2);
    cands.push_back(cand);
    refs.push_back({ref});
    flat_refs.push_back(ref);
  }
  auto report = corpus_bleu(cands, refs);
  const double oracle = testing::corpus_bleu_oracle(cands, flat_refs);
  CHECK(report.score == doctest::Approx(oracle).epsilon(1e-15));

  for (std::size_t i = 0; i < cands.size(); ++i) {
    std::string cand_text, ref_text;
    for (std::size_t k = 0; k < cands[i].size(); ++k) cand_text += (k ? " " : "") + cands[i][k];
    for (std::size_t k = 0; k < flat_refs[i].size(); ++k) ref_text += (k ? " " : "") + flat_refs[i][k];
    if (ref_text.empty()) continue;
    CHECK(char_fscore(cand_text, ref_text, 2.0) ==
          doctest::Approx(testing::chrf_oracle(cand_text, ref_text, 2.0)).epsilon(1e-14));
  }
}

TEST_CASE("chrF closed forms and oracle value") {
  CHECK(char_fscore(std::string("ụtụtụ ọma"), std::string("ụtụtụ ọma")) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(char_fscore(std::string("abc"), std::string("xyz")) == 0.0);
  CHECK(char_fscore(std::string("abc"), std::string("abd"), 2.0) ==
        doctest::Approx(testing::chrf_oracle("abc", "abd", 2.0)).epsilon(1e-15));
  CHECK(char_fscore(words({"a", "b"}), words({"a", "b"})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(char_fscore(std::string("a"), std::string("")), std::domain_error);
}

TEST_CASE("BLEU invariance properties") {
  Rng rng(123);
  SUBCASE("bijective token renaming leaves the score unchanged") {
    for (int trial = 0; trial < 10; ++trial) {
      auto cand = random_sentence(rng, 2, 10, 5);
      auto ref = random_sentence(rng, 2, 10, 5);
      const auto rename = [](const TokenSeq& s) {
        TokenSeq out;
        for (const auto& t : s) out.push_back("renamed_" + t + "_x");
        return out;
      };
      CHECK(sentence_bleu(cand, {ref}).score ==
            doctest::Approx(sentence_bleu(rename(cand), {rename(ref)}).score).epsilon(1e-15));
    }
  }
  SUBCASE("replicating the corpus k times preserves pooled BLEU") {
    std::vector<TokenSeq> cands;
    std::vector<std::vector<TokenSeq>> refs;
    for (int i = 0; i < 8; ++i) {
      cands.push_back(random_sentence(rng, 2, 9, 5));
      refs.push_back({random_sentence(rng, 2, 9, 5)});
    }
    const double base = corpus_bleu(cands, refs).score;
    std::vector<TokenSeq> cands3;
    std::vector<std::vector<TokenSeq>> refs3;
    for (int k = 0; k < 3; ++k) {
      cands3.insert(cands3.end(), cands.begin(), cands.end());
      refs3.insert(refs3.end(), refs.begin(), refs.end());
    }
    CHECK(corpus_bleu(cands3, refs3).score == doctest::Approx(base).epsilon(1e-14));
  }
  SUBCASE("swapping a matching token for an out-of-reference one never raises p1") {
    for (int trial = 0; trial < 20; ++trial) {
      auto ref = random_sentence(rng, 3, 10, 4);
      auto cand = ref;
      const auto before = modified_ngram_precision(cand, ref, 1);
      cand[rng.uniform_int(cand.size())] = "definitely_not_in_reference";
      const auto after = modified_ngram_precision(cand, ref, 1);
      CHECK(after.first <= before.first);
      CHECK(after.second == before.second);
    }
  }
  SUBCASE("scores stay inside [0,1]") {
    for (int trial = 0; trial < 30; ++trial) {
      auto cand = random_sentence(rng, 1, 12, 4);
      auto ref = random_sentence(rng, 1, 12, 4);
      const double s = sentence_bleu(cand, {ref}, 4, trial % 2 ? Smoothing::kAddK : Smoothing::kNone).score;
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
  }
}

TEST_CASE("add-k smoothing rescues short-sentence zeros") {
  const auto cand = words({"a", "b", "c"});
  const auto ref = words({"a", "x", "c"});
  CHECK(sentence_bleu(cand, {ref}).score == 0.0);  // no bigram match
  CHECK(sentence_bleu(cand, {ref}, 4, Smoothing::kAddK).score > 0.0);
}

TEST_CASE("report and histogram files carry the advertised columns") {
  std::vector<TokenSeq> cands = {words({"a", "b"}), words({"c"})};
  std::vector<std::vector<TokenSeq>> refs = {{words({"a", "b"})}, {words({"d"})}};
  auto report = corpus_bleu(cands, refs);

  auto dir = std::filesystem::temp_directory_path();
  const auto report_path = (dir / "sf_eval.csv").string();
  const auto hist_path = (dir / "sf_hist.csv").string();
  write_bleu_report_csv(report, {1.0, 0.0}, {2, 1}, {2, 1}, 0.5, report_path);
  write_score_histogram_csv(report.sentence_scores, hist_path);

  std::ifstream in(report_path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (const char* needle : {"sentence,candidate_length", "summary,p1,", "summary,p4,", "summary,brevity_penalty,",
                             "summary,bleu,", "summary,chrf,"})
    CHECK(text.find(needle) != std::string::npos);

  std::ifstream hin(hist_path);
  std::string header;
  std::getline(hin, header);
  CHECK(header == "bucket_start,bucket_end,count");
  std::int64_t total = 0;
  std::string line;
  while (std::getline(hin, line)) total += std::stoll(line.substr(line.rfind(',') + 1));
  CHECK(total == 2);
}
