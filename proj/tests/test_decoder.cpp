#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "seqforge/decoder.hpp"

using namespace seqforge;

namespace {

// A decoder whose logits are a hand-chosen function of the previous token
// only: the GRU update gate is saturated open (b_z = 50) and the candidate
// reads the one-hot embedding, so h = tanh(M[:, prev]) and logits = h with an
// identity projection. Column y of `desired_logits` is the logits row emitted
// after consuming token y.
Seq2SeqModel table_model(const MatrixOf<double>& desired_logits) {
  const Index v = desired_logits.rows();
  Architecture arch;
  arch.cell_kind = CellKind::kGru;
  arch.attention_kind = AttentionKind::kNone;
  arch.embed_dim = v;
  arch.hidden_dim = v;
  arch.src_vocab = v;
  arch.tgt_vocab = v;
  arch.max_len = 8;
  Rng rng(0);
  auto model = Seq2SeqModel::init(arch, rng);
  for (auto* p : model.params()) p->value().setZero();
  model.target_embedding.matrix.value() = MatrixOf<double>::Identity(v, v) * 10.0;
  model.decoder_cell.biases[0].value().setConstant(50.0);  // z ~ 1: h = candidate
  model.decoder_cell.input_weights[2].value() = desired_logits.unaryExpr([](double x) { return std::atanh(x); }) / 10.0;
  model.output_projection.value() = MatrixOf<double>::Identity(v, v);
  return model;
}

const std::vector<TokenId> kAnySource = {Specials::kSos, 4, Specials::kEos};

}  // namespace

TEST_CASE("greedy walks the hand-enumerated logits table") {
  // After <sos> prefer a (4); after a prefer b (5); after b prefer <eos>.
  const Index v = 6;
  MatrixOf<double> table = MatrixOf<double>::Constant(v, v, -0.9);
  table(4, Specials::kSos) = 0.9;
  table(5, 4) = 0.9;
  table(Specials::kEos, 5) = 0.9;
  auto model = table_model(table);
  auto t = greedy_translate(kAnySource, model, 8);
  CHECK(t.tokens == std::vector<TokenId>{4, 5});
}

TEST_CASE("a model fixated on <eos> yields the empty translation") {
  const Index v = 6;
  MatrixOf<double> table = MatrixOf<double>::Constant(v, v, -0.9);
  for (Index col = 0; col < v; ++col) table(Specials::kEos, col) = 0.9;
  auto model = table_model(table);
  auto t = greedy_translate(kAnySource, model, 8);
  CHECK(t.tokens.empty());
}

TEST_CASE("greedy never emits <pad>, <sos> or <unk> and respects max_len") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    auto model = testing::random_model(rng, 9, 9);
    auto src = testing::random_source(rng, 9, 1, 5);
    auto t = greedy_translate(src, model, 6);
    CHECK(t.tokens.size() <= 6);
    for (TokenId id : t.tokens) {
      CHECK(id != Specials::kPad);
      CHECK(id != Specials::kSos);
      CHECK(id != Specials::kEos);
      CHECK(id != Specials::kUnk);
    }
  }
}

TEST_CASE("greedy config errors") {
  Rng rng(1);
  auto model = testing::random_model(rng, 6, 6);
  CHECK_THROWS_AS(greedy_translate(kAnySource, model, 0), ConfigError);
  CHECK_THROWS_AS(beam_translate(kAnySource, model, 0, 4), ConfigError);
}

TEST_CASE("beam width 1 reproduces greedy token for token on 100 random models") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cell = trial % 2 ? CellKind::kGru : CellKind::kLstm;
    const auto att = trial % 3 == 0 ? AttentionKind::kNone : AttentionKind::kDot;
    const Index vocab = 5 + static_cast<Index>(rng.uniform_int(8));
    auto model = testing::random_model(rng, vocab, vocab, cell, att);
    auto src = testing::random_source(rng, vocab, 1, 6);
    const int max_len = 1 + static_cast<int>(rng.uniform_int(7));

    auto g = greedy_translate(src, model, max_len);
    auto b = beam_translate(src, model, 1, max_len, 0.0);
    CHECK(b.tokens == g.tokens);
    CHECK(b.log_prob == doctest::Approx(g.log_prob).epsilon(1e-15));
  }
}

TEST_CASE("beam(2) recovers the high-probability path greedy misses") {
  // Step 1 slightly prefers a over b, but everything after a is poor while b
  // leads straight to a confident <eos>; enumerating the two-step tree by
  // hand makes [b] the best sequence.
  const Index v = 6;
  MatrixOf<double> table = MatrixOf<double>::Constant(v, v, -1.0 + 1e-9);
  table = MatrixOf<double>::Constant(v, v, -0.9);
  table(4, Specials::kSos) = 0.8;   // a
  table(5, Specials::kSos) = 0.75;  // b, just behind
  table(Specials::kEos, 4) = -0.5;  // after a nothing looks good
  table(Specials::kEos, 5) = 0.9;   // after b, eos is confident
  auto model = table_model(table);

  auto greedy = greedy_translate(kAnySource, model, 2);
  CHECK(greedy.tokens == std::vector<TokenId>{4});

  auto beam = beam_search(kAnySource, model, 2, 2, 0.0);
  CHECK(beam.best.tokens == std::vector<TokenId>{5});
  CHECK(beam.best.log_prob > greedy.log_prob);

  auto oracle = testing::exhaustive_best(kAnySource, model, 2);
  CHECK(beam.best.tokens == oracle.tokens);
  CHECK(beam.best.log_prob == doctest::Approx(oracle.log_prob).epsilon(1e-15));
}

TEST_CASE("beam total log-probability dominates greedy at alpha 0") {
  Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const Index vocab = 5 + static_cast<Index>(rng.uniform_int(6));
    auto model = testing::random_model(rng, vocab, vocab);
    auto src = testing::random_source(rng, vocab, 1, 5);
    auto g = greedy_translate(src, model, 5);
    auto b = beam_search(src, model, 4, 5, 0.0);
    CHECK(b.best.log_prob >= g.log_prob - 1e-12);

    // The returned hypothesis maximizes raw log-prob over the retained pool.
    for (const auto& c : b.completed) CHECK(b.best.log_prob >= c.log_prob - 1e-15);
  }
}

TEST_CASE("beam(|V|) equals exhaustive search on tiny vocabularies") {
  Rng rng(31);
  SUBCASE("vocabulary of 4: specials only") {
    for (int trial = 0; trial < 25; ++trial) {
      auto model = testing::random_model(rng, 4, 4);
      auto src = std::vector<TokenId>{Specials::kSos, Specials::kEos};
      auto beam = beam_translate(src, model, 4, 3, 0.0);
      auto oracle = testing::exhaustive_best(src, model, 3);
      CHECK(beam.tokens == oracle.tokens);
      CHECK(beam.log_prob == doctest::Approx(oracle.log_prob).epsilon(1e-15));
    }
  }
  SUBCASE("vocabulary of 6: two content tokens") {
    for (int trial = 0; trial < 25; ++trial) {
      auto model = testing::random_model(rng, 6, 6, trial % 2 ? CellKind::kGru : CellKind::kLstm);
      auto src = testing::random_source(rng, 6, 1, 4);
      auto beam = beam_translate(src, model, 6, 3, 0.0);
      auto oracle = testing::exhaustive_best(src, model, 3);
      CHECK(beam.tokens == oracle.tokens);
      CHECK(beam.log_prob == doctest::Approx(oracle.log_prob).epsilon(1e-15));
    }
  }
}

TEST_CASE("length normalization prefers the longer hypothesis as alpha grows") {
  Rng rng(37);
  // With a strongly negative alpha-free winner being short, a large alpha
  // divides long hypotheses by a bigger factor; check the selection rule by
  // reranking the retained pool directly.
  for (int trial = 0; trial < 20; ++trial) {
    auto model = testing::random_model(rng, 7, 7);
    auto src = testing::random_source(rng, 7, 1, 4);
    for (double alpha : {0.0, 0.7, 1.5}) {
      auto r = beam_search(src, model, 3, 4, alpha);
      double best = -1e300;
      for (const auto& c : r.completed) {
        const double s = c.log_prob / std::pow(std::max<std::size_t>(c.tokens.size(), 1), alpha);
        best = std::max(best, s);
      }
      const double chosen =
          r.best.log_prob / std::pow(std::max<std::size_t>(r.best.tokens.size(), 1), alpha);
      CHECK(chosen == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("translate_file preserves order, determinism and emptiness") {
  Rng rng(41);
  auto model = testing::random_model(rng, 10, 10);
  Vocabulary src_vocab, tgt_vocab;
  for (const char* w : {"alpha", "bravo", "charlie", "delta", "echo", "foxtrot"}) {
    src_vocab.add(w);
    tgt_vocab.add(std::string("t_") + w);
  }
  auto dir = std::filesystem::temp_directory_path();

  SUBCASE("empty input file gives an empty output file") {
    const auto in_path = (dir / "sf_tf_empty.txt").string();
    const auto out_path = (dir / "sf_tf_empty_out.txt").string();
    std::ofstream(in_path).close();
    translate_file(in_path, model, src_vocab, tgt_vocab, {}, out_path);
    std::ifstream check(out_path);
    CHECK(check.peek() == std::ifstream::traits_type::eof());
  }

  SUBCASE("parallel decoding matches single-threaded output byte for byte") {
    const auto in_path = (dir / "sf_tf_lines.txt").string();
    {
      std::ofstream out(in_path);
      for (int i = 0; i < 24; ++i)
        out << "alpha bravo charlie delta" << (i % 3 == 0 ? " echo" : "") << (i % 2 ? " foxtrot" : "") << "\n";
    }
    TranslateOptions seq_opts;
    seq_opts.max_len = 8;
    seq_opts.threads = 1;
    TranslateOptions par_opts = seq_opts;
    par_opts.threads = 4;

    const auto out1 = (dir / "sf_tf_out1.txt").string();
    const auto out2 = (dir / "sf_tf_out2.txt").string();
    const auto out3 = (dir / "sf_tf_out3.txt").string();
    translate_file(in_path, model, src_vocab, tgt_vocab, seq_opts, out1);
    translate_file(in_path, model, src_vocab, tgt_vocab, par_opts, out2);
    translate_file(in_path, model, src_vocab, tgt_vocab, seq_opts, out3);

    const auto slurp = [](const std::string& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    const std::string text1 = slurp(out1);
    CHECK(text1 == slurp(out2));
    CHECK(text1 == slurp(out3));
    CHECK(std::count(text1.begin(), text1.end(), '\n') == 24);
  }

  SUBCASE("alignment dumps appear per sentence when requested") {
    const auto in_path = (dir / "sf_tf_align_in.txt").string();
    {
      std::ofstream out(in_path);
      out << "alpha bravo\ncharlie\n";
    }
    const auto align_dir = dir / "sf_tf_align";
    std::filesystem::create_directory(align_dir);
    TranslateOptions opts;
    opts.max_len = 8;
    opts.alignment_dir = align_dir.string();
    translate_file(in_path, model, src_vocab, tgt_vocab, opts, (dir / "sf_tf_align_out.txt").string());
    CHECK(std::filesystem::exists(align_dir / "align_000000.csv"));
  }
}

TEST_CASE("alignment rows are normalized and zero on padded columns") {
  Rng rng(43);
  auto model = testing::random_model(rng, 8, 8);
  std::vector<TokenId> src = {1, 4, 5, 2, 0, 0};  // two padded positions
  auto t = greedy_translate(src, model, 6);
  for (const auto& row : t.alignment.rows) {
    CHECK(std::abs(row.sum() - 1.0) < 1e-9);
    CHECK(row(4) == 0.0);
    CHECK(row(5) == 0.0);
  }
}
