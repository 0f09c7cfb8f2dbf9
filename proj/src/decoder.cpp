#include "seqforge/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "seqforge/errors.hpp"

namespace seqforge {

namespace {

bool emittable(TokenId id) { return id != Specials::kPad && id != Specials::kSos && id != Specials::kUnk; }

double normalized_score(double log_prob, std::size_t length, double alpha) {
  if (alpha == 0.0) return log_prob;
  return log_prob / std::pow(static_cast<double>(std::max<std::size_t>(length, 1)), alpha);
}

}  // namespace

Translation greedy_translate(const std::vector<TokenId>& src_ids, const Seq2SeqModel& model, int max_len) {
  if (max_len < 1) throw ConfigError("max_len must be >= 1, got " + std::to_string(max_len));
  auto enc = encode(src_ids, model);
  auto state = enc.final_state;
  Translation out;
  TokenId prev = Specials::kSos;
  for (int step = 0; step < max_len; ++step) {
    auto res = decode_step(prev, state, enc, model);
    state = res.state;
    const auto lp = log_softmax_value(res.logits.value());
    TokenId best = -1;
    for (TokenId id = 0; id < static_cast<TokenId>(lp.size()); ++id) {
      if (!emittable(id)) continue;
      if (best < 0 || lp(id) > lp(best)) best = id;  // strict > keeps the lowest id on ties
    }
    out.log_prob += lp(best);
    if (best == Specials::kEos) break;
    out.tokens.push_back(best);
    if (res.att_weights.valid()) {
      const auto& w = res.att_weights.value();
      out.alignment.rows.emplace_back(Eigen::Map<const Eigen::VectorXd>(w.data(), w.size()));
    }
    prev = best;
  }
  return out;
}

BeamResult beam_search(const std::vector<TokenId>& src_ids, const Seq2SeqModel& model, int beam_width, int max_len,
                       double alpha) {
  if (beam_width < 1) throw ConfigError("beam_width must be >= 1, got " + std::to_string(beam_width));
  if (max_len < 1) throw ConfigError("max_len must be >= 1, got " + std::to_string(max_len));
  auto enc = encode(src_ids, model);

  std::vector<Hypothesis> live(1);
  live[0].state = enc.final_state;

  std::vector<Translation> completed;
  const auto retire = [&](const Hypothesis& h, double log_prob) {
    Translation t;
    t.tokens = h.tokens;
    t.log_prob = log_prob;
    t.alignment.rows = h.alignment_rows;
    completed.push_back(std::move(t));
  };

  struct Candidate {
    double log_prob;
    std::size_t hyp;
    TokenId token;
  };

  for (int step = 1; step <= max_len && !live.empty(); ++step) {
    std::vector<DecodeStepResult> advanced(live.size());
    std::vector<Eigen::VectorXd> log_probs(live.size());
    for (std::size_t i = 0; i < live.size(); ++i) {
      advanced[i] = decode_step(live[i].last_token, live[i].state, enc, model);
      log_probs[i] = log_softmax_value(advanced[i].logits.value());
    }

    const bool final_step = step == max_len;
    std::vector<Candidate> candidates;
    candidates.reserve(live.size() * static_cast<std::size_t>(model.arch.tgt_vocab));
    for (std::size_t i = 0; i < live.size(); ++i) {
      if (final_step) {
        // Length is capped here, so per hypothesis only its <eos> completion
        // and its best content continuation can still win the pool.
        TokenId best = -1;
        for (TokenId id = 0; id < static_cast<TokenId>(log_probs[i].size()); ++id) {
          if (!emittable(id) || id == Specials::kEos) continue;
          if (best < 0 || log_probs[i](id) > log_probs[i](best)) best = id;
        }
        candidates.push_back({live[i].log_prob + log_probs[i](Specials::kEos), i, Specials::kEos});
        if (best >= 0) candidates.push_back({live[i].log_prob + log_probs[i](best), i, best});
      } else {
        for (TokenId id = 0; id < static_cast<TokenId>(log_probs[i].size()); ++id) {
          if (!emittable(id)) continue;
          candidates.push_back({live[i].log_prob + log_probs[i](id), i, id});
        }
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.token < b.token;
    });
    const std::size_t keep = final_step ? candidates.size() : std::min<std::size_t>(candidates.size(),
                                                                                    static_cast<std::size_t>(beam_width));

    std::vector<Hypothesis> next;
    next.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& cand = candidates[k];
      const auto& parent = live[cand.hyp];
      if (cand.token == Specials::kEos) {
        retire(parent, cand.log_prob);
        continue;
      }
      Hypothesis h;
      h.tokens = parent.tokens;
      h.tokens.push_back(cand.token);
      h.log_prob = cand.log_prob;
      h.state = advanced[cand.hyp].state;
      h.last_token = cand.token;
      h.alignment_rows = parent.alignment_rows;
      if (advanced[cand.hyp].att_weights.valid()) {
        const auto& w = advanced[cand.hyp].att_weights.value();
        h.alignment_rows.emplace_back(Eigen::Map<const Eigen::VectorXd>(w.data(), w.size()));
      }
      if (final_step) {
        h.finished = true;
        Translation t;
        t.tokens = std::move(h.tokens);
        t.log_prob = h.log_prob;
        t.alignment.rows = std::move(h.alignment_rows);
        completed.push_back(std::move(t));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }

  BeamResult result;
  std::size_t best = 0;
  for (std::size_t i = 1; i < completed.size(); ++i) {
    const double si = normalized_score(completed[i].log_prob, completed[i].tokens.size(), alpha);
    const double sb = normalized_score(completed[best].log_prob, completed[best].tokens.size(), alpha);
    if (si > sb) best = i;  // ties keep the earliest retirement
  }
  result.best = completed[best];
  result.completed = std::move(completed);
  return result;
}

Translation beam_translate(const std::vector<TokenId>& src_ids, const Seq2SeqModel& model, int beam_width,
                           int max_len, double alpha) {
  return beam_search(src_ids, model, beam_width, max_len, alpha).best;
}

int worker_threads() {
  if (const char* env = std::getenv("SEQFORGE_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void translate_file(const std::string& input_path, const Seq2SeqModel& model, const Vocabulary& src_vocab,
                    const Vocabulary& tgt_vocab, const TranslateOptions& options, const std::string& output_path) {
  std::ifstream in(input_path, std::ios::binary);
  if (!in) throw IoError("cannot open input file: " + input_path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }

  std::vector<std::string> outputs(lines.size());
  std::vector<AlignmentMap> alignments(lines.size());
  std::vector<std::vector<std::string>> src_token_lists(lines.size());
  std::vector<std::vector<std::string>> tgt_token_lists(lines.size());

  const auto translate_one = [&](std::size_t i) {
    const auto tokens = tokenize(lines[i]);
    if (tokens.empty()) {
      outputs[i].clear();
      return;
    }
    const auto ids = encode(tokens, src_vocab, options.max_len);
    Translation t = options.strategy == TranslateOptions::Strategy::kGreedy
                        ? greedy_translate(ids, model, options.max_len)
                        : beam_translate(ids, model, options.beam_width, options.max_len, options.alpha);
    std::string joined;
    for (std::size_t k = 0; k < t.tokens.size(); ++k) {
      if (k > 0) joined += ' ';
      joined += tgt_vocab.token(t.tokens[k]);
      tgt_token_lists[i].push_back(tgt_vocab.token(t.tokens[k]));
    }
    outputs[i] = std::move(joined);
    alignments[i] = std::move(t.alignment);
    for (TokenId id : ids) src_token_lists[i].push_back(src_vocab.token(id));
  };

  const int thread_cap = std::min(options.threads > 0 ? options.threads : worker_threads(),
                                  static_cast<int>(std::max<std::size_t>(lines.size(), 1)));
  if (thread_cap <= 1) {
    for (std::size_t i = 0; i < lines.size(); ++i) translate_one(i);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(thread_cap));
    for (int w = 0; w < thread_cap; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < lines.size(); i += static_cast<std::size_t>(thread_cap))
          translate_one(i);
      });
    }
    for (auto& t : workers) t.join();
  }

  std::ofstream out(output_path, std::ios::binary);
  if (!out) throw IoError("cannot write output file: " + output_path);
  for (const auto& o : outputs) out << o << '\n';
  if (!out) throw IoError("short write on output file: " + output_path);

  if (!options.alignment_dir.empty()) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (alignments[i].rows.empty()) continue;
      char name[32];
      std::snprintf(name, sizeof(name), "align_%06zu.csv", i);
      write_alignment_csv(alignments[i], src_token_lists[i], tgt_token_lists[i],
                          options.alignment_dir + "/" + name);
    }
  }
}

}  // namespace seqforge
