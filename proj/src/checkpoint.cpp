#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "seqforge/errors.hpp"
#include "seqforge/trainer.hpp"

namespace seqforge {

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'F', 'G'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_i64(std::string& out, std::int64_t v) { put_u64(out, static_cast<std::uint64_t>(v)); }

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_bytes(std::string& out, const std::string& bytes) {
  put_u64(out, bytes.size());
  out += bytes;
}

void put_matrix(std::string& out, const MatrixOf<double>& m) {
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.size(); ++i) put_f64(out, m.data()[i]);
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return v;
  }

  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::string bytes() {
    const auto n = u64();
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::string raw(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  MatrixOf<double> matrix() {
    const auto rows = static_cast<Index>(u64());
    const auto cols = static_cast<Index>(u64());
    if (rows < 0 || cols < 0 || rows * cols > static_cast<Index>(remaining() / 8))
      throw IntegrityError("checkpoint matrix header exceeds remaining bytes");
    MatrixOf<double> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
    return m;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool exhausted() const { return pos_ == data_.size(); }

 private:
  void need(std::uint64_t n) {
    if (data_.size() - pos_ < n) throw IntegrityError("checkpoint truncated: needed " + std::to_string(n) +
                                                      " bytes, " + std::to_string(data_.size() - pos_) + " left");
  }
  unsigned char byte() { return static_cast<unsigned char>(data_[pos_++]); }

  std::string data_;
  std::size_t pos_ = 0;
};

void put_section(std::string& out, const char tag[4], const std::string& payload) {
  out.append(tag, 4);
  put_u64(out, payload.size());
  out += payload;
}

std::string expect_section(Reader& reader, const char tag[4]) {
  const std::string got = reader.raw(4);
  if (std::memcmp(got.data(), tag, 4) != 0)
    throw IntegrityError("checkpoint section out of order: expected " + std::string(tag, 4) + ", got " + got);
  const auto len = reader.u64();
  return reader.raw(len);
}

}  // namespace

void save_checkpoint(const TrainingRun& run, const std::string& path) {
  std::string blob;
  blob.append(kMagic, 4);
  put_u32(blob, kCheckpointVersion);

  put_section(blob, "CONF", serialize_config(run.config));
  put_section(blob, "SVOC", run.src_vocab.dump());
  put_section(blob, "TVOC", run.tgt_vocab.dump());

  std::string params;
  auto& model = const_cast<Seq2SeqModel&>(run.model);
  auto named = model.named_params();
  put_u64(params, named.size());
  for (auto& [name, tensor] : named) {
    put_bytes(params, name);
    put_matrix(params, tensor->value());
  }
  put_section(blob, "PARM", params);

  std::string adam;
  const auto& states = run.optimizer.states();
  put_u64(adam, states.size());
  for (const auto& st : states) {
    put_i64(adam, st.step_count);
    put_f64(adam, st.beta1);
    put_f64(adam, st.beta2);
    put_f64(adam, st.epsilon);
    put_f64(adam, st.learning_rate);
    put_matrix(adam, st.m);
    put_matrix(adam, st.v);
  }
  put_section(blob, "ADAM", adam);

  std::string hist;
  put_u64(hist, run.history.epochs.size());
  for (const auto& e : run.history.epochs) {
    put_i64(hist, e.epoch);
    put_f64(hist, e.mean_loss);
    hist.push_back(e.has_bleu ? '\1' : '\0');
    put_f64(hist, e.bleu);
    put_f64(hist, e.seconds);
  }
  put_section(blob, "HIST", hist);

  std::string meta;
  put_i64(meta, run.completed_epochs);
  put_section(blob, "META", meta);
  put_section(blob, "DONE", "");

  // Write-temp-then-rename keeps a crash from leaving a half checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint file: " + tmp);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("short write on checkpoint file: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint into place: " + path);
}

TrainingRun load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  Reader reader(buf.str());

  if (reader.raw(4) != std::string(kMagic, 4)) throw IntegrityError("not a checkpoint file: bad magic");
  const auto version = reader.u32();
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint format version " + std::to_string(version) + ", this build reads " +
                       std::to_string(kCheckpointVersion));

  TrainingRun run;
  run.config = parse_config_text(expect_section(reader, "CONF"));
  run.src_vocab = Vocabulary::from_dump(expect_section(reader, "SVOC"));
  run.tgt_vocab = Vocabulary::from_dump(expect_section(reader, "TVOC"));

  Architecture arch;
  arch.cell_kind = run.config.cell();
  arch.attention_kind = run.config.attention();
  arch.embed_dim = run.config.embed_dim;
  arch.hidden_dim = run.config.hidden_dim;
  arch.att_dim = run.config.att_dim;
  arch.src_vocab = run.src_vocab.size();
  arch.tgt_vocab = run.tgt_vocab.size();
  arch.max_len = run.config.max_len;
  arch.project_context = run.config.project_context;
  Rng scratch_rng(0);
  run.model = Seq2SeqModel::init(arch, scratch_rng, run.config.forget_bias_one);

  {
    Reader params(expect_section(reader, "PARM"));
    auto named = run.model.named_params();
    const auto count = params.u64();
    if (count != named.size())
      throw IntegrityError("checkpoint parameter count " + std::to_string(count) + " does not match architecture (" +
                           std::to_string(named.size()) + ")");
    for (auto& [name, tensor] : named) {
      const std::string stored = params.bytes();
      if (stored != name) throw IntegrityError("checkpoint parameter '" + stored + "' where '" + name + "' expected");
      auto m = params.matrix();
      if (m.rows() != tensor->rows() || m.cols() != tensor->cols())
        throw IntegrityError("checkpoint parameter '" + name + "' has shape " +
                             detail::shape_str(m.rows(), m.cols()) + ", architecture expects " + tensor->shape_str());
      tensor->value() = std::move(m);
    }
    if (!params.exhausted()) throw IntegrityError("trailing bytes in checkpoint parameter section");
  }

  run.optimizer = Adam(run.model.params(), run.config.learning_rate);
  {
    Reader adam(expect_section(reader, "ADAM"));
    auto& states = run.optimizer.states();
    const auto count = adam.u64();
    if (count != states.size()) throw IntegrityError("checkpoint optimizer state count mismatch");
    for (auto& st : states) {
      st.step_count = adam.i64();
      st.beta1 = adam.f64();
      st.beta2 = adam.f64();
      st.epsilon = adam.f64();
      st.learning_rate = adam.f64();
      st.m = adam.matrix();
      st.v = adam.matrix();
    }
    if (!adam.exhausted()) throw IntegrityError("trailing bytes in checkpoint optimizer section");
  }

  {
    Reader hist(expect_section(reader, "HIST"));
    const auto count = hist.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
      EpochRecord e;
      e.epoch = static_cast<int>(hist.i64());
      e.mean_loss = hist.f64();
      e.has_bleu = hist.raw(1)[0] != '\0';
      e.bleu = hist.f64();
      e.seconds = hist.f64();
      run.history.epochs.push_back(e);
    }
    if (!hist.exhausted()) throw IntegrityError("trailing bytes in checkpoint history section");
  }

  {
    Reader meta(expect_section(reader, "META"));
    run.completed_epochs = static_cast<int>(meta.i64());
  }
  expect_section(reader, "DONE");
  return run;
}

}  // namespace seqforge
