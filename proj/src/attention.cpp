#include "seqforge/attention.hpp"

#include <fstream>

namespace seqforge {

const char* attention_kind_name(AttentionKind k) {
  switch (k) {
    case AttentionKind::kNone: return "none";
    case AttentionKind::kDot: return "dot";
    case AttentionKind::kGeneral: return "general";
    case AttentionKind::kConcat: return "concat";
    case AttentionKind::kScaledDot: return "scaled_dot";
  }
  return "unknown";
}

AttentionKind attention_kind_from_name(const std::string& name) {
  if (name == "none") return AttentionKind::kNone;
  if (name == "dot") return AttentionKind::kDot;
  if (name == "general") return AttentionKind::kGeneral;
  if (name == "concat") return AttentionKind::kConcat;
  if (name == "scaled_dot") return AttentionKind::kScaledDot;
  throw ConfigError("unknown attention kind: " + name);
}

Eigen::MatrixXd AlignmentMap::matrix() const {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

void write_alignment_csv(const AlignmentMap& map, const std::vector<std::string>& source_tokens,
                         const std::vector<std::string>& target_tokens, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write alignment file: " + path);
  out << "target";
  for (const auto& t : source_tokens) out << ',' << t;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < map.rows.size(); ++i) {
    out << (i < target_tokens.size() ? target_tokens[i] : std::string("?"));
    for (Eigen::Index j = 0; j < map.rows[i].size(); ++j) out << ',' << map.rows[i](j);
    out << '\n';
  }
  if (!out) throw IoError("short write on alignment file: " + path);
}

}  // namespace seqforge
