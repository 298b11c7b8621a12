#include "excl/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace excl {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream is{std::string(text)};
  std::string word;
  auto is_punct = [](unsigned char c) { return std::ispunct(c) != 0; };
  while (is >> word) {
    std::size_t b = 0, e = word.size();
    while (b < e && is_punct(static_cast<unsigned char>(word[b]))) ++b;
    while (e > b && is_punct(static_cast<unsigned char>(word[e - 1]))) --e;
    if (b == e) continue;
    std::string tok = word.substr(b, e - b);
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(tok));
  }
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& content) {
  tokens_ = {kPadToken, kUnkToken};
  tokens_.insert(tokens_.end(), content.begin(), content.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!lookup_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw DataError("vocabulary: duplicate token '" + tokens_[i] + "'");
  }
}

int Vocabulary::index(std::string_view token) const {
  auto it = lookup_.find(std::string(token));
  return it == lookup_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return lookup_.count(std::string(token)) > 0; }

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size())
    throw ShapeError("vocabulary: index " + std::to_string(index) + " out of range");
  return tokens_[static_cast<std::size_t>(index)];
}

std::vector<std::string> Vocabulary::content_tokens() const {
  return {tokens_.begin() + 2, tokens_.end()};
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(index(tok));
  return ids;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write vocabulary file " + path.string());
  for (std::size_t i = 2; i < tokens_.size(); ++i) os << tokens_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read vocabulary file " + path.string());
  std::vector<std::string> content;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    content.push_back(line);
  }
  return Vocabulary(content);
}

Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& line : corpus)
    for (auto& tok : tokenize(line)) ++counts[tok];
  counts.erase(Vocabulary::kPadToken);
  counts.erase(Vocabulary::kUnkToken);
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> content;
  for (std::size_t i = 0; i < ranked.size() && i < max_size; ++i) content.push_back(ranked[i].first);
  return Vocabulary(content);
}

Matrix<double> random_embeddings(const Vocabulary& vocab, int dim, Rng& rng) {
  Matrix<double> table(static_cast<Eigen::Index>(vocab.size()), dim);
  for (Eigen::Index r = 0; r < table.rows(); ++r)
    for (Eigen::Index c = 0; c < dim; ++c) table(r, c) = rng.normal(0.0, 0.1);
  return table;
}

Matrix<double> load_glove(const std::filesystem::path& path, const Vocabulary& vocab, int dim, Rng& rng) {
  if (dim <= 0) throw ShapeError("load_glove: dim must be positive");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("load_glove: cannot read " + path.string());

  Matrix<double> table = random_embeddings(vocab, dim, rng);
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> values;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos)
      throw DataError("load_glove: " + path.string() + ":" + std::to_string(lineno) + ": no vector values");
    const std::string token = line.substr(0, sp);
    values.clear();
    const char* p = line.data() + sp + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p >= end) break;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc())
        throw DataError("load_glove: " + path.string() + ":" + std::to_string(lineno) + ": bad number");
      values.push_back(v);
      p = next;
    }
    if (values.size() != static_cast<std::size_t>(dim))
      throw DataError("load_glove: " + path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(dim) + " values, got " + std::to_string(values.size()));
    if (!vocab.contains(token)) continue;
    const int row = vocab.index(token);
    for (int c = 0; c < dim; ++c) table(row, c) = values[static_cast<std::size_t>(c)];
  }
  return table;
}

}  // namespace excl
