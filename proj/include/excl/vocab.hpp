#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "excl/rng.hpp"
#include "excl/tensor.hpp"

namespace excl {

/// Lower-cased whitespace tokens with leading/trailing punctuation stripped.
std::vector<std::string> tokenize(std::string_view text);

/// Token <-> index map with PAD = 0 and UNK = 1 always present.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();
  /// PAD, UNK, then `content` in the given order (duplicates rejected).
  explicit Vocabulary(const std::vector<std::string>& content);

  /// Index of `token`, or kUnk when absent.
  int index(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int index) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<std::string> content_tokens() const;

  std::vector<int> encode(std::string_view text) const;

  /// One content token per line; line n holds index n + 2.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> lookup_;
};

/// Up to max_size content tokens by descending frequency, ties broken
/// lexicographically.
Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t max_size);

/// Reads a GloVe-format text file ("token v1 ... vdim" per line). Rows of
/// tokens found in the file are copied; every other row (PAD and UNK
/// included) is drawn from N(0, 0.1^2) using `rng`, in index order.
Matrix<double> load_glove(const std::filesystem::path& path, const Vocabulary& vocab, int dim, Rng& rng);

/// Random N(0, 0.1^2) table used when no embedding file is configured.
Matrix<double> random_embeddings(const Vocabulary& vocab, int dim, Rng& rng);

}  // namespace excl
