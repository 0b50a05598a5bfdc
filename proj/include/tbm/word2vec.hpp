#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace tbm {

/// Token vectors learned from the geology text fields.
struct TextEmbedding {
  std::size_t dim = 0;
  std::vector<std::string> tokens;                    // index -> token
  std::unordered_map<std::string, std::size_t> vocab; // token -> index
  std::vector<double> vectors;                        // [vocab_size, dim] row-major

  std::size_t vocab_size() const { return tokens.size(); }
  const double* vector_of(std::size_t index) const { return vectors.data() + index * dim; }

  /// Mean of the per-token vectors of `text`; unknown tokens contribute the
  /// zero vector. Fully out-of-vocabulary text embeds to zeros.
  std::vector<double> embed(const std::string& text) const;
};

/// Lowercased whitespace tokenization.
std::vector<std::string> tokenize(const std::string& text);

/// Skip-gram with negative sampling (5 negatives per positive pair).
TextEmbedding train_word2vec(const std::vector<std::vector<std::string>>& corpus, std::size_t dim,
                             std::size_t window, std::size_t epochs, std::uint64_t seed);

/// Convenience wrapper matching the embedding call in the pipeline.
std::vector<double> embed_category(const std::string& value, const TextEmbedding& embedding);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace tbm
