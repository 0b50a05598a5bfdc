#include "tbm/word2vec.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "tbm/errors.hpp"

namespace tbm {

namespace {

constexpr int kNegatives = 5;
constexpr double kLearningRate = 0.025;
constexpr double kUnigramPower = 0.75;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<double> TextEmbedding::embed(const std::string& text) const {
  std::vector<double> out(dim, 0.0);
  const std::vector<std::string> words = tokenize(text);
  if (words.empty()) return out;
  for (const std::string& word : words) {
    auto it = vocab.find(word);
    if (it == vocab.end()) continue;  // unknown token contributes zeros
    const double* v = vector_of(it->second);
    for (std::size_t i = 0; i < dim; ++i) out[i] += v[i];
  }
  for (double& v : out) v /= static_cast<double>(words.size());
  return out;
}

std::vector<double> embed_category(const std::string& value, const TextEmbedding& embedding) {
  return embedding.embed(value);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw LengthMismatch("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

TextEmbedding train_word2vec(const std::vector<std::vector<std::string>>& corpus, std::size_t dim,
                             std::size_t window, std::size_t epochs, std::uint64_t seed) {
  if (dim < 1) throw Error("train_word2vec: dim must be at least 1");
  if (window < 1) throw Error("train_word2vec: window must be at least 1");

  TextEmbedding emb;
  emb.dim = dim;
  std::vector<std::size_t> counts;
  std::vector<std::vector<std::size_t>> sentences;
  sentences.reserve(corpus.size());
  for (const auto& sentence : corpus) {
    std::vector<std::size_t> ids;
    ids.reserve(sentence.size());
    for (const std::string& raw : sentence) {
      for (const std::string& token : tokenize(raw)) {
        auto [it, inserted] = emb.vocab.try_emplace(token, emb.tokens.size());
        if (inserted) {
          emb.tokens.push_back(token);
          counts.push_back(0);
        }
        ++counts[it->second];
        ids.push_back(it->second);
      }
    }
    if (!ids.empty()) sentences.push_back(std::move(ids));
  }
  if (sentences.empty()) throw EmptyCorpus();

  const std::size_t vocab = emb.tokens.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(dim),
                                              0.5 / static_cast<double>(dim));
  emb.vectors.assign(vocab * dim, 0.0);
  for (double& v : emb.vectors) v = init(rng);
  std::vector<double> context(vocab * dim, 0.0);

  // Cumulative unigram table with the classic 0.75 power for negatives.
  std::vector<double> cumulative(vocab);
  double total = 0.0;
  for (std::size_t i = 0; i < vocab; ++i) {
    total += std::pow(static_cast<double>(counts[i]), kUnigramPower);
    cumulative[i] = total;
  }
  std::uniform_real_distribution<double> pick(0.0, total);
  auto sample_negative = [&]() {
    const double r = pick(rng);
    return static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
  };

  std::vector<double> accum(dim);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (const auto& sentence : sentences) {
      for (std::size_t center = 0; center < sentence.size(); ++center) {
        const std::size_t w = sentence[center];
        const std::size_t lo = center >= window ? center - window : 0;
        const std::size_t hi = std::min(sentence.size() - 1, center + window);
        for (std::size_t pos = lo; pos <= hi; ++pos) {
          if (pos == center) continue;
          const std::size_t target = sentence[pos];
          double* wv = emb.vectors.data() + w * dim;
          std::fill(accum.begin(), accum.end(), 0.0);
          for (int neg = 0; neg <= kNegatives; ++neg) {
            std::size_t ctx;
            double label;
            if (neg == 0) {
              ctx = target;
              label = 1.0;
            } else {
              ctx = sample_negative();
              if (ctx == target) continue;
              label = 0.0;
            }
            double* cv = context.data() + ctx * dim;
            double dot = 0.0;
            for (std::size_t i = 0; i < dim; ++i) dot += wv[i] * cv[i];
            const double g = (label - sigmoid(dot)) * kLearningRate;
            for (std::size_t i = 0; i < dim; ++i) {
              accum[i] += g * cv[i];
              cv[i] += g * wv[i];
            }
          }
          for (std::size_t i = 0; i < dim; ++i) wv[i] += accum[i];
        }
      }
    }
  }
  return emb;
}

}  // namespace tbm
