#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "support/oracles.hpp"
#include "tbm/errors.hpp"
#include "tbm/preprocess.hpp"
#include "tbm/word2vec.hpp"

using namespace tbm;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<ExcavationRecord> make_rows(int ring, int count, long t0 = 0,
                                        Phase phase = Phase::Stable) {
  std::vector<ExcavationRecord> rows(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    rows[static_cast<std::size_t>(i)].ring = ring;
    rows[static_cast<std::size_t>(i)].timestamp = t0 + i;
    rows[static_cast<std::size_t>(i)].propulsion_speed = 1.0 + 0.1 * i;
    rows[static_cast<std::size_t>(i)].phase = phase;
  }
  return rows;
}

GeologyRecord make_geology(int ring) {
  GeologyRecord g;
  g.ring = ring;
  g.plasticity = "Soft plastic";
  g.density = "Loose";
  g.ucs = 27.8;
  g.standard_penetration = 9.8;
  return g;
}

std::vector<FusedSample> numbered_samples(std::size_t n) {
  std::vector<FusedSample> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    samples[i].ring = static_cast<int>(i);
    samples[i].target = static_cast<double>(i);
    samples[i].features = {static_cast<double>(i)};
  }
  return samples;
}

}  // namespace

TEST_CASE("word2vec produces one vector per token") {
  TextEmbedding emb = train_word2vec({{"soft", "plastic"}}, 8, 2, 1, 1);
  CHECK(emb.vocab_size() == 2);
  CHECK(emb.vectors.size() == 2 * 8);
  CHECK(emb.dim == 8);
}

TEST_CASE("word2vec separates co-occurring tokens from strangers") {
  std::vector<std::vector<std::string>> corpus;
  const std::vector<std::string> fillers = {"k1", "k2", "k3"};
  const std::vector<std::string> others = {"z1", "z2", "z3"};
  for (int i = 0; i < 30; ++i) {
    corpus.push_back({"soft", "plastic", fillers[static_cast<std::size_t>(i % 3)]});
    corpus.push_back({"rock", others[static_cast<std::size_t>(i % 3)]});
  }
  TextEmbedding emb = train_word2vec(corpus, 8, 2, 50, 7);
  const auto soft = emb.embed("soft");
  const double pair = cosine_similarity(soft, emb.embed("plastic"));
  const double cross = cosine_similarity(soft, emb.embed("rock"));
  CHECK(pair > cross);
}

TEST_CASE("word2vec is deterministic under a fixed seed") {
  const std::vector<std::vector<std::string>> corpus = {{"a", "b", "c"}, {"b", "c", "d"}};
  TextEmbedding a = train_word2vec(corpus, 6, 2, 10, 99);
  TextEmbedding b = train_word2vec(corpus, 6, 2, 10, 99);
  CHECK(a.vectors == b.vectors);
}

TEST_CASE("word2vec rejects an empty corpus") {
  CHECK_THROWS_AS(train_word2vec({}, 8, 2, 1, 1), EmptyCorpus);
  CHECK_THROWS_AS(train_word2vec({{}, {}}, 8, 2, 1, 1), EmptyCorpus);
}

TEST_CASE("embed_category") {
  TextEmbedding emb = train_word2vec({{"soft", "plastic"}}, 4, 2, 5, 3);
  SUBCASE("single in-vocab token returns its exact vector") {
    const auto v = emb.embed("soft");
    const double* expect = emb.vector_of(emb.vocab.at("soft"));
    for (std::size_t i = 0; i < emb.dim; ++i) CHECK(v[i] == expect[i]);
  }
  SUBCASE("fully out-of-vocab text embeds to zeros") {
    for (double v : emb.embed("granite boulder")) CHECK(v == 0.0);
  }
  SUBCASE("two-token text is the elementwise mean") {
    const auto v = emb.embed("soft plastic");
    const double* a = emb.vector_of(emb.vocab.at("soft"));
    const double* b = emb.vector_of(emb.vocab.at("plastic"));
    for (std::size_t i = 0; i < emb.dim; ++i)
      CHECK(v[i] == doctest::Approx(0.5 * (a[i] + b[i])).epsilon(1e-12));
  }
}

TEST_CASE("merge drops the ring tail row") {
  TextEmbedding emb = train_word2vec({{"soft", "plastic", "loose"}}, 4, 2, 1, 3);
  const auto samples = merge_geology_excavation({make_geology(1)}, make_rows(1, 3), emb);
  REQUIRE(samples.size() == 2);
  // target is the next timestep's propulsion speed
  CHECK(samples[0].target == doctest::Approx(1.1));
  CHECK(samples[1].target == doctest::Approx(1.2));
  CHECK(samples[0].features.size() == 8 + 8 + 2 * 4);
}

TEST_CASE("merge fails on a missing geology ring") {
  TextEmbedding emb = train_word2vec({{"soft"}}, 4, 2, 1, 3);
  CHECK_THROWS_AS(merge_geology_excavation({make_geology(1)}, make_rows(2, 3), emb),
                  MissingGeology);
}

TEST_CASE("merge loses exactly one row per ring") {
  TextEmbedding emb = train_word2vec({{"soft"}}, 4, 2, 1, 3);
  std::vector<GeologyRecord> geology;
  std::vector<ExcavationRecord> rows;
  const int rings = 40, per_ring = 10;
  for (int r = 1; r <= rings; ++r) {
    geology.push_back(make_geology(r));
    const auto ring_rows = make_rows(r, per_ring, r * 1000);
    rows.insert(rows.end(), ring_rows.begin(), ring_rows.end());
  }
  // naive join oracle: every row with a same-ring successor yields a sample
  std::size_t expected = 0;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i)
    if (rows[i + 1].ring == rows[i].ring) ++expected;
  CHECK(expected == static_cast<std::size_t>(rings * per_ring - rings));
  CHECK(merge_geology_excavation(geology, rows, emb).size() == expected);
}

TEST_CASE("fill_missing") {
  CHECK(fill_missing({1, kNaN, 3}) == std::vector<double>{1, 2, 3});
  CHECK(fill_missing({kNaN, 5, kNaN}) == std::vector<double>{5, 5, 5});
  const std::vector<double> clean{2, 4, 8};
  CHECK(fill_missing(clean) == clean);
  CHECK_THROWS_AS(fill_missing({kNaN, kNaN}), AllMissing);
}

TEST_CASE("fill_missing is idempotent") {
  const auto once = fill_missing({1, kNaN, kNaN, 7, kNaN});
  CHECK(fill_missing(once) == once);
}

TEST_CASE("remove_discrete_points replaces a spike with the constant") {
  std::vector<double> series(21, 4.0);
  series[10] = 1000.0;
  const auto cleaned = remove_discrete_points(series, 5, 3.0);
  for (double v : cleaned) CHECK(v == doctest::Approx(4.0));
}

TEST_CASE("remove_discrete_points leaves a monotone ramp unchanged") {
  std::vector<double> ramp(40);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.5 * static_cast<double>(i);
  // oracle: no ramp point deviates from its rolling median by more than 3 MAD
  const auto mask = oracle::mad_outlier_mask(ramp, 5, 3.0);
  for (bool flagged : mask) CHECK_FALSE(flagged);
  CHECK(remove_discrete_points(ramp, 5, 3.0) == ramp);
}

TEST_CASE("remove_discrete_points rejects oversized windows") {
  CHECK_THROWS_AS(remove_discrete_points({1, 2, 3}, 5, 3.0), WindowTooLarge);
}

TEST_CASE("zscore_normalize closed form and properties") {
  const auto [normalized, stats] = zscore_normalize({1, 2, 3});
  CHECK(normalized[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(normalized[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normalized[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(stats.mean == doctest::Approx(2.0));
  CHECK(stats.stddev == doctest::Approx(1.0));
  CHECK_THROWS_AS(zscore_normalize({5, 5, 5}), ZeroVariance);
}

TEST_CASE("zscore output has mean 0 and sample std 1; round trip recovers input") {
  std::mt19937_64 rng(17);
  const auto series = oracle::random_vector(257, rng, -40.0, 90.0);
  const auto [normalized, stats] = zscore_normalize(series);
  double mean = 0.0;
  for (double v : normalized) mean += v;
  mean /= static_cast<double>(normalized.size());
  double ss = 0.0;
  for (double v : normalized) ss += (v - mean) * (v - mean);
  const double sample_std = std::sqrt(ss / static_cast<double>(normalized.size() - 1));
  CHECK(std::abs(mean) < 1e-12);
  CHECK(sample_std == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < series.size(); ++i)
    CHECK(normalized[i] * stats.stddev + stats.mean ==
          doctest::Approx(series[i]).epsilon(1e-12));
}

TEST_CASE("minmax_normalize closed forms and round trip") {
  const auto [normalized, stats] = minmax_normalize({2, 4, 6});
  CHECK(normalized == std::vector<double>{0, 0.5, 1});
  CHECK(minmax_normalize({1, 3}).first == std::vector<double>{0, 1});
  CHECK_THROWS_AS(minmax_normalize({7, 7}), ZeroRange);

  std::mt19937_64 rng(19);
  const auto series = oracle::random_vector(100, rng, -5.0, 12.0);
  const auto [norm, st] = minmax_normalize(series);
  for (std::size_t i = 0; i < series.size(); ++i) {
    CHECK(norm[i] >= 0.0);
    CHECK(norm[i] <= 1.0);
    CHECK(norm[i] * (st.max - st.min) + st.min == doctest::Approx(series[i]).epsilon(1e-12));
  }
}

TEST_CASE("boxcox closed forms at forced lambda") {
  CHECK(boxcox_transform({5.0}, 1.0)[0] == doctest::Approx(4.0));
  CHECK(boxcox_transform({std::exp(1.0)}, 0.0)[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(boxcox_transform({1.0, -2.0}, 0.5), NonPositiveValue);
}

TEST_CASE("boxcox lambda 1 is an affine shift") {
  std::mt19937_64 rng(23);
  const auto series = oracle::random_vector(50, rng, 0.5, 9.0);
  const auto shifted = boxcox_transform(series, 1.0);
  for (std::size_t i = 0; i < series.size(); ++i)
    CHECK(shifted[i] == doctest::Approx(series[i] - 1.0).epsilon(1e-12));
}

TEST_CASE("boxcox grid fit lands near zero on a lognormal sample") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> sample(1000);
  for (double& v : sample) v = std::exp(normal(rng));
  const auto [transformed, lambda] = boxcox(sample);
  CHECK(lambda >= -0.25);
  CHECK(lambda <= 0.25);
  CHECK(transformed.size() == sample.size());
  CHECK_THROWS_AS(boxcox({1.0, 0.0}), NonPositiveValue);
}

TEST_CASE("window_smooth") {
  CHECK(window_smooth({0, 0, 3, 0, 0}, 3) == std::vector<double>{0, 1, 1, 1, 0});
  const std::vector<double> constant(9, 2.5);
  CHECK(window_smooth(constant, 5) == constant);
  const std::vector<double> any{4, 7, -1, 0};
  CHECK(window_smooth(any, 1) == any);
  CHECK_THROWS_AS(window_smooth({1, 2}, 3), WindowTooLarge);
}

TEST_CASE("window_smooth with window 1 is idempotent") {
  const std::vector<double> series{3, 1, 4, 1, 5};
  CHECK(window_smooth(window_smooth(series, 1), 1) == series);
}

TEST_CASE("filter_operating_segments") {
  auto rows = make_rows(1, 3);
  CHECK(filter_operating_segments(rows).size() == 3);
  CHECK(filter_operating_segments(make_rows(1, 3, 0, Phase::Rising)).empty());

  std::vector<ExcavationRecord> mixed = make_rows(1, 3);
  mixed[1].phase = Phase::Rising;
  mixed[0].propulsion_speed = 10;
  mixed[2].propulsion_speed = 30;
  const auto kept = filter_operating_segments(mixed);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].propulsion_speed == 10);
  CHECK(kept[1].propulsion_speed == 30);
  // idempotence
  CHECK(filter_operating_segments(kept).size() == 2);
}

TEST_CASE("split sizes follow the 7:2:1 floor rule") {
  SUBCASE("400 samples") {
    const auto s = split_sizes(400);
    CHECK(s.train == 280);
    CHECK(s.valid == 80);
    CHECK(s.test == 40);
  }
  SUBCASE("10 samples") {
    const auto s = split_sizes(10);
    CHECK(s.train == 7);
    CHECK(s.valid == 2);
    CHECK(s.test == 1);
  }
  SUBCASE("103 samples, remainder to train") {
    const auto s = split_sizes(103);
    CHECK(s.train == 73);
    CHECK(s.valid == 20);
    CHECK(s.test == 10);
  }
}

TEST_CASE("split_dataset is chronological and partitions the input") {
  const auto samples = numbered_samples(103);
  const DatasetSplit split = split_dataset(samples, 5);
  CHECK(split.train.size() == 73);
  CHECK(split.valid.size() == 20);
  CHECK(split.test.size() == 10);
  int expected = 0;
  for (const auto& part : {split.train, split.valid, split.test})
    for (const FusedSample& s : part) CHECK(s.ring == expected++);
  CHECK(expected == 103);
  CHECK_THROWS_AS(split_dataset(numbered_samples(9), 0), TooFewSamples);
}
