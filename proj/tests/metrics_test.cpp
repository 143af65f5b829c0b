#include "semcomp/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "semcomp/error.hpp"

namespace semcomp::metrics {
namespace {

TEST(ByteDistribution, TalliesEveryByte) {
  const auto single = byte_distribution("aaaa");
  EXPECT_EQ(single.total, 4u);
  EXPECT_EQ(single.counts['a'], 4u);
  EXPECT_EQ(single.distinct_symbols(), 1u);

  const auto two = byte_distribution("ab");
  EXPECT_EQ(two.counts['a'], 1u);
  EXPECT_EQ(two.counts['b'], 1u);

  const std::string text = "abca";
  const auto dist = byte_distribution(text);
  const auto expected = oracle::tally(text);
  for (int b = 0; b < 256; ++b) {
    const auto it = expected.find(static_cast<unsigned char>(b));
    EXPECT_EQ(dist.counts[b], it == expected.end() ? 0u : it->second) << "byte " << b;
  }
  EXPECT_EQ(dist.total, 4u);
}

TEST(ByteDistribution, RejectsEmptyInput) {
  try {
    byte_distribution(std::string_view{});
    FAIL() << "expected EmptyInput";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(ShannonEntropy, SpecExamples) {
  const auto degenerate = shannon_entropy(byte_distribution("aaaa"));
  EXPECT_EQ(degenerate.raw_bits, 0.0);
  EXPECT_EQ(degenerate.normalized, 0.0);

  const auto uniform2 = shannon_entropy(byte_distribution("ab"));
  EXPECT_DOUBLE_EQ(uniform2.raw_bits, 1.0);
  EXPECT_DOUBLE_EQ(uniform2.normalized, 1.0);

  const auto abca = shannon_entropy(byte_distribution("abca"));
  EXPECT_NEAR(abca.raw_bits, oracle::entropy_bits("abca"), 1e-15);
  EXPECT_NEAR(abca.raw_bits, 1.5, 1e-15);
  EXPECT_NEAR(abca.normalized, 1.5 / std::log2(3.0), 1e-15);
}

TEST(ShannonEntropy, BoundsAndPermutationInvariance) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::string s = oracle::random_bytes(rng, 1 + rng() % 2048, 1 + rng() % 256);
    const auto e = shannon_entropy(byte_distribution(s));
    ASSERT_GE(e.raw_bits, 0.0);
    if (e.distinct_symbols >= 2) {
      ASSERT_LE(e.raw_bits, std::log2(double(e.distinct_symbols)));
      ASSERT_GE(e.normalized, 0.0);
      ASSERT_LE(e.normalized, 1.0);
    }
    std::string shuffled = s;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ASSERT_EQ(shannon_entropy(byte_distribution(shuffled)).raw_bits, e.raw_bits);
  }
}

TEST(CompressionRatio, SpecExamples) {
  EXPECT_DOUBLE_EQ(compression_ratio(100, 20).value, 0.8);
  EXPECT_EQ(compression_ratio(100, 100).value, 0.0);
  EXPECT_NEAR(compression_ratio(100, 171).value, -0.71, 1e-12);
  EXPECT_LT(compression_ratio(1, 1).value, 1.0);
}

TEST(CompressionRatio, RejectsEmptyOriginal) {
  EXPECT_THROW(compression_ratio(0, 5), Error);
  EXPECT_THROW(compression_ratio(5, 0), Error);
}

TEST(EditDistance, SpecExamples) {
  const auto same = edit_distance("abc", "abc");
  EXPECT_EQ(same.raw, 0u);
  EXPECT_EQ(same.normalized, 0.0);

  const auto from_empty = edit_distance("", "abc");
  EXPECT_EQ(from_empty.raw, 3u);
  EXPECT_EQ(from_empty.normalized, 1.0);

  const auto kitten = edit_distance("kitten", "sitting");
  EXPECT_EQ(kitten.raw, oracle::levenshtein_table("kitten", "sitting"));
  EXPECT_EQ(kitten.raw, 3u);
  EXPECT_NEAR(kitten.normalized, 3.0 / 7.0, 1e-15);

  EXPECT_EQ(edit_distance("", "").normalized, 0.0);
}

TEST(EditDistance, CountsCodePointsNotBytes) {
  // "é" is two UTF-8 bytes but one character.
  EXPECT_EQ(edit_distance("caf\xC3\xA9", "cafe").raw, 1u);
  EXPECT_EQ(edit_distance("\xC3\xA9", "").normalized, 1.0);
}

TEST(EditDistance, OracleAgreementSmallAlphabet) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 3000; ++i) {
    const std::string a = oracle::random_string(rng, rng() % 13, "acgt");
    const std::string b = oracle::random_string(rng, rng() % 13, "acgt");
    ASSERT_EQ(edit_distance(a, b).raw, oracle::levenshtein_table(a, b)) << a << " / " << b;
  }
}

TEST(EditDistance, MetricAxioms) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 1000; ++i) {
    const std::string a = oracle::random_string(rng, rng() % 16, "abcd");
    const std::string b = oracle::random_string(rng, rng() % 16, "abcd");
    const std::string c = oracle::random_string(rng, rng() % 16, "abcd");
    const auto ab = edit_distance(a, b).raw;
    ASSERT_EQ(ab == 0, a == b);
    ASSERT_EQ(ab, edit_distance(b, a).raw);
    ASSERT_LE(edit_distance(a, c).raw, ab + edit_distance(b, c).raw);
    const double n = edit_distance(a, b).normalized;
    ASSERT_GE(n, 0.0);
    ASSERT_LE(n, 1.0);
  }
}

TEST(CosineSimilarity, SpecExamples) {
  const std::vector<double> v{0.3, -1.2, 4.0};
  const auto self = cosine_similarity(v, v);
  EXPECT_EQ(self.value, 1.0);
  EXPECT_EQ(self.angle_degrees, 0.0);

  const std::vector<double> x{1, 0}, y{0, 1};
  const auto ortho = cosine_similarity(x, y);
  EXPECT_EQ(ortho.value, 0.0);
  EXPECT_NEAR(ortho.angle_degrees, 90.0, 1e-12);

  EXPECT_NEAR(angle_degrees(0.923), 22.6, 0.05);
}

TEST(CosineSimilarity, Errors) {
  const std::vector<double> a{1, 2}, b{1, 2, 3}, zero{0, 0};
  try {
    cosine_similarity(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  try {
    cosine_similarity(a, zero);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
  }
}

TEST(CosineSimilarity, SelfAndOppositeOnRandomVectors) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v(1 + rng() % 1536);
    for (auto& x : v) x = normal(rng);
    std::vector<double> neg(v.size());
    std::transform(v.begin(), v.end(), neg.begin(), [](double x) { return -x; });
    ASSERT_NEAR(cosine_similarity(v, v).value, 1.0, 1e-9);
    ASSERT_NEAR(cosine_similarity(v, neg).value, -1.0, 1e-9);
  }
}

TEST(Ere, SpecExamples) {
  const CompressionRatio inv_e{std::exp(-1.0), 100, 37};
  EXPECT_NEAR(ere_raw(inv_e, {10, 1.0}, 1e-3).value, 1.0, 1e-12);

  const CompressionRatio half{0.5, 100, 50};
  const auto lossless = ere_raw(half, {0, 0.0}, 1e-3);
  EXPECT_NEAR(lossless.value, 1442.6950408889634, 1e-9);
  EXPECT_TRUE(lossless.ed_floored);
  EXPECT_NEAR(ere_raw(half, {5, 0.5}, 1e-3).value, 2.8853900817779268, 1e-12);

  const CompressionRatio expanded{-0.71, 100, 171};
  const auto clamped = ere_raw(expanded, {30, 0.3}, 1e-3);
  EXPECT_TRUE(clamped.cr_clamped);
  EXPECT_NEAR(clamped.value, 0.24127471216847327, 1e-12);
  EXPECT_GT(clamped.value, 0.0);
}

TEST(Ere, MonotoneAndPositive) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double cr = 1e-5 + unit(rng) * (1 - 2e-5);
    const double ed1 = 1e-3 + unit(rng) * 0.99;
    const double ed2 = std::min(1.0, ed1 + 1e-3 + unit(rng) * 0.1);
    const CompressionRatio r{cr, 1000, 1};
    const double e1 = ere_raw(r, {1, ed1}).value;
    const double e2 = ere_raw(r, {1, ed2}).value;
    ASSERT_GT(e1, 0.0);
    ASSERT_GT(e1, e2);

    const double cr2 = std::min(1.0 - 2e-6, cr + 1e-4 + unit(rng) * 0.1);
    ASSERT_LT(ere_raw(r, {1, ed1}).value, ere_raw({cr2, 1000, 1}, {1, ed1}).value);
  }
  // Degenerate ratios still produce finite positive scores.
  EXPECT_GT(ere_raw({1.0, 10, 0}, {0, 0.0}).value, 0.0);
  EXPECT_TRUE(std::isfinite(ere_raw({1.0, 10, 0}, {0, 0.0}).value));
  EXPECT_TRUE(ere_raw({1.0, 10, 0}, {0, 0.0}).cr_clamped);
}

TEST(Sre, IsTheProductOfRatioAndCosine) {
  EXPECT_DOUBLE_EQ(sre_raw({0.453, 100, 55}, {1.0, 0.0}), 0.453);
  EXPECT_EQ(sre_raw({0.0, 100, 100}, {0.37, 0.0}), 0.0);
  EXPECT_NEAR(sre_raw({0.772, 1000, 228}, {0.936, 0.0}), 0.7226, 5e-5);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), b = u(rng);
    ASSERT_EQ(sre_raw({a, 1, 1}, {b, 0}), a * b);
  }
}

TEST(CohortNormalize, SpecExamples) {
  EXPECT_EQ(cohort_normalize(std::vector<double>{0.42}, NormMode::MaxDivide),
            std::vector<double>{1.0});
  EXPECT_EQ(cohort_normalize(std::vector<double>{2, 4}, NormMode::MinMax),
            (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(cohort_normalize(std::vector<double>{3, 3}, NormMode::MinMax),
            (std::vector<double>{1.0, 1.0}));

  const std::vector<double> sre{0.7615, 0.4128, 0.2846, 0.7226, 0.7142, 0.453, 0.469};
  const std::vector<double> table{1, 0.542, 0.374, 0.949, 0.938, 0.595, 0.616};
  const auto norm = cohort_normalize(sre, NormMode::MaxDivide);
  for (std::size_t i = 0; i < sre.size(); ++i) EXPECT_NEAR(norm[i], table[i], 0.005) << i;
}

TEST(CohortNormalize, DegenerateCohorts) {
  try {
    cohort_normalize(std::vector<double>{-1.0, 0.0}, NormMode::MaxDivide);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateCohort);
  }
  EXPECT_THROW(cohort_normalize(std::vector<double>{}, NormMode::MinMax), Error);
}

TEST(CohortNormalize, MaxIsOneAndOrderPreserved) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-0.5, 3.0);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> raws(1 + rng() % 10);
    for (auto& r : raws) r = u(rng);
    raws[rng() % raws.size()] = 0.1 + std::abs(u(rng));
    const auto norm = cohort_normalize(raws, NormMode::MaxDivide);
    ASSERT_EQ(*std::max_element(norm.begin(), norm.end()), 1.0);
    ASSERT_EQ(std::max_element(norm.begin(), norm.end()) - norm.begin(),
              std::max_element(raws.begin(), raws.end()) - raws.begin());
    for (std::size_t a = 0; a < raws.size(); ++a)
      for (std::size_t b = 0; b < raws.size(); ++b)
        if (raws[a] < raws[b]) ASSERT_LT(norm[a], norm[b]);
  }
}

TEST(EffectiveTokenLimit, SpecExamples) {
  EXPECT_EQ(effective_token_limit(32000, 0.80), 160000u);
  EXPECT_EQ(effective_token_limit(4096, 0.0), 4096u);
  EXPECT_EQ(effective_token_limit(4096, 0.5), 8192u);
  EXPECT_EQ(effective_token_limit(1000, 1.0 / 3.0), 1500u);
  EXPECT_EQ(effective_token_limit(10, 0.25), 13u);  // 13.33 rounds down
}

TEST(EffectiveTokenLimit, RejectsOutOfRangeRatios) {
  for (double bad : {1.0, 1.5, -0.1}) {
    try {
      effective_token_limit(100, bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidRatio);
    }
  }
}

TEST(ScoreTrial, CombinesAllMetrics) {
  const std::string original = "the quick brown fox";
  const std::string compressed = "qbf";
  const auto scored = score_trial(
      original, std::span(reinterpret_cast<const std::uint8_t*>(compressed.data()), compressed.size()),
      "the quick fox", {0.9, angle_degrees(0.9)});
  const auto& m = scored.metrics;
  EXPECT_NEAR(m.cr.value, 1.0 - 3.0 / 19.0, 1e-15);
  EXPECT_EQ(m.ed.raw, 6u);
  EXPECT_NEAR(m.entropy.raw_bits, std::log2(3.0), 1e-12);
  EXPECT_EQ(m.sre_raw, m.cr.value * 0.9);
  EXPECT_EQ(m.ere_raw, ere_raw(m.cr, m.ed).value);
  EXPECT_FALSE(scored.cr_clamped);
}

}  // namespace
}  // namespace semcomp::metrics
