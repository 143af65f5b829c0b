#pragma once

// Scoring functions for compression trials: byte entropy, compression ratio,
// Levenshtein distance, embedding cosine similarity and the two combined
// effectiveness scores (exact and semantic reconstruction). All functions are
// pure and thread-safe.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semcomp::metrics {

struct ByteDistribution {
  std::array<std::uint64_t, 256> counts{};
  std::uint64_t total = 0;

  std::size_t distinct_symbols() const noexcept;
  double probability(std::uint8_t symbol) const noexcept;
};

struct EntropyScore {
  double raw_bits = 0.0;    // bits per byte
  double normalized = 0.0;  // raw_bits / log2(distinct_symbols), 0 for a single symbol
  std::size_t distinct_symbols = 0;
};

struct CompressionRatio {
  double value = 0.0;  // 1 - compressed/original; negative on expansion
  std::uint64_t original_bytes = 0;
  std::uint64_t compressed_bytes = 0;
};

struct EditDistance {
  std::uint64_t raw = 0;
  double normalized = 0.0;  // raw / max(len_a, len_b), 0 when both empty
};

struct CosineScore {
  double value = 0.0;
  double angle_degrees = 0.0;
};

/// ERE before cohort normalization, with the clamping events that produced it.
struct EreScore {
  double value = 0.0;
  bool cr_clamped = false;
  bool ed_floored = false;
};

struct MetricVector {
  EntropyScore entropy;  // of the compressed bytes
  CompressionRatio cr;
  EditDistance ed;  // original vs decompressed
  CosineScore cs;   // embeddings of original vs decompressed
  double ere_raw = 0.0;
  double sre_raw = 0.0;
};

enum class NormMode { MaxDivide, MinMax };

inline constexpr double kDefaultEpsilon = 1e-3;
inline constexpr double kCrClampDelta = 1e-6;

ByteDistribution byte_distribution(std::span<const std::uint8_t> data);
ByteDistribution byte_distribution(std::string_view data);

EntropyScore shannon_entropy(const ByteDistribution& dist);

CompressionRatio compression_ratio(std::uint64_t original_len, std::uint64_t compressed_len);

/// Levenshtein distance over Unicode code points. Invalid UTF-8 bytes count as
/// one symbol each.
EditDistance edit_distance(std::string_view original, std::string_view reconstructed);

/// Unit-cost Levenshtein over arbitrary code-unit sequences (two-row DP).
std::uint64_t levenshtein(std::u32string_view a, std::u32string_view b);

CosineScore cosine_similarity(std::span<const double> a, std::span<const double> b);
double angle_degrees(double cosine);

EreScore ere_raw(const CompressionRatio& cr, const EditDistance& ed,
                 double epsilon = kDefaultEpsilon);

double sre_raw(const CompressionRatio& cr, const CosineScore& cs) noexcept;

std::vector<double> cohort_normalize(std::span<const double> raws, NormMode mode);

/// Nominal token budget scaled by 1 / (1 - avg_cr), rounded down.
std::uint64_t effective_token_limit(std::uint64_t base_limit, double avg_cr);

struct ScoredTrial {
  MetricVector metrics;
  bool cr_clamped = false;
  bool ed_floored = false;
};

/// Assemble a full vector from trial artifacts. The cosine score comes from
/// the caller because it needs embeddings.
ScoredTrial score_trial(std::string_view original, std::span<const std::uint8_t> compressed,
                        std::string_view decompressed, const CosineScore& cs,
                        double epsilon = kDefaultEpsilon);

}  // namespace semcomp::metrics
