#include "semcomp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "semcomp/error.hpp"
#include "semcomp/utf8.hpp"

namespace semcomp::metrics {

std::size_t ByteDistribution::distinct_symbols() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(counts.begin(), counts.end(), [](std::uint64_t c) { return c > 0; }));
}

double ByteDistribution::probability(std::uint8_t symbol) const noexcept {
  return total == 0 ? 0.0 : static_cast<double>(counts[symbol]) / static_cast<double>(total);
}

ByteDistribution byte_distribution(std::span<const std::uint8_t> data) {
  if (data.empty()) throw Error(ErrorCode::EmptyInput, "byte distribution of empty input");
  ByteDistribution dist;
  for (std::uint8_t b : data) ++dist.counts[b];
  dist.total = data.size();
  return dist;
}

ByteDistribution byte_distribution(std::string_view data) {
  return byte_distribution(
      std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

EntropyScore shannon_entropy(const ByteDistribution& dist) {
  EntropyScore score;
  score.distinct_symbols = dist.distinct_symbols();
  if (score.distinct_symbols <= 1) return score;

  const double n = static_cast<double>(dist.total);
  double h = 0.0;
  for (std::uint64_t c : dist.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  // Rounding can push a uniform distribution a hair past its bound.
  const double bound = std::log2(static_cast<double>(score.distinct_symbols));
  score.raw_bits = std::clamp(h, 0.0, bound);
  score.normalized = score.raw_bits / bound;
  return score;
}

CompressionRatio compression_ratio(std::uint64_t original_len, std::uint64_t compressed_len) {
  if (original_len == 0) throw Error(ErrorCode::EmptyInput, "original length is 0");
  if (compressed_len == 0) throw Error(ErrorCode::EmptyInput, "compressed length is 0");
  return {1.0 - static_cast<double>(compressed_len) / static_cast<double>(original_len),
          original_len, compressed_len};
}

std::uint64_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  // b is the shorter string; rows are indexed by its positions.
  std::vector<std::uint64_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    const char32_t ca = a[i - 1];
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::uint64_t subst = prev[j - 1] + (ca == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

EditDistance edit_distance(std::string_view original, std::string_view reconstructed) {
  const std::u32string a = utf8::decode_lossy(original);
  const std::u32string b = utf8::decode_lossy(reconstructed);
  EditDistance ed;
  ed.raw = levenshtein(a, b);
  const std::size_t longest = std::max(a.size(), b.size());
  ed.normalized = longest == 0 ? 0.0 : static_cast<double>(ed.raw) / static_cast<double>(longest);
  return ed;
}

double angle_degrees(double cosine) {
  return std::acos(std::clamp(cosine, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

CosineScore cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "vector sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  if (a.empty()) throw Error(ErrorCode::DimensionMismatch, "zero-dimensional vectors");

  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw Error(ErrorCode::ZeroVector, "zero-magnitude vector");

  // sqrt(aa * bb) is exact for a == b, so cos(v, v) comes out as exactly 1.
  double denom = std::sqrt(aa * bb);
  if (!std::isfinite(denom) || denom == 0.0) denom = std::sqrt(aa) * std::sqrt(bb);
  const double value = std::clamp(dot / denom, -1.0, 1.0);
  return {value, angle_degrees(value)};
}

EreScore ere_raw(const CompressionRatio& cr, const EditDistance& ed, double epsilon) {
  EreScore out;
  double ratio = cr.value;
  if (!(ratio >= kCrClampDelta && ratio <= 1.0 - kCrClampDelta)) {
    ratio = std::clamp(std::isnan(ratio) ? kCrClampDelta : ratio, kCrClampDelta,
                       1.0 - kCrClampDelta);
    out.cr_clamped = true;
  }
  double distance = ed.normalized;
  if (distance < epsilon) {
    distance = epsilon;
    out.ed_floored = true;
  }
  // ln(ratio) < 0 on (0, 1), so the negation yields a positive score.
  out.value = -1.0 / (std::log(ratio) * distance);
  return out;
}

double sre_raw(const CompressionRatio& cr, const CosineScore& cs) noexcept {
  return cr.value * cs.value;
}

std::vector<double> cohort_normalize(std::span<const double> raws, NormMode mode) {
  if (raws.empty()) throw Error(ErrorCode::EmptyInput, "empty cohort");
  const auto [lo_it, hi_it] = std::minmax_element(raws.begin(), raws.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(raws.size());

  if (mode == NormMode::MaxDivide) {
    if (!(hi > 0.0)) throw Error(ErrorCode::DegenerateCohort, "cohort maximum is not positive");
    std::transform(raws.begin(), raws.end(), out.begin(), [hi](double v) { return v / hi; });
    return out;
  }
  if (hi == lo) {
    std::fill(out.begin(), out.end(), 1.0);
    return out;
  }
  std::transform(raws.begin(), raws.end(), out.begin(),
                 [lo, hi](double v) { return (v - lo) / (hi - lo); });
  return out;
}

std::uint64_t effective_token_limit(std::uint64_t base_limit, double avg_cr) {
  if (!(avg_cr >= 0.0 && avg_cr < 1.0)) {
    throw Error(ErrorCode::InvalidRatio, "average compression ratio must lie in [0, 1)");
  }
  const double scaled = static_cast<double>(base_limit) / (1.0 - avg_cr);
  // Decimal ratios such as 0.8 are inexact in binary; snap results that sit
  // within rounding noise of an integer before flooring.
  const double nearest = std::round(scaled);
  if (std::abs(scaled - nearest) <= 1e-9 * std::max(1.0, scaled)) {
    return static_cast<std::uint64_t>(nearest);
  }
  return static_cast<std::uint64_t>(std::floor(scaled));
}

ScoredTrial score_trial(std::string_view original, std::span<const std::uint8_t> compressed,
                        std::string_view decompressed, const CosineScore& cs, double epsilon) {
  ScoredTrial out;
  MetricVector& m = out.metrics;
  m.entropy = shannon_entropy(byte_distribution(compressed));
  m.cr = compression_ratio(original.size(), compressed.size());
  m.ed = edit_distance(original, decompressed);
  m.cs = cs;
  const EreScore ere = ere_raw(m.cr, m.ed, epsilon);
  m.ere_raw = ere.value;
  m.sre_raw = sre_raw(m.cr, m.cs);
  out.cr_clamped = ere.cr_clamped;
  out.ed_floored = ere.ed_floored;
  return out;
}

}  // namespace semcomp::metrics
