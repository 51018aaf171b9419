/**
 * @file blocks.hpp
 * @brief Odd-block partition of a sample and the block empirical process.
 *
 * With p blocks of length q, block i (0-based) covers the 1-based indices
 * 2iq+1 .. (2i+1)q. Only these p*q points enter any statistic; the even gaps
 * between them and the n - 2pq trailing points are never read.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsel/basis.hpp"

namespace mixsel {

struct BlockScheme {
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t q = 0;

  /// Points after the last gap that no block uses.
  std::size_t discarded() const { return n - 2 * p * q; }

  /// 0-based offset of block i in the raw sample.
  std::size_t block_start(std::size_t i) const { return 2 * i * q; }

  /// 1-based indices of block i.
  std::vector<std::size_t> block_indices(std::size_t i) const {
    if (i >= p) throw std::out_of_range("block index out of range");
    std::vector<std::size_t> out(q);
    for (std::size_t l = 0; l < q; ++l) out[l] = 2 * i * q + 1 + l;
    return out;
  }

  /// Whether 2pq = n and sqrt(n)(ln n)^2 / 2 <= p <= sqrt(n)(ln n)^2, the
  /// block-count range assumed by the oracle inequalities.
  bool asymptotic_range_ok() const {
    if (n < 2) return false;
    const double ln = std::log(static_cast<double>(n));
    const double upper = std::sqrt(static_cast<double>(n)) * ln * ln;
    const auto pd = static_cast<double>(p);
    return 2 * p * q == n && 0.5 * upper <= pd && pd <= upper;
  }

  nlohmann::json to_json() const {
    return {{"n", n}, {"p", p}, {"q", q}, {"discarded", discarded()},
            {"asymptotic_range_ok", asymptotic_range_ok()}};
  }
};

/// Explicit scheme; requires p >= 2, q >= 1 and 2pq <= n.
inline BlockScheme make_scheme(std::size_t n, std::size_t p, std::size_t q) {
  if (q < 1) throw std::invalid_argument("block length q must be >= 1");
  if (p < 2) throw std::invalid_argument("at least 2 blocks are required");
  if (2 * p * q > n) throw std::invalid_argument("2pq exceeds the sample size");
  return {n, p, q};
}

/// Default block length max(1, floor(sqrt(n) / (2 (ln n)^2))).
inline std::size_t default_block_length(std::size_t n) {
  const double ln = std::log(static_cast<double>(n));
  const double q = std::floor(std::sqrt(static_cast<double>(n)) / (2.0 * ln * ln));
  return q < 1.0 ? 1 : static_cast<std::size_t>(q);
}

inline BlockScheme make_blocks(std::size_t n, std::optional<std::size_t> q_override = std::nullopt) {
  if (n < 8) throw std::invalid_argument("make_blocks requires n >= 8");
  const std::size_t q = q_override.value_or(default_block_length(n));
  if (q < 1) throw std::invalid_argument("block length q must be >= 1");
  if (4 * q > n)
    throw std::invalid_argument("block length " + std::to_string(q) + " leaves fewer than 2 blocks for n = " +
                                std::to_string(n));
  return {n, n / (2 * q), q};
}

class BlockedSample {
 public:
  BlockedSample(std::vector<double> values, BlockScheme scheme)
      : values_(std::move(values)), scheme_(scheme) {
    if (values_.size() != scheme_.n)
      throw std::invalid_argument("sample size does not match the block scheme");
    if (scheme_.p < 1 || scheme_.q < 1 || 2 * scheme_.p * scheme_.q > scheme_.n)
      throw std::invalid_argument("inconsistent block scheme");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const double x = values_[i];
      if (!(x >= 0.0 && x < 1.0))
        throw std::invalid_argument("observation " + std::to_string(i + 1) + " outside [0,1)");
    }
  }

  /// Sample built from its block contents; gaps are filled with copies of the
  /// preceding block and never read.
  static BlockedSample from_blocks(const std::vector<std::vector<double>>& blocks) {
    if (blocks.empty() || blocks.front().empty())
      throw std::invalid_argument("from_blocks needs nonempty blocks");
    const std::size_t q = blocks.front().size();
    std::vector<double> raw;
    raw.reserve(2 * q * blocks.size());
    for (const auto& b : blocks) {
      if (b.size() != q) throw std::invalid_argument("blocks must share one length");
      raw.insert(raw.end(), b.begin(), b.end());
      raw.insert(raw.end(), b.begin(), b.end());
    }
    const std::size_t n = raw.size();
    return BlockedSample(std::move(raw), BlockScheme{n, blocks.size(), q});
  }

  const BlockScheme& scheme() const { return scheme_; }
  std::span<const double> values() const { return values_; }

  std::span<const double> block(std::size_t i) const {
    return std::span<const double>(values_).subspan(scheme_.block_start(i), scheme_.q);
  }

 private:
  std::vector<double> values_;
  BlockScheme scheme_;
};

/// L_q psi_lambda(A_i) for every block i.
inline std::vector<double> block_means(const BlockedSample& sample, const Model& model,
                                       BasisLabel label) {
  const auto pos = model.position(label);
  if (!pos)
    throw std::invalid_argument("basis label " + to_string(model.kind(), label) + " not in model");
  const auto& s = sample.scheme();
  std::vector<double> out(s.p, 0.0);
  for (std::size_t i = 0; i < s.p; ++i) {
    double acc = 0.0;
    for (double x : sample.block(i)) acc += eval_position(model, *pos, x);
    out[i] = acc / static_cast<double>(s.q);
  }
  return out;
}

/// P_A psi_lambda.
inline double block_empirical(const BlockedSample& sample, const Model& model, BasisLabel label) {
  const auto means = block_means(sample, model, label);
  double acc = 0.0;
  for (double v : means) acc += v;
  return acc / static_cast<double>(means.size());
}

/// Dense p x dim row-major table of block means for every basis position.
inline std::vector<double> block_mean_matrix(const BlockedSample& sample, const Model& model) {
  const auto& s = sample.scheme();
  const std::size_t dim = model.dimension();
  std::vector<double> out(s.p * dim, 0.0);
  const double inv_q = 1.0 / static_cast<double>(s.q);
  for (std::size_t i = 0; i < s.p; ++i) {
    double* row = out.data() + i * dim;
    for (double x : sample.block(i))
      for_each_nonzero(model, x, [&](std::size_t pos, double v) { row[pos] += v; });
    for (std::size_t k = 0; k < dim; ++k) row[k] *= inv_q;
  }
  return out;
}

/// Per-coordinate across-block summaries:
///   mean[k]        = P_A psi_k
///   centered_ss[k] = sum_i (L_q psi_k(A_i) - P_A psi_k)^2
struct BlockStatistics {
  std::size_t p = 0;
  std::vector<double> mean;
  std::vector<double> centered_ss;
};

/// Sparse two-pass accumulation; memory O(dim), time O(pq * nonzeros per point).
inline BlockStatistics block_statistics(const BlockedSample& sample, const Model& model) {
  const auto& s = sample.scheme();
  const std::size_t dim = model.dimension();
  const double inv_q = 1.0 / static_cast<double>(s.q);
  const auto inv_p = 1.0 / static_cast<double>(s.p);

  std::vector<double> scratch(dim, 0.0);
  std::vector<char> touched(dim, 0);
  std::vector<std::size_t> touched_list;
  touched_list.reserve(dim);

  auto accumulate_block = [&](std::size_t i) {
    for (double x : sample.block(i)) {
      for_each_nonzero(model, x, [&](std::size_t pos, double v) {
        if (!touched[pos]) {
          touched[pos] = 1;
          touched_list.push_back(pos);
        }
        scratch[pos] += v;
      });
    }
  };
  auto reset = [&] {
    for (std::size_t pos : touched_list) {
      scratch[pos] = 0.0;
      touched[pos] = 0;
    }
    touched_list.clear();
  };

  BlockStatistics out{s.p, std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (std::size_t i = 0; i < s.p; ++i) {
    accumulate_block(i);
    for (std::size_t pos : touched_list) out.mean[pos] += scratch[pos] * inv_q;
    reset();
  }
  for (double& m : out.mean) m *= inv_p;

  std::vector<std::size_t> hits(dim, 0);
  for (std::size_t i = 0; i < s.p; ++i) {
    accumulate_block(i);
    for (std::size_t pos : touched_list) {
      const double dev = scratch[pos] * inv_q - out.mean[pos];
      out.centered_ss[pos] += dev * dev;
      ++hits[pos];
    }
    reset();
  }
  for (std::size_t k = 0; k < dim; ++k)
    out.centered_ss[k] += static_cast<double>(s.p - hits[k]) * out.mean[k] * out.mean[k];
  return out;
}

}  // namespace mixsel
