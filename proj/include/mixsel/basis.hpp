/**
 * @file basis.hpp
 * @brief Model collections on [0,1): regular histograms, Fourier spaces and
 *        Haar dyadic wavelet spaces.
 *
 * Every model carries an orthonormal basis with a canonical ordering of its
 * labels. The ordering is chosen so that, inside a nested collection, the
 * basis of a smaller model is a prefix of the basis of a larger one:
 *
 *   histogram d : (0,k)                      k = 0..d-1          -> position k
 *   fourier m   : (0,0), (1,1), (2,1), ...   cos/sin harmonics   -> 0, 2k-1, 2k
 *   haar J      : (0,k) k=0,1 then (j,k)     j = 1..J, k < 2^j   -> k, 2^j + k
 *
 * Haar labels (0,k) are the scaling functions sqrt(2) phi(2x - k); labels
 * (j,k), j >= 1 are the wavelets 2^{j/2} psi(2^j x - k).
 */
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mixsel {

enum class CollectionKind { histogram, fourier, haar };

inline std::string_view to_string(CollectionKind kind) {
  switch (kind) {
    case CollectionKind::histogram: return "histogram";
    case CollectionKind::fourier: return "fourier";
    case CollectionKind::haar: return "wavelet-haar";
  }
  return "unknown";
}

inline CollectionKind parse_collection_kind(std::string_view name) {
  if (name == "histogram" || name == "hist") return CollectionKind::histogram;
  if (name == "fourier") return CollectionKind::fourier;
  if (name == "wavelet-haar" || name == "haar" || name == "wavelet")
    return CollectionKind::haar;
  throw std::invalid_argument("unknown collection kind '" + std::string(name) + "'");
}

/// Basis label. Histogram: (0,k). Fourier: (0,0), (1,k) cosine, (2,k) sine.
/// Haar: (j,k).
struct BasisLabel {
  int first = 0;
  int second = 0;
  auto operator<=>(const BasisLabel&) const = default;
};

inline std::string to_string(CollectionKind kind, BasisLabel label) {
  if (kind == CollectionKind::histogram) return std::to_string(label.second);
  if (kind == CollectionKind::fourier && label.first == 0) return "0";
  return "(" + std::to_string(label.first) + "," + std::to_string(label.second) + ")";
}

class Model {
 public:
  /// @p index is the 1-based position in its collection; @p size is d, m or
  /// J_m depending on the kind.
  Model(CollectionKind kind, std::size_t index, int size)
      : kind_(kind), index_(index), size_(size) {
    if (size < 1) throw std::invalid_argument("model size must be >= 1");
    if (kind == CollectionKind::haar && size > 28)
      throw std::invalid_argument("haar resolution level too large");
  }

  CollectionKind kind() const { return kind_; }
  std::size_t index() const { return index_; }
  /// d for histograms, harmonic bound m for Fourier, J_m for Haar.
  int size() const { return size_; }

  std::size_t dimension() const {
    switch (kind_) {
      case CollectionKind::histogram: return static_cast<std::size_t>(size_);
      case CollectionKind::fourier: return 1 + 2 * static_cast<std::size_t>(size_);
      case CollectionKind::haar: return std::size_t{1} << (size_ + 1);
    }
    return 0;
  }

  /// Position of @p label in the canonical ordering, or nullopt if absent.
  std::optional<std::size_t> position(BasisLabel label) const {
    const int a = label.first;
    const int b = label.second;
    switch (kind_) {
      case CollectionKind::histogram:
        if (a == 0 && b >= 0 && b < size_) return static_cast<std::size_t>(b);
        return std::nullopt;
      case CollectionKind::fourier:
        if (a == 0 && b == 0) return 0;
        if ((a == 1 || a == 2) && b >= 1 && b <= size_)
          return static_cast<std::size_t>(2 * b - (a == 1 ? 1 : 0));
        return std::nullopt;
      case CollectionKind::haar:
        if (a == 0 && (b == 0 || b == 1)) return static_cast<std::size_t>(b);
        if (a >= 1 && a <= size_ && b >= 0 && b < (1 << a))
          return (std::size_t{1} << a) + static_cast<std::size_t>(b);
        return std::nullopt;
    }
    return std::nullopt;
  }

  BasisLabel label_at(std::size_t pos) const {
    if (pos >= dimension()) throw std::out_of_range("basis position out of range");
    switch (kind_) {
      case CollectionKind::histogram: return {0, static_cast<int>(pos)};
      case CollectionKind::fourier:
        if (pos == 0) return {0, 0};
        return {pos % 2 == 1 ? 1 : 2, static_cast<int>((pos + 1) / 2)};
      case CollectionKind::haar: {
        if (pos < 2) return {0, static_cast<int>(pos)};
        int j = 0;
        while ((std::size_t{1} << (j + 1)) <= pos) ++j;
        return {j, static_cast<int>(pos - (std::size_t{1} << j))};
      }
    }
    return {};
  }

  std::vector<BasisLabel> labels() const {
    std::vector<BasisLabel> out;
    out.reserve(dimension());
    for (std::size_t i = 0; i < dimension(); ++i) out.push_back(label_at(i));
    return out;
  }

  bool operator==(const Model& o) const {
    return kind_ == o.kind_ && index_ == o.index_ && size_ == o.size_;
  }

 private:
  CollectionKind kind_;
  std::size_t index_;
  int size_;
};

namespace detail {

inline void require_unit_interval(double x) {
  if (!(x >= 0.0 && x < 1.0))
    throw std::invalid_argument("basis evaluation point outside [0,1)");
}

/// Haar scaling/wavelet value at the canonical position, x in [0,1).
inline double haar_value(int j, int k, double x) {
  if (j == 0) {
    const double t = 2.0 * x - k;
    return (t >= 0.0 && t < 1.0) ? std::numbers::sqrt2 : 0.0;
  }
  const double scale = std::ldexp(1.0, j);
  const double t = scale * x - k;  // exact: scale is a power of two
  const double amp = std::sqrt(scale);
  if (t >= 0.0 && t < 0.5) return amp;
  if (t >= 0.5 && t < 1.0) return -amp;
  return 0.0;
}

}  // namespace detail

/// psi at the canonical basis position; x must lie in [0,1).
inline double eval_position(const Model& model, std::size_t pos, double x) {
  detail::require_unit_interval(x);
  const BasisLabel label = model.label_at(pos);
  switch (model.kind()) {
    case CollectionKind::histogram: {
      const double d = model.size();
      const auto bin = std::min(static_cast<int>(std::floor(d * x)), model.size() - 1);
      return bin == label.second ? std::sqrt(d) : 0.0;
    }
    case CollectionKind::fourier: {
      if (label.first == 0) return 1.0;
      const double arg = 2.0 * std::numbers::pi * label.second * x;
      return std::numbers::sqrt2 * (label.first == 1 ? std::cos(arg) : std::sin(arg));
    }
    case CollectionKind::haar:
      return detail::haar_value(label.first, label.second, x);
  }
  return 0.0;
}

/// psi_lambda(x). Throws std::invalid_argument if the label is not in the model.
inline double eval_basis(const Model& model, BasisLabel label, double x) {
  const auto pos = model.position(label);
  if (!pos)
    throw std::invalid_argument("basis label " + to_string(model.kind(), label) +
                                " not in model");
  return eval_position(model, *pos, x);
}

/// Calls fn(position, value) for every basis function that may be nonzero at x.
/// Histograms visit one position, Haar J+2, Fourier all 2m+1.
template <typename Fn>
void for_each_nonzero(const Model& model, double x, Fn&& fn) {
  detail::require_unit_interval(x);
  switch (model.kind()) {
    case CollectionKind::histogram: {
      const int d = model.size();
      auto bin = static_cast<int>(std::floor(d * x));
      if (bin >= d) bin = d - 1;
      fn(static_cast<std::size_t>(bin), std::sqrt(static_cast<double>(d)));
      return;
    }
    case CollectionKind::fourier: {
      fn(std::size_t{0}, 1.0);
      const double theta = 2.0 * std::numbers::pi * x;
      for (int k = 1; k <= model.size(); ++k) {
        const double arg = theta * k;
        fn(static_cast<std::size_t>(2 * k - 1), std::numbers::sqrt2 * std::cos(arg));
        fn(static_cast<std::size_t>(2 * k), std::numbers::sqrt2 * std::sin(arg));
      }
      return;
    }
    case CollectionKind::haar: {
      const int k0 = x < 0.5 ? 0 : 1;
      fn(static_cast<std::size_t>(k0), std::numbers::sqrt2);
      for (int j = 1; j <= model.size(); ++j) {
        const double scale = std::ldexp(1.0, j);
        const double t = scale * x;
        const auto k = static_cast<std::int64_t>(std::floor(t));
        const double frac = t - static_cast<double>(k);
        const double amp = std::sqrt(scale);
        fn((std::size_t{1} << j) + static_cast<std::size_t>(k), frac < 0.5 ? amp : -amp);
      }
      return;
    }
  }
}

/// b_m^2 = sup_x sum_lambda psi_lambda(x)^2.
inline double sup_norm_bound(const Model& model) {
  switch (model.kind()) {
    case CollectionKind::histogram: return static_cast<double>(model.size());
    case CollectionKind::fourier: return 1.0 + 2.0 * model.size();
    case CollectionKind::haar: return std::ldexp(1.0, model.size() + 1);
  }
  return 0.0;
}

struct ModelCollection {
  CollectionKind kind;
  std::vector<Model> models;

  const Model& largest() const { return models.back(); }

  /// True when every model's span is contained in the next one. Label sets
  /// are prefixes for all kinds, but histogram spans nest only when d | d'.
  bool spans_nested() const { return kind != CollectionKind::histogram; }
};

inline constexpr std::size_t kDefaultModelCap = 512;

/// Builds the collection for sample size n. @p max_models caps d_max, m_max
/// and the number of Haar levels.
inline ModelCollection enumerate_models(CollectionKind kind, std::size_t n,
                                        std::size_t max_models = kDefaultModelCap) {
  if (n < 4) throw std::invalid_argument("enumerate_models requires n >= 4");
  if (max_models < 1) throw std::invalid_argument("max_models must be >= 1");
  std::size_t count = 0;
  switch (kind) {
    case CollectionKind::histogram:
    case CollectionKind::fourier:
      count = std::min(n / 2, max_models);
      break;
    case CollectionKind::haar:
      count = std::min(static_cast<std::size_t>(std::bit_width(n) - 1), max_models);
      count = std::min<std::size_t>(count, 28);
      break;
  }
  ModelCollection out{kind, {}};
  out.models.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) out.models.emplace_back(kind, i, static_cast<int>(i));
  return out;
}

inline nlohmann::json to_json(const ModelCollection& collection) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : collection.models) {
    models.push_back({{"m", m.index()}, {"dim", m.dimension()}, {"b2", sup_norm_bound(m)}});
  }
  return {{"kind", std::string(to_string(collection.kind))}, {"models", std::move(models)}};
}

}  // namespace mixsel
