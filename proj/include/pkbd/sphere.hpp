#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pkbd/errors.hpp"

namespace pkbd {

inline constexpr double kUnitNormTolerance = 1e-10;
inline constexpr double kIngestNormTolerance = 1e-6;
inline constexpr double kZeroNorm = 1e-300;

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

/// Raw inner product without clamping; used on weighted resultants.
inline double inner(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Point on the unit hypersphere S^{d-1}, d >= 2.
class UnitVector {
 public:
  UnitVector() = default;

  /// Takes ownership of coordinates that must already have unit norm.
  explicit UnitVector(std::vector<double> coords) : coords_(std::move(coords)) {
    if (coords_.size() < 2)
      throw Error(ErrorCode::InvalidDimension, "unit vectors need dimension >= 2");
    const double n = norm(coords_);
    if (std::abs(n - 1.0) > kUnitNormTolerance)
      throw Error(ErrorCode::InvalidParameter,
                  "vector norm " + std::to_string(n) + " is not 1; use normalize()");
  }

  UnitVector(std::initializer_list<double> coords) : UnitVector(std::vector<double>(coords)) {}

  /// Canonical basis vector e_axis in dimension d.
  static UnitVector basis(std::size_t d, std::size_t axis) {
    if (axis >= d) throw Error(ErrorCode::InvalidParameter, "basis axis out of range");
    std::vector<double> c(d, 0.0);
    c[axis] = 1.0;
    return UnitVector(std::move(c));
  }

  std::size_t dim() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const noexcept { return coords_; }
  const std::vector<double>& vec() const noexcept { return coords_; }

  friend bool operator==(const UnitVector&, const UnitVector&) = default;

 private:
  std::vector<double> coords_;
};

/// Scales v to unit norm. Throws ZeroVector for an (effectively) all-zero row.
inline UnitVector normalize(std::span<const double> v) {
  if (v.size() < 2) throw Error(ErrorCode::InvalidDimension, "dimension must be >= 2");
  const double n = norm(v);
  if (!(n > kZeroNorm)) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return UnitVector(std::move(out));
}

inline UnitVector normalize(const std::vector<double>& v) {
  return normalize(std::span<const double>(v));
}

/// log of omega_d = 2 pi^{d/2} / Gamma(d/2).
inline double log_surface_area(int d) {
  if (d < 2) throw Error(ErrorCode::InvalidDimension, "surface_area needs d >= 2");
  const double h = 0.5 * d;
  return std::log(2.0) + h * std::log(std::numbers::pi) - std::lgamma(h);
}

inline double surface_area(int d) { return std::exp(log_surface_area(d)); }

/// Dot product clamped to [-1, 1].
inline double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  const double s = inner(x, y);
  return s > 1.0 ? 1.0 : (s < -1.0 ? -1.0 : s);
}

inline double dot(const UnitVector& x, const UnitVector& y) { return dot(x.coords(), y.coords()); }

/// n points on a common sphere, stored row-major, with optional integer labels.
class Dataset {
 public:
  Dataset() = default;

  /// Rows within 1e-6 of unit norm are re-normalized; anything further off is rejected.
  Dataset(std::size_t d, std::vector<double> flat, std::optional<std::vector<int>> labels = {})
      : d_(d), data_(std::move(flat)), labels_(std::move(labels)) {
    if (d_ < 2) throw Error(ErrorCode::InvalidDimension, "dataset dimension must be >= 2");
    if (data_.empty() || data_.size() % d_ != 0)
      throw Error(ErrorCode::DimensionMismatch, "flat data size is not a positive multiple of d");
    if (labels_ && labels_->size() != size())
      throw Error(ErrorCode::LengthMismatch, "labels length differs from number of points");
    for (std::size_t i = 0; i < size(); ++i) {
      std::span<double> row(data_.data() + i * d_, d_);
      const double n = norm(row);
      if (std::abs(n - 1.0) > kIngestNormTolerance)
        throw Error(ErrorCode::InvalidParameter,
                    "row " + std::to_string(i) + " has norm " + std::to_string(n));
      for (double& x : row) x /= n;
    }
  }

  explicit Dataset(const std::vector<UnitVector>& points,
                   std::optional<std::vector<int>> labels = {}) {
    if (points.empty()) throw Error(ErrorCode::InvalidParameter, "dataset needs n >= 1");
    d_ = points.front().dim();
    data_.reserve(points.size() * d_);
    for (const auto& p : points) {
      if (p.dim() != d_) throw Error(ErrorCode::DimensionMismatch, "mixed point dimensions");
      data_.insert(data_.end(), p.vec().begin(), p.vec().end());
    }
    if (labels && labels->size() != points.size())
      throw Error(ErrorCode::LengthMismatch, "labels length differs from number of points");
    labels_ = std::move(labels);
  }

  /// Normalizes arbitrary rows onto the sphere. Zero rows raise ZeroVector naming the row.
  static Dataset from_raw_rows(const std::vector<std::vector<double>>& rows,
                               std::optional<std::vector<int>> labels = {}) {
    if (rows.empty()) throw Error(ErrorCode::InvalidParameter, "dataset needs n >= 1");
    const std::size_t d = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != d)
        throw Error(ErrorCode::DimensionMismatch, "row " + std::to_string(i) + " has wrong length");
      try {
        const UnitVector u = normalize(rows[i]);
        flat.insert(flat.end(), u.vec().begin(), u.vec().end());
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ZeroVector)
          throw Error(ErrorCode::ZeroVector, "row " + std::to_string(i) + " is all zero");
        throw;
      }
    }
    return Dataset(d, std::move(flat), std::move(labels));
  }

  std::size_t size() const noexcept { return d_ == 0 ? 0 : data_.size() / d_; }
  std::size_t dim() const noexcept { return d_; }
  std::span<const double> point(std::size_t i) const { return {data_.data() + i * d_, d_}; }
  UnitVector unit(std::size_t i) const {
    auto p = point(i);
    return UnitVector(std::vector<double>(p.begin(), p.end()));
  }
  const std::vector<double>& flat() const noexcept { return data_; }
  const std::optional<std::vector<int>>& labels() const noexcept { return labels_; }
  void set_labels(std::vector<int> labels) {
    if (labels.size() != size())
      throw Error(ErrorCode::LengthMismatch, "labels length differs from number of points");
    labels_ = std::move(labels);
  }

 private:
  std::size_t d_ = 0;
  std::vector<double> data_;
  std::optional<std::vector<int>> labels_;
};

}  // namespace pkbd
