// Regular spatial hash over flattened point arrays. Buckets are keyed by a
// mix of the integer cell coordinates; queries re-check true distances, so
// key collisions cost time, never correctness.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace perfhom::detail {

inline std::uint64_t cell_key(std::span<const std::int64_t> coords) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::int64_t c : coords) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return h;
}

class SpatialHash {
 public:
  SpatialHash(const std::vector<double>& points, int dim, double cell)
      : points_(&points), dim_(dim), cell_(cell > 0 ? cell : 1.0) {
    const std::size_t n = points.size() / static_cast<std::size_t>(dim);
    coords_.resize(static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < n; ++i) insert(i);
  }

  void insert(std::size_t index) {
    buckets_[key_of(point(index))].push_back(index);
  }

  void erase(std::size_t index) {
    auto it = buckets_.find(key_of(point(index)));
    if (it == buckets_.end()) return;
    auto& v = it->second;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (v[k] == index) {
        v[k] = v.back();
        v.pop_back();
        break;
      }
    }
  }

  // Visits every stored index whose point could lie within `radius` of x
  // (supersets allowed). Callback: void(std::size_t index).
  template <class Fn>
  void for_candidates(std::span<const double> x, double radius, Fn&& fn) const {
    const int reach = std::max(1, static_cast<int>(std::ceil(radius / cell_ - 1e-12)));
    std::vector<std::int64_t> base(dim_), cur(dim_);
    for (int k = 0; k < dim_; ++k)
      base[k] = static_cast<std::int64_t>(std::floor(x[k] / cell_));
    std::vector<int> off(dim_, -reach);
    while (true) {
      for (int k = 0; k < dim_; ++k) cur[k] = base[k] + off[k];
      auto it = buckets_.find(cell_key(cur));
      if (it != buckets_.end())
        for (std::size_t idx : it->second) fn(idx);
      int k = 0;
      for (; k < dim_; ++k) {
        if (++off[k] <= reach) break;
        off[k] = -reach;
      }
      if (k == dim_) break;
    }
  }

 private:
  std::span<const double> point(std::size_t i) const {
    return {points_->data() + i * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }

  std::uint64_t key_of(std::span<const double> x) const {
    std::vector<std::int64_t>& c = coords_;
    for (int k = 0; k < dim_; ++k)
      c[k] = static_cast<std::int64_t>(std::floor(x[k] / cell_));
    return cell_key(c);
  }

  const std::vector<double>* points_;
  int dim_;
  double cell_;
  mutable std::vector<std::int64_t> coords_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

}  // namespace perfhom::detail
