#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ehom {

inline constexpr int kMaxDim = 4;

/// Periodic lattice of n^d cells. Cells are stored row-major with axis 0
/// varying slowest; every coordinate access wraps modulo n.
class Grid {
public:
  Grid() = default;
  Grid(int dim, int n);

  int dim() const noexcept { return dim_; }
  int n() const noexcept { return n_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t stride(int axis) const noexcept { return strides_[axis]; }

  std::size_t index(std::span<const std::int64_t> coords) const;
  void coords(std::size_t index, std::span<std::int64_t> out) const;
  int coord(std::size_t index, int axis) const noexcept {
    return static_cast<int>((index / strides_[axis]) % static_cast<std::size_t>(n_));
  }

  /// Neighbour across the face in direction `dir` (+1 or -1) along `axis`.
  std::size_t neighbor(std::size_t index, int axis, int dir) const noexcept {
    const int c = coord(index, axis);
    const std::size_t s = strides_[axis];
    if (dir > 0) {
      return c == n_ - 1 ? index - static_cast<std::size_t>(n_ - 1) * s : index + s;
    }
    return c == 0 ? index + static_cast<std::size_t>(n_ - 1) * s : index - s;
  }

  std::size_t shift(std::size_t index, std::span<const std::int64_t> offset) const;

  bool operator==(const Grid& other) const noexcept {
    return dim_ == other.dim_ && n_ == other.n_;
  }

private:
  int dim_ = 0;
  int n_ = 0;
  std::size_t size_ = 0;
  std::array<std::size_t, kMaxDim> strides_{};
};

/// Visits every edge (c, c + e_axis) of the periodic grid exactly once, as
/// f(c, up, axis), without integer division.
template <class F> void for_each_edge(const Grid& g, F&& f) {
  const auto n = static_cast<std::size_t>(g.n());
  const std::size_t total = g.size();
  for (int axis = 0; axis < g.dim(); ++axis) {
    const std::size_t s = g.stride(axis);
    const std::size_t block = n * s;
    for (std::size_t base = 0; base < total; base += block) {
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t row = base + k * s;
        const std::size_t up_row = (k + 1 == n) ? base : row + s;
        for (std::size_t lo = 0; lo < s; ++lo) {
          f(row + lo, up_row + lo, axis);
        }
      }
    }
  }
}

/// Ball in physical coordinates on the periodic box of side n*h.
struct Ball {
  std::vector<double> center;
  double radius = 0.0;
};

/// Physical coordinate of the centre of a cell along one axis.
inline double cell_center(const Grid& g, std::size_t index, int axis, double h) {
  return (g.coord(index, axis) + 0.5) * h;
}

/// Minimal-image distance between a cell centre and a physical point.
double periodic_distance(const Grid& g, double h, std::size_t index, std::span<const double> point);

/// Cells whose centres lie strictly inside the ball (minimal-image metric).
std::vector<std::size_t> ball_cells(const Grid& g, double h, const Ball& ball);

/// Centre of the periodic box, i.e. the point (n*h/2, ..., n*h/2).
std::vector<double> box_center(const Grid& g, double h);

} // namespace ehom
