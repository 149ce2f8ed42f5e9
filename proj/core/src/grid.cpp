#include "ehom/grid.hpp"

#include <cmath>
#include <string>

#include "ehom/errors.hpp"

namespace ehom {

Grid::Grid(int dim, int n) : dim_(dim), n_(n) {
  if (dim < 1 || dim > kMaxDim) {
    throw ConfigError("grid dimension must lie in [1, " + std::to_string(kMaxDim) + "], got " +
                      std::to_string(dim));
  }
  if (n < 1) {
    throw ConfigError("cells per side must be positive, got " + std::to_string(n));
  }
  size_ = 1;
  for (int a = dim - 1; a >= 0; --a) {
    strides_[a] = size_;
    size_ *= static_cast<std::size_t>(n);
  }
}

namespace {
std::int64_t wrap(std::int64_t c, int n) {
  const std::int64_t m = c % n;
  return m < 0 ? m + n : m;
}
} // namespace

std::size_t Grid::index(std::span<const std::int64_t> coords) const {
  if (static_cast<int>(coords.size()) != dim_) {
    throw ShapeError("coordinate rank " + std::to_string(coords.size()) + " != grid dimension " +
                     std::to_string(dim_));
  }
  std::size_t idx = 0;
  for (int a = 0; a < dim_; ++a) {
    idx += static_cast<std::size_t>(wrap(coords[a], n_)) * strides_[a];
  }
  return idx;
}

void Grid::coords(std::size_t index, std::span<std::int64_t> out) const {
  for (int a = 0; a < dim_; ++a) {
    out[a] = coord(index, a);
  }
}

std::size_t Grid::shift(std::size_t index, std::span<const std::int64_t> offset) const {
  std::array<std::int64_t, kMaxDim> c{};
  coords(index, std::span(c.data(), dim_));
  for (int a = 0; a < dim_; ++a) {
    c[a] += offset[a];
  }
  return this->index(std::span<const std::int64_t>(c.data(), dim_));
}

double periodic_distance(const Grid& g, double h, std::size_t index, std::span<const double> point) {
  const double side = g.n() * h;
  double r2 = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    double dx = cell_center(g, index, a, h) - point[a];
    dx -= side * std::round(dx / side);
    r2 += dx * dx;
  }
  return std::sqrt(r2);
}

std::vector<std::size_t> ball_cells(const Grid& g, double h, const Ball& ball) {
  if (static_cast<int>(ball.center.size()) != g.dim()) {
    throw ShapeError("ball centre rank does not match grid dimension");
  }
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (periodic_distance(g, h, i, ball.center) < ball.radius) {
      cells.push_back(i);
    }
  }
  return cells;
}

std::vector<double> box_center(const Grid& g, double h) {
  return std::vector<double>(static_cast<std::size_t>(g.dim()), 0.5 * g.n() * h);
}

} // namespace ehom
