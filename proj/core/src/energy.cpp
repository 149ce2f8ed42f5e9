#include "ehom/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ehom/errors.hpp"
#include "ehom/moser.hpp"

namespace ehom {

namespace {

void check_values(const DirichletForm& form, const CellFunction& u) {
  if (!u.values.empty() && u.values.size() != form.num_cells()) {
    throw ShapeError("cell function size does not match the grid");
  }
  if (!u.slope.empty() && static_cast<int>(u.slope.size()) != form.dim()) {
    throw ShapeError("affine slope rank does not match the grid dimension");
  }
}

double diff(const DirichletForm& form, const CellFunction& u, std::size_t c, std::size_t up, int axis) {
  double v = u.values.empty() ? 0.0 : u.values[up] - u.values[c];
  if (!u.slope.empty()) {
    v += form.spacing() * u.slope[axis];
  }
  return v;
}

} // namespace

DirichletForm::DirichletForm(const CoefficientField& field)
    : grid_(field.grid()), spacing_(field.spacing()), degenerate_(field.degenerate()),
      field_hash_(field.hash()) {
  const int d = grid_.dim();
  conductance_.assign(grid_.size() * static_cast<std::size_t>(d), 0.0);
  min_conductance_ = std::numeric_limits<double>::infinity();
  for_each_edge(grid_, [&](std::size_t c, std::size_t up, int axis) {
    const double a = field.diagonal(c, axis);
    const double b = field.diagonal(up, axis);
    const double e = (a + b) > 0.0 ? 2.0 * a * b / (a + b) : 0.0;
    conductance_[c * static_cast<std::size_t>(d) + static_cast<std::size_t>(axis)] = e;
    min_conductance_ = std::min(min_conductance_, e);
  });
}

DirichletForm assemble(const CoefficientField& field) { return DirichletForm(field); }

double DirichletForm::volume() const { return std::pow(spacing_ * grid_.n(), grid_.dim()); }

void DirichletForm::apply_laplacian(std::span<const double> x, std::span<double> y) const {
  if (x.size() != grid_.size() || y.size() != grid_.size()) {
    throw ShapeError("apply_laplacian: vector size does not match the grid");
  }
  std::fill(y.begin(), y.end(), 0.0);
  const auto d = static_cast<std::size_t>(grid_.dim());
  for_each_edge(grid_, [&](std::size_t c, std::size_t up, int axis) {
    const double flux = conductance_[c * d + static_cast<std::size_t>(axis)] * (x[c] - x[up]);
    y[c] += flux;
    y[up] -= flux;
  });
}

std::vector<double> DirichletForm::diagonal() const {
  std::vector<double> diag(grid_.size(), 0.0);
  const auto d = static_cast<std::size_t>(grid_.dim());
  for_each_edge(grid_, [&](std::size_t c, std::size_t up, int axis) {
    const double a = conductance_[c * d + static_cast<std::size_t>(axis)];
    diag[c] += a;
    diag[up] += a;
  });
  return diag;
}

CellFunction CellFunction::coordinate(int dim, int axis) {
  CellFunction f;
  f.slope.assign(static_cast<std::size_t>(dim), 0.0);
  f.slope[static_cast<std::size_t>(axis)] = 1.0;
  return f;
}

double edge_difference(const DirichletForm& form, const CellFunction& u, std::size_t cell, int axis) {
  return diff(form, u, cell, form.grid().neighbor(cell, axis, +1), axis);
}

double energy(const DirichletForm& form, const CellFunction& u, const CellFunction& v) {
  check_values(form, u);
  check_values(form, v);
  const auto d = static_cast<std::size_t>(form.dim());
  const auto cond = form.conductances();
  double s = 0.0;
  for_each_edge(form.grid(), [&](std::size_t c, std::size_t up, int axis) {
    s += cond[c * d + static_cast<std::size_t>(axis)] * diff(form, u, c, up, axis) *
         diff(form, v, c, up, axis);
  });
  return std::pow(form.spacing(), form.dim() - 2) * s;
}

double weighted_energy(const DirichletForm& form, std::span<const double> eta, const CellFunction& u,
                       const CellFunction& v) {
  check_values(form, u);
  check_values(form, v);
  if (eta.size() != form.num_cells()) {
    throw ShapeError("weighted_energy: cutoff size does not match the grid");
  }
  const auto d = static_cast<std::size_t>(form.dim());
  const auto cond = form.conductances();
  double s = 0.0;
  for_each_edge(form.grid(), [&](std::size_t c, std::size_t up, int axis) {
    const double w = 0.5 * (eta[c] * eta[c] + eta[up] * eta[up]);
    s += w * cond[c * d + static_cast<std::size_t>(axis)] * diff(form, u, c, up, axis) *
         diff(form, v, c, up, axis);
  });
  return std::pow(form.spacing(), form.dim() - 2) * s;
}

double lp_norm(std::span<const double> values, std::span<const std::size_t> cells, double r,
               double cell_volume) {
  if (std::isinf(r)) {
    double m = 0.0;
    for (std::size_t c : cells) {
      m = std::max(m, std::abs(values[c]));
    }
    return m;
  }
  double s = 0.0;
  for (std::size_t c : cells) {
    s += std::pow(std::abs(values[c]), r);
  }
  return std::pow(s * cell_volume, 1.0 / r);
}

double weighted_lp_norm(std::span<const double> values, std::span<const double> weight,
                        std::span<const std::size_t> cells, double r, double cell_volume) {
  if (std::isinf(r)) {
    return lp_norm(values, cells, r, cell_volume);
  }
  double s = 0.0;
  for (std::size_t c : cells) {
    s += std::pow(std::abs(values[c]), r) * weight[c];
  }
  return std::pow(s * cell_volume, 1.0 / r);
}

double ball_norm(std::span<const double> values, std::span<const std::size_t> cells, double r) {
  if (cells.empty()) {
    throw RangeError("norm over an empty ball");
  }
  if (std::isinf(r)) {
    return lp_norm(values, cells, r, 1.0);
  }
  return lp_norm(values, cells, r, 1.0 / static_cast<double>(cells.size()));
}

std::vector<double> radial_cutoff(const Grid& grid, double h, std::span<const double> center,
                                  double inner, double outer) {
  if (!(outer > inner) || inner < 0.0) {
    throw ConfigError("radial_cutoff needs 0 <= inner < outer");
  }
  std::vector<double> eta(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double r = periodic_distance(grid, h, c, center);
    eta[c] = std::clamp((outer - r) / (outer - inner), 0.0, 1.0);
  }
  return eta;
}

double cutoff_gradient_sup(const DirichletForm& form, std::span<const double> eta) {
  double m = 0.0;
  for_each_edge(form.grid(), [&](std::size_t c, std::size_t up, int) {
    m = std::max(m, std::abs(eta[up] - eta[c]));
  });
  return m / form.spacing();
}

namespace {

struct BallContext {
  std::vector<std::size_t> cells;
  std::vector<double> lambda_inv;
  double cell_volume;
};

BallContext ball_context(const DirichletForm& form, const CoefficientField& field, const Ball& ball) {
  if (form.field_hash() != field.hash()) {
    throw ConsistencyError("Dirichlet form was assembled from a different field");
  }
  BallContext ctx;
  ctx.cells = ball_cells(field.grid(), field.spacing(), ball);
  if (ctx.cells.empty()) {
    throw RangeError("ball contains no cell centres");
  }
  if (2.0 * ball.radius > field.box_side()) {
    throw RangeError("ball does not fit in the periodic box");
  }
  ctx.lambda_inv.resize(field.num_cells());
  for (std::size_t c = 0; c < field.num_cells(); ++c) {
    ctx.lambda_inv[c] = 1.0 / field.lambda()[c];
  }
  ctx.cell_volume = std::pow(field.spacing(), field.dim());
  return ctx;
}

void require_support(std::span<const double> u, const BallContext& ctx) {
  std::vector<char> inside(u.size(), 0);
  for (std::size_t c : ctx.cells) {
    inside[c] = 1;
  }
  bool nonzero = false;
  for (std::size_t c = 0; c < u.size(); ++c) {
    if (u[c] != 0.0) {
      if (!inside[c]) {
        throw RangeError("test function must vanish outside the ball");
      }
      nonzero = true;
    }
  }
  if (!nonzero) {
    throw UndefinedRatioError("Sobolev ratio undefined for u == 0");
  }
}

} // namespace

double sobolev_ratio(const DirichletForm& form, const CoefficientField& field,
                     std::span<const double> u, const Ball& ball, double q) {
  if (u.size() != field.num_cells()) {
    throw ShapeError("sobolev_ratio: u does not match the grid");
  }
  const BallContext ctx = ball_context(form, field, ball);
  require_support(u, ctx);
  const double rho = sobolev_rho(q, field.dim());
  const double num = std::pow(lp_norm(u, ctx.cells, rho, ctx.cell_volume), 2);
  const double e = energy(form, CellFunction::periodic({u.begin(), u.end()}), CellFunction::periodic({u.begin(), u.end()}));
  return num / (lp_norm(ctx.lambda_inv, ctx.cells, q, ctx.cell_volume) * e);
}

double weighted_sobolev_ratio(const DirichletForm& form, const CoefficientField& field,
                              std::span<const double> u, const Ball& ball, double p, double q) {
  if (u.size() != field.num_cells()) {
    throw ShapeError("weighted_sobolev_ratio: u does not match the grid");
  }
  const BallContext ctx = ball_context(form, field, ball);
  require_support(u, ctx);
  const double rho = sobolev_rho(q, field.dim());
  const double ps = holder_conjugate(p);
  const double num =
      std::pow(weighted_lp_norm(u, field.Lambda(), ctx.cells, rho / ps, ctx.cell_volume), 2);
  const double e = energy(form, CellFunction::periodic({u.begin(), u.end()}), CellFunction::periodic({u.begin(), u.end()}));
  const double lam = lp_norm(field.Lambda(), ctx.cells, p, ctx.cell_volume);
  return num / (lp_norm(ctx.lambda_inv, ctx.cells, q, ctx.cell_volume) * std::pow(lam, 2.0 * ps / rho) * e);
}

double cutoff_sobolev_ratio(const DirichletForm& form, const CoefficientField& field,
                            std::span<const double> u, std::span<const double> eta, const Ball& ball,
                            double q) {
  if (u.size() != field.num_cells() || eta.size() != field.num_cells()) {
    throw ShapeError("cutoff_sobolev_ratio: inputs do not match the grid");
  }
  const BallContext ctx = ball_context(form, field, ball);
  std::vector<double> eta_u(u.size());
  for (std::size_t c = 0; c < u.size(); ++c) {
    eta_u[c] = eta[c] * u[c];
  }
  require_support(eta_u, ctx);
  const double rho = sobolev_rho(q, field.dim());
  const double num = std::pow(lp_norm(eta_u, ctx.cells, rho, ctx.cell_volume), 2);
  const CellFunction uf = CellFunction::periodic({u.begin(), u.end()});
  const double grad = cutoff_gradient_sup(form, eta);
  const double mass = std::pow(weighted_lp_norm(u, field.Lambda(), ctx.cells, 2.0, ctx.cell_volume), 2);
  const double bracket = weighted_energy(form, eta, uf, uf) + grad * grad * mass;
  return num / (2.0 * lp_norm(ctx.lambda_inv, ctx.cells, q, ctx.cell_volume) * bracket);
}

} // namespace ehom
