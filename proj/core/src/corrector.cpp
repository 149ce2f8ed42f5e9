#include "ehom/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "ehom/errors.hpp"
#include "ehom/statistics.hpp"

namespace ehom {

double CorrectorField::gradient(int k, std::size_t cell, int axis) const {
  const auto& c = chi[static_cast<std::size_t>(k)];
  return (c[grid.neighbor(cell, axis, +1)] - c[cell]) / spacing;
}

CorrectorField solve_correctors(const DirichletForm& form, double tol, int max_iter,
                                Preconditioner preconditioner) {
  if (!(tol > 0.0)) {
    throw ConfigError("corrector tolerance must be > 0");
  }
  if (max_iter < 1) {
    throw ConfigError("corrector max_iter must be >= 1");
  }
  PeriodicSolver solver(form, SolverOptions{tol, max_iter, preconditioner});

  CorrectorField out;
  out.dim = form.dim();
  out.grid = form.grid();
  out.spacing = form.spacing();
  out.field_hash = form.field_hash();
  out.tolerance = tol;
  const Grid& g = form.grid();
  const double h = form.spacing();
  for (int k = 0; k < out.dim; ++k) {
    std::vector<double> b(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) {
      b[c] = form.conductance(g.neighbor(c, k, -1), k) - form.conductance(c, k);
    }
    std::vector<double> x(g.size(), 0.0);
    SolveStats stats = solver.solve(b, x);
    for (double& v : x) {
      v *= h;
    }
    out.means.push_back(mean(x));
    out.rhs_norms.push_back(std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0)));
    out.stats.push_back(std::move(stats));
    out.chi.push_back(std::move(x));
  }
  return out;
}

double HarmonicCoordinates::value(int k, std::span<const std::int64_t> position,
                                  const CorrectorField& correctors) const {
  const double affine = spacing * static_cast<double>(position[static_cast<std::size_t>(k)]);
  return affine - correctors.chi[static_cast<std::size_t>(k)][grid.index(position)];
}

namespace {

/// (E(u, 1_c))_c for every cell c, without the h^(d-2) prefactor.
std::vector<double> cell_residual(const DirichletForm& form, const CellFunction& u) {
  const auto cond = form.conductances();
  const auto d = static_cast<std::size_t>(form.dim());
  const double h = form.spacing();
  std::vector<double> res(form.num_cells(), 0.0);
  for_each_edge(form.grid(), [&](std::size_t c, std::size_t up, int axis) {
    double du = u.values.empty() ? 0.0 : u.values[up] - u.values[c];
    if (!u.slope.empty()) {
      du += h * u.slope[static_cast<std::size_t>(axis)];
    }
    const double flux = cond[c * d + static_cast<std::size_t>(axis)] * du;
    res[c] -= flux;
    res[up] += flux;
  });
  return res;
}

} // namespace

HarmonicCoordinates harmonic_coordinates(const DirichletForm& form, const CorrectorField& correctors) {
  if (form.field_hash() != correctors.field_hash || !(form.grid() == correctors.grid)) {
    throw ConsistencyError("correctors were solved on a different field");
  }
  HarmonicCoordinates hc;
  hc.dim = correctors.dim;
  hc.grid = correctors.grid;
  hc.spacing = correctors.spacing;
  hc.field_hash = correctors.field_hash;
  for (int k = 0; k < hc.dim; ++k) {
    CellFunction y = CellFunction::coordinate(hc.dim, k);
    y.values = correctors.chi[static_cast<std::size_t>(k)];
    for (double& v : y.values) {
      v = -v;
    }
    const std::vector<double> ry = cell_residual(form, y);
    const std::vector<double> rp = cell_residual(form, CellFunction::coordinate(hc.dim, k));
    double sup = 0.0;
    for (double v : ry) {
      sup = std::max(sup, std::abs(v));
    }
    const double scale = std::sqrt(std::inner_product(rp.begin(), rp.end(), rp.begin(), 0.0));
    const double residual = scale > 0.0 ? sup / scale : sup;
    if (residual > 10.0 * correctors.tolerance) {
      std::ostringstream os;
      os << "harmonic coordinate y^" << k + 1 << " has harmonicity residual " << residual
         << " above 10 tol = " << 10.0 * correctors.tolerance;
      throw ConsistencyError(os.str());
    }
    hc.harmonicity_residual.push_back(residual);
    hc.y.push_back(std::move(y));
  }
  return hc;
}

CorrectorDiagnostics mean_zero_and_energy_checks(const CorrectorField& correctors,
                                                 const DirichletForm& form) {
  if (form.field_hash() != correctors.field_hash) {
    throw ConsistencyError("correctors were solved on a different field");
  }
  CorrectorDiagnostics diag;
  const Grid& g = correctors.grid;
  const auto cells = static_cast<double>(g.size());
  for (int k = 0; k < correctors.dim; ++k) {
    const auto& chi = correctors.chi[static_cast<std::size_t>(k)];
    diag.chi_mean.push_back(std::abs(mean(chi)));
    std::vector<double> grad_mean(static_cast<std::size_t>(correctors.dim), 0.0);
    for_each_edge(g, [&](std::size_t c, std::size_t up, int axis) {
      grad_mean[static_cast<std::size_t>(axis)] += (chi[up] - chi[c]) / correctors.spacing;
    });
    for (double& v : grad_mean) {
      v = std::abs(v / cells);
    }
    diag.gradient_mean.push_back(std::move(grad_mean));
    CellFunction y = CellFunction::coordinate(correctors.dim, k);
    y.values = chi;
    for (double& v : y.values) {
      v = -v;
    }
    diag.energy_per_volume.push_back(energy(form, y, y) / form.volume());
  }
  return diag;
}

ScaleSolution solve_scale(const EnvironmentSpec& spec, int cells_per_side, double tol, int max_iter) {
  CoefficientField field =
      generate_field(spec, cells_per_side, 1.0 / cells_per_side, -static_cast<std::int64_t>(cells_per_side / 2));
  const DirichletForm form(field);
  CorrectorField chi = solve_correctors(form, tol, max_iter);
  return ScaleSolution{cells_per_side, std::move(field), std::move(chi)};
}

double corrector_sup_norm(const CorrectorField& correctors, const Ball& ball) {
  const auto cells = ball_cells(correctors.grid, correctors.spacing, ball);
  if (cells.empty()) {
    throw RangeError("ball contains no cell centres");
  }
  double sup = 0.0;
  for (const auto& chi : correctors.chi) {
    for (std::size_t c : cells) {
      sup = std::max(sup, std::abs(chi[c]));
    }
  }
  return sup;
}

SublinearityCurve sublinearity_scan(const EnvironmentSpec& spec, double radius, std::span<const int> sizes,
                                    int seeds, double tol, int max_iter) {
  spec.validate();
  if (sizes.empty()) {
    throw ConfigError("sublinearity_scan needs at least one size");
  }
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) {
      throw ConfigError("sublinearity_scan sizes must be strictly increasing");
    }
  }
  if (!(radius > 0.0) || radius > 0.25) {
    throw RangeError("sublinearity radius must lie in (0, 1/4] of the unit box");
  }
  if (seeds < 1) {
    throw ConfigError("sublinearity_scan needs seeds >= 1");
  }

  SublinearityCurve curve;
  curve.radius = radius;
  for (int n : sizes) {
    const double eps = 1.0 / n;
    double total = 0.0;
    for (int s = 0; s < seeds; ++s) {
      EnvironmentSpec local = spec;
      local.seed = spec.seed + static_cast<std::uint64_t>(s);
      const ScaleSolution sol = solve_scale(local, n, tol, max_iter);
      const Ball ball{box_center(sol.field.grid(), eps), radius};
      const double sup = corrector_sup_norm(sol.correctors, ball);
      curve.rows.push_back({eps, sup, local.seed});
      total += sup;
    }
    curve.epsilons.push_back(eps);
    curve.mean_sup_norms.push_back(total / seeds);
  }
  for (std::size_t i = 1; i < curve.mean_sup_norms.size(); ++i) {
    if (curve.mean_sup_norms[i] < curve.mean_sup_norms[i - 1]) {
      ++curve.decreasing_pairs;
    }
  }
  const bool positive = std::all_of(curve.mean_sup_norms.begin(), curve.mean_sup_norms.end(),
                                    [](double v) { return v > 0.0; });
  if (positive && curve.epsilons.size() >= 2) {
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < curve.epsilons.size(); ++i) {
      lx.push_back(-std::log(curve.epsilons[i]));
      ly.push_back(std::log(curve.mean_sup_norms[i]));
    }
    curve.slope = least_squares_slope(lx, ly);
  }
  return curve;
}

std::string SublinearityCurve::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17) << "epsilon,sup_norm,seed\n";
  for (const auto& r : rows) {
    os << r.epsilon << ',' << r.sup_norm << ',' << r.seed << '\n';
  }
  return os.str();
}

ScalarFields to_scalar_fields(const CorrectorField& correctors) {
  return ScalarFields{correctors.grid, correctors.spacing, correctors.chi};
}

} // namespace ehom
