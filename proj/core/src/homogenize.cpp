#include "ehom/homogenize.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ehom/errors.hpp"
#include "ehom/rng.hpp"

namespace ehom {

double EffectiveMatrix::quadratic_form(std::span<const double> xi) const {
  if (static_cast<int>(xi.size()) != dim()) {
    throw ShapeError("direction rank does not match D");
  }
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) {
    for (int j = 0; j < dim(); ++j) {
      s += xi[static_cast<std::size_t>(i)] * D(i, j) * xi[static_cast<std::size_t>(j)];
    }
  }
  return s;
}

EffectiveMatrix effective_matrix(const DirichletForm& form, const CorrectorField& correctors) {
  if (form.field_hash() != correctors.field_hash || !(form.grid() == correctors.grid)) {
    throw ConsistencyError("correctors were solved on a different field");
  }
  const int d = form.dim();
  std::vector<CellFunction> y;
  for (int k = 0; k < d; ++k) {
    CellFunction f = CellFunction::coordinate(d, k);
    f.values = correctors.chi[static_cast<std::size_t>(k)];
    for (double& v : f.values) {
      v = -v;
    }
    y.push_back(std::move(f));
  }

  EffectiveMatrix out;
  out.field_hash = form.field_hash();
  Eigen::MatrixXd raw(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      raw(i, j) = 2.0 * energy(form, y[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(j)]) /
                  form.volume();
    }
  }
  out.asymmetry = (raw - raw.transpose()).cwiseAbs().maxCoeff();
  out.D = 0.5 * (raw + raw.transpose());

  const int n = form.grid().n();
  const double s = std::sin(std::numbers::pi / n);
  const double lambda2 = form.min_conductance() * 4.0 * s * s;
  out.error_bar.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      out.error_bar(i, j) = 2.0 * correctors.stats[static_cast<std::size_t>(i)].residual_norm *
                            correctors.stats[static_cast<std::size_t>(j)].residual_norm /
                            (lambda2 * static_cast<double>(form.num_cells()));
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.D, Eigen::EigenvaluesOnly);
  out.eigenvalues = eig.eigenvalues();
  if (!(out.eigenvalues.minCoeff() > 0.0)) {
    std::ostringstream os;
    os << "effective matrix is not positive definite (smallest eigenvalue " << out.eigenvalues.minCoeff()
       << ")";
    throw NotPositiveDefinite(os.str(), {out.eigenvalues.data(), out.eigenvalues.data() + d});
  }
  return out;
}

BoundsReport check_bounds(const EffectiveMatrix& D, const CoefficientField& field,
                          std::span<const std::vector<double>> directions, double slack,
                          double tight_tolerance) {
  if (D.field_hash != field.hash()) {
    throw ConsistencyError("effective matrix was computed from a different field");
  }
  double inv_lambda = 0.0;
  for (double l : field.lambda()) {
    inv_lambda += 1.0 / l;
  }
  inv_lambda /= static_cast<double>(field.num_cells());

  BoundsReport report;
  report.slack = slack;
  for (const auto& xi : directions) {
    BoundsRow row;
    row.xi = xi;
    double norm2 = 0.0;
    for (double v : xi) {
      norm2 += v * v;
    }
    double avg = 0.0;
    for (std::size_t c = 0; c < field.num_cells(); ++c) {
      avg += field.quadratic_form(c, xi);
    }
    avg /= static_cast<double>(field.num_cells());
    row.value = D.quadratic_form(xi);
    row.lower = 2.0 * norm2 / inv_lambda;
    row.upper = 2.0 * avg;
    row.lower_ok = row.value >= row.lower * (1.0 - slack);
    row.upper_ok = row.value <= row.upper * (1.0 + slack);
    row.lower_tight = std::abs(row.value - row.lower) <= tight_tolerance * row.lower;
    row.upper_tight = std::abs(row.value - row.upper) <= tight_tolerance * row.upper;
    report.all_ok = report.all_ok && row.lower_ok && row.upper_ok;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<std::vector<double>> test_directions(int dim, int random_count, std::uint64_t seed) {
  std::vector<std::vector<double>> dirs;
  for (int k = 0; k < dim; ++k) {
    std::vector<double> e(static_cast<std::size_t>(dim), 0.0);
    e[static_cast<std::size_t>(k)] = 1.0;
    dirs.push_back(std::move(e));
  }
  Engine engine = make_stream(seed, 0x64697273ULL);
  std::normal_distribution<double> normal;
  for (int r = 0; r < random_count; ++r) {
    std::vector<double> xi(static_cast<std::size_t>(dim));
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : xi) {
        v = normal(engine);
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : xi) {
      v /= norm;
    }
    dirs.push_back(std::move(xi));
  }
  return dirs;
}

// ---------------------------------------------------------------------------
// Moser audit

double moser_prefactor(double moment_factor, double sigma_prime, double sigma, double exponent) {
  const double gap = sigma - sigma_prime;
  return std::pow(std::max(1.0, moment_factor) / (gap * gap), exponent);
}

namespace {

void check_sigmas(double sigma_prime, double sigma) {
  if (!(sigma_prime >= 0.5 && sigma_prime < sigma && sigma <= 1.0)) {
    throw ConfigError("Moser audit needs 1/2 <= sigma' < sigma <= 1");
  }
}

double core_ratio(double lhs, double rhs) {
  if (rhs > 0.0) {
    return lhs / rhs;
  }
  if (lhs > 0.0) {
    throw InequalityViolation("maximal inequality: right-hand side vanishes while the sup norm does not");
  }
  return 0.0;
}

} // namespace

MoserAuditRow moser_audit_row(const ScaleSolution& solution, const MoserSchedule& schedule, double radius,
                              double sigma_prime, double sigma, int component) {
  check_sigmas(sigma_prime, sigma);
  const CoefficientField& field = solution.field;
  if (component < 0 || component >= field.dim()) {
    throw ConfigError("Moser audit component out of range");
  }
  const double h = field.spacing();
  const std::vector<double> center = box_center(field.grid(), h);
  const auto outer = ball_cells(field.grid(), h, Ball{center, radius});
  const auto middle = ball_cells(field.grid(), h, Ball{center, sigma * radius});
  const auto inner = ball_cells(field.grid(), h, Ball{center, sigma_prime * radius});
  if (inner.empty()) {
    throw RangeError("Moser audit ball B(sigma' R) contains no cells");
  }
  std::vector<double> inv_lambda(field.num_cells());
  for (std::size_t c = 0; c < field.num_cells(); ++c) {
    inv_lambda[c] = 1.0 / field.lambda()[c];
  }
  const auto& chi = solution.correctors.chi[static_cast<std::size_t>(component)];

  MoserAuditRow row;
  row.epsilon = h;
  row.lhs = ball_norm(chi, inner, kInf);
  row.moment_factor =
      ball_norm(inv_lambda, outer, schedule.q) * ball_norm(field.Lambda(), outer, schedule.p);
  row.alpha_norm = ball_norm(chi, middle, schedule.alpha);
  const double n = row.alpha_norm;
  row.rhs_core = moser_prefactor(row.moment_factor, sigma_prime, sigma, schedule.kappa_prime) *
                 std::max(std::pow(n, schedule.gamma_prime), n);
  row.ratio = core_ratio(row.lhs, row.rhs_core);
  return row;
}

MoserAuditReport moser_audit(const EnvironmentSpec& spec, const MoserSchedule& schedule, double radius,
                             double sigma_prime, double sigma, std::span<const int> sizes, int component,
                             double tol, int max_iter) {
  spec.validate();
  check_sigmas(sigma_prime, sigma);
  if (!(radius > 0.0) || radius > 0.25) {
    throw RangeError("Moser audit radius must lie in (0, 1/4] of the unit box");
  }
  if (sizes.empty()) {
    throw ConfigError("Moser audit needs at least one size");
  }
  MoserAuditReport report;
  report.radius = radius;
  report.sigma_prime = sigma_prime;
  report.sigma = sigma;
  report.component = component;
  for (int n : sizes) {
    const ScaleSolution sol = solve_scale(spec, n, tol, max_iter);
    report.rows.push_back(moser_audit_row(sol, schedule, radius, sigma_prime, sigma, component));
  }
  report.max_ratio = report.rows.front().ratio;
  report.min_ratio = report.rows.front().ratio;
  for (const auto& r : report.rows) {
    report.max_ratio = std::max(report.max_ratio, r.ratio);
    report.min_ratio = std::min(report.min_ratio, r.ratio);
  }
  return report;
}

std::optional<double> MoserAuditReport::spread() const {
  if (!(min_ratio > 0.0)) {
    return std::nullopt;
  }
  return max_ratio / min_ratio;
}

std::string MoserAuditReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17) << "epsilon,lhs,rhs_core,ratio\n";
  for (const auto& r : rows) {
    os << r.epsilon << ',' << r.lhs << ',' << r.rhs_core << ',' << r.ratio << '\n';
  }
  return os.str();
}

MaximalInequality maximal_inequality_direct(const DirichletForm& form, const CoefficientField& field,
                                            std::span<const double> f_slope, const Ball& ball,
                                            const MoserSchedule& schedule, double sigma_prime, double sigma,
                                            double tol, int max_iter) {
  check_sigmas(sigma_prime, sigma);
  if (form.field_hash() != field.hash()) {
    throw ConsistencyError("Dirichlet form was assembled from a different field");
  }
  if (static_cast<int>(f_slope.size()) != form.dim()) {
    throw ShapeError("f slope rank does not match the grid dimension");
  }
  if (form.degenerate() || !(form.min_conductance() > 0.0)) {
    throw SingularityError("refusing to solve on a degenerate medium");
  }
  if (2.0 * ball.radius > field.box_side()) {
    throw RangeError("ball does not fit in the periodic box");
  }
  const Grid& g = form.grid();
  const double h = form.spacing();
  const auto cells = ball_cells(g, h, ball);
  if (cells.empty()) {
    throw RangeError("ball contains no cell centres");
  }
  const std::size_t m = cells.size();

  // Right-hand side E(f, 1_c) in lattice units, restricted to the ball.
  std::vector<double> b(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t c = cells[i];
    double s = 0.0;
    for (int a = 0; a < form.dim(); ++a) {
      s += f_slope[static_cast<std::size_t>(a)] * (form.conductance(g.neighbor(c, a, -1), a) - form.conductance(c, a));
    }
    b[i] = s;
  }
  const std::vector<double> diag_full = form.diagonal();
  std::vector<double> full_in(g.size(), 0.0);
  std::vector<double> full_out(g.size(), 0.0);
  LinearMap apply = [&](std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < m; ++i) {
      full_in[cells[i]] = in[i];
    }
    form.apply_laplacian(full_in, full_out);
    for (std::size_t i = 0; i < m; ++i) {
      out[i] = full_out[cells[i]];
    }
  };
  LinearMap jacobi = [&](std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < m; ++i) {
      out[i] = in[i] / diag_full[cells[i]];
    }
  };
  std::vector<double> x(m, 0.0);
  MaximalInequality out;
  out.stats = conjugate_gradient(apply, jacobi, b, x, CgOptions{tol, max_iter, false});
  out.u.assign(g.size(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    out.u[cells[i]] = h * x[i];
  }

  const auto inner = ball_cells(g, h, Ball{ball.center, sigma_prime * ball.radius});
  const auto middle = ball_cells(g, h, Ball{ball.center, sigma * ball.radius});
  if (inner.empty()) {
    throw RangeError("ball B(sigma' R) contains no cells");
  }
  std::vector<double> inv_lambda(field.num_cells());
  for (std::size_t c = 0; c < field.num_cells(); ++c) {
    inv_lambda[c] = 1.0 / field.lambda()[c];
  }
  const double moment = ball_norm(inv_lambda, cells, schedule.q) * ball_norm(field.Lambda(), cells, schedule.p);
  const double rho_norm = ball_norm(out.u, middle, schedule.rho);
  out.lhs = ball_norm(out.u, inner, kInf);
  out.rhs_core = moser_prefactor(moment, sigma_prime, sigma, schedule.kappa) *
                 std::max(std::pow(rho_norm, schedule.gamma), rho_norm);
  out.ratio = core_ratio(out.lhs, out.rhs_core);
  return out;
}

} // namespace ehom
