#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ehom/environment.hpp"

namespace ehom::oracle {

/// Dense graph Laplacian from the cell matrices, built without DirichletForm.
inline Eigen::MatrixXd dense_laplacian(const CoefficientField& f) {
  const Grid& g = f.grid();
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t c = 0; c < g.size(); ++c) {
    for (int k = 0; k < g.dim(); ++k) {
      const std::size_t u = g.neighbor(c, k, +1);
      const double a = f.diagonal(c, k), b = f.diagonal(u, k);
      const double w = 2.0 * a * b / (a + b);
      const auto i = static_cast<Eigen::Index>(c), j = static_cast<Eigen::Index>(u);
      A(i, i) += w;
      A(j, j) += w;
      A(i, j) -= w;
      A(j, i) -= w;
    }
  }
  return A;
}

struct DenseSolution {
  std::vector<Eigen::VectorXd> chi; ///< physical units
  Eigen::MatrixXd D;
};

/// Pseudo-inverse solve of the cell problems and d_ij = 2 avg of <a grad y^i, grad y^j> over edges.
inline DenseSolution dense_oracle(const CoefficientField& f) {
  const Grid& g = f.grid();
  const int d = g.dim();
  const double h = f.spacing();
  const Eigen::MatrixXd A = dense_laplacian(f);
  const auto n = A.rows();
  Eigen::MatrixXd K = A + Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
  DenseSolution out;
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < g.size(); ++c) {
      const std::size_t u = g.neighbor(c, k, +1);
      const double a = f.diagonal(c, k), bb = f.diagonal(u, k);
      const double w = 2.0 * a * bb / (a + bb);
      b(static_cast<Eigen::Index>(c)) -= w;
      b(static_cast<Eigen::Index>(u)) += w;
    }
    Eigen::VectorXd x = ldlt.solve(b);
    x.array() -= x.mean();
    out.chi.push_back(h * x);
  }
  out.D = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < g.size(); ++c) {
        for (int e = 0; e < d; ++e) {
          const std::size_t u = g.neighbor(c, e, +1);
          const double a = f.diagonal(c, e), bb = f.diagonal(u, e);
          const double w = 2.0 * a * bb / (a + bb);
          const auto ci = static_cast<Eigen::Index>(c), ui = static_cast<Eigen::Index>(u);
          const double dyi = (e == i ? h : 0.0) - (out.chi[i](ui) - out.chi[i](ci));
          const double dyj = (e == j ? h : 0.0) - (out.chi[j](ui) - out.chi[j](ci));
          s += w * dyi * dyj;
        }
      }
      out.D(i, j) = 2.0 * s * std::pow(h, d - 2) / std::pow(g.n() * h, d);
    }
  }
  return out;
}

} // namespace ehom::oracle
