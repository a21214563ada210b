#include "cmf/tensor.hpp"

#include "cmf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cmf {

using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index ipow(Index base, int exp) {
  Index r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

Tensor::Tensor(int n, Index d) : particles(n), dim(d), data(Eigen::VectorXcd::Zero(ipow(d, n))) {}

Tensor::Tensor(int n, Index d, Eigen::VectorXcd v) : particles(n), dim(d), data(std::move(v)) {
  if (data.size() != ipow(d, n)) throw std::invalid_argument("Tensor: size does not match dim^N");
}

Eigen::VectorXcd nodal(const GridFunction& f) {
  if (f.space != Space::position) throw std::invalid_argument("nodal: position-space input required");
  return std::sqrt(f.grid.cell_volume()) * f.values;
}

GridFunction from_nodal(const Grid& g, const Eigen::VectorXcd& u) {
  return GridFunction(g, u / std::sqrt(g.cell_volume()));
}

Tensor tensor_power(const Eigen::VectorXcd& u, int n) {
  return tensor_product(std::vector<Eigen::VectorXcd>(static_cast<std::size_t>(n), u));
}

Tensor tensor_product(const std::vector<Eigen::VectorXcd>& factors) {
  if (factors.empty()) throw std::invalid_argument("tensor_product: no factors");
  const Index d = factors.front().size();
  Eigen::VectorXcd acc = factors.front();
  for (std::size_t i = 1; i < factors.size(); ++i) {
    if (factors[i].size() != d) throw std::invalid_argument("tensor_product: factor size mismatch");
    Eigen::VectorXcd next(acc.size() * d);
    for (Index a = 0; a < acc.size(); ++a) next.segment(a * d, d) = acc(a) * factors[i];
    acc.swap(next);
  }
  return Tensor(static_cast<int>(factors.size()), d, std::move(acc));
}

Tensor permute(const Tensor& t, std::span<const int> perm) {
  const int n = t.particles;
  if (static_cast<int>(perm.size()) != n) throw std::invalid_argument("permute: wrong permutation length");
  std::vector<Index> stride(n);
  for (int i = 0; i < n; ++i) stride[i] = ipow(t.dim, n - 1 - i);
  // Output digit j feeds input position i where perm[i] == j.
  std::vector<Index> in_stride(n);
  for (int i = 0; i < n; ++i) in_stride[perm[i]] = stride[i];
  Tensor out(n, t.dim);
  std::vector<Index> digit(n, 0);
  Index src = 0;
  const Index total = t.data.size();
  for (Index p = 0; p < total; ++p) {
    out.data(p) = t.data(src);
    for (int j = n - 1; j >= 0; --j) {
      ++digit[j];
      src += in_stride[j];
      if (digit[j] < t.dim) break;
      src -= in_stride[j] * t.dim;
      digit[j] = 0;
    }
  }
  return out;
}

double swap_residual(const Tensor& t, int i, int j) {
  const int n = t.particles;
  if (i < 0 || j < 0 || i >= n || j >= n) throw std::invalid_argument("swap_residual: particle out of range");
  if (i == j) return 0.0;
  const Index si = ipow(t.dim, n - 1 - i), sj = ipow(t.dim, n - 1 - j);
  std::vector<Index> digit(n, 0);
  double acc = 0.0;
  const Index total = t.data.size();
  for (Index p = 0; p < total; ++p) {
    const Index q = p + (digit[i] - digit[j]) * (sj - si);
    acc += std::norm(t.data(p) - t.data(q));
    for (int k = n - 1; k >= 0; --k) {
      if (++digit[k] < t.dim) break;
      digit[k] = 0;
    }
  }
  return std::sqrt(acc);
}

double transposition_residual(const Tensor& t) {
  double worst = 0.0;
  for (int i = 0; i < t.particles; ++i)
    for (int j = i + 1; j < t.particles; ++j) worst = std::max(worst, swap_residual(t, i, j));
  return worst;
}

Tensor symmetrize(const Tensor& t) {
  if (t.particles > 6) throw std::invalid_argument("symmetrize: more than 6 particles");
  std::vector<int> perm(t.particles);
  std::iota(perm.begin(), perm.end(), 0);
  Tensor acc(t.particles, t.dim);
  do {
    acc.data += permute(t, perm).data;
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double nrm = acc.data.norm();
  if (nrm < 1e-12 * std::max(1.0, t.data.norm())) throw InvariantError("symmetrize: zero norm after symmetrization");
  acc.data /= nrm;
  return acc;
}

void apply_onebody(Tensor& t, const Eigen::MatrixXcd& U, int particle) {
  const Index d = t.dim;
  if (U.rows() != d || U.cols() != d) throw std::invalid_argument("apply_onebody: matrix size mismatch");
  const Index A = ipow(d, particle), B = ipow(d, t.particles - particle - 1);
  RowMat tmp(d, B);
  for (Index a = 0; a < A; ++a) {
    Eigen::Map<RowMat> X(t.data.data() + a * d * B, d, B);
    tmp.noalias() = U * X;
    X = tmp;
  }
}

void apply_axis_multipliers(Tensor& t, const Grid& g, const std::vector<AxisMultiplier>& m, int particle) {
  if (g.size() != t.dim) throw std::invalid_argument("apply_axis_multipliers: grid does not match tensor");
  std::vector<Index> shape;
  for (int p = 0; p < t.particles; ++p)
    for (const auto& ax : g.axes) shape.push_back(ax.n);
  for (int a = 0; a < g.rank(); ++a) m[a].apply(t.data.data(), shape, particle * g.rank() + a);
}

Tensor contract(const Tensor& t, const Eigen::VectorXcd& u, int particle) {
  const Index d = t.dim;
  const Index A = ipow(d, particle), B = ipow(d, t.particles - particle - 1);
  Tensor out(t.particles - 1, d);
  for (Index a = 0; a < A; ++a) {
    Eigen::Map<const RowMat> X(t.data.data() + a * d * B, d, B);
    out.data.segment(a * B, B) = (u.adjoint() * X).transpose();
  }
  return out;
}

Eigen::MatrixXcd density_matrix(const Tensor& psi) {
  const Index d = psi.dim, R = ipow(d, psi.particles - 1);
  Eigen::Map<const RowMat> M(psi.data.data(), d, R);
  Eigen::MatrixXcd gamma = M * M.adjoint();
  return gamma;
}

Eigen::MatrixXd pair_density(const Tensor& t) {
  if (t.particles < 2) throw std::invalid_argument("pair_density: needs two particles");
  const Index d = t.dim, R = ipow(d, t.particles - 2);
  Eigen::Map<const RowMat> X(t.data.data(), d * d, R);
  Eigen::VectorXd rows = X.rowwise().squaredNorm();
  Eigen::MatrixXd rho(d, d);
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) rho(a, b) = rows(a * d + b);
  return rho;
}

Eigen::VectorXd onebody_density(const Tensor& t) {
  const Index d = t.dim, R = ipow(d, t.particles - 1);
  Eigen::Map<const RowMat> X(t.data.data(), d, R);
  return X.rowwise().squaredNorm();
}

}  // namespace cmf
