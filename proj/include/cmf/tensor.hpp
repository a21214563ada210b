#pragma once

#include "cmf/grid.hpp"
#include "cmf/spectral.hpp"

#include <span>
#include <vector>

namespace cmf {

// N-particle coefficient tensor over a one-body basis of size dim, stored
// row-major with particle 1 slowest. Grid states use the orthonormal nodal
// basis, c = sqrt(cell^N) psi(nodes), so the Euclidean norm is the L2 norm.
struct Tensor {
  int particles = 0;
  Index dim = 0;
  Eigen::VectorXcd data;

  Tensor() = default;
  Tensor(int n, Index d);
  Tensor(int n, Index d, Eigen::VectorXcd v);

  double norm() const { return data.norm(); }
};

Index ipow(Index base, int exp);

// Nodal coefficients of a grid function and the inverse map.
Eigen::VectorXcd nodal(const GridFunction& f);
GridFunction from_nodal(const Grid& g, const Eigen::VectorXcd& u);

Tensor tensor_power(const Eigen::VectorXcd& u, int n);
Tensor tensor_product(const std::vector<Eigen::VectorXcd>& factors);

// out(x_1..x_N) = in(x_{perm[0]}, .., x_{perm[N-1]}).
Tensor permute(const Tensor& t, std::span<const int> perm);

// ||t - sigma t|| for the transposition of particles i and j, without a copy.
double swap_residual(const Tensor& t, int i, int j);

// Largest ||t - sigma t|| over all transpositions.
double transposition_residual(const Tensor& t);

// Average over all N! permutations, renormalized. Throws InvariantError on zero norm.
Tensor symmetrize(const Tensor& t);

// (U applied to particle k) for a dense dim x dim matrix.
void apply_onebody(Tensor& t, const Eigen::MatrixXcd& U, int particle);

// Applies per-axis multipliers to the axes of one particle, where the one-body
// basis is the grid g.
void apply_axis_multipliers(Tensor& t, const Grid& g, const std::vector<AxisMultiplier>& m, int particle);

// sum_a conj(u_a) t(.., a at position particle, ..); result has N-1 particles.
Tensor contract(const Tensor& t, const Eigen::VectorXcd& u, int particle);

// One-particle density matrix in the nodal basis.
Eigen::MatrixXcd density_matrix(const Tensor& psi);

// Diagonal two-body density rho(a,b) = sum |t(a,b,rest)|^2 (particles 1 and 2).
Eigen::MatrixXd pair_density(const Tensor& t);
// Diagonal one-body density.
Eigen::VectorXd onebody_density(const Tensor& t);

}  // namespace cmf
