#pragma once

#include "cmf/model.hpp"
#include "cmf/onebody.hpp"
#include "cmf/tensor.hpp"

#include <cstddef>
#include <functional>
#include <string>

namespace cmf {

// Pair kernel on relative offsets of a one-body grid. Free axes use minimum
// image (n offsets), confined axes use offsets -(n-1)..(n-1).
class PairKernel {
 public:
  PairKernel() = default;
  PairKernel(const Grid& g, int free_dim,
             const std::function<double(std::span<const double>, std::span<const double>)>& fn);

  // Kernel value between one-body nodes a and b (flat indices), without prefactor.
  double operator()(Index a, Index b) const;
  // Dense dim x dim table of operator().
  Eigen::MatrixXd table() const;
  // Quadrature of the kernel over the relative grid.
  double integral() const;
  double max_abs() const { return values_.abs().maxCoeff(); }
  const Grid& grid() const { return grid_; }
  int free_dim() const { return free_dim_; }
  Eigen::ArrayXd& values() { return values_; }
  const Eigen::ArrayXd& values() const { return values_; }

 private:
  Index offset_index(std::span<const int> ia, std::span<const int> ib) const;

  Grid grid_;
  int free_dim_ = 0;
  std::vector<Index> rel_shape_;
  Eigen::ArrayXd values_;
};

// theta = 0: w(x, eps y). theta > 0: the rescaled kernel
// eps^{d_c} a^{-d theta} w(a^{-theta} (x, eps y)), a = eps^{d_c}/N, d = d_f + d_c.
// Throws GuardError when the scaled support is under-resolved on the free grid.
PairKernel pair_interaction_values(const ModelSpec& spec);

// Factor multiplying the kernel in the Hamiltonian: 1/(N-1) for theta = 0, 1/N otherwise.
double pair_prefactor(const ModelSpec& spec);
std::string prefactor_convention(const ModelSpec& spec);

struct ManyBodyModel {
  Grid grid;
  int free_dim = 1;
  double eps = 1.0;
  int particles = 2;
  ExternalPotential V;
  PairKernel kernel;
  double prefactor = 1.0;
  std::string convention;
};

ManyBodyModel make_manybody_model(const ModelSpec& spec);

struct ManyBodyState {
  Grid grid;
  Tensor psi;
  double t = 0.0;
};

ManyBodyState product_state(const OneBodyState& s, int particles);

// Bytes held during evolution: state, phase table and pair sum.
std::size_t manybody_memory_estimate(int particles, Index dim);
void check_memory(int particles, Index dim, std::size_t cap_bytes);

constexpr std::size_t kDefaultMemoryCap = std::size_t{2} << 30;

struct EvolveOptions {
  int stride = 1;
  std::size_t memory_cap = kDefaultMemoryCap;
  bool require_symmetric = true;
};

using ManyBodyObserver = std::function<void(const ManyBodyState&)>;

// Strang splitting with merged inner kinetic half steps. The observer sees the
// initial state, every stride-th step and the final state.
ManyBodyState evolve_manybody(const ManyBodyState& s0, const ManyBodyModel& m, double T, double dt,
                              const ManyBodyObserver& observe, const EvolveOptions& opt = {});

std::vector<ManyBodyState> evolve_manybody(const ManyBodyState& s0, const ManyBodyModel& m, double T, double dt,
                                           const EvolveOptions& opt = {});

// Per-particle energy <h_1> + (N-1)/2 <W_12>. Throws InvariantError on asymmetric input.
double manybody_energy(const ManyBodyState& s, const ManyBodyModel& m);
// Same, reusing the one-body density matrix of s.
double manybody_energy(const ManyBodyState& s, const ManyBodyModel& m, const Eigen::MatrixXcd& gamma);

// Dense one-body matrix of -Lap_x - eps^-2 Lap_y on the nodal basis.
Eigen::MatrixXcd kinetic_matrix(const Grid& g, double eps);

// Sum over particles of the one-body potential plus all pair terms, on the full tensor grid.
Eigen::ArrayXd manybody_potential(const ManyBodyModel& m, double t);

}  // namespace cmf
