#pragma once

#include <string>
#include <utility>
#include <vector>

#include "slfm/matrixnum.hpp"
#include "slfm/priors.hpp"

namespace slfm {

// Second-order mechanistic output model for D outputs driven by R forces:
//   A_d x_d'' + C_d x_d' + kappa_d x_d = sum_r S_{d,r} u_r(t).
// Sign convention: the force term is moved to the input side, so S_{d,r}/A_d
// enters the first-order form with a plus sign (it drives the derivative).
struct OutputModelSpec {
  int D = 1;       // outputs
  int R = 1;       // forces (0 allowed for a degenerate force-free model)
  Vector A;        // masses, size D, nonzero
  Vector C;        // dampings, size D
  Vector kappa;    // spring constants, size D
  Matrix S;        // sensitivities, D x R
};

// What a single state-vector slot holds.
enum class SlotKind {
  Output,            // x_d
  OutputDerivative,  // dx_d/dt
  Force,             // u_r
  ForceDerivative,   // j-th derivative of u_r, j >= 1
};

struct StateSlot {
  SlotKind kind = SlotKind::Output;
  int index = 0;  // output index d or force index r
  int deriv = 0;  // derivative order (0 for Output / Force)
};

// Names every slot of the augmented state vector
// (x_1, x_1', ..., x_D, x_D', z_1, ..., z_R) and maps names back to indices.
class StateLayout {
 public:
  StateLayout() = default;
  StateLayout(int D, std::vector<int> force_dims);

  int dim() const { return dim_; }
  int outputs() const { return D_; }
  int forces() const { return static_cast<int>(force_dims_.size()); }
  int output_block_dim() const { return 2 * D_; }
  int force_block_dim() const { return dim_ - 2 * D_; }

  int output_slot(int d) const;
  int output_deriv_slot(int d) const;
  int force_slot(int r, int deriv = 0) const;
  int force_offset(int r) const;
  int force_dim(int r) const;

  // Description of a slot by index (the reverse mapping).
  StateSlot slot(int idx) const;
  // Index of a named slot; throws InvalidInputError for unknown names.
  int index_of(const StateSlot& s) const;

 private:
  int D_ = 0;
  int dim_ = 0;
  std::vector<int> force_dims_;
  std::vector<int> force_offsets_;
};

// Full continuous-time latent force model: augmented drift/dispersion plus
// the joint Gaussian prior over the initial state.
struct ContinuousModel {
  Matrix F_a;          // n x n drift
  Matrix L_a;          // n x R dispersion (white noise enters force blocks)
  Vector Qc;           // per-force white-noise spectral densities, size R
  StateLayout layout;
  Gaussian prior;      // mean 0, blkdiag(P°_x, P°_{u_1}, ..., P°_{u_R})

  int dim() const { return static_cast<int>(F_a.rows()); }
};

// Linear-Gaussian measurement y = H x + r, r ~ N(0, R). Missing values are
// conveyed per sample by NaN entries in y and handled by row masking.
struct MeasurementModel {
  Matrix H;
  Matrix R;

  int obs_dim() const { return static_cast<int>(H.rows()); }
};

// First-order form (F, L) of the output ODE block: F is 2D x 2D block
// companion with per-output blocks [[0,1],[-kappa_d/A_d, -C_d/A_d]]; L has
// rows [0; S_{d,r}/A_d].
std::pair<Matrix, Matrix> build_output_ssm(const OutputModelSpec& spec);

// Joins the output block with one prior SSM per force: block-diagonal force
// dynamics, coupling of each force's value slot into the output derivative
// rows through L's columns, white noise routed to the last slot of each
// force block. The number of L columns must equal priors.size().
// output_prior_var scales the identity used as the default output-block
// prior covariance.
ContinuousModel augment(const Matrix& F, const Matrix& L,
                        const std::vector<PriorSSM>& priors,
                        double output_prior_var = 1.0);

// Joint initial state with an explicit output-block prior covariance Px0
// (2D x 2D); force blocks keep their stationary priors.
Gaussian initial_state(const ContinuousModel& model, const Matrix& Px0);

// Observation matrix selecting the named slots, in order.
Matrix selection_matrix(const StateLayout& layout,
                        const std::vector<StateSlot>& slots);

// Convenience: measurement model observing all D output slots with noise
// covariance R_obs (D x D).
MeasurementModel observe_outputs(const StateLayout& layout, const Matrix& R_obs);

}  // namespace slfm
