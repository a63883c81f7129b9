#include "slfm/lfm.hpp"

#include <cmath>

#include "slfm/errors.hpp"

namespace slfm {

StateLayout::StateLayout(int D, std::vector<int> force_dims)
    : D_(D), force_dims_(std::move(force_dims)) {
  if (D_ < 1) throw InvalidInputError("StateLayout: need at least one output");
  int offset = 2 * D_;
  force_offsets_.reserve(force_dims_.size());
  for (int p : force_dims_) {
    if (p < 1) throw InvalidInputError("StateLayout: force block dimension must be >= 1");
    force_offsets_.push_back(offset);
    offset += p;
  }
  dim_ = offset;
}

int StateLayout::output_slot(int d) const {
  if (d < 0 || d >= D_) throw InvalidInputError("StateLayout: output index out of range");
  return 2 * d;
}

int StateLayout::output_deriv_slot(int d) const { return output_slot(d) + 1; }

int StateLayout::force_offset(int r) const {
  if (r < 0 || r >= forces()) {
    throw InvalidInputError("StateLayout: force index out of range");
  }
  return force_offsets_[r];
}

int StateLayout::force_dim(int r) const {
  if (r < 0 || r >= forces()) {
    throw InvalidInputError("StateLayout: force index out of range");
  }
  return force_dims_[r];
}

int StateLayout::force_slot(int r, int deriv) const {
  if (deriv < 0 || deriv >= force_dim(r)) {
    throw InvalidInputError("StateLayout: force derivative order out of range");
  }
  return force_offsets_[r] + deriv;
}

StateSlot StateLayout::slot(int idx) const {
  if (idx < 0 || idx >= dim_) throw InvalidInputError("StateLayout: slot index out of range");
  if (idx < 2 * D_) {
    StateSlot s;
    s.kind = (idx % 2 == 0) ? SlotKind::Output : SlotKind::OutputDerivative;
    s.index = idx / 2;
    s.deriv = idx % 2;
    return s;
  }
  for (int r = 0; r < forces(); ++r) {
    if (idx < force_offsets_[r] + force_dims_[r]) {
      StateSlot s;
      const int j = idx - force_offsets_[r];
      s.kind = (j == 0) ? SlotKind::Force : SlotKind::ForceDerivative;
      s.index = r;
      s.deriv = j;
      return s;
    }
  }
  throw InvalidInputError("StateLayout: slot index out of range");
}

int StateLayout::index_of(const StateSlot& s) const {
  switch (s.kind) {
    case SlotKind::Output:
      return output_slot(s.index);
    case SlotKind::OutputDerivative:
      return output_deriv_slot(s.index);
    case SlotKind::Force:
      return force_slot(s.index, 0);
    case SlotKind::ForceDerivative:
      return force_slot(s.index, s.deriv);
  }
  throw InvalidInputError("StateLayout: unknown slot kind");
}

std::pair<Matrix, Matrix> build_output_ssm(const OutputModelSpec& spec) {
  if (spec.D < 1) throw InvalidInputError("build_output_ssm: need at least one output");
  if (spec.R < 0) throw InvalidInputError("build_output_ssm: negative force count");
  if (spec.A.size() != spec.D || spec.C.size() != spec.D || spec.kappa.size() != spec.D) {
    throw InvalidInputError("build_output_ssm: A/C/kappa must have one entry per output");
  }
  if (spec.S.rows() != spec.D || spec.S.cols() != spec.R) {
    throw InvalidInputError("build_output_ssm: sensitivity matrix must be D x R");
  }
  for (int d = 0; d < spec.D; ++d) {
    if (spec.A(d) == 0.0 || !std::isfinite(spec.A(d))) {
      throw InvalidInputError("build_output_ssm: masses must be nonzero and finite");
    }
  }

  Matrix F = Matrix::Zero(2 * spec.D, 2 * spec.D);
  Matrix L = Matrix::Zero(2 * spec.D, spec.R);
  for (int d = 0; d < spec.D; ++d) {
    F(2 * d, 2 * d + 1) = 1.0;
    F(2 * d + 1, 2 * d) = -spec.kappa(d) / spec.A(d);
    F(2 * d + 1, 2 * d + 1) = -spec.C(d) / spec.A(d);
    for (int r = 0; r < spec.R; ++r) {
      L(2 * d + 1, r) = spec.S(d, r) / spec.A(d);
    }
  }
  return {F, L};
}

ContinuousModel augment(const Matrix& F, const Matrix& L,
                        const std::vector<PriorSSM>& priors,
                        double output_prior_var) {
  const int two_D = static_cast<int>(F.rows());
  if (F.cols() != two_D || two_D < 2 || two_D % 2 != 0) {
    throw InvalidInputError("augment: output drift must be square with even dimension");
  }
  if (L.rows() != two_D) {
    throw InvalidInputError("augment: output dispersion row count must match drift");
  }
  const int R = static_cast<int>(priors.size());
  if (L.cols() != R) {
    throw InvalidInputError(
        "augment: dispersion column count must equal the number of force priors");
  }
  if (!(output_prior_var >= 0.0) || !std::isfinite(output_prior_var)) {
    throw InvalidInputError("augment: output prior variance must be nonnegative");
  }

  std::vector<int> force_dims;
  force_dims.reserve(priors.size());
  for (const auto& p : priors) force_dims.push_back(p.dim());
  StateLayout layout(two_D / 2, force_dims);
  const int n = layout.dim();

  ContinuousModel model;
  model.layout = layout;
  model.F_a = Matrix::Zero(n, n);
  model.L_a = Matrix::Zero(n, R);
  model.Qc = Vector::Zero(R);
  model.F_a.topLeftCorner(two_D, two_D) = F;
  for (int r = 0; r < R; ++r) {
    const int o = layout.force_offset(r);
    const int p = layout.force_dim(r);
    model.F_a.block(o, o, p, p) = priors[r].F_z;
    // Each force's value slot drives the output derivatives through L.
    model.F_a.block(0, o, two_D, 1) = L.col(r);
    model.L_a(o + p - 1, r) = 1.0;
    model.Qc(r) = priors[r].q;
  }

  Matrix P0 = Matrix::Zero(n, n);
  P0.topLeftCorner(two_D, two_D) =
      output_prior_var * Matrix::Identity(two_D, two_D);
  for (int r = 0; r < R; ++r) {
    const int o = layout.force_offset(r);
    const int p = layout.force_dim(r);
    P0.block(o, o, p, p) = priors[r].P0;
  }
  model.prior.mean = Vector::Zero(n);
  model.prior.cov = P0;
  return model;
}

Gaussian initial_state(const ContinuousModel& model, const Matrix& Px0) {
  const int two_D = model.layout.output_block_dim();
  if (Px0.rows() != two_D || Px0.cols() != two_D) {
    throw InvalidInputError("initial_state: output prior covariance has wrong size");
  }
  if ((Px0 - Px0.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + Px0.norm())) {
    throw InvalidInputError("initial_state: output prior covariance must be symmetric");
  }
  Gaussian g = model.prior;
  g.cov.topLeftCorner(two_D, two_D) = symmetrize(Px0);
  return g;
}

Matrix selection_matrix(const StateLayout& layout,
                        const std::vector<StateSlot>& slots) {
  Matrix H = Matrix::Zero(static_cast<Eigen::Index>(slots.size()), layout.dim());
  for (size_t i = 0; i < slots.size(); ++i) {
    H(static_cast<Eigen::Index>(i), layout.index_of(slots[i])) = 1.0;
  }
  return H;
}

MeasurementModel observe_outputs(const StateLayout& layout, const Matrix& R_obs) {
  const int D = layout.outputs();
  if (R_obs.rows() != D || R_obs.cols() != D) {
    throw InvalidInputError("observe_outputs: noise covariance must be D x D");
  }
  std::vector<StateSlot> slots(D);
  for (int d = 0; d < D; ++d) slots[d] = {SlotKind::Output, d, 0};
  MeasurementModel m;
  m.H = selection_matrix(layout, slots);
  m.R = symmetrize(R_obs);
  return m;
}

}  // namespace slfm
