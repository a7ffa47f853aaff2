#include "pstn/cpab/basis.hpp"

#include <Eigen/SVD>

#include "pstn/common/error.hpp"

namespace pstn::cpab {

ConstraintBasis ConstraintBasis::build(const Tessellation& tessellation) {
  ConstraintBasis out;
  out.constraints_ = tessellation.constraint_matrix();
  const Eigen::Index cols = static_cast<Eigen::Index>(tessellation.raw_dim());

  if (out.constraints_.rows() == 0) {
    out.basis_ = Eigen::MatrixXd::Identity(cols, cols);
    return out;
  }

  // Full V is needed when L has fewer rows than columns.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.constraints_, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = kRankTolerance * (sv.size() ? sv(0) : 0.0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++rank;
  }
  out.rank_ = rank;
  const Eigen::Index null_dim = cols - static_cast<Eigen::Index>(rank);
  if (null_dim <= 0) {
    throw ConfigError("tessellation constraints leave no degrees of freedom (D = 0)");
  }
  out.basis_ = svd.matrixV().rightCols(null_dim);

  // Fix each column's sign so the basis does not depend on SVD conventions.
  for (Eigen::Index j = 0; j < out.basis_.cols(); ++j) {
    Eigen::Index arg = 0;
    out.basis_.col(j).cwiseAbs().maxCoeff(&arg);
    if (out.basis_(arg, j) < 0) out.basis_.col(j) *= -1.0;
  }
  return out;
}

std::vector<double> ConstraintBasis::raw_params(std::span<const double> theta) const {
  if (theta.size() != dim()) {
    throw ConfigError("CPAB theta has " + std::to_string(theta.size()) + " entries, basis has " +
                      std::to_string(dim()));
  }
  Eigen::Map<const Eigen::VectorXd> t(theta.data(), static_cast<Eigen::Index>(theta.size()));
  const Eigen::VectorXd raw = basis_ * t;
  return std::vector<double>(raw.data(), raw.data() + raw.size());
}

VelocityField::VelocityField(const Tessellation& tessellation, std::vector<double> raw_params)
    : tessellation_(&tessellation), raw_(std::move(raw_params)) {
  if (raw_.size() != tessellation.raw_dim()) {
    throw ConfigError("velocity field needs " + std::to_string(tessellation.raw_dim()) +
                      " raw parameters");
  }
}

VelocityField::VelocityField(const Tessellation& tessellation, const ConstraintBasis& basis,
                             std::span<const double> theta)
    : VelocityField(tessellation, basis.raw_params(theta)) {}

std::span<const double> VelocityField::cell_params(std::size_t cell) const {
  const std::size_t ppc = tessellation_->params_per_cell();
  return std::span<const double>(raw_).subspan(cell * ppc, ppc);
}

void VelocityField::evaluate_in(std::size_t cell, std::span<const double> x,
                                std::span<double> v) const {
  const std::size_t d = dim();
  const double* a = raw_.data() + cell * tessellation_->params_per_cell();
  for (std::size_t i = 0; i < d; ++i) {
    const double* row = a + i * (d + 1);
    double s = row[d];
    for (std::size_t j = 0; j < d; ++j) s += row[j] * x[j];
    v[i] = s;
  }
}

void VelocityField::evaluate(std::span<const double> x, std::span<double> v) const {
  evaluate_in(tessellation_->cell_of(x), x, v);
}

}  // namespace pstn::cpab
