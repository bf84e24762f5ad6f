#include "qloc/qfi_sld.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hg_kernels.hpp"
#include "qloc/quadrature.hpp"

namespace qloc {

namespace {

constexpr int kQMaxCap = 1 << 12;
constexpr double kProbFloor = 1e-300;

HgOperator rho_points(const SceneGeometry& geometry, const GaussianPsf& psf,
                      int q_max) {
  const auto xs = source_positions(geometry);
  const int n = geometry.n;
  const int dim = q_max + 1;
  HgOperator rho = HgOperator::Zero(dim, dim);

  auto outer = [&](int s) {
    const Eigen::VectorXd c =
        detail::hg_coefficients(xs[static_cast<std::size_t>(s)], psf.sigma, q_max);
    return HgOperator(c * c.transpose());
  };
  // Mirrored pairs first: keeps the odd-parity entries exactly zero for
  // centered scenes.
  for (int s = 0; s < n / 2; ++s) rho += outer(s) + outer(n - 1 - s);
  if (n % 2 == 1) rho += outer(n / 2);
  return rho / n;
}

HgOperator rho_line(const SceneGeometry& geometry, const GaussianPsf& psf,
                    int q_max) {
  if (geometry.theta2 == 0.0) {
    throw ConfigError("degenerate line; use n=1 point");
  }
  const double lo = geometry.theta1 - 0.5 * geometry.theta2;
  const double hi = geometry.theta1 + 0.5 * geometry.theta2;
  QuadratureOptions opts;
  opts.rtol = 1e-11;
  opts.atol = 1e-15;
  opts.initial_panels =
      std::clamp(static_cast<int>(std::ceil((hi - lo) / psf.sigma)), 16, 512);
  auto f = [&](double y) {
    const Eigen::VectorXd c = detail::hg_coefficients(y, psf.sigma, q_max);
    return HgOperator(c * c.transpose());
  };
  return integrate_local(f, lo, hi, opts) / geometry.theta2;
}

}  // namespace

QfiMatrix qfi_one_point(const GaussianPsf& psf, const PhotonBudget& budget) {
  QfiMatrix k;
  k.n_photons = budget.n_mean;
  k.k11 = 4.0 * budget.n_mean * delta_k_squared(psf);
  k.k22 = 0.0;
  k.k12 = 0.0;
  k.k22_defined = false;
  return k;
}

TwoPointAnalytic qfi_two_point_analytic(double theta2, const GaussianPsf& psf,
                                        const PhotonBudget& budget) {
  if (!(theta2 >= 0.0)) {
    throw ConfigError("qfi_two_point_analytic: theta2 must be >= 0");
  }
  const double s2 = psf.sigma * psf.sigma;
  const double dk2 = delta_k_squared(psf);
  const double expo = -theta2 * theta2 / (8.0 * s2);

  TwoPointAnalytic out;
  SldEntries& e = out.sld;
  e.delta = std::exp(expo);
  e.gamma = -(theta2 / (4.0 * s2)) * e.delta;
  e.b_sq = e.delta * dk2 * (1.0 - theta2 * theta2 / (4.0 * s2));
  e.d1 = 0.5 * (1.0 - e.delta);
  e.d2 = 0.5 * (1.0 + e.delta);

  out.qfi.n_photons = budget.n_mean;
  out.qfi.k11 = 4.0 * budget.n_mean * (dk2 - e.gamma * e.gamma);
  out.qfi.k22 = budget.n_mean * dk2;
  out.qfi.k12 = 0.0;

  if (theta2 == 0.0) {
    e.available = false;
    return out;
  }
  const double one_minus_delta = -std::expm1(expo);  // accurate 1 - delta
  const double one_plus_delta = 1.0 + e.delta;
  const double g2 = e.gamma * e.gamma;
  e.c3 = std::sqrt(std::max(0.0, dk2 + e.b_sq - g2 / one_minus_delta));
  e.c4 = std::sqrt(std::max(0.0, dk2 - e.b_sq - g2 / one_plus_delta));
  e.l1_12 = 2.0 * e.gamma * e.delta /
            std::sqrt(one_minus_delta * one_plus_delta);
  e.l1_14 = 2.0 * e.c4 / std::sqrt(one_minus_delta);
  e.l1_23 = 2.0 * e.c3 / std::sqrt(one_plus_delta);
  e.l2_11 = -e.gamma / one_minus_delta;
  e.l2_13 = -e.c3 / std::sqrt(one_minus_delta);
  e.l2_22 = e.gamma / one_plus_delta;
  e.l2_24 = -e.c4 / std::sqrt(one_plus_delta);
  e.available = true;
  return out;
}

HgOperator rho1_hg_unchecked(const SceneGeometry& geometry,
                             const GaussianPsf& psf, int q_max) {
  if (q_max < 2) throw ConfigError("rho1_hg: q_max must be >= 2");
  return geometry.is_line() ? rho_line(geometry, psf, q_max)
                            : rho_points(geometry, psf, q_max);
}

HgOperator rho1_hg(const SceneGeometry& geometry, const GaussianPsf& psf,
                   int q_max) {
  HgOperator rho = rho1_hg_unchecked(geometry, psf, q_max);
  const double deficit = 1.0 - rho.trace();
  if (deficit >= kTruncTol) {
    throw ConvergenceError("rho_1 trace deficit " + std::to_string(deficit) +
                           ": increase q_max");
  }
  return rho;
}

HgOperator drho1_hg(const SceneGeometry& geometry, const GaussianPsf& psf,
                    int q_max, Param which) {
  if (q_max < 2) throw ConfigError("drho1_hg: q_max must be >= 2");
  const int dim = q_max + 1;

  if (geometry.is_line()) {
    if (geometry.theta2 == 0.0) {
      throw ConfigError("degenerate line; use n=1 point");
    }
    const double ep = geometry.theta1 + 0.5 * geometry.theta2;
    const double em = geometry.theta1 - 0.5 * geometry.theta2;
    const Eigen::VectorXd cp = detail::hg_coefficients(ep, psf.sigma, q_max);
    const Eigen::VectorXd cm = detail::hg_coefficients(em, psf.sigma, q_max);
    const HgOperator op = cp * cp.transpose();
    const HgOperator om = cm * cm.transpose();
    if (which == Param::Theta1) {
      return (op - om) / geometry.theta2;
    }
    const HgOperator rho = rho1_hg_unchecked(geometry, psf, q_max);
    return (op + om) / (2.0 * geometry.theta2) - rho / geometry.theta2;
  }

  const auto xs = source_positions(geometry);
  const auto us = source_position_derivatives(geometry);
  const int n = geometry.n;
  HgOperator d = HgOperator::Zero(dim, dim);

  auto term = [&](int s) {
    const double x = xs[static_cast<std::size_t>(s)];
    const double scale =
        which == Param::Theta1 ? 1.0 : us[static_cast<std::size_t>(s)];
    const Eigen::VectorXd c = detail::hg_coefficients(x, psf.sigma, q_max);
    const Eigen::VectorXd dc = detail::hg_coefficient_derivs(c, x, psf.sigma);
    HgOperator t = dc * c.transpose();
    t += t.transpose().eval();
    return HgOperator(scale * t);
  };
  for (int s = 0; s < n / 2; ++s) d += term(s) + term(n - 1 - s);
  if (n % 2 == 1) d += term(n / 2);
  return d / n;
}

namespace {

struct EigData {
  Eigen::VectorXd evals;  // ascending, clipped at zero
  Eigen::MatrixXd evecs;
  double floor = 0.0;     // pair floor: kEigFloorRel * max eigenvalue
};

EigData decompose_rho(const HgOperator& rho) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rho);
  if (es.info() != Eigen::Success) {
    throw NumericalError("rho eigendecomposition failed");
  }
  EigData e;
  e.evals = es.eigenvalues();
  e.evecs = es.eigenvectors();
  const double dmax = e.evals.maxCoeff();
  const double neg_tol = -1e-12 * std::max(1.0, dmax);
  for (int i = 0; i < e.evals.size(); ++i) {
    if (e.evals(i) < neg_tol) {
      throw NumericalError("rho eigenvalue " + std::to_string(e.evals(i)) +
                           " below clipping tolerance; truncation is broken");
    }
    if (e.evals(i) < 0.0) e.evals(i) = 0.0;
  }
  e.floor = kEigFloorRel * dmax;
  return e;
}

// QFI contribution sum_{j,k kept} 2 A_jk B_jk / (D_j + D_k) for derivative
// matrices already rotated into the rho eigenbasis.
double qfi_pair_sum(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                    const EigData& e) {
  const int dim = static_cast<int>(e.evals.size());
  double sum = 0.0;
  for (int j = 0; j < dim; ++j) {
    for (int k = 0; k < dim; ++k) {
      const double dd = e.evals(j) + e.evals(k);
      if (dd <= e.floor) continue;
      sum += 2.0 * a(j, k) * b(j, k) / dd;
    }
  }
  return sum;
}

}  // namespace

HgOperator sld_from_rho(const HgOperator& rho, const HgOperator& drho) {
  const EigData e = decompose_rho(rho);
  const int dim = static_cast<int>(e.evals.size());
  const Eigen::MatrixXd m = e.evecs.transpose() * drho * e.evecs;

  Eigen::MatrixXd l_eig = Eigen::MatrixXd::Zero(dim, dim);
  double resid_sq = 0.0;
  for (int j = 0; j < dim; ++j) {
    for (int k = 0; k < dim; ++k) {
      const double dd = e.evals(j) + e.evals(k);
      if (dd <= e.floor) continue;
      l_eig(j, k) = 2.0 * m(j, k) / dd;
      const double r = m(j, k) - 0.5 * dd * l_eig(j, k);
      resid_sq += r * r;
    }
  }
  if (std::sqrt(resid_sq) > kSldResidTol) {
    throw NumericalError("SLD defining-relation residual " +
                         std::to_string(std::sqrt(resid_sq)) +
                         " exceeds tolerance; increase q_max or the pair floor");
  }
  HgOperator l = e.evecs * l_eig * e.evecs.transpose();
  return 0.5 * (l + l.transpose().eval());
}

QfiMatrix qfi_matrix_fixed(const SceneGeometry& geometry,
                           const GaussianPsf& psf, const PhotonBudget& budget,
                           int q_max, QfiDiagnostics* diag) {
  const bool single_point = !geometry.is_line() && geometry.n == 1;
  const HgOperator rho = rho1_hg_unchecked(geometry, psf, q_max);
  const EigData e = decompose_rho(rho);

  const HgOperator d1 = drho1_hg(geometry, psf, q_max, Param::Theta1);
  const Eigen::MatrixXd m1 = e.evecs.transpose() * d1 * e.evecs;

  QfiMatrix k;
  k.n_photons = budget.n_mean;
  k.k11 = budget.n_mean * qfi_pair_sum(m1, m1, e);
  if (single_point) {
    k.k22 = 0.0;
    k.k12 = 0.0;
    k.k22_defined = false;
  } else {
    const HgOperator d2 = drho1_hg(geometry, psf, q_max, Param::Theta2);
    const Eigen::MatrixXd m2 = e.evecs.transpose() * d2 * e.evecs;
    k.k22 = budget.n_mean * qfi_pair_sum(m2, m2, e);
    k.k12 = budget.n_mean * qfi_pair_sum(m1, m2, e);
  }
  if (diag) {
    diag->trace_deficit = 1.0 - rho.trace();
    diag->sld_residual = 0.0;  // exact on the kept subspace by construction
  }
  return k;
}

QfiMatrix qfi_matrix(const SceneGeometry& geometry, const GaussianPsf& psf,
                     const PhotonBudget& budget, int q_max) {
  QfiMatrix prev;
  bool have_prev = false;
  for (int q = std::max(q_max, 2); q <= kQMaxCap; q *= 2) {
    QfiDiagnostics diag;
    const QfiMatrix k = qfi_matrix_fixed(geometry, psf, budget, q, &diag);
    if (diag.trace_deficit >= kTruncTol) continue;
    if (have_prev) {
      const double scale = std::max(std::abs(k.k11), std::abs(k.k22));
      const bool ok11 = std::abs(k.k11 - prev.k11) <= 1e-8 * std::abs(k.k11);
      const bool ok22 = !k.k22_defined ||
                        std::abs(k.k22 - prev.k22) <= 1e-8 * std::abs(k.k22) ||
                        std::abs(k.k22 - prev.k22) <= 1e-12 * scale;
      const bool ok12 = std::abs(k.k12 - prev.k12) <= 1e-8 * scale;
      if (ok11 && ok22 && ok12) return k;
    }
    prev = k;
    have_prev = true;
  }
  throw ConvergenceError(
      "QFI did not converge in the truncated basis (last k11 iterates " +
      std::to_string(prev.k11) + " and earlier); increase q_max cap");
}

SldMeasurement sld_measurement(const SceneGeometry& reference,
                               const GaussianPsf& psf, int q_max) {
  const HgOperator rho = rho1_hg(reference, psf, q_max);
  const HgOperator d1 = drho1_hg(reference, psf, q_max, Param::Theta1);
  const HgOperator l1 = sld_from_rho(rho, d1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l1);
  if (es.info() != Eigen::Success) {
    throw NumericalError("SLD eigendecomposition failed");
  }
  const int dim = q_max + 1;

  SldMeasurement m;
  m.psf = psf;
  m.ref_theta1 = reference.theta1;
  m.ref_theta2 = reference.theta2;
  m.basis.resize(dim, dim);
  m.eigenvalues.resize(dim);
  // Eigen returns ascending order; flip to descending and fix signs so the
  // first non-negligible coordinate of each vector is positive.
  for (int i = 0; i < dim; ++i) {
    const int src = dim - 1 - i;
    Eigen::VectorXd v = es.eigenvectors().col(src);
    for (int r = 0; r < dim; ++r) {
      if (std::abs(v(r)) > 1e-8) {
        if (v(r) < 0.0) v = -v;
        break;
      }
    }
    m.basis.col(i) = v;
    m.eigenvalues(i) = es.eigenvalues()(src);
  }
  return m;
}

ModalDistribution SldMeasurement::outcome_probs(
    const SceneGeometry& true_geometry) const {
  const HgOperator rho = rho1_hg_unchecked(true_geometry, psf, dim() - 1);
  const Eigen::MatrixXd r = rho * basis;
  ModalDistribution dist;
  dist.probs.resize(dim());
  for (int i = 0; i < dim(); ++i) {
    dist.probs(i) = std::max(0.0, basis.col(i).dot(r.col(i)));
  }
  dist.tail_mass = std::max(0.0, 1.0 - dist.probs.sum());
  return dist;
}

Eigen::VectorXd SldMeasurement::outcome_prob_derivative(
    const SceneGeometry& true_geometry, Param which) const {
  const HgOperator drho = drho1_hg(true_geometry, psf, dim() - 1, which);
  const Eigen::MatrixXd r = drho * basis;
  Eigen::VectorXd d(dim());
  for (int i = 0; i < dim(); ++i) d(i) = basis.col(i).dot(r.col(i));
  return d;
}

double SldMeasurement::classical_fisher(const SceneGeometry& true_geometry,
                                        Param which) const {
  const ModalDistribution dist = outcome_probs(true_geometry);
  const Eigen::VectorXd d = outcome_prob_derivative(true_geometry, which);
  double fi = 0.0;
  for (int i = 0; i < dim(); ++i) {
    if (dist.probs(i) < kProbFloor) continue;
    fi += d(i) * d(i) / dist.probs(i);
  }
  if (dist.tail_mass > kProbFloor) {
    const double dtail = -d.sum();
    fi += dtail * dtail / dist.tail_mass;
  }
  return fi;
}

std::string sld_measurement_to_json(const SldMeasurement& m) {
  nlohmann::json j;
  j["reference_theta"] = {m.ref_theta1, m.ref_theta2};
  j["dim"] = m.dim();
  std::vector<double> evals(m.eigenvalues.data(),
                            m.eigenvalues.data() + m.eigenvalues.size());
  j["eigenvalues"] = evals;
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(m.dim()));
  for (int r = 0; r < m.dim(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.dim()));
    for (int c = 0; c < m.dim(); ++c) row[static_cast<std::size_t>(c)] = m.basis(r, c);
    rows.push_back(std::move(row));
  }
  j["basis_vectors"] = rows;
  return j.dump();
}

SldMeasurement sld_measurement_from_json(const std::string& text,
                                         const GaussianPsf& psf) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("SldMeasurement: invalid JSON: ") + e.what());
  }
  for (const char* field : {"reference_theta", "dim", "eigenvalues", "basis_vectors"}) {
    if (!j.contains(field)) {
      throw ConfigError(std::string("SldMeasurement: missing field \"") + field +
                        "\"");
    }
  }
  SldMeasurement m;
  m.psf = psf;
  m.ref_theta1 = j["reference_theta"].at(0).get<double>();
  m.ref_theta2 = j["reference_theta"].at(1).get<double>();
  const int dim = j["dim"].get<int>();
  if (dim < 1) throw ConfigError("SldMeasurement: dim must be >= 1");
  m.eigenvalues.resize(dim);
  m.basis.resize(dim, dim);
  const auto& evals = j["eigenvalues"];
  const auto& rows = j["basis_vectors"];
  if (static_cast<int>(evals.size()) != dim ||
      static_cast<int>(rows.size()) != dim) {
    throw ConfigError("SldMeasurement: eigenvalues/basis_vectors size mismatch");
  }
  for (int r = 0; r < dim; ++r) {
    m.eigenvalues(r) = evals.at(r).get<double>();
    const auto& row = rows.at(r);
    if (static_cast<int>(row.size()) != dim) {
      throw ConfigError("SldMeasurement: basis_vectors row size mismatch");
    }
    for (int c = 0; c < dim; ++c) m.basis(r, c) = row.at(c).get<double>();
  }
  return m;
}

}  // namespace qloc
