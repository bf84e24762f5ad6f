#pragma once

#include <string>

#include <Eigen/Core>

#include "qloc/direct_imaging.hpp"
#include "qloc/hg_spade.hpp"
#include "qloc/scene.hpp"

namespace qloc {

/// Real symmetric operator in the truncated HG Fock basis |phi_q>,
/// q = 0..q_max (dimension q_max + 1).
using HgOperator = Eigen::MatrixXd;

inline constexpr double kTruncTol = 1e-8;      // max tolerated rho trace deficit
inline constexpr double kEigFloorRel = 1e-12;  // pair floor for the SLD sum
inline constexpr double kSldResidTol = 1e-8;   // SLD defining-relation residual

/// @brief Quantum Fisher information matrix over (theta1, theta2), scaled by
/// the photon budget. k22_defined is false for single-point scenes, where the
/// extent carries no meaning and k22 is reported as 0.
struct QfiMatrix {
  double k11 = 0.0;
  double k22 = 0.0;
  double k12 = 0.0;
  double n_photons = 1.0;
  bool k22_defined = true;
};

/// Single point source: k11 = 4 N dk^2 = N/sigma^2 for the Gaussian PSF.
QfiMatrix qfi_one_point(const GaussianPsf& psf, const PhotonBudget& budget);

/// Closed-form ingredients and nonzero SLD entries of the two-point problem
/// in the orthonormal basis {e1..e4} built from the two source kets and
/// their derivatives. All values follow from the Gaussian overlap integrals.
struct SldEntries {
  double delta = 0.0;   // <psi_1|psi_2>
  double gamma = 0.0;   // int psi'(x) psi(x - theta2) dx  (negative for theta2 > 0)
  double b_sq = 0.0;    // derivative-derivative overlap
  double c3 = 0.0, c4 = 0.0;
  double d1 = 0.0, d2 = 0.0;  // rho eigenvalues (1 -+ delta)/2
  double l1_12 = 0.0, l1_14 = 0.0, l1_23 = 0.0;
  double l2_11 = 0.0, l2_13 = 0.0, l2_22 = 0.0, l2_24 = 0.0;
  bool available = false;  // false at theta2 = 0 where 1/sqrt(1 - delta) blows up
};

struct TwoPointAnalytic {
  QfiMatrix qfi;
  SldEntries sld;
};

/// Analytic two-point QFI: K11 = 4N(dk^2 - gamma^2), K22 = N dk^2.
/// At theta2 = 0 the limiting QfiMatrix is returned with sld.available=false.
TwoPointAnalytic qfi_two_point_analytic(double theta2, const GaussianPsf& psf,
                                        const PhotonBudget& budget);

/// One-photon density operator rho_1 in the truncated HG basis.
/// Throws ConvergenceError when the trace deficit is >= kTruncTol.
HgOperator rho1_hg(const SceneGeometry& geometry, const GaussianPsf& psf,
                   int q_max);

/// Same without the trace-deficit check (convergence diagnostics only).
HgOperator rho1_hg_unchecked(const SceneGeometry& geometry,
                             const GaussianPsf& psf, int q_max);

/// Analytic d rho_1 / d theta in the same basis; finite constellations use
/// the coefficient derivatives, the line uses exact end-point terms.
HgOperator drho1_hg(const SceneGeometry& geometry, const GaussianPsf& psf,
                    int q_max, Param which);

/// Symmetric logarithmic derivative solving drho = (rho L + L rho)/2 on the
/// subspace of eigenvalue pairs above the floor. Throws NumericalError when
/// the defining-relation residual on that subspace exceeds kSldResidTol.
HgOperator sld_from_rho(const HgOperator& rho, const HgOperator& drho);

/// QFI matrix K_mu_nu = N tr(rho {L_mu, L_nu})/2 in the truncated basis,
/// with q_max doubled until the entries change by < 1e-8 relative.
QfiMatrix qfi_matrix(const SceneGeometry& geometry, const GaussianPsf& psf,
                     const PhotonBudget& budget, int q_max = kDefaultQMax);

/// Fixed-q_max evaluation plus diagnostics, without the doubling loop.
struct QfiDiagnostics {
  double trace_deficit = 0.0;
  double sld_residual = 0.0;
};
QfiMatrix qfi_matrix_fixed(const SceneGeometry& geometry,
                           const GaussianPsf& psf, const PhotonBudget& budget,
                           int q_max, QfiDiagnostics* diag = nullptr);

/// @brief Projective measurement in the eigenbasis of the centroid SLD
/// evaluated at a reference scene estimate. Realizable as a (non-HG) SPADE.
struct SldMeasurement {
  Eigen::MatrixXd basis;        // columns: orthonormal eigenvectors, HG basis
  Eigen::VectorXd eigenvalues;  // matching SLD eigenvalues, descending
  double ref_theta1 = 0.0;
  double ref_theta2 = 0.0;
  GaussianPsf psf;

  int dim() const { return static_cast<int>(basis.cols()); }

  /// Outcome distribution p_i = <v_i| rho(theta) |v_i> under a true scene;
  /// tail_mass is the truncation deficit routed to a residual outcome.
  ModalDistribution outcome_probs(const SceneGeometry& true_geometry) const;

  /// Analytic d p_i / d theta under the true scene.
  Eigen::VectorXd outcome_prob_derivative(const SceneGeometry& true_geometry,
                                          Param which) const;

  /// Per-photon classical Fisher information of the outcome distribution.
  double classical_fisher(const SceneGeometry& true_geometry,
                          Param which) const;
};

/// Build the measurement from the SLD of theta1 at the reference estimate.
/// Eigenvectors are ordered by descending eigenvalue; each is sign-fixed so
/// its first non-negligible coordinate is positive (deterministic output for
/// degenerate eigenvalues).
SldMeasurement sld_measurement(const SceneGeometry& reference,
                               const GaussianPsf& psf,
                               int q_max = kDefaultQMax);

/// JSON form: {"reference_theta":[t1,t2],"dim":d,"eigenvalues":[...],
///             "basis_vectors":[[row-major d x d]]}.
std::string sld_measurement_to_json(const SldMeasurement& m);
SldMeasurement sld_measurement_from_json(const std::string& text,
                                         const GaussianPsf& psf);

}  // namespace qloc
