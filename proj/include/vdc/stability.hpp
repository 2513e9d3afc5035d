#pragma once

#include "vdc/chain.hpp"
#include "vdc/controller.hpp"
#include "vdc/spatial.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vdc {

/// Thrown when a precondition of the attraction-region formula fails.
class HypothesisViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Signed distance to one strict inequality; the inequality holds iff
/// value > 0.
struct Margin {
    std::string condition;
    double value = 0.0;

    bool holds() const { return value > 0.0; }
};

struct Verdict {
    std::vector<Margin> margins;

    bool pass() const;
    /// Condition text of the first failing margin, empty if none fails.
    std::string first_violation() const;
};

/// p_A = (V_r - V)^T (F_r - F); all four vectors in the same frame.
double virtual_power_flow(const SpatialVector& v_required, const SpatialVector& v,
                          const SpatialVector& f_required, const SpatialVector& f);

/// Link condition: K_B > 1 and L_B > M_c M_v (1 + M_c M_v / 2) + K_B / 2.
/// Throws std::invalid_argument on nonpositive K_B, L_B, M_c or negative M_v.
Verdict check_link_gains(double k_b, double l_b, double coriolis_bound, double velocity_bound);

/// Joint condition with L = ell + 1/I_m: ell > 0 and 2 I_m L > max(2, m_c^2 + k).
/// Throws std::invalid_argument if k <= 0 or I_m <= 0.
Verdict check_joint_gains(double k, double ell, double rotor_inertia, double friction_lipschitz);

/// Largest link velocity norm for which the link condition holds:
/// (sqrt(1 + 2 L_B - K_B) - 1) / M_c. Throws HypothesisViolation when
/// 1 + 2 L_B - K_B < 0.
double certified_velocity_bound(double k_b, double l_b, double coriolis_bound);

struct StabilityBounds {
    std::vector<double> coriolis;            // M_c per link
    std::vector<double> velocity;            // M_v per link
    std::vector<double> friction_lipschitz;  // m_c per joint
    double transform_norm = 1.0;             // M_U
    double alpha_m = 0.0;
    double alpha_M = 0.0;
    double alpha_p = 0.0;
    std::vector<double> link_control_margin;   // (K_B - 1) / 2
    std::vector<double> link_observer_margin;  // L_B - M_c M_v (1 + M_c M_v / 2) - K_B / 2
    std::vector<double> joint_observer_margin; // I_m L - (m_c^2 + k) / 2
};

/// M_U = max(1, ||^{B_{i-1}}U_{B_i}||).
double chain_transform_bound(const ChainModel& chain);
double alpha_min(const ChainModel& chain);
double alpha_max(const ChainModel& chain, const ObserverGains& gains);

/// All constants of the stability argument for the given link velocity
/// bounds M_v.
StabilityBounds stability_bounds(const ChainModel& chain, const GainSet& gains,
                                 const std::vector<double>& velocity_bounds);

struct AttractionRadius {
    double radius = 0.0;
    std::vector<double> per_link;
    std::vector<double> velocity_kernel;  // certified velocity bound per link
    bool empty() const { return !(radius > 0.0); }
};

/// Radius of the certified ball of initial errors. Requires
/// 4 lambda_i > 1/alpha_M and 1 + 2 L_B - K_B >= 0 (HypothesisViolation).
AttractionRadius attraction_radius(const ChainModel& chain, const GainSet& gains,
                                   const StabilityBounds& bounds,
                                   const Eigen::VectorXd& desired_velocity_bounds);

/// Per-link velocity bound induced by the desired motion alone:
/// sum_{k<=i} M_U^k M'_{d,k}.
std::vector<double> trajectory_velocity_bounds(const ChainModel& chain,
                                               const Eigen::VectorXd& desired_velocity_bounds);

/// Error vector x: per subsystem i the block
/// [V_r - V (d), V_hat - V (d), q_r' - q', q_hat' - q', s].
class ErrorStateVector {
public:
    ErrorStateVector() = default;
    ErrorStateVector(Dim dim, int n);

    static int block_size(Dim dim) { return 2 * size_of(dim) + 3; }

    Dim dim() const { return dim_; }
    int dof() const { return n_; }
    const Eigen::VectorXd& data() const { return data_; }
    Eigen::VectorXd& data() { return data_; }

    Eigen::VectorBlock<Eigen::VectorXd> link_control(int i);
    Eigen::VectorBlock<Eigen::VectorXd> link_observer(int i);
    double& joint_control(int i);
    double& joint_observer(int i);
    double& composite(int i);

    Eigen::VectorXd link_control(int i) const;
    Eigen::VectorXd link_observer(int i) const;
    double joint_control(int i) const;
    double joint_observer(int i) const;
    double composite(int i) const;

private:
    int offset(int i) const { return i * block_size(dim_); }

    Dim dim_ = Dim::Planar;
    int n_ = 0;
    Eigen::VectorXd data_;
};

struct LyapunovValue {
    double total = 0.0;
    std::vector<double> link;   // nu_{B_i} = nu_{B_i,ctrl} + nu_{B_i,obs}
    std::vector<double> joint;  // nu_{ai}
};

LyapunovValue lyapunov_total(const ChainModel& chain, const ObserverGains& gains,
                             const ErrorStateVector& x);

struct GainCertificate {
    std::vector<Verdict> links;
    std::vector<Verdict> joints;
    Verdict hypothesis;  // region preconditions
    std::vector<double> certified_velocity;
    std::vector<double> trajectory_velocity;
    StabilityBounds bounds;
    double radius = 0.0;

    bool pass() const;
    std::vector<std::string> violations() const;
};

/// Link conditions evaluated at the velocity bound induced by the desired
/// trajectory, joint conditions, region hypotheses and the radius.
GainCertificate certify_gains(const ChainModel& chain, const GainSet& gains,
                              const DesiredTrajectory& trajectory);

/// Per-step audit input, produced by the simulator.
struct AuditSample {
    double t = 0.0;
    ErrorStateVector x;
    std::vector<double> p_base;         // p_{B_i}, i = 0..n
    std::vector<double> p_tip;          // p_{T_i}, index i - 1
    std::vector<double> link_power;     // (V_r - V)^T (F*_r - F*) per link
    std::vector<double> joint_power;    // (q_r' - q') (tau_ar - tau_a) per joint
    std::vector<double> velocity_norm;  // ||^{B_i}V|| per link
};

struct AuditOptions {
    double tolerance_factor = 10.0;
    double residual_tolerance = 1e-10;
    double fit_start = 0.0;
    double fit_end = 1.0;
    /// Absolute resolution of the error-state components in double
    /// precision. The roundoff injected each step moves nu by up to
    /// alpha_M |x| resolution, so this adds alpha_M |x| resolution / dt to
    /// the derivative tolerance.
    double state_resolution = 1e-12;
    /// Overrides the realized sup ||V|| when non-empty.
    std::vector<double> velocity_bounds;
};

struct AuditReport {
    std::size_t samples = 0;
    double dt = 0.0;
    StabilityBounds bounds;
    std::vector<double> realized_velocity;
    std::vector<double> nu;
    std::vector<double> nu_rate;    // central difference, NaN at the ends
    std::vector<double> tolerance;  // per-step finite-difference tolerance
    std::size_t decay_violations = 0;
    std::size_t roundoff_limited = 0;  // steps that pass only through the resolution term
    double worst_decay_excess = 0.0;  // max of nu' + alpha_p |x|^2 - tol
    double worst_decay_time = 0.0;
    std::size_t monotone_violations = 0;
    std::vector<std::size_t> link_subsystem_violations;
    std::vector<std::size_t> joint_subsystem_violations;
    double max_telescoping_residual = 0.0;
    double max_link_identity_residual = 0.0;
    double max_joint_identity_residual = 0.0;
    double fitted_rate = 0.0;  // slope of log nu over the fit window
    double nu_ratio = 0.0;     // nu(fit_end) / nu(fit_start)

    bool pass(double residual_tolerance = 1e-10) const;
};

/// Finite-difference Lyapunov audit of a uniformly sampled run.
/// Throws std::invalid_argument on non-uniform sampling or fewer than 7
/// samples.
AuditReport decay_audit(const std::vector<AuditSample>& trajectory, const ChainModel& chain,
                        const GainSet& gains, const AuditOptions& options = {});

}  // namespace vdc
