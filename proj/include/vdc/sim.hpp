#pragma once

#include "vdc/chain.hpp"
#include "vdc/controller.hpp"
#include "vdc/observer.hpp"
#include "vdc/stability.hpp"

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vdc {

/// Plant plus observer states of the closed loop. `pose` holds the
/// measured link pose integrals P_i (dP_i/dt = ^{B_i}V), which the link
/// observers compare against.
struct ClosedLoopState {
    Eigen::VectorXd q;
    Eigen::VectorXd qdot;
    std::vector<Vec> pose;
    std::vector<JointObserverState> joint_obs;
    std::vector<LinkObserverState> link_obs;

    /// Layout: q, qdot, P_1..P_n, q_hat, z, P_hat_1..P_hat_n, Z_1..Z_n.
    Eigen::VectorXd pack() const;
    static ClosedLoopState unpack(const Eigen::VectorXd& x, const ChainModel& chain);
    static int packed_size(const ChainModel& chain);
};

/// Consistent initial state: P_hat = P = forward pose of each {B_i},
/// Z_i = ^{B_i}V (so V_hat(0) = V(0)), z = 0.
ClosedLoopState initial_state(const ChainModel& chain, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& qdot, const Eigen::VectorXd& q_hat);

struct ScenarioConfig {
    ChainModel chain;
    GainSet gains;
    DesiredTrajectory trajectory;
    ClosedLoopState initial;
    double t_end = 20.0;  // s
    double dt = 1e-4;     // s
    int stride = 10;      // output sampling stride in steps

    /// Throws std::invalid_argument on inconsistent sizes or bad timing.
    void validate() const;
};

/// Every intermediate signal of one closed-loop evaluation.
struct LoopSignals {
    double t = 0.0;
    TrajectorySample desired;
    Eigen::VectorXd q, qdot, qddot;
    Eigen::VectorXd q_hat, q_hat_rate;
    Eigen::VectorXd rate, rate_dot;  // q_r', q_r''
    Eigen::VectorXd tau, tau_a, tau_ar;
    std::vector<Vec> v, v_hat, v_r;  // in {B_1..B_n}
    std::vector<double> p_base;      // VPF at {B_0..B_n}
    std::vector<double> p_tip;       // VPF at {T_1..T_n}, index i - 1
    std::vector<double> link_power;
    std::vector<double> joint_power;
    Eigen::VectorXd rates;  // packed state derivative
};

/// One evaluation of the loop in the fixed order: measure, joint observer
/// velocity, link observer velocity, required motion and recursions,
/// required forces and torques, plant dynamics, observer rates.
/// Throws NumericalError on a non-finite intermediate.
LoopSignals evaluate_loop(const ScenarioConfig& config, double t, const Eigen::VectorXd& x);

Eigen::VectorXd closed_loop_rates(const ScenarioConfig& config, double t, const Eigen::VectorXd& x);

/// Error vector x of the stability analysis built from loop signals.
ErrorStateVector error_state(const ScenarioConfig& config, const LoopSignals& s);

AuditSample audit_sample(const ScenarioConfig& config, const LoopSignals& s);

class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double time, Eigen::VectorXd last_good)
        : std::runtime_error(what), time_(time), last_good_(std::move(last_good))
    {
    }
    double time() const { return time_; }
    const Eigen::VectorXd& last_good_state() const { return last_good_; }

private:
    double time_;
    Eigen::VectorXd last_good_;
};

using RateFunction = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;
/// Called with the step index k, t_k = k dt and the state at t_k.
using StepCallback = std::function<void(long long, double, const Eigen::VectorXd&)>;

struct Trajectory {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;
};

/// Classic fixed-step RK4 with N = round(t_end / dt) steps and t_k = k dt.
/// The callback sees every step including k = 0 and k = N. Throws
/// NumericalError (time of failure, last finite state) on a non-finite
/// state and std::invalid_argument on dt <= 0 or t_end < dt.
Eigen::VectorXd integrate_rk4(const RateFunction& f, const Eigen::VectorXd& x0, double t_end,
                              double dt, const StepCallback& on_step);

/// Samples every `stride`-th step, starting with t = 0.
Trajectory integrate_rk4(const RateFunction& f, const Eigen::VectorXd& x0, double t_end, double dt,
                         int stride = 1);

/// The two-link reference scenario: unit links with the centre of mass at
/// the tip, rotor inertia 0.1, tanh friction, observer gains ell = 200,
/// L_B = 200, control gains K_B = 100, k = 10, lambda = 10, desired motion
/// q_d = 0.8 - cos(pi t / 4), 0.8 - cos(pi t / 5), plant at rest at q = 0
/// with q_hat(0) = q_d(0).
ScenarioConfig two_dof_scenario();

/// Closed-form two-link planar dynamics from the Lagrangian, including the
/// rotor inertia and friction. Throws std::invalid_argument unless the
/// chain is a 2-DoF planar chain with centres of mass on the link axes,
/// straight tips and identity mounts.
Eigen::VectorXd lagrangian_oracle(const ChainModel& chain, const Eigen::VectorXd& q,
                                  const Eigen::VectorXd& qdot, const Eigen::VectorXd& tau);

/// One output row.
struct TrajectoryRecord {
    double t = 0.0;
    Eigen::VectorXd q, q_d, error, q_hat, q_hat_rate, qdot, tau;
    LyapunovValue nu;
    double vpf_residual = 0.0;  // |sum link power - sum joint power|
};

struct RunOptions {
    int audit_stride = 1;        // steps between audit samples; 0 disables the audit
    double audit_until = 1e300;  // stop collecting audit samples after this time
};

struct RunResult {
    std::vector<TrajectoryRecord> records;
    std::vector<AuditSample> audit;
    Eigen::VectorXd final_state;
};

/// Integrates the scenario, recording every `config.stride`-th step.
RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

}  // namespace vdc
