#pragma once

#include "vdc/chain.hpp"
#include "vdc/observer.hpp"
#include "vdc/spatial.hpp"

#include <Eigen/Dense>

#include <vector>

namespace vdc {

/// Desired motion of one joint, given as an analytic primitive so that the
/// first and second derivatives are exact.
struct JointTrajectory {
    enum class Kind { Constant, OffsetCosine };

    Kind kind = Kind::Constant;
    double offset = 0.0;
    double amplitude = 0.0;
    double omega = 0.0;   // rad/s
    double phase = 0.0;   // rad

    /// q_d(t) = offset + amplitude * cos(omega t + phase)
    static JointTrajectory offset_cosine(double offset, double amplitude, double omega,
                                         double phase = 0.0)
    {
        return {Kind::OffsetCosine, offset, amplitude, omega, phase};
    }
    static JointTrajectory constant(double value) { return {Kind::Constant, value, 0.0, 0.0, 0.0}; }

    double position(double t) const;
    double velocity(double t) const;
    double acceleration(double t) const;
    double position_bound() const;  // M_d
    double velocity_bound() const;  // M'_d
};

struct TrajectorySample {
    Eigen::VectorXd q;
    Eigen::VectorXd qdot;
    Eigen::VectorXd qddot;
};

class DesiredTrajectory {
public:
    DesiredTrajectory() = default;
    explicit DesiredTrajectory(std::vector<JointTrajectory> joints) : joints_(std::move(joints)) {}

    int size() const { return static_cast<int>(joints_.size()); }
    const JointTrajectory& joint(int i) const { return joints_.at(static_cast<std::size_t>(i)); }
    TrajectorySample sample(double t) const;
    Eigen::VectorXd position_bounds() const;
    Eigen::VectorXd velocity_bounds() const;

private:
    std::vector<JointTrajectory> joints_;
};

/// Controller gains: per joint lambda and k, per link K_B (times identity).
struct ControlGains {
    std::vector<double> lambda;
    std::vector<double> k;
    std::vector<double> link_gain;

    /// Throws std::invalid_argument on wrong sizes or nonpositive gains.
    void validate(int n) const;
};

struct GainSet {
    ObserverGains observer;
    ControlGains control;
};

struct RequiredJointMotion {
    double rate = 0.0;      // q_r'
    double rate_dot = 0.0;  // q_r''
};

/// q_r' = q_d' + lambda (q_d - q_hat), q_r'' = q_d'' + lambda (q_d' - q_hat').
RequiredJointMotion required_joint_motion(double q_d, double qdot_d, double qddot_d,
                                          double q_hat, double q_hat_rate, double lambda);

/// Required velocity recursion and its analytic derivative. The transform
/// rate uses `udot_rate` (the observed joint velocities in closed loop).
VelocityPropagation required_velocity_recursion(const ChainModel& chain, const Eigen::VectorXd& q,
                                                const Eigen::VectorXd& rate,
                                                const Eigen::VectorXd& rate_dot,
                                                const Eigen::VectorXd& udot_rate);

struct RequiredForces {
    FrameSet net_force;     // ^{B_i}F*_r
    FrameSet force;         // ^{B_i}F_r, ^{T_i}F_r and ^{B_0}F_r
    Eigen::VectorXd tau_a;  // tau_air
};

/// F*_r = M V_r' + C(w_hat) V_r + G + K_B (V_r - V_hat) per link, then the
/// inward recursion with ^{T_n}F_r = 0. `v_hat` holds the observed link
/// velocities in {B_1..B_n}.
RequiredForces required_forces(const ChainModel& chain, const Eigen::VectorXd& q,
                               const VelocityPropagation& required,
                               const std::vector<Vec>& v_hat,
                               const std::vector<double>& link_gain);

/// tau = I_m q_r'' + f_c(q_r') + tau_ar + k (q_r' - q_hat').
double joint_torque_command(double rate_dot, double rate, double q_hat_rate, double tau_ar,
                            const JointModel& joint, double k);

}  // namespace vdc
