#pragma once

#include "vdc/chain.hpp"
#include "vdc/spatial.hpp"

#include <vector>

namespace vdc {

/// Link observer state [P_hat, Z] in the link frame {B_i}.
struct LinkObserverState {
    Vec pose_hat;
    Vec aux;
};

/// Joint observer state [q_hat, z].
struct JointObserverState {
    double q_hat = 0.0;
    double z = 0.0;
};

/// Observer gains. Link gains are scalar multiples of the identity; each
/// joint stores ell and the derived L = ell + 1 / I_m.
class ObserverGains {
public:
    ObserverGains() = default;
    /// Throws std::invalid_argument unless every gain is positive and the
    /// sizes match the chain.
    ObserverGains(std::vector<double> link_gain, std::vector<double> ell, const ChainModel& chain);

    double link_gain(int i) const { return link_gain_.at(static_cast<std::size_t>(i)); }
    double ell(int i) const { return ell_.at(static_cast<std::size_t>(i)); }
    double big_l(int i) const { return big_l_.at(static_cast<std::size_t>(i)); }
    int size() const { return static_cast<int>(ell_.size()); }

    const std::vector<double>& link_gains() const { return link_gain_; }
    const std::vector<double>& ells() const { return ell_; }

private:
    std::vector<double> link_gain_;
    std::vector<double> ell_;
    std::vector<double> big_l_;
};

/// V_hat = Z - M^-1 L_B (P_hat - P).
Vec link_observer_velocity(const LinkObserverState& state, const Vec& pose_meas,
                           const LinkModel& link, double link_gain);

struct LinkObserverRates {
    Vec pose_hat_rate;  // equals v_hat
    Vec aux_rate;
    Vec v_hat;
};

/// P_hat' = Z - M^-1 L_B (P_hat - P),  M Z' = F* - C(w_hat) V_hat - G.
/// `gravity` is G_B at the measured orientation.
LinkObserverRates link_observer_rates(const LinkObserverState& state, const Vec& net_force,
                                      const Vec& pose_meas, const LinkModel& link,
                                      double link_gain, const Vec& gravity);

/// q_hat' = z - L (q_hat - q).
double joint_observer_velocity(const JointObserverState& state, double q_meas, double big_l);

struct JointObserverRates {
    double q_hat_rate = 0.0;
    double z_rate = 0.0;
};

/// q_hat' = z - L (q_hat - q),  I_m z' = tau - tau_a - f_c(q_hat') - ell (q_hat - q).
JointObserverRates joint_observer_rates(const JointObserverState& state, double tau,
                                        double tau_a, double q_meas, const JointModel& joint,
                                        double ell, double big_l);

/// Filtered joint observer error s = (q_hat' - q') + ell (q_hat - q).
double joint_composite_error(double rate_error, double position_error, double ell);

/// 1/2 e^T M e for the link velocity estimation error e = V_hat - V.
double link_observer_functional(const Vec& velocity_error, const LinkModel& link);

/// I_m/2 e^2 + ell/2 d^2 + I_m/2 s^2 with e = q_hat' - q', d = q_hat - q.
double joint_observer_functional(double rate_error, double position_error, double ell,
                                 double rotor_inertia);

struct ObserverFunctionals {
    std::vector<double> link;   // nu_{B_i,obs}
    std::vector<double> joint;  // nu_{i,obs}
    std::vector<double> s;
};

ObserverFunctionals observer_error_functionals(const std::vector<Vec>& link_velocity_errors,
                                               const Eigen::VectorXd& joint_rate_errors,
                                               const Eigen::VectorXd& joint_position_errors,
                                               const ChainModel& chain,
                                               const ObserverGains& gains);

}  // namespace vdc
