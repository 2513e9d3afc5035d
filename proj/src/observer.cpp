#include "vdc/observer.hpp"

#include <stdexcept>
#include <string>

namespace vdc {

ObserverGains::ObserverGains(std::vector<double> link_gain, std::vector<double> ell,
                             const ChainModel& chain)
    : link_gain_(std::move(link_gain)), ell_(std::move(ell))
{
    const auto n = static_cast<std::size_t>(chain.dof());
    if (link_gain_.size() != n || ell_.size() != n)
        throw std::invalid_argument("observer gains: expected " + std::to_string(n) +
                                    " link and joint gains");
    big_l_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(link_gain_[i] > 0.0))
            throw std::invalid_argument("observer gains: L_B[" + std::to_string(i + 1) +
                                        "] must be positive");
        if (!(ell_[i] > 0.0))
            throw std::invalid_argument("observer gains: ell[" + std::to_string(i + 1) +
                                        "] must be positive");
        big_l_[i] = ell_[i] + 1.0 / chain.joints[i].rotor_inertia;
    }
}

Vec link_observer_velocity(const LinkObserverState& state, const Vec& pose_meas,
                           const LinkModel& link, double link_gain)
{
    const Mat m = link.mass_matrix();
    return state.aux - m.ldlt().solve(link_gain * (state.pose_hat - pose_meas));
}

LinkObserverRates link_observer_rates(const LinkObserverState& state, const Vec& net_force,
                                      const Vec& pose_meas, const LinkModel& link,
                                      double link_gain, const Vec& gravity)
{
    const Mat m = link.mass_matrix();
    const auto ldlt = m.ldlt();
    LinkObserverRates r;
    r.v_hat = state.aux - ldlt.solve(link_gain * (state.pose_hat - pose_meas));
    r.pose_hat_rate = r.v_hat;
    const Vec3 w_hat = link.dim == Dim::Planar ? Vec3(0.0, 0.0, r.v_hat[2])
                                               : Vec3(r.v_hat.tail<3>());
    r.aux_rate = ldlt.solve(net_force - coriolis_matrix(link, w_hat) * r.v_hat - gravity);
    return r;
}

double joint_observer_velocity(const JointObserverState& state, double q_meas, double big_l)
{
    return state.z - big_l * (state.q_hat - q_meas);
}

JointObserverRates joint_observer_rates(const JointObserverState& state, double tau,
                                        double tau_a, double q_meas, const JointModel& joint,
                                        double ell, double big_l)
{
    JointObserverRates r;
    r.q_hat_rate = joint_observer_velocity(state, q_meas, big_l);
    r.z_rate = (tau - tau_a - joint.friction(r.q_hat_rate) - ell * (state.q_hat - q_meas)) /
               joint.rotor_inertia;
    return r;
}

double joint_composite_error(double rate_error, double position_error, double ell)
{
    return rate_error + ell * position_error;
}

double link_observer_functional(const Vec& velocity_error, const LinkModel& link)
{
    return 0.5 * velocity_error.dot(link.mass_matrix() * velocity_error);
}

double joint_observer_functional(double rate_error, double position_error, double ell,
                                 double rotor_inertia)
{
    const double s = joint_composite_error(rate_error, position_error, ell);
    return 0.5 * rotor_inertia * rate_error * rate_error +
           0.5 * ell * position_error * position_error + 0.5 * rotor_inertia * s * s;
}

ObserverFunctionals observer_error_functionals(const std::vector<Vec>& link_velocity_errors,
                                               const Eigen::VectorXd& joint_rate_errors,
                                               const Eigen::VectorXd& joint_position_errors,
                                               const ChainModel& chain,
                                               const ObserverGains& gains)
{
    const int n = chain.dof();
    if (static_cast<int>(link_velocity_errors.size()) != n || joint_rate_errors.size() != n ||
        joint_position_errors.size() != n)
        throw std::invalid_argument("observer_error_functionals: size mismatch");
    ObserverFunctionals out;
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        out.link.push_back(link_observer_functional(link_velocity_errors[k], chain.links[k]));
        out.joint.push_back(joint_observer_functional(joint_rate_errors[i],
                                                      joint_position_errors[i], gains.ell(i),
                                                      chain.joints[k].rotor_inertia));
        out.s.push_back(
            joint_composite_error(joint_rate_errors[i], joint_position_errors[i], gains.ell(i)));
    }
    return out;
}

}  // namespace vdc
