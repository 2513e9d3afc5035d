#include "vdc/controller.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vdc {

double JointTrajectory::position(double t) const
{
    if (kind == Kind::Constant)
        return offset;
    return offset + amplitude * std::cos(omega * t + phase);
}

double JointTrajectory::velocity(double t) const
{
    if (kind == Kind::Constant)
        return 0.0;
    return -amplitude * omega * std::sin(omega * t + phase);
}

double JointTrajectory::acceleration(double t) const
{
    if (kind == Kind::Constant)
        return 0.0;
    return -amplitude * omega * omega * std::cos(omega * t + phase);
}

double JointTrajectory::position_bound() const { return std::abs(offset) + std::abs(amplitude); }

double JointTrajectory::velocity_bound() const
{
    return kind == Kind::Constant ? 0.0 : std::abs(amplitude * omega);
}

TrajectorySample DesiredTrajectory::sample(double t) const
{
    const int n = size();
    TrajectorySample s{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (int i = 0; i < n; ++i) {
        const auto& j = joint(i);
        s.q[i] = j.position(t);
        s.qdot[i] = j.velocity(t);
        s.qddot[i] = j.acceleration(t);
    }
    return s;
}

Eigen::VectorXd DesiredTrajectory::position_bounds() const
{
    Eigen::VectorXd b(size());
    for (int i = 0; i < size(); ++i)
        b[i] = joint(i).position_bound();
    return b;
}

Eigen::VectorXd DesiredTrajectory::velocity_bounds() const
{
    Eigen::VectorXd b(size());
    for (int i = 0; i < size(); ++i)
        b[i] = joint(i).velocity_bound();
    return b;
}

void ControlGains::validate(int n) const
{
    const auto un = static_cast<std::size_t>(n);
    if (lambda.size() != un || k.size() != un || link_gain.size() != un)
        throw std::invalid_argument("control gains: expected " + std::to_string(n) +
                                    " entries per gain");
    for (std::size_t i = 0; i < un; ++i) {
        const std::string idx = "[" + std::to_string(i + 1) + "]";
        if (!(lambda[i] > 0.0))
            throw std::invalid_argument("control gains: lambda" + idx + " must be positive");
        if (!(k[i] > 0.0))
            throw std::invalid_argument("control gains: k" + idx + " must be positive");
        if (!(link_gain[i] > 0.0))
            throw std::invalid_argument("control gains: K_B" + idx + " must be positive");
    }
}

RequiredJointMotion required_joint_motion(double q_d, double qdot_d, double qddot_d,
                                          double q_hat, double q_hat_rate, double lambda)
{
    return {qdot_d + lambda * (q_d - q_hat), qddot_d + lambda * (qdot_d - q_hat_rate)};
}

VelocityPropagation required_velocity_recursion(const ChainModel& chain, const Eigen::VectorXd& q,
                                                const Eigen::VectorXd& rate,
                                                const Eigen::VectorXd& rate_dot,
                                                const Eigen::VectorXd& udot_rate)
{
    return propagate_velocities(chain, q, rate, rate_dot, udot_rate);
}

RequiredForces required_forces(const ChainModel& chain, const Eigen::VectorXd& q,
                               const VelocityPropagation& required,
                               const std::vector<Vec>& v_hat,
                               const std::vector<double>& link_gain)
{
    const int n = chain.dof();
    if (static_cast<int>(v_hat.size()) != n || static_cast<int>(link_gain.size()) != n)
        throw std::invalid_argument("required_forces: expected one observed velocity and gain per link");
    if (required.velocity.dof() != n)
        throw std::invalid_argument("required_forces: required velocities missing frames");

    const ChainPlacements placements = world_placements(chain, q);
    FrameSet net(Quantity::Force, chain.dim, n);
    for (int i = 1; i <= n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const LinkModel& link = chain.links[k - 1];
        const Vec& vr = required.velocity.base(i).data();
        const Vec& vh = v_hat[k - 1];
        if (vh.size() != vr.size())
            throw std::invalid_argument("required_forces: observed velocity dimension mismatch");
        const Vec3 w_hat = link.dim == Dim::Planar ? Vec3(0.0, 0.0, vh[2]) : Vec3(vh.tail<3>());
        const Vec g = gravity_vector(link, placements.base[k].rotation).data();
        Vec f = link.mass_matrix() * required.base_rate[k] + coriolis_matrix(link, w_hat) * vr + g +
                link_gain[k - 1] * (vr - vh);
        net.set({FrameId::base(i), Quantity::Force, f});
    }
    auto [forces, tau_a] = backward_forces(chain, q, net);
    return {std::move(net), std::move(forces), std::move(tau_a)};
}

double joint_torque_command(double rate_dot, double rate, double q_hat_rate, double tau_ar,
                            const JointModel& joint, double k)
{
    return joint.rotor_inertia * rate_dot + joint.friction(rate) + tau_ar +
           k * (rate - q_hat_rate);
}

}  // namespace vdc
