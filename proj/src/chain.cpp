#include "vdc/chain.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vdc {

namespace {

void require_size(const Eigen::VectorXd& v, int n, const char* what)
{
    if (v.size() != n)
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(n) +
                                    " entries, got " + std::to_string(v.size()));
}

Vec pose_of(const RigidTransform& t, Dim dim)
{
    if (dim == Dim::Planar) {
        Vec p(3);
        p << t.offset.x(), t.offset.y(), std::atan2(t.rotation(1, 0), t.rotation(0, 0));
        return p;
    }
    const Eigen::AngleAxisd aa(t.rotation);
    Vec p(6);
    p.head<3>() = t.offset;
    p.tail<3>() = aa.axis() * aa.angle();
    return p;
}

}  // namespace

double Friction::operator()(double rate) const
{
    switch (kind) {
    case Kind::None: return 0.0;
    case Kind::Tanh: return coulomb * std::tanh(slope * rate);
    case Kind::Viscous: return viscous * rate;
    case Kind::CoulombViscous: return coulomb * std::tanh(slope * rate) + viscous * rate;
    }
    return 0.0;
}

double Friction::lipschitz() const
{
    switch (kind) {
    case Kind::None: return 0.0;
    case Kind::Tanh: return coulomb * slope;
    case Kind::Viscous: return viscous;
    case Kind::CoulombViscous: return coulomb * slope + viscous;
    }
    return 0.0;
}

void ChainModel::validate() const
{
    if (links.empty())
        throw std::invalid_argument("chain: at least one link required");
    if (links.size() != joints.size())
        throw std::invalid_argument("chain: " + std::to_string(links.size()) + " links but " +
                                    std::to_string(joints.size()) + " joints");
    for (std::size_t i = 0; i < links.size(); ++i) {
        const auto& link = links[i];
        const std::string tag = "link " + std::to_string(i + 1);
        if (link.dim != dim)
            throw std::invalid_argument(tag + ": dimension differs from chain");
        if (!(link.mass > 0.0))
            throw std::invalid_argument(tag + ": mass must be positive");
        const Mat m = link.mass_matrix();
        Eigen::SelfAdjointEigenSolver<Mat> eig(m);
        if (!(eig.eigenvalues().minCoeff() > 0.0))
            throw std::invalid_argument(tag + ": mass matrix not positive definite");
        if (!(link.coriolis_bound > 0.0))
            throw std::invalid_argument(tag + ": Coriolis bound must be positive");
        const auto& joint = joints[i];
        if (!(joint.rotor_inertia > 0.0))
            throw std::invalid_argument("joint " + std::to_string(i + 1) +
                                        ": rotor inertia must be positive");
        if (joint.friction.lipschitz() < 0.0)
            throw std::invalid_argument("joint " + std::to_string(i + 1) +
                                        ": friction must be nondecreasing");
    }
}

TransformMatrix ChainModel::joint_transform(int i, double qi) const
{
    const auto& joint = joints.at(static_cast<std::size_t>(i - 1));
    return TransformMatrix::from_rigid(parent_of(i), FrameId::base(i),
                                       joint.mount * RigidTransform::rot_z(qi), dim);
}

Mat ChainModel::joint_transform_derivative(int i, double qi) const
{
    return TransformMatrix::joint_derivative(joints.at(static_cast<std::size_t>(i - 1)).mount, qi,
                                             dim);
}

TransformMatrix ChainModel::tip_transform(int i) const
{
    return TransformMatrix::from_rigid(FrameId::base(i), FrameId::tip(i),
                                       links.at(static_cast<std::size_t>(i - 1)).tip, dim);
}

FrameSet::FrameSet(Quantity kind, Dim dim, int n) : kind_(kind)
{
    base_.reserve(static_cast<std::size_t>(n + 1));
    tip_.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i <= n; ++i)
        base_.push_back(SpatialVector::zero(FrameId::base(i), kind, dim));
    for (int i = 1; i <= n; ++i)
        tip_.push_back(SpatialVector::zero(FrameId::tip(i), kind, dim));
}

const SpatialVector& FrameSet::at(const FrameId& f) const
{
    switch (f.kind) {
    case FrameId::Kind::Base:
        if (f.index >= 0 && f.index <= dof())
            return base(f.index);
        break;
    case FrameId::Kind::Tip:
        if (f.index >= 1 && f.index <= dof())
            return tip(f.index);
        break;
    default: break;
    }
    throw std::invalid_argument("frame set has no entry for " + to_string(f));
}

void FrameSet::set(const SpatialVector& v)
{
    if (v.kind() != kind_)
        throw std::invalid_argument(std::string("frame set holds ") + to_string(kind_) +
                                    ", got " + to_string(v.kind()));
    const FrameId& f = v.frame();
    if (v.dim() != base_.front().dim())
        throw std::invalid_argument("frame set: dimension mismatch at " + to_string(f));
    if (f.kind == FrameId::Kind::Base && f.index >= 0 && f.index <= dof())
        base_[static_cast<std::size_t>(f.index)] = v;
    else if (f.kind == FrameId::Kind::Tip && f.index >= 1 && f.index <= dof())
        tip_[static_cast<std::size_t>(f.index - 1)] = v;
    else
        throw std::invalid_argument("frame set has no slot for " + to_string(f));
}

ChainPlacements world_placements(const ChainModel& chain, const Eigen::VectorXd& q)
{
    const int n = chain.dof();
    require_size(q, n, "world_placements q");
    ChainPlacements out;
    out.base.resize(static_cast<std::size_t>(n + 1));
    out.tip.resize(static_cast<std::size_t>(n + 1));
    for (int i = 1; i <= n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const RigidTransform& parent = (i == 1) ? out.base[0] : out.tip[k - 1];
        out.base[k] = parent * chain.joints[k - 1].mount * RigidTransform::rot_z(q[i - 1]);
        out.tip[k] = out.base[k] * chain.links[k - 1].tip;
    }
    return out;
}

FrameSet forward_poses(const ChainModel& chain, const Eigen::VectorXd& q)
{
    const int n = chain.dof();
    const ChainPlacements placements = world_placements(chain, q);
    FrameSet poses(Quantity::Pose, chain.dim, n);
    for (int i = 0; i <= n; ++i)
        poses.set({FrameId::base(i), Quantity::Pose,
                   pose_of(placements.base[static_cast<std::size_t>(i)], chain.dim)});
    for (int i = 1; i <= n; ++i)
        poses.set({FrameId::tip(i), Quantity::Pose,
                   pose_of(placements.tip[static_cast<std::size_t>(i)], chain.dim)});
    return poses;
}

VelocityPropagation propagate_velocities(const ChainModel& chain, const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& rate,
                                         const Eigen::VectorXd& rate_dot,
                                         const Eigen::VectorXd& udot_rate)
{
    const int n = chain.dof();
    const int d = size_of(chain.dim);
    require_size(q, n, "q");
    require_size(rate, n, "joint rates");
    require_size(rate_dot, n, "joint rate derivatives");
    require_size(udot_rate, n, "transform rates");

    VelocityPropagation out{FrameSet(Quantity::Velocity, chain.dim, n),
                            std::vector<Vec>(static_cast<std::size_t>(n + 1), Vec::Zero(d)),
                            std::vector<Vec>(static_cast<std::size_t>(n + 1), Vec::Zero(d))};
    const Vec z = joint_axis(chain.dim);
    for (int i = 1; i <= n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const FrameId parent = ChainModel::parent_of(i);
        const SpatialVector& v_parent = out.velocity.at(parent);
        const Vec& a_parent = (i == 1) ? out.base_rate[0] : out.tip_rate[k - 1];

        const TransformMatrix u = chain.joint_transform(i, q[i - 1]);
        const Mat du = chain.joint_transform_derivative(i, q[i - 1]) * udot_rate[i - 1];
        SpatialVector v_base = transform_velocity(u, v_parent);
        v_base = SpatialVector(v_base.frame(), Quantity::Velocity, v_base.data() + z * rate[i - 1]);
        out.base_rate[k] = z * rate_dot[i - 1] + du.transpose() * v_parent.data() +
                           u.data().transpose() * a_parent;

        const TransformMatrix ut = chain.tip_transform(i);
        out.velocity.set(v_base);
        out.velocity.set(transform_velocity(ut, v_base));
        out.tip_rate[k] = ut.data().transpose() * out.base_rate[k];
    }
    return out;
}

FrameSet forward_velocities(const ChainModel& chain, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& qdot)
{
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(chain.dof());
    return propagate_velocities(chain, q, qdot, zero, qdot).velocity;
}

std::pair<FrameSet, Eigen::VectorXd> backward_forces(const ChainModel& chain,
                                                     const Eigen::VectorXd& q,
                                                     const FrameSet& net_forces)
{
    const int n = chain.dof();
    require_size(q, n, "q");
    if (net_forces.kind() != Quantity::Force)
        throw std::invalid_argument("backward_forces: net forces must be forces");
    if (net_forces.dof() != n)
        throw std::invalid_argument("backward_forces: net force set has " +
                                    std::to_string(net_forces.dof()) + " links, chain has " +
                                    std::to_string(n));

    FrameSet forces(Quantity::Force, chain.dim, n);
    Eigen::VectorXd tau_a(n);
    const Vec z = joint_axis(chain.dim);
    // {T_n} carries no external load; the FrameSet starts zeroed.
    for (int i = n; i >= 1; --i) {
        if (i < n) {
            const TransformMatrix u_next = chain.joint_transform(i + 1, q[i]);
            forces.set(transform_force(u_next, forces.base(i + 1)));
        }
        const SpatialVector carried = transform_force(chain.tip_transform(i), forces.tip(i));
        forces.set(net_forces.base(i) + carried);
        tau_a[i - 1] = z.dot(forces.base(i).data());
    }
    forces.set(transform_force(chain.joint_transform(1, q[0]), forces.base(1)));
    return {std::move(forces), std::move(tau_a)};
}

ChainDynamics evaluate_dynamics(const ChainModel& chain, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& qdot, const Eigen::VectorXd& qddot)
{
    const int n = chain.dof();
    require_size(qddot, n, "qddot");
    VelocityPropagation motion = propagate_velocities(chain, q, qdot, qddot, qdot);
    const ChainPlacements placements = world_placements(chain, q);

    FrameSet net(Quantity::Force, chain.dim, n);
    for (int i = 1; i <= n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        net.set(net_force(chain.links[k - 1], motion.velocity.base(i), motion.base_rate[k],
                          placements.base[k].rotation));
    }
    auto [forces, tau_a] = backward_forces(chain, q, net);

    Eigen::VectorXd tau(n);
    for (int i = 0; i < n; ++i) {
        const auto& joint = chain.joints[static_cast<std::size_t>(i)];
        tau[i] = joint.rotor_inertia * qddot[i] + joint.friction(qdot[i]) + tau_a[i];
    }
    return {std::move(motion), std::move(net), std::move(forces), std::move(tau_a),
            std::move(tau)};
}

Eigen::VectorXd inverse_dynamics(const ChainModel& chain, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qdot, const Eigen::VectorXd& qddot)
{
    return evaluate_dynamics(chain, q, qdot, qddot).tau;
}

namespace {

// Column j of the joint-space inertia is the torque for a unit
// acceleration of joint j minus the bias torque at zero acceleration.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> inertia_and_bias(const ChainModel& chain,
                                                            const Eigen::VectorXd& q,
                                                            const Eigen::VectorXd& qdot)
{
    const int n = chain.dof();
    Eigen::VectorXd bias = inverse_dynamics(chain, q, qdot, Eigen::VectorXd::Zero(n));
    Eigen::MatrixXd h(n, n);
    for (int j = 0; j < n; ++j)
        h.col(j) = inverse_dynamics(chain, q, qdot, Eigen::VectorXd::Unit(n, j)) - bias;
    return {std::move(h), std::move(bias)};
}

}  // namespace

Eigen::MatrixXd joint_inertia(const ChainModel& chain, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& qdot)
{
    return inertia_and_bias(chain, q, qdot).first;
}

Eigen::VectorXd forward_dynamics(const ChainModel& chain, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qdot, const Eigen::VectorXd& tau)
{
    require_size(tau, chain.dof(), "tau");
    const auto [h, bias] = inertia_and_bias(chain, q, qdot);
    // Symmetrise away the round-off before the Cholesky solve.
    const Eigen::MatrixXd hs = 0.5 * (h + h.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(hs);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("forward_dynamics: joint inertia matrix is not positive definite");
    return llt.solve(tau - bias);
}

double link_energy(const ChainModel& chain, const Eigen::VectorXd& q, const Eigen::VectorXd& qdot)
{
    const FrameSet v = forward_velocities(chain, q, qdot);
    const ChainPlacements placements = world_placements(chain, q);
    double energy = 0.0;
    for (int i = 1; i <= chain.dof(); ++i) {
        const auto& link = chain.links[static_cast<std::size_t>(i - 1)];
        const Vec& vi = v.base(i).data();
        energy += 0.5 * vi.dot(link.mass_matrix() * vi);
        const RigidTransform& p = placements.base[static_cast<std::size_t>(i)];
        const Vec3 com_world = p.offset + p.rotation * link.com;
        energy += link.mass * link.gravity * com_world.y();
    }
    return energy;
}

}  // namespace vdc
