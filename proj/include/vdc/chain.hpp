#pragma once

#include "vdc/spatial.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace vdc {

/// Joint friction f_c: odd, nondecreasing, globally Lipschitz.
struct Friction {
    enum class Kind { None, Tanh, Viscous, CoulombViscous };

    Kind kind = Kind::Tanh;
    double coulomb = 1.0;   // tanh amplitude
    double slope = 1.0;     // tanh argument scale
    double viscous = 0.0;   // linear coefficient

    static Friction none() { return {Kind::None, 0.0, 0.0, 0.0}; }
    static Friction tanh(double amplitude = 1.0, double slope = 1.0) { return {Kind::Tanh, amplitude, slope, 0.0}; }
    static Friction viscous_only(double b) { return {Kind::Viscous, 0.0, 0.0, b}; }
    static Friction coulomb_viscous(double fc, double slope, double b) { return {Kind::CoulombViscous, fc, slope, b}; }

    double operator()(double rate) const;
    /// Lipschitz constant m_c.
    double lipschitz() const;
};

struct JointModel {
    double rotor_inertia = 0.1;
    Friction friction = Friction::tanh();
    /// Placement of {B_i} at q_i = 0 relative to the parent frame
    /// ({B_0} for the first joint, {T_{i-1}} otherwise).
    RigidTransform mount;
};

/// Alternating joint/link open chain. Joint i drives link i; {B_0} is the
/// fixed base and also the world frame (gravity along -y).
struct ChainModel {
    Dim dim = Dim::Planar;
    std::vector<LinkModel> links;
    std::vector<JointModel> joints;

    int dof() const { return static_cast<int>(links.size()); }
    /// Throws std::invalid_argument on an inconsistent model.
    void validate() const;

    /// ^{parent}U_{B_i}(q_i), i in 1..n.
    TransformMatrix joint_transform(int i, double qi) const;
    /// d/dq_i of the joint transform.
    Mat joint_transform_derivative(int i, double qi) const;
    /// ^{B_i}U_{T_i}, i in 1..n.
    TransformMatrix tip_transform(int i) const;
    /// Frame upstream of joint i.
    static FrameId parent_of(int i) { return i == 1 ? FrameId::base(0) : FrameId::tip(i - 1); }
};

/// One SpatialVector per chain frame: {B_0..B_n} and {T_1..T_n}.
class FrameSet {
public:
    FrameSet(Quantity kind, Dim dim, int n);

    int dof() const { return static_cast<int>(tip_.size()); }
    Quantity kind() const { return kind_; }

    const SpatialVector& base(int i) const { return base_.at(static_cast<std::size_t>(i)); }
    const SpatialVector& tip(int i) const { return tip_.at(static_cast<std::size_t>(i - 1)); }
    const SpatialVector& at(const FrameId& f) const;
    /// Stores v at its own frame; kind must match.
    void set(const SpatialVector& v);

private:
    Quantity kind_;
    std::vector<SpatialVector> base_;
    std::vector<SpatialVector> tip_;
};

/// World placements of {B_0..B_n} (index 0..n) and {T_1..T_n} (index 1..n,
/// entry 0 unused).
struct ChainPlacements {
    std::vector<RigidTransform> base;
    std::vector<RigidTransform> tip;
};

ChainPlacements world_placements(const ChainModel& chain, const Eigen::VectorXd& q);

/// Pose of every frame in the world: planar (x, y, phi); spatial
/// (position, rotation vector).
FrameSet forward_poses(const ChainModel& chain, const Eigen::VectorXd& q);

/// Result of the outward velocity recursion.
struct VelocityPropagation {
    FrameSet velocity;
    std::vector<Vec> base_rate;  // d/dt ^{B_i}V, index 0..n
    std::vector<Vec> tip_rate;   // d/dt ^{T_i}V, index 1..n (0 unused)
};

/// ^{B_i}V = z rate_i + U_i(q_i)^T ^{parent}V, ^{T_i}V = ^{B_i}U_{T_i}^T ^{B_i}V,
/// with the analytic time derivative. The derivative of U_i uses
/// `udot_rate` as dq_i/dt.
VelocityPropagation propagate_velocities(const ChainModel& chain, const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& rate,
                                         const Eigen::VectorXd& rate_dot,
                                         const Eigen::VectorXd& udot_rate);

FrameSet forward_velocities(const ChainModel& chain, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& qdot);

/// Inward force recursion from the net forces ^{B_i}F*: returns the frame
/// forces (with ^{T_n}F = 0 and ^{B_0}F) and the actuation torques
/// tau_ai = z^T ^{B_i}F.
std::pair<FrameSet, Eigen::VectorXd> backward_forces(const ChainModel& chain,
                                                     const Eigen::VectorXd& q,
                                                     const FrameSet& net_forces);

/// Everything the plant-side inverse dynamics produces.
struct ChainDynamics {
    VelocityPropagation motion;
    FrameSet net_force;
    FrameSet force;
    Eigen::VectorXd tau_a;
    Eigen::VectorXd tau;
};

ChainDynamics evaluate_dynamics(const ChainModel& chain, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& qdot, const Eigen::VectorXd& qddot);

Eigen::VectorXd inverse_dynamics(const ChainModel& chain, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qdot, const Eigen::VectorXd& qddot);

/// Joint-space inertia matrix, assembled column by column from inverse
/// dynamics with unit accelerations.
Eigen::MatrixXd joint_inertia(const ChainModel& chain, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& qdot);

Eigen::VectorXd forward_dynamics(const ChainModel& chain, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qdot, const Eigen::VectorXd& tau);

/// Link kinetic energy plus gravitational potential energy (rotor inertia
/// excluded).
double link_energy(const ChainModel& chain, const Eigen::VectorXd& q, const Eigen::VectorXd& qdot);

}  // namespace vdc
