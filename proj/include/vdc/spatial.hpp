#pragma once

#include <Eigen/Dense>

#include <string>

namespace vdc {

/// Dimension of the frame-attached vectors. Planar vectors are ordered
/// [v_x, v_y, w] (or [f_x, f_y, m]); spatial vectors are [linear; angular].
enum class Dim : int { Planar = 3, Spatial = 6 };

inline constexpr int size_of(Dim d) { return static_cast<int>(d); }

// Fixed-capacity dynamic types; no heap traffic in the inner loops.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 6, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 6>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

enum class Quantity { Velocity, Force, Pose };

const char* to_string(Quantity q);

/// Label of a frame in the decomposed chain: {B_i}, {T_i}, the world, or a
/// free-standing frame used in tests and demos.
struct FrameId {
    enum class Kind { Base, Tip, World, Free };
    Kind kind = Kind::Free;
    int index = 0;

    static FrameId base(int i) { return {Kind::Base, i}; }
    static FrameId tip(int i) { return {Kind::Tip, i}; }
    static FrameId world() { return {Kind::World, 0}; }
    static FrameId free(int i) { return {Kind::Free, i}; }

    friend bool operator==(const FrameId&, const FrameId&) = default;
};

std::string to_string(const FrameId& f);

/// A velocity, force or pose vector expressed in a named frame.
class SpatialVector {
public:
    SpatialVector(FrameId frame, Quantity kind, Vec data);

    static SpatialVector zero(FrameId frame, Quantity kind, Dim dim);

    const FrameId& frame() const { return frame_; }
    Quantity kind() const { return kind_; }
    Dim dim() const { return static_cast<Dim>(data_.size()); }
    const Vec& data() const { return data_; }
    double operator[](int i) const { return data_[i]; }

    /// Angular part: planar w (size 1) or spatial w (size 3), as a 3-vector
    /// about the frame axes.
    Vec3 angular() const;

    SpatialVector operator+(const SpatialVector& o) const;
    SpatialVector operator-(const SpatialVector& o) const;
    SpatialVector operator*(double s) const;

private:
    FrameId frame_;
    Quantity kind_;
    Vec data_;
};

/// Power pairing V . F of a velocity and a force expressed in the same frame.
double power(const SpatialVector& velocity, const SpatialVector& force);

/// Rigid placement of frame B relative to frame A: rotation ^A R_B and the
/// origin of B expressed in A.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 offset = Vec3::Zero();

    static RigidTransform planar(double angle, double dx, double dy);
    static RigidTransform rot_z(double angle);

    RigidTransform operator*(const RigidTransform& o) const;
};

/// Force/moment transformation ^A U_B: maps a force measured in {B} to the
/// same force expressed in {A}. Velocities go the other way via U^T.
class TransformMatrix {
public:
    TransformMatrix(FrameId from, FrameId to, Mat data);

    /// Builds ^A U_B from the rigid placement of B in A.
    static TransformMatrix from_rigid(FrameId from, FrameId to, const RigidTransform& t, Dim dim);
    static TransformMatrix identity(FrameId from, FrameId to, Dim dim);

    /// d/dtheta of ^A U_B for a placement t * Rz(theta), evaluated at theta.
    static Mat joint_derivative(const RigidTransform& mount, double theta, Dim dim);

    const FrameId& from_frame() const { return from_; }
    const FrameId& to_frame() const { return to_; }
    const Mat& data() const { return data_; }
    Dim dim() const { return static_cast<Dim>(data_.rows()); }

private:
    FrameId from_;
    FrameId to_;
    Mat data_;
};

TransformMatrix planar_rigid_transform(double rotation, const Eigen::Vector2d& offset,
                                       FrameId from = FrameId::free(0),
                                       FrameId to = FrameId::free(1));

/// ^B V = ^A U_B^T ^A V.
SpatialVector transform_velocity(const TransformMatrix& u, const SpatialVector& v);

/// ^A F = ^A U_B ^B F.
SpatialVector transform_force(const TransformMatrix& u, const SpatialVector& f);

/// Selects the planar rows/columns {x, y, yaw} out of a 6-vector / 6x6 matrix.
Vec project(const Vec6& v, Dim dim);
Mat project(const Mat6& m, Dim dim);

Mat3 skew(const Vec3& v);

/// Inertial parameters of one rigid link, with its body frame {B} at the
/// joint. The centre of mass sits at `com` in {B}; `inertia_com` is the
/// rotational inertia about the centre of mass.
struct LinkModel {
    Dim dim = Dim::Planar;
    double mass = 1.0;
    Vec3 com = Vec3::Zero();
    Mat3 inertia_com = Mat3::Zero();
    double gravity = 9.81;
    /// Placement of the tip frame {T} in {B}.
    RigidTransform tip;
    /// Relative bound M_c with ||C(w)|| <= M_c ||w||.
    double coriolis_bound = 0.0;

    /// Planar link: COM at (com_x, com_y), scalar inertia about the COM,
    /// tip at (length, 0). The Coriolis bound defaults to ||C(1)||.
    static LinkModel planar(double mass, double com_x, double com_y, double inertia,
                            double length, double gravity = 9.81);
    static LinkModel spatial(double mass, const Vec3& com, const Mat3& inertia_com,
                             const RigidTransform& tip, double gravity = 9.81);

    Mat mass_matrix() const;
    /// Default relative Coriolis bound: exact for planar links, an upper
    /// bound from block norms for spatial links.
    double default_coriolis_bound() const;
};

/// C_B(w) of the link, skew-symmetric and linear in w. Planar links read
/// only w.z().
Mat coriolis_matrix(const LinkModel& link, const Vec3& omega);
Mat coriolis_matrix(const LinkModel& link, double omega_z);

/// G_B for a body frame whose absolute orientation is `world_from_body`.
/// World gravity points along -y.
SpatialVector gravity_vector(const LinkModel& link, const Mat3& world_from_body,
                             FrameId frame = FrameId::free(0));
SpatialVector gravity_vector(const LinkModel& link, double orientation,
                             FrameId frame = FrameId::free(0));

/// F* = M_B dV/dt + C_B(w) V + G_B, all in the link frame {B}.
SpatialVector net_force(const LinkModel& link, const SpatialVector& v, const Vec& vdot,
                        const Mat3& world_from_body);
SpatialVector net_force(const LinkModel& link, const SpatialVector& v, const Vec& vdot,
                        double orientation);

/// Joint-axis selector z_tau: the yaw component.
Vec joint_axis(Dim dim);

}  // namespace vdc
