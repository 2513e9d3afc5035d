#include "vdc/spatial.hpp"

#include <cmath>
#include <stdexcept>

namespace vdc {

namespace {

constexpr int kPlanarIndex[3] = {0, 1, 5};

void require_same(const SpatialVector& a, const SpatialVector& b, const char* op)
{
    if (a.kind() != b.kind())
        throw std::invalid_argument(std::string(op) + ": mixing " + to_string(a.kind()) +
                                    " and " + to_string(b.kind()));
    if (!(a.frame() == b.frame()))
        throw std::invalid_argument(std::string(op) + ": frame mismatch " +
                                    to_string(a.frame()) + " vs " + to_string(b.frame()));
}

Mat6 spatial_force_transform(const RigidTransform& t)
{
    Mat6 u = Mat6::Zero();
    u.topLeftCorner<3, 3>() = t.rotation;
    u.bottomLeftCorner<3, 3>() = skew(t.offset) * t.rotation;
    u.bottomRightCorner<3, 3>() = t.rotation;
    return u;
}

Mat6 spatial_mass_matrix(const LinkModel& link)
{
    const Mat3 sc = skew(link.com);
    Mat6 m = Mat6::Zero();
    m.topLeftCorner<3, 3>() = link.mass * Mat3::Identity();
    m.topRightCorner<3, 3>() = -link.mass * sc;
    m.bottomLeftCorner<3, 3>() = link.mass * sc;
    m.bottomRightCorner<3, 3>() = link.inertia_com - link.mass * sc * sc;
    return m;
}

Mat6 spatial_coriolis(const LinkModel& link, const Vec3& w)
{
    const Mat3 sw = skew(w);
    const Mat3 sc = skew(link.com);
    const Mat3 inertia_origin = link.inertia_com - link.mass * sc * sc;
    Mat6 c = Mat6::Zero();
    c.topLeftCorner<3, 3>() = link.mass * sw;
    // m S(c) S(w) = (m S(w) S(c))^T; mirrored so C is skew to the last bit.
    const Mat3 coupling = link.mass * (sw * sc);
    c.topRightCorner<3, 3>() = -coupling;
    c.bottomLeftCorner<3, 3>() = coupling.transpose();
    c.bottomRightCorner<3, 3>() = -skew(inertia_origin * w);
    return c;
}

Vec3 angular_of(const Vec& data)
{
    if (data.size() == 3)
        return Vec3(0.0, 0.0, data[2]);
    return data.tail<3>();
}

}  // namespace

const char* to_string(Quantity q)
{
    switch (q) {
    case Quantity::Velocity: return "velocity";
    case Quantity::Force: return "force";
    case Quantity::Pose: return "pose";
    }
    return "?";
}

std::string to_string(const FrameId& f)
{
    switch (f.kind) {
    case FrameId::Kind::Base: return "B" + std::to_string(f.index);
    case FrameId::Kind::Tip: return "T" + std::to_string(f.index);
    case FrameId::Kind::World: return "W";
    case FrameId::Kind::Free: return "F" + std::to_string(f.index);
    }
    return "?";
}

SpatialVector::SpatialVector(FrameId frame, Quantity kind, Vec data)
    : frame_(frame), kind_(kind), data_(std::move(data))
{
    if (data_.size() != 3 && data_.size() != 6)
        throw std::invalid_argument("spatial vector dimension must be 3 or 6, got " +
                                    std::to_string(data_.size()));
}

SpatialVector SpatialVector::zero(FrameId frame, Quantity kind, Dim dim)
{
    return {frame, kind, Vec::Zero(size_of(dim))};
}

Vec3 SpatialVector::angular() const { return angular_of(data_); }

SpatialVector SpatialVector::operator+(const SpatialVector& o) const
{
    require_same(*this, o, "add");
    return {frame_, kind_, data_ + o.data_};
}

SpatialVector SpatialVector::operator-(const SpatialVector& o) const
{
    require_same(*this, o, "subtract");
    return {frame_, kind_, data_ - o.data_};
}

SpatialVector SpatialVector::operator*(double s) const { return {frame_, kind_, data_ * s}; }

double power(const SpatialVector& velocity, const SpatialVector& force)
{
    if (velocity.kind() != Quantity::Velocity || force.kind() != Quantity::Force)
        throw std::invalid_argument("power: expects a velocity and a force");
    if (!(velocity.frame() == force.frame()))
        throw std::invalid_argument("power: frame mismatch " + to_string(velocity.frame()) +
                                    " vs " + to_string(force.frame()));
    return velocity.data().dot(force.data());
}

RigidTransform RigidTransform::planar(double angle, double dx, double dy)
{
    RigidTransform t = rot_z(angle);
    t.offset = Vec3(dx, dy, 0.0);
    return t;
}

RigidTransform RigidTransform::rot_z(double angle)
{
    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
    return t;
}

RigidTransform RigidTransform::operator*(const RigidTransform& o) const
{
    RigidTransform t;
    t.rotation = rotation * o.rotation;
    t.offset = offset + rotation * o.offset;
    return t;
}

TransformMatrix::TransformMatrix(FrameId from, FrameId to, Mat data)
    : from_(from), to_(to), data_(std::move(data))
{
    if (data_.rows() != data_.cols() || (data_.rows() != 3 && data_.rows() != 6))
        throw std::invalid_argument("transform matrix must be 3x3 or 6x6");
}

TransformMatrix TransformMatrix::from_rigid(FrameId from, FrameId to, const RigidTransform& t,
                                            Dim dim)
{
    return {from, to, project(spatial_force_transform(t), dim)};
}

TransformMatrix TransformMatrix::identity(FrameId from, FrameId to, Dim dim)
{
    return {from, to, Mat::Identity(size_of(dim), size_of(dim))};
}

Mat TransformMatrix::joint_derivative(const RigidTransform& mount, double theta, Dim dim)
{
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Mat3 drot;
    drot << -s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0;
    Mat6 d = Mat6::Zero();
    d.topLeftCorner<3, 3>() = drot;
    d.bottomRightCorner<3, 3>() = drot;
    return project(Mat6(spatial_force_transform(mount) * d), dim);
}

TransformMatrix planar_rigid_transform(double rotation, const Eigen::Vector2d& offset,
                                       FrameId from, FrameId to)
{
    return TransformMatrix::from_rigid(from, to,
                                       RigidTransform::planar(rotation, offset.x(), offset.y()),
                                       Dim::Planar);
}

SpatialVector transform_velocity(const TransformMatrix& u, const SpatialVector& v)
{
    if (v.kind() != Quantity::Velocity)
        throw std::invalid_argument("transform_velocity: expects a velocity, got " +
                                    std::string(to_string(v.kind())));
    if (!(v.frame() == u.from_frame()))
        throw std::invalid_argument("transform_velocity: vector in " + to_string(v.frame()) +
                                    ", transform from " + to_string(u.from_frame()));
    if (v.data().size() != u.data().rows())
        throw std::invalid_argument("transform_velocity: dimension mismatch");
    return {u.to_frame(), Quantity::Velocity, u.data().transpose() * v.data()};
}

SpatialVector transform_force(const TransformMatrix& u, const SpatialVector& f)
{
    if (f.kind() != Quantity::Force)
        throw std::invalid_argument("transform_force: expects a force, got " +
                                    std::string(to_string(f.kind())));
    if (!(f.frame() == u.to_frame()))
        throw std::invalid_argument("transform_force: vector in " + to_string(f.frame()) +
                                    ", transform to " + to_string(u.to_frame()));
    if (f.data().size() != u.data().rows())
        throw std::invalid_argument("transform_force: dimension mismatch");
    return {u.from_frame(), Quantity::Force, u.data() * f.data()};
}

Vec project(const Vec6& v, Dim dim)
{
    if (dim == Dim::Spatial)
        return v;
    Vec out(3);
    for (int i = 0; i < 3; ++i)
        out[i] = v[kPlanarIndex[i]];
    return out;
}

Mat project(const Mat6& m, Dim dim)
{
    if (dim == Dim::Spatial)
        return m;
    Mat out(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            out(i, j) = m(kPlanarIndex[i], kPlanarIndex[j]);
    return out;
}

Mat3 skew(const Vec3& v)
{
    Mat3 s;
    s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return s;
}

LinkModel LinkModel::planar(double mass, double com_x, double com_y, double inertia,
                            double length, double gravity)
{
    LinkModel link;
    link.dim = Dim::Planar;
    link.mass = mass;
    link.com = Vec3(com_x, com_y, 0.0);
    link.inertia_com = Mat3::Zero();
    link.inertia_com(2, 2) = inertia;
    link.gravity = gravity;
    link.tip = RigidTransform::planar(0.0, length, 0.0);
    link.coriolis_bound = link.default_coriolis_bound();
    return link;
}

LinkModel LinkModel::spatial(double mass, const Vec3& com, const Mat3& inertia_com,
                             const RigidTransform& tip, double gravity)
{
    LinkModel link;
    link.dim = Dim::Spatial;
    link.mass = mass;
    link.com = com;
    link.inertia_com = inertia_com;
    link.gravity = gravity;
    link.tip = tip;
    link.coriolis_bound = link.default_coriolis_bound();
    return link;
}

Mat LinkModel::mass_matrix() const { return project(spatial_mass_matrix(*this), dim); }

double LinkModel::default_coriolis_bound() const
{
    if (dim == Dim::Planar) {
        const Mat c = coriolis_matrix(*this, 1.0);
        return Eigen::JacobiSVD<Mat>(c).singularValues()(0);
    }
    const Mat3 sc = skew(com);
    const Mat3 inertia_origin = inertia_com - mass * sc * sc;
    const double lever = mass * com.norm();
    const double rot = Eigen::JacobiSVD<Mat3>(inertia_origin).singularValues()(0);
    return std::sqrt(mass * mass + 2.0 * lever * lever + rot * rot);
}

Mat coriolis_matrix(const LinkModel& link, const Vec3& omega)
{
    return project(spatial_coriolis(link, omega), link.dim);
}

Mat coriolis_matrix(const LinkModel& link, double omega_z)
{
    return coriolis_matrix(link, Vec3(0.0, 0.0, omega_z));
}

SpatialVector gravity_vector(const LinkModel& link, const Mat3& world_from_body, FrameId frame)
{
    const Vec3 weight = world_from_body.transpose() * Vec3(0.0, -link.mass * link.gravity, 0.0);
    Vec6 g;
    g.head<3>() = -weight;
    g.tail<3>() = -link.com.cross(weight);
    return {frame, Quantity::Force, project(g, link.dim)};
}

SpatialVector gravity_vector(const LinkModel& link, double orientation, FrameId frame)
{
    return gravity_vector(link, RigidTransform::rot_z(orientation).rotation, frame);
}

SpatialVector net_force(const LinkModel& link, const SpatialVector& v, const Vec& vdot,
                        const Mat3& world_from_body)
{
    if (v.kind() != Quantity::Velocity)
        throw std::invalid_argument("net_force: expects a velocity");
    const SpatialVector g = gravity_vector(link, world_from_body, v.frame());
    Vec f = link.mass_matrix() * vdot + coriolis_matrix(link, v.angular()) * v.data() + g.data();
    return {v.frame(), Quantity::Force, f};
}

SpatialVector net_force(const LinkModel& link, const SpatialVector& v, const Vec& vdot,
                        double orientation)
{
    return net_force(link, v, vdot, RigidTransform::rot_z(orientation).rotation);
}

Vec joint_axis(Dim dim)
{
    Vec z = Vec::Zero(size_of(dim));
    z[size_of(dim) - 1] = 1.0;
    return z;
}

}  // namespace vdc
