#include "test_util.hpp"

#include "vdc/controller.hpp"
#include "vdc/sim.hpp"

#include <cmath>
#include <numbers>

using namespace vdc;
using testutil::max_abs_diff;
using testutil::uniform;

namespace {

ChainModel reference_chain(int n = 2)
{
    ChainModel c;
    for (int i = 0; i < n; ++i) {
        c.links.push_back(LinkModel::planar(1.0, 1.0, 0.0, 1.0, 1.0, 9.81));
        c.joints.push_back(JointModel{0.1, Friction::tanh(), RigidTransform{}});
    }
    return c;
}

ChainModel random_chain(std::mt19937_64& rng, int n, Dim dim)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.2, 2.0);
    ChainModel c;
    c.dim = dim;
    for (int i = 0; i < n; ++i) {
        if (dim == Dim::Planar) {
            c.links.push_back(LinkModel::planar(pos(rng), u(rng), u(rng), pos(rng), pos(rng), 9.81));
            c.joints.push_back({pos(rng) * 0.1, Friction::coulomb_viscous(pos(rng), 3.0, 0.2),
                                RigidTransform::planar(u(rng), 0.1 * u(rng), 0.1 * u(rng))});
        } else {
            const Mat3 a = Mat3::Random();
            const Mat3 inertia = a * a.transpose() + 0.5 * Mat3::Identity();
            RigidTransform tip;
            tip.rotation = Eigen::AngleAxisd(u(rng), Vec3(u(rng), u(rng), 1.0).normalized()).toRotationMatrix();
            tip.offset = Vec3(pos(rng), 0.3 * u(rng), 0.3 * u(rng));
            c.links.push_back(LinkModel::spatial(pos(rng), Vec3(u(rng), u(rng), u(rng)), inertia, tip, 9.81));
            RigidTransform mount;
            mount.rotation = Eigen::AngleAxisd(u(rng), Vec3(1.0, u(rng), u(rng)).normalized()).toRotationMatrix();
            c.joints.push_back({pos(rng) * 0.1, Friction::tanh(2.0, 1.5), mount});
        }
    }
    c.validate();
    return c;
}

std::vector<Vec> base_velocities(const FrameSet& v)
{
    std::vector<Vec> out;
    for (int i = 1; i <= v.dof(); ++i)
        out.push_back(v.base(i).data());
    return out;
}

// Controller output under perfect observers, assembled from the individual
// control-law operations.
Eigen::VectorXd perfect_observer_torque(const ChainModel& c, const TrajectorySample& d,
                                        const std::vector<double>& lambda,
                                        const std::vector<double>& k,
                                        const std::vector<double>& k_b)
{
    const int n = c.dof();
    Eigen::VectorXd rate(n), rate_dot(n);
    for (int i = 0; i < n; ++i) {
        const RequiredJointMotion m =
            required_joint_motion(d.q[i], d.qdot[i], d.qddot[i], d.q[i], d.qdot[i], lambda[i]);
        rate[i] = m.rate;
        rate_dot[i] = m.rate_dot;
    }
    const VelocityPropagation req = required_velocity_recursion(c, d.q, rate, rate_dot, d.qdot);
    const std::vector<Vec> v_hat = base_velocities(forward_velocities(c, d.q, d.qdot));
    const RequiredForces rf = required_forces(c, d.q, req, v_hat, k_b);
    Eigen::VectorXd tau(n);
    for (int i = 0; i < n; ++i)
        tau[i] = joint_torque_command(rate_dot[i], rate[i], d.qdot[i], rf.tau_a[i],
                                      c.joints[static_cast<std::size_t>(i)], k[i]);
    return tau;
}

}  // namespace

TEST_CASE("desired trajectory primitives")
{
    const JointTrajectory j = JointTrajectory::offset_cosine(0.8, -1.0, std::numbers::pi / 4.0);
    CHECK(j.position(0.0) == doctest::Approx(-0.2));
    CHECK(j.velocity(0.0) == 0.0);
    CHECK(j.position_bound() == doctest::Approx(1.8));
    CHECK(j.velocity_bound() == doctest::Approx(std::numbers::pi / 4.0));
    const double h = 1e-5;
    for (double t : {0.3, 1.7, 5.2}) {
        CHECK(j.velocity(t) == doctest::Approx((j.position(t + h) - j.position(t - h)) / (2 * h)).epsilon(1e-8));
        CHECK(j.acceleration(t) == doctest::Approx((j.velocity(t + h) - j.velocity(t - h)) / (2 * h)).epsilon(1e-8));
        CHECK(std::abs(j.position(t)) <= j.position_bound());
        CHECK(std::abs(j.velocity(t)) <= j.velocity_bound());
    }
    const JointTrajectory c = JointTrajectory::constant(0.4);
    CHECK(c.position(3.0) == 0.4);
    CHECK(c.velocity(3.0) == 0.0);
    CHECK(c.acceleration(3.0) == 0.0);
}

TEST_CASE("required joint motion examples")
{
    const RequiredJointMotion a = required_joint_motion(-0.2, 0.0, 0.3, 0.0, 0.0, 10.0);
    CHECK(a.rate == doctest::Approx(-2.0).epsilon(1e-15));

    const RequiredJointMotion b = required_joint_motion(0.5, 1.5, -0.7, 0.5, 1.5, 10.0);
    CHECK(b.rate == 1.5);
    CHECK(b.rate_dot == -0.7);

    const RequiredJointMotion c = required_joint_motion(0.5, 1.5, -0.7, 0.1, -3.0, 0.0);
    CHECK(c.rate == 1.5);
    CHECK(c.rate_dot == -0.7);
}

TEST_CASE("required velocity recursion")
{
    const ChainModel c = reference_chain();
    const Eigen::VectorXd q0 = Eigen::VectorXd::Zero(2);

    SUBCASE("zero rates give zero velocities")
    {
        const VelocityPropagation r = required_velocity_recursion(c, q0, q0, q0, q0);
        for (int i = 1; i <= 2; ++i) {
            CHECK(r.velocity.base(i).data().norm() == 0.0);
            CHECK(r.velocity.tip(i).data().norm() == 0.0);
        }
    }
    SUBCASE("first joint only at the home pose")
    {
        const VelocityPropagation r =
            required_velocity_recursion(c, q0, Eigen::Vector2d(1.0, 0.0), q0, q0);
        CHECK(max_abs_diff(r.velocity.base(2).data(), Eigen::Vector3d(0.0, 1.0, 1.0)) < 1e-15);
    }
    SUBCASE("true rates reproduce the forward velocities")
    {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 50; ++trial) {
            const ChainModel rc = random_chain(rng, 3, trial % 2 ? Dim::Spatial : Dim::Planar);
            const Eigen::VectorXd q = uniform(rng, 3, -3.0, 3.0);
            const Eigen::VectorXd qd = uniform(rng, 3, -3.0, 3.0);
            const FrameSet v = forward_velocities(rc, q, qd);
            const VelocityPropagation r = required_velocity_recursion(rc, q, qd, qd * 0.0, qd);
            for (int i = 1; i <= 3; ++i) {
                CHECK(max_abs_diff(r.velocity.base(i).data(), v.base(i).data()) < 1e-13);
                CHECK(max_abs_diff(r.velocity.tip(i).data(), v.tip(i).data()) < 1e-13);
            }
        }
    }
    SUBCASE("superposition in the required rates")
    {
        std::mt19937_64 rng(4);
        const ChainModel rc = random_chain(rng, 3, Dim::Planar);
        for (int trial = 0; trial < 100; ++trial) {
            const Eigen::VectorXd q = uniform(rng, 3, -3.0, 3.0);
            const Eigen::VectorXd ud = uniform(rng, 3, -3.0, 3.0);
            const Eigen::VectorXd a = uniform(rng, 3, -3.0, 3.0), b = uniform(rng, 3, -3.0, 3.0);
            const Eigen::VectorXd ad = uniform(rng, 3, -3.0, 3.0), bd = uniform(rng, 3, -3.0, 3.0);
            const double s = 1.7;
            const VelocityPropagation ra = required_velocity_recursion(rc, q, a, ad, ud);
            const VelocityPropagation rb = required_velocity_recursion(rc, q, b, bd, ud);
            const VelocityPropagation rs = required_velocity_recursion(rc, q, a + s * b, ad + s * bd, ud);
            for (int i = 1; i <= 3; ++i) {
                const Vec lin = ra.velocity.base(i).data() + s * rb.velocity.base(i).data();
                CHECK(max_abs_diff(rs.velocity.base(i).data(), lin) < 1e-12);
                const auto k = static_cast<std::size_t>(i);
                CHECK(max_abs_diff(rs.base_rate[k], ra.base_rate[k] + s * rb.base_rate[k]) < 1e-11);
            }
        }
    }
    SUBCASE("derivative matches finite differences when the transform rate uses the true rates")
    {
        std::mt19937_64 rng(5);
        const ChainModel rc = random_chain(rng, 3, Dim::Spatial);
        const Eigen::VectorXd q0v = uniform(rng, 3, -2.0, 2.0), q1 = uniform(rng, 3, -2.0, 2.0);
        const Eigen::VectorXd r0 = uniform(rng, 3, -2.0, 2.0), r1 = uniform(rng, 3, -2.0, 2.0);
        auto q_at = [&](double t) -> Eigen::VectorXd { return q0v + q1 * std::sin(t); };
        auto qd_at = [&](double t) -> Eigen::VectorXd { return q1 * std::cos(t); };
        auto r_at = [&](double t) -> Eigen::VectorXd { return r0 + r1 * t * t; };
        auto rd_at = [&](double t) -> Eigen::VectorXd { return 2.0 * r1 * t; };
        const double t = 0.6, h = 1e-5;
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
        const VelocityPropagation a = required_velocity_recursion(rc, q_at(t), r_at(t), rd_at(t), qd_at(t));
        const VelocityPropagation p = required_velocity_recursion(rc, q_at(t + h), r_at(t + h), zero, zero);
        const VelocityPropagation m = required_velocity_recursion(rc, q_at(t - h), r_at(t - h), zero, zero);
        for (int i = 1; i <= 3; ++i) {
            const Vec fd = (p.velocity.base(i).data() - m.velocity.base(i).data()) / (2 * h);
            CHECK(max_abs_diff(a.base_rate[static_cast<std::size_t>(i)], fd) < 1e-8);
            const Vec fdt = (p.velocity.tip(i).data() - m.velocity.tip(i).data()) / (2 * h);
            CHECK(max_abs_diff(a.tip_rate[static_cast<std::size_t>(i)], fdt) < 1e-8);
        }
    }
}

TEST_CASE("required force examples")
{
    SUBCASE("feedback term vanishes at matched velocities without gravity")
    {
        ChainModel c = reference_chain(1);
        c.links[0].gravity = 0.0;
        const Eigen::VectorXd q = Eigen::VectorXd::Constant(1, 0.4);
        const Eigen::VectorXd rate = Eigen::VectorXd::Constant(1, 1.3);
        const VelocityPropagation req =
            required_velocity_recursion(c, q, rate, Eigen::VectorXd::Zero(1), rate);
        const Vec vr = req.velocity.base(1).data();
        const RequiredForces rf = required_forces(c, q, req, {vr}, {100.0});
        const Vec expected = coriolis_matrix(c.links[0], vr[2]) * vr;
        CHECK(max_abs_diff(rf.net_force.base(1).data(), expected) < 1e-14);
    }
    SUBCASE("at rest the net force is the gravity wrench")
    {
        const ChainModel c = reference_chain(1);
        const Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
        const VelocityPropagation req = required_velocity_recursion(c, z, z, z, z);
        const RequiredForces rf = required_forces(c, z, req, {Vec::Zero(3)}, {100.0});
        CHECK(max_abs_diff(rf.net_force.base(1).data(), Eigen::Vector3d(0.0, 9.81, 9.81)) < 1e-14);
    }
    SUBCASE("single link: actuation torque is the axis component of the net force")
    {
        std::mt19937_64 rng(6);
        const ChainModel c = random_chain(rng, 1, Dim::Planar);
        const Eigen::VectorXd q = uniform(rng, 1, -3.0, 3.0);
        const Eigen::VectorXd rate = uniform(rng, 1, -3.0, 3.0);
        const VelocityPropagation req =
            required_velocity_recursion(c, q, rate, uniform(rng, 1, -3.0, 3.0), rate);
        const RequiredForces rf = required_forces(c, q, req, {uniform(rng, 3, -1.0, 1.0)}, {50.0});
        CHECK(rf.tau_a[0] == doctest::Approx(joint_axis(Dim::Planar).dot(rf.net_force.base(1).data())).epsilon(1e-14));
        CHECK(rf.force.tip(1).data().norm() == 0.0);
    }
    SUBCASE("size mismatches are rejected")
    {
        const ChainModel c = reference_chain(2);
        const Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
        const VelocityPropagation req = required_velocity_recursion(c, z, z, z, z);
        CHECK_THROWS_AS(required_forces(c, z, req, {Vec::Zero(3)}, {1.0, 1.0}), std::invalid_argument);
        CHECK_THROWS_AS(required_forces(c, z, req, {Vec::Zero(3), Vec::Zero(6)}, {1.0, 1.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("joint torque command examples")
{
    const JointModel j{0.1, Friction::tanh(), RigidTransform{}};
    CHECK(joint_torque_command(0.0, 0.7, 0.7, 0.0, j, 10.0) == doctest::Approx(std::tanh(0.7)).epsilon(1e-15));
    CHECK(joint_torque_command(1.0, 0.0, 0.0, 0.0, j, 10.0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(joint_torque_command(0.5, 0.2, -0.1, 3.0, j, 10.0) ==
          doctest::Approx(0.05 + std::tanh(0.2) + 3.0 + 3.0).epsilon(1e-15));
}

TEST_CASE("feedforward exactness under perfect observers")
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        const Dim dim = trial % 2 ? Dim::Spatial : Dim::Planar;
        const int n = 1 + trial % 4;
        const ChainModel c = random_chain(rng, n, dim);
        const TrajectorySample d{uniform(rng, n, -3.0, 3.0), uniform(rng, n, -3.0, 3.0),
                                 uniform(rng, n, -5.0, 5.0)};
        const std::vector<double> lambda(static_cast<std::size_t>(n), 10.0), k(static_cast<std::size_t>(n), 10.0),
            kb(static_cast<std::size_t>(n), 100.0);
        const Eigen::VectorXd tau = perfect_observer_torque(c, d, lambda, k, kb);
        const Eigen::VectorXd id = inverse_dynamics(c, d.q, d.qdot, d.qddot);
        CHECK(max_abs_diff(tau, id) < 1e-9 * (1.0 + id.cwiseAbs().maxCoeff()));
    }

    // The same through the full loop evaluation on the reference scenario.
    ScenarioConfig cfg = two_dof_scenario();
    for (double t : {0.0, 0.9, 3.3, 7.1}) {
        const TrajectorySample d = cfg.trajectory.sample(t);
        ClosedLoopState st = initial_state(cfg.chain, d.q, d.qdot, d.q);
        for (int i = 0; i < 2; ++i)
            st.joint_obs[static_cast<std::size_t>(i)].z = d.qdot[i];
        const LoopSignals s = evaluate_loop(cfg, t, st.pack());
        CHECK(max_abs_diff(s.q_hat_rate, d.qdot) < 1e-12);
        CHECK(max_abs_diff(s.tau, inverse_dynamics(cfg.chain, d.q, d.qdot, d.qddot)) < 1e-9);
        CHECK(max_abs_diff(s.qddot, d.qddot) < 1e-9);
    }
}

TEST_CASE("required minus actual net force matches the link error dynamics")
{
    // F*_r - F* = M d/dt(V_r - V) + C(w_hat) V_r - C(w) V + K_B (V_r - V_hat)
    // with the derivative taken by finite differences along a smooth path.
    std::mt19937_64 rng(8);
    const ChainModel c = random_chain(rng, 3, Dim::Planar);
    const Eigen::VectorXd qa = uniform(rng, 3, -2.0, 2.0), qb = uniform(rng, 3, -2.0, 2.0);
    const Eigen::VectorXd ra = uniform(rng, 3, -2.0, 2.0), rb = uniform(rng, 3, -2.0, 2.0);
    auto q_at = [&](double t) -> Eigen::VectorXd { return qa + qb * std::sin(1.3 * t); };
    auto qd_at = [&](double t) -> Eigen::VectorXd { return 1.3 * qb * std::cos(1.3 * t); };
    auto qdd_at = [&](double t) -> Eigen::VectorXd { return -1.69 * qb * std::sin(1.3 * t); };
    auto r_at = [&](double t) -> Eigen::VectorXd { return ra + rb * std::cos(t); };
    auto rd_at = [&](double t) -> Eigen::VectorXd { return -rb * std::sin(t); };
    const std::vector<double> kb{30.0, 40.0, 50.0};

    const double h = 1e-5;
    for (double t : {0.2, 1.1, 2.5}) {
        const Eigen::VectorXd q = q_at(t), qd = qd_at(t);
        const VelocityPropagation req = required_velocity_recursion(c, q, r_at(t), rd_at(t), qd);
        std::vector<Vec> v_hat;
        for (int i = 0; i < 3; ++i)
            v_hat.push_back(uniform(rng, 3, -1.0, 1.0));
        const RequiredForces rf = required_forces(c, q, req, v_hat, kb);
        const ChainDynamics plant = evaluate_dynamics(c, q, qd, qdd_at(t));

        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
        const FrameSet vp = forward_velocities(c, q_at(t + h), qd_at(t + h));
        const FrameSet vm = forward_velocities(c, q_at(t - h), qd_at(t - h));
        const VelocityPropagation rp = required_velocity_recursion(c, q_at(t + h), r_at(t + h), zero, zero);
        const VelocityPropagation rm = required_velocity_recursion(c, q_at(t - h), r_at(t - h), zero, zero);
        for (int i = 1; i <= 3; ++i) {
            const LinkModel& link = c.links[static_cast<std::size_t>(i - 1)];
            const Vec de = ((rp.velocity.base(i).data() - vp.base(i).data()) -
                            (rm.velocity.base(i).data() - vm.base(i).data())) / (2 * h);
            const Vec vr = req.velocity.base(i).data();
            const Vec v = plant.motion.velocity.base(i).data();
            const Vec& vh = v_hat[static_cast<std::size_t>(i - 1)];
            const Vec rhs = link.mass_matrix() * de + coriolis_matrix(link, vh[2]) * vr -
                            coriolis_matrix(link, v[2]) * v + kb[static_cast<std::size_t>(i - 1)] * (vr - vh);
            const Vec lhs = rf.net_force.base(i).data() - plant.net_force.base(i).data();
            CHECK(max_abs_diff(lhs, rhs) < 1e-7);
        }
    }
}

TEST_CASE("control gain validation")
{
    ControlGains g{{10.0, 10.0}, {10.0, 10.0}, {100.0, 100.0}};
    CHECK_NOTHROW(g.validate(2));
    CHECK_THROWS_AS(g.validate(3), std::invalid_argument);
    g.lambda[1] = 0.0;
    CHECK_THROWS_WITH_AS(g.validate(2), doctest::Contains("lambda[2]"), std::invalid_argument);
}
