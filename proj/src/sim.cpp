#include "vdc/sim.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace vdc {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw std::invalid_argument(what);
}

std::string at_time(const char* what, double t)
{
    std::ostringstream os;
    os.precision(17);
    os << what << " at t = " << t << " s";
    return os.str();
}

}  // namespace

int ClosedLoopState::packed_size(const ChainModel& chain)
{
    const int n = chain.dof();
    return 4 * n + 3 * n * size_of(chain.dim);
}

Eigen::VectorXd ClosedLoopState::pack() const
{
    const int n = static_cast<int>(q.size());
    const int d = pose.empty() ? 0 : static_cast<int>(pose.front().size());
    require(qdot.size() == n && static_cast<int>(pose.size()) == n &&
                static_cast<int>(joint_obs.size()) == n && static_cast<int>(link_obs.size()) == n,
            "closed-loop state: inconsistent sizes");
    Eigen::VectorXd x(4 * n + 3 * n * d);
    int o = 0;
    x.segment(o, n) = q;
    o += n;
    x.segment(o, n) = qdot;
    o += n;
    for (const auto& p : pose) {
        x.segment(o, d) = p;
        o += d;
    }
    for (const auto& j : joint_obs)
        x[o++] = j.q_hat;
    for (const auto& j : joint_obs)
        x[o++] = j.z;
    for (const auto& l : link_obs) {
        x.segment(o, d) = l.pose_hat;
        o += d;
    }
    for (const auto& l : link_obs) {
        x.segment(o, d) = l.aux;
        o += d;
    }
    return x;
}

ClosedLoopState ClosedLoopState::unpack(const Eigen::VectorXd& x, const ChainModel& chain)
{
    const int n = chain.dof();
    const int d = size_of(chain.dim);
    require(x.size() == packed_size(chain), "closed-loop state: packed vector has wrong size");
    ClosedLoopState s;
    int o = 0;
    s.q = x.segment(o, n);
    o += n;
    s.qdot = x.segment(o, n);
    o += n;
    for (int i = 0; i < n; ++i, o += d)
        s.pose.emplace_back(x.segment(o, d));
    s.joint_obs.resize(static_cast<std::size_t>(n));
    s.link_obs.resize(static_cast<std::size_t>(n));
    for (auto& j : s.joint_obs)
        j.q_hat = x[o++];
    for (auto& j : s.joint_obs)
        j.z = x[o++];
    for (auto& l : s.link_obs) {
        l.pose_hat = x.segment(o, d);
        o += d;
    }
    for (auto& l : s.link_obs) {
        l.aux = x.segment(o, d);
        o += d;
    }
    return s;
}

ClosedLoopState initial_state(const ChainModel& chain, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& qdot, const Eigen::VectorXd& q_hat)
{
    const int n = chain.dof();
    require(q.size() == n && qdot.size() == n && q_hat.size() == n,
            "initial state: q, qdot and q_hat need one entry per joint");
    const FrameSet poses = forward_poses(chain, q);
    const FrameSet vel = forward_velocities(chain, q, qdot);
    ClosedLoopState s;
    s.q = q;
    s.qdot = qdot;
    for (int i = 1; i <= n; ++i) {
        s.pose.push_back(poses.base(i).data());
        s.joint_obs.push_back({q_hat[i - 1], 0.0});
        s.link_obs.push_back({poses.base(i).data(), vel.base(i).data()});
    }
    return s;
}

void ScenarioConfig::validate() const
{
    chain.validate();
    const int n = chain.dof();
    gains.control.validate(n);
    require(gains.observer.size() == n, "scenario: observer gains do not match the chain");
    require(trajectory.size() == n, "scenario: trajectory needs one entry per joint");
    require(dt > 0.0 && std::isfinite(dt), "scenario: dt must be positive");
    require(t_end >= dt, "scenario: t_end must be at least dt");
    require(stride >= 1, "scenario: stride must be at least 1");
    const Eigen::VectorXd x = initial.pack();
    require(x.size() == ClosedLoopState::packed_size(chain),
            "scenario: initial state does not match the chain");
    require(x.allFinite(), "scenario: initial state is not finite");
}

LoopSignals evaluate_loop(const ScenarioConfig& config, double t, const Eigen::VectorXd& x)
{
    const ChainModel& chain = config.chain;
    const GainSet& gains = config.gains;
    const int n = chain.dof();
    const int d = size_of(chain.dim);
    const ClosedLoopState st = ClosedLoopState::unpack(x, chain);

    LoopSignals s;
    s.t = t;
    s.desired = config.trajectory.sample(t);
    s.q = st.q;
    s.qdot = st.qdot;
    s.q_hat.resize(n);
    s.q_hat_rate.resize(n);
    s.rate.resize(n);
    s.rate_dot.resize(n);
    s.tau.resize(n);

    // Observers read only measured positions and their own states.
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        s.q_hat[i] = st.joint_obs[k].q_hat;
        s.q_hat_rate[i] = joint_observer_velocity(st.joint_obs[k], st.q[i], gains.observer.big_l(i));
        s.v_hat.push_back(link_observer_velocity(st.link_obs[k], st.pose[k], chain.links[k],
                                                 gains.observer.link_gain(i)));
    }

    for (int i = 0; i < n; ++i) {
        const auto m = required_joint_motion(s.desired.q[i], s.desired.qdot[i], s.desired.qddot[i],
                                             s.q_hat[i], s.q_hat_rate[i],
                                             gains.control.lambda[static_cast<std::size_t>(i)]);
        s.rate[i] = m.rate;
        s.rate_dot[i] = m.rate_dot;
    }
    const VelocityPropagation req =
        required_velocity_recursion(chain, st.q, s.rate, s.rate_dot, s.q_hat_rate);
    const RequiredForces rf = required_forces(chain, st.q, req, s.v_hat, gains.control.link_gain);
    s.tau_ar = rf.tau_a;
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        s.tau[i] = joint_torque_command(s.rate_dot[i], s.rate[i], s.q_hat_rate[i], s.tau_ar[i],
                                        chain.joints[k], gains.control.k[k]);
    }
    if (!s.tau.allFinite())
        throw NumericalError(at_time("non-finite joint torque", t), t, x);

    s.qddot = forward_dynamics(chain, st.q, st.qdot, s.tau);
    const ChainDynamics plant = evaluate_dynamics(chain, st.q, st.qdot, s.qddot);
    s.tau_a = plant.tau_a;
    const ChainPlacements placements = world_placements(chain, st.q);

    s.rates.resize(x.size());
    int o = 0;
    s.rates.segment(o, n) = st.qdot;
    o += n;
    s.rates.segment(o, n) = s.qddot;
    o += n;
    for (int i = 1; i <= n; ++i, o += d)
        s.rates.segment(o, d) = plant.motion.velocity.base(i).data();

    const int o_qhat = o;
    const int o_z = o_qhat + n;
    const int o_phat = o_z + n;
    const int o_aux = o_phat + n * d;
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const auto jr = joint_observer_rates(st.joint_obs[k], s.tau[i], s.tau_a[i], st.q[i],
                                             chain.joints[k], gains.observer.ell(i),
                                             gains.observer.big_l(i));
        s.rates[o_qhat + i] = jr.q_hat_rate;
        s.rates[o_z + i] = jr.z_rate;

        const Vec g = gravity_vector(chain.links[k], placements.base[k + 1].rotation).data();
        const auto lr = link_observer_rates(st.link_obs[k], plant.net_force.base(i + 1).data(),
                                            st.pose[k], chain.links[k],
                                            gains.observer.link_gain(i), g);
        s.rates.segment(o_phat + i * d, d) = lr.pose_hat_rate;
        s.rates.segment(o_aux + i * d, d) = lr.aux_rate;
    }
    if (!s.rates.allFinite())
        throw NumericalError(at_time("non-finite closed-loop rate", t), t, x);

    // Virtual power flows at every cut and the per-subsystem power terms.
    for (int i = 0; i <= n; ++i)
        s.p_base.push_back(virtual_power_flow(req.velocity.base(i), plant.motion.velocity.base(i),
                                              rf.force.base(i), plant.force.base(i)));
    for (int i = 1; i <= n; ++i) {
        s.p_tip.push_back(virtual_power_flow(req.velocity.tip(i), plant.motion.velocity.tip(i),
                                             rf.force.tip(i), plant.force.tip(i)));
        s.v.push_back(plant.motion.velocity.base(i).data());
        s.v_r.push_back(req.velocity.base(i).data());
        s.link_power.push_back(virtual_power_flow(req.velocity.base(i),
                                                  plant.motion.velocity.base(i),
                                                  rf.net_force.base(i), plant.net_force.base(i)));
        s.joint_power.push_back((s.rate[i - 1] - st.qdot[i - 1]) *
                                (s.tau_ar[i - 1] - s.tau_a[i - 1]));
    }
    return s;
}

Eigen::VectorXd closed_loop_rates(const ScenarioConfig& config, double t, const Eigen::VectorXd& x)
{
    return evaluate_loop(config, t, x).rates;
}

ErrorStateVector error_state(const ScenarioConfig& config, const LoopSignals& s)
{
    const int n = config.chain.dof();
    ErrorStateVector x(config.chain.dim, n);
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        x.link_control(i) = s.v_r[k] - s.v[k];
        x.link_observer(i) = s.v_hat[k] - s.v[k];
        x.joint_control(i) = s.rate[i] - s.qdot[i];
        x.joint_observer(i) = s.q_hat_rate[i] - s.qdot[i];
        x.composite(i) = joint_composite_error(s.q_hat_rate[i] - s.qdot[i], s.q_hat[i] - s.q[i],
                                               config.gains.observer.ell(i));
    }
    return x;
}

AuditSample audit_sample(const ScenarioConfig& config, const LoopSignals& s)
{
    AuditSample a;
    a.t = s.t;
    a.x = error_state(config, s);
    a.p_base = s.p_base;
    a.p_tip = s.p_tip;
    a.link_power = s.link_power;
    a.joint_power = s.joint_power;
    for (const auto& v : s.v)
        a.velocity_norm.push_back(v.norm());
    return a;
}

Eigen::VectorXd integrate_rk4(const RateFunction& f, const Eigen::VectorXd& x0, double t_end,
                              double dt, const StepCallback& on_step)
{
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw std::invalid_argument("integrate_rk4: dt must be positive");
    if (!(t_end >= dt))
        throw std::invalid_argument("integrate_rk4: t_end must be at least dt");
    if (!x0.allFinite())
        throw NumericalError("integrate_rk4: initial state is not finite", 0.0, x0);

    const long long steps = std::llround(t_end / dt);
    Eigen::VectorXd x = x0;
    if (on_step)
        on_step(0, 0.0, x);
    for (long long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        Eigen::VectorXd next;
        try {
            const Eigen::VectorXd k1 = f(t, x);
            const Eigen::VectorXd k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
            const Eigen::VectorXd k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
            const Eigen::VectorXd k4 = f(t + dt, x + dt * k3);
            next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } catch (const std::runtime_error& e) {
            throw NumericalError(at_time("integration failed", t) + ": " + e.what(), t, x);
        }
        const double t_next = static_cast<double>(k + 1) * dt;
        if (!next.allFinite())
            throw NumericalError(at_time("non-finite state", t_next), t_next, x);
        x = std::move(next);
        if (on_step)
            on_step(k + 1, t_next, x);
    }
    return x;
}

Trajectory integrate_rk4(const RateFunction& f, const Eigen::VectorXd& x0, double t_end, double dt,
                         int stride)
{
    if (stride < 1)
        throw std::invalid_argument("integrate_rk4: stride must be at least 1");
    Trajectory out;
    integrate_rk4(f, x0, t_end, dt, [&](long long k, double t, const Eigen::VectorXd& x) {
        if (k % stride == 0) {
            out.t.push_back(t);
            out.x.push_back(x);
        }
    });
    return out;
}

ScenarioConfig two_dof_scenario()
{
    ScenarioConfig c;
    c.chain.dim = Dim::Planar;
    for (int i = 0; i < 2; ++i) {
        c.chain.links.push_back(LinkModel::planar(1.0, 1.0, 0.0, 1.0, 1.0, 9.81));
        c.chain.joints.push_back(JointModel{0.1, Friction::tanh(), RigidTransform{}});
    }
    c.gains.observer = ObserverGains({200.0, 200.0}, {200.0, 200.0}, c.chain);
    c.gains.control = ControlGains{{10.0, 10.0}, {10.0, 10.0}, {100.0, 100.0}};
    c.trajectory = DesiredTrajectory({JointTrajectory::offset_cosine(0.8, -1.0, std::numbers::pi / 4.0),
                                      JointTrajectory::offset_cosine(0.8, -1.0, std::numbers::pi / 5.0)});
    c.initial = initial_state(c.chain, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2),
                              c.trajectory.sample(0.0).q);
    c.t_end = 20.0;
    c.dt = 1e-4;
    c.stride = 10;
    return c;
}

Eigen::VectorXd lagrangian_oracle(const ChainModel& chain, const Eigen::VectorXd& q,
                                  const Eigen::VectorXd& qdot, const Eigen::VectorXd& tau)
{
    const char* msg = "oracle requires 2-DoF planar chain with on-axis centres of mass";
    if (chain.dim != Dim::Planar || chain.dof() != 2)
        throw std::invalid_argument(msg);
    for (int i = 0; i < 2; ++i) {
        const auto& link = chain.links[static_cast<std::size_t>(i)];
        const auto& mount = chain.joints[static_cast<std::size_t>(i)].mount;
        const bool straight = link.tip.rotation.isIdentity(0.0) && link.tip.offset.y() == 0.0;
        const bool plain_mount = mount.rotation.isIdentity(0.0) && mount.offset.isZero(0.0);
        if (link.com.y() != 0.0 || !straight || !plain_mount ||
            link.gravity != chain.links[0].gravity)
            throw std::invalid_argument(msg);
    }
    if (q.size() != 2 || qdot.size() != 2 || tau.size() != 2)
        throw std::invalid_argument("lagrangian_oracle: q, qdot and tau must have 2 entries");

    const auto& a = chain.links[0];
    const auto& b = chain.links[1];
    const double m1 = a.mass, m2 = b.mass;
    const double lc1 = a.com.x(), lc2 = b.com.x();
    const double l1 = a.tip.offset.x();
    const double i1 = a.inertia_com(2, 2), i2 = b.inertia_com(2, 2);
    const double g = a.gravity;
    const double c2 = std::cos(q[1]);
    const double s2 = std::sin(q[1]);

    Eigen::Matrix2d h;
    h(0, 0) = i1 + m1 * lc1 * lc1 + i2 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) +
              chain.joints[0].rotor_inertia;
    h(0, 1) = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
    h(1, 0) = h(0, 1);
    h(1, 1) = i2 + m2 * lc2 * lc2 + chain.joints[1].rotor_inertia;

    const double hc = -m2 * l1 * lc2 * s2;
    const Eigen::Vector2d coriolis(hc * (2.0 * qdot[0] * qdot[1] + qdot[1] * qdot[1]),
                                   -hc * qdot[0] * qdot[0]);
    const double c12 = std::cos(q[0] + q[1]);
    const Eigen::Vector2d gravity((m1 * lc1 + m2 * l1) * g * std::cos(q[0]) + m2 * lc2 * g * c12,
                                  m2 * lc2 * g * c12);
    const Eigen::Vector2d friction(chain.joints[0].friction(qdot[0]),
                                   chain.joints[1].friction(qdot[1]));
    return h.ldlt().solve(tau - coriolis - gravity - friction);
}

RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options)
{
    config.validate();
    if (options.audit_stride < 0)
        throw std::invalid_argument("run_scenario: audit stride must be nonnegative");
    RunResult r;
    const RateFunction f = [&config](double t, const Eigen::VectorXd& x) {
        return closed_loop_rates(config, t, x);
    };
    const double eps_t = 0.5 * config.dt;
    r.final_state = integrate_rk4(
        f, config.initial.pack(), config.t_end, config.dt,
        [&](long long k, double t, const Eigen::VectorXd& x) {
            const bool record = k % config.stride == 0;
            const bool audit = options.audit_stride > 0 && k % options.audit_stride == 0 &&
                               t <= options.audit_until + eps_t;
            if (!record && !audit)
                return;
            const LoopSignals s = evaluate_loop(config, t, x);
            if (audit)
                r.audit.push_back(audit_sample(config, s));
            if (record) {
                TrajectoryRecord rec;
                rec.t = t;
                rec.q = s.q;
                rec.q_d = s.desired.q;
                rec.error = s.q - s.desired.q;
                rec.q_hat = s.q_hat;
                rec.q_hat_rate = s.q_hat_rate;
                rec.qdot = s.qdot;
                rec.tau = s.tau;
                rec.nu = lyapunov_total(config.chain, config.gains.observer, error_state(config, s));
                double link_sum = 0.0;
                double joint_sum = 0.0;
                for (std::size_t i = 0; i < s.link_power.size(); ++i) {
                    link_sum += s.link_power[i];
                    joint_sum += s.joint_power[i];
                }
                rec.vpf_residual = std::abs(link_sum - joint_sum);
                r.records.push_back(std::move(rec));
            }
        });
    return r;
}

}  // namespace vdc
