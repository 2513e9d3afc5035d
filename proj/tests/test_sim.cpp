#include "test_util.hpp"

#include "vdc/sim.hpp"

#include <cmath>
#include <numbers>

using namespace vdc;
using testutil::max_abs_diff;
using testutil::uniform;

namespace {

const double pi = std::numbers::pi;

double rk4_decay_error(double dt)
{
    const RateFunction f = [](double, const Eigen::VectorXd& x) -> Eigen::VectorXd { return -x; };
    const Eigen::VectorXd x = integrate_rk4(f, Eigen::VectorXd::Ones(1), 1.0, dt, nullptr);
    return std::abs(x[0] - std::exp(-1.0));
}

}  // namespace

TEST_CASE("RK4 on the exponential decay")
{
    const RateFunction f = [](double, const Eigen::VectorXd& x) -> Eigen::VectorXd { return -x; };
    const Trajectory tr = integrate_rk4(f, Eigen::VectorXd::Ones(1), 1.0, 0.1);
    REQUIRE(tr.t.size() == 11);
    CHECK(tr.t.front() == 0.0);
    CHECK(tr.t.back() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(tr.x.back()[0] == doctest::Approx(0.367879).epsilon(1e-6 / 0.367879));
    CHECK(std::abs(tr.x.back()[0] - std::exp(-1.0)) < 1e-6);

    for (double dt : {0.2, 0.1, 0.05}) {
        const double ratio = rk4_decay_error(dt) / rk4_decay_error(dt / 2.0);
        CHECK(ratio >= 12.0);
        CHECK(ratio <= 20.0);
    }
}

TEST_CASE("RK4 bookkeeping")
{
    const RateFunction zero = [](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return Eigen::VectorXd::Zero(x.size());
    };
    Eigen::VectorXd x0(3);
    x0 << 1.0, -2.0, 3.5;
    const Trajectory tr = integrate_rk4(zero, x0, 0.5, 0.01, 7);
    for (const Eigen::VectorXd& x : tr.x)
        CHECK(x == x0);
    CHECK(tr.t.size() == 8);  // steps 0, 7, ..., 49
    CHECK(tr.t[1] == doctest::Approx(0.07));

    long long seen = 0, last = -1;
    integrate_rk4(zero, x0, 1.0, 0.1, [&](long long k, double, const Eigen::VectorXd&) {
        CHECK(k == last + 1);
        last = k;
        ++seen;
    });
    CHECK(seen == 11);

    CHECK_THROWS_AS(integrate_rk4(zero, x0, 1.0, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(integrate_rk4(zero, x0, 0.01, 0.1, 1), std::invalid_argument);
}

TEST_CASE("RK4 reports a blow-up with the last good state")
{
    const RateFunction f = [](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return x.array().square();
    };
    // x' = x^2, x(0) = 1 explodes at t = 1.
    try {
        integrate_rk4(f, Eigen::VectorXd::Ones(1), 2.0, 1e-3, nullptr);
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        CHECK(e.time() > 0.9);
        CHECK(e.time() < 1.01);
        REQUIRE(e.last_good_state().size() == 1);
        CHECK(std::isfinite(e.last_good_state()[0]));
    }
}

TEST_CASE("closed-loop state packing round trip")
{
    const ScenarioConfig cfg = two_dof_scenario();
    const int n = ClosedLoopState::packed_size(cfg.chain);
    CHECK(n == 4 * 2 + 3 * 2 * 3);
    std::mt19937_64 rng(12);
    const Eigen::VectorXd x = uniform(rng, n, -1.0, 1.0);
    CHECK(ClosedLoopState::unpack(x, cfg.chain).pack() == x);
    CHECK_THROWS_AS(ClosedLoopState::unpack(x.head(n - 1), cfg.chain), std::invalid_argument);
}

TEST_CASE("reference scenario")
{
    const ScenarioConfig cfg = two_dof_scenario();
    CHECK_NOTHROW(cfg.validate());
    const TrajectorySample d0 = cfg.trajectory.sample(0.0);
    CHECK(d0.q[0] == doctest::Approx(-0.2).epsilon(1e-15));
    CHECK(d0.q[1] == doctest::Approx(-0.2).epsilon(1e-15));
    Eigen::Matrix3d m;
    m << 1, 0, 0, 0, 1, 1, 0, 1, 2;
    CHECK(max_abs_diff(cfg.chain.links[0].mass_matrix(), m) == 0.0);
    CHECK(cfg.gains.observer.big_l(0) == doctest::Approx(210.0));
    CHECK(cfg.initial.q.norm() == 0.0);
    CHECK(cfg.initial.qdot.norm() == 0.0);
    CHECK(cfg.initial.joint_obs[0].q_hat == d0.q[0]);
    CHECK(cfg.dt == 1e-4);
    CHECK(cfg.t_end == 20.0);

    const LoopSignals s = evaluate_loop(cfg, 0.0, cfg.initial.pack());
    CHECK(s.tau.allFinite());
    CHECK(s.qddot.allFinite());
    CHECK(s.rates.allFinite());
    CHECK(s.rate[0] == doctest::Approx(0.0));  // q_hat(0) = q_d(0), desired at rest

    ScenarioConfig bad = cfg;
    bad.dt = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.t_end = 0.5 * cfg.dt;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("equilibrium is a fixed point of the closed loop")
{
    ScenarioConfig cfg = two_dof_scenario();
    const Eigen::Vector2d q(0.3, -0.7);
    cfg.trajectory = DesiredTrajectory({JointTrajectory::constant(q[0]), JointTrajectory::constant(q[1])});
    cfg.initial = initial_state(cfg.chain, q, Eigen::Vector2d::Zero(), q);
    const Eigen::VectorXd x0 = cfg.initial.pack();
    const LoopSignals s = evaluate_loop(cfg, 0.0, x0);
    CHECK(s.qddot.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.rates.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(max_abs_diff(s.tau, inverse_dynamics(cfg.chain, q, Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero())) < 1e-12);

    const RateFunction f = [&](double t, const Eigen::VectorXd& x) { return closed_loop_rates(cfg, t, x); };
    const Eigen::VectorXd x1 = integrate_rk4(f, x0, 0.2, 1e-3, nullptr);
    CHECK(max_abs_diff(x1, x0) < 1e-12);
}

TEST_CASE("inverse dynamics scales with mass at zero velocity")
{
    const ScenarioConfig cfg = two_dof_scenario();
    ChainModel doubled = cfg.chain;
    for (auto& l : doubled.links) {
        l.mass *= 2.0;
        l.inertia_com *= 2.0;
    }
    for (auto& j : doubled.joints) {
        j.rotor_inertia *= 2.0;
    }
    std::mt19937_64 rng(13);
    for (int k = 0; k < 100; ++k) {
        const Eigen::VectorXd q = uniform(rng, 2, -pi, pi), qdd = uniform(rng, 2, -5.0, 5.0);
        const Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
        const Eigen::VectorXd a = inverse_dynamics(cfg.chain, q, z, qdd);
        CHECK(max_abs_diff(inverse_dynamics(doubled, q, z, qdd), 2.0 * a) < 1e-12 * (1.0 + a.norm()));
    }
}

TEST_CASE("Lagrangian oracle")
{
    const ScenarioConfig cfg = two_dof_scenario();
    const Eigen::Vector2d z = Eigen::Vector2d::Zero();
    // Unit link inertia: H = [[7.1,3],[3,2.1]], g = (29.43, 9.81), q'' = -H^-1 g.
    const Eigen::VectorXd a = lagrangian_oracle(cfg.chain, z, z, z);
    CHECK(a[0] == doctest::Approx(-5.47766497).epsilon(1e-8));
    CHECK(a[1] == doctest::Approx(3.15380711).epsilon(1e-8));
    // Point masses: H = [[5.1,2],[2,1.1]].
    ChainModel point = cfg.chain;
    for (auto& l : point.links)
        l.inertia_com.setZero();
    const Eigen::VectorXd b = lagrangian_oracle(point, z, z, z);
    CHECK(b[0] == doctest::Approx(-7.92111801).epsilon(1e-8));
    CHECK(b[1] == doctest::Approx(5.48385093).epsilon(1e-8));
    CHECK(max_abs_diff(forward_dynamics(point, z, z, z), b) < 1e-12);

    const Eigen::VectorXd up = lagrangian_oracle(cfg.chain, Eigen::Vector2d(pi / 2.0, 0.0), z, z);
    CHECK(up.cwiseAbs().maxCoeff() < 1e-12);

    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Eigen::VectorXd q = uniform(rng, 2, -pi, pi);
        const Eigen::VectorXd qd = uniform(rng, 2, -5.0, 5.0);
        const Eigen::VectorXd tau = uniform(rng, 2, -50.0, 50.0);
        worst = std::max(worst, max_abs_diff(forward_dynamics(cfg.chain, q, qd, tau),
                                             lagrangian_oracle(cfg.chain, q, qd, tau)));
    }
    CHECK(worst <= 1e-9);

    ChainModel three = cfg.chain;
    three.links.push_back(three.links[0]);
    three.joints.push_back(three.joints[0]);
    CHECK_THROWS_WITH_AS(lagrangian_oracle(three, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()),
                         doctest::Contains("2-DoF planar"), std::invalid_argument);
    ChainModel offset = cfg.chain;
    offset.links[1].com.y() = 0.1;
    CHECK_THROWS_AS(lagrangian_oracle(offset, z, z, z), std::invalid_argument);
}

TEST_CASE("runs are deterministic")
{
    ScenarioConfig cfg = two_dof_scenario();
    cfg.t_end = 0.2;
    const RunResult a = run_scenario(cfg, {0, 1e300});
    const RunResult b = run_scenario(cfg, {0, 1e300});
    CHECK(a.final_state == b.final_state);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        CHECK(a.records[k].tau == b.records[k].tau);
        CHECK(a.records[k].nu.total == b.records[k].nu.total);
    }
    CHECK(a.records.size() == 201);  // stride 10 over 2000 steps
    CHECK(a.records.front().error.cwiseAbs().maxCoeff() == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("halving the step leaves the tracking errors unchanged")
{
    ScenarioConfig fine = two_dof_scenario();
    fine.t_end = 3.0;
    fine.stride = 1000;
    ScenarioConfig finer = fine;
    finer.dt = 0.5 * fine.dt;
    finer.stride = 2 * fine.stride;
    const RunResult a = run_scenario(fine, {0, 1e300});
    const RunResult b = run_scenario(finer, {0, 1e300});
    REQUIRE(a.records.size() == b.records.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        CHECK(a.records[k].t == doctest::Approx(b.records[k].t).epsilon(1e-12));
        worst = std::max(worst, max_abs_diff(a.records[k].error, b.records[k].error));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("short reference run passes the audit")
{
    ScenarioConfig cfg = two_dof_scenario();
    cfg.t_end = 0.3;
    const RunResult r = run_scenario(cfg);
    REQUIRE(r.audit.size() == 3001);
    AuditOptions opt;
    opt.fit_end = 0.3;
    const AuditReport a = decay_audit(r.audit, cfg.chain, cfg.gains, opt);
    CHECK(a.decay_violations == 0);
    CHECK(a.monotone_violations == 0);
    CHECK(a.max_telescoping_residual < 1e-10);
    CHECK(a.max_link_identity_residual < 1e-10);
    CHECK(a.max_joint_identity_residual < 1e-10);
    CHECK(a.fitted_rate < 0.0);
    for (const TrajectoryRecord& rec : r.records)
        CHECK(rec.vpf_residual < 1e-10);
}
