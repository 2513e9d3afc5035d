#include "vdc/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vdc {

namespace {

std::string indexed(const char* what, int i) { return std::string(what) + " " + std::to_string(i); }

double spectral_norm(const Mat& m) { return Eigen::JacobiSVD<Mat>(m).singularValues()(0); }

// Third central difference estimate of the third derivative at j.
double third_derivative(const std::vector<double>& v, std::size_t j, double dt)
{
    return (v[j + 2] - 2.0 * v[j + 1] + 2.0 * v[j - 1] - v[j - 2]) / (2.0 * dt * dt * dt);
}

// Per-step tolerance for central-difference derivatives of a sampled
// function: a multiple of the truncation term dt^2 |f'''| taken over a
// +-2 sample window, plus the round-off of the difference quotient.
std::vector<double> fd_tolerance(const std::vector<double>& v, double dt, double factor,
                                 const std::vector<double>& roundoff = {})
{
    const std::size_t n = v.size();
    std::vector<double> third(n, 0.0);
    for (std::size_t j = 2; j + 2 < n; ++j)
        third[j] = std::abs(third_derivative(v, j, dt));
    for (std::size_t j = 0; j < std::min<std::size_t>(2, n); ++j)
        third[j] = third[std::min<std::size_t>(2, n - 1)];
    for (std::size_t j = n >= 2 ? n - 2 : 0; j < n; ++j)
        third[j] = third[n >= 3 ? n - 3 : 0];

    constexpr double eps = std::numeric_limits<double>::epsilon();
    std::vector<double> tol(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t lo = k >= 2 ? k - 2 : 0;
        const std::size_t hi = std::min(n - 1, k + 2);
        double t3 = 0.0;
        double vmax = 0.0;
        double noise = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            t3 = std::max(t3, third[j]);
            vmax = std::max(vmax, std::abs(v[j]));
            if (!roundoff.empty())
                noise = std::max(noise, roundoff[j]);
        }
        tol[k] = factor * dt * dt * t3 + (100.0 * eps * vmax + noise) / dt;
    }
    return tol;
}

std::vector<double> central_difference(const std::vector<double>& v, double dt)
{
    const std::size_t n = v.size();
    std::vector<double> d(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 1; k + 1 < n; ++k)
        d[k] = (v[k + 1] - v[k - 1]) / (2.0 * dt);
    return d;
}

}  // namespace

bool Verdict::pass() const
{
    return std::all_of(margins.begin(), margins.end(), [](const Margin& m) { return m.holds(); });
}

std::string Verdict::first_violation() const
{
    for (const auto& m : margins)
        if (!m.holds())
            return m.condition;
    return {};
}

double virtual_power_flow(const SpatialVector& v_required, const SpatialVector& v,
                          const SpatialVector& f_required, const SpatialVector& f)
{
    return power(v_required - v, f_required - f);
}

Verdict check_link_gains(double k_b, double l_b, double coriolis_bound, double velocity_bound)
{
    if (!(k_b > 0.0) || !(l_b > 0.0))
        throw std::invalid_argument("link gains must be positive");
    if (!(coriolis_bound > 0.0))
        throw std::invalid_argument("Coriolis bound must be positive");
    if (!(velocity_bound >= 0.0))
        throw std::invalid_argument("velocity bound must be nonnegative");
    const double cv = coriolis_bound * velocity_bound;
    const double required = cv * (1.0 + 0.5 * cv) + 0.5 * k_b;
    return Verdict{{{"K_B > 1", k_b - 1.0},
                    {"L_B > M_c*M_v*(1 + M_c*M_v/2) + K_B/2", l_b - required}}};
}

Verdict check_joint_gains(double k, double ell, double rotor_inertia, double friction_lipschitz)
{
    if (!(k > 0.0))
        throw std::invalid_argument("joint velocity gain k must be positive");
    if (!(rotor_inertia > 0.0))
        throw std::invalid_argument("rotor inertia must be positive");
    const double big_l = ell + 1.0 / rotor_inertia;
    const double rhs = std::max(2.0, friction_lipschitz * friction_lipschitz + k);
    return Verdict{{{"ell > 0", ell}, {"2*I_m*L > max(2, m_c^2 + k)", 2.0 * rotor_inertia * big_l - rhs}}};
}

double certified_velocity_bound(double k_b, double l_b, double coriolis_bound)
{
    const double radicand = 1.0 + 2.0 * l_b - k_b;
    if (radicand < 0.0)
        throw HypothesisViolation("1 + 2*L_B - K_B >= 0 violated");
    return (std::sqrt(radicand) - 1.0) / coriolis_bound;
}

double chain_transform_bound(const ChainModel& chain)
{
    double bound = 1.0;
    for (int i = 1; i <= chain.dof(); ++i) {
        Mat u = chain.joint_transform(i, 0.0).data();
        if (i > 1)
            u = chain.tip_transform(i - 1).data() * u;
        bound = std::max(bound, spectral_norm(u));
    }
    return bound;
}

double alpha_min(const ChainModel& chain)
{
    double a = std::numeric_limits<double>::infinity();
    for (int i = 0; i < chain.dof(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        Eigen::SelfAdjointEigenSolver<Mat> eig(chain.links[k].mass_matrix());
        a = std::min({a, eig.eigenvalues().minCoeff(), chain.joints[k].rotor_inertia});
    }
    return a;
}

double alpha_max(const ChainModel& chain, const ObserverGains& gains)
{
    double a = 0.0;
    for (int i = 0; i < chain.dof(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        Eigen::SelfAdjointEigenSolver<Mat> eig(chain.links[k].mass_matrix());
        a = std::max({a, eig.eigenvalues().maxCoeff(),
                      chain.joints[k].rotor_inertia + 1.0 / gains.ell(i)});
    }
    return a;
}

StabilityBounds stability_bounds(const ChainModel& chain, const GainSet& gains,
                                 const std::vector<double>& velocity_bounds)
{
    const int n = chain.dof();
    if (static_cast<int>(velocity_bounds.size()) != n)
        throw std::invalid_argument("stability_bounds: one velocity bound per link required");
    StabilityBounds b;
    b.velocity = velocity_bounds;
    b.transform_norm = chain_transform_bound(chain);
    b.alpha_m = alpha_min(chain);
    b.alpha_M = alpha_max(chain, gains.observer);
    double alpha_p = 0.5;
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double mc = chain.links[k].coriolis_bound;
        const double kb = gains.control.link_gain[k];
        const double lb = gains.observer.link_gain(i);
        const double cv = mc * velocity_bounds[k];
        const auto& joint = chain.joints[k];
        const double fl = joint.friction.lipschitz();
        const double kj = gains.control.k[k];

        b.coriolis.push_back(mc);
        b.friction_lipschitz.push_back(fl);
        b.link_control_margin.push_back(0.5 * (kb - 1.0));
        b.link_observer_margin.push_back(lb - cv * (1.0 + 0.5 * cv) - 0.5 * kb);
        b.joint_observer_margin.push_back(joint.rotor_inertia * gains.observer.big_l(i) -
                                          0.5 * (fl * fl + kj));
        alpha_p = std::min({alpha_p, b.link_control_margin.back(), b.link_observer_margin.back(),
                            0.5 * kj, b.joint_observer_margin.back()});
    }
    b.alpha_p = alpha_p;
    return b;
}

std::vector<double> trajectory_velocity_bounds(const ChainModel& chain,
                                               const Eigen::VectorXd& desired_velocity_bounds)
{
    const int n = chain.dof();
    if (desired_velocity_bounds.size() != n)
        throw std::invalid_argument("trajectory_velocity_bounds: size mismatch");
    const double mu = chain_transform_bound(chain);
    std::vector<double> out;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        sum += std::pow(mu, i + 1) * desired_velocity_bounds[i];
        out.push_back(sum);
    }
    return out;
}

AttractionRadius attraction_radius(const ChainModel& chain, const GainSet& gains,
                                   const StabilityBounds& bounds,
                                   const Eigen::VectorXd& desired_velocity_bounds)
{
    const int n = chain.dof();
    if (desired_velocity_bounds.size() != n)
        throw std::invalid_argument("attraction_radius: size mismatch");
    const double inv_alpha_M = 1.0 / bounds.alpha_M;
    for (int i = 0; i < n; ++i)
        if (!(4.0 * gains.control.lambda[static_cast<std::size_t>(i)] > inv_alpha_M))
            throw HypothesisViolation(indexed("joint", i + 1) +
                                      ": 4*lambda > 1/alpha_M violated");

    AttractionRadius r;
    r.radius = std::numeric_limits<double>::infinity();
    const double scale = std::sqrt(bounds.alpha_m / bounds.alpha_M);
    double drift = 0.0;
    double gain_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double mu_k = std::pow(bounds.transform_norm, i + 1);
        const double lambda = gains.control.lambda[k];
        drift += mu_k * desired_velocity_bounds[i];
        gain_sum += mu_k * 16.0 * lambda / (4.0 * lambda - inv_alpha_M);
        double kernel = 0.0;
        try {
            kernel = certified_velocity_bound(gains.control.link_gain[k], gains.observer.link_gain(i),
                                              bounds.coriolis[k]);
        } catch (const HypothesisViolation&) {
            throw HypothesisViolation(indexed("link", i + 1) + ": 1 + 2*L_B - K_B >= 0 violated");
        }
        r.velocity_kernel.push_back(kernel);
        r.per_link.push_back(scale * (kernel - drift) / (1.0 + gain_sum));
        r.radius = std::min(r.radius, r.per_link.back());
    }
    return r;
}

ErrorStateVector::ErrorStateVector(Dim dim, int n)
    : dim_(dim), n_(n), data_(Eigen::VectorXd::Zero(n * block_size(dim)))
{
}

Eigen::VectorBlock<Eigen::VectorXd> ErrorStateVector::link_control(int i)
{
    return data_.segment(offset(i), size_of(dim_));
}

Eigen::VectorBlock<Eigen::VectorXd> ErrorStateVector::link_observer(int i)
{
    return data_.segment(offset(i) + size_of(dim_), size_of(dim_));
}

double& ErrorStateVector::joint_control(int i) { return data_[offset(i) + 2 * size_of(dim_)]; }
double& ErrorStateVector::joint_observer(int i) { return data_[offset(i) + 2 * size_of(dim_) + 1]; }
double& ErrorStateVector::composite(int i) { return data_[offset(i) + 2 * size_of(dim_) + 2]; }

Eigen::VectorXd ErrorStateVector::link_control(int i) const
{
    return data_.segment(offset(i), size_of(dim_));
}

Eigen::VectorXd ErrorStateVector::link_observer(int i) const
{
    return data_.segment(offset(i) + size_of(dim_), size_of(dim_));
}

double ErrorStateVector::joint_control(int i) const { return data_[offset(i) + 2 * size_of(dim_)]; }
double ErrorStateVector::joint_observer(int i) const { return data_[offset(i) + 2 * size_of(dim_) + 1]; }
double ErrorStateVector::composite(int i) const { return data_[offset(i) + 2 * size_of(dim_) + 2]; }

LyapunovValue lyapunov_total(const ChainModel& chain, const ObserverGains& gains,
                             const ErrorStateVector& x)
{
    const int n = chain.dof();
    if (x.dof() != n || x.dim() != chain.dim)
        throw std::invalid_argument("lyapunov_total: error vector does not match chain");
    LyapunovValue v;
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const Mat m = chain.links[k].mass_matrix();
        const Vec ec = x.link_control(i);
        const Vec eo = x.link_observer(i);
        v.link.push_back(0.5 * ec.dot(m * ec) + 0.5 * eo.dot(m * eo));

        const double im = chain.joints[k].rotor_inertia;
        const double ell = gains.ell(i);
        const double a = x.joint_control(i);
        const double e = x.joint_observer(i);
        const double s = x.composite(i);
        const double d = (s - e) / ell;  // position estimation error
        v.joint.push_back(0.5 * im * (a * a + e * e + s * s) + 0.5 * ell * d * d);
        v.total += v.link.back() + v.joint.back();
    }
    return v;
}

bool GainCertificate::pass() const
{
    const auto ok = [](const Verdict& v) { return v.pass(); };
    return std::all_of(links.begin(), links.end(), ok) &&
           std::all_of(joints.begin(), joints.end(), ok) && hypothesis.pass() && radius > 0.0;
}

std::vector<std::string> GainCertificate::violations() const
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < links.size(); ++i)
        for (const auto& m : links[i].margins)
            if (!m.holds())
                out.push_back("link " + std::to_string(i + 1) + " gain condition: " + m.condition);
    for (std::size_t i = 0; i < joints.size(); ++i)
        for (const auto& m : joints[i].margins)
            if (!m.holds())
                out.push_back("joint " + std::to_string(i + 1) + " gain condition: " + m.condition);
    for (const auto& m : hypothesis.margins)
        if (!m.holds())
            out.push_back("attraction-region hypothesis: " + m.condition);
    if (hypothesis.pass() && !(radius > 0.0))
        out.push_back("attraction radius > 0 (empty region, increase L_B)");
    return out;
}

GainCertificate certify_gains(const ChainModel& chain, const GainSet& gains,
                              const DesiredTrajectory& trajectory)
{
    const int n = chain.dof();
    gains.control.validate(n);
    if (trajectory.size() != n)
        throw std::invalid_argument("certify_gains: trajectory has " +
                                    std::to_string(trajectory.size()) + " joints, chain has " +
                                    std::to_string(n));
    GainCertificate c;
    const Eigen::VectorXd vd = trajectory.velocity_bounds();
    c.trajectory_velocity = trajectory_velocity_bounds(chain, vd);
    c.bounds = stability_bounds(chain, gains, c.trajectory_velocity);

    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double kb = gains.control.link_gain[k];
        const double lb = gains.observer.link_gain(i);
        c.links.push_back(check_link_gains(kb, lb, chain.links[k].coriolis_bound,
                                           c.trajectory_velocity[k]));
        c.joints.push_back(check_joint_gains(gains.control.k[k], gains.observer.ell(i),
                                             chain.joints[k].rotor_inertia,
                                             chain.joints[k].friction.lipschitz()));
        const double radicand = 1.0 + 2.0 * lb - kb;
        c.hypothesis.margins.push_back(
            {"link " + std::to_string(i + 1) + ": 1 + 2*L_B - K_B > 0", radicand});
        c.hypothesis.margins.push_back({"joint " + std::to_string(i + 1) +
                                            ": 4*lambda > 1/alpha_M",
                                        4.0 * gains.control.lambda[k] - 1.0 / c.bounds.alpha_M});
        c.certified_velocity.push_back(radicand >= 0.0 ? certified_velocity_bound(kb, lb, chain.links[k].coriolis_bound)
                                                       : std::numeric_limits<double>::quiet_NaN());
    }
    if (c.hypothesis.pass())
        c.radius = attraction_radius(chain, gains, c.bounds, vd).radius;
    else
        c.radius = std::numeric_limits<double>::quiet_NaN();
    return c;
}

bool AuditReport::pass(double residual_tolerance) const
{
    return decay_violations == 0 && max_telescoping_residual < residual_tolerance &&
           max_link_identity_residual < residual_tolerance &&
           max_joint_identity_residual < residual_tolerance;
}

AuditReport decay_audit(const std::vector<AuditSample>& trajectory, const ChainModel& chain,
                        const GainSet& gains, const AuditOptions& options)
{
    const int n = chain.dof();
    const std::size_t count = trajectory.size();
    if (count < 7)
        throw std::invalid_argument("decay_audit: at least 7 samples required");
    const double dt = trajectory[1].t - trajectory[0].t;
    if (!(dt > 0.0))
        throw std::invalid_argument("decay_audit: samples must advance in time");
    for (std::size_t k = 1; k < count; ++k) {
        const double step = trajectory[k].t - trajectory[k - 1].t;
        if (std::abs(step - dt) > 1e-9 * dt + 1e-12 * std::abs(trajectory[k].t))
            throw std::invalid_argument("decay_audit: non-uniform sampling at t = " +
                                        std::to_string(trajectory[k].t));
    }

    AuditReport r;
    r.samples = count;
    r.dt = dt;
    r.realized_velocity.assign(static_cast<std::size_t>(n), 0.0);
    for (const auto& s : trajectory)
        for (int i = 0; i < n; ++i)
            r.realized_velocity[static_cast<std::size_t>(i)] =
                std::max(r.realized_velocity[static_cast<std::size_t>(i)],
                         s.velocity_norm.at(static_cast<std::size_t>(i)));
    const std::vector<double>& mv =
        options.velocity_bounds.empty() ? r.realized_velocity : options.velocity_bounds;
    r.bounds = stability_bounds(chain, gains, mv);

    // Lyapunov values and per-subsystem pieces.
    std::vector<std::vector<double>> nu_link(static_cast<std::size_t>(n)),
        nu_joint(static_cast<std::size_t>(n));
    std::vector<double> x_sq(count);
    r.nu.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        const LyapunovValue v = lyapunov_total(chain, gains.observer, trajectory[k].x);
        r.nu[k] = v.total;
        x_sq[k] = trajectory[k].x.data().squaredNorm();
        for (int i = 0; i < n; ++i) {
            nu_link[static_cast<std::size_t>(i)].push_back(v.link[static_cast<std::size_t>(i)]);
            nu_joint[static_cast<std::size_t>(i)].push_back(v.joint[static_cast<std::size_t>(i)]);
        }
    }
    r.nu_rate = central_difference(r.nu, dt);
    const double resolution = options.state_resolution;
    std::vector<double> roundoff(count);
    for (std::size_t k = 0; k < count; ++k)
        roundoff[k] = r.bounds.alpha_M * std::sqrt(x_sq[k]) * resolution;
    r.tolerance = fd_tolerance(r.nu, dt, options.tolerance_factor, roundoff);
    const std::vector<double> smooth_tolerance = fd_tolerance(r.nu, dt, options.tolerance_factor);

    r.worst_decay_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k + 1 < count; ++k) {
        const double excess = r.nu_rate[k] + r.bounds.alpha_p * x_sq[k] - r.tolerance[k];
        if (excess > r.worst_decay_excess) {
            r.worst_decay_excess = excess;
            r.worst_decay_time = trajectory[k].t;
        }
        if (excess > 0.0)
            ++r.decay_violations;
        else if (r.nu_rate[k] + r.bounds.alpha_p * x_sq[k] > smooth_tolerance[k])
            ++r.roundoff_limited;
    }
    for (std::size_t k = 0; k + 1 < count; ++k)
        if (r.nu[k + 1] - r.nu[k] > dt * std::max(r.tolerance[k], r.tolerance[k + 1]))
            ++r.monotone_violations;

    // Per-subsystem decay up to the virtual power flows at the boundary.
    for (int i = 0; i < n; ++i) {
        const auto ki = static_cast<std::size_t>(i);
        const auto& nl = nu_link[ki];
        const auto& nj = nu_joint[ki];
        const auto rate_l = central_difference(nl, dt);
        const auto rate_j = central_difference(nj, dt);
        std::vector<double> noise_l(count), noise_j(count);
        for (std::size_t k = 0; k < count; ++k) {
            const auto& x = trajectory[k].x;
            noise_l[k] = r.bounds.alpha_M * resolution *
                         std::sqrt(x.link_control(i).squaredNorm() + x.link_observer(i).squaredNorm());
            noise_j[k] = r.bounds.alpha_M * resolution *
                         std::sqrt(std::pow(x.joint_control(i), 2) + std::pow(x.joint_observer(i), 2) +
                                   std::pow(x.composite(i), 2));
        }
        const auto tol_l = fd_tolerance(nl, dt, options.tolerance_factor, noise_l);
        const auto tol_j = fd_tolerance(nj, dt, options.tolerance_factor, noise_j);
        const double alpha_link =
            std::min(r.bounds.link_control_margin[ki], r.bounds.link_observer_margin[ki]);
        const double alpha_joint =
            std::min({0.5 * gains.control.k[ki], r.bounds.joint_observer_margin[ki], 0.5});
        std::size_t vl = 0;
        std::size_t vj = 0;
        for (std::size_t k = 1; k + 1 < count; ++k) {
            const auto& s = trajectory[k];
            const double xl = s.x.link_control(i).squaredNorm() + s.x.link_observer(i).squaredNorm();
            const double xj = std::pow(s.x.joint_control(i), 2) + std::pow(s.x.joint_observer(i), 2) +
                              std::pow(s.x.composite(i), 2);
            const double flow_l = s.p_base[ki + 1] - s.p_tip[ki];
            const double upstream = i == 0 ? s.p_base[0] : s.p_tip[ki - 1];
            const double flow_j = upstream - s.p_base[ki + 1];
            if (rate_l[k] + alpha_link * xl > flow_l + tol_l[k])
                ++vl;
            if (rate_j[k] + alpha_joint * xj > flow_j + tol_j[k])
                ++vj;
        }
        r.link_subsystem_violations.push_back(vl);
        r.joint_subsystem_violations.push_back(vj);
    }

    // Power-flow identities and their telescoped sum.
    for (const auto& s : trajectory) {
        double link_sum = 0.0;
        double joint_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto ki = static_cast<std::size_t>(i);
            const double upstream = i == 0 ? s.p_base[0] : s.p_tip[ki - 1];
            r.max_link_identity_residual =
                std::max(r.max_link_identity_residual,
                         std::abs(s.link_power[ki] - (s.p_base[ki + 1] - s.p_tip[ki])));
            r.max_joint_identity_residual =
                std::max(r.max_joint_identity_residual,
                         std::abs(s.joint_power[ki] - (s.p_base[ki + 1] - upstream)));
            link_sum += s.link_power[ki];
            joint_sum += s.joint_power[ki];
        }
        r.max_telescoping_residual =
            std::max(r.max_telescoping_residual, std::abs(link_sum - joint_sum));
    }

    // Least-squares slope of log(nu) over the fit window.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t m = 0;
    double nu_start = std::numeric_limits<double>::quiet_NaN();
    double nu_end = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < count; ++k) {
        const double t = trajectory[k].t;
        if (t < options.fit_start - 0.5 * dt || t > options.fit_end + 0.5 * dt)
            continue;
        if (std::isnan(nu_start))
            nu_start = r.nu[k];
        nu_end = r.nu[k];
        if (!(r.nu[k] > 0.0))
            continue;
        const double y = std::log(r.nu[k]);
        sx += t;
        sy += y;
        sxx += t * t;
        sxy += t * y;
        ++m;
    }
    if (m >= 2) {
        const double denom = static_cast<double>(m) * sxx - sx * sx;
        r.fitted_rate = (static_cast<double>(m) * sxy - sx * sy) / denom;
    }
    r.nu_ratio = nu_end / nu_start;
    return r;
}

}  // namespace vdc
