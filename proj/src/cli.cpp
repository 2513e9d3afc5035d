#include "vdc/cli.hpp"

#include "vdc/config.hpp"
#include "vdc/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#ifndef VDC_VERSION
#define VDC_VERSION "0.0.0"
#endif

namespace vdc {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct RunManifest {
    std::string config;  // path or builtin:<name>
    std::string output_dir;
    std::string command;
    std::optional<std::uint64_t> seed;
    std::string config_hash;
};

std::string hex64(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string short_num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::string header_lines(const RunManifest& m)
{
    std::ostringstream os;
    os << "# tool: vdc " << VDC_VERSION << '\n'
       << "# command: " << m.command << '\n'
       << "# config: " << m.config << '\n'
       << "# config_hash: fnv1a64:" << m.config_hash << '\n'
       << "# output: " << m.output_dir << '\n';
    if (m.seed)
        os << "# seed: " << *m.seed << '\n';
    return os.str();
}

ordered_json manifest_json(const RunManifest& m)
{
    ordered_json j;
    j["tool"] = std::string("vdc ") + VDC_VERSION;
    j["command"] = m.command;
    j["config"] = m.config;
    j["config_hash"] = "fnv1a64:" + m.config_hash;
    j["output"] = m.output_dir;
    if (m.seed)
        j["seed"] = *m.seed;
    return j;
}

ordered_json certificate_json(const GainCertificate& c)
{
    const auto margins = [](const Verdict& v) {
        ordered_json arr = ordered_json::array();
        for (const auto& m : v.margins)
            arr.push_back({{"condition", m.condition}, {"margin", m.value}, {"holds", m.holds()}});
        return arr;
    };
    ordered_json j;
    j["pass"] = c.pass();
    for (const auto& v : c.links)
        j["links"].push_back(margins(v));
    for (const auto& v : c.joints)
        j["joints"].push_back(margins(v));
    j["hypotheses"] = margins(c.hypothesis);
    j["trajectory_velocity_bound"] = c.trajectory_velocity;
    j["certified_velocity_bound"] = c.certified_velocity;
    j["attraction_radius"] = std::isfinite(c.radius) ? ordered_json(c.radius) : ordered_json(nullptr);
    j["alpha_m"] = c.bounds.alpha_m;
    j["alpha_M"] = c.bounds.alpha_M;
    j["alpha_p"] = c.bounds.alpha_p;
    j["transform_bound"] = c.bounds.transform_norm;
    j["violations"] = c.violations();
    return j;
}

ordered_json audit_json(const AuditReport& r)
{
    ordered_json j;
    j["pass"] = r.pass();
    j["samples"] = r.samples;
    j["dt"] = r.dt;
    j["alpha_p"] = r.bounds.alpha_p;
    j["realized_velocity_bound"] = r.realized_velocity;
    j["decay_violations"] = r.decay_violations;
    j["roundoff_limited_steps"] = r.roundoff_limited;
    j["worst_decay_excess"] = r.worst_decay_excess;
    j["worst_decay_time"] = r.worst_decay_time;
    j["monotone_violations"] = r.monotone_violations;
    j["link_subsystem_violations"] = r.link_subsystem_violations;
    j["joint_subsystem_violations"] = r.joint_subsystem_violations;
    j["max_telescoping_residual"] = r.max_telescoping_residual;
    j["max_link_identity_residual"] = r.max_link_identity_residual;
    j["max_joint_identity_residual"] = r.max_joint_identity_residual;
    j["fitted_log_nu_slope"] = r.fitted_rate;
    j["nu_ratio"] = r.nu_ratio;
    return j;
}

std::string trajectory_csv(const std::vector<TrajectoryRecord>& records, int n)
{
    std::ostringstream os;
    os << "t";
    const char* cols[] = {"q", "q_d", "e", "q_hat", "q_hat_dot", "qdot", "tau"};
    for (const char* c : cols)
        for (int i = 1; i <= n; ++i)
            os << ',' << c << i;
    os << ",nu";
    for (int i = 1; i <= n; ++i)
        os << ",nu_B" << i;
    for (int i = 1; i <= n; ++i)
        os << ",nu_a" << i;
    os << ",vpf_residual\n";
    for (const auto& r : records) {
        os << num(r.t);
        for (const Eigen::VectorXd* v : {&r.q, &r.q_d, &r.error, &r.q_hat, &r.q_hat_rate, &r.qdot, &r.tau})
            for (int i = 0; i < n; ++i)
                os << ',' << num((*v)[i]);
        os << ',' << num(r.nu.total);
        for (double v : r.nu.link)
            os << ',' << num(v);
        for (double v : r.nu.joint)
            os << ',' << num(v);
        os << ',' << num(r.vpf_residual) << '\n';
    }
    return os.str();
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + path.string());
    f << text;
}

std::string joined_command(const std::vector<std::string>& args)
{
    std::string s = "vdc";
    for (const auto& a : args)
        s += " " + a;
    return s;
}

struct Source {
    std::string config_path;
    std::string builtin;

    void add_to(CLI::App* cmd)
    {
        auto* c = cmd->add_option("--config", config_path, "Scenario JSON file");
        auto* b = cmd->add_option("--builtin", builtin, "Built-in scenario (twodof)");
        c->excludes(b);
    }

    ScenarioConfig load(RunManifest& m) const
    {
        if (config_path.empty() && builtin.empty())
            throw ConfigError("one of --config or --builtin is required");
        ScenarioConfig c = config_path.empty() ? builtin_config(builtin) : load_config(config_path);
        m.config = config_path.empty() ? "builtin:" + builtin : config_path;
        return c;
    }
};

int simulate(const Source& src, std::optional<double> t_end, std::optional<double> dt,
             std::optional<int> stride, int audit_stride, const std::string& out_dir,
             const std::string& command, std::ostream& out, std::ostream& err)
{
    RunManifest m;
    m.command = command;
    m.output_dir = out_dir;
    ScenarioConfig c = src.load(m);
    if (t_end)
        c.t_end = *t_end;
    if (dt)
        c.dt = *dt;
    if (stride)
        c.stride = *stride;
    c.validate();
    m.config_hash = hex64(fnv1a64(config_to_json(c)));

    const GainCertificate cert = certify_gains(c.chain, c.gains, c.trajectory);
    RunResult run;
    try {
        run = run_scenario(c, RunOptions{audit_stride});
    } catch (const NumericalError& e) {
        err << "error: numerical failure at t = " << num(e.time()) << " s: " << e.what() << '\n';
        return kExitNumerical;
    }

    AuditOptions opts;
    opts.fit_end = std::min(1.0, c.t_end);
    std::optional<AuditReport> audit;
    if (audit_stride > 0 && run.audit.size() >= 7)
        audit = decay_audit(run.audit, c.chain, c.gains, opts);

    fs::create_directories(out_dir);
    const std::string header = header_lines(m);
    write_file(fs::path(out_dir) / "trajectory.csv",
               header + trajectory_csv(run.records, c.chain.dof()));
    write_file(fs::path(out_dir) / "certificate.txt", header + format_certificate(cert));
    ordered_json aj;
    aj["manifest"] = manifest_json(m);
    aj["certificate"] = certificate_json(cert);
    aj["audit"] = audit ? audit_json(*audit) : ordered_json(nullptr);
    write_file(fs::path(out_dir) / "audit.json", aj.dump(2) + "\n");

    out << "simulated " << num(c.t_end) << " s at dt = " << num(c.dt) << " s, "
        << run.records.size() << " rows -> " << out_dir << '\n';
    out << "certificate: " << (cert.pass() ? "PASS" : "FAIL") << '\n';
    if (audit)
        out << "audit: " << (audit->pass() ? "PASS" : "FAIL") << " (" << audit->decay_violations
            << " decay violations, telescoping residual "
            << short_num(audit->max_telescoping_residual) << ")\n";
    const bool ok = cert.pass() && (!audit || audit->pass());
    if (!ok) {
        for (const auto& v : cert.violations())
            err << "violated: " << v << '\n';
        if (audit && !audit->pass())
            err << "audit failed: " << audit->decay_violations << " decay violations\n";
    }
    return ok ? kExitOk : kExitFailed;
}

int check_gains(const Source& src, const std::string& out_dir, const std::string& command,
                std::ostream& out, std::ostream& err)
{
    RunManifest m;
    m.command = command;
    m.output_dir = out_dir;
    const ScenarioConfig c = src.load(m);
    m.config_hash = hex64(fnv1a64(config_to_json(c)));
    const GainCertificate cert = certify_gains(c.chain, c.gains, c.trajectory);
    const std::string text = format_certificate(cert);
    out << text;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "certificate.txt", header_lines(m) + text);
    }
    for (const auto& v : cert.violations())
        err << "violated: " << v << '\n';
    return cert.pass() ? kExitOk : kExitFailed;
}

int oracle_compare(const Source& src, long long samples, std::uint64_t seed, double perturb_mass,
                   double tolerance, std::ostream& out, std::ostream& err)
{
    RunManifest m;
    const ScenarioConfig c = src.load(m);
    if (samples < 0)
        throw ConfigError("--samples must be nonnegative");
    try {
        lagrangian_oracle(c.chain, Eigen::VectorXd::Zero(c.chain.dof()),
                          Eigen::VectorXd::Zero(c.chain.dof()), Eigen::VectorXd::Zero(c.chain.dof()));
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    // Fault injection: the recursive model sees a different last-link mass.
    ChainModel model = c.chain;
    model.links.back().mass *= 1.0 + perturb_mass;

    if (samples == 0) {
        err << "warning: empty sweep (--samples 0), nothing compared\n";
        out << "max |qdd_recursive - qdd_oracle| = 0 over 0 samples (seed " << seed << ")\nPASS\n";
        return kExitOk;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(-std::numbers::pi, std::numbers::pi), vel(-5.0, 5.0), trq(-50.0, 50.0);
    double worst = 0.0;
    for (long long s = 0; s < samples; ++s) {
        Eigen::Vector2d q(pos(rng), pos(rng)), qd(vel(rng), vel(rng)), tau(trq(rng), trq(rng));
        const Eigen::VectorXd a = forward_dynamics(model, q, qd, tau);
        const Eigen::VectorXd b = lagrangian_oracle(c.chain, q, qd, tau);
        worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    out << "max |qdd_recursive - qdd_oracle| = " << short_num(worst) << " over " << samples
        << " samples (seed " << seed << ")\n";
    const bool ok = worst <= tolerance;
    out << (ok ? "PASS" : "FAIL") << '\n';
    if (!ok)
        err << "deviation " << short_num(worst) << " exceeds tolerance " << short_num(tolerance) << '\n';
    return ok ? kExitOk : kExitFailed;
}

}  // namespace

const char* version() { return VDC_VERSION; }

std::string format_certificate(const GainCertificate& cert)
{
    std::ostringstream os;
    os << "          margin  condition\n";
    const auto line = [&os](const std::string& who, const Margin& m) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%11.6g", m.value);
        os << (m.holds() ? "PASS " : "FAIL ") << buf << "  " << who << m.condition << '\n';
    };
    for (std::size_t i = 0; i < cert.links.size(); ++i)
        for (const auto& m : cert.links[i].margins)
            line("link " + std::to_string(i + 1) + ": ", m);
    for (std::size_t i = 0; i < cert.joints.size(); ++i)
        for (const auto& m : cert.joints[i].margins)
            line("joint " + std::to_string(i + 1) + ": ", m);
    for (const auto& m : cert.hypothesis.margins)
        line("region: ", m);
    os << "trajectory velocity bound:";
    for (double v : cert.trajectory_velocity)
        os << ' ' << short_num(v);
    os << "\ncertified velocity bound:";
    for (double v : cert.certified_velocity)
        os << ' ' << short_num(v);
    os << "\nalpha_m = " << short_num(cert.bounds.alpha_m)
       << ", alpha_M = " << short_num(cert.bounds.alpha_M)
       << ", M_U = " << short_num(cert.bounds.transform_norm) << '\n';
    if (std::isfinite(cert.radius))
        os << "attraction radius r = " << short_num(cert.radius)
           << (cert.radius > 0.0 ? "" : "  (empty region, increase L_B)") << '\n';
    else
        os << "attraction radius: not defined (hypothesis violated)\n";
    os << "overall: " << (cert.pass() ? "PASS" : "FAIL") << '\n';
    return os.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Observer-based virtual decomposition control: simulation, gain certificates "
                 "and Lyapunov audits"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("vdc ") + VDC_VERSION);

    Source sim_src, gain_src, oracle_src;
    std::optional<double> t_end, dt;
    std::optional<int> stride;
    int audit_stride = 1;
    std::string out_dir = "runs", gain_out;
    long long samples = 1000;
    std::uint64_t seed = 1;
    double perturb = 0.0, tolerance = 1e-9;

    auto* sim = app.add_subcommand("simulate", "Run a scenario, write trajectory.csv, audit.json, certificate.txt");
    sim_src.add_to(sim);
    sim->add_option("--t-end", t_end, "Final time [s]")->check(CLI::PositiveNumber);
    sim->add_option("--dt", dt, "Step size [s]")->check(CLI::PositiveNumber);
    sim->add_option("--stride", stride, "Output every N steps")->check(CLI::PositiveNumber);
    sim->add_option("--audit-stride", audit_stride, "Audit every N steps (0 disables)")->check(CLI::NonNegativeNumber);
    sim->add_option("--out", out_dir, "Output directory");

    auto* gains = app.add_subcommand("check-gains", "Print gain margins and the attraction radius");
    gain_src.add_to(gains);
    gains->add_option("--out", gain_out, "Also write certificate.txt here");

    auto* oracle = app.add_subcommand("oracle-compare", "Compare recursive forward dynamics against the two-link closed form");
    oracle_src.add_to(oracle);
    oracle->add_option("--samples", samples, "Random states");
    oracle->add_option("--seed", seed, "RNG seed");
    oracle->add_option("--perturb-mass", perturb, "Relative last-link mass error injected into the recursive model");
    oracle->add_option("--tolerance", tolerance, "Pass threshold")->check(CLI::NonNegativeNumber);

    std::vector<const char*> argv{"vdc"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << "vdc " << VDC_VERSION << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    const std::string command = joined_command(args);
    try {
        if (sim->parsed())
            return simulate(sim_src, t_end, dt, stride, audit_stride, out_dir, command, out, err);
        if (gains->parsed())
            return check_gains(gain_src, gain_out, command, out, err);
        return oracle_compare(oracle_src, samples, seed, perturb, tolerance, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericalError& e) {
        err << "error: numerical failure at t = " << num(e.time()) << " s: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace vdc
