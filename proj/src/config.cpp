#include "vdc/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace vdc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& what)
{
    throw ConfigError("config: '" + key + "' " + what);
}

const json& member(const json& obj, const std::string& path, const char* key)
{
    const std::string full = path.empty() ? key : path + "." + key;
    if (!obj.is_object())
        fail(path, "must be an object");
    auto it = obj.find(key);
    if (it == obj.end())
        fail(full, "is missing");
    return *it;
}

double number(const json& v, const std::string& key)
{
    if (!v.is_number())
        fail(key, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x))
        fail(key, "must be finite");
    return x;
}

double number_or(const json& obj, const std::string& path, const char* key, double fallback)
{
    auto it = obj.find(key);
    return it == obj.end() ? fallback : number(*it, path + "." + key);
}

double positive(const json& v, const std::string& key)
{
    const double x = number(v, key);
    if (!(x > 0.0))
        fail(key, "must be positive");
    return x;
}

// A list of n numbers; a single number is broadcast.
std::vector<double> numbers(const json& v, const std::string& key, int n)
{
    if (v.is_number())
        return std::vector<double>(static_cast<std::size_t>(n), number(v, key));
    if (!v.is_array())
        fail(key, "must be a number or an array");
    if (static_cast<int>(v.size()) != n)
        fail(key, "must have " + std::to_string(n) + " entries");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(number(v[i], key + "[" + std::to_string(i) + "]"));
    return out;
}

Eigen::VectorXd vector(const json& v, const std::string& key, int n)
{
    const auto xs = numbers(v, key, n);
    return Eigen::Map<const Eigen::VectorXd>(xs.data(), n);
}

std::string index_key(const std::string& path, std::size_t i)
{
    return path + "[" + std::to_string(i) + "]";
}

Friction parse_friction(const json& v, const std::string& key)
{
    if (!v.is_object())
        fail(key, "must be an object");
    const json& kind = member(v, key, "kind");
    if (!kind.is_string())
        fail(key + ".kind", "must be a string");
    const std::string k = kind.get<std::string>();
    Friction f;
    if (k == "none")
        return Friction::none();
    if (k == "tanh")
        f = Friction::tanh(number_or(v, key, "amplitude", 1.0), number_or(v, key, "slope", 1.0));
    else if (k == "viscous")
        f = Friction::viscous_only(number(member(v, key, "viscous"), key + ".viscous"));
    else if (k == "coulomb_viscous")
        f = Friction::coulomb_viscous(number(member(v, key, "coulomb"), key + ".coulomb"),
                                      number_or(v, key, "slope", 1.0),
                                      number(member(v, key, "viscous"), key + ".viscous"));
    else
        fail(key + ".kind", "must be one of none, tanh, viscous, coulomb_viscous");
    if (f.coulomb < 0.0 || f.slope < 0.0 || f.viscous < 0.0)
        fail(key, "coefficients must be nonnegative");
    return f;
}

ChainModel parse_chain(const json& root)
{
    const json& c = member(root, "", "chain");
    ChainModel chain;
    auto dim = c.find("dim");
    if (dim != c.end() && *dim != "planar")
        fail("chain.dim", "must be \"planar\" (spatial chains are built through the library API)");
    chain.dim = Dim::Planar;

    const json& links = member(c, "chain", "links");
    const json& joints = member(c, "chain", "joints");
    if (!links.is_array() || links.empty())
        fail("chain.links", "must be a nonempty array");
    if (!joints.is_array() || joints.size() != links.size())
        fail("chain.joints", "must be an array with one entry per link");

    for (std::size_t i = 0; i < links.size(); ++i) {
        const std::string key = index_key("chain.links", i);
        const json& l = links[i];
        const double mass = positive(member(l, key, "mass"), key + ".mass");
        const auto com = numbers(member(l, key, "com"), key + ".com", 2);
        const double inertia = positive(member(l, key, "inertia"), key + ".inertia");
        const double length = number(member(l, key, "length"), key + ".length");
        const double g = number_or(l, key, "gravity", 9.81);
        LinkModel link = LinkModel::planar(mass, com[0], com[1], inertia, length, g);
        if (l.contains("coriolis_bound"))
            link.coriolis_bound = positive(l["coriolis_bound"], key + ".coriolis_bound");
        chain.links.push_back(link);
    }
    for (std::size_t i = 0; i < joints.size(); ++i) {
        const std::string key = index_key("chain.joints", i);
        const json& j = joints[i];
        JointModel joint;
        joint.rotor_inertia = positive(member(j, key, "rotor_inertia"), key + ".rotor_inertia");
        joint.friction = j.contains("friction") ? parse_friction(j["friction"], key + ".friction")
                                                : Friction::tanh();
        if (j.contains("mount")) {
            const json& m = j["mount"];
            const std::string mk = key + ".mount";
            const auto off = m.contains("offset") ? numbers(m["offset"], mk + ".offset", 2)
                                                  : std::vector<double>{0.0, 0.0};
            joint.mount = RigidTransform::planar(number_or(m, mk, "angle", 0.0), off[0], off[1]);
        }
        chain.joints.push_back(joint);
    }
    try {
        chain.validate();
    } catch (const std::invalid_argument& e) {
        fail("chain", std::string("is inconsistent: ") + e.what());
    }
    return chain;
}

GainSet parse_gains(const json& root, const ChainModel& chain)
{
    const json& g = member(root, "", "gains");
    const int n = chain.dof();
    const auto checked = [&](const char* key) {
        const std::string full = std::string("gains.") + key;
        auto xs = numbers(member(g, "gains", key), full, n);
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (!(xs[i] > 0.0))
                fail(index_key(full, i), "must be positive");
        return xs;
    };
    GainSet gs;
    gs.observer = ObserverGains(checked("link_observer"), checked("ell"), chain);
    gs.control = ControlGains{checked("lambda"), checked("k"), checked("link_control")};
    return gs;
}

DesiredTrajectory parse_trajectory(const json& root, int n)
{
    const json& t = member(root, "", "trajectory");
    if (!t.is_array() || static_cast<int>(t.size()) != n)
        fail("trajectory", "must be an array with one entry per joint");
    std::vector<JointTrajectory> joints;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::string key = index_key("trajectory", i);
        const json& e = t[i];
        const json& type = member(e, key, "type");
        if (type == "constant") {
            joints.push_back(JointTrajectory::constant(number(member(e, key, "value"), key + ".value")));
        } else if (type == "offset_cosine") {
            double omega = 0.0;
            if (e.contains("omega"))
                omega = number(e["omega"], key + ".omega");
            else if (e.contains("period"))
                omega = 2.0 * std::numbers::pi / positive(e["period"], key + ".period");
            else
                fail(key + ".period", "is missing (or give omega)");
            joints.push_back(JointTrajectory::offset_cosine(
                number(member(e, key, "offset"), key + ".offset"),
                number(member(e, key, "amplitude"), key + ".amplitude"), omega,
                number_or(e, key, "phase", 0.0)));
        } else {
            fail(key + ".type", "must be \"constant\" or \"offset_cosine\"");
        }
    }
    return DesiredTrajectory(std::move(joints));
}

ClosedLoopState parse_initial(const json& root, const ChainModel& chain,
                              const DesiredTrajectory& trajectory)
{
    const int n = chain.dof();
    const json empty = json::object();
    auto it = root.find("initial");
    const json& in = it == root.end() ? empty : *it;
    if (!in.is_object())
        fail("initial", "must be an object");
    const Eigen::VectorXd q = in.contains("q") ? vector(in["q"], "initial.q", n) : Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd qdot =
        in.contains("qdot") ? vector(in["qdot"], "initial.qdot", n) : Eigen::VectorXd::Zero(n);
    Eigen::VectorXd q_hat = trajectory.sample(0.0).q;
    if (in.contains("q_hat") && in["q_hat"] != "desired")
        q_hat = vector(in["q_hat"], "initial.q_hat", n);
    ClosedLoopState s = initial_state(chain, q, qdot, q_hat);
    if (in.contains("z")) {
        const Eigen::VectorXd z = vector(in["z"], "initial.z", n);
        for (int i = 0; i < n; ++i)
            s.joint_obs[static_cast<std::size_t>(i)].z = z[i];
    }
    return s;
}

json friction_json(const Friction& f)
{
    switch (f.kind) {
    case Friction::Kind::None:
        return {{"kind", "none"}};
    case Friction::Kind::Tanh:
        return {{"kind", "tanh"}, {"amplitude", f.coulomb}, {"slope", f.slope}};
    case Friction::Kind::Viscous:
        return {{"kind", "viscous"}, {"viscous", f.viscous}};
    case Friction::Kind::CoulombViscous:
        return {{"kind", "coulomb_viscous"}, {"coulomb", f.coulomb}, {"slope", f.slope}, {"viscous", f.viscous}};
    }
    return {};
}

}  // namespace

ScenarioConfig parse_config(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    if (!root.is_object())
        throw ConfigError("config: top level must be an object");

    ScenarioConfig c;
    c.chain = parse_chain(root);
    c.gains = parse_gains(root, c.chain);
    c.trajectory = parse_trajectory(root, c.chain.dof());
    c.initial = parse_initial(root, c.chain, c.trajectory);

    const json& integ = member(root, "", "integration");
    c.t_end = positive(member(integ, "integration", "t_end"), "integration.t_end");
    c.dt = positive(member(integ, "integration", "dt"), "integration.dt");
    if (c.t_end < c.dt)
        fail("integration.t_end", "must be at least integration.dt");
    if (integ.contains("stride")) {
        const json& s = integ["stride"];
        if (!s.is_number_integer() || s.get<long long>() < 1)
            fail("integration.stride", "must be a positive integer");
        c.stride = s.get<int>();
    }
    return c;
}

ScenarioConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

ScenarioConfig builtin_config(const std::string& name)
{
    if (name == "twodof")
        return two_dof_scenario();
    throw ConfigError("config: unknown builtin '" + name + "' (available: twodof)");
}

std::string config_to_json(const ScenarioConfig& c)
{
    if (c.chain.dim != Dim::Planar)
        throw ConfigError("config: only planar chains can be serialized");
    json links = json::array();
    json joints = json::array();
    for (int i = 0; i < c.chain.dof(); ++i) {
        const auto& l = c.chain.links[static_cast<std::size_t>(i)];
        const auto& j = c.chain.joints[static_cast<std::size_t>(i)];
        links.push_back({{"mass", l.mass},
                         {"com", {l.com.x(), l.com.y()}},
                         {"inertia", l.inertia_com(2, 2)},
                         {"length", l.tip.offset.x()},
                         {"gravity", l.gravity},
                         {"coriolis_bound", l.coriolis_bound}});
        const double angle = std::atan2(j.mount.rotation(1, 0), j.mount.rotation(0, 0));
        joints.push_back({{"rotor_inertia", j.rotor_inertia},
                          {"friction", friction_json(j.friction)},
                          {"mount", {{"angle", angle}, {"offset", {j.mount.offset.x(), j.mount.offset.y()}}}}});
    }
    json traj = json::array();
    for (int i = 0; i < c.trajectory.size(); ++i) {
        const auto& t = c.trajectory.joint(i);
        if (t.kind == JointTrajectory::Kind::Constant)
            traj.push_back({{"type", "constant"}, {"value", t.offset}});
        else
            traj.push_back({{"type", "offset_cosine"},
                            {"offset", t.offset},
                            {"amplitude", t.amplitude},
                            {"omega", t.omega},
                            {"phase", t.phase}});
    }
    json q_hat = json::array();
    json z = json::array();
    for (const auto& j : c.initial.joint_obs) {
        q_hat.push_back(j.q_hat);
        z.push_back(j.z);
    }
    const json root = {
        {"chain", {{"dim", "planar"}, {"links", links}, {"joints", joints}}},
        {"gains",
         {{"ell", c.gains.observer.ells()},
          {"link_observer", c.gains.observer.link_gains()},
          {"lambda", c.gains.control.lambda},
          {"k", c.gains.control.k},
          {"link_control", c.gains.control.link_gain}}},
        {"trajectory", traj},
        {"initial",
         {{"q", std::vector<double>(c.initial.q.data(), c.initial.q.data() + c.initial.q.size())},
          {"qdot", std::vector<double>(c.initial.qdot.data(), c.initial.qdot.data() + c.initial.qdot.size())},
          {"q_hat", q_hat},
          {"z", z}}},
        {"integration", {{"t_end", c.t_end}, {"dt", c.dt}, {"stride", c.stride}}}};
    return root.dump(2);
}

std::uint64_t fnv1a64(const std::string& bytes)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace vdc
