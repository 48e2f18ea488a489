#pragma once

// Scenario configuration: JSON text (comments allowed) with a schema_version
// field. Unknown keys are errors. Parse failures carry the line/column or the
// dotted field path of the offending entry.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "awpi/core.hpp"
#include "awpi/errors.hpp"
#include "awpi/hydraulics.hpp"
#include "awpi/sim.hpp"

namespace awpi {

inline constexpr int kSchemaVersion = 1;

enum class Policy { decentralized, coordinating, oracle_l1, oracle_linf };

inline const char* to_string(Policy p)
{
    switch (p) {
    case Policy::decentralized: return "decentralized";
    case Policy::coordinating: return "coordinating";
    case Policy::oracle_l1: return "oracle-l1";
    case Policy::oracle_linf: return "oracle-linf";
    }
    return "?";
}

inline std::optional<Policy> parse_policy(const std::string& s)
{
    for (Policy p : {Policy::decentralized, Policy::coordinating, Policy::oracle_l1, Policy::oracle_linf})
        if (s == to_string(p)) return p;
    return std::nullopt;
}

namespace config_detail {

template <typename Derived>
bool same(const Eigen::DenseBase<Derived>& a, const Eigen::DenseBase<Derived>& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() && a.derived() == b.derived();
}

template <typename T>
bool same(const std::optional<T>& a, const std::optional<T>& b)
{
    return a.has_value() == b.has_value() && (!a || same(*a, *b));
}

}  // namespace config_detail

struct LinearSystemConfig {
    Mat B;
    std::optional<Vec> eta;  // default: Perron left vector
    Vec lower;
    Vec upper;

    friend bool operator==(const LinearSystemConfig& l, const LinearSystemConfig& r)
    {
        using config_detail::same;
        return same(l.B, r.B) && same(l.eta, r.eta) && same(l.lower, r.lower) && same(l.upper, r.upper);
    }
};

struct DhnSystemConfig {
    std::string network_path;  // empty: inline network
    hydraulics::HydraulicNetwork network;  // loaded, without capacity scale
    std::vector<hydraulics::BuildingParams> buildings;  // one per consumer
    double capacity_scale = 1.0;

    friend bool operator==(const DhnSystemConfig&, const DhnSystemConfig&) = default;
};

struct AgentsConfig {
    // linear systems
    Vec a;
    Vec w;
    // dhn systems: outdoor temperature, either the built-in profile or breakpoints
    bool builtin_profile = false;
    std::optional<DisturbanceProfile> outdoor;

    friend bool operator==(const AgentsConfig& l, const AgentsConfig& r)
    {
        using config_detail::same;
        return same(l.a, r.a) && same(l.w, r.w) && l.builtin_profile == r.builtin_profile && l.outdoor == r.outdoor;
    }
};

struct ControllerConfig {
    Policy policy = Policy::decentralized;
    Vec kP;
    Vec kI;
    std::optional<Vec> kA;
    std::optional<double> kC;
    std::optional<double> alpha;
    bool force = false;

    friend bool operator==(const ControllerConfig& l, const ControllerConfig& r)
    {
        using config_detail::same;
        return l.policy == r.policy && same(l.kP, r.kP) && same(l.kI, r.kI) && same(l.kA, r.kA) && l.kC == r.kC &&
               l.alpha == r.alpha && l.force == r.force;
    }
};

struct SimConfig {
    double t0 = 0.0;
    double t1 = 0.0;
    SolverOptions solver;
    std::optional<Vec> x0;
    std::optional<Vec> z0;

    friend bool operator==(const SimConfig& l, const SimConfig& r)
    {
        const auto& a = l.solver;
        const auto& b = r.solver;
        return l.t0 == r.t0 && l.t1 == r.t1 && config_detail::same(l.x0, r.x0) && config_detail::same(l.z0, r.z0) &&
               a.method == b.method &&
               a.atol == b.atol && a.rtol == b.rtol && a.output_dt == b.output_dt && a.fixed_step == b.fixed_step;
    }
};

struct OutputConfig {
    std::string directory = ".";
    std::string prefix = "run";

    friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct ScenarioConfig {
    std::string name;
    std::variant<LinearSystemConfig, DhnSystemConfig> system;
    AgentsConfig agents;
    ControllerConfig controller;
    SimConfig sim;
    OutputConfig outputs;
    std::filesystem::path base_dir;  // resolves relative network paths; not serialized

    bool is_dhn() const { return std::holds_alternative<DhnSystemConfig>(system); }
    std::size_t size() const { return static_cast<std::size_t>(controller.kP.size()); }

    /// Gains for a dynamic policy; ConfigError when the needed entries are missing.
    ControllerGains gains(ControllerMode mode) const
    {
        if (mode == ControllerMode::decentralized) {
            if (!controller.kA) throw ConfigError("controller.kA: required for the decentralized controller");
            return ControllerGains::decentralized(controller.kP, controller.kI, *controller.kA);
        }
        if (!controller.kC) throw ConfigError("controller.kC: required for the coordinating controller");
        if (!controller.alpha) throw ConfigError("controller.alpha: required for the coordinating controller");
        return ControllerGains::coordinating(controller.kP, controller.kI, *controller.kC, *controller.alpha);
    }

    friend bool operator==(const ScenarioConfig& l, const ScenarioConfig& r)
    {
        return l.name == r.name && l.system == r.system && l.agents == r.agents && l.controller == r.controller &&
               l.sim == r.sim && l.outputs == r.outputs;
    }
};

namespace config_detail {

using json = nlohmann::json;

/// Walks one JSON object, remembering which keys were read so leftovers can
/// be reported as unknown.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) fail("expected an object");
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where() + ": " + msg); }

    std::string where() const { return path_.empty() ? std::string("<root>") : path_; }
    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& get(const std::string& key)
    {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(child(key) + ": missing required field");
        return j_.at(key);
    }

    const json* find(const std::string& key)
    {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(child(k) + ": unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline double number(const json& j, const std::string& path)
{
    if (!j.is_number()) throw ConfigError(path + ": expected a number");
    return j.get<double>();
}

inline int integer(const json& j, const std::string& path)
{
    if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return j.get<int>();
}

inline std::string string(const json& j, const std::string& path)
{
    if (!j.is_string()) throw ConfigError(path + ": expected a string");
    return j.get<std::string>();
}

inline bool boolean(const json& j, const std::string& path)
{
    if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
    return j.get<bool>();
}

inline Vec vector(const json& j, const std::string& path)
{
    if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

/// A number broadcast to length n, or an array of length n.
inline Vec vector_or_scalar(const json& j, const std::string& path, Eigen::Index n)
{
    if (j.is_number()) return Vec::Constant(n, j.get<double>());
    Vec v = vector(j, path);
    if (v.size() != n) {
        std::ostringstream os;
        os << path << ": expected " << n << " entries, got " << v.size();
        throw ConfigError(os.str());
    }
    return v;
}

inline Mat matrix(const json& j, const std::string& path)
{
    if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a square array of rows");
    const auto n = static_cast<Eigen::Index>(j.size());
    Mat B(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const std::string rp = path + "[" + std::to_string(r) + "]";
        const Vec row = vector(j[static_cast<std::size_t>(r)], rp);
        if (row.size() != n) throw ConfigError(rp + ": row length differs from the number of rows");
        B.row(r) = row.transpose();
    }
    return B;
}

inline json to_json(const Vec& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline json to_json(const Mat& B)
{
    json a = json::array();
    for (Eigen::Index r = 0; r < B.rows(); ++r) a.push_back(to_json(Vec(B.row(r).transpose())));
    return a;
}

/// Parse text, mapping syntax errors to "line L, column C".
inline json parse_text(const std::string& text, const std::string& source)
{
    try {
        return json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::ostringstream os;
        os << source << ": line " << line << ", column " << col << ": syntax error";
        const std::string what = e.what();
        if (const auto p = what.find("syntax error"); p != std::string::npos) os << what.substr(p + 12);
        throw ConfigError(os.str());
    }
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace config_detail

// ---------------------------------------------------------------------------
// Network description files
// ---------------------------------------------------------------------------

/// {"root": int, "pump_dp": Pa, "pipes": [{"parent", "child", "resistance"}],
///  "consumers": [{"junction", "resistance", "valve": {"base", "span", "offset"}}]}
/// "valve" is optional per consumer and defaults to base 5, span 30, offset 1.001.
inline hydraulics::HydraulicNetwork network_from_json(const nlohmann::json& j, const std::string& path,
                                                      double capacity_scale = 1.0)
{
    using namespace config_detail;
    Fields f(j, path);
    const int root = integer(f.get("root"), f.child("root"));
    const double pump_dp = number(f.get("pump_dp"), f.child("pump_dp"));
    std::vector<hydraulics::Pipe> pipes;
    const json& jp = f.get("pipes");
    if (!jp.is_array()) throw ConfigError(f.child("pipes") + ": expected an array");
    for (std::size_t k = 0; k < jp.size(); ++k) {
        Fields p(jp[k], f.child("pipes") + "[" + std::to_string(k) + "]");
        hydraulics::Pipe pipe;
        pipe.parent = integer(p.get("parent"), p.child("parent"));
        pipe.child = integer(p.get("child"), p.child("child"));
        pipe.resistance = number(p.get("resistance"), p.child("resistance"));
        p.finish();
        pipes.push_back(pipe);
    }
    std::vector<hydraulics::Consumer> consumers;
    const json& jc = f.get("consumers");
    if (!jc.is_array()) throw ConfigError(f.child("consumers") + ": expected an array");
    for (std::size_t k = 0; k < jc.size(); ++k) {
        Fields c(jc[k], f.child("consumers") + "[" + std::to_string(k) + "]");
        hydraulics::Consumer con;
        con.junction = integer(c.get("junction"), c.child("junction"));
        if (const auto* r = c.find("resistance")) con.resistance = number(*r, c.child("resistance"));
        if (const auto* jv = c.find("valve")) {
            Fields v(*jv, c.child("valve"));
            if (const auto* x = v.find("base")) con.valve.base = number(*x, v.child("base"));
            if (const auto* x = v.find("span")) con.valve.span = number(*x, v.child("span"));
            if (const auto* x = v.find("offset")) con.valve.offset = number(*x, v.child("offset"));
            v.finish();
        }
        c.finish();
        consumers.push_back(con);
    }
    f.finish();
    try {
        return {root, std::move(pipes), std::move(consumers), pump_dp, capacity_scale};
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline nlohmann::json network_to_json(const hydraulics::HydraulicNetwork& net)
{
    nlohmann::json j;
    j["root"] = net.root();
    j["pump_dp"] = net.pump_dp();
    j["pipes"] = nlohmann::json::array();
    for (const auto& p : net.pipes())
        j["pipes"].push_back({{"parent", p.parent}, {"child", p.child}, {"resistance", p.resistance}});
    j["consumers"] = nlohmann::json::array();
    for (const auto& c : net.consumers())
        j["consumers"].push_back(
            {{"junction", c.junction},
             {"resistance", c.resistance},
             {"valve", {{"base", c.valve.base}, {"span", c.valve.span}, {"offset", c.valve.offset}}}});
    return j;
}

inline hydraulics::HydraulicNetwork load_network(const std::filesystem::path& path, double capacity_scale = 1.0)
{
    const std::string text = config_detail::read_file(path);
    return network_from_json(config_detail::parse_text(text, path.string()), path.string(), capacity_scale);
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

namespace config_detail {

inline hydraulics::BuildingParams building_from_json(const json& j, const std::string& path)
{
    Fields f(j, path);
    hydraulics::BuildingParams b;
    const auto opt = [&](const char* key, double& target) {
        if (const auto* x = f.find(key)) target = number(*x, f.child(key));
    };
    opt("c", b.c);
    opt("a_hat", b.a_hat);
    opt("delta", b.delta);
    opt("T_ref", b.T_ref);
    opt("c_pw", b.c_pw);
    opt("rho_w", b.rho_w);
    f.finish();
    try {
        b.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return b;
}

inline json building_to_json(const hydraulics::BuildingParams& b)
{
    return {{"c", b.c}, {"a_hat", b.a_hat}, {"delta", b.delta}, {"T_ref", b.T_ref}, {"c_pw", b.c_pw},
            {"rho_w", b.rho_w}};
}

}  // namespace config_detail

inline ScenarioConfig parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir = ".")
{
    using namespace config_detail;
    ScenarioConfig cfg;
    cfg.base_dir = base_dir;
    Fields root(j, "");
    const int version = integer(root.get("schema_version"), "schema_version");
    if (version != kSchemaVersion)
        throw ConfigError("schema_version: unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kSchemaVersion) + ")");
    if (const auto* x = root.find("name")) cfg.name = string(*x, "name");

    // system
    Eigen::Index n = 0;
    {
        Fields f(root.get("system"), "system");
        const std::string type = string(f.get("type"), "system.type");
        if (type == "linear") {
            LinearSystemConfig lin;
            lin.B = matrix(f.get("B"), "system.B");
            n = lin.B.rows();
            if (const auto* x = f.find("eta")) lin.eta = vector_or_scalar(*x, "system.eta", n);
            Fields b(f.get("bounds"), "system.bounds");
            lin.lower = vector_or_scalar(b.get("lower"), "system.bounds.lower", n);
            lin.upper = vector_or_scalar(b.get("upper"), "system.bounds.upper", n);
            b.finish();
            if (!((lin.upper - lin.lower).array() > 0.0).all())
                throw ConfigError("system.bounds: lower must be < upper componentwise");
            cfg.system = std::move(lin);
        } else if (type == "dhn") {
            double scale = 1.0;
            if (const auto* x = f.find("capacity_scale")) scale = number(*x, "system.capacity_scale");
            if (!(scale >= 0.0)) throw ConfigError("system.capacity_scale: must be >= 0");
            const json& jn = f.get("network");
            std::string npath;
            std::optional<hydraulics::HydraulicNetwork> net;
            if (jn.is_string()) {
                npath = jn.get<std::string>();
                const std::filesystem::path p = std::filesystem::path(npath).is_absolute()
                                                    ? std::filesystem::path(npath)
                                                    : base_dir / npath;
                net = load_network(p);
            } else if (jn.is_object()) {
                net = network_from_json(jn, "system.network");
            } else {
                throw ConfigError("system.network: expected a file path or an inline network object");
            }
            n = static_cast<Eigen::Index>(net->size());
            std::vector<hydraulics::BuildingParams> buildings;
            if (const auto* jb = f.find("buildings")) {
                if (jb->is_array()) {
                    if (static_cast<Eigen::Index>(jb->size()) != n)
                        throw ConfigError("system.buildings: expected one entry per consumer");
                    for (std::size_t k = 0; k < jb->size(); ++k)
                        buildings.push_back(building_from_json((*jb)[k], "system.buildings[" + std::to_string(k) + "]"));
                } else {
                    buildings.assign(static_cast<std::size_t>(n), building_from_json(*jb, "system.buildings"));
                }
            } else {
                buildings.assign(static_cast<std::size_t>(n), hydraulics::BuildingParams{});
            }
            cfg.system = DhnSystemConfig{std::move(npath), std::move(*net), std::move(buildings), scale};
        } else {
            throw ConfigError("system.type: expected \"linear\" or \"dhn\", got \"" + type + "\"");
        }
        f.finish();
    }

    // agents
    {
        Fields f(root.get("agents"), "agents");
        if (!cfg.is_dhn()) {
            cfg.agents.a = vector_or_scalar(f.get("a"), "agents.a", n);
            cfg.agents.w = vector_or_scalar(f.get("w"), "agents.w", n);
            if (!(cfg.agents.a.array() > 0.0).all()) throw ConfigError("agents.a: entries must be > 0");
        } else {
            const json& jt = f.get("outdoor_temperature");
            if (jt.is_string()) {
                if (jt.get<std::string>() != "builtin")
                    throw ConfigError("agents.outdoor_temperature: expected \"builtin\", a number or breakpoints");
                cfg.agents.builtin_profile = true;
                cfg.agents.outdoor = make_temperature_profile();
            } else if (jt.is_number()) {
                cfg.agents.outdoor = DisturbanceProfile::constant(jt.get<double>());
            } else {
                Fields p(jt, "agents.outdoor_temperature");
                std::vector<double> times, values;
                const Vec t = vector(p.get("times"), "agents.outdoor_temperature.times");
                const Vec v = vector(p.get("values"), "agents.outdoor_temperature.values");
                p.finish();
                times.assign(t.data(), t.data() + t.size());
                values.assign(v.data(), v.data() + v.size());
                try {
                    cfg.agents.outdoor = DisturbanceProfile(std::move(times), std::move(values));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("agents.outdoor_temperature: ") + e.what());
                }
            }
        }
        f.finish();
    }

    // controller
    {
        Fields f(root.get("controller"), "controller");
        const std::string pol = string(f.get("policy"), "controller.policy");
        const auto p = parse_policy(pol);
        if (!p)
            throw ConfigError("controller.policy: expected decentralized, coordinating, oracle-l1 or oracle-linf, got \"" +
                              pol + "\"");
        auto& c = cfg.controller;
        c.policy = *p;
        c.kP = vector_or_scalar(f.get("kP"), "controller.kP", n);
        c.kI = vector_or_scalar(f.get("kI"), "controller.kI", n);
        if (const auto* x = f.find("kA")) c.kA = vector_or_scalar(*x, "controller.kA", n);
        if (const auto* x = f.find("kC")) c.kC = number(*x, "controller.kC");
        if (const auto* x = f.find("alpha")) c.alpha = number(*x, "controller.alpha");
        if (const auto* x = f.find("force")) c.force = boolean(*x, "controller.force");
        f.finish();
        const auto positive = [](const Vec& v) { return (v.array() > 0.0).all(); };
        if (!positive(c.kP) || !positive(c.kI) || (c.kA && !positive(*c.kA)) || (c.kC && !(*c.kC > 0.0)) ||
            (c.alpha && !(*c.alpha > 0.0)))
            throw ConfigError("controller: gains must be > 0");
        if (c.policy == Policy::decentralized) cfg.gains(ControllerMode::decentralized);
        if (c.policy == Policy::coordinating) cfg.gains(ControllerMode::coordinating);
    }

    // sim
    {
        Fields f(root.get("sim"), "sim");
        auto& s = cfg.sim;
        if (const auto* x = f.find("t0")) s.t0 = number(*x, "sim.t0");
        s.t1 = number(f.get("t1"), "sim.t1");
        if (!(s.t1 > s.t0)) throw ConfigError("sim.t1: must exceed sim.t0");
        if (const auto* x = f.find("atol")) s.solver.atol = number(*x, "sim.atol");
        if (const auto* x = f.find("rtol")) s.solver.rtol = number(*x, "sim.rtol");
        if (const auto* x = f.find("output_dt")) s.solver.output_dt = number(*x, "sim.output_dt");
        if (const auto* x = f.find("fixed_step")) s.solver.fixed_step = number(*x, "sim.fixed_step");
        if (const auto* x = f.find("method")) {
            const std::string m = string(*x, "sim.method");
            if (m == "rk45")
                s.solver.method = IntegrationMethod::rk45;
            else if (m == "implicit-euler")
                s.solver.method = IntegrationMethod::implicit_euler;
            else
                throw ConfigError("sim.method: expected \"rk45\" or \"implicit-euler\"");
        }
        if (const auto* x = f.find("x0")) s.x0 = vector_or_scalar(*x, "sim.x0", n);
        if (const auto* x = f.find("z0")) s.z0 = vector_or_scalar(*x, "sim.z0", n);
        f.finish();
        try {
            s.solver.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("sim: ") + e.what());
        }
    }

    // outputs
    if (const auto* jo = root.find("outputs")) {
        Fields f(*jo, "outputs");
        if (const auto* x = f.find("directory")) cfg.outputs.directory = string(*x, "outputs.directory");
        if (const auto* x = f.find("prefix")) cfg.outputs.prefix = string(*x, "outputs.prefix");
        f.finish();
    }
    root.finish();
    return cfg;
}

inline ScenarioConfig parse_scenario_text(const std::string& text, const std::string& source = "<config>",
                                          const std::filesystem::path& base_dir = ".")
{
    return parse_scenario(config_detail::parse_text(text, source), base_dir);
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path)
{
    const std::string text = config_detail::read_file(path);
    try {
        return parse_scenario_text(text, path.string(), path.parent_path());
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(path.string(), 0) == 0) throw;
        throw ConfigError(path.string() + ": " + what);
    }
}

inline nlohmann::json scenario_to_json(const ScenarioConfig& cfg)
{
    using config_detail::to_json;
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    if (!cfg.name.empty()) j["name"] = cfg.name;
    if (const auto* lin = std::get_if<LinearSystemConfig>(&cfg.system)) {
        j["system"] = {{"type", "linear"},
                       {"B", to_json(lin->B)},
                       {"bounds", {{"lower", to_json(lin->lower)}, {"upper", to_json(lin->upper)}}}};
        if (lin->eta) j["system"]["eta"] = to_json(*lin->eta);
        j["agents"] = {{"a", to_json(cfg.agents.a)}, {"w", to_json(cfg.agents.w)}};
    } else {
        const auto& d = std::get<DhnSystemConfig>(cfg.system);
        j["system"] = {{"type", "dhn"}, {"capacity_scale", d.capacity_scale}};
        if (!d.network_path.empty())
            j["system"]["network"] = d.network_path;
        else
            j["system"]["network"] = network_to_json(d.network);
        auto& jb = j["system"]["buildings"] = nlohmann::json::array();
        for (const auto& b : d.buildings) jb.push_back(config_detail::building_to_json(b));
        if (cfg.agents.builtin_profile) {
            j["agents"] = {{"outdoor_temperature", "builtin"}};
        } else if (cfg.agents.outdoor->is_constant()) {
            j["agents"] = {{"outdoor_temperature", cfg.agents.outdoor->values().front()}};
        } else {
            j["agents"] = {{"outdoor_temperature",
                            {{"times", cfg.agents.outdoor->times()}, {"values", cfg.agents.outdoor->values()}}}};
        }
    }
    const auto& c = cfg.controller;
    j["controller"] = {{"policy", to_string(c.policy)}, {"kP", to_json(c.kP)}, {"kI", to_json(c.kI)}, {"force", c.force}};
    if (c.kA) j["controller"]["kA"] = to_json(*c.kA);
    if (c.kC) j["controller"]["kC"] = *c.kC;
    if (c.alpha) j["controller"]["alpha"] = *c.alpha;
    const auto& s = cfg.sim;
    j["sim"] = {{"t0", s.t0},
                {"t1", s.t1},
                {"atol", s.solver.atol},
                {"rtol", s.solver.rtol},
                {"output_dt", s.solver.output_dt},
                {"fixed_step", s.solver.fixed_step},
                {"method", s.solver.method == IntegrationMethod::rk45 ? "rk45" : "implicit-euler"}};
    if (s.x0) j["sim"]["x0"] = to_json(*s.x0);
    if (s.z0) j["sim"]["z0"] = to_json(*s.z0);
    j["outputs"] = {{"directory", cfg.outputs.directory}, {"prefix", cfg.outputs.prefix}};
    return j;
}

}  // namespace awpi
