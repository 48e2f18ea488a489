#pragma once

// Scenario execution: build the system a config describes, run one control
// policy (either closed loop or the per-instant optimal open-loop input), and
// write the trajectory CSV plus a key=value run summary. The district heating
// reproduction runs all four policies and compares their temperature
// deviations.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "awpi/config.hpp"
#include "awpi/control.hpp"
#include "awpi/equilibria.hpp"
#include "awpi/hydraulics.hpp"
#include "awpi/interconnect.hpp"
#include "awpi/sim.hpp"

namespace awpi {

struct BuiltSystem {
    AgentEnsemble agents;
    Interconnection ic;
    std::shared_ptr<hydraulics::FlowStats> flows;  // dhn only
    std::optional<DisturbanceProfile> outdoor;     // dhn only
};

/// Interconnection and agents for `cfg`. Linear systems without an explicit
/// eta use the Perron left vector of B.
inline BuiltSystem build_system(const ScenarioConfig& cfg)
{
    if (const auto* lin = std::get_if<LinearSystemConfig>(&cfg.system)) {
        const SaturationBounds bounds(lin->lower, lin->upper);
        Vec eta;
        if (lin->eta) {
            eta = *lin->eta;
        } else if (auto p = perron_left_vector(lin->B)) {
            eta = std::move(*p);
        } else {
            throw ConfigError("system.eta: required (B has no positive left eigenvector)");
        }
        if (!(eta.array() > 0.0).all()) throw ConfigError("system.eta: entries must be > 0");
        return {AgentEnsemble(cfg.agents.a, cfg.agents.w), make_linear_interconnection(lin->B, eta, bounds), nullptr,
                std::nullopt};
    }
    const auto& d = std::get<DhnSystemConfig>(cfg.system);
    auto flows = std::make_shared<hydraulics::FlowStats>();
    const auto net = d.network.with_capacity_scale(d.capacity_scale);
    Interconnection ic = hydraulics::dhn_interconnection(net, d.buildings, flows);
    const Vec a = hydraulics::building_rates(d.buildings);
    Vec t_ref(a.size());
    for (std::size_t i = 0; i < d.buildings.size(); ++i) t_ref[static_cast<Eigen::Index>(i)] = d.buildings[i].T_ref;
    const DisturbanceProfile& profile = *cfg.agents.outdoor;
    const auto w_of = affine_disturbance(profile, a, t_ref);
    const Vec w0 = w_of(cfg.sim.t0);
    AgentEnsemble agents = profile.is_constant() ? AgentEnsemble(a, w0) : AgentEnsemble(a, w0, w_of);
    return {std::move(agents), std::move(ic), std::move(flows), profile};
}

/// Closed-loop system for a dynamic policy.
inline ClosedLoopSystem build_closed_loop(const ScenarioConfig& cfg, const BuiltSystem& built, ControllerMode mode)
{
    return {built.agents, built.ic, cfg.gains(mode)};
}

/// Default start: x = 0 and z such that u = 0.
inline ClosedLoopState initial_state(const ScenarioConfig& cfg)
{
    const auto n = static_cast<Eigen::Index>(cfg.size());
    Vec x = cfg.sim.x0.value_or(Vec::Zero(n));
    Vec z = cfg.sim.z0 ? *cfg.sim.z0 : Vec(-cfg.controller.kP.cwiseProduct(x).cwiseQuotient(cfg.controller.kI));
    return {std::move(x), std::move(z)};
}

struct RunOptions {
    std::optional<std::filesystem::path> output_dir;  // overrides cfg.outputs.directory
    bool force = false;                               // run despite failed tuning rules
    bool write = true;
    OracleOptions oracle;        // first output time
    OracleOptions oracle_warm;   // later output times, seeded with the previous optimum
};

inline RunOptions default_run_options()
{
    RunOptions o;
    o.oracle_warm.lhs_points = 0;
    o.oracle_warm.polish_starts = 0;
    o.oracle_warm.max_evaluations = 2000;
    o.oracle_warm.restarts = 1;
    return o;
}

using SummaryFields = std::vector<std::pair<std::string, std::string>>;

struct RunArtifacts {
    Policy policy = Policy::decentralized;
    Trajectory traj;
    SummaryFields summary;
    std::filesystem::path csv_path;
    std::filesystem::path summary_path;
    hydraulics::FlowStats flows;
    std::string notice;
};

namespace scenario_detail {

inline std::string format(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void add(SummaryFields& s, std::string key, std::string value)
{
    s.emplace_back(std::move(key), std::move(value));
}

inline void add(SummaryFields& s, std::string key, double value)
{
    s.emplace_back(std::move(key), format(value));
}

inline void add_count(SummaryFields& s, std::string key, std::size_t value)
{
    s.emplace_back(std::move(key), std::to_string(value));
}

inline void write_summary(std::ostream& os, const SummaryFields& s)
{
    for (const auto& [k, v] : s) os << k << '=' << v << '\n';
}

inline Trajectory run_dynamic(const ScenarioConfig& cfg, const BuiltSystem& built, ControllerMode mode,
                              const RunOptions& opts, std::string& notice)
{
    const ClosedLoopSystem sys = build_closed_loop(cfg, built, mode);
    const TuningReport tuning = validate_tuning(sys.agents(), sys.gains());
    if (!tuning.pass() && !(cfg.controller.force || opts.force)) {
        std::ostringstream os;
        os << "controller gains violate the " << to_string(mode) << " tuning rules:";
        for (const auto& c : tuning.failures()) {
            os << ' ' << c.condition;
            if (c.agent != TuningCheck::global) os << " (agent " << c.agent + 1 << ")";
            os << ';';
        }
        os << " set controller.force or pass --force to run anyway";
        throw TuningError(os.str());
    }
    std::optional<ClosedLoopState> eq;
    if (!sys.agents().time_varying()) {
        if (mode == ControllerMode::decentralized) {
            eq = find_equilibrium_decentralized(sys).state();
        } else {
            auto r = find_equilibrium_coordinating(sys);
            if (const auto* rep = std::get_if<EquilibriumReport>(&r)) eq = rep->state();
        }
    }
    MonitorChoice mc = make_lyapunov_monitor(sys, eq);
    notice = mc.notice;
    return integrate(sys, initial_state(cfg), cfg.sim.t0, cfg.sim.t1, cfg.sim.solver,
                     mc.monitor ? &*mc.monitor : nullptr);
}

/// Re-solve the static optimum at every output time and hold it until the next
/// one while the plant x' = -a x + b(v*) + w(t) evolves.
inline Trajectory run_oracle(const ScenarioConfig& cfg, const BuiltSystem& built, CostKind kind,
                             const RunOptions& opts)
{
    const auto grid = output_grid(cfg.sim.t0, cfg.sim.t1, cfg.sim.solver.output_dt);
    const Vec& a = built.agents.a();
    const auto n = a.size();
    Trajectory traj;
    Vec x = initial_state(cfg).x;
    Vec v_prev;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        const AgentEnsemble frozen(a, built.agents.disturbance(t));
        OracleOptions o = k == 0 ? opts.oracle : opts.oracle_warm;
        if (k > 0) o.extra_starts = {v_prev};
        const OracleResult opt = oracle_minimize(built.ic, frozen, kind, o);
        const Vec b = built.ic(opt.v);
        traj.times.push_back(t);
        traj.states.push_back({x, Vec::Zero(n)});
        traj.u.push_back(opt.v);
        traj.v.push_back(opt.v);
        traj.b.push_back(b);
        traj.V.push_back(std::numeric_limits<double>::quiet_NaN());
        v_prev = opt.v;
        if (k + 1 == grid.size()) break;
        const OdeRhs plant = [&](double tt, const Vec& y) -> Vec {
            return -a.cwiseProduct(y) + b + built.agents.disturbance(tt);
        };
        const std::vector<double> next{grid[k + 1]};
        const StepStats st = integrate_ode(plant, x, t, grid[k + 1], next, cfg.sim.solver,
                                           [&x](double, const Vec& y) { x = y; }, {});
        traj.stats.accepted += st.accepted;
        traj.stats.rejected += st.rejected;
    }
    return traj;
}

}  // namespace scenario_detail

/// Index of the output time at which the outdoor temperature is lowest (first
/// occurrence), or nothing for systems without an outdoor profile.
inline std::optional<std::size_t> coldest_output(const Trajectory& traj, const std::optional<DisturbanceProfile>& T)
{
    if (!T || traj.size() == 0) return std::nullopt;
    std::size_t best = 0;
    for (std::size_t k = 1; k < traj.size(); ++k)
        if ((*T)(traj.times[k]) < (*T)(traj.times[best])) best = k;
    return best;
}

inline RunArtifacts run_policy(const ScenarioConfig& cfg, Policy policy, const RunOptions& opts = default_run_options())
{
    const BuiltSystem built = build_system(cfg);
    RunArtifacts art;
    art.policy = policy;
    switch (policy) {
    case Policy::decentralized:
        art.traj = scenario_detail::run_dynamic(cfg, built, ControllerMode::decentralized, opts, art.notice);
        break;
    case Policy::coordinating:
        art.traj = scenario_detail::run_dynamic(cfg, built, ControllerMode::coordinating, opts, art.notice);
        break;
    case Policy::oracle_l1:
        art.traj = scenario_detail::run_oracle(cfg, built, CostKind::weighted_l1, opts);
        break;
    case Policy::oracle_linf:
        art.traj = scenario_detail::run_oracle(cfg, built, CostKind::linf, opts);
        break;
    }
    if (built.flows) art.flows = *built.flows;

    using namespace scenario_detail;
    auto& s = art.summary;
    const Trajectory& tr = art.traj;
    add(s, "name", cfg.name);
    add(s, "policy", to_string(policy));
    add_count(s, "n", cfg.size());
    add(s, "t0", cfg.sim.t0);
    add(s, "t1", cfg.sim.t1);
    add_count(s, "output_points", tr.size());
    add(s, "steps_accepted", std::to_string(tr.stats.accepted));
    add(s, "steps_rejected", std::to_string(tr.stats.rejected));
    add(s, "monitored", tr.monitored ? "true" : "false");
    if (tr.monitored) {
        add_count(s, "monitor_violations", tr.monitor_violations);
        add(s, "monitor_worst_increase", tr.monitor_worst_increase);
    }
    if (!art.notice.empty()) add(s, "notice", art.notice);
    const Vec& xT = tr.states.back().x;
    add(s, "final_max_abs_x", xT.cwiseAbs().maxCoeff());
    add(s, "final_sum_abs_x", xT.cwiseAbs().sum());
    double peak = 0.0;
    for (const auto& st : tr.states) peak = std::max(peak, st.x.cwiseAbs().maxCoeff());
    add(s, "peak_max_abs_x", peak);
    if (const auto k = coldest_output(tr, built.outdoor)) {
        const Vec& xc = tr.states[*k].x;
        add(s, "coldest_time", tr.times[*k]);
        add(s, "coldest_outdoor_temperature", (*built.outdoor)(tr.times[*k]));
        add(s, "coldest_max_abs_x", xc.cwiseAbs().maxCoeff());
        add(s, "coldest_sum_abs_x", xc.cwiseAbs().sum());
    }
    if (built.flows) {
        add_count(s, "flow_solves", art.flows.solves);
        add(s, "flow_max_newton_iterations", std::to_string(art.flows.max_iterations));
        add(s, "flow_max_pressure_residual", art.flows.max_residual);
        add(s, "flow_max_mass_residual", art.flows.max_mass_residual);
    }

    if (opts.write) {
        const std::filesystem::path dir = opts.output_dir.value_or(std::filesystem::path(cfg.outputs.directory));
        std::filesystem::create_directories(dir);
        const std::string stem = cfg.outputs.prefix + "_" + to_string(policy);
        art.csv_path = dir / (stem + ".csv");
        art.summary_path = dir / (stem + "_summary.txt");
        std::ofstream csv(art.csv_path, std::ios::binary);
        write_trajectory_csv(csv, tr);
        std::ofstream sum(art.summary_path, std::ios::binary);
        write_summary(sum, s);
        if (!csv || !sum) throw std::runtime_error("cannot write outputs under " + dir.string());
    }
    return art;
}

inline RunArtifacts run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = default_run_options())
{
    return run_policy(cfg, cfg.controller.policy, opts);
}

// ---------------------------------------------------------------------------
// District heating reproduction
// ---------------------------------------------------------------------------

/// The built-in 22-consumer, 96-hour scenario with the published gains
/// (kP = kI = kA = 1, kC = 0.5), which violate both tuning rules and so run
/// under force.
inline ScenarioConfig dhn_reproduction_config(double capacity_scale = hydraulics::kCalibratedCapacityScale)
{
    ScenarioConfig cfg;
    cfg.name = "dhn_reproduction";
    const auto net = hydraulics::fig1_network();
    const auto n = static_cast<Eigen::Index>(net.size());
    cfg.system = DhnSystemConfig{"", net, std::vector<hydraulics::BuildingParams>(net.size()), capacity_scale};
    cfg.agents.builtin_profile = true;
    cfg.agents.outdoor = make_temperature_profile();
    cfg.controller.policy = Policy::decentralized;
    cfg.controller.kP = Vec::Ones(n);
    cfg.controller.kI = Vec::Ones(n);
    cfg.controller.kA = Vec::Ones(n);
    cfg.controller.kC = 0.5;
    cfg.controller.alpha = 1.0;
    cfg.controller.force = true;
    cfg.sim.t0 = 0.0;
    cfg.sim.t1 = 96.0;
    cfg.outputs.directory = "dhn_out";
    cfg.outputs.prefix = "dhn";
    return cfg;
}

struct DhnComparison {
    std::vector<RunArtifacts> runs;
    std::optional<std::size_t> coldest;  // output index
    double coldest_time = 0.0;
    double coldest_temperature = 0.0;
    std::map<Policy, double> coldest_max;
    std::map<Policy, double> coldest_sum;
    std::map<Policy, double> window_max;  // largest deviation while T_o < -25 deg C
    double max_mass_residual = 0.0;
    std::filesystem::path comparison_csv;
    std::filesystem::path summary_path;

    /// Coordinated max deviation below decentralized, and decentralized summed
    /// deviation not above coordinated, both at the coldest output time.
    std::optional<bool> ordering_holds() const
    {
        if (!coldest_max.count(Policy::decentralized) || !coldest_max.count(Policy::coordinating)) return std::nullopt;
        return coldest_max.at(Policy::coordinating) < coldest_max.at(Policy::decentralized) &&
               coldest_sum.at(Policy::decentralized) <= coldest_sum.at(Policy::coordinating);
    }
};

inline constexpr double kColdWindowTemperature = -25.0;

/// Run the requested policies (concurrently) on `cfg` and compare deviations.
inline DhnComparison reproduce_dhn(const ScenarioConfig& cfg, const std::vector<Policy>& policies,
                                   const RunOptions& opts = default_run_options())
{
    if (!cfg.is_dhn()) throw ConfigError("reproduce-dhn: configuration is not a district heating system");
    std::vector<std::future<RunArtifacts>> jobs;
    for (Policy p : policies) jobs.push_back(std::async(std::launch::async, [&cfg, p, &opts] { return run_policy(cfg, p, opts); }));
    DhnComparison cmp;
    for (auto& j : jobs) cmp.runs.push_back(j.get());

    const DisturbanceProfile& T = *cfg.agents.outdoor;
    const Trajectory& ref = cmp.runs.front().traj;
    cmp.coldest = coldest_output(ref, T);
    for (const auto& r : cmp.runs) {
        cmp.max_mass_residual = std::max(cmp.max_mass_residual, r.flows.max_mass_residual);
        if (cmp.coldest) {
            const Vec& x = r.traj.states[*cmp.coldest].x;
            cmp.coldest_max[r.policy] = x.cwiseAbs().maxCoeff();
            cmp.coldest_sum[r.policy] = x.cwiseAbs().sum();
        }
        double wmax = 0.0;
        for (std::size_t k = 0; k < r.traj.size(); ++k)
            if (T(r.traj.times[k]) < kColdWindowTemperature)
                wmax = std::max(wmax, r.traj.states[k].x.cwiseAbs().maxCoeff());
        cmp.window_max[r.policy] = wmax;
    }
    if (cmp.coldest) {
        cmp.coldest_time = ref.times[*cmp.coldest];
        cmp.coldest_temperature = T(cmp.coldest_time);
    }

    if (opts.write) {
        using namespace scenario_detail;
        const std::filesystem::path dir = opts.output_dir.value_or(std::filesystem::path(cfg.outputs.directory));
        std::filesystem::create_directories(dir);
        cmp.comparison_csv = dir / (cfg.outputs.prefix + "_comparison.csv");
        std::ofstream csv(cmp.comparison_csv, std::ios::binary);
        csv << "t,T_o";
        for (const auto& r : cmp.runs) csv << ',' << to_string(r.policy) << "_max," << to_string(r.policy) << "_sum";
        csv << '\n';
        for (std::size_t k = 0; k < ref.size(); ++k) {
            csv << format(ref.times[k]) << ',' << format(T(ref.times[k]));
            for (const auto& r : cmp.runs) {
                const Vec& x = r.traj.states[k].x;
                csv << ',' << format(x.cwiseAbs().maxCoeff()) << ',' << format(x.cwiseAbs().sum());
            }
            csv << '\n';
        }
        SummaryFields s;
        add(s, "capacity_scale", std::get<DhnSystemConfig>(cfg.system).capacity_scale);
        add_count(s, "policies", cmp.runs.size());
        if (cmp.coldest) {
            add(s, "coldest_time", cmp.coldest_time);
            add(s, "coldest_outdoor_temperature", cmp.coldest_temperature);
        }
        for (const auto& r : cmp.runs) {
            const std::string p = to_string(r.policy);
            if (cmp.coldest) {
                add(s, p + ".coldest_max_deviation", cmp.coldest_max[r.policy]);
                add(s, p + ".coldest_sum_deviation", cmp.coldest_sum[r.policy]);
            }
            add(s, p + ".cold_window_max_deviation", cmp.window_max[r.policy]);
            add(s, p + ".csv", r.csv_path.filename().string());
        }
        add(s, "max_mass_residual", cmp.max_mass_residual);
        if (const auto ok = cmp.ordering_holds()) add(s, "ordering_holds", *ok ? "true" : "false");
        cmp.summary_path = dir / (cfg.outputs.prefix + "_summary.txt");
        std::ofstream sum(cmp.summary_path, std::ios::binary);
        write_summary(sum, s);
        if (!csv || !sum) throw std::runtime_error("cannot write outputs under " + dir.string());
    }
    return cmp;
}

}  // namespace awpi
