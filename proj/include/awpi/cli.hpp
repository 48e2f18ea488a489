#pragma once

// Subcommand bodies behind the awpi executable. Each returns a process exit
// code and writes human output to `out`, diagnostics to `err`:
//   0  success / all checks pass
//   1  a check or verification failed (counterexamples printed)
//   2  configuration error (including unforced tuning violations)
//   3  solver or integration failure

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "awpi/config.hpp"
#include "awpi/equilibria.hpp"
#include "awpi/interconnect.hpp"
#include "awpi/scenario.hpp"

namespace awpi::cli {

enum ExitCode : int { ok = 0, failed = 1, config_error = 2, solver_error = 3 };

/// Run `body`, mapping exceptions onto exit codes.
inline int guarded(std::ostream& err, const std::function<int()>& body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const TuningError& e) {
        err << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << '\n';
        return solver_error;
    } catch (const IntegrationError& e) {
        err << "integration error at t=" << e.time() << ": " << e.what() << '\n';
        return solver_error;
    } catch (const DomainError& e) {
        err << "solver error: " << e.what() << '\n';
        return solver_error;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return solver_error;
    }
}

namespace detail {

inline void print_vec(std::ostream& os, const Vec& v)
{
    os << '[';
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ']';
}

inline void print_property(std::ostream& out, const PropertyVerdict& v)
{
    out << v.property << ": " << (v.pass() ? "PASS" : "FAIL") << " (" << v.samples << " samples";
    if (v.property == "lemma2") out << ", " << v.qualifying << " meeting the hypothesis";
    out << ", " << v.failures.size() << " counterexamples, " << v.marginal.size() << " marginal)\n";
    if (v.inconclusive) out << "  inconclusive: too few samples met the hypothesis\n";
    const std::size_t shown = std::min<std::size_t>(v.failures.size(), 5);
    for (std::size_t k = 0; k < shown; ++k) {
        const auto& c = v.failures[k];
        out << "  counterexample: " << c.condition << " value=" << c.value << "\n    first=";
        print_vec(out, c.first);
        out << "\n    second=";
        print_vec(out, c.second);
        out << '\n';
    }
}

inline void print_tuning(std::ostream& out, ControllerMode mode, const TuningReport& r)
{
    out << "tuning (" << to_string(mode) << "): " << (r.pass() ? "PASS" : "FAIL") << '\n';
    for (const auto& c : r.failures()) {
        out << "  violated: " << c.condition;
        if (c.agent != TuningCheck::global) out << " at agent " << c.agent + 1;
        out << " (" << c.lhs << " vs " << c.rhs << ")\n";
    }
}

/// Closed-loop mode named by the config policy; oracle policies have none.
inline ControllerMode dynamic_mode(const ScenarioConfig& cfg, const char* command)
{
    switch (cfg.controller.policy) {
    case Policy::decentralized: return ControllerMode::decentralized;
    case Policy::coordinating: return ControllerMode::coordinating;
    default:
        throw ConfigError(std::string("controller.policy: ") + command +
                          " needs a decentralized or coordinating controller");
    }
}

}  // namespace detail

struct SimulateArgs {
    std::filesystem::path config;
    std::optional<std::filesystem::path> out_dir;
    bool force = false;
};

inline int simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const ScenarioConfig cfg = load_scenario(args.config);
        RunOptions opts = default_run_options();
        opts.output_dir = args.out_dir;
        opts.force = args.force;
        const RunArtifacts art = run_scenario(cfg, opts);
        if (!art.notice.empty()) err << "notice: " << art.notice << '\n';
        out << "csv=" << art.csv_path.string() << '\n' << "summary=" << art.summary_path.string() << '\n';
        scenario_detail::write_summary(out, art.summary);
        return int(ok);
    });
}

struct CheckArgs {
    std::filesystem::path config;
    bool assumption1 = false;
    bool lemma1 = false;
    bool lemma2 = false;
    bool tuning = false;
    std::size_t samples = 500;
    std::uint64_t seed = 0;
};

/// With no check selected all four run.
inline int check(CheckArgs args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const ScenarioConfig cfg = load_scenario(args.config);
        if (!(args.assumption1 || args.lemma1 || args.lemma2 || args.tuning))
            args.assumption1 = args.lemma1 = args.lemma2 = args.tuning = true;
        const BuiltSystem built = build_system(cfg);
        bool pass = true;
        const auto property = [&](const PropertyVerdict& v) {
            detail::print_property(out, v);
            pass = pass && v.pass();
        };
        if (args.assumption1) property(check_assumption1(built.ic, args.samples, args.seed));
        if (args.lemma1) property(check_lemma1(built.ic, args.samples, args.seed));
        if (args.lemma2) property(check_lemma2(built.ic, args.samples, args.seed));
        if (args.tuning) {
            std::vector<ControllerMode> modes;
            if (cfg.controller.policy == Policy::decentralized || cfg.controller.policy == Policy::coordinating) {
                modes.push_back(detail::dynamic_mode(cfg, "check"));
            } else {
                if (cfg.controller.kA) modes.push_back(ControllerMode::decentralized);
                if (cfg.controller.kC && cfg.controller.alpha) modes.push_back(ControllerMode::coordinating);
            }
            for (auto m : modes) {
                const TuningReport r = validate_tuning(built.agents, cfg.gains(m));
                detail::print_tuning(out, m, r);
                pass = pass && r.pass();
            }
        }
        return pass ? int(ok) : int(failed);
    });
}

struct VerifyArgs {
    std::filesystem::path config;
    bool stability = false;
    bool optimality = false;
    std::size_t starts = 20;
    std::size_t samples = 1000;
    std::uint64_t seed = 0;
    double t_max = 200.0;
    double tol = 1e-4;
    bool force = false;
    std::optional<std::filesystem::path> report;
};

/// Stability and/or optimality of the configured closed loop at constant w
/// (time-varying disturbances are frozen at t0). With neither selected both run.
inline int verify(VerifyArgs args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const ScenarioConfig cfg = load_scenario(args.config);
        if (!(args.stability || args.optimality)) args.stability = args.optimality = true;
        const ControllerMode mode = detail::dynamic_mode(cfg, "verify");
        const BuiltSystem built = build_system(cfg);
        ClosedLoopSystem sys(built.agents, built.ic, cfg.gains(mode));
        if (sys.agents().time_varying()) {
            err << "notice: disturbance frozen at t0 for verification\n";
            sys = sys.with_constant_w(sys.agents().disturbance(cfg.sim.t0));
        }
        std::vector<VerificationVerdict> verdicts;
        if (args.stability) {
            ConvergenceOptions co;
            co.starts = args.starts;
            co.seed = args.seed;
            co.t_max = args.t_max;
            co.tol = args.tol;
            co.force = args.force || cfg.controller.force;
            co.solver = cfg.sim.solver;
            verdicts.push_back(verify_global_convergence(sys, co));
        }
        if (args.optimality) {
            const CostKind kind = mode == ControllerMode::decentralized ? CostKind::weighted_l1 : CostKind::linf;
            auto found = find_equilibrium(sys);
            if (const auto* none = std::get_if<NoEquilibrium>(&found)) {
                VerificationVerdict v;
                v.name = std::string("optimality_") + to_string(kind);
                v.set("best_residual", none->best_residual);
                v.violations.push_back("no closed-loop equilibrium: " + none->reason);
                verdicts.push_back(std::move(v));
            } else {
                OptimalityOptions oo;
                oo.samples = args.samples;
                oo.seed = args.seed;
                oo.oracle.seed = args.seed;
                verdicts.push_back(verify_optimality(sys, std::get<EquilibriumReport>(found), kind, oo));
            }
        }
        bool pass = true;
        for (const auto& v : verdicts) {
            write_verdict(out, v);
            pass = pass && v.pass;
        }
        if (args.report) {
            std::ofstream rep(*args.report, std::ios::binary);
            for (const auto& v : verdicts) write_verdict(rep, v);
            if (!rep) throw std::runtime_error("cannot write " + args.report->string());
        }
        return pass ? int(ok) : int(failed);
    });
}

struct ReproduceArgs {
    std::string policy = "all";
    double capacity_scale = hydraulics::kCalibratedCapacityScale;
    std::filesystem::path out_dir = "dhn_out";
    std::optional<std::filesystem::path> config;  // replaces the built-in scenario
};

inline int reproduce_dhn(const ReproduceArgs& args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        std::vector<Policy> policies;
        if (args.policy == "all") {
            policies = {Policy::decentralized, Policy::coordinating, Policy::oracle_l1, Policy::oracle_linf};
        } else if (const auto p = parse_policy(args.policy)) {
            policies = {*p};
        } else {
            throw ConfigError("--policy: expected decentralized, coordinating, oracle-l1, oracle-linf or all");
        }
        ScenarioConfig cfg = args.config ? load_scenario(*args.config) : dhn_reproduction_config(args.capacity_scale);
        if (!cfg.is_dhn()) throw ConfigError("reproduce-dhn: configuration is not a district heating system");
        if (!(args.capacity_scale >= 0.0)) throw ConfigError("--capacity-scale: must be >= 0");
        if (!args.config) std::get<DhnSystemConfig>(cfg.system).capacity_scale = args.capacity_scale;
        RunOptions opts = default_run_options();
        opts.output_dir = args.out_dir;
        const DhnComparison cmp = awpi::reproduce_dhn(cfg, policies, opts);
        out << "comparison=" << cmp.comparison_csv.string() << '\n' << "summary=" << cmp.summary_path.string() << '\n';
        std::ifstream sum(cmp.summary_path);
        out << sum.rdbuf();
        return int(ok);
    });
}

}  // namespace awpi::cli
