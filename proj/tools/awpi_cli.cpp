// awpi: simulate, check, verify and reproduce-dhn subcommands.

#include <iostream>

#include "CLI11.hpp"

#include "awpi/cli.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Anti-windup PI control of agents sharing a saturated monotone interconnection"};
    app.require_subcommand(1);

    awpi::cli::SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "run the configured scenario and write CSV + summary");
    simulate->add_option("config", sim.config, "scenario file")->required()->check(CLI::ExistingFile);
    simulate->add_option("--out", sim.out_dir, "output directory (overrides outputs.directory)");
    simulate->add_flag("--force", sim.force, "run even if the gains violate the tuning rules");

    awpi::cli::CheckArgs chk;
    auto* check = app.add_subcommand("check", "test interconnection properties and tuning rules");
    check->add_option("config", chk.config, "scenario file")->required()->check(CLI::ExistingFile);
    check->add_flag("--assumption1", chk.assumption1, "competition and aggregate monotonicity");
    check->add_flag("--lemma1", chk.lemma1, "signed-sum inequality over random pairs");
    check->add_flag("--lemma2", chk.lemma2, "monotone inverse over ordered pairs");
    check->add_flag("--tuning", chk.tuning, "controller tuning rules");
    check->add_option("--samples", chk.samples, "samples per property")->capture_default_str();
    check->add_option("--seed", chk.seed, "random seed")->capture_default_str();

    awpi::cli::VerifyArgs ver;
    auto* verify = app.add_subcommand("verify", "multi-start stability and equilibrium optimality");
    verify->add_option("config", ver.config, "scenario file")->required()->check(CLI::ExistingFile);
    verify->add_flag("--stability", ver.stability, "convergence from random starts");
    verify->add_flag("--optimality", ver.optimality, "equilibrium cost against the oracle");
    verify->add_option("--starts", ver.starts, "random initial states")->capture_default_str();
    verify->add_option("--samples", ver.samples, "random comparison equilibria")->capture_default_str();
    verify->add_option("--seed", ver.seed, "random seed")->capture_default_str();
    verify->add_option("--t-max", ver.t_max, "integration horizon per start")->capture_default_str();
    verify->add_option("--tol", ver.tol, "terminal-state tolerance")->capture_default_str();
    verify->add_option("--report", ver.report, "also write the verdicts to this file");
    verify->add_flag("--force", ver.force, "run even if the gains violate the tuning rules");

    awpi::cli::ReproduceArgs rep;
    auto* reproduce = app.add_subcommand("reproduce-dhn", "22-consumer district heating case study");
    reproduce->add_option("--policy", rep.policy, "decentralized|coordinating|oracle-l1|oracle-linf|all")
        ->capture_default_str();
    reproduce->add_option("--capacity-scale", rep.capacity_scale, "pump pressure multiplier")->capture_default_str();
    reproduce->add_option("--out", rep.out_dir, "output directory")->capture_default_str();
    reproduce->add_option("--config", rep.config, "use this district heating scenario instead of the built-in one")
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : awpi::cli::config_error;
    }

    if (*simulate) return awpi::cli::simulate(sim, std::cout, std::cerr);
    if (*check) return awpi::cli::check(chk, std::cout, std::cerr);
    if (*verify) return awpi::cli::verify(ver, std::cout, std::cerr);
    return awpi::cli::reproduce_dhn(rep, std::cout, std::cerr);
}
