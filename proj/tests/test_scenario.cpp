#include <gtest/gtest.h>

#include <fstream>

#include "awpi/scenario.hpp"
#include "support.hpp"

namespace {

using namespace awpi;
using namespace awpi::testing;

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string header_of(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

// Calibrated network at a constant outdoor temperature over a short horizon.
ScenarioConfig short_dhn(double outdoor, double t1)
{
    ScenarioConfig cfg = dhn_reproduction_config();
    cfg.agents.builtin_profile = false;
    cfg.agents.outdoor = DisturbanceProfile::constant(outdoor);
    cfg.sim.t1 = t1;
    cfg.sim.solver.output_dt = 0.5;
    return cfg;
}

TEST(BuildSystem, LinearUsesPerronVector)
{
    const auto cfg = load_scenario(config_path("linear_decentralized.cfg"));
    const auto built = build_system(cfg);
    EXPECT_TRUE(built.ic.eta().isApprox(Vec::Ones(2), 1e-12));
    EXPECT_FALSE(built.flows);
    EXPECT_FALSE(built.agents.time_varying());
}

TEST(BuildSystem, DhnDisturbanceFollowsProfile)
{
    const auto built = build_system(load_scenario(config_path("dhn_calibrated.cfg")));
    EXPECT_TRUE(built.agents.time_varying());
    const auto profile = make_temperature_profile();
    EXPECT_TRUE(built.agents.disturbance(50.0).isApprox(Vec::Constant(22, 0.6 * (profile(50.0) - 20.0)), 1e-14));
    EXPECT_TRUE(built.flows);
}

TEST(InitialState, ZeroControl)
{
    auto cfg = load_scenario(config_path("linear_decentralized.cfg"));
    cfg.sim.x0 = vec({0.5, -1.0});
    const auto s = initial_state(cfg);
    const auto sys = build_closed_loop(cfg, build_system(cfg), ControllerMode::decentralized);
    EXPECT_LT(sys.control(s).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RunScenario, LinearWritesDeterministicCsv)
{
    const auto dir = scratch_dir("scenario_linear");
    auto cfg = load_scenario(config_path("linear_decentralized.cfg"));
    RunOptions o = default_run_options();
    o.output_dir = dir;
    const auto art = run_scenario(cfg, o);
    EXPECT_EQ(art.csv_path, dir / "linear_decentralized.csv");
    EXPECT_EQ(header_of(art.csv_path), "t,x1,x2,u1,u2,v1,v2,V");
    EXPECT_TRUE(art.traj.monitored);
    EXPECT_EQ(art.traj.monitor_violations, 0u);
    EXPECT_LT((art.traj.states.back().x - vec({-1.25, -0.25})).cwiseAbs().maxCoeff(), 1e-4);
    const std::string first = slurp(art.csv_path);
    const std::string first_summary = slurp(art.summary_path);
    run_scenario(cfg, o);
    EXPECT_EQ(slurp(art.csv_path), first);
    EXPECT_EQ(slurp(art.summary_path), first_summary);
}

TEST(RunScenario, UnforcedTuningViolation)
{
    auto cfg = short_dhn(-10.0, 1.0);
    cfg.controller.force = false;
    RunOptions o = default_run_options();
    o.write = false;
    EXPECT_THROW(run_policy(cfg, Policy::decentralized, o), TuningError);
    o.force = true;
    EXPECT_NO_THROW(run_policy(cfg, Policy::decentralized, o));
}

TEST(RunScenario, DhnCsvSchema)
{
    const auto dir = scratch_dir("scenario_dhn");
    RunOptions o = default_run_options();
    o.output_dir = dir;
    const auto art = run_policy(short_dhn(-10.0, 2.0), Policy::decentralized, o);
    const std::string h = header_of(art.csv_path);
    EXPECT_EQ(std::count(h.begin(), h.end(), ','), 67);  // t, x/u/v for 22 agents, V
    EXPECT_NE(h.find("x22,u1"), std::string::npos);
    EXPECT_NE(h.find("v22,V"), std::string::npos);
    EXPECT_GT(art.flows.solves, 0u);
    EXPECT_LT(art.flows.max_mass_residual, 1e-8);
    EXPECT_LE(art.flows.max_iterations, 50);
}

TEST(RunScenario, OracleLinfEqualizesAtFrozenW)
{
    RunOptions o = default_run_options();
    o.write = false;
    const auto art = run_policy(short_dhn(-26.5, 40.0), Policy::oracle_linf, o);
    const Vec& x = art.traj.states.back().x;
    EXPECT_LT(x.maxCoeff() - x.minCoeff(), 1e-6 * (1.0 + x.cwiseAbs().maxCoeff()));
    // and the held valves reproduce the equalized equilibrium
    const Vec xs = open_loop_state(build_system(short_dhn(-26.5, 40.0)).ic,
                                   AgentEnsemble(Vec::Constant(22, 0.6), Vec::Constant(22, 0.6 * -46.5)),
                                   art.traj.v.back());
    EXPECT_LT(xs.maxCoeff() - xs.minCoeff(), 1e-8 * (1.0 + xs.cwiseAbs().maxCoeff()));
}

TEST(ColdestOutput, FirstMinimum)
{
    Trajectory tr;
    tr.times = {0.0, 1.0, 2.0, 3.0};
    const DisturbanceProfile T({0.0, 1.0, 2.0, 3.0}, {0.0, -2.0, -2.0, 1.0});
    EXPECT_EQ(coldest_output(tr, T), 1u);
    EXPECT_FALSE(coldest_output(tr, std::nullopt));
}

TEST(ReproduceDhn, ShortRunWritesEverything)
{
    const auto dir = scratch_dir("scenario_reproduce");
    RunOptions o = default_run_options();
    o.output_dir = dir;
    ScenarioConfig cfg = short_dhn(-20.0, 2.0);
    const auto cmp = reproduce_dhn(cfg, {Policy::decentralized, Policy::coordinating, Policy::oracle_l1, Policy::oracle_linf}, o);
    ASSERT_EQ(cmp.runs.size(), 4u);
    for (const char* p : {"decentralized", "coordinating", "oracle-l1", "oracle-linf"})
        EXPECT_TRUE(std::filesystem::exists(dir / (std::string("dhn_") + p + ".csv"))) << p;
    EXPECT_EQ(header_of(cmp.comparison_csv),
              "t,T_o,decentralized_max,decentralized_sum,coordinating_max,coordinating_sum,oracle-l1_max,"
              "oracle-l1_sum,oracle-linf_max,oracle-linf_sum");
    EXPECT_LT(cmp.max_mass_residual, 1e-8);
    const std::string summary = slurp(cmp.summary_path);
    EXPECT_NE(summary.find("ordering_holds="), std::string::npos);
    EXPECT_NE(summary.find("coldest_time=0\n"), std::string::npos);
    EXPECT_THROW(reproduce_dhn(load_scenario(config_path("linear_decentralized.cfg")), {Policy::decentralized}, o),
                 ConfigError);
}

}  // namespace
