#include <gtest/gtest.h>

#include <sstream>

#include "awpi/sim.hpp"
#include "support.hpp"

namespace {

using namespace awpi;
using namespace awpi::testing;

TEST(Profile, Interpolation)
{
    const DisturbanceProfile p({0.0, 2.0, 4.0}, {1.0, 3.0, -1.0});
    EXPECT_DOUBLE_EQ(p(-1.0), 1.0);
    EXPECT_DOUBLE_EQ(p(1.0), 2.0);
    EXPECT_DOUBLE_EQ(p(3.0), 1.0);
    EXPECT_DOUBLE_EQ(p(9.0), -1.0);
    EXPECT_EQ(p.minimum(), std::make_pair(4.0, -1.0));
    EXPECT_THROW(DisturbanceProfile({0.0, 0.0}, {1.0, 2.0}), std::invalid_argument);
    EXPECT_TRUE(DisturbanceProfile::constant(2.0).is_constant());
}

TEST(Profile, BuiltinTemperature)
{
    const auto p = make_temperature_profile();
    const auto [t_min, T_min] = p.minimum();
    EXPECT_LT(T_min, -25.0);
    EXPECT_GE(t_min, 45.0);
    EXPECT_LE(t_min, 60.0);
    EXPECT_GE(p.times().back() - p.times().front(), 90.0);
    EXPECT_GE(p(0.0), -15.0);
    EXPECT_LE(p(0.0), 0.0);
}

TEST(Profile, AffineDisturbance)
{
    const auto f = affine_disturbance(DisturbanceProfile::constant(-25.0), Vec::Constant(2, 0.6), Vec::Constant(2, 20.0));
    EXPECT_TRUE(f(3.0).isApprox(Vec::Constant(2, -27.0), 1e-14));
}

TEST(OutputGrid, EndsOnT1)
{
    const auto g = output_grid(0.0, 1.0, 0.3);
    ASSERT_EQ(g.size(), 5u);
    EXPECT_DOUBLE_EQ(g.back(), 1.0);
    EXPECT_EQ(output_grid(0.0, 1.0, 0.25).size(), 5u);
}

// y' = -y against exp(-t) for both integrators.
TEST(IntegrateOde, Exponential)
{
    for (auto method : {IntegrationMethod::rk45, IntegrationMethod::implicit_euler}) {
        SolverOptions o;
        o.method = method;
        o.atol = 1e-12;
        o.rtol = 1e-10;
        o.output_dt = 0.5;
        o.fixed_step = 1e-4;
        std::vector<double> ts, ys;
        integrate_ode([](double, const Vec& y) { return Vec(-y); }, Vec::Ones(1), 0.0, 2.0, output_grid(0.0, 2.0, 0.5), o,
                      [&](double t, const Vec& y) {
                          ts.push_back(t);
                          ys.push_back(y[0]);
                      });
        ASSERT_EQ(ts.size(), 5u);
        const double tol = method == IntegrationMethod::rk45 ? 1e-9 : 1e-4;
        for (std::size_t k = 0; k < ts.size(); ++k) EXPECT_NEAR(ys[k], std::exp(-ts[k]), tol);
    }
}

TEST(IntegrateOde, FailureReportsTime)
{
    SolverOptions o;
    o.output_dt = 1.0;
    try {
        integrate_ode([](double, const Vec& y) { return Vec(y.cwiseAbs2() * 1e3); }, Vec::Ones(1), 0.0, 2.0,
                      output_grid(0.0, 2.0, 1.0), o, {});
        FAIL() << "blow-up not detected";
    } catch (const IntegrationError& e) {
        EXPECT_LT(e.time(), 0.01);
    }
}

TEST(Integrate, EquilibriumIsInvariant)
{
    const auto sys = scalar_decentralized();
    const ClosedLoopState eq{vec({-1.0}), vec({-1.5})};
    SolverOptions o;
    o.output_dt = 1.0;
    const auto traj = integrate(sys, eq, 0.0, 100.0, o);
    for (const auto& s : traj.states) {
        EXPECT_NEAR(s.x[0], -1.0, 1e-7);
        EXPECT_NEAR(s.z[0], -1.5, 1e-7);
    }
}

TEST(Integrate, TwoAgentConvergesWithMonitor)
{
    const auto sys = two_agent_decentralized();
    const Vec x0 = vec({-1.25, -0.25});
    const Vec u0 = vec({4.125, 1.625});
    const ClosedLoopState eq{x0, -(u0 + sys.gains().kP.cwiseProduct(x0)).cwiseQuotient(sys.gains().kI)};
    auto mc = make_lyapunov_monitor(sys, eq);
    ASSERT_TRUE(mc.monitor);
    SolverOptions o;
    const auto traj = integrate(sys, {Vec::Zero(2), Vec::Zero(2)}, 0.0, 200.0, o, &*mc.monitor);
    EXPECT_LT((traj.states.back().x - x0).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_EQ(traj.monitor_violations, 0u);
    EXPECT_EQ(traj.size(), 801u);
    EXPECT_TRUE(traj.v.back().isApprox(Vec::Ones(2), 1e-6));
}

TEST(Integrate, ToleranceRefinement)
{
    const auto sys = two_agent_decentralized();
    SolverOptions coarse;
    SolverOptions fine;
    fine.atol /= 10.0;
    fine.rtol /= 10.0;
    const ClosedLoopState s0{vec({0.5, -0.5}), vec({1.0, 2.0})};
    const auto a = integrate(sys, s0, 0.0, 30.0, coarse).states.back().packed();
    const auto b = integrate(sys, s0, 0.0, 30.0, fine).states.back().packed();
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 10.0 * coarse.rtol * b.cwiseAbs().maxCoeff());
}

TEST(TrajectoryCsv, Schema)
{
    const auto sys = scalar_decentralized();
    SolverOptions o;
    o.output_dt = 0.5;
    const auto traj = integrate(sys, {vec({0.0}), vec({0.0})}, 0.0, 1.0, o);
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    const std::string text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "t,x1,u1,v1,V");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
    EXPECT_EQ(text.find('\r'), std::string::npos);
    // unmonitored: V column empty
    const std::string second = text.substr(text.find('\n') + 1);
    EXPECT_EQ(second.substr(0, second.find('\n')).back(), ',');

    std::ostringstream again;
    write_trajectory_csv(again, integrate(sys, {vec({0.0}), vec({0.0})}, 0.0, 1.0, o));
    EXPECT_EQ(again.str(), text);
}

}  // namespace
