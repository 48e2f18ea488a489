#include <gtest/gtest.h>

#include <random>

#include "awpi/control.hpp"
#include "support.hpp"

namespace {

using namespace awpi;
using namespace awpi::testing;

TEST(DecentralizedField, ScalarEquilibrium)
{
    const auto sys = scalar_decentralized();
    const ClosedLoopState s{vec({-1.0}), vec({-1.5})};
    EXPECT_EQ(sys.control(s), vec({3.5}));
    const auto d = field_decentralized(sys, s, 0.0);
    EXPECT_NEAR(d.dx[0], 0.0, 1e-15);
    EXPECT_NEAR(d.dz[0], 0.0, 1e-15);
}

TEST(DecentralizedField, OriginUnforced)
{
    const auto sys = two_agent_decentralized(Vec::Zero(2));
    const auto d = field_decentralized(sys, {Vec::Zero(2), Vec::Zero(2)}, 0.0);
    EXPECT_EQ(d.packed(), Vec::Zero(4));
}

TEST(DecentralizedField, TwoAgentEquilibrium)
{
    const auto sys = two_agent_decentralized();
    const auto g = sys.gains();
    // z from u = -kP x - kI z
    const Vec x = vec({-1.25, -0.25});
    const Vec u = vec({4.125, 1.625});
    const Vec z = -(u + g.kP.cwiseProduct(x)).cwiseQuotient(g.kI);
    const auto d = field_decentralized(sys, {x, z}, 0.0);
    EXPECT_LT(d.packed().cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CoordinatingField, TwoAgentEquilibrium)
{
    const auto sys = two_agent_coordinating();
    const Vec x = vec({-1.05, -1.05});
    const Vec u = vec({3.1, 0.2});
    const Vec z = -(u + sys.gains().kP.cwiseProduct(x)).cwiseQuotient(sys.gains().kI);
    const ClosedLoopState s{x, z};
    EXPECT_TRUE(sys.control(s).isApprox(u, 1e-14));
    EXPECT_TRUE(deadzone(u, sys.bounds()).isApprox(vec({2.1, 0.0}), 1e-14));
    const auto d = field_coordinating(sys, s, 0.0);
    EXPECT_LT(d.packed().cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Fields, AgreeWhenUnsaturated)
{
    const Vec kP = Vec::Ones(2), kI = Vec::Constant(2, 0.5);
    const ClosedLoopSystem dec(two_agent_agents(), two_agent_ic(), ControllerGains::decentralized(kP, kI, Vec::Constant(2, 0.3)));
    const ClosedLoopSystem coo(two_agent_agents(), two_agent_ic(), ControllerGains::coordinating(kP, kI, 0.5, 1.0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-0.45, 0.45);
    for (int k = 0; k < 500; ++k) {
        const ClosedLoopState s{vec({U(rng), U(rng)}), vec({U(rng), U(rng)})};
        ASSERT_TRUE(deadzone(dec.control(s), dec.bounds()).isZero(0.0));
        EXPECT_EQ(field_decentralized(dec, s, 0.0).packed(), field_coordinating(coo, s, 0.0).packed());
    }
    EXPECT_THROW(field_coordinating(dec, {Vec::Zero(2), Vec::Zero(2)}, 0.0), std::invalid_argument);
}

TEST(Coordinates, RoundTrip)
{
    const auto g = two_agent_decentralized_gains();
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N(0.0, 3.0);
    for (int k = 0; k < 200; ++k) {
        const ClosedLoopState s{vec({N(rng), N(rng)}), vec({N(rng), N(rng)})};
        const auto back = from_zeta_u(to_zeta_u(s, g), g);
        EXPECT_LT((back.x - s.x).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + s.x.cwiseAbs().maxCoeff()));
        EXPECT_LT((back.z - s.z).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + s.z.cwiseAbs().maxCoeff()));
    }
    const auto zu = to_zeta_u({Vec::Zero(2), vec({0.7, -0.1})}, g);
    EXPECT_EQ(zu.zeta, zu.u);
}

TEST(Coordinates, ScalarSubstitution)
{
    const auto sys = scalar_decentralized();
    const auto zu = to_zeta_u({vec({-1.0}), vec({-1.5})}, sys.gains());
    EXPECT_DOUBLE_EQ(zu.u[0], 3.5);
    EXPECT_DOUBLE_EQ(zu.zeta[0], 1.5);
}

TEST(Lyapunov, Decentralized)
{
    const auto sys = scalar_decentralized();
    EXPECT_EQ(lyapunov_decentralized(sys, vec({0.0}), vec({0.0})), 0.0);
    EXPECT_DOUBLE_EQ(lyapunov_decentralized(sys, vec({1.0}), vec({0.0})), 0.5);
    EXPECT_DOUBLE_EQ(lyapunov_decentralized(sys, vec({0.0}), vec({-1.0})), 0.5);

    const ClosedLoopSystem bad(AgentEnsemble(vec({0.6}), vec({0.0})), scalar_decentralized().interconnection(),
                               ControllerGains::decentralized(vec({1}), vec({1}), vec({0.5})));
    EXPECT_THROW(lyapunov_decentralized(bad, vec({1.0}), vec({0.0})), TuningError);
}

TEST(Lyapunov, Coordinating)
{
    const ClosedLoopSystem sys(AgentEnsemble(vec({1.0}), vec({0.0})), scalar_decentralized().interconnection(),
                               ControllerGains::coordinating(vec({1}), vec({0.5}), 0.5, 1.0));
    EXPECT_EQ(lyapunov_coordinating(sys, vec({0.2}), vec({-0.9})), 0.0);
    EXPECT_NEAR(lyapunov_coordinating(sys, vec({0.0}), vec({3.1})), 4.41, 1e-12);
}

TEST(Monitor, CountsIncreases)
{
    double level = 0.0;
    LyapunovMonitor m([&level](const ClosedLoopState&) { return level; }, 1e-7);
    const ClosedLoopState s{vec({0.0}), vec({0.0})};
    for (double v : {5.0, 4.0, 4.0 + 1e-8, 3.0, 3.5}) {
        level = v;
        m.observe(s);
    }
    EXPECT_EQ(m.observations(), 5u);
    EXPECT_EQ(m.violations(), 1u);
    EXPECT_DOUBLE_EQ(m.worst_increase(), 0.5);
}

TEST(Monitor, Selection)
{
    const auto dec = two_agent_decentralized();
    EXPECT_FALSE(make_lyapunov_monitor(dec, std::nullopt).monitor);
    EXPECT_TRUE(make_lyapunov_monitor(dec, ClosedLoopState{Vec::Zero(2), Vec::Zero(2)}).monitor);

    EXPECT_TRUE(make_lyapunov_monitor(two_agent_coordinating(vec({0.3, -0.2})), std::nullopt).monitor);
    const auto off = make_lyapunov_monitor(two_agent_coordinating(), std::nullopt);
    EXPECT_FALSE(off.monitor);
    EXPECT_NE(off.notice.find("rejectable"), std::string::npos);

    const ClosedLoopSystem varying(AgentEnsemble(Vec::Ones(2), Vec::Zero(2), [](double) { return Vec::Zero(2); }),
                                   two_agent_ic(), two_agent_decentralized_gains());
    EXPECT_FALSE(make_lyapunov_monitor(varying, ClosedLoopState{Vec::Zero(2), Vec::Zero(2)}).monitor);
}

}  // namespace
