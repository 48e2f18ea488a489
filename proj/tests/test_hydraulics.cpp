#include <gtest/gtest.h>

#include <random>

#include "awpi/hydraulics.hpp"
#include "support.hpp"

namespace {

using namespace awpi;
using namespace awpi::hydraulics;
using awpi::testing::bisect;
using awpi::testing::vec;

HydraulicNetwork single_consumer(double capacity_scale = 1.0)
{
    return {0, {{0, 1, 0.9}}, {{1, 2.5, ValveCurve{}}}, 0.6e6, capacity_scale};
}

// Pressure balance of one consumer behind one pipe, solved by bisection.
double single_consumer_oracle(double v)
{
    const double k = 2.5 + 5.0 + 30.0 / ((v + 1.001) * (v + 1.001));
    return bisect([k](double q) { return (2.0 * 0.9 + k) * q * q - 0.6e6; }, 0.0, 1e4);
}

TEST(SingleConsumer, FullyOpen)
{
    const double oracle = single_consumer_oracle(1.0);
    EXPECT_NEAR(oracle, 189.024402531, 1e-8);
    const double q = solve_flows(single_consumer(), vec({1.0}))[0];
    EXPECT_NEAR(q / oracle, 1.0, 1e-9);
}

TEST(SingleConsumer, Closed)
{
    const double oracle = single_consumer_oracle(-1.0);
    EXPECT_NEAR(oracle, 0.141421334317, 1e-11);
    const double q = solve_flows(single_consumer(), vec({-1.0}))[0];
    EXPECT_NEAR(q / oracle, 1.0, 1e-9);
}

TEST(SolveFlows, SymmetricStar)
{
    const HydraulicNetwork net(0, {{0, 1, 0.5}}, {{1, 2.5, {}}, {1, 2.5, {}}}, 1e5);
    const Vec q = solve_flows(net, vec({0.3, 0.3}));
    EXPECT_NEAR(q[0], q[1], 1e-12 * q[0]);
}

TEST(SolveFlows, DegeneratePumpIsSolverError)
{
    EXPECT_THROW(solve_flows(single_consumer(0.0), vec({0.0})), SolverError);
}

TEST(SolveFlows, ValveOutsideRange)
{
    EXPECT_THROW(solve_flows(single_consumer(), vec({1.5})), DomainError);
}

TEST(HydraulicNetwork, RejectsNonTree)
{
    EXPECT_THROW(HydraulicNetwork(0, {{0, 1, 1.0}, {0, 1, 1.0}}, {{1, 2.5, {}}}, 1e5), std::invalid_argument);
    EXPECT_THROW(HydraulicNetwork(0, {{1, 2, 1.0}, {2, 1, 1.0}}, {{1, 2.5, {}}}, 1e5), std::invalid_argument);
    EXPECT_THROW(HydraulicNetwork(0, {{0, 1, 1.0}}, {{7, 2.5, {}}}, 1e5), std::invalid_argument);
    EXPECT_THROW(HydraulicNetwork(0, {{0, 1, 1.0}}, {}, 1e5), std::invalid_argument);
}

TEST(Fig1Network, Layout)
{
    const auto net = fig1_network();
    ASSERT_EQ(net.size(), 22u);
    EXPECT_EQ(net.root(), 23);
    EXPECT_EQ(net.consumers()[0].junction, 26);
    EXPECT_EQ(net.consumers()[7].junction, 29);
    EXPECT_EQ(net.consumers()[8].junction, 30);
    EXPECT_EQ(net.consumers()[13].junction, 32);
    EXPECT_EQ(net.consumers()[14].junction, 33);
    EXPECT_EQ(net.consumers()[21].junction, 36);
    // Every consumer shares the main pipe.
    EXPECT_EQ(net.downstream(0).size(), 22u);
}

TEST(Fig1Network, FlowsBalanceAndStayPositive)
{
    const auto net = fig1_network(kCalibratedCapacityScale);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        Vec v(22);
        for (auto& x : v) x = U(rng);
        const auto sol = solve_flows_detailed(net, v);
        EXPECT_LE(sol.iterations, 50);
        EXPECT_LT(mass_balance_residual(net, sol.q, sol.pipe_flows), 1e-8);
        EXPECT_TRUE((sol.q.array() > 0.0).all());
        // Pressure balance rechecked from the definition.
        for (std::size_t i = 0; i < 22; ++i) {
            const auto& c = net.consumers()[i];
            double loss = (c.resistance + c.valve.coefficient(v[Eigen::Index(i)])) * sol.q[Eigen::Index(i)] *
                          sol.q[Eigen::Index(i)];
            for (auto e : net.path(i)) loss += 2.0 * net.pipes()[e].resistance * std::pow(sol.pipe_flows[Eigen::Index(e)], 2);
            EXPECT_NEAR(loss / net.effective_pump_dp(), 1.0, 1e-10);
        }
    }
}

TEST(Fig1Network, Deterministic)
{
    const auto net = fig1_network();
    const Vec v = Vec::LinSpaced(22, -0.9, 0.9);
    const Vec a = solve_flows(net, v);
    const Vec b = solve_flows(net, v);
    EXPECT_EQ(a, b);
}

// Opening one valve raises its own flow, lowers the others and raises the total.
TEST(Fig1Network, OpeningOneValve)
{
    const auto net = fig1_network(kCalibratedCapacityScale);
    const Vec v = Vec::Constant(22, 0.1);
    const Vec q0 = solve_flows(net, v);
    for (Eigen::Index i : {0, 9, 21}) {
        Vec w = v;
        w[i] = 0.6;
        const Vec q1 = solve_flows(net, w);
        for (Eigen::Index j = 0; j < 22; ++j) {
            if (j == i) EXPECT_GT(q1[j], q0[j]);
            else EXPECT_LT(q1[j], q0[j]);
        }
        EXPECT_GT(q1.sum(), q0.sum());
    }
}

TEST(Buildings, Coefficients)
{
    const BuildingParams b;
    EXPECT_NEAR(b.heat_gain(), 29.0, 1e-12);
    EXPECT_DOUBLE_EQ(b.rate(), 0.6);
    EXPECT_NEAR(b.disturbance(-25.0), -27.0, 1e-12);
}

TEST(DhnInterconnection, ScalesFlows)
{
    const auto net = fig1_network(kCalibratedCapacityScale);
    const std::vector<BuildingParams> bld(22);
    auto stats = std::make_shared<FlowStats>();
    const auto ic = dhn_interconnection(net, bld, stats);
    const Vec v = Vec::Zero(22);
    EXPECT_TRUE(ic(v).isApprox(29.0 * solve_flows(net, v), 1e-12));
    EXPECT_EQ(ic.eta(), Vec::Ones(22));
    EXPECT_EQ(stats->solves, 1u);
    EXPECT_LT(stats->max_mass_residual, 1e-8);
    EXPECT_THROW(dhn_interconnection(net, std::vector<BuildingParams>(3)), DimensionError);
}

TEST(DhnInterconnection, VanishesWithPumpPressure)
{
    const std::vector<BuildingParams> bld(22);
    double previous = std::numeric_limits<double>::infinity();
    for (double scale : {1e-2, 1e-4, 1e-6, 1e-8}) {
        const auto ic = dhn_interconnection(fig1_network(scale), bld);
        const double top = ic(Vec::Constant(22, -1.0)).maxCoeff();
        EXPECT_LT(top, previous);
        previous = top;
    }
    EXPECT_LT(previous, 1e-3);
}

TEST(DhnInterconnection, PropertyChecks)
{
    const auto ic = dhn_interconnection(fig1_network(kCalibratedCapacityScale), std::vector<BuildingParams>(22));
    EXPECT_TRUE(check_assumption1(ic, 200, 0).pass());
    EXPECT_TRUE(check_lemma1(ic, 200, 0).pass());
    const auto l2 = check_lemma2(ic, 200, 0);
    EXPECT_TRUE(l2.pass());
    EXPECT_GE(l2.qualifying, 20u);
}

TEST(DhnScenario, Build)
{
    const auto s = build_dhn_scenario();
    EXPECT_EQ(s.network.size(), 22u);
    EXPECT_TRUE(s.agents.a().isApprox(Vec::Constant(22, 0.6)));
    EXPECT_TRUE(s.agents.w().isApprox(Vec::Constant(22, -27.0)));
}

}  // namespace
