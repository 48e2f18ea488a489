#pragma once

// Tree-structured district heating hydraulics. Valve positions v in [-1, 1]^n
// map to consumer volume flows q(v) [m^3/h] through a quadratic pressure-loss
// balance solved by Newton's method; the flows, scaled to heat input, form the
// interconnection seen by the building temperature loops.

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

#include "awpi/core.hpp"
#include "awpi/interconnect.hpp"

namespace awpi::hydraulics {

/// Pressure loss coefficient of a consumer substation with its valve at v:
/// (base + span / (v + offset)^2).
struct ValveCurve {
    double base = 5.0;
    double span = 30.0;
    double offset = 1.001;

    double coefficient(double v) const { return base + span / ((v + offset) * (v + offset)); }

    friend bool operator==(const ValveCurve&, const ValveCurve&) = default;
};

/// Pipe from `parent` to `child`. The resistance is counted twice (supply and
/// symmetric return side).
struct Pipe {
    int parent = 0;
    int child = 0;
    double resistance = 0.0;  // Pa/(m^3/h)^2

    friend bool operator==(const Pipe&, const Pipe&) = default;
};

struct Consumer {
    int junction = 0;
    double resistance = 2.5;  // connection, Pa/(m^3/h)^2
    ValveCurve valve;

    friend bool operator==(const Consumer&, const Consumer&) = default;
};

class HydraulicNetwork {
public:
    /// `capacity_scale` multiplies the pump pressure; 0 is accepted here and
    /// rejected by the solver.
    HydraulicNetwork(int root, std::vector<Pipe> pipes, std::vector<Consumer> consumers, double pump_dp,
                     double capacity_scale = 1.0)
        : root_(root), pipes_(std::move(pipes)), consumers_(std::move(consumers)), pump_dp_(pump_dp),
          capacity_scale_(capacity_scale)
    {
        if (!(pump_dp_ > 0.0)) throw std::invalid_argument("HydraulicNetwork: pump_dp must be > 0");
        if (!(capacity_scale_ >= 0.0)) throw std::invalid_argument("HydraulicNetwork: capacity_scale must be >= 0");
        if (consumers_.empty()) throw std::invalid_argument("HydraulicNetwork: no consumers");
        build_paths();
    }

    int root() const noexcept { return root_; }
    const std::vector<Pipe>& pipes() const noexcept { return pipes_; }
    const std::vector<Consumer>& consumers() const noexcept { return consumers_; }
    std::size_t size() const noexcept { return consumers_.size(); }
    double pump_dp() const noexcept { return pump_dp_; }
    double capacity_scale() const noexcept { return capacity_scale_; }
    double effective_pump_dp() const noexcept { return pump_dp_ * capacity_scale_; }

    HydraulicNetwork with_capacity_scale(double scale) const
    {
        return {root_, pipes_, consumers_, pump_dp_, scale};
    }

    /// Pipe indices from the root down to consumer i's junction.
    const std::vector<std::size_t>& path(std::size_t consumer) const { return paths_.at(consumer); }

    /// Consumers whose path contains pipe e.
    const std::vector<std::size_t>& downstream(std::size_t pipe) const { return downstream_.at(pipe); }

    friend bool operator==(const HydraulicNetwork& a, const HydraulicNetwork& b)
    {
        return a.root_ == b.root_ && a.pipes_ == b.pipes_ && a.consumers_ == b.consumers_ &&
               a.pump_dp_ == b.pump_dp_ && a.capacity_scale_ == b.capacity_scale_;
    }

private:
    void build_paths()
    {
        std::map<int, std::size_t> parent_pipe;  // child node -> pipe index
        for (std::size_t e = 0; e < pipes_.size(); ++e) {
            const auto& p = pipes_[e];
            if (!(p.resistance > 0.0)) throw std::invalid_argument("HydraulicNetwork: pipe resistance must be > 0");
            if (p.child == root_) throw std::invalid_argument("HydraulicNetwork: root cannot be a child");
            if (!parent_pipe.emplace(p.child, e).second) {
                std::ostringstream os;
                os << "HydraulicNetwork: node " << p.child << " has more than one parent (not a tree)";
                throw std::invalid_argument(os.str());
            }
        }
        // Walk each pipe up to the root; a cycle or a dangling parent breaks the tree.
        std::vector<std::vector<std::size_t>> pipe_path(pipes_.size());
        for (std::size_t e = 0; e < pipes_.size(); ++e) {
            std::vector<std::size_t> up;
            std::set<int> seen;
            int node = pipes_[e].child;
            while (node != root_) {
                if (!seen.insert(node).second) throw std::invalid_argument("HydraulicNetwork: cycle in pipes");
                const auto it = parent_pipe.find(node);
                if (it == parent_pipe.end()) {
                    std::ostringstream os;
                    os << "HydraulicNetwork: node " << node << " is not connected to the root";
                    throw std::invalid_argument(os.str());
                }
                up.push_back(it->second);
                node = pipes_[it->second].parent;
            }
            std::reverse(up.begin(), up.end());
            pipe_path[e] = std::move(up);
        }
        paths_.clear();
        downstream_.assign(pipes_.size(), {});
        for (std::size_t i = 0; i < consumers_.size(); ++i) {
            const auto& c = consumers_[i];
            if (!(c.resistance > 0.0) || !(c.valve.base > 0.0) || !(c.valve.span > 0.0) || !(c.valve.offset > 1.0))
                throw std::invalid_argument("HydraulicNetwork: consumer parameters must be positive, offset > 1");
            std::vector<std::size_t> path;
            if (c.junction != root_) {
                const auto it = parent_pipe.find(c.junction);
                if (it == parent_pipe.end()) {
                    std::ostringstream os;
                    os << "HydraulicNetwork: consumer junction " << c.junction << " not in the tree";
                    throw std::invalid_argument(os.str());
                }
                path = pipe_path[it->second];
            }
            for (auto e : path) downstream_[e].push_back(i);
            paths_.push_back(std::move(path));
        }
    }

    int root_;
    std::vector<Pipe> pipes_;
    std::vector<Consumer> consumers_;
    double pump_dp_;
    double capacity_scale_;
    std::vector<std::vector<std::size_t>> paths_;
    std::vector<std::vector<std::size_t>> downstream_;
};

struct FlowSolution {
    Vec q;           // consumer flows
    Vec pipe_flows;  // aggregate flow per pipe
    int iterations = 0;
    double residual = 0.0;  // max pressure residual relative to pump pressure
};

struct FlowSolverOptions {
    double tol = 1e-12;  // relative pressure residual
    int max_iter = 50;
    int max_halvings = 30;
};

namespace flow_detail {

inline Vec pipe_flows(const HydraulicNetwork& net, const Vec& q)
{
    Vec Q = Vec::Zero(static_cast<Eigen::Index>(net.pipes().size()));
    for (std::size_t e = 0; e < net.pipes().size(); ++e)
        for (auto i : net.downstream(e)) Q[static_cast<Eigen::Index>(e)] += q[static_cast<Eigen::Index>(i)];
    return Q;
}

inline Vec pressure_residual(const HydraulicNetwork& net, const Vec& k, const Vec& q, const Vec& Q, double dp)
{
    Vec r(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        double loss = k[i] * std::abs(q[i]) * q[i];
        for (auto e : net.path(static_cast<std::size_t>(i))) {
            const double Qe = Q[static_cast<Eigen::Index>(e)];
            loss += 2.0 * net.pipes()[e].resistance * std::abs(Qe) * Qe;
        }
        r[i] = loss - dp;
    }
    return r;
}

}  // namespace flow_detail

/// Consumer loss coefficients (connection + substation + valve) at v.
inline Vec consumer_coefficients(const HydraulicNetwork& net, const Vec& v)
{
    awpi::detail::require_same_size(v.size(), static_cast<Eigen::Index>(net.size()), "consumer_coefficients");
    Vec k(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!(v[i] >= -1.0 - kDomainSlack && v[i] <= 1.0 + kDomainSlack))
            throw DomainError("solve_flows: valve position outside [-1, 1]");
        const auto& c = net.consumers()[static_cast<std::size_t>(i)];
        k[i] = c.resistance + c.valve.coefficient(std::clamp(v[i], -1.0, 1.0));
    }
    return k;
}

/// Newton solve of the pressure balance
///   pump_dp = sum_{e in path(i)} 2 s_e |Q_e| Q_e + k_i(v_i) |q_i| q_i
/// for all consumers, with a halving line search on the squared residual.
inline FlowSolution solve_flows_detailed(const HydraulicNetwork& net, const Vec& v,
                                         const FlowSolverOptions& opts = {})
{
    const double dp = net.effective_pump_dp();
    if (!(dp > 0.0))
        throw SolverError("solve_flows: degenerate pump pressure (Jacobian singular at zero flow)", 0.0);
    const Vec k = consumer_coefficients(net, v);
    const auto n = static_cast<Eigen::Index>(net.size());

    // Start from the flows that would result if every consumer drew the same
    // share through each shared pipe.
    Vec q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double coeff = k[i];
        for (auto e : net.path(static_cast<std::size_t>(i))) {
            const auto m = static_cast<double>(net.downstream(e).size());
            coeff += 2.0 * net.pipes()[e].resistance * m * m;
        }
        q[i] = std::sqrt(dp / coeff);
    }

    Vec Q = flow_detail::pipe_flows(net, q);
    Vec r = flow_detail::pressure_residual(net, k, q, Q, dp);
    double merit = r.squaredNorm();
    FlowSolution sol;
    for (int it = 0;; ++it) {
        sol.residual = r.cwiseAbs().maxCoeff() / dp;
        sol.iterations = it;
        if (sol.residual < opts.tol) break;
        if (it >= opts.max_iter) {
            std::ostringstream os;
            os << "solve_flows: no convergence after " << it << " Newton iterations, relative residual "
               << sol.residual;
            throw SolverError(os.str(), sol.residual);
        }
        Mat J = Mat::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) J(i, i) = 2.0 * k[i] * std::abs(q[i]);
        for (std::size_t e = 0; e < net.pipes().size(); ++e) {
            const double d = 4.0 * net.pipes()[e].resistance * std::abs(Q[static_cast<Eigen::Index>(e)]);
            const auto& down = net.downstream(e);
            for (auto i : down)
                for (auto j : down) J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += d;
        }
        const Eigen::LDLT<Mat> ldlt(J);
        Vec step = ldlt.solve(-r);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) step = J.partialPivLu().solve(-r);
        if (!step.allFinite()) throw SolverError("solve_flows: singular Jacobian", sol.residual);

        double lambda = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opts.max_halvings; ++h, lambda *= 0.5) {
            Vec q_try = q + lambda * step;
            Vec Q_try = flow_detail::pipe_flows(net, q_try);
            Vec r_try = flow_detail::pressure_residual(net, k, q_try, Q_try, dp);
            const double m_try = r_try.squaredNorm();
            if (m_try < merit) {
                q = std::move(q_try);
                Q = std::move(Q_try);
                r = std::move(r_try);
                merit = m_try;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            sol.residual = r.cwiseAbs().maxCoeff() / dp;
            if (sol.residual < 1e3 * opts.tol) break;  // at round-off floor
            throw SolverError("solve_flows: line search failed", sol.residual);
        }
    }
    sol.q = std::move(q);
    sol.pipe_flows = std::move(Q);
    return sol;
}

inline Vec solve_flows(const HydraulicNetwork& net, const Vec& v, double tol = 1e-12)
{
    FlowSolverOptions opts;
    opts.tol = tol;
    return solve_flows_detailed(net, v, opts).q;
}

/// Largest junction mass imbalance [m^3/h]: at every node, inflow from the
/// parent pipe (or the pump, at the root) minus outflow into child pipes and
/// attached consumers.
inline double mass_balance_residual(const HydraulicNetwork& net, const Vec& q, const Vec& pipe_flows)
{
    std::map<int, double> balance;
    balance[net.root()] += q.sum();  // pump delivers the total consumer draw
    for (std::size_t e = 0; e < net.pipes().size(); ++e) {
        const auto& p = net.pipes()[e];
        const double Qe = pipe_flows[static_cast<Eigen::Index>(e)];
        balance[p.parent] -= Qe;
        balance[p.child] += Qe;
    }
    for (std::size_t i = 0; i < net.size(); ++i) balance[net.consumers()[i].junction] -= q[static_cast<Eigen::Index>(i)];
    double worst = 0.0;
    for (const auto& [node, b] : balance) worst = std::max(worst, std::abs(b));
    return worst;
}

struct BuildingParams {
    double c = 2.0;        // heat capacity [kWh/K]
    double a_hat = 1.2;    // thermal conductance [kW/K]
    double delta = 50.0;   // heat exchanger temperature drop [K]
    double T_ref = 20.0;   // reference indoor temperature [deg C]
    double c_pw = 1.16e-3; // water specific heat [kWh/(kg K)]
    double rho_w = 1e3;    // water density [kg/m^3]

    void validate() const
    {
        if (!(c > 0.0 && a_hat > 0.0 && delta > 0.0 && c_pw > 0.0 && rho_w > 0.0))
            throw std::invalid_argument("BuildingParams: physical constants must be > 0");
    }

    /// Internal decay rate a = a_hat / c [1/h].
    double rate() const { return a_hat / c; }

    /// Heating rate per unit flow, c_pw rho_w delta / c [K/h per m^3/h].
    double heat_gain() const { return c_pw * rho_w * delta / c; }

    /// Disturbance a (T_o - T_ref) [K/h].
    double disturbance(double outdoor_temp) const { return rate() * (outdoor_temp - T_ref); }

    friend bool operator==(const BuildingParams&, const BuildingParams&) = default;
};

/// Running totals over the flow solves made through an interconnection.
struct FlowStats {
    std::size_t solves = 0;
    int max_iterations = 0;
    double max_residual = 0.0;       // relative pressure residual
    double max_mass_residual = 0.0;  // m^3/h
};

/// b_i(v) = (c_pw rho_w delta_i / c_i) q_i(v) on [-1, 1]^n with eta = 1. When
/// `stats` is given every solve also checks junction mass balance.
inline Interconnection dhn_interconnection(const HydraulicNetwork& net, const std::vector<BuildingParams>& buildings,
                                           std::shared_ptr<FlowStats> stats = nullptr)
{
    if (buildings.size() != net.size()) throw DimensionError("dhn_interconnection: one building per consumer");
    Vec gain(static_cast<Eigen::Index>(buildings.size()));
    for (std::size_t i = 0; i < buildings.size(); ++i) {
        buildings[i].validate();
        gain[static_cast<Eigen::Index>(i)] = buildings[i].heat_gain();
    }
    const auto n = net.size();
    if (stats) {
        return {[net, gain, stats](const Vec& v) -> Vec {
                    const FlowSolution sol = solve_flows_detailed(net, v);
                    ++stats->solves;
                    stats->max_iterations = std::max(stats->max_iterations, sol.iterations);
                    stats->max_residual = std::max(stats->max_residual, sol.residual);
                    stats->max_mass_residual =
                        std::max(stats->max_mass_residual, mass_balance_residual(net, sol.q, sol.pipe_flows));
                    return gain.cwiseProduct(sol.q);
                },
                Vec::Ones(static_cast<Eigen::Index>(n)), SaturationBounds::uniform(n, -1.0, 1.0)};
    }
    return {[net, gain](const Vec& v) -> Vec { return gain.cwiseProduct(solve_flows(net, v)); },
            Vec::Ones(static_cast<Eigen::Index>(n)), SaturationBounds::uniform(n, -1.0, 1.0)};
}

inline Vec building_rates(const std::vector<BuildingParams>& buildings)
{
    Vec a(static_cast<Eigen::Index>(buildings.size()));
    for (std::size_t i = 0; i < buildings.size(); ++i) a[static_cast<Eigen::Index>(i)] = buildings[i].rate();
    return a;
}

inline Vec building_disturbance(const std::vector<BuildingParams>& buildings, double outdoor_temp)
{
    Vec w(static_cast<Eigen::Index>(buildings.size()));
    for (std::size_t i = 0; i < buildings.size(); ++i)
        w[static_cast<Eigen::Index>(i)] = buildings[i].disturbance(outdoor_temp);
    return w;
}

/// Pump pressure multiplier at which full-open flow covers the heat demand
/// near -18 deg C, so valves saturate during the cold spell.
inline constexpr double kCalibratedCapacityScale = 1e-3;

/// The 22-consumer network: plant at node 23, main pipe 23-24, distribution
/// pipes among 24, 25, 26, 30, 33 and three lines 26-29, 30-32, 33-36 with
/// consumers attached two per junction (1-8, 9-14, 15-22).
inline HydraulicNetwork fig1_network(double capacity_scale = 1.0)
{
    std::vector<Pipe> pipes{
        {23, 24, 0.9},
        {24, 25, 0.25}, {25, 26, 0.25}, {25, 30, 0.25}, {24, 33, 0.25},
        {26, 27, 0.05}, {27, 28, 0.05}, {28, 29, 0.05},
        {30, 31, 0.05}, {31, 32, 0.05},
        {33, 34, 0.05}, {34, 35, 0.05}, {35, 36, 0.05},
    };
    std::vector<Consumer> consumers;
    for (int junction : {26, 27, 28, 29, 30, 31, 32, 33, 34, 35, 36})
        for (int k = 0; k < 2; ++k) consumers.push_back({junction, 2.5, ValveCurve{}});
    return {23, std::move(pipes), std::move(consumers), 0.6e6, capacity_scale};
}

struct DhnScenario {
    HydraulicNetwork network;
    std::vector<BuildingParams> buildings;
    AgentEnsemble agents;  // w evaluated at the requested outdoor temperature
};

inline DhnScenario build_dhn_scenario(double outdoor_temp = -25.0, double capacity_scale = 1.0)
{
    auto net = fig1_network(capacity_scale);
    std::vector<BuildingParams> buildings(net.size(), BuildingParams{});
    AgentEnsemble agents(building_rates(buildings), building_disturbance(buildings, outdoor_temp));
    return {std::move(net), std::move(buildings), std::move(agents)};
}

}  // namespace awpi::hydraulics
