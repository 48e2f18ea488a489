#pragma once

// Closed-loop vector fields of the anti-windup PI controllers, the change of
// coordinates (x, z) -> (zeta, u), and the Lyapunov functions used to monitor
// simulated trajectories.

#include <optional>
#include <string>
#include <utility>

#include "awpi/core.hpp"
#include "awpi/interconnect.hpp"

namespace awpi {

struct ClosedLoopState {
    Vec x;  // tracking errors
    Vec z;  // integrator states

    std::size_t size() const noexcept { return static_cast<std::size_t>(x.size()); }

    /// [x; z], the layout used by the integrators.
    Vec packed() const
    {
        Vec y(x.size() + z.size());
        y << x, z;
        return y;
    }

    static ClosedLoopState unpack(const Vec& y)
    {
        const Eigen::Index n = y.size() / 2;
        return {y.head(n), y.tail(n)};
    }
};

struct StateDerivative {
    Vec dx;
    Vec dz;

    Vec packed() const
    {
        Vec y(dx.size() + dz.size());
        y << dx, dz;
        return y;
    }
};

class ClosedLoopSystem {
public:
    ClosedLoopSystem(AgentEnsemble agents, Interconnection ic, ControllerGains gains)
        : agents_(std::move(agents)), ic_(std::move(ic)), gains_(std::move(gains))
    {
        const auto n = static_cast<Eigen::Index>(ic_.size());
        detail::require_same_size(static_cast<Eigen::Index>(agents_.size()), n, "ClosedLoopSystem agents");
        detail::require_same_size(static_cast<Eigen::Index>(gains_.size()), n, "ClosedLoopSystem gains");
        detail::require_same_size(gains_.kI.size(), n, "ClosedLoopSystem kI");
        if (gains_.mode == ControllerMode::decentralized)
            detail::require_same_size(gains_.kA.size(), n, "ClosedLoopSystem kA");
    }

    const AgentEnsemble& agents() const noexcept { return agents_; }
    const Interconnection& interconnection() const noexcept { return ic_; }
    const ControllerGains& gains() const noexcept { return gains_; }
    const SaturationBounds& bounds() const noexcept { return ic_.bounds(); }
    std::size_t size() const noexcept { return ic_.size(); }
    ControllerMode mode() const noexcept { return gains_.mode; }

    /// u = -kP x - kI z.
    Vec control(const ClosedLoopState& s) const
    {
        return -(gains_.kP.cwiseProduct(s.x) + gains_.kI.cwiseProduct(s.z));
    }

    /// Same system with a different constant disturbance.
    ClosedLoopSystem with_constant_w(Vec w) const { return {agents_.with_constant_w(std::move(w)), ic_, gains_}; }

private:
    AgentEnsemble agents_;
    Interconnection ic_;
    ControllerGains gains_;
};

namespace detail {

inline Vec plant_rate(const ClosedLoopSystem& sys, const ClosedLoopState& s, const Vec& v, double t)
{
    return -sys.agents().a().cwiseProduct(s.x) + sys.interconnection()(v) + sys.agents().disturbance(t);
}

}  // namespace detail

inline StateDerivative field_decentralized(const ClosedLoopSystem& sys, const ClosedLoopState& s, double t)
{
    if (sys.mode() != ControllerMode::decentralized)
        throw std::invalid_argument("field_decentralized: system is not decentralized");
    const Vec u = sys.control(s);
    const Vec v = saturate(u, sys.bounds());
    return {detail::plant_rate(sys, s, v, t), s.x + sys.gains().kA.cwiseProduct(u - v)};
}

/// Every integrator receives the same shared term kC * 1^T dz(u).
inline StateDerivative field_coordinating(const ClosedLoopSystem& sys, const ClosedLoopState& s, double t)
{
    if (sys.mode() != ControllerMode::coordinating)
        throw std::invalid_argument("field_coordinating: system is not coordinating");
    const Vec u = sys.control(s);
    const Vec v = saturate(u, sys.bounds());
    const double shared = sys.gains().kC * (u - v).sum();
    return {detail::plant_rate(sys, s, v, t), s.x.array() + shared};
}

inline StateDerivative closed_loop_field(const ClosedLoopSystem& sys, const ClosedLoopState& s, double t)
{
    return sys.mode() == ControllerMode::decentralized ? field_decentralized(sys, s, t)
                                                       : field_coordinating(sys, s, t);
}

struct ZetaU {
    Vec zeta;
    Vec u;
};

/// u = -kP x - kI z, zeta = -kI z.
inline ZetaU to_zeta_u(const ClosedLoopState& s, const ControllerGains& gains)
{
    Vec zeta = -gains.kI.cwiseProduct(s.z);
    Vec u = zeta - gains.kP.cwiseProduct(s.x);
    return {std::move(zeta), std::move(u)};
}

/// x = P^{-1} (zeta - u), z = -R^{-1} zeta.
inline ClosedLoopState from_zeta_u(const ZetaU& c, const ControllerGains& gains)
{
    return {(c.zeta - c.u).cwiseQuotient(gains.kP), -c.zeta.cwiseQuotient(gains.kI)};
}

/// V = sum_i eta_i d_i / (p_i c_i) |zeta~_i| + eta_i / p_i |u~_i| with
/// p = kP, c = kI / kP, d = a - c. Arguments are offsets from the equilibrium.
/// Throws TuningError when some d_i <= 0.
inline double lyapunov_decentralized(const ClosedLoopSystem& sys, const Vec& zeta_shift, const Vec& u_shift)
{
    const Vec& p = sys.gains().kP;
    const Vec c = sys.gains().kI.cwiseQuotient(p);
    const Vec d = sys.agents().a() - c;
    if (!(d.array() > 0.0).all()) throw TuningError("lyapunov_decentralized: requires kP*a > kI for every agent");
    const Vec& eta = sys.interconnection().eta();
    const Vec wz = eta.cwiseProduct(d).cwiseQuotient(p.cwiseProduct(c));
    const Vec wu = eta.cwiseQuotient(p);
    return wz.dot(zeta_shift.cwiseAbs()) + wu.dot(u_shift.cwiseAbs());
}

/// V = 1/2 dz(zeta)^T D R^{-1} C^{-1} dz(zeta) + 1/2 dz(u)^T R^{-1} dz(u), dead-zones
/// taken against the actuator bounds. Throws TuningError when D is not positive.
inline double lyapunov_coordinating(const ClosedLoopSystem& sys, const Vec& zeta, const Vec& u)
{
    if (sys.mode() != ControllerMode::coordinating)
        throw std::invalid_argument("lyapunov_coordinating: system is not coordinating");
    const Vec& r = sys.gains().kI;
    const Vec c = r.cwiseQuotient(sys.gains().kP);
    const Vec d = sys.agents().a() - c;
    if (!(d.array() > 0.0).all()) throw TuningError("lyapunov_coordinating: requires a > kI/kP for every agent");
    const Vec dzz = deadzone(zeta, sys.bounds());
    const Vec dzu = deadzone(u, sys.bounds());
    const Vec wz = d.cwiseQuotient(r.cwiseProduct(c));
    return 0.5 * (wz.dot(dzz.cwiseAbs2()) + dzu.cwiseAbs2().cwiseQuotient(r).sum());
}

/// Tracks a Lyapunov function along accepted integrator steps and counts
/// increases beyond slack * (1 + V).
class LyapunovMonitor {
public:
    using Function = std::function<double(const ClosedLoopState&)>;

    explicit LyapunovMonitor(Function V, double slack = 1e-7) : V_(std::move(V)), slack_(slack) {}

    double observe(const ClosedLoopState& s)
    {
        const double value = V_(s);
        if (last_) {
            const double increase = value - *last_;
            if (increase > slack_ * (1.0 + *last_)) ++violations_;
            worst_increase_ = std::max(worst_increase_, increase);
        }
        last_ = value;
        ++observations_;
        return value;
    }

    double value(const ClosedLoopState& s) const { return V_(s); }
    std::size_t violations() const noexcept { return violations_; }
    std::size_t observations() const noexcept { return observations_; }
    double worst_increase() const noexcept { return worst_increase_; }
    void reset() { last_.reset(); }

private:
    Function V_;
    double slack_;
    std::optional<double> last_;
    std::size_t violations_ = 0;
    std::size_t observations_ = 0;
    double worst_increase_ = -std::numeric_limits<double>::infinity();
};

struct MonitorChoice {
    std::optional<LyapunovMonitor> monitor;
    std::string notice;  // why the monitor is disabled, if it is
};

/// The applicable monitor for `sys`: the decentralized function around the
/// equilibrium `eq` (required for decentralized mode), or the dead-zone
/// function for the coordinating loop (only when b(upper) + w > 0 > b(lower) + w,
/// where it is known to decrease). Disabled for time-varying disturbances and
/// when the tuning does not make the function well defined.
inline MonitorChoice make_lyapunov_monitor(const ClosedLoopSystem& sys, const std::optional<ClosedLoopState>& eq)
{
    if (sys.agents().time_varying()) return {std::nullopt, "Lyapunov monitor disabled: disturbance varies in time"};
    const Vec c = sys.gains().kI.cwiseQuotient(sys.gains().kP);
    if (!((sys.agents().a() - c).array() > 0.0).all())
        return {std::nullopt, "Lyapunov monitor disabled: kP*a > kI violated"};
    const auto gains = sys.gains();
    if (sys.mode() == ControllerMode::decentralized) {
        if (!eq) return {std::nullopt, "Lyapunov monitor disabled: no equilibrium available"};
        const ZetaU ref = to_zeta_u(*eq, gains);
        return {LyapunovMonitor([sys, ref, gains](const ClosedLoopState& s) {
                    const ZetaU cur = to_zeta_u(s, gains);
                    return lyapunov_decentralized(sys, cur.zeta - ref.zeta, cur.u - ref.u);
                }),
                {}};
    }
    if (0.5 * gains.kC * gains.kP.sum() > 1.0)
        return {std::nullopt, "Lyapunov monitor disabled: (kC/2)*sum(kP) <= 1 violated"};
    const Vec& w = sys.agents().w();
    const Vec hi = sys.interconnection()(sys.bounds().upper()) + w;
    const Vec lo = sys.interconnection()(sys.bounds().lower()) + w;
    if (!((hi.array() > 0.0).all() && (lo.array() < 0.0).all()))
        return {std::nullopt, "Lyapunov monitor disabled: disturbance is not rejectable"};
    return {LyapunovMonitor([sys, gains](const ClosedLoopState& s) {
                const ZetaU cur = to_zeta_u(s, gains);
                return lyapunov_coordinating(sys, cur.zeta, cur.u);
            }),
            {}};
}

}  // namespace awpi
