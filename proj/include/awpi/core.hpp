#pragma once

// Vector types, actuator nonlinearities and controller tuning rules shared by
// every other module.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "awpi/errors.hpp"

namespace awpi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace detail {

inline void require_same_size(Eigen::Index a, Eigen::Index b, const char* what)
{
    if (a != b) {
        std::ostringstream os;
        os << what << ": dimension mismatch (" << a << " vs " << b << ")";
        throw DimensionError(os.str());
    }
}

inline bool all_positive(const Vec& v)
{
    return v.size() > 0 && (v.array() > 0.0).all() && v.allFinite();
}

}  // namespace detail

/// Per-agent actuator limits; the box S = [lower, upper].
class SaturationBounds {
public:
    SaturationBounds(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper))
    {
        detail::require_same_size(lower_.size(), upper_.size(), "SaturationBounds");
        if (lower_.size() < 1) throw DimensionError("SaturationBounds: need at least one agent");
        for (Eigen::Index i = 0; i < lower_.size(); ++i) {
            if (!(lower_[i] < upper_[i]))
                throw std::invalid_argument("SaturationBounds: lower must be strictly below upper");
        }
    }

    static SaturationBounds uniform(std::size_t n, double lower, double upper)
    {
        const auto m = static_cast<Eigen::Index>(n);
        return {Vec::Constant(m, lower), Vec::Constant(m, upper)};
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(lower_.size()); }
    const Vec& lower() const noexcept { return lower_; }
    const Vec& upper() const noexcept { return upper_; }

    /// True when every coordinate lies within the box, up to `tol`.
    bool contains(const Vec& v, double tol = 0.0) const
    {
        detail::require_same_size(v.size(), lower_.size(), "SaturationBounds::contains");
        return ((v.array() >= lower_.array() - tol) && (v.array() <= upper_.array() + tol)).all();
    }

    friend bool operator==(const SaturationBounds& a, const SaturationBounds& b)
    {
        return a.lower_ == b.lower_ && a.upper_ == b.upper_;
    }

private:
    Vec lower_;
    Vec upper_;
};

/// sign(0) == 0 exactly.
inline double sign(double x) noexcept
{
    return static_cast<double>((0.0 < x) - (x < 0.0));
}

inline Vec sign(const Vec& v)
{
    return v.unaryExpr([](double x) { return sign(x); });
}

inline Vec saturate(const Vec& u, const SaturationBounds& bounds)
{
    detail::require_same_size(u.size(), bounds.lower().size(), "saturate");
    return u.cwiseMax(bounds.lower()).cwiseMin(bounds.upper());
}

/// dz(u) = u - sat(u).
inline Vec deadzone(const Vec& u, const SaturationBounds& bounds)
{
    return u - saturate(u, bounds);
}

/// Internal decay rates a and disturbance w (constant, or a function of time).
class AgentEnsemble {
public:
    using Profile = std::function<Vec(double)>;

    AgentEnsemble(Vec a, Vec w) : a_(std::move(a)), w_(std::move(w))
    {
        detail::require_same_size(a_.size(), w_.size(), "AgentEnsemble");
        if (!detail::all_positive(a_)) throw std::invalid_argument("AgentEnsemble: a_i must be > 0");
    }

    /// Time-varying disturbance; `w_nominal` is used where a single constant w
    /// is required (equilibria, oracles).
    AgentEnsemble(Vec a, Vec w_nominal, Profile profile)
        : AgentEnsemble(std::move(a), std::move(w_nominal))
    {
        profile_ = std::move(profile);
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(a_.size()); }
    const Vec& a() const noexcept { return a_; }
    const Vec& w() const noexcept { return w_; }
    bool time_varying() const noexcept { return static_cast<bool>(profile_); }

    Vec disturbance(double t) const { return profile_ ? profile_(t) : w_; }

    /// Same rates with a different constant disturbance.
    AgentEnsemble with_constant_w(Vec w) const { return {a_, std::move(w)}; }

private:
    Vec a_;
    Vec w_;
    Profile profile_;
};

enum class ControllerMode { decentralized, coordinating };

inline const char* to_string(ControllerMode m)
{
    return m == ControllerMode::decentralized ? "decentralized" : "coordinating";
}

/// PI gains plus either the per-agent anti-windup gains kA (decentralized) or
/// the shared gain kC with ratio alpha (coordinating).
struct ControllerGains {
    ControllerMode mode = ControllerMode::decentralized;
    Vec kP;
    Vec kI;
    Vec kA;            // decentralized only
    double kC = 0.0;   // coordinating only
    double alpha = 0.0;

    static ControllerGains decentralized(Vec kP, Vec kI, Vec kA)
    {
        detail::require_same_size(kP.size(), kI.size(), "ControllerGains");
        detail::require_same_size(kP.size(), kA.size(), "ControllerGains");
        if (!detail::all_positive(kP) || !detail::all_positive(kI) || !detail::all_positive(kA))
            throw std::invalid_argument("ControllerGains: gains must be > 0");
        ControllerGains g;
        g.mode = ControllerMode::decentralized;
        g.kP = std::move(kP);
        g.kI = std::move(kI);
        g.kA = std::move(kA);
        return g;
    }

    static ControllerGains coordinating(Vec kP, Vec kI, double kC, double alpha)
    {
        detail::require_same_size(kP.size(), kI.size(), "ControllerGains");
        if (!detail::all_positive(kP) || !detail::all_positive(kI) || !(kC > 0.0) || !(alpha > 0.0))
            throw std::invalid_argument("ControllerGains: gains must be > 0");
        ControllerGains g;
        g.mode = ControllerMode::coordinating;
        g.kP = std::move(kP);
        g.kI = std::move(kI);
        g.kC = kC;
        g.alpha = alpha;
        return g;
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(kP.size()); }
};

struct TuningCheck {
    static constexpr std::size_t global = std::numeric_limits<std::size_t>::max();

    std::size_t agent = global;
    std::string condition;  // human-readable inequality
    double lhs = 0.0;
    double rhs = 0.0;
    bool ok = false;
};

struct TuningReport {
    std::vector<TuningCheck> checks;

    bool pass() const
    {
        for (const auto& c : checks)
            if (!c.ok) return false;
        return true;
    }

    std::vector<TuningCheck> failures() const
    {
        std::vector<TuningCheck> out;
        for (const auto& c : checks)
            if (!c.ok) out.push_back(c);
        return out;
    }
};

/// kP_i a_i > kI_i and kP_i kA_i < 1 for every agent.
inline TuningReport validate_decentralized_tuning(const AgentEnsemble& agents, const ControllerGains& gains)
{
    if (gains.mode != ControllerMode::decentralized)
        throw std::invalid_argument("validate_decentralized_tuning: gains are not decentralized");
    detail::require_same_size(static_cast<Eigen::Index>(agents.size()),
                              static_cast<Eigen::Index>(gains.size()), "validate_decentralized_tuning");
    TuningReport r;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double pa = gains.kP[k] * agents.a()[k];
        r.checks.push_back({i, "kP*a > kI", pa, gains.kI[k], pa > gains.kI[k]});
        const double pk = gains.kP[k] * gains.kA[k];
        r.checks.push_back({i, "kP*kA < 1", pk, 1.0, pk < 1.0});
    }
    return r;
}

/// a_i kP_i == (1 + alpha) kI_i (relative tolerance 1e-9) and (kC/2) sum kP <= 1.
inline TuningReport validate_coordinating_tuning(const AgentEnsemble& agents, const ControllerGains& gains)
{
    if (gains.mode != ControllerMode::coordinating)
        throw std::invalid_argument("validate_coordinating_tuning: gains are not coordinating");
    detail::require_same_size(static_cast<Eigen::Index>(agents.size()),
                              static_cast<Eigen::Index>(gains.size()), "validate_coordinating_tuning");
    constexpr double rel_tol = 1e-9;
    TuningReport r;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double lhs = agents.a()[k] * gains.kP[k];
        const double rhs = (1.0 + gains.alpha) * gains.kI[k];
        const bool ok = std::abs(lhs - rhs) <= rel_tol * std::max(std::abs(lhs), std::abs(rhs));
        r.checks.push_back({i, "a*kP == (1+alpha)*kI", lhs, rhs, ok});
    }
    const double total = 0.5 * gains.kC * gains.kP.sum();
    r.checks.push_back({TuningCheck::global, "(kC/2)*sum(kP) <= 1", total, 1.0, total <= 1.0});
    return r;
}

inline TuningReport validate_tuning(const AgentEnsemble& agents, const ControllerGains& gains)
{
    return gains.mode == ControllerMode::decentralized ? validate_decentralized_tuning(agents, gains)
                                                       : validate_coordinating_tuning(agents, gains);
}

}  // namespace awpi
