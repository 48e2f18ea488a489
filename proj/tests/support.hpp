#pragma once

// Fixtures shared by the test binaries: the two-agent M-matrix instance, the
// scalar loop with b = id, and small independent reference solvers.

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "awpi/control.hpp"
#include "awpi/interconnect.hpp"

namespace awpi::testing {

inline Mat two_agent_matrix()
{
    Mat B(2, 2);
    B << 1.0, -0.25, -0.25, 1.0;
    return B;
}

inline Vec vec(std::initializer_list<double> xs)
{
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

inline Interconnection two_agent_ic()
{
    return LinearMMatrix(two_agent_matrix()).interconnection(SaturationBounds::uniform(2, -1.0, 1.0));
}

inline AgentEnsemble two_agent_agents(Vec w = vec({-2.0, -1.0}))
{
    return {Vec::Ones(2), std::move(w)};
}

inline ControllerGains two_agent_decentralized_gains()
{
    return ControllerGains::decentralized(Vec::Constant(2, 2.0), Vec::Ones(2), Vec::Constant(2, 0.4));
}

inline ControllerGains two_agent_coordinating_gains()
{
    return ControllerGains::coordinating(Vec::Ones(2), Vec::Constant(2, 0.5), 0.5, 1.0);
}

inline ClosedLoopSystem two_agent_decentralized(Vec w = vec({-2.0, -1.0}))
{
    return {two_agent_agents(std::move(w)), two_agent_ic(), two_agent_decentralized_gains()};
}

inline ClosedLoopSystem two_agent_coordinating(Vec w = vec({-2.0, -1.0}))
{
    return {two_agent_agents(std::move(w)), two_agent_ic(), two_agent_coordinating_gains()};
}

/// n = 1, a = 1, b(v) = v on [-1, 1], w = -2, kP = 2, kI = 1, kA = 0.4.
inline ClosedLoopSystem scalar_decentralized()
{
    Mat one = Mat::Ones(1, 1);
    return {AgentEnsemble(Vec::Ones(1), Vec::Constant(1, -2.0)),
            make_linear_interconnection(one, Vec::Ones(1), SaturationBounds::uniform(1, -1.0, 1.0)),
            ControllerGains::decentralized(Vec::Constant(1, 2.0), Vec::Ones(1), Vec::Constant(1, 0.4))};
}

/// Root of a continuous f with f(lo), f(hi) of opposite sign.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200)
{
    double flo = f(lo);
    for (int k = 0; k < iters; ++k) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline std::filesystem::path source_dir() { return AWPI_SOURCE_DIR; }

inline std::filesystem::path config_path(const std::string& name) { return source_dir() / "configs" / name; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("awpi_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace awpi::testing
