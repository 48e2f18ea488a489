#pragma once

// Time integration of the closed loops: an adaptive Dormand-Prince 5(4) scheme
// by default, fixed-step implicit Euler for stiff cases, plus disturbance
// profiles and trajectory CSV output.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "awpi/control.hpp"
#include "awpi/core.hpp"

namespace awpi {

/// Piecewise-linear scalar signal, held constant outside its breakpoints.
class DisturbanceProfile {
public:
    DisturbanceProfile(std::vector<double> times, std::vector<double> values)
        : times_(std::move(times)), values_(std::move(values))
    {
        if (times_.empty() || times_.size() != values_.size())
            throw std::invalid_argument("DisturbanceProfile: need matching, non-empty breakpoints");
        for (std::size_t i = 1; i < times_.size(); ++i)
            if (!(times_[i] > times_[i - 1]))
                throw std::invalid_argument("DisturbanceProfile: breakpoint times must be strictly increasing");
    }

    static DisturbanceProfile constant(double value) { return {{0.0}, {value}}; }

    bool is_constant() const noexcept { return times_.size() == 1; }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double operator()(double t) const
    {
        if (t <= times_.front()) return values_.front();
        if (t >= times_.back()) return values_.back();
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        const auto k = static_cast<std::size_t>(it - times_.begin());
        const double s = (t - times_[k - 1]) / (times_[k] - times_[k - 1]);
        return values_[k - 1] + s * (values_[k] - values_[k - 1]);
    }

    /// (t_min, value_min) over the breakpoints (exact for piecewise-linear).
    std::pair<double, double> minimum() const
    {
        const auto it = std::min_element(values_.begin(), values_.end());
        return {times_[static_cast<std::size_t>(it - values_.begin())], *it};
    }

    friend bool operator==(const DisturbanceProfile&, const DisturbanceProfile&) = default;

private:
    std::vector<double> times_;
    std::vector<double> values_;
};

/// w_i(t) = gain_i * (profile(t) - offset_i); with gain = a and offset = T_ref
/// this maps an outdoor temperature to building disturbances.
inline AgentEnsemble::Profile affine_disturbance(DisturbanceProfile profile, Vec gain, Vec offset)
{
    detail::require_same_size(gain.size(), offset.size(), "affine_disturbance");
    return [profile = std::move(profile), gain = std::move(gain), offset = std::move(offset)](double t) -> Vec {
        return gain.cwiseProduct((Vec::Constant(gain.size(), profile(t)) - offset));
    };
}

/// Synthetic 96-hour outdoor temperature [deg C], hourly breakpoints: a slow
/// cooling trend with a daily cycle and a cold spell bottoming out just under
/// -26 deg C around t = 50 h.
inline DisturbanceProfile make_temperature_profile()
{
    constexpr int hours = 96;
    std::vector<double> t;
    std::vector<double> T;
    for (int h = 0; h <= hours; ++h) {
        const double th = h;
        const double trend = -5.0 - 5.0 * th / hours;
        const double daily = -3.0 * std::sin(2.0 * std::numbers::pi * (th - 45.0) / 24.0);
        const double spell = -16.0 * std::exp(-((th - 50.0) / 7.0) * ((th - 50.0) / 7.0));
        t.push_back(th);
        T.push_back(trend + daily + spell);
    }
    return {std::move(t), std::move(T)};
}

enum class IntegrationMethod { rk45, implicit_euler };

struct SolverOptions {
    IntegrationMethod method = IntegrationMethod::rk45;
    double atol = 1e-8;
    double rtol = 1e-6;
    double output_dt = 0.25;
    double h_init = 0.0;       // 0: automatic
    double h_min = 1e-12;      // relative to max(1, |t|)
    double h_max = std::numeric_limits<double>::infinity();
    double fixed_step = 1e-3;  // implicit Euler
    long max_steps = 50'000'000;

    void validate() const
    {
        if (!(atol > 0.0 && rtol > 0.0 && output_dt > 0.0 && fixed_step > 0.0 && h_max > 0.0))
            throw std::invalid_argument("SolverOptions: tolerances and steps must be > 0");
    }
};

struct StepStats {
    long accepted = 0;
    long rejected = 0;
};

using OdeRhs = std::function<Vec(double, const Vec&)>;
/// Called after every accepted step with (t, y).
using StepObserver = std::function<void(double, const Vec&)>;
/// Called at each output time with (t, y).
using OutputObserver = std::function<void(double, const Vec&)>;

inline std::vector<double> output_grid(double t0, double t1, double dt)
{
    std::vector<double> grid;
    const auto steps = static_cast<long>(std::floor((t1 - t0) / dt + 1e-9));
    for (long k = 0; k <= steps; ++k) grid.push_back(t0 + static_cast<double>(k) * dt);
    if (t1 - grid.back() > 1e-9 * std::max(1.0, std::abs(t1))) grid.push_back(t1);
    else grid.back() = t1;
    return grid;
}

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DoPri {
    static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
};

inline double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double atol, double rtol)
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        worst = std::max(worst, std::abs(err[i]) / sc);
    }
    return worst;
}

inline double initial_step(const OdeRhs& f, double t0, const Vec& y0, const Vec& f0, double span,
                           const SolverOptions& opts)
{
    if (opts.h_init > 0.0) return std::min(opts.h_init, span);
    const Vec scale = (opts.atol + opts.rtol * y0.cwiseAbs().array()).matrix();
    const double d0 = y0.cwiseQuotient(scale).cwiseAbs().maxCoeff();
    const double d1 = f0.cwiseQuotient(scale).cwiseAbs().maxCoeff();
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    const Vec y1 = y0 + h0 * f0;
    const double d2 = (f(t0 + h0, y1) - f0).cwiseQuotient(scale).cwiseAbs().maxCoeff() / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
    return std::min({100.0 * h0, h1, span, opts.h_max});
}

inline Vec implicit_euler_step(const OdeRhs& f, double t1, const Vec& y0, double h, const SolverOptions& opts)
{
    const auto n = y0.size();
    Vec y = y0 + h * f(t1 - h, y0);  // explicit predictor
    for (int it = 0; it < 25; ++it) {
        const Vec fy = f(t1, y);
        const Vec g = y - y0 - h * fy;
        Mat J = Mat::Identity(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double dy = 1e-7 * std::max(1.0, std::abs(y[j]));
            Vec yp = y;
            yp[j] += dy;
            J.col(j) -= h * (f(t1, yp) - fy) / dy;
        }
        const Vec delta = J.partialPivLu().solve(-g);
        y += delta;
        if (error_norm(delta, y, y, opts.atol, opts.rtol) < 1e-3) return y;
    }
    throw IntegrationError("implicit Euler: Newton iteration did not converge", t1);
}

}  // namespace detail

/// Integrate y' = f(t, y) from t0 to t1, reporting every accepted step and
/// landing exactly on each time of `grid` (which must lie in [t0, t1]).
inline StepStats integrate_ode(const OdeRhs& f, Vec y, double t0, double t1, const std::vector<double>& grid,
                               const SolverOptions& opts, const OutputObserver& on_output,
                               const StepObserver& on_step = {})
{
    opts.validate();
    if (!(t1 > t0)) throw std::invalid_argument("integrate: requires t1 > t0");
    StepStats stats;
    double t = t0;
    std::size_t next_out = 0;
    const auto emit_due = [&](double now, const Vec& state) {
        while (next_out < grid.size() && grid[next_out] <= now + 1e-12 * std::max(1.0, std::abs(now))) {
            if (on_output) on_output(grid[next_out], state);
            ++next_out;
        }
    };
    emit_due(t, y);

    if (opts.method == IntegrationMethod::implicit_euler) {
        while (t < t1) {
            double target = next_out < grid.size() ? grid[next_out] : t1;
            double h = std::min(opts.fixed_step, target - t);
            const bool lands = h >= target - t;
            y = detail::implicit_euler_step(f, lands ? target : t + h, y, h, opts);
            t = lands ? target : t + h;
            ++stats.accepted;
            if (on_step) on_step(t, y);
            emit_due(t, y);
            if (stats.accepted > opts.max_steps) throw IntegrationError("integrate: step budget exhausted", t);
        }
        return stats;
    }

    using T = detail::DoPri;
    Vec k1 = f(t, y);
    double h = detail::initial_step(f, t, y, k1, t1 - t0, opts);
    while (t < t1) {
        const double target = next_out < grid.size() ? grid[next_out] : t1;
        bool lands = false;
        double step = std::min(h, opts.h_max);
        if (step >= target - t) {
            step = target - t;
            lands = true;
        }
        if (step < opts.h_min * std::max(1.0, std::abs(t)))
            throw IntegrationError("integrate: step size underflow", t);

        const Vec k2 = f(t + T::c[1] * step, y + step * (T::a21 * k1));
        const Vec k3 = f(t + T::c[2] * step, y + step * (T::a31 * k1 + T::a32 * k2));
        const Vec k4 = f(t + T::c[3] * step, y + step * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3));
        const Vec k5 = f(t + T::c[4] * step, y + step * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4));
        const Vec k6 =
            f(t + step, y + step * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5));
        Vec y_new = y + step * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
        const double t_new = lands ? target : t + step;
        const Vec k7 = f(t_new, y_new);
        const Vec err = step * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
        const double en = detail::error_norm(err, y, y_new, opts.atol, opts.rtol);

        if (!std::isfinite(en)) {
            ++stats.rejected;
            h = 0.25 * step;
            continue;
        }
        if (en <= 1.0) {
            t = t_new;
            y = std::move(y_new);
            k1 = k7;
            ++stats.accepted;
            if (on_step) on_step(t, y);
            emit_due(t, y);
            const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
            // A step shortened to hit an output time says nothing about the
            // admissible size; keep the previous proposal in that case.
            h = lands ? std::max(h, step * factor) : step * factor;
            if (stats.accepted > opts.max_steps) throw IntegrationError("integrate: step budget exhausted", t);
        } else {
            ++stats.rejected;
            h = step * std::clamp(0.9 * std::pow(en, -0.2), 0.2, 1.0);
        }
    }
    return stats;
}

struct Trajectory {
    std::vector<double> times;
    std::vector<ClosedLoopState> states;
    std::vector<Vec> u;
    std::vector<Vec> v;  // sat(u)
    std::vector<Vec> b;  // b(sat(u))
    std::vector<double> V;  // Lyapunov value at output times, NaN when disabled
    StepStats stats;
    bool monitored = false;
    std::size_t monitor_violations = 0;
    double monitor_worst_increase = -std::numeric_limits<double>::infinity();
    std::string notice;

    std::size_t size() const noexcept { return times.size(); }
};

/// Simulate the closed loop from s0 over [t0, t1]. When `monitor` is given it
/// observes every accepted step.
inline Trajectory integrate(const ClosedLoopSystem& sys, const ClosedLoopState& s0, double t0, double t1,
                            const SolverOptions& opts, LyapunovMonitor* monitor = nullptr)
{
    detail::require_same_size(static_cast<Eigen::Index>(s0.size()), static_cast<Eigen::Index>(sys.size()),
                              "integrate initial state");
    const OdeRhs rhs = [&sys](double t, const Vec& y) {
        return closed_loop_field(sys, ClosedLoopState::unpack(y), t).packed();
    };
    Trajectory traj;
    traj.monitored = monitor != nullptr;
    if (monitor) monitor->observe(s0);
    const auto grid = output_grid(t0, t1, opts.output_dt);
    const auto on_output = [&](double t, const Vec& y) {
        ClosedLoopState s = ClosedLoopState::unpack(y);
        Vec u = sys.control(s);
        Vec v = saturate(u, sys.bounds());
        traj.times.push_back(t);
        traj.b.push_back(sys.interconnection()(v));
        traj.u.push_back(std::move(u));
        traj.v.push_back(std::move(v));
        traj.V.push_back(monitor ? monitor->value(s) : std::numeric_limits<double>::quiet_NaN());
        traj.states.push_back(std::move(s));
    };
    StepObserver on_step;
    if (monitor) on_step = [monitor](double, const Vec& y) { monitor->observe(ClosedLoopState::unpack(y)); };
    traj.stats = integrate_ode(rhs, s0.packed(), t0, t1, grid, opts, on_output, on_step);
    if (monitor) {
        traj.monitor_violations = monitor->violations();
        traj.monitor_worst_increase = monitor->worst_increase();
    }
    return traj;
}

namespace detail {

inline void write_number(std::ostream& os, double value)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    os << buf;
}

}  // namespace detail

/// Header `t,x1..xn,u1..un,v1..vn,V`; 17 significant digits, LF line endings,
/// V left empty when not monitored.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj)
{
    const std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
    os << "t";
    for (const char* p : {"x", "u", "v"})
        for (std::size_t i = 1; i <= n; ++i) os << ',' << p << i;
    os << ",V\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        detail::write_number(os, traj.times[k]);
        for (const Vec* col : {&traj.states[k].x, &traj.u[k], &traj.v[k]})
            for (Eigen::Index i = 0; i < col->size(); ++i) {
                os << ',';
                detail::write_number(os, (*col)[i]);
            }
        os << ',';
        if (traj.monitored && std::isfinite(traj.V[k])) detail::write_number(os, traj.V[k]);
        os << '\n';
    }
}

}  // namespace awpi
