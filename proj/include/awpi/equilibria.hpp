#pragma once

// Closed-loop equilibria of both controllers, direct-search oracles for the
// optimal open-loop equilibria, and the verification runs that compare them.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "awpi/control.hpp"
#include "awpi/core.hpp"
#include "awpi/interconnect.hpp"
#include "awpi/sim.hpp"

namespace awpi {

struct EquilibriumReport {
    Vec u0;
    Vec x0;
    Vec z0;
    double residual = 0.0;  // max(|dx|, |dz|) of the closed-loop field
    double cost_l1w = 0.0;  // sum_i eta_i a_i |x0_i|
    double cost_linf = 0.0; // max_i |x0_i|
    long iterations = 0;
    double relax = 0.0;

    ClosedLoopState state() const { return {x0, z0}; }
};

struct NoEquilibrium {
    double best_residual = 0.0;
    Vec best_u;
    long iterations = 0;
    std::string reason;
};

inline double weighted_l1_cost(const Vec& x, const Vec& a, const Vec& eta)
{
    return eta.cwiseProduct(a).dot(x.cwiseAbs());
}

inline double linf_cost(const Vec& x)
{
    return x.cwiseAbs().maxCoeff();
}

/// Open-loop equilibrium state x = diag(a)^{-1} (b(v) + w).
inline Vec open_loop_state(const Interconnection& ic, const AgentEnsemble& agents, const Vec& v)
{
    return (ic(v) + agents.w()).cwiseQuotient(agents.a());
}

/// Largest observed ||b(v) - b(v')||_inf / ||v - v'||_inf over random pairs.
inline double estimate_lipschitz(const Interconnection& ic, std::size_t pairs = 64, std::uint64_t seed = 0)
{
    detail::BoxSampler sampler(ic.bounds(), seed);
    double L = 0.0;
    for (std::size_t k = 0; k < pairs; ++k) {
        const Vec v = sampler.point();
        Vec vt = v;
        // Single-coordinate moves catch the diagonal slope; full moves the rest.
        if (k % 2 == 0) {
            const auto i = static_cast<Eigen::Index>(sampler.index(ic.size()));
            vt[i] = ic.bounds().lower()[i] + sampler.unit() * (ic.bounds().upper()[i] - ic.bounds().lower()[i]);
        } else {
            vt = sampler.point();
        }
        const double dv = (vt - v).cwiseAbs().maxCoeff();
        if (dv < 1e-9) continue;
        L = std::max(L, (ic(vt) - ic(v)).cwiseAbs().maxCoeff() / dv);
    }
    return L;
}

namespace detail {

inline EquilibriumReport finish_report(const ClosedLoopSystem& sys, Vec u0, long iterations, double relax)
{
    EquilibriumReport rep;
    const Vec v = saturate(u0, sys.bounds());
    rep.x0 = (sys.interconnection()(v) + sys.agents().w()).cwiseQuotient(sys.agents().a());
    rep.z0 = -(u0 + sys.gains().kP.cwiseProduct(rep.x0)).cwiseQuotient(sys.gains().kI);
    rep.u0 = std::move(u0);
    const StateDerivative d = closed_loop_field(sys, rep.state(), 0.0);
    rep.residual = std::max(d.dx.cwiseAbs().maxCoeff(), d.dz.cwiseAbs().maxCoeff());
    rep.cost_l1w = weighted_l1_cost(rep.x0, sys.agents().a(), sys.interconnection().eta());
    rep.cost_linf = linf_cost(rep.x0);
    rep.iterations = iterations;
    rep.relax = relax;
    return rep;
}

}  // namespace detail

/// Fixed-point iteration u <- u - relax * (b(sat u) + w + diag(a kA) dz(u)).
/// relax <= 0 selects 0.5 / (L + max_i a_i kA_i) with L a sampled Lipschitz
/// estimate of b; relax is halved whenever the iteration diverges.
inline EquilibriumReport find_equilibrium_decentralized(const ClosedLoopSystem& sys, double relax = 0.0,
                                                        double tol = 1e-13, long max_iter = 2'000'000)
{
    if (sys.mode() != ControllerMode::decentralized)
        throw std::invalid_argument("find_equilibrium_decentralized: system is not decentralized");
    if (!(tol > 0.0)) throw std::invalid_argument("find_equilibrium_decentralized: tol must be > 0");
    const Vec& a = sys.agents().a();
    const Vec& w = sys.agents().w();
    const Vec akA = a.cwiseProduct(sys.gains().kA);
    if (!(relax > 0.0)) relax = 0.5 / (estimate_lipschitz(sys.interconnection()) + akA.maxCoeff());

    const auto F = [&](const Vec& u) {
        const Vec v = saturate(u, sys.bounds());
        return Vec(sys.interconnection()(v) + w + akA.cwiseProduct(u - v));
    };
    const auto n = static_cast<Eigen::Index>(sys.size());
    long total = 0;
    double last_update = std::numeric_limits<double>::infinity();
    for (int halving = 0; halving <= 30; ++halving, relax *= 0.5) {
        Vec u = Vec::Zero(n);
        const double start = F(u).cwiseAbs().maxCoeff();
        bool diverged = false;
        for (long it = 0; it < max_iter; ++it, ++total) {
            const Vec step = relax * F(u);
            u -= step;
            last_update = step.cwiseAbs().maxCoeff();
            if (!u.allFinite() || last_update > 1e6 * (1.0 + start) * relax) {
                diverged = true;
                break;
            }
            if (last_update < tol) return detail::finish_report(sys, std::move(u), total + 1, relax);
        }
        if (!diverged) break;
    }
    std::ostringstream os;
    os << "find_equilibrium_decentralized: no convergence after " << total << " iterations (last update "
       << last_update << ")";
    throw SolverError(os.str(), last_update);
}

/// Damped iteration on G(u) = b(sat u) + w + a kC 1^T dz(u), whose zeros are the
/// coordinating equilibria. Reports NoEquilibrium when the residual stalls.
inline std::variant<EquilibriumReport, NoEquilibrium> find_equilibrium_coordinating(const ClosedLoopSystem& sys,
                                                                                   double tol = 1e-12,
                                                                                   long max_iter = 200'000)
{
    if (sys.mode() != ControllerMode::coordinating)
        throw std::invalid_argument("find_equilibrium_coordinating: system is not coordinating");
    const Vec& a = sys.agents().a();
    const Vec& w = sys.agents().w();
    const double kC = sys.gains().kC;
    const auto n = static_cast<Eigen::Index>(sys.size());
    const auto G = [&](const Vec& u) {
        const Vec v = saturate(u, sys.bounds());
        return Vec(sys.interconnection()(v) + w + a * (kC * (u - v).sum()));
    };
    double relax = 0.5 / (estimate_lipschitz(sys.interconnection()) + static_cast<double>(n) * a.maxCoeff() * kC);

    NoEquilibrium best;
    best.best_residual = std::numeric_limits<double>::infinity();
    best.best_u = Vec::Zero(n);
    long total = 0;
    for (int attempt = 0; attempt < 6; ++attempt, relax *= 0.5) {
        Vec u = Vec::Zero(n);
        double attempt_best = std::numeric_limits<double>::infinity();
        long since_improvement = 0;
        for (long it = 0; it < max_iter; ++it, ++total) {
            const Vec g = G(u);
            const double res = g.cwiseAbs().maxCoeff();
            if (!std::isfinite(res)) break;
            if (res < best.best_residual) {
                best.best_residual = res;
                best.best_u = u;
            }
            if (res < tol) return detail::finish_report(sys, std::move(u), total + 1, relax);
            if (res < attempt_best * (1.0 - 1e-9)) {
                attempt_best = res;
                since_improvement = 0;
            } else if (++since_improvement > 20'000) {
                break;  // stalled
            }
            u -= relax * g;
        }
    }
    best.iterations = total;
    std::ostringstream os;
    os << "residual stalled at " << best.best_residual << " (no u with x parallel to 1 found)";
    best.reason = os.str();
    return best;
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

enum class CostKind { weighted_l1, linf };

inline const char* to_string(CostKind c)
{
    return c == CostKind::weighted_l1 ? "l1w" : "linf";
}

struct OracleOptions {
    int grid_points = 9;         // per axis, used when n <= grid_max_dim
    std::size_t grid_max_dim = 4;
    std::size_t lhs_points = 2000;
    std::size_t polish_starts = 3;
    long max_evaluations = 20'000;  // per Nelder-Mead run
    int restarts = 8;
    double ftol = 1e-14;
    std::uint64_t seed = 0;
    std::vector<Vec> extra_starts;  // e.g. the previous solution
    bool refine = true;             // Gauss-Newton refinement after the direct search
};

struct OracleResult {
    Vec v;
    Vec x;
    double cost = 0.0;
    long evaluations = 0;
};

inline double open_loop_cost(const Interconnection& ic, const AgentEnsemble& agents, const Vec& v, CostKind kind)
{
    const Vec x = open_loop_state(ic, agents, v);
    return kind == CostKind::weighted_l1 ? weighted_l1_cost(x, agents.a(), ic.eta()) : linf_cost(x);
}

namespace detail {

/// Nelder-Mead with every trial point projected onto the box. Coefficients
/// scale with dimension (Gao and Han), which keeps the simplex from collapsing
/// for n in the tens.
class BoxNelderMead {
public:
    BoxNelderMead(std::function<double(const Vec&)> f, const SaturationBounds& box) : f_(std::move(f)), box_(box) {}

    long evaluations() const noexcept { return evals_; }

    std::pair<Vec, double> minimize(const Vec& start, double size, long max_evals, double ftol)
    {
        const auto n = start.size();
        const double dn = static_cast<double>(std::max<Eigen::Index>(n, 2));
        const double expand = 1.0 + 2.0 / dn, contract = 0.75 - 0.5 / dn, shrink = 1.0 - 1.0 / dn;
        std::vector<Vec> pts;
        std::vector<double> vals;
        pts.push_back(project(start));
        vals.push_back(eval(pts.back()));
        const Vec width = box_.upper() - box_.lower();
        for (Eigen::Index i = 0; i < n; ++i) {
            Vec p = pts.front();
            const double d = size * width[i];
            p[i] += (p[i] + d <= box_.upper()[i]) ? d : -d;
            pts.push_back(project(p));
            vals.push_back(eval(pts.back()));
        }
        const long budget = evals_ + max_evals;
        std::vector<std::size_t> order(pts.size());
        while (evals_ < budget) {
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](auto l, auto r) { return vals[l] < vals[r]; });
            const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
            double diam = 0.0;
            for (const auto& p : pts) diam = std::max(diam, (p - pts[best]).cwiseAbs().maxCoeff());
            if (vals[worst] - vals[best] <= ftol * (1.0 + std::abs(vals[best])) && diam < 1e-10) break;
            if (diam < 1e-14) break;

            Vec centroid = Vec::Zero(n);
            for (std::size_t k = 0; k < pts.size(); ++k)
                if (k != worst) centroid += pts[k];
            centroid /= static_cast<double>(n);

            const Vec xr = project(centroid + (centroid - pts[worst]));
            const double fr = eval(xr);
            if (fr < vals[best]) {
                const Vec xe = project(centroid + expand * (centroid - pts[worst]));
                const double fe = eval(xe);
                if (fe < fr) {
                    pts[worst] = xe;
                    vals[worst] = fe;
                } else {
                    pts[worst] = xr;
                    vals[worst] = fr;
                }
            } else if (fr < vals[second]) {
                pts[worst] = xr;
                vals[worst] = fr;
            } else {
                const bool outside = fr < vals[worst];
                const Vec xc = outside ? project(centroid + contract * (xr - centroid))
                                       : project(centroid + contract * (pts[worst] - centroid));
                const double fc = eval(xc);
                if (fc < (outside ? fr : vals[worst])) {
                    pts[worst] = xc;
                    vals[worst] = fc;
                } else {
                    for (std::size_t k = 0; k < pts.size(); ++k) {
                        if (k == best) continue;
                        pts[k] = project(pts[best] + shrink * (pts[k] - pts[best]));
                        vals[k] = eval(pts[k]);
                    }
                }
            }
        }
        const auto it = std::min_element(vals.begin(), vals.end());
        const auto k = static_cast<std::size_t>(it - vals.begin());
        return {pts[k], vals[k]};
    }

private:
    Vec project(const Vec& p) const { return saturate(p, box_); }

    double eval(const Vec& p)
    {
        ++evals_;
        return f_(p);
    }

    std::function<double(const Vec&)> f_;
    const SaturationBounds& box_;
    long evals_ = 0;
};

inline std::vector<Vec> candidate_points(const SaturationBounds& box, const OracleOptions& opts)
{
    const auto n = static_cast<Eigen::Index>(box.size());
    std::vector<Vec> pts;
    if (box.size() <= opts.grid_max_dim) {
        const int m = std::max(2, opts.grid_points);
        std::vector<int> idx(static_cast<std::size_t>(n), 0);
        for (;;) {
            Vec p(n);
            for (Eigen::Index i = 0; i < n; ++i)
                p[i] = box.lower()[i] + (box.upper()[i] - box.lower()[i]) * idx[static_cast<std::size_t>(i)] / (m - 1);
            pts.push_back(std::move(p));
            std::size_t d = 0;
            while (d < idx.size() && ++idx[d] == m) idx[d++] = 0;
            if (d == idx.size()) break;
        }
    } else {
        // Latin hypercube: one point per stratum on every axis.
        std::mt19937_64 rng(opts.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const std::size_t m = std::max<std::size_t>(1, opts.lhs_points);
        std::vector<std::vector<std::size_t>> perms(static_cast<std::size_t>(n));
        for (auto& p : perms) {
            p.resize(m);
            std::iota(p.begin(), p.end(), 0);
            std::shuffle(p.begin(), p.end(), rng);
        }
        for (std::size_t k = 0; k < m; ++k) {
            Vec p(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double s = (static_cast<double>(perms[static_cast<std::size_t>(i)][k]) + unit(rng)) /
                                 static_cast<double>(m);
                p[i] = box.lower()[i] + s * (box.upper()[i] - box.lower()[i]);
            }
            pts.push_back(std::move(p));
        }
        pts.push_back(box.upper());
        pts.push_back(box.lower());
    }
    return pts;
}

/// dx/dv by forward differences (backward at the upper face).
inline Mat state_jacobian(const std::function<Vec(const Vec&)>& xmap, const Vec& v, const Vec& x,
                          const SaturationBounds& box, long& evals)
{
    const auto n = v.size();
    Mat J(x.size(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = 1e-7 * (box.upper()[j] - box.lower()[j]);
        Vec vp = v;
        const double step = (v[j] + h <= box.upper()[j]) ? h : -h;
        vp[j] += step;
        J.col(j) = (xmap(vp) - x) / step;
        ++evals;
    }
    return J;
}

/// Elementwise residual r_i(x_i) and its derivative.
using ElementResidual = std::function<std::pair<double, double>(Eigen::Index, double)>;

/// Projected Levenberg-Marquardt on 1/2 ||r(x(v))||^2 over the box; coordinates
/// pinned at a face with the gradient pointing outward are frozen. Returns the
/// final max |r_i|.
inline double projected_gauss_newton(const std::function<Vec(const Vec&)>& xmap, const SaturationBounds& box,
                                     const ElementResidual& res, Vec& v, int max_iter, double tol, long& evals)
{
    const auto n = v.size();
    const auto residual = [&](const Vec& x, Vec& r, Vec* d) {
        r.resize(x.size());
        if (d) d->resize(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const auto [ri, di] = res(i, x[i]);
            r[i] = ri;
            if (d) (*d)[i] = di;
        }
    };
    Vec x = xmap(v);
    ++evals;
    Vec r, d;
    residual(x, r, &d);
    double f = 0.5 * r.squaredNorm();
    double lambda = 1e-3;
    for (int it = 0; it < max_iter; ++it) {
        if (r.cwiseAbs().maxCoeff() <= tol) break;
        const Mat J = d.asDiagonal() * state_jacobian(xmap, v, x, box, evals);
        const Vec g = J.transpose() * r;
        std::vector<Eigen::Index> free;
        for (Eigen::Index j = 0; j < n; ++j) {
            const bool at_lo = v[j] <= box.lower()[j] && g[j] > 0.0;
            const bool at_hi = v[j] >= box.upper()[j] && g[j] < 0.0;
            if (!at_lo && !at_hi) free.push_back(j);
        }
        if (free.empty()) break;
        const auto m = static_cast<Eigen::Index>(free.size());
        Mat Jf(J.rows(), m);
        Vec gf(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            Jf.col(k) = J.col(free[static_cast<std::size_t>(k)]);
            gf[k] = g[free[static_cast<std::size_t>(k)]];
        }
        const Mat H = Jf.transpose() * Jf;
        bool accepted = false;
        for (int tries = 0; tries < 12 && !accepted; ++tries, lambda *= 4.0) {
            Mat A = H;
            A.diagonal() += lambda * (H.diagonal().array() + 1e-12).matrix();
            const Vec step = A.ldlt().solve(-gf);
            Vec vn = v;
            for (Eigen::Index k = 0; k < m; ++k) vn[free[static_cast<std::size_t>(k)]] += step[k];
            vn = saturate(vn, box);
            const Vec xn = xmap(vn);
            ++evals;
            Vec rn;
            residual(xn, rn, nullptr);
            const double fn = 0.5 * rn.squaredNorm();
            if (fn < f) {
                accepted = true;
                const bool stalled = f - fn <= 1e-12 * f;
                v = std::move(vn);
                x = xn;
                residual(x, r, &d);
                f = fn;
                lambda = std::max(lambda * 0.1, 1e-12);
                if (stalled) return r.cwiseAbs().maxCoeff();
            }
        }
        if (!accepted) break;
    }
    return r.cwiseAbs().maxCoeff();
}

/// Smallest level c with some v putting every |x_i(v)| <= c, by bisection on
/// c with a hinge-residual feasibility solve at each level. Near the optimum
/// the feasible set is thin, so a level counts as reached once the hinge
/// residual is small; the reported cost is always the true max |x_i(v)|.
inline void refine_linf(const std::function<Vec(const Vec&)>& xmap, const SaturationBounds& box, Vec& v,
                        double& cost, long& evals)
{
    const auto actual = [&](const Vec& p) {
        ++evals;
        return xmap(p).cwiseAbs().maxCoeff();
    };
    Vec best_v = v;
    double best = actual(v);
    const auto feasible = [&](double c, Vec& trial) {
        const ElementResidual hinge = [c](Eigen::Index, double xi) -> std::pair<double, double> {
            if (xi > c) return {xi - c, 1.0};
            if (xi < -c) return {xi + c, 1.0};
            return {0.0, 0.0};
        };
        const bool ok =
            projected_gauss_newton(xmap, box, hinge, trial, 100, 1e-13 * (1.0 + c), evals) <= 1e-9 * (1.0 + c);
        if (ok) {
            const double a = actual(trial);
            if (a < best) {
                best = a;
                best_v = trial;
            }
        }
        return ok;
    };
    double hi = best;
    double lo = 0.0;
    // Step down geometrically until infeasible, then bisect.
    double gap = 1e-3 * hi;
    while (gap > 0.0 && hi - gap > lo) {
        Vec trial = best_v;
        if (!feasible(hi - gap, trial)) {
            lo = hi - gap;
            break;
        }
        hi = std::min(hi - gap, best);
        gap *= 4.0;
        if (gap >= hi) {
            Vec zero_trial = best_v;
            if (feasible(0.0, zero_trial)) hi = 0.0;
            break;
        }
    }
    while (hi - lo > 1e-11 * (1.0 + hi)) {
        const double c = 0.5 * (lo + hi);
        Vec trial = best_v;
        if (feasible(c, trial))
            hi = std::min(c, best);
        else
            lo = c;
    }
    if (best < cost) {
        v = best_v;
        cost = best;
    }
}

/// Iteratively reweighted least squares for sum_i omega_i |x_i(v)|.
inline void refine_l1(const std::function<Vec(const Vec&)>& xmap, const Vec& omega, const SaturationBounds& box,
                      Vec& v, double& cost, long& evals)
{
    const auto l1 = [&](const Vec& x) { return omega.dot(x.cwiseAbs()); };
    Vec cur = v;
    Vec x = xmap(cur);
    ++evals;
    double eps = 1e-2 * (1.0 + x.cwiseAbs().maxCoeff());
    for (int outer = 0; outer < 40 && eps > 1e-13; ++outer) {
        Vec scale(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) scale[i] = std::sqrt(omega[i] / std::max(std::abs(x[i]), eps));
        const ElementResidual weighted = [&scale](Eigen::Index i, double xi) -> std::pair<double, double> {
            return {scale[i] * xi, scale[i]};
        };
        projected_gauss_newton(xmap, box, weighted, cur, 8, 0.0, evals);
        x = xmap(cur);
        ++evals;
        const double c = l1(x);
        if (c < cost) {
            cost = c;
            v = cur;
        }
        eps *= 0.2;
    }
}


}  // namespace detail

/// Minimize the open-loop equilibrium cost over v in S: coarse scan (grid for
/// small n, Latin hypercube otherwise), Nelder-Mead polish with restarts from
/// the best few candidates, then a local Gauss-Newton refinement (level
/// bisection for L-infinity, reweighted least squares for L1).
inline OracleResult oracle_minimize(const Interconnection& ic, const AgentEnsemble& agents, CostKind kind,
                                    const OracleOptions& opts = {})
{
    detail::require_same_size(static_cast<Eigen::Index>(agents.size()), static_cast<Eigen::Index>(ic.size()),
                              "oracle");
    const auto f = [&](const Vec& v) { return open_loop_cost(ic, agents, v, kind); };
    std::vector<Vec> cands = detail::candidate_points(ic.bounds(), opts);
    for (const auto& s : opts.extra_starts) cands.push_back(saturate(s, ic.bounds()));
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(cands.size());
    for (std::size_t k = 0; k < cands.size(); ++k) scored.emplace_back(f(cands[k]), k);
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });

    detail::BoxNelderMead nm(f, ic.bounds());
    Vec best_v = cands[scored.front().second];
    double best = scored.front().first;
    const std::size_t starts = std::min(opts.polish_starts, scored.size());
    std::vector<std::size_t> start_idx;
    for (std::size_t k = 0; k < starts; ++k) start_idx.push_back(scored[k].second);
    // Warm starts are always polished.
    for (std::size_t k = cands.size() - opts.extra_starts.size(); k < cands.size(); ++k)
        if (std::find(start_idx.begin(), start_idx.end(), k) == start_idx.end()) start_idx.push_back(k);

    for (auto k : start_idx) {
        Vec v = cands[k];
        double fv = f(v);
        double size = 0.1;
        for (int r = 0; r < opts.restarts; ++r) {
            auto [nv, nf] = nm.minimize(v, size, opts.max_evaluations, opts.ftol);
            const bool improved = nf < fv - opts.ftol * (1.0 + std::abs(fv));
            if (nf < fv) {
                v = std::move(nv);
                fv = nf;
            }
            if (!improved) {
                if (size < 1e-3) break;
                size *= 0.1;
            }
        }
        if (fv < best) {
            best = fv;
            best_v = v;
        }
    }
    long evals = nm.evaluations() + static_cast<long>(cands.size());
    if (opts.refine) {
        const std::function<Vec(const Vec&)> xmap = [&](const Vec& v) { return open_loop_state(ic, agents, v); };
        if (kind == CostKind::linf)
            detail::refine_linf(xmap, ic.bounds(), best_v, best, evals);
        else
            detail::refine_l1(xmap, ic.eta().cwiseProduct(agents.a()), ic.bounds(), best_v, best, evals);
    }
    OracleResult res;
    res.x = open_loop_state(ic, agents, best_v);
    res.v = std::move(best_v);
    res.cost = best;
    res.evaluations = evals;
    return res;
}

/// min_v sum_i eta_i a_i |x_i(v)|.
inline OracleResult oracle_weighted_l1(const Interconnection& ic, const AgentEnsemble& agents,
                                       const OracleOptions& opts = {})
{
    return oracle_minimize(ic, agents, CostKind::weighted_l1, opts);
}

/// min_v max_i |x_i(v)|.
inline OracleResult oracle_linf(const Interconnection& ic, const AgentEnsemble& agents, const OracleOptions& opts = {})
{
    return oracle_minimize(ic, agents, CostKind::linf, opts);
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// Machine-readable key/value fields plus human-readable violation lines.
struct VerificationVerdict {
    std::string name;
    bool pass = false;
    std::vector<std::pair<std::string, std::string>> fields;
    std::vector<std::string> violations;
    std::vector<std::string> notes;

    template <typename T>
    void set(const std::string& key, const T& value)
    {
        std::ostringstream os;
        os.precision(17);
        os << value;
        fields.emplace_back(key, os.str());
    }

    const std::string* get(const std::string& key) const
    {
        for (const auto& [k, v] : fields)
            if (k == key) return &v;
        return nullptr;
    }
};

inline void write_verdict(std::ostream& os, const VerificationVerdict& verdict)
{
    os << "verdict." << verdict.name << ".pass=" << (verdict.pass ? "true" : "false") << '\n';
    for (const auto& [k, v] : verdict.fields) os << "verdict." << verdict.name << '.' << k << '=' << v << '\n';
    os << "# " << verdict.name << ": " << (verdict.pass ? "PASS" : "FAIL") << '\n';
    for (const auto& v : verdict.violations) os << "#   violation: " << v << '\n';
    for (const auto& n : verdict.notes) os << "#   note: " << n << '\n';
}

struct OptimalityOptions {
    OracleOptions oracle;
    std::size_t samples = 1000;
    std::uint64_t seed = 0;
    double tolerance = 1e-5;  // relative to 1 + cost
};

/// Compare the closed-loop equilibrium cost with the oracle minimum and with
/// randomly sampled alternative open-loop equilibria, which must all be
/// strictly costlier.
inline VerificationVerdict verify_optimality(const ClosedLoopSystem& sys, const EquilibriumReport& report,
                                             CostKind kind, const OptimalityOptions& opts = {})
{
    VerificationVerdict verdict;
    verdict.name = std::string("optimality_") + to_string(kind);
    if (!(report.residual < 1e-9)) {
        verdict.violations.push_back("equilibrium residual too large");
        verdict.set("residual", report.residual);
        return verdict;
    }
    const auto& ic = sys.interconnection();
    const auto& agents = sys.agents();
    const double cl = kind == CostKind::weighted_l1 ? report.cost_l1w : report.cost_linf;
    const OracleResult oracle = oracle_minimize(ic, agents, kind, opts.oracle);
    const double margin = oracle.cost - cl;
    verdict.set("closed_loop_cost", cl);
    verdict.set("oracle_cost", oracle.cost);
    verdict.set("margin", margin);
    if (cl > oracle.cost + opts.tolerance * (1.0 + std::abs(cl))) {
        std::ostringstream os;
        os << "closed-loop cost " << cl << " exceeds oracle minimum " << oracle.cost;
        verdict.violations.push_back(os.str());
    }

    const Vec v0 = saturate(report.u0, sys.bounds());
    detail::BoxSampler sampler(sys.bounds(), opts.seed);
    std::size_t tested = 0, cheaper = 0, marginal = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < opts.samples; ++k) {
        const Vec v = sampler.point();
        if (v == v0) continue;
        ++tested;
        const double gap = open_loop_cost(ic, agents, v, kind) - cl;
        min_gap = std::min(min_gap, gap);
        if (gap > 0.0) continue;
        if (gap > -1e-9 * (1.0 + std::abs(cl))) {
            ++marginal;
        } else {
            ++cheaper;
            if (cheaper <= 5) {
                std::ostringstream os;
                os << "sampled equilibrium cheaper by " << -gap;
                verdict.violations.push_back(os.str());
            }
        }
    }
    verdict.set("samples", tested);
    verdict.set("samples_cheaper", cheaper);
    verdict.set("samples_marginal", marginal);
    verdict.set("min_sample_gap", min_gap);
    verdict.pass = verdict.violations.empty();
    return verdict;
}

struct ConvergenceOptions {
    std::size_t starts = 20;
    std::uint64_t seed = 0;
    double t_max = 200.0;
    double tol = 1e-4;
    double box_scale = 10.0;  // initial states drawn from ||.||_inf <= box_scale * equilibrium magnitude
    bool force = false;
    SolverOptions solver;
};

/// Equilibrium for either controller, or NoEquilibrium.
inline std::variant<EquilibriumReport, NoEquilibrium> find_equilibrium(const ClosedLoopSystem& sys)
{
    if (sys.mode() == ControllerMode::decentralized) return find_equilibrium_decentralized(sys);
    return find_equilibrium_coordinating(sys);
}

/// b(upper) + w > 0 > b(lower) + w: exact rejection is feasible inside S.
inline bool rejectable(const ClosedLoopSystem& sys)
{
    const Vec& w = sys.agents().w();
    const Vec hi = sys.interconnection()(sys.bounds().upper()) + w;
    const Vec lo = sys.interconnection()(sys.bounds().lower()) + w;
    return (hi.array() > 0.0).all() && (lo.array() < 0.0).all();
}

/// Integrate from random initial states and require every run to end at the
/// computed equilibrium with no Lyapunov increase beyond slack. In coordinating
/// mode with a rejectable w the dead-zone must also vanish over the trailing
/// 20% of each run.
inline VerificationVerdict verify_global_convergence(const ClosedLoopSystem& sys, const ConvergenceOptions& opts = {})
{
    VerificationVerdict verdict;
    verdict.name = "stability";
    const TuningReport tuning = validate_tuning(sys.agents(), sys.gains());
    verdict.set("tuning_pass", tuning.pass() ? "true" : "false");
    if (!tuning.pass()) {
        if (!opts.force) {
            verdict.violations.push_back("tuning rules violated (use force to run anyway)");
            return verdict;
        }
        verdict.notes.push_back("tuning rules violated; running under force");
    }
    auto found = find_equilibrium(sys);
    if (const auto* none = std::get_if<NoEquilibrium>(&found)) {
        verdict.violations.push_back("no closed-loop equilibrium: " + none->reason);
        return verdict;
    }
    const auto& eq = std::get<EquilibriumReport>(found);
    verdict.set("equilibrium_residual", eq.residual);

    const double magnitude = std::max({1.0, eq.x0.cwiseAbs().maxCoeff(), eq.z0.cwiseAbs().maxCoeff()});
    const double half_width = opts.box_scale * magnitude;
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const auto n = static_cast<Eigen::Index>(sys.size());
    const bool check_tail = sys.mode() == ControllerMode::coordinating && rejectable(sys);

    double worst_error = 0.0;
    double worst_dz = 0.0;
    std::size_t monitor_violations = 0;
    bool monitored = true;
    for (std::size_t s = 0; s < opts.starts; ++s) {
        ClosedLoopState s0{Vec(n), Vec(n)};
        for (Eigen::Index i = 0; i < n; ++i) s0.x[i] = half_width * unit(rng);
        for (Eigen::Index i = 0; i < n; ++i) s0.z[i] = half_width * unit(rng);
        MonitorChoice mc = make_lyapunov_monitor(sys, eq.state());
        if (!mc.monitor) {
            monitored = false;
            if (s == 0) verdict.notes.push_back(mc.notice);
        }
        SolverOptions so = opts.solver;
        so.output_dt = std::max(so.output_dt, opts.t_max / 400.0);
        const Trajectory traj = integrate(sys, s0, 0.0, opts.t_max, so, mc.monitor ? &*mc.monitor : nullptr);
        const ClosedLoopState& end = traj.states.back();
        const double err = std::max((end.x - eq.x0).cwiseAbs().maxCoeff(), (end.z - eq.z0).cwiseAbs().maxCoeff());
        worst_error = std::max(worst_error, err);
        if (err > opts.tol) {
            std::ostringstream os;
            os << "start " << s << ": terminal state off equilibrium by " << err;
            verdict.violations.push_back(os.str());
        }
        if (mc.monitor && traj.monitor_violations > 0) {
            monitor_violations += traj.monitor_violations;
            std::ostringstream os;
            os << "start " << s << ": Lyapunov increase beyond slack (" << traj.monitor_violations
               << " steps, worst " << traj.monitor_worst_increase << ")";
            verdict.violations.push_back(os.str());
        }
        if (check_tail) {
            const double t_tail = 0.8 * opts.t_max;
            for (std::size_t k = 0; k < traj.size(); ++k) {
                if (traj.times[k] < t_tail) continue;
                worst_dz = std::max(worst_dz, (traj.u[k] - traj.v[k]).cwiseAbs().maxCoeff());
            }
        }
    }
    if (check_tail) {
        verdict.set("trailing_max_deadzone", worst_dz);
        if (worst_dz > 1e-12) verdict.violations.push_back("dead-zone nonzero over the trailing 20% of a run");
    }
    verdict.set("starts", opts.starts);
    verdict.set("worst_terminal_error", worst_error);
    verdict.set("monitored", monitored ? "true" : "false");
    verdict.set("monitor_violations", monitor_violations);
    verdict.pass = verdict.violations.empty();
    return verdict;
}

}  // namespace awpi
