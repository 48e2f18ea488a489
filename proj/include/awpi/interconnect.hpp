#pragma once

// The interconnection b : S -> R^n between agents, the linear M-matrix special
// case, and randomized checkers for the monotonicity properties the control
// results rely on.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "awpi/core.hpp"

namespace awpi {

/// Coordinates within this distance outside S are clamped instead of rejected.
inline constexpr double kDomainSlack = 1e-12;

class Interconnection {
public:
    using Map = std::function<Vec(const Vec&)>;

    Interconnection(Map eval, Vec eta, SaturationBounds bounds)
        : eval_(std::move(eval)), eta_(std::move(eta)), bounds_(std::move(bounds))
    {
        detail::require_same_size(eta_.size(), static_cast<Eigen::Index>(bounds_.size()), "Interconnection");
        if (!detail::all_positive(eta_)) throw std::invalid_argument("Interconnection: eta must be > 0");
        if (!eval_) throw std::invalid_argument("Interconnection: empty map");
    }

    std::size_t size() const noexcept { return bounds_.size(); }
    const Vec& eta() const noexcept { return eta_; }
    const SaturationBounds& bounds() const noexcept { return bounds_; }

    /// b(v); v must lie in S up to kDomainSlack.
    Vec operator()(const Vec& v) const
    {
        detail::require_same_size(v.size(), static_cast<Eigen::Index>(size()), "Interconnection");
        if (!bounds_.contains(v, kDomainSlack)) throw DomainError("Interconnection: argument outside S");
        Vec out = eval_(saturate(v, bounds_));
        detail::require_same_size(out.size(), v.size(), "Interconnection result");
        return out;
    }

private:
    Map eval_;
    Vec eta_;
    SaturationBounds bounds_;
};

inline Vec eval_interconnection(const Interconnection& ic, const Vec& v)
{
    return ic(v);
}

/// b(v) = B v with no structural checks; used for counterexample matrices too.
inline Interconnection make_linear_interconnection(Mat B, Vec eta, SaturationBounds bounds)
{
    if (B.rows() != B.cols()) throw DimensionError("linear interconnection: B must be square");
    detail::require_same_size(B.rows(), static_cast<Eigen::Index>(bounds.size()), "linear interconnection");
    return {[B = std::move(B)](const Vec& v) -> Vec { return B * v; }, std::move(eta), std::move(bounds)};
}

/// Positive left eigenvector of an M-matrix, normalized to unit max-entry.
/// Power iteration on (N + I)^T where B = s I - N with N >= 0; returns nullopt
/// when the iteration does not settle on a strictly positive vector.
inline std::optional<Vec> perron_left_vector(const Mat& B, int max_iter = 10000, double tol = 1e-14)
{
    const Eigen::Index n = B.rows();
    if (n == 0 || B.cols() != n) return std::nullopt;
    const double s = B.diagonal().maxCoeff();
    const Mat shifted = (Mat::Identity(n, n) * (s + 1.0) - B).transpose();
    Vec eta = Vec::Ones(n);
    for (int it = 0; it < max_iter; ++it) {
        Vec next = shifted * eta;
        const double scale = next.cwiseAbs().maxCoeff();
        if (!(scale > 0.0) || !std::isfinite(scale)) return std::nullopt;
        next /= scale;
        const double change = (next - eta).cwiseAbs().maxCoeff();
        eta = std::move(next);
        if (change < tol) break;
    }
    if (!(eta.array() > 0.0).all()) return std::nullopt;
    // Confirm eigen-relation eta^T B = lambda eta^T with lambda > 0.
    const Vec lhs = B.transpose() * eta;
    const double lambda = lhs.dot(eta) / eta.squaredNorm();
    if (!(lambda > 0.0) || (lhs - lambda * eta).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + std::abs(lambda)))
        return std::nullopt;
    return eta;
}

/// Linear interconnection b(v) = B v with B an M-matrix.
class LinearMMatrix {
public:
    /// eta defaults to the Perron left vector; `fallback_eta` is used when the
    /// power iteration fails.
    explicit LinearMMatrix(Mat B, std::optional<Vec> fallback_eta = std::nullopt)
    {
        auto eta = perron_left_vector(B);
        if (!eta) eta = std::move(fallback_eta);
        if (!eta) throw std::invalid_argument("LinearMMatrix: no positive left eigenvector found");
        init(std::move(B), std::move(*eta));
    }

    /// Use the supplied weight instead of computing one.
    static LinearMMatrix with_eta(Mat B, Vec eta)
    {
        LinearMMatrix m;
        m.init(std::move(B), std::move(eta));
        return m;
    }

    const Mat& matrix() const noexcept { return B_; }
    const Vec& eta() const noexcept { return eta_; }

    Interconnection interconnection(SaturationBounds bounds) const
    {
        return make_linear_interconnection(B_, eta_, std::move(bounds));
    }

private:
    LinearMMatrix() = default;

    void init(Mat B, Vec eta)
    {
        if (B.rows() != B.cols() || B.rows() == 0) throw DimensionError("LinearMMatrix: B must be square");
        detail::require_same_size(eta.size(), B.rows(), "LinearMMatrix eta");
        for (Eigen::Index i = 0; i < B.rows(); ++i)
            for (Eigen::Index j = 0; j < B.cols(); ++j)
                if (i != j && B(i, j) > 0.0)
                    throw std::invalid_argument("LinearMMatrix: off-diagonal entries must be <= 0");
        const Vec row = B.transpose() * eta;
        if (!(eta.array() > 0.0).all() || !(row.array() > 0.0).all())
            throw std::invalid_argument("LinearMMatrix: eta^T B must be strictly positive");
        B_ = std::move(B);
        eta_ = std::move(eta);
    }

    Mat B_;
    Vec eta_;
};

// ---------------------------------------------------------------------------
// Property checks
// ---------------------------------------------------------------------------

/// Strict inequalities are tested against this margin, scaled by the
/// magnitude of the outputs involved.
inline constexpr double kStrictMargin = 1e-10;

struct Counterexample {
    std::string condition;
    Vec first;   // v_lo / v
    Vec second;  // v_hi / v~
    double value = 0.0;  // quantity that should be strictly positive
};

struct PropertyVerdict {
    std::string property;
    std::size_t samples = 0;
    std::size_t qualifying = 0;  // pairs meeting the hypothesis (Lemma 2)
    std::vector<Counterexample> failures;
    std::vector<Counterexample> marginal;
    bool inconclusive = false;

    bool pass() const { return failures.empty() && !inconclusive; }
};

namespace detail {

inline double output_scale(const Vec& a, const Vec& b)
{
    return std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
}

/// Classify `value` (expected > 0) into the verdict.
inline void record(PropertyVerdict& verdict, const char* condition, double value, double scale,
                   const Vec& first, const Vec& second)
{
    const double margin = kStrictMargin * scale;
    if (value > margin) return;
    Counterexample cx{condition, first, second, value};
    if (value > -margin)
        verdict.marginal.push_back(std::move(cx));
    else
        verdict.failures.push_back(std::move(cx));
}

class BoxSampler {
public:
    BoxSampler(const SaturationBounds& bounds, std::uint64_t seed) : bounds_(bounds), rng_(seed) {}

    double unit() { return unit_(rng_); }
    bool coin(double p = 0.5) { return unit() < p; }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

    Vec point()
    {
        Vec v(bounds_.lower().size());
        for (Eigen::Index i = 0; i < v.size(); ++i)
            v[i] = bounds_.lower()[i] + unit() * (bounds_.upper()[i] - bounds_.lower()[i]);
        return v;
    }

    /// Ordered pair lo <= hi, lo != hi, each coordinate pinned equal with
    /// probability 1/2. Returns the pinned mask alongside.
    std::pair<Vec, Vec> ordered_pair(std::vector<bool>& pinned)
    {
        const auto n = static_cast<std::size_t>(bounds_.lower().size());
        for (;;) {
            Vec lo = point();
            Vec hi = lo;
            pinned.assign(n, false);
            for (std::size_t i = 0; i < n; ++i) {
                const auto k = static_cast<Eigen::Index>(i);
                if (coin()) {
                    pinned[i] = true;
                } else {
                    hi[k] = lo[k] + unit() * (bounds_.upper()[k] - lo[k]);
                    if (hi[k] == lo[k]) pinned[i] = true;
                }
            }
            if (hi != lo) return {std::move(lo), std::move(hi)};
        }
    }

    /// Unordered pair v != vt, coordinates pinned equal with probability 1/2.
    std::pair<Vec, Vec> pair()
    {
        for (;;) {
            Vec v = point();
            Vec vt = point();
            for (Eigen::Index i = 0; i < v.size(); ++i)
                if (coin()) vt[i] = v[i];
            if (vt != v) return {std::move(v), std::move(vt)};
        }
    }

private:
    const SaturationBounds& bounds_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace detail

/// Lemma-1 gap: sum over changed i of eta_i sign(vt_i - v_i)(b_i(vt) - b_i(v))
/// minus sum over unchanged k of eta_k |b_k(vt) - b_k(v)|. Positive when the
/// lemma holds. Throws std::invalid_argument when v == vt.
inline double lemma1_gap(const Interconnection& ic, const Vec& v, const Vec& vt)
{
    if (v == vt) throw std::invalid_argument("lemma1_gap: requires v != vt");
    const Vec db = ic(vt) - ic(v);
    double lhs = 0.0;
    double rhs = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] != vt[i])
            lhs += ic.eta()[i] * sign(vt[i] - v[i]) * db[i];
        else
            rhs += ic.eta()[i] * std::abs(db[i]);
    }
    return lhs - rhs;
}

enum class Lemma2Outcome { skipped, consistent, violated };

/// Lemma 2 on one pair: if b(hi) >= b(lo) then hi > lo strictly.
inline Lemma2Outcome lemma2_pair(const Interconnection& ic, const Vec& lo, const Vec& hi)
{
    if (lo == hi) return Lemma2Outcome::skipped;
    const Vec db = ic(hi) - ic(lo);
    if ((db.array() < 0.0).any()) return Lemma2Outcome::skipped;
    return ((hi - lo).array() > 0.0).all() ? Lemma2Outcome::consistent : Lemma2Outcome::violated;
}

/// Randomized check of the competition (i) and aggregate monotonicity (ii)
/// properties over ordered pairs in S.
inline PropertyVerdict check_assumption1(const Interconnection& ic, std::size_t n_samples, std::uint64_t seed)
{
    if (n_samples < 1) throw std::invalid_argument("check_assumption1: need at least one sample");
    PropertyVerdict verdict;
    verdict.property = "assumption1";
    detail::BoxSampler sampler(ic.bounds(), seed);
    std::vector<bool> pinned;
    for (std::size_t s = 0; s < n_samples; ++s) {
        auto [lo, hi] = sampler.ordered_pair(pinned);
        const Vec b_lo = ic(lo);
        const Vec b_hi = ic(hi);
        const Vec db = b_hi - b_lo;
        const double scale = detail::output_scale(b_lo, b_hi);
        for (std::size_t i = 0; i < pinned.size(); ++i)
            if (pinned[i])
                detail::record(verdict, "(i) b_i(hi) - b_i(lo) < 0 for pinned i",
                               -db[static_cast<Eigen::Index>(i)], scale, lo, hi);
        detail::record(verdict, "(ii) eta^T (b(hi) - b(lo)) > 0", ic.eta().dot(db),
                       scale * ic.eta().sum(), lo, hi);
        ++verdict.samples;
    }
    verdict.qualifying = verdict.samples;
    return verdict;
}

inline PropertyVerdict check_lemma1(const Interconnection& ic, std::size_t n_pairs, std::uint64_t seed)
{
    if (n_pairs < 1) throw std::invalid_argument("check_lemma1: need at least one pair");
    PropertyVerdict verdict;
    verdict.property = "lemma1";
    detail::BoxSampler sampler(ic.bounds(), seed);
    for (std::size_t s = 0; s < n_pairs; ++s) {
        auto [v, vt] = sampler.pair();
        const double scale = detail::output_scale(ic(v), ic(vt)) * ic.eta().sum();
        detail::record(verdict, "signed change dominates unchanged agents", lemma1_gap(ic, v, vt), scale, v, vt);
        ++verdict.samples;
    }
    verdict.qualifying = verdict.samples;
    return verdict;
}

namespace detail {

/// Forward-difference Jacobian of b at v, stepping inward at the upper bound.
inline Mat jacobian(const Interconnection& ic, const Vec& v, const Vec& b)
{
    const auto& box = ic.bounds();
    const auto n = v.size();
    Mat J(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = 1e-7 * (box.upper()[j] - box.lower()[j]);
        Vec vp = v;
        const double step = (v[j] + h <= box.upper()[j]) ? h : -h;
        vp[j] += step;
        J.col(j) = (ic(vp) - b) / step;
    }
    return J;
}

/// Newton solve of b(v) = target from `v`, finite-difference Jacobian. Empty
/// when the iterate leaves S or does not converge.
inline std::optional<Vec> solve_inverse(const Interconnection& ic, Vec v, const Vec& target)
{
    const auto& box = ic.bounds();
    Vec r = ic(v) - target;
    const double tol = 1e-10 * std::max(1.0, target.cwiseAbs().maxCoeff());
    for (int it = 0; it < 30; ++it) {
        if (r.cwiseAbs().maxCoeff() <= tol) return v;
        v -= jacobian(ic, v, r + target).partialPivLu().solve(r);
        if (!v.allFinite() || !box.contains(v, 0.0)) return std::nullopt;
        r = ic(v) - target;
    }
    return std::nullopt;
}

}  // namespace detail

/// Lemma 2 by rejection sampling. Proposals cycle through independent pairs,
/// co-directional pairs (all coordinates moved toward the upper bound by
/// comparable fractions), co-directional pairs with one coordinate held or
/// lowered, and pairs built by inverting b: hi solves b(hi) = b(lo) + delta for
/// a random delta > 0, which meets the hypothesis by construction and keeps
/// the hit rate up in higher dimensions.
inline PropertyVerdict check_lemma2(const Interconnection& ic, std::size_t n_pairs, std::uint64_t seed)
{
    if (n_pairs < 1) throw std::invalid_argument("check_lemma2: need at least one pair");
    PropertyVerdict verdict;
    verdict.property = "lemma2";
    detail::BoxSampler sampler(ic.bounds(), seed);
    const Vec& lower = ic.bounds().lower();
    const Vec& upper = ic.bounds().upper();
    const std::size_t n = ic.size();
    for (std::size_t s = 0; s < n_pairs; ++s) {
        Vec lo = sampler.point();
        Vec hi;
        switch (s % 4) {
        case 0:
            hi = sampler.point();
            break;
        case 3: {
            const Vec b_lo = ic(lo);
            Vec delta(lo.size());
            for (Eigen::Index i = 0; i < delta.size(); ++i) delta[i] = 0.01 + sampler.unit();
            // shrink so the linearised step uses at most half of the headroom
            const Vec d = detail::jacobian(ic, lo, b_lo).partialPivLu().solve(delta);
            double t = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < d.size(); ++i)
                if (d[i] > 0.0) t = std::min(t, 0.5 * (upper[i] - lo[i]) / d[i]);
            if (std::isfinite(t)) delta *= t * (0.05 + 0.95 * sampler.unit());
            auto sol = detail::solve_inverse(ic, lo, b_lo + delta);
            hi = sol ? std::move(*sol) : lo;
            break;
        }
        default: {
            const double t = sampler.unit();
            hi = lo;
            for (Eigen::Index i = 0; i < lo.size(); ++i)
                hi[i] = lo[i] + t * (0.5 + sampler.unit()) * (upper[i] - lo[i]);
            hi = hi.cwiseMin(upper);
            if (s % 4 == 2) {
                const auto k = static_cast<Eigen::Index>(sampler.index(n));
                hi[k] = sampler.coin() ? lo[k] : lo[k] - sampler.unit() * (lo[k] - lower[k]);
            }
            break;
        }
        }
        ++verdict.samples;
        const auto outcome = lemma2_pair(ic, lo, hi);
        if (outcome == Lemma2Outcome::skipped) continue;
        ++verdict.qualifying;
        if (outcome == Lemma2Outcome::violated) {
            const Vec b_lo = ic(lo);
            const Vec b_hi = ic(hi);
            Counterexample cx{"b(hi) >= b(lo) but hi > lo fails", lo, hi, (hi - lo).minCoeff()};
            // A hypothesis met only within float noise is not a counterexample.
            if ((b_hi - b_lo).minCoeff() <= kStrictMargin * detail::output_scale(b_lo, b_hi))
                verdict.marginal.push_back(std::move(cx));
            else
                verdict.failures.push_back(std::move(cx));
        }
    }
    verdict.inconclusive = verdict.qualifying == 0;
    return verdict;
}

}  // namespace awpi
