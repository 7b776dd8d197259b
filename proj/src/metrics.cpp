#include "stiffkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "stiffkit/errors.hpp"
#include "stiffkit/parallel.hpp"

namespace stiffkit::metrics {

namespace {

struct StageSpan {
    std::size_t index;  // stage index
    std::size_t first;  // first state of the stage
    std::size_t last;   // last state of the stage (inclusive)
};

std::vector<StageSpan> stage_spans(const ode::Trajectory& traj)
{
    std::vector<StageSpan> spans;
    const auto& b = traj.stage_boundaries;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const std::size_t first = b[i];
        const std::size_t last = (i + 1 < b.size()) ? b[i + 1] - 1 : traj.states.size() - 1;
        spans.push_back({i, first, last});
    }
    return spans;
}

// One (relative, absolute) exceedance candidate. rel = v / mu - 1, or +inf
// when mu == 0 (the relative arm is then vacuous since v >= 0 = mu(1+m1)).
struct ExceedancePair {
    double rel;
    double value;
};

std::vector<std::vector<ExceedancePair>> exceedance_pairs(const ProfileSet& profiles)
{
    std::vector<std::vector<ExceedancePair>> out(profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        for (const StageStats& s : profiles[i]) {
            if (s.degenerate) continue;
            for (double v : s.nsi_values) {
                const double rel = s.mu > 0.0 ? v / s.mu - 1.0 : std::numeric_limits<double>::infinity();
                out[i].push_back({rel, v});
            }
        }
    }
    return out;
}

bool exceeds(const std::vector<ExceedancePair>& pairs, ThresholdPair m)
{
    for (const ExceedancePair& p : pairs)
        if (p.rel >= m.m1 && p.value >= m.m2) return true;
    return false;
}

}  // namespace

double stiffness_index_si(const Matrix& jacobian)
{
    if (!std::all_of(jacobian.data.begin(), jacobian.data.end(),
                     [](double v) { return std::isfinite(v); }))
        throw ValidationError("stiffness_index_si: non-finite entries");
    if (jacobian.rows != jacobian.cols || max_asymmetry(jacobian) >= 1e-10)
        throw ValidationError("unsupported: SI requires symmetric Jacobian in this artifact");
    const ode::EigenDecomposition eig = ode::eigen_symmetric(jacobian);
    return std::abs(eig.eigenvalues.front());  // sorted by |lambda| descending
}

double stiffness_aware_index_sai(const Vec& u, const Vec& u_next, double t, double t_next)
{
    if (u.size() != u_next.size()) throw ValidationError("sai: state dimension mismatch");
    if (!(t_next > t)) throw ValidationError("sai: need t_next > t");
    const double nu = norm2(u);
    if (nu == 0.0) throw ValidationError("sai: zero-norm state");
    return norm2(sub(u_next, u)) / (t_next - t) / nu;
}

Vec simplified_sai(const Vec& u, const Vec& u_next, double t, double t_next)
{
    if (u.size() != u_next.size()) throw ValidationError("simplified_sai: state dimension mismatch");
    if (!(t_next > t)) throw ValidationError("simplified_sai: need t_next > t");
    return scale(sub(u_next, u), 1.0 / (t_next - t));
}

double nsi(const ode::Trajectory& traj, std::size_t t, NsiMode mode)
{
    if (t + 1 >= traj.states.size()) throw ValidationError("nsi: transition index out of range");
    const Vec& x = traj.states[t];
    const Vec& xn = traj.states[t + 1];
    if (x.size() != xn.size()) throw ValidationError("nsi: transition crosses a width change");
    const double nx = norm2(x);
    if (nx == 0.0) throw ValidationError("nsi: zero-norm state");

    Vec diff = sub(xn, x);
    if (mode == NsiMode::recorded_step) {
        const Vec& s = traj.step_sizes[t];
        if (!traj.vector_steps) {
            if (s[0] == 0.0) throw ValidationError("nsi: zero step size");
            for (double& v : diff) v /= s[0];
        } else {
            if (s.size() != diff.size()) throw ValidationError("nsi: step width mismatch");
            for (std::size_t i = 0; i < diff.size(); ++i) {
                if (s[i] == 0.0) throw ValidationError("nsi: zero step entry");
                diff[i] /= s[i];
            }
        }
    }
    return norm2(diff) / nx;
}

Profile nsi_profile(const ode::Trajectory& traj, NsiMode mode, bool exclude_first)
{
    traj.validate();
    Profile profile;
    for (const StageSpan& span : stage_spans(traj)) {
        StageStats stats;
        stats.stage_index = span.index;
        const std::size_t t_begin = span.first + (exclude_first ? 1 : 0);
        for (std::size_t t = t_begin; t + 1 <= span.last; ++t)
            stats.nsi_values.push_back(nsi(traj, t, mode));
        if (stats.nsi_values.empty()) {
            stats.degenerate = true;
        } else {
            double sum = 0.0;
            for (double v : stats.nsi_values) sum += v;
            stats.mu = sum / static_cast<double>(stats.nsi_values.size());
        }
        profile.push_back(std::move(stats));
    }
    return profile;
}

std::vector<NsiRow> nsi_rows(const ode::Trajectory& traj, NsiMode mode, bool exclude_first)
{
    traj.validate();
    std::vector<NsiRow> rows;
    for (const StageSpan& span : stage_spans(traj)) {
        for (std::size_t t = span.first; t + 1 <= span.last; ++t) {
            NsiRow row;
            row.stage = span.index;
            row.block = t;
            row.included = !(exclude_first && t == span.first);
            if (!row.included && norm2(traj.states[t]) == 0.0) continue;  // undefined and excluded anyway
            row.nsi = nsi(traj, t, mode);
            rows.push_back(row);
        }
    }
    return rows;
}

void pool_stage_means(ProfileSet& profiles)
{
    std::map<std::size_t, std::pair<double, std::size_t>> pooled;  // stage -> (sum, count)
    for (const Profile& p : profiles)
        for (const StageStats& s : p) {
            if (s.degenerate) continue;
            auto& acc = pooled[s.stage_index];
            for (double v : s.nsi_values) acc.first += v;
            acc.second += s.nsi_values.size();
        }
    for (Profile& p : profiles)
        for (StageStats& s : p) {
            if (s.degenerate) continue;
            const auto& acc = pooled.at(s.stage_index);
            s.mu = acc.first / static_cast<double>(acc.second);
        }
}

double delta_estimate(const ProfileSet& profiles, ThresholdPair m)
{
    if (profiles.empty()) throw ValidationError("delta_estimate: empty profile set");
    const auto pairs = exceedance_pairs(profiles);
    std::size_t count = 0;
    for (const auto& p : pairs) count += exceeds(p, m) ? 1 : 0;
    return static_cast<double>(count) / static_cast<double>(profiles.size());
}

double lemma1_cap(const TrajectoryBounds& bounds)
{
    const auto [k1, k2, a, b] = bounds;
    if (!(k1 > 0.0) || !(a > 0.0) || k2 < k1 || b < a)
        throw ValidationError("lemma1_cap: bounds must satisfy 0 < k1 <= k2 and 0 < a <= b");
    if (k1 == k2) throw ValidationError("lemma1_cap: degenerate bounds (k1 == k2)");
    const double term1 = b * k2 * (k1 + k2) / (a * k1 * std::abs(k1 - k2)) - 1.0;
    const double term2 = (1.0 / a) * (1.0 + k2 / k1);
    return std::max(term1, term2);
}

TrajectoryBounds compute_bounds(const std::vector<ode::Trajectory>& trajectories, NsiMode mode,
                                bool exclude_first)
{
    double k1 = std::numeric_limits<double>::infinity(), k2 = 0.0;
    double a = std::numeric_limits<double>::infinity(), b = 0.0;
    bool any = false;
    for (const ode::Trajectory& traj : trajectories) {
        traj.validate();
        for (const StageSpan& span : stage_spans(traj)) {
            const std::size_t t_begin = span.first + (exclude_first ? 1 : 0);
            for (std::size_t t = t_begin; t + 1 <= span.last; ++t) {
                any = true;
                for (std::size_t s : {t, t + 1}) {
                    const double n = norm2(traj.states[s]);
                    k1 = std::min(k1, n);
                    k2 = std::max(k2, n);
                }
                if (mode == NsiMode::unit_step) {
                    a = std::min(a, 1.0);
                    b = std::max(b, 1.0);
                } else {
                    for (double v : traj.step_sizes[t]) {
                        a = std::min(a, v);
                        b = std::max(b, v);
                    }
                }
            }
        }
    }
    if (!any) throw ValidationError("compute_bounds: no included transitions");
    if (!(k1 > 0.0)) throw ValidationError("compute_bounds: zero-norm state in included transitions");
    return {k1, k2, a, b};
}

TnsEstimate tns(const ProfileSet& profiles, TnsGrid grid, const std::optional<TrajectoryBounds>& cap,
                const TnsEstimate* previous, std::size_t threads)
{
    if (grid.n < 2) throw ValidationError("tns: grid n must be >= 2");
    if (!(grid.m1_max > 0.0) || !(grid.m2_max > 0.0)) throw ValidationError("tns: grid maxima must be > 0");
    if (profiles.empty()) throw ValidationError("tns: empty profile set");

    TnsEstimate est;
    if (cap) {
        const double m_cap = lemma1_cap(*cap);
        grid.m1_max = m_cap;
        grid.m2_max = m_cap;
        est.cap_applied = m_cap;
    }
    est.grid = grid;

    const auto pairs = exceedance_pairs(profiles);
    const std::size_t n = grid.n;
    const double h1 = grid.m1_max / static_cast<double>(n);
    const double h2 = grid.m2_max / static_cast<double>(n);

    // Exact row sweep: along row i the indicator of one input is
    // m2 <= max{v : rel >= m1_i}, so each (input, row) contributes an integer
    // number of covered cell midpoints. Integer accumulation keeps the result
    // independent of the evaluation order, so threading is exact.
    std::vector<unsigned long long> per_input(pairs.size(), 0);
    parallel_for(pairs.size(), threads, [&](std::size_t k) {
        unsigned long long covered = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double m1 = (static_cast<double>(i) + 0.5) * h1;
            double v_star = -1.0;
            for (const ExceedancePair& p : pairs[k])
                if (p.rel >= m1 && p.value > v_star) v_star = p.value;
            if (v_star < 0.0) continue;
            const double x = v_star / h2 - 0.5;  // largest j with (j + 0.5) h2 <= v*
            if (x < 0.0) continue;
            covered += std::min<unsigned long long>(
                static_cast<unsigned long long>(std::floor(x)) + 1, n);
        }
        per_input[k] = covered;
    });
    unsigned long long total_cells = 0;
    for (unsigned long long c : per_input) total_cells += c;
    est.value = static_cast<double>(total_cells) * h1 * h2 / static_cast<double>(profiles.size());

    if (previous) {
        const double denom = std::max(std::abs(previous->value), 1e-300);
        est.refinement_delta = std::abs(est.value - previous->value) / denom;
    }
    return est;
}

double stiffness_proportion(const ProfileSet& profiles, ThresholdPair m,
                            std::size_t blocks_per_trajectory)
{
    if (profiles.empty()) throw ValidationError("stiffness_proportion: empty profile set");
    if (blocks_per_trajectory < 1) throw ValidationError("stiffness_proportion: L must be >= 1");
    const auto pairs = exceedance_pairs(profiles);
    double total = 0.0;
    for (const auto& p : pairs) {
        std::size_t count = 0;
        for (const ExceedancePair& e : p) count += (e.rel >= m.m1 && e.value >= m.m2) ? 1 : 0;
        total += static_cast<double>(count);
    }
    return total / static_cast<double>(profiles.size()) / static_cast<double>(blocks_per_trajectory);
}

}  // namespace stiffkit::metrics
