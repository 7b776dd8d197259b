#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "stiffkit/linalg.hpp"
#include "stiffkit/ode.hpp"

namespace stiffkit::metrics {

// Relative threshold m1 and absolute threshold m2 of the exceedance test
// value >= max(mu * (1 + m1), m2).
struct ThresholdPair {
    double m1 = 0.0;
    double m2 = 0.0;
};

enum class NsiMode {
    unit_step,      // |x_{t+1} - x_t| / |x_t|
    recorded_step,  // divide the difference by the recorded (possibly vector) step first
};

// Per-stage summary of a single trajectory: the per-block values that survive
// the exclusion rule and their mean. A stage whose exclusion leaves nothing is
// flagged degenerate and ignored downstream.
struct StageStats {
    std::size_t stage_index = 0;
    std::vector<double> nsi_values;
    double mu = 0.0;
    bool degenerate = false;
};

using Profile = std::vector<StageStats>;      // one input
using ProfileSet = std::vector<Profile>;      // over inputs

// Flat per-transition view used for CSV export; `block` is the transition
// index within the trajectory.
struct NsiRow {
    std::size_t stage = 0;
    std::size_t block = 0;
    double nsi = 0.0;
    bool included = false;
};

struct TnsGrid {
    double m1_max = 10.0;
    double m2_max = 10.0;
    std::size_t n = 64;
};

// Norm and step bounds over the exclusion-filtered transitions.
struct TrajectoryBounds {
    double k1 = 0.0;  // min state norm
    double k2 = 0.0;  // max state norm
    double a = 0.0;   // min step entry
    double b = 0.0;   // max step entry
};

struct TnsEstimate {
    double value = 0.0;
    TnsGrid grid;
    std::optional<double> cap_applied;
    std::optional<double> refinement_delta;
};

// max_i |Re(lambda_i)| of a symmetric Jacobian. Non-symmetric input is
// rejected; this artifact does not define SI outside the symmetric case.
double stiffness_index_si(const Matrix& jacobian);

// (1 / |u|) * |(u_next - u) / (t_next - t)|
double stiffness_aware_index_sai(const Vec& u, const Vec& u_next, double t, double t_next);

// (u_next - u) / (t_next - t), the vector-valued relative variant
Vec simplified_sai(const Vec& u, const Vec& u_next, double t, double t_next);

// Index t addresses the transition states[t] -> states[t+1].
double nsi(const ode::Trajectory& traj, std::size_t t, NsiMode mode);

// Per stage, the value at every transition except the one leaving the stage's
// first state (the exclusion rule; disable with exclude_first = false).
// Transitions that cross a stage boundary are never measured.
Profile nsi_profile(const ode::Trajectory& traj, NsiMode mode, bool exclude_first = true);

std::vector<NsiRow> nsi_rows(const ode::Trajectory& traj, NsiMode mode, bool exclude_first = true);

// Replaces each stage's mu by the mean pooled over every input's included
// values for that stage index (the pooled-mean variant, off by default).
void pool_stage_means(ProfileSet& profiles);

// Fraction of inputs with at least one exceedance at threshold m.
double delta_estimate(const ProfileSet& profiles, ThresholdPair m);

// Midpoint-rule quadrature of delta_estimate over [0,m1_max] x [0,m2_max]
// with n x n cells. When bounds are supplied both maxima are replaced by the
// Lemma cap computed from them. `previous` fills refinement_delta.
TnsEstimate tns(const ProfileSet& profiles, TnsGrid grid,
                const std::optional<TrajectoryBounds>& cap = {},
                const TnsEstimate* previous = nullptr, std::size_t threads = 1);

// max(b k2 (k1 + k2) / (a k1 |k1 - k2|) - 1, (1/a)(1 + k2/k1)).
// Errors when k1 == k2: the formula is singular there.
double lemma1_cap(const TrajectoryBounds& bounds);

TrajectoryBounds compute_bounds(const std::vector<ode::Trajectory>& trajectories, NsiMode mode,
                                bool exclude_first = true);

// (1/L) * mean over inputs of the number of exceedances at threshold m.
double stiffness_proportion(const ProfileSet& profiles, ThresholdPair m,
                            std::size_t blocks_per_trajectory);

}  // namespace stiffkit::metrics
