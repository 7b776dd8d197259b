#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stiffkit/linalg.hpp"

namespace stiffkit::ode {

// Right-hand side du/dt = rhs(u, t). `jacobian` and `analytic` are optional;
// a finite-difference Jacobian is substituted when the former is missing, and
// the latter (exact solution from a given u0) backs error measurements.
struct OdeSystem {
    std::size_t dimension = 0;
    std::function<Vec(const Vec&, double)> rhs;
    std::function<Matrix(const Vec&)> jacobian;
    std::string name;
    std::function<Vec(const Vec&, double)> analytic;
};

// Central differences with per-column step 1e-6 * (1 + |state_j|).
Matrix finite_difference_jacobian(const OdeSystem& system, const Vec& state, double t = 0.0);

// Analytic Jacobian when supplied, finite differences otherwise.
Matrix system_jacobian(const OdeSystem& system, const Vec& state);

// Ordered states with per-transition step sizes. Steps are either scalars
// (stored as size-1 entries) or d-vectors; `stage_boundaries` marks the first
// state of each stage and always starts at 0.
struct Trajectory {
    enum class Source { ode, network };

    Source source = Source::ode;
    std::vector<Vec> states;
    std::vector<Vec> step_sizes;
    bool vector_steps = false;
    std::vector<std::size_t> stage_boundaries{0};

    // Throws ValidationError naming the violated field.
    void validate() const;
};

struct EigenDecomposition {
    Vec eigenvalues;                   // sorted by |lambda| descending
    std::vector<Vec> eigenvectors;     // orthonormal, eigenvectors[i] pairs with eigenvalues[i]
};

enum class IntegratorKind { forward_euler, rk4, rkf45_adaptive };

struct IntegratorMethod {
    IntegratorKind kind = IntegratorKind::forward_euler;
    double tolerance = 0.0;            // adaptive only
    double dt = 0.0;                   // fixed only
    std::size_t max_steps = 10'000'000;

    static IntegratorMethod fixed(IntegratorKind k, double dt);
    static IntegratorMethod adaptive(double tolerance);
};

struct StepStats {
    std::size_t rhs_evals = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

// Fixed-step integration from t = 0. Raises DivergedError (with the step
// index) on non-finite states or norm growth past 1e3 * max(1, |u0|).
Trajectory integrate_fixed(const OdeSystem& system, const Vec& u0, const IntegratorMethod& method,
                           std::size_t n_steps);

// Embedded Fehlberg 4(5) pair. Error norm is the RMS of componentwise errors
// scaled by atol = rtol = tolerance; the step factor is clamped to [0.2, 5]
// and the last step is clipped to land exactly on t1.
std::pair<Trajectory, StepStats> integrate_adaptive(const OdeSystem& system, const Vec& u0,
                                                    std::pair<double, double> t_span,
                                                    double tolerance);

// sum_i coeffs[i] * v_i * exp(lambda_i * t)
Vec analytic_linear_solution(const EigenDecomposition& eig, const Vec& coeffs, double t);

// Cyclic Jacobi rotations; input must be symmetric to 1e-10 in max norm.
EigenDecomposition eigen_symmetric(const Matrix& a);

OdeSystem make_decay();
OdeSystem make_stiff_sine(double lambda = 1000.0);
OdeSystem make_linear_symmetric(const Matrix& a, std::string name = "linear_sym");

}  // namespace stiffkit::ode
