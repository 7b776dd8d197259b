#include "stiffkit/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stiffkit/errors.hpp"

namespace stiffkit::ode {

namespace {

// Divergence is declared when a state leaves this envelope. The catalog
// systems are all decaying, so sustained growth of three orders of magnitude
// can only come from numerical instability.
constexpr double kDivergenceFactor = 1e3;

void check_state(const Vec& u, double bound, std::size_t step)
{
    if (!all_finite(u)) throw DivergedError("diverged: non-finite state at step " + std::to_string(step), step);
    if (norm2(u) > bound) throw DivergedError("diverged: unstable growth at step " + std::to_string(step), step);
}

}  // namespace

Matrix finite_difference_jacobian(const OdeSystem& system, const Vec& state, double t)
{
    const std::size_t d = system.dimension;
    if (state.size() != d) throw ValidationError("jacobian: state dimension mismatch");
    Matrix j(d, d);
    Vec lo = state, hi = state;
    for (std::size_t col = 0; col < d; ++col) {
        const double h = 1e-6 * (1.0 + std::abs(state[col]));
        hi[col] = state[col] + h;
        lo[col] = state[col] - h;
        const Vec fp = system.rhs(hi, t);
        const Vec fm = system.rhs(lo, t);
        for (std::size_t row = 0; row < d; ++row) j(row, col) = (fp[row] - fm[row]) / (2.0 * h);
        hi[col] = state[col];
        lo[col] = state[col];
    }
    return j;
}

Matrix system_jacobian(const OdeSystem& system, const Vec& state)
{
    if (system.jacobian) return system.jacobian(state);
    return finite_difference_jacobian(system, state);
}

void Trajectory::validate() const
{
    if (states.empty()) throw ValidationError("trajectory: states is empty");
    if (step_sizes.size() + 1 != states.size())
        throw ValidationError("trajectory: step_sizes length " + std::to_string(step_sizes.size()) +
                              " != states length - 1 = " + std::to_string(states.size() - 1));
    for (std::size_t t = 0; t < step_sizes.size(); ++t) {
        const Vec& s = step_sizes[t];
        if (!vector_steps) {
            if (s.size() != 1) throw ValidationError("trajectory: step_sizes[" + std::to_string(t) + "]: expected scalar");
            if (!(s[0] > 0.0)) throw ValidationError("trajectory: step_sizes[" + std::to_string(t) + "]: must be > 0");
        } else {
            if (s.size() != states[t + 1].size())
                throw ValidationError("trajectory: step_sizes[" + std::to_string(t) + "]: width " +
                                      std::to_string(s.size()) + " != state width " + std::to_string(states[t + 1].size()));
            for (double v : s)
                if (!(v > 0.0) || v > 1.0)
                    throw ValidationError("trajectory: step_sizes[" + std::to_string(t) + "]: entries must lie in (0,1]");
        }
    }
    if (stage_boundaries.empty() || stage_boundaries.front() != 0)
        throw ValidationError("trajectory: stage_boundaries must start with 0");
    for (std::size_t i = 0; i < stage_boundaries.size(); ++i) {
        if (stage_boundaries[i] >= states.size())
            throw ValidationError("trajectory: stage_boundaries[" + std::to_string(i) + "] out of range");
        if (i > 0 && stage_boundaries[i] <= stage_boundaries[i - 1])
            throw ValidationError("trajectory: stage_boundaries must be strictly increasing");
    }
}

IntegratorMethod IntegratorMethod::fixed(IntegratorKind k, double dt)
{
    if (k == IntegratorKind::rkf45_adaptive) throw ValidationError("fixed method: got adaptive kind");
    if (!(dt > 0.0)) throw ValidationError("fixed method: dt must be > 0");
    IntegratorMethod m;
    m.kind = k;
    m.dt = dt;
    return m;
}

IntegratorMethod IntegratorMethod::adaptive(double tolerance)
{
    if (!(tolerance > 0.0)) throw ValidationError("adaptive method: tolerance must be > 0");
    IntegratorMethod m;
    m.kind = IntegratorKind::rkf45_adaptive;
    m.tolerance = tolerance;
    return m;
}

Trajectory integrate_fixed(const OdeSystem& system, const Vec& u0, const IntegratorMethod& method,
                           std::size_t n_steps)
{
    if (method.kind == IntegratorKind::rkf45_adaptive)
        throw ValidationError("integrate_fixed: adaptive method passed; use integrate_adaptive");
    if (n_steps < 1) throw ValidationError("integrate_fixed: n_steps must be >= 1");
    if (u0.size() != system.dimension) throw ValidationError("integrate_fixed: u0 dimension mismatch");

    const double dt = method.dt;
    const double bound = kDivergenceFactor * std::max(1.0, norm2(u0));

    Trajectory traj;
    traj.source = Trajectory::Source::ode;
    traj.states.reserve(n_steps + 1);
    traj.states.push_back(u0);
    traj.step_sizes.reserve(n_steps);

    Vec u = u0;
    double t = 0.0;
    for (std::size_t k = 0; k < n_steps; ++k) {
        if (method.kind == IntegratorKind::forward_euler) {
            axpy(u, dt, system.rhs(u, t));
        } else {  // rk4
            const Vec k1 = system.rhs(u, t);
            Vec u2 = u;
            axpy(u2, dt / 2, k1);
            const Vec k2 = system.rhs(u2, t + dt / 2);
            Vec u3 = u;
            axpy(u3, dt / 2, k2);
            const Vec k3 = system.rhs(u3, t + dt / 2);
            Vec u4 = u;
            axpy(u4, dt, k3);
            const Vec k4 = system.rhs(u4, t + dt);
            for (std::size_t i = 0; i < u.size(); ++i)
                u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += dt;
        check_state(u, bound, k);
        traj.states.push_back(u);
        traj.step_sizes.push_back({dt});
    }
    return traj;
}

std::pair<Trajectory, StepStats> integrate_adaptive(const OdeSystem& system, const Vec& u0,
                                                    std::pair<double, double> t_span, double tolerance)
{
    const auto [t0, t1] = t_span;
    if (!(t1 > t0)) throw ValidationError("integrate_adaptive: need t1 > t0");
    if (!(tolerance > 0.0)) throw ValidationError("integrate_adaptive: tolerance must be > 0");
    if (u0.size() != system.dimension) throw ValidationError("integrate_adaptive: u0 dimension mismatch");

    // Classical Fehlberg 4(5) tableau.
    static constexpr double a21 = 1.0 / 4;
    static constexpr double a31 = 3.0 / 32, a32 = 9.0 / 32;
    static constexpr double a41 = 1932.0 / 2197, a42 = -7200.0 / 2197, a43 = 7296.0 / 2197;
    static constexpr double a51 = 439.0 / 216, a52 = -8.0, a53 = 3680.0 / 513, a54 = -845.0 / 4104;
    static constexpr double a61 = -8.0 / 27, a62 = 2.0, a63 = -3544.0 / 2565, a64 = 1859.0 / 4104,
                            a65 = -11.0 / 40;
    static constexpr double c2 = 1.0 / 4, c3 = 3.0 / 8, c4 = 12.0 / 13, c5 = 1.0, c6 = 1.0 / 2;
    static constexpr double b51 = 16.0 / 135, b53 = 6656.0 / 12825, b54 = 28561.0 / 56430,
                            b55 = -9.0 / 50, b56 = 2.0 / 55;
    static constexpr double b41 = 25.0 / 216, b43 = 1408.0 / 2565, b44 = 2197.0 / 4104, b45 = -1.0 / 5;

    const std::size_t d = system.dimension;
    const double h_min = 1e-14 * (t1 - t0);

    Trajectory traj;
    traj.source = Trajectory::Source::ode;
    traj.states.push_back(u0);
    StepStats stats;

    Vec u = u0;
    double t = t0;
    // Start with the full span; the error controller shrinks aggressively on
    // rejection, so a trivially smooth problem finishes in one step.
    double h = t1 - t0;

    std::size_t attempts = 0;
    while (t < t1) {
        if (++attempts > 20'000'000)
            throw StalledError("stalled: step limit exceeded", traj.states.size() - 1);
        bool last = false;
        if (h >= t1 - t) {
            h = t1 - t;  // clip onto the endpoint
            last = true;
        }
        if (h < h_min) throw StalledError("stalled: step size underflow", traj.states.size() - 1);

        const Vec k1 = system.rhs(u, t);
        Vec w(d);
        for (std::size_t i = 0; i < d; ++i) w[i] = u[i] + h * a21 * k1[i];
        const Vec k2 = system.rhs(w, t + c2 * h);
        for (std::size_t i = 0; i < d; ++i) w[i] = u[i] + h * (a31 * k1[i] + a32 * k2[i]);
        const Vec k3 = system.rhs(w, t + c3 * h);
        for (std::size_t i = 0; i < d; ++i) w[i] = u[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        const Vec k4 = system.rhs(w, t + c4 * h);
        for (std::size_t i = 0; i < d; ++i)
            w[i] = u[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        const Vec k5 = system.rhs(w, t + c5 * h);
        for (std::size_t i = 0; i < d; ++i)
            w[i] = u[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        const Vec k6 = system.rhs(w, t + c6 * h);
        stats.rhs_evals += 6;

        Vec y5(d), y4(d);
        for (std::size_t i = 0; i < d; ++i) {
            y5[i] = u[i] + h * (b51 * k1[i] + b53 * k3[i] + b54 * k4[i] + b55 * k5[i] + b56 * k6[i]);
            y4[i] = u[i] + h * (b41 * k1[i] + b43 * k3[i] + b44 * k4[i] + b45 * k5[i]);
        }

        double sum = 0.0;
        bool finite = all_finite(y5) && all_finite(y4);
        if (finite) {
            for (std::size_t i = 0; i < d; ++i) {
                const double scale = tolerance + tolerance * std::max(std::abs(u[i]), std::abs(y5[i]));
                const double e = (y5[i] - y4[i]) / scale;
                sum += e * e;
            }
        }
        const double err = finite ? std::sqrt(sum / static_cast<double>(d)) : std::numeric_limits<double>::infinity();

        if (err <= 1.0) {
            t = last ? t1 : t + h;
            u = y5;  // local extrapolation: propagate the 5th-order solution
            traj.states.push_back(u);
            traj.step_sizes.push_back({h});
            ++stats.accepted;
        } else {
            ++stats.rejected;
        }

        double factor = std::isfinite(err) && err > 0.0 ? 0.9 * std::pow(err, -0.2) : (err == 0.0 ? 5.0 : 0.2);
        factor = std::clamp(factor, 0.2, 5.0);
        h *= factor;
    }
    return {std::move(traj), stats};
}

Vec analytic_linear_solution(const EigenDecomposition& eig, const Vec& coeffs, double t)
{
    if (coeffs.size() != eig.eigenvalues.size())
        throw ValidationError("analytic_linear_solution: coeffs length mismatch");
    if (eig.eigenvectors.empty()) throw ValidationError("analytic_linear_solution: empty decomposition");
    Vec u(eig.eigenvectors[0].size(), 0.0);
    for (std::size_t i = 0; i < coeffs.size(); ++i)
        axpy(u, coeffs[i] * std::exp(eig.eigenvalues[i] * t), eig.eigenvectors[i]);
    return u;
}

EigenDecomposition eigen_symmetric(const Matrix& a_in)
{
    if (a_in.rows != a_in.cols) throw ValidationError("eigen_symmetric: matrix not square");
    if (max_asymmetry(a_in) >= 1e-10)
        throw ValidationError("eigen_symmetric: matrix not symmetric (max |A - A^T| >= 1e-10)");

    const std::size_t n = a_in.rows;
    Matrix a = a_in;
    Matrix v = Matrix::identity(n);
    const double thresh = 1e-12 * std::max(1.0, max_abs(a_in));

    for (int sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
        if (off <= thresh) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= thresh) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double sgn = theta >= 0.0 ? 1.0 : -1.0;
                const double tr = sgn / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(tr * tr + 1.0);
                const double s = tr * c;
                // A <- G^T A G with G the rotation in the (p,q) plane
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
        const double ai = std::abs(a(i, i)), aj = std::abs(a(j, j));
        if (ai != aj) return ai > aj;
        return a(i, i) > a(j, j);
    });

    EigenDecomposition eig;
    eig.eigenvalues.resize(n);
    eig.eigenvectors.assign(n, Vec(n, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
        eig.eigenvalues[r] = a(idx[r], idx[r]);
        Vec& vec = eig.eigenvectors[r];
        for (std::size_t k = 0; k < n; ++k) vec[k] = v(k, idx[r]);
        // deterministic sign: largest-magnitude component made positive
        std::size_t imax = 0;
        for (std::size_t k = 1; k < n; ++k)
            if (std::abs(vec[k]) > std::abs(vec[imax])) imax = k;
        if (vec[imax] < 0.0)
            for (double& x : vec) x = -x;
    }
    return eig;
}

OdeSystem make_decay()
{
    OdeSystem s;
    s.dimension = 1;
    s.name = "decay";
    s.rhs = [](const Vec& u, double) { return Vec{-u[0]}; };
    s.jacobian = [](const Vec&) {
        Matrix j(1, 1);
        j(0, 0) = -1.0;
        return j;
    };
    s.analytic = [](const Vec& u0, double t) { return Vec{u0[0] * std::exp(-t)}; };
    return s;
}

OdeSystem make_stiff_sine(double lambda)
{
    OdeSystem s;
    s.dimension = 1;
    s.name = "stiff_sine";
    s.rhs = [lambda](const Vec& u, double t) { return Vec{-lambda * (u[0] - std::sin(t)) + std::cos(t)}; };
    s.jacobian = [lambda](const Vec&) {
        Matrix j(1, 1);
        j(0, 0) = -lambda;
        return j;
    };
    // u(t) = sin t + u0 * exp(-lambda t); substitution into the RHS checks out.
    s.analytic = [lambda](const Vec& u0, double t) { return Vec{std::sin(t) + u0[0] * std::exp(-lambda * t)}; };
    return s;
}

OdeSystem make_linear_symmetric(const Matrix& a, std::string name)
{
    const EigenDecomposition eig = eigen_symmetric(a);
    OdeSystem s;
    s.dimension = a.rows;
    s.name = std::move(name);
    s.rhs = [a](const Vec& u, double) { return matvec(a, u); };
    s.jacobian = [a](const Vec&) { return a; };
    s.analytic = [eig](const Vec& u0, double t) {
        Vec coeffs(eig.eigenvalues.size());
        for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] = dot(eig.eigenvectors[i], u0);
        return analytic_linear_solution(eig, coeffs, t);
    };
    return s;
}

}  // namespace stiffkit::ode
