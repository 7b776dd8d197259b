#include <doctest.h>

#include <cmath>
#include <limits>

#include "stiffkit/errors.hpp"
#include "stiffkit/metrics.hpp"
#include "stiffkit/ode.hpp"
#include "stiffkit/rng.hpp"
#include "stiffkit/theory.hpp"

using namespace stiffkit;
using namespace stiffkit::metrics;

namespace {

// Single-stage trajectory with prescribed per-transition unit-step values:
// states alternate along e1 with norms chosen so |x_{t+1}-x_t|/|x_t| hits the
// requested value.
ode::Trajectory trajectory_with_nsi(const Vec& values)
{
    ode::Trajectory traj;
    traj.source = ode::Trajectory::Source::network;
    double norm = 1.0;
    traj.states.push_back({norm, 0.0});
    for (double v : values) {
        const double next = norm * (1.0 + v);  // |next - norm| / norm = v
        traj.states.push_back({next, 0.0});
        traj.step_sizes.push_back({1.0});
        norm = next;
    }
    return traj;
}

Profile profile_of(const Vec& values)
{
    return nsi_profile(trajectory_with_nsi(values), NsiMode::unit_step, false);
}

Matrix symmetric2(double a, double b, double c)
{
    Matrix m(2, 2);
    m(0, 0) = a;
    m(0, 1) = b;
    m(1, 0) = b;
    m(1, 1) = c;
    return m;
}

}  // namespace

TEST_CASE("stiffness index examples")
{
    Matrix diag(2, 2);
    diag(0, 0) = -1000.0;
    diag(1, 1) = -1.0;
    CHECK(stiffness_index_si(diag) == 1000.0);

    CHECK(stiffness_index_si(Matrix(3, 3)) == 0.0);

    CHECK(stiffness_index_si(symmetric2(-2.0, 1.0, -2.0)) == doctest::Approx(3.0).epsilon(1e-12));

    Matrix nonsym(2, 2);
    nonsym(0, 1) = 1.0;
    CHECK_THROWS_AS(stiffness_index_si(nonsym), ValidationError);
}

TEST_CASE("stiffness-aware index examples")
{
    CHECK(stiffness_aware_index_sai({1.0, 0.0}, {1.0, 1.0}, 0.0, 1.0) == 1.0);
    CHECK(stiffness_aware_index_sai({3.0, 4.0}, {3.0, 4.0}, 0.0, 0.5) == 0.0);
    const double v = stiffness_aware_index_sai({1.0}, {std::exp(-0.05)}, 0.0, 0.01);
    CHECK(v == doctest::Approx(4.877058).epsilon(1e-6));
    CHECK_THROWS_AS(stiffness_aware_index_sai({0.0, 0.0}, {1.0, 0.0}, 0.0, 1.0), ValidationError);
}

TEST_CASE("simplified index examples")
{
    CHECK(simplified_sai({0.0, 0.0}, {2.0, 4.0}, 0.0, 2.0) == Vec{1.0, 2.0});
    CHECK(simplified_sai({5.0}, {5.0}, 0.0, 1.0) == Vec{0.0});
    const Vec v = simplified_sai({1.0, 1.0}, {1.1, 0.9}, 0.0, 0.1);
    CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("per-transition index examples")
{
    ode::Trajectory t;
    t.states = {{3.0, 4.0}, {3.0, 4.0}};
    t.step_sizes = {{1.0}};
    CHECK(nsi(t, 0, NsiMode::unit_step) == 0.0);

    t.states = {{1.0, 0.0, 0.0}, {1.0, 2.0, 0.0}};
    CHECK(nsi(t, 0, NsiMode::unit_step) == 2.0);

    t.states = {{0.6, 0.8}, {0.0, 0.0}};
    CHECK(nsi(t, 0, NsiMode::unit_step) == doctest::Approx(1.0).epsilon(1e-15));

    t.states = {{0.0, 0.0}, {1.0, 0.0}};
    CHECK_THROWS_AS(nsi(t, 0, NsiMode::unit_step), ValidationError);
}

TEST_CASE("recorded-step mode divides by scalar and vector steps")
{
    ode::Trajectory t;
    t.states = {{1.0, 0.0}, {1.0, 1.0}};
    t.step_sizes = {{0.5}};
    CHECK(nsi(t, 0, NsiMode::recorded_step) == 2.0);

    t.vector_steps = true;
    t.step_sizes = {{0.5, 0.25}};
    t.states = {{1.0, 0.0}, {1.5, 1.0}};
    // diff = (0.5, 1.0), divided -> (1.0, 4.0), norm / 1
    CHECK(nsi(t, 0, NsiMode::recorded_step) == doctest::Approx(std::sqrt(17.0)).epsilon(1e-15));
}

TEST_CASE("profile exclusion drops the transition out of each stage's first state")
{
    const Profile p = nsi_profile(trajectory_with_nsi({9.0, 1.0, 1.0, 4.0}), NsiMode::unit_step);
    REQUIRE(p.size() == 1);
    REQUIRE(p[0].nsi_values.size() == 3);
    CHECK(p[0].nsi_values[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[0].nsi_values[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[0].nsi_values[2] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(p[0].mu == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("profile on identical states is all zero")
{
    ode::Trajectory t;
    t.states.assign(5, {1.0, 2.0});
    t.step_sizes.assign(4, {1.0});
    const Profile p = nsi_profile(t, NsiMode::unit_step);
    CHECK(p[0].mu == 0.0);
    for (double v : p[0].nsi_values) CHECK(v == 0.0);
}

TEST_CASE("two stages of three transitions leave two included values each")
{
    ode::Trajectory t;
    t.source = ode::Trajectory::Source::network;
    // stage 0: states 0..3 (transitions 0,1,2), stage 1: states 4..7
    for (int i = 0; i < 8; ++i) t.states.push_back({1.0 + 0.1 * i, 0.5});
    t.step_sizes.assign(7, {1.0});
    t.stage_boundaries = {0, 4};
    const Profile p = nsi_profile(t, NsiMode::unit_step);
    REQUIRE(p.size() == 2);
    CHECK(p[0].nsi_values.size() == 2);
    CHECK(p[1].nsi_values.size() == 2);
    CHECK_FALSE(p[0].degenerate);

    // rows: the cross-stage transition (index 3) is absent
    const auto rows = nsi_rows(t, NsiMode::unit_step);
    CHECK(rows.size() == 6);
    for (const NsiRow& r : rows) CHECK(r.block != 3);
}

TEST_CASE("a stage with a single transition is degenerate after exclusion")
{
    ode::Trajectory t;
    t.states = {{1.0}, {2.0}, {3.0}, {4.0}, {5.0}};
    t.step_sizes.assign(4, {1.0});
    t.stage_boundaries = {0, 2};  // stage 0: one transition, stage 1: two
    const Profile p = nsi_profile(t, NsiMode::unit_step);
    CHECK(p[0].degenerate);
    CHECK_FALSE(p[1].degenerate);
    CHECK(p[1].nsi_values.size() == 1);
}

TEST_CASE("delta estimator worked examples")
{
    ProfileSet ones{profile_of({1.0, 1.0, 1.0})};
    ones[0][0].nsi_values = {1.0, 1.0, 1.0};
    ones[0][0].mu = 1.0;
    CHECK(delta_estimate(ones, {0.5, 0.0}) == 0.0);

    ProfileSet spike{profile_of({1.0})};
    spike[0][0].nsi_values = {1.0, 1.0, 4.0};
    spike[0][0].mu = 2.0;
    CHECK(delta_estimate(spike, {0.5, 0.0}) == 1.0);
    CHECK(delta_estimate(spike, {0.5, 10.0}) == 0.0);

    CHECK_THROWS_AS(delta_estimate({}, {0.0, 0.0}), ValidationError);
}

TEST_CASE("delta is monotone nonincreasing in both threshold coordinates")
{
    Rng rng(21);
    for (int rep = 0; rep < 200; ++rep) {
        ProfileSet profiles;
        const std::size_t inputs = 1 + rng.integer(6);
        for (std::size_t i = 0; i < inputs; ++i) {
            Vec values;
            const std::size_t count = 2 + rng.integer(6);
            for (std::size_t k = 0; k < count; ++k) values.push_back(rng.uniform(0.0, 5.0));
            profiles.push_back(profile_of(values));
        }
        const double m1 = rng.uniform(0.0, 4.0), m2 = rng.uniform(0.0, 6.0);
        const double m1b = m1 + rng.uniform(0.0, 2.0), m2b = m2 + rng.uniform(0.0, 2.0);
        CHECK(delta_estimate(profiles, {m1, m2}) >= delta_estimate(profiles, {m1b, m2b}));
    }
}

TEST_CASE("quadrature of a saturated exceedance is the box area")
{
    // one huge value among many small ones: its value dwarfs m2_max and its
    // ratio to the stage mean (about the number of values) dwarfs m1_max, so
    // delta = 1 at every grid midpoint below the caps
    ProfileSet profiles{profile_of({0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 1e12})};
    const TnsEstimate est = tns(profiles, {4.0, 7.0, 64});
    CHECK(est.value == doctest::Approx(28.0).epsilon(1e-12));
    CHECK(est.value <= est.grid.m1_max * est.grid.m2_max + 1e-12);
}

TEST_CASE("constant profiles integrate to zero")
{
    ProfileSet profiles{profile_of({2.0, 2.0, 2.0}), profile_of({2.0, 2.0, 2.0})};
    // every included value equals its stage mean, so mu(1+m1) > mu at any
    // midpoint with m1 > 0
    const TnsEstimate est = tns(profiles, {10.0, 10.0, 64});
    CHECK(est.value == 0.0);
}

TEST_CASE("refinement: doubling the grid changes the value below one percent")
{
    Rng rng(33);
    ProfileSet profiles;
    for (int i = 0; i < 30; ++i) {
        Vec values;
        for (int k = 0; k < 8; ++k) values.push_back(rng.uniform(0.1, 6.0));
        profiles.push_back(profile_of(values));
    }
    const TnsEstimate reference = tns(profiles, {10.0, 10.0, 256});
    const TnsEstimate coarse = tns(profiles, {10.0, 10.0, 128});
    CHECK(std::abs(coarse.value - reference.value) / reference.value < 0.01);

    const TnsEstimate at64 = tns(profiles, {10.0, 10.0, 64});
    const TnsEstimate at128 = tns(profiles, {10.0, 10.0, 128}, {}, &at64);
    REQUIRE(at128.refinement_delta.has_value());
    CHECK(*at128.refinement_delta < 0.01);
}

TEST_CASE("row-sweep quadrature equals the direct per-cell midpoint sum")
{
    Rng rng(41);
    for (int rep = 0; rep < 20; ++rep) {
        ProfileSet profiles;
        const std::size_t inputs = 1 + rng.integer(7);
        for (std::size_t i = 0; i < inputs; ++i) {
            Vec values;
            const std::size_t count = 2 + rng.integer(6);
            for (std::size_t k = 0; k < count; ++k) values.push_back(rng.uniform(0.0, 6.0));
            profiles.push_back(profile_of(values));
        }
        const TnsGrid grid{rng.uniform(2.0, 10.0), rng.uniform(2.0, 10.0), 2 + rng.integer(15)};
        const TnsEstimate est = tns(profiles, grid);

        const double h1 = grid.m1_max / static_cast<double>(grid.n);
        const double h2 = grid.m2_max / static_cast<double>(grid.n);
        double direct = 0.0;
        for (std::size_t i = 0; i < grid.n; ++i)
            for (std::size_t j = 0; j < grid.n; ++j)
                direct += delta_estimate(profiles, {(static_cast<double>(i) + 0.5) * h1,
                                                    (static_cast<double>(j) + 0.5) * h2});
        direct *= h1 * h2;
        CHECK(est.value == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("quadrature is independent of the thread count")
{
    Rng rng(43);
    ProfileSet profiles;
    for (int i = 0; i < 9; ++i) {
        Vec values;
        for (int k = 0; k < 7; ++k) values.push_back(rng.uniform(0.0, 6.0));
        profiles.push_back(profile_of(values));
    }
    const TnsGrid grid{10.0, 10.0, 64};
    const TnsEstimate serial = tns(profiles, grid, {}, nullptr, 1);
    const TnsEstimate parallel = tns(profiles, grid, {}, nullptr, 4);
    CHECK(serial.value == parallel.value);
}

TEST_CASE("threshold cap formula worked examples")
{
    CHECK(lemma1_cap({1.0, 2.0, 1.0, 1.0}) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(lemma1_cap({1.0, 3.0, 1.0, 1.0}) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK_THROWS_AS(lemma1_cap({2.0, 2.0, 1.0, 1.0}), ValidationError);

    // scale invariance with a = b and k2 = 2 k1
    const double m1 = lemma1_cap({1.0, 2.0, 0.7, 0.7});
    const double m2 = lemma1_cap({2.0, 4.0, 0.7, 0.7});
    CHECK(m1 == doctest::Approx(m2).epsilon(1e-15));
}

TEST_CASE("exceedance vanishes exactly beyond the cap on random trajectory sets")
{
    Rng rng(55);
    for (int rep = 0; rep < 100; ++rep) {
        const auto trajs = theory::synth_trajectory_set(rng);
        ProfileSet profiles;
        for (const auto& t : trajs) profiles.push_back(nsi_profile(t, NsiMode::recorded_step));
        const TrajectoryBounds bounds = compute_bounds(trajs, NsiMode::recorded_step);
        const double cap = lemma1_cap(bounds);
        for (double f1 : {1.0 + 1e-12, 1.5, 10.0})
            for (double f2 : {1.0 + 1e-12, 2.0, 50.0})
                CHECK(delta_estimate(profiles, {cap * f1, cap * f2}) == 0.0);
    }
}

TEST_CASE("unit-step index upper bound, with equality on antiparallel states")
{
    Rng rng(77);
    for (int rep = 0; rep < 200; ++rep) {
        Vec x(3), y(3);
        for (double& v : x) v = rng.normal();
        for (double& v : y) v = rng.normal();
        if (norm2(x) == 0.0) continue;
        ode::Trajectory t;
        t.states = {x, y};
        t.step_sizes = {{1.0}};
        const double bound = 1.0 + norm2(y) / norm2(x);
        CHECK(nsi(t, 0, NsiMode::unit_step) <= bound + 1e-12);
    }
    // antiparallel: x_{t+1} = -k x
    ode::Trajectory t;
    t.states = {{2.0, 0.0}, {-6.0, 0.0}};
    t.step_sizes = {{1.0}};
    CHECK(nsi(t, 0, NsiMode::unit_step) == doctest::Approx(1.0 + 3.0).epsilon(1e-15));
}

TEST_CASE("stiffness proportion worked examples")
{
    ProfileSet spike{profile_of({1.0})};
    spike[0][0].nsi_values = {1.0, 1.0, 4.0};
    spike[0][0].mu = 2.0;
    CHECK(stiffness_proportion(spike, {0.5, 0.0}, 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(stiffness_proportion(spike, {10.0, 100.0}, 3) == 0.0);

    ProfileSet flat{profile_of({1.0})};
    flat[0][0].nsi_values = {2.0, 2.0, 2.0};
    flat[0][0].mu = 2.0;
    CHECK(stiffness_proportion(flat, {0.0, 0.0}, 3) == 1.0);  // threshold = mu, >= counts ties

    // p-hat * L >= delta for any thresholds
    Rng rng(9);
    for (int rep = 0; rep < 100; ++rep) {
        ProfileSet profiles;
        for (int i = 0; i < 5; ++i) {
            Vec values;
            for (int k = 0; k < 6; ++k) values.push_back(rng.uniform(0.0, 4.0));
            profiles.push_back(profile_of(values));
        }
        const ThresholdPair m{rng.uniform(0.0, 2.0), rng.uniform(0.0, 4.0)};
        CHECK(stiffness_proportion(profiles, m, 6) * 6.0 >= delta_estimate(profiles, m) - 1e-12);
    }
}

TEST_CASE("quadrature value is monotone under enlarging the maximal spike")
{
    Rng rng(61);
    for (int rep = 0; rep < 50; ++rep) {
        ProfileSet profiles;
        for (int i = 0; i < 6; ++i) {
            Vec values;
            for (int k = 0; k < 6; ++k) values.push_back(rng.uniform(0.2, 5.0));
            profiles.push_back(profile_of(values));
        }
        const TnsGrid grid{8.0, 8.0, 32};
        const double before = tns(profiles, grid).value;

        // locate the global maximum and scale it up, refreshing its stage mean
        std::size_t best_input = 0, best_stage = 0, best_k = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < profiles.size(); ++i)
            for (std::size_t s = 0; s < profiles[i].size(); ++s)
                for (std::size_t k = 0; k < profiles[i][s].nsi_values.size(); ++k)
                    if (profiles[i][s].nsi_values[k] > best) {
                        best = profiles[i][s].nsi_values[k];
                        best_input = i;
                        best_stage = s;
                        best_k = k;
                    }
        StageStats& stats = profiles[best_input][best_stage];
        stats.nsi_values[best_k] *= 1.0 + rng.uniform(0.5, 10.0);
        double sum = 0.0;
        for (double v : stats.nsi_values) sum += v;
        stats.mu = sum / static_cast<double>(stats.nsi_values.size());

        CHECK(tns(profiles, grid).value >= before - 1e-12);
    }
}

TEST_CASE("non-finite jacobian entries are rejected")
{
    Matrix bad(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(stiffness_index_si(bad), ValidationError);
}

TEST_CASE("pooled stage means replace the per-input mean")
{
    ProfileSet profiles{profile_of({1.0, 1.0}), profile_of({3.0, 3.0})};
    const double mu0 = profiles[0][0].mu;
    const double mu1 = profiles[1][0].mu;
    pool_stage_means(profiles);
    CHECK(profiles[0][0].mu == profiles[1][0].mu);
    CHECK(profiles[0][0].mu == doctest::Approx((mu0 + mu1) / 2.0).epsilon(1e-12));
}

TEST_CASE("measured finite-difference index matches the closed form on linear symmetric systems")
{
    Rng rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 2 + rng.integer(4);
        Matrix a(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                const double v = rng.uniform(-2.0, 2.0);
                a(i, j) = v;
                a(j, i) = v;
            }
        for (std::size_t i = 0; i < n; ++i) a(i, i) -= 10.0;
        const auto eig = ode::eigen_symmetric(a);
        Vec coeffs(n);
        for (double& c : coeffs) c = rng.uniform(0.2, 1.0);
        const Vec u0 = ode::analytic_linear_solution(eig, coeffs, 0.0);
        const Vec u1 = ode::analytic_linear_solution(eig, coeffs, 1e-6);
        const double measured = stiffness_aware_index_sai(u0, u1, 0.0, 1e-6);

        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num += eig.eigenvalues[i] * eig.eigenvalues[i] * coeffs[i] * coeffs[i];
            den += coeffs[i] * coeffs[i];
        }
        const double closed = std::sqrt(num / den);
        CHECK(std::abs(measured - closed) / closed < 1e-4);
    }
}

TEST_CASE("bounds follow the step mode")
{
    ode::Trajectory t;
    t.states = {{1.0}, {2.0}, {1.5}, {1.8}};
    t.step_sizes = {{0.5}, {0.25}, {0.8}};
    const TrajectoryBounds unit = compute_bounds({t}, NsiMode::unit_step);
    CHECK(unit.a == 1.0);
    CHECK(unit.b == 1.0);
    const TrajectoryBounds rec = compute_bounds({t}, NsiMode::recorded_step);
    CHECK(rec.a == 0.25);
    CHECK(rec.b == 0.8);
    CHECK(rec.k1 == 1.5);  // transition 0 is excluded, so state 0 does not count
    CHECK(rec.k2 == 2.0);
}
