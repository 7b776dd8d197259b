// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Tolerances are pinned in code next to each check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "stiffkit/analysis.hpp"
#include "stiffkit/errors.hpp"
#include "stiffkit/metrics.hpp"
#include "stiffkit/neural.hpp"
#include "stiffkit/ode.hpp"
#include "stiffkit/rng.hpp"
#include "stiffkit/theory.hpp"

using namespace stiffkit;

namespace {

int g_failures = 0;

class Criterion {
  public:
    Criterion(int number, std::string name)
        : number_(number), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

    void check(bool ok, const std::string& what)
    {
        if (!ok) details_.push_back(what);
    }

    double elapsed() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    void finish()
    {
        const double secs = elapsed();
        if (details_.empty()) {
            std::printf("PASS criterion %2d: %s (%.2fs)\n", number_, name_.c_str(), secs);
        } else {
            ++g_failures;
            std::printf("FAIL criterion %2d: %s (%.2fs)\n", number_, name_.c_str(), secs);
            for (const std::string& d : details_) std::printf("      - %s\n", d.c_str());
        }
        std::fflush(stdout);
    }

  private:
    int number_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> details_;
};

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------

void criterion1_theorem2()
{
    Criterion c(1, "SAI/SI asymptotics across the stiffness sweep");
    const Vec lambda1s{10.0, 100.0, 1000.0, 10000.0};
    std::vector<double> scaled_dev;
    for (double l1 : lambda1s) {
        const Vec eigs{-l1, -1.0};
        const Vec coeffs{1.0, 1.0};
        const auto at_fixed_gap = theory::verify_theorem2(eigs, coeffs, {1e-6});
        const double ratio = at_fixed_gap[0].ratio;
        const double closed = std::sqrt((l1 * l1 + 1.0) / (2.0 * l1 * l1));
        if (l1 < 10000.0) {
            c.check(std::abs(ratio - closed) / closed < 1e-3,
                    "lambda1=" + fmt(l1) + ": |ratio-closed|/closed = " +
                        fmt(std::abs(ratio - closed) / closed) + " >= 1e-3");
        } else {
            c.check(std::abs(ratio - 1.0 / std::sqrt(2.0)) < 5e-3,
                    "lambda1=1e4: |ratio - 1/sqrt(2)| = " +
                        fmt(std::abs(ratio - 1.0 / std::sqrt(2.0))) + " >= 5e-3");
        }
        // the sweep is compared at matched relative gaps (lambda1 * gap fixed),
        // where the quotient error is uniform and the limit term dominates
        const auto scaled = theory::verify_theorem2(eigs, coeffs, {2e-7 / l1});
        scaled_dev.push_back(std::abs(scaled[0].ratio - scaled[0].ratio_limit));
    }
    for (std::size_t i = 1; i < scaled_dev.size(); ++i)
        c.check(scaled_dev[i] <= scaled_dev[i - 1],
                "|ratio-limit| not nonincreasing at step " + std::to_string(i) + ": " +
                    fmt(scaled_dev[i - 1]) + " -> " + fmt(scaled_dev[i]));
    c.check(c.elapsed() < 1.0, "runtime " + fmt(c.elapsed()) + "s >= 1s");
    c.finish();
}

void criterion2_lemma1_tns()
{
    Criterion c(2, "exceedance vanishes beyond the cap; quadrature refinement below 1%");
    Rng rng(2024);
    for (int set = 0; set < 100; ++set) {
        const auto trajs = theory::synth_trajectory_set(rng);
        metrics::ProfileSet profiles;
        for (const auto& t : trajs)
            profiles.push_back(metrics::nsi_profile(t, metrics::NsiMode::recorded_step));
        const auto bounds = metrics::compute_bounds(trajs, metrics::NsiMode::recorded_step);
        const auto report = theory::verify_lemma1_and_tns(profiles, bounds, {64, 128});
        if (!report.zero_region_verified)
            c.check(false, "set " + std::to_string(set) + ": nonzero exceedance beyond the cap");
        if (report.deltas.empty() || report.deltas.back() >= 0.01)
            c.check(false, "set " + std::to_string(set) + ": refinement delta " +
                               (report.deltas.empty() ? "missing" : fmt(report.deltas.back())) +
                               " >= 1%");
    }
    c.check(c.elapsed() < 30.0, "runtime " + fmt(c.elapsed()) + "s >= 30s");
    c.finish();
}

metrics::Profile synthetic_profile(Rng& rng)
{
    metrics::Profile profile;
    const std::size_t stages = 1 + rng.integer(2);
    for (std::size_t s = 0; s < stages; ++s) {
        metrics::StageStats stats;
        stats.stage_index = s;
        const std::size_t count = 2 + rng.integer(6);
        double sum = 0.0;
        for (std::size_t k = 0; k < count; ++k) {
            stats.nsi_values.push_back(rng.uniform(0.0, 8.0));
            sum += stats.nsi_values.back();
        }
        stats.mu = sum / static_cast<double>(count);
        profile.push_back(std::move(stats));
    }
    return profile;
}

void criterion3_monotonicity_and_bounds()
{
    Criterion c(3, "exceedance monotonicity and quadrature bounds on random profiles");
    Rng rng(333);
    for (int rep = 0; rep < 1000; ++rep) {
        metrics::ProfileSet profiles;
        const std::size_t inputs = 1 + rng.integer(8);
        for (std::size_t i = 0; i < inputs; ++i) profiles.push_back(synthetic_profile(rng));

        const double m1 = rng.uniform(0.0, 5.0), m2 = rng.uniform(0.0, 9.0);
        const double m1b = m1 + rng.uniform(0.0, 3.0), m2b = m2 + rng.uniform(0.0, 3.0);
        const double lo = metrics::delta_estimate(profiles, {m1, m2});
        const double hi = metrics::delta_estimate(profiles, {m1b, m2b});
        if (lo < hi)
            c.check(false, "rep " + std::to_string(rep) + ": delta increased from " + fmt(lo) +
                               " to " + fmt(hi));

        const metrics::TnsGrid grid{rng.uniform(1.0, 12.0), rng.uniform(1.0, 12.0), 16};
        const auto est = metrics::tns(profiles, grid);
        if (!(est.value >= 0.0 && est.value <= grid.m1_max * grid.m2_max + 1e-12))
            c.check(false, "rep " + std::to_string(rep) + ": TNS " + fmt(est.value) +
                               " outside [0, " + fmt(grid.m1_max * grid.m2_max) + "]");
    }
    c.finish();
}

double gradcheck_relative_error(const neural::NetworkConfig& config, std::uint64_t data_seed)
{
    using namespace neural;
    ResidualNetwork net = init_network(config);
    Rng rng(data_seed);
    for (const ParamRef& ref : param_refs(net)) {
        if (ref.cls == ParamClass::buffer) continue;
        for (double& v : *ref.values) v += 0.1 * rng.normal();
    }
    const std::size_t batch = 3;
    std::vector<Vec> xs(batch, Vec(config.input_dim));
    std::vector<int> ys(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        for (double& v : xs[i]) v = rng.normal();
        ys[i] = static_cast<int>(rng.integer(config.num_classes));
    }
    ResidualNetwork grads = zeros_like(net);
    loss_and_gradients(net, xs, ys, grads);

    const auto net_refs = param_refs(net);
    const auto grad_refs = param_refs(grads);
    ResidualNetwork scratch = zeros_like(net);
    const auto scratch_refs = param_refs(scratch);
    const double h = 1e-5;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < net_refs.size(); ++k) {
        if (net_refs[k].cls == neural::ParamClass::buffer) continue;
        for (std::size_t j = 0; j < net_refs[k].values->size(); ++j) {
            double& theta = (*net_refs[k].values)[j];
            const double saved = theta;
            theta = saved + h;
            for (auto& ref : scratch_refs) std::fill(ref.values->begin(), ref.values->end(), 0.0);
            const double up = loss_and_gradients(net, xs, ys, scratch);
            theta = saved - h;
            for (auto& ref : scratch_refs) std::fill(ref.values->begin(), ref.values->end(), 0.0);
            const double down = loss_and_gradients(net, xs, ys, scratch);
            theta = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = (*grad_refs[k].values)[j];
            num += (fd - an) * (fd - an);
            den += std::max(an * an, fd * fd);
        }
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

void criterion4_gradients()
{
    Criterion c(4, "analytic gradients match central differences for all six adaptor kinds");
    using neural::AdaptorKind;
    const AdaptorKind kinds[] = {AdaptorKind::none,      AdaptorKind::se_style,
                                 AdaptorKind::prev_only, AdaptorKind::next_only,
                                 AdaptorKind::diff,      AdaptorKind::stepnet};
    for (AdaptorKind kind : kinds) {
        for (std::uint64_t rep = 0; rep < 20; ++rep) {
            neural::NetworkConfig config;
            config.input_dim = 3;
            config.stage_widths = {4, 4};
            config.blocks_per_stage = {2, 2};
            config.adaptor = kind;
            config.bottleneck_ratio = 2;
            config.num_classes = 3;
            config.seed = 1000 + rep;
            const double err = gradcheck_relative_error(config, 77 * rep + 5);
            if (err >= 1e-4)
                c.check(false, std::string(neural::adaptor_kind_name(kind)) + " rep " +
                                   std::to_string(rep) + ": relative error " + fmt(err));
        }
    }
    c.check(c.elapsed() < 60.0, "runtime " + fmt(c.elapsed()) + "s >= 60s");
    c.finish();
}

void criterion5_stepnet_init()
{
    Criterion c(5, "two-input gate starts at sigma(-1) and matches the uniform-step trajectory");
    const double sigma_m1 = 1.0 / (1.0 + std::exp(1.0));
    Rng rng(55);
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        neural::NetworkConfig config;
        config.input_dim = 2;
        config.stage_widths = {8, 6};
        config.blocks_per_stage = {3, 2};
        config.adaptor = neural::AdaptorKind::stepnet;
        config.bottleneck_ratio = 2;
        config.num_classes = 2;
        config.seed = seed;
        const auto net = neural::init_network(config);
        for (int rep = 0; rep < 5; ++rep) {
            Vec x{rng.normal(), rng.normal()};
            const auto gated = neural::forward(net, x, neural::RunMode::eval);
            for (const Vec& att : gated.attention_values)
                for (double a : att)
                    if (std::abs(a - sigma_m1) >= 1e-9)
                        c.check(false, "attention " + fmt(a) + " != sigma(-1)");
            const auto uniform = neural::forward(net, x, neural::RunMode::eval, sigma_m1);
            for (std::size_t t = 0; t < gated.trajectory.states.size(); ++t)
                for (std::size_t j = 0; j < gated.trajectory.states[t].size(); ++j)
                    if (std::abs(gated.trajectory.states[t][j] - uniform.trajectory.states[t][j]) >=
                        1e-9)
                        c.check(false, "trajectory mismatch at state " + std::to_string(t));
        }
    }
    c.finish();
}

void criterion6_attention_one_reduction()
{
    Criterion c(6, "attention forced to one reproduces the plain forward pass");
    using neural::AdaptorKind;
    const AdaptorKind gated[] = {AdaptorKind::se_style, AdaptorKind::prev_only,
                                 AdaptorKind::next_only, AdaptorKind::diff, AdaptorKind::stepnet};
    Rng rng(66);
    for (int rep = 0; rep < 100; ++rep) {
        neural::NetworkConfig config;
        config.input_dim = 2 + rng.integer(3);
        config.stage_widths = {4 + 2 * rng.integer(3)};
        config.blocks_per_stage = {2 + rng.integer(3)};
        config.adaptor = gated[rng.integer(5)];
        config.bottleneck_ratio = 1 + rng.integer(2);
        config.num_classes = 2;
        config.seed = 500 + static_cast<std::uint64_t>(rep);
        auto net = neural::init_network(config);
        for (const neural::ParamRef& ref : neural::param_refs(net)) {
            if (ref.cls == neural::ParamClass::buffer) continue;
            for (double& v : *ref.values) v += 0.2 * rng.normal();
        }
        neural::NetworkConfig plain_cfg = config;
        plain_cfg.adaptor = AdaptorKind::none;
        auto twin = neural::init_network(plain_cfg);
        twin.projections = net.projections;
        twin.head = net.head;
        for (std::size_t s = 0; s < net.stages.size(); ++s)
            for (std::size_t t = 0; t < net.stages[s].size(); ++t) {
                twin.stages[s][t].fc1 = net.stages[s][t].fc1;
                twin.stages[s][t].fc2 = net.stages[s][t].fc2;
            }
        Vec x(config.input_dim);
        for (double& v : x) v = rng.normal();
        const auto forced = neural::forward(net, x, neural::RunMode::eval, 1.0);
        const auto plain = neural::forward(twin, x, neural::RunMode::eval);
        for (std::size_t t = 0; t < forced.trajectory.states.size(); ++t)
            for (std::size_t j = 0; j < forced.trajectory.states[t].size(); ++j)
                if (std::abs(forced.trajectory.states[t][j] - plain.trajectory.states[t][j]) > 1e-12)
                    c.check(false, "rep " + std::to_string(rep) + ": componentwise deviation > 1e-12");
    }
    c.finish();
}

void criterion7_stiff_solver()
{
    Criterion c(7, "adaptive integration beats fixed Euler tenfold on the stiff system");
    const auto system = ode::make_stiff_sine();
    const auto report = theory::stiff_solver_comparison(system, {0.0}, {0.0, 1.0}, 1e-8);
    c.check(report.adaptive_error < 1e-6,
            "adaptive endpoint error " + fmt(report.adaptive_error) + " >= 1e-6");
    c.check(report.fixed_evals_at_matched_error >= 10 * report.adaptive_evals,
            "evals ratio " +
                fmt(static_cast<double>(report.fixed_evals_at_matched_error) /
                    static_cast<double>(report.adaptive_evals)) +
                " < 10");
    bool diverged = false;
    try {
        ode::integrate_fixed(system, {0.0},
                             ode::IntegratorMethod::fixed(ode::IntegratorKind::forward_euler, 0.0021),
                             476);
    } catch (const DivergedError&) {
        diverged = true;
    }
    c.check(diverged, "fixed Euler with dt = 0.0021 did not diverge");
    c.check(c.elapsed() < 5.0, "runtime " + fmt(c.elapsed()) + "s >= 5s");
    c.finish();
}

struct ExperimentSetup {
    neural::DatasetKind kind;
    std::size_t n;
    double noise;
    double turns;
    std::size_t epochs;
    double lr;
};

neural::NetworkConfig experiment_config(neural::AdaptorKind kind, std::uint64_t seed)
{
    neural::NetworkConfig config;
    config.input_dim = 2;
    config.stage_widths = {12};
    config.blocks_per_stage = {6};
    config.adaptor = kind;
    config.bottleneck_ratio = 3;
    config.num_classes = 2;
    config.seed = seed;
    return config;
}

void criterion8_accuracy_direction()
{
    Criterion c(8, "gated beats or ties plain mean accuracy on every dataset");
    const ExperimentSetup setups[] = {
        {neural::DatasetKind::blobs, 400, 0.6, 0.0, 20, 0.05},
        {neural::DatasetKind::moons, 400, 0.25, 0.0, 100, 0.05},
        {neural::DatasetKind::spirals, 800, 0.1, 2.0, 80, 0.05},
    };
    for (const auto& setup : setups) {
        const auto data = neural::synth_dataset(setup.kind, setup.n, setup.noise, 7, setup.turns);
        neural::Hyper hyper;
        hyper.lr = setup.lr;
        hyper.epochs = setup.epochs;
        hyper.batch_size = 32;
        hyper.weight_decay = 1e-4;
        double mean_gated = 0.0, mean_plain = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            mean_gated +=
                neural::train(experiment_config(neural::AdaptorKind::stepnet, seed), data, hyper)
                    .metrics.test_accuracy;
            mean_plain +=
                neural::train(experiment_config(neural::AdaptorKind::none, seed), data, hyper)
                    .metrics.test_accuracy;
        }
        mean_gated /= 5.0;
        mean_plain /= 5.0;
        std::printf("      [criterion 8] %s: gated %.4f vs plain %.4f\n",
                    neural::dataset_kind_name(setup.kind), mean_gated, mean_plain);
        c.check(mean_gated >= mean_plain,
                std::string(neural::dataset_kind_name(setup.kind)) + ": gated mean " +
                    fmt(mean_gated) + " < plain mean " + fmt(mean_plain));
    }
    c.check(c.elapsed() < 600.0, "runtime " + fmt(c.elapsed()) + "s >= 10min");
    c.finish();
}

void criteria9_10_ensemble()
{
    Criterion c9(9, "rank correlation between total stiffness and accuracy is positive");
    const auto data = neural::synth_dataset(neural::DatasetKind::spirals, 800, 0.1, 7, 2.0);
    std::vector<neural::NetworkConfig> configs;
    for (neural::AdaptorKind kind :
         {neural::AdaptorKind::none, neural::AdaptorKind::se_style, neural::AdaptorKind::stepnet})
        for (std::uint64_t seed = 1; seed <= 4; ++seed)
            configs.push_back(experiment_config(kind, seed));
    neural::Hyper hyper;
    hyper.lr = 0.05;
    hyper.epochs = 80;
    hyper.batch_size = 32;
    hyper.weight_decay = 1e-4;
    analysis::TnsExperimentOptions options;
    options.grid = {10.0, 10.0, 64};
    options.mode = metrics::NsiMode::recorded_step;
    const auto result = analysis::tns_accuracy_experiment(configs, data, hyper, options);
    for (const auto& rec : result.records)
        std::printf("      [ensemble] model %zu %s seed %llu: acc %.4f tns %.4f\n", rec.model_id,
                    neural::adaptor_kind_name(rec.adaptor),
                    static_cast<unsigned long long>(rec.seed), rec.accuracy, rec.tns);
    c9.check(result.correlation.kendall > 0.0,
             "kendall tau " + fmt(result.correlation.kendall) + " <= 0");
    c9.check(result.correlation.spearman > 0.0,
             "spearman rho " + fmt(result.correlation.spearman) + " <= 0");
    c9.check(c9.elapsed() < 900.0, "runtime " + fmt(c9.elapsed()) + "s >= 15min");
    c9.finish();

    Criterion c10(10, "gated models carry more total stiffness than plain ones");
    double gated_tns = 0.0, plain_tns = 0.0;
    std::size_t gated_count = 0, plain_count = 0;
    for (const auto& rec : result.records) {
        if (rec.adaptor == neural::AdaptorKind::none) {
            plain_tns += rec.tns;
            ++plain_count;
        } else {
            gated_tns += rec.tns;
            ++gated_count;
        }
    }
    gated_tns /= static_cast<double>(gated_count);
    plain_tns /= static_cast<double>(plain_count);
    c10.check(gated_tns > plain_tns,
              "gated mean TNS " + fmt(gated_tns) + " <= plain mean TNS " + fmt(plain_tns));
    c10.finish();
}

void criterion11_correlation_oracles()
{
    Criterion c(11, "rank statistics match brute-force oracles exactly");
    c.check(analysis::kendall_tau({1, 2, 3}, {1, 3, 2}) == 1.0 / 3.0,
            "tau((1,2,3),(1,3,2)) != 1/3");
    c.check(analysis::spearman_rho({1, 2, 3}, {3, 1, 2}) == -0.5, "rho((1,2,3),(3,1,2)) != -0.5");

    Rng rng(1111);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = 2 + rng.integer(49);
        Vec xs(n), ys(n);
        for (double& v : xs) v = rng.uniform(-100.0, 100.0);
        for (double& v : ys) v = rng.uniform(-100.0, 100.0);

        long long concordant = 0, discordant = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double s = (xs[i] - xs[j]) * (ys[i] - ys[j]);
                if (s > 0.0) ++concordant;
                if (s < 0.0) ++discordant;
            }
        const double tau_oracle = static_cast<double>(concordant - discordant) /
                                  (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
        if (analysis::kendall_tau(xs, ys) != tau_oracle)
            c.check(false, "kendall mismatch at rep " + std::to_string(rep));

        // textbook d^2 formula (tie-free with probability one here)
        std::vector<std::size_t> ox(n), oy(n);
        for (std::size_t i = 0; i < n; ++i) ox[i] = oy[i] = i;
        std::sort(ox.begin(), ox.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
        std::sort(oy.begin(), oy.end(), [&](std::size_t a, std::size_t b) { return ys[a] < ys[b]; });
        Vec rx(n), ry(n);
        for (std::size_t i = 0; i < n; ++i) {
            rx[ox[i]] = static_cast<double>(i + 1);
            ry[oy[i]] = static_cast<double>(i + 1);
        }
        double sum_d2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum_d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
        const double nn = static_cast<double>(n);
        const double rho_oracle = 1.0 - 6.0 * sum_d2 / (nn * (nn * nn - 1.0));
        if (std::abs(analysis::spearman_rho(xs, ys) - rho_oracle) > 1e-13)
            c.check(false, "spearman mismatch at rep " + std::to_string(rep) + ": " +
                               fmt(analysis::spearman_rho(xs, ys)) + " vs " + fmt(rho_oracle));
    }
    c.finish();
}

void criterion12_attention_pipeline()
{
    Criterion c(12, "per-block index/attention correlation pipeline");
    // synthetic fixture: attention strictly decreasing in the index
    Rng rng(444);
    std::vector<Vec> nsi_by_block(5), att_by_block(5);
    for (std::size_t b = 0; b < 5; ++b)
        for (int i = 0; i < 16; ++i) {
            const double v = rng.uniform(0.05, 4.0);
            nsi_by_block[b].push_back(v);
            att_by_block[b].push_back(1.0 / (1.0 + v));
        }
    const auto fixture = analysis::correlate_block_series(nsi_by_block, att_by_block);
    for (const auto& bc : fixture.blocks) {
        if (!bc.defined || bc.tau != -1.0)
            c.check(false, "fixture block " + std::to_string(bc.block) + ": tau != -1");
    }

    // trained model: coefficients live in [-1, 1], degenerate blocks flagged
    const auto data = neural::synth_dataset(neural::DatasetKind::spirals, 400, 0.1, 5, 2.0);
    neural::Hyper hyper;
    hyper.lr = 0.05;
    hyper.epochs = 40;
    hyper.batch_size = 32;
    hyper.weight_decay = 1e-4;
    const auto model = neural::train(experiment_config(neural::AdaptorKind::stepnet, 3), data, hyper);
    const auto result = analysis::nsi_attention_correlation(model.net, data.test_x);
    std::size_t defined = 0;
    for (const auto& bc : result.blocks) {
        if (!bc.defined) continue;
        ++defined;
        if (!(bc.tau >= -1.0 && bc.tau <= 1.0 && bc.rho >= -1.0 && bc.rho <= 1.0))
            c.check(false, "block " + std::to_string(bc.block) + ": coefficient outside [-1,1]");
    }
    c.check(defined > 0, "no defined blocks on the trained model");

    // untrained model: constant attention everywhere, all blocks undefined
    const auto init_net = neural::init_network(experiment_config(neural::AdaptorKind::stepnet, 3));
    const auto at_init = analysis::nsi_attention_correlation(init_net, data.test_x);
    for (const auto& bc : at_init.blocks)
        if (bc.defined) c.check(false, "init-time block " + std::to_string(bc.block) + " not undefined");
    c.finish();
}

}  // namespace

int main()
{
    std::printf("stiffkit acceptance suite\n");
    criterion1_theorem2();
    criterion2_lemma1_tns();
    criterion3_monotonicity_and_bounds();
    criterion4_gradients();
    criterion5_stepnet_init();
    criterion6_attention_one_reduction();
    criterion7_stiff_solver();
    criterion8_accuracy_direction();
    criteria9_10_ensemble();
    criterion11_correlation_oracles();
    criterion12_attention_pipeline();
    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
}
