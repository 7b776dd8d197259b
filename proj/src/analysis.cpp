#include "stiffkit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stiffkit/errors.hpp"
#include "stiffkit/parallel.hpp"

namespace stiffkit::analysis {

namespace {

// Counts discordant pairs (strict y-inversions after sorting by x, with
// x-ties broken by y so they contribute nothing) by merge sort.
long long count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                           std::size_t hi)
{
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    long long count = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            count += static_cast<long long>(mid - i);
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<long>(lo), buf.begin() + static_cast<long>(hi),
              v.begin() + static_cast<long>(lo));
    return count;
}

long long tie_pairs(const Vec& v)
{
    Vec sorted = v;
    std::sort(sorted.begin(), sorted.end());
    long long pairs = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= sorted.size(); ++i) {
        if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
            ++run;
        } else {
            pairs += static_cast<long long>(run) * static_cast<long long>(run - 1) / 2;
            run = 1;
        }
    }
    return pairs;
}

struct KendallCounts {
    long long n0, n1, n2, n3, discordant, numerator;
};

KendallCounts kendall_counts(const Vec& xs, const Vec& ys)
{
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (xs[a] != xs[b]) return xs[a] < xs[b];
        return ys[a] < ys[b];
    });
    Vec y_sorted(n);
    for (std::size_t i = 0; i < n; ++i) y_sorted[i] = ys[order[i]];

    long long n3 = 0;  // pairs tied in both
    {
        std::vector<std::pair<double, double>> joint(n);
        for (std::size_t i = 0; i < n; ++i) joint[i] = {xs[i], ys[i]};
        std::sort(joint.begin(), joint.end());
        std::size_t run = 1;
        for (std::size_t i = 1; i <= n; ++i) {
            if (i < n && joint[i] == joint[i - 1]) {
                ++run;
            } else {
                n3 += static_cast<long long>(run) * static_cast<long long>(run - 1) / 2;
                run = 1;
            }
        }
    }

    KendallCounts c{};
    c.n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
    c.n1 = tie_pairs(xs);
    c.n2 = tie_pairs(ys);
    c.n3 = n3;
    Vec buf(n);
    c.discordant = count_inversions(y_sorted, buf, 0, n);
    const long long untied = c.n0 - c.n1 - c.n2 + c.n3;
    const long long concordant = untied - c.discordant;
    c.numerator = concordant - c.discordant;
    return c;
}

Vec average_ranks(const Vec& v)
{
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    Vec ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double kendall_tau(const Vec& xs, const Vec& ys, TauVariant variant)
{
    if (xs.size() != ys.size()) throw ValidationError("kendall_tau: length mismatch");
    if (xs.size() < 2) throw ValidationError("kendall_tau: need at least 2 points");
    const KendallCounts c = kendall_counts(xs, ys);
    if (variant == TauVariant::tau_a)
        return static_cast<double>(c.numerator) / static_cast<double>(c.n0);
    const double denom = std::sqrt(static_cast<double>(c.n0 - c.n1)) *
                         std::sqrt(static_cast<double>(c.n0 - c.n2));
    if (denom == 0.0) throw ValidationError("kendall_tau: constant input");
    return static_cast<double>(c.numerator) / denom;
}

double spearman_rho(const Vec& xs, const Vec& ys)
{
    if (xs.size() != ys.size()) throw ValidationError("spearman_rho: length mismatch");
    if (xs.size() < 2) throw ValidationError("spearman_rho: need at least 2 points");
    const Vec rx = average_ranks(xs);
    const Vec ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    const double mean = (n + 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double a = rx[i] - mean;
        const double b = ry[i] - mean;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0) throw ValidationError("spearman_rho: constant input");
    return sxy / std::sqrt(sxx * syy);
}

CorrelationReport correlate(const Vec& xs, const Vec& ys, TauVariant variant)
{
    CorrelationReport r;
    r.n = xs.size();
    r.kendall = kendall_tau(xs, ys, variant);
    r.spearman = spearman_rho(xs, ys);
    const KendallCounts c = kendall_counts(xs, ys);
    r.discordant = c.discordant;
    r.concordant = c.numerator + c.discordant;
    return r;
}

TnsExperimentResult tns_accuracy_experiment(const std::vector<neural::NetworkConfig>& configs,
                                            const neural::Dataset& data, const neural::Hyper& hyper,
                                            const TnsExperimentOptions& options)
{
    if (configs.empty()) throw ValidationError("tns_accuracy_experiment: no configs");

    TnsExperimentResult result;
    result.records.resize(configs.size());
    std::vector<std::string> failures(configs.size());

    parallel_for(configs.size(), options.threads, [&](std::size_t id) {
        try {
            const neural::TrainedModel model = neural::train(configs[id], data, hyper);
            const std::vector<ode::Trajectory> trajs =
                neural::extract_trajectories(model.net, data.test_x);
            metrics::ProfileSet profiles;
            profiles.reserve(trajs.size());
            for (const ode::Trajectory& t : trajs)
                profiles.push_back(metrics::nsi_profile(t, options.mode));
            if (options.pooled_mu) metrics::pool_stage_means(profiles);
            const metrics::TnsEstimate est = metrics::tns(profiles, options.grid);

            ExperimentRecord rec;
            rec.model_id = id;
            rec.adaptor = configs[id].adaptor;
            rec.seed = configs[id].seed;
            rec.accuracy = model.metrics.test_accuracy;
            rec.tns = est.value;
            rec.dataset = data.name;
            result.records[id] = rec;
        } catch (const std::exception& e) {
            failures[id] = e.what();
        }
    });

    for (std::size_t id = 0; id < configs.size(); ++id)
        if (!failures[id].empty())
            throw NumericError("tns_accuracy_experiment: model " + std::to_string(id) +
                                   " failed: " + failures[id],
                               id);

    Vec tns_values, accuracies;
    for (const ExperimentRecord& r : result.records) {
        tns_values.push_back(r.tns);
        accuracies.push_back(r.accuracy);
    }
    result.correlation = correlate(tns_values, accuracies);
    return result;
}

AttentionCorrelationResult correlate_block_series(const std::vector<Vec>& nsi_by_block,
                                                  const std::vector<Vec>& att_by_block)
{
    if (nsi_by_block.size() != att_by_block.size())
        throw ValidationError("correlate_block_series: block count mismatch");

    AttentionCorrelationResult result;
    for (std::size_t b = 0; b < nsi_by_block.size(); ++b) {
        BlockCorrelation bc;
        bc.block = b;
        const Vec& xs = nsi_by_block[b];
        const Vec& ys = att_by_block[b];
        const auto constant = [](const Vec& v) {
            return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
        };
        if (xs.size() >= 2 && !constant(xs) && !constant(ys)) {
            bc.tau = kendall_tau(xs, ys);
            bc.rho = spearman_rho(xs, ys);
            bc.defined = true;
        }
        result.blocks.push_back(bc);
    }

    // pooled distribution of per-block tau values, ten bins over [-1, 1]
    result.histogram_edges.resize(11);
    for (std::size_t i = 0; i <= 10; ++i)
        result.histogram_edges[i] = -1.0 + 0.2 * static_cast<double>(i);
    result.histogram.assign(10, 0);
    for (const BlockCorrelation& bc : result.blocks) {
        if (!bc.defined) continue;
        auto bin = static_cast<std::size_t>(std::min(9.0, std::floor((bc.tau + 1.0) / 0.2)));
        ++result.histogram[bin];
    }
    return result;
}

AttentionCorrelationResult nsi_attention_correlation(const neural::ResidualNetwork& net,
                                                     const std::vector<Vec>& inputs)
{
    if (net.config.adaptor == neural::AdaptorKind::none)
        throw ValidationError("nsi_attention_correlation: model has no attention");
    if (inputs.empty()) throw ValidationError("nsi_attention_correlation: no inputs");

    const std::size_t blocks = net.config.total_blocks();
    std::vector<Vec> nsi_by_block(blocks), att_by_block(blocks);

    for (const Vec& x : inputs) {
        const neural::ForwardRecord rec = neural::forward(net, x, neural::RunMode::eval);
        // per block: the realized unit-step index and the mean attention value
        std::size_t block = 0;
        const auto& bounds = rec.trajectory.stage_boundaries;
        for (std::size_t s = 0; s < bounds.size(); ++s) {
            const std::size_t first = bounds[s];
            const std::size_t last = s + 1 < bounds.size() ? bounds[s + 1] - 1
                                                           : rec.trajectory.states.size() - 1;
            for (std::size_t t = first; t + 1 <= last; ++t, ++block) {
                nsi_by_block[block].push_back(
                    metrics::nsi(rec.trajectory, t, metrics::NsiMode::unit_step));
                const Vec& att = rec.attention_values[block];
                double mean = 0.0;
                for (double v : att) mean += v;
                att_by_block[block].push_back(mean / static_cast<double>(att.size()));
            }
        }
    }
    return correlate_block_series(nsi_by_block, att_by_block);
}

const std::vector<ode::Trajectory>& select_proxy_gt(
    const std::vector<ExperimentRecord>& records,
    const std::vector<std::vector<ode::Trajectory>>& trajectories_by_model,
    std::size_t* selected_model_id)
{
    if (records.empty() || records.size() != trajectories_by_model.size())
        throw ValidationError("select_proxy_gt: records empty or misaligned");
    std::size_t best = 0;
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].accuracy > records[best].accuracy ||
            (records[i].accuracy == records[best].accuracy &&
             records[i].model_id < records[best].model_id))
            best = i;
    }
    if (selected_model_id) *selected_model_id = records[best].model_id;
    return trajectories_by_model[best];
}

}  // namespace stiffkit::analysis
