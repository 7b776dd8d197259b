#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stiffkit/metrics.hpp"
#include "stiffkit/neural.hpp"

namespace stiffkit::analysis {

enum class TauVariant { tau_a, tau_b };

// Kendall rank correlation via merge-sort inversion counting; tie pairs
// count as neither concordant nor discordant. tau_a divides by n(n-1)/2,
// tau_b by the tie-corrected denominator.
double kendall_tau(const Vec& xs, const Vec& ys, TauVariant variant = TauVariant::tau_a);

// Pearson correlation of average ranks. Throws "constant input" when either
// side has zero rank variance.
double spearman_rho(const Vec& xs, const Vec& ys);

struct CorrelationReport {
    double kendall = 0.0;
    double spearman = 0.0;
    std::size_t n = 0;
    long long concordant = 0;
    long long discordant = 0;
};

CorrelationReport correlate(const Vec& xs, const Vec& ys, TauVariant variant = TauVariant::tau_a);

// One trained ensemble member.
struct ExperimentRecord {
    std::size_t model_id = 0;
    neural::AdaptorKind adaptor = neural::AdaptorKind::none;
    std::uint64_t seed = 0;
    double accuracy = 0.0;  // kappa, test accuracy
    double tns = 0.0;
    std::string dataset;
};

struct TnsExperimentOptions {
    metrics::TnsGrid grid;
    metrics::NsiMode mode = metrics::NsiMode::recorded_step;
    bool pooled_mu = false;
    std::size_t threads = 1;
};

struct TnsExperimentResult {
    std::vector<ExperimentRecord> records;
    CorrelationReport correlation;  // tns vs accuracy
};

// Trains every config, measures each model's total stiffness over the test
// trajectories with the shared grid, then rank-correlates it with accuracy.
TnsExperimentResult tns_accuracy_experiment(const std::vector<neural::NetworkConfig>& configs,
                                            const neural::Dataset& data, const neural::Hyper& hyper,
                                            const TnsExperimentOptions& options);

struct BlockCorrelation {
    std::size_t block = 0;
    double tau = 0.0;
    double rho = 0.0;
    bool defined = false;  // false when the series are constant across inputs
};

struct AttentionCorrelationResult {
    std::vector<BlockCorrelation> blocks;
    std::vector<double> histogram_edges;   // bins over [-1, 1]
    std::vector<std::size_t> histogram;    // counts of defined per-block tau values
};

// Correlates, per residual block and across inputs, the block's realized
// per-transition index against the mean attention value of that block.
AttentionCorrelationResult nsi_attention_correlation(const neural::ResidualNetwork& net,
                                                     const std::vector<Vec>& inputs);

// Same computation on injected series; first index is the block, second the
// input. Used by the model pipeline and directly testable on fixtures.
AttentionCorrelationResult correlate_block_series(const std::vector<Vec>& nsi_by_block,
                                                  const std::vector<Vec>& att_by_block);

// Trajectories of the best-performing record; ties break toward the lower
// model id. `trajectories_by_model` is indexed like `records`.
const std::vector<ode::Trajectory>& select_proxy_gt(
    const std::vector<ExperimentRecord>& records,
    const std::vector<std::vector<ode::Trajectory>>& trajectories_by_model,
    std::size_t* selected_model_id = nullptr);

}  // namespace stiffkit::analysis
