#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stiffkit/linalg.hpp"
#include "stiffkit/ode.hpp"
#include "stiffkit/rng.hpp"

namespace stiffkit::neural {

// Which gating module multiplies each residual branch. The last four share
// the gate -> batch norm -> sigmoid tail and differ in what the gate reads.
enum class AdaptorKind {
    none,       // plain residual update, unit step
    se_style,   // sigmoid(W1 relu(W2 f)) squeeze-excite bottleneck on the branch output
    prev_only,  // gate reads x_t
    next_only,  // gate reads x_t + f
    diff,       // gate reads f
    stepnet,    // grouped gate reads (x_t, x_t + f); two-phase update
};

const char* adaptor_kind_name(AdaptorKind kind);
AdaptorKind adaptor_kind_from_name(const std::string& name);

struct NetworkConfig {
    std::size_t input_dim = 2;
    std::vector<std::size_t> stage_widths;
    std::vector<std::size_t> blocks_per_stage;
    AdaptorKind adaptor = AdaptorKind::none;
    std::size_t bottleneck_ratio = 2;  // reduced width r < d of the squeeze-excite bottleneck
    std::size_t num_classes = 2;
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t total_blocks() const;
};

struct Dense {
    Matrix w;
    Vec b;  // empty when the layer has no bias
};

// Batch normalization followed by the elementwise affine map
// w_ie * bn(x) + b_ie. At initialization w_ie = 0 and b_ie = -1 exactly, so
// the module emits -1 regardless of its input.
struct IebnState {
    Vec running_mean, running_var;
    Vec bn_gain, bn_bias;
    Vec w_ie, b_ie;
    double momentum = 0.1;
    double epsilon = 1e-5;
};

struct BlockParams {
    // residual branch f(x) = fc2.w * relu(fc1.w x + fc1.b) + fc2.b
    Dense fc1, fc2;
    // se_style (biasless, matching the bottleneck formula)
    Dense se_reduce, se_expand;
    // single-input gate for prev_only / next_only / diff
    Dense gate;
    // grouped gate for stepnet: output is [gate_prev.w x ; gate_next.w (x+f)]
    Dense gate_prev, gate_next;
    IebnState iebn;
};

struct ResidualNetwork {
    NetworkConfig config;
    // projections[s] maps into stage s's width; identity when widths already
    // match, a fixed (unlearned) random projection otherwise
    std::vector<Matrix> projections;
    std::vector<std::vector<BlockParams>> stages;
    Dense head;
};

ResidualNetwork init_network(const NetworkConfig& config);

enum class RunMode { train, eval };

struct ForwardRecord {
    ode::Trajectory trajectory;
    std::vector<Vec> attention_values;  // one d-vector per residual block; empty for kind none
    Vec logits;
    std::optional<double> loss;  // cross-entropy when a label was supplied
};

// Single-input forward pass. In train mode batch statistics are those of the
// singleton batch. `attention_override` replaces every adaptor output by a
// constant (the adaptor itself is skipped).
ForwardRecord forward(const ResidualNetwork& net, const Vec& x0, RunMode mode,
                      std::optional<double> attention_override = {},
                      std::optional<int> label = {});

// Batch-statistics snapshot from a training forward pass, one entry per
// block that carries batch norm state; used to update running statistics.
struct BatchNormStats {
    std::size_t stage = 0, block = 0;
    Vec mean, var;
};

// w_ie * bn(x) + b_ie per coordinate. Train mode normalizes with the batch
// statistics of `xs` (returned through the out parameters when given); eval
// mode uses the running statistics.
std::vector<Vec> iebn(const std::vector<Vec>& xs, const IebnState& state, RunMode mode,
                      Vec* batch_mean = nullptr, Vec* batch_var = nullptr);

// Two-input gate: concatenated grouped linear map, batch norm, sigmoid.
// Output lies strictly inside (0,1)^d. Train mode treats the pair as a
// singleton batch.
Vec stepnet_adaptor(const Vec& x, const Vec& x_next, const BlockParams& params, RunMode mode);

// Mean softmax cross-entropy over the batch plus exact reverse-mode
// gradients. `grads` must be a zeroed shape-copy of `net` (see zeros_like);
// running statistics are not touched — the caller applies `stats`.
double loss_and_gradients(const ResidualNetwork& net, const std::vector<Vec>& xs,
                          const std::vector<int>& ys, ResidualNetwork& grads,
                          std::vector<BatchNormStats>* stats = nullptr);

ResidualNetwork zeros_like(const ResidualNetwork& net);

enum class ParamClass { weight, bias, bn, buffer };

// Named view into one parameter tensor; the enumeration order is fixed, so
// aligned nets (parameters, gradients, momentum) traverse in lockstep.
struct ParamRef {
    std::string name;
    std::vector<double>* values = nullptr;
    ParamClass cls = ParamClass::weight;
};

std::vector<ParamRef> param_refs(ResidualNetwork& net);

enum class DatasetKind { blobs, moons, spirals };

DatasetKind dataset_kind_from_name(const std::string& name);
const char* dataset_kind_name(DatasetKind kind);

struct Dataset {
    std::string name;
    std::vector<Vec> train_x;
    std::vector<int> train_y;
    std::vector<Vec> test_x;
    std::vector<int> test_y;
};

// Deterministic synthetic 2-d classification sets, 80/20 split, features
// standardized on the training split.
Dataset synth_dataset(DatasetKind kind, std::size_t n, double noise, std::uint64_t seed,
                      double spiral_turns = 3.0);

struct Hyper {
    double lr = 0.1;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double weight_decay = 0.0;
    double momentum = 0.9;
};

struct TrainMetrics {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;  // kappa
    double final_loss = 0.0;
};

struct TrainedModel {
    ResidualNetwork net;
    TrainMetrics metrics;
};

// Plain SGD with momentum; single-threaded and bitwise deterministic for a
// fixed seed. Throws NumericError (with the epoch index) on NaN loss.
TrainedModel train(const NetworkConfig& config, const Dataset& data, const Hyper& hyper);

double evaluate_accuracy(const ResidualNetwork& net, const std::vector<Vec>& xs,
                         const std::vector<int>& ys);

// Eval-mode trajectories, one per input: stage boundaries set, recorded step
// sizes equal to the attention vectors (or scalar 1 for kind none).
std::vector<ode::Trajectory> extract_trajectories(const ResidualNetwork& net,
                                                  const std::vector<Vec>& inputs);

}  // namespace stiffkit::neural
