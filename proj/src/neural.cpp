#include "stiffkit/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stiffkit/errors.hpp"

namespace stiffkit::neural {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec relu(const Vec& v)
{
    Vec r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = v[i] > 0.0 ? v[i] : 0.0;
    return r;
}

Vec dense_forward(const Dense& d, const Vec& x)
{
    Vec y = matvec(d.w, x);
    if (!d.b.empty())
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += d.b[i];
    return y;
}

// dy -> dx; accumulates into the layer's gradient slot
Vec dense_backward(const Dense& d, Dense& grad, const Vec& x, const Vec& dy)
{
    add_outer(grad.w, dy, x);
    if (!grad.b.empty())
        for (std::size_t i = 0; i < dy.size(); ++i) grad.b[i] += dy[i];
    return matvec_transposed(d.w, dy);
}

Dense make_dense(Rng& rng, std::size_t out, std::size_t in, bool bias)
{
    Dense d;
    d.w = Matrix(out, in);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : d.w.data) v = rng.uniform(-bound, bound);
    if (bias) {
        d.b.resize(out);
        for (double& v : d.b) v = rng.uniform(-bound, bound);
    }
    return d;
}

bool uses_iebn(AdaptorKind kind)
{
    return kind == AdaptorKind::prev_only || kind == AdaptorKind::next_only ||
           kind == AdaptorKind::diff || kind == AdaptorKind::stepnet;
}

// Everything needed to replay one block backwards, for the whole batch.
struct BlockTape {
    std::vector<Vec> x, u, r, f, xn;
    std::vector<Vec> z, zhat, bn_out, ie_out;
    Vec mean, var;
    std::vector<Vec> se_z1, se_q, se_p;
    std::vector<Vec> att;
    std::vector<Vec> y;
};

struct Tape {
    std::vector<std::vector<Vec>> stage_entry;         // [stage][elem]
    std::vector<std::vector<BlockTape>> blocks;        // [stage][block]
    std::vector<Vec> logits;
};

void forward_batch(const ResidualNetwork& net, const std::vector<Vec>& xs, RunMode mode,
                   const std::optional<double>& attention_override, Tape& tape)
{
    const NetworkConfig& cfg = net.config;
    const AdaptorKind kind = cfg.adaptor;
    const std::size_t batch = xs.size();
    const std::size_t n_stages = cfg.stage_widths.size();

    tape.stage_entry.assign(n_stages, {});
    tape.blocks.assign(n_stages, {});

    std::vector<Vec> x(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        if (xs[i].size() != cfg.input_dim) throw ValidationError("forward: input dimension mismatch");
        x[i] = xs[i];
    }

    std::size_t global_block = 0;
    for (std::size_t s = 0; s < n_stages; ++s) {
        for (std::size_t i = 0; i < batch; ++i) x[i] = matvec(net.projections[s], x[i]);
        tape.stage_entry[s] = x;
        const std::size_t d = cfg.stage_widths[s];

        tape.blocks[s].resize(cfg.blocks_per_stage[s]);
        for (std::size_t t = 0; t < cfg.blocks_per_stage[s]; ++t, ++global_block) {
            const BlockParams& p = net.stages[s][t];
            BlockTape& bt = tape.blocks[s][t];
            bt.x = x;
            bt.u.resize(batch);
            bt.r.resize(batch);
            bt.f.resize(batch);
            bt.xn.resize(batch);
            bt.att.resize(batch);
            bt.y.resize(batch);

            for (std::size_t i = 0; i < batch; ++i) {
                bt.u[i] = dense_forward(p.fc1, bt.x[i]);
                bt.r[i] = relu(bt.u[i]);
                bt.f[i] = dense_forward(p.fc2, bt.r[i]);
                bt.xn[i] = add(bt.x[i], bt.f[i]);
            }

            if (attention_override) {
                for (std::size_t i = 0; i < batch; ++i) bt.att[i].assign(d, *attention_override);
            } else if (kind == AdaptorKind::se_style) {
                bt.se_z1.resize(batch);
                bt.se_q.resize(batch);
                bt.se_p.resize(batch);
                for (std::size_t i = 0; i < batch; ++i) {
                    bt.se_z1[i] = dense_forward(p.se_reduce, bt.f[i]);
                    bt.se_q[i] = relu(bt.se_z1[i]);
                    bt.se_p[i] = dense_forward(p.se_expand, bt.se_q[i]);
                    bt.att[i].resize(d);
                    for (std::size_t j = 0; j < d; ++j) bt.att[i][j] = sigmoid(bt.se_p[i][j]);
                }
            } else if (uses_iebn(kind)) {
                bt.z.resize(batch);
                for (std::size_t i = 0; i < batch; ++i) {
                    if (kind == AdaptorKind::stepnet) {
                        const Vec top = dense_forward(p.gate_prev, bt.x[i]);
                        const Vec bot = dense_forward(p.gate_next, bt.xn[i]);
                        bt.z[i].resize(d);
                        std::copy(top.begin(), top.end(), bt.z[i].begin());
                        std::copy(bot.begin(), bot.end(), bt.z[i].begin() + static_cast<long>(top.size()));
                    } else {
                        const Vec& a_in = kind == AdaptorKind::prev_only ? bt.x[i]
                                          : kind == AdaptorKind::next_only ? bt.xn[i]
                                                                           : bt.f[i];
                        bt.z[i] = dense_forward(p.gate, a_in);
                    }
                }
                // batch statistics in train mode, running in eval mode
                if (mode == RunMode::train) {
                    bt.mean.assign(d, 0.0);
                    bt.var.assign(d, 0.0);
                    for (std::size_t i = 0; i < batch; ++i)
                        for (std::size_t j = 0; j < d; ++j) bt.mean[j] += bt.z[i][j];
                    for (double& m : bt.mean) m /= static_cast<double>(batch);
                    for (std::size_t i = 0; i < batch; ++i)
                        for (std::size_t j = 0; j < d; ++j) {
                            const double c = bt.z[i][j] - bt.mean[j];
                            bt.var[j] += c * c;
                        }
                    for (double& v : bt.var) v /= static_cast<double>(batch);
                } else {
                    bt.mean = p.iebn.running_mean;
                    bt.var = p.iebn.running_var;
                }
                bt.zhat.resize(batch);
                bt.bn_out.resize(batch);
                bt.ie_out.resize(batch);
                for (std::size_t i = 0; i < batch; ++i) {
                    bt.zhat[i].resize(d);
                    bt.bn_out[i].resize(d);
                    bt.ie_out[i].resize(d);
                    bt.att[i].resize(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        const double inv = 1.0 / std::sqrt(bt.var[j] + p.iebn.epsilon);
                        bt.zhat[i][j] = (bt.z[i][j] - bt.mean[j]) * inv;
                        bt.bn_out[i][j] = p.iebn.bn_gain[j] * bt.zhat[i][j] + p.iebn.bn_bias[j];
                        bt.ie_out[i][j] = p.iebn.w_ie[j] * bt.bn_out[i][j] + p.iebn.b_ie[j];
                        bt.att[i][j] = sigmoid(bt.ie_out[i][j]);
                    }
                }
            }

            for (std::size_t i = 0; i < batch; ++i) {
                if (kind == AdaptorKind::none && !attention_override) {
                    bt.y[i] = bt.xn[i];
                } else {
                    bt.y[i].resize(d);
                    for (std::size_t j = 0; j < d; ++j)
                        bt.y[i][j] = bt.x[i][j] + bt.f[i][j] * bt.att[i][j];
                }
                if (!all_finite(bt.y[i]))
                    throw NumericError("numeric blowup at block " + std::to_string(global_block),
                                       global_block);
            }
            x = bt.y;
        }
    }

    tape.logits.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) tape.logits[i] = dense_forward(net.head, x[i]);
}

Vec softmax(const Vec& logits)
{
    Vec p(logits.size());
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

void backward_batch(const ResidualNetwork& net, const Tape& tape, RunMode mode,
                    const std::vector<Vec>& dlogits, ResidualNetwork& grads)
{
    const NetworkConfig& cfg = net.config;
    const AdaptorKind kind = cfg.adaptor;
    const std::size_t batch = dlogits.size();
    const std::size_t n_stages = cfg.stage_widths.size();

    // head
    std::vector<Vec> dx(batch);
    const std::vector<Vec>& last_y = tape.blocks.back().back().y;
    for (std::size_t i = 0; i < batch; ++i)
        dx[i] = dense_backward(net.head, grads.head, last_y[i], dlogits[i]);

    for (std::size_t s = n_stages; s-- > 0;) {
        const std::size_t d = cfg.stage_widths[s];
        for (std::size_t t = cfg.blocks_per_stage[s]; t-- > 0;) {
            const BlockParams& p = net.stages[s][t];
            BlockParams& g = grads.stages[s][t];
            const BlockTape& bt = tape.blocks[s][t];

            std::vector<Vec> dx_in(batch, Vec(d, 0.0));
            // batch-coupled BN backward needs the whole batch's dzhat first
            std::vector<Vec> dzhat(batch);
            std::vector<Vec> datt(batch);
            std::vector<Vec> df(batch, Vec(d, 0.0));
            std::vector<Vec> dxn(batch, Vec(d, 0.0));

            for (std::size_t i = 0; i < batch; ++i) {
                const Vec& dy = dx[i];
                // y = x + f (none) or y = x + f*att
                for (std::size_t j = 0; j < d; ++j) dx_in[i][j] += dy[j];
                if (bt.att[i].empty()) {
                    for (std::size_t j = 0; j < d; ++j) df[i][j] += dy[j];
                } else {
                    datt[i].resize(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        df[i][j] += dy[j] * bt.att[i][j];
                        datt[i][j] = dy[j] * bt.f[i][j];
                    }
                }
            }

            if (kind == AdaptorKind::se_style && !bt.se_p.empty()) {
                // se_style: att = sigmoid(We relu(Wr f))
                for (std::size_t i = 0; i < batch; ++i) {
                    Vec dp(d);
                    for (std::size_t j = 0; j < d; ++j)
                        dp[j] = datt[i][j] * bt.att[i][j] * (1.0 - bt.att[i][j]);
                    Vec dq = dense_backward(p.se_expand, g.se_expand, bt.se_q[i], dp);
                    for (std::size_t j = 0; j < dq.size(); ++j)
                        dq[j] = bt.se_z1[i][j] > 0.0 ? dq[j] : 0.0;
                    const Vec dfa = dense_backward(p.se_reduce, g.se_reduce, bt.f[i], dq);
                    for (std::size_t j = 0; j < d; ++j) df[i][j] += dfa[j];
                }
            } else if (!bt.z.empty()) {
                // sigmoid + IE backward, elementwise
                std::vector<Vec> dbn(batch, Vec(d, 0.0));
                for (std::size_t i = 0; i < batch; ++i) {
                    dzhat[i].assign(d, 0.0);
                    for (std::size_t j = 0; j < d; ++j) {
                        const double die = datt[i][j] * bt.att[i][j] * (1.0 - bt.att[i][j]);
                        g.iebn.w_ie[j] += die * bt.bn_out[i][j];
                        g.iebn.b_ie[j] += die;
                        dbn[i][j] = die * p.iebn.w_ie[j];
                        g.iebn.bn_gain[j] += dbn[i][j] * bt.zhat[i][j];
                        g.iebn.bn_bias[j] += dbn[i][j];
                        dzhat[i][j] = dbn[i][j] * p.iebn.bn_gain[j];
                    }
                }
                // BN backward; train mode couples the batch through the stats
                std::vector<Vec> dz(batch, Vec(d, 0.0));
                const bool train_stats = mode == RunMode::train;
                Vec mean_dzhat(d, 0.0), mean_dzhat_zhat(d, 0.0);
                if (train_stats) {
                    for (std::size_t i = 0; i < batch; ++i)
                        for (std::size_t j = 0; j < d; ++j) {
                            mean_dzhat[j] += dzhat[i][j];
                            mean_dzhat_zhat[j] += dzhat[i][j] * bt.zhat[i][j];
                        }
                    for (std::size_t j = 0; j < d; ++j) {
                        mean_dzhat[j] /= static_cast<double>(batch);
                        mean_dzhat_zhat[j] /= static_cast<double>(batch);
                    }
                }
                for (std::size_t i = 0; i < batch; ++i)
                    for (std::size_t j = 0; j < d; ++j) {
                        const double inv = 1.0 / std::sqrt(bt.var[j] + p.iebn.epsilon);
                        dz[i][j] = train_stats
                                       ? inv * (dzhat[i][j] - mean_dzhat[j] -
                                                bt.zhat[i][j] * mean_dzhat_zhat[j])
                                       : inv * dzhat[i][j];
                    }
                // gate backward
                for (std::size_t i = 0; i < batch; ++i) {
                    if (kind == AdaptorKind::stepnet) {
                        const std::size_t half = d / 2;
                        Vec dz_top(dz[i].begin(), dz[i].begin() + static_cast<long>(half));
                        Vec dz_bot(dz[i].begin() + static_cast<long>(half), dz[i].end());
                        const Vec dxa = dense_backward(p.gate_prev, g.gate_prev, bt.x[i], dz_top);
                        const Vec dxb = dense_backward(p.gate_next, g.gate_next, bt.xn[i], dz_bot);
                        for (std::size_t j = 0; j < d; ++j) {
                            dx_in[i][j] += dxa[j];
                            dxn[i][j] += dxb[j];
                        }
                    } else {
                        const Vec& a_in = kind == AdaptorKind::prev_only ? bt.x[i]
                                          : kind == AdaptorKind::next_only ? bt.xn[i]
                                                                           : bt.f[i];
                        const Vec da = dense_backward(p.gate, g.gate, a_in, dz[i]);
                        if (kind == AdaptorKind::prev_only)
                            for (std::size_t j = 0; j < d; ++j) dx_in[i][j] += da[j];
                        else if (kind == AdaptorKind::next_only)
                            for (std::size_t j = 0; j < d; ++j) dxn[i][j] += da[j];
                        else
                            for (std::size_t j = 0; j < d; ++j) df[i][j] += da[j];
                    }
                }
            }

            // xn = x + f
            for (std::size_t i = 0; i < batch; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    dx_in[i][j] += dxn[i][j];
                    df[i][j] += dxn[i][j];
                }

            // residual branch backward
            for (std::size_t i = 0; i < batch; ++i) {
                Vec dr = dense_backward(p.fc2, g.fc2, bt.r[i], df[i]);
                for (std::size_t j = 0; j < dr.size(); ++j)
                    dr[j] = bt.u[i][j] > 0.0 ? dr[j] : 0.0;
                const Vec dxb = dense_backward(p.fc1, g.fc1, bt.x[i], dr);
                for (std::size_t j = 0; j < d; ++j) dx_in[i][j] += dxb[j];
            }
            dx = std::move(dx_in);
        }
        // back through the (fixed) stage projection
        if (s > 0)
            for (std::size_t i = 0; i < batch; ++i)
                dx[i] = matvec_transposed(net.projections[s], dx[i]);
    }
}

ode::Trajectory trajectory_from_tape(const ResidualNetwork& net, const Tape& tape, std::size_t elem)
{
    const NetworkConfig& cfg = net.config;
    // gate values recorded as step sizes whenever they exist (an override on a
    // plain net counts: the update used x + f * att either way)
    const bool vector_steps = !tape.blocks.front().front().att[elem].empty();

    ode::Trajectory traj;
    traj.source = ode::Trajectory::Source::network;
    traj.vector_steps = vector_steps;
    traj.stage_boundaries.clear();

    for (std::size_t s = 0; s < cfg.stage_widths.size(); ++s) {
        traj.stage_boundaries.push_back(traj.states.size());
        if (s > 0) {
            // transition into this stage: excluded from any index, dummy step
            if (vector_steps)
                traj.step_sizes.push_back(Vec(cfg.stage_widths[s], 1.0));
            else
                traj.step_sizes.push_back({1.0});
        }
        traj.states.push_back(tape.stage_entry[s][elem]);
        for (std::size_t t = 0; t < cfg.blocks_per_stage[s]; ++t) {
            const BlockTape& bt = tape.blocks[s][t];
            if (vector_steps)
                traj.step_sizes.push_back(bt.att[elem]);
            else
                traj.step_sizes.push_back({1.0});
            traj.states.push_back(bt.y[elem]);
        }
    }
    return traj;
}

}  // namespace

const char* adaptor_kind_name(AdaptorKind kind)
{
    switch (kind) {
        case AdaptorKind::none: return "none";
        case AdaptorKind::se_style: return "se_style";
        case AdaptorKind::prev_only: return "prev_only";
        case AdaptorKind::next_only: return "next_only";
        case AdaptorKind::diff: return "diff";
        case AdaptorKind::stepnet: return "stepnet";
    }
    return "none";
}

AdaptorKind adaptor_kind_from_name(const std::string& name)
{
    for (AdaptorKind k : {AdaptorKind::none, AdaptorKind::se_style, AdaptorKind::prev_only,
                          AdaptorKind::next_only, AdaptorKind::diff, AdaptorKind::stepnet})
        if (name == adaptor_kind_name(k)) return k;
    throw ValidationError("unknown adaptor kind: " + name);
}

void NetworkConfig::validate() const
{
    if (input_dim < 1) throw ValidationError("config: input_dim must be >= 1");
    if (stage_widths.empty()) throw ValidationError("config: stage_widths is empty");
    if (stage_widths.size() != blocks_per_stage.size())
        throw ValidationError("config: stage_widths and blocks_per_stage length mismatch");
    for (std::size_t w : stage_widths) {
        if (w < 2) throw ValidationError("config: stage widths must be >= 2");
        if (adaptor == AdaptorKind::stepnet && w % 2 != 0)
            throw ValidationError("config: stepnet requires even stage widths (two gate groups)");
    }
    for (std::size_t b : blocks_per_stage)
        if (b < 2) throw ValidationError("config: blocks_per_stage must be >= 2");
    if (num_classes < 2) throw ValidationError("config: num_classes must be >= 2");
    const std::size_t min_width = *std::min_element(stage_widths.begin(), stage_widths.end());
    if (bottleneck_ratio < 1 || bottleneck_ratio >= min_width)
        throw ValidationError("config: bottleneck_ratio must satisfy 1 <= r < min stage width");
}

std::size_t NetworkConfig::total_blocks() const
{
    return std::accumulate(blocks_per_stage.begin(), blocks_per_stage.end(), std::size_t{0});
}

ResidualNetwork init_network(const NetworkConfig& config)
{
    config.validate();
    Rng rng(config.seed);

    ResidualNetwork net;
    net.config = config;

    std::size_t prev = config.input_dim;
    for (std::size_t w : config.stage_widths) {
        if (w == prev) {
            net.projections.push_back(Matrix::identity(w));
        } else {
            Matrix m(w, prev);
            const double s = 1.0 / std::sqrt(static_cast<double>(prev));
            for (double& v : m.data) v = rng.normal() * s;
            net.projections.push_back(std::move(m));
        }
        prev = w;
    }

    for (std::size_t s = 0; s < config.stage_widths.size(); ++s) {
        const std::size_t d = config.stage_widths[s];
        std::vector<BlockParams> blocks(config.blocks_per_stage[s]);
        for (BlockParams& p : blocks) {
            p.fc1 = make_dense(rng, d, d, true);
            p.fc2 = make_dense(rng, d, d, true);
            switch (config.adaptor) {
                case AdaptorKind::none:
                    break;
                case AdaptorKind::se_style:
                    p.se_reduce = make_dense(rng, config.bottleneck_ratio, d, false);
                    p.se_expand = make_dense(rng, d, config.bottleneck_ratio, false);
                    break;
                case AdaptorKind::prev_only:
                case AdaptorKind::next_only:
                case AdaptorKind::diff:
                    p.gate = make_dense(rng, d, d, true);
                    break;
                case AdaptorKind::stepnet:
                    p.gate_prev = make_dense(rng, d / 2, d, true);
                    p.gate_next = make_dense(rng, d / 2, d, true);
                    break;
            }
            if (uses_iebn(config.adaptor)) {
                p.iebn.running_mean.assign(d, 0.0);
                p.iebn.running_var.assign(d, 1.0);
                p.iebn.bn_gain.assign(d, 1.0);
                p.iebn.bn_bias.assign(d, 0.0);
                p.iebn.w_ie.assign(d, 0.0);
                p.iebn.b_ie.assign(d, -1.0);
            }
        }
        net.stages.push_back(std::move(blocks));
    }

    net.head = make_dense(rng, config.num_classes, config.stage_widths.back(), true);
    return net;
}

std::vector<ParamRef> param_refs(ResidualNetwork& net)
{
    std::vector<ParamRef> refs;
    auto push_dense = [&refs](Dense& d, const std::string& name) {
        if (!d.w.data.empty()) refs.push_back({name + ".w", &d.w.data, ParamClass::weight});
        if (!d.b.empty()) refs.push_back({name + ".b", &d.b, ParamClass::bias});
    };

    for (std::size_t s = 0; s < net.projections.size(); ++s)
        refs.push_back({"proj" + std::to_string(s) + ".w", &net.projections[s].data, ParamClass::buffer});

    for (std::size_t s = 0; s < net.stages.size(); ++s) {
        for (std::size_t t = 0; t < net.stages[s].size(); ++t) {
            BlockParams& p = net.stages[s][t];
            const std::string prefix = "stage" + std::to_string(s) + ".block" + std::to_string(t);
            push_dense(p.fc1, prefix + ".fc1");
            push_dense(p.fc2, prefix + ".fc2");
            push_dense(p.se_reduce, prefix + ".se_reduce");
            push_dense(p.se_expand, prefix + ".se_expand");
            push_dense(p.gate, prefix + ".gate");
            push_dense(p.gate_prev, prefix + ".gate_prev");
            push_dense(p.gate_next, prefix + ".gate_next");
            if (!p.iebn.bn_gain.empty()) {
                refs.push_back({prefix + ".iebn.bn_gain", &p.iebn.bn_gain, ParamClass::bn});
                refs.push_back({prefix + ".iebn.bn_bias", &p.iebn.bn_bias, ParamClass::bn});
                refs.push_back({prefix + ".iebn.w_ie", &p.iebn.w_ie, ParamClass::bn});
                refs.push_back({prefix + ".iebn.b_ie", &p.iebn.b_ie, ParamClass::bn});
                refs.push_back({prefix + ".iebn.running_mean", &p.iebn.running_mean, ParamClass::buffer});
                refs.push_back({prefix + ".iebn.running_var", &p.iebn.running_var, ParamClass::buffer});
            }
        }
    }
    push_dense(net.head, "head");
    return refs;
}

ResidualNetwork zeros_like(const ResidualNetwork& net)
{
    ResidualNetwork z = net;
    auto zero_dense = [](Dense& d) {
        std::fill(d.w.data.begin(), d.w.data.end(), 0.0);
        std::fill(d.b.begin(), d.b.end(), 0.0);
    };
    for (Matrix& m : z.projections) std::fill(m.data.begin(), m.data.end(), 0.0);
    for (auto& stage : z.stages)
        for (BlockParams& p : stage) {
            zero_dense(p.fc1);
            zero_dense(p.fc2);
            zero_dense(p.se_reduce);
            zero_dense(p.se_expand);
            zero_dense(p.gate);
            zero_dense(p.gate_prev);
            zero_dense(p.gate_next);
            for (Vec* v : {&p.iebn.running_mean, &p.iebn.running_var, &p.iebn.bn_gain,
                           &p.iebn.bn_bias, &p.iebn.w_ie, &p.iebn.b_ie})
                std::fill(v->begin(), v->end(), 0.0);
        }
    zero_dense(z.head);
    return z;
}

std::vector<Vec> iebn(const std::vector<Vec>& xs, const IebnState& state, RunMode mode,
                      Vec* batch_mean, Vec* batch_var)
{
    if (xs.empty()) throw ValidationError("iebn: empty batch");
    const std::size_t d = state.bn_gain.size();
    for (const Vec& x : xs)
        if (x.size() != d) throw ValidationError("iebn: input width mismatch");

    Vec mean, var;
    if (mode == RunMode::train) {
        mean.assign(d, 0.0);
        var.assign(d, 0.0);
        for (const Vec& x : xs)
            for (std::size_t j = 0; j < d; ++j) mean[j] += x[j];
        for (double& m : mean) m /= static_cast<double>(xs.size());
        for (const Vec& x : xs)
            for (std::size_t j = 0; j < d; ++j) {
                const double c = x[j] - mean[j];
                var[j] += c * c;
            }
        for (double& v : var) v /= static_cast<double>(xs.size());
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }
    if (batch_mean) *batch_mean = mean;
    if (batch_var) *batch_var = var;

    std::vector<Vec> out(xs.size(), Vec(d, 0.0));
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double zhat = (xs[i][j] - mean[j]) / std::sqrt(var[j] + state.epsilon);
            const double bn = state.bn_gain[j] * zhat + state.bn_bias[j];
            out[i][j] = state.w_ie[j] * bn + state.b_ie[j];
        }
    return out;
}

Vec stepnet_adaptor(const Vec& x, const Vec& x_next, const BlockParams& params, RunMode mode)
{
    if (x.size() != x_next.size()) throw ValidationError("stepnet_adaptor: input dimension mismatch");
    if (params.gate_prev.w.cols != x.size())
        throw ValidationError("stepnet_adaptor: gate width mismatch");
    const Vec top = dense_forward(params.gate_prev, x);
    const Vec bot = dense_forward(params.gate_next, x_next);
    Vec z(top.size() + bot.size());
    std::copy(top.begin(), top.end(), z.begin());
    std::copy(bot.begin(), bot.end(), z.begin() + static_cast<long>(top.size()));
    const std::vector<Vec> ie = iebn({z}, params.iebn, mode);
    Vec att(z.size());
    for (std::size_t j = 0; j < att.size(); ++j) att[j] = sigmoid(ie[0][j]);
    return att;
}

ForwardRecord forward(const ResidualNetwork& net, const Vec& x0, RunMode mode,
                      std::optional<double> attention_override, std::optional<int> label)
{
    Tape tape;
    forward_batch(net, {x0}, mode, attention_override, tape);

    ForwardRecord rec;
    rec.trajectory = trajectory_from_tape(net, tape, 0);
    rec.logits = tape.logits[0];
    if (net.config.adaptor != AdaptorKind::none || attention_override) {
        for (const auto& stage : tape.blocks)
            for (const BlockTape& bt : stage) rec.attention_values.push_back(bt.att[0]);
    }
    if (label) {
        const Vec probs = softmax(rec.logits);
        rec.loss = -std::log(std::max(probs[static_cast<std::size_t>(*label)], 1e-300));
    }
    return rec;
}

double loss_and_gradients(const ResidualNetwork& net, const std::vector<Vec>& xs,
                          const std::vector<int>& ys, ResidualNetwork& grads,
                          std::vector<BatchNormStats>* stats)
{
    if (xs.empty() || xs.size() != ys.size())
        throw ValidationError("loss_and_gradients: empty or mismatched batch");
    for (int y : ys)
        if (y < 0 || static_cast<std::size_t>(y) >= net.config.num_classes)
            throw ValidationError("loss_and_gradients: label out of range");

    Tape tape;
    forward_batch(net, xs, RunMode::train, {}, tape);

    const std::size_t batch = xs.size();
    double loss = 0.0;
    std::vector<Vec> dlogits(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        const Vec probs = softmax(tape.logits[i]);
        loss += -std::log(std::max(probs[static_cast<std::size_t>(ys[i])], 1e-300));
        dlogits[i] = probs;
        dlogits[i][static_cast<std::size_t>(ys[i])] -= 1.0;
        for (double& v : dlogits[i]) v /= static_cast<double>(batch);
    }
    loss /= static_cast<double>(batch);

    backward_batch(net, tape, RunMode::train, dlogits, grads);

    if (stats && uses_iebn(net.config.adaptor)) {
        for (std::size_t s = 0; s < tape.blocks.size(); ++s)
            for (std::size_t t = 0; t < tape.blocks[s].size(); ++t)
                stats->push_back({s, t, tape.blocks[s][t].mean, tape.blocks[s][t].var});
    }
    return loss;
}

DatasetKind dataset_kind_from_name(const std::string& name)
{
    if (name == "blobs") return DatasetKind::blobs;
    if (name == "moons") return DatasetKind::moons;
    if (name == "spirals") return DatasetKind::spirals;
    throw ValidationError("unknown dataset kind: " + name);
}

const char* dataset_kind_name(DatasetKind kind)
{
    switch (kind) {
        case DatasetKind::blobs: return "blobs";
        case DatasetKind::moons: return "moons";
        case DatasetKind::spirals: return "spirals";
    }
    return "blobs";
}

Dataset synth_dataset(DatasetKind kind, std::size_t n, double noise, std::uint64_t seed,
                      double spiral_turns)
{
    if (n < 20) throw ValidationError("synth_dataset: n must be >= 20");
    Rng rng(seed);

    std::vector<Vec> points(n);
    std::vector<int> labels(n);
    constexpr double kPi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % 2);
        Vec p(2, 0.0);
        switch (kind) {
            case DatasetKind::blobs: {
                p[0] = cls == 0 ? -2.0 : 2.0;
                p[1] = 0.0;
                break;
            }
            case DatasetKind::moons: {
                const double t = rng.uniform() * kPi;
                if (cls == 0) {
                    p[0] = std::cos(t);
                    p[1] = std::sin(t);
                } else {
                    p[0] = 1.0 - std::cos(t);
                    p[1] = 0.5 - std::sin(t);
                }
                break;
            }
            case DatasetKind::spirals: {
                const double t = rng.uniform();
                const double theta = 2.0 * kPi * spiral_turns * t + (cls == 0 ? 0.0 : kPi);
                const double radius = 0.25 + 2.0 * t;
                p[0] = radius * std::cos(theta);
                p[1] = radius * std::sin(theta);
                break;
            }
        }
        p[0] += noise * rng.normal();
        p[1] += noise * rng.normal();
        points[i] = std::move(p);
        labels[i] = cls;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    const std::size_t n_train = n - n / 5;  // 80/20
    Dataset data;
    data.name = dataset_kind_name(kind);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = order[i];
        if (i < n_train) {
            data.train_x.push_back(points[k]);
            data.train_y.push_back(labels[k]);
        } else {
            data.test_x.push_back(points[k]);
            data.test_y.push_back(labels[k]);
        }
    }

    // standardize on the training split
    Vec mean(2, 0.0), sd(2, 0.0);
    for (const Vec& p : data.train_x)
        for (std::size_t j = 0; j < 2; ++j) mean[j] += p[j];
    for (double& m : mean) m /= static_cast<double>(data.train_x.size());
    for (const Vec& p : data.train_x)
        for (std::size_t j = 0; j < 2; ++j) sd[j] += (p[j] - mean[j]) * (p[j] - mean[j]);
    for (double& s : sd) s = std::sqrt(s / static_cast<double>(data.train_x.size()));
    for (double& s : sd)
        if (s < 1e-12) s = 1.0;
    for (auto* split : {&data.train_x, &data.test_x})
        for (Vec& p : *split)
            for (std::size_t j = 0; j < 2; ++j) p[j] = (p[j] - mean[j]) / sd[j];
    return data;
}

double evaluate_accuracy(const ResidualNetwork& net, const std::vector<Vec>& xs,
                         const std::vector<int>& ys)
{
    if (xs.empty()) throw ValidationError("evaluate_accuracy: empty set");
    Tape tape;
    forward_batch(net, xs, RunMode::eval, {}, tape);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < tape.logits[i].size(); ++c)
            if (tape.logits[i][c] > tape.logits[i][best]) best = c;
        hits += best == static_cast<std::size_t>(ys[i]) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(xs.size());
}

TrainedModel train(const NetworkConfig& config, const Dataset& data, const Hyper& hyper)
{
    if (data.train_x.empty() || data.test_x.empty()) throw ValidationError("train: empty dataset split");
    ResidualNetwork net = init_network(config);
    ResidualNetwork grads = zeros_like(net);
    ResidualNetwork velocity = zeros_like(net);

    auto net_refs = param_refs(net);
    auto grad_refs = param_refs(grads);
    auto vel_refs = param_refs(velocity);

    Rng shuffle_rng(config.seed ^ 0x517cc1b727220a95ULL);
    std::vector<std::size_t> order(data.train_x.size());
    std::iota(order.begin(), order.end(), 0);

    double epoch_loss = 0.0;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const std::size_t stop = std::min(start + hyper.batch_size, order.size());
            std::vector<Vec> xs;
            std::vector<int> ys;
            xs.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                xs.push_back(data.train_x[order[i]]);
                ys.push_back(data.train_y[order[i]]);
            }

            for (auto& ref : grad_refs) std::fill(ref.values->begin(), ref.values->end(), 0.0);
            std::vector<BatchNormStats> stats;
            const double loss = loss_and_gradients(net, xs, ys, grads, &stats);
            if (!std::isfinite(loss))
                throw NumericError("training diverged at epoch " + std::to_string(epoch), epoch);
            epoch_loss += loss;
            ++batches;

            // running-statistic update (biased batch variance, fixed momentum)
            for (const BatchNormStats& st : stats) {
                IebnState& state = net.stages[st.stage][st.block].iebn;
                for (std::size_t j = 0; j < state.running_mean.size(); ++j) {
                    state.running_mean[j] =
                        (1.0 - state.momentum) * state.running_mean[j] + state.momentum * st.mean[j];
                    state.running_var[j] =
                        (1.0 - state.momentum) * state.running_var[j] + state.momentum * st.var[j];
                }
            }

            for (std::size_t k = 0; k < net_refs.size(); ++k) {
                if (net_refs[k].cls == ParamClass::buffer) continue;
                auto& theta = *net_refs[k].values;
                auto& g = *grad_refs[k].values;
                auto& v = *vel_refs[k].values;
                const bool decay = net_refs[k].cls == ParamClass::weight;
                for (std::size_t j = 0; j < theta.size(); ++j) {
                    double grad = g[j] + (decay ? hyper.weight_decay * theta[j] : 0.0);
                    v[j] = hyper.momentum * v[j] + grad;
                    theta[j] -= hyper.lr * v[j];
                }
            }
        }
        epoch_loss /= std::max<std::size_t>(batches, 1);
    }

    TrainedModel model{std::move(net), {}};
    model.metrics.train_accuracy = evaluate_accuracy(model.net, data.train_x, data.train_y);
    model.metrics.test_accuracy = evaluate_accuracy(model.net, data.test_x, data.test_y);
    model.metrics.final_loss = epoch_loss;
    return model;
}

std::vector<ode::Trajectory> extract_trajectories(const ResidualNetwork& net,
                                                  const std::vector<Vec>& inputs)
{
    std::vector<ode::Trajectory> out;
    out.reserve(inputs.size());
    for (const Vec& x : inputs) {
        Tape tape;
        forward_batch(net, {x}, RunMode::eval, {}, tape);
        out.push_back(trajectory_from_tape(net, tape, 0));
    }
    return out;
}

}  // namespace stiffkit::neural
