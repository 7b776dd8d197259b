#include "stiffkit/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stiffkit/errors.hpp"

namespace stiffkit::io {

namespace {

void dump_value(const json& j, std::string& out)
{
    switch (j.type()) {
        case json::value_t::null:
            out += "null";
            break;
        case json::value_t::boolean:
            out += j.get<bool>() ? "true" : "false";
            break;
        case json::value_t::number_integer:
            out += std::to_string(j.get<std::int64_t>());
            break;
        case json::value_t::number_unsigned:
            out += std::to_string(j.get<std::uint64_t>());
            break;
        case json::value_t::number_float: {
            const double v = j.get<double>();
            if (!std::isfinite(v)) throw ValidationError("dump_json: non-finite number");
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out += buf;
            break;
        }
        case json::value_t::string:
            out += json(j.get<std::string>()).dump();  // reuse escaping
            break;
        case json::value_t::array: {
            out += '[';
            bool first = true;
            for (const json& item : j) {
                if (!first) out += ',';
                first = false;
                dump_value(item, out);
            }
            out += ']';
            break;
        }
        case json::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {  // nlohmann objects iterate sorted
                if (!first) out += ',';
                first = false;
                out += json(it.key()).dump();
                out += ':';
                dump_value(it.value(), out);
            }
            out += '}';
            break;
        }
        default:
            throw ValidationError("dump_json: unsupported value type");
    }
}

const json& require(const json& j, const std::string& key, const std::string& context)
{
    if (!j.is_object()) throw ValidationError(context + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(context + ": missing field '" + key + "'");
    return *it;
}

Vec to_vec(const json& j, const std::string& context)
{
    if (!j.is_array()) throw ValidationError(context + ": expected an array of numbers");
    Vec v;
    v.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ValidationError(context + "[" + std::to_string(i) + "]: expected a number");
        v.push_back(j[i].get<double>());
    }
    return v;
}

json from_vec(const Vec& v)
{
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
}

Matrix to_matrix(const json& j, const std::string& context)
{
    if (!j.is_array() || j.empty()) throw ValidationError(context + ": expected a non-empty array of rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) throw ValidationError(context + "[0]: expected a non-empty row");
    Matrix m(j.size(), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Vec row = to_vec(j[i], context + "[" + std::to_string(i) + "]");
        if (row.size() != cols)
            throw ValidationError(context + "[" + std::to_string(i) + "]: ragged row length");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = row[k];
    }
    return m;
}

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string dump_json(const json& j)
{
    std::string out;
    dump_value(j, out);
    out += '\n';
    return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path() && !path.parent_path().empty()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot open for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ValidationError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_file(const std::filesystem::path& path)
{
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

json trajectory_to_json(const ode::Trajectory& traj)
{
    json j;
    j["source"] = traj.source == ode::Trajectory::Source::ode ? "ode" : "network";
    json states = json::array();
    for (const Vec& s : traj.states) states.push_back(from_vec(s));
    j["states"] = std::move(states);
    json steps = json::array();
    for (const Vec& s : traj.step_sizes) {
        if (traj.vector_steps)
            steps.push_back(from_vec(s));
        else
            steps.push_back(s[0]);
    }
    j["step_sizes"] = std::move(steps);
    json bounds = json::array();
    for (std::size_t b : traj.stage_boundaries) bounds.push_back(b);
    j["stage_boundaries"] = std::move(bounds);
    return j;
}

ode::Trajectory trajectory_from_json(const json& j)
{
    ode::Trajectory traj;
    const std::string source = require(j, "source", "trajectory").get<std::string>();
    if (source == "ode")
        traj.source = ode::Trajectory::Source::ode;
    else if (source == "network")
        traj.source = ode::Trajectory::Source::network;
    else
        throw ValidationError("trajectory.source: expected \"ode\" or \"network\"");

    const json& states = require(j, "states", "trajectory");
    if (!states.is_array() || states.empty()) throw ValidationError("trajectory.states: expected a non-empty array");
    for (std::size_t i = 0; i < states.size(); ++i)
        traj.states.push_back(to_vec(states[i], "trajectory.states[" + std::to_string(i) + "]"));

    const json& steps = require(j, "step_sizes", "trajectory");
    if (!steps.is_array()) throw ValidationError("trajectory.step_sizes: expected an array");
    traj.vector_steps = !steps.empty() && steps[0].is_array();
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (traj.vector_steps)
            traj.step_sizes.push_back(to_vec(steps[i], "trajectory.step_sizes[" + std::to_string(i) + "]"));
        else if (steps[i].is_number())
            traj.step_sizes.push_back({steps[i].get<double>()});
        else
            throw ValidationError("trajectory.step_sizes[" + std::to_string(i) + "]: expected a number");
    }

    const json& bounds = require(j, "stage_boundaries", "trajectory");
    if (!bounds.is_array()) throw ValidationError("trajectory.stage_boundaries: expected an array");
    traj.stage_boundaries.clear();
    for (const json& b : bounds) traj.stage_boundaries.push_back(b.get<std::size_t>());

    try {
        traj.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()));
    }
    return traj;
}

json dataset_to_json(const neural::Dataset& data)
{
    json j;
    j["name"] = data.name;
    json tx = json::array(), ty = json::array(), ex = json::array(), ey = json::array();
    for (const Vec& v : data.train_x) tx.push_back(from_vec(v));
    for (int y : data.train_y) ty.push_back(y);
    for (const Vec& v : data.test_x) ex.push_back(from_vec(v));
    for (int y : data.test_y) ey.push_back(y);
    j["train_x"] = std::move(tx);
    j["train_y"] = std::move(ty);
    j["test_x"] = std::move(ex);
    j["test_y"] = std::move(ey);
    return j;
}

neural::Dataset dataset_from_json(const json& j)
{
    neural::Dataset data;
    data.name = require(j, "name", "dataset").get<std::string>();
    const json& tx = require(j, "train_x", "dataset");
    const json& ty = require(j, "train_y", "dataset");
    const json& ex = require(j, "test_x", "dataset");
    const json& ey = require(j, "test_y", "dataset");
    if (tx.size() != ty.size())
        throw ValidationError("dataset: train_x length " + std::to_string(tx.size()) +
                              " != train_y length " + std::to_string(ty.size()));
    if (ex.size() != ey.size())
        throw ValidationError("dataset: test_x length " + std::to_string(ex.size()) +
                              " != test_y length " + std::to_string(ey.size()));
    for (std::size_t i = 0; i < tx.size(); ++i) {
        data.train_x.push_back(to_vec(tx[i], "dataset.train_x[" + std::to_string(i) + "]"));
        data.train_y.push_back(ty[i].get<int>());
    }
    for (std::size_t i = 0; i < ex.size(); ++i) {
        data.test_x.push_back(to_vec(ex[i], "dataset.test_x[" + std::to_string(i) + "]"));
        data.test_y.push_back(ey[i].get<int>());
    }
    return data;
}

json config_to_json(const neural::NetworkConfig& config)
{
    json j;
    j["input_dim"] = config.input_dim;
    json widths = json::array(), blocks = json::array();
    for (std::size_t w : config.stage_widths) widths.push_back(w);
    for (std::size_t b : config.blocks_per_stage) blocks.push_back(b);
    j["stage_widths"] = std::move(widths);
    j["blocks_per_stage"] = std::move(blocks);
    j["adaptor"] = neural::adaptor_kind_name(config.adaptor);
    j["bottleneck_ratio"] = config.bottleneck_ratio;
    j["num_classes"] = config.num_classes;
    j["seed"] = config.seed;
    return j;
}

neural::NetworkConfig config_from_json(const json& j)
{
    neural::NetworkConfig config;
    config.input_dim = require(j, "input_dim", "config").get<std::size_t>();
    for (const json& w : require(j, "stage_widths", "config")) config.stage_widths.push_back(w.get<std::size_t>());
    config.blocks_per_stage.clear();
    for (const json& b : require(j, "blocks_per_stage", "config"))
        config.blocks_per_stage.push_back(b.get<std::size_t>());
    config.adaptor = neural::adaptor_kind_from_name(require(j, "adaptor", "config").get<std::string>());
    config.bottleneck_ratio = require(j, "bottleneck_ratio", "config").get<std::size_t>();
    config.num_classes = require(j, "num_classes", "config").get<std::size_t>();
    config.seed = require(j, "seed", "config").get<std::uint64_t>();
    config.validate();
    return config;
}

json model_to_json(const neural::ResidualNetwork& net)
{
    json j;
    j["config"] = config_to_json(net.config);
    j["seed"] = net.config.seed;

    json params = json::object();
    json iebn = json::object();
    auto& mutable_net = const_cast<neural::ResidualNetwork&>(net);
    for (const neural::ParamRef& ref : neural::param_refs(mutable_net)) {
        if (ref.name.find(".iebn.") != std::string::npos) continue;  // serialized per block below
        params[ref.name] = from_vec(*ref.values);
    }
    for (std::size_t s = 0; s < net.stages.size(); ++s) {
        for (std::size_t t = 0; t < net.stages[s].size(); ++t) {
            const neural::IebnState& state = net.stages[s][t].iebn;
            if (state.bn_gain.empty()) continue;
            json entry;
            entry["running_mean"] = from_vec(state.running_mean);
            entry["running_var"] = from_vec(state.running_var);
            entry["bn_gain"] = from_vec(state.bn_gain);
            entry["bn_bias"] = from_vec(state.bn_bias);
            entry["w_ie"] = from_vec(state.w_ie);
            entry["b_ie"] = from_vec(state.b_ie);
            entry["momentum"] = state.momentum;
            entry["epsilon"] = state.epsilon;
            iebn["stage" + std::to_string(s) + ".block" + std::to_string(t)] = std::move(entry);
        }
    }
    j["params"] = std::move(params);
    j["iebn"] = std::move(iebn);
    return j;
}

neural::ResidualNetwork model_from_json(const json& j)
{
    const neural::NetworkConfig config = config_from_json(require(j, "config", "model"));
    neural::ResidualNetwork net = neural::init_network(config);

    const json& params = require(j, "params", "model");
    for (const neural::ParamRef& ref : neural::param_refs(net)) {
        if (ref.name.find(".iebn.") != std::string::npos) continue;
        const json& entry = require(params, ref.name, "model.params");
        const Vec v = to_vec(entry, "model.params." + ref.name);
        if (v.size() != ref.values->size())
            throw ValidationError("model.params." + ref.name + ": length " + std::to_string(v.size()) +
                                  " != expected " + std::to_string(ref.values->size()));
        *ref.values = v;
    }

    const bool needs_iebn = config.adaptor == neural::AdaptorKind::prev_only ||
                            config.adaptor == neural::AdaptorKind::next_only ||
                            config.adaptor == neural::AdaptorKind::diff ||
                            config.adaptor == neural::AdaptorKind::stepnet;
    if (needs_iebn) {
        const json& iebn = require(j, "iebn", "model");
        for (std::size_t s = 0; s < net.stages.size(); ++s) {
            for (std::size_t t = 0; t < net.stages[s].size(); ++t) {
                const std::string key = "stage" + std::to_string(s) + ".block" + std::to_string(t);
                const json& entry = require(iebn, key, "model.iebn");
                neural::IebnState& state = net.stages[s][t].iebn;
                const std::string ctx = "model.iebn." + key;
                auto load = [&](const char* field, Vec& target) {
                    const Vec v = to_vec(require(entry, field, ctx), ctx + "." + field);
                    if (v.size() != target.size())
                        throw ValidationError(ctx + "." + field + ": length mismatch");
                    target = v;
                };
                load("running_mean", state.running_mean);
                load("running_var", state.running_var);
                load("bn_gain", state.bn_gain);
                load("bn_bias", state.bn_bias);
                load("w_ie", state.w_ie);
                load("b_ie", state.b_ie);
                state.momentum = require(entry, "momentum", ctx).get<double>();
                state.epsilon = require(entry, "epsilon", ctx).get<double>();
            }
        }
    }
    return net;
}

json tns_to_json(const metrics::TnsEstimate& est, const std::vector<metrics::TnsEstimate>& refinements)
{
    json j;
    j["value"] = est.value;
    json grid;
    grid["m1_max"] = est.grid.m1_max;
    grid["m2_max"] = est.grid.m2_max;
    grid["n"] = est.grid.n;
    j["grid"] = std::move(grid);
    j["cap"] = est.cap_applied ? json(*est.cap_applied) : json(nullptr);
    json refs = json::array();
    for (const metrics::TnsEstimate& r : refinements) {
        json entry;
        entry["n"] = r.grid.n;
        entry["value"] = r.value;
        if (r.refinement_delta) entry["delta"] = *r.refinement_delta;
        refs.push_back(std::move(entry));
    }
    j["refinements"] = std::move(refs);
    return j;
}

json correlation_to_json(const analysis::CorrelationReport& report)
{
    json j;
    j["kendall"] = report.kendall;
    j["spearman"] = report.spearman;
    j["n"] = report.n;
    j["concordant"] = report.concordant;
    j["discordant"] = report.discordant;
    return j;
}

json theorem2_to_json(const std::vector<std::pair<double, theory::Theorem2Report>>& sweep)
{
    json entries = json::array();
    for (const auto& [lambda1, r] : sweep) {
        json e;
        e["lambda1"] = lambda1;
        e["gap"] = r.gap;
        e["si"] = r.si;
        e["sai"] = r.sai_measured;
        e["ratio"] = r.ratio;
        e["ratio_limit"] = r.ratio_limit;
        e["q_term"] = r.q_term;
        entries.push_back(std::move(e));
    }
    json j;
    j["entries"] = std::move(entries);
    return j;
}

json convergence_reports_to_json(const std::vector<theory::ConvergenceReport>& reports,
                                 std::uint64_t seed)
{
    json out;
    out["seed"] = seed;
    out["sets"] = reports.size();
    bool all_zero = true;
    double max_final_delta = 0.0;
    json arr = json::array();
    for (const theory::ConvergenceReport& r : reports) {
        json e;
        e["cap"] = r.cap;
        e["zero_region_verified"] = r.zero_region_verified;
        json levels = json::array();
        for (const theory::ConvergenceLevel& l : r.levels) {
            json le;
            le["n"] = l.n;
            le["value"] = l.value;
            levels.push_back(std::move(le));
        }
        e["levels"] = std::move(levels);
        json deltas = json::array();
        for (double d : r.deltas) deltas.push_back(d);
        e["deltas"] = std::move(deltas);
        arr.push_back(std::move(e));
        all_zero = all_zero && r.zero_region_verified;
        if (!r.deltas.empty()) max_final_delta = std::max(max_final_delta, r.deltas.back());
    }
    out["reports"] = std::move(arr);
    json summary;
    summary["all_zero_region_verified"] = all_zero;
    summary["max_final_delta"] = max_final_delta;
    out["summary"] = std::move(summary);
    return out;
}

json comparison_to_json(const theory::ComparisonReport& report, const std::string& system_name)
{
    json j;
    j["system"] = system_name;
    j["tolerance"] = report.tolerance;
    j["adaptive_evals"] = report.adaptive_evals;
    j["adaptive_error"] = report.adaptive_error;
    j["fixed_evals_at_matched_error"] = report.fixed_evals_at_matched_error;
    j["fixed_dt_at_matched_error"] = report.fixed_dt_at_matched_error;
    j["fixed_error"] = report.fixed_error;
    j["fixed_diverged_dt"] = report.fixed_diverged_dt;
    return j;
}

json attention_correlation_to_json(const analysis::AttentionCorrelationResult& result)
{
    json blocks = json::array();
    for (const analysis::BlockCorrelation& b : result.blocks) {
        json e;
        e["block"] = b.block;
        if (b.defined) {
            e["tau"] = b.tau;
            e["rho"] = b.rho;
            e["status"] = "ok";
        } else {
            e["tau"] = json(nullptr);
            e["rho"] = json(nullptr);
            e["status"] = "undefined";
        }
        blocks.push_back(std::move(e));
    }
    json hist;
    json edges = json::array(), counts = json::array();
    for (double e : result.histogram_edges) edges.push_back(e);
    for (std::size_t c : result.histogram) counts.push_back(c);
    hist["bin_edges"] = std::move(edges);
    hist["counts"] = std::move(counts);
    json j;
    j["blocks"] = std::move(blocks);
    j["histogram"] = std::move(hist);
    return j;
}

std::string records_to_csv(const std::vector<analysis::ExperimentRecord>& records)
{
    std::string out = "model_id,adaptor,seed,accuracy,tns\n";
    for (const analysis::ExperimentRecord& r : records) {
        out += std::to_string(r.model_id);
        out += ',';
        out += neural::adaptor_kind_name(r.adaptor);
        out += ',';
        out += std::to_string(r.seed);
        out += ',';
        out += format_double(r.accuracy);
        out += ',';
        out += format_double(r.tns);
        out += '\n';
    }
    return out;
}

std::vector<analysis::ExperimentRecord> records_from_csv(const std::string& text)
{
    std::vector<analysis::ExperimentRecord> records;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("records csv: empty file");
    if (line != "model_id,adaptor,seed,accuracy,tns")
        throw ValidationError("records csv: unexpected header: " + line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        analysis::ExperimentRecord r;
        try {
            std::getline(ls, field, ',');
            r.model_id = std::stoull(field);
            std::getline(ls, field, ',');
            r.adaptor = neural::adaptor_kind_from_name(field);
            std::getline(ls, field, ',');
            r.seed = std::stoull(field);
            std::getline(ls, field, ',');
            r.accuracy = std::stod(field);
            std::getline(ls, field, ',');
            r.tns = std::stod(field);
        } catch (const std::exception&) {
            throw ValidationError("records csv: malformed line " + std::to_string(line_no));
        }
        records.push_back(r);
    }
    return records;
}

std::string nsi_rows_to_csv(const std::vector<std::pair<std::size_t, std::vector<metrics::NsiRow>>>& by_input)
{
    std::string out = "input_id,stage,block,nsi,included\n";
    for (const auto& [input_id, rows] : by_input) {
        for (const metrics::NsiRow& row : rows) {
            out += std::to_string(input_id);
            out += ',';
            out += std::to_string(row.stage);
            out += ',';
            out += std::to_string(row.block);
            out += ',';
            out += format_double(row.nsi);
            out += ',';
            out += row.included ? '1' : '0';
            out += '\n';
        }
    }
    return out;
}

std::pair<ode::OdeSystem, Vec> resolve_system(const std::string& name)
{
    if (name == "decay") return {ode::make_decay(), Vec{1.0}};
    if (name == "stiff_sine") return {ode::make_stiff_sine(), Vec{0.0}};
    if (name.rfind("linear_sym:", 0) == 0) {
        const std::string path = name.substr(std::string("linear_sym:").size());
        const json j = parse_json_file(path);
        const Matrix a = to_matrix(require(j, "matrix", "linear system"), "linear system.matrix");
        const Vec u0 = to_vec(require(j, "u0", "linear system"), "linear system.u0");
        if (u0.size() != a.rows)
            throw ValidationError("linear system: u0 length " + std::to_string(u0.size()) +
                                  " != matrix size " + std::to_string(a.rows));
        return {ode::make_linear_symmetric(a), u0};
    }
    throw ValidationError("unknown system: " + name +
                          " (expected decay, stiff_sine, or linear_sym:<file>)");
}

}  // namespace stiffkit::io
