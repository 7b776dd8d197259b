// stiffkit: stiffness metrics for residual networks viewed as ODE
// integrators, plus the verification and analysis pipelines built on them.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stiffkit/analysis.hpp"
#include "stiffkit/errors.hpp"
#include "stiffkit/io.hpp"
#include "stiffkit/metrics.hpp"
#include "stiffkit/neural.hpp"
#include "stiffkit/ode.hpp"
#include "stiffkit/theory.hpp"

namespace fs = std::filesystem;
using stiffkit::Vec;
using stiffkit::io::json;

namespace {

std::vector<std::string> split_csv(const std::string& s)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) {
            parts.push_back(s.substr(start));
            break;
        }
        parts.push_back(s.substr(start, comma - start));
        start = comma + 1;
    }
    return parts;
}

Vec parse_doubles(const std::string& s, const char* what)
{
    Vec out;
    for (const std::string& p : split_csv(s)) {
        try {
            out.push_back(std::stod(p));
        } catch (const std::exception&) {
            throw stiffkit::ValidationError(std::string(what) + ": cannot parse '" + p + "'");
        }
    }
    return out;
}

std::size_t default_threads()
{
    if (const char* env = std::getenv("STIFFKIT_THREADS")) {
        try {
            return std::max<std::size_t>(1, std::stoull(env));
        } catch (const std::exception&) {
            return 1;
        }
    }
    return 1;
}

std::vector<fs::path> trajectory_files(const std::string& traj, const std::string& trajs_dir)
{
    std::vector<fs::path> files;
    if (!traj.empty()) files.emplace_back(traj);
    if (!trajs_dir.empty()) {
        if (!fs::is_directory(trajs_dir))
            throw stiffkit::ValidationError("not a directory: " + trajs_dir);
        for (const auto& entry : fs::directory_iterator(trajs_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
    }
    if (files.empty()) throw stiffkit::ValidationError("no trajectory files given (--traj or --trajs)");
    return files;
}

std::vector<stiffkit::ode::Trajectory> load_trajectories(const std::vector<fs::path>& files)
{
    std::vector<stiffkit::ode::Trajectory> out;
    out.reserve(files.size());
    for (const fs::path& f : files) {
        try {
            out.push_back(stiffkit::io::trajectory_from_json(stiffkit::io::parse_json_file(f)));
        } catch (const stiffkit::ValidationError& e) {
            throw stiffkit::ValidationError(f.string() + ": " + e.what());
        }
    }
    return out;
}

stiffkit::metrics::NsiMode parse_mode(const std::string& mode)
{
    if (mode == "unit") return stiffkit::metrics::NsiMode::unit_step;
    if (mode == "recorded") return stiffkit::metrics::NsiMode::recorded_step;
    throw stiffkit::ValidationError("unknown mode: " + mode + " (expected unit or recorded)");
}

stiffkit::neural::Hyper hyper_from_json(const json& j)
{
    stiffkit::neural::Hyper hyper;
    if (j.contains("lr")) hyper.lr = j["lr"].get<double>();
    if (j.contains("epochs")) hyper.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch_size")) hyper.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("weight_decay")) hyper.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("momentum")) hyper.momentum = j["momentum"].get<double>();
    return hyper;
}

stiffkit::neural::Dataset dataset_from_spec(const json& spec)
{
    if (spec.contains("file"))
        return stiffkit::io::dataset_from_json(
            stiffkit::io::parse_json_file(spec["file"].get<std::string>()));
    const auto kind = stiffkit::neural::dataset_kind_from_name(spec.at("kind").get<std::string>());
    const auto n = spec.value("n", std::size_t{600});
    const double noise = spec.value("noise", 0.1);
    const std::uint64_t seed = spec.value("seed", std::uint64_t{0});
    const double turns = spec.value("turns", 3.0);
    return stiffkit::neural::synth_dataset(kind, n, noise, seed, turns);
}

// theorem2 verification sweep: the reference eigenvalue pair (-lambda1, -1)
// with coefficients (1, 1), measured over the default gap schedule plus a
// per-lambda scaled gap (lambda1 * gap = 2e-7) that keeps the
// difference-quotient error uniform across the sweep.
json run_theorem2()
{
    const Vec lambda1s{10.0, 100.0, 1000.0, 10000.0};
    std::vector<std::pair<double, stiffkit::theory::Theorem2Report>> sweep;
    std::vector<double> scaled_deviation;
    for (double l1 : lambda1s) {
        const Vec eigs{-l1, -1.0};
        const Vec coeffs{1.0, 1.0};
        Vec gaps{1e-4, 1e-5, 1e-6, 2e-7 / l1};
        const auto reports = stiffkit::theory::verify_theorem2(eigs, coeffs, gaps);
        for (const auto& r : reports) sweep.emplace_back(l1, r);
        scaled_deviation.push_back(std::abs(reports.back().ratio - reports.back().ratio_limit));
    }
    json out = stiffkit::io::theorem2_to_json(sweep);
    bool monotone = true;
    for (std::size_t i = 1; i < scaled_deviation.size(); ++i)
        monotone = monotone && scaled_deviation[i] <= scaled_deviation[i - 1];
    json sweep_info;
    json dev = json::array();
    for (double d : scaled_deviation) dev.push_back(d);
    sweep_info["scaled_gap_deviation"] = std::move(dev);
    sweep_info["monotone"] = monotone;
    out["sweep"] = std::move(sweep_info);
    return out;
}

json run_lemma1_tns(std::uint64_t seed, std::size_t sets, std::size_t threads)
{
    stiffkit::Rng rng(seed);
    std::vector<stiffkit::theory::ConvergenceReport> reports;
    for (std::size_t k = 0; k < sets; ++k) {
        const auto trajs = stiffkit::theory::synth_trajectory_set(rng);
        stiffkit::metrics::ProfileSet profiles;
        for (const auto& t : trajs)
            profiles.push_back(stiffkit::metrics::nsi_profile(t, stiffkit::metrics::NsiMode::recorded_step));
        const auto bounds =
            stiffkit::metrics::compute_bounds(trajs, stiffkit::metrics::NsiMode::recorded_step);
        reports.push_back(
            stiffkit::theory::verify_lemma1_and_tns(profiles, bounds, {16, 32, 64, 128}, threads));
    }
    return stiffkit::io::convergence_reports_to_json(reports, seed);
}

json run_stiff_compare()
{
    const auto system = stiffkit::ode::make_stiff_sine();
    const auto report = stiffkit::theory::stiff_solver_comparison(system, {0.0}, {0.0, 1.0}, 1e-8);
    return stiffkit::io::comparison_to_json(report, "stiff_sine");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"stiffkit: stiffness metrics, theorem checks, and attention-as-step-size experiments"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::size_t threads = default_threads();
    app.add_option("--seed", seed, "global seed (default 0)");
    app.add_option("--threads", threads, "worker cap (default $STIFFKIT_THREADS or 1)");

    // ---- integrate ----------------------------------------------------------
    auto* integrate = app.add_subcommand("integrate", "integrate a catalog system");
    std::string in_system = "decay", in_method = "rkf45", in_span = "0,1", in_u0, in_out;
    double in_tol = 1e-8, in_dt = 0.0;
    std::size_t in_steps = 0;
    integrate->add_option("--system", in_system, "decay | stiff_sine | linear_sym:<file>");
    integrate->add_option("--method", in_method, "euler | rk4 | rkf45");
    integrate->add_option("--tol", in_tol, "adaptive tolerance");
    integrate->add_option("--dt", in_dt, "fixed step size");
    integrate->add_option("--steps", in_steps, "fixed step count");
    integrate->add_option("--span", in_span, "t0,t1 (adaptive)");
    integrate->add_option("--u0", in_u0, "initial state, comma separated");
    integrate->add_option("--out", in_out, "trajectory JSON output")->required();

    // ---- stiffness ----------------------------------------------------------
    auto* stiffness = app.add_subcommand("stiffness", "per-block index profile as CSV");
    std::string st_traj, st_trajs, st_mode = "unit", st_out, st_prop_m, st_prop_out;
    bool st_no_exclusion = false;
    stiffness->add_option("--traj", st_traj, "single trajectory JSON");
    stiffness->add_option("--trajs", st_trajs, "directory of trajectory JSON files");
    stiffness->add_option("--mode", st_mode, "unit | recorded");
    stiffness->add_flag("--no-exclusion", st_no_exclusion, "keep each stage's first transition");
    stiffness->add_option("--out", st_out, "CSV output")->required();
    stiffness->add_option("--proportion-m", st_prop_m, "m1,m2 thresholds for the proportion report");
    stiffness->add_option("--proportion-out", st_prop_out, "proportion JSON output");

    // ---- tns ----------------------------------------------------------------
    auto* tns_cmd = app.add_subcommand("tns", "total stiffness over a trajectory set");
    std::string tn_traj, tn_trajs, tn_mode = "recorded", tn_grid = "10,10,64", tn_levels, tn_out;
    bool tn_cap = false, tn_pooled = false;
    tns_cmd->add_option("--traj", tn_traj, "single trajectory JSON");
    tns_cmd->add_option("--trajs", tn_trajs, "directory of trajectory JSON files");
    tns_cmd->add_option("--grid", tn_grid, "m1_max,m2_max,n");
    tns_cmd->add_option("--levels", tn_levels, "optional refinement grid sizes, e.g. 16,32,64");
    tns_cmd->add_option("--mode", tn_mode, "unit | recorded");
    tns_cmd->add_flag("--cap", tn_cap, "cap the grid at the bound-derived threshold level");
    tns_cmd->add_flag("--pooled-mu", tn_pooled, "pool stage means over all inputs");
    tns_cmd->add_option("--out", tn_out, "report JSON output")->required();

    // ---- train --------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train a residual network");
    std::string tr_config, tr_out, tr_metrics;
    train_cmd->add_option("--config", tr_config, "config JSON (network/dataset/hyper)")->required();
    train_cmd->add_option("--out", tr_out, "model JSON output")->required();
    train_cmd->add_option("--metrics", tr_metrics, "metrics JSON output");

    // ---- verify -------------------------------------------------------------
    auto* verify = app.add_subcommand("verify", "numerical checks of the theory");
    std::string ve_check, ve_out, ve_outdir;
    std::size_t ve_sets = 100;
    verify->add_option("check", ve_check, "theorem2 | lemma1_tns | stiff_compare | all")->required();
    verify->add_option("--out", ve_out, "report JSON output (single check)");
    verify->add_option("--outdir", ve_outdir, "output directory (check = all)");
    verify->add_option("--sets", ve_sets, "randomized trajectory sets for lemma1_tns");

    // ---- analyze ------------------------------------------------------------
    auto* analyze = app.add_subcommand("analyze", "experiments and correlation reports");
    analyze->require_subcommand(1);

    auto* an_records = analyze->add_subcommand("records", "correlate accuracy with total stiffness");
    std::string re_records, re_out;
    bool re_tau_b = false;
    an_records->add_option("--records", re_records, "records CSV")->required();
    an_records->add_option("--out", re_out, "correlation JSON output")->required();
    an_records->add_flag("--tau-b", re_tau_b, "tie-corrected tau denominator");

    auto* an_ensemble = analyze->add_subcommand("ensemble", "train an ensemble and correlate");
    std::string en_dataset = "spirals", en_kinds = "none,se_style,stepnet", en_seeds = "1,2,3,4";
    std::string en_grid = "10,10,64", en_mode = "recorded", en_records_out, en_corr_out;
    std::size_t en_n = 800, en_epochs = 80, en_batch = 32;
    double en_noise = 0.1, en_lr = 0.05, en_wd = 1e-4, en_turns = 2.0;
    std::string en_widths = "12", en_blocks = "6";
    an_ensemble->add_option("--dataset", en_dataset, "blobs | moons | spirals");
    an_ensemble->add_option("--n", en_n, "dataset size");
    an_ensemble->add_option("--noise", en_noise, "dataset noise");
    an_ensemble->add_option("--turns", en_turns, "spiral turns");
    an_ensemble->add_option("--kinds", en_kinds, "adaptor kinds, comma separated");
    an_ensemble->add_option("--seeds", en_seeds, "training seeds, comma separated");
    an_ensemble->add_option("--widths", en_widths, "stage widths");
    an_ensemble->add_option("--blocks", en_blocks, "blocks per stage");
    an_ensemble->add_option("--epochs", en_epochs, "training epochs");
    an_ensemble->add_option("--lr", en_lr, "learning rate");
    an_ensemble->add_option("--batch", en_batch, "batch size");
    an_ensemble->add_option("--wd", en_wd, "weight decay");
    an_ensemble->add_option("--grid", en_grid, "m1_max,m2_max,n");
    an_ensemble->add_option("--mode", en_mode, "unit | recorded");
    an_ensemble->add_option("--out-records", en_records_out, "records CSV output")->required();
    an_ensemble->add_option("--out-corr", en_corr_out, "correlation JSON output")->required();

    auto* an_attention = analyze->add_subcommand("nsi-attention", "per-block index/attention correlation");
    std::string at_model, at_data, at_out, at_split = "test";
    an_attention->add_option("--model", at_model, "model JSON")->required();
    an_attention->add_option("--data", at_data, "dataset JSON")->required();
    an_attention->add_option("--split", at_split, "train | test");
    an_attention->add_option("--out", at_out, "report JSON output")->required();

    auto* an_extract = analyze->add_subcommand("extract", "dump eval-mode trajectories");
    std::string ex_model, ex_data, ex_outdir, ex_split = "test";
    std::size_t ex_limit = 0;
    an_extract->add_option("--model", ex_model, "model JSON")->required();
    an_extract->add_option("--data", ex_data, "dataset JSON")->required();
    an_extract->add_option("--split", ex_split, "train | test");
    an_extract->add_option("--limit", ex_limit, "max inputs (0 = all)");
    an_extract->add_option("--outdir", ex_outdir, "output directory")->required();

    auto* an_select = analyze->add_subcommand("select-gt", "pick the best-performing record");
    std::string se_records, se_out;
    an_select->add_option("--records", se_records, "records CSV")->required();
    an_select->add_option("--out", se_out, "selection JSON output")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*integrate) {
            auto [system, u0] = stiffkit::io::resolve_system(in_system);
            if (!in_u0.empty()) u0 = parse_doubles(in_u0, "--u0");
            stiffkit::ode::Trajectory traj;
            if (in_method == "rkf45") {
                const Vec span = parse_doubles(in_span, "--span");
                if (span.size() != 2) throw stiffkit::ValidationError("--span: expected t0,t1");
                auto [t, stats] = stiffkit::ode::integrate_adaptive(system, u0, {span[0], span[1]}, in_tol);
                traj = std::move(t);
                std::cout << "accepted " << stats.accepted << ", rejected " << stats.rejected
                          << ", rhs evals " << stats.rhs_evals << "\n";
            } else {
                const auto kind = in_method == "euler" ? stiffkit::ode::IntegratorKind::forward_euler
                                  : in_method == "rk4" ? stiffkit::ode::IntegratorKind::rk4
                                                       : throw stiffkit::ValidationError(
                                                             "unknown method: " + in_method);
                if (in_steps == 0) throw stiffkit::ValidationError("--steps required for fixed methods");
                traj = stiffkit::ode::integrate_fixed(
                    system, u0, stiffkit::ode::IntegratorMethod::fixed(kind, in_dt), in_steps);
            }
            stiffkit::io::write_file_atomic(in_out,
                                            stiffkit::io::dump_json(stiffkit::io::trajectory_to_json(traj)));
        } else if (*stiffness) {
            const auto mode = parse_mode(st_mode);
            const auto files = trajectory_files(st_traj, st_trajs);
            const auto trajs = load_trajectories(files);
            std::vector<std::pair<std::size_t, std::vector<stiffkit::metrics::NsiRow>>> by_input;
            stiffkit::metrics::ProfileSet profiles;
            for (std::size_t i = 0; i < trajs.size(); ++i) {
                by_input.emplace_back(i, stiffkit::metrics::nsi_rows(trajs[i], mode, !st_no_exclusion));
                profiles.push_back(stiffkit::metrics::nsi_profile(trajs[i], mode, !st_no_exclusion));
            }
            const std::string csv = stiffkit::io::nsi_rows_to_csv(by_input);
            std::string prop_payload;
            if (!st_prop_out.empty()) {
                if (st_prop_m.empty())
                    throw stiffkit::ValidationError("--proportion-out requires --proportion-m");
                const Vec m = parse_doubles(st_prop_m, "--proportion-m");
                if (m.size() != 2) throw stiffkit::ValidationError("--proportion-m: expected m1,m2");
                const double p = stiffkit::metrics::stiffness_proportion(profiles, {m[0], m[1]},
                                                                         by_input[0].second.size());
                json pj;
                pj["m1"] = m[0];
                pj["m2"] = m[1];
                pj["proportion"] = p;
                pj["blocks"] = by_input[0].second.size();
                prop_payload = stiffkit::io::dump_json(pj);
            }
            stiffkit::io::write_file_atomic(st_out, csv);
            if (!prop_payload.empty()) stiffkit::io::write_file_atomic(st_prop_out, prop_payload);
        } else if (*tns_cmd) {
            const auto mode = parse_mode(tn_mode);
            const auto files = trajectory_files(tn_traj, tn_trajs);
            const auto trajs = load_trajectories(files);
            stiffkit::metrics::ProfileSet profiles;
            for (const auto& t : trajs) profiles.push_back(stiffkit::metrics::nsi_profile(t, mode));
            if (tn_pooled) stiffkit::metrics::pool_stage_means(profiles);

            const Vec g = parse_doubles(tn_grid, "--grid");
            if (g.size() != 3) throw stiffkit::ValidationError("--grid: expected m1_max,m2_max,n");
            stiffkit::metrics::TnsGrid grid{g[0], g[1], static_cast<std::size_t>(g[2])};

            std::optional<stiffkit::metrics::TrajectoryBounds> cap;
            if (tn_cap) cap = stiffkit::metrics::compute_bounds(trajs, mode);

            std::vector<stiffkit::metrics::TnsEstimate> refinements;
            if (!tn_levels.empty()) {
                const stiffkit::metrics::TnsEstimate* prev = nullptr;
                for (const std::string& part : split_csv(tn_levels)) {
                    stiffkit::metrics::TnsGrid level_grid = grid;
                    level_grid.n = std::stoull(part);
                    refinements.push_back(
                        stiffkit::metrics::tns(profiles, level_grid, cap, prev, threads));
                    prev = &refinements.back();
                }
            }
            const stiffkit::metrics::TnsEstimate est = stiffkit::metrics::tns(
                profiles, grid, cap, refinements.empty() ? nullptr : &refinements.back(), threads);
            stiffkit::io::write_file_atomic(
                tn_out, stiffkit::io::dump_json(stiffkit::io::tns_to_json(est, refinements)));
        } else if (*train_cmd) {
            const json cfg = stiffkit::io::parse_json_file(tr_config);
            json network_json = cfg.contains("network") ? cfg["network"] : cfg;
            if (!network_json.contains("seed")) network_json["seed"] = seed;
            if (app.count("--seed") > 0) network_json["seed"] = seed;
            const auto config = stiffkit::io::config_from_json(network_json);
            const auto data = dataset_from_spec(cfg.contains("dataset")
                                                    ? cfg["dataset"]
                                                    : json{{"kind", "spirals"}});
            const auto hyper = hyper_from_json(cfg.contains("hyper") ? cfg["hyper"] : json::object());
            const auto model = stiffkit::neural::train(config, data, hyper);
            const std::string model_payload =
                stiffkit::io::dump_json(stiffkit::io::model_to_json(model.net));
            std::string metrics_payload;
            if (!tr_metrics.empty()) {
                json mj;
                mj["train_accuracy"] = model.metrics.train_accuracy;
                mj["test_accuracy"] = model.metrics.test_accuracy;
                mj["final_loss"] = model.metrics.final_loss;
                metrics_payload = stiffkit::io::dump_json(mj);
            }
            stiffkit::io::write_file_atomic(tr_out, model_payload);
            if (!metrics_payload.empty()) stiffkit::io::write_file_atomic(tr_metrics, metrics_payload);
            std::cout << "train acc " << model.metrics.train_accuracy << ", test acc "
                      << model.metrics.test_accuracy << "\n";
        } else if (*verify) {
            if (ve_check == "all") {
                if (ve_outdir.empty()) throw stiffkit::ValidationError("verify all: --outdir required");
                const std::string t2 = stiffkit::io::dump_json(run_theorem2());
                const std::string lt = stiffkit::io::dump_json(run_lemma1_tns(seed, ve_sets, threads));
                const std::string sc = stiffkit::io::dump_json(run_stiff_compare());
                stiffkit::io::write_file_atomic(fs::path(ve_outdir) / "theorem2.json", t2);
                stiffkit::io::write_file_atomic(fs::path(ve_outdir) / "lemma1_tns.json", lt);
                stiffkit::io::write_file_atomic(fs::path(ve_outdir) / "stiff_compare.json", sc);
            } else {
                if (ve_out.empty()) throw stiffkit::ValidationError("verify: --out required");
                json out;
                if (ve_check == "theorem2")
                    out = run_theorem2();
                else if (ve_check == "lemma1_tns")
                    out = run_lemma1_tns(seed, ve_sets, threads);
                else if (ve_check == "stiff_compare")
                    out = run_stiff_compare();
                else
                    throw stiffkit::ValidationError("unknown check: " + ve_check);
                stiffkit::io::write_file_atomic(ve_out, stiffkit::io::dump_json(out));
            }
        } else if (*an_records) {
            const auto records = stiffkit::io::records_from_csv(stiffkit::io::read_file(re_records));
            Vec tns_values, accuracies;
            for (const auto& r : records) {
                tns_values.push_back(r.tns);
                accuracies.push_back(r.accuracy);
            }
            const auto report = stiffkit::analysis::correlate(
                tns_values, accuracies,
                re_tau_b ? stiffkit::analysis::TauVariant::tau_b : stiffkit::analysis::TauVariant::tau_a);
            stiffkit::io::write_file_atomic(
                re_out, stiffkit::io::dump_json(stiffkit::io::correlation_to_json(report)));
        } else if (*an_ensemble) {
            const auto data = stiffkit::neural::synth_dataset(
                stiffkit::neural::dataset_kind_from_name(en_dataset), en_n, en_noise, seed, en_turns);
            std::vector<stiffkit::neural::NetworkConfig> configs;
            for (const std::string& kind_name : split_csv(en_kinds)) {
                for (const std::string& seed_str : split_csv(en_seeds)) {
                    stiffkit::neural::NetworkConfig c;
                    c.input_dim = 2;
                    for (const std::string& w : split_csv(en_widths))
                        c.stage_widths.push_back(std::stoull(w));
                    for (const std::string& b : split_csv(en_blocks))
                        c.blocks_per_stage.push_back(std::stoull(b));
                    c.adaptor = stiffkit::neural::adaptor_kind_from_name(kind_name);
                    c.bottleneck_ratio = std::max<std::size_t>(
                        1, *std::min_element(c.stage_widths.begin(), c.stage_widths.end()) / 4);
                    c.num_classes = 2;
                    c.seed = std::stoull(seed_str);
                    configs.push_back(std::move(c));
                }
            }
            stiffkit::neural::Hyper hyper;
            hyper.lr = en_lr;
            hyper.epochs = en_epochs;
            hyper.batch_size = en_batch;
            hyper.weight_decay = en_wd;
            const Vec g = parse_doubles(en_grid, "--grid");
            if (g.size() != 3) throw stiffkit::ValidationError("--grid: expected m1_max,m2_max,n");
            stiffkit::analysis::TnsExperimentOptions options;
            options.grid = {g[0], g[1], static_cast<std::size_t>(g[2])};
            options.mode = parse_mode(en_mode);
            options.threads = threads;
            const auto result = stiffkit::analysis::tns_accuracy_experiment(configs, data, hyper, options);
            const std::string records_payload = stiffkit::io::records_to_csv(result.records);
            const std::string corr_payload =
                stiffkit::io::dump_json(stiffkit::io::correlation_to_json(result.correlation));
            stiffkit::io::write_file_atomic(en_records_out, records_payload);
            stiffkit::io::write_file_atomic(en_corr_out, corr_payload);
        } else if (*an_attention) {
            const auto net = stiffkit::io::model_from_json(stiffkit::io::parse_json_file(at_model));
            const auto data = stiffkit::io::dataset_from_json(stiffkit::io::parse_json_file(at_data));
            const auto& inputs = at_split == "train" ? data.train_x : data.test_x;
            const auto result = stiffkit::analysis::nsi_attention_correlation(net, inputs);
            stiffkit::io::write_file_atomic(
                at_out, stiffkit::io::dump_json(stiffkit::io::attention_correlation_to_json(result)));
        } else if (*an_extract) {
            const auto net = stiffkit::io::model_from_json(stiffkit::io::parse_json_file(ex_model));
            const auto data = stiffkit::io::dataset_from_json(stiffkit::io::parse_json_file(ex_data));
            std::vector<Vec> inputs = ex_split == "train" ? data.train_x : data.test_x;
            if (ex_limit > 0 && inputs.size() > ex_limit) inputs.resize(ex_limit);
            const auto trajs = stiffkit::neural::extract_trajectories(net, inputs);
            std::vector<std::string> payloads;
            payloads.reserve(trajs.size());
            for (const auto& t : trajs)
                payloads.push_back(stiffkit::io::dump_json(stiffkit::io::trajectory_to_json(t)));
            for (std::size_t i = 0; i < payloads.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof(name), "traj_%05zu.json", i);
                stiffkit::io::write_file_atomic(fs::path(ex_outdir) / name, payloads[i]);
            }
        } else if (*an_select) {
            const auto records = stiffkit::io::records_from_csv(stiffkit::io::read_file(se_records));
            if (records.empty()) throw stiffkit::ValidationError("select-gt: no records");
            std::size_t best = 0;
            for (std::size_t i = 1; i < records.size(); ++i)
                if (records[i].accuracy > records[best].accuracy ||
                    (records[i].accuracy == records[best].accuracy &&
                     records[i].model_id < records[best].model_id))
                    best = i;
            json out;
            out["model_id"] = records[best].model_id;
            out["accuracy"] = records[best].accuracy;
            out["adaptor"] = stiffkit::neural::adaptor_kind_name(records[best].adaptor);
            stiffkit::io::write_file_atomic(se_out, stiffkit::io::dump_json(out));
        }
    } catch (const stiffkit::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const stiffkit::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
