#include "cli.hpp"

#include "koopa/adaptation.hpp"
#include "koopa/checkpoint.hpp"
#include "koopa/config.hpp"
#include "koopa/data.hpp"
#include "koopa/error.hpp"
#include "koopa/eval.hpp"
#include "koopa/model.hpp"
#include "koopa/text.hpp"
#include "koopa/train.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace koopa::cli {
namespace {

namespace fs = std::filesystem;

// Raised for problems with the input data; mapped to exit code 3.
class DataProblem : public Error {
public:
    using Error::Error;
};

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;
    int threads = 0;
    std::string checkpoint;
};

struct Context {
    config::RunConfig run;
    std::size_t threads = 1;
    fs::path out_dir;
    std::ostream& out;
};

void add_common(CLI::App& cmd, CommonArgs& a, bool wants_checkpoint) {
    cmd.add_option("--config", a.config_path, "Configuration file ([section] key = value)");
    cmd.add_option("--set", a.sets, "Override a configuration key (key=value); repeatable")->take_all();
    cmd.add_option("--threads", a.threads, "Worker threads (falls back to KOOPA_THREADS, then run.threads)")
        ->check(CLI::PositiveNumber);
    if (wants_checkpoint) {
        cmd.add_option("--checkpoint", a.checkpoint, "Model checkpoint (default: <output.dir>/model.kpa)");
    }
}

config::RunConfig resolve_config(const CommonArgs& a) {
    config::KeyValues file_values;
    if (!a.config_path.empty()) {
        try {
            file_values = config::parse_file(a.config_path);
        } catch (const ParseError& e) {
            throw ConfigError(e.what());
        }
    }
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const std::string& s : a.sets) {
        overrides.push_back(config::parse_override(s));
    }
    return config::resolve(file_values, overrides);
}

std::size_t resolve_threads(const CommonArgs& a, const config::RunConfig& rc) {
    if (a.threads > 0) {
        return static_cast<std::size_t>(a.threads);
    }
    if (const char* env = std::getenv("KOOPA_THREADS"); env != nullptr && *env != '\0') {
        const std::size_t n = text::parse_size(env, "KOOPA_THREADS");
        if (n == 0) {
            throw ConfigError("KOOPA_THREADS must be positive");
        }
        return n;
    }
    return std::max<std::size_t>(1, rc.get_size("run.threads"));
}

Context make_context(const CommonArgs& a, std::ostream& out) {
    Context ctx{resolve_config(a), 1, {}, out};
    ctx.threads = resolve_threads(a, ctx.run);
    ctx.out_dir = ctx.run.get("output.dir");
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) {
        throw ConfigError("cannot create output directory '" + ctx.out_dir.string() + "': " + ec.message());
    }
    return ctx;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    f << content;
}

void echo_config(const Context& ctx) {
    write_text(ctx.out_dir / "config.ini", ctx.run.to_text());
}

KoopaModel load_model(const CommonArgs& a, Context& ctx) {
    const fs::path path = a.checkpoint.empty() ? ctx.out_dir / "model.kpa" : fs::path(a.checkpoint);
    if (!fs::exists(path)) {
        throw ConfigError("checkpoint '" + path.string() + "' does not exist (run 'koopa train' first)");
    }
    KoopaModel model;
    try {
        model = load_checkpoint(path.string());
    } catch (const IoError& e) {
        throw DataProblem(e.what());
    }
    ctx.run.model = model.config();
    return model;
}

data::Dataset load_dataset(const config::RunConfig& rc) {
    const std::string synthetic = rc.get("data.synthetic");
    if (!synthetic.empty()) {
        data::SynthParams p;
        p.rows = rc.get_size("data.synthetic_rows");
        p.variates = std::max<std::size_t>(1, rc.model.variates);
        p.noise = rc.get_double("data.synthetic_noise");
        return data::synth_generate(data::parse_synth_kind(synthetic), p, rc.get_size("data.synthetic_seed")).dataset;
    }
    const std::string path = rc.get("data.path");
    if (path.empty()) {
        throw ConfigError("no data source: set data.path or data.synthetic");
    }
    try {
        return data::load_csv(path);
    } catch (const IoError& e) {
        throw DataProblem(e.what());
    } catch (const ParseError& e) {
        throw DataProblem(e.what());
    }
}

data::SplitSpec split_spec(const config::RunConfig& rc, const data::Dataset& ds) {
    const std::string preset = rc.get("data.preset");
    data::SplitSpec spec;
    if (preset == "auto") {
        spec = data::split_spec_for(ds.name);
    } else if (preset == "etth") {
        spec.preset = data::SplitPreset::etth;
    } else if (preset == "ettm") {
        spec.preset = data::SplitPreset::ettm;
    } else if (preset != "ratios") {
        throw ConfigError("data.preset must be auto, ratios, etth or ettm, got '" + preset + "'");
    }
    spec.train_ratio = rc.get_double("data.train_ratio");
    spec.val_ratio = rc.get_double("data.val_ratio");
    return spec;
}

// Loads and splits the dataset. The scaler comes from the model when it
// carries one, otherwise it is fitted on the training rows.
data::Dataset prepare_dataset(const config::RunConfig& rc, std::size_t horizon, const DataScaler* scaler) {
    data::Dataset ds = load_dataset(rc);
    if (rc.model.variates != 0 && scaler != nullptr && ds.variates() != rc.model.variates) {
        throw ConfigError("dataset has " + std::to_string(ds.variates()) + " variates but the model expects " +
                          std::to_string(rc.model.variates));
    }
    try {
        data::chronological_split(ds, split_spec(rc, ds), rc.model.lookback, horizon);
        if (scaler != nullptr && !scaler->empty()) {
            ds.scaler = *scaler;
        } else if (rc.get_bool("data.scale")) {
            data::fit_scaler(ds, rc.model.std_floor);
        }
    } catch (const ArgumentError& e) {
        throw DataProblem(e.what());
    }
    return ds;
}

std::string fixed(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

// --- commands --------------------------------------------------------------

int cmd_train(const CommonArgs& a, std::ostream& out) {
    Context ctx = make_context(a, out);
    data::Dataset ds = prepare_dataset(ctx.run, ctx.run.model.horizon, nullptr);
    ctx.run.model.variates = ds.variates();
    ctx.run.model.validate();
    echo_config(ctx);

    const ModelConfig& cfg = ctx.run.model;
    const auto train_pairs = data::windows(ds, data::Split::train, cfg.lookback, cfg.horizon);
    const auto val_pairs = data::windows(ds, data::Split::val, cfg.lookback, cfg.horizon);
    KoopaModel model = KoopaModel::create(cfg, mask_from_windows(train_pairs, cfg));
    model.scaler = ds.scaler;

    TrainOptions opts;
    opts.threads = ctx.threads;
    opts.on_epoch = [&](const EpochRecord& r) {
        ctx.out << "epoch " << r.epoch << "  train_mse " << fixed(r.train_mse) << "  val_mse " << fixed(r.val_mse)
                << "  " << fixed(r.seconds) << " s\n";
    };
    opts.on_event = [&](const std::string& e) { ctx.out << "note: " << e << '\n'; };
    out << "training on " << ds.name << ": " << train_pairs.size() << " train / " << val_pairs.size()
        << " val windows, " << model.parameter_count() << " parameters, " << ctx.threads << " thread(s)\n";
    const TrainLog log = train(model, train_pairs, val_pairs, opts);

    write_text(ctx.out_dir / "train_log.csv", training_log_csv(log));
    save_checkpoint(model, (ctx.out_dir / "model.kpa").string());
    out << "best epoch " << log.best_epoch << " (val_mse " << fixed(log.best_val_mse) << ")"
        << (log.early_stopped ? ", stopped early" : "") << "\nwrote " << (ctx.out_dir / "model.kpa").string()
        << '\n';
    return exit_ok;
}

int cmd_eval(const CommonArgs& a, std::ostream& out) {
    Context ctx = make_context(a, out);
    const KoopaModel model = load_model(a, ctx);
    echo_config(ctx);
    const ModelConfig& cfg = model.config();
    const data::Split split = data::parse_split(ctx.run.get("eval.split"));
    const data::Dataset ds = prepare_dataset(ctx.run, cfg.horizon, &model.scaler);
    const auto pairs = data::windows(ds, split, cfg.lookback, cfg.horizon, std::max<std::size_t>(1, ctx.run.get_size("eval.stride")));
    if (pairs.empty()) {
        throw DataProblem("split '" + data::to_string(split) + "' has no complete windows");
    }
    const std::size_t season = std::max<std::size_t>(1, ctx.run.get_size("eval.seasonality"));
    const eval::MetricReport rep = eval::evaluate(model, pairs, season);
    double naive = 0.0;
    for (const auto& w : pairs) {
        naive += eval::mse(eval::repeat_last(w.lookback, cfg.horizon), w.target);
    }
    naive /= static_cast<double>(pairs.size());

    out << "split " << data::to_string(split) << ", " << rep.window_count << " windows\n"
        << "mse   " << fixed(rep.mse) << "\nmae   " << fixed(rep.mae) << "\nsmape " << fixed(rep.smape)
        << "\nmase  " << fixed(rep.mase) << "\nrepeat-last mse " << fixed(naive) << '\n';
    write_text(ctx.out_dir / "metrics.csv", eval::metric_csv(rep));
    return exit_ok;
}

int cmd_forecast(const CommonArgs& a, const std::string& input_flag, const std::string& output_flag,
                 std::ostream& out) {
    Context ctx = make_context(a, out);
    const KoopaModel model = load_model(a, ctx);
    echo_config(ctx);
    const ModelConfig& cfg = model.config();
    const std::string input = input_flag.empty() ? ctx.run.get("forecast.input") : input_flag;
    if (input.empty()) {
        throw ConfigError("forecast needs an input CSV (--input or forecast.input)");
    }
    data::Dataset ds;
    try {
        ds = data::load_csv(input);
    } catch (const IoError& e) {
        throw DataProblem(e.what());
    } catch (const ParseError& e) {
        throw DataProblem(e.what());
    }
    if (ds.variates() != cfg.variates) {
        throw ConfigError("input has " + std::to_string(ds.variates()) + " variates but the model expects " +
                          std::to_string(cfg.variates));
    }
    if (ds.rows() < cfg.lookback) {
        throw ConfigError("input has " + std::to_string(ds.rows()) + " rows but the model needs a lookback of " +
                          std::to_string(cfg.lookback));
    }
    Matrix lookback = ds.values.slice_rows(ds.rows() - cfg.lookback, ds.rows());
    if (!model.scaler.empty()) {
        lookback = model.scaler.transform(lookback);
    }
    Matrix pred = koopa_forward(model, lookback).prediction;
    if (!model.scaler.empty()) {
        pred = model.scaler.inverse(pred);
    }
    data::Dataset result;
    result.name = "forecast";
    result.values = pred;
    result.column_names = ds.column_names;
    const std::string dest =
        !output_flag.empty() ? output_flag
                             : (ctx.run.get("forecast.output").empty() ? (ctx.out_dir / "forecast.csv").string()
                                                                       : ctx.run.get("forecast.output"));
    data::save_csv(result, dest);
    out << "wrote " << pred.rows() << "x" << pred.cols() << " forecast to " << dest << '\n';
    return exit_ok;
}

int cmd_adapt(const CommonArgs& a, std::ostream& out) {
    Context ctx = make_context(a, out);
    const KoopaModel model = load_model(a, ctx);
    const ModelConfig& cfg = model.config();
    std::size_t h_te = ctx.run.get_size("adapt.horizon");
    if (h_te == 0) {
        h_te = 3 * cfg.horizon;
        ctx.run.extra["adapt.horizon"] = std::to_string(h_te);
    }
    echo_config(ctx);
    if (h_te < cfg.horizon) {
        throw ConfigError("adapt.horizon (" + std::to_string(h_te) + ") is shorter than the trained horizon (" +
                          std::to_string(cfg.horizon) + ")");
    }
    const std::string mode = ctx.run.get("adapt.mode");
    if (mode != "all" && mode != "oa_fast" && mode != "oa_naive") {
        throw ConfigError("adapt.mode must be all, oa_fast or oa_naive, got '" + mode + "'");
    }
    const data::Split split = data::parse_split(ctx.run.get("adapt.split"));
    const data::Dataset ds = prepare_dataset(ctx.run, h_te, &model.scaler);
    std::size_t stride = ctx.run.get_size("adapt.stride");
    stride = stride == 0 ? h_te : stride;
    auto pairs = data::windows(ds, split, cfg.lookback, h_te, stride);
    const std::size_t max_windows = ctx.run.get_size("adapt.max_windows");
    if (max_windows > 0 && pairs.size() > max_windows) {
        pairs.resize(max_windows);
    }
    if (pairs.empty()) {
        throw DataProblem("split '" + data::to_string(split) + "' has no window of length " +
                          std::to_string(cfg.lookback + h_te));
    }

    const ScaleUpMode oa_mode = mode == "oa_naive" ? ScaleUpMode::oa_naive : ScaleUpMode::oa_fast;
    eval::MetricAccumulator van_acc;
    eval::MetricAccumulator oa_acc;
    double fast_naive_gap = 0.0;
    std::size_t degenerate = 0;
    for (const auto& w : pairs) {
        const ScaleUpResult van = scale_up_forecast(model, w.lookback, h_te, w.target, ScaleUpMode::vanilla);
        const ScaleUpResult oa = scale_up_forecast(model, w.lookback, h_te, w.target, oa_mode);
        van_acc.add(van.prediction, w.target, w.lookback);
        oa_acc.add(oa.prediction, w.target, w.lookback);
        degenerate += oa.degenerate_steps;
        if (mode == "all") {
            const ScaleUpResult naive = scale_up_forecast(model, w.lookback, h_te, w.target, ScaleUpMode::oa_naive);
            fast_naive_gap = std::max(fast_naive_gap, max_abs_diff(naive.prediction, oa.prediction));
        }
    }
    const eval::MetricReport van = van_acc.finish();
    const eval::MetricReport oa = oa_acc.finish();
    const double promotion = 100.0 * (1.0 - oa.mse / van.mse);

    std::ostringstream csv;
    csv << "dataset,h_tr,h_te,windows,koopa_mse,koopa_mae,koopa_oa_mse,koopa_oa_mae,promotion_mse_percent\n"
        << ds.name << ',' << cfg.horizon << ',' << h_te << ',' << pairs.size() << ',' << text::format_double(van.mse)
        << ',' << text::format_double(van.mae) << ',' << text::format_double(oa.mse) << ','
        << text::format_double(oa.mae) << ',' << text::format_double(promotion) << '\n';
    write_text(ctx.out_dir / "adapt.csv", csv.str());

    out << "scale-up " << cfg.horizon << " -> " << h_te << " on " << pairs.size() << " windows\n"
        << "koopa     mse " << fixed(van.mse) << "  mae " << fixed(van.mae) << "\nkoopa OA  mse " << fixed(oa.mse)
        << "  mae " << fixed(oa.mae) << "\npromotion " << fixed(promotion) << " %\n";
    if (degenerate > 0) {
        out << "note: " << degenerate << " adaptation steps had an embedding inside the snapshot span\n";
    }
    if (mode == "all") {
        out << "max |oa_fast - oa_naive| " << fast_naive_gap << '\n';
    }
    return exit_ok;
}

int cmd_analyze(const CommonArgs& a, std::ostream& out) {
    Context ctx = make_context(a, out);
    const std::string which = ctx.run.get("analyze.which");
    if (which != "both" && which != "dov" && which != "stability") {
        throw ConfigError("analyze.which must be dov, stability or both, got '" + which + "'");
    }
    const fs::path ckpt = a.checkpoint.empty() ? ctx.out_dir / "model.kpa" : fs::path(a.checkpoint);
    const bool need_model = which != "dov" || fs::exists(ckpt);
    KoopaModel model;
    if (need_model) {
        model = load_model(a, ctx);
    }
    echo_config(ctx);
    const ModelConfig& cfg = ctx.run.model;
    const data::Dataset ds = prepare_dataset(ctx.run, cfg.horizon, need_model ? &model.scaler : nullptr);

    if (which != "stability") {
        spectral::SpectrumMask mask;
        if (need_model) {
            mask = model.mask();
        } else {
            ModelConfig local = cfg;
            local.variates = ds.variates();
            mask = mask_from_windows(data::windows(ds, data::Split::train, cfg.lookback, cfg.horizon), local);
        }
        eval::DovOptions opts;
        opts.subsets = ctx.run.get_size("analyze.subsets");
        const eval::DovReport rep =
            eval::degree_of_variation(data::scaled_values(ds), mask, cfg.lookback, cfg.horizon, opts);
        std::ostringstream csv;
        csv << "subsets,std_invariant,std_variant\n"
            << rep.subsets << ',' << text::format_double(rep.std_invariant) << ','
            << text::format_double(rep.std_variant) << '\n';
        write_text(ctx.out_dir / "dov.csv", csv.str());
        out << "degree of variation over " << rep.subsets << " subsets: invariant " << fixed(rep.std_invariant)
            << ", variant " << fixed(rep.std_variant) << '\n';
    }
    if (which != "dov") {
        const data::Split split = data::parse_split(ctx.run.get("analyze.split"));
        const auto pairs = data::windows(ds, split, cfg.lookback, cfg.horizon);
        const std::size_t wanted = std::max<std::size_t>(1, ctx.run.get_size("analyze.windows"));
        std::vector<Matrix> lookbacks;
        if (!pairs.empty()) {
            const std::size_t n = std::min(wanted, pairs.size());
            for (std::size_t i = 0; i < n; ++i) {
                lookbacks.push_back(pairs[i * pairs.size() / n].lookback);
            }
        }
        const eval::StabilityReport rep = eval::stability_report(model, lookbacks);
        write_text(ctx.out_dir / "stability.csv", eval::stability_csv(rep));
        write_text(ctx.out_dir / "eigenvalues.csv", eval::eigenvalue_csv(rep));
        double inv = 0.0;
        double var = 0.0;
        std::size_t n_inv = 0;
        std::size_t n_var = 0;
        for (const auto& r : rep.rows) {
            (r.kind == "k_inv" ? inv : var) += r.stability;
            ++(r.kind == "k_inv" ? n_inv : n_var);
        }
        out << "mean eigenvalue distance from the unit circle: k_inv " << fixed(inv / std::max<std::size_t>(1, n_inv))
            << " (" << n_inv << " operators), k_var " << fixed(var / std::max<std::size_t>(1, n_var)) << " ("
            << n_var << " windows)\n";
    }
    return exit_ok;
}

int cmd_bench(const CommonArgs& a, std::ostream& out) {
    Context ctx = make_context(a, out);
    echo_config(ctx);
    AdaptBenchmarkOptions opts;
    opts.dims = ctx.run.get_size_list("bench.dims");
    opts.steps = ctx.run.get_size_list("bench.steps");
    opts.snapshots = ctx.run.get_size("bench.snapshots");
    opts.repetitions = ctx.run.get_size("bench.repetitions");
    opts.seed = ctx.run.get_size("bench.seed");
    opts.include_naive = ctx.run.get_bool("bench.naive");
    const auto rows = adaptation_benchmark(opts);
    write_text(ctx.out_dir / "bench.csv", benchmark_csv(rows));
    out << benchmark_csv(rows);
    if (opts.dims.size() >= 2) {
        out << "log-log slope fast " << fixed(complexity_slope(rows, AdaptAlgorithm::fast));
        if (opts.include_naive) {
            out << ", naive " << fixed(complexity_slope(rows, AdaptAlgorithm::naive));
        }
        out << '\n';
    }
    return exit_ok;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "koopa: configuration error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DataProblem& e) {
        err << "koopa: data error: " << e.what() << '\n';
        return exit_data;
    } catch (const NumericError& e) {
        err << "koopa: numeric error: " << e.what() << '\n';
        return exit_numeric;
    } catch (const ShapeError& e) {
        err << "koopa: " << e.what() << '\n';
        return exit_usage;
    } catch (const ArgumentError& e) {
        err << "koopa: " << e.what() << '\n';
        return exit_usage;
    } catch (const IoError& e) {
        err << "koopa: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        err << "koopa: internal error: " << e.what() << '\n';
        return exit_internal;
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Koopa: Koopman forecaster for non-stationary time series"};
    app.require_subcommand(1);

    CommonArgs train_args;
    CommonArgs eval_args;
    CommonArgs forecast_args;
    CommonArgs adapt_args;
    CommonArgs analyze_args;
    CommonArgs bench_args;
    std::string seed;
    std::string input;
    std::string output;

    CLI::App* train = app.add_subcommand("train", "Train a model and write <out>/model.kpa and train_log.csv");
    add_common(*train, train_args, false);
    train->add_option("--seed", seed, "Shorthand for --set train.seed=N");
    CLI::App* evaluate = app.add_subcommand("eval", "Evaluate a checkpoint on a split and write metrics.csv");
    add_common(*evaluate, eval_args, true);
    CLI::App* forecast = app.add_subcommand("forecast", "Forecast the rows following the end of a CSV");
    add_common(*forecast, forecast_args, true);
    forecast->add_option("--input", input, "CSV whose last rows form the lookback (forecast.input)");
    forecast->add_option("--output", output, "Destination CSV (forecast.output)");
    CLI::App* adapt = app.add_subcommand("adapt", "Scale up the horizon: vanilla rolling vs operator adaptation");
    add_common(*adapt, adapt_args, true);
    CLI::App* analyze = app.add_subcommand("analyze", "Degree of variation and operator stability reports");
    add_common(*analyze, analyze_args, true);
    CLI::App* bench = app.add_subcommand("bench", "Time naive and fast operator adaptation");
    add_common(*bench, bench_args, false);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    if (train->parsed()) {
        if (!seed.empty()) {
            train_args.sets.push_back("train.seed=" + seed);
        }
        return guarded([&] { return cmd_train(train_args, out); }, err);
    }
    if (evaluate->parsed()) {
        return guarded([&] { return cmd_eval(eval_args, out); }, err);
    }
    if (forecast->parsed()) {
        return guarded([&] { return cmd_forecast(forecast_args, input, output, out); }, err);
    }
    if (adapt->parsed()) {
        return guarded([&] { return cmd_adapt(adapt_args, out); }, err);
    }
    if (analyze->parsed()) {
        return guarded([&] { return cmd_analyze(analyze_args, out); }, err);
    }
    return guarded([&] { return cmd_bench(bench_args, out); }, err);
}

} // namespace koopa::cli
