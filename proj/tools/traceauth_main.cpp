// Command-line front end: synthetic corpus generation, cluster fitting,
// verifier training, window scoring and benchmark evaluation.
//
// Conventions: results go to files under --out (or stdout for `score`),
// diagnostics and progress go to stderr, every run drops a run_config.json
// echo of the effective settings, and any failure exits nonzero with a
// one-line message.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "traceauth/traceauth.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace traceauth;

fs::path ensure_out_dir(const std::string& out_dir) {
    fs::path p(out_dir.empty() ? "." : out_dir);
    fs::create_directories(p);
    return p;
}

void write_run_config(const fs::path& out, const json& doc) {
    const fs::path path = out / "run_config.json";
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open file for writing: " + path.string());
    f << doc.dump(2) << '\n';
}

Trace load_trace(const std::string& path, const std::string& format, const std::string& user) {
    Trace trace = format == "plt" ? parse_plt(path) : parse_csv(path);
    if (!user.empty())
        trace.user_id = user;
    else if (trace.user_id.empty())
        trace.user_id = fs::path(path).stem().string();
    return trace;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    int users = 5;
    std::uint64_t seed = 1;
    int days = 42;
    std::int64_t interval_s = 180;
    double noise_sigma_m = 5.0;
    double redraw_prob = 0.02;
    double transit_speed_mps = 10.0;
    bool dense = false;
};

int run_synth(const SynthArgs& args, const std::string& out_dir) {
    SynthConfig cfg = default_synth_config(static_cast<std::size_t>(args.users), args.seed);
    cfg.days = args.days;
    cfg.interval_s = args.interval_s;
    cfg.noise_sigma_m = args.noise_sigma_m;
    cfg.redraw_prob = args.redraw_prob;
    cfg.transit_speed_mps = args.transit_speed_mps;
    cfg.sparsity.enabled = !args.dense;

    const std::vector<Trace> corpus = synth_generate(cfg);
    const fs::path out = ensure_out_dir(out_dir);

    CorpusManifest manifest;
    manifest.notes = "synthetic corpus, seed " + std::to_string(args.seed);
    for (const Trace& trace : corpus) {
        const std::string file = trace.user_id + ".csv";
        write_trace_csv((out / file).string(), trace);
        manifest.users.push_back({trace.user_id, {file}, "csv"});
    }
    save_manifest((out / "manifest.json").string(), manifest);

    write_run_config(out, json{{"command", "synth"},
                               {"out", out.string()},
                               {"users", args.users},
                               {"seed", args.seed},
                               {"days", args.days},
                               {"interval_s", args.interval_s},
                               {"noise_sigma_m", args.noise_sigma_m},
                               {"redraw_prob", args.redraw_prob},
                               {"transit_speed_mps", args.transit_speed_mps},
                               {"sparsity", !args.dense}});

    std::size_t total = 0;
    for (const Trace& t : corpus) total += t.points.size();
    std::cerr << "wrote " << corpus.size() << " traces (" << total << " points) and manifest to "
              << out.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// cluster / train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string input;
    std::string format = "csv";
    std::string user;
    std::string method = "mshmm"; // train only
    std::string model_out;
    double r_max_m = 20.0;
    int min_pts = 4;
    std::int64_t interval_s = 180;
    std::int64_t max_gap_s = 3600;
    int hidden_states = 10;
    double delta = 1e-3;
    int max_iters = 200;
    double tol = 1e-6;
    std::uint64_t seed = 1;
};

json train_config_echo(const char* command, const TrainArgs& args, const fs::path& out,
                       const std::string& model_path) {
    return json{{"command", command},
                {"out", out.string()},
                {"input", args.input},
                {"format", args.format},
                {"user", args.user},
                {"method", args.method},
                {"model_out", model_path},
                {"r_max_m", args.r_max_m},
                {"min_pts", args.min_pts},
                {"interval_s", args.interval_s},
                {"max_gap_s", args.max_gap_s},
                {"hidden_states", args.hidden_states},
                {"delta", args.delta},
                {"max_iters", args.max_iters},
                {"tol", args.tol},
                {"seed", args.seed}};
}

int run_cluster(const TrainArgs& args, const std::string& out_dir) {
    const fs::path out = ensure_out_dir(out_dir);
    const std::string model_path =
        args.model_out.empty() ? (out / "cluster_model.txt").string() : args.model_out;

    const Trace raw = load_trace(args.input, args.format, args.user);
    const Trace trace = resample(raw, args.interval_s, args.max_gap_s);
    SavedModel model;
    model.kind = "cluster";
    model.clusters = build_cluster_model(trace.user_id, trace.points, args.r_max_m, args.min_pts);
    save_model(model_path, model);

    json echo = train_config_echo("cluster", args, out, model_path);
    echo.erase("method");
    echo.erase("hidden_states");
    echo.erase("delta");
    echo.erase("max_iters");
    echo.erase("tol");
    echo.erase("seed");
    write_run_config(out, echo);

    std::cerr << "fitted " << model.clusters.clusters.size() << " location clusters (R_max "
              << args.r_max_m << " m) from " << trace.points.size()
              << " resampled points; model saved to " << model_path << '\n';
    return 0;
}

int run_train(const TrainArgs& args, const std::string& out_dir) {
    const fs::path out = ensure_out_dir(out_dir);
    const std::string model_path =
        args.model_out.empty() ? (out / "model.txt").string() : args.model_out;
    const Method method = method_from_name(args.method);

    const Trace raw = load_trace(args.input, args.format, args.user);
    const Trace trace = resample(raw, args.interval_s, args.max_gap_s);
    SavedModel model;
    model.clusters = build_cluster_model(trace.user_id, trace.points, args.r_max_m, args.min_pts);
    const ObservationSequence seq = build_sequence(trace, model.clusters);
    const Vocabulary vocab{static_cast<int>(model.clusters.clusters.size())};

    switch (method) {
    case Method::sm:
        model.kind = "sm";
        model.verifier = train_sm(seq);
        break;
    case Method::mc:
        model.kind = "mc";
        model.verifier = train_mc(seq, static_cast<int>(vocab.size()), args.delta);
        break;
    case Method::mshmm:
    case Method::hmm_lap: {
        TrainOptions opt;
        opt.hidden_states = args.hidden_states;
        opt.mode = method == Method::mshmm ? SmoothingMode::marginal : SmoothingMode::laplace;
        opt.delta = args.delta;
        opt.max_iters = args.max_iters;
        opt.tol = args.tol;
        opt.seed = args.seed;
        model.kind = "mshmm";
        model.verifier = train_mshmm(seq, static_cast<int>(vocab.size()), opt);
        break;
    }
    }
    save_model(model_path, model);
    write_run_config(out, train_config_echo("train", args, out, model_path));

    std::cerr << "trained " << args.method << " verifier on " << seq.symbols.size()
              << " observations (" << model.clusters.clusters.size()
              << " clusters); model saved to " << model_path << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreArgs {
    std::string model;
    std::string input;
    std::string format = "csv";
    std::string user;
    int n = 16;
    int stride = 1;
    std::int64_t interval_s = 180;
    std::int64_t max_gap_s = 3600;
};

int run_score(const ScoreArgs& args, const std::string& out_dir) {
    const fs::path out = ensure_out_dir(out_dir);
    const SavedModel model = load_model(args.model);
    if (std::holds_alternative<std::monostate>(model.verifier))
        throw std::runtime_error("model file holds no verifier (kind '" + model.kind +
                                 "'); train one with the train command");

    const Trace raw = load_trace(args.input, args.format, args.user);
    const Trace trace = resample(raw, args.interval_s, args.max_gap_s);
    const ObservationSequence seq = build_sequence(trace, model.clusters);
    const std::vector<int> symbols = seq.symbol_ids();
    const auto windows = make_windows(symbols, args.n, args.stride);

    write_run_config(out, json{{"command", "score"},
                               {"out", out.string()},
                               {"model", args.model},
                               {"input", args.input},
                               {"format", args.format},
                               {"user", args.user},
                               {"n", args.n},
                               {"stride", args.stride},
                               {"interval_s", args.interval_s},
                               {"max_gap_s", args.max_gap_s}});

    if (windows.empty()) {
        std::cerr << "warning: window length " << args.n << " exceeds the observation sequence ("
                  << symbols.size() << " symbols); nothing to score\n";
        return 0;
    }
    for (const auto& window : windows) {
        double score = 0.0;
        if (const auto* sm = std::get_if<SMModel>(&model.verifier))
            score = sm_score(*sm, window);
        else if (const auto* mc = std::get_if<MCModel>(&model.verifier))
            score = mc_score(*mc, window);
        else
            score = mshmm_score(std::get<MSHMMModel>(model.verifier), window);
        std::cout << detail::format_double(score) << '\n';
    }
    std::cerr << "scored " << windows.size() << " windows of length " << args.n << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string corpus;
    std::vector<std::string> methods; // empty = all four
    std::vector<int> window_lengths{16};
    int stride = 1;
    double r_max_m = 20.0;
    int min_pts = 4;
    std::int64_t interval_s = 180;
    std::int64_t max_gap_s = 3600;
    int hidden_states = 10;
    double delta = 1e-3;
    int max_iters = 200;
    double tol = 1e-6;
    std::uint64_t seed = 1;
    std::string split = "chronological";
    double train_fraction = 0.7;
    int train_weeks = 5;
    int eval_week = 6;
    int jobs = 0;
};

int run_eval(const EvalArgs& args, const std::string& out_dir) {
    const fs::path out = ensure_out_dir(out_dir);

    BenchmarkConfig cfg;
    cfg.methods.clear();
    for (const std::string& name : args.methods) cfg.methods.push_back(method_from_name(name));
    if (cfg.methods.empty())
        cfg.methods = {Method::sm, Method::mc, Method::mshmm, Method::hmm_lap};
    cfg.window_lengths = args.window_lengths;
    cfg.stride = args.stride;
    cfg.r_max_m = args.r_max_m;
    cfg.min_pts = args.min_pts;
    cfg.resample_interval_s = args.interval_s;
    cfg.max_gap_s = args.max_gap_s;
    cfg.hidden_states = args.hidden_states;
    cfg.delta = args.delta;
    cfg.max_iters = args.max_iters;
    cfg.tol = args.tol;
    cfg.seed = args.seed;
    if (args.split == "weekly")
        cfg.split = SplitKind::weekly;
    else if (args.split == "chronological")
        cfg.split = SplitKind::chronological;
    else
        throw std::invalid_argument("unknown split: " + args.split);
    cfg.train_fraction = args.train_fraction;
    cfg.train_weeks = args.train_weeks;
    cfg.eval_week = args.eval_week;
    cfg.jobs = args.jobs;

    const CorpusManifest manifest = load_manifest(args.corpus);
    const std::string base_dir = fs::path(args.corpus).parent_path().string();
    const std::vector<Trace> corpus = load_corpus(manifest, base_dir);

    std::vector<std::string> method_names;
    for (Method m : cfg.methods) method_names.emplace_back(method_name(m));
    write_run_config(out, json{{"command", "eval"},
                               {"out", out.string()},
                               {"corpus", args.corpus},
                               {"methods", method_names},
                               {"window_lengths", cfg.window_lengths},
                               {"stride", cfg.stride},
                               {"r_max_m", cfg.r_max_m},
                               {"min_pts", cfg.min_pts},
                               {"interval_s", cfg.resample_interval_s},
                               {"max_gap_s", cfg.max_gap_s},
                               {"hidden_states", cfg.hidden_states},
                               {"delta", cfg.delta},
                               {"max_iters", cfg.max_iters},
                               {"tol", cfg.tol},
                               {"seed", cfg.seed},
                               {"split", args.split},
                               {"train_fraction", cfg.train_fraction},
                               {"train_weeks", cfg.train_weeks},
                               {"eval_week", cfg.eval_week},
                               {"jobs", cfg.jobs}});

    const EvalReport report = run_benchmark(corpus, cfg);
    for (const std::string& warning : report.warnings) std::cerr << "warning: " << warning << '\n';

    {
        std::ofstream eer(out / "eer.csv");
        if (!eer)
            throw std::runtime_error("cannot open file for writing: " + (out / "eer.csv").string());
        write_eer_csv(eer, report);
        std::ofstream roc(out / "roc.csv");
        if (!roc)
            throw std::runtime_error("cannot open file for writing: " + (out / "roc.csv").string());
        write_roc_csv(roc, report);
    }

    std::cout << "pooled equal error rates (" << corpus.size() << " users):\n";
    for (const EvalCell& c : report.pooled) {
        char line[128];
        std::snprintf(line, sizeof line, "  %-8s n=%-4d eer=%.4f\n", method_name(c.method), c.n,
                      c.eer);
        std::cout << line;
    }
    std::cerr << "wrote " << (out / "eer.csv").string() << " and " << (out / "roc.csv").string()
              << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"location-trace identity verification toolkit"};
    app.require_subcommand(1);
    std::string out_dir = ".";
    app.add_option("--out", out_dir, "directory for generated files (default: current directory)")
        ->envname("TRACEAUTH_OUT");
    app.set_config("--config", "", "read defaults from an INI/TOML file (flags win)");

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic location corpus");
    synth->fallthrough();
    synth->configurable();
    synth->add_option("--users", synth_args.users, "number of synthetic users")
        ->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_args.seed, "master random seed");
    synth->add_option("--days", synth_args.days, "days of history per user")
        ->check(CLI::PositiveNumber);
    synth->add_option("--interval", synth_args.interval_s, "sampling interval in seconds")
        ->check(CLI::PositiveNumber);
    synth->add_option("--noise", synth_args.noise_sigma_m, "GPS noise sigma in meters");
    synth->add_option("--redraw", synth_args.redraw_prob, "per-tick place redraw probability");
    synth->add_option("--transit-speed", synth_args.transit_speed_mps,
                      "travel speed between places (m/s)");
    synth->add_flag("--dense", synth_args.dense, "disable sparsity bursts (sample continuously)");

    TrainArgs cluster_args;
    CLI::App* cluster = app.add_subcommand("cluster", "fit location clusters from a trace");
    cluster->fallthrough();
    cluster->configurable();
    cluster->add_option("--input", cluster_args.input, "trace file")->required();
    cluster->add_option("--format", cluster_args.format, "input format")
        ->check(CLI::IsMember({"csv", "plt"}));
    cluster->add_option("--user", cluster_args.user, "user id override");
    cluster->add_option("--model-out", cluster_args.model_out,
                        "model file path (default: <out>/cluster_model.txt)");
    cluster->add_option("--r-max", cluster_args.r_max_m, "maximum cluster radius in meters");
    cluster->add_option("--min-pts", cluster_args.min_pts, "density threshold for clustering");
    cluster->add_option("--interval", cluster_args.interval_s, "resampling interval in seconds");
    cluster->add_option("--max-gap", cluster_args.max_gap_s,
                        "gap in seconds that starts a new segment");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train a verifier from a trace");
    train->fallthrough();
    train->configurable();
    train->add_option("--input", train_args.input, "trace file")->required();
    train->add_option("--format", train_args.format, "input format")
        ->check(CLI::IsMember({"csv", "plt"}));
    train->add_option("--user", train_args.user, "user id override");
    train->add_option("--method", train_args.method, "verifier type")
        ->check(CLI::IsMember({"sm", "mc", "mshmm", "hmm-lap"}));
    train->add_option("--model-out", train_args.model_out,
                      "model file path (default: <out>/model.txt)");
    train->add_option("--r-max", train_args.r_max_m, "maximum cluster radius in meters");
    train->add_option("--min-pts", train_args.min_pts, "density threshold for clustering");
    train->add_option("--interval", train_args.interval_s, "resampling interval in seconds");
    train->add_option("--max-gap", train_args.max_gap_s,
                      "gap in seconds that starts a new segment");
    train->add_option("--hidden", train_args.hidden_states, "hidden state count");
    train->add_option("--delta", train_args.delta, "smoothing constant");
    train->add_option("--iters", train_args.max_iters, "maximum EM iterations");
    train->add_option("--tol", train_args.tol, "EM convergence tolerance");
    train->add_option("--seed", train_args.seed, "initialization seed");

    ScoreArgs score_args;
    CLI::App* score = app.add_subcommand("score", "score trace windows against a trained model");
    score->fallthrough();
    score->configurable();
    score->add_option("--model", score_args.model, "trained model file")->required();
    score->add_option("--input", score_args.input, "trace file to score")->required();
    score->add_option("--format", score_args.format, "input format")
        ->check(CLI::IsMember({"csv", "plt"}));
    score->add_option("--user", score_args.user, "user id override");
    score->add_option("--n", score_args.n, "window length in observations")
        ->check(CLI::PositiveNumber);
    score->add_option("--stride", score_args.stride, "window stride")->check(CLI::PositiveNumber);
    score->add_option("--interval", score_args.interval_s, "resampling interval in seconds");
    score->add_option("--max-gap", score_args.max_gap_s,
                      "gap in seconds that starts a new segment");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "run the verification benchmark on a corpus");
    eval->fallthrough();
    eval->configurable();
    eval->add_option("--corpus", eval_args.corpus, "corpus manifest JSON")->required();
    eval->add_option("--method", eval_args.methods, "verifier(s) to evaluate (default: all)")
        ->check(CLI::IsMember({"sm", "mc", "mshmm", "hmm-lap"}));
    eval->add_option("--n", eval_args.window_lengths, "window length(s)");
    eval->add_option("--stride", eval_args.stride, "window stride")->check(CLI::PositiveNumber);
    eval->add_option("--r-max", eval_args.r_max_m, "maximum cluster radius in meters");
    eval->add_option("--min-pts", eval_args.min_pts, "density threshold for clustering");
    eval->add_option("--interval", eval_args.interval_s, "resampling interval in seconds");
    eval->add_option("--max-gap", eval_args.max_gap_s,
                     "gap in seconds that starts a new segment");
    eval->add_option("--hidden", eval_args.hidden_states, "hidden state count");
    eval->add_option("--delta", eval_args.delta, "smoothing constant");
    eval->add_option("--iters", eval_args.max_iters, "maximum EM iterations");
    eval->add_option("--tol", eval_args.tol, "EM convergence tolerance");
    eval->add_option("--seed", eval_args.seed, "master seed for training initialization");
    eval->add_option("--split", eval_args.split, "train/test split")
        ->check(CLI::IsMember({"chronological", "weekly"}));
    eval->add_option("--train-fraction", eval_args.train_fraction,
                     "training fraction for the chronological split");
    eval->add_option("--train-weeks", eval_args.train_weeks,
                     "training weeks for the weekly split");
    eval->add_option("--eval-week", eval_args.eval_week, "evaluation week for the weekly split");
    eval->add_option("--jobs", eval_args.jobs, "worker threads (0 = hardware concurrency)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(synth_args, out_dir);
        if (cluster->parsed()) return run_cluster(cluster_args, out_dir);
        if (train->parsed()) return run_train(train_args, out_dir);
        if (score->parsed()) return run_score(score_args, out_dir);
        if (eval->parsed()) return run_eval(eval_args, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::cerr << "error: no command selected\n";
    return 1;
}
