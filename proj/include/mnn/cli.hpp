#pragma once

// Command-line front end: gen, train, eval, gradcheck, plot.
//
// Exit codes: 0 success, 1 runtime failure (or a failed gradient check),
// 2 usage error. Diagnostics go to `err`.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "data.hpp"
#include "error.hpp"
#include "fop.hpp"
#include "gradcheck.hpp"
#include "model_io.hpp"
#include "network.hpp"
#include "regions.hpp"
#include "training.hpp"

namespace mnn::cli {

struct GenOptions {
    std::string dataset;
    std::size_t n = 0;
    double noise = 0.1;
    std::uint64_t seed = 0;
    double turns = 1.75;
    double factor = 0.5;
    std::string out;
};

struct TrainOptions {
    std::string data;
    std::string config;
    std::size_t hidden = 5;
    std::size_t ticks = 3;
    std::string activation = "relu";
    std::string mask;
    double train_fraction = 0.7;
    bool no_standardize = false;
    std::string out;
    std::string metrics;
    TrainConfig train;
    std::string optimizer = "adam";
    bool no_clamp = false;
};

struct EvalOptions {
    std::string model;
    std::string data;
    std::string split = "all";
};

struct GradcheckOptions {
    std::size_t neurons = 8;
    std::size_t ticks = 4;
    std::string activation = "tanh";
    std::uint64_t seed = 0;
    double h = 1e-6;
    double tol = 1e-5;
    bool json = false;
    bool no_clamp = false;
};

struct PlotOptions {
    std::string model;
    std::string data;
    std::size_t resolution = 200;
    std::string pgm;
    std::string csv;
};

namespace detail {

inline LabeledDataset generate(const GenOptions& o) {
    const bool blobs = o.dataset == "blobs" || o.dataset == "double-blobs";
    const std::size_t n = o.n ? o.n : (blobs ? 999 : 1000);
    if (o.dataset == "moons") return gen_moons(n, o.noise, o.seed);
    if (o.dataset == "circles") return gen_circles(n, o.noise, o.factor, o.seed);
    if (o.dataset == "spirals") return gen_spirals(n, o.noise, o.turns, o.seed);
    if (o.dataset == "blobs") return gen_blobs(n, single_blob_centers(), o.seed);
    if (o.dataset == "double-blobs") return gen_blobs(n, double_blob_centers(), o.seed);
    throw Error("unknown dataset '" + o.dataset + "'");
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path + "'");
    return f;
}

/// Flags override config-file values, which override defaults.
inline void apply_config(const nlohmann::json& j, CLI::App& sub, TrainOptions& o) {
    auto unset = [&](const char* flag) { return sub.get_option(flag)->count() == 0; };
    auto take = [&](const char* key, const char* flag, auto& dst) {
        if (j.contains(key) && unset(flag)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    };
    take("epochs", "--epochs", o.train.epochs);
    take("learning_rate", "--lr", o.train.learning_rate);
    take("optimizer", "--optimizer", o.optimizer);
    take("beta1", "--beta1", o.train.beta1);
    take("beta2", "--beta2", o.train.beta2);
    take("epsilon", "--epsilon", o.train.epsilon);
    take("seed", "--seed", o.train.seed);
    take("hidden", "--hidden", o.hidden);
    take("ticks", "--ticks", o.ticks);
    take("activation", "--activation", o.activation);
    take("train_fraction", "--train-fraction", o.train_fraction);
    if (j.contains("clamping") && unset("--no-clamp")) o.no_clamp = !j.at("clamping").get<bool>();
}

inline int run_gen(const GenOptions& o, std::ostream& out) {
    const auto d = generate(o);
    auto f = open_out(o.out);
    write_csv(f, d);
    out << "wrote " << d.size() << " samples to " << o.out << '\n';
    return 0;
}

inline int run_train(TrainOptions& o, CLI::App& sub, std::ostream& out) {
    if (!o.config.empty()) {
        std::ifstream cf(o.config);
        if (!cf) throw Error("cannot open config file '" + o.config + "'");
        nlohmann::json j;
        try {
            cf >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("config file '" + o.config + "': " + e.what());
        }
        apply_config(j, sub, o);
    }
    o.train.optimizer = parse_optimizer(o.optimizer);
    o.train.clamping = !o.no_clamp;
    o.train.validate();

    const auto data = load_csv(o.data);
    const auto split = split_standardize(data, o.train_fraction, o.train.seed, !o.no_standardize);
    const std::size_t classes = data.class_count;
    if (classes < 2) throw Error("dataset needs at least two classes");
    const NetworkShape shape(data.feature_count() + 1, o.hidden, classes, o.ticks);
    const Mask mask = o.mask.empty() ? mesh_mask(shape) : load_mask_csv(o.mask);
    if (mask.rows() != shape.total())
        throw DimensionError("mask is " + std::to_string(mask.rows()) + "x" + std::to_string(mask.rows()) +
                             " but the network has " + std::to_string(shape.total()) + " neurons");
    auto model = build_model(shape, mask, Init::uniform_scaled, o.train.seed, parse_activation(o.activation),
                             o.train.clamping);
    auto result = train(std::move(model), split.train, o.train);

    save_model(o.out, result.model, split.scaler, SplitInfo{o.train.seed, o.train_fraction});
    if (!o.metrics.empty()) {
        auto f = open_out(o.metrics);
        write_metrics_csv(f, result.metrics);
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "train_accuracy=%.6f test_accuracy=%.6f\n", evaluate(result.model, split.train),
                  evaluate(result.model, split.test));
    out << buf;
    return 0;
}

inline LabeledDataset eval_subset(const SavedModel& saved, const LabeledDataset& raw, const std::string& which) {
    if (which == "all") return saved.scaler.transform(raw);
    if (!saved.split) throw Error("model file has no split information; use --split all");
    const auto s = split_standardize(raw, saved.split->train_fraction, saved.split->seed, false);
    const auto& idx = which == "train" ? s.train_indices : s.test_indices;
    return saved.scaler.transform(raw.subset(idx));
}

inline int run_eval(const EvalOptions& o, std::ostream& out) {
    const auto saved = load_model(o.model);
    const auto data = eval_subset(saved, load_csv(o.data), o.split);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f\n", evaluate(saved.model, data));
    out << buf;
    return 0;
}

inline int run_gradcheck(const GradcheckOptions& o, std::ostream& out) {
    const auto c = random_check_case(o.neurons, o.ticks, parse_activation(o.activation), o.seed, !o.no_clamp);
    const auto fwd = forward_with_grad(c.model, c.input);
    const auto head = softmax_cross_entropy(readout(fwd.trace, c.model.shape()), c.label);
    const auto g = error_gradient(head.dedy, fwd.gradient, c.model);
    const auto g_fd = finite_diff_gradient(c.model, c.input, c.label, o.h);
    const auto report = compare(g, g_fd, o.tol);
    if (o.json)
        out << to_json(report).dump() << '\n';
    else
        out << to_text(report) << '\n';
    return report.pass ? 0 : 1;
}

inline int run_plot(const PlotOptions& o, std::ostream& out) {
    if (o.pgm.empty() && o.csv.empty()) throw Error("plot: give --pgm and/or --csv");
    const auto saved = load_model(o.model);
    const auto data = load_csv(o.data);
    const auto grid = decision_region_grid(saved.model, saved.scaler, data, o.resolution);
    if (!o.pgm.empty()) {
        auto f = open_out(o.pgm);
        write_pgm(f, grid);
    }
    if (!o.csv.empty()) {
        auto f = open_out(o.csv);
        write_grid_csv(f, grid);
    }
    out << "wrote " << o.resolution << "x" << o.resolution << " region grid\n";
    return 0;
}

}  // namespace detail

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Mesh neural networks with forward-only gradient propagation", "mnn"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset as CSV");
    gen_cmd->add_option("--dataset", gen.dataset, "moons | circles | spirals | blobs | double-blobs")
        ->required()
        ->check(CLI::IsMember({"moons", "circles", "spirals", "blobs", "double-blobs"}));
    gen_cmd->add_option("--n", gen.n, "Sample count (default 1000, 999 for blobs)");
    gen_cmd->add_option("--noise", gen.noise, "Gaussian noise std for moons/circles/spirals");
    gen_cmd->add_option("--seed", gen.seed);
    gen_cmd->add_option("--turns", gen.turns, "Spiral turns");
    gen_cmd->add_option("--factor", gen.factor, "Inner circle radius");
    gen_cmd->add_option("--out", gen.out)->required();

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "Train a mesh network on a CSV dataset");
    train_cmd->add_option("--data", tr.data)->required();
    train_cmd->add_option("--config", tr.config, "JSON file with TrainConfig fields");
    train_cmd->add_option("--hidden", tr.hidden);
    train_cmd->add_option("--ticks", tr.ticks);
    train_cmd->add_option("--activation", tr.activation);
    train_cmd->add_option("--mask", tr.mask, "CSV 0/1 adjacency mask");
    train_cmd->add_option("--epochs", tr.train.epochs);
    train_cmd->add_option("--lr", tr.train.learning_rate);
    train_cmd->add_option("--optimizer", tr.optimizer)->check(CLI::IsMember({"adam", "sgd"}));
    train_cmd->add_option("--beta1", tr.train.beta1);
    train_cmd->add_option("--beta2", tr.train.beta2);
    train_cmd->add_option("--epsilon", tr.train.epsilon);
    train_cmd->add_option("--seed", tr.train.seed);
    train_cmd->add_option("--train-fraction", tr.train_fraction);
    train_cmd->add_flag("--no-clamp", tr.no_clamp, "Do not re-clamp input neurons every tick");
    train_cmd->add_flag("--no-standardize", tr.no_standardize);
    train_cmd->add_option("--out", tr.out)->required();
    train_cmd->add_option("--metrics", tr.metrics, "Per-epoch metrics CSV");

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval", "Print the accuracy of a saved model");
    eval_cmd->add_option("--model", ev.model)->required();
    eval_cmd->add_option("--data", ev.data)->required();
    eval_cmd->add_option("--split", ev.split)->check(CLI::IsMember({"all", "train", "test"}));

    GradcheckOptions gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Compare gradients against finite differences");
    gc_cmd->add_option("--n", gc.neurons, "Neuron count");
    gc_cmd->add_option("--ticks", gc.ticks);
    gc_cmd->add_option("--activation", gc.activation);
    gc_cmd->add_option("--seed", gc.seed);
    gc_cmd->add_option("--step", gc.h, "Finite difference step");
    gc_cmd->add_option("--tol", gc.tol, "Relative tolerance");
    gc_cmd->add_flag("--json", gc.json);
    gc_cmd->add_flag("--no-clamp", gc.no_clamp);

    PlotOptions pl;
    auto* plot_cmd = app.add_subcommand("plot", "Rasterize decision regions of a 2-feature model");
    plot_cmd->add_option("--model", pl.model)->required();
    plot_cmd->add_option("--data", pl.data)->required();
    plot_cmd->add_option("--resolution", pl.resolution);
    plot_cmd->add_option("--pgm", pl.pgm);
    plot_cmd->add_option("--csv", pl.csv);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    try {
        if (*gen_cmd) return detail::run_gen(gen, out);
        if (*train_cmd) return detail::run_train(tr, *train_cmd, out);
        if (*eval_cmd) return detail::run_eval(ev, out);
        if (*gc_cmd) return detail::run_gradcheck(gc, out);
        if (*plot_cmd) return detail::run_plot(pl, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace mnn::cli
