// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <mnn/mnn.hpp>

using namespace mnn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

struct Stats {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation
    std::size_t at_least_95 = 0;
};

Stats summarize(const std::vector<double>& xs) {
    Stats s;
    for (double x : xs) {
        s.mean += x;
        if (x >= 0.95) ++s.at_least_95;
    }
    s.mean /= static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.sd = xs.size() > 1 ? std::sqrt(sq / static_cast<double>(xs.size() - 1)) : 0.0;
    return s;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Reference training protocol: 70/30 stratified split with z-scored
// features, default mesh, ReLU, t = 3, Adam lr 0.001 for 1000 epochs.
struct RunResult {
    double test_accuracy;
    Metrics metrics;
};

RunResult reference_run(const LabeledDataset& data, std::size_t hidden, std::uint64_t seed) {
    const auto split = split_standardize(data, 0.7, seed);
    const NetworkShape shape(data.feature_count() + 1, hidden, data.class_count, 3);
    auto model = build_model(shape, mesh_mask(shape), Init::uniform_scaled, seed, Activation::relu);
    TrainConfig cfg;
    cfg.epochs = 1000;
    cfg.learning_rate = 0.001;
    cfg.seed = seed;
    auto r = train(std::move(model), split.train, cfg);
    return {evaluate(r.model, split.test), std::move(r.metrics)};
}

LabeledDataset iris() { return load_csv(MNN_TEST_DATA_DIR "/iris.csv"); }

// ---------------------------------------------------------------------------

Outcome gradient_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::size_t failures = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const std::size_t n = 3 + seed % 10;
        const std::size_t ticks = 1 + (seed / 10) % 5;
        const auto act = (seed / 50) % 2 ? Activation::sigmoid : Activation::tanh;
        const auto c = random_check_case(n, ticks, act, seed);
        const auto fwd = forward_with_grad(c.model, c.input);
        const auto head = softmax_cross_entropy(readout(fwd.trace, c.model.shape()), c.label);
        const auto g = error_gradient(head.dedy, fwd.gradient, c.model);
        const auto report = compare(g, finite_diff_gradient(c.model, c.input, c.label), 1e-5);
        worst = std::max(worst, report.max_rel_err);
        if (!report.pass) ++failures;
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && secs < 60.0,
            fmt("100 configs, max_rel_err=%.3e (tol 1e-5), failures=%zu, %.2fs (limit 60s)", worst, failures, secs)};
}

Outcome single_step_closed_form() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> neurons(3, 12);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const Activation acts[] = {Activation::relu, Activation::tanh, Activation::sigmoid, Activation::identity};
    std::size_t mismatches = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = neurons(rng);
        const std::size_t inputs = 2 + rng() % (n - 2);
        const std::size_t outputs = 1 + rng() % (n - inputs);
        const NetworkShape shape(inputs, n - inputs - outputs, outputs, 2);
        const Activation act = acts[rep % 4];
        Mask mask(n, n);
        RealMatrix w(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = inputs; j < n; ++j)
                if (rng() % 3 != 0) {
                    mask(i, j) = 1;
                    w(i, j) = unit(rng);
                }
        const Model m(shape, mask, w, act, rep % 2 == 0);
        Vector x(shape.features());
        for (double& v : x) v = unit(rng);
        const auto r = forward_with_grad(m, x);
        const auto& s0 = r.trace.states[0];
        const auto& t1 = r.trace.preacts[0];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t o = 0; o < n; ++o) {
                    double expected = 0.0;
                    if (mask(i, j) && o == j) expected = activate(act, t1[o]).second * s0[i];
                    if (r.gradient(i, j, o) != expected) ++mismatches;
                }
    }
    return {mismatches == 0, fmt("1000 models, %zu entries differ from the closed form", mismatches)};
}

Outcome synthetic_benchmarks() {
    struct Bench {
        const char* name;
        std::function<LabeledDataset(std::uint64_t)> make;
    };
    const Bench benches[] = {
        {"moons", [](std::uint64_t s) { return gen_moons(1000, 0.1, s); }},
        {"circles", [](std::uint64_t s) { return gen_circles(1000, 0.1, 0.5, s); }},
        {"blobs", [](std::uint64_t s) { return gen_blobs(999, single_blob_centers(), s); }},
        {"double-blobs", [](std::uint64_t s) { return gen_blobs(999, double_blob_centers(), s); }},
    };
    bool pass = true;
    std::string detail;
    for (const auto& b : benches) {
        std::vector<double> acc;
        for (std::uint64_t seed = 0; seed < 10; ++seed) acc.push_back(reference_run(b.make(seed), 5, seed).test_accuracy);
        const auto s = summarize(acc);
        pass = pass && s.at_least_95 >= 8;
        detail += fmt("%s %zu/10 seeds >= 0.95 (mean %.3f); ", b.name, s.at_least_95, s.mean);
    }
    detail += "need >= 8/10 each";
    return {pass, detail};
}

Outcome spirals_sweep() {
    std::vector<double> wide, narrow;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto data = gen_spirals(1000, 0.1, 1.75, seed);
        wide.push_back(reference_run(data, 15, seed).test_accuracy);
        narrow.push_back(reference_run(data, 5, seed).test_accuracy);
    }
    const auto w = summarize(wide), n = summarize(narrow);
    const double gap = w.mean - n.mean;
    return {w.mean >= 0.95 && n.mean <= 0.90 && gap >= 0.10,
            fmt("hidden 15 mean %.3f +- %.3f (need >= 0.95), hidden 5 mean %.3f +- %.3f (need <= 0.90), gap %.3f "
                "(need >= 0.10)",
                w.mean, w.sd, n.mean, n.sd, gap)};
}

Outcome iris_accuracy(std::vector<Metrics>& iris_metrics) {
    const auto data = iris();
    std::vector<double> acc;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto r = reference_run(data, 10, seed);
        acc.push_back(r.test_accuracy);
        iris_metrics.push_back(std::move(r.metrics));
    }
    const auto s = summarize(acc);
    return {s.mean >= 0.90 && s.sd <= 0.05,
            fmt("mean %.4f (need >= 0.90), std %.4f (need <= 0.05) over 10 seeds", s.mean, s.sd)};
}

Outcome iris_convergence(const std::vector<Metrics>& runs) {
    // A 100-epoch moving average is non-increasing iff loss[k+100] <= loss[k].
    std::size_t halved = 0, smooth = 0;
    double worst_ratio = 0.0;
    for (const auto& m : runs) {
        const double ratio = m.back().loss / m.front().loss;
        worst_ratio = std::max(worst_ratio, ratio);
        if (ratio < 0.5) ++halved;
        bool mono = true;
        for (std::size_t k = 0; k + 100 < m.size(); ++k)
            if (m[k + 100].loss > m[k].loss) mono = false;
        if (mono) ++smooth;
    }
    const std::size_t total = runs.size();
    return {halved == total && smooth == total,
            fmt("loss[1000] < 0.5*loss[1] in %zu/%zu runs (worst ratio %.3f); smoothed loss non-increasing in %zu/%zu",
                halved, total, worst_ratio, smooth, total)};
}

Outcome memory_contract() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::size_t peaks[2] = {0, 0};
    std::size_t allocs[2] = {0, 0};
    const std::size_t ticks[2] = {3, 30};
    for (int k = 0; k < 2; ++k) {
        const NetworkShape shape(3, 5, 2, ticks[k]);  // N = 10
        auto model = build_model(shape, mesh_mask(shape), Init::uniform_scaled, 7, Activation::tanh);
        const Vector x{unit(rng), unit(rng)};
        const std::size_t base = TensorMemoryStats::live_bytes.load();
        TensorMemoryStats::reset_peak();
        { const auto r = forward_with_grad(model, x); }
        peaks[k] = TensorMemoryStats::peak_bytes.load() - base;
        allocs[k] = TensorMemoryStats::allocations.load();
    }
    const std::size_t bound = 2 * 10 * 10 * 10 * sizeof(double);
    return {peaks[0] == peaks[1] && peaks[1] <= bound && allocs[0] == allocs[1],
            fmt("N=10 peak tensor bytes t=3: %zu, t=30: %zu (bound %zu); allocations %zu vs %zu", peaks[0], peaks[1],
                bound, allocs[0], allocs[1])};
}

Outcome mlp_equivalence() {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> width(1, 8), layers(2, 3);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const auto act = std::array{Activation::identity, Activation::tanh, Activation::relu,
                                    Activation::sigmoid}[rep % 4];
        std::vector<std::size_t> dims{width(rng) + 1};
        const std::size_t l = layers(rng);
        for (std::size_t k = 0; k < l; ++k) dims.push_back(width(rng));
        std::vector<RealMatrix> blocks;
        for (std::size_t k = 0; k < l; ++k) {
            RealMatrix b(dims[k], dims[k + 1]);
            for (double& v : b.flat()) v = unit(rng);
            blocks.push_back(std::move(b));
        }
        const auto m = from_mlp_layers(blocks, act);
        Vector x(dims[0] - 1);
        for (double& v : x) v = unit(rng);

        Vector layer(x);
        layer.push_back(1.0);
        for (const auto& b : blocks) {
            Vector next(b.cols(), 0.0);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                for (std::size_t i = 0; i < b.rows(); ++i) next[j] += layer[i] * b(i, j);
                next[j] = activate(act, next[j]).first;
            }
            layer = std::move(next);
        }
        const auto y = readout(forward(m, x), m.shape());
        for (std::size_t o = 0; o < y.size(); ++o) {
            const double scale = std::max(std::abs(y[o]), std::abs(layer[o]));
            if (scale > 0.0) worst = std::max(worst, std::abs(y[o] - layer[o]) / scale);
        }
    }
    return {worst <= 1e-12, fmt("100 MLPs, max relative difference %.3e (tol 1e-12)", worst)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome cli_determinism() {
    const fs::path root = fs::temp_directory_path() / "mnn_acceptance_cli";
    fs::remove_all(root);
    const std::string cli = MNN_CLI_PATH;
    const std::string data = (root / "data.csv").string();
    const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
        {"gen --dataset moons --seed 4 --out {d}/moons.csv", {"moons.csv"}},
        {"gen --dataset circles --seed 4 --out {d}/circles.csv", {"circles.csv"}},
        {"gen --dataset spirals --seed 4 --out {d}/spirals.csv", {"spirals.csv"}},
        {"gen --dataset blobs --seed 4 --out {d}/blobs.csv", {"blobs.csv"}},
        {"gen --dataset double-blobs --seed 4 --out {d}/double.csv", {"double.csv"}},
        {"train --data " + data + " --epochs 50 --seed 4 --out {d}/model.json --metrics {d}/metrics.csv",
         {"model.json", "metrics.csv"}},
        {"eval --model {d}/model.json --data " + data + " --split test", {}},
        {"gradcheck --n 8 --ticks 4 --seed 4 --json", {}},
        {"plot --model {d}/model.json --data " + data + " --resolution 50 --pgm {d}/r.pgm --csv {d}/r.csv",
         {"r.pgm", "r.csv"}},
    };
    std::size_t compared = 0, differing = 0, failed = 0;
    for (int run = 0; run < 2; ++run) fs::create_directories(root / ("run" + std::to_string(run)));
    // shared input for train/eval/plot
    {
        std::ofstream out(data, std::ios::binary);
        write_csv(out, gen_moons(200, 0.1, 4));
    }
    for (std::size_t c = 0; c < commands.size(); ++c) {
        std::string outputs[2];
        std::vector<std::string> files[2];
        for (int run = 0; run < 2; ++run) {
            const fs::path d = root / ("run" + std::to_string(run));
            std::string cmd = commands[c].first;
            for (std::size_t pos; (pos = cmd.find("{d}")) != std::string::npos;) cmd.replace(pos, 3, d.string());
            const fs::path stdout_file = d / ("stdout" + std::to_string(c) + ".txt");
            const std::string line = cli + " " + cmd + " > " + stdout_file.string() + " 2>&1";
            if (std::system(line.c_str()) != 0) ++failed;
            outputs[run] = slurp(stdout_file);
            for (const auto& f : commands[c].second) files[run].push_back(slurp(d / f));
        }
        // stdout of gen/plot names the output path, which differs per run directory
        const bool path_in_stdout = commands[c].first.find("{d}") != std::string::npos;
        if (!path_in_stdout) {
            ++compared;
            if (outputs[0] != outputs[1]) ++differing;
        }
        for (std::size_t f = 0; f < files[0].size(); ++f) {
            ++compared;
            if (files[0][f] != files[1][f] || files[0][f].empty()) ++differing;
        }
    }
    fs::remove_all(root);
    return {failed == 0 && differing == 0,
            fmt("%zu commands x 2 runs, %zu outputs compared, %zu differ, %zu command failures", commands.size(),
                compared, differing, failed)};
}

}  // namespace

int main() {
    std::vector<Metrics> iris_metrics;
    struct Criterion {
        const char* name;
        std::function<Outcome()> check;
    };
    const Criterion criteria[] = {
        {"AC1 gradient oracle", gradient_oracle},
        {"AC2 single-step closed form", single_step_closed_form},
        {"AC3 synthetic benchmarks", synthetic_benchmarks},
        {"AC4 spirals width sweep", spirals_sweep},
        {"AC5 iris accuracy", [&] { return iris_accuracy(iris_metrics); }},
        {"AC6 iris convergence", [&] { return iris_convergence(iris_metrics); }},
        {"AC7 memory contract", memory_contract},
        {"AC8 MLP equivalence", mlp_equivalence},
        {"AC9 CLI determinism", cli_determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s  %-28s %s  [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
    return failures == 0 ? 0 : 1;
}
