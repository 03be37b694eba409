#pragma once

// JSON model files: shape, activations, clamping flag, row-major mask and
// weights, plus the feature scaler fit at training time.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "data.hpp"
#include "error.hpp"
#include "matrix.hpp"
#include "network.hpp"

namespace mnn {

inline constexpr int model_format_version = 1;

/// How the training split was drawn, so `eval` can rebuild it.
struct SplitInfo {
    std::uint64_t seed = 0;
    double train_fraction = 0.7;
};

struct SavedModel {
    Model model;
    Scaler scaler;
    std::optional<SplitInfo> split;
};

inline nlohmann::json model_to_json(const Model& model, const Scaler& scaler,
                                    const std::optional<SplitInfo>& split = std::nullopt) {
    using nlohmann::json;
    const auto& s = model.shape();
    json j;
    j["format_version"] = model_format_version;
    j["shape"] = {{"inputs", s.inputs()}, {"hidden", s.hidden()}, {"outputs", s.outputs()}, {"ticks", s.ticks()}};
    if (model.uniform_activation()) {
        j["activation"] = std::string(to_string(model.activations().front()));
    } else {
        json acts = json::array();
        for (auto a : model.activations()) acts.push_back(std::string(to_string(a)));
        j["activation"] = acts;
    }
    j["clamping"] = model.clamps_inputs();
    std::vector<int> mask(model.mask().flat().begin(), model.mask().flat().end());
    j["mask"] = mask;
    j["weights"] = std::vector<double>(model.weights().flat().begin(), model.weights().flat().end());
    j["scaler"] = {{"mean", scaler.mean}, {"scale", scaler.scale}};
    if (split) j["split"] = {{"seed", split->seed}, {"train_fraction", split->train_fraction}};
    return j;
}

inline SavedModel model_from_json(const nlohmann::json& j) {
    try {
        if (!j.contains("format_version")) throw ParseError("model file: missing format_version");
        const int version = j.at("format_version").get<int>();
        if (version != model_format_version)
            throw VersionError("model file: unsupported format_version " + std::to_string(version) + " (expected " +
                               std::to_string(model_format_version) + ")");
        const auto& js = j.at("shape");
        const NetworkShape shape(js.at("inputs").get<std::size_t>(), js.at("hidden").get<std::size_t>(),
                                 js.at("outputs").get<std::size_t>(), js.at("ticks").get<std::size_t>());
        const std::size_t n = shape.total();

        std::vector<Activation> acts;
        const auto& ja = j.at("activation");
        if (ja.is_string()) {
            acts.assign(n, parse_activation(ja.get<std::string>()));
        } else {
            for (const auto& a : ja) acts.push_back(parse_activation(a.get<std::string>()));
        }

        const auto mask_vals = j.at("mask").get<std::vector<int>>();
        const auto weight_vals = j.at("weights").get<std::vector<double>>();
        if (mask_vals.size() != n * n)
            throw ParseError("model file: mask has " + std::to_string(mask_vals.size()) + " entries, expected " +
                             std::to_string(n * n));
        if (weight_vals.size() != n * n)
            throw ParseError("model file: weights has " + std::to_string(weight_vals.size()) +
                             " entries, expected " + std::to_string(n * n));
        Mask mask(n, n);
        RealMatrix w(n, n);
        for (std::size_t k = 0; k < n * n; ++k) {
            if (mask_vals[k] != 0 && mask_vals[k] != 1)
                throw ParseError("model file: mask entry (" + std::to_string(k / n) + "," + std::to_string(k % n) +
                                 ") is not 0/1");
            mask.flat()[k] = static_cast<std::uint8_t>(mask_vals[k]);
            w.flat()[k] = weight_vals[k];
        }
        Model model(shape, std::move(mask), std::move(w), std::move(acts), j.at("clamping").get<bool>());

        Scaler scaler = Scaler::identity(shape.features());
        if (j.contains("scaler")) {
            scaler.mean = j.at("scaler").at("mean").get<Vector>();
            scaler.scale = j.at("scaler").at("scale").get<Vector>();
            if (scaler.mean.size() != shape.features() || scaler.scale.size() != shape.features())
                throw ParseError("model file: scaler size does not match feature count");
        }
        std::optional<SplitInfo> split;
        if (j.contains("split"))
            split = SplitInfo{j.at("split").at("seed").get<std::uint64_t>(),
                              j.at("split").at("train_fraction").get<double>()};
        return {std::move(model), std::move(scaler), split};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
}

inline void save_model(const std::filesystem::path& path, const Model& model, const Scaler& scaler,
                       const std::optional<SplitInfo>& split = std::nullopt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model file '" + path.string() + "'");
    out << model_to_json(model, scaler, split).dump(1) << '\n';
}

inline SavedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model file '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model file '" + path.string() + "': " + e.what());
    }
    return model_from_json(j);
}

/// N lines of N comma-separated 0/1 values.
inline Mask read_mask_csv(std::istream& in, const std::string& source = "<stream>") {
    std::vector<std::vector<std::uint8_t>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::vector<std::uint8_t> row;
        for (const auto& f : detail::split_fields(line)) {
            const auto t = detail::trim(f);
            if (t != "0" && t != "1")
                throw ParseError(source + ": mask row " + std::to_string(line_no) + " has a non 0/1 entry");
            row.push_back(t == "1" ? 1 : 0);
        }
        rows.push_back(std::move(row));
    }
    const std::size_t n = rows.size();
    if (n == 0) throw ParseError(source + ": empty mask");
    Mask m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n) throw ParseError(source + ": mask is not square");
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

inline Mask load_mask_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open mask file '" + path.string() + "'");
    return read_mask_csv(in, path.string());
}

}  // namespace mnn
