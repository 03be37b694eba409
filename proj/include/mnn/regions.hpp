#pragma once

// Decision-region rasters for 2-feature classifiers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "data.hpp"
#include "error.hpp"
#include "network.hpp"

namespace mnn {

/// r x r predicted labels. Row 0 is the top edge (y = ymax), column 0 the
/// left edge (x = xmin); rows are stored one after another.
struct RegionGrid {
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
    std::size_t resolution = 0;
    std::size_t class_count = 0;
    std::vector<std::size_t> labels;

    [[nodiscard]] double x_at(std::size_t col) const {
        return xmin + (xmax - xmin) * static_cast<double>(col) / static_cast<double>(resolution - 1);
    }
    [[nodiscard]] double y_at(std::size_t row) const {
        return ymax - (ymax - ymin) * static_cast<double>(row) / static_cast<double>(resolution - 1);
    }
    [[nodiscard]] std::size_t at(std::size_t row, std::size_t col) const { return labels[row * resolution + col]; }
};

/// Classifies a grid spanning the data's bounding box widened by 10% per
/// side. `data` holds raw (unstandardized) features; every grid point goes
/// through `scaler` before the forward pass.
inline RegionGrid decision_region_grid(const Model& model, const Scaler& scaler, const LabeledDataset& data,
                                       std::size_t resolution) {
    if (data.feature_count() != 2 || model.shape().features() != 2)
        throw DimensionError("decision regions need a 2-feature dataset and model");
    if (resolution < 2) throw Error("grid resolution must be at least 2");
    if (data.empty()) throw DimensionError("decision regions need a non-empty dataset");
    RegionGrid g;
    g.xmin = g.xmax = data.features(0, 0);
    g.ymin = g.ymax = data.features(0, 1);
    for (std::size_t k = 0; k < data.size(); ++k) {
        g.xmin = std::min(g.xmin, data.features(k, 0));
        g.xmax = std::max(g.xmax, data.features(k, 0));
        g.ymin = std::min(g.ymin, data.features(k, 1));
        g.ymax = std::max(g.ymax, data.features(k, 1));
    }
    const double px = 0.1 * (g.xmax - g.xmin), py = 0.1 * (g.ymax - g.ymin);
    g.xmin -= px;
    g.xmax += px;
    g.ymin -= py;
    g.ymax += py;
    g.resolution = resolution;
    g.class_count = model.shape().outputs();
    g.labels.reserve(resolution * resolution);
    for (std::size_t r = 0; r < resolution; ++r) {
        for (std::size_t c = 0; c < resolution; ++c) {
            const double p[2] = {g.x_at(c), g.y_at(r)};
            g.labels.push_back(argmax(predict_outputs(model, scaler.transform(p))));
        }
    }
    return g;
}

/// Gray level of a class: c * 255 / (C - 1), rounded.
inline unsigned char class_gray(std::size_t label, std::size_t class_count) {
    if (class_count < 2) return 0;
    return static_cast<unsigned char>(std::lround(255.0 * static_cast<double>(label) /
                                                  static_cast<double>(class_count - 1)));
}

/// Binary P5 graymap.
inline void write_pgm(std::ostream& out, const RegionGrid& g) {
    out << "P5\n" << g.resolution << ' ' << g.resolution << "\n255\n";
    for (auto l : g.labels) out.put(static_cast<char>(class_gray(l, g.class_count)));
}

/// "row,col,x,y,label", one line per cell in storage order.
inline void write_grid_csv(std::ostream& out, const RegionGrid& g) {
    out << "row,col,x,y,label\n";
    char buf[96];
    for (std::size_t r = 0; r < g.resolution; ++r) {
        for (std::size_t c = 0; c < g.resolution; ++c) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%zu\n", r, c, g.x_at(c), g.y_at(r), g.at(r, c));
            out << buf;
        }
    }
}

}  // namespace mnn
