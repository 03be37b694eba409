#pragma once

// Labeled datasets: synthetic 2-D generators, CSV ingestion and a stratified
// train/test split with z-score standardization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace mnn {

struct LabeledDataset {
    RealMatrix features;
    std::vector<std::size_t> labels;
    std::size_t class_count = 0;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t feature_count() const noexcept { return features.cols(); }
    [[nodiscard]] bool empty() const noexcept { return labels.empty(); }
    [[nodiscard]] std::span<const double> sample(std::size_t k) const noexcept { return features.row(k); }

    [[nodiscard]] std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(class_count, 0);
        for (auto l : labels) ++counts[l];
        return counts;
    }

    void validate() const {
        if (features.rows() != labels.size()) throw DimensionError("dataset: feature rows do not match label count");
        for (auto l : labels)
            if (l >= class_count) throw ShapeError("dataset: label " + std::to_string(l) + " out of range");
        for (double v : features.flat())
            if (!std::isfinite(v)) throw NumericError("dataset: non-finite feature value");
    }

    /// Rows at `indices`, in that order.
    [[nodiscard]] LabeledDataset subset(std::span<const std::size_t> indices) const {
        LabeledDataset out{RealMatrix(indices.size(), feature_count()), {}, class_count};
        out.labels.reserve(indices.size());
        for (std::size_t r = 0; r < indices.size(); ++r) {
            const auto src = features.row(indices[r]);
            std::copy(src.begin(), src.end(), out.features.row(r).begin());
            out.labels.push_back(labels[indices[r]]);
        }
        return out;
    }
};

namespace detail {

inline void require_even(std::size_t n, const char* who) {
    if (n < 2) throw ShapeError(std::string(who) + ": need at least 2 samples");
    if (n % 2 != 0) throw ShapeError(std::string(who) + ": sample count must be even");
}

inline void require_noise(double noise, const char* who) {
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ShapeError(std::string(who) + ": noise must be >= 0");
}

inline double linspace_at(double lo, double hi, std::size_t k, std::size_t count, bool endpoint) {
    const std::size_t div = endpoint ? count - 1 : count;
    if (div == 0) return lo;
    return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(div);
}

/// Appends Gaussian noise drawn in row-major order.
inline void add_noise(RealMatrix& x, double noise, std::mt19937_64& rng) {
    if (noise == 0.0) return;
    std::normal_distribution<double> dist(0.0, noise);
    for (double& v : x.flat()) v += dist(rng);
}

}  // namespace detail

/// Two interleaving half circles: class 0 is the upper unit arc, class 1 the
/// lower unit arc centered at (1, 0.5). Angles are evenly spaced over [0, pi].
inline LabeledDataset gen_moons(std::size_t n, double noise, std::uint64_t seed) {
    detail::require_even(n, "moons");
    detail::require_noise(noise, "moons");
    const std::size_t half = n / 2;
    LabeledDataset d{RealMatrix(n, 2), std::vector<std::size_t>(n), 2};
    for (std::size_t k = 0; k < half; ++k) {
        const double th = detail::linspace_at(0.0, std::numbers::pi, k, half, true);
        d.features(k, 0) = std::cos(th);
        d.features(k, 1) = std::sin(th);
        d.labels[k] = 0;
        d.features(half + k, 0) = 1.0 - std::cos(th);
        d.features(half + k, 1) = 0.5 - std::sin(th);
        d.labels[half + k] = 1;
    }
    std::mt19937_64 rng(seed);
    detail::add_noise(d.features, noise, rng);
    return d;
}

/// Concentric circles: class 0 has radius 1, class 1 radius `inner_factor`.
inline LabeledDataset gen_circles(std::size_t n, double noise, double inner_factor, std::uint64_t seed) {
    detail::require_even(n, "circles");
    detail::require_noise(noise, "circles");
    if (!(inner_factor > 0.0 && inner_factor < 1.0)) throw ShapeError("circles: inner factor must lie in (0, 1)");
    const std::size_t half = n / 2;
    LabeledDataset d{RealMatrix(n, 2), std::vector<std::size_t>(n), 2};
    for (std::size_t k = 0; k < half; ++k) {
        const double th = detail::linspace_at(0.0, 2.0 * std::numbers::pi, k, half, false);
        d.features(k, 0) = std::cos(th);
        d.features(k, 1) = std::sin(th);
        d.labels[k] = 0;
        d.features(half + k, 0) = inner_factor * std::cos(th);
        d.features(half + k, 1) = inner_factor * std::sin(th);
        d.labels[half + k] = 1;
    }
    std::mt19937_64 rng(seed);
    detail::add_noise(d.features, noise, rng);
    return d;
}

/// Point on arm `arm` (0 or 1) of the two-arm Archimedean spiral with unit
/// outer radius: r = theta / theta_max, arm 1 rotated by pi.
inline std::array<double, 2> spiral_point(double theta, std::size_t arm, double turns) {
    const double theta_max = 2.0 * std::numbers::pi * turns;
    const double r = theta / theta_max;
    const double phase = arm == 0 ? theta : theta + std::numbers::pi;
    return {r * std::cos(phase), r * std::sin(phase)};
}

inline LabeledDataset gen_spirals(std::size_t n, double noise, double turns, std::uint64_t seed) {
    detail::require_even(n, "spirals");
    detail::require_noise(noise, "spirals");
    if (!(turns > 0.0) || !std::isfinite(turns)) throw ShapeError("spirals: turns must be positive");
    const std::size_t half = n / 2;
    const double theta_max = 2.0 * std::numbers::pi * turns;
    LabeledDataset d{RealMatrix(n, 2), std::vector<std::size_t>(n), 2};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, theta_max);
    for (std::size_t arm = 0; arm < 2; ++arm) {
        for (std::size_t k = 0; k < half; ++k) {
            const auto p = spiral_point(angle(rng), arm, turns);
            const std::size_t r = arm * half + k;
            d.features(r, 0) = p[0];
            d.features(r, 1) = p[1];
            d.labels[r] = arm;
        }
    }
    detail::add_noise(d.features, noise, rng);
    return d;
}

struct BlobCenter {
    double x;
    double y;
    double std;
    std::size_t label;
};

/// Isotropic Gaussian blobs. Each class gets n / C samples, split evenly over
/// that class's centers (earlier centers take the remainder).
inline LabeledDataset gen_blobs(std::size_t n, const std::vector<BlobCenter>& centers, std::uint64_t seed) {
    if (centers.size() < 2) throw ShapeError("blobs: need at least two centers");
    std::size_t classes = 0;
    for (const auto& c : centers) {
        if (!(c.std >= 0.0)) throw ShapeError("blobs: standard deviations must be >= 0");
        classes = std::max(classes, c.label + 1);
    }
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t k = 0; k < centers.size(); ++k) by_class[centers[k].label].push_back(k);
    for (std::size_t c = 0; c < classes; ++c)
        if (by_class[c].empty()) throw ShapeError("blobs: class " + std::to_string(c) + " has no center");
    if (classes < 2) throw ShapeError("blobs: need at least two classes");
    if (n == 0 || n % classes != 0)
        throw ShapeError("blobs: sample count must be a positive multiple of the class count");

    std::vector<std::size_t> per_center(centers.size(), 0);
    const std::size_t per_class = n / classes;
    for (const auto& members : by_class) {
        for (std::size_t m = 0; m < members.size(); ++m)
            per_center[members[m]] = per_class / members.size() + (m < per_class % members.size() ? 1 : 0);
    }

    LabeledDataset d{RealMatrix(n, 2), std::vector<std::size_t>(n), classes};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::size_t r = 0;
    for (std::size_t k = 0; k < centers.size(); ++k) {
        const auto& c = centers[k];
        for (std::size_t s = 0; s < per_center[k]; ++s, ++r) {
            d.features(r, 0) = c.x + c.std * unit(rng);
            d.features(r, 1) = c.y + c.std * unit(rng);
            d.labels[r] = c.label;
        }
    }
    return d;
}

/// Three blobs with standard deviations 1.0, 2.5 and 0.5 on a triangle.
inline std::vector<BlobCenter> single_blob_centers() {
    return {{0.0, 6.0, 1.0, 0}, {-5.2, -3.0, 2.5, 1}, {5.2, -3.0, 0.5, 2}};
}

/// Six unit-std blobs on a hexagon of radius 5; adjacent vertices share a
/// class.
inline std::vector<BlobCenter> double_blob_centers() {
    std::vector<BlobCenter> c;
    for (std::size_t k = 0; k < 6; ++k) {
        const double a = std::numbers::pi / 3.0 * static_cast<double>(k);
        c.push_back({5.0 * std::cos(a), 5.0 * std::sin(a), 1.0, k / 2});
    }
    return c;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    std::size_t used = 0;
    try {
        out = std::stod(t, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == t.size() && std::isfinite(out);
}

inline bool parse_label(const std::string& s, std::size_t& out) {
    const std::string t = trim(s);
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) return false;
    try {
        out = std::stoul(t);
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

}  // namespace detail

/// Rows are F floats followed by an integer label; a non-numeric first line is
/// treated as a header.
inline LabeledDataset read_csv(std::istream& in, const std::string& source = "<stream>") {
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> labels;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_fields(line);
        std::vector<double> values;
        bool ok = fields.size() >= 2;
        for (std::size_t f = 0; ok && f + 1 < fields.size(); ++f) {
            double v = 0.0;
            ok = detail::parse_double(fields[f], v);
            values.push_back(v);
        }
        std::size_t label = 0;
        ok = ok && detail::parse_label(fields.back(), label);
        if (!ok) {
            if (rows.empty() && line_no == 1) continue;  // header
            throw ParseError(source + ": malformed row " + std::to_string(line_no) + ": '" + line + "'");
        }
        if (width == 0) width = values.size();
        if (values.size() != width)
            throw ParseError(source + ": row " + std::to_string(line_no) + " has " + std::to_string(values.size()) +
                             " features, expected " + std::to_string(width));
        rows.push_back(std::move(values));
        labels.push_back(label);
    }
    if (rows.empty()) throw ParseError(source + ": empty dataset");
    LabeledDataset d{RealMatrix(rows.size(), width), std::move(labels), 0};
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), d.features.row(r).begin());
    d.class_count = 1 + *std::max_element(d.labels.begin(), d.labels.end());
    return d;
}

inline LabeledDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset file '" + path.string() + "'");
    return read_csv(in, path.string());
}

/// Header "f0,...,f{F-1},label"; values with 17 significant digits.
inline void write_csv(std::ostream& out, const LabeledDataset& d) {
    for (std::size_t f = 0; f < d.feature_count(); ++f) out << 'f' << f << ',';
    out << "label\n";
    char buf[32];
    for (std::size_t r = 0; r < d.size(); ++r) {
        for (double v : d.features.row(r)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << ',';
        }
        out << d.labels[r] << '\n';
    }
}

inline void save_csv(const std::filesystem::path& path, const LabeledDataset& d) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write dataset file '" + path.string() + "'");
    write_csv(out, d);
}

// ---------------------------------------------------------------------------
// Split and standardization
// ---------------------------------------------------------------------------

/// Per-feature z-score transform.
struct Scaler {
    Vector mean;
    Vector scale;

    static Scaler identity(std::size_t features) { return {Vector(features, 0.0), Vector(features, 1.0)}; }

    /// Population statistics; constant columns get scale 1.
    static Scaler fit(const RealMatrix& x) {
        Scaler s{Vector(x.cols(), 0.0), Vector(x.cols(), 1.0)};
        const double n = static_cast<double>(x.rows());
        for (std::size_t c = 0; c < x.cols(); ++c) {
            double sum = 0.0;
            for (std::size_t r = 0; r < x.rows(); ++r) sum += x(r, c);
            const double mu = sum / n;
            double sq = 0.0;
            for (std::size_t r = 0; r < x.rows(); ++r) sq += (x(r, c) - mu) * (x(r, c) - mu);
            const double sd = std::sqrt(sq / n);
            s.mean[c] = mu;
            s.scale[c] = sd > 0.0 ? sd : 1.0;
        }
        return s;
    }

    [[nodiscard]] std::size_t size() const noexcept { return mean.size(); }

    void apply(std::span<double> x) const {
        detail::require_dims(x.size() == mean.size(), "scaler: feature count mismatch");
        for (std::size_t c = 0; c < x.size(); ++c) x[c] = (x[c] - mean[c]) / scale[c];
    }

    [[nodiscard]] Vector transform(std::span<const double> x) const {
        Vector v(x.begin(), x.end());
        apply(v);
        return v;
    }

    [[nodiscard]] LabeledDataset transform(const LabeledDataset& d) const {
        LabeledDataset out = d;
        for (std::size_t r = 0; r < out.size(); ++r) apply(out.features.row(r));
        return out;
    }

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

struct Split {
    LabeledDataset train;
    LabeledDataset test;
    Scaler scaler;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Stratified shuffle split; the scaler is fit on the train part and applied
/// to both parts. Index lists are sorted ascending.
inline Split split_standardize(const LabeledDataset& data, double train_fraction, std::uint64_t seed,
                               bool standardize = true) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ShapeError("train fraction must lie in (0, 1)");
    data.validate();
    std::vector<std::vector<std::size_t>> by_class(data.class_count);
    for (std::size_t k = 0; k < data.size(); ++k) by_class[data.labels[k]].push_back(k);

    std::mt19937_64 rng(seed);
    Split s;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        if (idx.size() < 2)
            throw ShapeError("class " + std::to_string(c) + " has fewer than 2 samples; cannot split");
        std::shuffle(idx.begin(), idx.end(), rng);
        auto take = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
        take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
        s.train_indices.insert(s.train_indices.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
        s.test_indices.insert(s.test_indices.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
    }
    std::sort(s.train_indices.begin(), s.train_indices.end());
    std::sort(s.test_indices.begin(), s.test_indices.end());
    const auto train_raw = data.subset(s.train_indices);
    const auto test_raw = data.subset(s.test_indices);
    s.scaler = standardize ? Scaler::fit(train_raw.features) : Scaler::identity(data.feature_count());
    s.train = s.scaler.transform(train_raw);
    s.test = s.scaler.transform(test_raw);
    return s;
}

}  // namespace mnn
