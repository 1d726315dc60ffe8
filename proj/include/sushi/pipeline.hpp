#pragma once

#include "cnn.hpp"
#include "config.hpp"
#include "detector.hpp"
#include "dishfeat.hpp"
#include "metrics.hpp"
#include "synth.hpp"

#include <json.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace sushi {

struct DishResult {
    std::size_t index = 0;  // 0 = top of the tower
    ClassLabel label;
    double confidence = 0.0;
    std::int64_t price = 0;
    Ellipse ellipse;
    bool reconstructed = false;
};

struct Bill {
    bool tower_found = false;
    std::vector<DishResult> dishes;
    std::int64_t total = 0;
};

struct PipelineResult {
    Detection detection;
    Bill bill;
};

/// Accepted reconstructions in original image coordinates.
inline std::vector<Ellipse> reconstructed_ellipses(const Detection& d) {
    std::vector<Ellipse> out;
    for (const auto& s : d.reconstruction.steps)
        if (s.accepted) out.push_back(unscale(s.optimum, d.scale));
    return out;
}

/// Class and softmax confidence of every dish, top first.
inline std::vector<std::pair<int, double>> classify_stack(const Raster& img, const ParamMatrix& stack,
                                                         const CnnModel& model) {
    std::vector<std::pair<int, double>> out;
    for (std::size_t i = 0; i < stack.size(); ++i) {
        const auto p = forward(model, to_tensor(extract_patch(img, stack, i).pixels));
        const auto best = std::max_element(p.begin(), p.end());
        out.emplace_back(int(best - p.begin()), *best);
    }
    return out;
}

inline PipelineResult run_pipeline(const Raster& img, const CnnModel& model, const Config& cfg) {
    if (img.channels() != 3) throw InvalidArgument("the pipeline needs a color image");
    PipelineResult r;
    r.detection = detect(img, cfg.detector);
    const ParamMatrix& stack = r.detection.stack;
    r.bill.tower_found = r.detection.tower_found();
    if (!r.bill.tower_found) return r;
    const auto recon = reconstructed_ellipses(r.detection);
    const auto classes = classify_stack(img, stack, model);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        DishResult d;
        d.index = i;
        d.label = cfg.palette.label(classes[i].first);
        d.confidence = classes[i].second;
        d.price = cfg.prices.price_of(d.label.name);
        d.ellipse = stack.rows[stack.size() - 1 - i];
        d.reconstructed = std::find(recon.begin(), recon.end(), d.ellipse) != recon.end();
        r.bill.total += d.price;
        r.bill.dishes.push_back(d);
    }
    return r;
}

inline constexpr const char* kNoTower = "no dish tower detected";

inline std::string bill_text(const Bill& bill, const PriceTable& prices) {
    if (!bill.tower_found) return std::string(kNoTower) + "\n";
    std::string out;
    char line[160];
    for (const auto& d : bill.dishes) {
        std::snprintf(line, sizeof line, "dish %zu: %-8s %5.1f%%  %s%s\n", d.index + 1, d.label.name.c_str(),
                      100.0 * d.confidence, prices.format(d.price).c_str(), d.reconstructed ? "  (reconstructed)" : "");
        out += line;
    }
    out += "total: " + prices.format(bill.total) + " for " + std::to_string(bill.dishes.size()) + " dishes\n";
    return out;
}

inline nlohmann::ordered_json ellipse_json(const Ellipse& e) {
    return {{"p", e.p}, {"q", e.q}, {"A", e.A}, {"B", e.B}, {"alpha", e.alpha}};
}

inline Ellipse ellipse_from_json(const nlohmann::json& j) {
    try {
        return {j.at("p").get<double>(), j.at("q").get<double>(), j.at("A").get<double>(), j.at("B").get<double>(),
                j.at("alpha").get<double>()};
    } catch (const nlohmann::json::exception&) {
        throw InvalidArgument("ellipse needs numeric p, q, A, B, alpha");
    }
}

inline nlohmann::ordered_json bill_json(const Bill& bill, const PriceTable& prices) {
    nlohmann::ordered_json j;
    j["tower_found"] = bill.tower_found;
    if (!bill.tower_found) j["message"] = kNoTower;
    j["currency"] = prices.currency;
    j["minor_digits"] = prices.minor_digits;
    j["dishes"] = nlohmann::ordered_json::array();
    for (const auto& d : bill.dishes)
        j["dishes"].push_back({{"index", d.index},
                               {"class", d.label.name},
                               {"class_index", d.label.index},
                               {"confidence", d.confidence},
                               {"price", d.price},
                               {"reconstructed", d.reconstructed},
                               {"ellipse", ellipse_json(d.ellipse)}});
    j["total"] = bill.total;
    return j;
}

/// Ground-truth sidecar: ellipses (bottom first) with labels.
inline nlohmann::ordered_json truth_json(const GroundTruth& gt, const Palette& palette, std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["width"] = gt.image.width();
    j["height"] = gt.image.height();
    j["dishes"] = nlohmann::ordered_json::array();
    for (const auto& d : gt.dishes)
        j["dishes"].push_back({{"ellipse", ellipse_json(d.ellipse)},
                               {"label", d.label},
                               {"name", palette.label(d.label).name},
                               {"occluded", d.occluded}});
    return j;
}

inline std::vector<DishTruth> truth_from_json(const nlohmann::json& j) {
    if (!j.contains("dishes") || !j.at("dishes").is_array()) throw InvalidArgument("sidecar has no dishes array");
    std::vector<DishTruth> out;
    for (const auto& d : j.at("dishes")) {
        DishTruth t;
        t.ellipse = ellipse_from_json(d.at("ellipse"));
        t.label = d.value("label", 0);
        t.occluded = d.value("occluded", false);
        out.push_back(t);
    }
    return out;
}

/// Outline of `e` drawn with the given half width (pixels).
inline void draw_ellipse(Raster& img, const Ellipse& e, const Rgb& c, double half_width = 1.0) {
    const int steps = std::max(64, int(8.0 * e.A));
    for (int s = 0; s < steps; ++s) {
        const Point2d pt = ellipse_point(e, 2.0 * kPi * s / steps);
        const int r = int(std::ceil(half_width));
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                const int x = int(std::lround(pt.x)) + dx, y = int(std::lround(pt.y)) + dy;
                if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) continue;
                if (std::hypot(dx, dy) > half_width) continue;
                for (int k = 0; k < img.channels() && k < 3; ++k) img.at(x, y, k) = c[std::size_t(k)];
            }
    }
}

/// Predictions in white, direct detections in red, accepted reconstructions in blue.
inline Raster detection_overlay(const Raster& img, const Detection& d) {
    Raster out = img.channels() == 3 ? img : Raster(img.width(), img.height(), 3);
    if (img.channels() == 1)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                for (int k = 0; k < 3; ++k) out.at(x, y, k) = img.at(x, y, 0);
    const double w = std::max(1.0, 1.5 / d.scale);
    for (const auto& s : d.reconstruction.steps) draw_ellipse(out, unscale(s.prediction.ellipse, d.scale), {1, 1, 1}, w);
    for (const auto& e : d.before_reconstruction.rows) draw_ellipse(out, e, {1, 0, 0}, w);
    for (const auto& e : reconstructed_ellipses(d)) draw_ellipse(out, e, {0, 0, 1}, w);
    return out;
}

/// Row-normalized confusion heatmap, white (0) to dark blue (1), `cell` pixels per entry.
inline Raster confusion_heatmap(const ConfusionMatrix& m, int cell = 32) {
    const int n = m.classes();
    Raster out(n * cell, n * cell, 3);
    for (int i = 0; i < n; ++i) {
        const auto row = m.row_sum(i);
        for (int j = 0; j < n; ++j) {
            const double v = row == 0 ? 0.0 : double(m.at(i, j)) / double(row);
            const Rgb c{1.0 - 0.9 * v, 1.0 - 0.8 * v, 1.0 - 0.4 * v};
            for (int y = i * cell; y < (i + 1) * cell; ++y)
                for (int x = j * cell; x < (j + 1) * cell; ++x)
                    for (int k = 0; k < 3; ++k)
                        out.at(x, y, k) = (y % cell == 0 || x % cell == 0) ? 0.5 : c[std::size_t(k)];
        }
    }
    return out;
}

inline std::vector<Sample> to_samples(const std::vector<LabeledPatch>& items) {
    std::vector<Sample> out;
    out.reserve(items.size());
    for (const auto& it : items) {
        if (!it.patch.label) throw InvalidArgument("training patches must be labeled");
        out.push_back({to_tensor(it.patch.pixels), it.patch.label->index});
    }
    return out;
}

inline ConfusionMatrix evaluate_classifier(const CnnModel& model, const std::vector<Sample>& data) {
    if (data.empty()) throw InvalidArgument("empty evaluation set");
    ConfusionMatrix m(model.geometry.classes);
    for (const auto& s : data) m.add(s.label, predict(model, s.x));
    return m;
}

} // namespace sushi
