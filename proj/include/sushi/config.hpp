#pragma once

#include "cnn.hpp"
#include "detector.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "palette.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>

namespace sushi {

/// Integer prices in minor currency units, keyed by class name.
struct PriceTable {
    std::string currency = "$";
    int minor_digits = 2;
    std::map<std::string, std::int64_t> amounts;

    void validate(const Palette& palette) const {
        if (minor_digits < 0 || minor_digits > 6) throw InvalidArgument("minor_digits must lie in [0, 6]");
        for (const auto& e : palette.entries) {
            auto it = amounts.find(e.name);
            if (it == amounts.end()) throw InvalidArgument("no price for class '" + e.name + "'");
            if (it->second < 0) throw InvalidArgument("negative price for class '" + e.name + "'");
        }
    }

    std::int64_t price_of(const std::string& name) const {
        auto it = amounts.find(name);
        if (it == amounts.end()) throw InvalidArgument("no price for class '" + name + "'");
        return it->second;
    }

    /// 9000 with two minor digits -> "$90.00".
    std::string format(std::int64_t minor) const {
        std::string sign = minor < 0 ? "-" : "";
        const std::uint64_t v = minor < 0 ? std::uint64_t(-(minor + 1)) + 1 : std::uint64_t(minor);
        std::uint64_t unit = 1;
        for (int i = 0; i < minor_digits; ++i) unit *= 10;
        std::string out = sign + currency + std::to_string(v / unit);
        if (minor_digits > 0) {
            std::string frac = std::to_string(v % unit);
            out += "." + std::string(std::size_t(minor_digits) - frac.size(), '0') + frac;
        }
        return out;
    }
};

inline PriceTable default_prices() {
    PriceTable t;
    t.amounts = {{"red", 150},  {"brown", 200}, {"lime", 250},   {"green", 300},
                 {"cyan", 350}, {"blue", 400},  {"violet", 500}, {"pink", 600}};
    return t;
}

struct Config {
    DetectorConfig detector;
    MatchTolerance matching;
    CnnGeometry geometry;
    TrainConfig training;
    Palette palette = default_palette();
    PriceTable prices = default_prices();

    void validate() const {
        palette.validate();
        prices.validate(palette);
        if (geometry.classes != int(palette.entries.size()))
            throw InvalidArgument("cnn.classes must equal the palette size");
        if (!(training.learning_rate >= 0.0) || training.batch_size < 1 || training.epochs < 1 ||
            !(training.noise_variance >= 0.0) || !(training.validation_fraction >= 0.0 && training.validation_fraction < 1.0))
            throw InvalidArgument("bad cnn training parameters");
        if (detector.max_side < 16) throw InvalidArgument("pipeline.max_side too small");
    }
};

namespace detail {

// One list per section drives both reading and writing; C is deduced const for writing.
template <class C, class F>
void pipeline_fields(C& d, F&& f) {
    f("max_side", d.max_side);
    f("equalize", d.equalize);
    f("canny_low", d.canny_low);
    f("canny_high", d.canny_high);
    f("canny_sigma", d.canny_sigma);
    f("rdp_tolerance", d.rdp_tolerance);
    f("sharp_turn_deg", d.sharp_turn_deg);
    f("min_fit_vertices", d.min_fit_vertices);
    f("max_fit_residual", d.max_fit_residual);
    f("min_minor_radius", d.min_minor_radius);
    f("min_gap_fraction", d.min_gap_fraction);
    f("reconstruct", d.reconstruct);
}

template <class C, class F>
void reconstruction_fields(C& r, F&& f) {
    f("gather_tolerance", r.gather_tolerance);
    f("claim_tolerance", r.claim_tolerance);
    f("search_range", r.search_range);
    f("min_step", r.min_step);
    f("coverage_bins", r.coverage_bins);
    f("min_coverage", r.min_coverage);
    f("max_rms_error", r.max_rms_error);
    f("max_point_error", r.max_point_error);
}

template <class C, class F>
void matching_fields(C& m, F&& f) {
    f("center", m.center);
    f("radius", m.radius);
}

template <class C, class F>
void consensus_fields(C& c, F&& f) {
    f("p_tolerance", c.p_tolerance);
    f("a_tolerance", c.a_tolerance);
    f("alpha_tolerance_deg", c.alpha_tolerance_deg);
    f("max_iterations", c.max_iterations);
}

template <class G, class T, class F>
void cnn_fields(G& g, T& t, F&& f) {
    f("input_height", g.in_h);
    f("input_width", g.in_w);
    f("input_channels", g.in_c);
    f("conv1_kernel_height", g.c1_kh);
    f("conv1_kernel_width", g.c1_kw);
    f("conv1_stride_height", g.c1_sh);
    f("conv1_stride_width", g.c1_sw);
    f("conv1_outputs", g.c1_out);
    f("conv2_kernel", g.c2_k);
    f("conv2_outputs", g.c2_out);
    f("conv3_kernel", g.c3_k);
    f("conv3_outputs", g.c3_out);
    f("classes", g.classes);
    f("learning_rate", t.learning_rate);
    f("decay_at", t.decay_at);
    f("decay", t.decay);
    f("batch_size", t.batch_size);
    f("epochs", t.epochs);
    f("noise_variance", t.noise_variance);
    f("flip", t.flip);
    f("validation_fraction", t.validation_fraction);
}

struct Writer {
    nlohmann::ordered_json& j;
    template <class V>
    void operator()(const char* key, const V& v) const { j[key] = v; }
};

struct Reader {
    const nlohmann::json& j;
    std::string section;
    std::set<std::string>* seen;
    template <class V>
    void operator()(const char* key, V& v) const {
        seen->insert(key);
        if (!j.contains(key)) return;
        try {
            v = j.at(key).get<V>();
        } catch (const nlohmann::json::exception&) {
            throw InvalidArgument("config value " + section + "." + key + " has the wrong type");
        }
    }
};

inline const nlohmann::json& object_section(const nlohmann::json& j, const std::string& name) {
    static const nlohmann::json empty = nlohmann::json::object();
    if (!j.contains(name)) return empty;
    if (!j.at(name).is_object()) throw InvalidArgument("config section " + name + " must be an object");
    return j.at(name);
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& section) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw InvalidArgument("unknown config key " + section + "." + it.key());
}

} // namespace detail

inline nlohmann::ordered_json to_json(const Config& c) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json pipeline, recon, matching, consensus, cnn, prices, amounts;
    detail::pipeline_fields(c.detector, detail::Writer{pipeline});
    detail::reconstruction_fields(c.detector.reconstruction, detail::Writer{recon});
    detail::matching_fields(c.matching, detail::Writer{matching});
    pipeline["reconstruction"] = recon;
    pipeline["matching"] = matching;
    detail::consensus_fields(c.detector.consensus, detail::Writer{consensus});
    detail::cnn_fields(c.geometry, c.training, detail::Writer{cnn});
    prices["currency"] = c.prices.currency;
    prices["minor_digits"] = c.prices.minor_digits;
    for (const auto& e : c.palette.entries) amounts[e.name] = c.prices.amounts.count(e.name) ? c.prices.amounts.at(e.name) : 0;
    prices["amounts"] = amounts;
    nlohmann::ordered_json palette = nlohmann::ordered_json::array();
    for (const auto& e : c.palette.entries) palette.push_back(e.name);
    j["pipeline"] = pipeline;
    j["consensus"] = consensus;
    j["cnn"] = cnn;
    j["prices"] = prices;
    j["palette"] = palette;
    return j;
}

/// Missing keys keep their defaults; unknown keys are errors.
inline Config config_from_json(const nlohmann::json& j) {
    using detail::object_section;
    using detail::reject_unknown;
    if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
    reject_unknown(j, {"pipeline", "consensus", "cnn", "prices", "palette"}, "config");
    Config c;

    const auto& pj = object_section(j, "pipeline");
    std::set<std::string> seen{"reconstruction", "matching"};
    detail::pipeline_fields(c.detector, detail::Reader{pj, "pipeline", &seen});
    reject_unknown(pj, seen, "pipeline");
    const auto& rj = object_section(pj, "reconstruction");
    seen.clear();
    detail::reconstruction_fields(c.detector.reconstruction, detail::Reader{rj, "pipeline.reconstruction", &seen});
    reject_unknown(rj, seen, "pipeline.reconstruction");
    const auto& mj = object_section(pj, "matching");
    seen.clear();
    detail::matching_fields(c.matching, detail::Reader{mj, "pipeline.matching", &seen});
    reject_unknown(mj, seen, "pipeline.matching");

    const auto& cj = object_section(j, "consensus");
    seen.clear();
    detail::consensus_fields(c.detector.consensus, detail::Reader{cj, "consensus", &seen});
    reject_unknown(cj, seen, "consensus");

    const auto& nj = object_section(j, "cnn");
    seen.clear();
    detail::cnn_fields(c.geometry, c.training, detail::Reader{nj, "cnn", &seen});
    reject_unknown(nj, seen, "cnn");

    if (j.contains("palette")) {
        const auto& pal = j.at("palette");
        if (!pal.is_array()) throw InvalidArgument("palette must be an array of class names");
        const Palette defaults = default_palette();
        c.palette.entries.clear();
        for (std::size_t i = 0; i < pal.size(); ++i) {
            if (!pal[i].is_string()) throw InvalidArgument("palette entries must be strings");
            const Rgb rgb = i < defaults.entries.size() ? defaults.entries[i].rgb : Rgb{0.5, 0.5, 0.5};
            c.palette.entries.push_back({pal[i].get<std::string>(), rgb});
        }
    }

    const auto& prj = object_section(j, "prices");
    reject_unknown(prj, {"currency", "minor_digits", "amounts"}, "prices");
    try {
        if (prj.contains("currency")) c.prices.currency = prj.at("currency").get<std::string>();
        if (prj.contains("minor_digits")) c.prices.minor_digits = prj.at("minor_digits").get<int>();
        if (prj.contains("amounts")) {
            const auto& a = prj.at("amounts");
            if (!a.is_object()) throw InvalidArgument("prices.amounts must be an object");
            c.prices.amounts.clear();
            for (auto it = a.begin(); it != a.end(); ++it) {
                if (!it.value().is_number_integer()) throw InvalidArgument("price of " + it.key() + " must be an integer");
                c.prices.amounts[it.key()] = it.value().get<std::int64_t>();
            }
        }
    } catch (const nlohmann::json::exception&) {
        throw InvalidArgument("prices section has a value of the wrong type");
    }
    c.validate();
    return c;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

} // namespace sushi
