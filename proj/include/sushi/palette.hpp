#pragma once

#include "error.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace sushi {

inline constexpr int kClassCount = 8;

/// Dish color class.
struct ClassLabel {
    int index = 0;
    std::string name;

    friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

using Rgb = std::array<double, 3>;

inline Rgb hsv_to_rgb(double hue_deg, double s, double v) {
    const double h = std::fmod(std::fmod(hue_deg, 360.0) + 360.0, 360.0) / 60.0;
    const double c = v * s;
    const double x = c * (1.0 - std::fabs(std::fmod(h, 2.0) - 1.0));
    const double m = v - c;
    Rgb rgb{};
    switch (int(h)) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
    }
    return {rgb[0] + m, rgb[1] + m, rgb[2] + m};
}

struct PaletteEntry {
    std::string name;
    Rgb rgb{};
};

/// The 8 dish classes: names (for labels and prices) and render colors.
struct Palette {
    std::vector<PaletteEntry> entries;

    ClassLabel label(int index) const {
        if (index < 0 || index >= int(entries.size())) throw InvalidArgument("class index out of range");
        return {index, entries[std::size_t(index)].name};
    }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (entries[i].name == name) return int(i);
        throw InvalidArgument("unknown class '" + name + "'");
    }

    void validate() const {
        if (entries.size() != std::size_t(kClassCount))
            throw InvalidArgument("palette must define exactly 8 classes");
    }
};

/// Eight hues 45 degrees apart at fixed saturation and value.
inline Palette default_palette() {
    static const char* names[kClassCount] = {"red",  "brown", "lime",   "green",
                                             "cyan", "blue",   "violet", "pink"};
    Palette p;
    for (int i = 0; i < kClassCount; ++i) p.entries.push_back({names[i], hsv_to_rgb(45.0 * i, 0.75, 0.75)});
    return p;
}

} // namespace sushi
