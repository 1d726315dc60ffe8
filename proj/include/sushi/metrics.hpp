#pragma once

#include "ellipse.hpp"
#include "error.hpp"

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace sushi {

/// Detection counts; precision and recall are always recomputed from them.
struct DetectionReport {
    std::int64_t true_positives = 0;
    std::int64_t false_positives = 0;
    std::int64_t ground_truth = 0;

    /// TP / (TP + FP); 1 when nothing was detected.
    double precision() const {
        const auto detected = true_positives + false_positives;
        return detected == 0 ? 1.0 : double(true_positives) / double(detected);
    }
    /// TP / GT; 1 when there is nothing to find.
    double recall() const {
        return ground_truth == 0 ? 1.0 : double(true_positives) / double(ground_truth);
    }

    DetectionReport& operator+=(const DetectionReport& o) {
        true_positives += o.true_positives;
        false_positives += o.false_positives;
        ground_truth += o.ground_truth;
        return *this;
    }
    friend bool operator==(const DetectionReport&, const DetectionReport&) = default;
};

struct MatchTolerance {
    double center = 0.25;  // fraction of the true major radius
    double radius = 0.25;
};

/// Greedy one-to-one matching, closest centers first. A pair is admissible when
/// the center distance and the major-radius difference are both below the
/// tolerance times the true major radius.
inline DetectionReport match_detections(const std::vector<Ellipse>& detected, const std::vector<Ellipse>& truth,
                                        const MatchTolerance& tol = {}) {
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < detected.size(); ++i)
        for (std::size_t j = 0; j < truth.size(); ++j) {
            const double d = distance(detected[i].center(), truth[j].center());
            if (d < tol.center * truth[j].A && std::fabs(detected[i].A - truth[j].A) < tol.radius * truth[j].A)
                pairs.emplace_back(d, i, j);
        }
    std::sort(pairs.begin(), pairs.end());
    std::vector<char> used_det(detected.size(), 0), used_truth(truth.size(), 0);
    DetectionReport r;
    for (const auto& [d, i, j] : pairs) {
        if (used_det[i] || used_truth[j]) continue;
        used_det[i] = used_truth[j] = 1;
        ++r.true_positives;
    }
    r.false_positives = std::int64_t(detected.size()) - r.true_positives;
    r.ground_truth = std::int64_t(truth.size());
    return r;
}

/// Square count matrix; rows are true classes, columns predictions.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int classes = 8) : n_(classes), counts_(std::size_t(classes * classes), 0) {}

    void add(int truth, int predicted) {
        if (truth < 0 || truth >= n_ || predicted < 0 || predicted >= n_)
            throw InvalidArgument("class index out of range");
        ++counts_[std::size_t(truth * n_ + predicted)];
    }

    int classes() const { return n_; }
    std::int64_t at(int truth, int predicted) const { return counts_[std::size_t(truth * n_ + predicted)]; }

    std::int64_t total() const {
        std::int64_t t = 0;
        for (auto c : counts_) t += c;
        return t;
    }
    std::int64_t correct() const {
        std::int64_t t = 0;
        for (int i = 0; i < n_; ++i) t += at(i, i);
        return t;
    }
    std::int64_t row_sum(int truth) const {
        std::int64_t t = 0;
        for (int j = 0; j < n_; ++j) t += at(truth, j);
        return t;
    }
    double accuracy() const { return total() == 0 ? 0.0 : double(correct()) / double(total()); }

    /// Header row of class names, then one row per true class.
    std::string to_csv(const std::vector<std::string>& names) const {
        std::ostringstream out;
        out << "true\\predicted";
        for (int j = 0; j < n_; ++j) out << ',' << (std::size_t(j) < names.size() ? names[std::size_t(j)] : std::to_string(j));
        out << '\n';
        for (int i = 0; i < n_; ++i) {
            out << (std::size_t(i) < names.size() ? names[std::size_t(i)] : std::to_string(i));
            for (int j = 0; j < n_; ++j) out << ',' << at(i, j);
            out << '\n';
        }
        return out.str();
    }

private:
    int n_;
    std::vector<std::int64_t> counts_;
};

} // namespace sushi
