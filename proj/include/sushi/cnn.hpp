#pragma once

#include "error.hpp"
#include "random.hpp"
#include "raster.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace sushi {

/// Dense row-major array. Rank-3 activations are laid out (height, width, channel).
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw InvalidArgument("negative tensor dimension");
            n *= std::size_t(d);
        }
        data.assign(n, fill);
    }

    std::size_t size() const { return data.size(); }
    int dim(std::size_t i) const { return shape.at(i); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
    double& at(int y, int x, int c) { return data[(std::size_t(y) * shape[1] + x) * shape[2] + c]; }
    const double& at(int y, int x, int c) const { return data[(std::size_t(y) * shape[1] + x) * shape[2] + c]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline Tensor to_tensor(const Raster& img) {
    Tensor t({img.height(), img.width(), img.channels()});
    std::copy(img.data().begin(), img.data().end(), t.data.begin());
    return t;
}

inline Raster to_raster(const Tensor& t) {
    if (t.shape.size() != 3) throw ShapeMismatch("raster needs a rank-3 tensor");
    Raster r(t.dim(1), t.dim(0), t.dim(2));
    std::copy(t.data.begin(), t.data.end(), r.data().begin());
    return r;
}

/// Valid (unpadded) strided convolution; weight shape (kh, kw, cin, cout).
struct Conv2D {
    int sh = 1, sw = 1;
    Tensor weight, bias;

    Conv2D() = default;
    Conv2D(int kh, int kw, int cin, int cout, int stride_h = 1, int stride_w = 1)
        : sh(stride_h), sw(stride_w), weight({kh, kw, cin, cout}), bias({cout}) {
        if (kh < 1 || kw < 1 || cin < 1 || cout < 1 || sh < 1 || sw < 1)
            throw InvalidArgument("convolution geometry must be positive");
    }

    int kh() const { return weight.dim(0); }
    int kw() const { return weight.dim(1); }
    int cin() const { return weight.dim(2); }
    int cout() const { return weight.dim(3); }

    std::array<int, 2> output_size(int h, int w) const {
        if (h < kh() || w < kw()) throw ShapeMismatch("input smaller than kernel");
        return {(h - kh()) / sh + 1, (w - kw()) / sw + 1};
    }

    Tensor forward(const Tensor& x) const {
        if (x.shape.size() != 3 || x.dim(2) != cin()) throw ShapeMismatch("convolution input channels");
        const auto [oh, ow] = output_size(x.dim(0), x.dim(1));
        const int co = cout(), ci = cin();
        Tensor out({oh, ow, co});
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double* o = &out.at(oy, ox, 0);
                std::copy(bias.data.begin(), bias.data.end(), o);
                for (int a = 0; a < kh(); ++a)
                    for (int b = 0; b < kw(); ++b) {
                        const double* xi = &x.at(oy * sh + a, ox * sw + b, 0);
                        const double* k = &weight.data[((std::size_t(a) * kw() + b) * ci) * co];
                        for (int c = 0; c < ci; ++c, k += co) {
                            const double v = xi[c];
                            for (int q = 0; q < co; ++q) o[q] += v * k[q];
                        }
                    }
            }
        return out;
    }

    /// Accumulates parameter gradients into dw, db and returns the input gradient.
    Tensor backward(const Tensor& x, const Tensor& dout, Tensor& dw, Tensor& db) const {
        const int oh = dout.dim(0), ow = dout.dim(1), co = cout(), ci = cin();
        Tensor dx(x.shape);
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const double* g = &dout.at(oy, ox, 0);
                for (int q = 0; q < co; ++q) db.data[std::size_t(q)] += g[q];
                for (int a = 0; a < kh(); ++a)
                    for (int b = 0; b < kw(); ++b) {
                        const double* xi = &x.at(oy * sh + a, ox * sw + b, 0);
                        double* dxi = &dx.at(oy * sh + a, ox * sw + b, 0);
                        const std::size_t base = ((std::size_t(a) * kw() + b) * ci) * co;
                        const double* k = &weight.data[base];
                        double* dk = &dw.data[base];
                        for (int c = 0; c < ci; ++c, k += co, dk += co) {
                            const double v = xi[c];
                            double s = 0.0;
                            for (int q = 0; q < co; ++q) {
                                dk[q] += v * g[q];
                                s += k[q] * g[q];
                            }
                            dxi[c] += s;
                        }
                    }
            }
        return dx;
    }
};

/// 2x2 max pooling with stride 2. `argmax` receives the flat input index of
/// every output's maximum (first one on ties).
inline Tensor maxpool_forward(const Tensor& x, std::vector<std::size_t>* argmax = nullptr) {
    if (x.shape.size() != 3) throw ShapeMismatch("pooling needs a rank-3 tensor");
    if (x.dim(0) % 2 || x.dim(1) % 2) throw ShapeMismatch("pooling needs even spatial dimensions");
    const int oh = x.dim(0) / 2, ow = x.dim(1) / 2, ch = x.dim(2);
    Tensor out({oh, ow, ch});
    if (argmax) argmax->assign(out.size(), 0);
    for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx)
            for (int c = 0; c < ch; ++c) {
                std::size_t best = (std::size_t(2 * y) * x.dim(1) + 2 * xx) * ch + c;
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) {
                        const std::size_t i = (std::size_t(2 * y + a) * x.dim(1) + 2 * xx + b) * ch + c;
                        if (x.data[i] > x.data[best]) best = i;
                    }
                const std::size_t o = (std::size_t(y) * ow + xx) * ch + c;
                out.data[o] = x.data[best];
                if (argmax) (*argmax)[o] = best;
            }
    return out;
}

inline Tensor maxpool_backward(const std::vector<int>& input_shape, const Tensor& dout,
                               const std::vector<std::size_t>& argmax) {
    Tensor dx(input_shape);
    for (std::size_t o = 0; o < dout.size(); ++o) dx.data[argmax[o]] += dout.data[o];
    return dx;
}

inline Tensor relu_forward(Tensor x) {
    for (double& v : x.data) v = std::max(v, 0.0);
    return x;
}

/// Gradient through ReLU given its output.
inline Tensor relu_backward(const Tensor& out, Tensor dout) {
    for (std::size_t i = 0; i < dout.size(); ++i)
        if (!(out.data[i] > 0.0)) dout.data[i] = 0.0;
    return dout;
}

/// Fully connected layer on the flattened input; weight shape (in, out).
struct Dense {
    Tensor weight, bias;

    Dense() = default;
    Dense(int in, int out) : weight({in, out}), bias({out}) {}

    int in() const { return weight.dim(0); }
    int out() const { return weight.dim(1); }

    Tensor forward(const Tensor& x) const {
        if (int(x.size()) != in()) throw ShapeMismatch("dense input size");
        Tensor y = bias;
        for (int i = 0; i < in(); ++i) {
            const double v = x.data[std::size_t(i)];
            const double* w = &weight.data[std::size_t(i) * out()];
            for (int j = 0; j < out(); ++j) y.data[std::size_t(j)] += v * w[j];
        }
        return y;
    }

    Tensor backward(const Tensor& x, const Tensor& dout, Tensor& dw, Tensor& db) const {
        Tensor dx(x.shape);
        for (int j = 0; j < out(); ++j) db.data[std::size_t(j)] += dout.data[std::size_t(j)];
        for (int i = 0; i < in(); ++i) {
            const double v = x.data[std::size_t(i)];
            const double* w = &weight.data[std::size_t(i) * out()];
            double* dwi = &dw.data[std::size_t(i) * out()];
            double s = 0.0;
            for (int j = 0; j < out(); ++j) {
                dwi[j] += v * dout.data[std::size_t(j)];
                s += w[j] * dout.data[std::size_t(j)];
            }
            dx.data[std::size_t(i)] = s;
        }
        return dx;
    }
};

inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    if (p.empty()) return p;
    const double m = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (double& v : p) sum += (v = std::exp(v - m));
    for (double& v : p) v /= sum;
    return p;
}

/// Layer sizes of the classifier. The defaults form the 50x100x3 -> 8 chain.
struct CnnGeometry {
    int in_h = 50, in_w = 100, in_c = 3;
    int c1_kh = 4, c1_kw = 8, c1_sh = 2, c1_sw = 4, c1_out = 20;
    int c2_k = 5, c2_out = 50;
    int c3_k = 4, c3_out = 500;
    int classes = 8;

    friend bool operator==(const CnnGeometry&, const CnnGeometry&) = default;
};

struct CnnModel {
    CnnGeometry geometry;
    Conv2D conv1, conv2, conv3;
    Dense fc;
    Tensor data_mean;

    /// Parameter tensors in the fixed order used by the model file.
    std::vector<Tensor*> tensors() {
        return {&conv1.weight, &conv1.bias, &conv2.weight, &conv2.bias, &conv3.weight,
                &conv3.bias,   &fc.weight,  &fc.bias,      &data_mean};
    }
    std::vector<const Tensor*> tensors() const {
        return {&conv1.weight, &conv1.bias, &conv2.weight, &conv2.bias, &conv3.weight,
                &conv3.bias,   &fc.weight,  &fc.bias,      &data_mean};
    }
    friend bool operator==(const CnnModel& a, const CnnModel& b) {
        if (!(a.geometry == b.geometry)) return false;
        const auto ta = a.tensors(), tb = b.tensors();
        for (std::size_t i = 0; i < ta.size(); ++i)
            if (!(*ta[i] == *tb[i])) return false;
        return true;
    }
};

/// Zero-mean Gaussian weights with std sqrt(2 / fan_in), zero biases, zero mean image.
inline CnnModel make_model(const CnnGeometry& g = {}, std::uint64_t seed = 0) {
    CnnModel m;
    m.geometry = g;
    m.conv1 = Conv2D(g.c1_kh, g.c1_kw, g.in_c, g.c1_out, g.c1_sh, g.c1_sw);
    m.conv2 = Conv2D(g.c2_k, g.c2_k, g.c1_out, g.c2_out);
    m.conv3 = Conv2D(g.c3_k, g.c3_k, g.c2_out, g.c3_out);
    m.fc = Dense(g.c3_out, g.classes);
    m.data_mean = Tensor({g.in_h, g.in_w, g.in_c});
    // the chain has to end in a single spatial cell
    auto s1 = m.conv1.output_size(g.in_h, g.in_w);
    if (s1[0] % 2 || s1[1] % 2) throw InvalidArgument("conv1 output must have even size");
    auto s2 = m.conv2.output_size(s1[0] / 2, s1[1] / 2);
    if (s2[0] % 2 || s2[1] % 2) throw InvalidArgument("conv2 output must have even size");
    auto s3 = m.conv3.output_size(s2[0] / 2, s2[1] / 2);
    if (s3[0] != 1 || s3[1] != 1) throw InvalidArgument("conv3 output must be 1x1");
    Rng rng(seed);
    auto init = [&](Tensor& w, int fan_in) {
        const double sd = std::sqrt(2.0 / fan_in);
        for (double& v : w.data) v = rng.normal(0.0, sd);
    };
    init(m.conv1.weight, g.c1_kh * g.c1_kw * g.in_c);
    init(m.conv2.weight, g.c2_k * g.c2_k * g.c1_out);
    init(m.conv3.weight, g.c3_k * g.c3_k * g.c2_out);
    init(m.fc.weight, g.c3_out);
    return m;
}

/// Every intermediate of one forward pass; activations are post-ReLU.
struct ForwardTrace {
    Tensor input, a1, p1, a2, p2, a3, logits;
    std::vector<std::size_t> arg1, arg2;
    std::vector<double> probs;
};

inline ForwardTrace forward_trace(const CnnModel& m, const Tensor& x) {
    if (!x.same_shape(m.data_mean)) throw ShapeMismatch("input does not match the model input shape");
    ForwardTrace t;
    t.input = x;
    for (std::size_t i = 0; i < x.size(); ++i) t.input.data[i] -= m.data_mean.data[i];
    t.a1 = relu_forward(m.conv1.forward(t.input));
    t.p1 = maxpool_forward(t.a1, &t.arg1);
    t.a2 = relu_forward(m.conv2.forward(t.p1));
    t.p2 = maxpool_forward(t.a2, &t.arg2);
    t.a3 = relu_forward(m.conv3.forward(t.p2));
    t.logits = m.fc.forward(t.a3);
    t.probs = softmax(t.logits.data);
    return t;
}

inline std::vector<double> forward(const CnnModel& m, const Tensor& x) { return forward_trace(m, x).probs; }

/// Gradient buffers shaped like the model's parameters.
struct Gradients {
    Tensor c1w, c1b, c2w, c2b, c3w, c3b, fw, fb;

    explicit Gradients(const CnnModel& m)
        : c1w(m.conv1.weight.shape), c1b(m.conv1.bias.shape), c2w(m.conv2.weight.shape),
          c2b(m.conv2.bias.shape), c3w(m.conv3.weight.shape), c3b(m.conv3.bias.shape),
          fw(m.fc.weight.shape), fb(m.fc.bias.shape) {}

    std::vector<Tensor*> all() { return {&c1w, &c1b, &c2w, &c2b, &c3w, &c3b, &fw, &fb}; }
};

/// Cross-entropy of one example; adds `scale` times its gradient to `g`.
inline double accumulate_gradients(const CnnModel& m, const Tensor& x, int label, Gradients& g,
                                   double scale = 1.0) {
    if (label < 0 || label >= m.geometry.classes) throw InvalidArgument("label out of range");
    const ForwardTrace t = forward_trace(m, x);
    const double loss = -std::log(std::max(t.probs[std::size_t(label)], 1e-300));
    Tensor dlogits({int(t.probs.size())});
    for (std::size_t i = 0; i < t.probs.size(); ++i)
        dlogits.data[i] = scale * (t.probs[i] - (int(i) == label ? 1.0 : 0.0));
    Tensor d = m.fc.backward(t.a3, dlogits, g.fw, g.fb);
    d.shape = t.a3.shape;
    d = relu_backward(t.a3, std::move(d));
    d = m.conv3.backward(t.p2, d, g.c3w, g.c3b);
    d = maxpool_backward(t.a2.shape, d, t.arg2);
    d = relu_backward(t.a2, std::move(d));
    d = m.conv2.backward(t.p1, d, g.c2w, g.c2b);
    d = maxpool_backward(t.a1.shape, d, t.arg1);
    d = relu_backward(t.a1, std::move(d));
    m.conv1.backward(t.input, d, g.c1w, g.c1b);
    return loss;
}

struct Sample {
    Tensor x;
    int label = 0;
};

struct TrainConfig {
    double learning_rate = 0.01;
    double decay_at = 2.0 / 3.0;   // fraction of epochs after which lr is scaled by decay
    double decay = 0.1;
    int batch_size = 32;
    int epochs = 30;
    std::uint64_t seed = 0;
    double noise_variance = 0.001;
    bool flip = true;
    double validation_fraction = 0.1;
};

/// One SGD step on the mean cross-entropy of `batch`; returns the loss before the update.
inline double backward_and_step(CnnModel& m, std::span<const Sample* const> batch, double learning_rate) {
    if (batch.empty()) throw InvalidArgument("empty batch");
    Gradients g(m);
    const double scale = 1.0 / double(batch.size());
    double loss = 0.0;
    for (const Sample* s : batch) loss += accumulate_gradients(m, s->x, s->label, g, scale);
    Tensor* params[] = {&m.conv1.weight, &m.conv1.bias, &m.conv2.weight, &m.conv2.bias,
                        &m.conv3.weight, &m.conv3.bias, &m.fc.weight,    &m.fc.bias};
    const auto grads = g.all();
    for (std::size_t k = 0; k < grads.size(); ++k)
        for (std::size_t i = 0; i < params[k]->size(); ++i) params[k]->data[i] -= learning_rate * grads[k]->data[i];
    return loss * scale;
}

inline double backward_and_step(CnnModel& m, std::span<const Sample* const> batch, const TrainConfig& cfg) {
    return backward_and_step(m, batch, cfg.learning_rate);
}

inline Tensor flip_horizontal(const Tensor& x) {
    Tensor out(x.shape);
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int k = 0; k < c; ++k) out.at(y, w - 1 - xx, k) = x.at(y, xx, k);
    return out;
}

/// Duplicates every class up to the largest class count, cycling through its samples.
inline std::vector<Sample> balance_classes(const std::vector<Sample>& data) {
    int classes = 0;
    for (const auto& s : data) classes = std::max(classes, s.label + 1);
    std::vector<std::vector<const Sample*>> by(static_cast<std::size_t>(classes));
    for (const auto& s : data) by[std::size_t(s.label)].push_back(&s);
    std::size_t target = 0;
    for (const auto& v : by) target = std::max(target, v.size());
    std::vector<Sample> out;
    for (const auto& v : by)
        for (std::size_t i = 0; !v.empty() && i < target; ++i) out.push_back(*v[i % v.size()]);
    return out;
}

/// Balancing, then four variants per image: original, flipped, noisy and
/// noisy flipped (noise variants only without flip when cfg.flip is off).
inline std::vector<Sample> augment(const std::vector<Sample>& data, const TrainConfig& cfg) {
    Rng rng(cfg.seed ^ 0xa0a0a0a0ULL);
    const double sd = std::sqrt(cfg.noise_variance);
    auto noisy = [&](Tensor t) {
        for (double& v : t.data) v = std::clamp(v + rng.normal(0.0, sd), 0.0, 1.0);
        return t;
    };
    std::vector<Sample> out;
    for (const Sample& s : balance_classes(data)) {
        std::vector<Tensor> base{s.x};
        if (cfg.flip) base.push_back(flip_horizontal(s.x));
        for (const auto& t : base) out.push_back({t, s.label});
        for (const auto& t : base) out.push_back({noisy(t), s.label});
    }
    return out;
}

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

inline int predict(const CnnModel& m, const Tensor& x) {
    const auto p = forward(m, x);
    return int(std::max_element(p.begin(), p.end()) - p.begin());
}

/// Mean cross-entropy and accuracy over a labeled set.
inline std::pair<double, double> evaluate(const CnnModel& m, const std::vector<Sample>& data) {
    if (data.empty()) return {0.0, 0.0};
    double loss = 0.0;
    int hits = 0;
    for (const auto& s : data) {
        const auto p = forward(m, s.x);
        loss -= std::log(std::max(p[std::size_t(s.label)], 1e-300));
        hits += int(std::max_element(p.begin(), p.end()) - p.begin()) == s.label;
    }
    return {loss / double(data.size()), double(hits) / double(data.size())};
}

struct TrainResult {
    CnnModel model;
    std::vector<EpochLog> log;
};

/// Holds out a validation split, augments the rest, sets the data mean from
/// the training split and runs shuffled mini-batch SGD.
inline TrainResult train(const std::vector<Sample>& data, const TrainConfig& cfg, const CnnGeometry& geometry = {},
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
    if (data.empty()) throw InvalidArgument("empty training set");
    std::vector<int> labels;
    for (const auto& s : data) labels.push_back(s.label);
    std::sort(labels.begin(), labels.end());
    if (std::unique(labels.begin(), labels.end()) - labels.begin() < 2)
        throw InvalidArgument("training needs at least two classes");
    if (cfg.batch_size < 1 || cfg.epochs < 1 || !(cfg.learning_rate >= 0.0))
        throw InvalidArgument("bad training configuration");

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    const auto n_val = std::size_t(std::floor(cfg.validation_fraction * double(data.size())));
    std::vector<Sample> val, fit;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? val : fit).push_back(data[order[i]]);

    TrainResult r;
    r.model = make_model(geometry, cfg.seed);
    Tensor& mean = r.model.data_mean;
    for (const auto& s : fit) {
        if (!s.x.same_shape(mean)) throw ShapeMismatch("sample does not match the model input shape");
        for (std::size_t i = 0; i < mean.size(); ++i) mean.data[i] += s.x.data[i];
    }
    for (double& v : mean.data) v /= double(fit.size());

    const std::vector<Sample> train_set = augment(fit, cfg);
    std::vector<std::size_t> idx(train_set.size());
    std::iota(idx.begin(), idx.end(), 0);
    const int decay_epoch = int(std::ceil(cfg.decay_at * cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = epoch >= decay_epoch ? cfg.learning_rate * cfg.decay : cfg.learning_rate;
        rng.shuffle(idx.begin(), idx.end());
        double total = 0.0;
        std::size_t batches = 0;
        std::vector<const Sample*> batch;
        for (std::size_t start = 0; start < idx.size(); start += std::size_t(cfg.batch_size)) {
            batch.clear();
            for (std::size_t k = start; k < std::min(idx.size(), start + std::size_t(cfg.batch_size)); ++k)
                batch.push_back(&train_set[idx[k]]);
            total += backward_and_step(r.model, batch, lr);
            ++batches;
        }
        EpochLog e;
        e.epoch = epoch + 1;
        e.train_loss = total / double(batches);
        std::tie(e.val_loss, e.val_accuracy) = evaluate(r.model, val);
        r.log.push_back(e);
        if (on_epoch) on_epoch(e);
    }
    return r;
}

inline std::string training_log_csv(const std::vector<EpochLog>& log) {
    std::string out = "epoch,train_loss,val_loss,val_accuracy\n";
    char line[128];
    for (const auto& e : log) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
        out += line;
    }
    return out;
}

namespace detail {

inline void put_u32(std::ostream& o, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) o.put(char((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::ostream& o, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) o.put(char((v >> (8 * i)) & 0xff));
}
inline std::uint64_t get_bytes(std::istream& in, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
        const int c = in.get();
        if (c == EOF) throw IoError("model file truncated");
        v |= std::uint64_t(std::uint8_t(c)) << (8 * i);
    }
    return v;
}

inline constexpr char kModelMagic[6] = {'S', 'D', 'C', 'N', 'N', '1'};

} // namespace detail

/// Magic "SDCNN1", then per tensor: u32 rank, u32 dims, f64 values, all little-endian.
inline void save_model(const std::string& path, const CnnModel& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(detail::kModelMagic, sizeof detail::kModelMagic);
    for (const Tensor* t : m.tensors()) {
        detail::put_u32(out, std::uint32_t(t->shape.size()));
        for (int d : t->shape) detail::put_u32(out, std::uint32_t(d));
        for (double v : t->data) detail::put_f64(out, v);
    }
    if (!out) throw IoError("failed writing " + path);
}

/// Loads a model; every tensor shape must match `geometry`.
inline CnnModel load_model(const std::string& path, const CnnGeometry& geometry = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    char magic[sizeof detail::kModelMagic];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + sizeof magic, detail::kModelMagic)) throw IoError("not a model file: " + path);
    CnnModel m = make_model(geometry);
    for (Tensor* t : m.tensors()) {
        const auto rank = detail::get_bytes(in, 4);
        std::vector<int> shape;
        for (std::uint64_t i = 0; i < rank && i < 8; ++i) shape.push_back(int(detail::get_bytes(in, 4)));
        if (shape != t->shape) throw IoError("model tensor shape does not match the geometry");
        for (double& v : t->data) v = std::bit_cast<double>(detail::get_bytes(in, 8));
    }
    if (in.peek() != EOF) throw IoError("trailing bytes in model file");
    return m;
}

} // namespace sushi
