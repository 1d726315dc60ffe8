#include <sushi/cnn.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

using namespace sushi;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double rel_error(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6}); }

// Central difference of f with respect to every entry of t, compared with `analytic`.
template <class F>
double max_fd_error(Tensor& t, const Tensor& analytic, F&& f) {
    constexpr double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double keep = t.data[i];
        t.data[i] = keep + h;
        const double up = f();
        t.data[i] = keep - h;
        const double down = f();
        t.data[i] = keep;
        worst = std::max(worst, rel_error((up - down) / (2 * h), analytic.data[i]));
    }
    return worst;
}

CnnGeometry tiny_geometry() {
    CnnGeometry g;
    g.in_h = 6, g.in_w = 8, g.in_c = 2;
    g.c1_kh = 3, g.c1_kw = 2, g.c1_sh = 1, g.c1_sw = 2, g.c1_out = 3;
    g.c2_k = 1, g.c2_out = 4;
    g.c3_k = 1, g.c3_out = 5;
    g.classes = 3;
    return g;
}

} // namespace

TEST(Conv2D, MatchesDirectSum) {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const int kh = 1 + int(rng.index(4)), kw = 1 + int(rng.index(4)), ci = 1 + int(rng.index(3)),
                  co = 1 + int(rng.index(4)), sh = 1 + int(rng.index(3)), sw = 1 + int(rng.index(3));
        const int h = kh + int(rng.index(7)), w = kw + int(rng.index(7));
        Conv2D conv(kh, kw, ci, co, sh, sw);
        conv.weight = random_tensor(conv.weight.shape, rng);
        conv.bias = random_tensor(conv.bias.shape, rng);
        const Tensor x = random_tensor({h, w, ci}, rng);
        const Tensor y = conv.forward(x);
        const int oh = (h - kh) / sh + 1, ow = (w - kw) / sw + 1;
        ASSERT_EQ(y.shape, (std::vector<int>{oh, ow, co}));
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                for (int o = 0; o < co; ++o) {
                    double s = conv.bias.data[std::size_t(o)];
                    for (int a = 0; a < kh; ++a)
                        for (int b = 0; b < kw; ++b)
                            for (int c = 0; c < ci; ++c)
                                s += x.data[std::size_t(((oy * sh + a) * w + ox * sw + b) * ci + c)] *
                                     conv.weight.data[std::size_t(((a * kw + b) * ci + c) * co + o)];
                    EXPECT_NEAR(y.at(oy, ox, o), s, 1e-12);
                }
    }
}

TEST(Conv2D, IdentityAndOnesKernels) {
    Rng rng(21);
    const Tensor x = random_tensor({5, 6, 1}, rng);
    Conv2D id(1, 1, 1, 1);
    id.weight.data[0] = 1.0;
    EXPECT_TRUE(id.forward(x) == x);
    Conv2D ones(2, 2, 1, 1);
    std::fill(ones.weight.data.begin(), ones.weight.data.end(), 1.0);
    const Tensor y = ones.forward(Tensor({4, 4, 1}, 0.3));
    EXPECT_EQ(y.shape, (std::vector<int>{3, 3, 1}));
    for (double v : y.data) EXPECT_NEAR(v, 1.2, 1e-15);
    EXPECT_THROW(ones.forward(Tensor({4, 4, 2})), ShapeMismatch);
    EXPECT_THROW(ones.forward(Tensor({1, 4, 1})), ShapeMismatch);
}

TEST(MaxPool, SmallExamples) {
    Tensor block({2, 2, 1});
    block.data = {1, 2, 3, 4};
    EXPECT_EQ(maxpool_forward(block).data, std::vector<double>{4});
    const Tensor c = maxpool_forward(Tensor({4, 6, 2}, 0.7));
    EXPECT_EQ(c.shape, (std::vector<int>{2, 3, 2}));
    for (double v : c.data) EXPECT_EQ(v, 0.7);
}

TEST(MaxPool, MatchesWindowMaximum) {
    Rng rng(2);
    const Tensor x = random_tensor({6, 8, 3}, rng);
    const Tensor y = maxpool_forward(x);
    ASSERT_EQ(y.shape, (std::vector<int>{3, 4, 3}));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j)
            for (int c = 0; c < 3; ++c)
                EXPECT_EQ(y.at(i, j, c), std::max({x.at(2 * i, 2 * j, c), x.at(2 * i + 1, 2 * j, c),
                                                   x.at(2 * i, 2 * j + 1, c), x.at(2 * i + 1, 2 * j + 1, c)}));
    EXPECT_THROW(maxpool_forward(Tensor({5, 4, 1})), ShapeMismatch);
}

TEST(GradientCheck, Conv2D) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int kh = 1 + int(rng.index(3)), kw = 1 + int(rng.index(3)), ci = 1 + int(rng.index(3)),
                  co = 1 + int(rng.index(3)), sh = 1 + int(rng.index(2)), sw = 1 + int(rng.index(2));
        Conv2D conv(kh, kw, ci, co, sh, sw);
        conv.weight = random_tensor(conv.weight.shape, rng);
        conv.bias = random_tensor(conv.bias.shape, rng);
        Tensor x = random_tensor({kh + int(rng.index(4)), kw + int(rng.index(4)), ci}, rng);
        const Tensor r = random_tensor(conv.forward(x).shape, rng);
        Tensor dw(conv.weight.shape), db(conv.bias.shape);
        const Tensor dx = conv.backward(x, r, dw, db);
        auto loss = [&] { return dot(conv.forward(x), r); };
        EXPECT_LT(max_fd_error(x, dx, loss), 1e-4);
        EXPECT_LT(max_fd_error(conv.weight, dw, loss), 1e-4);
        EXPECT_LT(max_fd_error(conv.bias, db, loss), 1e-4);
    }
}

TEST(GradientCheck, MaxPoolAndRelu) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = random_tensor({2 * (1 + int(rng.index(3))), 2 * (1 + int(rng.index(3))), 1 + int(rng.index(3))}, rng);
        std::vector<std::size_t> arg;
        const Tensor r = random_tensor(maxpool_forward(x, &arg).shape, rng);
        const Tensor dx = maxpool_backward(x.shape, r, arg);
        EXPECT_LT(max_fd_error(x, dx, [&] { return dot(maxpool_forward(x), r); }), 1e-4);

        const Tensor r2 = random_tensor(x.shape, rng);
        const Tensor dr = relu_backward(relu_forward(x), r2);
        EXPECT_LT(max_fd_error(x, dr, [&] { return dot(relu_forward(x), r2); }), 1e-4);
    }
}

TEST(GradientCheck, DenseAndSoftmaxLoss) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int in = 1 + int(rng.index(6)), out = 2 + int(rng.index(5));
        Dense fc(in, out);
        fc.weight = random_tensor(fc.weight.shape, rng);
        fc.bias = random_tensor(fc.bias.shape, rng);
        Tensor x = random_tensor({in}, rng);
        const int label = int(rng.index(std::size_t(out)));
        auto loss = [&] { return -std::log(softmax(fc.forward(x).data)[std::size_t(label)]); };
        const auto p = softmax(fc.forward(x).data);
        Tensor dlogits({out});
        for (int j = 0; j < out; ++j) dlogits.data[std::size_t(j)] = p[std::size_t(j)] - (j == label);
        Tensor dw(fc.weight.shape), db(fc.bias.shape);
        const Tensor dx = fc.backward(x, dlogits, dw, db);
        EXPECT_LT(max_fd_error(x, dx, loss), 1e-4);
        EXPECT_LT(max_fd_error(fc.weight, dw, loss), 1e-4);
        EXPECT_LT(max_fd_error(fc.bias, db, loss), 1e-4);
    }
}

TEST(GradientCheck, WholeNetwork) {
    const CnnGeometry g = tiny_geometry();
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(100 + trial);
        CnnModel m = make_model(g, trial);
        m.data_mean = random_tensor(m.data_mean.shape, rng, 0.0, 0.2);
        for (Tensor* b : {&m.conv1.bias, &m.conv2.bias, &m.conv3.bias, &m.fc.bias}) *b = random_tensor(b->shape, rng, 0.0, 0.3);
        const Tensor x = random_tensor({g.in_h, g.in_w, g.in_c}, rng, 0.0, 1.0);
        const int label = int(rng.index(std::size_t(g.classes)));
        Gradients grad(m);
        accumulate_gradients(m, x, label, grad);
        auto loss = [&] { return -std::log(forward(m, x)[std::size_t(label)]); };
        Tensor* params[] = {&m.conv1.weight, &m.conv1.bias, &m.conv2.weight, &m.conv2.bias,
                            &m.conv3.weight, &m.conv3.bias, &m.fc.weight,    &m.fc.bias};
        const auto grads = grad.all();
        for (std::size_t k = 0; k < grads.size(); ++k) EXPECT_LT(max_fd_error(*params[k], *grads[k], loss), 1e-4) << k;
    }
}

TEST(CnnModel, ShapeChain) {
    const CnnModel m = make_model();
    Rng rng(6);
    const ForwardTrace t = forward_trace(m, random_tensor({50, 100, 3}, rng, 0.0, 1.0));
    EXPECT_EQ(t.a1.shape, (std::vector<int>{24, 24, 20}));
    EXPECT_EQ(t.p1.shape, (std::vector<int>{12, 12, 20}));
    EXPECT_EQ(t.a2.shape, (std::vector<int>{8, 8, 50}));
    EXPECT_EQ(t.p2.shape, (std::vector<int>{4, 4, 50}));
    EXPECT_EQ(t.a3.shape, (std::vector<int>{1, 1, 500}));
    EXPECT_EQ(t.logits.shape, (std::vector<int>{8}));
    double sum = 0.0;
    for (double p : t.probs) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_THROW(forward(m, Tensor({50, 100, 1})), ShapeMismatch);
    CnnGeometry bad;
    bad.in_w = 90;
    EXPECT_THROW(make_model(bad), InvalidArgument);
}

TEST(CnnModel, HeInitialization) {
    const CnnModel m = make_model({}, 9);
    double s2 = 0.0;
    for (double v : m.conv2.weight.data) s2 += v * v;
    EXPECT_NEAR(std::sqrt(s2 / double(m.conv2.weight.size())), std::sqrt(2.0 / 500), 0.003);
    for (double v : m.conv1.bias.data) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(make_model({}, 9) == m);
    EXPECT_FALSE(make_model({}, 10) == m);
}

TEST(Softmax, SumsToOneAndIsStable) {
    Rng rng(7);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> z(8);
        for (double& v : z) v = rng.uniform(-50, 50);
        double s = 0.0;
        for (double p : softmax(z)) s += p;
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
    const auto big = softmax(std::vector<double>{1000.0, 1000.0});
    EXPECT_DOUBLE_EQ(big[0], 0.5);
}

TEST(CnnModel, ZeroClassifierGivesUniformOutput) {
    CnnModel m = make_model({}, 3);
    std::fill(m.fc.weight.data.begin(), m.fc.weight.data.end(), 0.0);
    Rng rng(8);
    for (double p : forward(m, random_tensor({50, 100, 3}, rng, 0.0, 1.0))) EXPECT_NEAR(p, 0.125, 1e-15);
}

TEST(Training, ZeroLearningRateKeepsWeights) {
    CnnModel m = make_model(tiny_geometry(), 4);
    const CnnModel before = m;
    Rng rng(9);
    std::vector<Sample> data;
    for (int i = 0; i < 4; ++i) data.push_back({random_tensor({6, 8, 2}, rng, 0.0, 1.0), i % 3});
    std::vector<const Sample*> batch;
    for (const auto& s : data) batch.push_back(&s);
    const double loss = backward_and_step(m, batch, 0.0);
    EXPECT_GT(loss, 0.0);
    EXPECT_TRUE(m == before);
    backward_and_step(m, batch, 0.1);
    EXPECT_FALSE(m == before);
}

TEST(Training, RepeatedBatchLossDoesNotIncrease) {
    Rng rng(14);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CnnModel m = make_model(tiny_geometry(), seed);
        std::vector<Sample> data;
        for (int i = 0; i < 6; ++i) data.push_back({random_tensor({6, 8, 2}, rng, 0.0, 1.0), i % 3});
        std::vector<const Sample*> batch;
        for (const auto& s : data) batch.push_back(&s);
        TrainConfig cfg;
        cfg.learning_rate = 1e-3;
        const double first = backward_and_step(m, batch, cfg);
        EXPECT_LE(backward_and_step(m, batch, cfg), first);
    }
}

TEST(Augment, BalancesThenQuadruples) {
    std::vector<Sample> data;
    for (int i = 0; i < 400; ++i) data.push_back({Tensor({2, 2, 1}, 0.5), 0});
    for (int i = 0; i < 100; ++i) data.push_back({Tensor({2, 2, 1}, 0.25), 1});
    const auto balanced = balance_classes(data);
    std::map<int, int> count;
    for (const auto& s : balanced) ++count[s.label];
    EXPECT_EQ(count[0], 400);
    EXPECT_EQ(count[1], 400);
    const auto aug = augment(data, TrainConfig{});
    EXPECT_EQ(aug.size(), 3200u);
    for (const auto& s : aug)
        for (double v : s.x.data) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
}

TEST(Augment, NoiseHasConfiguredVariance) {
    std::vector<Sample> data{{Tensor({50, 100, 3}, 0.5), 0}, {Tensor({50, 100, 3}, 0.5), 1}};
    TrainConfig cfg;
    const auto aug = augment(data, cfg);
    ASSERT_EQ(aug.size(), 8u);
    double s2 = 0.0;
    for (double v : aug[2].x.data) s2 += (v - 0.5) * (v - 0.5);
    EXPECT_NEAR(s2 / double(aug[2].x.size()), 0.001, 1e-4);
    EXPECT_TRUE(aug[0].x == data[0].x);
}

TEST(Augment, FlipIsAnInvolution) {
    Rng rng(10);
    const Tensor x = random_tensor({5, 7, 3}, rng);
    const Tensor f = flip_horizontal(x);
    EXPECT_EQ(f.at(2, 0, 1), x.at(2, 6, 1));
    EXPECT_FALSE(f == x);
    EXPECT_TRUE(flip_horizontal(f) == x);
}

TEST(ModelFile, RoundTrip) {
    CnnModel m = make_model({}, 11);
    Rng rng(12);
    m.data_mean = random_tensor(m.data_mean.shape, rng, 0.0, 1.0);
    m.fc.bias = random_tensor(m.fc.bias.shape, rng);
    const auto path = (std::filesystem::temp_directory_path() / "sushi_cnn_test.model").string();
    save_model(path, m);
    EXPECT_TRUE(load_model(path) == m);
    std::ifstream in(path, std::ios::binary);
    char magic[6];
    in.read(magic, 6);
    EXPECT_EQ(std::string(magic, 6), "SDCNN1");
    // rank of the first tensor, little-endian
    EXPECT_EQ(in.get(), 4);
    in.close();
    EXPECT_THROW(load_model(path, tiny_geometry()), IoError);
    std::ofstream(path, std::ios::binary) << "garbage";
    EXPECT_THROW(load_model(path), IoError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_model(path), IoError);
}

TEST(Training, SingleClassRejected) {
    std::vector<Sample> data(10, Sample{Tensor({6, 8, 2}), 1});
    EXPECT_THROW(train(data, TrainConfig{}, tiny_geometry()), InvalidArgument);
}

TEST(Training, LearnsSeparableTinyProblemDeterministically) {
    // class = which channel carries a bright blob; pooling to 1x1 discards position
    Rng rng(13);
    std::vector<Sample> data;
    for (int i = 0; i < 120; ++i) {
        const int label = i % 2;
        Tensor x = random_tensor({6, 8, 2}, rng, 0.0, 0.3);
        const int y0 = int(rng.index(4)), x0 = int(rng.index(6));
        for (int y = y0; y < y0 + 3; ++y)
            for (int k = x0; k < x0 + 3; ++k) x.at(y, k, label) += 0.6;
        data.push_back({x, label});
    }
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.learning_rate = 0.05;
    cfg.flip = false;
    CnnGeometry g = tiny_geometry();
    g.classes = 2;
    const TrainResult a = train(data, cfg, g);
    ASSERT_EQ(a.log.size(), 15u);
    EXPECT_LT(a.log.back().train_loss, a.log.front().train_loss);
    EXPECT_GE(a.log.back().val_accuracy, 0.9);
    const TrainResult b = train(data, cfg, g);
    EXPECT_TRUE(a.model == b.model);
    EXPECT_EQ(training_log_csv(a.log), training_log_csv(b.log));
    EXPECT_EQ(training_log_csv(a.log).rfind("epoch,train_loss,val_loss,val_accuracy\n", 0), 0u);
}

TEST(Training, TwoColorPatchesSeparateQuickly) {
    // full-size network, 200 flat patches in two hues with brightness jitter
    Rng rng(15);
    std::vector<Sample> data;
    for (int i = 0; i < 200; ++i) {
        const int label = i % 2;
        const double g = rng.uniform(0.6, 1.1);
        Tensor x({50, 100, 3});
        for (int y = 0; y < 50; ++y)
            for (int xx = 0; xx < 100; ++xx) {
                x.at(y, xx, 0) = std::clamp(g * (label ? 0.2 : 0.7) + rng.normal(0.0, 0.02), 0.0, 1.0);
                x.at(y, xx, 1) = std::clamp(g * 0.3 + rng.normal(0.0, 0.02), 0.0, 1.0);
                x.at(y, xx, 2) = std::clamp(g * (label ? 0.7 : 0.2) + rng.normal(0.0, 0.02), 0.0, 1.0);
            }
        data.push_back({x, label});
    }
    TrainConfig cfg;
    cfg.epochs = 5;
    CnnGeometry g;
    g.classes = 2;
    const TrainResult r = train(data, cfg, g);
    EXPECT_GE(r.log.back().val_accuracy, 0.99);
    EXPECT_GE(evaluate(r.model, data).second, r.log.back().val_accuracy);
}
