#include <sushi/cnn.hpp>
#include <sushi/config.hpp>
#include <sushi/detector.hpp>
#include <sushi/dishfeat.hpp>
#include <sushi/image_io.hpp>
#include <sushi/metrics.hpp>
#include <sushi/pipeline.hpp>
#include <sushi/synth.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sushi;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNoTowerExit = 2, kIo = 3 };

struct Global {
    std::uint64_t seed = 0;
    std::string config_path;
    std::string overlay_dir;
    bool json = false;

    Config config() const { return config_path.empty() ? Config{} : load_config(config_path); }
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

void write_overlays(const Global& g, const std::string& image_path, const Raster& img, const Detection& d) {
    if (g.overlay_dir.empty()) return;
    fs::create_directories(g.overlay_dir);
    const std::string stem = fs::path(image_path).stem().string();
    write_png((fs::path(g.overlay_dir) / (stem + "_overlay.png")).string(), detection_overlay(img, d));
    Raster edges(d.edges.width(), d.edges.height(), 1);
    for (int y = 0; y < edges.height(); ++y)
        for (int x = 0; x < edges.width(); ++x) edges.at(x, y, 0) = d.edges.on(x, y) ? 1.0 : 0.0;
    write_png((fs::path(g.overlay_dir) / (stem + "_edges.png")).string(), edges);
}

Raster read_color(const std::string& path) {
    Raster img = read_image(path);
    if (img.channels() == 3) return img;
    Raster rgb(img.width(), img.height(), 3);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int k = 0; k < 3; ++k) rgb.at(x, y, k) = img.at(x, y, 0);
    return rgb;
}

int cmd_detect(const Global& g, const std::string& image_path) {
    const Config cfg = g.config();
    const Raster img = read_color(image_path);
    const Detection d = detect(img, cfg.detector);
    write_overlays(g, image_path, img, d);
    const auto recon = reconstructed_ellipses(d);
    if (g.json) {
        nlohmann::ordered_json j;
        j["tower_found"] = d.tower_found();
        if (!d.tower_found()) j["message"] = kNoTower;
        j["dishes"] = nlohmann::ordered_json::array();
        for (std::size_t i = d.stack.size(); i-- > 0;) {
            const Ellipse& e = d.stack.rows[i];
            j["dishes"].push_back({{"ellipse", ellipse_json(e)},
                                   {"reconstructed", std::find(recon.begin(), recon.end(), e) != recon.end()}});
        }
        std::cout << j.dump(2) << '\n';
    } else if (!d.tower_found()) {
        std::cout << kNoTower << '\n';
    } else {
        std::printf("%zu dishes (top first)\n", d.stack.size());
        for (std::size_t i = d.stack.size(); i-- > 0;) {
            const Ellipse& e = d.stack.rows[i];
            std::printf("p=%.2f q=%.2f A=%.2f B=%.2f alpha=%.4f%s\n", e.p, e.q, e.A, e.B, e.alpha,
                        std::find(recon.begin(), recon.end(), e) != recon.end() ? " (reconstructed)" : "");
        }
    }
    return d.tower_found() ? kOk : kNoTowerExit;
}

int cmd_bill(const Global& g, const std::string& image_path, const std::string& model_path, bool with_prices) {
    const Config cfg = g.config();
    const CnnModel model = load_model(model_path, cfg.geometry);
    const Raster img = read_color(image_path);
    const PipelineResult r = run_pipeline(img, model, cfg);
    write_overlays(g, image_path, img, r.detection);
    if (g.json) {
        auto j = bill_json(r.bill, cfg.prices);
        if (!with_prices) {
            j.erase("total");
            j.erase("currency");
            j.erase("minor_digits");
            for (auto& d : j["dishes"]) d.erase("price");
        }
        std::cout << j.dump(2) << '\n';
    } else if (with_prices) {
        std::cout << bill_text(r.bill, cfg.prices);
    } else if (!r.bill.tower_found) {
        std::cout << kNoTower << '\n';
    } else {
        for (const auto& d : r.bill.dishes)
            std::printf("dish %zu: %s %.1f%%\n", d.index + 1, d.label.name.c_str(), 100.0 * d.confidence);
    }
    return r.bill.tower_found ? kOk : kNoTowerExit;
}

struct PatchSource {
    std::string dataset;
    std::size_t synth_count = 0;
    std::uint64_t synth_first_seed = 0;

    std::vector<Sample> load(const Config& cfg) const {
        if (!dataset.empty()) return to_samples(load_dataset(dataset, cfg.palette));
        if (synth_count == 0) throw InvalidArgument("give --dataset or --synth-count");
        return to_samples(synth_patches(synth_first_seed, synth_count));
    }
};

int cmd_train(const Global& g, const PatchSource& src, const std::string& model_out, const std::string& log_out,
              int epochs) {
    Config cfg = g.config();
    cfg.training.seed = g.seed;
    if (epochs > 0) cfg.training.epochs = epochs;
    const auto data = src.load(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult r = train(data, cfg.training, cfg.geometry, [&](const EpochLog& e) {
        if (!g.json)
            std::printf("epoch %d: train_loss %.4f val_loss %.4f val_accuracy %.4f\n", e.epoch, e.train_loss,
                        e.val_loss, e.val_accuracy);
        std::fflush(stdout);
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (fs::path(model_out).has_parent_path()) fs::create_directories(fs::path(model_out).parent_path());
    save_model(model_out, r.model);
    if (!log_out.empty()) write_text(log_out, training_log_csv(r.log));
    if (g.json) {
        nlohmann::ordered_json j{{"samples", data.size()},
                                 {"epochs", cfg.training.epochs},
                                 {"val_accuracy", r.log.back().val_accuracy},
                                 {"seconds", secs},
                                 {"model", model_out}};
        std::cout << j.dump(2) << '\n';
    } else {
        std::printf("trained on %zu patches in %.1f s, model written to %s\n", data.size(), secs, model_out.c_str());
    }
    return kOk;
}

int cmd_synth(const Global& g, const std::string& out_dir, std::size_t count, double drop, std::size_t patches) {
    const Config cfg = g.config();
    fs::create_directories(out_dir);
    if (patches > 0) {
        export_dataset(out_dir, synth_patches(g.seed, patches));
        std::printf("%zu labeled patches written to %s\n", patches, out_dir.c_str());
        return kOk;
    }
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t seed = g.seed + i;
        const SceneSpec spec = random_scene(seed);
        const GroundTruth gt = drop > 0.0 ? render_occluded(spec, drop) : render(spec);
        const std::string stem = "scene_" + std::to_string(seed);
        write_png((fs::path(out_dir) / (stem + ".png")).string(), gt.image);
        write_text(fs::path(out_dir) / (stem + ".json"), truth_json(gt, cfg.palette, seed).dump(2) + "\n");
    }
    std::printf("%zu scenes written to %s\n", count, out_dir.c_str());
    return kOk;
}

struct Scene {
    std::string name;
    Raster image;
    std::vector<Ellipse> truth;
};

std::vector<Scene> scenes_from_dir(const std::string& dir) {
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension().string();
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") images.push_back(entry.path());
    }
    std::sort(images.begin(), images.end());
    std::vector<Scene> out;
    for (const auto& p : images) {
        fs::path side = p;
        side.replace_extension(".json");
        if (!fs::exists(side)) continue;
        std::ifstream in(side);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error&) {
            throw IoError("bad sidecar " + side.string());
        }
        Scene s{p.stem().string(), read_color(p.string()), {}};
        for (const auto& d : truth_from_json(j)) s.truth.push_back(d.ellipse);
        out.push_back(std::move(s));
    }
    if (out.empty()) throw IoError("no images with sidecars in " + dir);
    return out;
}

std::string report_row(const std::string& name, const char* stage, const DetectionReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%s,%lld,%lld,%lld,%.6f,%.6f\n", name.c_str(), stage,
                  static_cast<long long>(r.true_positives), static_cast<long long>(r.false_positives),
                  static_cast<long long>(r.ground_truth), r.precision(), r.recall());
    return buf;
}

int cmd_eval_detect(const Global& g, const std::string& images_dir, std::size_t synth_count, double drop,
                    const std::string& out) {
    const Config cfg = g.config();
    std::vector<Scene> scenes;
    if (!images_dir.empty()) {
        scenes = scenes_from_dir(images_dir);
    } else {
        if (synth_count == 0) throw InvalidArgument("give --images or --synth-count");
        for (std::size_t i = 0; i < synth_count; ++i) {
            const std::uint64_t seed = g.seed + i;
            const SceneSpec spec = random_scene(seed);
            const GroundTruth gt = drop > 0.0 ? render_occluded(spec, drop) : render(spec);
            Scene s{"scene_" + std::to_string(seed), gt.image, {}};
            for (const auto& d : gt.dishes) s.truth.push_back(d.ellipse);
            scenes.push_back(std::move(s));
        }
    }
    std::string csv = "image,stage,true_positives,false_positives,ground_truth,precision,recall\n";
    DetectionReport before, after;
    double worst = 0.0, total_time = 0.0;
    for (const auto& s : scenes) {
        const auto t0 = std::chrono::steady_clock::now();
        const Detection d = detect(s.image, cfg.detector);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        worst = std::max(worst, secs);
        total_time += secs;
        write_overlays(g, s.name, s.image, d);
        const auto b = match_detections(d.before_reconstruction.rows, s.truth, cfg.matching);
        const auto a = match_detections(d.stack.rows, s.truth, cfg.matching);
        before += b;
        after += a;
        csv += report_row(s.name, "before", b) + report_row(s.name, "after", a);
    }
    csv += report_row("total", "before", before) + report_row("total", "after", after);
    if (!out.empty()) write_text(out, csv);
    if (g.json) {
        nlohmann::ordered_json j;
        for (auto [name, r] : {std::pair{"before", before}, std::pair{"after", after}})
            j[name] = {{"true_positives", r.true_positives},
                       {"false_positives", r.false_positives},
                       {"ground_truth", r.ground_truth},
                       {"precision", r.precision()},
                       {"recall", r.recall()}};
        j["images"] = scenes.size();
        j["mean_seconds"] = total_time / double(scenes.size());
        j["max_seconds"] = worst;
        std::cout << j.dump(2) << '\n';
    } else {
        std::printf("%zu images\n", scenes.size());
        std::printf("without reconstruction: precision %.4f recall %.4f (TP %lld FP %lld GT %lld)\n",
                    before.precision(), before.recall(), static_cast<long long>(before.true_positives),
                    static_cast<long long>(before.false_positives), static_cast<long long>(before.ground_truth));
        std::printf("with reconstruction:    precision %.4f recall %.4f (TP %lld FP %lld GT %lld)\n", after.precision(),
                    after.recall(), static_cast<long long>(after.true_positives),
                    static_cast<long long>(after.false_positives), static_cast<long long>(after.ground_truth));
        std::printf("runtime per image: mean %.3f s, max %.3f s\n", total_time / double(scenes.size()), worst);
    }
    return kOk;
}

int cmd_eval_classify(const Global& g, const std::string& model_path, const PatchSource& src, const std::string& out,
                      const std::string& heatmap) {
    const Config cfg = g.config();
    const CnnModel model = load_model(model_path, cfg.geometry);
    const ConfusionMatrix m = evaluate_classifier(model, src.load(cfg));
    std::vector<std::string> names;
    for (const auto& e : cfg.palette.entries) names.push_back(e.name);
    if (!out.empty()) write_text(out, m.to_csv(names));
    if (!heatmap.empty()) {
        if (fs::path(heatmap).has_parent_path()) fs::create_directories(fs::path(heatmap).parent_path());
        write_png(heatmap, confusion_heatmap(m));
    }
    if (g.json) {
        std::cout << nlohmann::ordered_json{{"correct", m.correct()}, {"total", m.total()}, {"accuracy", m.accuracy()}}.dump(2)
                  << '\n';
    } else {
        std::printf("accuracy %.4f (%lld of %lld)\n", m.accuracy(), static_cast<long long>(m.correct()),
                    static_cast<long long>(m.total()));
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Detects stacked dishes, classifies their colors and computes the bill."};
    app.require_subcommand(1);
    app.fallthrough();
    Global g;
    app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
    app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--debug-overlays", g.overlay_dir, "Directory for overlay and edge-map PNGs");
    app.add_flag("--json", g.json, "Machine-readable output");

    std::string image, model, model_out, log_out, out, heatmap, out_dir, images_dir;
    PatchSource src;
    std::size_t count = 10, patches = 0, synth_count = 0;
    double drop = 0.0;
    int epochs = 0;

    auto* detect_cmd = app.add_subcommand("detect", "Detect the dish tower in an image");
    detect_cmd->add_option("image", image, "PNG or JPEG image")->required();

    auto* classify_cmd = app.add_subcommand("classify", "Detect and classify every dish");
    classify_cmd->add_option("image", image, "PNG or JPEG image")->required();
    classify_cmd->add_option("--model", model, "Model file")->required();

    auto* bill_cmd = app.add_subcommand("bill", "Detect, classify and price every dish");
    bill_cmd->add_option("image", image, "PNG or JPEG image")->required();
    bill_cmd->add_option("--model", model, "Model file")->required();

    auto add_source = [&](CLI::App* c) {
        c->add_option("--dataset", src.dataset, "Patch dataset directory with manifest.csv");
        c->add_option("--synth-count", src.synth_count, "Use this many synthetic patches instead");
        c->add_option("--synth-first-seed", src.synth_first_seed, "First scene seed of the synthetic patches");
    };
    auto* train_cmd = app.add_subcommand("train", "Train the color classifier");
    add_source(train_cmd);
    train_cmd->add_option("--model-out", model_out, "Where to write the model")->required();
    train_cmd->add_option("--log", log_out, "Per-epoch CSV log");
    train_cmd->add_option("--epochs", epochs, "Override the configured epoch count");

    auto* synth_cmd = app.add_subcommand("synth", "Render synthetic scenes with ground-truth sidecars");
    synth_cmd->add_option("--out", out_dir, "Output directory")->required();
    synth_cmd->add_option("--count", count, "Number of scenes (seeds start at --seed)")->capture_default_str();
    synth_cmd->add_option("--drop", drop, "Keep only this fraction of some interior rims")->check(CLI::Range(0.0, 0.99));
    synth_cmd->add_option("--patches", patches, "Write a labeled patch dataset of this size instead");

    auto* eval_detect_cmd = app.add_subcommand("eval-detect", "Precision and recall of the detector");
    eval_detect_cmd->add_option("--images", images_dir, "Directory of images with JSON sidecars");
    eval_detect_cmd->add_option("--synth-count", synth_count, "Evaluate on this many synthetic scenes instead");
    eval_detect_cmd->add_option("--drop", drop, "Rim fraction kept on thinned dishes")->check(CLI::Range(0.0, 0.99));
    eval_detect_cmd->add_option("--out", out, "Metrics CSV");

    auto* eval_classify_cmd = app.add_subcommand("eval-classify", "Accuracy and confusion matrix of the classifier");
    eval_classify_cmd->add_option("--model", model, "Model file")->required();
    add_source(eval_classify_cmd);
    eval_classify_cmd->add_option("--out", out, "Confusion matrix CSV");
    eval_classify_cmd->add_option("--heatmap", heatmap, "Confusion heatmap PNG");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*detect_cmd) return cmd_detect(g, image);
        if (*classify_cmd) return cmd_bill(g, image, model, false);
        if (*bill_cmd) return cmd_bill(g, image, model, true);
        if (*train_cmd) return cmd_train(g, src, model_out, log_out, epochs);
        if (*synth_cmd) return cmd_synth(g, out_dir, count, drop, patches);
        if (*eval_detect_cmd) return cmd_eval_detect(g, images_dir, synth_count, drop, out);
        if (*eval_classify_cmd) return cmd_eval_classify(g, model, src, out, heatmap);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
