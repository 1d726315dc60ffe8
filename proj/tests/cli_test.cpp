#include <sushi/image_io.hpp>
#include <sushi/pipeline.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace sushi;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun sushi_cli(const std::string& args) {
    const std::string cmd = std::string(SUSHI_CLI) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    CliRun r;
    if (!pipe) return r;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    fs::path dir = fs::temp_directory_path() / "sushi_cli_test";
    void SetUp() override {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string at(const std::string& name) const { return (dir / name).string(); }
};

} // namespace

TEST_F(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(sushi_cli("").code, 1);
    EXPECT_EQ(sushi_cli("frobnicate").code, 1);
    EXPECT_EQ(sushi_cli("detect").code, 1);
    EXPECT_EQ(sushi_cli("bill x.png").code, 1);
    EXPECT_EQ(sushi_cli("--help").code, 0);
}

TEST_F(Cli, MissingFilesExitThree) {
    EXPECT_EQ(sushi_cli("detect " + at("missing.png")).code, 3);
    write_png(at("img.png"), Raster(50, 50, 3));
    EXPECT_EQ(sushi_cli("bill " + at("img.png") + " --model " + at("missing.model")).code, 3);
}

TEST_F(Cli, BlankImageExitsTwo) {
    write_png(at("blank.png"), Raster(300, 200, 3));
    const CliRun r = sushi_cli("detect " + at("blank.png"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("no dish tower detected"), std::string::npos);
    save_model(at("m.model"), make_model());
    const CliRun j = sushi_cli("--json bill " + at("blank.png") + " --model " + at("m.model"));
    EXPECT_EQ(j.code, 2);
    const auto parsed = nlohmann::json::parse(j.out);
    EXPECT_FALSE(parsed["tower_found"].get<bool>());
}

TEST_F(Cli, SynthWritesImagesAndSidecars) {
    ASSERT_EQ(sushi_cli("--seed 11 synth --out " + at("s") + " --count 2 --drop 0.2").code, 0);
    for (const char* stem : {"scene_11", "scene_12"}) {
        ASSERT_TRUE(fs::exists(dir / "s" / (std::string(stem) + ".png")));
        const auto j = nlohmann::json::parse(slurp(dir / "s" / (std::string(stem) + ".json")));
        EXPECT_EQ(truth_from_json(j).size(), j["dishes"].size());
    }
    const Raster img = read_image(at("s/scene_11.png"));
    const Raster ref = render_occluded(random_scene(11), 0.2).image;
    ASSERT_EQ(img.data().size(), ref.data().size());
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.data().size(); ++i) worst = std::max(worst, std::fabs(img.data()[i] - ref.data()[i]));
    EXPECT_LE(worst, 0.5 / 255 + 1e-12);
}

TEST_F(Cli, DetectJsonAndOverlays) {
    write_png(at("scene.png"), render(random_scene(2)).image);
    const CliRun r = sushi_cli("--json --debug-overlays " + at("ov") + " detect " + at("scene.png"));
    ASSERT_EQ(r.code, 0) << r.out;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j["tower_found"].get<bool>());
    EXPECT_EQ(j["dishes"].size(), std::size_t(random_scene(2).dish_count));
    EXPECT_TRUE(fs::exists(dir / "ov" / "scene_overlay.png"));
    EXPECT_TRUE(fs::exists(dir / "ov" / "scene_edges.png"));
}

TEST_F(Cli, EvalDetectIsRepeatable) {
    ASSERT_EQ(sushi_cli("--seed 3 synth --out " + at("s") + " --count 2").code, 0);
    ASSERT_EQ(sushi_cli("eval-detect --images " + at("s") + " --out " + at("a.csv")).code, 0);
    ASSERT_EQ(sushi_cli("--seed 3 eval-detect --synth-count 2 --out " + at("b.csv")).code, 0);
    const std::string a = slurp(dir / "a.csv");
    EXPECT_EQ(a.rfind("image,stage,true_positives,false_positives,ground_truth,precision,recall\n", 0), 0u);
    EXPECT_NE(a.find("total,after,"), std::string::npos);
    // PNG round trip quantizes, so only the synthetic path is compared bitwise
    ASSERT_EQ(sushi_cli("--seed 3 eval-detect --synth-count 2 --out " + at("c.csv")).code, 0);
    EXPECT_EQ(slurp(dir / "b.csv"), slurp(dir / "c.csv"));
}

TEST_F(Cli, TrainClassifyAndEvaluate) {
    ASSERT_EQ(sushi_cli("--seed 4 synth --out " + at("ds") + " --patches 40").code, 0);
    const CliRun t = sushi_cli("--seed 4 train --dataset " + at("ds") + " --epochs 1 --model-out " + at("m.model") +
                            " --log " + at("log.csv"));
    ASSERT_EQ(t.code, 0) << t.out;
    EXPECT_EQ(slurp(dir / "log.csv").rfind("epoch,train_loss,val_loss,val_accuracy\n1,", 0), 0u);
    EXPECT_NO_THROW(load_model(at("m.model")));

    const CliRun e = sushi_cli("eval-classify --model " + at("m.model") + " --dataset " + at("ds") + " --out " +
                            at("conf.csv") + " --heatmap " + at("heat.png"));
    ASSERT_EQ(e.code, 0) << e.out;
    EXPECT_EQ(slurp(dir / "conf.csv").rfind("true\\predicted,red,brown,", 0), 0u);
    EXPECT_EQ(read_image(at("heat.png")).width(), 8 * 32);

    write_png(at("scene.png"), render(random_scene(6)).image);
    const CliRun b = sushi_cli("--json bill " + at("scene.png") + " --model " + at("m.model"));
    ASSERT_EQ(b.code, 0) << b.out;
    const auto j = nlohmann::json::parse(b.out);
    std::int64_t sum = 0;
    for (const auto& d : j["dishes"]) sum += d["price"].get<std::int64_t>();
    EXPECT_EQ(j["total"].get<std::int64_t>(), sum);
    const CliRun c = sushi_cli("classify " + at("scene.png") + " --model " + at("m.model"));
    EXPECT_EQ(c.code, 0);
    EXPECT_NE(c.out.find("dish 1:"), std::string::npos);
}

TEST_F(Cli, ConfigFileIsApplied) {
    std::ofstream(at("c.json")) << R"({"pipeline": {"reconstruct": false}})";
    std::ofstream(at("bad.json")) << R"({"pipeline": {"nope": 1}})";
    write_png(at("scene.png"), render_occluded(random_scene(5), 0.2).image);
    const CliRun with = sushi_cli("detect " + at("scene.png"));
    const CliRun without = sushi_cli("--config " + at("c.json") + " detect " + at("scene.png"));
    EXPECT_NE(with.out.find("(reconstructed)"), std::string::npos);
    EXPECT_EQ(without.out.find("(reconstructed)"), std::string::npos);
    EXPECT_EQ(sushi_cli("--config " + at("bad.json") + " detect " + at("scene.png")).code, 1);
}
