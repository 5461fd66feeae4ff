#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "segstereo/checkpoint.hpp"
#include "segstereo/config.hpp"
#include "segstereo/trainer.hpp"

using namespace segstereo;
namespace fs = std::filesystem;

namespace {

std::string tmpdir() {
    static int counter = 0;
    std::string d =
        (fs::temp_directory_path() / ("segstereo_train_" + std::to_string(counter++)))
            .string();
    fs::create_directories(d);
    return d;
}

TrainConfig tiny_cfg() {
    TrainConfig c;
    c.model.shallow_channels = 4;
    c.model.transform_channels = 8;
    c.model.sem_channels = 4;
    c.model.max_disp = 4;
    c.model.encoder_blocks = 1;
    c.model.num_classes = 3;
    c.crop_h = 16;
    c.crop_w = 32;
    c.batch_size = 1;
    c.augment = false;
    c.seg_pretrain_iters = 2;
    c.checkpoint_every = 0;
    c.eval_every = 0;
    c.max_iter = 12;
    c.base_lr = 1e-5;
    c.seg_pretrain_lr = 1e-4;
    c.seed = 3;
    return c;
}

std::vector<StereoSample> tiny_scenes(int count, uint64_t seed0) {
    std::vector<StereoSample> out;
    for (int i = 0; i < count; ++i) {
        SceneConfig sc;
        sc.h = 16;
        sc.w = 32;
        sc.num_planes = 2;
        sc.disp_lo = 0.5;
        sc.disp_hi = 3.0;
        sc.num_classes = 3;
        sc.seed = seed0 + uint64_t(i);
        out.push_back(gen_scene(sc));
    }
    return out;
}

double parse_field(const std::string& line, const std::string& key) {
    const std::string tag = " " + key + "=";
    const size_t p = line.find(tag);
    REQUIRE(p != std::string::npos);
    return std::stod(line.substr(p + tag.size()));
}

std::string file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("poly schedule endpoints and midpoint") {
    CHECK(poly_lr(0, 0.01, 0.9, 1000) == doctest::Approx(0.01));
    CHECK(poly_lr(500, 0.01, 0.9, 1000) == doctest::Approx(0.005359).epsilon(1e-4));
    CHECK(std::fabs(poly_lr(500, 0.01, 0.9, 1000) - 0.01 * std::pow(0.5, 0.9)) < 1e-12);
    CHECK(poly_lr(1000, 0.01, 0.9, 1000) == 0.0);
    CHECK_THROWS(poly_lr(1001, 0.01, 0.9, 1000));
    CHECK_THROWS(poly_lr(-1, 0.01, 0.9, 1000));
}

TEST_CASE("sgd without momentum or decay is plain descent") {
    TrainState st;
    st.model = build(ModelConfig{4, 8, 4, 4, 1, 3, 3, true, true}, 1);
    const std::string name = "reg.bias";
    const double before = (*st.model.at(name).data)[0];
    std::map<std::string, std::vector<double>> grads;
    for (const auto& [n, t] : st.model.params)
        grads[n] = std::vector<double>(size_t(t.numel()), 0.0);
    grads[name][0] = 2.0;
    sgd_step(st, grads, 0.1, 0.0, 0.0);
    CHECK((*st.model.at(name).data)[0] == doctest::Approx(before - 0.2));
}

TEST_CASE("weight decay alone shrinks parameters") {
    TrainState st;
    st.model = build(ModelConfig{4, 8, 4, 4, 1, 3, 3, true, true}, 2);
    std::map<std::string, std::vector<double>> grads;
    for (const auto& [n, t] : st.model.params)
        grads[n] = std::vector<double>(size_t(t.numel()), 0.0);
    const std::vector<double> before = *st.model.at("reg.kernel").data;
    sgd_step(st, grads, 0.5, 0.0, 0.01);
    const std::vector<double>& after = *st.model.at("reg.kernel").data;
    for (size_t i = 0; i < before.size(); ++i)
        CHECK(after[i] == doctest::Approx(before[i] * (1.0 - 0.5 * 0.01)));
}

TEST_CASE("momentum accumulates over steps") {
    TrainState st;
    st.model = build(ModelConfig{4, 8, 4, 4, 1, 3, 3, true, true}, 3);
    std::map<std::string, std::vector<double>> grads;
    for (const auto& [n, t] : st.model.params)
        grads[n] = std::vector<double>(size_t(t.numel()), 0.0);
    grads["reg.bias"][0] = 1.0;
    const double p0 = (*st.model.at("reg.bias").data)[0];
    sgd_step(st, grads, 0.1, 0.9, 0.0);  // v=1, p=p0-0.1
    sgd_step(st, grads, 0.1, 0.9, 0.0);  // v=1.9, p=p0-0.1-0.19
    CHECK((*st.model.at("reg.bias").data)[0] == doctest::Approx(p0 - 0.29));
}

TEST_CASE("sgd guards: frozen, missing, non-finite") {
    TrainState st;
    st.model = build(ModelConfig{4, 8, 4, 4, 1, 3, 3, true, true}, 4);
    freeze_segmentation(st.model);
    std::map<std::string, std::vector<double>> grads;
    for (const auto& [n, t] : st.model.params)
        if (st.model.frozen.count(n) == 0)
            grads[n] = std::vector<double>(size_t(t.numel()), 0.1);
    const std::vector<double> seg_before = *st.model.at("seg.0.kernel").data;
    sgd_step(st, grads, 0.1, 0.9, 0.0001);
    CHECK(*st.model.at("seg.0.kernel").data == seg_before);

    auto missing = grads;
    missing.erase("reg.bias");
    CHECK_THROWS(sgd_step(st, missing, 0.1, 0.9, 0.0));

    auto bad = grads;
    bad["reg.bias"][0] = std::nan("");
    CHECK_THROWS_WITH_AS(sgd_step(st, bad, 0.1, 0.9, 0.0),
                         doctest::Contains("reg.bias"), std::runtime_error);
}

TEST_CASE("unsupervised training logs a consistent loss decomposition") {
    TrainConfig cfg = tiny_cfg();
    cfg.max_iter = 3;
    auto scenes = tiny_scenes(2, 100);
    std::ostringstream log;
    TrainState st = train(cfg, scenes, {}, tmpdir(), &log, false);
    CHECK(st.iter == 3);
    int seen = 0;
    std::istringstream lines(log.str());
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind("phase=train", 0) != 0) continue;
        ++seen;
        const double total = parse_field(line, "total");
        const double recon = cfg.weights.lambda_p * parse_field(line, "photometric") +
                             cfg.weights.lambda_s * parse_field(line, "smoothness") +
                             cfg.weights.lambda_seg * parse_field(line, "semantic");
        CHECK(std::fabs(total - recon) < 1e-6);
    }
    CHECK(seen == 3);
}

TEST_CASE("supervised loss decreases on early iterations") {
    TrainConfig cfg = tiny_cfg();
    cfg.mode = TrainMode::Supervised;
    cfg.weights.lambda_seg = 1.0;
    cfg.max_iter = 10;
    cfg.base_lr = 2e-6;
    cfg.momentum = 0.0;
    auto scenes = tiny_scenes(1, 200);
    std::ostringstream log;
    train(cfg, scenes, {}, tmpdir(), &log, false);
    std::vector<double> reg;
    std::istringstream lines(log.str());
    std::string line;
    while (std::getline(lines, line))
        if (line.rfind("phase=train", 0) == 0)
            reg.push_back(parse_field(line, "regression"));
    REQUIRE(reg.size() == 10);
    for (size_t i = 1; i < reg.size(); ++i) CHECK(reg[i] < reg[i - 1]);
}

TEST_CASE("model checkpoint round trip is byte-exact") {
    const std::string dir = tmpdir();
    ModelState a = build(ModelConfig{4, 8, 4, 4, 1, 3, 3, true, true}, 11);
    save_checkpoint(dir + "/a.ckpt", a);
    ModelState b = build(a.config, 999);
    load_checkpoint(dir + "/a.ckpt", b);
    save_checkpoint(dir + "/b.ckpt", b);
    CHECK(file_bytes(dir + "/a.ckpt") == file_bytes(dir + "/b.ckpt"));

    write_model_config(dir + "/m.cfg", a.config);
    const ModelConfig rc = read_model_config(dir + "/m.cfg");
    CHECK(rc.shallow_channels == a.config.shallow_channels);
    CHECK(rc.embed_semantics == a.config.embed_semantics);
    CHECK(rc.max_disp == a.config.max_disp);

    std::ofstream(dir + "/junk.ckpt") << "XXXXXXXXjunk";
    ModelState c = build(a.config, 0);
    CHECK_THROWS(load_checkpoint(dir + "/junk.ckpt", c));
}

TEST_CASE("training sidecar round trip keeps full precision") {
    const std::string dir = tmpdir();
    TrainSidecar s;
    s.iter = 77;
    s.params["a"] = {1.0 / 3.0, -2.5e-17, 1e300};
    s.momentum["a"] = {0.1234567890123456789, 0.0};
    save_train_sidecar(dir + "/t.bin", s);
    const TrainSidecar r = load_train_sidecar(dir + "/t.bin");
    CHECK(r.iter == 77);
    CHECK(r.params.at("a") == s.params.at("a"));
    CHECK(r.momentum.at("a") == s.momentum.at("a"));
}

TEST_CASE("checkpoint resume continues the exact trajectory") {
    TrainConfig cfg = tiny_cfg();
    cfg.max_iter = 6;
    auto scenes = tiny_scenes(3, 300);

    const std::string full_dir = tmpdir();
    TrainState full = train(cfg, scenes, {}, full_dir, nullptr, false);

    const std::string split_dir = tmpdir();
    train(cfg, scenes, {}, split_dir, nullptr, false, 3);
    TrainState resumed = train(cfg, scenes, {}, split_dir, nullptr, true);

    CHECK(resumed.iter == full.iter);
    for (const auto& [name, t] : full.model.params)
        CHECK(*t.data == *resumed.model.at(name).data);
    for (const auto& [name, v] : full.momentum) CHECK(v == resumed.momentum.at(name));
}

TEST_CASE("frozen segmentation parameters never move during training") {
    TrainConfig cfg = tiny_cfg();
    cfg.max_iter = 5;
    auto scenes = tiny_scenes(2, 400);
    const std::string dir = tmpdir();
    train(cfg, scenes, {}, dir, nullptr, false, 0);  // pretrain only, then save
    const TrainSidecar before = load_train_sidecar(dir + "/train_state.bin");
    TrainState st = train(cfg, scenes, {}, dir, nullptr, true);  // 5 more iters
    for (const auto& [name, t] : st.model.params) {
        if (name.rfind("shallow.", 0) == 0 || name.rfind("seg.", 0) == 0) {
            CHECK(*t.data == before.params.at(name));
        }
    }
    // and the trainable side did move
    CHECK(*st.model.at("reg.kernel").data != before.params.at("reg.kernel"));
}

TEST_CASE("config file drives the trainer settings") {
    const KeyValueConfig kv = KeyValueConfig::parse_string(
        "# comment\n"
        "mode = supervised\n"
        "base_lr = 0.004   # inline comment\n"
        "max_iter = 42\n"
        "embed_semantics = false\n"
        "lambda_s = 0.2\n");
    const TrainConfig c = train_config_from(kv);
    CHECK(c.mode == TrainMode::Supervised);
    CHECK(c.base_lr == doctest::Approx(0.004));
    CHECK(c.max_iter == 42);
    CHECK_FALSE(c.model.embed_semantics);
    CHECK(c.weights.lambda_s == doctest::Approx(0.2));
    CHECK(c.weights.lambda_seg == doctest::Approx(1.0));  // supervised pairing

    CHECK_THROWS(train_config_from(KeyValueConfig::parse_string("typo_key = 3\n")));
    CHECK_THROWS(train_config_from(KeyValueConfig::parse_string("no equals sign\n")));
    CHECK_THROWS(train_config_from(KeyValueConfig::parse_string("max_iter = 0\n")));
}
