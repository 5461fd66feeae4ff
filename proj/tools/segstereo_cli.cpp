#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "segstereo/checkpoint.hpp"
#include "segstereo/config.hpp"
#include "segstereo/data_io.hpp"
#include "segstereo/metrics.hpp"
#include "segstereo/trainer.hpp"

namespace fs = std::filesystem;
using namespace segstereo;

namespace {

std::string sample_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%04d", i);
    return buf;
}

int cmd_gen_data(const std::string& out, int count, uint64_t seed, int height, int width,
                 int classes) {
    fs::create_directories(out);
    std::vector<std::string> dirs;
    for (int i = 0; i < count; ++i) {
        SceneConfig sc;
        sc.h = height;
        sc.w = width;
        sc.num_classes = classes;
        sc.num_planes = std::min(classes, 3);
        sc.disp_lo = 1.0;
        sc.disp_hi = std::min(20.0, width / 6.0);
        sc.seed = seed * 1000003ULL + uint64_t(i);
        const std::string dir = out + "/" + sample_name(i);
        save_sample(dir, gen_scene(sc));
        dirs.push_back(dir);
    }
    write_manifest(out + "/manifest.txt", dirs);
    std::cout << "wrote " << count << " samples under " << out << "\n";
    return 0;
}

std::vector<StereoSample> load_all(const std::string& manifest) {
    std::vector<StereoSample> samples;
    for (const std::string& dir : read_manifest(manifest)) samples.push_back(load_sample(dir));
    return samples;
}

int cmd_train(const std::string& config_path, const std::string& data,
              const std::string& out, const std::vector<std::string>& overrides,
              bool resume) {
    KeyValueConfig kv =
        config_path.empty() ? KeyValueConfig{} : KeyValueConfig::parse_file(config_path);
    for (const std::string& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got " + ov);
        kv.set(ov.substr(0, eq), ov.substr(eq + 1));
    }
    const TrainConfig cfg = train_config_from(kv);
    const std::vector<StereoSample> samples = load_all(data);
    train(cfg, samples, samples, out, &std::cout, resume);
    std::cout << "checkpoint written to " << out << "/model.ckpt\n";
    return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& data,
                const std::string& out) {
    const std::string cfg_path = (fs::path(checkpoint).parent_path() / "model.cfg").string();
    ModelState model = build(read_model_config(cfg_path), 0);
    load_checkpoint(checkpoint, model);
    const std::vector<std::string> dirs = read_manifest(data);
    for (const std::string& dir : dirs) {
        const StereoSample s = load_sample(dir);
        const ForwardResult fr = forward(model, s.left, s.right, nullptr);
        const std::string name = fs::path(dir).filename().string();
        fs::create_directories(out + "/" + name);
        write_kitti_disparity(out + "/" + name + "/disp.png", fr.disparity);
        write_pfm(out + "/" + name + "/disp.pfm", fr.disparity);
    }
    std::cout << "wrote " << dirs.size() << " predictions under " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt, bool use_noc) {
    double epe_noc_sum = 0, epe_all_sum = 0, d1_noc_sum = 0, d1_all_sum = 0;
    int64_t cn = 0, ca = 0;
    for (const std::string& dir : read_manifest(gt)) {
        const std::string name = fs::path(dir).filename().string();
        auto [p, pv] = read_kitti_disparity(pred + "/" + name + "/disp.png");
        auto [g, gv] = read_kitti_disparity(dir + "/gt_disp.png");
        Tensor valid = mul(pv, gv);
        std::optional<Tensor> noc;
        if (use_noc) noc = scale(read_png8(dir + "/noc.png"), 1.0 / 255.0);
        const EvalResult r = evaluate(p, g, valid, noc ? &*noc : nullptr);
        epe_noc_sum += r.epe_noc * double(r.count_noc);
        epe_all_sum += r.epe_all * double(r.count_all);
        d1_noc_sum += r.d1_noc * double(r.count_noc);
        d1_all_sum += r.d1_all * double(r.count_all);
        cn += r.count_noc;
        ca += r.count_all;
    }
    if (ca == 0) throw std::runtime_error("eval: no evaluated pixels");
    EvalResult total;
    total.epe_noc = epe_noc_sum / double(cn);
    total.epe_all = epe_all_sum / double(ca);
    total.d1_noc = d1_noc_sum / double(cn);
    total.d1_all = d1_all_sum / double(ca);
    total.count_noc = cn;
    total.count_all = ca;
    std::cout << format_table(total) << format_kv(total);
    return 0;
}

// Blue (far) through green to red (near), display only.
void colormap(double t, double rgb[3]) {
    t = std::min(1.0, std::max(0.0, t));
    rgb[0] = 255.0 * std::min(1.0, std::max(0.0, 1.5 - std::fabs(4.0 * t - 3.0)));
    rgb[1] = 255.0 * std::min(1.0, std::max(0.0, 1.5 - std::fabs(4.0 * t - 2.0)));
    rgb[2] = 255.0 * std::min(1.0, std::max(0.0, 1.5 - std::fabs(4.0 * t - 1.0)));
}

Tensor read_disparity_any(const std::string& path) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".pfm") return read_pfm(path);
    return read_kitti_disparity(path).first;
}

int cmd_render(const std::string& disparity, const std::string& out, double max_disp,
               const std::string& gt_path) {
    const Tensor d = read_disparity_any(disparity);
    const int h = d.shape.h, w = d.shape.w;
    Tensor img = create({1, 3, h, w}, Fill::zeros());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double rgb[3];
            colormap(d.at(0, 0, y, x) / max_disp, rgb);
            for (int c = 0; c < 3; ++c) (*img.data)[img.index(0, c, y, x)] = rgb[c];
        }
    write_png8(out, img);
    if (!gt_path.empty()) {
        const Tensor g = read_disparity_any(gt_path);
        Tensor err = create({1, 3, h, w}, Fill::zeros());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double rgb[3];
                colormap(std::fabs(d.at(0, 0, y, x) - g.at(0, 0, y, x)) / 3.0, rgb);
                for (int c = 0; c < 3; ++c) (*err.data)[err.index(0, c, y, x)] = rgb[c];
            }
        const std::string err_path =
            (fs::path(out).parent_path() / ("err_" + fs::path(out).filename().string()))
                .string();
        write_png8(err_path, err);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"miniature semantic-guided stereo disparity toolkit"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "generate synthetic stereo scenes");
    std::string gen_out;
    int gen_count = 20, gen_h = 64, gen_w = 128, gen_classes = 4;
    uint64_t gen_seed = 0;
    gen->add_option("--out", gen_out)->required();
    gen->add_option("--count", gen_count);
    gen->add_option("--seed", gen_seed);
    gen->add_option("--height", gen_h);
    gen->add_option("--width", gen_w);
    gen->add_option("--classes", gen_classes);

    auto* tr = app.add_subcommand("train", "train a model");
    std::string tr_config, tr_data, tr_out;
    std::vector<std::string> tr_sets;
    bool tr_resume = false;
    tr->add_option("--config", tr_config);
    tr->add_option("--data", tr_data)->required();
    tr->add_option("--out", tr_out)->required();
    tr->add_option("--set", tr_sets, "override a config key (key=value)");
    tr->add_flag("--resume", tr_resume);

    auto* pr = app.add_subcommand("predict", "write disparity predictions");
    std::string pr_ckpt, pr_data, pr_out;
    pr->add_option("--checkpoint", pr_ckpt)->required();
    pr->add_option("--data", pr_data)->required();
    pr->add_option("--out", pr_out)->required();

    auto* ev = app.add_subcommand("eval", "compare predictions against ground truth");
    std::string ev_pred, ev_gt;
    bool ev_noc = false;
    ev->add_option("--pred", ev_pred)->required();
    ev->add_option("--gt", ev_gt)->required();
    ev->add_flag("--noc", ev_noc);

    auto* re = app.add_subcommand("render", "write a color-mapped disparity image");
    std::string re_disp, re_out, re_gt;
    double re_max = 24.0;
    re->add_option("--disparity", re_disp)->required();
    re->add_option("--out", re_out)->required();
    re->add_option("--max-disp", re_max);
    re->add_option("--gt", re_gt, "also write an error map against this map");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_data(gen_out, gen_count, gen_seed, gen_h, gen_w, gen_classes);
        if (tr->parsed()) return cmd_train(tr_config, tr_data, tr_out, tr_sets, tr_resume);
        if (pr->parsed()) return cmd_predict(pr_ckpt, pr_data, pr_out);
        if (ev->parsed()) return cmd_eval(ev_pred, ev_gt, ev_noc);
        if (re->parsed()) return cmd_render(re_disp, re_out, re_max, re_gt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
