#include "segstereo/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <ostream>
#include <stdexcept>

#include "segstereo/checkpoint.hpp"
#include "segstereo/stereo_ops.hpp"

namespace fs = std::filesystem;

namespace segstereo {

double poly_lr(int iter, double base_lr, double power, int max_iter) {
    if (iter < 0 || iter > max_iter)
        throw std::invalid_argument("poly_lr: iter outside [0, max_iter]");
    return base_lr * std::pow(1.0 - double(iter) / double(max_iter), power);
}

void sgd_step(TrainState& state, const std::map<std::string, std::vector<double>>& grads,
              double lr, double momentum, double weight_decay) {
    for (auto& [name, param] : state.model.params) {
        if (state.model.frozen.count(name)) continue;
        auto git = grads.find(name);
        if (git == grads.end())
            throw std::invalid_argument("sgd_step: missing gradient for " + name);
        const std::vector<double>& g = git->second;
        if (g.size() != size_t(param.numel()))
            throw std::invalid_argument("sgd_step: gradient size mismatch for " + name);
        auto& v = state.momentum[name];
        v.resize(g.size(), 0.0);
        for (size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw std::runtime_error("sgd_step: non-finite gradient in " + name);
            v[i] = momentum * v[i] + (g[i] + weight_decay * (*param.data)[i]);
            (*param.data)[i] -= lr * v[i];
        }
    }
}

StereoSample stack_samples(const std::vector<StereoSample>& batch) {
    if (batch.empty()) throw std::invalid_argument("stack_samples: empty batch");
    if (batch.size() == 1) return batch[0];
    auto stack = [&](auto pick) {
        const Tensor& first = pick(batch[0]);
        Tensor out = create({int(batch.size()), first.shape.c, first.shape.h, first.shape.w},
                            Fill::zeros());
        const int64_t per = first.numel();
        for (size_t b = 0; b < batch.size(); ++b) {
            const Tensor& t = pick(batch[b]);
            if (t.shape != first.shape)
                throw std::invalid_argument("stack_samples: shape mismatch");
            std::copy(t.data->begin(), t.data->end(),
                      out.data->begin() + int64_t(b) * per);
        }
        return out;
    };
    StereoSample s;
    s.left = stack([](const StereoSample& x) -> const Tensor& { return x.left; });
    s.right = stack([](const StereoSample& x) -> const Tensor& { return x.right; });
    if (batch[0].gt_disparity)
        s.gt_disparity =
            stack([](const StereoSample& x) -> const Tensor& { return *x.gt_disparity; });
    if (batch[0].gt_valid)
        s.gt_valid = stack([](const StereoSample& x) -> const Tensor& { return *x.gt_valid; });
    if (batch[0].left_labels)
        s.left_labels =
            stack([](const StereoSample& x) -> const Tensor& { return *x.left_labels; });
    if (batch[0].noc_mask)
        s.noc_mask = stack([](const StereoSample& x) -> const Tensor& { return *x.noc_mask; });
    return s;
}

EvalResult eval_model(ModelState& model, const std::vector<StereoSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("eval_model: no samples");
    double epe_noc_sum = 0.0, epe_all_sum = 0.0, d1_noc_sum = 0.0, d1_all_sum = 0.0;
    int64_t cn = 0, ca = 0;
    for (const StereoSample& s : samples) {
        if (!s.gt_disparity) throw std::invalid_argument("eval_model: sample lacks gt");
        Tensor valid = s.gt_valid ? *s.gt_valid
                                  : create(s.gt_disparity->shape, Fill::constant(1.0));
        ForwardResult fr = forward(model, s.left, s.right, nullptr);
        const Tensor* noc = s.noc_mask ? &*s.noc_mask : nullptr;
        EvalResult r = evaluate(fr.disparity, *s.gt_disparity, valid, noc);
        epe_noc_sum += r.epe_noc * double(r.count_noc);
        epe_all_sum += r.epe_all * double(r.count_all);
        d1_noc_sum += r.d1_noc * double(r.count_noc);
        d1_all_sum += r.d1_all * double(r.count_all);
        cn += r.count_noc;
        ca += r.count_all;
    }
    EvalResult out;
    out.count_noc = cn;
    out.count_all = ca;
    out.epe_noc = epe_noc_sum / double(cn);
    out.epe_all = epe_all_sum / double(ca);
    out.d1_noc = d1_noc_sum / double(cn);
    out.d1_all = d1_all_sum / double(ca);
    return out;
}

namespace {

std::map<std::string, std::vector<double>> collect_grads(Tape& tape,
                                                         const ForwardResult& fr,
                                                         const ModelState& model) {
    std::map<std::string, std::vector<double>> grads;
    for (const auto& [name, t] : fr.tracked)
        if (model.frozen.count(name) == 0) grads[name] = tape.grad_values(t);
    return grads;
}

void save_all(const std::string& out_dir, const TrainState& st) {
    save_checkpoint(out_dir + "/model.ckpt", st.model);
    write_model_config(out_dir + "/model.cfg", st.model.config);
    TrainSidecar side;
    side.iter = st.iter;
    for (const auto& [name, t] : st.model.params) side.params[name] = *t.data;
    side.momentum = st.momentum;
    save_train_sidecar(out_dir + "/train_state.bin", side);
}

}  // namespace

TrainState train(const TrainConfig& cfg, const std::vector<StereoSample>& train_samples,
                 const std::vector<StereoSample>& eval_samples, const std::string& out_dir,
                 std::ostream* log, bool resume, int stop_iter) {
    if (log) log->precision(17);
    if (stop_iter < 0) stop_iter = cfg.max_iter;
    if (stop_iter > cfg.max_iter)
        throw std::invalid_argument("train: stop_iter beyond max_iter");
    fs::create_directories(out_dir);

    const bool have_labels =
        !train_samples.empty() && train_samples[0].left_labels.has_value();

    TrainState st;
    st.model = build(cfg.model, cfg.seed);

    BatchConfig bc;
    bc.crop_h = cfg.crop_h;
    bc.crop_w = cfg.crop_w;
    bc.resize_lo = cfg.augment ? cfg.resize_lo : 1.0;
    bc.resize_hi = cfg.augment ? cfg.resize_hi : 1.0;
    bc.seed = cfg.seed + 1;
    BatchIterator it(train_samples, bc);

    auto next_batch = [&]() {
        std::vector<StereoSample> batch;
        for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(it.next());
        return stack_samples(batch);
    };

    const int pre_iters = have_labels ? cfg.seg_pretrain_iters : 0;

    if (resume) {
        const TrainSidecar side = load_train_sidecar(out_dir + "/train_state.bin");
        st.iter = int(side.iter);
        for (const auto& [name, vals] : side.params) {
            Tensor& t = st.model.at(name);
            if (vals.size() != size_t(t.numel()))
                throw std::runtime_error("train: sidecar size mismatch for " + name);
            *t.data = vals;
        }
        st.momentum = side.momentum;
        freeze_segmentation(st.model);
        it.skip(int64_t(pre_iters + st.iter) * cfg.batch_size);
    } else {
        // brief segmentation pretraining on the labels, then freeze
        for (int i = 0; i < pre_iters; ++i) {
            StereoSample s = next_batch();
            Tape tape;
            ForwardResult fr = forward(st.model, s.left, s.right, &tape);
            Tensor labels = downsample_labels_nearest(
                *s.left_labels, fr.left_sem_logits.shape.h, fr.left_sem_logits.shape.w);
            Tensor loss = softmax_cross_entropy(fr.left_sem_logits, labels);
            tape.backward(loss);
            std::map<std::string, std::vector<double>> grads;
            for (const auto& [name, t] : fr.tracked)
                if (name.rfind("shallow.", 0) == 0 || name.rfind("seg.", 0) == 0)
                    grads[name] = tape.grad_values(t);
            // restrict the step to the segmentation side
            TrainState sub;
            sub.model = st.model;
            for (const auto& [name, t] : st.model.params)
                if (grads.count(name) == 0) sub.model.frozen.insert(name);
            sub.momentum = std::move(st.momentum);
            sgd_step(sub, grads, cfg.seg_pretrain_lr, cfg.momentum, cfg.weight_decay);
            st.momentum = std::move(sub.momentum);
            if (log)
                (*log) << "phase=seg_pretrain iter=" << i << " ce=" << loss.scalar()
                       << "\n" << std::flush;
        }
        freeze_segmentation(st.model);
    }

    while (st.iter < stop_iter) {
        StereoSample s = next_batch();
        Tape tape;
        ForwardResult fr = forward(st.model, s.left, s.right, &tape);

        TotalLossInputs terms;
        terms.smoothness = smoothness_loss(fr.disparity, cfg.weights.charbonnier);
        if (cfg.mode == TrainMode::Unsupervised) {
            WarpResult w = warp_horizontal(s.right, fr.disparity);
            double mf = 0.0;
            terms.photometric = photometric_loss(w.warped, s.left, w.validity,
                                                 cfg.weights.photometric_threshold, &mf);
            terms.masked_fraction = mf;
        } else {
            if (!s.gt_disparity || !s.gt_valid)
                throw std::invalid_argument("train: supervised mode needs ground truth");
            terms.regression = regression_loss(fr.disparity, *s.gt_disparity, *s.gt_valid);
        }
        if (have_labels && cfg.weights.lambda_seg != 0.0)
            terms.semantic =
                semantic_loss(fr.right_sem_feat, fr.disparity, fr.classifier, *s.left_labels);

        auto [total, rep] = total_loss(cfg.mode, terms, cfg.weights);
        tape.backward(total);
        auto grads = collect_grads(tape, fr, st.model);

        const double lr = poly_lr(st.iter, cfg.base_lr, cfg.power, cfg.max_iter);
        sgd_step(st, grads, lr, cfg.momentum, cfg.weight_decay);
        ++st.iter;

        if (log) {
            (*log) << "phase=train iter=" << st.iter << " lr=" << lr
                   << " total=" << rep.total;
            if (rep.photometric) (*log) << " photometric=" << *rep.photometric;
            if (rep.regression) (*log) << " regression=" << *rep.regression;
            if (rep.smoothness) (*log) << " smoothness=" << *rep.smoothness;
            if (rep.semantic) (*log) << " semantic=" << *rep.semantic;
            (*log) << " masked_fraction=" << rep.masked_fraction << "\n" << std::flush;
        }

        if (!eval_samples.empty() && cfg.eval_every > 0 && st.iter % cfg.eval_every == 0) {
            const EvalResult r = eval_model(st.model, eval_samples);
            if (log)
                (*log) << "phase=eval iter=" << st.iter << " epe_all=" << r.epe_all
                       << " epe_noc=" << r.epe_noc << " d1_all=" << r.d1_all << "\n"
                       << std::flush;
        }
        if (cfg.checkpoint_every > 0 && st.iter % cfg.checkpoint_every == 0)
            save_all(out_dir, st);
    }
    save_all(out_dir, st);
    return st;
}

}  // namespace segstereo
