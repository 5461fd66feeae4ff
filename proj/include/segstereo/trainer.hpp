#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "segstereo/config.hpp"
#include "segstereo/data_io.hpp"
#include "segstereo/losses.hpp"
#include "segstereo/metrics.hpp"
#include "segstereo/model.hpp"

namespace segstereo {

// base_lr * (1 - iter/max_iter)^power.
double poly_lr(int iter, double base_lr, double power, int max_iter);

struct TrainState {
    int iter = 0;
    ModelState model;
    std::map<std::string, std::vector<double>> momentum;
};

// v <- momentum*v + (grad + weight_decay*param); param <- param - lr*v.
// Frozen parameters are untouched; every non-frozen parameter must have a
// gradient, and a NaN gradient aborts naming the parameter.
void sgd_step(TrainState& state, const std::map<std::string, std::vector<double>>& grads,
              double lr, double momentum, double weight_decay);

// Mean EPE (all gt-valid pixels) of the model over the samples.
EvalResult eval_model(ModelState& model, const std::vector<StereoSample>& samples);

// Runs the loop: brief segmentation pretraining on the labels, then frozen-
// segmentation disparity training per cfg.mode. Writes model.ckpt,
// model.cfg and train_state.bin under out_dir; when resume is true the
// sidecar in out_dir continues the exact trajectory. stop_iter < 0 means
// cfg.max_iter (the schedule always uses cfg.max_iter). Log lines are
// key=value, one event per line.
TrainState train(const TrainConfig& cfg, const std::vector<StereoSample>& train_samples,
                 const std::vector<StereoSample>& eval_samples, const std::string& out_dir,
                 std::ostream* log, bool resume = false, int stop_iter = -1);

// Stacks samples along the batch axis (shapes must match).
StereoSample stack_samples(const std::vector<StereoSample>& batch);

}  // namespace segstereo
