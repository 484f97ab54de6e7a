#ifndef TRAFFIC_SDLSTM_HPP
#define TRAFFIC_SDLSTM_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "traffic/errors.hpp"
#include "traffic/rng.hpp"
#include "traffic/series.hpp"

namespace traffic {

// Row-major dense matrix; all the shapes here are tiny.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

using Vec = std::vector<double>;

// Weights for the gated recurrence plus the scalar readout head. Gates
// carry no bias terms; the readout does.
struct LstmParams {
    int hidden_size = 0;
    int input_size = 1;
    Mat w_xi, w_xf, w_xo, w_xc;  // hidden x input
    Mat w_hi, w_hf, w_ho, w_hc;  // hidden x hidden
    Vec w_co;                    // diagonal peephole on the output gate
    Vec w_out;                   // 1 x hidden readout
    double b_out = 0.0;

    static LstmParams zeros(int hidden, int input = 1);
    void check_shapes() const;  // throws ShapeMismatch

    // Elementwise traversal in a fixed order; used by the optimizer and
    // the finite-difference harness.
    std::size_t flat_size() const;
    double get_flat(std::size_t i) const;
    void set_flat(std::size_t i, double v);
    void add_scaled(const LstmParams& other, double scale);
};

struct LstmState {
    Vec h;
    Vec c;
};

// Per-step activations retained for backpropagation.
struct GateCache {
    Vec x, h_prev, c_prev;
    Vec i, f, o, g, c, tanh_c;
};

struct SdLstmModel {
    LstmParams params;
    double dropout_p = 0.05;   // the clamped singularity ratio
    NormParams norm;
    int input_window = 24;
    int interval = kHour;
    std::vector<double> epoch_loss;  // training MSE per epoch
};

struct TrainConfig {
    int epochs = 200;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    int input_window = 24;
    int hidden_size = 16;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 32;
    // Singularity detector settings feeding the dropout probability.
    int detector_window = 25;
    double detector_k = 3.0;
    double p_min = 0.05;
    double p_max = 0.5;
};

// One step of the gated recurrence. The output gate reads the current
// cell state through the diagonal peephole, so c is computed before o.
std::pair<LstmState, GateCache> forward_step(const LstmParams& params,
                                             const Vec& x_t,
                                             const LstmState& prev);

// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
// Identity outside training mode.
Vec sd_dropout(const Vec& h, double p, bool training, Rng& rng);

// One-step-ahead forecast from the last input_window samples.
double predict_next(const SdLstmModel& model, const TrafficSeries& history);

struct TrainingWindow {
    std::vector<double> inputs;  // normalized, length input_window
    double target = 0.0;         // normalized next value
};

// Mean squared error over the batch plus exact gradients by
// backpropagation through time. Dropout masks are drawn from `seed`, so
// the same seed gives the same masks and gradients.
std::pair<double, LstmParams> loss_and_gradients(
    const LstmParams& params, const std::vector<TrainingWindow>& batch,
    double dropout_p, std::uint64_t seed);

// Fits a model on an hourly series: dropout probability from the
// singularity ratio, then Adam over sliding windows.
SdLstmModel train(const TrafficSeries& series, const TrainConfig& config);

// Continues training an existing model on (typically extended) data,
// recomputing the dropout probability and normalization first.
SdLstmModel resume_training(const SdLstmModel& model, const TrafficSeries& series,
                            const TrainConfig& config, int epochs);

}  // namespace traffic

#endif
