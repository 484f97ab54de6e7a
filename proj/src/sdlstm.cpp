#include "traffic/sdlstm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace traffic {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void matvec(const Mat& m, const Vec& v, Vec& out) {
    for (int r = 0; r < m.rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < m.cols; ++c) s += m(r, c) * v[c];
        out[r] += s;
    }
}

// out += M^T v
void matvec_t(const Mat& m, const Vec& v, Vec& out) {
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out[c] += m(r, c) * v[r];
}

// m += a (outer) b
void outer_acc(Mat& m, const Vec& a, const Vec& b) {
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) m(r, c) += a[r] * b[c];
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t z = a;
    z ^= b + 0x9E3779B97F4A7C15ULL + (z << 6) + (z >> 2);
    z ^= c + 0x9E3779B97F4A7C15ULL + (z << 6) + (z >> 2);
    return z;
}

}  // namespace

LstmParams LstmParams::zeros(int hidden, int input) {
    LstmParams p;
    p.hidden_size = hidden;
    p.input_size = input;
    p.w_xi = p.w_xf = p.w_xo = p.w_xc = Mat(hidden, input);
    p.w_hi = p.w_hf = p.w_ho = p.w_hc = Mat(hidden, hidden);
    p.w_co.assign(hidden, 0.0);
    p.w_out.assign(hidden, 0.0);
    p.b_out = 0.0;
    return p;
}

void LstmParams::check_shapes() const {
    auto bad = [&](const Mat& m, int r, int c) { return m.rows != r || m.cols != c; };
    if (hidden_size <= 0 || input_size <= 0 ||
        bad(w_xi, hidden_size, input_size) || bad(w_xf, hidden_size, input_size) ||
        bad(w_xo, hidden_size, input_size) || bad(w_xc, hidden_size, input_size) ||
        bad(w_hi, hidden_size, hidden_size) || bad(w_hf, hidden_size, hidden_size) ||
        bad(w_ho, hidden_size, hidden_size) || bad(w_hc, hidden_size, hidden_size) ||
        static_cast<int>(w_co.size()) != hidden_size ||
        static_cast<int>(w_out.size()) != hidden_size)
        throw ShapeMismatch("inconsistent parameter shapes for hidden_size " +
                            std::to_string(hidden_size));
}

std::size_t LstmParams::flat_size() const {
    return 4 * static_cast<std::size_t>(hidden_size) * input_size +
           4 * static_cast<std::size_t>(hidden_size) * hidden_size +
           2 * static_cast<std::size_t>(hidden_size) + 1;
}

namespace {
// Fixed traversal order for the flat view.
template <typename P, typename F>
void for_each_tensor(P& p, F&& f) {
    f(p.w_xi.a); f(p.w_xf.a); f(p.w_xo.a); f(p.w_xc.a);
    f(p.w_hi.a); f(p.w_hf.a); f(p.w_ho.a); f(p.w_hc.a);
    f(p.w_co); f(p.w_out);
}
}  // namespace

double LstmParams::get_flat(std::size_t i) const {
    double out = 0.0;
    std::size_t off = 0;
    bool found = false;
    for_each_tensor(*this, [&](const std::vector<double>& t) {
        if (!found && i < off + t.size()) {
            out = t[i - off];
            found = true;
        }
        off += t.size();
    });
    if (!found) out = b_out;
    return out;
}

void LstmParams::set_flat(std::size_t i, double v) {
    std::size_t off = 0;
    bool found = false;
    for_each_tensor(*this, [&](std::vector<double>& t) {
        if (!found && i < off + t.size()) {
            t[i - off] = v;
            found = true;
        }
        off += t.size();
    });
    if (!found) b_out = v;
}

void LstmParams::add_scaled(const LstmParams& other, double scale) {
    auto it = [&](std::vector<double>& dst, const std::vector<double>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    };
    it(w_xi.a, other.w_xi.a); it(w_xf.a, other.w_xf.a);
    it(w_xo.a, other.w_xo.a); it(w_xc.a, other.w_xc.a);
    it(w_hi.a, other.w_hi.a); it(w_hf.a, other.w_hf.a);
    it(w_ho.a, other.w_ho.a); it(w_hc.a, other.w_hc.a);
    it(w_co, other.w_co); it(w_out, other.w_out);
    b_out += scale * other.b_out;
}

std::pair<LstmState, GateCache> forward_step(const LstmParams& params,
                                             const Vec& x_t,
                                             const LstmState& prev) {
    params.check_shapes();
    const int h = params.hidden_size;
    if (static_cast<int>(x_t.size()) != params.input_size ||
        static_cast<int>(prev.h.size()) != h || static_cast<int>(prev.c.size()) != h)
        throw ShapeMismatch("input or state size does not match the parameters");

    GateCache cache;
    cache.x = x_t;
    cache.h_prev = prev.h;
    cache.c_prev = prev.c;

    Vec a_i(h, 0.0), a_f(h, 0.0), a_g(h, 0.0), a_o(h, 0.0);
    matvec(params.w_hi, prev.h, a_i); matvec(params.w_xi, x_t, a_i);
    matvec(params.w_hf, prev.h, a_f); matvec(params.w_xf, x_t, a_f);
    matvec(params.w_hc, prev.h, a_g); matvec(params.w_xc, x_t, a_g);
    matvec(params.w_ho, prev.h, a_o); matvec(params.w_xo, x_t, a_o);

    cache.i.resize(h); cache.f.resize(h); cache.g.resize(h);
    cache.c.resize(h); cache.o.resize(h); cache.tanh_c.resize(h);
    LstmState next;
    next.h.resize(h);
    next.c.resize(h);
    for (int j = 0; j < h; ++j) {
        cache.i[j] = sigmoid(a_i[j]);
        cache.f[j] = sigmoid(a_f[j]);
        cache.g[j] = std::tanh(a_g[j]);
        cache.c[j] = cache.f[j] * prev.c[j] + cache.i[j] * cache.g[j];
        // the output gate reads the cell state just computed
        cache.o[j] = sigmoid(a_o[j] + params.w_co[j] * cache.c[j]);
        cache.tanh_c[j] = std::tanh(cache.c[j]);
        next.c[j] = cache.c[j];
        next.h[j] = cache.o[j] * cache.tanh_c[j];
    }
    return {next, cache};
}

Vec sd_dropout(const Vec& h, double p, bool training, Rng& rng) {
    if (!training || p == 0.0) return h;
    Vec out(h.size());
    const double scale = 1.0 / (1.0 - p);
    for (std::size_t j = 0; j < h.size(); ++j)
        out[j] = rng.uniform() < p ? 0.0 : h[j] * scale;
    return out;
}

double predict_next(const SdLstmModel& model, const TrafficSeries& history) {
    if (history.interval != model.interval)
        throw IntervalMismatch("model expects " + std::to_string(model.interval) +
                               " s series, got " + std::to_string(history.interval));
    const std::size_t w = static_cast<std::size_t>(model.input_window);
    if (history.size() < w)
        throw SeriesTooShort("need at least " + std::to_string(w) +
                             " samples of history, got " + std::to_string(history.size()));

    const double span = model.norm.max - model.norm.min;
    LstmState state{Vec(model.params.hidden_size, 0.0), Vec(model.params.hidden_size, 0.0)};
    Vec x(1);
    for (std::size_t t = history.size() - w; t < history.size(); ++t) {
        x[0] = (history.counts[t] - model.norm.min) / span;
        state = forward_step(model.params, x, state).first;
    }
    double y = model.params.b_out;
    for (int j = 0; j < model.params.hidden_size; ++j)
        y += model.params.w_out[j] * state.h[j];
    return std::max(0.0, denormalize_value(y, model.norm));
}

std::pair<double, LstmParams> loss_and_gradients(
    const LstmParams& params, const std::vector<TrainingWindow>& batch,
    double dropout_p, std::uint64_t seed) {
    params.check_shapes();
    const int h = params.hidden_size;
    LstmParams grads = LstmParams::zeros(h, params.input_size);
    if (batch.empty()) return {0.0, grads};

    Rng rng(seed);
    const double keep_scale = dropout_p > 0.0 ? 1.0 / (1.0 - dropout_p) : 1.0;
    double loss = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    std::vector<GateCache> caches;
    Vec x(1), mask(h);
    for (const TrainingWindow& win : batch) {
        const std::size_t T = win.inputs.size();
        caches.clear();
        caches.reserve(T);
        LstmState state{Vec(h, 0.0), Vec(h, 0.0)};
        for (std::size_t t = 0; t < T; ++t) {
            x[0] = win.inputs[t];
            auto [next, cache] = forward_step(params, x, state);
            state = std::move(next);
            caches.push_back(std::move(cache));
        }
        // dropout mask on the final hidden vector, one draw per unit
        for (int j = 0; j < h; ++j)
            mask[j] = (dropout_p > 0.0 && rng.uniform() < dropout_p) ? 0.0 : keep_scale;

        double y = params.b_out;
        for (int j = 0; j < h; ++j) y += params.w_out[j] * state.h[j] * mask[j];
        const double err = y - win.target;
        loss += err * err * inv_b;

        // backward
        const double dy = 2.0 * err * inv_b;
        Vec dh(h), dc_carry(h, 0.0);
        for (int j = 0; j < h; ++j) {
            grads.w_out[j] += dy * state.h[j] * mask[j];
            dh[j] = dy * params.w_out[j] * mask[j];
        }
        grads.b_out += dy;

        Vec da_i(h), da_f(h), da_o(h), da_g(h);
        for (std::size_t ti = T; ti-- > 0;) {
            const GateCache& cc = caches[ti];
            Vec dh_prev(h, 0.0), dc_prev(h, 0.0);
            for (int j = 0; j < h; ++j) {
                const double do_j = dh[j] * cc.tanh_c[j];
                da_o[j] = do_j * cc.o[j] * (1.0 - cc.o[j]);
                const double dc = dc_carry[j] +
                                  dh[j] * cc.o[j] * (1.0 - cc.tanh_c[j] * cc.tanh_c[j]) +
                                  da_o[j] * params.w_co[j];
                grads.w_co[j] += da_o[j] * cc.c[j];
                da_i[j] = dc * cc.g[j] * cc.i[j] * (1.0 - cc.i[j]);
                da_f[j] = dc * cc.c_prev[j] * cc.f[j] * (1.0 - cc.f[j]);
                da_g[j] = dc * cc.i[j] * (1.0 - cc.g[j] * cc.g[j]);
                dc_prev[j] = dc * cc.f[j];
            }
            outer_acc(grads.w_xi, da_i, cc.x); outer_acc(grads.w_hi, da_i, cc.h_prev);
            outer_acc(grads.w_xf, da_f, cc.x); outer_acc(grads.w_hf, da_f, cc.h_prev);
            outer_acc(grads.w_xo, da_o, cc.x); outer_acc(grads.w_ho, da_o, cc.h_prev);
            outer_acc(grads.w_xc, da_g, cc.x); outer_acc(grads.w_hc, da_g, cc.h_prev);
            matvec_t(params.w_hi, da_i, dh_prev);
            matvec_t(params.w_hf, da_f, dh_prev);
            matvec_t(params.w_ho, da_o, dh_prev);
            matvec_t(params.w_hc, da_g, dh_prev);
            dh = std::move(dh_prev);
            dc_carry = std::move(dc_prev);
        }
    }
    return {loss, grads};
}

namespace {

std::vector<TrainingWindow> sliding_windows(const std::vector<double>& values,
                                            int input_window) {
    const std::size_t w = static_cast<std::size_t>(input_window);
    if (values.size() < w + 1)
        throw SeriesTooShort("need at least input_window + 1 samples to train");
    std::vector<TrainingWindow> out;
    out.reserve(values.size() - w);
    for (std::size_t t = 0; t + w < values.size(); ++t) {
        TrainingWindow win;
        win.inputs.assign(values.begin() + t, values.begin() + t + w);
        win.target = values[t + w];
        out.push_back(std::move(win));
    }
    return out;
}

void run_adam(SdLstmModel& model, const std::vector<TrainingWindow>& windows,
              const TrainConfig& config, int epochs, Rng& rng) {
    const std::size_t flat = model.params.flat_size();
    std::vector<double> m(flat, 0.0), v(flat, 0.0);
    std::int64_t step = 0;

    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<TrainingWindow> batch;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);

        double epoch_sq_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t pos = 0; pos < order.size(); pos += config.batch_size) {
            batch.clear();
            const std::size_t end = std::min(order.size(),
                                             pos + static_cast<std::size_t>(config.batch_size));
            for (std::size_t i = pos; i < end; ++i) batch.push_back(windows[order[i]]);

            const std::uint64_t mask_seed =
                mix_seed(config.seed, static_cast<std::uint64_t>(epoch), batch_index++);
            auto [loss, grads] =
                loss_and_gradients(model.params, batch, model.dropout_p, mask_seed);
            epoch_sq_sum += loss * static_cast<double>(batch.size());

            ++step;
            const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < flat; ++i) {
                const double g = grads.get_flat(i);
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
                const double update = config.learning_rate * (m[i] / bc1) /
                                      (std::sqrt(v[i] / bc2) + config.epsilon);
                model.params.set_flat(i, model.params.get_flat(i) - update);
            }
        }
        model.epoch_loss.push_back(epoch_sq_sum / static_cast<double>(windows.size()));
    }
}

}  // namespace

SdLstmModel train(const TrafficSeries& series, const TrainConfig& config) {
    if (series.interval != kHour)
        throw IntervalMismatch("training expects an hourly series");
    if (series.size() < static_cast<std::size_t>(config.input_window) + 1)
        throw SeriesTooShort("series shorter than input_window + 1");

    SdLstmModel model;
    model.input_window = config.input_window;
    model.interval = series.interval;

    // dropout probability from the data, before any training
    const SingularityMask mask =
        detect_singular_points(series, config.detector_window, config.detector_k);
    model.dropout_p = singularity_ratio(mask, config.p_min, config.p_max);

    auto [norm_series, norm] = normalize(series);
    model.norm = norm;
    const auto windows = sliding_windows(norm_series.counts, config.input_window);

    Rng rng(config.seed);
    model.params = LstmParams::zeros(config.hidden_size, 1);
    const double r = 1.0 / std::sqrt(static_cast<double>(config.hidden_size));
    const std::size_t flat = model.params.flat_size();
    for (std::size_t i = 0; i + 1 < flat; ++i)  // b_out stays 0
        model.params.set_flat(i, rng.uniform(-r, r));

    run_adam(model, windows, config, config.epochs, rng);
    return model;
}

SdLstmModel resume_training(const SdLstmModel& model, const TrafficSeries& series,
                            const TrainConfig& config, int epochs) {
    if (series.interval != kHour)
        throw IntervalMismatch("training expects an hourly series");
    SdLstmModel out = model;
    const SingularityMask mask =
        detect_singular_points(series, config.detector_window, config.detector_k);
    out.dropout_p = singularity_ratio(mask, config.p_min, config.p_max);
    auto [norm_series, norm] = normalize(series);
    out.norm = norm;
    const auto windows = sliding_windows(norm_series.counts, out.input_window);
    Rng rng(mix_seed(config.seed, 0x726573756d65ULL, series.size()));
    run_adam(out, windows, config, epochs, rng);
    return out;
}

}  // namespace traffic
