// Command-line front end: generate / train / predict / evaluate /
// compare / serve, glued together by the CSV and model-file formats.

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "traffic/datagen.hpp"
#include "traffic/eval.hpp"
#include "traffic/model_io.hpp"
#include "traffic/server.hpp"
#include "traffic/timeutil.hpp"

namespace {

using namespace traffic;

[[noreturn]] void usage_error(const std::string& message) {
    std::cerr << "error: UsageError: " << message << "\n";
    std::exit(1);
}

std::int64_t parse_ts_or_die(const std::string& text, const std::string& flag) {
    const auto ts = parse_iso8601(text);
    if (!ts) usage_error(flag + " must be an ISO-8601 UTC timestamp, got '" + text + "'");
    return *ts;
}

void write_forecast_csv(const HybridForecast& forecast, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "timestamp,predicted,source,interval\n";
    out.precision(17);
    for (const HybridPoint& p : forecast.points)
        out << format_iso8601(p.timestamp) << ',' << p.value << ','
            << to_string(p.source) << ',' << p.interval << '\n';
}

HybridForecast read_forecast_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    std::size_t row = 0;
    if (!std::getline(in, line) || line != "timestamp,predicted,source,interval")
        throw CsvFormatError("row 1: expected forecast header in '" + path + "'");
    ++row;
    HybridForecast out;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string ts_text, value_text, source_text, interval_text;
        if (!std::getline(fields, ts_text, ',') || !std::getline(fields, value_text, ',') ||
            !std::getline(fields, source_text, ',') || !std::getline(fields, interval_text))
            throw CsvFormatError("row " + std::to_string(row) + ": malformed forecast row");
        HybridPoint p;
        const auto ts = parse_iso8601(ts_text);
        if (!ts) throw CsvFormatError("row " + std::to_string(row) + ": bad timestamp");
        p.timestamp = *ts;
        p.value = std::stod(value_text);
        if (source_text == "ARIMA") p.source = ModelKind::Arima;
        else if (source_text == "SDLSTM") p.source = ModelKind::Sdlstm;
        else throw CsvFormatError("row " + std::to_string(row) + ": unknown source");
        p.interval = std::stoi(interval_text);
        out.points.push_back(p);
    }
    return out;
}

int cmd_generate(const GenSpec& spec, const std::string& out_path,
                 const std::string& truth_path) {
    const GeneratedSeries gen = generate(spec);
    write_series_csv_file(gen.series, out_path);
    if (!truth_path.empty()) {
        std::ofstream out(truth_path);
        if (!out) throw IoError("cannot open '" + truth_path + "' for writing");
        out << "timestamp,is_spike,noiseless\n";
        out.precision(17);
        for (std::size_t i = 0; i < gen.series.size(); ++i)
            out << format_iso8601(gen.series.timestamp_at(i)) << ','
                << (gen.spike_mask[i] ? 1 : 0) << ',' << gen.noiseless[i] << '\n';
    }
    std::cout << "wrote " << gen.series.size() << " samples to " << out_path << "\n";
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& out_path,
              const TrainConfig& config, const std::string& kind) {
    const TrafficSeries data = read_series_csv_file(data_path);
    ModelBundle bundle;
    bundle.provenance.seed = config.seed;
    bundle.provenance.train = config;
    bundle.provenance.data_begin = data.start;
    bundle.provenance.data_end = data.end();

    if (kind == "sdlstm" || kind == "bundle") {
        TrafficSeries hourly = data;
        if (data.interval == kQuarterHour) {
            hourly = data;
            hourly.counts.resize(hourly.counts.size() - hourly.counts.size() % 4);
            hourly = resample(hourly, kHour);
        }
        bundle.lstm = train(hourly, config);
    }
    if (kind == "arima" || kind == "bundle") {
        const ArimaOrder order = select_order(data, 3, 1, 3);
        bundle.arima = fit(data, order);
    }
    save_model(bundle, out_path);
    std::cout << "wrote model to " << out_path << "\n";
    if (bundle.lstm) std::cout << "dropout_p " << bundle.lstm->dropout_p << "\n";
    if (bundle.arima)
        std::cout << "arima order (" << bundle.arima->order.p << ","
                  << bundle.arima->order.d << "," << bundle.arima->order.q << ")\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& history_path,
                int horizon_hours, const std::string& until_text,
                const std::string& out_path) {
    const ModelBundle bundle = load_model(model_path);
    if (!bundle.trained())
        throw UntrainedModel("model file does not contain a full bundle");
    const TrafficSeries history = read_series_csv_file(history_path);
    std::int64_t until;
    if (!until_text.empty()) {
        until = parse_ts_or_die(until_text, "--until");
    } else {
        if (horizon_hours <= 0) usage_error("--horizon must be a positive number of hours");
        until = history.end() + static_cast<std::int64_t>(horizon_hours) * kHour;
    }
    const HybridForecast forecast =
        predict_hybrid(*bundle.lstm, *bundle.arima, bundle.schedule, history, until);
    write_forecast_csv(forecast, out_path);
    std::cout << "wrote " << forecast.points.size() << " forecast points to "
              << out_path << "\n";
    return 0;
}

DayClass day_class_from(const std::string& text) {
    if (text == "working") return DayClass::Working;
    if (text == "non-working") return DayClass::NonWorking;
    if (text == "all") return DayClass::All;
    usage_error("--day-class must be working, non-working, or all");
}

int cmd_evaluate(const std::string& forecast_path, const std::string& truth_path,
                 const std::string& label, const std::string& day_class,
                 bool skip_zero, const std::string& out_csv,
                 const std::string& out_json) {
    const HybridForecast forecast = read_forecast_csv(forecast_path);
    const TrafficSeries truth = read_series_csv_file(truth_path);
    EvalOptions options;
    options.skip_zero_actual = skip_zero;
    const EvalReport report =
        evaluate(forecast, truth, day_class_from(day_class), label, options);
    if (!out_csv.empty()) write_report_csv(report, out_csv);
    if (!out_json.empty()) write_report_json(report, out_json);
    std::cout << "label " << report.label << " overall_mape " << report.overall_mape
              << " points " << report.per_point.size() << "\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& forecast_paths,
                const std::vector<std::string>& labels,
                const std::string& truth_path, const std::string& day_class,
                bool skip_zero) {
    if (labels.size() != forecast_paths.size())
        usage_error("--label must be given once per --forecast");
    const TrafficSeries truth = read_series_csv_file(truth_path);
    EvalOptions options;
    options.skip_zero_actual = skip_zero;
    std::vector<EvalReport> reports;
    for (std::size_t i = 0; i < forecast_paths.size(); ++i)
        reports.push_back(evaluate(read_forecast_csv(forecast_paths[i]), truth,
                                   day_class_from(day_class), labels[i], options));
    const Ranking ranking = compare(reports);
    std::cout << "rank,label,overall_mape\n";
    for (std::size_t i = 0; i < ranking.ordered.size(); ++i)
        std::cout << (i + 1) << ',' << ranking.ordered[i].label << ','
                  << ranking.ordered[i].overall_mape << "\n";
    return 0;
}

int cmd_serve(const std::string& config_path, std::optional<int> port,
              const std::string& data_dir, std::optional<std::uint64_t> seed) {
    ServiceConfig config;
    if (!config_path.empty()) config = load_service_config(config_path);
    else apply_env_overrides(config);
    if (port) config.port = *port;
    if (!data_dir.empty()) config.data_dir = data_dir;
    if (seed) config.retrain.train.seed = *seed;

    NodeRegistry registry(config);
    LineServer server(registry, config.port);
    const int bound = server.start();
    std::cout << "listening on 127.0.0.1:" << bound << "\n" << std::flush;

    static volatile std::sig_atomic_t stop_flag = 0;
    std::signal(SIGINT, [](int) { stop_flag = 1; });
    std::signal(SIGTERM, [](int) { stop_flag = 1; });
    while (stop_flag == 0) {
        timespec ts{0, 100 * 1000 * 1000};
        nanosleep(&ts, nullptr);
    }
    server.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid traffic-flow forecasting"};
    app.require_subcommand(1);

    // generate
    GenSpec spec;
    std::string gen_out = "series.csv", gen_truth;
    std::string gen_start;
    auto* gen = app.add_subcommand("generate", "write a synthetic series CSV");
    gen->add_option("--out", gen_out, "series CSV path");
    gen->add_option("--truth", gen_truth, "ground-truth sidecar CSV path");
    gen->add_option("--days", spec.days, "number of days");
    gen->add_option("--seed", spec.seed, "generator seed");
    gen->add_option("--base-level", spec.base_level, "baseline vehicles per hour");
    gen->add_option("--weekend-scale", spec.weekend_scale, "weekend scaling in (0,1]");
    gen->add_option("--noise-sd", spec.noise_sd, "noise standard deviation per sample");
    gen->add_option("--spike-rate", spec.spike_rate, "spike probability per sample");
    gen->add_option("--spike-sigmas", spec.spike_magnitude_sigmas, "spike size in sigmas");
    gen->add_option("--start", gen_start, "start timestamp (ISO-8601 UTC)");

    // train
    TrainConfig train_config;
    std::string train_data, train_out = "model.json", train_kind = "bundle";
    auto* tr = app.add_subcommand("train", "fit models from a series CSV");
    tr->add_option("--data", train_data, "input series CSV")->required();
    tr->add_option("--out", train_out, "output model file");
    tr->add_option("--kind", train_kind, "sdlstm, arima, or bundle")
        ->check(CLI::IsMember({"sdlstm", "arima", "bundle"}));
    tr->add_option("--seed", train_config.seed, "training seed");
    tr->add_option("--epochs", train_config.epochs, "training epochs");
    tr->add_option("--hidden", train_config.hidden_size, "hidden units");
    tr->add_option("--window", train_config.input_window, "input window (hours)");
    tr->add_option("--lr", train_config.learning_rate, "learning rate");

    // predict
    std::string pred_model, pred_history, pred_until, pred_out = "forecast.csv";
    int pred_horizon = 0;
    auto* pr = app.add_subcommand("predict", "forecast from a model and history");
    pr->add_option("--model", pred_model, "model file")->required();
    pr->add_option("--history", pred_history, "history series CSV")->required();
    pr->add_option("--horizon", pred_horizon, "hours past the end of the history");
    pr->add_option("--until", pred_until, "forecast end (ISO-8601 UTC)");
    pr->add_option("--out", pred_out, "output forecast CSV");

    // evaluate
    std::string ev_forecast, ev_truth, ev_label = "model", ev_day = "all";
    std::string ev_out_csv, ev_out_json;
    bool ev_skip_zero = false;
    auto* ev = app.add_subcommand("evaluate", "score a forecast against the truth");
    ev->add_option("--forecast", ev_forecast, "forecast CSV")->required();
    ev->add_option("--truth", ev_truth, "truth series CSV")->required();
    ev->add_option("--label", ev_label, "report label");
    ev->add_option("--day-class", ev_day, "working, non-working, or all");
    ev->add_flag("--skip-zero-actual", ev_skip_zero, "drop zero-actual points");
    ev->add_option("--out-csv", ev_out_csv, "per-point report CSV");
    ev->add_option("--out-json", ev_out_json, "summary report JSON");

    // compare
    std::vector<std::string> cm_forecasts, cm_labels;
    std::string cm_truth, cm_day = "all";
    bool cm_skip_zero = false;
    auto* cm = app.add_subcommand("compare", "rank several forecasts by MAPE");
    cm->add_option("--forecast", cm_forecasts, "forecast CSV (repeatable)")->required();
    cm->add_option("--label", cm_labels, "label per forecast (repeatable)")->required();
    cm->add_option("--truth", cm_truth, "truth series CSV")->required();
    cm->add_option("--day-class", cm_day, "working, non-working, or all");
    cm->add_flag("--skip-zero-actual", cm_skip_zero, "drop zero-actual points");

    // serve
    std::string sv_config, sv_data_dir;
    int sv_port = -1;
    std::uint64_t sv_seed = 0;
    bool sv_seed_set = false;
    auto* sv = app.add_subcommand("serve", "run the streaming service");
    sv->add_option("--config", sv_config, "service config file (JSON)");
    sv->add_option("--port", sv_port, "listen port");
    sv->add_option("--data-dir", sv_data_dir, "registry persistence directory");
    sv->add_option("--seed", sv_seed, "training seed")->each([&](const std::string&) {
        sv_seed_set = true;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: UsageError: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gen->parsed()) {
            if (!gen_start.empty()) spec.start = parse_ts_or_die(gen_start, "--start");
            return cmd_generate(spec, gen_out, gen_truth);
        }
        if (tr->parsed()) return cmd_train(train_data, train_out, train_config, train_kind);
        if (pr->parsed()) {
            if (pred_until.empty() && pred_horizon <= 0)
                usage_error("--horizon must be positive (or pass --until)");
            return cmd_predict(pred_model, pred_history, pred_horizon, pred_until, pred_out);
        }
        if (ev->parsed())
            return cmd_evaluate(ev_forecast, ev_truth, ev_label, ev_day, ev_skip_zero,
                                ev_out_csv, ev_out_json);
        if (cm->parsed())
            return cmd_compare(cm_forecasts, cm_labels, cm_truth, cm_day, cm_skip_zero);
        if (sv->parsed())
            return cmd_serve(sv_config,
                             sv_port >= 0 ? std::optional<int>(sv_port) : std::nullopt,
                             sv_data_dir,
                             sv_seed_set ? std::optional<std::uint64_t>(sv_seed)
                                         : std::nullopt);
    } catch (const traffic::Error& e) {
        std::cerr << "error: " << e.name() << ": " << e.what() << "\n";
        return traffic::is_numeric_error(e) ? 3 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: InternalError: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
