#include "traffic/service.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "traffic/timeutil.hpp"

namespace traffic {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json err_response(const std::string& error, const std::string& reason) {
    return json{{"ok", false}, {"error", error}, {"reason", reason}};
}

CombinerSchedule schedule_from_config(const json& arr) {
    CombinerSchedule s;
    for (const json& w : arr) {
        ScheduleWindow win;
        win.start_minute = w.at("start").get<int>();
        win.end_minute = w.at("end").get<int>();
        const std::string kind = w.at("kind").get<std::string>();
        if (kind == "ARIMA") win.kind = ModelKind::Arima;
        else if (kind == "SDLSTM") win.kind = ModelKind::Sdlstm;
        else throw CorruptFile("unknown schedule kind '" + kind + "'");
        s.windows.push_back(win);
    }
    s.validate();
    return s;
}

}  // namespace

bool valid_node_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char ch : id) {
        const bool ok = (ch >= 'A' && ch <= 'Z') || (ch >= 'a' && ch <= 'z') ||
                        (ch >= '0' && ch <= '9') || ch == '_' || ch == '-';
        if (!ok) return false;
    }
    return true;
}

ServiceConfig load_service_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw CorruptFile(std::string("config is not valid JSON: ") + e.what());
    }
    ServiceConfig config;
    try {
        if (j.contains("port")) config.port = j["port"].get<int>();
        if (j.contains("data_dir")) config.data_dir = j["data_dir"].get<std::string>();
        if (j.contains("schedule")) config.schedule = schedule_from_config(j["schedule"]);
        if (j.contains("retrain")) {
            const json& r = j["retrain"];
            if (r.contains("threshold"))
                config.retrain.threshold = r["threshold"].get<std::size_t>();
            if (r.contains("arima_window_days"))
                config.retrain.arima_window_days = r["arima_window_days"].get<int>();
            if (r.contains("resume_epochs"))
                config.retrain.resume_epochs = r["resume_epochs"].get<int>();
            if (r.contains("max_arima_p")) config.retrain.max_arima_p = r["max_arima_p"].get<int>();
            if (r.contains("max_arima_d")) config.retrain.max_arima_d = r["max_arima_d"].get<int>();
            if (r.contains("max_arima_q")) config.retrain.max_arima_q = r["max_arima_q"].get<int>();
        }
        if (j.contains("train")) {
            const json& t = j["train"];
            TrainConfig& c = config.retrain.train;
            if (t.contains("epochs")) c.epochs = t["epochs"].get<int>();
            if (t.contains("learning_rate")) c.learning_rate = t["learning_rate"].get<double>();
            if (t.contains("seed")) c.seed = t["seed"].get<std::uint64_t>();
            if (t.contains("input_window")) c.input_window = t["input_window"].get<int>();
            if (t.contains("hidden_size")) c.hidden_size = t["hidden_size"].get<int>();
            if (t.contains("batch_size")) c.batch_size = t["batch_size"].get<int>();
            if (t.contains("detector_window")) c.detector_window = t["detector_window"].get<int>();
            if (t.contains("detector_k")) c.detector_k = t["detector_k"].get<double>();
            if (t.contains("p_min")) c.p_min = t["p_min"].get<double>();
            if (t.contains("p_max")) c.p_max = t["p_max"].get<double>();
        }
    } catch (const json::exception& e) {
        throw CorruptFile(std::string("bad config value: ") + e.what());
    }
    apply_env_overrides(config);
    return config;
}

void apply_env_overrides(ServiceConfig& config) {
    if (const char* port = std::getenv("SDLSTM_PORT")) config.port = std::atoi(port);
    if (const char* dir = std::getenv("SDLSTM_DATA_DIR")) config.data_dir = dir;
    if (const char* seed = std::getenv("SDLSTM_SEED"))
        config.retrain.train.seed = std::strtoull(seed, nullptr, 10);
}

NodeRegistry::NodeRegistry(ServiceConfig config) : config_(std::move(config)) {
    if (!config_.data_dir.empty()) {
        fs::create_directories(config_.data_dir);
        load_from_disk();
    }
}

NodeRegistry::Node& NodeRegistry::find_or_create(const std::string& id) {
    std::lock_guard<std::mutex> lock(registry_mutex_);
    auto it = nodes_.find(id);
    if (it == nodes_.end()) {
        it = nodes_.emplace(id, std::make_unique<Node>()).first;
        it->second->entry.schedule = config_.schedule;
        if (!config_.data_dir.empty())
            fs::create_directories(fs::path(config_.data_dir) / id);
    }
    return *it->second;
}

NodeRegistry::Node* NodeRegistry::find(const std::string& id) {
    std::lock_guard<std::mutex> lock(registry_mutex_);
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : it->second.get();
}

std::vector<std::string> NodeRegistry::node_ids() const {
    std::lock_guard<std::mutex> lock(registry_mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, node] : nodes_) ids.push_back(id);
    return ids;
}

void NodeRegistry::load_from_disk() {
    for (const fs::directory_entry& dir : fs::directory_iterator(config_.data_dir)) {
        if (!dir.is_directory()) continue;
        const std::string id = dir.path().filename().string();
        if (!valid_node_id(id)) continue;
        auto node = std::make_unique<Node>();
        node->entry.schedule = config_.schedule;

        // history: appended line by line; tolerate a torn trailing row
        const fs::path hist = dir.path() / "history.csv";
        if (fs::exists(hist)) {
            std::ifstream in(hist);
            std::string line;
            std::getline(in, line);  // header
            TrafficSeries series;
            series.interval = kQuarterHour;
            bool first = true;
            while (std::getline(in, line)) {
                const auto comma = line.find(',');
                if (comma == std::string::npos) break;
                const auto ts = parse_iso8601(line.substr(0, comma));
                if (!ts) break;
                double count;
                try {
                    count = std::stod(line.substr(comma + 1));
                } catch (const std::exception&) {
                    break;
                }
                if (first) {
                    series.start = *ts;
                    first = false;
                } else if (*ts != series.end()) {
                    break;
                }
                series.counts.push_back(count);
            }
            if (!series.counts.empty()) {
                node->entry.history = series;
                node->entry.has_history = true;
            }
        }

        const fs::path state = dir.path() / "state.json";
        if (fs::exists(state)) {
            std::ifstream in(state);
            try {
                json s = json::parse(in);
                node->entry.version = s.value("version", std::int64_t{0});
                node->entry.pending = s.value("pending", std::size_t{0});
                node->entry.last_retrain_ts = s.value("last_retrain_ts", std::int64_t{0});
            } catch (const json::exception&) {
                // stale state file; counters restart, history is intact
            }
        }

        const fs::path model = dir.path() / "model.json";
        if (fs::exists(model)) {
            try {
                ModelBundle bundle = load_model(model.string());
                node->entry.lstm = std::move(bundle.lstm);
                node->entry.arima = std::move(bundle.arima);
                node->entry.schedule = bundle.schedule;
            } catch (const Error&) {
                // unreadable model; node serves as untrained until retrain
            }
        }

        std::lock_guard<std::mutex> lock(registry_mutex_);
        nodes_.emplace(id, std::move(node));
    }
}

void NodeRegistry::persist_history_row(const std::string& id, std::int64_t ts,
                                       double count) {
    if (config_.data_dir.empty()) return;
    const fs::path path = fs::path(config_.data_dir) / id / "history.csv";
    const bool fresh = !fs::exists(path);
    std::ofstream out(path, std::ios::app);
    if (fresh) out << "timestamp,count\n";
    out.precision(17);
    out << format_iso8601(ts) << ',' << count << '\n';
    out.flush();
}

void NodeRegistry::persist_state(const std::string& id, const Node& node) {
    if (config_.data_dir.empty()) return;
    const fs::path path = fs::path(config_.data_dir) / id / "state.json";
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << json{{"version", node.entry.version},
                    {"pending", node.entry.pending},
                    {"last_retrain_ts", node.entry.last_retrain_ts}}
                   .dump()
            << '\n';
    }
    fs::rename(tmp, path);
}

void NodeRegistry::persist_model(const std::string& id, const Node& node) {
    if (config_.data_dir.empty() || !node.entry.trained()) return;
    ModelBundle bundle;
    bundle.lstm = node.entry.lstm;
    bundle.arima = node.entry.arima;
    bundle.schedule = node.entry.schedule;
    bundle.provenance.seed = config_.retrain.train.seed;
    bundle.provenance.train = config_.retrain.train;
    bundle.provenance.data_begin = node.entry.history.start;
    bundle.provenance.data_end = node.entry.history.end();
    save_model(bundle, (fs::path(config_.data_dir) / id / "model.json").string());
}

void NodeRegistry::persist_predictions(const std::string& id,
                                       const std::vector<HybridPoint>& points) {
    if (config_.data_dir.empty()) return;
    const fs::path path = fs::path(config_.data_dir) / id / "predictions.csv";
    const bool fresh = !fs::exists(path);
    std::ofstream out(path, std::ios::app);
    if (fresh) out << "timestamp,predicted,source,interval\n";
    out.precision(17);
    for (const HybridPoint& p : points)
        out << format_iso8601(p.timestamp) << ',' << p.value << ','
            << to_string(p.source) << ',' << p.interval << '\n';
}

std::string NodeRegistry::do_obs(const std::string& id, std::int64_t ts, double count) {
    Node& node = find_or_create(id);
    std::lock_guard<std::mutex> lock(node.mutex);
    const std::int64_t old_version = node.entry.version;
    TrafficSeries obs{ts, kQuarterHour, {count}};
    update_models(node.entry, obs, config_.retrain);
    persist_history_row(id, ts, count);
    if (node.entry.version != old_version) persist_model(id, node);
    persist_state(id, node);
    return json{{"ok", true},
                {"type", "obs"},
                {"node", id},
                {"version", node.entry.version}}
        .dump();
}

std::string NodeRegistry::do_predict(const std::string& id, std::int64_t until) {
    Node* node = find(id);
    if (node == nullptr)
        return err_response("UntrainedModel", "unknown node '" + id + "'").dump();
    std::lock_guard<std::mutex> lock(node->mutex);
    if (!node->entry.trained())
        return err_response("UntrainedModel",
                            "node '" + id + "' has not reached its first retrain")
            .dump();
    HybridForecast forecast = predict_hybrid(*node->entry.lstm, *node->entry.arima,
                                             node->entry.schedule, node->entry.history,
                                             until);
    // predictions are retained alongside the node for later inspection;
    // training itself consumes real observations only
    node->retained_predictions.insert(node->retained_predictions.end(),
                                      forecast.points.begin(), forecast.points.end());
    persist_predictions(id, forecast.points);
    json points = json::array();
    for (const HybridPoint& p : forecast.points)
        points.push_back({{"ts", format_iso8601(p.timestamp)},
                          {"value", p.value},
                          {"source", to_string(p.source)},
                          {"interval", p.interval}});
    return json{{"ok", true}, {"type", "predict"}, {"node", id}, {"points", points}}.dump();
}

std::string NodeRegistry::do_stats(const std::string& id) {
    Node* node = find(id);
    if (node == nullptr)
        return err_response("MalformedMessage", "unknown node '" + id + "'").dump();
    std::lock_guard<std::mutex> lock(node->mutex);
    json j{{"ok", true},
           {"type", "stats"},
           {"node", id},
           {"version", node->entry.version},
           {"pending", node->entry.pending}};
    if (node->entry.has_history) {
        j["history_begin"] = format_iso8601(node->entry.history.start);
        j["history_end"] = format_iso8601(node->entry.history.end());
        j["samples"] = node->entry.history.size();
    }
    if (node->entry.lstm) j["dropout_p"] = node->entry.lstm->dropout_p;
    return j.dump();
}

std::string NodeRegistry::handle_message(const std::string& line) {
    json msg;
    try {
        msg = json::parse(line);
    } catch (const json::exception& e) {
        return err_response("MalformedMessage", std::string("not valid JSON: ") + e.what())
            .dump();
    }
    try {
        const std::string type = msg.at("type").get<std::string>();
        const std::string id = msg.at("node").get<std::string>();
        if (!valid_node_id(id))
            return err_response("MalformedMessage", "invalid node id").dump();
        if (type == "obs") {
            const auto ts = parse_iso8601(msg.at("ts").get<std::string>());
            if (!ts) return err_response("MalformedMessage", "bad ts").dump();
            const double count = msg.at("count").get<double>();
            if (!(count >= 0.0))
                return err_response("MalformedMessage", "count must be non-negative").dump();
            return do_obs(id, *ts, count);
        }
        if (type == "predict") {
            const auto until = parse_iso8601(msg.at("until").get<std::string>());
            if (!until) return err_response("MalformedMessage", "bad until").dump();
            return do_predict(id, *until);
        }
        if (type == "stats") return do_stats(id);
        return err_response("MalformedMessage", "unknown type '" + type + "'").dump();
    } catch (const json::exception& e) {
        return err_response("MalformedMessage", e.what()).dump();
    } catch (const Error& e) {
        return err_response(e.name(), e.what()).dump();
    } catch (const std::exception& e) {
        return err_response("InternalError", e.what()).dump();
    }
}

}  // namespace traffic
