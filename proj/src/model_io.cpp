#include "traffic/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace traffic {

namespace {

using nlohmann::json;

const json& field(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end())
        throw CorruptFile("missing field " + path + "." + key);
    return *it;
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& path) {
    try {
        return field(j, key, path).get<T>();
    } catch (const json::exception&) {
        throw CorruptFile("bad value at " + path + "." + key);
    }
}

json mat_to_json(const Mat& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
}

Mat mat_from_json(const json& j, const std::string& path) {
    Mat m(get_as<int>(j, "rows", path), get_as<int>(j, "cols", path));
    m.a = get_as<std::vector<double>>(j, "data", path);
    if (m.a.size() != static_cast<std::size_t>(m.rows) * m.cols)
        throw CorruptFile("shape mismatch at " + path + ".data");
    return m;
}

json lstm_to_json(const SdLstmModel& m) {
    json j;
    j["hidden_size"] = m.params.hidden_size;
    j["input_size"] = m.params.input_size;
    j["dropout_p"] = m.dropout_p;
    j["input_window"] = m.input_window;
    j["interval"] = m.interval;
    j["norm"] = {{"min", m.norm.min}, {"max", m.norm.max}};
    j["w_xi"] = mat_to_json(m.params.w_xi);
    j["w_xf"] = mat_to_json(m.params.w_xf);
    j["w_xo"] = mat_to_json(m.params.w_xo);
    j["w_xc"] = mat_to_json(m.params.w_xc);
    j["w_hi"] = mat_to_json(m.params.w_hi);
    j["w_hf"] = mat_to_json(m.params.w_hf);
    j["w_ho"] = mat_to_json(m.params.w_ho);
    j["w_hc"] = mat_to_json(m.params.w_hc);
    j["w_co"] = m.params.w_co;
    j["w_out"] = m.params.w_out;
    j["b_out"] = m.params.b_out;
    j["epoch_loss"] = m.epoch_loss;
    return j;
}

SdLstmModel lstm_from_json(const json& j, const std::string& path) {
    SdLstmModel m;
    m.params.hidden_size = get_as<int>(j, "hidden_size", path);
    m.params.input_size = get_as<int>(j, "input_size", path);
    m.dropout_p = get_as<double>(j, "dropout_p", path);
    m.input_window = get_as<int>(j, "input_window", path);
    m.interval = get_as<int>(j, "interval", path);
    const json& norm = field(j, "norm", path);
    m.norm.min = get_as<double>(norm, "min", path + ".norm");
    m.norm.max = get_as<double>(norm, "max", path + ".norm");
    m.params.w_xi = mat_from_json(field(j, "w_xi", path), path + ".w_xi");
    m.params.w_xf = mat_from_json(field(j, "w_xf", path), path + ".w_xf");
    m.params.w_xo = mat_from_json(field(j, "w_xo", path), path + ".w_xo");
    m.params.w_xc = mat_from_json(field(j, "w_xc", path), path + ".w_xc");
    m.params.w_hi = mat_from_json(field(j, "w_hi", path), path + ".w_hi");
    m.params.w_hf = mat_from_json(field(j, "w_hf", path), path + ".w_hf");
    m.params.w_ho = mat_from_json(field(j, "w_ho", path), path + ".w_ho");
    m.params.w_hc = mat_from_json(field(j, "w_hc", path), path + ".w_hc");
    m.params.w_co = get_as<std::vector<double>>(j, "w_co", path);
    m.params.w_out = get_as<std::vector<double>>(j, "w_out", path);
    m.params.b_out = get_as<double>(j, "b_out", path);
    if (j.contains("epoch_loss"))
        m.epoch_loss = get_as<std::vector<double>>(j, "epoch_loss", path);
    try {
        m.params.check_shapes();
    } catch (const ShapeMismatch& e) {
        throw CorruptFile(std::string("inconsistent shapes at ") + path + ": " + e.what());
    }
    return m;
}

json arima_to_json(const ArimaModel& m) {
    json j;
    j["order"] = {{"p", m.order.p}, {"d", m.order.d}, {"q", m.order.q}};
    j["c"] = m.c;
    j["phi"] = m.phi;
    j["theta"] = m.theta;
    j["sigma2"] = m.sigma2;
    j["recent_diff"] = m.recent_diff;
    j["recent_resid"] = m.recent_resid;
    j["integrate_tail"] = m.integrate_tail;
    return j;
}

ArimaModel arima_from_json(const json& j, const std::string& path) {
    ArimaModel m;
    const json& order = field(j, "order", path);
    m.order.p = get_as<int>(order, "p", path + ".order");
    m.order.d = get_as<int>(order, "d", path + ".order");
    m.order.q = get_as<int>(order, "q", path + ".order");
    m.c = get_as<double>(j, "c", path);
    m.phi = get_as<std::vector<double>>(j, "phi", path);
    m.theta = get_as<std::vector<double>>(j, "theta", path);
    m.sigma2 = get_as<double>(j, "sigma2", path);
    m.recent_diff = get_as<std::vector<double>>(j, "recent_diff", path);
    m.recent_resid = get_as<std::vector<double>>(j, "recent_resid", path);
    m.integrate_tail = get_as<std::vector<double>>(j, "integrate_tail", path);
    if (m.phi.size() != static_cast<std::size_t>(m.order.p) ||
        m.theta.size() != static_cast<std::size_t>(m.order.q))
        throw CorruptFile("coefficient counts at " + path + " do not match the order");
    return m;
}

json schedule_to_json(const CombinerSchedule& s) {
    json arr = json::array();
    for (const ScheduleWindow& w : s.windows)
        arr.push_back({{"start", w.start_minute},
                       {"end", w.end_minute},
                       {"kind", to_string(w.kind)}});
    return arr;
}

CombinerSchedule schedule_from_json(const json& j, const std::string& path) {
    CombinerSchedule s;
    if (!j.is_array()) throw CorruptFile("expected array at " + path);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        ScheduleWindow w;
        w.start_minute = get_as<int>(j[i], "start", p);
        w.end_minute = get_as<int>(j[i], "end", p);
        const std::string kind = get_as<std::string>(j[i], "kind", p);
        if (kind == "ARIMA") w.kind = ModelKind::Arima;
        else if (kind == "SDLSTM") w.kind = ModelKind::Sdlstm;
        else throw CorruptFile("unknown model kind at " + p + ".kind");
        s.windows.push_back(w);
    }
    try {
        s.validate();
    } catch (const BadSchedule& e) {
        throw CorruptFile("invalid schedule at " + path + ": " + e.what());
    }
    return s;
}

json config_to_json(const TrainConfig& c) {
    json j;
    j["epochs"] = c.epochs;
    j["learning_rate"] = c.learning_rate;
    j["seed"] = c.seed;
    j["input_window"] = c.input_window;
    j["hidden_size"] = c.hidden_size;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["epsilon"] = c.epsilon;
    j["batch_size"] = c.batch_size;
    j["detector_window"] = c.detector_window;
    j["detector_k"] = c.detector_k;
    j["p_min"] = c.p_min;
    j["p_max"] = c.p_max;
    return j;
}

TrainConfig config_from_json(const json& j, const std::string& path) {
    TrainConfig c;
    c.epochs = get_as<int>(j, "epochs", path);
    c.learning_rate = get_as<double>(j, "learning_rate", path);
    c.seed = get_as<std::uint64_t>(j, "seed", path);
    c.input_window = get_as<int>(j, "input_window", path);
    c.hidden_size = get_as<int>(j, "hidden_size", path);
    c.beta1 = get_as<double>(j, "beta1", path);
    c.beta2 = get_as<double>(j, "beta2", path);
    c.epsilon = get_as<double>(j, "epsilon", path);
    c.batch_size = get_as<int>(j, "batch_size", path);
    c.detector_window = get_as<int>(j, "detector_window", path);
    c.detector_k = get_as<double>(j, "detector_k", path);
    c.p_min = get_as<double>(j, "p_min", path);
    c.p_max = get_as<double>(j, "p_max", path);
    return c;
}

}  // namespace

std::string bundle_to_json(const ModelBundle& bundle) {
    json j;
    j["format_version"] = kModelFormatVersion;
    if (bundle.lstm && bundle.arima) j["kind"] = "bundle";
    else if (bundle.lstm) j["kind"] = "sdlstm";
    else if (bundle.arima) j["kind"] = "arima";
    else j["kind"] = "empty";
    if (bundle.lstm) j["sdlstm"] = lstm_to_json(*bundle.lstm);
    if (bundle.arima) j["arima"] = arima_to_json(*bundle.arima);
    j["schedule"] = schedule_to_json(bundle.schedule);
    j["provenance"] = {{"seed", bundle.provenance.seed},
                       {"data_begin", bundle.provenance.data_begin},
                       {"data_end", bundle.provenance.data_end},
                       {"train", config_to_json(bundle.provenance.train)}};
    return j.dump(2);
}

ModelBundle bundle_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw CorruptFile(std::string("not valid JSON: ") + e.what());
    }
    const int version = get_as<int>(j, "format_version", "$");
    if (version != kModelFormatVersion)
        throw VersionUnsupported("format_version " + std::to_string(version) +
                                 " is not supported (expected " +
                                 std::to_string(kModelFormatVersion) + ")");
    ModelBundle bundle;
    if (j.contains("sdlstm")) bundle.lstm = lstm_from_json(j["sdlstm"], "$.sdlstm");
    if (j.contains("arima")) bundle.arima = arima_from_json(j["arima"], "$.arima");
    bundle.schedule = schedule_from_json(field(j, "schedule", "$"), "$.schedule");
    const json& prov = field(j, "provenance", "$");
    bundle.provenance.seed = get_as<std::uint64_t>(prov, "seed", "$.provenance");
    bundle.provenance.data_begin = get_as<std::int64_t>(prov, "data_begin", "$.provenance");
    bundle.provenance.data_end = get_as<std::int64_t>(prov, "data_end", "$.provenance");
    bundle.provenance.train =
        config_from_json(field(prov, "train", "$.provenance"), "$.provenance.train");
    return bundle;
}

void save_model(const ModelBundle& bundle, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out << bundle_to_json(bundle) << '\n';
        if (!out) throw IoError("write to '" + tmp + "' failed");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("rename '" + tmp + "' -> '" + path + "' failed");
}

ModelBundle load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return bundle_from_json(buf.str());
}

}  // namespace traffic
