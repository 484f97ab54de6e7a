#ifndef TRAFFIC_COMBINER_HPP
#define TRAFFIC_COMBINER_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "traffic/arima.hpp"
#include "traffic/sdlstm.hpp"
#include "traffic/series.hpp"

namespace traffic {

enum class ModelKind { Sdlstm, Arima };

const char* to_string(ModelKind kind);

struct ScheduleWindow {
    int start_minute = 0;  // minute of day, inclusive
    int end_minute = 1440; // exclusive
    ModelKind kind = ModelKind::Sdlstm;

    int interval() const { return kind == ModelKind::Arima ? kQuarterHour : kHour; }
};

// Time-of-day partition routing each timestamp to one model family.
struct CombinerSchedule {
    std::vector<ScheduleWindow> windows;

    void validate() const;  // throws BadSchedule
    const ScheduleWindow& window_at(int minute) const;
};

// ARIMA at 15-minute steps over the volatile early-morning window,
// hourly forecasts elsewhere.
CombinerSchedule default_schedule();

struct HybridPoint {
    std::int64_t timestamp = 0;
    double value = 0.0;
    ModelKind source = ModelKind::Sdlstm;
    int interval = kHour;
};

struct HybridForecast {
    std::vector<HybridPoint> points;
};

// Walks from the end of the history to horizon_end, emitting hourly
// recursive forecasts in the coarse windows and 15-minute statistical
// forecasts in the fine ones. The statistical model is re-anchored on
// the true history only; the hourly recursion feeds its own outputs
// forward across gaps so its input series stays contiguous.
HybridForecast predict_hybrid(const SdLstmModel& lstm, const ArimaModel& arima_model,
                              const CombinerSchedule& schedule,
                              const TrafficSeries& history_15min,
                              std::int64_t horizon_end);

struct RetrainPolicy {
    std::size_t threshold = 96;      // new 15-minute samples per retrain
    int arima_window_days = 7;       // recent data used for the refit
    int resume_epochs = 20;          // continued training per retrain
    int max_arima_p = 3;
    int max_arima_d = 1;
    int max_arima_q = 3;
    TrainConfig train;
};

// One detector node's mutable state; shared with the service registry.
struct NodeEntry {
    TrafficSeries history;                 // 15-minute samples
    std::optional<SdLstmModel> lstm;
    std::optional<ArimaModel> arima;
    CombinerSchedule schedule;
    std::int64_t version = 0;
    std::int64_t last_retrain_ts = 0;
    std::size_t pending = 0;               // samples since the last retrain
    bool has_history = false;

    bool trained() const { return lstm.has_value() && arima.has_value(); }
};

// Appends contiguous observations and retrains once enough new data has
// accumulated; recomputes the dropout probability from the extended
// series on every retrain.
void update_models(NodeEntry& entry, const TrafficSeries& new_observations,
                   const RetrainPolicy& policy);

}  // namespace traffic

#endif
