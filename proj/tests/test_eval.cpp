#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "traffic/eval.hpp"
#include "traffic/rng.hpp"
#include "traffic/timeutil.hpp"

using namespace traffic;

namespace {

// 2024-01-01 is a Monday.
const std::int64_t kMonday = *parse_iso8601("2024-01-01T00:00:00Z");
const std::int64_t kSaturday = *parse_iso8601("2024-01-06T00:00:00Z");
constexpr std::int64_t kDay = 24 * 3600;

TrafficSeries quarter_truth(std::int64_t start, int n, double value) {
    return {start, kQuarterHour, std::vector<double>(static_cast<std::size_t>(n), value)};
}

}  // namespace

TEST_CASE("mape of a worked example is ten percent") {
    CHECK(mape({100, 200, 50}, {90, 220, 55}) == doctest::Approx(10.0));
}

TEST_CASE("mape guards its inputs") {
    CHECK_THROWS_AS(mape({100, 0, 50}, {90, 10, 55}), ZeroActual);
    CHECK_THROWS_AS(mape({100, -5, 50}, {90, 10, 55}), ZeroActual);
    CHECK_THROWS_AS(mape({100, 200}, {90}), LengthMismatch);
    CHECK_THROWS_AS(mape({}, {}), LengthMismatch);
}

TEST_CASE("mape is scale invariant") {
    Rng rng(4);
    std::vector<double> a, p, a2, p2;
    for (int i = 0; i < 50; ++i) {
        a.push_back(rng.uniform(10, 100));
        p.push_back(rng.uniform(10, 100));
        a2.push_back(7.0 * a.back());
        p2.push_back(7.0 * p.back());
    }
    CHECK(mape(a, p) == doctest::Approx(mape(a2, p2)).epsilon(1e-12));
}

TEST_CASE("mape of a single point is the percent error") {
    for (double eps : {0.01, 0.1, 0.25}) {
        CHECK(mape({1.0}, {1.0 + eps}) == doctest::Approx(100.0 * eps));
        CHECK(mape({1.0}, {1.0 - eps}) == doctest::Approx(100.0 * eps));
    }
    CHECK(mape({123.0}, {123.0}) == doctest::Approx(0.0));
}

TEST_CASE("evaluate scores a perfect hourly forecast at zero") {
    const TrafficSeries truth = quarter_truth(kMonday, 96, 10.0);
    HybridForecast hf;
    for (int h = 0; h < 24; ++h)
        hf.points.push_back({kMonday + h * kHour, 40.0, ModelKind::Sdlstm, kHour});
    const EvalReport report = evaluate(hf, truth, DayClass::All, "perfect");
    CHECK(report.overall_mape == doctest::Approx(0.0));
    CHECK(report.per_point.size() == 24);
    CHECK(report.span_begin == kMonday);
    CHECK(report.span_end == kMonday + 23 * kHour);
    for (int h = 0; h < 24; ++h) {
        CHECK(report.per_hour_of_day[h].count == 1);
        CHECK(report.per_hour_of_day[h].mean_ape == doctest::Approx(0.0));
    }
}

TEST_CASE("hourly points compare against the sum of four truth samples") {
    TrafficSeries truth = quarter_truth(kMonday, 8, 0.0);
    truth.counts = {10, 12, 8, 10, 5, 5, 5, 5};
    HybridForecast hf;
    hf.points.push_back({kMonday, 44.0, ModelKind::Sdlstm, kHour});                // actual 40
    hf.points.push_back({kMonday + kHour, 18.0, ModelKind::Arima, kQuarterHour});  // wrong grid?
    hf.points.back().timestamp = kMonday + 4 * kQuarterHour;                       // actual 5
    const EvalReport report = evaluate(hf, truth, DayClass::All, "mixed");
    REQUIRE(report.per_point.size() == 2);
    CHECK(report.per_point[0].actual == doctest::Approx(40.0));
    CHECK(report.per_point[0].ape_percent == doctest::Approx(10.0));
    CHECK(report.per_point[1].actual == doctest::Approx(5.0));
    CHECK(report.per_point[1].ape_percent == doctest::Approx(260.0));
    CHECK(report.overall_mape == doctest::Approx(135.0));
}

TEST_CASE("evaluate agrees with mape on its own per-point series") {
    Rng rng(31);
    TrafficSeries truth = quarter_truth(kMonday, 96, 0.0);
    for (double& v : truth.counts) v = rng.uniform(5, 50);
    HybridForecast hf;
    for (int h = 0; h < 24; ++h)
        hf.points.push_back({kMonday + h * kHour, rng.uniform(10, 200),
                             ModelKind::Sdlstm, kHour});
    const EvalReport report = evaluate(hf, truth, DayClass::All, "random");
    std::vector<double> actual, predicted;
    for (const EvalPoint& p : report.per_point) {
        actual.push_back(p.actual);
        predicted.push_back(p.predicted);
    }
    CHECK(report.overall_mape == doctest::Approx(mape(actual, predicted)).epsilon(1e-12));
}

TEST_CASE("day classes partition the points") {
    // Monday through Sunday
    const TrafficSeries truth = quarter_truth(kMonday, 7 * 96, 10.0);
    HybridForecast hf;
    for (int d = 0; d < 7; ++d)
        hf.points.push_back({kMonday + d * kDay + 6 * kHour, 41.0, ModelKind::Sdlstm, kHour});
    const EvalReport all = evaluate(hf, truth, DayClass::All, "all");
    const EvalReport work = evaluate(hf, truth, DayClass::Working, "work");
    const EvalReport rest = evaluate(hf, truth, DayClass::NonWorking, "rest");
    CHECK(all.per_point.size() == 7);
    CHECK(work.per_point.size() == 5);
    CHECK(rest.per_point.size() == 2);
    CHECK(rest.per_point[0].timestamp == kSaturday + 6 * kHour);
}

TEST_CASE("misaligned or out-of-span points raise alignment errors") {
    const TrafficSeries truth = quarter_truth(kMonday, 96, 10.0);
    HybridForecast hf;
    hf.points.push_back({kMonday + 100, 1.0, ModelKind::Arima, kQuarterHour});
    CHECK_THROWS_AS(evaluate(hf, truth, DayClass::All, "x"), AlignmentError);
    hf.points = {{kMonday - kHour, 1.0, ModelKind::Sdlstm, kHour}};
    CHECK_THROWS_AS(evaluate(hf, truth, DayClass::All, "x"), AlignmentError);
    hf.points = {{kMonday + 23 * kHour + kQuarterHour, 1.0, ModelKind::Sdlstm, kHour}};
    CHECK_THROWS_AS(evaluate(hf, truth, DayClass::All, "x"), AlignmentError);
}

TEST_CASE("zero actuals either throw or are counted, by option") {
    TrafficSeries truth = quarter_truth(kMonday, 96, 10.0);
    for (int j = 0; j < 4; ++j) truth.counts[j] = 0.0;
    HybridForecast hf;
    hf.points.push_back({kMonday, 5.0, ModelKind::Sdlstm, kHour});
    hf.points.push_back({kMonday + kHour, 41.0, ModelKind::Sdlstm, kHour});
    CHECK_THROWS_AS(evaluate(hf, truth, DayClass::All, "x"), ZeroActual);
    EvalOptions opts;
    opts.skip_zero_actual = true;
    const EvalReport report = evaluate(hf, truth, DayClass::All, "x", opts);
    CHECK(report.zero_actual_skipped == 1);
    CHECK(report.per_point.size() == 1);
}

TEST_CASE("compare orders reports by error and breaks ties by label") {
    const TrafficSeries truth = quarter_truth(kMonday, 96, 10.0);
    auto forecast_at = [&](double value) {
        HybridForecast hf;
        for (int h = 0; h < 24; ++h)
            hf.points.push_back({kMonday + h * kHour, value, ModelKind::Sdlstm, kHour});
        return hf;
    };
    const EvalReport good = evaluate(forecast_at(41.0), truth, DayClass::All, "good");
    const EvalReport bad = evaluate(forecast_at(60.0), truth, DayClass::All, "bad");
    const EvalReport bad_twin = evaluate(forecast_at(60.0), truth, DayClass::All, "worse");

    const Ranking ranking = compare({bad, good, bad_twin});
    REQUIRE(ranking.ordered.size() == 3);
    CHECK(ranking.ordered[0].label == "good");
    CHECK(ranking.ordered[1].label == "bad");   // tie broken alphabetically
    CHECK(ranking.ordered[2].label == "worse");
    for (int h = 0; h < 24; ++h) {
        CHECK(ranking.hour_delta_vs_best[0][h] == doctest::Approx(0.0));
        CHECK(ranking.hour_delta_vs_best[1][h] ==
              doctest::Approx(50.0 - 2.5));  // 60 vs 40 is 50%, 41 vs 40 is 2.5%
    }
}

TEST_CASE("compare rejects mismatched spans and singletons") {
    const TrafficSeries truth = quarter_truth(kMonday, 2 * 96, 10.0);
    HybridForecast a, b;
    a.points.push_back({kMonday, 41.0, ModelKind::Sdlstm, kHour});
    b.points.push_back({kMonday + kDay, 41.0, ModelKind::Sdlstm, kHour});
    const EvalReport ra = evaluate(a, truth, DayClass::All, "a");
    const EvalReport rb = evaluate(b, truth, DayClass::All, "b");
    CHECK_THROWS_AS(compare({ra, rb}), SpanMismatch);
    CHECK_THROWS_AS(compare({ra}), SpanMismatch);
}
