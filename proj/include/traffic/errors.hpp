#ifndef TRAFFIC_ERRORS_HPP
#define TRAFFIC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace traffic {

// Base for all domain errors. `name()` is the stable machine-readable tag
// used in CLI diagnostics and wire-protocol error responses.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& what)
        : std::runtime_error(what), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

#define TRAFFIC_DEFINE_ERROR(Type)                                   \
    class Type : public Error {                                      \
    public:                                                          \
        explicit Type(const std::string& what) : Error(#Type, what) {} \
    }

// series-core
TRAFFIC_DEFINE_ERROR(DisaggregationUnsupported);
TRAFFIC_DEFINE_ERROR(MisalignedSeries);
TRAFFIC_DEFINE_ERROR(DegenerateSeries);
TRAFFIC_DEFINE_ERROR(SeriesTooShort);
TRAFFIC_DEFINE_ERROR(EmptyMask);
TRAFFIC_DEFINE_ERROR(InvalidSeries);
TRAFFIC_DEFINE_ERROR(CsvFormatError);

// sdlstm
TRAFFIC_DEFINE_ERROR(ShapeMismatch);
TRAFFIC_DEFINE_ERROR(IntervalMismatch);

// arima
TRAFFIC_DEFINE_ERROR(NonStationaryFit);
TRAFFIC_DEFINE_ERROR(SingularNormalEquations);
TRAFFIC_DEFINE_ERROR(NoViableOrder);

// combiner / service
TRAFFIC_DEFINE_ERROR(HistoryGap);
TRAFFIC_DEFINE_ERROR(UntrainedModel);
TRAFFIC_DEFINE_ERROR(BadSchedule);
TRAFFIC_DEFINE_ERROR(MalformedMessage);

// eval
TRAFFIC_DEFINE_ERROR(ZeroActual);
TRAFFIC_DEFINE_ERROR(LengthMismatch);
TRAFFIC_DEFINE_ERROR(AlignmentError);
TRAFFIC_DEFINE_ERROR(SpanMismatch);

// persistence
TRAFFIC_DEFINE_ERROR(CorruptFile);
TRAFFIC_DEFINE_ERROR(VersionUnsupported);
TRAFFIC_DEFINE_ERROR(IoError);

#undef TRAFFIC_DEFINE_ERROR

// Errors that indicate a numeric failure rather than bad input; the CLI
// maps these to a distinct exit code.
inline bool is_numeric_error(const Error& e) {
    return e.name() == "NonStationaryFit" ||
           e.name() == "SingularNormalEquations" ||
           e.name() == "NoViableOrder";
}

}  // namespace traffic

#endif
