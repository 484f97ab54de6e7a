#ifndef TRAFFIC_MODEL_IO_HPP
#define TRAFFIC_MODEL_IO_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "traffic/arima.hpp"
#include "traffic/combiner.hpp"
#include "traffic/sdlstm.hpp"

namespace traffic {

constexpr int kModelFormatVersion = 1;

struct Provenance {
    std::uint64_t seed = 0;
    std::int64_t data_begin = 0;
    std::int64_t data_end = 0;
    TrainConfig train;
};

// On-disk model file: either a single model or a full serving bundle.
// Doubles are written with round-trip precision, so load(save(m)) is
// behaviourally identical to m.
struct ModelBundle {
    std::optional<SdLstmModel> lstm;
    std::optional<ArimaModel> arima;
    CombinerSchedule schedule = default_schedule();
    Provenance provenance;

    bool trained() const { return lstm.has_value() && arima.has_value(); }
};

// Atomic write (temp file + rename).
void save_model(const ModelBundle& bundle, const std::string& path);

// Rejects unknown format versions and reports the field path of the
// first corrupt entry.
ModelBundle load_model(const std::string& path);

std::string bundle_to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const std::string& text);

}  // namespace traffic

#endif
