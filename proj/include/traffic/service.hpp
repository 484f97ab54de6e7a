#ifndef TRAFFIC_SERVICE_HPP
#define TRAFFIC_SERVICE_HPP

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "traffic/combiner.hpp"
#include "traffic/model_io.hpp"

namespace traffic {

struct ServiceConfig {
    RetrainPolicy retrain;
    CombinerSchedule schedule = default_schedule();
    std::string data_dir;  // empty: in-memory only
    int port = 7700;
};

// Reads a JSON config file, then applies SDLSTM_* environment overrides
// (SDLSTM_PORT, SDLSTM_DATA_DIR, SDLSTM_SEED).
ServiceConfig load_service_config(const std::string& path);
void apply_env_overrides(ServiceConfig& config);

bool valid_node_id(const std::string& id);

// Per-detector registry behind the line protocol. Messages for one node
// are serialized by a per-node lock; distinct nodes proceed in parallel.
class NodeRegistry {
public:
    explicit NodeRegistry(ServiceConfig config);

    // One inbound JSON line -> one JSON response line (never throws).
    std::string handle_message(const std::string& line);

    std::vector<std::string> node_ids() const;

private:
    struct Node {
        NodeEntry entry;
        std::vector<HybridPoint> retained_predictions;
        std::mutex mutex;
    };

    Node& find_or_create(const std::string& id);
    Node* find(const std::string& id);
    void load_from_disk();
    void persist_history_row(const std::string& id, std::int64_t ts, double count);
    void persist_state(const std::string& id, const Node& node);
    void persist_model(const std::string& id, const Node& node);
    void persist_predictions(const std::string& id, const std::vector<HybridPoint>& points);

    std::string do_obs(const std::string& id, std::int64_t ts, double count);
    std::string do_predict(const std::string& id, std::int64_t until);
    std::string do_stats(const std::string& id);

    ServiceConfig config_;
    mutable std::mutex registry_mutex_;
    std::map<std::string, std::unique_ptr<Node>> nodes_;
};

}  // namespace traffic

#endif
