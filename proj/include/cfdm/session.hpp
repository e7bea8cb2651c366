#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfdm/cut.hpp"
#include "cfdm/diffusion.hpp"
#include "cfdm/metrics.hpp"
#include "cfdm/net.hpp"
#include "cfdm/schedule.hpp"
#include "cfdm/transport.hpp"
#include "cfdm/wire.hpp"

namespace cfdm {

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(const std::string& what, std::uint64_t client_id = 0, std::uint64_t round = 0)
        : std::runtime_error(what), client_id_(client_id), round_(round) {}
    std::uint64_t client_id() const { return client_id_; }
    std::uint64_t round() const { return round_; }

private:
    std::uint64_t client_id_, round_;
};

// A round failed in transit and may be retried; client-side state (model,
// optimizer, rng) has been rolled back to the round start.
class RoundError : public std::runtime_error {
public:
    RoundError(const std::string& what, std::uint64_t client_id, std::uint64_t round)
        : std::runtime_error(what), client_id_(client_id), round_(round) {}
    std::uint64_t client_id() const { return client_id_; }
    std::uint64_t round() const { return round_; }

private:
    std::uint64_t client_id_, round_;
};

// Per-client progress through the six-step training round, tracked on the
// server. Out-of-order messages are rejected with the state unchanged.
enum class ClientState { Idle, Triggered, SentNoised, GotPartial, Done };

struct ClientRoundReport {
    float local_loss = 0.0f;  // mean over local pairs; 0 when none trained
    int local_pairs = 0;
    int server_pairs = 0;
    std::uint64_t bytes_sent = 0;
    bool server_noop = false;
    float server_loss = 0.0f;
};

// Client side: owns the local model, its data shard and its sampling stream.
class Client {
public:
    Client(std::uint64_t client_id, ModelParamsF model, TensorF shard, CutConfig cut,
           VarianceSchedule sched, float lr, std::uint64_t data_seed, int batch_size);

    void hello(Transport& t);

    // Blocks for one TriggerDiffusion and executes the round end to end.
    ClientRoundReport serve_round(Transport& t);

    const ModelParamsF& model() const { return model_; }
    std::uint64_t id() const { return id_; }
    int batches_per_epoch() const { return batches_per_epoch_; }
    const TensorF& last_boundary() const { return last_boundary_; }

    // Inference FLOPs executed locally during split sampling, metered by the
    // caller; exposed so evaluation can attribute them.
    std::uint64_t session_id() const { return session_; }

private:
    ClientRoundReport run_round(Transport& t, const TriggerDiffusion& trig, std::uint64_t round);

    std::uint64_t id_;
    std::uint64_t session_ = 0;
    ModelParamsF model_;
    AdamF opt_;
    TensorF shard_;
    CutConfig cut_;
    VarianceSchedule sched_;
    float lr_;
    Rng data_rng_;
    int batch_size_;
    int batches_per_epoch_;
    std::uint64_t next_round_ = 1;
    TensorF last_boundary_;
};

// Server side: owns the shared model and one state machine per client. One
// message is processed at a time; the handler validates before it mutates, so
// a rejected message never changes model or session state.
class Server {
public:
    Server(ModelParamsF shared_model, CutConfig cut, VarianceSchedule sched, float lr,
           EnergyMeter* meter = nullptr, std::size_t server_entity = 0);

    // Decodes and handles one frame; replies are returned in send order.
    std::vector<Message> handle_frame(const std::uint8_t* data, std::size_t size);
    std::vector<Message> handle(const Message& msg);

    // Server-initiated step (1): trigger a client's diffusion round.
    Message make_trigger(std::uint64_t client_id, std::uint32_t batch_size);

    const ModelParamsF& model() const { return model_; }
    ModelParamsF& model() { return model_; }
    ClientState state_of(std::uint64_t client_id) const;
    std::uint64_t rounds_completed(std::uint64_t client_id) const;
    float last_loss() const { return last_loss_; }

private:
    struct Slot {
        std::uint64_t session_id = 0;
        std::uint64_t round = 0;  // current round once triggered
        ClientState state = ClientState::Idle;
        std::uint64_t completed = 0;
    };
    Slot& slot_for(std::uint64_t client_id, std::uint64_t round, ClientState expect);

    ModelParamsF model_;
    AdamF opt_;
    CutConfig cut_;
    VarianceSchedule sched_;
    float lr_;
    EnergyMeter* meter_;
    std::size_t server_entity_;
    std::uint64_t next_session_ = 1;
    std::vector<std::pair<std::uint64_t, Slot>> slots_;  // registration order
    float last_loss_ = 0.0f;
};

struct SessionConfig {
    CutConfig cut;
    VarianceSchedule sched;
    NetConfig net;
    float lr = 1e-3f;
    int epochs = 1;
    int batch_size = 32;
    std::uint64_t root_seed = 0;
    bool record_traffic = false;
};

struct SessionReport {
    // Cumulative usage snapshots at the end of each epoch; entity indices are
    // clients 0..n-1, server last.
    std::vector<std::vector<EntityUsage>> usage_by_epoch;
    std::vector<EntityUsage> usage;  // final cumulative
    std::vector<std::vector<float>> client_loss_by_epoch;  // [epoch][client]
    std::vector<float> server_loss_by_epoch;               // [epoch], NaN when untrained
    std::vector<InProcessLink::RecordedFrame> traffic;     // when recording
};

struct TrainedSystem {
    ModelParamsF shared;
    std::vector<ModelParamsF> locals;
    SessionReport report;
};

// Runs the full six-step choreography over the in-process transport for every
// client each epoch: trigger (1), client diffusion (2), noised batch to the
// server (3), server training (4), partial denoised back (5), local client
// training (6). Clients are processed in registration order.
TrainedSystem run_simulated_session(const SessionConfig& cfg, const std::vector<TensorF>& shards);

// Plain training loops the c=1 / c=0 sessions must reproduce bit-exactly.
ModelParamsF train_local_baseline(const SessionConfig& cfg, const TensorF& shard,
                                  int client_index, std::vector<float>* loss_by_epoch = nullptr);
ModelParamsF train_central_baseline(const SessionConfig& cfg, const std::vector<TensorF>& shards,
                                    std::vector<float>* loss_by_epoch = nullptr);

struct SplitSample {
    TensorF final_images;
    TensorF boundary_images;  // state at the split step t_split
};

// Reverse chain from pure noise: the shared model executes t = T..t_split+1,
// the local model finishes t_split..1. The boundary snapshot is the initial
// noise when the server range is empty (c = 1) and the final images when the
// client range is empty (c = 0). The observer, when set, sees the reached
// noise level after every step.
SplitSample split_inference(const ModelParamsF& shared, const ModelParamsF& local,
                            const CutConfig& cut, const VarianceSchedule& sched, int n, Rng& rng,
                            EnergyMeter* meter = nullptr, std::size_t client_entity = 0,
                            std::size_t server_entity = 0,
                            const std::function<void(int, const TensorF&)>& observer = {});

// Single-model reverse chain with the identical rng consumption pattern;
// the equivalence oracle for split_inference.
TensorF monolithic_sample(const ModelParamsF& model, const VarianceSchedule& sched, int n,
                          Rng& rng);

}  // namespace cfdm
