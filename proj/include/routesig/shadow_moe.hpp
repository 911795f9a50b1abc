#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "routesig/provenance.hpp"
#include "routesig/routing_trace.hpp"

namespace routesig {

/// Values used for the full-size proxies (AdamW, huge pretrained model). They
/// do not transfer to toy scale and are kept only for reference in artifacts.
struct ReferenceHyperparameters {
    static constexpr double learning_rate = 5e-6;
    static constexpr double load_balance_coefficient = 1e-3;
    static constexpr int batch_size = 256;
    static constexpr int epochs = 3;
};

struct ShadowMoeConfig {
    /// One entry per MoE layer.
    std::vector<int> experts_per_layer{8};
    std::vector<int> top_k{2};
    int input_dim = 8;
    int hidden_dim = 16;
    int output_dim = 8;
    /// Load-balancing weight.
    double lambda = ReferenceHyperparameters::load_balance_coefficient;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    int epochs = 20;
    int batch_size = 32;
    std::uint64_t seed = 0;

    int num_layers() const noexcept { return static_cast<int>(experts_per_layer.size()); }
    /// Throws Error on any violated invariant.
    void validate() const;

    friend bool operator==(const ShadowMoeConfig&, const ShadowMoeConfig&) = default;
};

struct LayerRouting {
    /// Softmax over all experts of the layer.
    Eigen::VectorXd gates;
    /// Top-k experts by gate, ties to the lower index, in rank order.
    std::vector<int> selected;
};

struct ForwardResult {
    Eigen::VectorXd output;
    std::vector<LayerRouting> routing;
};

/// Batch statistics entering the load-balancing term.
struct TrainingBatchStats {
    /// Mean softmax gate per expert, one vector per layer.
    std::vector<Eigen::VectorXd> mean_gates;
    double distill_loss = 0.0;
    double omega = 0.0;
};

/// Omega = sum_l E_l sum_i (pbar_i - 1/E_l)^2.
double load_balance_loss(std::span<const Eigen::VectorXd> mean_gates);
inline double load_balance_loss(const TrainingBatchStats& stats) {
    return load_balance_loss(stats.mean_gates);
}

struct ObjectiveValue {
    TrainingBatchStats stats;
    /// distill_loss + lambda * omega.
    double total = 0.0;
};

/// Toy sparse MoE: linear input projection, a stack of top-k routed layers whose
/// experts are two-layer tanh maps, and a linear output head. All parameters
/// live in one flat vector.
class ShadowMoeModel {
public:
    /// Seeded random initialization.
    explicit ShadowMoeModel(ShadowMoeConfig config);
    ShadowMoeModel(ShadowMoeConfig config, Eigen::VectorXd parameters);

    const ShadowMoeConfig& config() const noexcept { return config_; }
    const Eigen::VectorXd& parameters() const noexcept { return params_; }
    Eigen::VectorXd& parameters() noexcept { return params_; }

    ForwardResult forward(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// Mean squared error against `targets` (columns are samples) plus
    /// lambda * Omega over the same batch. Fills `gradient` when given. The
    /// top-k index sets are held fixed when differentiating.
    ObjectiveValue objective(const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                             const Eigen::Ref<const Eigen::MatrixXd>& targets, double lambda,
                             Eigen::VectorXd* gradient = nullptr) const;

    friend bool operator==(const ShadowMoeModel& a, const ShadowMoeModel& b) {
        return a.config_ == b.config_ && a.params_.size() == b.params_.size() &&
               a.params_ == b.params_;
    }

    /// Element offsets of each tensor in the flat parameter vector.
    struct Layout {
        struct Expert {
            Eigen::Index w1, b1, w2, b2;
        };
        struct Layer {
            Eigen::Index router;
            std::vector<Expert> experts;
        };
        Eigen::Index w_in = 0, b_in = 0, w_out = 0, b_out = 0, size = 0;
        std::vector<Layer> layers;
    };
    const Layout& layout() const noexcept { return layout_; }

private:
    ShadowMoeConfig config_;
    Layout layout_;
    Eigen::VectorXd params_;
};

class TrainingDiverged : public Error {
public:
    using Error::Error;
};

struct TrainResult {
    ShadowMoeModel model;
    /// Full-data objective before training, then after every epoch.
    std::vector<double> objective_curve;
    /// Distillation term alone, same indexing.
    std::vector<double> distill_curve;
};

/// Mini-batch gradient descent with momentum on MSE + lambda Omega.
/// `inputs` is input_dim x n, `targets` output_dim x n. Starts from `initial`
/// when given, otherwise from the config's seeded initialization.
TrainResult train_proxy(const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                        const Eigen::Ref<const Eigen::MatrixXd>& targets,
                        const ShadowMoeConfig& config, const ShadowMoeModel* initial = nullptr);

using Oracle = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Queries the black-box oracle once per input column, then trains on the answers.
TrainResult train_proxy_with_oracle(const Oracle& oracle, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                    const ShadowMoeConfig& config, const ShadowMoeModel* initial = nullptr);

/// Labeled query inputs shared by every model of an experiment.
struct QuerySet {
    std::vector<std::string> ids;
    std::vector<std::string> domains;
    /// input_dim x n.
    Eigen::MatrixXd inputs;

    std::size_t size() const noexcept { return ids.size(); }
};

inline constexpr std::string_view kQuerySchema = "routesig.queries/1";

/// JSONL: header {"schema", "input_dim"} then {"query_id", "domain", "x"} per query.
QuerySet read_queries(const std::filesystem::path& path);
void write_queries(const std::filesystem::path& path, const QuerySet& queries);

/// Runs the model on every query and records its top-k sets.
RoutingTraceSet export_traces(const ShadowMoeModel& model, const QuerySet& queries,
                              std::string model_id, bool include_gates = false);

void save_model(const std::filesystem::path& path, const ShadowMoeModel& model);
ShadowMoeModel load_model(const std::filesystem::path& path);

}  // namespace routesig
