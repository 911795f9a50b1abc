#include "routesig/shadow_moe.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "routesig/rng.hpp"

namespace routesig {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void ShadowMoeConfig::validate() const {
    if (experts_per_layer.empty()) throw Error("shadow MoE needs at least one layer");
    if (top_k.size() != experts_per_layer.size())
        throw Error("top_k must list one value per layer");
    for (std::size_t l = 0; l < experts_per_layer.size(); ++l) {
        if (experts_per_layer[l] < 1) throw Error("every layer needs at least one expert");
        if (top_k[l] < 1 || top_k[l] > experts_per_layer[l])
            throw Error("top_k of layer " + std::to_string(l) + " must lie in [1, experts]");
    }
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1)
        throw Error("model dimensions must be positive");
    if (!(lambda >= 0.0)) throw Error("lambda must be nonnegative");
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("momentum must lie in [0, 1)");
    if (epochs < 1 || batch_size < 1) throw Error("epochs and batch_size must be positive");
}

double load_balance_loss(std::span<const VectorXd> mean_gates) {
    double omega = 0.0;
    for (const auto& pbar : mean_gates) {
        const auto experts = static_cast<double>(pbar.size());
        omega += experts * (pbar.array() - 1.0 / experts).square().sum();
    }
    return omega;
}

namespace {

ShadowMoeModel::Layout make_layout(const ShadowMoeConfig& c) {
    ShadowMoeModel::Layout lay;
    Index off = 0;
    auto take = [&off](Index n) {
        const Index at = off;
        off += n;
        return at;
    };
    const Index h = c.hidden_dim;
    lay.w_in = take(h * c.input_dim);
    lay.b_in = take(h);
    for (int e : c.experts_per_layer) {
        ShadowMoeModel::Layout::Layer layer;
        layer.router = take(e * h);
        for (int i = 0; i < e; ++i)
            layer.experts.push_back({take(h * h), take(h), take(h * h), take(h)});
        lay.layers.push_back(std::move(layer));
    }
    lay.w_out = take(c.output_dim * h);
    lay.b_out = take(c.output_dim);
    lay.size = off;
    return lay;
}

struct LayerCache {
    VectorXd input;
    VectorXd gates;
    std::vector<int> selected;
    double selected_mass = 0.0;
    std::vector<VectorXd> hidden;   // tanh activations per selected expert
    std::vector<VectorXd> outputs;  // expert outputs per selected expert
};

struct SampleCache {
    std::vector<LayerCache> layers;
    VectorXd last;
};

std::vector<int> top_k_indices(const VectorXd& gates, int k) {
    std::vector<int> order(static_cast<std::size_t>(gates.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&gates](int a, int b) { return gates(a) > gates(b); });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

}  // namespace

ShadowMoeModel::ShadowMoeModel(ShadowMoeConfig config) : config_(std::move(config)) {
    config_.validate();
    layout_ = make_layout(config_);
    params_ = VectorXd::Zero(layout_.size);
    Rng rng(config_.seed, "shadow_moe.init");
    auto fill = [&](Index offset, Index count, Index fan_in) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (Index i = 0; i < count; ++i) params_(offset + i) = scale * rng.normal();
    };
    const Index h = config_.hidden_dim;
    fill(layout_.w_in, h * config_.input_dim, config_.input_dim);
    for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
        const auto& layer = layout_.layers[l];
        fill(layer.router, config_.experts_per_layer[l] * h, h);
        for (const auto& ex : layer.experts) {
            fill(ex.w1, h * h, h);
            fill(ex.b1, h, 1);
            fill(ex.w2, h * h, h);
        }
    }
    fill(layout_.w_out, config_.output_dim * h, h);
}

ShadowMoeModel::ShadowMoeModel(ShadowMoeConfig config, VectorXd parameters)
    : config_(std::move(config)), params_(std::move(parameters)) {
    config_.validate();
    layout_ = make_layout(config_);
    if (params_.size() != layout_.size)
        throw Error("parameter vector has " + std::to_string(params_.size()) + " entries, expected " +
                    std::to_string(layout_.size));
}

namespace {

using ConstMap = Eigen::Map<const MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;

VectorXd run_forward(const ShadowMoeModel& m, const Eigen::Ref<const VectorXd>& x, SampleCache& cache) {
    const auto& c = m.config();
    const auto& lay = m.layout();
    const double* p = m.parameters().data();
    const Index h = c.hidden_dim;
    if (x.size() != c.input_dim)
        throw Error("input has " + std::to_string(x.size()) + " entries, expected " +
                    std::to_string(c.input_dim));

    VectorXd state = ConstMap(p + lay.w_in, h, c.input_dim) * x + ConstVecMap(p + lay.b_in, h);
    cache.layers.resize(lay.layers.size());
    for (std::size_t l = 0; l < lay.layers.size(); ++l) {
        const auto& layer = lay.layers[l];
        const Index experts = c.experts_per_layer[l];
        LayerCache& lc = cache.layers[l];
        lc.input = state;
        VectorXd logits = ConstMap(p + layer.router, experts, h) * state;
        logits.array() -= logits.maxCoeff();
        lc.gates = logits.array().exp();
        lc.gates /= lc.gates.sum();
        lc.selected = top_k_indices(lc.gates, c.top_k[l]);
        lc.selected_mass = 0.0;
        for (int e : lc.selected) lc.selected_mass += lc.gates(e);
        lc.hidden.resize(lc.selected.size());
        lc.outputs.resize(lc.selected.size());
        VectorXd next = VectorXd::Zero(h);
        for (std::size_t s = 0; s < lc.selected.size(); ++s) {
            const auto& ex = layer.experts[static_cast<std::size_t>(lc.selected[s])];
            lc.hidden[s] = (ConstMap(p + ex.w1, h, h) * state + ConstVecMap(p + ex.b1, h)).array().tanh();
            lc.outputs[s] = ConstMap(p + ex.w2, h, h) * lc.hidden[s] + ConstVecMap(p + ex.b2, h);
            next += (lc.gates(lc.selected[s]) / lc.selected_mass) * lc.outputs[s];
        }
        state = std::move(next);
    }
    cache.last = state;
    VectorXd y = ConstMap(p + lay.w_out, c.output_dim, h) * state + ConstVecMap(p + lay.b_out, c.output_dim);
    if (!y.allFinite()) throw Error("non-finite activation in shadow MoE forward pass");
    return y;
}

}  // namespace

ForwardResult ShadowMoeModel::forward(const Eigen::Ref<const VectorXd>& x) const {
    SampleCache cache;
    ForwardResult r;
    r.output = run_forward(*this, x, cache);
    for (auto& lc : cache.layers) r.routing.push_back({std::move(lc.gates), std::move(lc.selected)});
    return r;
}

ObjectiveValue ShadowMoeModel::objective(const Eigen::Ref<const MatrixXd>& inputs,
                                         const Eigen::Ref<const MatrixXd>& targets, double lambda,
                                         VectorXd* gradient) const {
    const auto& c = config_;
    const Index batch = inputs.cols();
    if (batch == 0) throw Error("objective needs at least one sample");
    if (targets.cols() != batch || targets.rows() != c.output_dim)
        throw Error("targets must be output_dim x batch");

    std::vector<SampleCache> caches(static_cast<std::size_t>(batch));
    MatrixXd outputs(c.output_dim, batch);
    for (Index b = 0; b < batch; ++b)
        outputs.col(b) = run_forward(*this, inputs.col(b), caches[static_cast<std::size_t>(b)]);

    ObjectiveValue v;
    const MatrixXd residual = outputs - targets;
    const double scale = 1.0 / static_cast<double>(batch * c.output_dim);
    v.stats.distill_loss = residual.squaredNorm() * scale;
    for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
        VectorXd pbar = VectorXd::Zero(c.experts_per_layer[l]);
        for (const auto& sc : caches) pbar += sc.layers[l].gates;
        v.stats.mean_gates.push_back(pbar / static_cast<double>(batch));
    }
    v.stats.omega = load_balance_loss(v.stats);
    v.total = v.stats.distill_loss + lambda * v.stats.omega;
    if (!gradient) return v;

    // d(lambda * Omega) / d gates(x_b), identical for every sample.
    std::vector<VectorXd> omega_grad;
    for (const auto& pbar : v.stats.mean_gates) {
        const auto experts = static_cast<double>(pbar.size());
        omega_grad.push_back(lambda * 2.0 * experts * (pbar.array() - 1.0 / experts).matrix() /
                             static_cast<double>(batch));
    }

    gradient->setZero(layout_.size);
    const double* p = params_.data();
    double* g = gradient->data();
    const Index h = c.hidden_dim;
    using Map = Eigen::Map<MatrixXd>;
    using VecMap = Eigen::Map<VectorXd>;

    for (Index b = 0; b < batch; ++b) {
        const SampleCache& sc = caches[static_cast<std::size_t>(b)];
        const VectorXd dy = 2.0 * scale * residual.col(b);
        Map(g + layout_.w_out, c.output_dim, h).noalias() += dy * sc.last.transpose();
        VecMap(g + layout_.b_out, c.output_dim) += dy;
        VectorXd grad_state = ConstMap(p + layout_.w_out, c.output_dim, h).transpose() * dy;

        for (std::size_t l = layout_.layers.size(); l-- > 0;) {
            const auto& layer = layout_.layers[l];
            const LayerCache& lc = sc.layers[l];
            const Index experts = c.experts_per_layer[l];
            VectorXd grad_input = VectorXd::Zero(h);
            VectorXd grad_gates = omega_grad[l];

            // Gates enter through w_i = gate_i / sum_{j in K} gate_j.
            double mixed = 0.0;
            std::vector<double> along(lc.selected.size());
            for (std::size_t s = 0; s < lc.selected.size(); ++s) {
                along[s] = grad_state.dot(lc.outputs[s]);
                mixed += lc.gates(lc.selected[s]) / lc.selected_mass * along[s];
            }
            for (std::size_t s = 0; s < lc.selected.size(); ++s) {
                const int e = lc.selected[s];
                grad_gates(e) += (along[s] - mixed) / lc.selected_mass;

                const auto& ex = layer.experts[static_cast<std::size_t>(e)];
                const VectorXd grad_out = (lc.gates(e) / lc.selected_mass) * grad_state;
                Map(g + ex.w2, h, h).noalias() += grad_out * lc.hidden[s].transpose();
                VecMap(g + ex.b2, h) += grad_out;
                const VectorXd grad_pre = (ConstMap(p + ex.w2, h, h).transpose() * grad_out).array() *
                                          (1.0 - lc.hidden[s].array().square());
                Map(g + ex.w1, h, h).noalias() += grad_pre * lc.input.transpose();
                VecMap(g + ex.b1, h) += grad_pre;
                grad_input.noalias() += ConstMap(p + ex.w1, h, h).transpose() * grad_pre;
            }
            const VectorXd grad_logits =
                lc.gates.array() * (grad_gates.array() - lc.gates.dot(grad_gates));
            Map(g + layer.router, experts, h).noalias() += grad_logits * lc.input.transpose();
            grad_input.noalias() += ConstMap(p + layer.router, experts, h).transpose() * grad_logits;
            grad_state = std::move(grad_input);
        }
        Map(g + layout_.w_in, h, c.input_dim).noalias() += grad_state * inputs.col(b).transpose();
        VecMap(g + layout_.b_in, h) += grad_state;
    }
    return v;
}

TrainResult train_proxy(const Eigen::Ref<const MatrixXd>& inputs, const Eigen::Ref<const MatrixXd>& targets,
                        const ShadowMoeConfig& config, const ShadowMoeModel* initial) {
    config.validate();
    if (inputs.rows() != config.input_dim) throw Error("inputs must be input_dim x n");
    if (targets.rows() != config.output_dim || targets.cols() != inputs.cols())
        throw Error("targets must be output_dim x n with one column per input");
    if (inputs.cols() == 0) throw Error("no training queries");

    TrainResult result{initial ? ShadowMoeModel(config, initial->parameters()) : ShadowMoeModel(config),
                       {}, {}};
    ShadowMoeModel& model = result.model;
    auto record = [&](int epoch) {
        ObjectiveValue full;
        try {
            full = model.objective(inputs, targets, config.lambda);
        } catch (const Error& e) {
            throw TrainingDiverged("training diverged after epoch " + std::to_string(epoch) + ": " + e.what());
        }
        if (!std::isfinite(full.total))
            throw TrainingDiverged("training diverged after epoch " + std::to_string(epoch) +
                                   ": non-finite objective");
        result.objective_curve.push_back(full.total);
        result.distill_curve.push_back(full.stats.distill_loss);
    };
    record(0);

    const Index n = inputs.cols();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(config.seed, "shadow_moe.shuffle");
    VectorXd velocity = VectorXd::Zero(model.parameters().size());
    VectorXd grad;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(std::span<Index>(order));
        for (Index start = 0; start < n; start += config.batch_size) {
            const Index count = std::min<Index>(config.batch_size, n - start);
            std::vector<Index> idx(order.begin() + start, order.begin() + start + count);
            const MatrixXd xb = inputs(Eigen::all, idx);
            const MatrixXd tb = targets(Eigen::all, idx);
            ObjectiveValue v;
            try {
                v = model.objective(xb, tb, config.lambda, &grad);
            } catch (const Error& e) {
                throw TrainingDiverged("training diverged in epoch " + std::to_string(epoch) +
                                       " at sample offset " + std::to_string(start) + ": " + e.what());
            }
            if (!std::isfinite(v.total) || !grad.allFinite())
                throw TrainingDiverged("training diverged in epoch " + std::to_string(epoch) +
                                       " at sample offset " + std::to_string(start) +
                                       ": non-finite loss or gradient");
            velocity = config.momentum * velocity - config.learning_rate * grad;
            model.parameters() += velocity;
        }
        record(epoch);
    }
    return result;
}

TrainResult train_proxy_with_oracle(const Oracle& oracle, const Eigen::Ref<const MatrixXd>& inputs,
                                    const ShadowMoeConfig& config, const ShadowMoeModel* initial) {
    MatrixXd targets(config.output_dim, inputs.cols());
    for (Index i = 0; i < inputs.cols(); ++i) {
        VectorXd answer = oracle(inputs.col(i));
        if (answer.size() != config.output_dim)
            throw Error("oracle answered with " + std::to_string(answer.size()) + " outputs, expected " +
                        std::to_string(config.output_dim));
        targets.col(i) = answer;
    }
    return train_proxy(inputs, targets, config, initial);
}

QuerySet read_queries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open query file " + path.string());
    QuerySet qs;
    std::string text;
    std::size_t line = 0;
    Index dim = -1;
    std::vector<std::vector<double>> columns;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto rec = nlohmann::json::parse(text);
            if (dim < 0) {
                if (rec.at("schema").get<std::string>() != kQuerySchema)
                    throw TraceError(line, "unsupported query schema");
                dim = rec.at("input_dim").get<Index>();
                if (dim < 1) throw TraceError(line, "input_dim must be positive");
                continue;
            }
            auto x = rec.at("x").get<std::vector<double>>();
            if (static_cast<Index>(x.size()) != dim)
                throw TraceError(line, "query input has the wrong dimension");
            qs.ids.push_back(rec.at("query_id").get<std::string>());
            qs.domains.push_back(rec.at("domain").get<std::string>());
            columns.push_back(std::move(x));
        } catch (const nlohmann::json::exception& e) {
            throw TraceError(line, std::string("malformed query record: ") + e.what());
        }
    }
    if (dim < 0) throw TraceError(line, "missing query header");
    qs.inputs.resize(dim, static_cast<Index>(columns.size()));
    for (std::size_t i = 0; i < columns.size(); ++i)
        qs.inputs.col(static_cast<Index>(i)) = Eigen::Map<const VectorXd>(columns[i].data(), dim);
    return qs;
}

void write_queries(const std::filesystem::path& path, const QuerySet& qs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write query file " + path.string());
    nlohmann::ordered_json header;
    header["schema"] = kQuerySchema;
    header["input_dim"] = qs.inputs.rows();
    out << header.dump() << '\n';
    for (std::size_t i = 0; i < qs.size(); ++i) {
        nlohmann::ordered_json rec;
        rec["query_id"] = qs.ids[i];
        rec["domain"] = qs.domains[i];
        const auto col = qs.inputs.col(static_cast<Index>(i));
        rec["x"] = std::vector<double>(col.data(), col.data() + col.size());
        out << rec.dump() << '\n';
    }
}

RoutingTraceSet export_traces(const ShadowMoeModel& model, const QuerySet& queries, std::string model_id,
                              bool include_gates) {
    if (queries.domains.size() != queries.size() || queries.inputs.cols() != static_cast<Index>(queries.size()))
        throw Error("query set is inconsistent");
    RoutingTraceSet set;
    set.model_id = std::move(model_id);
    set.experts_per_layer = model.config().experts_per_layer;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const std::string& label = queries.domains[i];
        if (label.empty()) throw Error("query '" + queries.ids[i] + "' has no domain label");
        auto it = std::find(set.domains.begin(), set.domains.end(), label);
        const int domain = static_cast<int>(it - set.domains.begin());
        if (it == set.domains.end()) set.domains.push_back(label);

        const ForwardResult r = model.forward(queries.inputs.col(static_cast<Index>(i)));
        QueryTrace t{queries.ids[i], domain, {}};
        for (std::size_t l = 0; l < r.routing.size(); ++l) {
            ExpertSelection s{static_cast<int>(l), r.routing[l].selected, {}};
            if (include_gates)
                s.gates.assign(r.routing[l].gates.data(), r.routing[l].gates.data() + r.routing[l].gates.size());
            t.selections.push_back(std::move(s));
        }
        set.traces.push_back(std::move(t));
    }
    set.validate();
    return set;
}

namespace {

static_assert(std::endian::native == std::endian::little, "model files are little-endian");
constexpr char kModelMagic[8] = {'R', 'S', 'M', 'O', 'E', 'B', 'I', 'N'};
constexpr std::uint32_t kModelVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) throw Error("model file is truncated");
    return value;
}

}  // namespace

void save_model(const std::filesystem::path& path, const ShadowMoeModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model file " + path.string());
    const auto& c = model.config();
    out.write(kModelMagic, sizeof kModelMagic);
    put<std::uint32_t>(out, kModelVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.num_layers()));
    for (int l = 0; l < c.num_layers(); ++l) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(c.experts_per_layer[static_cast<std::size_t>(l)]));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(c.top_k[static_cast<std::size_t>(l)]));
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.input_dim));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.hidden_dim));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.output_dim));
    put<double>(out, c.lambda);
    put<double>(out, c.learning_rate);
    put<double>(out, c.momentum);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.epochs));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.batch_size));
    put<std::uint64_t>(out, c.seed);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(model.parameters().size()));
    out.write(reinterpret_cast<const char*>(model.parameters().data()),
              static_cast<std::streamsize>(model.parameters().size() * sizeof(double)));
    if (!out) throw Error("failed writing model file " + path.string());
}

ShadowMoeModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model file " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0)
        throw Error("not a shadow MoE model file: " + path.string());
    if (get<std::uint32_t>(in) != kModelVersion) throw Error("unsupported model file version");
    ShadowMoeConfig c;
    const auto layers = get<std::uint32_t>(in);
    if (layers == 0 || layers > 1024) throw Error("model file has an invalid layer count");
    c.experts_per_layer.clear();
    c.top_k.clear();
    for (std::uint32_t l = 0; l < layers; ++l) {
        c.experts_per_layer.push_back(static_cast<int>(get<std::uint32_t>(in)));
        c.top_k.push_back(static_cast<int>(get<std::uint32_t>(in)));
    }
    c.input_dim = static_cast<int>(get<std::uint32_t>(in));
    c.hidden_dim = static_cast<int>(get<std::uint32_t>(in));
    c.output_dim = static_cast<int>(get<std::uint32_t>(in));
    c.lambda = get<double>(in);
    c.learning_rate = get<double>(in);
    c.momentum = get<double>(in);
    c.epochs = static_cast<int>(get<std::uint32_t>(in));
    c.batch_size = static_cast<int>(get<std::uint32_t>(in));
    c.seed = get<std::uint64_t>(in);
    const auto count = get<std::uint64_t>(in);
    if (count > (std::uint64_t{1} << 32)) throw Error("model file has an invalid parameter count");
    VectorXd params(static_cast<Index>(count));
    if (!in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * sizeof(double))))
        throw Error("model file is truncated");
    return ShadowMoeModel(std::move(c), std::move(params));
}

}  // namespace routesig
