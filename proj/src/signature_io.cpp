#include "routesig/signature_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "routesig/report.hpp"

namespace routesig {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json rows_of(const CountMatrix& m) {
    auto rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

CountMatrix counts_from(const ordered_json& rows, Eigen::Index n_rows, Eigen::Index n_cols) {
    if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != n_rows)
        throw Error("signature file: count matrix has the wrong number of rows");
    CountMatrix m(n_rows, n_cols);
    for (Eigen::Index i = 0; i < n_rows; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols)
            throw Error("signature file: count matrix has the wrong number of columns");
        for (Eigen::Index j = 0; j < n_cols; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<std::int64_t>();
    }
    return m;
}

}  // namespace

void write_signature(std::ostream& out, const SignatureBundle& bundle, const Provenance& provenance) {
    const auto& spec = bundle.specialization;
    const auto& collab = bundle.collaboration;
    ordered_json j;
    j["schema"] = kSignatureSchema;
    j["model_id"] = bundle.model_id;
    j["layer"] = spec.layer;
    j["num_experts"] = spec.num_experts();
    j["domains"] = spec.domains;
    j["specialization"] = {{"counts", spec.counts},
                           {"total_k", spec.total_k},
                           {"selections", rows_of(spec.selections)}};
    j["collaboration"] = {{"num_queries", collab.num_queries},
                          {"pair_total", collab.pair_total},
                          {"pair_normalizer", collab.pair_normalizer()},
                          {"has_mass", collab.has_mass()},
                          {"coactivations", rows_of(collab.coactivations)}};
    j["provenance"] = {{"tool", provenance.tool},
                       {"seed", provenance.seed ? ordered_json(*provenance.seed) : ordered_json(nullptr)},
                       {"config_digest", provenance.config_digest}};
    out << j.dump(1) << '\n';
}

void write_signature(const std::filesystem::path& path, const SignatureBundle& bundle,
                     const Provenance& provenance) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write signature file " + path.string());
    write_signature(out, bundle, provenance);
}

SignatureBundle read_signature(std::istream& in, Provenance* provenance) {
    ordered_json j;
    try {
        j = ordered_json::parse(in);
        if (j.at("schema").get<std::string>() != kSignatureSchema)
            throw Error("signature file: unsupported schema");
        SignatureBundle b;
        b.model_id = j.at("model_id").get<std::string>();
        const int layer = j.at("layer").get<int>();
        const auto experts = j.at("num_experts").get<Eigen::Index>();

        auto& spec = b.specialization;
        spec.layer = layer;
        spec.domains = j.at("domains").get<std::vector<std::string>>();
        const auto& sj = j.at("specialization");
        spec.counts = sj.at("counts").get<std::vector<std::int64_t>>();
        spec.total_k = sj.at("total_k").get<std::vector<std::int64_t>>();
        const auto num_domains = static_cast<Eigen::Index>(spec.domains.size());
        if (static_cast<Eigen::Index>(spec.counts.size()) != num_domains ||
            static_cast<Eigen::Index>(spec.total_k.size()) != num_domains)
            throw Error("signature file: per-domain vectors disagree with the domain list");
        spec.selections = counts_from(sj.at("selections"), experts, num_domains);
        spec.share.resize(experts, num_domains);
        spec.kappa.resize(num_domains);
        for (Eigen::Index d = 0; d < num_domains; ++d) {
            const auto n_d = spec.counts[static_cast<std::size_t>(d)];
            const auto sum_k = spec.total_k[static_cast<std::size_t>(d)];
            if (n_d <= 0 || sum_k <= 0) throw Error("signature file: empty domain column");
            spec.kappa(d) = static_cast<double>(sum_k) / static_cast<double>(n_d);
            for (Eigen::Index i = 0; i < experts; ++i)
                spec.share(i, d) = static_cast<double>(spec.selections(i, d)) / static_cast<double>(sum_k);
        }

        auto& collab = b.collaboration;
        const auto& cj = j.at("collaboration");
        collab.layer = layer;
        collab.num_queries = cj.at("num_queries").get<std::int64_t>();
        collab.pair_total = cj.at("pair_total").get<std::int64_t>();
        collab.coactivations = counts_from(cj.at("coactivations"), experts, experts);
        collab.share = Eigen::MatrixXd::Zero(experts, experts);
        if (collab.has_mass())
            collab.share = collab.coactivations.cast<double>() / static_cast<double>(collab.pair_total);

        if (provenance) {
            const auto& pj = j.at("provenance");
            provenance->tool = pj.value("tool", std::string{});
            provenance->seed.reset();
            if (pj.contains("seed") && !pj["seed"].is_null()) provenance->seed = pj["seed"].get<std::uint64_t>();
            provenance->config_digest = pj.value("config_digest", std::string{});
        }
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("signature file: ") + e.what());
    }
}

SignatureBundle read_signature(const std::filesystem::path& path, Provenance* provenance) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open signature file " + path.string());
    return read_signature(in, provenance);
}

void write_profile_csv(std::ostream& out, const SpecializationProfile& profile) {
    out << "domain,expert,share\n";
    for (Eigen::Index d = 0; d < profile.num_domains(); ++d)
        for (Eigen::Index i = 0; i < profile.num_experts(); ++i)
            out << profile.domains[static_cast<std::size_t>(d)] << ',' << i << ','
                << format_number(profile.share(i, d)) << '\n';
}

}  // namespace routesig
