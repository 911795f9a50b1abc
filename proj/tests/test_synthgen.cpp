#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "routesig/synthgen.hpp"

using namespace routesig;

namespace {

std::string dump(const RoutingTraceSet& s) {
    std::ostringstream out;
    write_traces(out, s);
    return out.str();
}

}  // namespace

TEST_CASE("full relatedness without relabeling copies the teacher") {
    ScenarioConfig c;
    c.relatedness = 1.0;
    c.permute_labels = false;
    c.layers = 2;
    const auto s = generate_scenario(c);
    CHECK(s.distilled.traces == s.teacher.traces);
    CHECK(s.hidden_permutation.empty());
    CHECK(s.ground_truth == "distilled");
}

TEST_CASE("full relatedness with relabeling sits at distance zero") {
    ScenarioConfig c;
    c.relatedness = 1.0;
    c.seed = 5;
    const auto s = generate_scenario(c);
    REQUIRE(s.hidden_permutation.size() == 1);
    CHECK(s.distilled.traces != s.teacher.traces);
    const auto d = signature_distance(signature_bundle(s.teacher), signature_bundle(s.distilled),
                                      {.mode = MatchMode::Exact});
    CHECK(d.d_spec < 1e-12);
    CHECK(*d.d_collab < 1e-12);
    // The hidden relabeling moves teacher expert i to hidden(i), which is what the match recovers
    // whenever the teacher profile has no repeated rows.
    CHECK(spec_objective(signature_bundle(s.teacher).specialization.share,
                         signature_bundle(s.distilled).specialization.share, s.hidden_permutation[0]) < 1e-12);
}

TEST_CASE("scenario members share their shape") {
    ScenarioConfig c;
    c.layers = 3;
    c.domains = 5;
    c.n_per_domain = 7;
    const auto s = generate_scenario(c);
    for (const auto* m : {&s.teacher, &s.distilled, &s.scratch}) {
        CHECK(m->size() == 35);
        CHECK(m->num_layers() == 3);
        CHECK(m->domains == c.domain_labels());
        CHECK_NOTHROW(m->validate());
        for (const auto& t : m->traces)
            for (const auto& sel : t.selections) CHECK(sel.k() == c.top_k);
    }
}

TEST_CASE("generation is seed deterministic") {
    ScenarioConfig c;
    c.seed = 99;
    c.layers = 2;
    const auto a = generate_benchmark(c, 3), b = generate_benchmark(c, 3);
    CHECK(dump(a.teacher) == dump(b.teacher));
    for (std::size_t p = 0; p < 3; ++p) {
        CHECK(dump(a.pairs[p].distilled) == dump(b.pairs[p].distilled));
        CHECK(dump(a.pairs[p].scratch) == dump(b.pairs[p].scratch));
    }
    c.seed = 100;
    CHECK(dump(generate_benchmark(c, 1).teacher) != dump(a.teacher));
}

TEST_CASE("pair zero of a benchmark matches the single scenario") {
    ScenarioConfig c;
    c.seed = 3;
    const auto s = generate_scenario(c);
    const auto b = generate_benchmark(c, 4);
    CHECK(s.distilled.traces == b.pairs[0].distilled.traces);
    CHECK(s.scratch.traces == b.pairs[0].scratch.traces);
    CHECK(b.pairs[3].label == "pair4");
}

TEST_CASE("the teacher prefers its tiled block") {
    ScenarioConfig c;
    c.experts = 8;
    c.domains = 4;
    c.n_per_domain = 400;
    c.top_k = 1;
    const auto p = compute_specialization(generate_scenario(c).teacher, 0);
    for (int d = 0; d < 4; ++d) {
        const double block = p.share(2 * d, d) + p.share(2 * d + 1, d);
        CHECK(block > 0.6);
    }
}

TEST_CASE("config validation") {
    ScenarioConfig c;
    c.relatedness = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.top_k = 9;
    CHECK_THROWS_AS(generate_scenario(c), Error);
    c = {};
    c.layers = 2;
    c.layer_specificity = {0.5};
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("sweep rows") {
    std::vector<ScenarioConfig> configs;
    for (double rho : {0.0, 0.5, 1.0}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            ScenarioConfig c;
            c.relatedness = rho;
            c.seed = seed;
            configs.push_back(c);
        }
    }
    const auto rows = sweep(configs);
    CHECK(rows.size() == configs.size());
    const auto summary = summarize_by_relatedness(rows);
    REQUIRE(summary.size() == 3);
    CHECK(summary[0].relatedness == 0.0);
    CHECK(summary[2].accuracy == 1.0);
    CHECK(summary[2].accuracy > summary[0].accuracy);
    CHECK(summary[0].trials == 10);
}

TEST_CASE("query embeddings follow the scenario layout") {
    ScenarioConfig c;
    c.domains = 3;
    c.n_per_domain = 4;
    const auto q = generate_queries(c);
    CHECK(q.size() == 12);
    CHECK(q.inputs.rows() == c.query_dim);
    CHECK(q.ids[5] == "d2-1");
    CHECK(q.domains[5] == "d2");
    const auto s = generate_scenario(c);
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(s.teacher.traces[i].query_id == q.ids[i]);
}
