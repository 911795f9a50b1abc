#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = routesig::cli::dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() / ("routesig_cli_" + std::to_string(::getpid()) + "_" +
                                             std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path operator/(const std::string& name) const { return path_ / name; }
    std::string str(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    auto r = run({"frobnicate"});
    CHECK(r.code == 2);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(r.err.find("unknown subcommand 'frobnicate'") != std::string::npos);
    CHECK(run({}).code == 2);
    CHECK(run({"detect", "--teacher"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("detect names the distilled candidate of a fully related scenario") {
    TempDir dir;
    write_file(dir / "c.json", R"({"experts":8,"domains":4,"n_per_domain":60,"relatedness":1.0,"seed":21})");
    REQUIRE(run({"synth", "--config", dir.str("c.json"), "--out-dir", dir.str("s")}).code == 0);
    const json manifest = json::parse(read_file(dir / "s/manifest.json"));
    const std::string truth = manifest["pairs"][0]["distilled"];
    auto r = run({"detect", "--teacher", dir.str("s/teacher.jsonl"), "--cand1", dir.str("s/pair1_cand1.jsonl"),
                  "--cand2", dir.str("s/pair1_cand2.jsonl"), "--out", dir.str("v.json")});
    REQUIRE(r.code == 0);
    const json v = json::parse(read_file(dir / "v.json"));
    CHECK(v["predicted_model_id"] == truth);
    CHECK(v["tie"] == false);
    CHECK(v["margin"].get<double>() > 0.0);
    CHECK(v["provenance"]["tool"].get<std::string>().rfind("routesig ", 0) == 0);
}

TEST_CASE("ingest, profile and distance chain together") {
    TempDir dir;
    write_file(dir / "t.jsonl",
               R"({"schema":"routesig.trace/1","model_id":"toy","num_layers":1,"experts_per_layer":[4]})"
               "\n"
               R"({"query_id":"a","domain":"x","layer":0,"selected":[2]})"
               "\n"
               R"({"query_id":"b","domain":"x","layer":0,"selected":[0,1,2]})"
               "\n");
    REQUIRE(run({"ingest", "--input", dir.str("t.jsonl"), "--out", dir.str("n.jsonl")}).code == 0);
    REQUIRE(run({"profile", "--traces", dir.str("n.jsonl"), "--format", "csv", "--out", dir.str("p.csv")}).code == 0);
    const auto csv = read_file(dir / "p.csv");
    CHECK(csv.find("domain,expert,share\nx,0,0.25\nx,1,0.25\nx,2,0.5\nx,3,0\n") != std::string::npos);

    REQUIRE(run({"profile", "--traces", dir.str("n.jsonl"), "--out", dir.str("p.json")}).code == 0);
    REQUIRE(run({"distance", "--teacher", dir.str("p.json"), "--student", dir.str("p.json"), "--mode", "exact",
                 "--out", dir.str("d.json")})
                .code == 0);
    const json d = json::parse(read_file(dir / "d.json"));
    CHECK(d["d_spec"] == 0.0);
    CHECK(d["method"] == "exact-brute-force");
}

TEST_CASE("bad inputs exit with 1 and a message") {
    TempDir dir;
    write_file(dir / "bad.jsonl",
               R"({"schema":"routesig.trace/1","model_id":"x","num_layers":1,"experts_per_layer":[2]})"
               "\n"
               R"({"query_id":"a","domain":"x","layer":0,"selected":[5]})"
               "\n");
    auto r = run({"ingest", "--input", dir.str("bad.jsonl"), "--out", dir.str("o.jsonl")});
    CHECK(r.code == 1);
    CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("report output is stable across runs and directories") {
    TempDir a, b;
    const std::string cfg = R"({"experts":6,"domains":3,"n_per_domain":40,"relatedness":0.8,"seed":2,"pairs":2})";
    write_file(a / "c.json", cfg);
    write_file(b / "c.json", cfg);
    for (const auto* d : {&a, &b}) {
        REQUIRE(run({"synth", "--config", d->str("c.json"), "--out-dir", d->str("s")}).code == 0);
        REQUIRE(run({"report", "--benchmark", d->str("s"), "--out", d->str("r.csv")}).code == 0);
    }
    const auto text = read_file(a / "r.csv");
    CHECK(text == read_file(b / "r.csv"));
    CHECK(text.find("# accuracy=") != std::string::npos);
    CHECK(text.find("pair2,") != std::string::npos);
}

TEST_CASE("train-proxy writes a model, traces and a loss curve") {
    TempDir dir;
    write_file(dir / "c.json", R"({"experts":4,"domains":2,"n_per_domain":20,"seed":1})");
    REQUIRE(run({"synth", "--config", dir.str("c.json"), "--out-dir", dir.str("s")}).code == 0);
    write_file(dir / "o.json", R"({"kind":"routing","traces":"s/teacher.jsonl"})");
    write_file(dir / "t.json", R"({"experts_per_layer":[4],"top_k":[2],"epochs":3,"learning_rate":0.05})");
    auto r = run({"train-proxy", "--oracle", dir.str("o.json"), "--queries", dir.str("s/queries.jsonl"), "--config",
                  dir.str("t.json"), "--out", dir.str("m.bin"), "--traces", dir.str("m.jsonl"), "--loss",
                  dir.str("loss.csv")});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "m.bin"));
    const auto loss = read_file(dir / "loss.csv");
    CHECK(loss.find("epoch,objective,distill\n0,") != std::string::npos);
    CHECK(loss.find("\n3,") != std::string::npos);

    write_file(dir / "o2.json", R"({"kind":"model","path":"m.bin"})");
    r = run({"train-proxy", "--oracle", dir.str("o2.json"), "--queries", dir.str("s/queries.jsonl"), "--config",
             dir.str("t.json"), "--out", dir.str("m2.bin"), "--traces", dir.str("m2.jsonl"), "--model-id", "shadow"});
    REQUIRE(r.code == 0);
    CHECK(read_file(dir / "m2.jsonl").find(R"("model_id":"shadow")") != std::string::npos);

    write_file(dir / "o3.json", R"({"kind":"oracle-of-delphi"})");
    r = run({"train-proxy", "--oracle", dir.str("o3.json"), "--queries", dir.str("s/queries.jsonl"), "--config",
             dir.str("t.json"), "--out", dir.str("m3.bin"), "--traces", dir.str("m3.jsonl")});
    CHECK(r.code == 1);
}

TEST_CASE("sweep writes one row per config") {
    TempDir dir;
    write_file(dir / "g.json",
               R"({"base":{"experts":6,"domains":3,"n_per_domain":30},"relatedness":[0,1],"seeds":3})");
    REQUIRE(run({"sweep", "--grid", dir.str("g.json"), "--out", dir.str("t.csv"), "--summary", dir.str("s.csv")})
                .code == 0);
    const auto table = read_file(dir / "t.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 3 + 1 + 6);
    CHECK(read_file(dir / "s.csv").find("\n1,3,1,") != std::string::npos);
}
