#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "pinlog/cli.hpp"
#include "pinlog/text.hpp"

namespace fs = std::filesystem;
using pinlog::read_file;
using pinlog::write_file;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = pinlog::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("pinlog_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"synth", "--users", "many"}).code == 1);
    CHECK(run({"featurize"}).code == 1);  // --dataset is required
    const auto v = run({"--version"});
    CHECK(v.code == 0);
    CHECK(v.out.find(pinlog::cli::kVersion) != std::string::npos);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("validation errors exit 1 with a message") {
    const auto dir = fresh_dir("validation");
    write_file(dir / "bad.jsonl", "{\"k\":\"s\"}\n");
    const auto r = run({"ingest", (dir / "bad.jsonl").string(), "--out", (dir / "ds.json").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("line 1") != std::string::npos);
    CHECK(run({"synth", "--users", "0", "--out", dir.string()}).code == 1);
    CHECK(run({"ingest", "--out", (dir / "x.json").string()}).code == 1);
}

TEST_CASE("staged commands chain and write manifests") {
    const auto dir = fresh_dir("stages");
    const auto sessions = dir / "sessions";
    REQUIRE(run({"synth", "--users", "2", "--reps", "3", "--seed", "5", "--out", sessions.string()}).code == 0);
    CHECK(fs::exists(sessions / "pins.json"));
    CHECK(fs::exists(sessions / "manifest.json"));
    CHECK(fs::exists(sessions / "synth-u01-r2.jsonl"));

    const auto ds = dir / "dataset.json";
    auto r = run({"ingest", "--sessions", sessions.string(), "--pins", (sessions / "pins.json").string(), "--out",
                  ds.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("segments 300") != std::string::npos);
    CHECK(fs::exists(dir / "dataset.json.manifest.json"));

    const auto feats = dir / "features.csv";
    REQUIRE(run({"featurize", "--dataset", ds.string(), "--out", feats.string()}).code == 0);
    CHECK(fs::exists(dir / "features.csv.manifest.json"));

    const auto model_dir = dir / "model";
    r = run({"train", "--features", feats.string(), "--out", model_dir.string(), "--hidden", "16", "--seed", "3"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(model_dir / "model.json"));
    CHECK(fs::exists(model_dir / "history.json"));
    CHECK(fs::exists(model_dir / "split.json"));
    const auto manifest = nlohmann::json::parse(read_file(model_dir / "manifest.json"));
    CHECK(manifest.at("command") == "train");
    CHECK(manifest.at("seeds").at("train") == 3);
    CHECK(manifest.at("config").at("hidden") == 16);

    const auto report = dir / "report.json";
    r = run({"eval", "--model", (model_dir / "model.json").string(), "--features", feats.string(), "--split",
             (model_dir / "split.json").string(), "--out", report.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("Attempts") != std::string::npos);
    const auto rep = nlohmann::json::parse(read_file(report));
    CHECK(rep.at("n_test") == 50);  // one test row per class: 6 rows per class is below the 15% ideal
    CHECK(rep.at("top_k_rates").at("1").get<double>() <= rep.at("top_k_rates").at("3").get<double>());
    CHECK(fs::exists(dir / "report.txt"));
}

TEST_CASE("eval with a mismatched label space exits 1") {
    const auto dir = fresh_dir("mismatch");
    const auto sessions = dir / "sessions";
    REQUIRE(run({"synth", "--users", "1", "--reps", "3", "--out", sessions.string()}).code == 0);
    REQUIRE(run({"ingest", "--sessions", sessions.string(), "--out", (dir / "pins.json").string()}).code == 0);
    REQUIRE(run({"featurize", "--dataset", (dir / "pins.json").string(), "--out", (dir / "pins.csv").string()}).code == 0);
    REQUIRE(run({"ingest", "--sessions", sessions.string(), "--mode", "digit10", "--out",
                 (dir / "digits.json").string()})
                .code == 0);
    REQUIRE(run({"featurize", "--dataset", (dir / "digits.json").string(), "--out", (dir / "digits.csv").string()})
                .code == 0);
    REQUIRE(run({"train", "--features", (dir / "digits.csv").string(), "--mode", "digit10", "--hidden", "8", "--out",
                 (dir / "m").string()})
                .code == 0);
    const auto r = run({"eval", "--model", (dir / "m" / "model.json").string(), "--features",
                        (dir / "pins.csv").string(), "--out", (dir / "r.json").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("label space") != std::string::npos);
}

TEST_CASE("survey prints rho for a monotone table") {
    const auto dir = fresh_dir("survey");
    write_file(dir / "k.csv", "gps,camera,gyro,baro\n5,4,2,1\n5,3,2,1\n");
    write_file(dir / "c.csv", "gps,camera,gyro,baro\n5,4,3,1\n4,4,3,2\n");
    const auto r = run({"survey", "--group", "all:" + (dir / "k.csv").string() + ":" + (dir / "c.csv").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("1.000") != std::string::npos);
    CHECK(run({"survey", "--group", "broken"}).code == 1);
}

TEST_CASE("activity subcommand") {
    const auto dir = fresh_dir("activity");
    REQUIRE(run({"synth", "--activity", "sitting:10,call_event:8,sitting:10", "--out", dir.string()}).code == 0);
    CHECK(fs::exists(dir / "activity_truth.json"));
    const auto out = dir / "act.json";
    REQUIRE(run({"activity", "--trace", (dir / "activity.jsonl").string(), "--out", out.string()}).code == 0);
    const auto j = nlohmann::json::parse(read_file(out));
    REQUIRE(j.at("events").size() == 1);
    CHECK(std::abs(j["events"][0]["start_s"].get<double>() - 10.0) <= 0.5);
    CHECK(fs::exists(dir / "act.json.manifest.json"));
    CHECK(run({"synth", "--activity", "dancing:3", "--out", dir.string()}).code == 1);
}

TEST_CASE("--config supplies defaults that explicit flags override") {
    const auto dir = fresh_dir("config");
    write_file(dir / "cfg.json", R"({"users": 1, "reps": 3, "seed": 9, "out": ")" + (dir / "a").string() + "\"}");
    REQUIRE(run({"synth", "--config", (dir / "cfg.json").string()}).code == 0);
    CHECK(fs::exists(dir / "a" / "synth-u00-r2.jsonl"));
    REQUIRE(run({"synth", "--config", (dir / "cfg.json").string(), "--out", (dir / "b").string()}).code == 0);
    CHECK(fs::exists(dir / "b" / "synth-u00-r0.jsonl"));
    CHECK(read_file(dir / "a" / "synth-u00-r0.jsonl") == read_file(dir / "b" / "synth-u00-r0.jsonl"));
    CHECK(run({"synth", "--config", (dir / "missing.json").string()}).code != 0);
}

TEST_CASE("pipeline runs are byte-identical for equal seeds") {
    const auto a = fresh_dir("pipe_a");
    const auto b = fresh_dir("pipe_b");
    const std::vector<std::string> common{"pipeline", "--seed", "7", "--noise", "0.02", "--users", "2", "--reps", "3"};
    auto args_a = common;
    args_a.insert(args_a.end(), {"--out", a.string()});
    auto args_b = common;
    args_b.insert(args_b.end(), {"--out", b.string()});
    REQUIRE(run(args_a).code == 0);
    REQUIRE(run(args_b).code == 0);
    for (const char* f : {"report.json", "features.csv", "model.json", "history.json", "split.json"}) {
        CHECK_MESSAGE(read_file(a / f) == read_file(b / f), f);
    }
}

TEST_CASE("the installed binary maps exit codes") {
    const std::string bin = PINLOG_BINARY;
    CHECK(std::system((bin + " --version > /dev/null").c_str()) == 0);
    CHECK(WEXITSTATUS(std::system((bin + " nonsense 2> /dev/null").c_str())) == 1);
}
