#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

static std::string g_cli;  // path to the appusage binary, from argv

int main(int argc, char** argv) {
    if (argc > 1 && argv[argc - 1][0] != '-') g_cli = argv[argc - 1];
    doctest::Context ctx;
    ctx.applyCommandLine(argc > 1 ? argc - 1 : argc, argv);
    return ctx.run();
}

namespace {

int run(const std::string& args) {
    const int status = std::system((g_cli + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("appusage_cli_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

// generate a small cohort once and reuse it
const TempDir& synth_dir() {
    static TempDir dir;
    static bool done = false;
    if (!done) {
        const fs::path cfg = dir.path / "synth_config.json";
        std::ofstream f(cfg);
        f << json{{"n_students", 60},
                  {"seed", 5},
                  {"noise_cells", 12},
                  {"planted_effects",
                   json::array({{{"feature", "Games.duration.evening"}, {"spearman", -0.5}},
                                {{"feature", "Communication.launches.morning"}, {"spearman", 0.4}}})}}
                 .dump();
        f.close();
        REQUIRE(run("synth --config " + cfg.string() + " --out-dir " + dir.str()) == 0);
        done = true;
    }
    return dir;
}

std::string input_flags() {
    const auto& d = synth_dir();
    return "--events " + (d.path / "events.jsonl").string() + " --categories " +
           (d.path / "categories.csv").string() + " --cgpa " + (d.path / "cgpa.csv").string();
}

std::size_t count_fields(const std::string& line) {
    std::size_t n = 1;
    bool q = false;
    for (char c : line) {
        if (c == '"') q = !q;
        else if (c == ',' && !q) ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
    CHECK(run("") == 2);                     // missing subcommand
    CHECK(run("frobnicate") == 2);           // unknown subcommand
    CHECK(run("features --no-such-flag") == 2);
    CHECK(run("features") == 2);             // missing required inputs
    CHECK(run("--help") == 0);
}

TEST_CASE("data errors exit with code 1") {
    TempDir out;
    CHECK(run("validate --events missing.jsonl --categories missing.csv --cgpa missing.csv "
              "--out-dir " + out.str()) == 1);
}

TEST_CASE("synth outputs and determinism") {
    const auto& d = synth_dir();
    for (const char* f : {"events.jsonl", "categories.csv", "cgpa.csv", "truth.json",
                          "synth_resolved_config.json"})
        CHECK(fs::exists(d.path / f));

    // same seed twice: byte-identical events
    TempDir d2;
    REQUIRE(run("synth --seed 77 --out-dir " + d2.str()) == 0);
    TempDir d3;
    REQUIRE(run("synth --seed 77 --out-dir " + d3.str()) == 0);
    CHECK(slurp(d2.path / "events.jsonl") == slurp(d3.path / "events.jsonl"));
    TempDir d4;
    REQUIRE(run("synth --seed 78 --out-dir " + d4.str()) == 0);
    CHECK(slurp(d2.path / "events.jsonl") != slurp(d4.path / "events.jsonl"));
}

TEST_CASE("validate reports a clean synthetic cohort") {
    TempDir out;
    const fs::path rep = out.path / "validation.json";
    REQUIRE(run("validate " + input_flags() + " --out " + rep.string() + " --out-dir " +
                out.str()) == 0);
    const json j = json::parse(slurp(rep));
    CHECK(j.at("violations").empty());
    CHECK(j.at("total_events").get<std::size_t>() > 0);
    CHECK(j.at("unknown_category_packages") == 0);
}

TEST_CASE("features: 720 feature columns, one row per student") {
    TempDir out;
    const fs::path fcsv = out.path / "features.csv";
    REQUIRE(run("features " + input_flags() + " --out " + fcsv.string() + " --out-dir " +
                out.str()) == 0);
    std::ifstream f(fcsv);
    std::string header;
    REQUIRE(std::getline(f, header));
    CHECK(count_fields(header) == 722);  // student_id + cgpa + 720
    std::size_t rows = 0;
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) {
            CHECK(count_fields(line) == 722);
            ++rows;
        }
    CHECK(rows == 60);
    CHECK(fs::exists(out.path / "features_resolved_config.json"));
}

TEST_CASE("resolved config replay reproduces outputs byte for byte") {
    TempDir out1;
    REQUIRE(run("sessions " + input_flags() + " --out-dir " + out1.str()) == 0);
    const json cfg = json::parse(slurp(out1.path / "sessions_resolved_config.json"));

    // rebuild the command line from the resolved config
    TempDir out2;
    std::string cmd = "sessions --events " + cfg.at("events").get<std::string>() + " --categories " +
                      cfg.at("categories").get<std::string>() + " --cgpa " +
                      cfg.at("cgpa").get<std::string>() + " --format " +
                      cfg.at("format").get<std::string>() + " --tz-offset " +
                      std::to_string(cfg.at("tz_offset").get<int>()) + " --span-days " +
                      std::to_string(cfg.at("span_days").get<int>()) + " --gap-ms " +
                      std::to_string(cfg.at("gap_ms").get<long long>()) + " --micro-ms " +
                      std::to_string(cfg.at("micro_ms").get<long long>()) + " --review-ms " +
                      std::to_string(cfg.at("review_ms").get<long long>()) + " --seed " +
                      std::to_string(cfg.at("seed").get<unsigned long long>()) + " --out-dir " +
                      out2.str();
    REQUIRE(run(cmd) == 0);
    CHECK(slurp(out1.path / "sessions.csv") == slurp(out2.path / "sessions.csv"));
}

TEST_CASE("assoc emits the three FDR families") {
    TempDir out;
    REQUIRE(run("assoc " + input_flags() + " --out-dir " + out.str()) == 0);
    for (const char* f : {"assoc_aggregates.csv", "assoc_categories_whole.csv",
                          "assoc_categories_periods.csv", "assoc_summary.json"})
        CHECK(fs::exists(out.path / f));
    const json j = json::parse(slurp(out.path / "assoc_summary.json"));
    CHECK(j.at("aggregates").size() == 45);
    CHECK(j.at("categories_whole").size() == 27 * 5);
    CHECK(j.at("categories_periods").size() == 27 * 20);
}

TEST_CASE("compare supports cgpa and tertile splits") {
    TempDir out;
    REQUIRE(run("compare " + input_flags() + " --split cgpa --out-dir " + out.str()) == 0);
    CHECK(fs::exists(out.path / "compare.csv"));
    TempDir out2;
    REQUIRE(run("compare " + input_flags() +
                " --split tertile --tertile-feature phone.duration.whole --out-dir " +
                out2.str()) == 0);
    const json j = json::parse(slurp(out2.path / "compare_summary.json"));
    CHECK(j.at("n_high").get<std::size_t>() == 20);  // floor(60/3)
    CHECK(j.at("n_low").get<std::size_t>() == 20);
}

TEST_CASE("cluster with automatic eps") {
    TempDir out;
    REQUIRE(run("cluster " + input_flags() + " --eps auto --out-dir " + out.str()) == 0);
    CHECK(fs::exists(out.path / "clusters.csv"));
    CHECK(fs::exists(out.path / "kdist.csv"));
    const json j = json::parse(slurp(out.path / "cluster_summary.json"));
    CHECK(j.at("eps").get<double>() > 0.0);
}

TEST_CASE("predict runs end to end and is deterministic") {
    TempDir out1;
    REQUIRE(run("predict " + input_flags() + " --seed 9 --out-dir " + out1.str()) == 0);
    const json r1 = json::parse(slurp(out1.path / "report.json"));
    CHECK(r1.at("per_student").size() == 18);  // 60 - floor(0.7*60)
    CHECK(r1.at("test_mae").get<double>() >= 0.0);
    CHECK(r1.at("per_family").size() == 4);
    for (const auto& [id, ap] : r1.at("per_student").items()) {
        const double pred = ap.at("predicted").get<double>();
        CHECK(pred >= 0.0);
        CHECK(pred <= 4.0);
    }

    TempDir out2;
    REQUIRE(run("predict " + input_flags() + " --seed 9 --out-dir " + out2.str()) == 0);
    CHECK(slurp(out1.path / "predictions.csv") == slurp(out2.path / "predictions.csv"));
    CHECK(slurp(out1.path / "report.json") == slurp(out2.path / "report.json"));
}
