#include <doctest.h>

#include <sstream>
#include <vector>

#include "appusage/ingest.hpp"
#include "appusage/io.hpp"
#include "appusage/stats.hpp"
#include "appusage/synth.hpp"

using namespace appusage;

namespace {

SynthConfig small_config(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_students = 40;
    cfg.noise_cells = 10;
    cfg.seed = seed;
    cfg.planted_effects = {{"Games.duration.evening", -0.5},
                           {"Communication.launches.morning", 0.4},
                           {"Education.n_apps.whole", 0.3}};
    return cfg;
}

}  // namespace

TEST_CASE("generation is deterministic given the seed") {
    const auto [c1, t1] = gen_cohort(small_config(7));
    const auto [c2, t2] = gen_cohort(small_config(7));
    REQUIRE(c1.students.size() == c2.students.size());
    for (std::size_t i = 0; i < c1.students.size(); ++i) {
        CHECK(c1.students[i].student_id == c2.students[i].student_id);
        CHECK(c1.students[i].cgpa == c2.students[i].cgpa);
    }
    std::ostringstream o1, o2;
    std::vector<EventLog> l1, l2;
    for (const auto& [sid, log] : c1.logs) l1.push_back(log);
    for (const auto& [sid, log] : c2.logs) l2.push_back(log);
    write_events_jsonl(l1, o1);
    write_events_jsonl(l2, o2);
    CHECK(o1.str() == o2.str());  // byte identical
    CHECK(o1.str() != [] {        // and seed sensitive
        std::ostringstream o;
        std::vector<EventLog> l;
        for (const auto& [sid, log] : gen_cohort(small_config(8)).first.logs) l.push_back(log);
        write_events_jsonl(l, o);
        return o.str();
    }());
    CHECK(t1.planted_values == t2.planted_values);
}

TEST_CASE("planted cell totals survive featurization exactly") {
    const auto cfg = small_config(11);
    const auto [cohort, truth] = gen_cohort(cfg);
    const FeatureMatrix m = feature_matrix(cohort);
    REQUIRE(m.rows.size() == cfg.n_students);
    for (const auto& pe : cfg.planted_effects) {
        const std::size_t col = m.col(pe.feature_name);
        REQUIRE(col < m.names.size());
        const auto& want = truth.planted_values.at(pe.feature_name);
        REQUIRE(want.size() == m.rows.size());
        for (std::size_t i = 0; i < m.rows.size(); ++i) {
            CHECK(m.rows[i].values[col] == want[i]);  // integer-exact
            CHECK(m.rows[i].usage_mask[col]);
        }
    }
}

TEST_CASE("generated logs validate cleanly") {
    const auto [cohort, truth] = gen_cohort(small_config(13));
    const ValidationReport rep = validate(cohort);
    CHECK(rep.violations.empty());
    CHECK(rep.unknown_category_packages == 0);
    CHECK(rep.skipped_students.empty());
    for (const auto& s : rep.per_student) {
        CHECK(s.unmatched_foregrounds == 0);
        CHECK(s.unmatched_backgrounds == 0);
        CHECK(s.events > 0);
    }
}

TEST_CASE("write / re-ingest round trip preserves features") {
    const auto [cohort, truth] = gen_cohort(small_config(17));
    write_cohort_files(cohort, "synth_rt_events.jsonl", "synth_rt_categories.csv",
                       "synth_rt_cgpa.csv");
    const Cohort parsed =
        parse_cohort("synth_rt_events.jsonl", "synth_rt_categories.csv", "synth_rt_cgpa.csv");
    std::remove("synth_rt_events.jsonl");
    std::remove("synth_rt_categories.csv");
    std::remove("synth_rt_cgpa.csv");

    const FeatureMatrix a = feature_matrix(cohort);
    const FeatureMatrix b = feature_matrix(parsed);
    REQUIRE(a.names == b.names);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].student_id == b.rows[i].student_id);
        CHECK(a.rows[i].values == b.rows[i].values);
        CHECK(a.rows[i].usage_mask == b.rows[i].usage_mask);
    }
}

TEST_CASE("rank-linked targets are recovered within tolerance") {
    // average measured Spearman across seeds must land near the target
    const double target = 0.6;
    double sum = 0.0;
    const int nseeds = 5;
    for (int seed = 0; seed < nseeds; ++seed) {
        SynthConfig cfg;
        cfg.n_students = 150;
        cfg.noise_cells = 5;
        cfg.seed = 1000 + static_cast<std::uint64_t>(seed);
        cfg.planted_effects = {{"Games.duration.evening", target}};
        const auto [cohort, truth] = gen_cohort(cfg);
        std::vector<double> cg;
        for (const auto& s : cohort.students) cg.push_back(s.cgpa);
        const CorrResult r = spearman(truth.planted_values.at("Games.duration.evening"), cg);
        CHECK(std::fabs(r.coef - target) < 0.25);  // single-seed sampling noise
        sum += r.coef;
    }
    CHECK(std::fabs(sum / nseeds - target) < 0.1);
}

TEST_CASE("negative target yields negative association") {
    SynthConfig cfg;
    cfg.n_students = 150;
    cfg.noise_cells = 5;
    cfg.seed = 3;
    cfg.planted_effects = {{"Social Media.duration.night", -0.5}};
    const auto [cohort, truth] = gen_cohort(cfg);
    std::vector<double> cg;
    for (const auto& s : cohort.students) cg.push_back(s.cgpa);
    const CorrResult r = spearman(truth.planted_values.at("Social Media.duration.night"), cg);
    CHECK(r.coef < -0.2);
    CHECK(r.p < 0.05);
}

TEST_CASE("linear outcome model: cgpa in range and coupled to the planted features") {
    SynthConfig cfg;
    cfg.n_students = 150;
    cfg.noise_cells = 5;
    cfg.seed = 29;
    cfg.outcome = OutcomeModel::LinearInPlanted;
    cfg.planted_effects = {{"Games.duration.evening", 0.0}, {"Communication.launches.morning", 0.0}};
    cfg.linear_weights = {1.2, 0.9};
    cfg.linear_intercept = 1.0;
    cfg.noise_sd = 0.2;
    const auto [cohort, truth] = gen_cohort(cfg);
    std::vector<double> cg;
    for (const auto& s : cohort.students) {
        CHECK(s.cgpa >= 0.0);
        CHECK(s.cgpa <= 4.0);
        cg.push_back(s.cgpa);
    }
    const CorrResult r = spearman(truth.planted_values.at("Games.duration.evening"), cg);
    CHECK(r.coef > 0.3);
    CHECK(r.p < 1e-4);
}

TEST_CASE("configuration errors") {
    SynthConfig cfg = small_config(1);
    SUBCASE("unknown category") {
        cfg.planted_effects = {{"Astrology.duration.whole", 0.5}};
        CHECK_THROWS_AS(gen_cohort(cfg), DataError);
    }
    SUBCASE("target magnitude out of range") {
        cfg.planted_effects = {{"Games.duration.whole", 1.0}};
        CHECK_THROWS_AS(gen_cohort(cfg), DataError);
    }
    SUBCASE("unsupported metric") {
        cfg.planted_effects = {{"Games.dur_per_app.whole", 0.5}};
        CHECK_THROWS_AS(gen_cohort(cfg), DataError);
    }
    SUBCASE("weights length mismatch") {
        cfg.outcome = OutcomeModel::LinearInPlanted;
        cfg.linear_weights = {1.0};
        CHECK_THROWS_AS(gen_cohort(cfg), DataError);
    }
}
