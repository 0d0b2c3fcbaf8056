// appusage: app-usage analytics pipeline CLI.
//
// Subcommands: validate, sessions, features, assoc, compare, cluster,
// predict, synth, report. Every run writes its resolved configuration as
// JSON next to its outputs so a run can be replayed exactly.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "appusage/cluster.hpp"
#include "appusage/featurize.hpp"
#include "appusage/ingest.hpp"
#include "appusage/io.hpp"
#include "appusage/predict.hpp"
#include "appusage/session.hpp"
#include "appusage/stats.hpp"
#include "appusage/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string events, categories, cgpa;
    std::string format = "jsonl";
    std::string out_dir = ".";
    std::int32_t tz_offset = 360;
    int span_days = 7;
    std::int64_t gap_ms = 45000;
    std::int64_t micro_ms = 15000;
    std::int64_t review_ms = 60000;
    double alpha = 0.05;
    double z_thresh = 3.0;
    double high_cgpa = 3.5;
    double low_cgpa = 3.0;
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0 = available cores
};

void add_input_flags(CLI::App* cmd, CommonOpts& o, bool required = true) {
    cmd->add_option("--events", o.events, "events file (jsonl or csv)")->required(required);
    cmd->add_option("--categories", o.categories, "categories.csv")->required(required);
    cmd->add_option("--cgpa", o.cgpa, "cgpa.csv")->required(required);
    cmd->add_option("--format", o.format, "events format: jsonl|csv")
        ->check(CLI::IsMember({"jsonl", "csv"}));
}

void add_common_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--out-dir", o.out_dir, "output directory");
    cmd->add_option("--tz-offset", o.tz_offset, "local-time offset in minutes");
    cmd->add_option("--span-days", o.span_days, "observation span in days");
    cmd->add_option("--gap-ms", o.gap_ms, "session gap threshold (ms)");
    cmd->add_option("--micro-ms", o.micro_ms, "micro session max spent time (ms)");
    cmd->add_option("--review-ms", o.review_ms, "review session max spent time (ms)");
    cmd->add_option("--alpha", o.alpha, "significance level");
    cmd->add_option("--z-thresh", o.z_thresh, "z-score outlier threshold");
    cmd->add_option("--high-cgpa", o.high_cgpa, "high CGPA holder minimum");
    cmd->add_option("--low-cgpa", o.low_cgpa, "low CGPA holder bound (exclusive)");
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--threads", o.threads, "worker threads (0 = cores)");
}

appusage::IngestOptions ingest_opts(const CommonOpts& o) {
    appusage::IngestOptions io;
    io.format = o.format == "csv" ? appusage::EventFormat::Csv : appusage::EventFormat::Jsonl;
    io.tz_offset_minutes = o.tz_offset;
    io.span_ms = static_cast<appusage::EpochMs>(o.span_days) * appusage::kMsPerDay;
    return io;
}

appusage::SessionParams session_params(const CommonOpts& o) {
    return {o.gap_ms, o.micro_ms, o.review_ms};
}

json common_config(const CommonOpts& o) {
    return {{"events", o.events},       {"categories", o.categories}, {"cgpa", o.cgpa},
            {"format", o.format},       {"out_dir", o.out_dir},       {"tz_offset", o.tz_offset},
            {"span_days", o.span_days}, {"gap_ms", o.gap_ms},         {"micro_ms", o.micro_ms},
            {"review_ms", o.review_ms}, {"alpha", o.alpha},           {"z_thresh", o.z_thresh},
            {"high_cgpa", o.high_cgpa}, {"low_cgpa", o.low_cgpa},     {"seed", o.seed},
            {"threads", o.threads}};
}

void write_resolved_config(const CommonOpts& o, const std::string& subcommand, json extra) {
    json cfg = common_config(o);
    cfg["subcommand"] = subcommand;
    for (auto& [k, v] : extra.items()) cfg[k] = v;
    fs::create_directories(o.out_dir);
    std::ofstream out(fs::path(o.out_dir) / (subcommand + "_resolved_config.json"));
    out << cfg.dump(2) << '\n';
}

appusage::Cohort load_cohort(const CommonOpts& o) {
    return appusage::parse_cohort(o.events, o.categories, o.cgpa, ingest_opts(o));
}

std::ofstream open_out(const CommonOpts& o, const std::string& name) {
    fs::create_directories(o.out_dir);
    return std::ofstream(fs::path(o.out_dir) / name);
}

int cmd_validate(const CommonOpts& o, const std::string& out_path) {
    write_resolved_config(o, "validate", {{"out", out_path}});
    const auto cohort = load_cohort(o);
    const auto rep = appusage::validate(cohort);
    const std::string text = rep.to_json().dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(out_path);
        f << text;
    }
    return 0;
}

int cmd_sessions(const CommonOpts& o) {
    write_resolved_config(o, "sessions", {});
    const auto cohort = load_cohort(o);
    auto out = open_out(o, "sessions.csv");
    out << "student_id,session_index,start_iso,end_iso,spent_ms,kind,n_intervals\n";
    for (const auto& [sid, log] : cohort.logs) {
        auto [intervals, stats] = appusage::pair_intervals(log, cohort.categories);
        const auto sessions = appusage::build_sessions(intervals, session_params(o));
        appusage::write_sessions_csv(sid, sessions, log.tz_offset_minutes, out);
    }
    return 0;
}

int cmd_features(const CommonOpts& o, const std::string& out_path, const std::string& masks_path) {
    write_resolved_config(o, "features", {{"out", out_path}, {"masks", masks_path}});
    const auto cohort = load_cohort(o);
    appusage::FeaturizeParams fp{session_params(o)};
    const auto matrix = appusage::feature_matrix(cohort, fp);
    {
        std::ofstream f(out_path);
        appusage::write_features_csv(matrix, f);
    }
    if (!masks_path.empty()) {
        std::ofstream f(masks_path);
        appusage::write_features_csv(matrix, f, true);
    }
    return 0;
}

appusage::AssocReport run_assoc(const appusage::Cohort& cohort, const CommonOpts& o,
                                appusage::FeatureMatrix* out_matrix = nullptr) {
    appusage::FeaturizeParams fp{session_params(o)};
    auto matrix = appusage::feature_matrix(cohort, fp);
    appusage::ChoiceParams cp{o.alpha, o.z_thresh};
    auto rep = appusage::assoc_report(matrix, cp);
    if (out_matrix) *out_matrix = std::move(matrix);
    return rep;
}

int cmd_assoc(const CommonOpts& o) {
    write_resolved_config(o, "assoc", {});
    const auto cohort = load_cohort(o);
    const auto rep = run_assoc(cohort, o);
    {
        auto f = open_out(o, "assoc_aggregates.csv");
        appusage::write_assoc_csv(rep.aggregates, f);
    }
    {
        auto f = open_out(o, "assoc_categories_whole.csv");
        appusage::write_assoc_csv(rep.categories_whole, f);
    }
    {
        auto f = open_out(o, "assoc_categories_periods.csv");
        appusage::write_assoc_csv(rep.categories_periods, f);
    }
    auto f = open_out(o, "assoc_summary.json");
    f << appusage::assoc_to_json(rep).dump(2) << '\n';
    return 0;
}

int cmd_compare(const CommonOpts& o, const std::string& split, const std::string& tertile_feature) {
    write_resolved_config(o, "compare", {{"split", split}, {"tertile_feature", tertile_feature}});
    const auto cohort = load_cohort(o);
    appusage::FeaturizeParams fp{session_params(o)};
    const auto matrix = appusage::feature_matrix(cohort, fp);

    appusage::GroupSplit gs;
    if (split == "cgpa") {
        gs = appusage::split_by_cgpa(cohort, {o.high_cgpa, o.low_cgpa});
    } else {
        const std::size_t c = matrix.col(tertile_feature);
        if (c >= matrix.names.size())
            throw appusage::DataError("unknown tertile feature: " + tertile_feature);
        std::map<std::string, double> values;
        for (const auto& row : matrix.rows) values[row.student_id] = row.values[c];
        gs = appusage::split_tertiles(values);
    }

    // phone-level aggregates plus core whole-day category metrics
    std::vector<std::string> features;
    for (const auto& n : matrix.names) {
        const bool phone = n.rfind("phone.", 0) == 0;
        const bool core_whole = n.size() > 6 && n.compare(n.size() - 6, 6, ".whole") == 0 &&
                                (n.find(".duration.") != std::string::npos ||
                                 n.find(".launches.") != std::string::npos ||
                                 n.find(".n_apps.") != std::string::npos);
        if (phone || core_whole) features.push_back(n);
    }
    appusage::ChoiceParams cp{o.alpha, o.z_thresh};
    const auto cells = appusage::compare_report(matrix, gs, features, cp);
    auto f = open_out(o, "compare.csv");
    appusage::write_compare_csv(cells, f);
    auto j = open_out(o, "compare_summary.json");
    j << json{{"split", split},
              {"n_high", gs.high_ids.size()},
              {"n_low", gs.low_ids.size()}}
             .dump(2)
      << '\n';
    return 0;
}

int cmd_cluster(const CommonOpts& o, const std::string& feature_list, const std::string& eps_arg,
                std::size_t min_pts) {
    write_resolved_config(o, "cluster",
                          {{"features", feature_list}, {"eps", eps_arg}, {"min_pts", min_pts}});
    const auto cohort = load_cohort(o);
    appusage::FeaturizeParams fp{session_params(o)};
    const auto matrix = appusage::feature_matrix(cohort, fp);

    std::vector<std::string> fnames;
    std::stringstream ss(feature_list);
    std::string item;
    while (std::getline(ss, item, ',')) fnames.push_back(item);

    std::vector<appusage::Point> pts;
    std::vector<std::string> ids;
    for (const auto& row : matrix.rows) {
        appusage::Point p;
        for (const auto& fn : fnames) {
            const std::size_t c = matrix.col(fn);
            if (c >= matrix.names.size()) throw appusage::DataError("unknown feature: " + fn);
            p.push_back(row.values[c]);
        }
        pts.push_back(std::move(p));
        ids.push_back(row.student_id);
    }
    const auto std_pts = appusage::standardize_points(pts);
    const auto curve = appusage::kdist_curve(std_pts, min_pts);
    double eps;
    if (eps_arg == "auto") {
        const auto sel = appusage::select_eps(curve);
        if (sel.degenerate) std::cerr << "warning: k-distance curve has no knee\n";
        eps = sel.eps;
    } else {
        eps = std::stod(eps_arg);
    }
    const auto assign = appusage::dbscan(std_pts, eps, min_pts);

    {
        auto f = open_out(o, "clusters.csv");
        f << "student_id,label\n";
        for (std::size_t i = 0; i < ids.size(); ++i)
            f << appusage::csv_quote(ids[i]) << ',' << assign.labels[i] << '\n';
    }
    {
        auto f = open_out(o, "kdist.csv");
        f << "rank,kdist\n";
        for (std::size_t i = 0; i < curve.size(); ++i)
            f << i << ',' << appusage::fmt_double(curve[i]) << '\n';
    }
    auto f = open_out(o, "cluster_summary.json");
    json sizes = json::object();
    for (const auto& [cid, n] : assign.cluster_sizes) sizes[std::to_string(cid)] = n;
    f << json{{"eps", eps}, {"min_pts", min_pts}, {"cluster_sizes", sizes}}.dump(2) << '\n';
    return 0;
}

struct PredictOpts {
    std::string selection = "corr";
    bool core_only = false;
    std::string leakage = "strict";
    double train_frac = 0.7;
    std::size_t folds = 5;
    std::string estimators = "knn,lasso,enet,baseline";
};

appusage::PipelineConfig pipeline_config(const CommonOpts& o, const PredictOpts& p) {
    appusage::PipelineConfig cfg;
    if (p.selection == "corr") cfg.selection.strategy = appusage::SelectionStrategy::CorrSignificance;
    else if (p.selection == "lasso") cfg.selection.strategy = appusage::SelectionStrategy::LassoPath;
    else cfg.selection.strategy = appusage::SelectionStrategy::ElasticNetPath;
    cfg.selection.alpha = o.alpha;
    cfg.selection.core_metrics_only = p.core_only;
    cfg.selection.leakage_mode =
        p.leakage == "paper" ? appusage::LeakageMode::Paper : appusage::LeakageMode::Strict;
    cfg.train_frac = p.train_frac;
    cfg.folds = p.folds;
    cfg.seed = o.seed;
    cfg.registry.clear();
    std::stringstream ss(p.estimators);
    std::string fam;
    const auto defaults = appusage::default_registry();
    while (std::getline(ss, fam, ',')) {
        for (const auto& spec : defaults)
            if (fam == appusage::family_name(spec.family)) cfg.registry.push_back(spec);
    }
    return cfg;
}

int cmd_predict(const CommonOpts& o, const PredictOpts& p) {
    write_resolved_config(o, "predict",
                          {{"selection", p.selection},
                           {"core_only", p.core_only},
                           {"leakage", p.leakage},
                           {"train_frac", p.train_frac},
                           {"folds", p.folds},
                           {"estimators", p.estimators}});
    const auto cohort = load_cohort(o);
    appusage::FeaturizeParams fp{session_params(o)};
    const auto matrix = appusage::feature_matrix(cohort, fp);
    const auto cfg = pipeline_config(o, p);
    const auto rep = appusage::run_pipeline(matrix, cfg);
    {
        auto f = open_out(o, "report.json");
        f << appusage::prediction_to_json(rep).dump(2) << '\n';
    }
    auto f = open_out(o, "predictions.csv");
    f << "student_id,actual,predicted\n";
    for (const auto& [id, ap] : rep.per_student)
        f << appusage::csv_quote(id) << ',' << appusage::fmt_double(ap.first) << ','
          << appusage::fmt_double(ap.second) << '\n';
    return 0;
}

appusage::SynthConfig synth_config_from_json(const json& j) {
    appusage::SynthConfig cfg;
    cfg.n_students = j.value("n_students", cfg.n_students);
    cfg.days = j.value("days", cfg.days);
    cfg.tz_offset_minutes = j.value("tz_offset_minutes", cfg.tz_offset_minutes);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.noise_cells = j.value("noise_cells", cfg.noise_cells);
    if (j.contains("categories")) cfg.categories = j.at("categories").get<std::vector<std::string>>();
    if (j.contains("planted_effects"))
        for (const auto& e : j.at("planted_effects"))
            cfg.planted_effects.push_back(
                {e.at("feature").get<std::string>(), e.at("spearman").get<double>()});
    const std::string outcome = j.value("outcome", "rank");
    cfg.outcome = outcome == "linear" ? appusage::OutcomeModel::LinearInPlanted
                                      : appusage::OutcomeModel::RankLinked;
    if (j.contains("linear_weights"))
        cfg.linear_weights = j.at("linear_weights").get<std::vector<double>>();
    cfg.linear_intercept = j.value("linear_intercept", cfg.linear_intercept);
    cfg.noise_sd = j.value("noise_sd", cfg.noise_sd);
    return cfg;
}

int cmd_synth(const CommonOpts& o, const std::string& config_path) {
    appusage::SynthConfig cfg;
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw appusage::DataError("cannot open " + config_path);
        json j;
        f >> j;
        cfg = synth_config_from_json(j);
    }
    cfg.seed = config_path.empty() ? o.seed : cfg.seed;
    write_resolved_config(o, "synth",
                          {{"config", config_path},
                           {"n_students", cfg.n_students},
                           {"days", cfg.days},
                           {"synth_seed", cfg.seed},
                           {"noise_cells", cfg.noise_cells}});
    auto [cohort, truth] = appusage::gen_cohort(cfg);
    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);
    appusage::write_cohort_files(cohort, (dir / "events.jsonl").string(),
                                 (dir / "categories.csv").string(), (dir / "cgpa.csv").string());
    json tj;
    tj["planted_values"] = json::object();
    for (const auto& [name, vals] : truth.planted_values) tj["planted_values"][name] = vals;
    json cg = json::array();
    for (const auto& p : truth.profiles)
        cg.push_back({{"student_id", p.student_id}, {"cgpa", p.cgpa}});
    tj["students"] = cg;
    std::ofstream tf(dir / "truth.json");
    tf << tj.dump(2) << '\n';
    return 0;
}

int cmd_report(const CommonOpts& o, const PredictOpts& p) {
    write_resolved_config(o, "report", {{"selection", p.selection}, {"leakage", p.leakage}});
    const auto cohort = load_cohort(o);
    const auto vrep = appusage::validate(cohort);

    appusage::FeatureMatrix matrix;
    const auto arep = run_assoc(cohort, o, &matrix);
    const fs::path dir(o.out_dir);
    {
        std::ofstream f(dir / "features.csv");
        appusage::write_features_csv(matrix, f);
    }

    std::vector<appusage::Point> pts;
    const std::size_t cd = matrix.col("phone.duration.whole");
    const std::size_t cl = matrix.col("phone.launches.whole");
    for (const auto& row : matrix.rows) pts.push_back({row.values[cd], row.values[cl]});
    json cluster_json;
    try {
        const auto std_pts = appusage::standardize_points(pts);
        const auto curve = appusage::kdist_curve(std_pts, 4);
        const auto sel = appusage::select_eps(curve);
        const auto assign = appusage::dbscan(std_pts, sel.eps, 4);
        json sizes = json::object();
        for (const auto& [cid, n] : assign.cluster_sizes) sizes[std::to_string(cid)] = n;
        cluster_json = {{"eps", sel.eps}, {"cluster_sizes", sizes}};
    } catch (const appusage::DataError& e) {
        cluster_json = {{"error", e.what()}};
    }

    const auto cfg = pipeline_config(o, p);
    const auto prep = appusage::run_pipeline(matrix, cfg);

    json bundle{{"validation", vrep.to_json()},
                {"features_path", (dir / "features.csv").string()},
                {"assoc", appusage::assoc_to_json(arep)},
                {"clusters", cluster_json},
                {"prediction", appusage::prediction_to_json(prep)}};
    std::ofstream f(dir / "report.json");
    f << bundle.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"app-usage analytics and CGPA prediction pipeline"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string validate_out, features_out = "features.csv", masks_out;
    std::string compare_split = "cgpa", tertile_feature = "phone.duration.whole";
    std::string cluster_features = "phone.duration.whole,phone.launches.whole";
    std::string eps_arg = "auto";
    std::size_t min_pts = 4;
    PredictOpts popts;
    std::string synth_config;

    auto* v = app.add_subcommand("validate", "parse inputs and report data quality");
    add_input_flags(v, o);
    add_common_flags(v, o);
    v->add_option("--out", validate_out, "report path (default stdout)");

    auto* s = app.add_subcommand("sessions", "emit per-student session table");
    add_input_flags(s, o);
    add_common_flags(s, o);

    auto* f = app.add_subcommand("features", "emit the feature matrix");
    add_input_flags(f, o);
    add_common_flags(f, o);
    f->add_option("--out", features_out, "features csv path");
    f->add_option("--masks", masks_out, "optional usage-mask csv path");

    auto* a = app.add_subcommand("assoc", "correlation battery against CGPA");
    add_input_flags(a, o);
    add_common_flags(a, o);

    auto* c = app.add_subcommand("compare", "group comparison battery");
    add_input_flags(c, o);
    add_common_flags(c, o);
    c->add_option("--split", compare_split, "cgpa|tertile")
        ->check(CLI::IsMember({"cgpa", "tertile"}));
    c->add_option("--tertile-feature", tertile_feature, "feature for the tertile split");

    auto* k = app.add_subcommand("cluster", "DBSCAN over usage summaries");
    add_input_flags(k, o);
    add_common_flags(k, o);
    k->add_option("--features", cluster_features, "comma-separated feature names");
    k->add_option("--eps", eps_arg, "auto or a numeric eps");
    k->add_option("--min-pts", min_pts, "DBSCAN min_pts");

    auto* pr = app.add_subcommand("predict", "feature selection + CV + voting ensemble");
    add_input_flags(pr, o);
    add_common_flags(pr, o);
    pr->add_option("--selection", popts.selection, "corr|lasso|enet")
        ->check(CLI::IsMember({"corr", "lasso", "enet"}));
    pr->add_flag("--core-only", popts.core_only, "core metrics only (duration/launches/n_apps)");
    pr->add_option("--leakage", popts.leakage, "strict|paper")
        ->check(CLI::IsMember({"strict", "paper"}));
    pr->add_option("--train-frac", popts.train_frac, "training fraction");
    pr->add_option("--folds", popts.folds, "CV folds");
    pr->add_option("--estimators", popts.estimators, "comma-separated families");

    auto* sy = app.add_subcommand("synth", "generate a synthetic cohort with planted ground truth");
    add_common_flags(sy, o);
    sy->add_option("--config", synth_config, "synth config json");

    auto* rp = app.add_subcommand("report", "features -> assoc -> cluster -> predict bundle");
    add_input_flags(rp, o);
    add_common_flags(rp, o);
    rp->add_option("--selection", popts.selection, "corr|lasso|enet")
        ->check(CLI::IsMember({"corr", "lasso", "enet"}));
    rp->add_flag("--core-only", popts.core_only, "core metrics only");
    rp->add_option("--leakage", popts.leakage, "strict|paper")
        ->check(CLI::IsMember({"strict", "paper"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (v->parsed()) return cmd_validate(o, validate_out);
        if (s->parsed()) return cmd_sessions(o);
        if (f->parsed()) return cmd_features(o, features_out, masks_out);
        if (a->parsed()) return cmd_assoc(o);
        if (c->parsed()) return cmd_compare(o, compare_split, tertile_feature);
        if (k->parsed()) return cmd_cluster(o, cluster_features, eps_arg, min_pts);
        if (pr->parsed()) return cmd_predict(o, popts);
        if (sy->parsed()) return cmd_synth(o, synth_config);
        if (rp->parsed()) return cmd_report(o, popts);
    } catch (const appusage::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
