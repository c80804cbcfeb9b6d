#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "iqaboost/dataset.hpp"
#include "iqaboost/experiments.hpp"
#include "iqaboost/image.hpp"
#include "iqaboost/metrics.hpp"
#include "iqaboost/report.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace iqaboost;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidationMismatch = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
}

// Extra file-level fields carried by the same config JSON document.
struct StudyFiles {
    std::map<std::string, std::string> manifests;  // database_id -> manifest path
    std::vector<std::string> score_files;
    std::vector<std::string> declared_metrics;  // ids score files may mention beyond the registry
    std::string output_dir = ".";
};

StudyFiles files_from_json(const std::string& text) {
    StudyFiles files;
    const auto j = nlohmann::ordered_json::parse(text);
    if (j.contains("manifests")) {
        for (const auto& [db, path] : j.at("manifests").items()) {
            files.manifests[db] = path.get<std::string>();
        }
    }
    if (j.contains("score_files")) {
        files.score_files = j.at("score_files").get<std::vector<std::string>>();
    }
    if (j.contains("declared_metrics")) {
        files.declared_metrics = j.at("declared_metrics").get<std::vector<std::string>>();
    }
    files.output_dir = j.value("output_dir", files.output_dir);
    return files;
}

struct LoadedStudy {
    std::vector<Database> databases;
    std::vector<ScoreTable> tables;
};

LoadedStudy load_study_inputs(const ExperimentConfig& cfg, const StudyFiles& files) {
    MetricRegistry registry;
    for (const auto& id : cfg.registry) {
        registry.add(MetricDescriptor{id, MetricSource::kExternal, MetricPolarity::kHigherIsBetter});
    }
    // Score files may cover more estimators than this study selects.
    for (const auto& id : files.declared_metrics) {
        if (!registry.contains(id)) {
            registry.add(MetricDescriptor{id, MetricSource::kExternal, MetricPolarity::kHigherIsBetter});
        }
    }
    ScoreFragment merged;
    for (const auto& path : files.score_files) {
        merged.merge(ingest_external_scores(path, registry));
    }
    LoadedStudy study;
    for (const auto& db_id : cfg.databases) {
        auto it = files.manifests.find(db_id);
        if (it == files.manifests.end()) {
            throw IoError("config lists database '" + db_id + "' without a manifest path");
        }
        study.databases.push_back(load_manifest(it->second));
        if (study.databases.back().database_id != db_id) {
            throw ParseError("manifest '" + it->second + "' declares database '" +
                             study.databases.back().database_id + "', expected '" + db_id + "'");
        }
        study.tables.push_back(ScoreTable::assemble(study.databases.back(), registry, merged));
    }
    return study;
}

std::string resolve_path(const std::string& stored, const std::string& root) {
    fs::path p(stored);
    if (p.is_absolute()) return stored;
    return (fs::path(root) / p).string();
}

int cmd_score(const std::string& manifest_path, const std::string& out_path,
              const std::string& metrics_csv, std::string root) {
    const Database db = load_manifest(manifest_path);
    if (root.empty()) root = fs::path(manifest_path).parent_path().string();

    std::vector<std::string> wanted;
    {
        std::istringstream in(metrics_csv);
        std::string id;
        while (std::getline(in, id, ',')) {
            if (!id.empty()) wanted.push_back(id);
        }
    }
    for (const auto& id : wanted) {
        if (id != "PSNR" && id != "SSIM" && id != "MS-SSIM") {
            throw RegistryError("'" + id + "' is not a native metric (PSNR, SSIM, MS-SSIM)");
        }
    }

    const std::size_t n = db.records.size();
    std::vector<std::vector<double>> results(n, std::vector<double>(wanted.size()));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) break;
            try {
                const auto& rec = db.records[i];
                const GrayImage ref = load_gray_image(resolve_path(rec.reference_path, root));
                const GrayImage dist = load_gray_image(resolve_path(rec.distorted_path, root));
                for (std::size_t m = 0; m < wanted.size(); ++m) {
                    if (wanted[m] == "PSNR") {
                        results[i][m] = compute_psnr(ref, dist);
                    } else if (wanted[m] == "SSIM") {
                        results[i][m] = compute_ssim(ref, dist);
                    } else {
                        results[i][m] = compute_ms_ssim(ref, dist);
                    }
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failed.exchange(true)) failure = e.what();
            }
        }
    };
    const int workers = std::min<int>(worker_count(), static_cast<int>(n));
    std::vector<std::thread> pool;
    for (int t = 0; t < std::max(1, workers); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failed.load()) throw Error(failure);

    ScoreFragment fragment;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < wanted.size(); ++m) {
            fragment.set(db.records[i].stimulus_id, wanted[m], results[i][m]);
        }
    }
    write_scores(fragment, out_path);
    std::cout << "wrote " << fragment.size() << " scores to " << out_path << "\n";
    return kExitOk;
}

int cmd_validate(const std::string& manifest_path, const std::string& expected_path,
                 const std::string& json_out) {
    const Database db = load_manifest(manifest_path);
    const auto j = nlohmann::ordered_json::parse(read_file(expected_path));
    std::map<Category, std::size_t> expected;
    std::optional<std::size_t> expected_total;
    for (const auto& [key, value] : j.items()) {
        if (key == "total") {
            expected_total = value.get<std::size_t>();
        } else {
            expected[category_from_string(key)] = value.get<std::size_t>();
        }
    }
    const ValidationReport report = validate_database(db, expected, expected_total);
    std::cout << report.to_text();
    if (!json_out.empty()) write_file(json_out, report.to_json());
    return report.all_match() ? kExitOk : kExitValidationMismatch;
}

int cmd_part1(const std::string& config_path) {
    const std::string text = read_file(config_path);
    const ExperimentConfig cfg = config_from_json(text);
    const StudyFiles files = files_from_json(text);
    const LoadedStudy study = load_study_inputs(cfg, files);

    EvaluationReport report;
    for (std::size_t d = 0; d < study.databases.size(); ++d) {
        EvaluationReport one = run_single_method_study(study.databases[d], study.tables[d], cfg);
        report.provenance = one.provenance;
        report.databases.push_back(std::move(one.databases.front()));
    }

    write_file((fs::path(files.output_dir) / "part1_report.json").string(), report_to_json(report));

    ReportBundle bundle;
    bundle.provenance = report.provenance;
    for (Criterion criterion : kAllCriteria) {
        for (const std::string& cls : {std::string("existing"), std::string("nn"), std::string("svr")}) {
            std::vector<std::string> columns;
            for (const auto& id : cfg.registry) columns.push_back(cls + ":" + id);
            if (!report.databases.front().find(columns.front())) continue;
            bundle.tables.push_back(make_performance_table(
                report, criterion, columns, display_name(criterion) + " (" + cls + ")"));
        }
    }
    write_file((fs::path(files.output_dir) / "part1_tables.txt").string(), bundle_to_text(bundle));
    std::cout << "part1 report written to " << files.output_dir << "\n";
    return kExitOk;
}

int cmd_part2(const std::string& config_path, const std::string& ordering_csv,
              const std::string& criterion_name, const std::string& part1_report_path) {
    const std::string text = read_file(config_path);
    const ExperimentConfig cfg = config_from_json(text);
    const StudyFiles files = files_from_json(text);
    const LoadedStudy study = load_study_inputs(cfg, files);

    std::optional<std::vector<std::string>> explicit_ordering;
    if (!ordering_csv.empty()) {
        std::vector<std::string> ids;
        std::istringstream in(ordering_csv);
        std::string id;
        while (std::getline(in, id, ',')) ids.push_back(id);
        explicit_ordering = ids;
    }

    std::vector<Criterion> criteria;
    if (criterion_name == "all") {
        criteria.assign(kAllCriteria.begin(), kAllCriteria.end());
    } else {
        criteria.push_back(criterion_from_string(criterion_name));
    }

    std::optional<EvaluationReport> ranking_report;
    if (!explicit_ordering) {
        if (!part1_report_path.empty()) {
            ranking_report = report_from_json(read_file(part1_report_path));
        } else {
            EvaluationReport combined;
            for (std::size_t d = 0; d < study.databases.size(); ++d) {
                EvaluationReport one =
                    run_existing_method_study(study.databases[d], study.tables[d], cfg);
                combined.provenance = one.provenance;
                combined.databases.push_back(std::move(one.databases.front()));
            }
            ranking_report = std::move(combined);
        }
    }

    for (std::size_t d = 0; d < study.databases.size(); ++d) {
        const std::string& db_id = study.databases[d].database_id;
        if (explicit_ordering) {
            const FusionCurve curve = run_incremental_fusion_study(
                study.databases[d], study.tables[d], cfg, *explicit_ordering);
            const std::string stem = "fusion_" + db_id + "_custom";
            write_file((fs::path(files.output_dir) / (stem + ".json")).string(),
                       fusion_curve_to_json(curve));
            write_file((fs::path(files.output_dir) / (stem + ".csv")).string(),
                       fusion_curve_to_csv(curve));
            continue;
        }
        for (Criterion criterion : criteria) {
            const auto ordering =
                rank_estimators(*ranking_report, db_id, criterion, cfg.registry);
            const FusionCurve curve =
                run_incremental_fusion_study(study.databases[d], study.tables[d], cfg, ordering);
            const std::string stem = "fusion_" + db_id + "_" + to_string(criterion);
            write_file((fs::path(files.output_dir) / (stem + ".json")).string(),
                       fusion_curve_to_json(curve));
            write_file((fs::path(files.output_dir) / (stem + ".csv")).string(),
                       fusion_curve_to_csv(curve));
        }
    }
    std::cout << "part2 curves written to " << files.output_dir << "\n";
    return kExitOk;
}

int cmd_fuse(const std::string& config_path) {
    const std::string text = read_file(config_path);
    const ExperimentConfig cfg = config_from_json(text);
    const StudyFiles files = files_from_json(text);
    const LoadedStudy study = load_study_inputs(cfg, files);

    const EvaluationReport report = run_full_fusion_study(study.databases, study.tables, cfg);
    write_file((fs::path(files.output_dir) / "fuse_report.json").string(), report_to_json(report));

    ReportBundle bundle;
    bundle.provenance = report.provenance;
    std::vector<std::string> columns = {"existing:best"};
    for (Learner learner : cfg.learners) columns.push_back(to_string(learner) + ":best");
    for (Learner learner : cfg.learners) columns.push_back(to_string(learner) + ":boost");
    for (Criterion criterion : kAllCriteria) {
        bundle.tables.push_back(make_performance_table(report, criterion, columns));
    }
    write_file((fs::path(files.output_dir) / "fuse_tables.txt").string(), bundle_to_text(bundle));
    std::cout << "fusion study written to " << files.output_dir << "\n";
    return kExitOk;
}

int cmd_report(const std::string& input_path, std::string out_dir) {
    const std::string text = read_file(input_path);
    const auto j = nlohmann::ordered_json::parse(text);
    const std::string format = j.value("format", "");
    if (out_dir.empty()) out_dir = fs::path(input_path).parent_path().string();
    const std::string stem = fs::path(input_path).stem().string();

    if (format == "iqaboost-fusion-curve") {
        const FusionCurve curve = fusion_curve_from_json(text);
        write_file((fs::path(out_dir) / (stem + ".csv")).string(), fusion_curve_to_csv(curve));
        std::cout << "wrote " << (fs::path(out_dir) / (stem + ".csv")).string() << "\n";
        return kExitOk;
    }
    if (format == "iqaboost-report") {
        const EvaluationReport report = report_from_json(text);
        ReportBundle bundle;
        bundle.provenance = report.provenance;
        const bool is_summary = report.databases.front().find("existing:best") != nullptr;
        for (Criterion criterion : kAllCriteria) {
            if (is_summary) {
                std::vector<std::string> columns;
                for (const auto& m : report.databases.front().methods) {
                    if (m.label.ends_with(":best") || m.label.ends_with(":boost")) {
                        columns.push_back(m.label);
                    }
                }
                bundle.tables.push_back(make_performance_table(report, criterion, columns));
            } else {
                for (const std::string& cls :
                     {std::string("existing"), std::string("nn"), std::string("svr")}) {
                    std::vector<std::string> columns;
                    for (const auto& m : report.databases.front().methods) {
                        if (m.label.rfind(cls + ":", 0) == 0) columns.push_back(m.label);
                    }
                    if (columns.empty()) continue;
                    bundle.tables.push_back(make_performance_table(
                        report, criterion, columns, display_name(criterion) + " (" + cls + ")"));
                }
            }
        }
        write_file((fs::path(out_dir) / (stem + "_tables.txt")).string(), bundle_to_text(bundle));
        std::cout << "wrote " << (fs::path(out_dir) / (stem + "_tables.txt")).string() << "\n";
        return kExitOk;
    }
    throw ParseError(input_path + ": unrecognized document format '" + format + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Full-reference IQA fusion toolkit: native metrics, multi-method "
                 "boosting, and cross-validated evaluation"};
    app.require_subcommand(1);

    std::string manifest;
    std::string out_path;
    std::string metrics = "PSNR,SSIM,MS-SSIM";
    std::string root;
    auto* score = app.add_subcommand("score", "Compute native metric scores over a manifest");
    score->add_option("--manifest", manifest, "Manifest CSV")->required();
    score->add_option("--out", out_path, "Output score CSV")->required();
    score->add_option("--metrics", metrics, "Comma-separated native metric ids");
    score->add_option("--root", root, "Directory image paths resolve against");

    std::string expected;
    std::string json_out;
    auto* validate = app.add_subcommand("validate", "Check category counts against expectations");
    validate->add_option("--manifest", manifest, "Manifest CSV")->required();
    validate->add_option("--expected", expected, "Expected counts JSON")->required();
    validate->add_option("--json", json_out, "Also write the report as JSON here");

    std::string config;
    auto* part1 = app.add_subcommand("part1", "Existing vs regressed single-method study");
    part1->add_option("--config", config, "Experiment config JSON")->required();

    std::string ordering;
    std::string criterion = "all";
    std::string part1_report;
    auto* part2 = app.add_subcommand("part2", "Worst-first incremental fusion study");
    part2->add_option("--config", config, "Experiment config JSON")->required();
    part2->add_option("--ordering", ordering, "Explicit comma-separated worst-first ordering");
    part2->add_option("--criterion", criterion, "Ranking criterion: rmse, plcc, srcc, or all");
    part2->add_option("--part1-report", part1_report, "Reuse an existing part1 report for rankings");

    auto* fuse = app.add_subcommand("fuse", "Existing / regressed / boosted comparison");
    fuse->add_option("--config", config, "Experiment config JSON")->required();

    std::string input;
    std::string out_dir;
    auto* report = app.add_subcommand("report", "Render a report or curve JSON to text/CSV");
    report->add_option("--input", input, "Report or fusion-curve JSON")->required();
    report->add_option("--out-dir", out_dir, "Output directory (default: alongside input)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (score->parsed()) return cmd_score(manifest, out_path, metrics, root);
        if (validate->parsed()) return cmd_validate(manifest, expected, json_out);
        if (part1->parsed()) return cmd_part1(config);
        if (part2->parsed()) return cmd_part2(config, ordering, criterion, part1_report);
        if (fuse->parsed()) return cmd_fuse(config);
        if (report->parsed()) return cmd_report(input, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
