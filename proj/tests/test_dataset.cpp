#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "iqaboost/dataset.hpp"
#include "iqaboost/rng.hpp"

using namespace iqaboost;

namespace {

const char* kSmallManifest =
    "stimulus_id,reference_path,distorted_path,subjective_score,category,database_id\n"
    "img1,refs/a.png,dist/a1.png,3.5,compression,DEMO\n"
    "img2,refs/a.png,dist/a2.png,4.25,noise,DEMO\n"
    "img3,refs/b.png,dist/b1.png,1.125,blur,DEMO\n";

Database random_database(std::uint64_t seed, std::size_t n) {
    SplitMix64 rng(seed);
    Database db;
    db.database_id = "RAND";
    for (std::size_t i = 0; i < n; ++i) {
        StimulusRecord rec;
        rec.stimulus_id = "s" + std::to_string(i);
        rec.reference_path = "r" + std::to_string(rng.next_below(8)) + ".png";
        rec.distorted_path = "d" + std::to_string(i) + ".png";
        rec.subjective_score = rng.next_double(0.0, 9.0);
        rec.category = kAllCategories[rng.next_below(kAllCategories.size())];
        rec.database_id = "RAND";
        db.records.push_back(rec);
    }
    db.score_min = db.records.front().subjective_score;
    db.score_max = db.records.front().subjective_score;
    for (const auto& r : db.records) {
        db.score_min = std::min(db.score_min, r.subjective_score);
        db.score_max = std::max(db.score_max, r.subjective_score);
    }
    return db;
}

}  // namespace

TEST_CASE("well-formed manifest loads with order preserved") {
    const Database db = parse_manifest(kSmallManifest);
    REQUIRE(db.records.size() == 3);
    CHECK(db.database_id == "DEMO");
    CHECK(db.records[0].stimulus_id == "img1");
    CHECK(db.records[1].stimulus_id == "img2");
    CHECK(db.records[2].stimulus_id == "img3");
    CHECK(db.records[0].reference_path == "refs/a.png");  // stored verbatim
    CHECK(db.records[1].subjective_score == doctest::Approx(4.25));
    CHECK(db.records[2].category == Category::kBlur);
    CHECK(db.score_min == doctest::Approx(1.125));
    CHECK(db.score_max == doctest::Approx(4.25));
}

TEST_CASE("unknown category is a parse error citing the row") {
    const std::string text =
        "stimulus_id,reference_path,distorted_path,subjective_score,category,database_id\n"
        "img1,r.png,d1.png,3.5,compression,DEMO\n"
        "img2,r.png,d2.png,4.0,blurr,DEMO\n";
    CHECK_THROWS_WITH_AS(parse_manifest(text), doctest::Contains("row 2"), ParseError);
    CHECK_THROWS_WITH_AS(parse_manifest(text), doctest::Contains("blurr"), ParseError);
}

TEST_CASE("malformed rows are parse errors") {
    const std::string header =
        "stimulus_id,reference_path,distorted_path,subjective_score,category,database_id\n";
    CHECK_THROWS_AS(parse_manifest(header + "a,r,d,notanumber,blur,DB\n"), ParseError);
    CHECK_THROWS_AS(parse_manifest(header + "a,r,d,1.0,blur\n"), ParseError);
    CHECK_THROWS_AS(parse_manifest(header + "a,r,d,1.0,blur,DB,extra\n"), ParseError);
    CHECK_THROWS_AS(parse_manifest(header), ParseError);
    CHECK_THROWS_AS(parse_manifest("bogus header\n"), ParseError);
}

TEST_CASE("duplicate stimulus_id is rejected") {
    const std::string text =
        "stimulus_id,reference_path,distorted_path,subjective_score,category,database_id\n"
        "img1,r.png,d1.png,3.5,compression,DEMO\n"
        "img1,r.png,d2.png,4.0,noise,DEMO\n";
    CHECK_THROWS_AS(parse_manifest(text), DuplicateError);
}

TEST_CASE("manifest write-then-read is the identity") {
    const Database db = random_database(42, 37);
    const std::string once = manifest_to_string(db);
    const Database reloaded = parse_manifest(once);
    CHECK(reloaded == db);
    // Regenerating from the reloaded value is byte-identical.
    CHECK(manifest_to_string(reloaded) == once);
}

TEST_CASE("manifest file round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "iqaboost_dataset_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "m.csv").string();
    const Database db = parse_manifest(kSmallManifest);
    write_manifest(db, path);
    CHECK(load_manifest(path) == db);
    std::filesystem::remove_all(dir);
}

TEST_CASE("category_counts tallies every category") {
    SUBCASE("single-category database") {
        Database db;
        db.database_id = "BLUR5";
        for (int i = 0; i < 5; ++i) {
            db.records.push_back({"s" + std::to_string(i), "r", "d", 1.0, Category::kBlur, "BLUR5"});
        }
        const auto counts = category_counts(db);
        CHECK(counts.at(Category::kBlur) == 5);
        std::size_t total = 0;
        for (const auto& [cat, count] : counts) total += count;
        CHECK(total == 5);
        CHECK(counts.at(Category::kColor) == 0);
    }
    SUBCASE("random database matches a linear-scan tally") {
        const Database db = random_database(7, 211);
        const auto counts = category_counts(db);
        std::map<Category, std::size_t> brute;
        for (Category c : kAllCategories) brute[c] = 0;
        for (const auto& rec : db.records) ++brute[rec.category];
        CHECK(counts == brute);
        std::size_t total = 0;
        for (const auto& [cat, count] : counts) total += count;
        CHECK(total == db.records.size());
    }
}

TEST_CASE("validate_database reports mismatches without failing") {
    const Database db = random_database(99, 60);
    const auto expected = category_counts(db);

    SUBCASE("self-validation has zero mismatches") {
        const ValidationReport report = validate_database(db, expected);
        CHECK(report.all_match());
        CHECK(report.mismatched_categories().empty());
        CHECK(report.total_matches);
        CHECK(report.actual_total == 60);
    }
    SUBCASE("one removed record yields exactly one mismatch") {
        Database smaller = db;
        smaller.records.pop_back();
        const ValidationReport report = validate_database(smaller, expected);
        CHECK(report.mismatched_categories().size() == 1);
        CHECK(report.mismatched_categories()[0] == db.records.back().category);
        CHECK_FALSE(report.total_matches);
    }
    SUBCASE("all-zero expectations flag every present category") {
        const ValidationReport report = validate_database(db, {});
        std::size_t present = 0;
        for (const auto& [cat, count] : expected) {
            if (count > 0) ++present;
        }
        CHECK(report.mismatched_categories().size() == present);
    }
    SUBCASE("explicit expected total overrides the category sum") {
        const ValidationReport report = validate_database(db, expected, 61);
        CHECK_FALSE(report.total_matches);
        CHECK(report.expected_total == 61);
        CHECK_FALSE(report.all_match());
    }
}

TEST_CASE("validation report renders text and JSON") {
    const Database db = parse_manifest(kSmallManifest);
    const ValidationReport report = validate_database(db, category_counts(db));
    const std::string text = report.to_text();
    CHECK(text.find("result: pass") != std::string::npos);
    CHECK(text.find("compression: expected 1, actual 1 [ok]") != std::string::npos);
    const std::string json = report.to_json();
    CHECK(json.find("\"pass\": true") != std::string::npos);
}

TEST_CASE("category names round trip") {
    for (Category c : kAllCategories) {
        CHECK(category_from_string(to_string(c)) == c);
    }
    CHECK_THROWS_AS(category_from_string("fidelity"), ParseError);
}
