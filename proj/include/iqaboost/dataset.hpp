#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iqaboost/errors.hpp"

namespace iqaboost {

// Distortion taxonomy. Every stimulus belongs to exactly one category.
enum class Category {
    kCompression,
    kNoise,
    kCommunication,
    kBlur,
    kColor,
    kGlobal,
    kLocal,
};

inline constexpr std::array<Category, 7> kAllCategories = {
    Category::kCompression, Category::kNoise, Category::kCommunication, Category::kBlur,
    Category::kColor,       Category::kGlobal, Category::kLocal,
};

std::string to_string(Category c);

// Throws ParseError for tokens outside the seven-member enumeration.
Category category_from_string(const std::string& token);

// One (reference, distorted, subjective score) evaluation unit.
struct StimulusRecord {
    std::string stimulus_id;
    std::string reference_path;  // stored verbatim, never resolved at load time
    std::string distorted_path;
    double subjective_score = 0.0;  // MOS or DMOS in the database's native units
    Category category = Category::kCompression;
    std::string database_id;

    bool operator==(const StimulusRecord&) const = default;
};

// Immutable after load; safe for concurrent reads.
struct Database {
    std::string database_id;
    std::vector<StimulusRecord> records;  // manifest order preserved
    double score_min = 0.0;               // derived from records at load time
    double score_max = 0.0;

    bool operator==(const Database&) const = default;
};

// Manifest format: one header line, then comma-separated rows
//   stimulus_id,reference_path,distorted_path,subjective_score,category,database_id
// UTF-8, LF line endings, no quoting (fields must not contain commas).
inline constexpr const char* kManifestHeader =
    "stimulus_id,reference_path,distorted_path,subjective_score,category,database_id";

Database load_manifest(const std::string& path);
Database parse_manifest(const std::string& text, const std::string& origin = "<memory>");

void write_manifest(const Database& db, const std::string& path);
std::string manifest_to_string(const Database& db);

// Per-category tallies; absent categories map to 0 and counts sum to |records|.
std::map<Category, std::size_t> category_counts(const Database& db);

struct CategoryCheck {
    Category category;
    std::size_t expected = 0;
    std::size_t actual = 0;
    bool matches = false;
};

// Mismatches are report content, not failures.
struct ValidationReport {
    std::string database_id;
    std::vector<CategoryCheck> checks;  // one entry per category, taxonomy order
    std::size_t expected_total = 0;
    std::size_t actual_total = 0;
    bool total_matches = false;

    bool all_match() const;
    std::vector<Category> mismatched_categories() const;

    std::string to_text() const;
    std::string to_json() const;
};

// Compares per-category counts against `expected` (absent categories expected 0).
// The total check compares |records| against `expected_total` when provided,
// otherwise against the sum of `expected` (they differ for taxonomies that
// assign one stimulus to several categories via duplicated rows).
ValidationReport validate_database(const Database& db,
                                   const std::map<Category, std::size_t>& expected,
                                   std::optional<std::size_t> expected_total = std::nullopt);

}  // namespace iqaboost
