#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "confgate/json_io.hpp"

namespace confgate::cli {

// A numeric table where each column has a preferred direction. best_rows
// lists, per column, every row that attains the best value.
struct ComparisonTable {
    std::string title;
    std::vector<std::string> columns;
    std::vector<bool> higher_is_better;
    std::vector<std::string> row_labels;
    std::vector<std::vector<std::optional<double>>> cells; // [row][column]

    std::vector<std::vector<std::size_t>> best_rows() const;
    std::string render() const; // best cells carry a trailing '*'
    Json to_json() const;
};

struct SweepCheck {
    std::string run;
    bool rr_monotone = true;
    std::vector<double> violating_betas; // beta where RR dropped below its predecessor
};

struct RunReport {
    std::vector<ComparisonTable> tables;
    std::vector<SweepCheck> sweep_checks;

    std::string render() const;
    Json to_json() const;
};

// Reads eval.json, pipeline.json and sweep.json from each directory. A
// directory holding none of them, or a missing directory, throws DataError.
RunReport build_run_report(std::span<const std::filesystem::path> run_dirs);

} // namespace confgate::cli
