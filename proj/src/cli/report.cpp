#include "confgate/cli/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <sstream>

#include "confgate/errors.hpp"

namespace confgate::cli {

namespace fs = std::filesystem;

std::vector<std::vector<std::size_t>> ComparisonTable::best_rows() const {
    std::vector<std::vector<std::size_t>> best(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        std::optional<double> top;
        for (const auto& row : cells) {
            if (!row[c]) {
                continue;
            }
            if (!top || (higher_is_better[c] ? *row[c] > *top : *row[c] < *top)) {
                top = row[c];
            }
        }
        for (std::size_t r = 0; r < cells.size(); ++r) {
            if (top && cells[r][c] && *cells[r][c] == *top) {
                best[c].push_back(r);
            }
        }
    }
    return best;
}

std::string ComparisonTable::render() const {
    const auto best = best_rows();
    std::vector<std::vector<std::string>> text(cells.size(),
                                               std::vector<std::string>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        for (std::size_t r = 0; r < cells.size(); ++r) {
            if (!cells[r][c]) {
                text[r][c] = "-";
                continue;
            }
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.2f", *cells[r][c]);
            text[r][c] = buf;
            // Single-row tables have nothing to compare against.
            if (cells.size() > 1 &&
                std::find(best[c].begin(), best[c].end(), r) != best[c].end()) {
                text[r][c] += "*";
            }
        }
    }
    std::size_t label_width = 3;
    for (const auto& l : row_labels) {
        label_width = std::max(label_width, l.size());
    }
    std::vector<std::size_t> widths(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        widths[c] = columns[c].size();
        for (const auto& row : text) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }
    std::ostringstream out;
    out << title << "\n";
    const auto pad = [&](const std::string& s, std::size_t w, bool left) {
        const std::string fill(w > s.size() ? w - s.size() : 0, ' ');
        out << (left ? s + fill : fill + s);
    };
    pad("run", label_width, true);
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out << "  ";
        pad(columns[c], widths[c], false);
    }
    out << "\n";
    for (std::size_t r = 0; r < cells.size(); ++r) {
        pad(row_labels[r], label_width, true);
        for (std::size_t c = 0; c < columns.size(); ++c) {
            out << "  ";
            pad(text[r][c], widths[c], false);
        }
        out << "\n";
    }
    return out.str();
}

Json ComparisonTable::to_json() const {
    Json doc = Json::object();
    doc["title"] = title;
    doc["columns"] = columns;
    Json rows = Json::array();
    const auto best = best_rows();
    for (std::size_t r = 0; r < cells.size(); ++r) {
        Json values = Json::object();
        Json marks = Json::array();
        for (std::size_t c = 0; c < columns.size(); ++c) {
            values[columns[c]] = cells[r][c] ? Json(*cells[r][c]) : Json(nullptr);
            if (std::find(best[c].begin(), best[c].end(), r) != best[c].end()) {
                marks.push_back(columns[c]);
            }
        }
        rows.push_back({{"run", row_labels[r]}, {"values", values}, {"best", marks}});
    }
    doc["rows"] = std::move(rows);
    return doc;
}

std::string RunReport::render() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < tables.size(); ++i) {
        if (i > 0) {
            out << "\n";
        }
        out << tables[i].render();
    }
    for (const auto& check : sweep_checks) {
        if (check.rr_monotone) {
            out << "\n" << check.run << ": RR monotone in beta\n";
        } else {
            out << "\n" << check.run << ": RR MONOTONICITY VIOLATED at beta =";
            for (const double b : check.violating_betas) {
                char buf[32];
                std::snprintf(buf, sizeof buf, " %.4g", b);
                out << buf;
            }
            out << "\n";
        }
    }
    return out.str();
}

Json RunReport::to_json() const {
    Json doc = Json::object();
    doc["format_version"] = kFormatVersion;
    Json list = Json::array();
    for (const auto& t : tables) {
        list.push_back(t.to_json());
    }
    doc["tables"] = std::move(list);
    Json checks = Json::array();
    for (const auto& c : sweep_checks) {
        checks.push_back({{"run", c.run},
                          {"rr_monotone", c.rr_monotone},
                          {"violating_betas", c.violating_betas}});
    }
    doc["sweep_checks"] = std::move(checks);
    return doc;
}

namespace {

Json load_json(const fs::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string run_label(const fs::path& dir) {
    auto label = dir.lexically_normal().filename().string();
    if (label.empty()) {
        label = dir.lexically_normal().parent_path().filename().string();
    }
    return label.empty() ? dir.string() : label;
}

double number(const Json& obj, const char* key, const fs::path& file) {
    if (!obj.contains(key) || !obj.at(key).is_number()) {
        throw DataError(file.string() + ": missing numeric field '" + key + "'");
    }
    return obj.at(key).get<double>();
}

} // namespace

RunReport build_run_report(std::span<const fs::path> run_dirs) {
    if (run_dirs.empty()) {
        throw UsageError("report needs at least one run directory");
    }
    struct EvalRow {
        std::string label;
        std::map<std::size_t, std::array<double, 3>> by_k;
    };
    std::vector<EvalRow> eval_rows;
    ComparisonTable pipe{"pipeline", {"accuracy", "RR"}, {true, false}, {}, {}};
    RunReport report;
    std::vector<ComparisonTable> sweeps;

    for (const auto& dir : run_dirs) {
        if (!fs::is_directory(dir)) {
            throw DataError("report: " + dir.string() + " is not a directory");
        }
        const std::string label = run_label(dir);
        bool found = false;

        if (const auto file = dir / "eval.json"; fs::exists(file)) {
            found = true;
            const Json doc = load_json(file);
            EvalRow row{label, {}};
            if (!doc.contains("reports") || !doc.at("reports").is_array()) {
                throw DataError(file.string() + ": missing 'reports' array");
            }
            for (const auto& r : doc.at("reports")) {
                const auto k = static_cast<std::size_t>(number(r, "k", file));
                row.by_k[k] = {number(r, "precision", file), number(r, "recall", file),
                               number(r, "mrr", file)};
            }
            eval_rows.push_back(std::move(row));
        }
        if (const auto file = dir / "pipeline.json"; fs::exists(file)) {
            found = true;
            const Json doc = load_json(file);
            pipe.row_labels.push_back(label);
            pipe.cells.push_back({100.0 * number(doc, "accuracy", file), number(doc, "rr", file)});
        }
        if (const auto file = dir / "sweep.json"; fs::exists(file)) {
            found = true;
            const Json doc = load_json(file);
            if (!doc.contains("rows") || !doc.at("rows").is_array()) {
                throw DataError(file.string() + ": missing 'rows' array");
            }
            ComparisonTable t{"sweep " + label, {"RR", "top1_acc", "top3_acc"}, {false, true, true},
                              {}, {}};
            SweepCheck check{label, true, {}};
            std::optional<double> prev_rr;
            for (const auto& row : doc.at("rows")) {
                const bool gating = row.value("gating", true);
                const double beta = number(row, "beta", file);
                const double rr = number(row, "rr", file);
                char buf[32];
                std::snprintf(buf, sizeof buf, "beta=%.4g", beta);
                t.row_labels.push_back(gating ? buf : "no-gating");
                t.cells.push_back({rr, 100.0 * number(row, "top1_acc", file),
                                   100.0 * number(row, "top3_acc", file)});
                if (!gating) {
                    continue;
                }
                if (prev_rr && rr < *prev_rr) {
                    check.rr_monotone = false;
                    check.violating_betas.push_back(beta);
                }
                prev_rr = rr;
            }
            sweeps.push_back(std::move(t));
            report.sweep_checks.push_back(std::move(check));
        }
        if (!found) {
            throw DataError("report: " + dir.string() +
                            " has no eval.json, pipeline.json or sweep.json");
        }
    }

    if (!eval_rows.empty()) {
        std::vector<std::size_t> ks;
        for (const auto& row : eval_rows) {
            for (const auto& [k, v] : row.by_k) {
                ks.push_back(k);
            }
        }
        std::sort(ks.begin(), ks.end());
        ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
        ComparisonTable t{"reranker (percent)", {}, {}, {}, {}};
        for (const char* metric : {"P", "R", "MRR"}) {
            for (const auto k : ks) {
                t.columns.push_back(std::string(metric) + "@" + std::to_string(k));
                t.higher_is_better.push_back(true);
            }
        }
        for (const auto& row : eval_rows) {
            t.row_labels.push_back(row.label);
            std::vector<std::optional<double>> cells;
            for (std::size_t m = 0; m < 3; ++m) {
                for (const auto k : ks) {
                    const auto it = row.by_k.find(k);
                    cells.push_back(it == row.by_k.end()
                                        ? std::nullopt
                                        : std::optional<double>(100.0 * it->second[m]));
                }
            }
            t.cells.push_back(std::move(cells));
        }
        report.tables.push_back(std::move(t));
    }
    if (!pipe.cells.empty()) {
        report.tables.push_back(std::move(pipe));
    }
    for (auto& s : sweeps) {
        report.tables.push_back(std::move(s));
    }
    return report;
}

} // namespace confgate::cli
