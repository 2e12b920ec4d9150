#include "confgate/data/formats.hpp"

#include <unordered_set>

#include "confgate/errors.hpp"
#include "confgate/json_io.hpp"

namespace confgate::data {

namespace {

void require_version(const FloatJson& meta, const std::string& where) {
    const auto it = meta.find("format_version");
    if (it == meta.end() || !it->is_number_integer() || it->get<std::int64_t>() != kFormatVersion) {
        throw DataError(where + ": expected format_version " + std::to_string(kFormatVersion));
    }
}

void require_kind(const FloatJson& meta, std::string_view kind, const std::string& where) {
    const auto it = meta.find("kind");
    if (it == meta.end() || !it->is_string() || it->get<std::string>() != kind) {
        throw DataError(where + ": expected kind \"" + std::string(kind) + "\"");
    }
}

std::size_t require_positive(const FloatJson& object, std::string_view key) {
    const std::int64_t v = require_int(object, key);
    if (v <= 0) {
        throw DataError("field '" + std::string(key) + "' must be positive");
    }
    return static_cast<std::size_t>(v);
}

std::vector<std::string> read_string_list(const FloatJson& object, std::string_view key) {
    const auto& arr = require_field(object, key);
    if (!arr.is_array()) {
        throw DataError("field '" + std::string(key) + "' must be an array of strings");
    }
    std::vector<std::string> out;
    for (const auto& v : arr) {
        if (!v.is_string()) {
            throw DataError("field '" + std::string(key) + "' must be an array of strings");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

int read_flag(const FloatJson& object, std::string_view key) {
    const std::int64_t v = require_int(object, key);
    if (v != 0 && v != 1) {
        throw DataError("field '" + std::string(key) + "' must be 0 or 1");
    }
    return static_cast<int>(v);
}

} // namespace

std::string hidden_state_meta_line(const HiddenStateMeta& meta) {
    FloatJson doc = FloatJson::object();
    doc["format_version"] = kFormatVersion;
    doc["model_id"] = meta.model_id;
    doc["dim"] = meta.dim;
    doc["layer_position"] = meta.layer_position;
    doc["token_position"] = meta.token_position;
    doc["created_at"] = meta.created_at;
    return doc.dump();
}

std::string hidden_state_record_line(const HiddenStateRecord& record) {
    FloatJson doc = FloatJson::object();
    doc["qid"] = record.qid;
    doc["cid"] = record.cid ? FloatJson(*record.cid) : FloatJson(nullptr);
    doc["label"] = record.label ? FloatJson(*record.label) : FloatJson(nullptr);
    doc["vec"] = float_array(record.vec.view());
    return doc.dump();
}

void write_hidden_states(const std::filesystem::path& path, const HiddenStateMeta& meta,
                         std::span<const HiddenStateRecord> records) {
    if (meta.dim == 0) {
        throw DataError(path.string() + ": meta.dim must be positive");
    }
    validate_records(meta, records);
    AtomicFileWriter writer(path);
    writer.write_line(hidden_state_meta_line(meta));
    for (const auto& r : records) {
        writer.write_line(hidden_state_record_line(r));
    }
    writer.commit();
}

HiddenStates read_hidden_states(const std::filesystem::path& path) {
    JsonlReader reader(path);
    FloatJson line;
    if (!reader.next(line)) {
        throw DataError(path.string() + ": empty file, expected a meta line");
    }

    HiddenStates out;
    try {
        require_version(line, reader.where());
        out.meta.model_id = require_string(line, "model_id");
        out.meta.dim = require_positive(line, "dim");
        out.meta.layer_position = require_string(line, "layer_position");
        out.meta.token_position = require_string(line, "token_position");
        if (const auto it = line.find("created_at"); it != line.end() && it->is_string()) {
            out.meta.created_at = it->get<std::string>();
        }
    } catch (const DataError& e) {
        throw DataError(reader.where() + ": " + e.what());
    }
    if (!is_known_layer_position(out.meta.layer_position) ||
        !is_known_token_position(out.meta.token_position)) {
        throw DataError(reader.where() + ": unknown layer/token position '" +
                        out.meta.layer_position + "'/'" + out.meta.token_position + "'");
    }
    if (out.meta.layer_position != kMidLayer) {
        out.warnings.push_back("layer_position is '" + out.meta.layer_position +
                               "', not mid_layer");
    }
    if (out.meta.token_position != kPreToken) {
        out.warnings.push_back("token_position is '" + out.meta.token_position +
                               "', not pre_token");
    }

    std::unordered_set<std::string> seen;
    std::optional<std::size_t> marker_count;
    while (reader.next(line)) {
        if (marker_count) {
            throw DataError(reader.where() + ": data after completeness marker");
        }
        if (line.contains("complete")) {
            const auto& done = line["complete"];
            if (!done.is_boolean() || !done.get<bool>()) {
                throw DataError(reader.where() + ": incomplete extraction marker");
            }
            marker_count = static_cast<std::size_t>(require_int(line, "n_records"));
            continue;
        }
        try {
            HiddenStateRecord r;
            r.qid = require_string(line, "qid");
            const auto& cid = require_field(line, "cid");
            if (cid.is_string()) {
                r.cid = cid.get<std::string>();
            } else if (!cid.is_null()) {
                throw DataError("field 'cid' must be a string or null");
            }
            const auto& label = require_field(line, "label");
            if (label.is_number_integer()) {
                const auto l = label.get<std::int64_t>();
                if (l != 0 && l != 1) {
                    throw DataError("field 'label' must be 0, 1 or null");
                }
                r.label = static_cast<int>(l);
            } else if (!label.is_null()) {
                throw DataError("field 'label' must be 0, 1 or null");
            }
            r.vec = DenseVector(read_float_array(require_field(line, "vec"), "vec"));
            if (r.vec.size() != out.meta.dim) {
                throw DataError("vec has length " + std::to_string(r.vec.size()) +
                                ", meta.dim is " + std::to_string(out.meta.dim));
            }
            std::string key = r.qid + '\x1f' + (r.cid ? "c:" + *r.cid : std::string("q"));
            if (!seen.insert(std::move(key)).second) {
                throw DataError("duplicate (qid, cid) = (" + r.qid + ", " +
                                (r.cid ? *r.cid : std::string("null")) + ")");
            }
            out.records.push_back(std::move(r));
        } catch (const DataError& e) {
            throw DataError(reader.where() + ": " + e.what());
        }
    }
    if (marker_count && *marker_count != out.records.size()) {
        throw DataError(path.string() + ": completeness marker counts " +
                        std::to_string(*marker_count) + " records, file holds " +
                        std::to_string(out.records.size()));
    }
    return out;
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
    AtomicFileWriter writer(path);
    FloatJson meta = FloatJson::object();
    meta["format_version"] = kFormatVersion;
    meta["kind"] = "corpus";
    meta["query_dim"] = corpus.meta().query_dim;
    meta["context_dim"] = corpus.meta().context_dim;
    writer.write_line(meta.dump());
    for (const auto& item : corpus.items()) {
        FloatJson doc = FloatJson::object();
        doc["qid"] = item.qid;
        doc["parametric_known"] = item.parametric_known;
        doc["query_features"] = float_array(item.query_features.view());
        FloatJson contexts = FloatJson::array();
        for (const auto& c : item.contexts) {
            FloatJson cj = FloatJson::object();
            cj["cid"] = c.cid;
            cj["gold_helpful"] = c.gold_helpful;
            cj["context_features"] = float_array(c.context_features.view());
            contexts.push_back(std::move(cj));
        }
        doc["contexts"] = std::move(contexts);
        writer.write_line(doc.dump());
    }
    writer.commit();
}

Corpus read_corpus(const std::filesystem::path& path) {
    JsonlReader reader(path);
    FloatJson line;
    if (!reader.next(line)) {
        throw DataError(path.string() + ": empty file, expected a meta line");
    }
    CorpusMeta meta;
    try {
        require_version(line, reader.where());
        require_kind(line, "corpus", reader.where());
        meta.query_dim = require_positive(line, "query_dim");
        meta.context_dim = require_positive(line, "context_dim");
    } catch (const DataError& e) {
        throw DataError(reader.where() + ": " + e.what());
    }

    std::vector<CorpusItem> items;
    while (reader.next(line)) {
        try {
            CorpusItem item;
            item.qid = require_string(line, "qid");
            item.parametric_known = read_flag(line, "parametric_known");
            item.query_features =
                DenseVector(read_float_array(require_field(line, "query_features"), "query_features"));
            const auto& contexts = require_field(line, "contexts");
            if (!contexts.is_array()) {
                throw DataError("field 'contexts' must be an array");
            }
            for (const auto& cj : contexts) {
                if (!cj.is_object()) {
                    throw DataError("context entries must be objects");
                }
                CorpusContext c;
                c.cid = require_string(cj, "cid");
                c.gold_helpful = read_flag(cj, "gold_helpful");
                c.context_features = DenseVector(
                    read_float_array(require_field(cj, "context_features"), "context_features"));
                item.contexts.push_back(std::move(c));
            }
            items.push_back(std::move(item));
        } catch (const DataError& e) {
            throw DataError(reader.where() + ": " + e.what());
        }
    }
    try {
        return Corpus(meta, std::move(items));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_preferences(const std::filesystem::path& path,
                       std::span<const PreferenceExample> examples, std::size_t k) {
    AtomicFileWriter writer(path);
    FloatJson meta = FloatJson::object();
    meta["format_version"] = kFormatVersion;
    meta["kind"] = "preferences";
    meta["k"] = k;
    writer.write_line(meta.dump());
    for (const auto& ex : examples) {
        ex.validate(k);
        FloatJson doc = FloatJson::object();
        doc["qid"] = ex.qid;
        doc["positives"] = ex.positives;
        doc["negatives"] = ex.negatives;
        FloatJson inc = FloatJson::object();
        for (const auto& cid : ex.positives) {
            inc[cid] = static_cast<float>(ex.inc_scores.at(cid));
        }
        for (const auto& cid : ex.negatives) {
            inc[cid] = static_cast<float>(ex.inc_scores.at(cid));
        }
        doc["inc_scores"] = std::move(inc);
        writer.write_line(doc.dump());
    }
    writer.commit();
}

PreferenceFile read_preferences(const std::filesystem::path& path) {
    JsonlReader reader(path);
    FloatJson line;
    if (!reader.next(line)) {
        throw DataError(path.string() + ": empty file, expected a meta line");
    }
    PreferenceFile out;
    try {
        require_version(line, reader.where());
        require_kind(line, "preferences", reader.where());
        out.k = require_positive(line, "k");
    } catch (const DataError& e) {
        throw DataError(reader.where() + ": " + e.what());
    }
    std::unordered_set<std::string> qids;
    while (reader.next(line)) {
        try {
            PreferenceExample ex;
            ex.qid = require_string(line, "qid");
            ex.positives = read_string_list(line, "positives");
            ex.negatives = read_string_list(line, "negatives");
            const auto& inc = require_field(line, "inc_scores");
            if (!inc.is_object()) {
                throw DataError("field 'inc_scores' must be an object");
            }
            for (const auto& [cid, value] : inc.items()) {
                if (!value.is_number()) {
                    throw DataError("inc score for " + cid + " is not a number");
                }
                ex.inc_scores[cid] = value.is_number_float() ? static_cast<double>(value.get<float>())
                                                             : value.get<double>();
            }
            ex.validate(out.k);
            if (!qids.insert(ex.qid).second) {
                throw DataError("duplicate qid " + ex.qid);
            }
            out.examples.push_back(std::move(ex));
        } catch (const DataError& e) {
            throw DataError(reader.where() + ": " + e.what());
        }
    }
    return out;
}

} // namespace confgate::data
