#include "confgate/numeric/checkpoint.hpp"

#include "confgate/errors.hpp"

namespace confgate::numeric {

const std::vector<double>& Checkpoint::param(std::string_view name) const {
    for (const auto& [key, values] : params) {
        if (key == name) {
            return values;
        }
    }
    throw DataError("checkpoint has no parameter '" + std::string(name) + "'");
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
    FloatJson doc = FloatJson::object();
    doc["format_version"] = kFormatVersion;
    doc["kind"] = checkpoint.kind;
    doc["shapes"] = checkpoint.shapes;
    FloatJson params = FloatJson::object();
    for (const auto& [name, values] : checkpoint.params) {
        params[name] = float_array(values);
    }
    doc["params"] = std::move(params);
    doc["seed"] = checkpoint.seed;
    doc["hyperparams"] = checkpoint.hyperparams;
    return doc.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
    FloatJson doc;
    try {
        doc = FloatJson::parse(text);
    } catch (const FloatJson::parse_error& e) {
        throw DataError(std::string("checkpoint: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw DataError("checkpoint: expected a JSON object");
    }
    if (require_int(doc, "format_version") != kFormatVersion) {
        throw DataError("checkpoint: unsupported format_version");
    }
    Checkpoint cp;
    cp.kind = require_string(doc, "kind");
    if (cp.kind != "mlp2" && cp.kind != "bilinear") {
        throw DataError("checkpoint: unknown kind '" + cp.kind + "'");
    }
    cp.shapes = require_field(doc, "shapes");
    const auto& params = require_field(doc, "params");
    if (!params.is_object()) {
        throw DataError("checkpoint: 'params' must be an object");
    }
    for (const auto& [name, values] : params.items()) {
        cp.params.emplace_back(name, read_float_array(values, name));
    }
    const auto& seed = require_field(doc, "seed");
    if (!seed.is_number_integer()) {
        throw DataError("checkpoint: 'seed' must be an integer");
    }
    cp.seed = seed.get<std::uint64_t>();
    cp.hyperparams = require_field(doc, "hyperparams");
    return cp;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    write_text_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    try {
        return parse_checkpoint(read_text(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

} // namespace confgate::numeric
