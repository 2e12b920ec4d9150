#include "confgate/json_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstring>
#include <sstream>

#include <unistd.h>

#include "confgate/errors.hpp"

namespace confgate {

FloatJson float_array(std::span<const double> values) {
    FloatJson array = FloatJson::array();
    array.get_ref<FloatJson::array_t&>().reserve(values.size());
    for (const double v : values) {
        array.push_back(static_cast<float>(v));
    }
    return array;
}

std::vector<double> read_float_array(const FloatJson& array, std::string_view field) {
    if (!array.is_array()) {
        throw DataError("field '" + std::string(field) + "' must be an array of numbers");
    }
    std::vector<double> out;
    out.reserve(array.size());
    for (const auto& v : array) {
        if (!v.is_number()) {
            throw DataError("field '" + std::string(field) + "' contains a non-number");
        }
        const double d = v.is_number_float() ? static_cast<double>(v.get<float>()) : v.get<double>();
        if (!std::isfinite(d)) {
            throw DataError("field '" + std::string(field) + "' contains a non-finite value");
        }
        out.push_back(d);
    }
    return out;
}

std::vector<double> quantize_f32(std::span<const double> values) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = static_cast<double>(static_cast<float>(values[i]));
    }
    return out;
}

AtomicFileWriter::AtomicFileWriter(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path_.parent_path(), ec);
        if (ec) {
            throw DataError(path_.parent_path().string() + ": cannot create directory: " +
                            ec.message());
        }
    }
    temp_path_ = path_;
    temp_path_ += ".tmp." + std::to_string(::getpid());
    out_.open(temp_path_, std::ios::binary | std::ios::trunc);
    if (!out_) {
        throw DataError(temp_path_.string() + ": cannot open for writing: " + std::strerror(errno));
    }
}

AtomicFileWriter::~AtomicFileWriter() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(temp_path_, ec);
    }
}

void AtomicFileWriter::write(std::string_view text) {
    out_.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void AtomicFileWriter::write_line(std::string_view line) {
    write(line);
    out_.put('\n');
}

void AtomicFileWriter::commit() {
    out_.flush();
    if (!out_) {
        throw DataError(temp_path_.string() + ": write failed");
    }
    out_.close();
    std::error_code ec;
    std::filesystem::rename(temp_path_, path_, ec);
    if (ec) {
        throw DataError(path_.string() + ": cannot rename temp file into place: " + ec.message());
    }
    committed_ = true;
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
    AtomicFileWriter writer(path);
    writer.write(text);
    writer.commit();
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(path.string() + ": cannot open for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

JsonlReader::JsonlReader(std::filesystem::path path) : path_(std::move(path)), in_(path_) {
    if (!in_) {
        throw DataError(path_.string() + ": cannot open for reading");
    }
}

bool JsonlReader::next(FloatJson& value) {
    while (std::getline(in_, buffer_)) {
        ++line_number_;
        if (!buffer_.empty() && buffer_.back() == '\r') {
            buffer_.pop_back();
        }
        if (buffer_.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        try {
            value = FloatJson::parse(buffer_);
        } catch (const FloatJson::parse_error& e) {
            throw DataError(where() + ": malformed JSON: " + e.what());
        }
        if (!value.is_object()) {
            throw DataError(where() + ": expected a JSON object");
        }
        return true;
    }
    return false;
}

std::string JsonlReader::where() const {
    return path_.string() + ":" + std::to_string(line_number_);
}

const FloatJson& require_field(const FloatJson& object, std::string_view key) {
    const auto it = object.find(std::string(key));
    if (it == object.end()) {
        throw DataError("missing field '" + std::string(key) + "'");
    }
    return *it;
}

std::string require_string(const FloatJson& object, std::string_view key) {
    const auto& v = require_field(object, key);
    if (!v.is_string()) {
        throw DataError("field '" + std::string(key) + "' must be a string");
    }
    return v.get<std::string>();
}

std::int64_t require_int(const FloatJson& object, std::string_view key) {
    const auto& v = require_field(object, key);
    if (!v.is_number_integer()) {
        throw DataError("field '" + std::string(key) + "' must be an integer");
    }
    return v.get<std::int64_t>();
}

} // namespace confgate
