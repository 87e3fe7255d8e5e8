#include "mdnkit/serialize.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mdnkit {

namespace {

std::string format_double(double v) {
    // Shortest representation that parses back to the same double.
    char buf[32];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

void encode_le(const double* values, std::int64_t count, std::string& out) {
    static_assert(sizeof(double) == 8);
    const size_t offset = out.size();
    out.resize(offset + static_cast<size_t>(count) * 8);
    std::memcpy(out.data() + offset, values, static_cast<size_t>(count) * 8);
    if constexpr (std::endian::native == std::endian::big) {
        for (std::int64_t i = 0; i < count; ++i) {
            char* p = out.data() + offset + static_cast<size_t>(i) * 8;
            std::reverse(p, p + 8);
        }
    }
}

void decode_le(const char* bytes, std::int64_t count, double* values) {
    std::memcpy(values, bytes, static_cast<size_t>(count) * 8);
    if constexpr (std::endian::native == std::endian::big) {
        auto* p = reinterpret_cast<unsigned char*>(values);
        for (std::int64_t i = 0; i < count; ++i) {
            std::reverse(p + i * 8, p + i * 8 + 8);
        }
    }
}

struct ArrayBlock {
    std::string name;
    Shape shape;
    std::int64_t count = 0;
};

std::string array_descriptor(const std::string& name, const Shape& shape) {
    std::ostringstream line;
    line << "array " << name << ' ' << shape.size();
    for (int d : shape) line << ' ' << d;
    line << '\n';
    return line.str();
}

void write_atomically(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

// Shared reader for both container kinds. Header fields keep file order so a
// load/save round trip is byte-identical.
struct ParsedFile {
    int version = 0;
    std::vector<std::pair<std::string, std::string>> fields;
    std::vector<std::pair<ArrayBlock, std::vector<double>>> arrays;

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : fields) {
            if (k == key) return &v;
        }
        return nullptr;
    }
};

ParsedFile parse_container(const std::string& path, const std::string& magic, int max_version) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const size_t nl = blob.find('\n', pos);
        if (nl == std::string::npos) throw IoError(path + ": truncated header");
        std::string line = blob.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };

    ParsedFile parsed;
    {
        std::istringstream first(next_line());
        std::string tag;
        first >> tag >> parsed.version;
        if (tag != magic) throw IoError(path + ": not a " + magic + " file");
        if (parsed.version < 1 || parsed.version > max_version) {
            throw IoError(path + ": format version " + std::to_string(parsed.version) +
                          " not supported (max " + std::to_string(max_version) + ")");
        }
    }
    std::int64_t declared_arrays = -1;
    for (;;) {
        std::string line = next_line();
        if (line == "end-header") break;
        const size_t eq = line.find(" = ");
        if (eq == std::string::npos) throw IoError(path + ": malformed header line: " + line);
        parsed.fields.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    }
    if (const std::string* v = parsed.find("arrays")) {
        declared_arrays = std::stoll(*v);
    } else {
        throw IoError(path + ": header missing arrays count");
    }
    if (!parsed.find("checksum")) throw IoError(path + ": header missing checksum");

    std::uint64_t checksum = 0xcbf29ce484222325ULL;  // FNV-1a running state
    for (std::int64_t a = 0; a < declared_arrays; ++a) {
        std::istringstream desc(next_line());
        std::string tag;
        ArrayBlock block;
        size_t rank = 0;
        desc >> tag >> block.name >> rank;
        if (tag != "array" || desc.fail()) throw IoError(path + ": malformed array descriptor");
        block.shape.resize(rank);
        for (size_t r = 0; r < rank; ++r) desc >> block.shape[r];
        if (desc.fail()) throw IoError(path + ": malformed array shape");
        block.count = numel(block.shape);
        const size_t bytes = static_cast<size_t>(block.count) * 8;
        if (pos + bytes > blob.size()) {
            throw IoError(path + ": truncated payload in array " + block.name);
        }
        for (size_t i = 0; i < bytes; ++i) {
            checksum ^= static_cast<unsigned char>(blob[pos + i]);
            checksum *= 0x100000001b3ULL;
        }
        std::vector<double> values(static_cast<size_t>(block.count));
        decode_le(blob.data() + pos, block.count, values.data());
        pos += bytes;
        parsed.arrays.emplace_back(std::move(block), std::move(values));
    }
    if (pos != blob.size()) throw IoError(path + ": trailing bytes after payload");

    char expect[32];
    std::snprintf(expect, sizeof(expect), "%016" PRIx64, checksum);
    if (*parsed.find("checksum") != expect) {
        throw IoError(path + ": payload checksum mismatch (corrupt file)");
    }
    return parsed;
}

std::string checksum_hex(const std::string& payload) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64,
                  fnv1a64(reinterpret_cast<const unsigned char*>(payload.data()), payload.size()));
    return buf;
}

std::string scale_transform_name(ScaleTransform t) {
    return t == ScaleTransform::Softplus ? "softplus" : "elu1";
}

ScaleTransform scale_transform_from_name(const std::string& name) {
    if (name == "softplus") return ScaleTransform::Softplus;
    if (name == "elu1") return ScaleTransform::Elu1;
    throw IoError("unknown scale transform: " + name);
}

std::string join_ints(const std::vector<int>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

}  // namespace

std::uint64_t fnv1a64(const unsigned char* bytes, std::size_t count) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < count; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

void save_checkpoint(const std::string& path, const Model& model, std::uint64_t seed,
                     std::int64_t step) {
    std::string payload;
    for (const auto& [name, t] : model.params) encode_le(t.data(), t.size(), payload);
    std::string blob;
    std::ostringstream header;
    header << "mdnkit-checkpoint " << kCheckpointFormatVersion << '\n';
    header << "kind = " << model_kind_name(model.spec.kind) << '\n';
    header << "input_dim = " << model.spec.input_dim << '\n';
    header << "target_dim = " << model.spec.target_dim << '\n';
    header << "hidden = " << join_ints(model.spec.hidden) << '\n';
    header << "k = " << model.spec.k << '\n';
    header << "scale_floor = " << format_double(model.spec.scale_floor) << '\n';
    header << "scale_transform = " << scale_transform_name(model.spec.scale_transform) << '\n';
    header << "seed = " << seed << '\n';
    header << "step = " << step << '\n';
    header << "arrays = " << model.params.size() << '\n';
    header << "checksum = " << checksum_hex(payload) << '\n';
    header << "end-header\n";
    blob = header.str();
    size_t offset = 0;
    for (const auto& [name, t] : model.params) {
        blob += array_descriptor(name, t.shape());
        blob.append(payload, offset, static_cast<size_t>(t.size()) * 8);
        offset += static_cast<size_t>(t.size()) * 8;
    }
    write_atomically(path, blob);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    ParsedFile parsed = parse_container(path, "mdnkit-checkpoint", kCheckpointFormatVersion);
    auto field = [&](const std::string& key) -> const std::string& {
        const std::string* v = parsed.find(key);
        if (!v) throw IoError(path + ": header missing field " + key);
        return *v;
    };
    ModelSpec spec;
    spec.kind = [&] {
        try {
            return model_kind_from_name(field("kind"));
        } catch (const ConfigError& e) {
            throw IoError(path + ": unknown architecture tag: " + field("kind"));
        }
    }();
    spec.input_dim = std::stoi(field("input_dim"));
    spec.target_dim = std::stoi(field("target_dim"));
    spec.hidden = split_ints(field("hidden"));
    spec.k = std::stoi(field("k"));
    spec.scale_floor = std::stod(field("scale_floor"));
    spec.scale_transform = scale_transform_from_name(field("scale_transform"));

    LoadedCheckpoint loaded;
    loaded.model = Model::build(spec, 0);
    loaded.seed = std::stoull(field("seed"));
    loaded.step = std::stoll(field("step"));
    if (parsed.arrays.size() != loaded.model.params.size()) {
        throw IoError(path + ": array count does not match architecture");
    }
    for (size_t i = 0; i < parsed.arrays.size(); ++i) {
        const auto& [block, values] = parsed.arrays[i];
        Tensor& t = loaded.model.params[i].second;
        if (block.name != loaded.model.params[i].first || block.shape != t.shape()) {
            throw IoError(path + ": array " + block.name + " does not match architecture layout");
        }
        t.values() = values;
    }
    return loaded;
}

void save_dataset(const std::string& path, const Dataset& data) {
    if (data.n() == 0) throw IoError("refusing to save an empty dataset");
    data.validate();
    std::string payload;
    encode_le(data.x.data(), data.x.size(), payload);
    encode_le(data.y.data(), data.y.size(), payload);
    std::ostringstream header;
    header << "mdnkit-dataset " << kDatasetFormatVersion << '\n';
    header << "generator = " << data.generator << '\n';
    header << "seed = " << data.seed << '\n';
    header << "n = " << data.n() << '\n';
    header << "d_in = " << data.d_in() << '\n';
    header << "d_out = " << data.d_out() << '\n';
    for (const auto& [k, v] : data.meta) header << "meta." << k << " = " << v << '\n';
    header << "arrays = 2\n";
    header << "checksum = " << checksum_hex(payload) << '\n';
    header << "end-header\n";
    std::string blob = header.str();
    blob += array_descriptor("X", data.x.shape());
    blob.append(payload, 0, static_cast<size_t>(data.x.size()) * 8);
    blob += array_descriptor("Y", data.y.shape());
    blob.append(payload, static_cast<size_t>(data.x.size()) * 8,
                static_cast<size_t>(data.y.size()) * 8);
    write_atomically(path, blob);
}

Dataset load_dataset(const std::string& path) {
    ParsedFile parsed = parse_container(path, "mdnkit-dataset", kDatasetFormatVersion);
    auto field = [&](const std::string& key) -> const std::string& {
        const std::string* v = parsed.find(key);
        if (!v) throw IoError(path + ": header missing field " + key);
        return *v;
    };
    Dataset data;
    data.generator = field("generator");
    data.seed = std::stoull(field("seed"));
    for (const auto& [k, v] : parsed.fields) {
        if (k.rfind("meta.", 0) == 0) data.meta.emplace_back(k.substr(5), v);
    }
    if (parsed.arrays.size() != 2 || parsed.arrays[0].first.name != "X" ||
        parsed.arrays[1].first.name != "Y") {
        throw IoError(path + ": dataset payload must be arrays X then Y");
    }
    data.x = Tensor(parsed.arrays[0].first.shape, std::move(parsed.arrays[0].second));
    data.y = Tensor(parsed.arrays[1].first.shape, std::move(parsed.arrays[1].second));
    const auto n = std::stoll(field("n"));
    const auto d_in = std::stoi(field("d_in"));
    const auto d_out = std::stoi(field("d_out"));
    if (data.x.rank() != 2 || data.y.rank() != 2 || data.n() != n || data.d_in() != d_in ||
        data.y.dim(0) != n || data.d_out() != d_out) {
        throw IoError(path + ": header dims disagree with payload shapes");
    }
    return data;
}

std::uint64_t dataset_payload_checksum(const Dataset& data) {
    std::string payload;
    encode_le(data.x.data(), data.x.size(), payload);
    encode_le(data.y.data(), data.y.size(), payload);
    return fnv1a64(reinterpret_cast<const unsigned char*>(payload.data()), payload.size());
}

}  // namespace mdnkit
