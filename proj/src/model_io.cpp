#include "finrad/model_io.hpp"

#include <cstring>
#include <fstream>

#include "finrad/errors.hpp"

namespace finrad::neural {

namespace {

constexpr char kMagic[4] = {'F', 'I', 'N', '1'};
constexpr uint16_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint16_t get_u16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

} // namespace

nlohmann::json graph_to_json(const GraphSpec& spec) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : spec.nodes) {
        nlohmann::json j;
        j["kind"] = kind_name(n.kind);
        if (!n.inputs.empty()) j["inputs"] = n.inputs;
        switch (n.kind) {
            case LayerKind::input: j["shape"] = n.shape; break;
            case LayerKind::dense: j["units"] = n.units; break;
            case LayerKind::conv2d: j["channels"] = n.channels; break;
            case LayerKind::upsample_nearest: j["factor"] = n.factor; break;
            case LayerKind::patch_split:
            case LayerKind::map_from_grid:
                j["rows"] = n.rows;
                j["cols"] = n.cols;
                break;
            default: break;
        }
        nodes.push_back(std::move(j));
    }
    return nlohmann::json{{"nodes", std::move(nodes)}};
}

GraphSpec graph_from_json(const nlohmann::json& j) {
    GraphSpec spec;
    if (!j.contains("nodes") || !j["nodes"].is_array())
        throw CorruptFileError("graph json: missing nodes array");
    for (const auto& nj : j["nodes"]) {
        LayerSpec n;
        n.kind = kind_from_name(nj.at("kind").get<std::string>());
        if (nj.contains("inputs")) n.inputs = nj["inputs"].get<std::vector<int>>();
        switch (n.kind) {
            case LayerKind::input:
                n.shape = nj.at("shape").get<std::vector<int>>();
                break;
            case LayerKind::dense: n.units = nj.at("units").get<int>(); break;
            case LayerKind::conv2d: n.channels = nj.at("channels").get<int>(); break;
            case LayerKind::upsample_nearest:
                n.factor = nj.at("factor").get<int>();
                break;
            case LayerKind::patch_split:
            case LayerKind::map_from_grid:
                n.rows = nj.at("rows").get<int>();
                n.cols = nj.at("cols").get<int>();
                break;
            default: break;
        }
        spec.nodes.push_back(std::move(n));
    }
    return spec;
}

void save_model(const ModelGraph<float>& m, const std::filesystem::path& path,
                const nlohmann::json& extra) {
    nlohmann::json header = extra;
    header["graph"] = graph_to_json(m.spec);
    header["seed"] = m.seed;
    header["precision"] = "f32";
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& p : m.params) shapes.push_back(p.shape);
    header["param_shapes"] = std::move(shapes);
    header["trainable"] = std::vector<int>(m.trainable.begin(), m.trainable.end());

    const std::string header_str = header.dump();
    std::string blob;
    blob.append(kMagic, 4);
    put_u16(blob, kVersion);
    put_u32(blob, static_cast<uint32_t>(header_str.size()));
    blob += header_str;

    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write " + path.string());
    file.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    for (const auto& p : m.params)
        file.write(reinterpret_cast<const char*>(p.data.data()),
                   static_cast<std::streamsize>(p.data.size() * sizeof(float)));
    if (!file) throw IoError("short write to " + path.string());
}

LoadedModel load_model(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(file)),
                      std::istreambuf_iterator<char>());
    const uint8_t* p = reinterpret_cast<const uint8_t*>(bytes.data());

    if (bytes.size() < 10)
        throw ModelFileError(ModelFileError::Kind::truncated,
                             "model file too short: " + path.string());
    if (std::memcmp(p, kMagic, 4) != 0)
        throw ModelFileError(ModelFileError::Kind::bad_magic,
                             "bad magic in " + path.string());
    const uint16_t version = get_u16(p + 4);
    if (version != kVersion)
        throw ModelFileError(ModelFileError::Kind::bad_version,
                             "unsupported model format version " +
                                 std::to_string(version) + " in " + path.string());
    const uint32_t header_len = get_u32(p + 6);
    if (bytes.size() < 10 + static_cast<size_t>(header_len))
        throw ModelFileError(ModelFileError::Kind::truncated,
                             "truncated header in " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 10,
                                       bytes.begin() + 10 + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError("model header is not valid JSON: " +
                               std::string(e.what()));
    }

    const GraphSpec spec = graph_from_json(header.at("graph"));
    const uint64_t seed = header.at("seed").get<uint64_t>();
    LoadedModel out;
    out.model = build_network<float>(spec, seed);
    out.header = header;

    if (header.contains("trainable")) {
        const auto mask = header["trainable"].get<std::vector<int>>();
        if (mask.size() != out.model.params.size())
            throw CorruptFileError("trainable mask length mismatch in " +
                                   path.string());
        out.model.trainable.assign(mask.begin(), mask.end());
    }

    const auto shapes = header.at("param_shapes").get<std::vector<std::vector<int>>>();
    if (shapes.size() != out.model.params.size())
        throw CorruptFileError("parameter shape list mismatch in " + path.string());
    for (size_t i = 0; i < shapes.size(); ++i)
        if (shapes[i] != out.model.params[i].shape)
            throw CorruptFileError("parameter tensor " + std::to_string(i) +
                                   " shape mismatch in " + path.string());

    size_t offset = 10 + header_len;
    for (auto& t : out.model.params) {
        const size_t want = t.data.size() * sizeof(float);
        if (bytes.size() < offset + want)
            throw ModelFileError(ModelFileError::Kind::truncated,
                                 "truncated parameter blob in " + path.string());
        std::memcpy(t.data.data(), bytes.data() + offset, want);
        offset += want;
    }
    return out;
}

} // namespace finrad::neural
