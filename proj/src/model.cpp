#include "aegn/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aegn/errors.hpp"
#include "aegn/ioutil.hpp"
#include "aegn/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight files assume a little-endian host");

namespace aegn {

using json = nlohmann::ordered_json;

// ======================================================================
// Presets and validation
// ======================================================================

namespace {

ArchitectureConfig ladder_config(const char* preset, int kernel_size, int degree,
                                 const std::vector<int>& widths, int outputs) {
    ArchitectureConfig c;
    c.preset = preset;
    c.kernel_size = kernel_size;
    c.degree = degree;
    c.input_width = 1;
    int in = c.input_width;
    for (size_t k = 0; k < widths.size(); ++k) {
        c.blocks.push_back({"block" + std::to_string(k + 1), in, widths[k]});
        in = widths[k];
    }
    c.skip_identity_after = 4;
    c.skip_project_after = 5;
    c.pool_after = {5, static_cast<int>(widths.size())};
    c.outputs = outputs;
    return c;
}

} // namespace

ArchitectureConfig recognition_preset(int classes, int degree) {
    if (classes < 2)
        throw InvalidParameterError("recognition needs at least two classes");
    return ladder_config("recognition", 2, degree, {8, 16, 16, 16, 32, 32, 32}, classes);
}

ArchitectureConfig detection_preset(int classes, int degree) {
    if (classes < 1)
        throw InvalidParameterError("detection needs at least one class");
    return ladder_config("detection", 8, degree, {16, 32, 32, 32, 128, 128, 128}, classes + 5);
}

void validate_architecture(const ArchitectureConfig& c) {
    if (c.kernel_size < 2)
        throw InvalidParameterError("kernel size must be at least 2");
    if (c.degree < 1 || c.degree > 3)
        throw InvalidParameterError("spline degree must be 1, 2 or 3");
    if (c.input_width < 1)
        throw InvalidParameterError("input width must be positive");
    if (c.outputs < 1)
        throw InvalidParameterError("readout needs at least one output");
    for (int s = 0; s < 3; ++s)
        if (c.voxel_dims[s] <= 0)
            throw InvalidParameterError("voxel grid dimensions must be positive");
    if (c.blocks.empty())
        throw ShapeError("architecture has no convolution blocks");

    int prev = c.input_width;
    for (size_t k = 0; k < c.blocks.size(); ++k) {
        const ConvBlockConfig& b = c.blocks[k];
        if (b.name.empty())
            throw ShapeError("block " + std::to_string(k + 1) + " has no name");
        for (size_t j = 0; j < k; ++j)
            if (c.blocks[j].name == b.name)
                throw ShapeError("duplicate block name '" + b.name + "'");
        if (b.in_ch <= 0 || b.out_ch <= 0)
            throw ShapeError(b.name + ": channel counts must be positive");
        if (b.in_ch != prev)
            throw ShapeError(b.name + ": input width " + std::to_string(b.in_ch) +
                             " does not chain from " + std::to_string(prev));
        prev = b.out_ch;
    }

    const int n = c.num_blocks();
    if (c.pool_after[0] < 1 || c.pool_after[0] >= n || c.pool_after[1] != n)
        throw ShapeError("pooling must split the chain: first pool inside it, second after the last block");

    auto check_skip = [&](int s, const char* what, bool needs_equal_widths) {
        if (s == 0) return;
        if (s < 2 || s > n)
            throw ShapeError(std::string(what) + " placement " + std::to_string(s) + " out of range");
        if (c.level_of_block(s) != c.level_of_block(s - 1))
            throw ShapeError(std::string(what) + " at " + c.blocks[s - 1].name +
                             " would reach across a pooling stage");
        if (needs_equal_widths && c.blocks[s - 1].out_ch != c.blocks[s - 2].out_ch)
            throw ShapeError(c.blocks[s - 1].name + ": identity skip needs equal widths, has " +
                             std::to_string(c.blocks[s - 2].out_ch) + " and " +
                             std::to_string(c.blocks[s - 1].out_ch));
    };
    check_skip(c.skip_identity_after, "identity skip", true);
    check_skip(c.skip_project_after, "projection skip", false);
    if (c.skip_identity_after != 0 && c.skip_identity_after == c.skip_project_after)
        throw ShapeError("both skips attached to the same block");
}

// ======================================================================
// JSON form: execution-ordered layer list
// ======================================================================

std::string architecture_to_json(const ArchitectureConfig& c) {
    json j;
    j["format"] = "aegn-arch";
    j["version"] = 1;
    j["preset"] = c.preset;
    j["kernel_size"] = c.kernel_size;
    j["degree"] = c.degree;
    j["input_width"] = c.input_width;
    j["voxel_dims"] = c.voxel_dims;
    json layers = json::array();
    for (int k = 1; k <= c.num_blocks(); ++k) {
        const ConvBlockConfig& b = c.blocks[k - 1];
        layers.push_back({{"kind", "conv_block"},
                          {"name", b.name},
                          {"in", b.in_ch},
                          {"out", b.out_ch}});
        if (c.skip_identity_after == k)
            layers.push_back({{"kind", "skip_identity"}, {"after", k}});
        if (c.skip_project_after == k)
            layers.push_back({{"kind", "skip_project"}, {"after", k}});
        if (c.pool_after[0] == k || c.pool_after[1] == k)
            layers.push_back({{"kind", "max_pool"}, {"after", k}});
    }
    layers.push_back({{"kind", "readout"}, {"outputs", c.outputs}});
    j["layers"] = std::move(layers);
    return j.dump(2);
}

ArchitectureConfig architecture_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("architecture JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "aegn-arch")
            throw ParseError("not an architecture description");
        if (j.at("version").get<int>() != 1)
            throw ParseError("unsupported architecture version");
        ArchitectureConfig c;
        c.preset = j.at("preset").get<std::string>();
        c.kernel_size = j.at("kernel_size").get<int>();
        c.degree = j.at("degree").get<int>();
        c.input_width = j.at("input_width").get<int>();
        const auto dims = j.at("voxel_dims");
        if (!dims.is_array() || dims.size() != 3)
            throw ParseError("voxel_dims must hold three values");
        for (int s = 0; s < 3; ++s) c.voxel_dims[s] = dims[s].get<int>();
        c.pool_after = {0, 0};
        int pools_seen = 0;
        bool readout_seen = false;
        for (const auto& layer : j.at("layers")) {
            const std::string kind = layer.at("kind").get<std::string>();
            if (kind == "conv_block") {
                c.blocks.push_back({layer.at("name").get<std::string>(),
                                    layer.at("in").get<int>(),
                                    layer.at("out").get<int>()});
            } else if (kind == "skip_identity") {
                c.skip_identity_after = layer.at("after").get<int>();
            } else if (kind == "skip_project") {
                c.skip_project_after = layer.at("after").get<int>();
            } else if (kind == "max_pool") {
                if (pools_seen >= 2)
                    throw ParseError("more than two pooling stages");
                c.pool_after[pools_seen++] = layer.at("after").get<int>();
            } else if (kind == "readout") {
                c.outputs = layer.at("outputs").get<int>();
                readout_seen = true;
            } else {
                throw ParseError("unknown layer kind '" + kind + "'");
            }
        }
        if (pools_seen != 2)
            throw ParseError("architecture needs exactly two pooling stages");
        if (!readout_seen)
            throw ParseError("architecture has no readout");
        validate_architecture(c);
        return c;
    } catch (const json::exception& e) {
        throw ParseError(std::string("architecture JSON: ") + e.what());
    }
}

// ======================================================================
// Model construction
// ======================================================================

namespace {

Model model_skeleton(const ArchitectureConfig& c) {
    validate_architecture(c);
    Model m;
    m.config = c;
    for (const ConvBlockConfig& b : c.blocks) {
        ConvBlock block;
        block.conv.kernel_size = c.kernel_size;
        block.conv.degree = c.degree;
        block.conv.in_channels = b.in_ch;
        block.conv.out_channels = b.out_ch;
        block.conv.w.assign(block.conv.weight_count(), 0.0);
        block.bn.init_identity(b.out_ch);
        m.blocks.push_back(std::move(block));
    }
    if (c.skip_project_after > 0) {
        const int s = c.skip_project_after;
        m.skip_proj.init_zero(c.blocks[s - 2].out_ch, c.blocks[s - 1].out_ch, false);
    }
    m.head.init_zero(c.head_width(), c.outputs, true);
    return m;
}

double xavier_bound(int64_t fan_in, int64_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_uniform(double* data, size_t count, double bound, Rng& rng) {
    for (size_t i = 0; i < count; ++i)
        data[i] = rng.next_double(-bound, bound);
}

} // namespace

Model random_init(const ArchitectureConfig& c, uint64_t seed) {
    Model m = model_skeleton(c);
    Rng rng(seed);
    for (ConvBlock& block : m.blocks) {
        const int64_t np = block.conv.grid_points();
        const double a = xavier_bound(np * block.conv.in_channels, np * block.conv.out_channels);
        fill_uniform(block.conv.w.data(), block.conv.w.size(), a, rng);
    }
    if (c.skip_project_after > 0) {
        const double a = xavier_bound(m.skip_proj.in_features, m.skip_proj.out_features);
        fill_uniform(m.skip_proj.w.data(), m.skip_proj.w.size(), a, rng);
    }
    const double a = xavier_bound(m.head.in_features, m.head.out_features);
    fill_uniform(m.head.w.data(), m.head.w.size(), a, rng);
    return m;
}

// ======================================================================
// Weight files
// ======================================================================

namespace {

constexpr char kMagic[4] = {'A', 'E', 'G', 'W'};
constexpr uint16_t kVersion = 1;

struct TensorRef {
    std::string name;
    std::vector<uint32_t> dims;
    double* data;
    size_t count;
};

// Serialization order; also the draw order of random_init.
std::vector<TensorRef> tensor_list(Model& m) {
    std::vector<TensorRef> list;
    auto add = [&list](std::string name, std::vector<uint32_t> dims, double* data) {
        size_t count = 1;
        for (uint32_t d : dims) count *= d;
        list.push_back({std::move(name), std::move(dims), data, count});
    };
    for (size_t k = 0; k < m.blocks.size(); ++k) {
        ConvBlock& b = m.blocks[k];
        const std::string tag = std::to_string(k + 1);
        add("conv" + tag + ".weight",
            {uint32_t(b.conv.grid_points()), uint32_t(b.conv.in_channels), uint32_t(b.conv.out_channels)},
            b.conv.w.data());
        add("bn" + tag + ".mean", {uint32_t(b.bn.mean.size())}, b.bn.mean.data());
        add("bn" + tag + ".var", {uint32_t(b.bn.var.size())}, b.bn.var.data());
        add("bn" + tag + ".scale", {uint32_t(b.bn.scale.size())}, b.bn.scale.data());
        add("bn" + tag + ".shift", {uint32_t(b.bn.shift.size())}, b.bn.shift.data());
    }
    if (m.config.skip_project_after > 0)
        add("skip" + std::to_string(m.config.skip_project_after) + ".proj",
            {uint32_t(m.skip_proj.out_features), uint32_t(m.skip_proj.in_features)},
            m.skip_proj.w.data());
    add("head.weight", {uint32_t(m.head.out_features), uint32_t(m.head.in_features)}, m.head.w.data());
    add("head.bias", {uint32_t(m.head.out_features)}, m.head.b.data());
    return list;
}

void put_u16(std::ostream& out, uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint16_t get_u16(std::istream& in, const char* what) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (in.gcount() != 2) throw LoadError(std::string("truncated weight file at ") + what);
    return static_cast<uint16_t>(b[0] | (uint16_t(b[1]) << 8));
}

uint32_t get_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw LoadError(std::string("truncated weight file at ") + what);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::string dims_text(const std::vector<uint32_t>& dims) {
    std::string s = "(";
    for (size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(dims[i]);
    }
    return s + ")";
}

} // namespace

void save_weights(const Model& model, const std::string& path) {
    Model& m = const_cast<Model&>(model); // tensor_list needs mutable pointers
    validate_architecture(m.config);
    const std::string config_text = architecture_to_json(m.config);
    std::vector<TensorRef> tensors = tensor_list(m);
    atomic_write(path, [&](std::ostream& out) {
        out.write(kMagic, 4);
        put_u16(out, kVersion);
        put_u32(out, static_cast<uint32_t>(config_text.size()));
        out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
        uint32_t crc = crc32_init();
        for (const TensorRef& t : tensors) {
            put_u16(out, static_cast<uint16_t>(t.name.size()));
            out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
            out.put(static_cast<char>(t.dims.size()));
            for (uint32_t d : t.dims) put_u32(out, d);
            const size_t bytes = t.count * sizeof(double);
            out.write(reinterpret_cast<const char*>(t.data), static_cast<std::streamsize>(bytes));
            crc = crc32_update(crc, t.data, bytes);
        }
        put_u32(out, crc32_final(crc));
    });
}

Model load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open weight file '" + path + "'");

    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw LoadError("bad magic, not a weight file");
    const uint16_t version = get_u16(in, "version");
    if (version != kVersion)
        throw LoadError("unsupported weight file version " + std::to_string(version));
    const uint32_t config_len = get_u32(in, "config length");
    std::string config_text(config_len, '\0');
    in.read(config_text.data(), config_len);
    if (in.gcount() != static_cast<std::streamsize>(config_len))
        throw LoadError("truncated weight file inside the architecture description");

    ArchitectureConfig config;
    try {
        config = architecture_from_json(config_text);
    } catch (const Error& e) {
        throw LoadError(std::string("embedded architecture: ") + e.what());
    }

    Model m = model_skeleton(config);
    uint32_t crc = crc32_init();
    for (TensorRef& t : tensor_list(m)) {
        const uint16_t name_len = get_u16(in, t.name.c_str());
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (in.gcount() != name_len)
            throw LoadError("truncated weight file at tensor '" + t.name + "'");
        if (name != t.name)
            throw LoadError("tensor '" + name + "' where '" + t.name + "' was expected");
        const int rank = in.get();
        if (rank == EOF)
            throw LoadError("truncated weight file at tensor '" + t.name + "'");
        if (rank != static_cast<int>(t.dims.size()))
            throw LoadError("tensor '" + t.name + "': rank " + std::to_string(rank) +
                            " does not match expected " + std::to_string(t.dims.size()));
        std::vector<uint32_t> dims(rank);
        for (int i = 0; i < rank; ++i) dims[i] = get_u32(in, t.name.c_str());
        if (dims != t.dims)
            throw LoadError("tensor '" + t.name + "': dimensions " + dims_text(dims) +
                            " do not match expected " + dims_text(t.dims));
        const size_t bytes = t.count * sizeof(double);
        in.read(reinterpret_cast<char*>(t.data), static_cast<std::streamsize>(bytes));
        if (in.gcount() != static_cast<std::streamsize>(bytes))
            throw LoadError("truncated weight file inside tensor '" + t.name + "'");
        crc = crc32_update(crc, t.data, bytes);
    }
    const uint32_t stored = get_u32(in, "checksum");
    if (stored != crc32_final(crc))
        throw LoadError("weight payload checksum mismatch");
    if (in.peek() != EOF)
        throw LoadError("trailing bytes after the weight payload");

    for (ConvBlock& b : m.blocks) b.bn.finalize();
    return m;
}

void require_matching_architecture(const ArchitectureConfig& loaded,
                                   const ArchitectureConfig& expected) {
    auto fail = [](const std::string& what) { throw ShapeError("weight file mismatch: " + what); };
    if (loaded.kernel_size != expected.kernel_size)
        fail("kernel size " + std::to_string(loaded.kernel_size) + " vs " +
             std::to_string(expected.kernel_size));
    if (loaded.degree != expected.degree)
        fail("spline degree " + std::to_string(loaded.degree) + " vs " +
             std::to_string(expected.degree));
    if (loaded.input_width != expected.input_width) fail("input width");
    if (loaded.num_blocks() != expected.num_blocks()) fail("block count");
    for (int k = 0; k < expected.num_blocks(); ++k) {
        const ConvBlockConfig& a = loaded.blocks[k];
        const ConvBlockConfig& b = expected.blocks[k];
        if (a.in_ch != b.in_ch || a.out_ch != b.out_ch)
            fail(b.name + ": widths " + std::to_string(a.in_ch) + " -> " + std::to_string(a.out_ch) +
                 " vs " + std::to_string(b.in_ch) + " -> " + std::to_string(b.out_ch));
    }
    if (loaded.skip_identity_after != expected.skip_identity_after ||
        loaded.skip_project_after != expected.skip_project_after)
        fail("skip placement");
    if (loaded.pool_after != expected.pool_after) fail("pooling placement");
    if (loaded.voxel_dims != expected.voxel_dims) fail("voxel grid dimensions");
    if (loaded.outputs != expected.outputs)
        fail("readout outputs " + std::to_string(loaded.outputs) + " vs " +
             std::to_string(expected.outputs));
}

} // namespace aegn
