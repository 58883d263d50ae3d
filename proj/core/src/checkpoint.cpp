#include "koopa/checkpoint.hpp"

#include "koopa/error.hpp"
#include "koopa/text.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace koopa {
namespace {

constexpr char kMagic[6] = {'K', 'O', 'O', 'P', 'A', '\0'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) { out_ += s; }
    std::string& data() { return out_; }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) {
            out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }
    }
    std::string out_;
};

class Reader {
public:
    Reader(const std::string& in, std::string what) : in_(in), what_(std::move(what)) {}

    bool done() const { return pos_ == in_.size(); }
    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t n) { return std::string(take(n), n); }

private:
    const char* take(std::size_t n) {
        if (in_.size() - pos_ < n) {
            throw IoError("checkpoint: truncated " + what_);
        }
        const char* p = in_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint64_t le(int n) {
        const char* p = take(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        }
        return v;
    }
    const std::string& in_;
    std::string what_;
    std::size_t pos_ = 0;
};

void write_section(Writer& w, const char tag[4], const std::string& payload) {
    w.bytes(tag, 4);
    w.u64(payload.size());
    w.str(payload);
}

void write_tensor(Writer& w, const std::string& name, std::span<const double> data, std::vector<std::uint64_t> dims) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.str(name);
    w.u8(static_cast<std::uint8_t>(dims.size()));
    for (auto d : dims) {
        w.u64(d);
    }
    for (double v : data) {
        w.f64(v);
    }
}

struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;
};

void write_mlp(Writer& w, const std::string& prefix, const nn::Mlp& net) {
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& layer = net.layers()[l];
        const std::string base = prefix + "." + std::to_string(l);
        write_tensor(w, base + ".weight", layer.weight.data(), {layer.weight.rows(), layer.weight.cols()});
        write_tensor(w, base + ".bias", layer.bias, {layer.bias.size()});
    }
}

const Tensor& find_tensor(const std::map<std::string, Tensor>& t, const std::string& name) {
    const auto it = t.find(name);
    if (it == t.end()) {
        throw IoError("checkpoint: missing tensor '" + name + "'");
    }
    return it->second;
}

void read_mlp(const std::map<std::string, Tensor>& tensors, const std::string& prefix, nn::Mlp& net) {
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto& layer = net.layers()[l];
        const std::string base = prefix + "." + std::to_string(l);
        const Tensor& w = find_tensor(tensors, base + ".weight");
        const Tensor& b = find_tensor(tensors, base + ".bias");
        if (w.dims != std::vector<std::uint64_t>{layer.weight.rows(), layer.weight.cols()} ||
            b.dims != std::vector<std::uint64_t>{layer.bias.size()}) {
            throw IoError("checkpoint: tensor '" + base + "' does not match the configured architecture");
        }
        layer.weight = Matrix(layer.weight.rows(), layer.weight.cols(), w.data);
        layer.bias = b.data;
    }
}

} // namespace

std::string serialize_model(const KoopaModel& model) {
    Writer out;
    out.bytes(kMagic, sizeof(kMagic));
    out.u16(kCheckpointVersion);

    std::ostringstream conf;
    for (const auto& [k, v] : model.config().to_key_values()) {
        conf << k << '=' << v << '\n';
    }
    write_section(out, "CONF", conf.str());

    Writer mask;
    const auto& m = model.mask();
    mask.u32(static_cast<std::uint32_t>(m.window_length));
    mask.f64(m.alpha);
    mask.u32(static_cast<std::uint32_t>(m.kept.size()));
    for (std::size_t k : m.kept) {
        mask.u32(static_cast<std::uint32_t>(k));
    }
    write_section(out, "MASK", mask.data());

    Writer params;
    std::uint32_t count = 0;
    Writer body;
    auto mlp_tensors = [](const nn::Mlp& net) { return static_cast<std::uint32_t>(2 * net.layers().size()); };
    write_mlp(body, "inv_encoder", model.inv_encoder);
    write_mlp(body, "inv_decoder", model.inv_decoder);
    write_mlp(body, "var_encoder", model.var_encoder);
    write_mlp(body, "var_decoder", model.var_decoder);
    count += mlp_tensors(model.inv_encoder) + mlp_tensors(model.inv_decoder) + mlp_tensors(model.var_encoder) +
             mlp_tensors(model.var_decoder);
    for (std::size_t b = 0; b < model.k_inv.size(); ++b) {
        const Matrix& k = model.k_inv[b];
        write_tensor(body, "k_inv." + std::to_string(b), k.data(), {k.rows(), k.cols()});
        ++count;
    }
    if (!model.scaler.empty()) {
        write_tensor(body, "scaler.mean", model.scaler.mean, {model.scaler.mean.size()});
        write_tensor(body, "scaler.stddev", model.scaler.stddev, {model.scaler.stddev.size()});
        count += 2;
    }
    params.u32(count);
    params.str(body.data());
    write_section(out, "PARM", params.data());
    return std::move(out.data());
}

KoopaModel deserialize_model(const std::string& bytes) {
    Reader in(bytes, "header");
    const std::string magic = in.str(sizeof(kMagic));
    if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
        throw IoError("checkpoint: bad magic bytes (not a koopa checkpoint)");
    }
    const std::uint16_t version = in.u16();
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint: unsupported format version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    std::map<std::string, std::string> sections;
    while (!in.done()) {
        const std::string tag = in.str(4);
        const std::uint64_t len = in.u64();
        if (len > bytes.size()) {
            throw IoError("checkpoint: section '" + tag + "' claims " + std::to_string(len) + " bytes");
        }
        sections[tag] = in.str(static_cast<std::size_t>(len));
    }
    for (const char* tag : {"CONF", "MASK", "PARM"}) {
        if (sections.find(tag) == sections.end()) {
            throw IoError(std::string("checkpoint: missing ") + tag + " section");
        }
    }

    std::map<std::string, std::string> kv;
    std::istringstream conf(sections["CONF"]);
    std::string line;
    while (std::getline(conf, line)) {
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw IoError("checkpoint: malformed CONF line '" + line + "'");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    ModelConfig cfg;
    try {
        cfg = ModelConfig::from_key_values(kv);
    } catch (const ConfigError& e) {
        throw IoError(std::string("checkpoint: CONF section: ") + e.what());
    }

    Reader mr(sections["MASK"], "MASK section");
    spectral::SpectrumMask mask;
    mask.window_length = mr.u32();
    mask.alpha = mr.f64();
    const std::uint32_t kept = mr.u32();
    for (std::uint32_t i = 0; i < kept; ++i) {
        mask.kept.push_back(mr.u32());
    }
    if (!mr.done()) {
        throw IoError("checkpoint: trailing bytes in MASK section");
    }

    Reader pr(sections["PARM"], "PARM section");
    std::map<std::string, Tensor> tensors;
    const std::uint32_t count = pr.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = pr.u16();
        const std::string name = pr.str(name_len);
        Tensor t;
        const std::uint8_t nd = pr.u8();
        std::uint64_t n = 1;
        for (std::uint8_t d = 0; d < nd; ++d) {
            t.dims.push_back(pr.u64());
            n *= t.dims.back();
        }
        if (n > bytes.size() / 8) {
            throw IoError("checkpoint: tensor '" + name + "' is larger than the file");
        }
        t.data.resize(static_cast<std::size_t>(n));
        for (double& v : t.data) {
            v = pr.f64();
        }
        tensors[name] = std::move(t);
    }
    if (!pr.done()) {
        throw IoError("checkpoint: trailing bytes in PARM section");
    }

    KoopaModel model;
    try {
        model = KoopaModel(cfg, mask);
    } catch (const Error& e) {
        throw IoError(std::string("checkpoint: inconsistent configuration: ") + e.what());
    }
    read_mlp(tensors, "inv_encoder", model.inv_encoder);
    read_mlp(tensors, "inv_decoder", model.inv_decoder);
    read_mlp(tensors, "var_encoder", model.var_encoder);
    read_mlp(tensors, "var_decoder", model.var_decoder);
    for (std::size_t b = 0; b < model.k_inv.size(); ++b) {
        const std::string name = "k_inv." + std::to_string(b);
        const Tensor& t = find_tensor(tensors, name);
        const std::size_t d = cfg.embed_dim;
        if (t.dims != std::vector<std::uint64_t>{d, d}) {
            throw IoError("checkpoint: tensor '" + name + "' has the wrong shape");
        }
        model.k_inv[b] = Matrix(d, d, t.data);
    }
    if (tensors.count("scaler.mean") != 0) {
        model.scaler.mean = find_tensor(tensors, "scaler.mean").data;
        model.scaler.stddev = find_tensor(tensors, "scaler.stddev").data;
        if (model.scaler.mean.size() != cfg.variates || model.scaler.stddev.size() != cfg.variates) {
            throw IoError("checkpoint: scaler does not match the variate count");
        }
    }
    return model;
}

void save_checkpoint(const KoopaModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write checkpoint '" + path + "'");
    }
    const std::string bytes = serialize_model(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed while writing checkpoint '" + path + "'");
    }
}

KoopaModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint '" + path + "'");
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

} // namespace koopa
