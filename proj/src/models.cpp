#include "cnts/models.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "cnts/errors.hpp"

namespace cnts {

namespace {

constexpr char kMagic[] = "CNTS1";
constexpr std::size_t kMagicLen = 5;

std::vector<std::size_t> full_dims(std::size_t l, const std::vector<std::size_t>& hidden) {
    std::vector<std::size_t> dims;
    dims.push_back(l);
    if (hidden.empty()) {
        dims.push_back(4 * l);
        dims.push_back(2 * l);
    } else {
        dims.insert(dims.end(), hidden.begin(), hidden.end());
    }
    dims.push_back(l);
    return dims;
}

DenseNet build_net(std::size_t l, const std::vector<std::size_t>& hidden,
                   Activation hidden_act, std::uint64_t seed) {
    auto dims = full_dims(l, hidden);
    std::vector<Activation> acts(dims.size() - 1, hidden_act);
    acts.back() = Activation::Identity;
    return init_params(dims, acts, seed);
}

Matrix run_batch(const DenseNet& net, std::size_t window_len, const WindowBatch& batch) {
    if (batch.window_len() != window_len) {
        throw ShapeError("batch window length " + std::to_string(batch.window_len()) +
                         " does not match model l=" + std::to_string(window_len));
    }
    return forward(net, batch.windows).output();
}

std::vector<double> flatten_params(const DenseNet& net) {
    std::vector<double> flat;
    flat.reserve(net.param_count());
    for (const auto& layer : net.layers) {
        flat.insert(flat.end(), layer.weights.data.begin(), layer.weights.data.end());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
    return flat;
}

DenseNet net_from_checkpoint(const Checkpoint& ckpt) {
    DenseNet net;
    std::size_t pos = 0;
    for (std::size_t k = 0; k + 1 < ckpt.dims.size(); ++k) {
        DenseLayer layer;
        layer.weights = Matrix(ckpt.dims[k + 1], ckpt.dims[k]);
        layer.bias.assign(ckpt.dims[k + 1], 0.0);
        layer.act = ckpt.activations[k];
        for (double& w : layer.weights.data) w = ckpt.payload[pos++];
        for (double& b : layer.bias) b = ckpt.payload[pos++];
        net.layers.push_back(std::move(layer));
    }
    return net;
}

void write_le_doubles(std::ofstream& out, const std::vector<double>& values) {
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        unsigned char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

void save_impl(const DenseNet& net, ModelKind kind, std::size_t window_len,
               const std::string& path, const std::string& config_digest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);

    std::ostringstream header;
    header << "kind " << (kind == ModelKind::Reconstructor ? "R" : "D") << "\n";
    header << "window " << window_len << "\n";
    header << "dims";
    for (std::size_t d : net.dims()) header << ' ' << d;
    header << "\nactivations";
    for (const auto& layer : net.layers) header << ' ' << activation_name(layer.act);
    header << "\ndigest " << config_digest << "\n";
    const std::string head = header.str();

    out.write(kMagic, kMagicLen);
    std::uint32_t head_len = static_cast<std::uint32_t>(head.size());
    unsigned char len_bytes[4];
    for (int i = 0; i < 4; ++i) len_bytes[i] = static_cast<unsigned char>(head_len >> (8 * i));
    out.write(reinterpret_cast<const char*>(len_bytes), 4);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    write_le_doubles(out, flatten_params(net));
    if (!out) throw IoError("write failed: " + path);
}

} // namespace

ReconstructorModel make_reconstructor(std::size_t window_len,
                                      const std::vector<std::size_t>& hidden,
                                      std::uint64_t seed) {
    if (window_len < 1) throw ConfigError("window length must be >= 1");
    return {build_net(window_len, hidden, Activation::Tanh, seed), window_len};
}

DetectorModel make_detector(std::size_t window_len,
                            const std::vector<std::size_t>& hidden,
                            std::uint64_t seed) {
    if (window_len < 1) throw ConfigError("window length must be >= 1");
    return {build_net(window_len, hidden, Activation::Relu, seed), window_len};
}

Matrix reconstruct(const ReconstructorModel& model, const WindowBatch& batch) {
    return run_batch(model.net, model.window_len, batch);
}

Matrix detect(const DetectorModel& model, const WindowBatch& batch) {
    return run_batch(model.net, model.window_len, batch);
}

void save_checkpoint(const ReconstructorModel& model, const std::string& path,
                     const std::string& config_digest) {
    save_impl(model.net, ModelKind::Reconstructor, model.window_len, path, config_digest);
}

void save_checkpoint(const DetectorModel& model, const std::string& path,
                     const std::string& config_digest) {
    save_impl(model.net, ModelKind::Detector, model.window_len, path, config_digest);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    char magic[kMagicLen];
    if (!in.read(magic, kMagicLen) || std::memcmp(magic, kMagic, kMagicLen) != 0) {
        throw ValidationError(path + ": checkpoint version tag mismatch");
    }

    unsigned char len_bytes[4];
    if (!in.read(reinterpret_cast<char*>(len_bytes), 4)) {
        throw ValidationError(path + ": truncated header");
    }
    std::uint32_t head_len = 0;
    for (int i = 0; i < 4; ++i) head_len |= static_cast<std::uint32_t>(len_bytes[i]) << (8 * i);

    std::string head(head_len, '\0');
    if (!in.read(head.data(), head_len)) {
        throw ValidationError(path + ": truncated header");
    }

    Checkpoint ckpt;
    bool have_kind = false;
    std::istringstream hs(head);
    std::string line;
    while (std::getline(hs, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "kind") {
            std::string k;
            ls >> k;
            if (k == "R") ckpt.kind = ModelKind::Reconstructor;
            else if (k == "D") ckpt.kind = ModelKind::Detector;
            else throw ValidationError(path + ": unknown model kind '" + k + "'");
            have_kind = true;
        } else if (key == "window") {
            ls >> ckpt.window_len;
        } else if (key == "dims") {
            std::size_t d;
            while (ls >> d) ckpt.dims.push_back(d);
        } else if (key == "activations") {
            std::string a;
            while (ls >> a) ckpt.activations.push_back(activation_from_name(a));
        } else if (key == "digest") {
            ls >> ckpt.config_digest;
        }
    }
    if (!have_kind || ckpt.dims.size() < 2 ||
        ckpt.activations.size() != ckpt.dims.size() - 1 || ckpt.window_len < 1) {
        throw ValidationError(path + ": incomplete checkpoint header");
    }

    std::size_t expected = 0;
    for (std::size_t k = 0; k + 1 < ckpt.dims.size(); ++k) {
        expected += ckpt.dims[k + 1] * ckpt.dims[k] + ckpt.dims[k + 1];
    }

    std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    if (raw.size() < expected * 8) {
        throw ValidationError(path + ": truncated payload (" + std::to_string(raw.size()) +
                              " bytes, expected " + std::to_string(expected * 8) + ")");
    }
    if (raw.size() != expected * 8) {
        throw ValidationError(path + ": payload length disagrees with dims");
    }

    ckpt.payload.resize(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(
                        static_cast<unsigned char>(raw[i * 8 + b])) << (8 * b);
        }
        std::memcpy(&ckpt.payload[i], &bits, sizeof(double));
    }
    return ckpt;
}

ReconstructorModel load_reconstructor(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.kind != ModelKind::Reconstructor) {
        throw ValidationError(path + ": expected reconstructor checkpoint, found detector");
    }
    return {net_from_checkpoint(ckpt), ckpt.window_len};
}

DetectorModel load_detector(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.kind != ModelKind::Detector) {
        throw ValidationError(path + ": expected detector checkpoint, found reconstructor");
    }
    return {net_from_checkpoint(ckpt), ckpt.window_len};
}

std::uint64_t param_digest(const DenseNet& net) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&](const std::vector<double>& values) {
        for (double v : values) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xFF;
                h *= 0x100000001B3ULL;
            }
        }
    };
    for (const auto& layer : net.layers) {
        mix(layer.weights.data);
        mix(layer.bias);
    }
    return h;
}

} // namespace cnts
