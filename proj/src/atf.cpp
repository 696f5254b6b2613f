#include "alfa/atf.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "alfa/errors.hpp"

static_assert(std::endian::native == std::endian::little, "ATF1 writer assumes a little-endian host");

namespace alfa {

std::size_t AtfTensor::element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return n;
}

AtfTensor AtfTensor::from_matrix(std::string name, const Matrix& m) {
    AtfTensor t;
    t.name = std::move(name);
    t.dtype = AtfDtype::f64;
    t.dims = {static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)};
    t.f64 = m.data;
    return t;
}

AtfTensor AtfTensor::from_vector(std::string name, const std::vector<double>& v) {
    AtfTensor t;
    t.name = std::move(name);
    t.dtype = AtfDtype::f64;
    t.dims = {static_cast<std::uint32_t>(v.size())};
    t.f64 = v;
    return t;
}

Matrix AtfTensor::to_matrix() const {
    if (dims.size() != 2) throw AtfError("tensor '" + name + "' is not 2-D");
    if (dtype != AtfDtype::f64) throw AtfError("tensor '" + name + "' is not binary64");
    return Matrix(static_cast<int>(dims[0]), static_cast<int>(dims[1]), f64);
}

std::vector<double> AtfTensor::to_vector() const {
    if (dims.size() != 1) throw AtfError("tensor '" + name + "' is not 1-D");
    if (dtype != AtfDtype::f64) throw AtfError("tensor '" + name + "' is not binary64");
    return f64;
}

namespace {

void append_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
}

template <typename T>
void append_pod(std::string& out, T v) {
    append_bytes(out, &v, sizeof(v));
}

} // namespace

void save_atf(const std::string& path, const std::vector<AtfTensor>& tensors) {
    std::set<std::string> seen;
    for (const AtfTensor& t : tensors) {
        if (!seen.insert(t.name).second) throw AtfError("duplicate tensor name '" + t.name + "'");
    }

    std::string buf;
    buf.append("ATF1", 4);
    append_pod<std::uint32_t>(buf, static_cast<std::uint32_t>(tensors.size()));
    for (const AtfTensor& t : tensors) {
        if (t.name.size() > 0xFFFF) throw AtfError("tensor name too long");
        append_pod<std::uint16_t>(buf, static_cast<std::uint16_t>(t.name.size()));
        buf.append(t.name);
        append_pod<std::uint8_t>(buf, static_cast<std::uint8_t>(t.dtype));
        append_pod<std::uint8_t>(buf, static_cast<std::uint8_t>(t.dims.size()));
        for (std::uint32_t d : t.dims) append_pod<std::uint32_t>(buf, d);
        const std::size_t count = t.element_count();
        if (t.dtype == AtfDtype::f64) {
            if (t.f64.size() != count) throw AtfError("tensor '" + t.name + "' payload/dims mismatch");
            append_bytes(buf, t.f64.data(), count * sizeof(double));
        } else {
            if (t.f32.size() != count) throw AtfError("tensor '" + t.name + "' payload/dims mismatch");
            append_bytes(buf, t.f32.data(), count * sizeof(float));
        }
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw IoError("short write to '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

std::vector<AtfTensor> load_atf(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t at = 0;
    const auto need = [&](std::size_t n) {
        if (at + n > buf.size()) throw AtfError("'" + path + "' truncated");
    };
    const auto read_pod = [&]<typename T>(T& v) {
        need(sizeof(T));
        std::memcpy(&v, buf.data() + at, sizeof(T));
        at += sizeof(T);
    };

    need(4);
    if (std::memcmp(buf.data(), "ATF1", 4) != 0) throw AtfError("'" + path + "' has a bad magic header");
    at = 4;
    std::uint32_t count = 0;
    read_pod(count);

    std::vector<AtfTensor> tensors;
    std::set<std::string> seen;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        AtfTensor t;
        std::uint16_t name_len = 0;
        read_pod(name_len);
        need(name_len);
        t.name.assign(buf.data() + at, name_len);
        at += name_len;
        if (!seen.insert(t.name).second) throw AtfError("duplicate tensor name '" + t.name + "'");
        std::uint8_t dtype = 0, ndim = 0;
        read_pod(dtype);
        if (dtype > 1) throw AtfError("tensor '" + t.name + "' has unknown dtype");
        t.dtype = static_cast<AtfDtype>(dtype);
        read_pod(ndim);
        t.dims.resize(ndim);
        for (std::uint8_t k = 0; k < ndim; ++k) read_pod(t.dims[k]);
        const std::size_t n = t.element_count();
        if (t.dtype == AtfDtype::f64) {
            need(n * sizeof(double));
            t.f64.resize(n);
            std::memcpy(t.f64.data(), buf.data() + at, n * sizeof(double));
            at += n * sizeof(double);
        } else {
            need(n * sizeof(float));
            t.f32.resize(n);
            std::memcpy(t.f32.data(), buf.data() + at, n * sizeof(float));
            at += n * sizeof(float);
        }
        tensors.push_back(std::move(t));
    }
    if (at != buf.size()) throw AtfError("'" + path + "' has trailing bytes");
    return tensors;
}

// ---------------------------------------------------------------------------
// Schemas
// ---------------------------------------------------------------------------

namespace {

std::string conv_name(int i) { return "conv" + std::to_string(i + 1); }

const AtfTensor& find(const std::vector<AtfTensor>& tensors, const std::string& name) {
    for (const AtfTensor& t : tensors) {
        if (t.name == name) return t;
    }
    throw AtfError("missing tensor '" + name + "'");
}

const AtfTensor* find_opt(const std::vector<AtfTensor>& tensors, const std::string& name) {
    for (const AtfTensor& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

void push_affine(std::vector<AtfTensor>& tensors, const std::string& prefix, const Affine& a) {
    tensors.push_back(AtfTensor::from_vector(prefix + ".scale", a.scale));
    tensors.push_back(AtfTensor::from_vector(prefix + ".bias", a.bias));
}

Affine read_affine(const std::vector<AtfTensor>& tensors, const std::string& prefix) {
    Affine a;
    a.scale = find(tensors, prefix + ".scale").to_vector();
    a.bias = find(tensors, prefix + ".bias").to_vector();
    return a;
}

void push_head(std::vector<AtfTensor>& tensors, const Matrix& w, const std::vector<double>& b) {
    tensors.push_back(AtfTensor::from_matrix("head.weight", w));
    tensors.push_back(AtfTensor::from_vector("head.bias", b));
}

DecomposedLayer factors_from(const std::vector<AtfTensor>& tensors, const std::string& name) {
    DecomposedLayer layer;
    layer.name = name;
    layer.U = find(tensors, name + ".U").to_matrix();
    layer.Vbase = find(tensors, name + ".Vbase").to_matrix();
    layer.m = layer.U.rows;
    layer.d = layer.U.cols;
    layer.n = layer.Vbase.cols;
    if (layer.Vbase.rows != layer.d) {
        throw ShapeError(name + ": U " + layer.U.shape_str() + " vs Vbase " + layer.Vbase.shape_str());
    }
    return layer;
}

} // namespace

void save_raw_net(const std::string& path, const MiniGazeNet& net) {
    std::vector<AtfTensor> tensors;
    for (int i = 0; i < kNetConvs; ++i) {
        tensors.push_back(AtfTensor::from_matrix(conv_name(i) + ".weight", net.conv[i]));
        push_affine(tensors, conv_name(i) + ".affine", net.aff[i]);
    }
    push_head(tensors, net.head_w, net.head_b);
    save_atf(path, tensors);
}

MiniGazeNet load_raw_net(const std::string& path) {
    const std::vector<AtfTensor> tensors = load_atf(path);
    MiniGazeNet net;
    for (int i = 0; i < kNetConvs; ++i) {
        net.conv[i] = find(tensors, conv_name(i) + ".weight").to_matrix();
        net.aff[i] = read_affine(tensors, conv_name(i) + ".affine");
    }
    net.head_w = find(tensors, "head.weight").to_matrix();
    net.head_b = find(tensors, "head.bias").to_vector();
    return net;
}

void save_decomposed_net(const std::string& path, const DecomposedGazeNet& net) {
    std::vector<AtfTensor> tensors;
    for (int i = 0; i < kNetConvs; ++i) {
        tensors.push_back(AtfTensor::from_matrix(conv_name(i) + ".U", net.conv[i].U));
        tensors.push_back(AtfTensor::from_matrix(conv_name(i) + ".Vbase", net.conv[i].Vbase));
        push_affine(tensors, conv_name(i) + ".affine", net.aff[i]);
    }
    push_head(tensors, net.head_w, net.head_b);
    save_atf(path, tensors);
}

DecomposedGazeNet load_decomposed_net(const std::string& path) {
    const std::vector<AtfTensor> tensors = load_atf(path);
    DecomposedGazeNet net;
    for (int i = 0; i < kNetConvs; ++i) {
        net.conv[i] = factors_from(tensors, conv_name(i));
        net.aff[i] = read_affine(tensors, conv_name(i) + ".affine");
    }
    net.head_w = find(tensors, "head.weight").to_matrix();
    net.head_b = find(tensors, "head.bias").to_vector();
    return net;
}

void save_merged_net(const std::string& path, const MergedGazeNet& net) {
    std::vector<AtfTensor> tensors;
    for (int i = 0; i < kNetConvs; ++i) {
        if (const auto* fact = std::get_if<DecomposedLayer>(&net.conv[i])) {
            tensors.push_back(AtfTensor::from_matrix(conv_name(i) + ".U", fact->U));
            tensors.push_back(AtfTensor::from_matrix(conv_name(i) + ".Vbase", fact->Vbase));
        } else {
            tensors.push_back(AtfTensor::from_matrix(conv_name(i) + ".weight", std::get<Matrix>(net.conv[i])));
        }
        push_affine(tensors, conv_name(i) + ".affine", net.aff[i]);
    }
    push_head(tensors, net.head_w, net.head_b);
    save_atf(path, tensors);
}

NetParams LoadedNet::resolve() const {
    NetParams p;
    for (int i = 0; i < kNetConvs; ++i) {
        p.conv[i] = full[static_cast<size_t>(i)] ? *full[static_cast<size_t>(i)]
                                                 : reconstruct(*factors[static_cast<size_t>(i)]);
    }
    p.aff = &aff;
    p.head_w = &head_w;
    p.head_b = &head_b;
    return p;
}

bool LoadedNet::all_factored() const {
    for (const auto& f : factors) {
        if (!f) return false;
    }
    return true;
}

DecomposedGazeNet LoadedNet::as_decomposed() const {
    if (!all_factored()) throw ShapeError("model file does not hold factors for every conv layer");
    DecomposedGazeNet net;
    for (int i = 0; i < kNetConvs; ++i) net.conv[i] = *factors[static_cast<size_t>(i)];
    net.aff = aff;
    net.head_w = head_w;
    net.head_b = head_b;
    return net;
}

LoadedNet load_net(const std::string& path) {
    const std::vector<AtfTensor> tensors = load_atf(path);
    LoadedNet net;
    for (int i = 0; i < kNetConvs; ++i) {
        if (find_opt(tensors, conv_name(i) + ".U")) {
            net.factors[static_cast<size_t>(i)] = factors_from(tensors, conv_name(i));
        } else {
            net.full[static_cast<size_t>(i)] = find(tensors, conv_name(i) + ".weight").to_matrix();
        }
        net.aff[static_cast<size_t>(i)] = read_affine(tensors, conv_name(i) + ".affine");
    }
    net.head_w = find(tensors, "head.weight").to_matrix();
    net.head_b = find(tensors, "head.bias").to_vector();
    return net;
}

void save_adapters(const std::string& path, const AdapterSet& adapters) {
    std::vector<AtfTensor> tensors;
    std::vector<double> meta;
    meta.push_back(adapters.kind == AdapterKind::alfa ? 1.0 : 0.0);
    tensors.push_back(AtfTensor::from_vector("adapter.kind", meta));
    for (int i = 0; i < kNetConvs; ++i) {
        const std::string prefix = conv_name(i);
        if (adapters.alfa[static_cast<size_t>(i)]) {
            const AlfaAdapter& a = *adapters.alfa[static_cast<size_t>(i)];
            tensors.push_back(AtfTensor::from_vector(
                prefix + ".meta", {static_cast<double>(a.H), static_cast<double>(a.r),
                                   static_cast<double>(a.d), static_cast<double>(a.n)}));
            for (int h = 0; h < a.H; ++h) {
                const std::string tag = std::to_string(h);
                tensors.push_back(AtfTensor::from_matrix(prefix + ".A_Q." + tag, a.A_Q[static_cast<size_t>(h)]));
                tensors.push_back(AtfTensor::from_matrix(prefix + ".B_Q." + tag, a.B_Q[static_cast<size_t>(h)]));
            }
            tensors.push_back(AtfTensor::from_matrix(prefix + ".A_P", a.A_P));
            tensors.push_back(AtfTensor::from_matrix(prefix + ".B_P", a.B_P));
        } else if (adapters.lora[static_cast<size_t>(i)]) {
            const LoraAdapter& a = *adapters.lora[static_cast<size_t>(i)];
            tensors.push_back(AtfTensor::from_matrix(prefix + ".A", a.A));
            tensors.push_back(AtfTensor::from_matrix(prefix + ".B", a.B));
        }
    }
    save_atf(path, tensors);
}

AdapterSet load_adapters(const std::string& path) {
    const std::vector<AtfTensor> tensors = load_atf(path);
    AdapterSet set;
    const std::vector<double> kind = find(tensors, "adapter.kind").to_vector();
    if (kind.size() != 1) throw AtfError("adapter.kind must hold one value");
    set.kind = kind[0] == 1.0 ? AdapterKind::alfa : AdapterKind::lora;
    for (int i = 0; i < kNetConvs; ++i) {
        const std::string prefix = conv_name(i);
        if (set.kind == AdapterKind::alfa) {
            const AtfTensor* meta = find_opt(tensors, prefix + ".meta");
            if (!meta) continue;
            const std::vector<double> m = meta->to_vector();
            if (m.size() != 4) throw AtfError("'" + prefix + ".meta' must hold H, r, d, n");
            AlfaAdapter a;
            a.H = static_cast<int>(m[0]);
            a.r = static_cast<int>(m[1]);
            a.d = static_cast<int>(m[2]);
            a.n = static_cast<int>(m[3]);
            for (int h = 0; h < a.H; ++h) {
                const std::string tag = std::to_string(h);
                a.A_Q.push_back(find(tensors, prefix + ".A_Q." + tag).to_matrix());
                a.B_Q.push_back(find(tensors, prefix + ".B_Q." + tag).to_matrix());
            }
            a.A_P = find(tensors, prefix + ".A_P").to_matrix();
            a.B_P = find(tensors, prefix + ".B_P").to_matrix();
            set.alfa[static_cast<size_t>(i)] = std::move(a);
        } else {
            const AtfTensor* at = find_opt(tensors, prefix + ".A");
            if (!at) continue;
            LoraAdapter a;
            a.A = at->to_matrix();
            a.B = find(tensors, prefix + ".B").to_matrix();
            a.r = a.A.cols;
            set.lora[static_cast<size_t>(i)] = std::move(a);
        }
    }
    return set;
}

} // namespace alfa
