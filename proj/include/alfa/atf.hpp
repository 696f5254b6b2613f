#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "alfa/matrix.hpp"
#include "alfa/model.hpp"

namespace alfa {

// ATF1 container: "ATF1" magic, u32 little-endian tensor count, then per
// tensor: u16 name length, UTF-8 name, u8 dtype (0 = binary32, 1 = binary64),
// u8 ndim, ndim x u32 dims, row-major little-endian payload. Round-trips are
// bit-exact; names are unique; the file length must match the header
// arithmetic exactly.
enum class AtfDtype : std::uint8_t { f32 = 0, f64 = 1 };

struct AtfTensor {
    std::string name;
    AtfDtype dtype = AtfDtype::f64;
    std::vector<std::uint32_t> dims;
    std::vector<double> f64; // used when dtype == f64
    std::vector<float> f32;  // used when dtype == f32

    std::size_t element_count() const;

    static AtfTensor from_matrix(std::string name, const Matrix& m);
    static AtfTensor from_vector(std::string name, const std::vector<double>& v);
    Matrix to_matrix() const;            // requires ndim == 2
    std::vector<double> to_vector() const; // requires ndim == 1
};

// Writes atomically (temp file + rename). Throws IoError on write failure,
// AtfError on duplicate names.
void save_atf(const std::string& path, const std::vector<AtfTensor>& tensors);

// Throws AtfError on bad magic, truncation, trailing bytes or duplicate
// names; IoError if the file cannot be opened.
std::vector<AtfTensor> load_atf(const std::string& path);

// ---------------------------------------------------------------------------
// Model / adapter file schemas
// ---------------------------------------------------------------------------

void save_raw_net(const std::string& path, const MiniGazeNet& net);
MiniGazeNet load_raw_net(const std::string& path);

void save_decomposed_net(const std::string& path, const DecomposedGazeNet& net);
DecomposedGazeNet load_decomposed_net(const std::string& path);

// A merged model may hold factors for some convs and full weights for
// others; the loader accepts either form per layer.
void save_merged_net(const std::string& path, const MergedGazeNet& net);

struct LoadedNet {
    // Per conv layer, exactly one of the two is populated.
    std::array<std::optional<DecomposedLayer>, kNetConvs> factors;
    std::array<std::optional<Matrix>, kNetConvs> full;
    std::array<Affine, kNetConvs> aff;
    Matrix head_w;
    std::vector<double> head_b;

    NetParams resolve() const;
    // Requires every layer in factor form.
    DecomposedGazeNet as_decomposed() const;
    bool all_factored() const;
};
LoadedNet load_net(const std::string& path);

void save_adapters(const std::string& path, const AdapterSet& adapters);
AdapterSet load_adapters(const std::string& path);

} // namespace alfa
