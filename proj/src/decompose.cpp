#include "alfa/decompose.hpp"

#include "alfa/errors.hpp"
#include "alfa/svd.hpp"

namespace alfa {

DecomposedLayer decompose_layer(const Matrix& w, int d, const std::string& name) {
    SvdResult r = svd(w, d); // validates 1 <= d <= min(m, n)
    DecomposedLayer layer;
    layer.name = name;
    layer.d = d;
    layer.m = w.rows;
    layer.n = w.cols;
    layer.U = std::move(r.U);
    layer.Vbase = std::move(r.Vt);
    for (int k = 0; k < d; ++k) {
        const double s = r.S[static_cast<size_t>(k)];
        for (int j = 0; j < layer.n; ++j) layer.Vbase(k, j) *= s;
    }
    return layer;
}

double reconstruction_error(const DecomposedLayer& layer, const Matrix& w) {
    if (w.rows != layer.m || w.cols != layer.n) {
        throw ShapeError("reconstruction_error: weight " + w.shape_str() + " vs layer (" +
                         std::to_string(layer.m) + "x" + std::to_string(layer.n) + ")");
    }
    return frobenius_norm(sub(w, reconstruct(layer)));
}

Matrix rank_slice(const DecomposedLayer& layer, int s) {
    if (s < 0 || s >= layer.d) {
        throw IndexError("slice " + std::to_string(s) + " out of range [0, " + std::to_string(layer.d) + ")");
    }
    std::vector<double> col(static_cast<size_t>(layer.m));
    for (int i = 0; i < layer.m; ++i) col[static_cast<size_t>(i)] = layer.U(i, s);
    std::vector<double> row(static_cast<size_t>(layer.n));
    for (int j = 0; j < layer.n; ++j) row[static_cast<size_t>(j)] = layer.Vbase(s, j);
    return outer(col, row);
}

Matrix reconstruct(const DecomposedLayer& layer) { return matmul(layer.U, layer.Vbase); }

} // namespace alfa
