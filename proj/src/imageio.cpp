#include "alfa/imageio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "alfa/errors.hpp"

namespace alfa {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("short write to '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string csv_line(const std::vector<std::string>& cells) {
    std::string line;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    line += '\n';
    return line;
}

namespace {

void write_pgm_bytes(const std::string& path, const Matrix& image,
                     const std::function<double(double)>& to_unit) {
    std::string buf = "P5\n" + std::to_string(image.cols) + " " + std::to_string(image.rows) + "\n255\n";
    buf.reserve(buf.size() + image.size());
    for (double v : image.data) {
        const double unit = std::clamp(to_unit(v), 0.0, 1.0);
        buf.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(unit * 255.0))));
    }
    write_text_atomic(path, buf);
}

} // namespace

void write_pgm(const std::string& path, const Matrix& image) {
    write_pgm_bytes(path, image, [](double v) { return v; });
}

void write_pgm_normalized(const std::string& path, const Matrix& values) {
    double lo = values.data.empty() ? 0.0 : values.data[0];
    double hi = lo;
    for (double v : values.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi - lo;
    if (span <= 0.0) {
        write_pgm_bytes(path, values, [](double) { return 0.0; });
    } else {
        write_pgm_bytes(path, values, [lo, span](double v) { return (v - lo) / span; });
    }
}

Matrix read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string magic;
    in >> magic;
    if (magic != "P5") throw IoError("'" + path + "' is not a binary PGM (P5)");
    int w = 0, h = 0, maxval = 0;
    // Skip comment lines between header tokens.
    const auto next_int = [&](int& target) {
        for (;;) {
            in >> std::ws;
            if (in.peek() == '#') {
                std::string line;
                std::getline(in, line);
                continue;
            }
            if (!(in >> target)) throw IoError("'" + path + "' has a malformed PGM header");
            return;
        }
    };
    next_int(w);
    next_int(h);
    next_int(maxval);
    if (maxval != 255) throw IoError("'" + path + "' must be 8-bit (maxval 255)");
    in.get(); // single whitespace after maxval
    std::vector<char> bytes(static_cast<size_t>(w) * h);
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw IoError("'" + path + "' pixel data truncated");
    Matrix img(h, w);
    for (size_t i = 0; i < bytes.size(); ++i) {
        img.data[i] = static_cast<double>(static_cast<unsigned char>(bytes[i])) / 255.0;
    }
    return img;
}

void write_matrix_csv(const std::string& path, const Matrix& values) {
    std::string buf;
    for (int i = 0; i < values.rows; ++i) {
        std::vector<std::string> cells;
        cells.reserve(static_cast<size_t>(values.cols));
        for (int j = 0; j < values.cols; ++j) cells.push_back(format_double(values(i, j)));
        buf += csv_line(cells);
    }
    write_text_atomic(path, buf);
}

} // namespace alfa
