#include "scenegraft/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <Eigen/Dense>

namespace scenegraft {

namespace {

using EigenMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using EigenMapMut =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

EigenMap map_of(const Dense2& m) {
    return EigenMap(m.data.data(), static_cast<Eigen::Index>(m.rows),
                    static_cast<Eigen::Index>(m.cols));
}

}  // namespace

Dense2 Dense3::as_matrix() const {
    Dense2 m(d0 * d1, d2);
    m.data = data;
    return m;
}

Dense2 matmul(const Dense2& a, const Dense2& b) {
    if (a.cols != b.rows) throw ValidationError("matmul: inner dimensions differ");
    Dense2 c(a.rows, b.cols);
    EigenMapMut(c.data.data(), a.rows, b.cols) = map_of(a) * map_of(b);
    return c;
}

Dense2 matmul_tn(const Dense2& a, const Dense2& b) {
    if (a.rows != b.rows) throw ValidationError("matmul_tn: leading dimensions differ");
    Dense2 c(a.cols, b.cols);
    EigenMapMut(c.data.data(), a.cols, b.cols) = map_of(a).transpose() * map_of(b);
    return c;
}

Dense2 matmul_nt(const Dense2& a, const Dense2& b) {
    if (a.cols != b.cols) throw ValidationError("matmul_nt: trailing dimensions differ");
    Dense2 c(a.rows, b.rows);
    EigenMapMut(c.data.data(), a.rows, b.rows) = map_of(a) * map_of(b).transpose();
    return c;
}

Dense2 transpose(const Dense2& a) {
    Dense2 t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

void add_inplace(Dense2& a, const Dense2& b) {
    if (!a.same_shape(b)) throw ValidationError("add: shape mismatch");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

Dense2 add(const Dense2& a, const Dense2& b) {
    Dense2 c = a;
    add_inplace(c, b);
    return c;
}

bool all_finite(const Dense2& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const Dense3& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

double max_abs_diff(const Dense2& a, const Dense2& b) {
    if (!a.same_shape(b)) throw ValidationError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

// ---------------------------------------------------------------------------
// Tensor files

namespace {

constexpr char kMagic[5] = "SGTD";
constexpr std::uint32_t kVersion = 1;

void write_tensor_impl(const double* data, const std::vector<std::size_t>& dims,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write tensor file: " + path.string());
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    const std::uint8_t elem_type = 0;  // f64
    const auto rank = static_cast<std::uint8_t>(dims.size());
    out.write(reinterpret_cast<const char*>(&elem_type), 1);
    out.write(reinterpret_cast<const char*>(&rank), 1);
    std::size_t total = 1;
    for (std::size_t d : dims) {
        const auto d64 = static_cast<std::uint64_t>(d);
        out.write(reinterpret_cast<const char*>(&d64), sizeof(d64));
        total *= d;
    }
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(total * sizeof(double)));
    if (!out) throw IoError("write failed: " + path.string());
}

void write_tensor_text_impl(const double* data, const std::vector<std::size_t>& dims,
                            const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write tensor text file: " + path.string());
    out << "dims";
    std::size_t total = 1, row = dims.empty() ? 1 : dims.back();
    for (std::size_t d : dims) {
        out << " " << d;
        total *= d;
    }
    out << "\n";
    char buf[40];
    for (std::size_t i = 0; i < total; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", data[i]);
        out << buf << ((i + 1) % row == 0 ? "\n" : " ");
    }
}

}  // namespace

void write_tensor(const Dense2& t, const std::filesystem::path& path) {
    write_tensor_impl(t.data.data(), {t.rows, t.cols}, path);
}

void write_tensor(const Dense3& t, const std::filesystem::path& path) {
    write_tensor_impl(t.data.data(), {t.d0, t.d1, t.d2}, path);
}

void write_tensor_text(const Dense2& t, const std::filesystem::path& path) {
    write_tensor_text_impl(t.data.data(), {t.rows, t.cols}, path);
}

void write_tensor_text(const Dense3& t, const std::filesystem::path& path) {
    write_tensor_text_impl(t.data.data(), {t.d0, t.d1, t.d2}, path);
}

LoadedTensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tensor file: " + path.string());
    char magic[4];
    std::uint32_t version = 0;
    std::uint8_t elem_type = 0, rank = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&elem_type), 1);
    in.read(reinterpret_cast<char*>(&rank), 1);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError(path.string() + ": not a tensor file");
    }
    if (version != kVersion || elem_type != 0) {
        throw ParseError(path.string() + ": unsupported tensor version or element type");
    }
    LoadedTensor t;
    std::size_t total = 1;
    for (int i = 0; i < rank; ++i) {
        std::uint64_t d = 0;
        in.read(reinterpret_cast<char*>(&d), sizeof(d));
        t.dims.push_back(static_cast<std::size_t>(d));
        total *= d;
    }
    t.data.resize(total);
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw ParseError(path.string() + ": truncated tensor payload");
    return t;
}

}  // namespace scenegraft
