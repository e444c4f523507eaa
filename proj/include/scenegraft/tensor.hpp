#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "scenegraft/errors.hpp"

namespace scenegraft {

// Row-major dense matrix, double precision.
struct Dense2 {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Dense2() = default;
    Dense2(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Dense2& o) const { return rows == o.rows && cols == o.cols; }
};

// Row-major rank-3 tensor: index (i, j, k) at ((i*d1)+j)*d2+k.
struct Dense3 {
    std::size_t d0 = 0, d1 = 0, d2 = 0;
    std::vector<double> data;

    Dense3() = default;
    Dense3(std::size_t a, std::size_t b, std::size_t c, double fill = 0.0)
        : d0(a), d1(b), d2(c), data(a * b * c, fill) {}

    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * d1 + j) * d2 + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * d1 + j) * d2 + k];
    }
    std::size_t size() const { return data.size(); }

    // View the leading two dims as rows: (d0*d1) x d2.
    Dense2 as_matrix() const;
};

// GEMM helpers (Eigen-backed behind this interface).
Dense2 matmul(const Dense2& a, const Dense2& b);      // a * b
Dense2 matmul_tn(const Dense2& a, const Dense2& b);   // a^T * b
Dense2 matmul_nt(const Dense2& a, const Dense2& b);   // a * b^T
Dense2 transpose(const Dense2& a);

void add_inplace(Dense2& a, const Dense2& b);
Dense2 add(const Dense2& a, const Dense2& b);
bool all_finite(const Dense2& a);
bool all_finite(const Dense3& a);
double max_abs_diff(const Dense2& a, const Dense2& b);

// Portable tensor dump: magic "SGTD", u32 version, u8 element type
// (0 = f64), u8 rank, u64 dims..., then row-major little-endian payload.
void write_tensor(const Dense2& t, const std::filesystem::path& path);
void write_tensor(const Dense3& t, const std::filesystem::path& path);
void write_tensor_text(const Dense2& t, const std::filesystem::path& path);
void write_tensor_text(const Dense3& t, const std::filesystem::path& path);

struct LoadedTensor {
    std::vector<std::size_t> dims;
    std::vector<double> data;
};
LoadedTensor read_tensor(const std::filesystem::path& path);

}  // namespace scenegraft
