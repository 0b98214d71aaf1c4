// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace ppsdoa {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

// Column-major complex matrix; tall-and-skinny in all uses here.
class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cplx& at(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
    const cplx& at(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

    std::span<cplx> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
    std::span<const cplx> col(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    cvec data_;
};

// Row-major real matrix for the small dense problems (normal matrices,
// Fisher information, LS refits).
class RMatrix {
public:
    RMatrix() = default;
    RMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const double& at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    rvec data_;
};

// a^H b
cplx cdot(std::span<const cplx> a, std::span<const cplx> b);
double norm_sq(std::span<const cplx> a);
double norm_sq(std::span<const double> a);

// Thin QR of a tall matrix: q has orthonormal columns, r is upper triangular
// with q*r = a. Gram-Schmidt with one reorthogonalization pass. Throws
// std::runtime_error when a column collapses (numerically rank deficient).
struct ThinQr {
    CMatrix q;
    CMatrix r;
};
ThinQr qr_orthonormal(const CMatrix& a);

// Back substitution for upper-triangular r (from ThinQr).
cvec solve_upper(const CMatrix& r, const cvec& b);

// Condition number estimate of a Hermitian PSD matrix via its eigenvalues
// (real symmetric embedding + Jacobi). Returns +inf when the smallest
// eigenvalue is not positive.
double hermitian_condition(const CMatrix& h);

// Gaussian elimination with partial pivoting; nullopt when singular.
std::optional<rvec> solve_linear(RMatrix a, rvec b);

// Least squares via Householder QR; nullopt when a is rank deficient.
std::optional<rvec> lstsq(RMatrix a, rvec b);

// Cyclic Jacobi eigendecomposition of a real symmetric matrix.
struct EigenSym {
    rvec values;       // ascending
    RMatrix vectors;   // column j pairs with values[j]
};
EigenSym jacobi_eigh(RMatrix a);

}  // namespace ppsdoa
