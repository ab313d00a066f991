#include "detspace/xprec.hpp"

#include <algorithm>
#include <cmath>

namespace detspace::xp {

Matrix::Matrix(int rows, int cols, int digits)
    : rows_(rows), cols_(cols), digits_(digits), bits_(bits_for_digits(digits)) {
    if (rows < 1 || cols < 1) throw ValidationError("xp::Matrix: non-positive shape");
    if (digits < 50) throw ValidationError("xp::Matrix: digits must be >= 50");
    ent_.reserve(static_cast<std::size_t>(rows) * cols);
    for (std::size_t k = 0; k < static_cast<std::size_t>(rows) * cols; ++k)
        ent_.emplace_back(bits_);
}

Matrix Matrix::identity(int n, int digits) {
    Matrix m(n, n, digits);
    for (int i = 0; i < n; ++i) m.set(i, i, cplx(1.0, 0.0));
    return m;
}

Matrix Matrix::from_eigen_rowmajor(const cplx* data, int rows, int cols, int digits) {
    Matrix m(rows, cols, digits);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m.set(i, j, data[static_cast<std::size_t>(i) * cols + j]);
    return m;
}

std::vector<cplx> Matrix::to_doubles_rowmajor() const {
    std::vector<cplx> out;
    out.reserve(ent_.size());
    for (const auto& e : ent_) out.push_back(e.to_cplx());
    return out;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw ValidationError("xp: matmul shape mismatch");
    Matrix r(a.rows_, b.cols_, std::max(a.digits_, b.digits_));
    for (int i = 0; i < a.rows_; ++i)
        for (int j = 0; j < b.cols_; ++j) {
            Complex acc(r.bits_);
            for (int k = 0; k < a.cols_; ++k) acc += a.at(i, k) * b.at(k, j);
            r.at(i, j) = std::move(acc);
        }
    return r;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw ValidationError("xp: add shape mismatch");
    Matrix r(a.rows_, a.cols_, std::max(a.digits_, b.digits_));
    for (std::size_t k = 0; k < a.ent_.size(); ++k) r.ent_[k] = a.ent_[k] + b.ent_[k];
    return r;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw ValidationError("xp: sub shape mismatch");
    Matrix r(a.rows_, a.cols_, std::max(a.digits_, b.digits_));
    for (std::size_t k = 0; k < a.ent_.size(); ++k) r.ent_[k] = a.ent_[k] - b.ent_[k];
    return r;
}

Matrix Matrix::scaled(const Complex& c) const {
    Matrix r(rows_, cols_, digits_);
    for (std::size_t k = 0; k < ent_.size(); ++k) r.ent_[k] = ent_[k] * c;
    return r;
}

Matrix Matrix::scaled_pow2(long e) const {
    Matrix r(rows_, cols_, digits_);
    for (std::size_t k = 0; k < ent_.size(); ++k)
        r.ent_[k] = Complex(ent_[k].re.ldexp(e), ent_[k].im.ldexp(e));
    return r;
}

Real Matrix::one_norm() const {
    Real best(bits_);
    for (int j = 0; j < cols_; ++j) {
        Real sum(bits_);
        for (int i = 0; i < rows_; ++i) sum += at(i, j).abs();
        if (best < sum) best = sum;
    }
    return best;
}

Real Matrix::max_abs() const {
    Real best(bits_);
    for (const auto& e : ent_) {
        Real a = e.abs();
        if (best < a) best = a;
    }
    return best;
}

Real Matrix::frobenius_norm() const {
    Real sum(bits_);
    for (const auto& e : ent_) sum += e.abs2();
    return sum.sqrt();
}

namespace {

Real pow10_real(int exponent, mpfr_prec_t bits) {
    Real ten(10.0, bits);
    Real acc(1.0, bits);
    const int n = std::abs(exponent);
    for (int k = 0; k < n; ++k) acc = acc * ten;
    if (exponent < 0) return Real(1.0, bits) / acc;
    return acc;
}

} // namespace

Matrix solve(const Matrix& A, const Matrix& B) {
    const int n = A.rows();
    if (A.cols() != n) throw ValidationError("xp::solve: A must be square");
    if (B.rows() != n) throw ValidationError("xp::solve: B row count mismatch");
    const int digits = std::max(A.digits(), B.digits());
    const mpfr_prec_t bits = bits_for_digits(digits);

    // Working copies (augmented elimination on LU with row pivoting).
    Matrix lu = A;
    Matrix x = B;
    const Real pivot_floor = A.max_abs() * pow10_real(-digits / 2, bits);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;

    for (int col = 0; col < n; ++col) {
        int piv = col;
        Real piv_mag = lu.at(col, col).abs2();
        for (int r = col + 1; r < n; ++r) {
            Real mag = lu.at(r, col).abs2();
            if (piv_mag < mag) {
                piv_mag = mag;
                piv = r;
            }
        }
        if (!(pivot_floor * pivot_floor < piv_mag)) {
            throw NumericalError(
                "xp::solve: pivot below 10^(-digits/2) of matrix scale; matrix is singular "
                "to working precision (consider a pseudo-inverse policy)");
        }
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(lu.at(col, j), lu.at(piv, j));
            for (int j = 0; j < x.cols(); ++j) std::swap(x.at(col, j), x.at(piv, j));
            std::swap(perm[col], perm[piv]);
        }
        for (int r = col + 1; r < n; ++r) {
            Complex f = lu.at(r, col) / lu.at(col, col);
            for (int j = col + 1; j < n; ++j) lu.at(r, j) -= f * lu.at(col, j);
            for (int j = 0; j < x.cols(); ++j) x.at(r, j) -= f * x.at(col, j);
            lu.at(r, col) = Complex(bits);
        }
    }
    // Back substitution.
    for (int col = n - 1; col >= 0; --col) {
        for (int j = 0; j < x.cols(); ++j) {
            Complex acc = x.at(col, j);
            for (int k = col + 1; k < n; ++k) acc -= lu.at(col, k) * x.at(k, j);
            x.at(col, j) = acc / lu.at(col, col);
        }
    }

    // Residual certificate.
    Matrix resid = A * x - B;
    Real rnorm = resid.frobenius_norm();
    Real bound = B.frobenius_norm() * pow10_real(-digits / 2, bits);
    if (!B.frobenius_norm().is_zero() && bound < rnorm) {
        throw NumericalError("xp::solve: residual exceeds 10^(-digits/2) * ||B||");
    }
    return x;
}

Matrix expm(const Matrix& A) {
    const int n = A.rows();
    if (A.cols() != n) throw ValidationError("xp::expm: A must be square");
    const int digits = A.digits();
    const mpfr_prec_t bits = A.bits();

    // Scale so that ||A/2^j||_1 < 1/2.
    double nrm = A.one_norm().to_double();
    long j = 0;
    if (std::isfinite(nrm) && nrm > 0.5) {
        j = static_cast<long>(std::ceil(std::log2(nrm / 0.5))) + 1;
    }
    Matrix As = A.scaled_pow2(-j);

    // Taylor series: E = sum_k As^k / k!, stop when the term is negligible.
    Matrix sum = Matrix::identity(n, digits);
    Matrix term = Matrix::identity(n, digits);
    const Real cutoff = pow10_real(-digits, bits);
    for (int k = 1; k < 10000; ++k) {
        term = term * As;
        Complex inv_k(Real(1.0, bits) / Real(static_cast<double>(k), bits), Real(bits));
        term = term.scaled(inv_k);
        sum = sum + term;
        Real tn = term.one_norm();
        Real sn = sum.one_norm();
        if (tn < cutoff * sn) break;
    }
    for (long s = 0; s < j; ++s) sum = sum * sum;
    return sum;
}

} // namespace detspace::xp
