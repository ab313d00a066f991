#pragma once

// Extended-precision complex dense-matrix kernel on top of MPFR.
// Only the kernels the trajectory solver and ill-conditioned Gram inversions
// need: LU solve, matrix exponential, matvec, norms. Eigen handles everything
// double-precision; this module exists because Gram matrices of nearly
// dependent families lose all double-precision digits under inversion.

#include <mpfr.h>

#include <complex>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "detspace/common.hpp"

namespace detspace::xp {

/// Binary precision used for a decimal-digit request (plus guard bits).
inline mpfr_prec_t bits_for_digits(int digits) {
    return static_cast<mpfr_prec_t>(digits * 3.3219280948873623 + 64);
}

/// Arbitrary-precision real number. Precision is fixed at construction.
class Real {
public:
    explicit Real(mpfr_prec_t bits) { mpfr_init2(v_, bits); mpfr_set_zero(v_, 1); }
    Real(double x, mpfr_prec_t bits) { mpfr_init2(v_, bits); mpfr_set_d(v_, x, MPFR_RNDN); }
    Real(const Real& o) { mpfr_init2(v_, mpfr_get_prec(o.v_)); mpfr_set(v_, o.v_, MPFR_RNDN); }
    Real(Real&& o) noexcept {
        mpfr_init2(v_, mpfr_get_prec(o.v_));
        mpfr_swap(v_, o.v_);
    }
    Real& operator=(const Real& o) {
        if (this != &o) mpfr_set(v_, o.v_, MPFR_RNDN);
        return *this;
    }
    Real& operator=(Real&& o) noexcept {
        mpfr_swap(v_, o.v_);
        return *this;
    }
    ~Real() { mpfr_clear(v_); }

    mpfr_prec_t prec() const { return mpfr_get_prec(v_); }
    double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }

    /// Decimal scientific-notation string carrying the full working precision.
    std::string to_string() const {
        char* s = nullptr;
        mpfr_asprintf(&s, "%.*Re", static_cast<int>(prec() / 3.32) + 2, v_);
        std::string out(s);
        mpfr_free_str(s);
        return out;
    }
    static Real from_string(const std::string& text, mpfr_prec_t bits) {
        Real r(bits);
        if (mpfr_set_str(r.v_, text.c_str(), 10, MPFR_RNDN) != 0)
            throw ValidationError("xp::Real: unparsable number " + text);
        return r;
    }

    static Real from_op(const Real& a, const Real& b,
                        int (*op)(mpfr_ptr, mpfr_srcptr, mpfr_srcptr, mpfr_rnd_t)) {
        Real r(std::max(a.prec(), b.prec()));
        op(r.v_, a.v_, b.v_, MPFR_RNDN);
        return r;
    }

    friend Real operator+(const Real& a, const Real& b) { return from_op(a, b, mpfr_add); }
    friend Real operator-(const Real& a, const Real& b) { return from_op(a, b, mpfr_sub); }
    friend Real operator*(const Real& a, const Real& b) { return from_op(a, b, mpfr_mul); }
    friend Real operator/(const Real& a, const Real& b) { return from_op(a, b, mpfr_div); }
    Real& operator+=(const Real& b) { mpfr_add(v_, v_, b.v_, MPFR_RNDN); return *this; }
    Real& operator-=(const Real& b) { mpfr_sub(v_, v_, b.v_, MPFR_RNDN); return *this; }

    Real operator-() const {
        Real r(prec());
        mpfr_neg(r.v_, v_, MPFR_RNDN);
        return r;
    }

    Real sqrt() const {
        Real r(prec());
        mpfr_sqrt(r.v_, v_, MPFR_RNDN);
        return r;
    }
    Real abs() const {
        Real r(prec());
        mpfr_abs(r.v_, v_, MPFR_RNDN);
        return r;
    }
    /// Multiply by 2^e (exact).
    Real ldexp(long e) const {
        Real r(prec());
        mpfr_mul_2si(r.v_, v_, e, MPFR_RNDN);
        return r;
    }

    bool operator<(const Real& b) const { return mpfr_cmp(v_, b.v_) < 0; }
    bool operator>(const Real& b) const { return mpfr_cmp(v_, b.v_) > 0; }
    bool is_zero() const { return mpfr_zero_p(v_) != 0; }

private:
    mpfr_t v_;
};

/// Arbitrary-precision complex number (pair of Reals at equal precision).
struct Complex {
    Real re, im;

    explicit Complex(mpfr_prec_t bits) : re(bits), im(bits) {}
    Complex(const cplx& z, mpfr_prec_t bits) : re(z.real(), bits), im(z.imag(), bits) {}
    Complex(Real r, Real i) : re(std::move(r)), im(std::move(i)) {}

    mpfr_prec_t prec() const { return re.prec(); }
    cplx to_cplx() const { return {re.to_double(), im.to_double()}; }

    friend Complex operator+(const Complex& a, const Complex& b) {
        return {a.re + b.re, a.im + b.im};
    }
    friend Complex operator-(const Complex& a, const Complex& b) {
        return {a.re - b.re, a.im - b.im};
    }
    friend Complex operator*(const Complex& a, const Complex& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend Complex operator/(const Complex& a, const Complex& b) {
        Real d = b.abs2();
        return {(a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d};
    }
    Complex& operator+=(const Complex& b) {
        re += b.re;
        im += b.im;
        return *this;
    }
    Complex& operator-=(const Complex& b) {
        re -= b.re;
        im -= b.im;
        return *this;
    }
    Complex operator-() const { return {-re, -im}; }

    Real abs2() const { return re * re + im * im; }
    Real abs() const { return abs2().sqrt(); }
    Complex conj() const { return {re, -im}; }
};

/// Dense complex matrix with every entry at the same working precision.
/// digits is the decimal-digit precision the matrix was built for (>= 50).
class Matrix {
public:
    Matrix(int rows, int cols, int digits);
    static Matrix identity(int n, int digits);
    static Matrix from_eigen_rowmajor(const cplx* data, int rows, int cols, int digits);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int digits() const { return digits_; }
    mpfr_prec_t bits() const { return bits_; }

    Complex& at(int i, int j) { return ent_[static_cast<std::size_t>(i) * cols_ + j]; }
    const Complex& at(int i, int j) const {
        return ent_[static_cast<std::size_t>(i) * cols_ + j];
    }

    void set(int i, int j, const cplx& z) { at(i, j) = Complex(z, bits_); }
    cplx get(int i, int j) const { return at(i, j).to_cplx(); }

    /// Rounds every entry to double precision.
    std::vector<cplx> to_doubles_rowmajor() const;

    friend Matrix operator*(const Matrix& a, const Matrix& b);
    friend Matrix operator+(const Matrix& a, const Matrix& b);
    friend Matrix operator-(const Matrix& a, const Matrix& b);
    Matrix scaled(const Complex& c) const;
    Matrix scaled_pow2(long e) const;

    Real one_norm() const;    // max column sum of |entries|
    Real max_abs() const;
    Real frobenius_norm() const;

private:
    int rows_, cols_, digits_;
    mpfr_prec_t bits_;
    std::vector<Complex> ent_;
};

/// Column vector convenience alias (a Matrix with one column).
using Vector = Matrix;

/// Solves A X = B by partial-pivoted LU at the operands' precision.
/// Throws NumericalError if a pivot falls below 10^(-digits/2) * max|A|
/// (singular to working precision) or if the residual check
/// ||A X - B|| <= 10^(-digits/2) * ||B|| fails.
Matrix solve(const Matrix& A, const Matrix& B);

/// exp(A) by scaling-and-squaring: scale so the 1-norm is below 1/2, sum the
/// Taylor series until the term norm falls below 10^(-digits) relative, then
/// square back.
Matrix expm(const Matrix& A);

} // namespace detspace::xp
