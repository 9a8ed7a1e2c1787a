#pragma once

#include <cstring>
#include <vector>

#include "cdiff/error.hpp"

namespace cdiff {

// Dense row-major matrix of doubles. Sized for desk-scale models; all
// kernels are plain loops.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

    size_t size() const { return a.size(); }
    bool empty() const { return a.empty(); }

    void fill(double v) { std::fill(a.begin(), a.end(), v); }
    void zero() { fill(0.0); }

    Mat& operator+=(const Mat& o) {
        require(rows == o.rows && cols == o.cols, "Mat += shape mismatch");
        for (size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
        return *this;
    }
    Mat& operator*=(double s) {
        for (double& v : a) v *= s;
        return *this;
    }
};

// C = A * B
inline Mat matmul(const Mat& A, const Mat& B) {
    require(A.cols == B.rows, "matmul shape mismatch");
    Mat C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i) {
        const double* ai = A.row(i);
        double* ci = C.row(i);
        for (int k = 0; k < A.cols; ++k) {
            double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = B.row(k);
            for (int j = 0; j < B.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return C;
}

// C = A * B^T
inline Mat matmul_bt(const Mat& A, const Mat& B) {
    require(A.cols == B.cols, "matmul_bt shape mismatch");
    Mat C(A.rows, B.rows);
    for (int i = 0; i < A.rows; ++i) {
        const double* ai = A.row(i);
        for (int j = 0; j < B.rows; ++j) {
            const double* bj = B.row(j);
            double s = 0.0;
            for (int k = 0; k < A.cols; ++k) s += ai[k] * bj[k];
            C(i, j) = s;
        }
    }
    return C;
}

// C = A^T * B
inline Mat matmul_at(const Mat& A, const Mat& B) {
    require(A.rows == B.rows, "matmul_at shape mismatch");
    Mat C(A.cols, B.cols);
    for (int k = 0; k < A.rows; ++k) {
        const double* ak = A.row(k);
        const double* bk = B.row(k);
        for (int i = 0; i < A.cols; ++i) {
            double aki = ak[i];
            if (aki == 0.0) continue;
            double* ci = C.row(i);
            for (int j = 0; j < B.cols; ++j) ci[j] += aki * bk[j];
        }
    }
    return C;
}

} // namespace cdiff
