// Copyright 2026 The NMoE Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nmoe/tensor.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "nmoe/error.h"

namespace nmoe {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    Fail(ErrorCode::kConfig, "tensor data length " +
                                 std::to_string(data_.size()) +
                                 " does not match shape " + ShapeString());
  }
}

Tensor2 Tensor2::FromRows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(n * m);
  for (const auto& r : rows) {
    Require(r.size() == m, ErrorCode::kConfig, "ragged tensor literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor2(n, m, std::move(data));
}

Tensor2 Tensor2::Identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

bool Tensor2::AllFinite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor2::ShapeString() const {
  return "(" + std::to_string(rows_) + " x " + std::to_string(cols_) + ")";
}

Tensor2 MatMul(const Tensor2& a, const Tensor2& b) {
  Require(a.cols() == b.rows(), ErrorCode::kConfig,
          "matmul shape mismatch " + a.ShapeString() + " * " +
              b.ShapeString());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor2 c(n, m);
  const double* bd = b.data().data();
  double* cd = c.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = cd + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      const double* brow = bd + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Tensor2 MatMulTransA(const Tensor2& a, const Tensor2& b) {
  Require(a.rows() == b.rows(), ErrorCode::kConfig,
          "matmul^T shape mismatch " + a.ShapeString() + " vs " +
              b.ShapeString());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor2 c(k, m);
  const double* bd = b.data().data();
  double* cd = c.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* brow = bd + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      double* crow = cd + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Tensor2 MatMulTransB(const Tensor2& a, const Tensor2& b) {
  Require(a.cols() == b.cols(), ErrorCode::kConfig,
          "matmul*T shape mismatch " + a.ShapeString() + " vs " +
              b.ShapeString());
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Tensor2 c(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto arow = a.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c(i, j) = s;
    }
  }
  return c;
}

Tensor2 Transpose(const Tensor2& a) {
  Tensor2 t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

Tensor2 SelectRows(const Tensor2& a, std::span<const std::size_t> rows) {
  Tensor2 out(rows.size(), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Require(rows[i] < a.rows(), ErrorCode::kInternal, "row index out of range");
    const auto src = a.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Tensor2 ConcatRows(std::span<const Tensor2> parts) {
  std::size_t rows = 0;
  const std::size_t cols = parts.empty() ? 0 : parts.front().cols();
  for (const auto& p : parts) {
    Require(p.cols() == cols, ErrorCode::kConfig,
            "concat with mismatched column counts");
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) {
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  return Tensor2(rows, cols, std::move(data));
}

double FrobeniusNorm(const Tensor2& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double Trace(const Tensor2& a) {
  Require(a.rows() == a.cols(), ErrorCode::kConfig, "trace of non-square");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
  return s;
}

}  // namespace nmoe
