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

#ifndef NMOE_TENSOR_H_
#define NMOE_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace nmoe {

// Dense row-major matrix of doubles. Rows are samples throughout the
// library; a single vector is a 1 x n tensor.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Throws kConfig if data.size() != rows * cols.
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2 FromRows(
      std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2 Identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool AllFinite() const;
  bool SameShape(const Tensor2& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string ShapeString() const;

  bool operator==(const Tensor2& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a (n x k) * b (k x m).
Tensor2 MatMul(const Tensor2& a, const Tensor2& b);
// a^T * b for a (n x k), b (n x m); result k x m.
Tensor2 MatMulTransA(const Tensor2& a, const Tensor2& b);
// a * b^T for a (n x k), b (m x k); result n x m.
Tensor2 MatMulTransB(const Tensor2& a, const Tensor2& b);

Tensor2 Transpose(const Tensor2& a);
Tensor2 SelectRows(const Tensor2& a, std::span<const std::size_t> rows);
Tensor2 ConcatRows(std::span<const Tensor2> parts);

double FrobeniusNorm(const Tensor2& a);
double Trace(const Tensor2& a);

}  // namespace nmoe

#endif  // NMOE_TENSOR_H_
