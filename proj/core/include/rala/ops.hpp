// Copyright 2026 The rala Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rala/autograd.hpp"

namespace rala {

// Per-sequence valid lengths along the time axis of a [batch, time, ...]
// tensor. An empty vector means every sequence spans the full time axis.
using Lengths = std::vector<std::int64_t>;

Lengths full_lengths(std::int64_t batch, std::int64_t time);
// Validates lengths against a [batch, time, ...] shape, filling in defaults.
Lengths resolve_lengths(const Lengths& lengths, const Shape& shape);

// Raw kernels over row-major buffers. C = A*B (+C when accumulate).
template <typename T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
          bool accumulate);
// C = A^T * B with A stored [k, m].
template <typename T>
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
             bool accumulate);
// C = A * B^T with B stored [n, k].
template <typename T>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
             bool accumulate);

// Elementwise. Binary ops require identical shapes.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> neg(const Var<T>& x);
template <typename T> Var<T> scale(const Var<T>& x, T s);
template <typename T> Var<T> add_scalar(const Var<T>& x, T s);
template <typename T> Var<T> exp(const Var<T>& x);
template <typename T> Var<T> log(const Var<T>& x);
template <typename T> Var<T> tanh(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> silu(const Var<T>& x);
template <typename T> Var<T> softplus(const Var<T>& x);
// Throws DomainError on an exact zero.
template <typename T> Var<T> recip(const Var<T>& x);
template <typename T> Var<T> clamp(const Var<T>& x, T lo, T hi);

// [.., m, k] x [.., k, n] with equal batch dims.
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// [..., k] x [k, n] with a shared weight matrix.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w);
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias);

// The only broadcasting op: x's shape must be a suffix of `shape`.
template <typename T> Var<T> broadcast_to(const Var<T>& x, const Shape& shape);
// [..., h] -> [..., h*r], each element repeated r times.
template <typename T> Var<T> repeat_lastdim(const Var<T>& x, std::int64_t r);

template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x);
template <typename T> Var<T> reshape(const Var<T>& x, const Shape& shape);
template <typename T> Var<T> slice(const Var<T>& x, int axis, std::int64_t begin, std::int64_t end);
template <typename T> Var<T> concat(const std::vector<Var<T>>& xs, int axis);
// Flat window of a packed multi-output tensor, reshaped.
template <typename T> Var<T> unpack(const Var<T>& packed, std::int64_t offset, const Shape& shape);

// Time-axis ops over [batch, time, ...].
// Reverses only the valid region of each sequence; padding stays in place.
template <typename T> Var<T> reverse_time(const Var<T>& x, const Lengths& lengths);
// out[:, 0] = tail, out[:, s] = x[:, s-1]. tail is [batch, ...].
template <typename T> Var<T> time_shift(const Var<T>& x, const Var<T>& tail);
// Zeroes frames at or beyond each sequence's length.
template <typename T> Var<T> mask_time(const Var<T>& x, const Lengths& lengths);
// out[i] = x[i, starts[i] : starts[i] + count].
template <typename T>
Var<T> take_frames(const Var<T>& x, const Lengths& starts, std::int64_t count);

// mask (optional) has x's element count; nonzero marks a kept entry.
template <typename T>
Var<T> softmax_lastdim(const Var<T>& x, std::span<const std::uint8_t> mask = {});
template <typename T> Var<T> log_softmax_lastdim(const Var<T>& x);

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5));
template <typename T> Var<T> rms_norm(const Var<T>& x, const Var<T>& gain, T eps = T(1e-5));
// Normalises each of `groups` contiguous channel blocks of the last dim.
template <typename T>
Var<T> group_norm(const Var<T>& x, std::int64_t groups, const Var<T>& gain, const Var<T>& bias,
                  T eps = T(1e-5));
// Splits the last dim in halves (a, b) and returns a * sigmoid(b).
template <typename T> Var<T> glu_lastdim(const Var<T>& x);

// x [batch, time, channels], w [channels, width], bias [channels] (optional).
// Output frames: (time + pad_left + pad_right - width) / stride + 1.
template <typename T>
Var<T> depthwise_conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::int64_t stride,
                        std::int64_t pad_left, std::int64_t pad_right);

}  // namespace rala
