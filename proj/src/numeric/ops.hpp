#pragma once

#include <span>

#include "numeric/tensor.hpp"

namespace masklab::numeric {

// Elementwise binary ops require identical shapes; the scalar overloads are
// the only broadcast supported.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, float s);
Tensor sub(const Tensor& a, float s);
Tensor sub(float s, const Tensor& a);
Tensor mul(const Tensor& a, float s);

// Unary.
Tensor sigmoid(const Tensor& x);           // stable; outputs strictly inside (0,1)
Tensor relu(const Tensor& x);
Tensor log_clamped(const Tensor& x);       // log(max(x, 1e-8)); NaN input -> numeric error
Tensor abs(const Tensor& x);
Tensor softmax(const Tensor& x);           // over the last axis; rows sum to 1

// conv2d: x [N,C,H,W], w [F,C,kh,kw], b [F]; cross-correlation.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);

// matmul: [M,K] x [K,N] -> [M,N].
Tensor matmul(const Tensor& a, const Tensor& b);

enum class Reduce { Sum, Mean, Max };

// Full reductions produce a scalar (shape {1}); axis reductions drop the axis.
// Max routes its gradient to the first (row-major) argmax of each group.
Tensor reduce_all(const Tensor& x, Reduce kind);
Tensor reduce_axis(const Tensor& x, Reduce kind, int axis);
inline Tensor sum(const Tensor& x) { return reduce_all(x, Reduce::Sum); }
inline Tensor mean(const Tensor& x) { return reduce_all(x, Reduce::Mean); }
inline Tensor reduce_max(const Tensor& x) { return reduce_all(x, Reduce::Max); }

// Shape ops.
Tensor reshape(const Tensor& x, Shape shape);
Tensor narrow(const Tensor& x, int axis, int start, int len);   // contiguous slice (copy)
Tensor index_row(const Tensor& x, int i);                       // select along axis 0, drops it
Tensor concat0(std::span<const Tensor> parts);                  // along existing axis 0
Tensor stack0(std::span<const Tensor> parts);                   // new leading axis

}  // namespace masklab::numeric
