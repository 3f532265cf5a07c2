#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "icvae/tensor.hpp"

namespace icvae {

/// Reverse-mode differentiation tape.
///
/// Every op below computes its result eagerly. When the tape is recording and
/// at least one input requires grad, the op is appended to the tape and its
/// output is marked as requiring grad. backward() walks the recorded ops in
/// exact reverse order, accumulating (+=) into the grad buffers of every
/// tensor that requires grad, then clears the tape. A cleared tape can be
/// reused for the next forward pass.
///
/// Broadcasting is limited to a 1-element operand against any tensor, plus
/// the dedicated add_bias op for adding a row vector to every row of a matrix.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() noexcept { nodes_.clear(); }

  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scalar_mul(const Tensor& a, double s);
  /// x (n x m) plus bias (m values, rank 1 or 1 x m) added to every row.
  Tensor add_bias(const Tensor& x, const Tensor& bias);

  Tensor relu(const Tensor& a);
  Tensor sigmoid(const Tensor& a);
  Tensor log(const Tensor& a);
  Tensor exp(const Tensor& a);
  Tensor square(const Tensor& a);

  /// Row-wise softmax over the last axis of a rank-2 tensor.
  Tensor softmax_rows(const Tensor& a);
  /// Row-wise log(softmax(a)), computed without forming softmax first.
  Tensor log_softmax_rows(const Tensor& a);

  /// Sum of all entries, shape (1).
  Tensor sum(const Tensor& a);
  /// Mean of all entries, shape (1).
  Tensor mean(const Tensor& a);
  /// Per-row sums of a rank-2 tensor, shape (n x 1).
  Tensor sum_rows(const Tensor& a);

  Tensor concat_cols(const Tensor& a, const Tensor& b);
  /// Columns [begin, end) of a rank-2 tensor.
  Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);

  /// Per-row binary cross-entropy between sigmoid(logits) and target, summed
  /// over columns: sum_j softplus(l_j) - t_j * l_j. Shape (n x 1). The target
  /// is treated as a constant.
  Tensor bce_with_logits_rows(const Tensor& logits, const Tensor& target);

  /// Copy of the values that is cut off from the tape.
  Tensor detach(const Tensor& a);

  /// Backpropagates from a 1-element root produced on this tape.
  void backward(const Tensor& root);

 private:
  struct Node {
    std::string_view kind;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void(const Node&)> backward;
  };

  Tensor record(std::string_view kind, std::vector<Tensor> inputs, Shape shape, std::vector<double> values,
                std::function<void(const Node&)> backward);

  bool recording_;
  std::vector<Node> nodes_;
};

}  // namespace icvae
