#ifndef ATP_TAPE_HPP
#define ATP_TAPE_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "core/geo.hpp"

namespace atp {

using Mat = Eigen::MatrixXd;

// Reverse-mode tape over dense matrices. Column vectors are (n, 1) matrices.
// Leaves reference external parameter storage; their gradients accumulate on
// the tape and are read back after backward().
class Tape {
 public:
  struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
  };

  Var leaf(const Mat* external);
  Var constant(Mat value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var concat_rows(Var a, Var b);
  Var slice_rows(Var a, int start, int count);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var elu(Var a);
  Var flatten_rows(Var a);  // (m, n) -> (m*n, 1) in row-major order

  // input (H*W, C) row-major spatial flattening; filters (kh*kw*C, F);
  // bias (F, 1). Valid convolution, no padding. Output (oh*ow, F).
  Var conv2d(Var input, int h, int w, Var filters, Var bias, int kh, int kw, int stride);

  // Negative log likelihood of one 5-d target under the K-component mixture
  // decoded from a 45-wide head vector (K=3): [logits(K); mu(5K); chol(9K)].
  // Cholesky diagonals are exp-transformed raw entries.
  Var mixture_nll(Var head, const Eigen::Matrix<double, 5, 1>& target, int k);

  Var sum(const std::vector<Var>& terms);

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.i)].value(); }
  const Mat& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.i)].grad; }

  void backward(Var root);
  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Leaf,
    Const,
    MatMul,
    Add,
    Hadamard,
    ConcatRows,
    SliceRows,
    Sigmoid,
    Tanh,
    Elu,
    FlattenRows,
    Conv2d,
    MixtureNll,
    Sum,
  };

  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    int i0 = 0, i1 = 0, i2 = 0, i3 = 0, i4 = 0;
    Mat val;
    Mat grad;
    Mat aux;  // conv: im2col cache
    Eigen::Matrix<double, 5, 1> target;
    const Mat* ext = nullptr;
    std::vector<int> many;  // Sum inputs

    const Mat& value() const { return ext ? *ext : val; }
  };

  Var push(Node n);
  void backprop(std::size_t i);

  std::vector<Node> nodes_;
};

using Var = Tape::Var;

}  // namespace atp

#endif
