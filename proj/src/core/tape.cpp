#include "core/tape.hpp"

#include <cmath>

namespace atp {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

Tape::Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(const Mat* external) {
  Node n;
  n.op = Op::Leaf;
  n.ext = external;
  return push(std::move(n));
}

Var Tape::constant(Mat value) {
  Node n;
  n.op = Op::Const;
  n.val = std::move(value);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  Node n;
  n.op = Op::MatMul;
  n.a = a.i;
  n.b = b.i;
  n.val.noalias() = value(a) * value(b);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  Node n;
  n.op = Op::Add;
  n.a = a.i;
  n.b = b.i;
  n.val = value(a) + value(b);
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  Node n;
  n.op = Op::Hadamard;
  n.a = a.i;
  n.b = b.i;
  n.val = value(a).cwiseProduct(value(b));
  return push(std::move(n));
}

Var Tape::concat_rows(Var a, Var b) {
  Node n;
  n.op = Op::ConcatRows;
  n.a = a.i;
  n.b = b.i;
  const Mat& va = value(a);
  const Mat& vb = value(b);
  n.val.resize(va.rows() + vb.rows(), va.cols());
  n.val.topRows(va.rows()) = va;
  n.val.bottomRows(vb.rows()) = vb;
  n.i0 = static_cast<int>(va.rows());
  return push(std::move(n));
}

Var Tape::slice_rows(Var a, int start, int count) {
  Node n;
  n.op = Op::SliceRows;
  n.a = a.i;
  n.i0 = start;
  n.i1 = count;
  n.val = value(a).middleRows(start, count);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a.i;
  n.val = value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.a = a.i;
  n.val = value(a).array().tanh().matrix();
  return push(std::move(n));
}

Var Tape::elu(Var a) {
  Node n;
  n.op = Op::Elu;
  n.a = a.i;
  n.val = value(a).unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  return push(std::move(n));
}

Var Tape::flatten_rows(Var a) {
  Node n;
  n.op = Op::FlattenRows;
  n.a = a.i;
  const Mat& va = value(a);
  n.val.resize(va.size(), 1);
  for (Eigen::Index r = 0; r < va.rows(); ++r)
    for (Eigen::Index c = 0; c < va.cols(); ++c) n.val(r * va.cols() + c, 0) = va(r, c);
  return push(std::move(n));
}

Var Tape::conv2d(Var input, int h, int w, Var filters, Var bias, int kh, int kw, int stride) {
  const Mat& in = value(input);
  const Mat& f = value(filters);
  const Mat& bb = value(bias);
  const int channels = static_cast<int>(in.cols());
  if (in.rows() != static_cast<Eigen::Index>(h) * w) throw data_error("conv2d: input shape mismatch");
  if (f.rows() != static_cast<Eigen::Index>(kh) * kw * channels)
    throw data_error("conv2d: filter shape mismatch");
  const int oh = (h - kh) / stride + 1;
  const int ow = (w - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw data_error("conv2d: kernel larger than input");

  Mat cols(static_cast<Eigen::Index>(oh) * ow, static_cast<Eigen::Index>(kh) * kw * channels);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      Eigen::Index row = static_cast<Eigen::Index>(oy) * ow + ox;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          Eigen::Index src = static_cast<Eigen::Index>(oy * stride + ky) * w + (ox * stride + kx);
          Eigen::Index dst = (static_cast<Eigen::Index>(ky) * kw + kx) * channels;
          cols.block(row, dst, 1, channels) = in.row(src);
        }
      }
    }
  }

  Node n;
  n.op = Op::Conv2d;
  n.a = input.i;
  n.b = filters.i;
  n.c = bias.i;
  n.i0 = h;
  n.i1 = w;
  n.i2 = kh;
  n.i3 = kw;
  n.i4 = stride;
  n.val.noalias() = cols * f;
  n.val.rowwise() += bb.col(0).transpose();
  n.aux = std::move(cols);
  return push(std::move(n));
}

namespace {

// Mixture pieces recomputed identically in forward and backward.
struct MixtureEval {
  int k;
  Eigen::VectorXd logits, logphi, comp_ll;
  std::vector<Eigen::Matrix3d> l1;
  std::vector<Eigen::Matrix2d> l2;
  std::vector<Eigen::Vector3d> y1, u1;
  std::vector<Eigen::Vector2d> y2, u2;
  double lse = 0.0;

  MixtureEval(const Mat& head, const Eigen::Matrix<double, 5, 1>& x, int kk) : k(kk) {
    logits.resize(k);
    logphi.resize(k);
    comp_ll.resize(k);
    l1.resize(static_cast<std::size_t>(k));
    l2.resize(static_cast<std::size_t>(k));
    y1.resize(static_cast<std::size_t>(k));
    u1.resize(static_cast<std::size_t>(k));
    y2.resize(static_cast<std::size_t>(k));
    u2.resize(static_cast<std::size_t>(k));

    for (int i = 0; i < k; ++i) logits[i] = head(i, 0);
    double zmax = logits.maxCoeff();
    double zsum = (logits.array() - zmax).exp().sum();
    double zlse = zmax + std::log(zsum);

    for (int i = 0; i < k; ++i) {
      auto si = static_cast<std::size_t>(i);
      logphi[i] = logits[i] - zlse;
      Eigen::Matrix<double, 5, 1> mu = head.block(k + 5 * i, 0, 5, 1);
      const int lb = k + 5 * k + 9 * i;
      double a0 = head(lb + 0, 0), a1 = head(lb + 1, 0), a2 = head(lb + 2, 0);
      double a3 = head(lb + 3, 0), a4 = head(lb + 4, 0), a5 = head(lb + 5, 0);
      double b0 = head(lb + 6, 0), b1 = head(lb + 7, 0), b2 = head(lb + 8, 0);
      Eigen::Matrix3d L1;
      L1 << std::exp(a0), 0, 0, a1, std::exp(a2), 0, a3, a4, std::exp(a5);
      Eigen::Matrix2d L2;
      L2 << std::exp(b0), 0, b1, std::exp(b2);
      l1[si] = L1;
      l2[si] = L2;

      Eigen::Matrix<double, 5, 1> d = x - mu;
      y1[si] = L1.triangularView<Eigen::Lower>().solve(d.head<3>());
      y2[si] = L2.triangularView<Eigen::Lower>().solve(d.tail<2>());
      u1[si] = L1.transpose().triangularView<Eigen::Upper>().solve(y1[si]);
      u2[si] = L2.transpose().triangularView<Eigen::Upper>().solve(y2[si]);
      double quad = y1[si].squaredNorm() + y2[si].squaredNorm();
      double logdet = 2.0 * (a0 + a2 + a5 + b0 + b2);
      comp_ll[i] = logphi[i] - 0.5 * (5.0 * kLog2Pi + logdet + quad);
    }
    double m = comp_ll.maxCoeff();
    lse = m + std::log((comp_ll.array() - m).exp().sum());
  }
};

}  // namespace

Var Tape::mixture_nll(Var head, const Eigen::Matrix<double, 5, 1>& target, int k) {
  const Mat& h = value(head);
  if (h.rows() != k * 15 || h.cols() != 1) throw data_error("mixture_nll: bad head width");
  MixtureEval ev(h, target, k);
  if (!std::isfinite(ev.lse)) throw data_error("mixture_nll: non-finite likelihood");
  Node n;
  n.op = Op::MixtureNll;
  n.a = head.i;
  n.i0 = k;
  n.target = target;
  n.val = Mat::Constant(1, 1, -ev.lse);
  return push(std::move(n));
}

Var Tape::sum(const std::vector<Var>& terms) {
  Node n;
  n.op = Op::Sum;
  double acc = 0.0;
  for (Var t : terms) {
    acc += value(t)(0, 0);
    n.many.push_back(t.i);
  }
  n.val = Mat::Constant(1, 1, acc);
  return push(std::move(n));
}

void Tape::backward(Var root) {
  for (auto& n : nodes_) n.grad.setZero(n.value().rows(), n.value().cols());
  auto r = static_cast<std::size_t>(root.i);
  nodes_[r].grad.setOnes();
  for (std::size_t i = r + 1; i-- > 0;) backprop(i);
}

void Tape::backprop(std::size_t i) {
  Node& n = nodes_[i];
  if (n.grad.size() == 0 || n.grad.isZero(0.0)) {
    if (n.op != Op::Leaf && n.op != Op::Const) return;
  }
  switch (n.op) {
    case Op::Leaf:
    case Op::Const:
      break;
    case Op::MatMul: {
      Node& a = nodes_[static_cast<std::size_t>(n.a)];
      Node& b = nodes_[static_cast<std::size_t>(n.b)];
      a.grad.noalias() += n.grad * b.value().transpose();
      b.grad.noalias() += a.value().transpose() * n.grad;
      break;
    }
    case Op::Add:
      nodes_[static_cast<std::size_t>(n.a)].grad += n.grad;
      nodes_[static_cast<std::size_t>(n.b)].grad += n.grad;
      break;
    case Op::Hadamard: {
      Node& a = nodes_[static_cast<std::size_t>(n.a)];
      Node& b = nodes_[static_cast<std::size_t>(n.b)];
      a.grad += n.grad.cwiseProduct(b.value());
      b.grad += n.grad.cwiseProduct(a.value());
      break;
    }
    case Op::ConcatRows: {
      Node& a = nodes_[static_cast<std::size_t>(n.a)];
      Node& b = nodes_[static_cast<std::size_t>(n.b)];
      a.grad += n.grad.topRows(n.i0);
      b.grad += n.grad.bottomRows(n.grad.rows() - n.i0);
      break;
    }
    case Op::SliceRows:
      nodes_[static_cast<std::size_t>(n.a)].grad.middleRows(n.i0, n.i1) += n.grad;
      break;
    case Op::Sigmoid: {
      Node& a = nodes_[static_cast<std::size_t>(n.a)];
      a.grad.array() += n.grad.array() * n.val.array() * (1.0 - n.val.array());
      break;
    }
    case Op::Tanh: {
      Node& a = nodes_[static_cast<std::size_t>(n.a)];
      a.grad.array() += n.grad.array() * (1.0 - n.val.array().square());
      break;
    }
    case Op::Elu: {
      Node& a = nodes_[static_cast<std::size_t>(n.a)];
      a.grad.array() +=
          n.grad.array() *
          a.value().unaryExpr([](double x) { return x > 0.0 ? 1.0 : std::exp(x); }).array();
      break;
    }
    case Op::FlattenRows: {
      Node& a = nodes_[static_cast<std::size_t>(n.a)];
      const Eigen::Index cols = a.value().cols();
      for (Eigen::Index r = 0; r < a.grad.rows(); ++r)
        for (Eigen::Index c = 0; c < cols; ++c) a.grad(r, c) += n.grad(r * cols + c, 0);
      break;
    }
    case Op::Conv2d: {
      Node& input = nodes_[static_cast<std::size_t>(n.a)];
      Node& filters = nodes_[static_cast<std::size_t>(n.b)];
      Node& bias = nodes_[static_cast<std::size_t>(n.c)];
      const int w = n.i1, kh = n.i2, kw = n.i3, stride = n.i4;
      const int channels = static_cast<int>(input.value().cols());
      const int ow = (w - kw) / stride + 1;
      const int oh = static_cast<int>(n.val.rows()) / ow;
      filters.grad.noalias() += n.aux.transpose() * n.grad;
      bias.grad += n.grad.colwise().sum().transpose();
      Mat gcols = n.grad * filters.value().transpose();
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          Eigen::Index row = static_cast<Eigen::Index>(oy) * ow + ox;
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              Eigen::Index src = static_cast<Eigen::Index>(oy * stride + ky) * w + (ox * stride + kx);
              Eigen::Index dst = (static_cast<Eigen::Index>(ky) * kw + kx) * channels;
              input.grad.block(src, 0, 1, channels) += gcols.block(row, dst, 1, channels);
            }
          }
        }
      }
      break;
    }
    case Op::MixtureNll: {
      Node& head = nodes_[static_cast<std::size_t>(n.a)];
      const int k = n.i0;
      MixtureEval ev(head.value(), n.target, k);
      const double g = n.grad(0, 0);
      Eigen::VectorXd dll(k);
      double dlogphi_sum = 0.0;
      for (int i = 0; i < k; ++i) {
        dll[i] = -g * std::exp(ev.comp_ll[i] - ev.lse);
        dlogphi_sum += dll[i];
      }
      Eigen::VectorXd p = (ev.logits.array() - ev.logits.maxCoeff()).exp();
      p /= p.sum();
      for (int i = 0; i < k; ++i) {
        auto si = static_cast<std::size_t>(i);
        head.grad(i, 0) += dll[i] - p[i] * dlogphi_sum;
        // d logp / d mu = Sigma^{-1} (x - mu)
        for (int j = 0; j < 3; ++j) head.grad(k + 5 * i + j, 0) += dll[i] * ev.u1[si][j];
        for (int j = 0; j < 2; ++j) head.grad(k + 5 * i + 3 + j, 0) += dll[i] * ev.u2[si][j];
        // d logp / d L = u y^T - diag(1/L_jj), lower triangle; diagonals chain
        // through the exp transform.
        const int lb = k + 5 * k + 9 * i;
        Eigen::Matrix3d G1 = ev.u1[si] * ev.y1[si].transpose();
        Eigen::Matrix2d G2 = ev.u2[si] * ev.y2[si].transpose();
        head.grad(lb + 0, 0) += dll[i] * (G1(0, 0) * ev.l1[si](0, 0) - 1.0);
        head.grad(lb + 1, 0) += dll[i] * G1(1, 0);
        head.grad(lb + 2, 0) += dll[i] * (G1(1, 1) * ev.l1[si](1, 1) - 1.0);
        head.grad(lb + 3, 0) += dll[i] * G1(2, 0);
        head.grad(lb + 4, 0) += dll[i] * G1(2, 1);
        head.grad(lb + 5, 0) += dll[i] * (G1(2, 2) * ev.l1[si](2, 2) - 1.0);
        head.grad(lb + 6, 0) += dll[i] * (G2(0, 0) * ev.l2[si](0, 0) - 1.0);
        head.grad(lb + 7, 0) += dll[i] * G2(1, 0);
        head.grad(lb + 8, 0) += dll[i] * (G2(1, 1) * ev.l2[si](1, 1) - 1.0);
      }
      break;
    }
    case Op::Sum:
      for (int t : n.many) nodes_[static_cast<std::size_t>(t)].grad.array() += n.grad(0, 0);
      break;
  }
}

void Tape::clear() { nodes_.clear(); }

}  // namespace atp
