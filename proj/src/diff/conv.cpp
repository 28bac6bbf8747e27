#include <stdexcept>

#include "hypervq/diff/ops.hpp"
#include "op_helpers.hpp"

namespace hypervq::diff {

namespace {

using Mat = Eigen::MatrixXd;  // col-major
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

struct ConvDims {
  Eigen::Index N, C, H, W;    // input
  Eigen::Index OC, kh, kw;    // kernel
  Eigen::Index Ho, Wo;        // output plane
  int stride, padding;
};

// Patches of img (C x H x W) as columns: row (c*kh+di)*kw+dj, one column per
// output position on a (Ho x Wo) grid with the given stride/padding.
void im2col(const double* img, const ConvDims& d, Mat& cols) {
  cols.resize(d.C * d.kh * d.kw, d.Ho * d.Wo);
  for (Eigen::Index oy = 0; oy < d.Ho; ++oy) {
    for (Eigen::Index ox = 0; ox < d.Wo; ++ox) {
      const Eigen::Index col = oy * d.Wo + ox;
      Eigen::Index r = 0;
      for (Eigen::Index c = 0; c < d.C; ++c) {
        for (Eigen::Index di = 0; di < d.kh; ++di) {
          const Eigen::Index iy = oy * d.stride - d.padding + di;
          for (Eigen::Index dj = 0; dj < d.kw; ++dj, ++r) {
            const Eigen::Index ix = ox * d.stride - d.padding + dj;
            cols(r, col) = (iy >= 0 && iy < d.H && ix >= 0 && ix < d.W)
                               ? img[(c * d.H + iy) * d.W + ix]
                               : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the (C x H x W) image.
void col2im(const Mat& cols, const ConvDims& d, double* img) {
  for (Eigen::Index oy = 0; oy < d.Ho; ++oy) {
    for (Eigen::Index ox = 0; ox < d.Wo; ++ox) {
      const Eigen::Index col = oy * d.Wo + ox;
      Eigen::Index r = 0;
      for (Eigen::Index c = 0; c < d.C; ++c) {
        for (Eigen::Index di = 0; di < d.kh; ++di) {
          const Eigen::Index iy = oy * d.stride - d.padding + di;
          for (Eigen::Index dj = 0; dj < d.kw; ++dj, ++r) {
            const Eigen::Index ix = ox * d.stride - d.padding + dj;
            if (iy >= 0 && iy < d.H && ix >= 0 && ix < d.W) {
              img[(c * d.H + iy) * d.W + ix] += cols(r, col);
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding) {
  if (x.ndim() != 4 || w.ndim() != 4) throw std::invalid_argument("conv2d: expects 4-D input and kernel");
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv2d: bad stride/padding");
  ConvDims d;
  d.N = x.shape()[0];
  d.C = x.shape()[1];
  d.H = x.shape()[2];
  d.W = x.shape()[3];
  d.OC = w.shape()[0];
  d.kh = w.shape()[2];
  d.kw = w.shape()[3];
  d.stride = stride;
  d.padding = padding;
  if (w.shape()[1] != d.C) throw std::invalid_argument("conv2d: channel mismatch");
  d.Ho = (d.H + 2 * padding - d.kh) / stride + 1;
  d.Wo = (d.W + 2 * padding - d.kw) / stride + 1;
  if (d.Ho < 1 || d.Wo < 1) throw std::invalid_argument("conv2d: kernel larger than padded input");

  const Eigen::Index ckk = d.C * d.kh * d.kw;
  const Eigen::Index P = d.Ho * d.Wo;
  Array value(d.N * d.OC * P);
  CMapRM Wmat(w.values().data(), d.OC, ckk);
  Mat cols;
  for (Eigen::Index n = 0; n < d.N; ++n) {
    im2col(x.values().data() + n * d.C * d.H * d.W, d, cols);
    MapRM(value.data() + n * d.OC * P, d.OC, P).noalias() = Wmat * cols;
  }

  return detail::make_node({d.N, d.OC, d.Ho, d.Wo}, std::move(value), {x.node(), w.node()}, [&] {
    return [xn = x.node(), wn = w.node(), d, ckk, P](Node& n) {
      Mat cols;
      Array gw;
      if (wn->requires_grad) gw = Array::Zero(wn->value.size());
      Array gx;
      if (xn->requires_grad) gx = Array::Zero(xn->value.size());
      CMapRM Wmat(wn->value.data(), d.OC, ckk);
      for (Eigen::Index s = 0; s < d.N; ++s) {
        CMapRM G(n.grad.data() + s * d.OC * P, d.OC, P);
        if (wn->requires_grad) {
          im2col(xn->value.data() + s * d.C * d.H * d.W, d, cols);
          MapRM(gw.data(), d.OC, ckk).noalias() += G * cols.transpose();
        }
        if (xn->requires_grad) {
          Mat dcols = Wmat.transpose() * G;
          col2im(dcols, d, gx.data() + s * d.C * d.H * d.W);
        }
      }
      if (wn->requires_grad) wn->accumulate(gw);
      if (xn->requires_grad) xn->accumulate(gx);
    };
  });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, int stride, int padding) {
  if (x.ndim() != 4 || w.ndim() != 4) {
    throw std::invalid_argument("conv_transpose2d: expects 4-D input and kernel");
  }
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv_transpose2d: bad stride/padding");
  const Eigen::Index N = x.shape()[0], IC = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  if (w.shape()[0] != IC) throw std::invalid_argument("conv_transpose2d: channel mismatch");
  const Eigen::Index OC = w.shape()[1], kh = w.shape()[2], kw = w.shape()[3];
  const Eigen::Index Ho = (H - 1) * stride - 2 * padding + kh;
  const Eigen::Index Wo = (W - 1) * stride - 2 * padding + kw;
  if (Ho < 1 || Wo < 1) throw std::invalid_argument("conv_transpose2d: empty output");

  // The output plays the conv2d "input" role: columns indexed by the x grid.
  ConvDims d;
  d.N = N;
  d.C = OC;
  d.H = Ho;
  d.W = Wo;
  d.OC = IC;
  d.kh = kh;
  d.kw = kw;
  d.stride = stride;
  d.padding = padding;
  d.Ho = H;
  d.Wo = W;

  const Eigen::Index ockk = OC * kh * kw;
  const Eigen::Index P = H * W;
  Array value = Array::Zero(N * OC * Ho * Wo);
  CMapRM Wmat(w.values().data(), IC, ockk);
  for (Eigen::Index s = 0; s < N; ++s) {
    CMapRM Xn(x.values().data() + s * IC * P, IC, P);
    Mat cols = Wmat.transpose() * Xn;
    col2im(cols, d, value.data() + s * OC * Ho * Wo);
  }

  return detail::make_node({N, OC, Ho, Wo}, std::move(value), {x.node(), w.node()}, [&] {
    return [xn = x.node(), wn = w.node(), d, ockk, P, N, IC, OC, Ho, Wo](Node& n) {
      Mat dcols;
      Array gw;
      if (wn->requires_grad) gw = Array::Zero(wn->value.size());
      Array gx;
      if (xn->requires_grad) gx = Array(xn->value.size());
      CMapRM Wmat(wn->value.data(), IC, ockk);
      for (Eigen::Index s = 0; s < N; ++s) {
        im2col(n.grad.data() + s * OC * Ho * Wo, d, dcols);  // [OC*kh*kw, H*W]
        if (xn->requires_grad) {
          MapRM(gx.data() + s * IC * P, IC, P).noalias() = Wmat * dcols;
        }
        if (wn->requires_grad) {
          CMapRM Xn(xn->value.data() + s * IC * P, IC, P);
          MapRM(gw.data(), IC, ockk).noalias() += Xn * dcols.transpose();
        }
      }
      if (wn->requires_grad) wn->accumulate(gw);
      if (xn->requires_grad) xn->accumulate(gx);
    };
  });
}

}  // namespace hypervq::diff
