#include "flowseg/autodiff.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace flowseg::ad {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a.shape) +
                              " and " + shape_str(b.shape));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const char* what) {
  throw std::invalid_argument(std::string(op) + ": " + what + ", got shape " + shape_str(a.shape));
}

void require_same_graph(const char* op, Node* a, Node* b) {
  if (a->graph != b->graph) {
    throw std::invalid_argument(std::string(op) + ": operands belong to different graphs");
  }
}

// Unpacks a [Ci,H,W] image slice into a (Ci*9) x (H*W) column matrix for the
// 3x3 / stride 1 / pad 1 convolution. Column q = y*W + x holds the receptive
// field of output pixel (y,x), zeros outside the border.
void im2col_3x3(const double* x, Eigen::Index ci, Eigen::Index h, Eigen::Index w,
                Eigen::MatrixXd& cols) {
  cols.setZero(ci * 9, h * w);
  for (Eigen::Index c = 0; c < ci; ++c) {
    const double* plane = x + c * h * w;
    for (Eigen::Index ky = 0; ky < 3; ++ky) {
      for (Eigen::Index kx = 0; kx < 3; ++kx) {
        const Eigen::Index row = (c * 3 + ky) * 3 + kx;
        for (Eigen::Index y = 0; y < h; ++y) {
          const Eigen::Index sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const Eigen::Index x0 = std::max<Eigen::Index>(0, 1 - kx);
          const Eigen::Index x1 = std::min(w, w + 1 - kx);
          for (Eigen::Index xo = x0; xo < x1; ++xo) {
            cols(row, y * w + xo) = plane[sy * w + xo + kx - 1];
          }
        }
      }
    }
  }
}

// Transpose of im2col_3x3: accumulates a (Ci*9) x (H*W) column-gradient back
// into the [Ci,H,W] input gradient.
void col2im_3x3(const Eigen::MatrixXd& cols, Eigen::Index ci, Eigen::Index h, Eigen::Index w,
                double* dx) {
  for (Eigen::Index c = 0; c < ci; ++c) {
    double* plane = dx + c * h * w;
    for (Eigen::Index ky = 0; ky < 3; ++ky) {
      for (Eigen::Index kx = 0; kx < 3; ++kx) {
        const Eigen::Index row = (c * 3 + ky) * 3 + kx;
        for (Eigen::Index y = 0; y < h; ++y) {
          const Eigen::Index sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const Eigen::Index x0 = std::max<Eigen::Index>(0, 1 - kx);
          const Eigen::Index x1 = std::min(w, w + 1 - kx);
          for (Eigen::Index xo = x0; xo < x1; ++xo) {
            plane[sy * w + xo + kx - 1] += cols(row, y * w + xo);
          }
        }
      }
    }
  }
}

}  // namespace

Node* Graph::leaf(Tensor value, bool requires_grad) {
  auto node = std::make_unique<Node>();
  node->graph = this;
  node->index = nodes_.size();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

Node* Graph::make(const char* op, Tensor value, std::vector<Node*> inputs,
                  std::function<void(Node&)> backprop) {
  auto node = std::make_unique<Node>();
  node->graph = this;
  node->index = nodes_.size();
  node->op = op;
  node->value = std::move(value);
  node->inputs = std::move(inputs);
  for (Node* in : node->inputs) node->requires_grad |= in->requires_grad;
  if (node->requires_grad) node->backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

void Graph::backward(Node* loss) {
  if (backward_done_) throw std::logic_error("backward: graph already consumed");
  if (loss == nullptr || loss->graph != this) {
    throw std::invalid_argument("backward: loss node does not belong to this graph");
  }
  if (loss->value.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss->value.shape));
  }
  backward_done_ = true;
  if (!loss->requires_grad) return;  // loss independent of every parameter

  std::vector<char> reachable(nodes_.size(), 0);
  std::vector<Node*> stack{loss};
  reachable[loss->index] = 1;
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    for (Node* in : n->inputs) {
      if (in->requires_grad && !reachable[in->index]) {
        reachable[in->index] = 1;
        stack.push_back(in);
      }
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (reachable[i]) nodes_[i]->grad = Tensor::zeros(nodes_[i]->value.shape);
  }
  loss->grad.data.setConstant(1.0);
  for (std::size_t i = loss->index + 1; i-- > 0;) {
    Node& n = *nodes_[i];
    if (reachable[i] && n.backprop) n.backprop(n);
  }
}

Node* add(Node* a, Node* b) {
  require_same_graph("add", a, b);
  if (!a->value.same_shape(b->value)) shape_error("add", a->value, b->value);
  Tensor out(a->value.shape, a->value.data + b->value.data);
  return a->graph->make("add", std::move(out), {a, b}, [](Node& n) {
    if (n.inputs[0]->requires_grad) n.inputs[0]->grad.data += n.grad.data;
    if (n.inputs[1]->requires_grad) n.inputs[1]->grad.data += n.grad.data;
  });
}

Node* mul(Node* a, Node* b) {
  require_same_graph("multiply", a, b);
  if (!a->value.same_shape(b->value)) shape_error("multiply", a->value, b->value);
  Tensor out(a->value.shape, a->value.data * b->value.data);
  return a->graph->make("multiply", std::move(out), {a, b}, [](Node& n) {
    if (n.inputs[0]->requires_grad) n.inputs[0]->grad.data += n.grad.data * n.inputs[1]->value.data;
    if (n.inputs[1]->requires_grad) n.inputs[1]->grad.data += n.grad.data * n.inputs[0]->value.data;
  });
}

Node* scalar_mul(Node* a, double c) {
  Tensor out(a->value.shape, a->value.data * c);
  return a->graph->make("scalar-multiply", std::move(out), {a}, [c](Node& n) {
    if (n.inputs[0]->requires_grad) n.inputs[0]->grad.data += n.grad.data * c;
  });
}

Node* matmul(Node* a, Node* b) {
  require_same_graph("matmul", a, b);
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    shape_error("matmul", av, bv);
  }
  const Eigen::Index m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out = Tensor::zeros({m, n});
  ConstMatMap am(av.data.data(), m, k), bm(bv.data.data(), k, n);
  MatMap om(out.data.data(), m, n);
  om.noalias() = am * bm;
  return a->graph->make("matmul", std::move(out), {a, b}, [m, k, n](Node& nd) {
    ConstMatMap am(nd.inputs[0]->value.data.data(), m, k);
    ConstMatMap bm(nd.inputs[1]->value.data.data(), k, n);
    ConstMatMap gm(nd.grad.data.data(), m, n);
    if (nd.inputs[0]->requires_grad) {
      MatMap da(nd.inputs[0]->grad.data.data(), m, k);
      da.noalias() += gm * bm.transpose();
    }
    if (nd.inputs[1]->requires_grad) {
      MatMap db(nd.inputs[1]->grad.data.data(), k, n);
      db.noalias() += am.transpose() * gm;
    }
  });
}

Node* conv2d(Node* x, Node* w) {
  require_same_graph("conv2d", x, w);
  const Tensor& xv = x->value;
  const Tensor& wv = w->value;
  if (xv.rank() != 4 || wv.rank() != 4 || wv.dim(2) != 3 || wv.dim(3) != 3 ||
      xv.dim(1) != wv.dim(1)) {
    shape_error("conv2d", xv, wv);
  }
  const Eigen::Index batch = xv.dim(0), ci = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
  const Eigen::Index co = wv.dim(0);
  Tensor out = Tensor::zeros({batch, co, h, wd});
  ConstMatMap wm(wv.data.data(), co, ci * 9);
  Eigen::MatrixXd cols;
  for (Eigen::Index b = 0; b < batch; ++b) {
    im2col_3x3(xv.data.data() + b * ci * h * wd, ci, h, wd, cols);
    MatMap om(out.data.data() + b * co * h * wd, co, h * wd);
    om.noalias() = wm * cols;
  }
  return x->graph->make("conv2d", std::move(out), {x, w}, [batch, ci, h, wd, co](Node& n) {
    const Tensor& xin = n.inputs[0]->value;
    const Tensor& win = n.inputs[1]->value;
    ConstMatMap wm(win.data.data(), co, ci * 9);
    Eigen::MatrixXd cols, dcols;
    for (Eigen::Index b = 0; b < batch; ++b) {
      ConstMatMap gm(n.grad.data.data() + b * co * h * wd, co, h * wd);
      // im2col is recomputed here instead of cached: the column matrix is the
      // largest intermediate of the whole pass and dominates memory if kept.
      im2col_3x3(xin.data.data() + b * ci * h * wd, ci, h, wd, cols);
      if (n.inputs[1]->requires_grad) {
        MatMap dwm(n.inputs[1]->grad.data.data(), co, ci * 9);
        dwm.noalias() += gm * cols.transpose();
      }
      if (n.inputs[0]->requires_grad) {
        dcols.noalias() = wm.transpose() * gm;
        col2im_3x3(dcols, ci, h, wd, n.inputs[0]->grad.data.data() + b * ci * h * wd);
      }
    }
  });
}

Node* channel_bias_add(Node* x, Node* bias) {
  require_same_graph("channel-bias-add", x, bias);
  const Tensor& xv = x->value;
  const Tensor& bv = bias->value;
  if (xv.rank() != 4 || bv.rank() != 1 || bv.dim(0) != xv.dim(1)) {
    shape_error("channel-bias-add", xv, bv);
  }
  const Eigen::Index batch = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor out(xv.shape, xv.data);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index ch = 0; ch < c; ++ch) {
      out.data.segment((b * c + ch) * hw, hw) += bv.data[ch];
    }
  }
  return x->graph->make("channel-bias-add", std::move(out), {x, bias}, [batch, c, hw](Node& n) {
    if (n.inputs[0]->requires_grad) n.inputs[0]->grad.data += n.grad.data;
    if (n.inputs[1]->requires_grad) {
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index ch = 0; ch < c; ++ch) {
          n.inputs[1]->grad.data[ch] += n.grad.data.segment((b * c + ch) * hw, hw).sum();
        }
      }
    }
  });
}

Node* concat_channels(Node* a, Node* b) {
  require_same_graph("channel-concat", a, b);
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.rank() != 4 || bv.rank() != 4 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) ||
      av.dim(3) != bv.dim(3)) {
    shape_error("channel-concat", av, bv);
  }
  const Eigen::Index batch = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
  const Eigen::Index hw = av.dim(2) * av.dim(3);
  Tensor out = Tensor::zeros({batch, ca + cb, av.dim(2), av.dim(3)});
  for (Eigen::Index i = 0; i < batch; ++i) {
    out.data.segment(i * (ca + cb) * hw, ca * hw) = av.data.segment(i * ca * hw, ca * hw);
    out.data.segment(i * (ca + cb) * hw + ca * hw, cb * hw) = bv.data.segment(i * cb * hw, cb * hw);
  }
  return a->graph->make("channel-concat", std::move(out), {a, b}, [batch, ca, cb, hw](Node& n) {
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (n.inputs[0]->requires_grad) {
        n.inputs[0]->grad.data.segment(i * ca * hw, ca * hw) +=
            n.grad.data.segment(i * (ca + cb) * hw, ca * hw);
      }
      if (n.inputs[1]->requires_grad) {
        n.inputs[1]->grad.data.segment(i * cb * hw, cb * hw) +=
            n.grad.data.segment(i * (ca + cb) * hw + ca * hw, cb * hw);
      }
    }
  });
}

Node* avg_pool2(Node* x) {
  const Tensor& xv = x->value;
  if (xv.rank() != 4 || xv.dim(2) % 2 != 0 || xv.dim(3) % 2 != 0) {
    shape_error("avg-pool2", xv, "needs rank 4 with even H and W");
  }
  const Eigen::Index batch = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  Tensor out = Tensor::zeros({batch, c, h / 2, w / 2});
  for (Eigen::Index bc = 0; bc < batch * c; ++bc) {
    const double* in = xv.data.data() + bc * h * w;
    double* o = out.data.data() + bc * (h / 2) * (w / 2);
    for (Eigen::Index y = 0; y < h / 2; ++y) {
      for (Eigen::Index xx = 0; xx < w / 2; ++xx) {
        o[y * (w / 2) + xx] = 0.25 * (in[(2 * y) * w + 2 * xx] + in[(2 * y) * w + 2 * xx + 1] +
                                      in[(2 * y + 1) * w + 2 * xx] + in[(2 * y + 1) * w + 2 * xx + 1]);
      }
    }
  }
  return x->graph->make("avg-pool2", std::move(out), {x}, [batch, c, h, w](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    for (Eigen::Index bc = 0; bc < batch * c; ++bc) {
      const double* g = n.grad.data.data() + bc * (h / 2) * (w / 2);
      double* dx = n.inputs[0]->grad.data.data() + bc * h * w;
      for (Eigen::Index y = 0; y < h / 2; ++y) {
        for (Eigen::Index xx = 0; xx < w / 2; ++xx) {
          const double v = 0.25 * g[y * (w / 2) + xx];
          dx[(2 * y) * w + 2 * xx] += v;
          dx[(2 * y) * w + 2 * xx + 1] += v;
          dx[(2 * y + 1) * w + 2 * xx] += v;
          dx[(2 * y + 1) * w + 2 * xx + 1] += v;
        }
      }
    }
  });
}

Node* upsample2(Node* x) {
  const Tensor& xv = x->value;
  if (xv.rank() != 4) shape_error("upsample2", xv, "needs rank 4");
  const Eigen::Index batch = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  Tensor out = Tensor::zeros({batch, c, 2 * h, 2 * w});
  for (Eigen::Index bc = 0; bc < batch * c; ++bc) {
    const double* in = xv.data.data() + bc * h * w;
    double* o = out.data.data() + bc * 4 * h * w;
    for (Eigen::Index y = 0; y < 2 * h; ++y) {
      for (Eigen::Index xx = 0; xx < 2 * w; ++xx) {
        o[y * 2 * w + xx] = in[(y / 2) * w + xx / 2];
      }
    }
  }
  return x->graph->make("upsample2", std::move(out), {x}, [batch, c, h, w](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    for (Eigen::Index bc = 0; bc < batch * c; ++bc) {
      const double* g = n.grad.data.data() + bc * 4 * h * w;
      double* dx = n.inputs[0]->grad.data.data() + bc * h * w;
      for (Eigen::Index y = 0; y < 2 * h; ++y) {
        for (Eigen::Index xx = 0; xx < 2 * w; ++xx) {
          dx[(y / 2) * w + xx / 2] += g[y * 2 * w + xx];
        }
      }
    }
  });
}

Node* silu(Node* x) {
  const Eigen::ArrayXd sig = 1.0 / (1.0 + (-x->value.data).exp());
  Tensor out(x->value.shape, x->value.data * sig);
  return x->graph->make("silu", std::move(out), {x}, [](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    const Eigen::ArrayXd& xin = n.inputs[0]->value.data;
    const Eigen::ArrayXd sig = 1.0 / (1.0 + (-xin).exp());
    n.inputs[0]->grad.data += n.grad.data * sig * (1.0 + xin * (1.0 - sig));
  });
}

Node* square(Node* x) {
  Tensor out(x->value.shape, x->value.data.square());
  return x->graph->make("square", std::move(out), {x}, [](Node& n) {
    if (n.inputs[0]->requires_grad) {
      n.inputs[0]->grad.data += 2.0 * n.grad.data * n.inputs[0]->value.data;
    }
  });
}

Node* mean_all(Node* x) {
  Tensor out = Tensor::scalar(x->value.data.mean());
  const double inv_n = 1.0 / static_cast<double>(x->value.numel());
  return x->graph->make("mean-reduce", std::move(out), {x}, [inv_n](Node& n) {
    if (n.inputs[0]->requires_grad) {
      n.inputs[0]->grad.data += n.grad.data[0] * inv_n;
    }
  });
}

Node* reshape(Node* x, Shape shape) {
  Tensor out = x->value.reshaped(std::move(shape));
  return x->graph->make("reshape", std::move(out), {x}, [](Node& n) {
    if (n.inputs[0]->requires_grad) n.inputs[0]->grad.data += n.grad.data;
  });
}

}  // namespace flowseg::ad
