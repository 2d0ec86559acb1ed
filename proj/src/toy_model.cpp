#include "obb/toy_model.hpp"

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstring>

#include "obb/errors.hpp"

namespace obb {
namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using RowMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstRowMap = Eigen::Map<const Eigen::RowVectorXd>;

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Mat relu(Mat z) {
  z = z.cwiseMax(0.0);
  return z;
}

}  // namespace

LocationPrediction ModelOutput::location(int row) const {
  LocationPrediction p;
  const auto r = static_cast<std::size_t>(row);
  p.class_probs.assign(class_probs.begin() + static_cast<std::ptrdiff_t>(r * static_cast<std::size_t>(num_classes)),
                       class_probs.begin() + static_cast<std::ptrdiff_t>((r + 1) * static_cast<std::size_t>(num_classes)));
  p.corners = corners[r];
  p.centerness = centerness[r];
  p.center = centers[r];
  return p;
}

struct ToyModel::Pass {
  std::vector<Mat> trunk;  // trunk[0] is a copy of the input
  std::vector<Mat> cls;    // cls[0] is the trunk output
  Mat probs;
  std::vector<int> reg_rows;
  std::vector<Mat> reg;  // reg[0] is the trunk output at reg_rows
  std::vector<Mat> center;
  Mat ctr;          // n x 1, sigmoid
  Mat corners;      // n x 8, final
  Mat raw_center;   // n x 2
};

ToyModel::ToyModel(const ToyModelConfig& config) : config_(config) {
  if (config.input_width <= 0 || config.hidden <= 0 || config.num_classes <= 0 || config.tower_layers < 0) {
    throw InvalidParams("invalid toy model configuration");
  }
  const int d = config.input_width, f = config.hidden;
  trunk_.push_back(add_dense("trunk.0", d, f));
  trunk_.push_back(add_dense("trunk.1", f, f));
  for (int i = 0; i < config.tower_layers; ++i) cls_tower_.push_back(add_dense("cls_tower." + std::to_string(i), f, f));
  for (int i = 0; i < config.tower_layers; ++i) reg_tower_.push_back(add_dense("reg_tower." + std::to_string(i), f, f));
  cls_head_ = add_dense("cls_head", f, config.num_classes);
  ctr_head_ = add_dense("ctr_head", f, 1);
  if (config.strategy == StrategyKind::Iterative) {
    for (int k = 0; k < 4; ++k) iter_heads_[k] = add_dense("corner_head." + std::to_string(k), f + 2 * k, 2, true);
  } else {
    corner_head_ = add_dense("corner_head", f, 8);
  }
  if (config.strategy == StrategyKind::CenterToCorner) {
    for (int i = 0; i < config.tower_layers; ++i) {
      center_tower_.push_back(add_dense("center_tower." + std::to_string(i), f, f));
    }
    center_head_ = add_dense("center_head", f, 2);
  }
  std::size_t total = 0;
  for (TensorInfo& t : tensors_) {
    t.offset = total;
    total += t.size();
  }
  params_.assign(total, 0.0);
}

ToyModel::Dense ToyModel::add_dense(const std::string& name, int inputs, int outputs, bool transposed) {
  Dense d;
  d.w = static_cast<int>(tensors_.size());
  tensors_.push_back(transposed ? TensorInfo{name + ".weight", outputs, inputs, 0}
                                : TensorInfo{name + ".weight", inputs, outputs, 0});
  d.b = static_cast<int>(tensors_.size());
  tensors_.push_back({name + ".bias", 1, outputs, 0});
  return d;
}

void ToyModel::initialize(CounterRng rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  auto fill_normal = [&](const Dense& d, double stddev) {
    const TensorInfo& t = tensors_[static_cast<std::size_t>(d.w)];
    for (std::size_t i = 0; i < t.size(); ++i) params_[t.offset + i] = stddev * rng.normal();
  };
  auto he = [&](const Dense& d) {
    const TensorInfo& t = tensors_[static_cast<std::size_t>(d.w)];
    fill_normal(d, std::sqrt(2.0 / t.rows));
  };
  for (const auto* group : {&trunk_, &cls_tower_, &reg_tower_, &center_tower_}) {
    for (const Dense& d : *group) he(d);
  }
  fill_normal(cls_head_, 0.01);
  fill_normal(ctr_head_, 0.01);
  if (corner_head_.w >= 0) fill_normal(corner_head_, 0.01);
  if (center_head_.w >= 0) fill_normal(center_head_, 0.01);
  if (config_.strategy == StrategyKind::Iterative) {
    for (const Dense& d : iter_heads_) fill_normal(d, 0.01);
  }
  const TensorInfo& cb = tensors_[static_cast<std::size_t>(cls_head_.b)];
  for (std::size_t i = 0; i < cb.size(); ++i) params_[cb.offset + i] = -std::log(99.0);
}

IterativeHeadParams ToyModel::iterative_heads() const {
  if (config_.strategy != StrategyKind::Iterative) throw InvalidParams("model has no iterative heads");
  IterativeHeadParams p = IterativeHeadParams::zeros(config_.hidden);
  for (int k = 0; k < 4; ++k) {
    const TensorInfo& w = tensors_[static_cast<std::size_t>(iter_heads_[k].w)];
    const TensorInfo& b = tensors_[static_cast<std::size_t>(iter_heads_[k].b)];
    std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>(w.offset), w.size(), p.heads[k].weight.begin());
    std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size(), p.heads[k].bias.begin());
  }
  return p;
}

namespace {

// Operands of products and reductions are copied into Eigen-owned storage:
// with a fixed alignment the vectorized summation order, and so the result,
// no longer depends on where the std::vector buffers happen to live.
struct DenseView {
  Mat w;
  ConstRowMap b;
};

struct DenseGrad {
  MatMap w;
  RowMap b;
};

}  // namespace

void ToyModel::forward(const FeatureMatrix& x, std::span<const int> reg_rows, Pass& pass) const {
  if (x.cols != config_.input_width) throw InvalidParams("feature width does not match the model");
  auto view = [&](const Dense& d) {
    const TensorInfo& w = tensors_[static_cast<std::size_t>(d.w)];
    const TensorInfo& b = tensors_[static_cast<std::size_t>(d.b)];
    return DenseView{ConstMatMap(params_.data() + w.offset, w.rows, w.cols),
                     ConstRowMap(params_.data() + b.offset, b.cols)};
  };
  auto apply = [&](const Mat& in, const Dense& d) -> Mat {
    const DenseView v = view(d);
    Mat z = in * v.w;
    z.rowwise() += v.b;
    return z;
  };

  pass.trunk.assign(1, ConstMatMap(x.data.data(), x.rows, x.cols));
  pass.trunk.push_back(relu(apply(pass.trunk[0], trunk_[0])));
  pass.trunk.push_back(relu(apply(pass.trunk.back(), trunk_[1])));

  pass.cls.assign(1, pass.trunk.back());
  for (const Dense& d : cls_tower_) pass.cls.push_back(relu(apply(pass.cls.back(), d)));
  pass.probs = apply(pass.cls.back(), cls_head_).unaryExpr([](double z) { return sigmoid(z); });

  pass.reg_rows.assign(reg_rows.begin(), reg_rows.end());
  const Eigen::Index n = static_cast<Eigen::Index>(reg_rows.size());
  Mat base(n, config_.hidden);
  for (Eigen::Index i = 0; i < n; ++i) base.row(i) = pass.trunk.back().row(reg_rows[static_cast<std::size_t>(i)]);
  pass.reg.assign(1, base);
  for (const Dense& d : reg_tower_) pass.reg.push_back(relu(apply(pass.reg.back(), d)));
  const Mat& top = pass.reg.back();
  pass.ctr = apply(top, ctr_head_).unaryExpr([](double z) { return sigmoid(z); });

  pass.raw_center = Mat::Zero(n, 2);
  switch (config_.strategy) {
    case StrategyKind::Direct: pass.corners = apply(top, corner_head_); break;
    case StrategyKind::Offset: {
      const RegressionTarget a = anchor_corners(config_.anchor_scale);
      pass.corners = apply(top, corner_head_).rowwise() + ConstRowMap(a.data(), 8);
      break;
    }
    case StrategyKind::Iterative: {
      const IterativeHeadParams heads = iterative_heads();
      pass.corners.resize(n, 8);
      for (Eigen::Index i = 0; i < n; ++i) {
        const RegressionTarget c =
            iterative_decode(std::span<const double>(top.row(i).data(), static_cast<std::size_t>(config_.hidden)), heads);
        pass.corners.row(i) = ConstRowMap(c.data(), 8);
      }
      break;
    }
    case StrategyKind::CenterToCorner: {
      pass.center.assign(1, base);
      for (const Dense& d : center_tower_) pass.center.push_back(relu(apply(pass.center.back(), d)));
      pass.raw_center = apply(pass.center.back(), center_head_);
      pass.corners = apply(top, corner_head_);
      for (int k = 0; k < 4; ++k) pass.corners.middleCols(2 * k, 2) += pass.raw_center;
      break;
    }
  }
}

ModelOutput ToyModel::predict(const FeatureMatrix& x) const {
  std::vector<int> rows(static_cast<std::size_t>(x.rows));
  for (int i = 0; i < x.rows; ++i) rows[static_cast<std::size_t>(i)] = i;
  Pass pass;
  forward(x, rows, pass);
  ModelOutput out;
  out.rows = x.rows;
  out.num_classes = config_.num_classes;
  out.class_probs.assign(pass.probs.data(), pass.probs.data() + pass.probs.size());
  out.corners.resize(static_cast<std::size_t>(x.rows));
  out.centerness.resize(static_cast<std::size_t>(x.rows));
  out.centers.resize(static_cast<std::size_t>(x.rows));
  for (int i = 0; i < x.rows; ++i) {
    for (int k = 0; k < 8; ++k) out.corners[static_cast<std::size_t>(i)][k] = pass.corners(i, k);
    out.centerness[static_cast<std::size_t>(i)] = pass.ctr(i, 0);
    out.centers[static_cast<std::size_t>(i)] = {pass.raw_center(i, 0), pass.raw_center(i, 1)};
  }
  return out;
}

namespace {

std::vector<int> positive_rows(std::span<const LocationTarget> targets) {
  std::vector<int> rows;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].positive()) rows.push_back(static_cast<int>(i));
  }
  return rows;
}

}  // namespace

double ToyModel::loss(const FeatureMatrix& x, std::span<const LocationTarget> targets, const LossWeights& weights,
                      bool use_centerness) const {
  Pass pass;
  return forward_loss(x, targets, weights, use_centerness, pass).term.value;
}

TotalLoss ToyModel::forward_loss(const FeatureMatrix& x, std::span<const LocationTarget> targets,
                                 const LossWeights& weights, bool use_centerness, Pass& pass) const {
  if (targets.size() != static_cast<std::size_t>(x.rows)) throw InvalidParams("one target per feature row is required");
  forward(x, positive_rows(targets), pass);
  const int c = config_.num_classes;
  std::vector<LocationPrediction> preds(static_cast<std::size_t>(x.rows));
  for (int i = 0; i < x.rows; ++i) {
    preds[static_cast<std::size_t>(i)].class_probs.assign(pass.probs.row(i).data(), pass.probs.row(i).data() + c);
  }
  for (std::size_t j = 0; j < pass.reg_rows.size(); ++j) {
    LocationPrediction& p = preds[static_cast<std::size_t>(pass.reg_rows[j])];
    const auto jj = static_cast<Eigen::Index>(j);
    for (int k = 0; k < 8; ++k) p.corners[k] = pass.corners(jj, k);
    p.centerness = pass.ctr(jj, 0);
    p.center = {pass.raw_center(jj, 0), pass.raw_center(jj, 1)};
  }
  return total_loss(targets, preds, c, weights, config_.strategy, use_centerness);
}

TotalLoss ToyModel::loss_and_gradient(const FeatureMatrix& x, std::span<const LocationTarget> targets,
                                      const LossWeights& weights, bool use_centerness, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw InvalidParams("gradient buffer has the wrong size");
  Pass pass;
  TotalLoss result = forward_loss(x, targets, weights, use_centerness, pass);
  const std::vector<int>& rows = pass.reg_rows;
  const int c = config_.num_classes;
  const std::size_t arity = prediction_arity(c);
  const ConstMatMap g(result.term.gradient.data(), x.rows, static_cast<Eigen::Index>(arity));

  std::fill(grad.begin(), grad.end(), 0.0);
  auto gview = [&](const Dense& d) {
    const TensorInfo& w = tensors_[static_cast<std::size_t>(d.w)];
    const TensorInfo& b = tensors_[static_cast<std::size_t>(d.b)];
    return DenseGrad{MatMap(grad.data() + w.offset, w.rows, w.cols), RowMap(grad.data() + b.offset, b.cols)};
  };
  auto weight = [&](const Dense& d) {
    const TensorInfo& w = tensors_[static_cast<std::size_t>(d.w)];
    return Mat(ConstMatMap(params_.data() + w.offset, w.rows, w.cols));
  };
  // Backpropagates dOut through out = in W + b; returns dIn.
  auto dense_back = [&](const Mat& in, const Mat& d_out, const Dense& d) -> Mat {
    DenseGrad gd = gview(d);
    const Mat dw = in.transpose() * d_out;
    const Eigen::RowVectorXd db = d_out.colwise().sum();
    gd.w += dw;
    gd.b += db;
    return d_out * weight(d).transpose();
  };
  auto relu_back = [](const Mat& out, Mat d) -> Mat { return d.cwiseProduct((out.array() > 0.0).cast<double>().matrix()); };
  auto tower_back = [&](const std::vector<Mat>& acts, const std::vector<Dense>& layers, Mat d) -> Mat {
    for (std::size_t i = layers.size(); i-- > 0;) {
      d = dense_back(acts[i], relu_back(acts[i + 1], std::move(d)), layers[i]);
    }
    return d;
  };

  // Classification branch.
  Mat d_logits = g.leftCols(c).cwiseProduct(pass.probs.cwiseProduct((1.0 - pass.probs.array()).matrix()));
  Mat d_trunk = tower_back(pass.cls, cls_tower_, dense_back(pass.cls.back(), d_logits, cls_head_));

  // Regression branch on positive rows.
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  if (n > 0) {
    Mat d_corners(n, 8), d_ctr(n, 1), d_center(n, 2);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto r = rows[static_cast<std::size_t>(j)];
      d_corners.row(j) = g.row(r).segment(c, 8);
      const double o = pass.ctr(j, 0);
      d_ctr(j, 0) = g(r, c + 8) * o * (1.0 - o);
      d_center.row(j) = g.row(r).segment(c + 9, 2);
    }
    const Mat& top = pass.reg.back();
    Mat d_top = dense_back(top, d_ctr, ctr_head_);
    switch (config_.strategy) {
      case StrategyKind::Direct:
      case StrategyKind::Offset: d_top += dense_back(top, d_corners, corner_head_); break;
      case StrategyKind::Iterative: {
        const IterativeHeadParams heads = iterative_heads();
        for (Eigen::Index j = 0; j < n; ++j) {
          RegressionTarget dc;
          for (int k = 0; k < 8; ++k) dc[k] = d_corners(j, k);
          const IterativeHeadGrads hg = iterative_backward(
              std::span<const double>(top.row(j).data(), static_cast<std::size_t>(config_.hidden)), heads, dc);
          for (int k = 0; k < 4; ++k) {
            const TensorInfo& w = tensors_[static_cast<std::size_t>(iter_heads_[k].w)];
            const TensorInfo& b = tensors_[static_cast<std::size_t>(iter_heads_[k].b)];
            for (std::size_t i = 0; i < w.size(); ++i) grad[w.offset + i] += hg.params.heads[k].weight[i];
            for (std::size_t i = 0; i < b.size(); ++i) grad[b.offset + i] += hg.params.heads[k].bias[i];
          }
          d_top.row(j) += ConstRowMap(hg.features.data(), config_.hidden);
        }
        break;
      }
      case StrategyKind::CenterToCorner: {
        d_top += dense_back(top, d_corners, corner_head_);
        Mat d_raw_center = d_center;
        for (int k = 0; k < 4; ++k) d_raw_center += d_corners.middleCols(2 * k, 2);
        const Mat d_center_base =
            tower_back(pass.center, center_tower_, dense_back(pass.center.back(), d_raw_center, center_head_));
        for (Eigen::Index j = 0; j < n; ++j) d_trunk.row(rows[static_cast<std::size_t>(j)]) += d_center_base.row(j);
        break;
      }
    }
    const Mat d_reg_base = tower_back(pass.reg, reg_tower_, std::move(d_top));
    for (Eigen::Index j = 0; j < n; ++j) d_trunk.row(rows[static_cast<std::size_t>(j)]) += d_reg_base.row(j);
  }

  // Trunk; the input gradient of the first layer is not needed.
  d_trunk = relu_back(pass.trunk[2], std::move(d_trunk));
  d_trunk = dense_back(pass.trunk[1], d_trunk, trunk_[1]);
  d_trunk = relu_back(pass.trunk[1], std::move(d_trunk));
  const Mat dw0 = pass.trunk[0].transpose() * d_trunk;
  const Eigen::RowVectorXd db0 = d_trunk.colwise().sum();
  DenseGrad g0 = gview(trunk_[0]);
  g0.w += dw0;
  g0.b += db0;
  return result;
}

namespace {

constexpr char kMagic[8] = {'O', 'B', 'B', 'T', 'O', 'Y', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out += static_cast<char>((bits >> (8 * i)) & 0xff);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  std::uint64_t take(int n) {
    if (pos_ + static_cast<std::size_t>(n) > bytes_.size()) throw ParseError("checkpoint is truncated", 0, pos_ + 1);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  double f64() { return std::bit_cast<double>(take(8)); }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ToyModel& model) {
  std::string out(kMagic, sizeof kMagic);
  const ToyModelConfig& c = model.config();
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(c.input_width));
  put_u32(out, static_cast<std::uint32_t>(c.hidden));
  put_u32(out, static_cast<std::uint32_t>(c.num_classes));
  put_u32(out, static_cast<std::uint32_t>(c.tower_layers));
  put_u32(out, static_cast<std::uint32_t>(c.strategy));
  put_f64(out, c.anchor_scale);
  put_u32(out, static_cast<std::uint32_t>(model.tensors().size()));
  for (const TensorInfo& t : model.tensors()) {
    put_u32(out, static_cast<std::uint32_t>(t.rows));
    put_u32(out, static_cast<std::uint32_t>(t.cols));
  }
  for (double v : model.parameters()) put_f64(out, v);
  return out;
}

ToyModel decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ParseError("not a toy model checkpoint", 0, 1);
  }
  Reader r(bytes.substr(sizeof kMagic));
  if (r.u32() != kVersion) throw ParseError("unsupported checkpoint version", 0, sizeof kMagic + 1);
  ToyModelConfig c;
  c.input_width = static_cast<int>(r.u32());
  c.hidden = static_cast<int>(r.u32());
  c.num_classes = static_cast<int>(r.u32());
  c.tower_layers = static_cast<int>(r.u32());
  const std::uint32_t strategy = r.u32();
  if (strategy > static_cast<std::uint32_t>(StrategyKind::CenterToCorner)) throw ParseError("unknown strategy", 0, 0);
  c.strategy = static_cast<StrategyKind>(strategy);
  c.anchor_scale = r.f64();
  ToyModel model(c);
  if (r.u32() != model.tensors().size()) throw ParseError("tensor count does not match the configuration", 0, 0);
  for (const TensorInfo& t : model.tensors()) {
    const auto rows = static_cast<int>(r.u32());
    const auto cols = static_cast<int>(r.u32());
    if (rows != t.rows || cols != t.cols) throw ParseError("tensor '" + t.name + "' has the wrong shape", 0, 0);
  }
  for (double& v : model.parameters()) v = r.f64();
  if (!r.done()) throw ParseError("trailing bytes after checkpoint", 0, 0);
  return model;
}

}  // namespace obb
