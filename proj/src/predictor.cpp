#include "pixie/predictor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include <Eigen/Dense>

#include "pixie/grid_io.hpp"
#include "pixie/parallel.hpp"
#include "pixie/random.hpp"

namespace pixie {

namespace {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMat>;
using Weights = Eigen::Map<RowMat>;
using ConstBias = Eigen::Map<const Eigen::VectorXd>;
using Bias = Eigen::Map<Eigen::VectorXd>;

constexpr char kModelMagic[8] = {'P', 'X', 'M', 'O', 'D', 'E', 'L', '1'};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double silu(double x) { return x * sigmoid(x); }
double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

struct ModelView {
  ConstWeights wp, w1, w2;
  ConstBias bp, b1, b2;

  explicit ModelView(const PredictorModel& m)
      : wp(m.params().data() + m.off_wp(), m.width(), m.input_dim()),
        w1(m.params().data() + m.off_w1(), m.width(), 2 * m.width()),
        w2(m.params().data() + m.off_w2(), kOutputChannels, m.width()),
        bp(m.params().data() + m.off_bp(), m.width()),
        b1(m.params().data() + m.off_b1(), m.width()),
        b2(m.params().data() + m.off_b2(), kOutputChannels) {}
};

struct GradView {
  Weights wp, w1, w2;
  Bias bp, b1, b2;

  GradView(const PredictorModel& m, std::vector<double>& g)
      : wp(g.data() + m.off_wp(), m.width(), m.input_dim()),
        w1(g.data() + m.off_w1(), m.width(), 2 * m.width()),
        w2(g.data() + m.off_w2(), kOutputChannels, m.width()),
        bp(g.data() + m.off_bp(), m.width()),
        b1(g.data() + m.off_b1(), m.width()),
        b2(g.data() + m.off_b2(), kOutputChannels) {}
};

// Occupied voxels of one scene in flat order with their 3x3x3 occupied
// neighbourhoods (self included), as column indices.
struct SceneLayout {
  std::vector<std::size_t> voxels;
  std::vector<std::size_t> nbr_offsets;  // size voxels+1
  std::vector<std::uint32_t> nbr;
  Mat features;  // d x N
};

SceneLayout build_layout(const FeatureGrid& features, const OccupancyMask& mask) {
  if (features.n() != mask.n()) throw Error(ErrorCode::DimensionMismatch, "feature grid and mask differ in n");
  SceneLayout s;
  s.voxels = mask.occupied_voxels();
  const int n = mask.n();
  std::vector<std::int64_t> column(mask.voxel_count(), -1);
  for (std::size_t i = 0; i < s.voxels.size(); ++i) column[s.voxels[i]] = static_cast<std::int64_t>(i);

  s.nbr_offsets.reserve(s.voxels.size() + 1);
  s.nbr_offsets.push_back(0);
  for (std::size_t v : s.voxels) {
    const VoxelIndex c = mask.unflatten(v);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
          if (x < 0 || y < 0 || z < 0 || x >= n || y >= n || z >= n) continue;
          const auto col = column[mask.flat_voxel(x, y, z)];
          if (col >= 0) s.nbr.push_back(static_cast<std::uint32_t>(col));
        }
      }
    }
    s.nbr_offsets.push_back(s.nbr.size());
  }

  const int d = features.d();
  s.features.resize(d, static_cast<Eigen::Index>(s.voxels.size()));
  for (std::size_t i = 0; i < s.voxels.size(); ++i) {
    const auto f = features.voxel(s.voxels[i]);
    for (int c = 0; c < d; ++c) s.features(c, static_cast<Eigen::Index>(i)) = f[c];
  }
  return s;
}

struct Activations {
  Mat pre_proj;  // h x N
  Mat z;         // h x N
  Mat u;         // 2h x N  ([z; neighbourhood mean])
  Mat pre_hidden;
  Mat hidden;
  Mat out;  // 11 x N, continuous rows already squashed
};

Activations run_forward(const ModelView& m, const SceneLayout& s, int chunk) {
  const Eigen::Index n = static_cast<Eigen::Index>(s.voxels.size());
  const Eigen::Index h = m.bp.size();
  Activations a;
  a.pre_proj.resize(h, n);
  for (Eigen::Index c0 = 0; c0 < n; c0 += chunk) {
    const Eigen::Index len = std::min<Eigen::Index>(chunk, n - c0);
    a.pre_proj.middleCols(c0, len).noalias() = m.wp * s.features.middleCols(c0, len);
  }
  a.pre_proj.colwise() += m.bp;
  a.z = a.pre_proj.unaryExpr(&silu);

  a.u.resize(2 * h, n);
  a.u.topRows(h) = a.z;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(h);
    const auto b = s.nbr_offsets[i], e = s.nbr_offsets[i + 1];
    for (auto k = b; k < e; ++k) acc += a.z.col(s.nbr[k]);
    a.u.col(i).tail(h) = acc / static_cast<double>(e - b);
  }

  a.pre_hidden.resize(h, n);
  a.out.resize(kOutputChannels, n);
  for (Eigen::Index c0 = 0; c0 < n; c0 += chunk) {
    const Eigen::Index len = std::min<Eigen::Index>(chunk, n - c0);
    a.pre_hidden.middleCols(c0, len).noalias() = m.w1 * a.u.middleCols(c0, len);
  }
  a.pre_hidden.colwise() += m.b1;
  a.hidden = a.pre_hidden.unaryExpr(&silu);
  for (Eigen::Index c0 = 0; c0 < n; c0 += chunk) {
    const Eigen::Index len = std::min<Eigen::Index>(chunk, n - c0);
    a.out.middleCols(c0, len).noalias() = m.w2 * a.hidden.middleCols(c0, len);
  }
  a.out.colwise() += m.b2;
  a.out.bottomRows(kContinuousChannels) = a.out.bottomRows(kContinuousChannels).array().tanh().matrix();
  return a;
}

struct SceneTargets {
  std::vector<int> cls;
  Mat values;  // 3 x N
};

SceneTargets gather_targets(const SceneLayout& s, const NormalizedTargets& t) {
  SceneTargets out;
  out.cls.reserve(s.voxels.size());
  out.values.resize(kContinuousChannels, static_cast<Eigen::Index>(s.voxels.size()));
  for (std::size_t i = 0; i < s.voxels.size(); ++i) {
    const std::size_t v = s.voxels[i];
    out.cls.push_back(t.cls[v]);
    out.values(0, static_cast<Eigen::Index>(i)) = t.values[v].e;
    out.values(1, static_cast<Eigen::Index>(i)) = t.values[v].nu;
    out.values(2, static_cast<Eigen::Index>(i)) = t.values[v].rho;
  }
  return out;
}

// Softmax cross-entropy of one logit column; fills probabilities if asked.
double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& logits, int target, Eigen::VectorXd* probs) {
  const double mx = logits.maxCoeff();
  double sum = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) sum += std::exp(logits[k] - mx);
  const double lse = mx + std::log(sum);
  if (probs) *probs = (logits.array() - lse).exp().matrix();
  return lse - logits[target];
}

LossBreakdown scene_loss(const Mat& out, const SceneTargets& t, double lambda) {
  const Eigen::Index n = out.cols();
  LossBreakdown l;
  for (Eigen::Index i = 0; i < n; ++i) {
    l.ce += cross_entropy(out.col(i).head(kLogitChannels), t.cls[i], nullptr);
    const auto diff = out.col(i).tail(kContinuousChannels) - t.values.col(i);
    l.mse_e += diff[0] * diff[0];
    l.mse_nu += diff[1] * diff[1];
    l.mse_rho += diff[2] * diff[2];
  }
  const double inv = 1.0 / static_cast<double>(n);
  l.ce *= inv;
  l.mse_e *= inv;
  l.mse_nu *= inv;
  l.mse_rho *= inv;
  l.total = lambda * l.ce + l.mse_e + l.mse_nu + l.mse_rho;
  return l;
}

// Accumulates scale * d(scene loss)/d(params) into grad.
void scene_backward(const PredictorModel& model, const ModelView& m, const SceneLayout& s, const Activations& a,
                    const SceneTargets& t, double lambda, double scale, int chunk, std::vector<double>& grad) {
  GradView g(model, grad);
  const Eigen::Index n = static_cast<Eigen::Index>(s.voxels.size());
  const Eigen::Index h = m.bp.size();
  const double inv = scale / static_cast<double>(n);

  Mat d_out(kOutputChannels, n);
  Eigen::VectorXd probs;
  for (Eigen::Index i = 0; i < n; ++i) {
    cross_entropy(a.out.col(i).head(kLogitChannels), t.cls[i], &probs);
    probs[t.cls[i]] -= 1.0;
    d_out.col(i).head(kLogitChannels) = (lambda * inv) * probs;
    for (int k = 0; k < kContinuousChannels; ++k) {
      const double y = a.out(kLogitChannels + k, i);
      d_out(kLogitChannels + k, i) = 2.0 * inv * (y - t.values(k, i)) * (1.0 - y * y);
    }
  }

  Mat d_pre_hidden(h, n);
  Mat d_u(2 * h, n);
  for (Eigen::Index c0 = 0; c0 < n; c0 += chunk) {
    const Eigen::Index len = std::min<Eigen::Index>(chunk, n - c0);
    g.w2.noalias() += d_out.middleCols(c0, len) * a.hidden.middleCols(c0, len).transpose();
    g.b2 += d_out.middleCols(c0, len).rowwise().sum();
    d_pre_hidden.middleCols(c0, len).noalias() = m.w2.transpose() * d_out.middleCols(c0, len);
    d_pre_hidden.middleCols(c0, len).array() *= a.pre_hidden.middleCols(c0, len).unaryExpr(&silu_grad).array();
    g.w1.noalias() += d_pre_hidden.middleCols(c0, len) * a.u.middleCols(c0, len).transpose();
    g.b1 += d_pre_hidden.middleCols(c0, len).rowwise().sum();
    d_u.middleCols(c0, len).noalias() = m.w1.transpose() * d_pre_hidden.middleCols(c0, len);
  }

  Mat d_z = d_u.topRows(h);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto b = s.nbr_offsets[i], e = s.nbr_offsets[i + 1];
    const Eigen::VectorXd share = d_u.col(i).tail(h) / static_cast<double>(e - b);
    for (auto k = b; k < e; ++k) d_z.col(s.nbr[k]) += share;
  }
  d_z.array() *= a.pre_proj.unaryExpr(&silu_grad).array();
  for (Eigen::Index c0 = 0; c0 < n; c0 += chunk) {
    const Eigen::Index len = std::min<Eigen::Index>(chunk, n - c0);
    g.wp.noalias() += d_z.middleCols(c0, len) * s.features.middleCols(c0, len).transpose();
    g.bp += d_z.middleCols(c0, len).rowwise().sum();
  }
}

void check_input(const PredictorModel& model, const FeatureGrid& features) {
  if (features.d() != model.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "predictor expects d = " + std::to_string(model.input_dim()) +
                                                  ", feature grid has d = " + std::to_string(features.d()));
  }
}

struct PreparedScene {
  SceneLayout layout;
  SceneTargets targets;
};

std::vector<PreparedScene> prepare(const PredictorModel& model, std::span<const TrainingExample> dataset,
                                   const TrainConfig& cfg) {
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "training dataset is empty");
  std::vector<PreparedScene> out;
  out.reserve(dataset.size());
  for (const auto& ex : dataset) {
    check_input(model, ex.features);
    if (ex.material.n() != ex.mask.n()) throw Error(ErrorCode::DimensionMismatch, "material grid and mask differ in n");
    ex.material.check_against(ex.mask);
    if (ex.mask.count() == 0) throw Error(ErrorCode::EmptyMask, "training scene has no occupied voxels");
    PreparedScene p;
    p.layout = build_layout(ex.features, ex.mask);
    p.targets = gather_targets(p.layout, normalize_targets(ex.material, cfg.norm_stats));
    out.push_back(std::move(p));
  }
  return out;
}

LossAndGradient evaluate_prepared(const PredictorModel& model, const std::vector<PreparedScene>& scenes,
                                  const TrainConfig& cfg, bool with_gradient) {
  const ModelView m(model);
  const double scale = 1.0 / static_cast<double>(scenes.size());
  std::vector<LossBreakdown> losses(scenes.size());
  std::vector<std::vector<double>> grads(with_gradient ? scenes.size() : 0);

  // One shard per scene; shards are reduced in scene order below, so the
  // result does not depend on the thread count.
  parallel_for(scenes.size(), [&](std::size_t i) {
    const auto& sc = scenes[i];
    const Activations a = run_forward(m, sc.layout, cfg.batch_voxels);
    losses[i] = scene_loss(a.out, sc.targets, cfg.lambda);
    if (with_gradient) {
      grads[i].assign(model.param_count(), 0.0);
      scene_backward(model, m, sc.layout, a, sc.targets, cfg.lambda, scale, cfg.batch_voxels, grads[i]);
    }
  });

  LossAndGradient r;
  if (with_gradient) r.gradient.assign(model.param_count(), 0.0);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    r.loss.ce += scale * losses[i].ce;
    r.loss.mse_e += scale * losses[i].mse_e;
    r.loss.mse_nu += scale * losses[i].mse_nu;
    r.loss.mse_rho += scale * losses[i].mse_rho;
    if (with_gradient) {
      for (std::size_t k = 0; k < r.gradient.size(); ++k) r.gradient[k] += grads[i][k];
    }
  }
  r.loss.total = cfg.lambda * r.loss.ce + r.loss.mse_e + r.loss.mse_nu + r.loss.mse_rho;
  return r;
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model

PredictorModel::PredictorModel(int input_dim, int width) : d_(input_dim), h_(width) {
  if (input_dim < 1 || width < 1) throw Error(ErrorCode::InvalidArgument, "predictor dims must be >= 1");
  params_.assign(off_b2() + kOutputChannels, 0.0);
}

PredictorModel PredictorModel::initialized(int input_dim, int width, std::uint64_t seed) {
  PredictorModel m(input_dim, width);
  Rng rng(seed);
  auto fill = [&](std::size_t off, std::size_t count, int fan_in) {
    const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) m.params_[off + i] = std * rng.normal();
  };
  fill(m.off_wp(), static_cast<std::size_t>(width) * input_dim, input_dim);
  fill(m.off_w1(), static_cast<std::size_t>(width) * 2 * width, 2 * width);
  fill(m.off_w2(), static_cast<std::size_t>(kOutputChannels) * width, width);
  return m;
}

std::vector<std::uint8_t> encode_model(const PredictorModel& model) {
  std::vector<std::uint8_t> out(std::begin(kModelMagic), std::end(kModelMagic));
  le::put_u32(out, static_cast<std::uint32_t>(model.input_dim()));
  le::put_u32(out, static_cast<std::uint32_t>(model.width()));
  le::put_u32(out, PredictorModel::kLayerCount);
  for (double p : model.params()) le::put_f64(out, p);
  return out;
}

PredictorModel decode_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kModelMagic, 8) != 0) {
    throw Error(ErrorCode::MagicMismatch, "not a PXMODEL1 checkpoint");
  }
  const auto d = le::get_u32(bytes.data() + 8);
  const auto h = le::get_u32(bytes.data() + 12);
  const auto layers = le::get_u32(bytes.data() + 16);
  if (layers != PredictorModel::kLayerCount) {
    throw Error(ErrorCode::FormatError, "PXMODEL1: unsupported layer count " + std::to_string(layers));
  }
  if (d == 0 || h == 0 || d > (1u << 20) || h > (1u << 16)) throw Error(ErrorCode::FormatError, "PXMODEL1: bad dims");
  PredictorModel m(static_cast<int>(d), static_cast<int>(h));
  if (bytes.size() != 20 + 8 * m.param_count()) {
    throw Error(ErrorCode::FormatError, "PXMODEL1: parameter payload length mismatch");
  }
  auto p = m.params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = le::get_f64(bytes.data() + 20 + 8 * i);
  return m;
}

void write_model(const std::filesystem::path& path, const PredictorModel& model) {
  write_file_atomic(path, encode_model(model));
}

PredictorModel read_model(const std::filesystem::path& path) {
  try {
    return decode_model(read_file_bytes(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Prediction grids

int PredictionGrid::argmax_class(std::size_t v) const {
  const auto row = voxel(v);
  int best = 0;
  for (int k = 1; k < kLogitChannels; ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

NormalizedParams PredictionGrid::continuous(std::size_t v) const {
  const auto row = voxel(v);
  return {row[kLogitChannels], row[kLogitChannels + 1], row[kLogitChannels + 2]};
}

void write_prediction(const std::filesystem::path& path, const PredictionGrid& grid) {
  write_raw_grid(path, RawGrid{grid.dims(), ElementKind::F32, grid.data(), {}});
}

PredictionGrid read_prediction(const std::filesystem::path& path) {
  RawGrid raw = read_raw_grid(path);
  if (raw.kind != ElementKind::F32 || raw.dims.d != kOutputChannels) {
    throw Error(ErrorCode::FormatError, path.string() + ": not a prediction grid (need f32, d = 11)");
  }
  return PredictionGrid(raw.dims.n, std::move(raw.f32));
}

NormalizedTargets normalize_targets(const MaterialGrid& material, const NormStats& stats) {
  NormalizedTargets t;
  t.n = material.n();
  t.cls.assign(material.voxel_count(), 0);
  t.values.assign(material.voxel_count(), NormalizedParams{});
  for (std::size_t v = 0; v < material.voxel_count(); ++v) {
    if (!material.occupied(v)) continue;
    t.cls[v] = static_cast<std::uint8_t>(material.material_class(v));
    const auto r = normalize(material.params(v), stats);
    t.values[v] = r.value;
    t.clamped += r.clamped;
  }
  return t;
}

LossBreakdown masked_loss(const PredictionGrid& pred, const NormalizedTargets& gt, const OccupancyMask& mask,
                          double lambda) {
  if (pred.n() != mask.n() || gt.n != mask.n()) throw Error(ErrorCode::DimensionMismatch, "masked_loss: n differs");
  const std::size_t n_occ = mask.count();
  if (n_occ == 0) throw Error(ErrorCode::EmptyMask, "masked_loss: no occupied voxels");
  LossBreakdown l;
  Eigen::VectorXd logits(kLogitChannels);
  for (std::size_t v = 0; v < mask.voxel_count(); ++v) {
    if (!mask.occupied(v)) continue;
    const auto row = pred.voxel(v);
    for (int k = 0; k < kLogitChannels; ++k) logits[k] = row[k];
    l.ce += cross_entropy(logits, gt.cls[v], nullptr);
    const double de = row[kLogitChannels] - gt.values[v].e;
    const double dn = row[kLogitChannels + 1] - gt.values[v].nu;
    const double dr = row[kLogitChannels + 2] - gt.values[v].rho;
    l.mse_e += de * de;
    l.mse_nu += dn * dn;
    l.mse_rho += dr * dr;
  }
  const double inv = 1.0 / static_cast<double>(n_occ);
  l.ce *= inv;
  l.mse_e *= inv;
  l.mse_nu *= inv;
  l.mse_rho *= inv;
  l.total = lambda * l.ce + l.mse_e + l.mse_nu + l.mse_rho;
  return l;
}

PredictionGrid forward(const PredictorModel& model, const FeatureGrid& features, const OccupancyMask& mask) {
  check_input(model, features);
  const SceneLayout s = build_layout(features, mask);
  PredictionGrid out(features.n());
  if (s.voxels.empty()) return out;
  const Activations a = run_forward(ModelView(model), s, 4096);
  for (std::size_t i = 0; i < s.voxels.size(); ++i) {
    auto row = out.voxel(s.voxels[i]);
    for (int k = 0; k < kOutputChannels; ++k) row[k] = static_cast<float>(a.out(k, static_cast<Eigen::Index>(i)));
  }
  return out;
}

std::vector<std::array<float, kOutputChannels>> forward_sparse(const PredictorModel& model,
                                                               const FeatureGrid& features,
                                                               const OccupancyMask& mask,
                                                               std::span<const std::size_t> voxels) {
  check_input(model, features);
  if (features.n() != mask.n()) throw Error(ErrorCode::DimensionMismatch, "feature grid and mask differ in n");
  const ModelView m(model);
  const int h = model.width(), d = model.input_dim(), n = mask.n();
  auto project = [&](std::size_t v) {
    Eigen::VectorXd f(d);
    const auto row = features.voxel(v);
    for (int c = 0; c < d; ++c) f[c] = row[c];
    return Eigen::VectorXd((m.wp * f + m.bp).unaryExpr(&silu));
  };
  std::vector<std::array<float, kOutputChannels>> out;
  out.reserve(voxels.size());
  for (std::size_t v : voxels) {
    std::array<float, kOutputChannels> row{};
    if (v >= mask.voxel_count()) throw Error(ErrorCode::InvalidArgument, "forward_sparse: voxel out of range");
    if (mask.occupied(v)) {
      const VoxelIndex c = mask.unflatten(v);
      Eigen::VectorXd u(2 * h);
      u.head(h) = project(v);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(h);
      int count = 0;
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dz = -1; dz <= 1; ++dz) {
            const int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
            if (x < 0 || y < 0 || z < 0 || x >= n || y >= n || z >= n) continue;
            const std::size_t w = mask.flat_voxel(x, y, z);
            if (!mask.occupied(w)) continue;
            acc += project(w);
            ++count;
          }
        }
      }
      u.tail(h) = acc / static_cast<double>(count);
      const Eigen::VectorXd hidden = (m.w1 * u + m.b1).unaryExpr(&silu);
      Eigen::VectorXd o = m.w2 * hidden + m.b2;
      o.tail(kContinuousChannels) = o.tail(kContinuousChannels).array().tanh().matrix();
      for (int k = 0; k < kOutputChannels; ++k) row[k] = static_cast<float>(o[k]);
    }
    out.push_back(row);
  }
  return out;
}

MaterialGrid to_material_grid(const PredictionGrid& pred, const OccupancyMask& mask, const NormStats& stats) {
  if (pred.n() != mask.n()) throw Error(ErrorCode::DimensionMismatch, "prediction and mask differ in n");
  MaterialGrid grid(pred.n());
  for (std::size_t v = 0; v < mask.voxel_count(); ++v) {
    if (!mask.occupied(v)) continue;
    int cls = pred.argmax_class(v);
    // An occupied voxel cannot be background; fall back to the best
    // non-background logit.
    if (cls == 0) {
      const auto row = pred.voxel(v);
      cls = 1;
      for (int k = 2; k < kLogitChannels; ++k) {
        if (row[k] > row[cls]) cls = k;
      }
    }
    grid.set(v, material_class_from_index(cls), denormalize(pred.continuous(v), stats));
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
  if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (batch_voxels < 1) throw Error(ErrorCode::InvalidArgument, "batch_voxels must be >= 1");
  if (!(lr_growth >= 1.0)) throw Error(ErrorCode::InvalidArgument, "lr_growth must be >= 1");
  norm_stats.validate();
}

LossAndGradient loss_and_gradient(const PredictorModel& model, std::span<const TrainingExample> dataset,
                                  const TrainConfig& cfg) {
  cfg.validate();
  return evaluate_prepared(model, prepare(model, dataset, cfg), cfg, true);
}

TrainResult train(PredictorModel model, std::span<const TrainingExample> dataset, const TrainConfig& cfg) {
  cfg.validate();
  const auto scenes = prepare(model, dataset, cfg);
  LossAndGradient current = evaluate_prepared(model, scenes, cfg, true);
  if (!std::isfinite(current.loss.total) || !all_finite(current.gradient)) {
    throw Error(ErrorCode::Divergence, "initial loss or gradient is not finite (loss " +
                                           std::to_string(current.loss.total) + ")");
  }

  TrainResult result;
  double lr = cfg.learning_rate;
  constexpr double kMinStep = 1e-14;
  PredictorModel trial = model;
  const std::size_t count = model.param_count();
  std::vector<double> direction(count), m1, m2;
  if (cfg.optimizer == Optimizer::Adam) {
    m1.assign(count, 0.0);
    m2.assign(count, 0.0);
  }
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.optimizer == Optimizer::Adam) {
      // Moment estimates advance once per epoch; the safeguard below only
      // scales the resulting direction.
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double c1 = 1.0 - std::pow(b1, epoch), c2 = 1.0 - std::pow(b2, epoch);
      for (std::size_t k = 0; k < count; ++k) {
        const double g = current.gradient[k];
        m1[k] = b1 * m1[k] + (1.0 - b1) * g;
        m2[k] = b2 * m2[k] + (1.0 - b2) * g * g;
        direction[k] = (m1[k] / c1) / (std::sqrt(m2[k] / c2) + eps);
      }
    } else {
      direction = current.gradient;
    }
    bool accepted = false;
    int non_finite = 0;
    while (lr >= kMinStep) {
      auto src = model.params();
      auto dst = trial.params();
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] - lr * direction[k];
      LossAndGradient next = evaluate_prepared(trial, scenes, cfg, true);
      if (std::isfinite(next.loss.total) && all_finite(next.gradient) && next.loss.total <= current.loss.total) {
        std::swap(model, trial);
        current = std::move(next);
        accepted = true;
        break;
      }
      if (!std::isfinite(next.loss.total)) ++non_finite;
      lr *= 0.5;
    }
    if (!accepted && non_finite > 0 && lr < kMinStep) {
      throw Error(ErrorCode::Divergence, "loss non-finite for every trial step at epoch " + std::to_string(epoch));
    }
    result.trace.push_back({epoch, current.loss, lr});
    if (accepted) {
      lr *= cfg.lr_growth;
    } else if (cfg.optimizer == Optimizer::Adam) {
      // The Adam direction need not descend; start the next search afresh.
      lr = cfg.learning_rate;
    } else {
      // Step size collapsed: the loss is at a numerical minimum along -grad.
      lr = kMinStep;
    }
  }
  result.model = std::move(model);
  return result;
}

std::string loss_trace_csv(const std::vector<EpochRecord>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,total,ce,mse_e,mse_nu,mse_rho\n";
  for (const auto& r : trace) {
    out << r.epoch << ',' << r.loss.total << ',' << r.loss.ce << ',' << r.loss.mse_e << ',' << r.loss.mse_nu << ','
        << r.loss.mse_rho << '\n';
  }
  return out.str();
}

Metrics evaluate_prediction(const PredictionGrid& pred, const NormalizedTargets& gt, const OccupancyMask& mask) {
  if (pred.n() != mask.n() || gt.n != mask.n()) throw Error(ErrorCode::DimensionMismatch, "evaluate: n differs");
  const std::size_t n_occ = mask.count();
  if (n_occ == 0) throw Error(ErrorCode::EmptyMask, "evaluate: no occupied voxels");
  Metrics m;
  std::size_t correct = 0;
  for (std::size_t v = 0; v < mask.voxel_count(); ++v) {
    if (!mask.occupied(v)) continue;
    correct += pred.argmax_class(v) == gt.cls[v];
    const auto c = pred.continuous(v);
    m.mse_log_e += (c.e - gt.values[v].e) * (c.e - gt.values[v].e);
    m.mse_nu += (c.nu - gt.values[v].nu) * (c.nu - gt.values[v].nu);
    m.mse_log_rho += (c.rho - gt.values[v].rho) * (c.rho - gt.values[v].rho);
  }
  const double inv = 1.0 / static_cast<double>(n_occ);
  m.mat_acc = static_cast<double>(correct) * inv;
  m.mse_log_e *= inv;
  m.mse_nu *= inv;
  m.mse_log_rho *= inv;
  m.avg_cont_mse = (m.mse_log_e + m.mse_nu + m.mse_log_rho) / 3.0;
  return m;
}

}  // namespace pixie
