#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slicebench/env.hpp"
#include "slicebench/mdp.hpp"
#include "slicebench/nn.hpp"
#include "slicebench/rng.hpp"
#include "slicebench/serialize.hpp"

namespace slicebench {

enum class TrafficClass : int { mmtc = 0, urllc = 1, embb = 2, ctrl = 3 };
constexpr int kNumClasses = 4;

inline const std::array<std::string, 4> kClassNames{"mmtc", "urllc", "embb", "ctrl"};

inline std::string class_name(TrafficClass c) { return kClassNames[static_cast<size_t>(c)]; }

inline TrafficClass class_from_name(const std::string& name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (kClassNames[static_cast<size_t>(i)] == name) return static_cast<TrafficClass>(i);
  throw std::invalid_argument("unknown class name: " + name);
}

inline const std::array<int, 5> kWindowSizes{4, 8, 16, 32, 64};

inline bool valid_window_size(int t) {
  return std::find(kWindowSizes.begin(), kWindowSizes.end(), t) != kWindowSizes.end();
}

struct Window {
  Eigen::MatrixXd values;  // T x 17
  TrafficClass label = TrafficClass::ctrl;
};

// Volume KPI column indices (sample counts, packet counts, bitrates) used by
// the idle criterion and the ITR filter.
inline const std::array<int, 6> kVolumeColumns{1, 3, 4, 7, 9, 11};

inline bool idle_period(const Eigen::RowVectorXd& row) {
  return row[1] == 0.0 && row[7] == 0.0 && row[3] == 0.0 && row[9] == 0.0;
}

// Sliding stride-1 windows over one UE's KPI stream; all-idle windows become
// the ctrl meta-class. `declared` ctrl keeps only idle windows.
inline std::vector<Window> build_windows(const std::vector<KpiRecord>& stream, int t_size, TrafficClass declared) {
  if (!valid_window_size(t_size)) throw std::invalid_argument("window size must be one of 4,8,16,32,64");
  for (size_t i = 1; i < stream.size(); ++i)
    if (stream[i].timestamp_ms < stream[i - 1].timestamp_ms)
      throw std::invalid_argument("KPI stream must be sorted by time");
  const int n = static_cast<int>(stream.size());
  std::vector<Window> out;
  if (n < t_size) return out;

  Eigen::MatrixXd feats(n, kNumKpiColumns);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < kNumKpiColumns; ++f) feats(i, f) = stream[static_cast<size_t>(i)].kpi[static_cast<size_t>(f)];
  std::vector<bool> idle(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idle[static_cast<size_t>(i)] = idle_period(feats.row(i));

  out.reserve(static_cast<size_t>(n - t_size + 1));
  for (int i = 0; i + t_size <= n; ++i) {
    bool all_idle = true;
    for (int k = i; k < i + t_size; ++k)
      if (!idle[static_cast<size_t>(k)]) {
        all_idle = false;
        break;
      }
    if (declared == TrafficClass::ctrl && !all_idle) continue;
    Window w;
    w.values = feats.middleRows(i, t_size);
    w.label = all_idle ? TrafficClass::ctrl : declared;
    out.push_back(std::move(w));
  }
  return out;
}

inline std::vector<Window> build_windows(const std::vector<KpiRecord>& stream, int t_size) {
  if (stream.empty()) return {};
  return build_windows(stream, t_size, static_cast<TrafficClass>(stream.front().slice_id));
}

struct NormStats {
  Eigen::VectorXd min, max;  // 17 each
};

inline NormStats fit_normalizer(const std::vector<Window>& train) {
  if (train.empty()) throw std::invalid_argument("fit_normalizer: empty training set");
  NormStats st;
  st.min = Eigen::VectorXd::Constant(kNumKpiColumns, std::numeric_limits<double>::infinity());
  st.max = Eigen::VectorXd::Constant(kNumKpiColumns, -std::numeric_limits<double>::infinity());
  for (const Window& w : train) {
    st.min = st.min.cwiseMin(w.values.colwise().minCoeff().transpose());
    st.max = st.max.cwiseMax(w.values.colwise().maxCoeff().transpose());
  }
  return st;
}

inline Window apply_normalizer(const NormStats& st, const Window& w) {
  Window out;
  out.label = w.label;
  out.values.resize(w.values.rows(), w.values.cols());
  for (int f = 0; f < kNumKpiColumns; ++f) {
    double lo = st.min[f], hi = st.max[f];
    if (hi > lo)
      out.values.col(f) = ((w.values.col(f).array() - lo) / (hi - lo)).cwiseMax(0.0).cwiseMin(1.0);
    else
      out.values.col(f).setZero();
  }
  return out;
}

inline bool window_active(const Window& w, double threshold) {
  for (int t = 0; t < w.values.rows(); ++t)
    for (int f : kVolumeColumns)
      if (w.values(t, f) > threshold) return true;
  return false;
}

// Idle Traffic Removal: drop windows whose volume features never exceed the
// threshold in any period.
inline std::vector<Window> itr_filter(const std::vector<Window>& windows, double threshold = 0.0) {
  if (threshold < 0.0) throw std::invalid_argument("itr threshold must be >= 0");
  std::vector<Window> out;
  out.reserve(windows.size());
  for (const Window& w : windows)
    if (window_active(w, threshold)) out.push_back(w);
  return out;
}

struct CnnHyperparams {
  double lr = 1e-3;
  double lr_floor = 1e-5;
  double lr_factor = 0.1;
  int plateau_epochs = 10;
  double plateau_min_delta = 1e-4;
  int early_stop_epochs = 25;
  int max_epochs = 350;
  int minibatch = 128;
  double val_fraction = 0.1;
  bool balance = true;
  uint64_t seed = 1;

  void validate() const {
    if (!(lr > 0.0) || !(lr_floor > 0.0) || lr_floor > lr) throw std::invalid_argument("bad learning rates");
    if (!(lr_factor > 0.0 && lr_factor < 1.0)) throw std::invalid_argument("lr_factor must be in (0,1)");
    if (plateau_epochs < 1 || early_stop_epochs < 1 || max_epochs < 1) throw std::invalid_argument("bad epoch limits");
    if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must be in (0,1)");
  }
};

// Conv (20 kernels, 4x1 along time, per feature) + ReLU -> FC 512 ReLU ->
// 4-way log-softmax. Parameters live in one flat vector.
class CnnModel {
 public:
  static constexpr int kKernels = 20;
  static constexpr int kKernelLen = 4;
  static constexpr int kHidden = 512;

  CnnModel() = default;
  explicit CnnModel(int t_size) : t_(t_size), params_(Eigen::VectorXd::Zero(n_params(t_size))) {
    if (!valid_window_size(t_size)) throw std::invalid_argument("window size must be one of 4,8,16,32,64");
  }

  int t_size() const { return t_; }
  static int conv_out_t(int t_size) { return t_size - kKernelLen + 1; }
  static Eigen::Index flat_dim(int t_size) {
    return static_cast<Eigen::Index>(kKernels) * conv_out_t(t_size) * kNumKpiColumns;
  }
  static Eigen::Index n_params(int t_size) {
    return kKernels * kKernelLen + kKernels + kHidden * flat_dim(t_size) + kHidden +
           static_cast<Eigen::Index>(kNumClasses) * kHidden + kNumClasses;
  }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  NormStats& norm() { return norm_; }
  const NormStats& norm() const { return norm_; }

  void init_weights(uint64_t seed) {
    auto rng = make_rng(seed, {0xC1u});
    Eigen::Index p = 0;
    init_weights_normal(params_.segment(p, kKernels * kKernelLen), std::sqrt(2.0 / kKernelLen), rng);
    p += kKernels * kKernelLen;
    params_.segment(p, kKernels).setZero();
    p += kKernels;
    init_weights_normal(params_.segment(p, kHidden * flat_dim(t_)), std::sqrt(2.0 / static_cast<double>(flat_dim(t_))),
                        rng);
    p += kHidden * flat_dim(t_);
    params_.segment(p, kHidden).setZero();
    p += kHidden;
    init_weights_normal(params_.segment(p, kNumClasses * kHidden), std::sqrt(2.0 / kHidden), rng);
    p += static_cast<Eigen::Index>(kNumClasses) * kHidden;
    params_.segment(p, kNumClasses).setZero();
  }

  Eigen::Map<const Eigen::MatrixXd> wc() const { return {params_.data(), kKernels, kKernelLen}; }
  Eigen::Map<const Eigen::VectorXd> bc() const { return {params_.data() + kKernels * kKernelLen, kKernels}; }
  Eigen::Map<const Eigen::MatrixXd> w1() const { return {params_.data() + off_w1(), kHidden, flat_dim(t_)}; }
  Eigen::Map<const Eigen::VectorXd> b1() const { return {params_.data() + off_b1(), kHidden}; }
  Eigen::Map<const Eigen::MatrixXd> w2() const { return {params_.data() + off_w2(), kNumClasses, kHidden}; }
  Eigen::Map<const Eigen::VectorXd> b2() const { return {params_.data() + off_b2(), kNumClasses}; }

  Eigen::Index off_w1() const { return kKernels * kKernelLen + kKernels; }
  Eigen::Index off_b1() const { return off_w1() + kHidden * flat_dim(t_); }
  Eigen::Index off_w2() const { return off_b1() + kHidden; }
  Eigen::Index off_b2() const { return off_w2() + static_cast<Eigen::Index>(kNumClasses) * kHidden; }

  // Conv + ReLU, flattened as ((kernel, time), feature) row-major.
  Eigen::VectorXd conv_flat(const Eigen::MatrixXd& x, Eigen::VectorXd* pre_relu = nullptr) const {
    const int ot = conv_out_t(t_);
    Eigen::VectorXd flat(flat_dim(t_));
    auto w = wc();
    auto b = bc();
    Eigen::Index p = 0;
    for (int k = 0; k < kKernels; ++k)
      for (int t = 0; t < ot; ++t)
        for (int f = 0; f < kNumKpiColumns; ++f) {
          double acc = b[k];
          for (int i = 0; i < kKernelLen; ++i) acc += w(k, i) * x(t + i, f);
          flat[p++] = acc;
        }
    if (pre_relu) *pre_relu = flat;
    return flat.cwiseMax(0.0);
  }

  Eigen::VectorXd log_probs(const Eigen::MatrixXd& x) const {
    if (x.rows() != t_ || x.cols() != kNumKpiColumns) throw std::invalid_argument("window shape mismatch");
    Eigen::VectorXd m = conv_flat(x);
    Eigen::VectorXd h = (w1() * m + b1()).cwiseMax(0.0);
    Eigen::VectorXd z = w2() * h + b2();
    double zmax = z.maxCoeff();
    double lse = zmax + std::log((z.array() - zmax).exp().sum());
    return z.array() - lse;
  }

 private:
  int t_ = 4;
  Eigen::VectorXd params_;
  NormStats norm_;
};

// Cross-entropy over a window batch, plus its analytic gradient in the flat
// parameter layout (the finite-difference surface).
inline double cnn_loss(const CnnModel& model, const std::vector<const Window*>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  double acc = 0.0;
  for (const Window* w : batch) acc -= model.log_probs(w->values)[static_cast<int>(w->label)];
  return acc / static_cast<double>(batch.size());
}

inline Eigen::VectorXd cnn_loss_grad(const CnnModel& model, const std::vector<const Window*>& batch,
                                     double* loss_out = nullptr) {
  const Eigen::Index bsz = static_cast<Eigen::Index>(batch.size());
  if (bsz == 0) throw std::invalid_argument("empty batch");
  const int t_size = model.t_size();
  const Eigen::Index fdim = CnnModel::flat_dim(t_size);
  const int ot = CnnModel::conv_out_t(t_size);

  Eigen::MatrixXd m(bsz, fdim), mpre(bsz, fdim);
  for (Eigen::Index i = 0; i < bsz; ++i) {
    Eigen::VectorXd pre;
    m.row(i) = model.conv_flat(batch[static_cast<size_t>(i)]->values, &pre).transpose();
    mpre.row(i) = pre.transpose();
  }
  Eigen::MatrixXd hpre = (m * model.w1().transpose()).rowwise() + model.b1().transpose();
  Eigen::MatrixXd h = hpre.cwiseMax(0.0);
  Eigen::MatrixXd z = (h * model.w2().transpose()).rowwise() + model.b2().transpose();

  double loss = 0.0;
  Eigen::MatrixXd dz(bsz, kNumClasses);
  for (Eigen::Index i = 0; i < bsz; ++i) {
    double zmax = z.row(i).maxCoeff();
    Eigen::RowVectorXd e = (z.row(i).array() - zmax).exp();
    double sum = e.sum();
    int y = static_cast<int>(batch[static_cast<size_t>(i)]->label);
    loss -= z(i, y) - zmax - std::log(sum);
    dz.row(i) = e / sum;
    dz(i, y) -= 1.0;
  }
  loss /= static_cast<double>(bsz);
  dz /= static_cast<double>(bsz);

  Eigen::MatrixXd dh = dz * model.w2();
  dh = (hpre.array() > 0.0).select(dh, 0.0);
  Eigen::MatrixXd dm = dh * model.w1();
  dm = (mpre.array() > 0.0).select(dm, 0.0);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.params().size());
  Eigen::Map<Eigen::MatrixXd> dwc(grad.data(), CnnModel::kKernels, CnnModel::kKernelLen);
  Eigen::Map<Eigen::VectorXd> dbc(grad.data() + CnnModel::kKernels * CnnModel::kKernelLen, CnnModel::kKernels);
  for (Eigen::Index i = 0; i < bsz; ++i) {
    const Eigen::MatrixXd& x = batch[static_cast<size_t>(i)]->values;
    Eigen::Index p = 0;
    for (int k = 0; k < CnnModel::kKernels; ++k)
      for (int t = 0; t < ot; ++t)
        for (int f = 0; f < kNumKpiColumns; ++f) {
          double g = dm(i, p++);
          if (g == 0.0) continue;
          for (int j = 0; j < CnnModel::kKernelLen; ++j) dwc(k, j) += g * x(t + j, f);
          dbc[k] += g;
        }
  }
  Eigen::Map<Eigen::MatrixXd>(grad.data() + model.off_w1(), CnnModel::kHidden, fdim) = dh.transpose() * m;
  Eigen::Map<Eigen::VectorXd>(grad.data() + model.off_b1(), CnnModel::kHidden) = dh.colwise().sum().transpose();
  Eigen::Map<Eigen::MatrixXd>(grad.data() + model.off_w2(), kNumClasses, CnnModel::kHidden) = dz.transpose() * h;
  Eigen::Map<Eigen::VectorXd>(grad.data() + model.off_b2(), kNumClasses) = dz.colwise().sum().transpose();
  if (loss_out) *loss_out = loss;
  return grad;
}

namespace detail {

inline std::vector<size_t> balanced_indices(const std::vector<Window>& windows, std::mt19937_64& rng) {
  std::array<std::vector<size_t>, kNumClasses> per_class;
  for (size_t i = 0; i < windows.size(); ++i)
    per_class[static_cast<size_t>(windows[i].label)].push_back(i);
  size_t smallest = std::numeric_limits<size_t>::max();
  for (const auto& v : per_class)
    if (!v.empty()) smallest = std::min(smallest, v.size());
  std::vector<size_t> out;
  for (auto& v : per_class) {
    std::shuffle(v.begin(), v.end(), rng);
    v.resize(std::min(v.size(), smallest));
    out.insert(out.end(), v.begin(), v.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Adam + plateau lr schedule + early stopping on an internal validation
// split. Deterministic for a fixed seed.
inline CnnModel train_cnn(const std::vector<Window>& train_windows, int t_size, const CnnHyperparams& hp) {
  hp.validate();
  if (train_windows.empty()) throw std::invalid_argument("train_cnn: empty training set");
  {
    std::array<bool, kNumClasses> seen{};
    for (const Window& w : train_windows) seen[static_cast<size_t>(w.label)] = true;
    if (std::count(seen.begin(), seen.end(), true) < 2)
      throw std::invalid_argument("train_cnn: need at least two classes");
  }
  for (const Window& w : train_windows)
    if (w.values.rows() != t_size || w.values.cols() != kNumKpiColumns)
      throw std::invalid_argument("train_cnn: window shape mismatch");

  auto rng = make_rng(hp.seed, {0xC2u});
  std::vector<size_t> idx;
  if (hp.balance)
    idx = detail::balanced_indices(train_windows, rng);
  else {
    idx.resize(train_windows.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
  }
  std::shuffle(idx.begin(), idx.end(), rng);
  size_t n_val = std::max<size_t>(1, static_cast<size_t>(std::llround(hp.val_fraction * static_cast<double>(idx.size()))));
  if (n_val >= idx.size()) n_val = idx.size() - 1;
  std::vector<size_t> val_idx(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  idx.resize(idx.size() - n_val);

  CnnModel model(t_size);
  model.init_weights(hp.seed);
  Adam opt;
  opt.lr = hp.lr;
  opt.init(model.params().size());

  std::vector<const Window*> val_batch;
  for (size_t i : val_idx) val_batch.push_back(&train_windows[i]);

  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_params = model.params();
  int stagnant = 0;
  for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(hp.minibatch)) {
      size_t stop = std::min(idx.size(), start + static_cast<size_t>(hp.minibatch));
      std::vector<const Window*> batch;
      batch.reserve(stop - start);
      for (size_t i = start; i < stop; ++i) batch.push_back(&train_windows[idx[i]]);
      double loss = 0.0;
      Eigen::VectorXd grad = cnn_loss_grad(model, batch, &loss);
      if (!std::isfinite(loss) || !all_finite(grad))
        throw std::runtime_error("train_cnn: non-finite loss at epoch " + std::to_string(epoch));
      opt.update(model.params(), grad);
    }
    double val_loss = cnn_loss(model, val_batch);
    if (val_loss < best_val - hp.plateau_min_delta) {
      best_val = val_loss;
      best_params = model.params();
      stagnant = 0;
    } else {
      ++stagnant;
      if (stagnant >= hp.early_stop_epochs) break;
      if (stagnant % hp.plateau_epochs == 0 && opt.lr > hp.lr_floor)
        opt.lr = std::max(hp.lr_floor, opt.lr * hp.lr_factor);
    }
  }
  model.params() = best_params;
  return model;
}

inline std::pair<TrafficClass, Eigen::VectorXd> classify(const CnnModel& model, const Window& w) {
  Eigen::VectorXd lp = model.log_probs(w.values);
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (lp[c] > lp[best]) best = c;
  return {static_cast<TrafficClass>(best), lp};
}

struct ClassifierMetrics {
  double accuracy = 0.0;
  std::array<double, kNumClasses> per_class{};  // -1 when the class is absent
  std::array<std::array<int64_t, kNumClasses>, kNumClasses> confusion{};  // [truth][predicted]
  int64_t n = 0;
  double mean_inference_ms = 0.0;
};

// With ITR the filter acts as a gate in front of the model: idle windows are
// declared ctrl without invoking it, the rest are classified as usual. Metrics
// cover every window either way; inference time covers only model calls.
inline ClassifierMetrics evaluate(const CnnModel& model, const std::vector<Window>& test, bool with_itr,
                                  double itr_threshold = 0.0) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  ClassifierMetrics met;
  met.n = static_cast<int64_t>(test.size());
  int64_t correct = 0;
  int64_t n_model = 0;
  double model_ms = 0.0;
  for (const Window& w : test) {
    TrafficClass pred;
    if (with_itr && !window_active(w, itr_threshold)) {
      pred = TrafficClass::ctrl;
    } else {
      auto start = std::chrono::steady_clock::now();
      pred = classify(model, w).first;
      auto stop = std::chrono::steady_clock::now();
      model_ms += std::chrono::duration<double, std::milli>(stop - start).count();
      ++n_model;
    }
    met.confusion[static_cast<size_t>(w.label)][static_cast<size_t>(pred)]++;
    if (pred == w.label) ++correct;
  }
  if (n_model == 0) throw std::invalid_argument("evaluate: no windows left to score");
  met.mean_inference_ms = model_ms / static_cast<double>(n_model);
  met.accuracy = static_cast<double>(correct) / static_cast<double>(met.n);
  for (int c = 0; c < kNumClasses; ++c) {
    int64_t row = 0;
    for (int p = 0; p < kNumClasses; ++p) row += met.confusion[static_cast<size_t>(c)][static_cast<size_t>(p)];
    met.per_class[static_cast<size_t>(c)] =
        row ? static_cast<double>(met.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)]) / static_cast<double>(row)
            : -1.0;
  }
  return met;
}

inline void save_model(const CnnModel& model, const std::string& path) {
  BinaryWriter w(path);
  w.u32(0x5342434Du);  // "SBCM"
  w.u32(1);
  w.i32(model.t_size());
  if (model.norm().min.size() == kNumKpiColumns) {
    w.u8(1);
    w.f64_array(model.norm().min.data(), kNumKpiColumns);
    w.f64_array(model.norm().max.data(), kNumKpiColumns);
  } else {
    w.u8(0);
  }
  w.u64(static_cast<uint64_t>(model.params().size()));
  w.f64_array(model.params().data(), static_cast<size_t>(model.params().size()));
  w.finish();
}

inline CnnModel load_model(const std::string& path) {
  BinaryReader r(path);
  if (r.u32() != 0x5342434Du) throw std::runtime_error("not a model file: " + path);
  if (r.u32() != 1) throw std::runtime_error("unsupported model version: " + path);
  CnnModel model(r.i32());
  if (r.u8()) {
    model.norm().min.resize(kNumKpiColumns);
    model.norm().max.resize(kNumKpiColumns);
    r.f64_array(model.norm().min.data(), kNumKpiColumns);
    r.f64_array(model.norm().max.data(), kNumKpiColumns);
  }
  uint64_t n = r.u64();
  if (n != static_cast<uint64_t>(model.params().size())) throw std::runtime_error("model parameter count mismatch");
  r.f64_array(model.params().data(), static_cast<size_t>(n));
  return model;
}

// ---- labeled dataset loading ----

struct LabeledFile {
  std::string path;
  TrafficClass label;
};

// Manifest: directory containing KPI CSVs plus labels.csv with `file,label`
// rows (label one of mmtc/urllc/embb/ctrl).
inline std::vector<LabeledFile> read_manifest(const std::string& dir) {
  namespace fs = std::filesystem;
  fs::path labels = fs::path(dir) / "labels.csv";
  std::ifstream in(labels);
  if (!in) throw std::runtime_error("cannot open manifest: " + labels.string());
  std::vector<LabeledFile> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("file,", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("bad manifest line: " + line);
    std::string file = line.substr(0, comma);
    std::string label = line.substr(comma + 1);
    out.push_back({(fs::path(dir) / file).string(), class_from_name(label)});
  }
  if (out.empty()) throw std::runtime_error("empty manifest: " + labels.string());
  return out;
}

// Windows for every UE stream of one labeled KPI file. Optional per-class
// reservoir caps keep memory bounded on big datasets.
inline std::vector<Window> windows_from_file(const LabeledFile& lf, int t_size) {
  auto records = read_kpi_csv(lf.path);
  std::map<int, std::vector<KpiRecord>> by_ue;
  for (auto& r : records) by_ue[r.ue_id].push_back(std::move(r));
  std::vector<Window> out;
  for (auto& [ue, stream] : by_ue) {
    auto ws = build_windows(stream, t_size, lf.label);
    out.insert(out.end(), std::make_move_iterator(ws.begin()), std::make_move_iterator(ws.end()));
  }
  return out;
}

// Stratified trial-level split so no trace chunk straddles train and test.
inline std::pair<std::vector<LabeledFile>, std::vector<LabeledFile>> split_files(const std::vector<LabeledFile>& files,
                                                                                 double train_ratio, uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw std::invalid_argument("train_ratio must be in (0,1)");
  std::array<std::vector<size_t>, kNumClasses> per_class;
  for (size_t i = 0; i < files.size(); ++i) per_class[static_cast<size_t>(files[i].label)].push_back(i);
  auto rng = make_rng(seed, {0xC4u});
  std::pair<std::vector<LabeledFile>, std::vector<LabeledFile>> out;
  for (auto& v : per_class) {
    if (v.empty()) continue;
    std::shuffle(v.begin(), v.end(), rng);
    size_t n_train = static_cast<size_t>(std::llround(train_ratio * static_cast<double>(v.size())));
    n_train = std::clamp<size_t>(n_train, v.size() > 1 ? 1 : 0, v.size() > 1 ? v.size() - 1 : v.size());
    for (size_t k = 0; k < v.size(); ++k) (k < n_train ? out.first : out.second).push_back(files[v[k]]);
  }
  return out;
}

class WindowReservoir {
 public:
  WindowReservoir(size_t cap_per_class, uint64_t seed) : cap_(cap_per_class), rng_(make_rng(seed, {0xC3u})) {}

  void add(Window w) {
    auto& bucket = buckets_[static_cast<size_t>(w.label)];
    auto& seen = seen_[static_cast<size_t>(w.label)];
    ++seen;
    if (cap_ == 0 || bucket.size() < cap_) {
      bucket.push_back(std::move(w));
    } else {
      std::uniform_int_distribution<uint64_t> d(0, seen - 1);
      uint64_t j = d(rng_);
      if (j < cap_) bucket[static_cast<size_t>(j)] = std::move(w);
    }
  }

  std::vector<Window> take() {
    std::vector<Window> out;
    for (auto& b : buckets_) {
      out.insert(out.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
      b.clear();
    }
    return out;
  }

 private:
  size_t cap_;
  std::array<std::vector<Window>, kNumClasses> buckets_;
  std::array<uint64_t, kNumClasses> seen_{};
  std::mt19937_64 rng_;
};

}  // namespace slicebench
