#include "multibox/network.hpp"

#include <bit>
#include <cstdio>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "multibox/error.hpp"

namespace multibox {

namespace {

std::span<double> view(Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> view(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Eigen::MatrixXd relu(const Eigen::MatrixXd& pre) { return pre.cwiseMax(0.0); }

Eigen::MatrixXd affine(const Dense& layer, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = layer.weight * x;
  y.colwise() += layer.bias;
  return y;
}

void accumulate(Dense& grad, const Eigen::MatrixXd& upstream, const Eigen::MatrixXd& input) {
  grad.weight.noalias() += upstream * input.transpose();
  grad.bias.noalias() += upstream.rowwise().sum();
}

void check_input(int expected, std::size_t got) {
  if (got != static_cast<std::size_t>(expected)) {
    throw Error(ErrorCode::ShapeMismatch, "network expects " + std::to_string(expected) +
                                              " inputs, got " + std::to_string(got));
  }
}

}  // namespace

Dense Dense::zeros(int out, int in) {
  return {Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)};
}

Dense Dense::glorot(int out, int in, Rng& rng) {
  Dense d = zeros(out, in);
  const double a = std::sqrt(6.0 / (in + out));
  // Row-major fill order so the draw sequence does not depend on storage.
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) d.weight(r, c) = rng.uniform(-a, a);
  }
  return d;
}

ModelParams ModelParams::zeros(const LocalizerTopology& t) {
  ModelParams p;
  p.topology = t;
  p.layer1 = Dense::zeros(t.hidden1, t.input_dim());
  p.layer2 = Dense::zeros(t.hidden2, t.hidden1);
  p.loc_head = Dense::zeros(4 * t.num_slots, t.hidden2);
  p.conf_head = Dense::zeros(t.num_slots, t.hidden2);
  return p;
}

ModelParams ModelParams::init(const LocalizerTopology& t, std::uint64_t seed) {
  if (t.input_side < 1 || t.hidden1 < 1 || t.hidden2 < 1 || t.num_slots < 1) {
    throw Error(ErrorCode::InvalidConfig, "localizer topology dimensions must be positive");
  }
  Rng rng(seed);
  ModelParams p;
  p.topology = t;
  p.seed = seed;
  p.layer1 = Dense::glorot(t.hidden1, t.input_dim(), rng);
  p.layer2 = Dense::glorot(t.hidden2, t.hidden1, rng);
  p.loc_head = Dense::glorot(4 * t.num_slots, t.hidden2, rng);
  p.conf_head = Dense::glorot(t.num_slots, t.hidden2, rng);
  return p;
}

std::vector<std::span<double>> ModelParams::tensors() {
  return {view(layer1.weight), view(layer1.bias), view(layer2.weight), view(layer2.bias),
          view(loc_head.weight), view(loc_head.bias), view(conf_head.weight), view(conf_head.bias)};
}

std::vector<std::span<const double>> ModelParams::tensors() const {
  auto spans = const_cast<ModelParams*>(this)->tensors();
  return {spans.begin(), spans.end()};
}

ClassifierParams ClassifierParams::zeros(const ClassifierTopology& t) {
  ClassifierParams p;
  p.topology = t;
  p.layer1 = Dense::zeros(t.hidden1, t.input_dim());
  p.layer2 = Dense::zeros(t.hidden2, t.hidden1);
  p.out = Dense::zeros(t.outputs(), t.hidden2);
  return p;
}

ClassifierParams ClassifierParams::init(const ClassifierTopology& t, std::uint64_t seed) {
  if (t.input_side < 1 || t.hidden1 < 1 || t.hidden2 < 1 || t.num_classes < 1) {
    throw Error(ErrorCode::InvalidConfig, "classifier topology dimensions must be positive");
  }
  Rng rng(seed);
  ClassifierParams p;
  p.topology = t;
  p.seed = seed;
  p.layer1 = Dense::glorot(t.hidden1, t.input_dim(), rng);
  p.layer2 = Dense::glorot(t.hidden2, t.hidden1, rng);
  p.out = Dense::glorot(t.outputs(), t.hidden2, rng);
  return p;
}

std::vector<std::span<double>> ClassifierParams::tensors() {
  return {view(layer1.weight), view(layer1.bias), view(layer2.weight),
          view(layer2.bias),   view(out.weight),    view(out.bias)};
}

std::vector<std::span<const double>> ClassifierParams::tensors() const {
  auto spans = const_cast<ClassifierParams*>(this)->tensors();
  return {spans.begin(), spans.end()};
}

LocalizerActivations forward_batch(const ModelParams& params, const Eigen::MatrixXd& inputs) {
  check_input(params.topology.input_dim(), static_cast<std::size_t>(inputs.rows()));
  LocalizerActivations a;
  a.hidden1 = relu(affine(params.layer1, inputs));
  a.hidden2 = relu(affine(params.layer2, a.hidden1));
  a.residuals = affine(params.loc_head, a.hidden2);
  a.logits = affine(params.conf_head, a.hidden2);
  return a;
}

void backward_batch(const ModelParams& params, const Eigen::MatrixXd& inputs,
                    const LocalizerActivations& acts, const Eigen::MatrixXd& grad_residuals,
                    const Eigen::MatrixXd& grad_logits, ModelParams& grads) {
  const Eigen::MatrixXd& grad_out = grad_residuals;
  accumulate(grads.loc_head, grad_out, acts.hidden2);
  accumulate(grads.conf_head, grad_logits, acts.hidden2);

  Eigen::MatrixXd d2 = params.loc_head.weight.transpose() * grad_out;
  d2.noalias() += params.conf_head.weight.transpose() * grad_logits;
  d2 = (acts.hidden2.array() > 0.0).select(d2, 0.0);
  accumulate(grads.layer2, d2, acts.hidden1);

  Eigen::MatrixXd d1 = params.layer2.weight.transpose() * d2;
  d1 = (acts.hidden1.array() > 0.0).select(d1, 0.0);
  accumulate(grads.layer1, d1, inputs);
}

PredictionSet predictions_from(const LocalizerActivations& acts, Eigen::Index col,
                               const PriorSet& priors) {
  const auto k = static_cast<std::size_t>(acts.logits.rows());
  if (priors.size() != k) {
    throw Error(ErrorCode::ShapeMismatch, "model has " + std::to_string(k) + " slots but " +
                                              std::to_string(priors.size()) + " priors were given");
  }
  std::vector<Vec4> locations(k);
  std::vector<double> logits(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto r = static_cast<Eigen::Index>(4 * i);
    locations[i] = apply_residual(priors.priors[i], {acts.residuals(r, col), acts.residuals(r + 1, col),
                                                     acts.residuals(r + 2, col), acts.residuals(r + 3, col)});
    logits[i] = acts.logits(static_cast<Eigen::Index>(i), col);
  }
  return PredictionSet::from_logits(std::move(locations), std::move(logits));
}

PredictionSet forward(const ModelParams& params, std::span<const double> crop_pixels,
                      const PriorSet& priors) {
  check_input(params.topology.input_dim(), crop_pixels.size());
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(crop_pixels.data(), crop_pixels.size(), 1);
  return predictions_from(forward_batch(params, x), 0, priors);
}

ModelParams backward(const ModelParams& params, std::span<const double> crop_pixels,
                     const LossReport& report) {
  check_input(params.topology.input_dim(), crop_pixels.size());
  const auto k = static_cast<std::size_t>(params.topology.num_slots);
  if (report.grad_logits.size() != k || report.grad_locations.size() != k) {
    throw Error(ErrorCode::ShapeMismatch, "loss report does not match the model's slot count");
  }
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(crop_pixels.data(), crop_pixels.size(), 1);
  const LocalizerActivations acts = forward_batch(params, x);
  Eigen::MatrixXd g_res(4 * k, 1), g_logit(k, 1);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t c = 0; c < 4; ++c) g_res(4 * i + c, 0) = report.grad_locations[i][c];
    g_logit(i, 0) = report.grad_logits[i];
  }
  ModelParams grads = ModelParams::zeros(params.topology);
  backward_batch(params, x, acts, g_res, g_logit, grads);
  return grads;
}

namespace {

struct ClassifierActivations {
  Eigen::MatrixXd hidden1, hidden2, probs;
};

ClassifierActivations classifier_forward(const ClassifierParams& params, const Eigen::MatrixXd& inputs) {
  check_input(params.topology.input_dim(), static_cast<std::size_t>(inputs.rows()));
  ClassifierActivations a;
  a.hidden1 = relu(affine(params.layer1, inputs));
  a.hidden2 = relu(affine(params.layer2, a.hidden1));
  Eigen::MatrixXd logits = affine(params.out, a.hidden2);
  a.probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double top = logits.col(c).maxCoeff();
    Eigen::VectorXd e = (logits.col(c).array() - top).exp();
    a.probs.col(c) = e / e.sum();
  }
  return a;
}

}  // namespace

Eigen::MatrixXd classify_batch(const ClassifierParams& params, const Eigen::MatrixXd& inputs) {
  return classifier_forward(params, inputs).probs;
}

std::vector<double> classify_crop(const ClassifierParams& params, std::span<const double> crop_pixels) {
  check_input(params.topology.input_dim(), crop_pixels.size());
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(crop_pixels.data(), crop_pixels.size(), 1);
  const Eigen::MatrixXd p = classify_batch(params, x);
  return {p.data(), p.data() + p.size()};
}

double classifier_loss(const ClassifierParams& params, const Eigen::MatrixXd& inputs,
                       std::span<const int> labels, ClassifierParams* grads) {
  if (labels.size() != static_cast<std::size_t>(inputs.cols())) {
    throw Error(ErrorCode::ShapeMismatch, "one label per input column required");
  }
  const int outputs = params.topology.outputs();
  for (int label : labels) {
    if (label < 0 || label >= outputs) {
      throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(label) + " outside [0, " +
                                                  std::to_string(outputs - 1) + "]");
    }
  }
  const ClassifierActivations a = classifier_forward(params, inputs);
  const double n = static_cast<double>(labels.size());
  double loss = 0.0;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    loss -= std::log(std::max(a.probs(labels[c], static_cast<Eigen::Index>(c)), 1e-300));
  }
  if (grads != nullptr) {
    Eigen::MatrixXd d_out = a.probs;
    for (std::size_t c = 0; c < labels.size(); ++c) d_out(labels[c], static_cast<Eigen::Index>(c)) -= 1.0;
    d_out /= n;
    accumulate(grads->out, d_out, a.hidden2);
    Eigen::MatrixXd d2 = params.out.weight.transpose() * d_out;
    d2 = (a.hidden2.array() > 0.0).select(d2, 0.0);
    accumulate(grads->layer2, d2, a.hidden1);
    Eigen::MatrixXd d1 = params.layer2.weight.transpose() * d2;
    d1 = (a.hidden1.array() > 0.0).select(d1, 0.0);
    accumulate(grads->layer1, d1, inputs);
  }
  return loss / n;
}

AdagradState<ModelParams> make_adagrad(const ModelParams& params, double epsilon) {
  return {ModelParams::zeros(params.topology), epsilon};
}

AdagradState<ClassifierParams> make_adagrad(const ClassifierParams& params, double epsilon) {
  return {ClassifierParams::zeros(params.topology), epsilon};
}

void adagrad_update(std::span<const std::span<double>> params,
                    std::span<const std::span<double>> accumulators,
                    std::span<const std::span<const double>> grads, double lr, double epsilon) {
  if (params.size() != accumulators.size() || params.size() != grads.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adagrad tensor lists differ in length");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    auto acc = accumulators[t];
    auto g = grads[t];
    if (p.size() != acc.size() || p.size() != g.size()) {
      throw Error(ErrorCode::ShapeMismatch, "adagrad tensor shapes differ");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc[i] += g[i] * g[i];
      p[i] -= lr * g[i] / (std::sqrt(acc[i]) + epsilon);
    }
  }
}

void adagrad_step(ModelParams& params, AdagradState<ModelParams>& state, const ModelParams& grads,
                  double lr) {
  adagrad_update(params.tensors(), state.accumulators.tensors(), grads.tensors(), lr, state.epsilon);
}

void adagrad_step(ClassifierParams& params, AdagradState<ClassifierParams>& state,
                  const ClassifierParams& grads, double lr) {
  adagrad_update(params.tensors(), state.accumulators.tensors(), grads.tensors(), lr, state.epsilon);
}

// Checkpoints: one text header line, then every tensor as little-endian
// IEEE-754 doubles in tensors() order (weights column-major).

namespace {

void write_doubles(std::ostream& out, std::span<const double> values) {
  for (double v : values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

void read_doubles(std::istream& in, std::span<double> values) {
  for (double& v : values) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
      throw Error(ErrorCode::IoError, "checkpoint is truncated");
    }
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
}

std::map<std::string, std::string> read_header(std::istream& in, const std::string& kind) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "checkpoint is empty");
  std::istringstream hs(line);
  std::string magic, version;
  hs >> magic >> version;
  if (magic != "multibox-ckpt" || version != "v1") {
    throw Error(ErrorCode::IoError, "not a multibox-ckpt v1 file");
  }
  std::map<std::string, std::string> fields;
  std::string token;
  while (hs >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::IoError, "bad checkpoint header field " + token);
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  if (fields["kind"] != kind) {
    throw Error(ErrorCode::IoError, "checkpoint holds a " + fields["kind"] + ", expected " + kind);
  }
  return fields;
}

int int_field(std::map<std::string, std::string>& fields, const std::string& key) {
  try {
    return std::stoi(fields.at(key));
  } catch (const std::exception&) {
    throw Error(ErrorCode::IoError, "checkpoint header lacks a valid " + key);
  }
}

std::uint64_t seed_field(std::map<std::string, std::string>& fields) {
  try {
    return std::stoull(fields.at("seed"));
  } catch (const std::exception&) {
    throw Error(ErrorCode::IoError, "checkpoint header lacks a valid seed");
  }
}

template <typename Params>
void write_tensors(std::ostream& out, const Params& params) {
  for (auto t : params.tensors()) write_doubles(out, t);
  if (!out) throw Error(ErrorCode::IoError, "checkpoint write failed");
}

template <typename Params>
void read_tensors(std::istream& in, Params& params) {
  for (auto t : params.tensors()) read_doubles(in, t);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::IoError, "checkpoint has trailing bytes");
  }
}

template <typename Params>
void save_to(const std::string& path, const Params& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_checkpoint(out, params);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& p) {
  const auto& t = p.topology;
  out << "multibox-ckpt v1 kind=localizer input_side=" << t.input_side << " hidden1=" << t.hidden1
      << " hidden2=" << t.hidden2 << " k=" << t.num_slots << " seed=" << p.seed << '\n';
  write_tensors(out, p);
}

void write_checkpoint(std::ostream& out, const ClassifierParams& p) {
  const auto& t = p.topology;
  out << "multibox-ckpt v1 kind=classifier input_side=" << t.input_side << " hidden1=" << t.hidden1
      << " hidden2=" << t.hidden2 << " classes=" << t.num_classes << " seed=" << p.seed << '\n';
  write_tensors(out, p);
}

ModelParams read_localizer(std::istream& in) {
  auto f = read_header(in, "localizer");
  LocalizerTopology t{int_field(f, "input_side"), int_field(f, "hidden1"), int_field(f, "hidden2"),
                      int_field(f, "k")};
  if (t.input_side < 1 || t.hidden1 < 1 || t.hidden2 < 1 || t.num_slots < 1) {
    throw Error(ErrorCode::IoError, "checkpoint topology is invalid");
  }
  ModelParams p = ModelParams::zeros(t);
  p.seed = seed_field(f);
  read_tensors(in, p);
  return p;
}

ClassifierParams read_classifier(std::istream& in) {
  auto f = read_header(in, "classifier");
  ClassifierTopology t{int_field(f, "input_side"), int_field(f, "hidden1"), int_field(f, "hidden2"),
                       int_field(f, "classes")};
  if (t.input_side < 1 || t.hidden1 < 1 || t.hidden2 < 1 || t.num_classes < 1) {
    throw Error(ErrorCode::IoError, "checkpoint topology is invalid");
  }
  ClassifierParams p = ClassifierParams::zeros(t);
  p.seed = seed_field(f);
  read_tensors(in, p);
  return p;
}

void save_checkpoint(const std::string& path, const ModelParams& params) { save_to(path, params); }
void save_checkpoint(const std::string& path, const ClassifierParams& params) { save_to(path, params); }

ModelParams load_localizer(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  return read_localizer(in);
}

ClassifierParams load_classifier(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  return read_classifier(in);
}

}  // namespace multibox
