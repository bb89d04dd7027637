#include "adaptts/classifier.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "adaptts/errors.hpp"
#include "adaptts/rng.hpp"

using nlohmann::json;

namespace adaptts {

namespace {

constexpr double kProbFloor = 1e-12;

// theta layout: [W1 (h x KT) | b1 (h) | W2 (L x h) | b2 (L)], column-major.
struct ParamView {
  Eigen::Map<const Eigen::MatrixXd> w1;
  Eigen::Map<const Eigen::VectorXd> b1;
  Eigen::Map<const Eigen::MatrixXd> w2;
  Eigen::Map<const Eigen::VectorXd> b2;
};

ParamView view(const Architecture& a, const Eigen::VectorXd& theta) {
  const int in = a.input_dim(), h = a.hidden, l = a.label_count;
  const double* p = theta.data();
  return ParamView{
      {p, h, in}, {p + h * in, h}, {p + h * in + h, l, h},
      {p + h * in + h + l * h, l}};
}

struct ParamViewMut {
  Eigen::Map<Eigen::MatrixXd> w1;
  Eigen::Map<Eigen::VectorXd> b1;
  Eigen::Map<Eigen::MatrixXd> w2;
  Eigen::Map<Eigen::VectorXd> b2;
};

ParamViewMut view_mut(const Architecture& a, Eigen::VectorXd& theta) {
  const int in = a.input_dim(), h = a.hidden, l = a.label_count;
  double* p = theta.data();
  return ParamViewMut{
      {p, h, in}, {p + h * in, h}, {p + h * in + h, l, h},
      {p + h * in + h + l * h, l}};
}

Eigen::VectorXd flatten(const Architecture& a, const TimeSeries& x) {
  if (x.rows() != a.channels || x.cols() != a.length)
    throw std::invalid_argument("forward: input shape " +
                                std::to_string(x.rows()) + "x" +
                                std::to_string(x.cols()) + " does not match " +
                                std::to_string(a.channels) + "x" +
                                std::to_string(a.length));
  return Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd z = (logits.array() - logits.maxCoeff()).exp();
  return z / z.sum();
}

}  // namespace

Batch make_batch(const DomainDataset& domain, const std::vector<Label>& labels) {
  if (domain.size() != labels.size())
    throw PairingError("make_batch: series/label count mismatch");
  Batch b;
  b.reserve(domain.size());
  for (std::size_t i = 0; i < domain.size(); ++i)
    b.push_back({&domain.series[i], labels[i]});
  return b;
}

ClassifierState init_classifier(const Architecture& arch, std::uint64_t seed,
                                InitScheme scheme) {
  if (arch.channels < 1 || arch.length < 1 || arch.hidden < 1 ||
      arch.label_count < 1)
    throw ConfigError("init_classifier: invalid architecture");
  ClassifierState s;
  s.arch = arch;
  s.rng_seed = seed;
  s.theta = Eigen::VectorXd::Zero(arch.parameter_count());
  auto rng = make_rng(seed, 0x1417);
  auto p = view_mut(arch, s.theta);
  if (scheme == InitScheme::UniformZeroOne) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = uni(rng);
    for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = uni(rng);
  } else {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(arch.input_dim()));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(arch.hidden));
    std::uniform_real_distribution<double> u1(-s1, s1), u2(-s2, s2);
    for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = u1(rng);
    for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = u2(rng);
  }
  // biases stay zero
  return s;
}

Prediction forward(const ClassifierState& state, const TimeSeries& x) {
  auto p = view(state.arch, state.theta);
  const Eigen::VectorXd in = flatten(state.arch, x);
  const Eigen::VectorXd hidden = ((p.w1 * in + p.b1).array().tanh()).matrix();
  return softmax(p.w2 * hidden + p.b2);
}

double loss(const ClassifierState& state, const Batch& batch) {
  if (batch.empty()) throw std::domain_error("loss: empty batch");
  double acc = 0.0;
  for (const auto& ex : batch) {
    const Prediction prob = forward(state, *ex.series);
    acc += -std::log(std::max(prob(ex.label), kProbFloor));
  }
  return acc / static_cast<double>(batch.size());
}

void loss_and_gradient(const ClassifierState& state, const Batch& batch,
                       double& loss_out, Eigen::VectorXd& grad_out) {
  if (batch.empty()) throw std::domain_error("gradient: empty batch");
  const Architecture& a = state.arch;
  auto p = view(a, state.theta);
  grad_out = Eigen::VectorXd::Zero(state.theta.size());
  auto g = view_mut(a, grad_out);
  double acc = 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (const auto& ex : batch) {
    const Eigen::VectorXd in = flatten(a, *ex.series);
    const Eigen::VectorXd pre = p.w1 * in + p.b1;
    const Eigen::VectorXd hidden = pre.array().tanh().matrix();
    const Eigen::VectorXd prob = softmax(p.w2 * hidden + p.b2);
    acc += -std::log(std::max(prob(ex.label), kProbFloor));

    // d(-log p_c)/dlogits = prob - onehot(c)
    Eigen::VectorXd dlogits = prob;
    dlogits(ex.label) -= 1.0;
    g.w2 += inv_n * dlogits * hidden.transpose();
    g.b2 += inv_n * dlogits;
    const Eigen::VectorXd dhidden =
        (p.w2.transpose() * dlogits).array() * (1.0 - hidden.array().square());
    g.w1 += inv_n * dhidden * in.transpose();
    g.b1 += inv_n * dhidden;
  }
  loss_out = acc * inv_n;
}

Eigen::VectorXd gradient(const ClassifierState& state, const Batch& batch) {
  double l;
  Eigen::VectorXd g;
  loss_and_gradient(state, batch, l, g);
  return g;
}

ClassifierState step(const ClassifierState& state, const Eigen::VectorXd& grad,
                     double lr) {
  if (grad.size() != state.theta.size())
    throw std::invalid_argument("step: gradient length mismatch");
  if (!grad.allFinite()) throw NumericError("step: non-finite gradient");
  ClassifierState next = state;
  next.theta = state.theta - lr * grad;
  return next;
}

int predict_label(const ClassifierState& state, const TimeSeries& x) {
  const Prediction prob = forward(state, x);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < prob.size(); ++i)
    if (prob(i) > prob(best)) best = i;  // ties keep the lowest label id
  return static_cast<int>(best);
}

void save_checkpoint(const ClassifierState& state,
                     const std::filesystem::path& file) {
  json j;
  j["format"] = "adaptts-checkpoint-v1";
  j["channels"] = state.arch.channels;
  j["length"] = state.arch.length;
  j["hidden"] = state.arch.hidden;
  j["label_count"] = state.arch.label_count;
  j["rng_seed"] = state.rng_seed;
  j["theta"] = std::vector<double>(state.theta.data(),
                                   state.theta.data() + state.theta.size());
  std::ofstream out(file);
  if (!out) throw IngestionError("cannot write checkpoint " + file.string());
  out << j.dump() << '\n';
}

ClassifierState load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IngestionError("cannot open checkpoint " + file.string());
  json j;
  in >> j;
  if (j.value("format", "") != "adaptts-checkpoint-v1")
    throw IngestionError(file.string() + ": unknown checkpoint format");
  ClassifierState s;
  s.arch.channels = j.at("channels").get<int>();
  s.arch.length = j.at("length").get<int>();
  s.arch.hidden = j.at("hidden").get<int>();
  s.arch.label_count = j.at("label_count").get<int>();
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  auto t = j.at("theta").get<std::vector<double>>();
  if (static_cast<int>(t.size()) != s.arch.parameter_count())
    throw IngestionError(file.string() + ": theta length mismatch");
  s.theta = Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
  return s;
}

}  // namespace adaptts
