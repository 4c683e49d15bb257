#include "rulkit/cnn.hpp"

#include "rulkit/rng.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

namespace rulkit::cnn {

int conv_output_length(int input_length, int kernel, int stride) {
  if (kernel < 1 || stride < 1 || input_length < kernel)
    throw Error("conv: kernel must fit the input and stride must be >= 1");
  return (input_length - kernel) / stride + 1;
}

ShapeChain shape_chain(const Topology& t) {
  ShapeChain s;
  s.input_length = t.input_length;
  s.conv1_length = conv_output_length(t.input_length, t.conv1_kernel, t.conv1_stride);
  s.conv1_channels = t.conv1_filters;
  s.pool1_length = conv_output_length(s.conv1_length, t.pool_size, t.pool_stride);
  s.conv2_length = conv_output_length(s.pool1_length, t.conv2_kernel, t.conv2_stride);
  s.conv2_channels = t.conv2_filters;
  s.pool2_length = conv_output_length(s.conv2_length, t.pool_size, t.pool_stride);
  s.flat = s.pool2_length * t.conv2_filters;
  s.fc1 = t.fc1_units;
  return s;
}

namespace {

MatX glorot(int rows, int cols, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  MatX w(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) w(r, c) = rng.uniform(-limit, limit);
  return w;
}

// Patch matrix for a valid strided convolution: row m holds the input
// window starting at m*stride, taps concatenated channel-fastest.
MatX im2row(const Array3& input, int kernel, int stride, int out_len) {
  const int ch = static_cast<int>(input.cols());
  MatX x(out_len, kernel * ch);
  for (int m = 0; m < out_len; ++m)
    for (int k = 0; k < kernel; ++k)
      x.block(m, k * ch, 1, ch) = input.row(m * stride + k);
  return x;
}

VecX flatten(const Array3& x) {
  // Row-major order: index = t * channels + c.
  const int len = static_cast<int>(x.rows());
  const int ch = static_cast<int>(x.cols());
  VecX v(len * ch);
  for (int t = 0; t < len; ++t)
    for (int c = 0; c < ch; ++c) v[t * ch + c] = x(t, c);
  return v;
}

Array3 unflatten(const Eigen::Ref<const VecX>& v, int len, int ch) {
  Array3 x(len, ch);
  for (int t = 0; t < len; ++t)
    for (int c = 0; c < ch; ++c) x(t, c) = v[t * ch + c];
  return x;
}

}  // namespace

CnnModel make_model(const Topology& topo, std::uint64_t seed) {
  const ShapeChain chain = shape_chain(topo);
  Rng rng(seed);
  CnnModel m;
  m.topo = topo;

  m.conv1.kernel_size = topo.conv1_kernel;
  m.conv1.stride = topo.conv1_stride;
  m.conv1.weight = glorot(topo.conv1_kernel, topo.conv1_filters,
                          topo.conv1_kernel, topo.conv1_kernel * topo.conv1_filters,
                          rng);
  m.conv1.bias = VecX::Zero(topo.conv1_filters);

  m.conv2.kernel_size = topo.conv2_kernel;
  m.conv2.stride = topo.conv2_stride;
  m.conv2.weight = glorot(topo.conv2_kernel * topo.conv1_filters,
                          topo.conv2_filters,
                          topo.conv2_kernel * topo.conv1_filters,
                          topo.conv2_kernel * topo.conv2_filters, rng);
  m.conv2.bias = VecX::Zero(topo.conv2_filters);

  m.fc1.weight = glorot(chain.flat, topo.fc1_units, chain.flat, topo.fc1_units, rng);
  m.fc1.bias = VecX::Zero(topo.fc1_units);

  m.out.weight = glorot(topo.fc1_units, 1, topo.fc1_units, 1, rng);
  m.out.bias = VecX::Zero(1);
  return m;
}

Array3 conv_forward(const ConvLayer& layer, const Array3& input) {
  if (static_cast<int>(input.cols()) != layer.in_channels())
    throw Error("conv: input has " + std::to_string(input.cols()) +
                " channels, layer expects " +
                std::to_string(layer.in_channels()));
  const int out_len = conv_output_length(static_cast<int>(input.rows()),
                                         layer.kernel_size, layer.stride);
  const MatX x = im2row(input, layer.kernel_size, layer.stride, out_len);
  Array3 out = x * layer.weight;
  out.rowwise() += layer.bias.transpose();
  return out;
}

PoolResult maxpool_forward(const Array3& input, int size, int stride) {
  const int out_len =
      conv_output_length(static_cast<int>(input.rows()), size, stride);
  const int ch = static_cast<int>(input.cols());
  PoolResult r;
  r.output = Array3(out_len, ch);
  r.argmax = Eigen::MatrixXi(out_len, ch);
  for (int m = 0; m < out_len; ++m) {
    for (int c = 0; c < ch; ++c) {
      int best = m * stride;
      double value = input(best, c);
      for (int k = 1; k < size; ++k) {
        const int row = m * stride + k;
        if (input(row, c) > value) {
          value = input(row, c);
          best = row;
        }
      }
      r.output(m, c) = value;
      r.argmax(m, c) = best;
    }
  }
  return r;
}

namespace {

struct ForwardCache {
  Array3 z1, p1, z2, p2;
  Eigen::MatrixXi arg1, arg2;
  VecX flat, z3, a3;
  double z4 = 0.0;
  double y = 0.0;
};

ForwardCache run_forward(const CnnModel& m, const Array3& input) {
  ForwardCache c;
  c.z1 = conv_forward(m.conv1, input);
  PoolResult p1 = maxpool_forward(relu(c.z1), m.topo.pool_size, m.topo.pool_stride);
  c.p1 = std::move(p1.output);
  c.arg1 = std::move(p1.argmax);
  c.z2 = conv_forward(m.conv2, c.p1);
  PoolResult p2 = maxpool_forward(relu(c.z2), m.topo.pool_size, m.topo.pool_stride);
  c.p2 = std::move(p2.output);
  c.arg2 = std::move(p2.argmax);
  c.flat = flatten(c.p2);
  if (c.flat.size() != m.fc1.weight.rows())
    throw Error("forward: flatten size " + std::to_string(c.flat.size()) +
                " does not match dense layer input " +
                std::to_string(m.fc1.weight.rows()));
  c.z3 = m.fc1.weight.transpose() * c.flat + m.fc1.bias;
  c.a3 = c.z3.cwiseMax(0.0);
  c.z4 = (m.out.weight.transpose() * c.a3)(0) + m.out.bias(0);
  c.y = sigmoid(c.z4);
  return c;
}

Array3 standardized(const CnnModel& m, const Eigen::Ref<const ArrX>& samples) {
  if (static_cast<int>(samples.size()) != m.topo.input_length)
    throw Error("forward: snapshot has " + std::to_string(samples.size()) +
                " samples, model expects " +
                std::to_string(m.topo.input_length));
  Array3 x(samples.size(), 1);
  x.col(0) = ((samples - m.input_mean) / m.input_std).matrix();
  return x;
}

}  // namespace

double forward_std(const CnnModel& model, const Array3& input) {
  return run_forward(model, input).y;
}

double forward(const CnnModel& model, const Eigen::Ref<const ArrX>& samples) {
  return forward_std(model, standardized(model, samples));
}

double forward(const CnnModel& model, const VibrationSnapshot& snapshot) {
  return forward(model, snapshot.samples);
}

double mse_loss(const Eigen::Ref<const VecX>& predicted,
                const Eigen::Ref<const VecX>& labels) {
  if (predicted.size() != labels.size() || predicted.size() == 0)
    throw Error("mse: prediction and label lengths differ or are empty");
  return (labels - predicted).squaredNorm() / predicted.size();
}

Gradients zero_gradients(const CnnModel& m) {
  Gradients g;
  g.conv1_w = MatX::Zero(m.conv1.weight.rows(), m.conv1.weight.cols());
  g.conv1_b = VecX::Zero(m.conv1.bias.size());
  g.conv2_w = MatX::Zero(m.conv2.weight.rows(), m.conv2.weight.cols());
  g.conv2_b = VecX::Zero(m.conv2.bias.size());
  g.fc1_w = MatX::Zero(m.fc1.weight.rows(), m.fc1.weight.cols());
  g.fc1_b = VecX::Zero(m.fc1.bias.size());
  g.out_w = MatX::Zero(m.out.weight.rows(), m.out.weight.cols());
  g.out_b = VecX::Zero(m.out.bias.size());
  return g;
}

namespace {

// Gradient of one conv layer given the downstream dOut; optionally emits the
// gradient with respect to the layer input.
void conv_backward(const ConvLayer& layer, const Array3& input,
                   const Array3& d_out, MatX& d_weight, VecX& d_bias,
                   Array3* d_input) {
  const int out_len = static_cast<int>(d_out.rows());
  const int ch = static_cast<int>(input.cols());
  const MatX x = im2row(input, layer.kernel_size, layer.stride, out_len);
  d_weight.noalias() += x.transpose() * d_out;
  d_bias.noalias() += d_out.colwise().sum().transpose();
  if (d_input) {
    const MatX dx = d_out * layer.weight.transpose();
    d_input->setZero(input.rows(), input.cols());
    for (int m = 0; m < out_len; ++m)
      for (int k = 0; k < layer.kernel_size; ++k)
        d_input->row(m * layer.stride + k) += dx.block(m, k * ch, 1, ch);
  }
}

Array3 pool_backward(const Array3& d_out, const Eigen::MatrixXi& argmax,
                     int input_len) {
  Array3 d_in = Array3::Zero(input_len, d_out.cols());
  for (int m = 0; m < d_out.rows(); ++m)
    for (int c = 0; c < d_out.cols(); ++c)
      d_in(argmax(m, c), c) += d_out(m, c);
  return d_in;
}

}  // namespace

Gradients backward(const CnnModel& model, const std::vector<Array3>& inputs,
                   const Eigen::Ref<const VecX>& labels, VecX* predictions,
                   double* loss) {
  const int n = static_cast<int>(inputs.size());
  if (n == 0 || labels.size() != n)
    throw Error("backward: batch and label lengths differ or are empty");

  Gradients g = zero_gradients(model);
  VecX preds(n);
  for (int s = 0; s < n; ++s) {
    const ForwardCache c = run_forward(model, inputs[s]);
    preds[s] = c.y;

    const double dy = 2.0 * (c.y - labels[s]) / n;
    const double dz4 = dy * c.y * (1.0 - c.y);
    g.out_w.noalias() += c.a3 * dz4;
    g.out_b(0) += dz4;

    VecX dz3 = model.out.weight.col(0) * dz4;
    dz3 = dz3.cwiseProduct(
        (c.z3.array() > 0.0).cast<double>().matrix());
    g.fc1_w.noalias() += c.flat * dz3.transpose();
    g.fc1_b.noalias() += dz3;

    const VecX d_flat = model.fc1.weight * dz3;
    const Array3 d_p2 = unflatten(d_flat, static_cast<int>(c.p2.rows()),
                                  static_cast<int>(c.p2.cols()));
    Array3 d_a2 = pool_backward(d_p2, c.arg2, static_cast<int>(c.z2.rows()));
    const Array3 d_z2 =
        d_a2.cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());

    Array3 d_p1;
    conv_backward(model.conv2, c.p1, d_z2, g.conv2_w, g.conv2_b, &d_p1);
    Array3 d_a1 = pool_backward(d_p1, c.arg1, static_cast<int>(c.z1.rows()));
    const Array3 d_z1 =
        d_a1.cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
    conv_backward(model.conv1, inputs[s], d_z1, g.conv1_w, g.conv1_b, nullptr);
  }
  if (predictions) *predictions = preds;
  if (loss) *loss = mse_loss(preds, labels);
  return g;
}

AdamState make_adam_state(const CnnModel& model) {
  AdamState s;
  s.m = zero_gradients(model);
  s.v = zero_gradients(model);
  s.step = 0;
  return s;
}

void adam_update(CnnModel& model, const Gradients& g, AdamState& s,
                 const AdamConfig& cfg) {
  ++s.step;
  adam_step(model.conv1.weight, g.conv1_w, s.m.conv1_w, s.v.conv1_w, s.step, cfg);
  adam_step(model.conv1.bias, g.conv1_b, s.m.conv1_b, s.v.conv1_b, s.step, cfg);
  adam_step(model.conv2.weight, g.conv2_w, s.m.conv2_w, s.v.conv2_w, s.step, cfg);
  adam_step(model.conv2.bias, g.conv2_b, s.m.conv2_b, s.v.conv2_b, s.step, cfg);
  adam_step(model.fc1.weight, g.fc1_w, s.m.fc1_w, s.v.fc1_w, s.step, cfg);
  adam_step(model.fc1.bias, g.fc1_b, s.m.fc1_b, s.v.fc1_b, s.step, cfg);
  adam_step(model.out.weight, g.out_w, s.m.out_w, s.v.out_w, s.step, cfg);
  adam_step(model.out.bias, g.out_b, s.m.out_b, s.v.out_b, s.step, cfg);
}

CnnModel train(const BearingRun& run, const DeiSeries& labels,
               const TrainConfig& config, std::vector<TrainLogEntry>* log) {
  const int n = run.length();
  if (n == 0) throw Error("train: run is empty");
  if (labels.length() != n)
    throw Error("train: label series length " + std::to_string(labels.length()) +
                " does not match run length " + std::to_string(n));
  if (!labels.normalized)
    throw Error("train: labels must be a normalized series");
  if (config.iterations < 1) throw Error("train: iterations must be >= 1");
  if (!(config.adam.learning_rate > 0.0))
    throw Error("train: learning rate must be positive");

  Topology topo = config.topology;
  topo.input_length = run.condition.snapshot_length;
  CnnModel model = make_model(topo, config.seed);

  // Global standardization over all training samples.
  double sum = 0.0, sq = 0.0;
  long count = 0;
  for (const auto& snap : run.snapshots) {
    sum += snap.samples.sum();
    sq += snap.samples.square().sum();
    count += snap.samples.size();
  }
  model.input_mean = sum / count;
  const double var = sq / count - model.input_mean * model.input_mean;
  model.input_std = var > 0.0 ? std::sqrt(var) : 1.0;

  std::vector<Array3> inputs;
  inputs.reserve(n);
  for (const auto& snap : run.snapshots)
    inputs.push_back(standardized(model, snap.samples));

  AdamState state = make_adam_state(model);
  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces a reshuffle on first use

  for (int it = 1; it <= config.iterations; ++it) {
    double loss = 0.0;
    if (config.batch_size <= 0 || config.batch_size >= n) {
      const Gradients g = backward(model, inputs, labels.values, nullptr, &loss);
      adam_update(model, g, state, config.adam);
    } else {
      // Seeded mini-batches drawn from a reshuffled epoch order.
      std::vector<Array3> batch;
      VecX batch_labels(config.batch_size);
      batch.reserve(config.batch_size);
      for (int b = 0; b < config.batch_size; ++b) {
        if (cursor == order.size()) {
          for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(shuffle_rng.uniform() * i)]);
          cursor = 0;
        }
        const int idx = order[cursor++];
        batch.push_back(inputs[idx]);
        batch_labels[b] = labels.values[idx];
      }
      const Gradients g = backward(model, batch, batch_labels, nullptr, &loss);
      adam_update(model, g, state, config.adam);
    }
    if (log) log->push_back({it, loss});
  }
  return model;
}

DeiSeries estimate_dei(const CnnModel& model, const BearingRun& run) {
  DeiSeries series;
  series.unit_interval = run.condition.snapshot_interval;
  series.normalized = true;
  series.norm_min = 0.0;
  series.norm_max = 1.0;
  series.norm_eps = 0.0;
  series.values = VecX(run.length());
  for (int i = 0; i < run.length(); ++i) {
    try {
      series.values[i] = forward(model, run.snapshots[i]);
    } catch (const Error& e) {
      throw Error("snapshot " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return series;
}

namespace {

void write_matrix(std::ostream& out, const char* tag, const MatX& m) {
  out << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << format_full(m(r, c));
    }
    out << '\n';
  }
}

MatX read_matrix(std::istream& in, const std::string& tag,
                 const std::string& layer) {
  std::string word;
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> word >> rows >> cols) || word != tag)
    throw Error("model file: expected '" + tag + "' block for " + layer);
  MatX m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!(in >> m(r, c)))
        throw Error("model file: truncated while reading " + layer);
  return m;
}

}  // namespace

void save_model(const std::filesystem::path& file, const CnnModel& m) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write model file: " + file.string());
  const Topology& t = m.topo;
  out << "CNN-DEI v1\n";
  out << "topology " << t.input_length << ' ' << t.conv1_filters << ' '
      << t.conv1_kernel << ' ' << t.conv1_stride << ' ' << t.pool_size << ' '
      << t.pool_stride << ' ' << t.conv2_filters << ' ' << t.conv2_kernel
      << ' ' << t.conv2_stride << ' ' << t.fc1_units << '\n';
  out << "scaling " << format_full(m.input_mean) << ' '
      << format_full(m.input_std) << '\n';
  write_matrix(out, "conv1_w", m.conv1.weight);
  write_matrix(out, "conv1_b", m.conv1.bias);
  write_matrix(out, "conv2_w", m.conv2.weight);
  write_matrix(out, "conv2_b", m.conv2.bias);
  write_matrix(out, "fc1_w", m.fc1.weight);
  write_matrix(out, "fc1_b", m.fc1.bias);
  write_matrix(out, "out_w", m.out.weight);
  write_matrix(out, "out_b", m.out.bias);
}

CnnModel load_model(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open model file: " + file.string());
  std::string line;
  if (!std::getline(in, line) || line != "CNN-DEI v1")
    throw Error("model file " + file.string() +
                ": version mismatch, expected 'CNN-DEI v1'");

  CnnModel m;
  Topology& t = m.topo;
  std::string word;
  if (!(in >> word) || word != "topology")
    throw Error("model file: expected topology header");
  if (!(in >> t.input_length >> t.conv1_filters >> t.conv1_kernel >>
        t.conv1_stride >> t.pool_size >> t.pool_stride >> t.conv2_filters >>
        t.conv2_kernel >> t.conv2_stride >> t.fc1_units))
    throw Error("model file: truncated topology header");
  if (!(in >> word >> m.input_mean >> m.input_std) || word != "scaling")
    throw Error("model file: expected scaling line");

  m.conv1.kernel_size = t.conv1_kernel;
  m.conv1.stride = t.conv1_stride;
  m.conv1.weight = read_matrix(in, "conv1_w", "conv1");
  m.conv1.bias = read_matrix(in, "conv1_b", "conv1");
  m.conv2.kernel_size = t.conv2_kernel;
  m.conv2.stride = t.conv2_stride;
  m.conv2.weight = read_matrix(in, "conv2_w", "conv2");
  m.conv2.bias = read_matrix(in, "conv2_b", "conv2");
  m.fc1.weight = read_matrix(in, "fc1_w", "fc1");
  m.fc1.bias = read_matrix(in, "fc1_b", "fc1");
  m.out.weight = read_matrix(in, "out_w", "out");
  m.out.bias = read_matrix(in, "out_b", "out");

  // Header/parameter consistency.
  const ShapeChain chain = shape_chain(t);
  if (m.conv1.weight.rows() != t.conv1_kernel ||
      m.conv1.weight.cols() != t.conv1_filters ||
      m.conv2.weight.rows() !=
          static_cast<Eigen::Index>(t.conv2_kernel) * t.conv1_filters ||
      m.conv2.weight.cols() != t.conv2_filters ||
      m.fc1.weight.rows() != chain.flat || m.fc1.weight.cols() != t.fc1_units ||
      m.out.weight.rows() != t.fc1_units || m.out.weight.cols() != 1 ||
      m.conv1.bias.size() != t.conv1_filters ||
      m.conv2.bias.size() != t.conv2_filters ||
      m.fc1.bias.size() != t.fc1_units || m.out.bias.size() != 1)
    throw Error("model file " + file.string() +
                ": parameter shapes are inconsistent with the header");
  return m;
}

}  // namespace rulkit::cnn
