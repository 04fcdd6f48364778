#include "tng/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "tng/error.hpp"
#include "tng/rng.hpp"
#include "tng/util.hpp"

namespace tng {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'G', 'M'};
constexpr std::uint32_t kVersion = 1;

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  append_u64(out, bits);
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& file) : bytes_(bytes), file_(file) {}
  void raw(void* dst, std::size_t len) {
    if (pos_ + len > bytes_.size()) throw DataError(file_ + ": truncated checkpoint");
    std::memcpy(dst, bytes_.data() + pos_, len);
    pos_ += len;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    raw(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    raw(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::string file_;
  std::size_t pos_ = 0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t h = fnv1a64(&seed, sizeof(seed));
  return fnv1a64(&salt, sizeof(salt), h);
}

}  // namespace

SplitIndices split_dataset(const ExpressionDataset& dataset, double train_ratio,
                           double val_ratio, double test_ratio, std::uint64_t seed) {
  if (train_ratio <= 0.0 || val_ratio < 0.0 || test_ratio < 0.0)
    throw UsageError("split_dataset: ratios must be positive");
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
    throw UsageError("split_dataset: ratios must sum to 1");
  const int n = static_cast<int>(dataset.cells.size());
  if (n < 3) throw DataError("split_dataset: need at least 3 cells");

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(mix_seed(seed, 0x73706c6974ULL));
  rng.shuffle(order);

  const int n_val = static_cast<int>(std::floor(val_ratio * n));
  const int n_test = static_cast<int>(std::floor(test_ratio * n));
  const int n_train = n - n_val - n_test;  // floor remainders land in train

  SplitIndices split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  return split;
}

Metrics metrics_from_predictions(const std::vector<PredictionRecord>& predictions) {
  if (predictions.empty()) throw DataError("metrics: no predictions");
  Metrics m;
  for (const PredictionRecord& p : predictions) {
    if (p.label == 1)
      p.predicted == 1 ? ++m.tp : ++m.fn;
    else
      p.predicted == 1 ? ++m.fp : ++m.tn;
  }
  const double total = static_cast<double>(predictions.size());
  m.accuracy = static_cast<double>(m.tp + m.tn) / total;
  m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
  m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
  m.specificity = m.tn + m.fp > 0 ? static_cast<double>(m.tn) / (m.tn + m.fp) : 0.0;
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.auc = rank_auc(predictions, &m.auc_note);
  return m;
}

std::optional<double> rank_auc(const std::vector<PredictionRecord>& predictions,
                               std::string* note) {
  long n_pos = 0, n_neg = 0;
  for (const PredictionRecord& p : predictions) p.label == 1 ? ++n_pos : ++n_neg;
  if (n_pos == 0 || n_neg == 0) {
    if (note) *note = "single-class split, AUC undefined";
    return std::nullopt;
  }
  std::vector<int> order(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return predictions[static_cast<std::size_t>(a)].prob_positive <
           predictions[static_cast<std::size_t>(b)].prob_positive;
  });
  // Midranks over tied score blocks.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           predictions[static_cast<std::size_t>(order[j + 1])].prob_positive ==
               predictions[static_cast<std::size_t>(order[i])].prob_positive)
      ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t)
      if (predictions[static_cast<std::size_t>(order[t])].label == 1)
        positive_rank_sum += midrank;
    i = j + 1;
  }
  const double auc =
      (positive_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0) /
      (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  if (note) note->clear();
  return auc;
}

EvalResult evaluate(const ParamStore& params, const TrainConfig& config,
                    const ModelInputs& inputs, const ExpressionDataset& dataset,
                    const std::vector<int>& cell_indices) {
  if (cell_indices.empty()) throw DataError("evaluate: empty split");
  EvalResult result;
  Tape tape;
  const StagedModel staged = stage_model(tape, params, config, inputs);
  for (int idx : cell_indices) {
    const CellRecord& cell = dataset.cells.at(static_cast<std::size_t>(idx));
    const CellForward fwd = forward_cell(tape, staged, config, inputs, cell.expression);
    const double prob = tape.value(fwd.probs)(0, 1);
    result.predictions.push_back(
        PredictionRecord{cell.id, cell.label, prob, prob >= 0.5 ? 1 : 0});
  }
  result.metrics = metrics_from_predictions(result.predictions);
  return result;
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double eps)
    : learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(ParamStore& params, const std::map<std::string, Matrix>& grads) {
  ++t_;
  const double bias1 = 1.0 - std::pow(beta1_, t_);
  const double bias2 = 1.0 - std::pow(beta2_, t_);
  for (auto& [name, value] : params.values) {
    const auto it = grads.find(name);
    if (it == grads.end()) throw DataError("optimizer: missing gradient for " + name);
    const Matrix& g = it->second;
    Matrix& m = first_moment_.try_emplace(name, Matrix::Zero(value.rows(), value.cols()))
                    .first->second;
    Matrix& v = second_moment_.try_emplace(name, Matrix::Zero(value.rows(), value.cols()))
                    .first->second;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    const Matrix m_hat = m / bias1;
    const Matrix v_hat = v / bias2;
    value.array() -= learning_rate_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
  }
}

TrainResult train(const TrainConfig& config, const GeneGraph& graph, const PathList& paths,
                  const ExpressionDataset& dataset, const EmbeddingStore& store) {
  config.validate();
  const ModelInputs inputs = prepare_inputs(config, graph, paths, store);
  if (dataset.n_genes != graph.n())
    throw DataError("train: dataset gene count does not match graph");

  TrainResult result;
  result.split = split_dataset(dataset, config.split_train, config.split_val,
                               config.split_test, config.seed);
  ParamStore params = init_params(config, inputs.dims, config.seed);
  result.params = params;
  result.best_epoch = 0;

  AdamOptimizer optimizer(config.learning_rate);
  double best_accuracy = -1.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<int> order = result.split.train;
    Rng rng(mix_seed(config.seed, 0x65706f6368ULL + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      try {
        Tape tape;
        const StagedModel staged = stage_model(tape, params, config, inputs);
        Var batch_loss{};
        for (std::size_t i = start; i < end; ++i) {
          const CellRecord& cell = dataset.cells.at(static_cast<std::size_t>(order[i]));
          const CellForward fwd = forward_cell(tape, staged, config, inputs, cell.expression);
          Var cell_loss = cross_entropy_logits(fwd.logits, {cell.label});
          batch_loss = i == start ? cell_loss : batch_loss + cell_loss;
        }
        batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - start));
        tape.backward(batch_loss);
        loss_sum += tape.value(batch_loss)(0, 0) * static_cast<double>(end - start);
        optimizer.step(params, tape.param_grads());
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(start / config.batch_size + 1) + ")");
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    if (!result.split.validation.empty()) {
      const EvalResult val =
          evaluate(params, config, inputs, dataset, result.split.validation);
      stats.val_accuracy = val.metrics.accuracy;
      stats.val_auc = val.metrics.auc;
      if (val.metrics.accuracy > best_accuracy) {
        best_accuracy = val.metrics.accuracy;
        result.params = params;
        result.best_epoch = epoch;
      }
    } else {
      // No validation cells: keep the latest parameters.
      stats.val_accuracy = std::numeric_limits<double>::quiet_NaN();
      result.params = params;
      result.best_epoch = epoch;
    }
    result.history.push_back(stats);
  }
  return result;
}

void save_checkpoint(const ParamStore& params, const TrainConfig& config,
                     const GeneGraph& graph, const PathList& paths, const std::string& file) {
  std::string out;
  out.append(kMagic, 4);
  append_u32(out, kVersion);
  append_u32(out, static_cast<std::uint32_t>(config.layers));
  append_u32(out, static_cast<std::uint32_t>(config.h_emb));
  append_u32(out, static_cast<std::uint32_t>(config.heads));
  append_u32(out, static_cast<std::uint32_t>(config.d_k));
  append_u32(out, static_cast<std::uint32_t>(config.r));
  append_u32(out, static_cast<std::uint32_t>(config.u));
  append_u32(out, static_cast<std::uint32_t>(config.d_llm));
  append_u32(out, static_cast<std::uint32_t>(config.d_expand));
  append_u32(out, static_cast<std::uint32_t>(config.d_max));
  append_f64(out, config.learning_rate);
  append_u32(out, static_cast<std::uint32_t>(config.epochs));
  append_u32(out, static_cast<std::uint32_t>(config.batch_size));
  append_u64(out, config.seed);
  append_f64(out, config.split_train);
  append_f64(out, config.split_val);
  append_f64(out, config.split_test);
  append_u64(out, graph.fingerprint());
  append_u64(out, paths.fingerprint());
  append_u64(out, params.values.size());
  for (const auto& [name, value] : params.values) {
    append_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    append_u32(out, static_cast<std::uint32_t>(value.rows()));
    append_u32(out, static_cast<std::uint32_t>(value.cols()));
    for (Index i = 0; i < value.rows(); ++i)
      for (Index j = 0; j < value.cols(); ++j) append_f64(out, value(i, j));
  }
  write_file_atomic(file, out);
}

Checkpoint load_checkpoint(const std::string& file) {
  const std::string bytes = read_file(file);
  Reader reader(bytes, file);
  char magic[4];
  reader.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(file + ": not a model checkpoint (bad magic)");
  const std::uint32_t version = reader.u32();
  if (version != kVersion)
    throw DataError(file + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.config.layers = static_cast<int>(reader.u32());
  ckpt.config.h_emb = static_cast<int>(reader.u32());
  ckpt.config.heads = static_cast<int>(reader.u32());
  ckpt.config.d_k = static_cast<int>(reader.u32());
  ckpt.config.r = static_cast<int>(reader.u32());
  ckpt.config.u = static_cast<int>(reader.u32());
  ckpt.config.d_llm = static_cast<int>(reader.u32());
  ckpt.config.d_expand = static_cast<int>(reader.u32());
  ckpt.config.d_max = static_cast<int>(reader.u32());
  ckpt.config.learning_rate = reader.f64();
  ckpt.config.epochs = static_cast<int>(reader.u32());
  ckpt.config.batch_size = static_cast<int>(reader.u32());
  ckpt.config.seed = reader.u64();
  ckpt.config.split_train = reader.f64();
  ckpt.config.split_val = reader.f64();
  ckpt.config.split_test = reader.f64();
  ckpt.graph_fingerprint = reader.u64();
  ckpt.path_fingerprint = reader.u64();
  const std::uint64_t count = reader.u64();
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::uint32_t name_len = reader.u32();
    std::string name(name_len, '\0');
    reader.raw(name.data(), name_len);
    const Index rows = static_cast<Index>(reader.u32());
    const Index cols = static_cast<Index>(reader.u32());
    Matrix value(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) value(i, j) = reader.f64();
    if (!ckpt.params.values.emplace(std::move(name), std::move(value)).second)
      throw DataError(file + ": duplicate parameter record");
  }
  if (!reader.done()) throw DataError(file + ": trailing bytes after last record");
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& file, const GeneGraph& graph,
                           const PathList& paths) {
  Checkpoint ckpt = load_checkpoint(file);
  if (ckpt.graph_fingerprint != graph.fingerprint())
    throw DataError(file + ": checkpoint was trained against a different gene graph");
  if (ckpt.path_fingerprint != paths.fingerprint())
    throw DataError(file + ": checkpoint was trained against a different path list");
  return ckpt;
}

void save_history(const std::vector<EpochStats>& history, const std::string& file) {
  std::ostringstream out;
  out << "epoch\ttrain_loss\tval_accuracy\tval_auc\n";
  for (const EpochStats& stats : history) {
    out << stats.epoch << '\t' << format_double(stats.train_loss) << '\t'
        << format_double(stats.val_accuracy) << '\t'
        << (stats.val_auc ? format_double(*stats.val_auc) : "nan") << '\n';
  }
  write_file_atomic(file, out.str());
}

}  // namespace tng
