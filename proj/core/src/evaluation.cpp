#include "elc/evaluation.hpp"

#include <algorithm>
#include <map>

#include "elc/datagen.hpp"
#include "elc/error.hpp"

namespace elc {

namespace {

constexpr std::size_t kChunk = 512;

}  // namespace

heads::Outputs infer_task(const Model& model, int task, const nn::Matrix& frames) {
  const std::size_t h = model.head_for_task(task);
  const nn::ParamValues eff = lps::compose_inference_params(model.state, model.net.params(), h);
  heads::InferenceOptions opts;
  opts.nu = model.nu;
  opts.mc_samples = model.mc_samples_eval;
  opts.seed = model.eval_seed;
  opts.uncertainty = model.uncertainty;

  heads::Outputs out;
  for (Eigen::Index start = 0; start < frames.rows(); start += static_cast<Eigen::Index>(kChunk)) {
    const Eigen::Index n = std::min<Eigen::Index>(static_cast<Eigen::Index>(kChunk), frames.rows() - start);
    const nn::Matrix feats = model.net.forward(frames.middleRows(start, n), eff);
    heads::Outputs part = heads::infer(model.kind(), model.state.heads[h], feats, opts);
    if (start == 0) {
      out.scores.resize(frames.rows(), part.scores.cols());
    }
    out.scores.middleRows(start, n) = part.scores;
    out.predicted.insert(out.predicted.end(), part.predicted.begin(), part.predicted.end());
    out.uncertainty.insert(out.uncertainty.end(), part.uncertainty.begin(), part.uncertainty.end());
    out.entropy.insert(out.entropy.end(), part.entropy.begin(), part.entropy.end());
  }
  return out;
}

Evaluation run_evaluation(const Model& model, const io::FrameDataset& data) {
  if (data.frames.empty()) throw DataError("evaluation dataset is empty");
  if (data.width != model.net.input_width()) throw DataError("frame width does not match the model input");

  std::map<int, std::vector<std::size_t>> by_task;
  for (std::size_t i = 0; i < data.frames.size(); ++i) by_task[data.frames[i].task_id].push_back(i);

  Evaluation ev;
  ev.preds.resize(data.frames.size());
  std::size_t widest = 0;
  for (const auto& c : model.head_classes) widest = std::max(widest, c.size());
  ev.scores = nn::Matrix::Zero(static_cast<Eigen::Index>(data.frames.size()), static_cast<Eigen::Index>(widest));

  for (const auto& [task, rows] : by_task) {
    const std::size_t h = model.head_for_task(task);
    const auto& classes = model.head_classes.at(h);
    const heads::Outputs out = infer_task(model, task, data::stack(data, rows));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& f = data.frames[rows[k]];
      auto& p = ev.preds[rows[k]];
      p.task = task;
      p.truth = f.class_label;
      p.predicted = classes.at(static_cast<std::size_t>(out.predicted[k]));
      p.uncertainty = out.uncertainty[k];
      p.snr_db = f.snr_db;
      ev.scores.row(static_cast<Eigen::Index>(rows[k])).head(out.scores.cols()) = out.scores.row(static_cast<Eigen::Index>(k));
    }

    std::vector<sel::ScoredPrediction> subset;
    for (std::size_t r : rows) subset.push_back(ev.preds[r]);
    TaskRecall tr;
    tr.task = task;
    tr.name = static_cast<std::size_t>(task) < model.task_names.size() ? model.task_names[static_cast<std::size_t>(task)]
                                                                         : "task" + std::to_string(task);
    tr.count = rows.size();
    tr.accuracy = sel::base_recall(subset);
    tr.macro_recall = sel::macro_recall(subset);
    ev.tasks.push_back(tr);
  }
  double sum = 0.0;
  for (const auto& t : ev.tasks) sum += t.macro_recall;
  ev.task_average = sum / static_cast<double>(ev.tasks.size());
  ev.overall_accuracy = sel::base_recall(ev.preds);
  return ev;
}

}  // namespace elc
