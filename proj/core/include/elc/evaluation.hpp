#pragma once

#include <string>
#include <vector>

#include "elc/dataio.hpp"
#include "elc/heads.hpp"
#include "elc/model.hpp"
#include "elc/selpred.hpp"

namespace elc {

struct TaskRecall {
  int task = 0;
  std::string name;
  std::size_t count = 0;
  double accuracy = 0.0;
  double macro_recall = 0.0;
};

struct Evaluation {
  std::vector<sel::ScoredPrediction> preds;  // dataset order
  std::vector<TaskRecall> tasks;
  double task_average = 0.0;  // mean of per-task macro recalls
  double overall_accuracy = 0.0;
  nn::Matrix scores;  // head outputs per prediction, padded to the widest head
};

// Head outputs for frames of one dataset task under that task's parameters.
heads::Outputs infer_task(const Model& model, int task, const nn::Matrix& frames);

// Throws DataError for frames whose task the model does not know.
Evaluation run_evaluation(const Model& model, const io::FrameDataset& data);

}  // namespace elc
