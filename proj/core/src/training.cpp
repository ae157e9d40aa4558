#include "elc/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "elc/datagen.hpp"
#include "elc/error.hpp"
#include "elc/evidential.hpp"
#include "elc/heads.hpp"
#include "elc/nn/ops.hpp"
#include "elc/nn/optim.hpp"
#include "elc/rng.hpp"
#include "elc/selpred.hpp"

namespace elc {

namespace {

using nn::Matrix;
using nn::Var;

enum Phase : std::uint64_t { kWarmup = 1, kAdmm = 2, kFinetune = 3, kSingle = 4 };

const char* phase_name(Phase p) {
  switch (p) {
    case kWarmup: return "warmup";
    case kAdmm: return "admm";
    case kFinetune: return "finetune";
    case kSingle: return "single";
  }
  return "?";
}

struct TaskData {
  Matrix x;
  std::vector<int> labels;  // local to the head
};

TaskData gather(const io::FrameDataset& ds, const std::vector<int>& classes, int task) {
  std::vector<std::size_t> rows;
  TaskData d;
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    const auto& f = ds.frames[i];
    if (task >= 0 && f.task_id != task) continue;
    const auto it = std::find(classes.begin(), classes.end(), f.class_label);
    if (it == classes.end()) throw DataError("frame class " + std::to_string(f.class_label) + " not in the task's class set");
    rows.push_back(i);
    d.labels.push_back(static_cast<int>(it - classes.begin()));
  }
  if (rows.empty()) throw DataError("no training frames for task " + std::to_string(task));
  d.x = data::stack(ds, rows);
  return d;
}

using EffectiveFn = std::function<std::vector<Var>(nn::Tape&, std::span<const Var> theta, std::span<const Var> adaptive)>;
using PenaltyFn = std::function<Var(nn::Tape&, std::span<const Var> theta, std::span<const Var> adaptive)>;

struct EpochSpec {
  std::size_t task = 0;
  Phase phase = kSingle;
  std::size_t epoch = 0;
  double lr = 0.0;
  double lambda_kl = 0.0;
  HeadKind kind = HeadKind::kLinear;
  EffectiveFn effective;
  PenaltyFn penalty;
};

class Trainer {
 public:
  Trainer(const ExperimentConfig& cfg, Model& model, std::vector<EpochLog>& log, const LogHook& on_epoch)
      : cfg_(cfg), model_(model), log_(log), on_epoch_(on_epoch) {}

  // One pass over the data; every parameter set that is passed is updated.
  EpochLog run_epoch(const TaskData& d, const EpochSpec& spec, nn::ParamList& head, nn::Sgd& opt_head,
                     nn::ParamList* adaptive, nn::Sgd* opt_adaptive, nn::Sgd& opt_net) {
    auto& net = model_.net;
    const std::size_t n = d.labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(cfg_.seed, {0x73687566, spec.task, spec.phase, spec.epoch});
    std::shuffle(order.begin(), order.end(), rng);

    const double kl_weight = cfg_.model.kl_weight.value_or(1.0 / static_cast<double>(n));
    double task_sum = 0.0;
    double pen_sum = 0.0;
    std::size_t batches = 0;
    std::vector<int> labels;
    for (std::size_t start = 0; start < n; start += cfg_.train.batch_size) {
      const std::size_t stop = std::min(n, start + cfg_.train.batch_size);
      Matrix xb(static_cast<Eigen::Index>(stop - start), d.x.cols());
      labels.clear();
      for (std::size_t r = start; r < stop; ++r) {
        xb.row(static_cast<Eigen::Index>(r - start)) = d.x.row(static_cast<Eigen::Index>(order[r]));
        labels.push_back(d.labels[order[r]]);
      }

      nn::Tape tape;
      const auto theta = nn::bind_variables(tape, net.params());
      const auto adapt = adaptive ? nn::bind_variables(tape, *adaptive) : std::vector<Var>{};
      const auto head_vars = nn::bind_variables(tape, head);
      const auto eff = spec.effective(tape, theta, adapt);
      Var features = net.forward(tape, tape.constant(std::move(xb)), eff);

      heads::LossInputs in;
      in.labels = labels;
      in.lambda_kl = spec.lambda_kl;
      in.nu = cfg_.model.nu;
      in.kl_weight = kl_weight;
      in.mc_samples = cfg_.model.mc_samples_train;
      in.noise_seed = derive_seed(cfg_.seed, {0x6e6f6973, spec.task, spec.phase, spec.epoch, batches});
      Var task_loss = heads::loss(spec.kind, features, head_vars, in);
      Var total = task_loss;
      double pen = 0.0;
      if (spec.penalty) {
        Var p = spec.penalty(tape, theta, adapt);
        pen = p.scalar();
        total = nn::add(task_loss, p);
      }
      if (!std::isfinite(total.scalar())) {
        throw NumericError("loss became non-finite in task " + std::to_string(spec.task) + ", " +
                           phase_name(spec.phase) + " epoch " + std::to_string(spec.epoch));
      }
      tape.backward(total);
      nn::collect_gradients(tape, theta, net.params());
      nn::collect_gradients(tape, head_vars, head);
      if (adaptive) nn::collect_gradients(tape, adapt, *adaptive);
      nn::clip_gradients({&net.params(), &head, adaptive}, cfg_.train.grad_clip);
      opt_net.step(net.params(), spec.lr);
      opt_head.step(head, spec.lr);
      if (adaptive && opt_adaptive) opt_adaptive->step(*adaptive, spec.lr);

      task_sum += task_loss.scalar();
      pen_sum += pen;
      ++batches;
    }
    EpochLog entry;
    entry.task = spec.task;
    entry.phase = phase_name(spec.phase);
    entry.epoch = spec.epoch;
    entry.learning_rate = spec.lr;
    entry.lambda_kl = spec.lambda_kl;
    entry.task_loss = task_sum / static_cast<double>(batches);
    entry.admm_loss = pen_sum / static_cast<double>(batches);
    return entry;
  }

  void record(const EpochLog& e) {
    log_.push_back(e);
    if (on_epoch_) on_epoch_(e);
  }

  nn::Sgd make_opt() const { return nn::Sgd(cfg_.train.momentum, cfg_.train.weight_decay); }

  // Short cross-entropy phase with a throwaway linear head, then prototypes
  // seeded from the class-conditional feature means.
  nn::ParamList warmup_prototypes(const TaskData& d, std::size_t task, std::size_t classes, const EffectiveFn& effective,
                                  nn::ParamList* adaptive, const std::function<nn::ParamValues()>& current_values) {
    const std::size_t fdim = model_.net.feature_dim();
    nn::ParamList aux = heads::make_linear(fdim, classes, derive_seed(cfg_.seed, {0x617578, task}));
    nn::Sgd opt_net = make_opt();
    nn::Sgd opt_aux = make_opt();
    for (std::size_t e = 0; e < cfg_.train.warmup_epochs; ++e) {
      EpochSpec spec{task, kWarmup, e, cfg_.train.learning_rate, 0.0, HeadKind::kLinear, effective, {}};
      record(run_epoch(d, spec, aux, opt_aux, adaptive, nullptr, opt_net));
    }
    const Matrix feats = model_.net.forward(d.x, current_values());
    const double rms = std::sqrt(feats.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, feats.size())));
    const auto bank = ds::init_prototypes(feats, d.labels, classes, cfg_.model.prototypes_per_class,
                                          cfg_.model.prototype_noise * std::max(rms, 1e-12),
                                          derive_seed(cfg_.seed, {0x70726f74, task}));
    return heads::from_bank(bank);
  }

  // Penalty-free epochs at the base rate that train the head directly; the
  // evidential head gets its own warmup before its prototypes exist.
  void warmup_direct(const TaskData& d, std::size_t task, nn::ParamList& head, HeadKind kind,
                     const EffectiveFn& effective, nn::ParamList* adaptive) {
    if (kind == HeadKind::kEvidential) return;
    nn::Sgd opt_net = make_opt();
    nn::Sgd opt_head = make_opt();
    for (std::size_t e = 0; e < cfg_.train.warmup_epochs; ++e) {
      EpochSpec spec{task, kWarmup, e, cfg_.train.learning_rate, 0.0, kind, effective, {}};
      record(run_epoch(d, spec, head, opt_head, adaptive, nullptr, opt_net));
    }
  }

  nn::ParamList fresh_head(HeadKind kind, const TaskData& d, std::size_t task, std::size_t classes,
                           const EffectiveFn& effective, nn::ParamList* adaptive,
                           const std::function<nn::ParamValues()>& values) {
    const std::size_t fdim = model_.net.feature_dim();
    switch (kind) {
      case HeadKind::kLinear: return heads::make_linear(fdim, classes, derive_seed(cfg_.seed, {0x68656164, task}));
      case HeadKind::kBayesian:
        return heads::make_bayesian(fdim, classes, derive_seed(cfg_.seed, {0x68656164, task}),
                                    cfg_.model.bayes_log_sigma_init);
      case HeadKind::kEvidential: return warmup_prototypes(d, task, classes, effective, adaptive, values);
    }
    throw std::logic_error("unknown head kind");
  }

  void train_single(const io::FrameDataset& train, const TaskHook& on_task) {
    auto& net = model_.net;
    std::vector<int> classes;
    for (const auto& c : train.info.classes) classes.push_back(c.label);
    std::sort(classes.begin(), classes.end());
    model_.head_classes = {classes};
    const TaskData d = gather(train, classes, -1);

    lps::AdmmConfig admm{0.0, 0.0, cfg_.train.admm_interval};
    lps::TaskContext ctx = lps::begin_task(model_.state, net.params(), 1.0, 0.0, admm, sampler(0),
                                           derive_seed(cfg_.seed, {0x616461}));
    const EffectiveFn effective = [](nn::Tape&, std::span<const Var> theta, std::span<const Var>) {
      return std::vector<Var>(theta.begin(), theta.end());
    };
    const auto values = [&] { return nn::values_of(net.params()); };
    const HeadKind kind = model_.kind();
    nn::ParamList head = fresh_head(kind, d, 0, classes.size(), effective, nullptr, values);
    warmup_direct(d, 0, head, kind, effective, nullptr);

    nn::Sgd opt_net = make_opt();
    nn::Sgd opt_head = make_opt();
    const std::size_t total = cfg_.train.admm_epochs + cfg_.train.finetune_epochs;
    for (std::size_t e = 0; e < total; ++e) {
      EpochSpec spec{0, kSingle, e, nn::cosine_lr(cfg_.train.learning_rate, e, total),
                     kl_lambda_for_epoch(cfg_, e), kind, effective, {}};
      record(run_epoch(d, spec, head, opt_head, nullptr, nullptr, opt_net));
    }
    lps::finalize_task(model_.state, ctx, net.params());
    model_.state.heads.push_back(std::move(head));
    if (on_task) on_task(model_, 0);
  }

  void train_lifelong(const io::FrameDataset& train, const TaskHook& on_task) {
    auto& net = model_.net;
    const auto alphas = cfg_.alphas();
    const HeadKind kind = model_.kind();
    const lps::AdmmConfig admm{cfg_.train.rho, cfg_.train.tau_admm, cfg_.train.admm_interval};

    for (std::size_t t = 0; t < cfg_.task_count(); ++t) {
      const auto& classes = train.info.tasks.at(t).classes;
      model_.head_classes.push_back(classes);
      const TaskData d = gather(train, classes, static_cast<int>(t));

      lps::TaskContext ctx = lps::begin_task(model_.state, net.params(), alphas[t], cfg_.model.beta, admm, sampler(t),
                                             derive_seed(cfg_.seed, {0x616461}));
      const EffectiveFn effective = [&ctx](nn::Tape& tape, std::span<const Var> theta, std::span<const Var> adaptive) {
        return lps::training_params(tape, theta, adaptive, ctx);
      };
      const PenaltyFn penalty = [&ctx](nn::Tape& tape, std::span<const Var> theta, std::span<const Var> adaptive) {
        return lps::admm_loss(tape, theta, adaptive, ctx);
      };
      const auto values = [&] { return lps::training_values(net.params(), ctx); };
      nn::ParamList head = fresh_head(kind, d, t, classes.size(), effective, &ctx.adaptive, values);
      warmup_direct(d, t, head, kind, effective, &ctx.adaptive);

      nn::Sgd opt_net = make_opt();
      nn::Sgd opt_head = make_opt();
      nn::Sgd opt_adaptive = make_opt();
      const std::size_t admm_epochs = cfg_.train.admm_epochs;
      for (std::size_t e = 0; e < admm_epochs; ++e) {
        EpochSpec spec{t, kAdmm, e, nn::cosine_lr(cfg_.train.learning_rate, e, admm_epochs),
                       kl_lambda_for_epoch(cfg_, e), kind, effective, penalty};
        EpochLog entry = run_epoch(d, spec, head, opt_head, &ctx.adaptive, &opt_adaptive, opt_net);
        if ((e + 1) % ctx.admm.update_interval == 0) {
          lps::admm_project(ctx, nn::values_of(net.params()), nn::values_of(ctx.adaptive));
        }
        entry.admm_residual = lps::admm_residual(ctx, nn::values_of(net.params()));
        record(entry);
      }

      const auto fine_tune = [&](const lps::TaskPartition& part) {
        std::vector<Matrix> gates;
        for (std::size_t i = 0; i < net.params().size(); ++i) {
          const auto& p = net.params()[i];
          Matrix g(static_cast<Eigen::Index>(p.values.rows()), static_cast<Eigen::Index>(p.values.cols()));
          for (Eigen::Index k = 0; k < g.size(); ++k) {
            const auto uk = static_cast<std::size_t>(k);
            g.data()[k] = (part.owned[i][uk] || part.adaptive[i][uk]) ? 1.0 : 0.0;
          }
          gates.push_back(std::move(g));
        }
        const EffectiveFn masked = [&gates](nn::Tape& tape, std::span<const Var> theta, std::span<const Var>) {
          std::vector<Var> out;
          for (std::size_t i = 0; i < theta.size(); ++i) {
            out.push_back(gates[i].minCoeff() == 1.0 ? theta[i] : nn::mul(theta[i], tape.constant(gates[i])));
          }
          return out;
        };
        nn::Sgd ft_net = make_opt();
        nn::Sgd ft_head = make_opt();
        const std::size_t ft_epochs = cfg_.train.finetune_epochs;
        for (std::size_t e = 0; e < ft_epochs; ++e) {
          EpochSpec spec{t, kFinetune, e, nn::cosine_lr(cfg_.train.finetune_learning_rate, e, ft_epochs),
                         kl_lambda_for_epoch(cfg_, admm_epochs + e), kind, masked, {}};
          record(run_epoch(d, spec, head, ft_head, nullptr, nullptr, ft_net));
        }
      };
      lps::finalize_task(model_.state, ctx, net.params(), fine_tune);
      model_.state.heads.push_back(std::move(head));
      if (on_task) on_task(model_, t);
    }
  }

 private:
  lps::InitSampler sampler(std::size_t task) const {
    return [this, task](std::size_t param) {
      Rng rng = make_rng(cfg_.seed, {0x696e6974, task, param});
      return model_.net.sample_init(param, rng);
    };
  }

  const ExperimentConfig& cfg_;
  Model& model_;
  std::vector<EpochLog>& log_;
  const LogHook& on_epoch_;
};

}  // namespace

std::size_t Model::head_for_task(int task) const {
  if (task < 0) throw DataError("negative task id");
  if (!is_lifelong(variant)) return 0;
  if (static_cast<std::size_t>(task) >= head_count()) {
    throw DataError("unknown task id " + std::to_string(task) + " (model has " + std::to_string(head_count()) + " tasks)");
  }
  return static_cast<std::size_t>(task);
}

double kl_lambda_for_epoch(const ExperimentConfig& cfg, std::size_t epoch_in_task) {
  return ds::kl_anneal(cfg.model.lambda_kl, epoch_in_task, cfg.train.admm_epochs + cfg.train.finetune_epochs);
}

TrainResult run_training(const ExperimentConfig& cfg, const io::FrameDataset& train, const TaskHook& on_task,
                         const LogHook& on_epoch) {
  cfg.validate();
  if (train.width != cfg.model.backbone.input_width) throw DataError("dataset frame width does not match the backbone");
  if (train.info.tasks.size() != cfg.task_count()) throw DataError("dataset task count does not match the config");

  TrainResult res;
  Model& model = res.model;
  model.variant = cfg.model.variant;
  model.net = nn::Network(cfg.model.backbone);
  model.net.initialize(derive_seed(cfg.seed, {0x6e6574}));
  model.state = lps::make_state(model.net.params());
  model.nu = cfg.model.nu;
  model.mc_samples_eval = cfg.model.mc_samples_eval;
  model.eval_seed = derive_seed(cfg.seed, {0x6576616c});
  model.uncertainty = cfg.model.uncertainty;
  model.config_json = to_json(cfg);
  for (const auto& t : train.info.tasks) model.task_names.push_back(t.name);

  Trainer trainer(cfg, model, res.log, on_epoch);
  if (is_lifelong(cfg.model.variant)) {
    trainer.train_lifelong(train, on_task);
  } else {
    trainer.train_single(train, on_task);
  }
  return res;
}

void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "task,phase,epoch,learning_rate,lambda_kl,task_loss,admm_loss,admm_residual\n";
  for (const auto& e : log) {
    os << e.task << ',' << e.phase << ',' << e.epoch << ',' << sel::format_double(e.learning_rate) << ','
       << sel::format_double(e.lambda_kl) << ',' << sel::format_double(e.task_loss) << ','
       << sel::format_double(e.admm_loss) << ',' << sel::format_double(e.admm_residual) << '\n';
  }
}

}  // namespace elc
