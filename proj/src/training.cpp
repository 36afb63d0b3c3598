#include "blvt/training/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include "blvt/errors.hpp"
#include "blvt/log.hpp"
#include "blvt/neutral/neutral.hpp"
#include "blvt/nn/optim.hpp"
#include "blvt/rng.hpp"

namespace blvt::training {

portfolio::FeeSchedule TrainConfig::fees() const {
  return fee_scheme == FeeScheme::FEE ? portfolio::FeeSchedule::binance()
                                      : portfolio::FeeSchedule::none();
}

void TrainConfig::validate() const {
  loss.validate();
  if (batch_size < 1) throw ConfigError("train config: batch_size must be positive");
  if (epochs < 1) throw ConfigError("train config: epochs must be positive");
  if (!(base_lr > 0.0)) throw ConfigError("train config: base_lr must be positive");
  if (!(weight_decay >= 0.0))
    throw ConfigError("train config: weight_decay must be non-negative");
  if (T_seq < 2) throw ConfigError("train config: T_seq must be at least 2");
  if (L < 1 || K < 2 || L_norm < 1)
    throw ConfigError("train config: window lengths out of range");
  if (hidden < 1) throw ConfigError("train config: hidden size must be positive");
  if (chunk_windows < T_seq)
    throw ConfigError("train config: chunk_windows must cover at least one segment");
}

TrainingView prepare_training(const data::AlignedSeries& train, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.not_after != 0 && !train.timestamps.empty() &&
      train.timestamps.back() > cfg.not_after)
    throw RangeError("training: series extends past the allowed train end " +
                     format_utc(cfg.not_after));

  TrainingView v(data::FeaturePipeline(train, cfg.L, cfg.L_norm));
  const auto& up = train.at(data::Ticker::UP);
  const auto& down = train.at(data::Ticker::DOWN);
  const std::size_t n = train.size();

  v.timestamps = train.timestamps;
  v.y_u = up.close;
  v.y_d = down.close;
  v.T = cfg.T_seq;
  v.L = cfg.L;
  const auto fees = cfg.fees();
  v.fee_c = fees.c;

  v.rel_u.resize(n - 1);
  v.rel_d.resize(n - 1);
  v.mgmt.assign(n - 1, 1.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    v.rel_u[i] = up.close[i + 1] / up.close[i];
    v.rel_d[i] = down.close[i + 1] / down.close[i];
    if (fees.m > 0.0)
      v.mgmt[i] = portfolio::management_factor(
          fees.m, portfolio::management_crossings(v.timestamps[i], v.timestamps[i + 1],
                                                  fees.management_hour));
  }

  v.first_anchor =
      std::max(v.features.first_usable_anchor(), static_cast<std::size_t>(cfg.K - 1));
  const auto T = static_cast<std::size_t>(cfg.T_seq);
  if (n < v.first_anchor + T + 1)
    throw InsufficientHistoryError("training: series too short for one trajectory segment");
  v.n_segments = n - T - v.first_anchor;

  v.beta_hat.assign(n, std::numeric_limits<double>::quiet_NaN());
  const std::span<const double> cu(up.close), cd(down.close);
  for (std::size_t i = v.first_anchor; i + 1 < n; ++i)
    v.beta_hat[i] = neutral::estimate_beta(cu.first(i + 1), cd.first(i + 1), cfg.K).beta_hat;
  return v;
}

namespace {

nn::Matrix to_matrix(data::FeatureWindow&& w) {
  nn::Matrix m;
  m.rows = static_cast<std::size_t>(w.rows);
  m.cols = data::kFeatureCols;
  m.data = std::move(w.values);
  return m;
}

}  // namespace

losses::TrajectoryBatch simulate_segment(const TrainingView& view, std::size_t seg,
                                         const nn::ModelParams& params,
                                         [[maybe_unused]] const TrainConfig& cfg) {
  if (seg >= view.n_segments) throw RangeError("simulate_segment: segment out of range");
  const int T = view.T;
  const auto Tz = static_cast<std::size_t>(T);
  losses::TrajectoryBatch b;
  b.weights.resize(Tz);
  b.prices.resize(Tz);
  b.volumes.resize(Tz);
  b.beta_market.resize(Tz);
  b.returns.resize(Tz);

  for (int t = 0; t < T; ++t) {
    const auto a = view.anchor(seg, t);
    const auto w = nn::forward(params, to_matrix(view.features.window(a)));
    const auto tz = static_cast<std::size_t>(t);
    b.weights[tz] = {w[0], w[1]};
    b.prices[tz] = {view.y_u[a], view.y_d[a]};
    b.beta_market[tz] = view.beta_hat[a];
  }

  // Portfolio path. Every expression mirrors one tape node of
  // build_batch_graph so the two evaluations agree to rounding error.
  const bool fee = view.fee_c > 0.0;
  const double c = view.fee_c;
  const double omc = 1.0 - c;
  double p_prev = 1.0;
  {
    const auto a0 = view.anchor(seg, 0);
    b.volumes[0] = {(1.0 * b.weights[0][0]) / view.y_u[a0],
                    (1.0 * b.weights[0][1]) / view.y_d[a0]};
  }
  for (int k = 1; k <= T; ++k) {
    const auto i = view.anchor(seg, k - 1);
    const auto kp = static_cast<std::size_t>(k - 1);
    const double su = b.weights[kp][0] * view.rel_u[i];
    const double sd = b.weights[kp][1] * view.rel_d[i];
    const double sum = su + sd;
    const double pprime = p_prev * sum;
    double p_k = pprime;
    if (k < T) {
      const auto kz = static_cast<std::size_t>(k);
      const double tu = b.weights[kz][0];
      const double td = b.weights[kz][1];
      if (fee) {
        const double wpu = su / sum;
        const double wpd = sd / sum;
        double mu;
        if (wpu - tu > 0.0) {
          mu = (c * (wpd - wpu * omc) + omc) / (c * (td - tu * omc) + omc);
        } else {
          mu = (c * (wpu - wpd * omc) + omc) / (c * (tu - td * omc) + omc);
        }
        p_k = (mu * pprime) * view.mgmt[i];
      }
      const auto ak = view.anchor(seg, k);
      b.volumes[kz] = {(p_k * tu) / view.y_u[ak], (p_k * td) / view.y_d[ak]};
    } else if (fee) {
      p_k = pprime * view.mgmt[i];
    }
    b.returns[kp] = p_k / p_prev - 1.0;
    p_prev = p_k;
  }
  return b;
}

std::vector<losses::TrajectoryBatch> make_trajectories(const data::AlignedSeries& train,
                                                       const TrainConfig& cfg,
                                                       const nn::ModelParams& params) {
  const TrainingView view = prepare_training(train, cfg);
  std::vector<losses::TrajectoryBatch> out;
  out.reserve(view.n_segments);
  for (std::size_t s = 0; s < view.n_segments; ++s)
    out.push_back(simulate_segment(view, s, params, cfg));
  return out;
}

BatchGraph build_batch_graph(nn::Tape& tape, const TrainingView& view,
                             const nn::ModelParams& params,
                             std::span<const std::size_t> segments, const TrainConfig& cfg) {
  using Id = nn::Tape::Id;
  if (segments.empty()) throw RangeError("build_batch_graph: empty segment list");
  for (const auto s : segments)
    if (s >= view.n_segments) throw RangeError("build_batch_graph: segment out of range");

  const std::size_t B = segments.size();
  const int T = view.T;
  const int L = view.L;
  const std::size_t N = B * static_cast<std::size_t>(T);
  const bool fee = view.fee_c > 0.0;
  const double c = view.fee_c;
  const double omc = 1.0 - c;
  const auto variant = cfg.loss.variant;
  const bool penalty_on = variant != losses::Variant::BASELINE && cfg.loss.xi > 0.0;
  const double gamma = cfg.loss.gamma;

  BatchGraph g;
  g.model = nn::upload_params(tape, params);

  Id wu_all;
  Id wd_all;
  {
    // LSTM step matrices: row n = t*B + b holds window row l of segment b's
    // t-th decision anchor.
    std::vector<nn::Matrix> steps(static_cast<std::size_t>(L));
    for (auto& m : steps) m = nn::Matrix(N, data::kFeatureCols);
    for (int t = 0; t < T; ++t)
      for (std::size_t bi = 0; bi < B; ++bi) {
        const std::size_t a = view.anchor(segments[bi], t);
        const std::size_t row0 = a + 1 - static_cast<std::size_t>(L);
        const std::size_t n = static_cast<std::size_t>(t) * B + bi;
        for (int l = 0; l < L; ++l)
          for (int col = 0; col < data::kFeatureCols; ++col)
            steps[static_cast<std::size_t>(l)](n, static_cast<std::size_t>(col)) =
                view.features.at(row0 + static_cast<std::size_t>(l), col);
      }
    std::tie(wu_all, wd_all) = nn::forward_batched(tape, g.model, steps);
  }

  const auto Tz = static_cast<std::size_t>(T);
  std::vector<Id> wu(Tz), wd(Tz);
  for (std::size_t t = 0; t < Tz; ++t) {
    wu[t] = tape.slice_rows(wu_all, t * B, (t + 1) * B);
    wd[t] = tape.slice_rows(wd_all, t * B, (t + 1) * B);
  }

  std::vector<Id> rel_u_c(Tz), rel_d_c(Tz), mgmt_c(Tz), yu_c(Tz), yd_c(Tz), c1off_c(Tz),
      c2off_c(Tz);
  for (std::size_t t = 0; t < Tz; ++t) {
    nn::Matrix ru(B, 1), rd(B, 1), mg(B, 1), yu(B, 1), yd(B, 1), c1(B, 1), c2(B, 1);
    for (std::size_t bi = 0; bi < B; ++bi) {
      const std::size_t a = view.anchor(segments[bi], static_cast<int>(t));
      ru(bi, 0) = view.rel_u[a];
      rd(bi, 0) = view.rel_d[a];
      if (fee) mg(bi, 0) = view.mgmt[a];
      yu(bi, 0) = view.y_u[a];
      yd(bi, 0) = view.y_d[a];
      if (penalty_on) {
        const double bm = view.beta_hat[a];
        c1(bi, 0) = (1.0 + gamma) * bm;
        c2(bi, 0) = (1.0 - gamma) * bm;
      }
    }
    rel_u_c[t] = tape.constant(std::move(ru));
    rel_d_c[t] = tape.constant(std::move(rd));
    if (fee) mgmt_c[t] = tape.constant(std::move(mg));
    yu_c[t] = tape.constant(std::move(yu));
    yd_c[t] = tape.constant(std::move(yd));
    if (penalty_on) {
      c1off_c[t] = tape.constant(std::move(c1));
      c2off_c[t] = tape.constant(std::move(c2));
    }
  }

  const Id ones = tape.constant(nn::Matrix(B, 1, 1.0));
  std::vector<Id> vol_u(Tz, -1);
  if (penalty_on) vol_u[0] = tape.divide(tape.mul(ones, wu[0]), yu_c[0]);

  std::vector<Id> rets(Tz, -1);
  Id p_prev = ones;
  for (int k = 1; k <= T; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const Id su = tape.mul(wu[i], rel_u_c[i]);
    const Id sd = tape.mul(wd[i], rel_d_c[i]);
    const Id sum = tape.add(su, sd);
    const Id pprime = tape.mul(p_prev, sum);
    Id p_k = pprime;
    if (k < T) {
      const auto kz = static_cast<std::size_t>(k);
      if (fee) {
        const Id wpu = tape.divide(su, sum);
        const Id wpd = tape.divide(sd, sum);
        const Id num_u = tape.shift(tape.scale(tape.sub(wpd, tape.scale(wpu, omc)), c), omc);
        const Id den_u =
            tape.shift(tape.scale(tape.sub(wd[kz], tape.scale(wu[kz], omc)), c), omc);
        const Id num_d = tape.shift(tape.scale(tape.sub(wpu, tape.scale(wpd, omc)), c), omc);
        const Id den_d =
            tape.shift(tape.scale(tape.sub(wu[kz], tape.scale(wd[kz], omc)), c), omc);
        const Id mu = tape.select_pos(tape.sub(wpu, wu[kz]), tape.divide(num_u, den_u),
                                      tape.divide(num_d, den_d));
        p_k = tape.mul(tape.mul(mu, pprime), mgmt_c[i]);
      }
      if (penalty_on) vol_u[kz] = tape.divide(tape.mul(p_k, wu[kz]), yu_c[kz]);
    } else if (fee) {
      p_k = tape.mul(pprime, mgmt_c[i]);
    }
    rets[i] = tape.shift(tape.divide(p_k, p_prev), -1.0);
    p_prev = p_k;
  }

  Id rsum = rets[0];
  for (std::size_t k = 1; k < Tz; ++k) rsum = tape.add(rsum, rets[k]);
  const Id rmean = tape.scale(rsum, 1.0 / static_cast<double>(T));
  Id ss = -1;
  for (std::size_t k = 0; k < Tz; ++k) {
    const Id d = tape.sub(rets[k], rmean);
    const Id sq = tape.mul(d, d);
    ss = k == 0 ? sq : tape.add(ss, sq);
  }
  const Id sd_ = tape.sqrt(tape.scale(ss, 1.0 / static_cast<double>(T - 1)));
  Id loss = tape.neg(tape.divide(rmean, sd_));

  if (penalty_on) {
    Id pen = -1;
    for (std::size_t t = 0; t < Tz; ++t) {
      const Id bm =
          tape.neg(tape.divide(tape.mul(yu_c[t], wd[t]), tape.mul(yd_c[t], wu[t])));
      const Id C1 = tape.sub(bm, c1off_c[t]);
      const Id C2 = tape.sub(c2off_c[t], bm);
      Id hl;
      if (variant == losses::Variant::L1) {
        const Id v2 = tape.mul(vol_u[t], vol_u[t]);
        hl = tape.relu(tape.mul(tape.mul(tape.neg(v2), C1), C2));
      } else {
        const Id a_ = tape.relu(tape.mul(tape.neg(vol_u[t]), C1));
        const Id b_ = tape.relu(tape.mul(tape.neg(vol_u[t]), C2));
        hl = tape.add(tape.mul(a_, a_), tape.mul(b_, b_));
      }
      pen = t == 0 ? hl : tape.add(pen, hl);
    }
    const Id pen_term = tape.scale(tape.scale(pen, cfg.loss.xi), 1.0 / static_cast<double>(T));
    loss = tape.add(loss, pen_term);
  }

  g.seg_loss = loss;
  g.mean_loss = tape.mean(loss);
  return g;
}

RunResult train(const data::AlignedSeries& train_data, const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainingView view = prepare_training(train_data, cfg);

  RunResult res;
  res.config = cfg;
  res.params = nn::init_params(cfg.seed, data::kFeatureCols, cfg.hidden);

  std::vector<std::size_t> order(view.n_segments);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(cfg.seed ^ 0x5DEECE66DULL);

  const auto B = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t n_batches = (view.n_segments + B - 1) / B;
  const long total_steps = static_cast<long>(cfg.epochs) * static_cast<long>(n_batches);
  const std::size_t chunk_segs = std::max<std::size_t>(
      1, static_cast<std::size_t>(cfg.chunk_windows) / static_cast<std::size_t>(cfg.T_seq));

  nn::AdamW opt(cfg.weight_decay);
  long step = 0;
  nn::Tape tape;

  std::array<nn::Matrix, 5> acc;
  const auto param_ptrs = [&res] {
    return std::vector<nn::Matrix*>{&res.params.W, &res.params.U, &res.params.b,
                                    &res.params.Wh, &res.params.bh};
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    blvt::shuffle(order, shuffle_rng);
    double epoch_sum = 0.0;
    for (std::size_t bi = 0; bi < n_batches; ++bi) {
      const std::size_t lo = bi * B;
      const std::size_t hi = std::min(lo + B, view.n_segments);
      const std::span<const std::size_t> batch(order.data() + lo, hi - lo);

      {
        const auto ps = param_ptrs();
        for (std::size_t j = 0; j < 5; ++j) acc[j] = nn::Matrix::zeros(ps[j]->rows, ps[j]->cols);
      }
      double batch_loss = 0.0;
      for (std::size_t off = 0; off < batch.size(); off += chunk_segs) {
        const auto len = std::min(chunk_segs, batch.size() - off);
        tape.reset();
        const auto graph = build_batch_graph(tape, view, res.params, batch.subspan(off, len), cfg);
        const double chunk_loss = tape.value(graph.mean_loss)(0, 0);
        if (!std::isfinite(chunk_loss))
          throw DivergenceError("training: non-finite loss at epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(bi));
        tape.backward(graph.mean_loss);
        const double wgt = static_cast<double>(len) / static_cast<double>(batch.size());
        batch_loss += chunk_loss * wgt;
        const std::array<nn::Tape::Id, 5> ids{graph.model.W, graph.model.U, graph.model.b,
                                              graph.model.Wh, graph.model.bh};
        for (std::size_t j = 0; j < 5; ++j) {
          const nn::Matrix& grad = tape.grad(ids[j]);
          if (grad.empty()) continue;
          for (std::size_t e = 0; e < grad.size(); ++e) acc[j].data[e] += wgt * grad.data[e];
        }
      }
      const double lr = nn::cosine_lr(step, total_steps, cfg.base_lr);
      opt.step(param_ptrs(),
               {&acc[0], &acc[1], &acc[2], &acc[3], &acc[4]}, lr);
      ++step;
      epoch_sum += batch_loss;
    }
    res.epoch_loss.push_back(epoch_sum / static_cast<double>(n_batches));
  }
  tape.reset();

  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::vector<GridEntry> grid_search(const data::AlignedSeries& full,
                                   std::span<const data::SplitSpec> periods,
                                   std::span<const TrainConfig> configs,
                                   std::span<const std::uint64_t> seeds,
                                   const PeriodEvaluator& evaluate) {
  if (configs.empty() || periods.empty()) throw ConfigError("grid search: empty grid");
  if (seeds.empty()) throw ConfigError("grid search: no seeds");
  {
    const std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size()) throw SeedError("grid search: duplicate seeds");
  }

  std::vector<data::AlignedSeries> train_slices;
  train_slices.reserve(periods.size());
  for (const auto& p : periods) train_slices.push_back(data::split(full, p).first);

  std::vector<GridEntry> entries;
  for (const auto& base_cfg : configs) {
    GridEntry entry;
    entry.config = base_cfg;
    std::vector<double> per_seed;
    for (const auto seed : seeds) {
      double sharpe_sum = 0.0;
      std::vector<RunResult> seed_runs;
      bool ok = true;
      try {
        for (std::size_t p = 0; p < periods.size(); ++p) {
          TrainConfig cfg = base_cfg;
          cfg.seed = seed;
          cfg.not_after = periods[p].train_end;
          RunResult run = train(train_slices[p], cfg);
          const auto row = evaluate(run.params, cfg, p);
          run.test_metrics = {row};
          sharpe_sum += row.sharpe;
          seed_runs.push_back(std::move(run));
        }
      } catch (const Error& err) {
        log::warn(std::string("grid search: run failed (seed ") + std::to_string(seed) +
                  "): " + err.what());
        ok = false;
      }
      if (ok) {
        per_seed.push_back(sharpe_sum / static_cast<double>(periods.size()));
        for (auto& r : seed_runs) entry.runs.push_back(std::move(r));
      } else {
        ++entry.failed_runs;
      }
    }

    if (per_seed.empty()) {
      entry.mean_sharpe = -std::numeric_limits<double>::infinity();
      entry.std_sharpe = 0.0;
    } else {
      double mean = 0.0;
      for (const double s : per_seed) mean += s;
      mean /= static_cast<double>(per_seed.size());
      entry.mean_sharpe = mean;
      if (per_seed.size() > 1) {
        double ssq = 0.0;
        for (const double s : per_seed) ssq += (s - mean) * (s - mean);
        entry.std_sharpe = std::sqrt(ssq / static_cast<double>(per_seed.size() - 1));
      }
    }
    entries.push_back(std::move(entry));
  }

  std::stable_sort(entries.begin(), entries.end(),
                   [](const GridEntry& a, const GridEntry& b) {
                     return a.mean_sharpe > b.mean_sharpe;
                   });
  return entries;
}

}  // namespace blvt::training
